//! Ground-truth images that are bounded by one and invariant under the
//! in-band projection.

use std::f64::consts::PI;

use ndarray::{s, Array1, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::transform::{cutoff_index_for, CosineBasis, GridSpec};

/// Tolerance for the projection-invariance check in [`BandlimitedImage::from_pixels`].
pub const BAND_TOLERANCE: f64 = 1e-9;

/// An image `g` with `|g| <= 1` whose cosine spectrum vanishes at and above
/// `cutoff` on both axes.
#[derive(Debug, Clone, PartialEq)]
pub struct BandlimitedImage {
    pixels: Array2<f64>,
    grid: GridSpec,
    f_m: f64,
    cutoff: usize,
}

impl BandlimitedImage {
    /// Wraps pixels after checking both invariants.
    pub fn from_pixels(pixels: Array2<f64>, grid: GridSpec, f_m: f64, cutoff: usize) -> Result<Self> {
        if pixels.dim() != (grid.n, grid.n) {
            return Err(Error::DimensionMismatch {
                expected: format!("{0}x{0}", grid.n),
                found: format!("{}x{}", pixels.nrows(), pixels.ncols()),
            });
        }
        let peak = max_abs(pixels.view());
        if peak > 1.0 {
            return Err(Error::param("pixels", format!("max |pixel| = {peak} exceeds 1")));
        }
        let projected = CosineBasis::new(grid.n).lowpass(pixels.view(), cutoff)?;
        let dev = max_abs_diff(projected.view(), pixels.view());
        if dev > BAND_TOLERANCE {
            return Err(Error::param(
                "pixels",
                format!("not in band below index {cutoff} (deviation {dev:e})"),
            ));
        }
        Ok(Self {
            pixels,
            grid,
            f_m,
            cutoff,
        })
    }

    /// Constant image; the DC term is always in band.
    pub fn constant(value: f64, grid: GridSpec, f_m: f64, cutoff: usize) -> Result<Self> {
        if value.is_nan() || value.abs() > 1.0 {
            return Err(Error::param("value", format!("{value} is outside [-1, 1]")));
        }
        if cutoff == 0 || cutoff > grid.n {
            return Err(Error::CutoffOutOfRange { cutoff, n: grid.n });
        }
        Ok(Self {
            pixels: Array2::from_elem((grid.n, grid.n), value),
            grid,
            f_m,
            cutoff,
        })
    }

    pub fn pixels(&self) -> ArrayView2<'_, f64> {
        self.pixels.view()
    }

    pub fn into_pixels(self) -> Array2<f64> {
        self.pixels
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Band limit in cycles per unit.
    pub fn f_m(&self) -> f64 {
        self.f_m
    }

    /// Angular band limit `2 pi f_m`.
    pub fn omega_m(&self) -> f64 {
        2.0 * PI * self.f_m
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }
}

/// `cos(2 pi f_m x_i)` sampled on the grid, without band projection.
pub fn cosine_profile(f_m: f64, grid: &GridSpec) -> Array1<f64> {
    grid.coords().mapv(|x| (2.0 * PI * f_m * x).cos())
}

/// Synthetic image `cos(2 pi f_m x) cos(2 pi f_m y)`.
///
/// A cosine whose frequency is not a multiple of the basis spacing `1/(2L)`
/// leaks into every cosine coefficient, so the profile is projected onto the
/// band per axis (keeping the image separable) and then rescaled if the
/// projection overshoots one. The result is within a few percent of the raw
/// cosine away from the borders.
pub fn make_cosine_image(f_m: f64, grid: &GridSpec, lambda: f64) -> Result<BandlimitedImage> {
    let cutoff = cutoff_index_for(f_m, grid, lambda)?;
    let basis = CosineBasis::new(grid.n);
    let band = basis.rows().slice_move(s![..cutoff, ..]);
    let raw = cosine_profile(f_m, grid);
    let mut row = band.t().dot(&band.dot(&raw));
    let peak = row.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 1.0 {
        row.mapv_inplace(|v| v / peak);
    }
    let pixels = Array2::from_shape_fn((grid.n, grid.n), |(i, j)| row[i] * row[j]);
    Ok(BandlimitedImage {
        pixels,
        grid: *grid,
        f_m,
        cutoff,
    })
}

/// Maps 8-bit gray levels to `[-1, 1]` via `v = raw / 127.5 - 1`.
pub fn scale_gray(raw: ArrayView2<f64>) -> Array2<f64> {
    raw.mapv(|v| v / 127.5 - 1.0)
}

/// Band-limits a grayscale image given in `[0, 255]`.
///
/// The image is scaled to `[-1, 1]`, projected onto the band, and divided by
/// its peak magnitude only if the projection overshoots one. Clipping would
/// push energy back out of band, so it is never used.
pub fn bandlimit_image(
    raw: ArrayView2<f64>,
    grid: &GridSpec,
    f_m: f64,
    lambda: f64,
) -> Result<BandlimitedImage> {
    if raw.dim() != (grid.n, grid.n) {
        return Err(Error::DimensionMismatch {
            expected: format!("{0}x{0}", grid.n),
            found: format!("{}x{}", raw.nrows(), raw.ncols()),
        });
    }
    let cutoff = cutoff_index_for(f_m, grid, lambda)?;
    let scaled = scale_gray(raw);
    let mut pixels = CosineBasis::new(grid.n).lowpass(scaled.view(), cutoff)?;
    let peak = max_abs(pixels.view());
    if peak > 1.0 {
        pixels.mapv_inplace(|v| v / peak);
    }
    Ok(BandlimitedImage {
        pixels,
        grid: *grid,
        f_m,
        cutoff,
    })
}

/// Mean squared difference between a scaled raw image and its band-limited
/// version, over the whole grid.
pub fn out_of_band_distortion(raw_scaled: ArrayView2<f64>, banded: &BandlimitedImage) -> Result<f64> {
    if raw_scaled.dim() != banded.pixels.dim() {
        return Err(Error::DimensionMismatch {
            expected: format!("{:?}", banded.pixels.dim()),
            found: format!("{:?}", raw_scaled.dim()),
        });
    }
    let sum: f64 = raw_scaled
        .iter()
        .zip(banded.pixels.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / raw_scaled.len() as f64)
}

pub(crate) fn max_abs(a: ArrayView2<f64>) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

pub(crate) fn max_abs_diff(a: ArrayView2<f64>, b: ArrayView2<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transform::lowpass_fct;
    use approx::assert_abs_diff_eq;
    use rand_chacha::ChaCha8Rng;
    use rand_core::{RngCore, SeedableRng};

    fn large_grid() -> GridSpec {
        GridSpec::centered(2048, 0.0025).unwrap()
    }

    fn check_invariants(img: &BandlimitedImage) {
        assert!(max_abs(img.pixels()) <= 1.0);
        let p = lowpass_fct(img.pixels(), img.grid(), img.cutoff()).unwrap();
        assert!(max_abs_diff(p.view(), img.pixels()) <= 1e-9);
    }

    #[test]
    fn raw_cosine_values() {
        let g = large_grid();
        let prof = cosine_profile(4.0, &g);
        let origin = g.nearest_index(0.0);
        assert_eq!(g.coord(origin), 0.0);
        assert_eq!(prof[origin], 1.0);
        let quarter = g.nearest_index(1.0 / 16.0);
        assert_abs_diff_eq!(g.coord(quarter), 0.0625, epsilon = 1e-12);
        assert_abs_diff_eq!(prof[quarter], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn cosine_image_on_small_grid() {
        let g = GridSpec::centered(512, 0.005).unwrap();
        let img = make_cosine_image(2.0, &g, 2.0).unwrap();
        assert_eq!(img.cutoff(), 19);
        check_invariants(&img);
        // Separable factorization.
        let px = img.pixels();
        let c = g.nearest_index(0.0);
        let row: Vec<f64> = (0..g.n).map(|j| px[[c, j]]).collect();
        let col: Vec<f64> = (0..g.n).map(|i| px[[i, c]]).collect();
        let pivot = px[[c, c]];
        for i in (0..g.n).step_by(7) {
            for j in (0..g.n).step_by(5) {
                assert!((px[[i, j]] - col[i] * row[j] / pivot).abs() <= 1e-12);
            }
        }
        // Up to the peak rescale, the profile tracks the raw cosine in the
        // middle of the grid.
        let raw = cosine_profile(2.0, &g);
        for j in 128..384 {
            assert!((row[j] / pivot - raw[j] / raw[c]).abs() < 0.03);
        }
    }

    #[test]
    fn cosine_image_on_large_grid() {
        let g = large_grid();
        let img = make_cosine_image(4.0, &g, 2.0).unwrap();
        assert_eq!(img.cutoff(), 72);
        check_invariants(&img);
        let c = g.nearest_index(0.0);
        let q = g.nearest_index(1.0 / 16.0);
        // Border overshoot of the projection forces a rescale by ~1/1.06 per axis.
        assert_abs_diff_eq!(img.pixels()[[c, c]], 1.0, epsilon = 0.11);
        assert_abs_diff_eq!(img.pixels()[[q, c]], 0.0, epsilon = 0.01);
    }

    #[test]
    fn cosine_image_rejects_unrepresentable_band() {
        let g = GridSpec::centered(64, 0.01).unwrap();
        assert!(matches!(
            make_cosine_image(40.0, &g, 2.0),
            Err(Error::CutoffOutOfRange { .. })
        ));
    }

    #[test]
    fn bandlimit_constants() {
        let g = GridSpec::centered(64, 0.05).unwrap();
        let white = bandlimit_image(Array2::from_elem((64, 64), 255.0).view(), &g, 2.0, 2.0).unwrap();
        assert!(white.pixels().iter().all(|v| (v - 1.0).abs() < 1e-12));
        let black = bandlimit_image(Array2::zeros((64, 64)).view(), &g, 2.0, 2.0).unwrap();
        assert!(black.pixels().iter().all(|v| (v + 1.0).abs() < 1e-12));
        let mid = bandlimit_image(Array2::from_elem((64, 64), 127.5).view(), &g, 2.0, 2.0).unwrap();
        assert!(mid.pixels().iter().all(|v| *v == 0.0 || v.abs() < 1e-15));
        assert!(bandlimit_image(Array2::zeros((64, 63)).view(), &g, 2.0, 2.0).is_err());
    }

    #[test]
    fn bandlimit_is_idempotent_and_valid() {
        let n = 96;
        let g = GridSpec::centered(n, 0.05).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let raw = Array2::from_shape_fn((n, n), |_| (rng.next_u32() % 256) as f64);
        let once = bandlimit_image(raw.view(), &g, 2.0, 2.0).unwrap();
        check_invariants(&once);
        let again = CosineBasis::new(n).lowpass(once.pixels(), once.cutoff()).unwrap();
        assert!(max_abs_diff(again.view(), once.pixels()) <= 1e-9);
        assert!(BandlimitedImage::from_pixels(once.pixels().to_owned(), g, 2.0, once.cutoff()).is_ok());
    }

    #[test]
    fn white_noise_energy_fraction() {
        // Zero-mean white noise keeps about (cutoff / n)^2 of its energy.
        let n = 64;
        let g = GridSpec::centered(n, 0.05).unwrap();
        let cutoff = cutoff_index_for(2.0, &g, 2.0).unwrap();
        let basis = CosineBasis::new(n);
        let expected = (cutoff as f64 / n as f64).powi(2);
        let mut ratios = Vec::new();
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let raw = Array2::from_shape_fn((n, n), |_| (rng.next_u32() % 256) as f64);
            let v = scale_gray(raw.view());
            let mean = v.mean().unwrap();
            let centered = v.mapv(|x| x - mean);
            let kept = basis.lowpass(centered.view(), cutoff).unwrap();
            let e_in: f64 = kept.iter().map(|x| x * x).sum();
            let e_all: f64 = centered.iter().map(|x| x * x).sum();
            ratios.push(e_in / e_all);
        }
        let avg = ratios.iter().sum::<f64>() / ratios.len() as f64;
        assert!((avg - expected).abs() <= 0.1 * expected, "avg={avg} expected={expected}");
    }

    #[test]
    fn out_of_band_examples() {
        let g = GridSpec::centered(32, 0.05).unwrap();
        let img = BandlimitedImage::constant(0.2, g, 2.0, 5).unwrap();
        assert_eq!(out_of_band_distortion(img.pixels(), &img).unwrap(), 0.0);
        let shifted = img.pixels().mapv(|v| v + 0.1);
        assert_abs_diff_eq!(out_of_band_distortion(shifted.view(), &img).unwrap(), 0.01, epsilon = 1e-12);

        // Pure out-of-band cosine of amplitude A along one axis.
        let n = 32;
        let basis = CosineBasis::new(n);
        let amp = 0.6;
        let k = 20;
        let cos_img = Array2::from_shape_fn((n, n), |(i, _)| {
            amp * (PI * k as f64 * (i as f64 + 0.5) / n as f64).cos()
        });
        let zero = BandlimitedImage::constant(0.0, g, 2.0, 5).unwrap();
        let oob = basis.lowpass(cos_img.view(), 5).unwrap();
        assert!(max_abs(oob.view()) < 1e-12);
        let direct: f64 = cos_img.iter().map(|v| v * v).sum::<f64>() / (n * n) as f64;
        let d = out_of_band_distortion(cos_img.view(), &zero).unwrap();
        assert_abs_diff_eq!(d, direct, epsilon = 1e-15);
        assert!((d - amp * amp / 2.0).abs() <= 0.02 * amp * amp / 2.0);
        assert!(out_of_band_distortion(Array2::zeros((3, 3)).view(), &zero).is_err());
    }

    #[test]
    fn from_pixels_rejects_violations() {
        let g = GridSpec::centered(16, 0.1).unwrap();
        let loud = Array2::from_elem((16, 16), 1.5);
        assert!(BandlimitedImage::from_pixels(loud, g, 1.0, 4).is_err());
        let mut spike = Array2::zeros((16, 16));
        spike[[3, 3]] = 0.5;
        assert!(BandlimitedImage::from_pixels(spike, g, 1.0, 4).is_err());
    }
}
