//! Orthonormal type-II cosine transform on a uniform grid, and the in-band
//! projection built on top of it.
//!
//! The transform is the discrete stand-in for the continuous Fourier cosine
//! transform. Coefficient `k` along an axis of length `L = n * dx`
//! corresponds to the frequency `k / (2L)` cycles per unit. The transform's
//! implicit boundary condition is an even reflection about the half-sample
//! points `x0 - dx/2` and `x0 + L - dx/2`.

use std::f64::consts::PI;

use ndarray::{s, Array1, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::kernel::{trapezoid_response, KernelParams};

/// Per-axis cutoff allowance, multiplied by `lambda`.
///
/// The minimal band `2 L f_m` is widened to cover the kernel's taper. The
/// value is calibrated so that the 5.12-unit grid with `f_m = 4` and
/// `lambda = 2` keeps 72 coefficients per axis.
pub const TAPER_ALLOWANCE: f64 = 0.86;

/// Uniform 1-D grid, used identically on both image axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub x0: f64,
    pub dx: f64,
    pub n: usize,
}

impl GridSpec {
    pub fn new(x0: f64, dx: f64, n: usize) -> Result<Self> {
        if !x0.is_finite() {
            return Err(Error::param("x0", "must be finite"));
        }
        if !(dx.is_finite() && dx > 0.0) {
            return Err(Error::param("dx", format!("{dx} must be positive")));
        }
        if n < 2 {
            return Err(Error::param("n", format!("{n} must be at least 2")));
        }
        Ok(Self { x0, dx, n })
    }

    /// Grid of `n` points with spacing `dx` whose origin sits on grid point
    /// `(n - 1) / 2` (rounded down), e.g. `-2.5575:0.0025:2.56` for 2048 points.
    pub fn centered(n: usize, dx: f64) -> Result<Self> {
        Self::new(-(((n.max(1) - 1) / 2) as f64) * dx, dx, n)
    }

    /// Extent `n * dx`.
    pub fn length(&self) -> f64 {
        self.n as f64 * self.dx
    }

    pub fn coord(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx
    }

    pub fn coords(&self) -> Array1<f64> {
        Array1::from_iter((0..self.n).map(|i| self.coord(i)))
    }

    /// Index of the grid point closest to `x`, clamped to the grid.
    pub fn nearest_index(&self, x: f64) -> usize {
        let i = ((x - self.x0) / self.dx).round();
        i.clamp(0.0, (self.n - 1) as f64) as usize
    }

    /// Frequency spacing of the cosine basis, in cycles per unit.
    pub fn frequency_resolution(&self) -> f64 {
        1.0 / (2.0 * self.length())
    }
}

/// Orthonormal DCT-II basis matrix; row `k` is the `k`-th basis vector.
#[derive(Debug, Clone)]
pub struct CosineBasis {
    rows: Array2<f64>,
}

impl CosineBasis {
    pub fn new(n: usize) -> Self {
        let nf = n as f64;
        let dc = (1.0 / nf).sqrt();
        let ac = (2.0 / nf).sqrt();
        let rows = Array2::from_shape_fn((n, n), |(k, i)| {
            let scale = if k == 0 { dc } else { ac };
            scale * (PI * k as f64 * (i as f64 + 0.5) / nf).cos()
        });
        Self { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> ArrayView2<'_, f64> {
        self.rows.view()
    }

    fn check_square(&self, a: &ArrayView2<f64>) -> Result<()> {
        let n = self.len();
        if a.dim() != (n, n) {
            return Err(Error::DimensionMismatch {
                expected: format!("{n}x{n}"),
                found: format!("{}x{}", a.nrows(), a.ncols()),
            });
        }
        Ok(())
    }

    pub fn forward(&self, image: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_square(&image)?;
        Ok(self.rows.dot(&image).dot(&self.rows.t()))
    }

    pub fn inverse(&self, coefficients: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_square(&coefficients)?;
        Ok(self.rows.t().dot(&coefficients).dot(&self.rows))
    }

    /// Keeps coefficients with both indices below `cutoff`, zeroes the rest.
    ///
    /// Only the retained rows of the basis are touched, so the cost scales
    /// with `n^2 * cutoff` rather than `n^3`.
    pub fn lowpass(&self, image: ArrayView2<f64>, cutoff: usize) -> Result<Array2<f64>> {
        self.check_square(&image)?;
        check_cutoff(cutoff, self.len())?;
        let band = self.rows.slice(s![..cutoff, ..]);
        let coeffs = band.dot(&image).dot(&band.t());
        Ok(band.t().dot(&coeffs).dot(&band))
    }

    /// Like [`lowpass`](Self::lowpass) but with per-axis weights that mirror
    /// the kernel's trapezoid response: flat up to index
    /// `cutoff * pi / (pi + 2a)`, then a linear descent reaching zero at
    /// `cutoff`. Not a projection.
    pub fn lowpass_tapered(
        &self,
        image: ArrayView2<f64>,
        cutoff: usize,
        params: &KernelParams,
    ) -> Result<Array2<f64>> {
        self.check_square(&image)?;
        check_cutoff(cutoff, self.len())?;
        let weights = taper_weights(cutoff, params);
        let band = self.rows.slice(s![..cutoff, ..]);
        let mut coeffs = band.dot(&image).dot(&band.t());
        for ((r, c), v) in coeffs.indexed_iter_mut() {
            *v *= weights[r] * weights[c];
        }
        Ok(band.t().dot(&coeffs).dot(&band))
    }
}

fn taper_weights(cutoff: usize, params: &KernelParams) -> Vec<f64> {
    let edge = params.stopband_edge();
    (0..cutoff)
        .map(|k| trapezoid_response(k as f64 / cutoff as f64 * edge, params))
        .collect()
}

fn check_cutoff(cutoff: usize, n: usize) -> Result<()> {
    if cutoff == 0 || cutoff > n {
        return Err(Error::CutoffOutOfRange { cutoff, n });
    }
    Ok(())
}

fn check_grid(image: &ArrayView2<f64>, grid: &GridSpec) -> Result<()> {
    if image.dim() != (grid.n, grid.n) {
        return Err(Error::DimensionMismatch {
            expected: format!("{0}x{0}", grid.n),
            found: format!("{}x{}", image.nrows(), image.ncols()),
        });
    }
    Ok(())
}

/// Cosine-transform coefficients of an image on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumGrid {
    pub coefficients: Array2<f64>,
    pub grid: GridSpec,
}

pub fn fct_forward(image: ArrayView2<f64>, grid: &GridSpec) -> Result<SpectrumGrid> {
    check_grid(&image, grid)?;
    let coefficients = CosineBasis::new(grid.n).forward(image)?;
    Ok(SpectrumGrid {
        coefficients,
        grid: *grid,
    })
}

pub fn fct_inverse(spectrum: &SpectrumGrid) -> Result<Array2<f64>> {
    check_grid(&spectrum.coefficients.view(), &spectrum.grid)?;
    CosineBasis::new(spectrum.grid.n).inverse(spectrum.coefficients.view())
}

/// In-band projection: zero every coefficient with either index `>= cutoff`.
pub fn lowpass_fct(image: ArrayView2<f64>, grid: &GridSpec, cutoff: usize) -> Result<Array2<f64>> {
    check_grid(&image, grid)?;
    CosineBasis::new(grid.n).lowpass(image, cutoff)
}

/// Cutoff index for a signal bandlimited to `f_m` cycles per unit, widened
/// by `lambda * TAPER_ALLOWANCE` to cover the kernel taper.
pub fn cutoff_index_for(f_m: f64, grid: &GridSpec, lambda: f64) -> Result<usize> {
    cutoff_index_with_margin(f_m, grid, lambda * TAPER_ALLOWANCE)
}

/// `ceil(2 L f_m margin) + 1`, rejected when it exceeds the grid size.
pub fn cutoff_index_with_margin(f_m: f64, grid: &GridSpec, margin: f64) -> Result<usize> {
    if !(f_m.is_finite() && f_m > 0.0) {
        return Err(Error::param("f_m", format!("{f_m} must be positive")));
    }
    if !(margin.is_finite() && margin > 0.0) {
        return Err(Error::param("margin", format!("{margin} must be positive")));
    }
    let raw = 2.0 * grid.length() * f_m * margin;
    // Absorb representation error so exact integers do not round up.
    let cutoff = (raw - 1e-9 * raw.max(1.0)).ceil() as usize + 1;
    if cutoff > grid.n {
        return Err(Error::CutoffOutOfRange {
            cutoff,
            n: grid.n,
        });
    }
    Ok(cutoff)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;
    use proptest::prelude::*;

    fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    fn lcg_image(n: usize, seed: u64) -> Array2<f64> {
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        Array2::from_shape_fn((n, n), |_| {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        })
    }

    /// Textbook double sum, independent of the basis matrix.
    fn direct_dct2(x: &Array2<f64>) -> Array2<f64> {
        let n = x.nrows();
        let nf = n as f64;
        let c = |k: usize| if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
        Array2::from_shape_fn((n, n), |(k, l)| {
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    acc += x[[i, j]]
                        * (PI * k as f64 * (i as f64 + 0.5) / nf).cos()
                        * (PI * l as f64 * (j as f64 + 0.5) / nf).cos();
                }
            }
            c(k) * c(l) * acc
        })
    }

    fn grid(n: usize) -> GridSpec {
        GridSpec::new(0.0, 0.01, n).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(0.0, 0.0, 8).is_err());
        assert!(GridSpec::new(0.0, 0.1, 1).is_err());
        let g = GridSpec::centered(2048, 0.0025).unwrap();
        assert_abs_diff_eq!(g.x0, -2.5575, epsilon = 1e-12);
        assert_abs_diff_eq!(g.coord(2047), 2.56, epsilon = 1e-12);
        assert_abs_diff_eq!(g.length(), 5.12, epsilon = 1e-12);
        assert_eq!(g.coord(1023), 0.0);
    }

    #[test]
    fn matches_direct_sum() {
        let x = lcg_image(8, 3);
        let spectrum = fct_forward(x.view(), &grid(8)).unwrap();
        assert!(max_abs_diff(&spectrum.coefficients, &direct_dct2(&x)) < 1e-12);
    }

    #[test]
    fn constant_image_is_dc_only() {
        let n = 16;
        let c = 0.37;
        let spectrum = fct_forward(Array2::from_elem((n, n), c).view(), &grid(n)).unwrap();
        for ((k, l), v) in spectrum.coefficients.indexed_iter() {
            if (k, l) == (0, 0) {
                assert_abs_diff_eq!(*v, c * n as f64, epsilon = 1e-12);
            } else {
                assert!(v.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn basis_image_has_single_coefficient() {
        let n = 16;
        let basis = CosineBasis::new(n);
        let (k, l) = (3, 7);
        let img = Array2::from_shape_fn((n, n), |(i, j)| basis.rows()[[k, i]] * basis.rows()[[l, j]]);
        let spectrum = fct_forward(img.view(), &grid(n)).unwrap();
        for ((a, b), v) in spectrum.coefficients.indexed_iter() {
            let expected = if (a, b) == (k, l) { 1.0 } else { 0.0 };
            assert_abs_diff_eq!(*v, expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn round_trips() {
        let x = lcg_image(8, 11);
        let g = grid(8);
        let back = fct_inverse(&fct_forward(x.view(), &g).unwrap()).unwrap();
        assert!(max_abs_diff(&back, &x) < 1e-10);

        let s = lcg_image(16, 5);
        let spectrum = SpectrumGrid {
            coefficients: s.clone(),
            grid: grid(16),
        };
        let img = fct_inverse(&spectrum).unwrap();
        let again = fct_forward(img.view(), &grid(16)).unwrap();
        assert!(max_abs_diff(&again.coefficients, &s) < 1e-10);
    }

    #[test]
    fn inverse_of_zero_and_constant() {
        let g = grid(12);
        let zero = SpectrumGrid {
            coefficients: Array2::zeros((12, 12)),
            grid: g,
        };
        assert!(fct_inverse(&zero).unwrap().iter().all(|v| *v == 0.0));
        let mut dc = Array2::zeros((12, 12));
        dc[[0, 0]] = 12.0 * -0.25;
        let img = fct_inverse(&SpectrumGrid { coefficients: dc, grid: g }).unwrap();
        assert!(img.iter().all(|v| (v + 0.25).abs() < 1e-12));
    }

    #[test]
    fn dimension_mismatch() {
        let x = Array2::<f64>::zeros((8, 9));
        assert!(matches!(
            fct_forward(x.view(), &grid(8)),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(lowpass_fct(Array2::zeros((8, 8)).view(), &grid(9), 3).is_err());
    }

    #[test]
    fn parseval_large() {
        let n = 256;
        let x = lcg_image(n, 9);
        let spectrum = fct_forward(x.view(), &grid(n)).unwrap();
        let e_img: f64 = x.iter().map(|v| v * v).sum();
        let e_coef: f64 = spectrum.coefficients.iter().map(|v| v * v).sum();
        assert!(((e_img - e_coef) / e_img).abs() < 1e-9);
    }

    #[test]
    fn lowpass_examples() {
        let n = 32;
        let g = grid(n);
        let basis = CosineBasis::new(n);
        let cutoff = 6;
        // In-band image: combination of low basis functions.
        let mut coeffs = Array2::zeros((n, n));
        coeffs[[0, 0]] = 2.0;
        coeffs[[5, 1]] = -1.5;
        coeffs[[2, 4]] = 0.7;
        let img = basis.inverse(coeffs.view()).unwrap();
        let out = lowpass_fct(img.view(), &g, cutoff).unwrap();
        assert!(max_abs_diff(&out, &img) < 1e-9);

        let mut oob = Array2::zeros((n, n));
        oob[[2, cutoff]] = 1.0;
        let oob_img = basis.inverse(oob.view()).unwrap();
        let out = lowpass_fct(oob_img.view(), &g, cutoff).unwrap();
        assert!(out.iter().all(|v| v.abs() < 1e-12));

        let x = lcg_image(n, 1);
        let once = lowpass_fct(x.view(), &g, cutoff).unwrap();
        let twice = lowpass_fct(once.view(), &g, cutoff).unwrap();
        assert!(max_abs_diff(&once, &twice) <= 1e-12);
    }

    #[test]
    fn cutoff_range_checked() {
        let g = grid(8);
        let x = Array2::zeros((8, 8));
        assert!(matches!(
            lowpass_fct(x.view(), &g, 0),
            Err(Error::CutoffOutOfRange { .. })
        ));
        assert!(lowpass_fct(x.view(), &g, 9).is_err());
        assert!(lowpass_fct(x.view(), &g, 8).is_ok());
    }

    #[test]
    fn cutoff_indices() {
        let large = GridSpec::centered(2048, 0.0025).unwrap();
        assert_eq!(cutoff_index_for(4.0, &large, 2.0).unwrap(), 72);
        assert_eq!(cutoff_index_with_margin(4.0, &large, 1.0).unwrap(), 42);
        let small = GridSpec::centered(512, 0.005).unwrap();
        assert_eq!(cutoff_index_for(2.0, &small, 2.0).unwrap(), 19);
        assert!(matches!(
            cutoff_index_for(400.0, &large, 2.0),
            Err(Error::CutoffOutOfRange { .. })
        ));
        assert!(cutoff_index_for(-1.0, &large, 2.0).is_err());
        // Exact integer products do not round up.
        let g = GridSpec::new(0.0, 0.005, 500).unwrap();
        assert_eq!(cutoff_index_with_margin(2.0, &g, 1.0).unwrap(), 11);
    }

    #[test]
    fn tapered_mask_shape() {
        let n = 32;
        let basis = CosineBasis::new(n);
        let params = KernelParams::new(2.0).unwrap();
        let w = taper_weights(10, &params);
        assert_eq!(w[0], 1.0);
        assert!(w.windows(2).all(|p| p[1] <= p[0]));
        // DC passes untouched; content at the cutoff is removed.
        let dc = Array2::from_elem((n, n), 0.5);
        let out = basis.lowpass_tapered(dc.view(), 10, &params).unwrap();
        assert!(max_abs_diff(&out, &dc) < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn lowpass_is_self_adjoint_and_contractive(seed_x in any::<u64>(), seed_y in any::<u64>(), cutoff in 1usize..24) {
            let n = 24;
            let g = grid(n);
            let x = lcg_image(n, seed_x);
            let y = lcg_image(n, seed_y);
            let px = lowpass_fct(x.view(), &g, cutoff).unwrap();
            let py = lowpass_fct(y.view(), &g, cutoff).unwrap();
            let lhs: f64 = px.iter().zip(y.iter()).map(|(a, b)| a * b).sum();
            let rhs: f64 = x.iter().zip(py.iter()).map(|(a, b)| a * b).sum();
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
            let ex: f64 = x.iter().map(|v| v * v).sum();
            let epx: f64 = px.iter().map(|v| v * v).sum();
            prop_assert!(epx <= ex * (1.0 + 1e-12));
            // Linearity.
            let sum = &x * 0.3 + &y * -1.7;
            let psum = lowpass_fct(sum.view(), &g, cutoff).unwrap();
            let expect = &px * 0.3 + &py * -1.7;
            prop_assert!(max_abs_diff(&psum, &expect) <= 1e-10);
        }

        #[test]
        fn parseval(seed in any::<u64>(), n in 2usize..40) {
            let x = lcg_image(n, seed);
            let spectrum = fct_forward(x.view(), &grid(n)).unwrap();
            let e_img: f64 = x.iter().map(|v| v * v).sum();
            let e_coef: f64 = spectrum.coefficients.iter().map(|v| v * v).sum();
            prop_assert!(((e_img - e_coef) / e_img).abs() < 1e-9);
        }
    }
}
