//! Sampling chains: lattice sampling of the fine-grid image, additive
//! Gaussian noise, optional dither, and quantization.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imagemodel::BandlimitedImage;
use crate::noise::{GaussianField, STREAM_DITHER, STREAM_NOISE};
use crate::transform::GridSpec;

/// Pixel quantizer at the end of the sampling chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QuantizerSpec {
    FullPrecision,
    /// Comparator at zero with output alphabet `{0, 1}`.
    SingleBit,
    /// Midrise quantizer with `2^bits` levels spanning `[-range, range]`.
    Uniform { bits: u8, range: f64 },
}

impl QuantizerSpec {
    /// Uniform quantizer covering the noisy signal out to four standard deviations.
    pub fn uniform_default(bits: u8, sigma2: f64, sigma_d2: f64) -> Self {
        QuantizerSpec::Uniform {
            bits,
            range: default_uniform_range(sigma2, sigma_d2),
        }
    }

    /// Fills a missing uniform range with [`default_uniform_range`].
    pub fn with_default_range(self, sigma2: f64, sigma_d2: f64) -> Self {
        match self {
            QuantizerSpec::Uniform { bits, range } if range.is_nan() => {
                QuantizerSpec::uniform_default(bits, sigma2, sigma_d2)
            }
            other => other,
        }
    }

    /// Short tag used in reports: `full`, `onebit`, `u<bits>`.
    pub fn tag(&self) -> String {
        match self {
            QuantizerSpec::FullPrecision => "full".into(),
            QuantizerSpec::SingleBit => "onebit".into(),
            QuantizerSpec::Uniform { bits, .. } => format!("u{bits}"),
        }
    }

    /// Tag byte of the sample container.
    pub fn code(&self) -> u8 {
        match self {
            QuantizerSpec::FullPrecision => 0,
            QuantizerSpec::SingleBit => 1,
            QuantizerSpec::Uniform { .. } => 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let QuantizerSpec::Uniform { bits, range } = *self {
            if !(2..=16).contains(&bits) {
                return Err(Error::param("bits", format!("{bits} is outside 2..=16")));
            }
            if !(range.is_finite() && range > 0.0) {
                return Err(Error::param("range", format!("{range} must be positive")));
            }
        }
        Ok(())
    }

    /// Step `2A / 2^bits` of a uniform quantizer.
    pub fn step(&self) -> Option<f64> {
        match *self {
            QuantizerSpec::Uniform { bits, range } => Some(2.0 * range / (1u32 << bits) as f64),
            _ => None,
        }
    }

    fn rank(&self) -> (u8, u8) {
        match *self {
            QuantizerSpec::Uniform { bits, .. } => (2, bits),
            other => (other.code(), 0),
        }
    }

    /// Report ordering: full precision, single bit, then uniform by bit depth.
    pub fn report_cmp(&self, other: &Self) -> Ordering {
        self.rank().cmp(&other.rank())
    }
}

impl fmt::Display for QuantizerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QuantizerSpec::FullPrecision => f.write_str("full"),
            QuantizerSpec::SingleBit => f.write_str("onebit"),
            QuantizerSpec::Uniform { bits, range } => write!(f, "uniform:{bits}:{range}"),
        }
    }
}

/// Parses `full`, `onebit`, `uniform:<bits>` or `uniform:<bits>:<range>`.
///
/// A missing range is left as NaN; callers fill it with
/// [`default_uniform_range`] once the noise variances are known.
impl FromStr for QuantizerSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "full" | "fullprecision" => return Ok(QuantizerSpec::FullPrecision),
            "onebit" | "single" | "singlebit" => return Ok(QuantizerSpec::SingleBit),
            _ => {}
        }
        let bad = || Error::param("quantizer", format!("cannot parse `{s}`"));
        let rest = s
            .strip_prefix("uniform:")
            .or_else(|| s.strip_prefix('u'))
            .ok_or_else(bad)?;
        let mut parts = rest.split(':');
        let bits: u8 = parts.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
        let range = match parts.next() {
            Some(r) => r.trim().parse().map_err(|_| bad())?,
            None => f64::NAN,
        };
        if parts.next().is_some() {
            return Err(bad());
        }
        Ok(QuantizerSpec::Uniform { bits, range })
    }
}

/// `A = 1 + 4 sqrt(sigma2 + sigma_d2)`.
pub fn default_uniform_range(sigma2: f64, sigma_d2: f64) -> f64 {
    1.0 + 4.0 * (sigma2 + sigma_d2).sqrt()
}

/// Midrise uniform quantization of one value.
pub fn quantize_uniform(value: f64, bits: u8, range: f64) -> f64 {
    let step = 2.0 * range / (1u32 << bits) as f64;
    let top = range - step / 2.0;
    let level = ((value / step).floor() + 0.5) * step;
    level.clamp(-top, top)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcquisitionConfig {
    /// Per-axis oversampling factor relative to the Nyquist rate `2 f_m`.
    pub n_factor: usize,
    pub sigma2: f64,
    pub sigma_d2: f64,
    pub quantizer: QuantizerSpec,
    pub seed: u64,
}

impl AcquisitionConfig {
    pub fn new(
        n_factor: usize,
        sigma2: f64,
        sigma_d2: f64,
        quantizer: QuantizerSpec,
        seed: u64,
    ) -> Result<Self> {
        let cfg = Self {
            n_factor,
            sigma2,
            sigma_d2,
            quantizer,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_factor == 0 {
            return Err(Error::param("N", "oversampling factor must be positive"));
        }
        if !(self.sigma2.is_finite() && self.sigma2 >= 0.0) {
            return Err(Error::param("sigma2", format!("{} must be >= 0", self.sigma2)));
        }
        if !(self.sigma_d2.is_finite() && self.sigma_d2 >= 0.0) {
            return Err(Error::param("sigma_d2", format!("{} must be >= 0", self.sigma_d2)));
        }
        if self.quantizer == QuantizerSpec::SingleBit && self.sigma_d2 <= 0.0 {
            return Err(Error::MissingDither);
        }
        self.quantizer.validate()
    }

    /// Variance of everything added before the quantizer.
    pub fn total_variance(&self) -> f64 {
        match self.quantizer {
            QuantizerSpec::FullPrecision => self.sigma2,
            _ => self.sigma2 + self.sigma_d2,
        }
    }
}

/// Sample sites on the fine grid: indices `origin + m * stride` for
/// `m in 0..count`, identical on both axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lattice {
    pub stride: usize,
    pub origin: usize,
    pub count: usize,
}

impl Lattice {
    /// Lattice with the given stride, centered on the grid.
    pub fn centered(n: usize, stride: usize) -> Result<Self> {
        if stride == 0 || n == 0 {
            return Err(Error::param("stride", "must be positive"));
        }
        let count = (n - 1) / stride + 1;
        let origin = ((n - 1) % stride) / 2;
        Ok(Self {
            stride,
            origin,
            count,
        })
    }

    pub fn position(&self, m: usize) -> usize {
        self.origin + m * self.stride
    }

    /// Whether the lattice mirrors onto itself about both half-sample
    /// boundaries of the cosine transform, i.e. odd stride, origin
    /// `(stride - 1) / 2` and `n = count * stride`. Even extension of the
    /// samples is then exact for in-band images.
    pub fn is_reflection_symmetric(&self, n: usize) -> bool {
        self.stride % 2 == 1 && 2 * self.origin + 1 == self.stride && self.count * self.stride == n
    }
}

/// Grid stride for oversampling factor `n_factor`: `Ts / dx` with
/// `Ts = 1 / (2 f_m N)`, which must be a positive integer.
pub fn sample_positions(grid: &GridSpec, f_m: f64, n_factor: usize) -> Result<Lattice> {
    if !(f_m.is_finite() && f_m > 0.0) {
        return Err(Error::param("f_m", format!("{f_m} must be positive")));
    }
    if n_factor == 0 {
        return Err(Error::param("N", "oversampling factor must be positive"));
    }
    let ratio = 1.0 / (2.0 * f_m * n_factor as f64 * grid.dx);
    match integral(ratio) {
        Some(stride) if stride >= 1 => Lattice::centered(grid.n, stride),
        _ => Err(Error::InadmissibleStride {
            n_factor,
            stride: ratio,
            nearest: nearest_admissible(grid, f_m, n_factor),
        }),
    }
}

fn integral(x: f64) -> Option<usize> {
    let r = x.round();
    if r >= 1.0 && (x - r).abs() <= 1e-9 * x.max(1.0) {
        Some(r as usize)
    } else {
        None
    }
}

/// Oversampling factors with an integral stride, all of them.
pub fn admissible_factors(grid: &GridSpec, f_m: f64) -> Vec<usize> {
    let nyquist_stride = 1.0 / (2.0 * f_m * grid.dx);
    if !(nyquist_stride.is_finite() && nyquist_stride >= 1.0 - 1e-9) {
        return Vec::new();
    }
    let mut out: Vec<usize> = (1..=(nyquist_stride + 1e-9).floor() as usize)
        .filter_map(|stride| integral(nyquist_stride / stride as f64))
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Closest admissible factors below and above `n_factor`.
fn nearest_admissible(grid: &GridSpec, f_m: f64, n_factor: usize) -> Vec<usize> {
    let all = admissible_factors(grid, f_m);
    let below = all.iter().rev().find(|&&f| f < n_factor).copied();
    let above = all.iter().find(|&&f| f > n_factor).copied();
    below.into_iter().chain(above).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum SampleValues {
    Real(Array2<f64>),
    Bits(Array2<u8>),
}

impl SampleValues {
    pub fn dim(&self) -> (usize, usize) {
        match self {
            SampleValues::Real(a) => a.dim(),
            SampleValues::Bits(b) => b.dim(),
        }
    }
}

/// Acquired samples `i[m, n]` or `b[m, n]` with the lattice they sit on.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub values: SampleValues,
    pub lattice: Lattice,
    pub config: AcquisitionConfig,
}

impl SampleSet {
    pub fn count(&self) -> usize {
        self.lattice.count
    }
}

/// Dispatches on the configured quantizer.
pub fn acquire(image: &BandlimitedImage, cfg: &AcquisitionConfig) -> Result<SampleSet> {
    match cfg.quantizer {
        QuantizerSpec::FullPrecision => acquire_full_precision(image, cfg),
        QuantizerSpec::SingleBit => acquire_single_bit(image, cfg),
        QuantizerSpec::Uniform { .. } => acquire_uniform(image, cfg),
    }
}

fn expect_quantizer(cfg: &AcquisitionConfig, expected: &str, ok: bool) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::QuantizerMismatch {
            expected: expected.into(),
            found: cfg.quantizer.tag(),
        })
    }
}

/// Noisy pixel at every lattice site, `g + W` (plus `W_d` when `dither`).
fn noisy_lattice(image: &BandlimitedImage, cfg: &AcquisitionConfig, dither: bool) -> Result<(Lattice, Array2<f64>)> {
    cfg.validate()?;
    let lattice = sample_positions(image.grid(), image.f_m(), cfg.n_factor)?;
    let m = lattice.count;
    let pixels = image.pixels();
    let noise = GaussianField::new(cfg.seed, STREAM_NOISE, cfg.sigma2);
    let dither_field = GaussianField::new(cfg.seed, STREAM_DITHER, if dither { cfg.sigma_d2 } else { 0.0 });
    let mut out = Array2::<f64>::zeros((m, m));
    out.as_slice_mut()
        .expect("fresh arrays are contiguous")
        .par_chunks_mut(m)
        .enumerate()
        .for_each_init(
            || (noise.clone(), dither_field.clone()),
            |(noise, dither_field), (r, row)| {
                let pr = lattice.position(r);
                for (c, v) in row.iter_mut().enumerate() {
                    let site = (r * m + c) as u64;
                    let g = pixels[[pr, lattice.position(c)]];
                    *v = g + noise.sample(site) + dither_field.sample(site);
                }
            },
        );
    Ok((lattice, out))
}

/// `i[m, n] = g(m Ts, n Ts) + W`.
pub fn acquire_full_precision(image: &BandlimitedImage, cfg: &AcquisitionConfig) -> Result<SampleSet> {
    expect_quantizer(cfg, "full", cfg.quantizer == QuantizerSpec::FullPrecision)?;
    let (lattice, values) = noisy_lattice(image, cfg, false)?;
    Ok(SampleSet {
        values: SampleValues::Real(values),
        lattice,
        config: *cfg,
    })
}

/// `b[m, n] = 1` if `g + W + W_d >= 0`, else 0.
pub fn acquire_single_bit(image: &BandlimitedImage, cfg: &AcquisitionConfig) -> Result<SampleSet> {
    expect_quantizer(cfg, "onebit", cfg.quantizer == QuantizerSpec::SingleBit)?;
    let (lattice, noisy) = noisy_lattice(image, cfg, true)?;
    Ok(SampleSet {
        values: SampleValues::Bits(noisy.mapv(|v| u8::from(v >= 0.0))),
        lattice,
        config: *cfg,
    })
}

/// Nearest midrise level of `g + W + W_d`, saturating at `+-(A - step/2)`.
pub fn acquire_uniform(image: &BandlimitedImage, cfg: &AcquisitionConfig) -> Result<SampleSet> {
    let QuantizerSpec::Uniform { bits, range } = cfg.quantizer else {
        return Err(Error::QuantizerMismatch {
            expected: "uniform".into(),
            found: cfg.quantizer.tag(),
        });
    };
    let (lattice, noisy) = noisy_lattice(image, cfg, true)?;
    Ok(SampleSet {
        values: SampleValues::Real(noisy.mapv(|v| quantize_uniform(v, bits, range))),
        lattice,
        config: *cfg,
    })
}
