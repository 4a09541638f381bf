//! Estimators: kernel interpolation of the lattice samples followed by the
//! in-band projection, with CDF linearization for single-bit samples.
//!
//! For single-bit pixels `b = 1{g + W + W_d >= 0}` the mean of `2b - 1` is
//! `2 C(g) - 1`, where `C` is the CDF of `N(0, sigma2 + sigma_d2)`. With
//! enough dither `C` is close to the secant line `alpha g + 1/2` on `[-1, 1]`,
//! so the interpolated and projected `2b - 1` field divided by `2 alpha`
//! estimates `g` directly, without iteration.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use ndarray::{Array2, ArrayView2};
use statrs::function::erf::erfc;

use crate::acquisition::{Lattice, QuantizerSpec, SampleSet, SampleValues};
use crate::error::{Error, Result};
use crate::kernel::{phi1d, trapezoid_response, truncation_radius, KernelParams};
use crate::transform::{CosineBasis, GridSpec};

/// `P(X <= t)` for `X ~ N(0, variance)`.
pub fn gaussian_cdf(t: f64, variance: f64) -> Result<f64> {
    check_variance(variance)?;
    Ok(0.5 * erfc(-t / (2.0 * variance).sqrt()))
}

/// Secant slope `(C(1) - C(-1)) / 2` of the Gaussian CDF over `[-1, 1]`.
pub fn secant_slope(variance: f64) -> Result<f64> {
    Ok((gaussian_cdf(1.0, variance)? - gaussian_cdf(-1.0, variance)?) / 2.0)
}

/// Tangent slope `C'(0) = 1 / sqrt(2 pi variance)`.
pub fn tangent_slope(variance: f64) -> Result<f64> {
    check_variance(variance)?;
    Ok(1.0 / (2.0 * PI * variance).sqrt())
}

fn check_variance(variance: f64) -> Result<()> {
    if !(variance.is_finite() && variance > 0.0) {
        return Err(Error::param("variance", format!("{variance} must be positive")));
    }
    Ok(())
}

/// Linear model `alpha t + beta` of the comparator's response curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdfModel {
    pub total_variance: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl CdfModel {
    /// Secant linearization over `[-1, 1]`.
    pub fn new(total_variance: f64) -> Result<Self> {
        Ok(Self {
            total_variance,
            alpha: secant_slope(total_variance)?,
            beta: 0.5,
        })
    }

    /// Tangent at the origin; kept for comparison with the secant.
    pub fn tangent(total_variance: f64) -> Result<Self> {
        Ok(Self {
            total_variance,
            alpha: tangent_slope(total_variance)?,
            beta: 0.5,
        })
    }

    /// Expected single-bit estimate of a constant level `c`:
    /// `(2 C(c) - 1) / (2 alpha)`.
    pub fn expected_estimate(&self, c: f64) -> Result<f64> {
        Ok((2.0 * gaussian_cdf(c, self.total_variance)? - 1.0) / (2.0 * self.alpha))
    }

    /// Largest `|expected_estimate(c) - c|` over `c in [-1, 1]`.
    pub fn linearization_error(&self) -> Result<f64> {
        let mut worst = 0.0f64;
        for i in 0..=2000 {
            let c = -1.0 + i as f64 / 1000.0;
            worst = worst.max((self.expected_estimate(c)? - c).abs());
        }
        Ok(worst)
    }
}

/// How the interpolation sum treats lattice sites outside the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EdgeMode {
    /// Sum over acquired samples only.
    Available,
    /// Even reflection of the samples about the cosine-transform boundaries.
    /// Requires a reflection-symmetric lattice.
    Symmetric,
    /// `Symmetric` when the lattice allows it, `Available` otherwise.
    #[default]
    Auto,
}

impl EdgeMode {
    pub fn resolve(self, n: usize, lattice: &Lattice) -> Result<EdgeMode> {
        let symmetric = lattice.is_reflection_symmetric(n);
        match self {
            EdgeMode::Auto if symmetric => Ok(EdgeMode::Symmetric),
            EdgeMode::Auto => Ok(EdgeMode::Available),
            EdgeMode::Symmetric if !symmetric => Err(Error::IncompatibleLattice(format!(
                "stride {} origin {} count {} is not reflection-symmetric on {n} points",
                lattice.stride, lattice.origin, lattice.count
            ))),
            other => Ok(other),
        }
    }
}

impl fmt::Display for EdgeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeMode::Available => "available",
            EdgeMode::Symmetric => "symmetric",
            EdgeMode::Auto => "auto",
        })
    }
}

impl FromStr for EdgeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "available" => Ok(EdgeMode::Available),
            "symmetric" => Ok(EdgeMode::Symmetric),
            "auto" => Ok(EdgeMode::Auto),
            other => Err(Error::param("edge", format!("unknown mode `{other}`"))),
        }
    }
}

/// Final smoothing applied after interpolation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MaskShape {
    /// Ideal projection onto the band.
    #[default]
    Sharp,
    /// Trapezoid-weighted coefficients, mirroring the kernel response.
    Tapered,
}

impl fmt::Display for MaskShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MaskShape::Sharp => "sharp",
            MaskShape::Tapered => "tapered",
        })
    }
}

impl FromStr for MaskShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "sharp" => Ok(MaskShape::Sharp),
            "tapered" => Ok(MaskShape::Tapered),
            other => Err(Error::param("mask", format!("unknown mask `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    pub kernel: KernelParams,
    pub cutoff: usize,
    pub edge: EdgeMode,
    pub mask: MaskShape,
}

impl EstimatorConfig {
    pub fn new(kernel: KernelParams, cutoff: usize) -> Self {
        Self {
            kernel,
            cutoff,
            edge: EdgeMode::default(),
            mask: MaskShape::default(),
        }
    }

    pub fn with_edge(mut self, edge: EdgeMode) -> Self {
        self.edge = edge;
        self
    }

    pub fn with_mask(mut self, mask: MaskShape) -> Self {
        self.mask = mask;
        self
    }
}

/// Estimated image with an echo of how it was acquired.
#[derive(Debug, Clone)]
pub struct ReconstructionResult {
    pub estimate: Array2<f64>,
    pub n_factor: usize,
    pub quantizer: QuantizerSpec,
    pub sigma2: f64,
    pub sigma_d2: f64,
    pub seed: u64,
    pub elapsed: Duration,
    pub mse: Option<f64>,
}

/// Matrix `K` with `K[i, m] = phi((i - p_m) / stride)` so that the 2-D
/// interpolation is `K V K^T`.
///
/// With available samples only, offsets beyond the truncation radius are
/// dropped. In symmetric mode the contributions of every mirrored copy of
/// sample `m` are folded into column `m` and the sum is exact.
pub fn interpolation_matrix(
    n: usize,
    lattice: &Lattice,
    params: &KernelParams,
    edge: EdgeMode,
) -> Result<Array2<f64>> {
    if lattice.count == 0 || lattice.position(lattice.count - 1) >= n {
        return Err(Error::IncompatibleLattice(format!(
            "{} sites at stride {} from {} do not fit {n} grid points",
            lattice.count, lattice.stride, lattice.origin
        )));
    }
    let stride = lattice.stride as f64;
    let radius = truncation_radius(params);
    let mut k = Array2::<f64>::zeros((n, lattice.count));
    match edge.resolve(n, lattice)? {
        EdgeMode::Available | EdgeMode::Auto => {
            for ((i, m), v) in k.indexed_iter_mut() {
                let t = (i as f64 - lattice.position(m) as f64) / stride;
                if t.abs() <= radius {
                    *v = phi1d(t, params);
                }
            }
        }
        EdgeMode::Symmetric => {
            // The even extension repeats every 2M samples, so the folded sum
            // over all mirrored copies is the periodized kernel, whose Fourier
            // series is finite because the response vanishes beyond pi + 2a.
            let period = 2 * lattice.count;
            let table = periodized_kernel(period, lattice.stride, params);
            let wrap = table.len() as i64;
            let at = |d: i64| table[d.rem_euclid(wrap) as usize];
            let origin = lattice.origin as i64;
            let step = lattice.stride as i64;
            for ((i, m), v) in k.indexed_iter_mut() {
                let i = i as i64;
                let m = m as i64;
                *v = at(i - origin - m * step) + at(i - origin + (m + 1) * step);
            }
        }
    }
    Ok(k)
}

/// `sum_l phi(d / stride - l * period)` for every grid offset `d` in one
/// period, via `(1/P) sum_r Phi(2 pi r / P) exp(2 pi i r t / P)`.
fn periodized_kernel(period: usize, stride: usize, params: &KernelParams) -> Vec<f64> {
    let p = period as f64;
    let harmonics = (p * params.stopband_edge() / (2.0 * PI)).floor() as usize;
    let weights: Vec<f64> = (1..=harmonics)
        .map(|r| 2.0 * trapezoid_response(2.0 * PI * r as f64 / p, params))
        .collect();
    (0..period * stride)
        .map(|d| {
            let t = d as f64 / stride as f64;
            let series: f64 = weights
                .iter()
                .enumerate()
                .map(|(r, w)| w * (2.0 * PI * (r + 1) as f64 * t / p).cos())
                .sum();
            (trapezoid_response(0.0, params) + series) / p
        })
        .collect()
}

/// Kernel interpolation of lattice samples onto every grid point:
/// `h(x, y) = sum_m sum_n v[m, n] phi((x - m Ts) / Ts) phi((y - n Ts) / Ts)`,
/// evaluated as a row pass followed by a column pass.
pub fn interpolate(
    values: ArrayView2<f64>,
    lattice: &Lattice,
    grid: &GridSpec,
    params: &KernelParams,
    edge: EdgeMode,
) -> Result<Array2<f64>> {
    let k = interpolation_matrix(grid.n, lattice, params, edge)?;
    interpolate_with(values, &k)
}

fn interpolate_with(values: ArrayView2<f64>, k: &Array2<f64>) -> Result<Array2<f64>> {
    let m = k.ncols();
    if values.dim() != (m, m) {
        return Err(Error::DimensionMismatch {
            expected: format!("{m}x{m} samples"),
            found: format!("{}x{}", values.nrows(), values.ncols()),
        });
    }
    let rows = values.dot(&k.t());
    Ok(k.dot(&rows))
}

/// Estimator bound to one grid, reusing the cosine basis across calls.
#[derive(Debug, Clone)]
pub struct Estimator {
    grid: GridSpec,
    config: EstimatorConfig,
    basis: CosineBasis,
}

impl Estimator {
    pub fn new(grid: GridSpec, config: EstimatorConfig) -> Result<Self> {
        if config.cutoff == 0 || config.cutoff > grid.n {
            return Err(Error::CutoffOutOfRange {
                cutoff: config.cutoff,
                n: grid.n,
            });
        }
        Ok(Self {
            grid,
            config,
            basis: CosineBasis::new(grid.n),
        })
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.config
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn smooth(&self, h: ArrayView2<f64>) -> Result<Array2<f64>> {
        match self.config.mask {
            MaskShape::Sharp => self.basis.lowpass(h, self.config.cutoff),
            MaskShape::Tapered => self.basis.lowpass_tapered(h, self.config.cutoff, &self.config.kernel),
        }
    }

    fn interpolate_samples(&self, values: ArrayView2<f64>, lattice: &Lattice) -> Result<Array2<f64>> {
        let k = interpolation_matrix(self.grid.n, lattice, &self.config.kernel, self.config.edge)?;
        interpolate_with(values, &k)
    }

    /// `g_hat = P(h)` for real-valued (full-precision or uniform) samples.
    pub fn full_precision(&self, samples: &SampleSet) -> Result<ReconstructionResult> {
        let start = Instant::now();
        let SampleValues::Real(values) = &samples.values else {
            return Err(Error::QuantizerMismatch {
                expected: "real-valued samples".into(),
                found: samples.config.quantizer.tag(),
            });
        };
        let h = self.interpolate_samples(values.view(), &samples.lattice)?;
        let estimate = self.smooth(h.view())?;
        Ok(result(estimate, samples, start.elapsed()))
    }

    /// `g_hat = P(interp(2b - 1)) / (2 alpha)` for single-bit samples.
    pub fn single_bit(&self, samples: &SampleSet, cdf: &CdfModel) -> Result<ReconstructionResult> {
        let start = Instant::now();
        let SampleValues::Bits(bits) = &samples.values else {
            return Err(Error::QuantizerMismatch {
                expected: "single-bit samples".into(),
                found: samples.config.quantizer.tag(),
            });
        };
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::format("single-bit samples", "values outside {0, 1}"));
        }
        let acquired = samples.config.sigma2 + samples.config.sigma_d2;
        if (cdf.total_variance - acquired).abs() > 1e-9 * acquired.max(1.0) {
            return Err(Error::VarianceMismatch {
                model: cdf.total_variance,
                acquired,
            });
        }
        let signs = bits.mapv(|b| 2.0 * b as f64 - 1.0);
        let h = self.interpolate_samples(signs.view(), &samples.lattice)?;
        let mut estimate = self.smooth(h.view())?;
        let gain = 1.0 / (2.0 * cdf.alpha);
        estimate.mapv_inplace(|v| v * gain);
        Ok(result(estimate, samples, start.elapsed()))
    }

    /// Dispatches on the sample type; single-bit samples use the secant model
    /// built from the acquisition variances.
    pub fn estimate(&self, samples: &SampleSet) -> Result<ReconstructionResult> {
        match samples.values {
            SampleValues::Real(_) => self.full_precision(samples),
            SampleValues::Bits(_) => {
                let cdf = CdfModel::new(samples.config.sigma2 + samples.config.sigma_d2)?;
                self.single_bit(samples, &cdf)
            }
        }
    }
}

fn result(estimate: Array2<f64>, samples: &SampleSet, elapsed: Duration) -> ReconstructionResult {
    ReconstructionResult {
        estimate,
        n_factor: samples.config.n_factor,
        quantizer: samples.config.quantizer,
        sigma2: samples.config.sigma2,
        sigma_d2: samples.config.sigma_d2,
        seed: samples.config.seed,
        elapsed,
        mse: None,
    }
}

pub fn estimate_full_precision(
    samples: &SampleSet,
    grid: &GridSpec,
    config: &EstimatorConfig,
) -> Result<ReconstructionResult> {
    Estimator::new(*grid, *config)?.full_precision(samples)
}

pub fn estimate_single_bit(
    samples: &SampleSet,
    grid: &GridSpec,
    config: &EstimatorConfig,
    cdf: &CdfModel,
) -> Result<ReconstructionResult> {
    Estimator::new(*grid, *config)?.single_bit(samples, cdf)
}
