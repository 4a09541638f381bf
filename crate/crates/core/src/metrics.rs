//! Distortion, log-log slope fits and the oversampling sweep.

use std::io::{Read, Write};

use ndarray::ArrayView2;
use rayon::prelude::*;

use crate::acquisition::{acquire, sample_positions, AcquisitionConfig, QuantizerSpec};
use crate::error::{Error, Result};
use crate::imagemodel::BandlimitedImage;
use crate::kernel::truncation_radius;
use crate::reconstruct::{Estimator, EstimatorConfig};

pub const CSV_HEADER: [&str; 8] = [
    "image", "N", "quantizer", "sigma2", "sigma_d2", "seeds", "mse_mean", "mse_std",
];

/// Mean squared difference over the interior `[margin, n - margin)^2`.
pub fn mse_arrays(estimate: ArrayView2<f64>, truth: ArrayView2<f64>, margin: usize) -> Result<f64> {
    if estimate.dim() != truth.dim() {
        return Err(Error::DimensionMismatch {
            expected: format!("{:?}", truth.dim()),
            found: format!("{:?}", estimate.dim()),
        });
    }
    let (rows, cols) = truth.dim();
    if 2 * margin >= rows.min(cols) {
        return Err(Error::param(
            "interior_margin",
            format!("{margin} leaves no interior in a {rows}x{cols} image"),
        ));
    }
    let mut acc = 0.0;
    for i in margin..rows - margin {
        for j in margin..cols - margin {
            let d = estimate[[i, j]] - truth[[i, j]];
            acc += d * d;
        }
    }
    Ok(acc / ((rows - 2 * margin) * (cols - 2 * margin)) as f64)
}

/// `D = (1/M) sum (g_hat - g)^2` over the interior of the truth image.
pub fn mse(estimate: ArrayView2<f64>, truth: &BandlimitedImage, margin: usize) -> Result<f64> {
    mse_arrays(estimate, truth.pixels(), margin)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub max_residual: f64,
}

/// Least-squares line through `(log10 N, log10 D)`.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.len() < 2 {
        return Err(Error::InsufficientPoints {
            needed: 2,
            got: points.len(),
        });
    }
    if let Some(&(n, d)) = points.iter().find(|(n, d)| !(*n > 0.0 && *d > 0.0)) {
        return Err(Error::param("points", format!("({n}, {d}) is not positive")));
    }
    let xy: Vec<(f64, f64)> = points.iter().map(|(n, d)| (n.log10(), d.log10())).collect();
    let k = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / k;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::param("points", "all N values coincide"));
    }
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_residual = xy
        .iter()
        .map(|(x, y)| (y - intercept - slope * x).abs())
        .fold(0.0, f64::max);
    Ok(SlopeFit {
        slope,
        intercept,
        max_residual,
    })
}

/// Width of the boundary band excluded from distortion measurements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InteriorMargin {
    /// Fixed number of grid points.
    Points(usize),
    /// Multiple of the sample spacing, recomputed per oversampling factor.
    Samples(usize),
    /// `ceil(truncation_radius * Ts / dx)`, clamped to leave one interior row.
    TruncationRadius,
}

impl Default for InteriorMargin {
    fn default() -> Self {
        InteriorMargin::Samples(2)
    }
}

impl InteriorMargin {
    pub fn grid_points(&self, stride: usize, n: usize, config: &EstimatorConfig) -> usize {
        let raw = match *self {
            InteriorMargin::Points(p) => p,
            InteriorMargin::Samples(s) => s * stride,
            InteriorMargin::TruncationRadius => {
                (truncation_radius(&config.kernel) * stride as f64).ceil() as usize
            }
        };
        raw.min((n - 1) / 2)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    pub image_id: String,
    pub n_factors: Vec<usize>,
    pub quantizers: Vec<QuantizerSpec>,
    pub sigma2: f64,
    pub sigma_d2: f64,
    pub seeds: usize,
    /// Seed of the first realization; realization `s` uses `base_seed + s`.
    pub base_seed: u64,
    pub estimator: EstimatorConfig,
    pub margin: InteriorMargin,
    /// Smallest oversampling factor included in slope fits.
    pub min_fit_factor: usize,
}

impl SweepPlan {
    pub fn new(
        image_id: impl Into<String>,
        n_factors: Vec<usize>,
        quantizers: Vec<QuantizerSpec>,
        sigma2: f64,
        sigma_d2: f64,
        estimator: EstimatorConfig,
    ) -> Self {
        Self {
            image_id: image_id.into(),
            n_factors,
            quantizers,
            sigma2,
            sigma_d2,
            seeds: 5,
            base_seed: 0,
            estimator,
            margin: InteriorMargin::default(),
            min_fit_factor: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub image: String,
    pub n_factor: usize,
    pub quantizer: String,
    pub sigma2: f64,
    pub sigma_d2: f64,
    pub seeds: usize,
    pub mse_mean: f64,
    pub mse_std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizerSlope {
    pub quantizer: String,
    pub fit: SlopeFit,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub slopes: Vec<QuantizerSlope>,
    /// `(N, log10 D_onebit - log10 D_full)`.
    pub gaps: Vec<(usize, f64)>,
    pub gap_std: Option<f64>,
}

impl SweepReport {
    pub fn slope(&self, quantizer: &str) -> Option<f64> {
        self.slopes
            .iter()
            .find(|s| s.quantizer == quantizer)
            .map(|s| s.fit.slope)
    }

    pub fn row(&self, quantizer: &str, n_factor: usize) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.quantizer == quantizer && r.n_factor == n_factor)
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, var.sqrt())
}

/// Acquires, estimates and scores every `(N, quantizer, seed)` cell.
///
/// Cells run in parallel; means are accumulated in a fixed order so the
/// report does not depend on the thread count.
pub fn run_sweep(image: &BandlimitedImage, plan: &SweepPlan) -> Result<SweepReport> {
    if plan.n_factors.is_empty() {
        return Err(Error::param("N_list", "no oversampling factors given"));
    }
    if plan.quantizers.is_empty() {
        return Err(Error::param("quantizers", "no quantizers given"));
    }
    if plan.seeds == 0 {
        return Err(Error::param("seeds", "need at least one seed per cell"));
    }
    let grid = *image.grid();
    let estimator = Estimator::new(grid, plan.estimator)?;
    let quantizers: Vec<QuantizerSpec> = plan
        .quantizers
        .iter()
        .map(|q| q.with_default_range(plan.sigma2, plan.sigma_d2))
        .collect();

    let mut factors = plan.n_factors.clone();
    factors.sort_unstable();
    factors.dedup();
    let mut margins = Vec::with_capacity(factors.len());
    for &n_factor in &factors {
        let lattice = sample_positions(&grid, image.f_m(), n_factor)?;
        margins.push(plan.margin.grid_points(lattice.stride, grid.n, &plan.estimator));
    }
    for q in &quantizers {
        AcquisitionConfig::new(factors[0], plan.sigma2, plan.sigma_d2, *q, plan.base_seed)?;
    }

    let cells: Vec<(usize, usize, u64)> = (0..factors.len())
        .flat_map(|f| {
            (0..quantizers.len())
                .flat_map(move |q| (0..plan.seeds as u64).map(move |s| (f, q, s)))
        })
        .collect();
    let distortions = cells
        .par_iter()
        .map(|&(f, q, s)| {
            let seed = plan.base_seed.wrapping_add(s);
            let run = || -> Result<f64> {
                let cfg = AcquisitionConfig::new(factors[f], plan.sigma2, plan.sigma_d2, quantizers[q], seed)?;
                let samples = acquire(image, &cfg)?;
                let result = estimator.estimate(&samples)?;
                mse(result.estimate.view(), image, margins[f])
            };
            run().map_err(|e| Error::Cell {
                n_factor: factors[f],
                quantizer: quantizers[q].tag(),
                seed,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<f64>>>()?;

    let mut rows = Vec::new();
    for (f, &n_factor) in factors.iter().enumerate() {
        for (q, quantizer) in quantizers.iter().enumerate() {
            let start = (f * quantizers.len() + q) * plan.seeds;
            let (mse_mean, mse_std) = mean_std(&distortions[start..start + plan.seeds]);
            rows.push((
                *quantizer,
                SweepRow {
                    image: plan.image_id.clone(),
                    n_factor,
                    quantizer: quantizer.tag(),
                    sigma2: plan.sigma2,
                    sigma_d2: plan.sigma_d2,
                    seeds: plan.seeds,
                    mse_mean,
                    mse_std,
                },
            ));
        }
    }
    rows.sort_by(|(qa, a), (qb, b)| {
        a.image
            .cmp(&b.image)
            .then(qa.report_cmp(qb))
            .then(a.quantizer.cmp(&b.quantizer))
            .then(a.n_factor.cmp(&b.n_factor))
    });
    let rows: Vec<SweepRow> = rows.into_iter().map(|(_, r)| r).collect();
    Ok(summarize(rows, plan.min_fit_factor))
}

/// Slopes per quantizer over `N >= min_fit_factor` and the single-bit gap
/// series. Quantizers with fewer than two usable points, or with a zero
/// distortion, get no slope.
pub fn summarize(rows: Vec<SweepRow>, min_fit_factor: usize) -> SweepReport {
    let mut tags: Vec<&str> = Vec::new();
    for r in &rows {
        if !tags.contains(&r.quantizer.as_str()) {
            tags.push(&r.quantizer);
        }
    }
    let slopes = tags
        .iter()
        .filter_map(|tag| {
            let points: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.quantizer == *tag && r.n_factor >= min_fit_factor)
                .map(|r| (r.n_factor as f64, r.mse_mean))
                .collect();
            fit_loglog_slope(&points).ok().map(|fit| QuantizerSlope {
                quantizer: tag.to_string(),
                fit,
            })
        })
        .collect();

    let mut gaps = Vec::new();
    for r in rows.iter().filter(|r| r.quantizer == "onebit") {
        let full = rows
            .iter()
            .find(|f| f.quantizer == "full" && f.n_factor == r.n_factor && f.image == r.image);
        if let Some(full) = full {
            if r.mse_mean > 0.0 && full.mse_mean > 0.0 {
                gaps.push((r.n_factor, r.mse_mean.log10() - full.mse_mean.log10()));
            }
        }
    }
    let gap_std = (gaps.len() >= 2).then(|| mean_std(&gaps.iter().map(|g| g.1).collect::<Vec<_>>()).1);
    SweepReport {
        rows,
        slopes,
        gaps,
        gap_std,
    }
}

/// Renders `v` with nine significant digits in the style of C's `%.9g`.
pub fn format_sig9(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..9).contains(&exp) {
        let decimals = (8 - exp) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa.to_string()), exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Writes the CSV table followed by `# slope`, `# gap` and `# gap_std` lines.
pub fn write_sweep_csv<W: Write>(report: &SweepReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER).map_err(csv_error)?;
    for r in &report.rows {
        w.write_record([
            r.image.clone(),
            r.n_factor.to_string(),
            r.quantizer.clone(),
            format_sig9(r.sigma2),
            format_sig9(r.sigma_d2),
            r.seeds.to_string(),
            format_sig9(r.mse_mean),
            format_sig9(r.mse_std),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    let mut out = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    for s in &report.slopes {
        writeln!(out, "# slope,{},{}", s.quantizer, format_sig9(s.fit.slope))?;
    }
    for (n, g) in &report.gaps {
        writeln!(out, "# gap,{n},{}", format_sig9(*g))?;
    }
    if let Some(std) = report.gap_std {
        writeln!(out, "# gap_std,{}", format_sig9(std))?;
    }
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    Error::format("sweep CSV", e.to_string())
}

/// Contents of a sweep CSV: the table plus the summary comment lines.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParsedSweep {
    pub rows: Vec<SweepRow>,
    pub slopes: Vec<(String, f64)>,
    pub gaps: Vec<(usize, f64)>,
    pub gap_std: Option<f64>,
}

pub fn read_sweep_csv<R: Read>(mut input: R) -> Result<ParsedSweep> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let mut parsed = ParsedSweep::default();
    let bad = |line: &str| Error::format("sweep CSV", format!("bad summary line `{line}`"));
    let num = |s: &str, line: &str| s.parse::<f64>().map_err(|_| bad(line));
    for line in text.lines().filter(|l| l.starts_with('#')) {
        let fields: Vec<&str> = line.trim_start_matches('#').trim().split(',').collect();
        match fields.as_slice() {
            ["slope", tag, v] => parsed.slopes.push((tag.to_string(), num(v, line)?)),
            ["gap", n, v] => parsed
                .gaps
                .push((n.parse().map_err(|_| bad(line))?, num(v, line)?)),
            ["gap_std", v] => parsed.gap_std = Some(num(v, line)?),
            _ => return Err(bad(line)),
        }
    }

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(csv_error)?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::format("sweep CSV", format!("unexpected header {header:?}")));
    }
    for record in reader.records() {
        let rec = record.map_err(csv_error)?;
        let field = |i: usize| rec.get(i).unwrap_or_default();
        let int = |i: usize| {
            field(i)
                .parse::<usize>()
                .map_err(|_| Error::format("sweep CSV", format!("column {} is not an integer", CSV_HEADER[i])))
        };
        let real = |i: usize| {
            field(i)
                .parse::<f64>()
                .map_err(|_| Error::format("sweep CSV", format!("column {} is not a number", CSV_HEADER[i])))
        };
        parsed.rows.push(SweepRow {
            image: field(0).to_string(),
            n_factor: int(1)?,
            quantizer: field(2).to_string(),
            sigma2: real(3)?,
            sigma_d2: real(4)?,
            seeds: int(5)?,
            mse_mean: real(6)?,
            mse_std: real(7)?,
        });
    }
    Ok(parsed)
}
