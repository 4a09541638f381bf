use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use onebit::io::{read_cbss, read_pgm, write_cbim, write_cbss, write_pgm};
use onebit::metrics::{read_sweep_csv, summarize, write_sweep_csv, SweepRow};
use onebit::{
    acquire, bandlimit_image, make_cosine_image, mse, run_sweep, AcquisitionConfig, BandlimitedImage, CdfModel,
    Error, Estimator, QuantizerSpec, SampleSet, SweepPlan, SweepReport,
};

use crate::config::{ImageSource, RunConfig};

pub fn read_pgm_file(path: &Path) -> onebit::Result<Array2<f64>> {
    read_pgm(BufReader::new(File::open(path)?))
}

pub fn load_image(cfg: &RunConfig) -> onebit::Result<BandlimitedImage> {
    match &cfg.image {
        ImageSource::Cosine => make_cosine_image(cfg.f_m, &cfg.grid, cfg.lambda),
        ImageSource::Pgm(path) => bandlimit_image(read_pgm_file(path)?.view(), &cfg.grid, cfg.f_m, cfg.lambda),
    }
}

fn create(dir: &Path, name: &str) -> onebit::Result<(PathBuf, BufWriter<File>)> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let file = File::create(&path)?;
    Ok((path, BufWriter::new(file)))
}

fn finish(mut w: BufWriter<File>) -> onebit::Result<()> {
    w.flush()?;
    Ok(())
}

/// Writes `truth.cbim` and the preview `truth.pgm`.
pub fn generate(cfg: &RunConfig) -> onebit::Result<Vec<PathBuf>> {
    let image = load_image(cfg)?;
    let pixels = image.into_pixels();
    let (cbim, mut w) = create(&cfg.out, "truth.cbim")?;
    write_cbim(&mut w, &pixels)?;
    finish(w)?;
    let (pgm, mut w) = create(&cfg.out, "truth.pgm")?;
    write_pgm(&mut w, &pixels)?;
    finish(w)?;
    Ok(vec![cbim, pgm])
}

/// Writes `samples.cbss` and its `samples.cbss.meta` sidecar, which records
/// the grid and noise settings the container header does not carry.
pub fn acquire_samples(cfg: &RunConfig) -> onebit::Result<(PathBuf, SampleSet)> {
    let image = load_image(cfg)?;
    let acq = AcquisitionConfig::new(cfg.n_factor, cfg.sigma2, cfg.sigma_d2, cfg.quantizer, cfg.seed)?;
    let samples = acquire(&image, &acq)?;
    let (path, mut w) = create(&cfg.out, "samples.cbss")?;
    write_cbss(&mut w, &samples)?;
    finish(w)?;
    let (_, mut meta) = create(&cfg.out, "samples.cbss.meta")?;
    write!(
        meta,
        "n = {}\nx0 = {}\ndx = {}\nf_m = {}\nN = {}\nsigma2 = {}\nsigma_d2 = {}\nquantizer = {}\nseed = {}\n",
        cfg.grid.n, cfg.grid.x0, cfg.grid.dx, cfg.f_m, acq.n_factor, acq.sigma2, acq.sigma_d2, acq.quantizer, acq.seed
    )?;
    finish(meta)?;
    Ok((path, samples))
}

fn meta_path(samples: &Path) -> PathBuf {
    let mut name = samples.as_os_str().to_owned();
    name.push(".meta");
    PathBuf::from(name)
}

/// Reads a sample container and its sidecar back into a [`SampleSet`].
pub fn load_samples(path: &Path, cfg: &RunConfig) -> onebit::Result<SampleSet> {
    let meta_file = meta_path(path);
    let text = fs::read_to_string(&meta_file)?;
    let bad = |reason: String| Error::Format {
        what: "sample metadata",
        reason,
    };
    let pairs: BTreeMap<String, String> = text
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect();
    let field = |key: &str| {
        pairs
            .get(key)
            .cloned()
            .ok_or_else(|| bad(format!("{} lacks `{key}`", meta_file.display())))
    };
    let num = |key: &str| -> onebit::Result<f64> {
        field(key)?.parse().map_err(|_| bad(format!("`{key}` is not a number")))
    };
    let n = num("n")? as usize;
    let dx = num("dx")?;
    if n != cfg.grid.n || (dx - cfg.grid.dx).abs() > 1e-12 * dx {
        return Err(Error::IncompatibleLattice(format!(
            "samples were taken on n={n}, dx={dx}; configuration has n={}, dx={}",
            cfg.grid.n, cfg.grid.dx
        )));
    }
    let quantizer: QuantizerSpec = field("quantizer")?.parse()?;
    let seed: u64 = field("seed")?.parse().map_err(|_| bad("`seed` is not an integer".into()))?;
    let acq = AcquisitionConfig::new(num("N")? as usize, num("sigma2")?, num("sigma_d2")?, quantizer, seed)?;
    let contents = read_cbss(BufReader::new(File::open(path)?), n)?;
    if contents.header.quantizer_code != quantizer.code() || contents.header.seed != seed {
        return Err(bad(format!(
            "{} disagrees with {} on quantizer or seed",
            meta_file.display(),
            path.display()
        )));
    }
    Ok(SampleSet {
        values: contents.values,
        lattice: contents.lattice,
        config: acq,
    })
}

#[derive(Debug, Clone)]
pub struct ReconstructOutcome {
    pub files: Vec<PathBuf>,
    pub mse: f64,
}

/// Estimates the image from a sample container and scores it against the
/// configured ground truth. Single-bit samples are scaled with the CDF model
/// of the configured variances, which must match those recorded at
/// acquisition.
pub fn reconstruct(cfg: &RunConfig, samples_path: &Path) -> onebit::Result<ReconstructOutcome> {
    let samples = load_samples(samples_path, cfg)?;
    let truth = load_image(cfg)?;
    let estimator = Estimator::new(cfg.grid, cfg.estimator())?;
    let result = match samples.config.quantizer {
        QuantizerSpec::SingleBit => estimator.single_bit(&samples, &CdfModel::new(cfg.sigma2 + cfg.sigma_d2)?)?,
        _ => estimator.full_precision(&samples)?,
    };
    let margin = cfg.margin().grid_points(samples.lattice.stride, cfg.grid.n, &cfg.estimator());
    let d = mse(result.estimate.view(), &truth, margin)?;

    let (cbim, mut w) = create(&cfg.out, "estimate.cbim")?;
    write_cbim(&mut w, &result.estimate)?;
    finish(w)?;
    let (pgm, mut w) = create(&cfg.out, "estimate.pgm")?;
    write_pgm(&mut w, &result.estimate)?;
    finish(w)?;
    let row = SweepRow {
        image: cfg.image.id(),
        n_factor: samples.config.n_factor,
        quantizer: samples.config.quantizer.tag(),
        sigma2: samples.config.sigma2,
        sigma_d2: samples.config.sigma_d2,
        seeds: 1,
        mse_mean: d,
        mse_std: 0.0,
    };
    let (csv, w) = create(&cfg.out, "reconstruct.csv")?;
    write_sweep_csv(&summarize(vec![row], 2), w)?;
    Ok(ReconstructOutcome {
        files: vec![cbim, pgm, csv],
        mse: d,
    })
}

pub fn sweep(cfg: &RunConfig) -> onebit::Result<(PathBuf, SweepReport)> {
    let image = load_image(cfg)?;
    let mut plan = SweepPlan::new(
        cfg.image.id(),
        cfg.n_factors.clone(),
        cfg.quantizers.clone(),
        cfg.sigma2,
        cfg.sigma_d2,
        cfg.estimator(),
    );
    plan.seeds = cfg.seeds;
    plan.base_seed = cfg.seed;
    plan.margin = cfg.margin();
    let report = run_sweep(&image, &plan)?;
    let (path, w) = create(&cfg.out, "sweep.csv")?;
    write_sweep_csv(&report, w)?;
    Ok((path, report))
}

/// Human-readable summary of a sweep CSV.
pub fn report(csv_path: &Path) -> onebit::Result<String> {
    let parsed = read_sweep_csv(BufReader::new(File::open(csv_path)?))?;
    let mut out = String::new();
    let _ = writeln!(out, "{:<10} {:>4} {:<8} {:>14} {:>14}", "image", "N", "quant", "mse_mean", "mse_std");
    for r in &parsed.rows {
        let _ = writeln!(
            out,
            "{:<10} {:>4} {:<8} {:>14.6e} {:>14.6e}",
            r.image, r.n_factor, r.quantizer, r.mse_mean, r.mse_std
        );
    }
    for (tag, slope) in &parsed.slopes {
        let _ = writeln!(out, "slope {tag:<8} {slope:+.4}");
    }
    if !parsed.gaps.is_empty() {
        let gaps: Vec<String> = parsed.gaps.iter().map(|(n, g)| format!("N={n}: {g:.4}")).collect();
        let _ = writeln!(out, "gap onebit-full (log10) {}", gaps.join(", "));
    }
    if let Some(std) = parsed.gap_std {
        let _ = writeln!(out, "gap std {std:.4}");
    }
    Ok(out)
}
