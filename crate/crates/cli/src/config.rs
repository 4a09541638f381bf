//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use onebit::kernel::DEFAULT_TRUNCATION_EPSILON;
use onebit::metrics::InteriorMargin;
use onebit::{
    admissible_factors, cutoff_index_for, sample_positions, AcquisitionConfig, EdgeMode, EstimatorConfig, GridSpec,
    KernelParams, MaskShape, QuantizerSpec,
};

/// Where the ground-truth image comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum ImageSource {
    /// Separable cosine at the band edge `f_m`.
    Cosine,
    /// 8-bit grayscale PGM, band-limited on load.
    Pgm(PathBuf),
}

impl ImageSource {
    pub fn id(&self) -> String {
        match self {
            ImageSource::Cosine => "cosine".into(),
            ImageSource::Pgm(p) => p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "image".into()),
        }
    }
}

/// Which command a configuration is checked for; keys a command does not
/// read are not validated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Generate,
    Acquire,
    Reconstruct,
    Sweep,
    Report,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub image: ImageSource,
    pub grid: GridSpec,
    pub f_m: f64,
    pub lambda: f64,
    pub epsilon: f64,
    pub sigma2: f64,
    pub sigma_d2: f64,
    pub quantizer: QuantizerSpec,
    pub quantizers: Vec<QuantizerSpec>,
    pub n_factor: usize,
    pub n_factors: Vec<usize>,
    pub seeds: usize,
    pub seed: u64,
    pub edge: EdgeMode,
    pub mask: MaskShape,
    pub margin_samples: usize,
    pub out: PathBuf,
}

/// Every problem found in a configuration, reported together.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub Vec<String>);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid configuration ({} problem(s)):", self.0.len())?;
        for p in &self.0 {
            writeln!(f, "  - {p}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

const KEYS: &[&str] = &[
    "image", "x0", "dx", "n", "f_m", "lambda", "epsilon", "sigma2", "sigma_d2", "quantizer", "quantizers", "N",
    "N_list", "seeds", "seed", "edge", "mask", "margin_samples", "out",
];

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut pairs = BTreeMap::new();
    let mut problems = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            problems.push(format!("line {}: expected `key = value`", lineno + 1));
            continue;
        };
        let key = key.trim();
        if !KEYS.contains(&key) {
            problems.push(format!("line {}: unknown key `{key}`", lineno + 1));
        } else if pairs.insert(key.to_string(), value.trim().to_string()).is_some() {
            problems.push(format!("line {}: duplicate key `{key}`", lineno + 1));
        }
    }
    if problems.is_empty() {
        Ok(pairs)
    } else {
        Err(ConfigError(problems))
    }
}

struct Reader<'a> {
    pairs: &'a BTreeMap<String, String>,
    problems: Vec<String>,
}

impl Reader<'_> {
    fn get<T: std::str::FromStr>(&mut self, key: &str, default: T) -> T {
        match self.pairs.get(key) {
            None => default,
            Some(raw) => raw.parse().unwrap_or_else(|_| {
                self.problems.push(format!("{key}: cannot parse `{raw}`"));
                default
            }),
        }
    }

    fn list<T: std::str::FromStr>(&mut self, key: &str, default: Vec<T>) -> Vec<T> {
        let Some(raw) = self.pairs.get(key) else {
            return default;
        };
        let mut out = Vec::new();
        for item in raw.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match item.parse() {
                Ok(v) => out.push(v),
                Err(_) => self.problems.push(format!("{key}: cannot parse `{item}`")),
            }
        }
        out
    }
}

impl RunConfig {
    pub fn load(path: &Path, stage: Stage) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path)
            .map_err(|e| ConfigError(vec![format!("cannot read {}: {e}", path.display())]))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_text(&text, base, stage)
    }

    /// Parses and validates; relative image paths resolve against `base`.
    pub fn from_text(text: &str, base: &Path, stage: Stage) -> Result<Self, ConfigError> {
        let pairs = parse_pairs(text)?;
        let mut r = Reader {
            pairs: &pairs,
            problems: Vec::new(),
        };
        let image = match pairs.get("image").map(String::as_str) {
            None | Some("cosine") => ImageSource::Cosine,
            Some(path) => ImageSource::Pgm(base.join(path)),
        };
        let n: usize = r.get("n", 512);
        let dx: f64 = r.get("dx", 0.005);
        let x0: Option<f64> = pairs.get("x0").map(|_| r.get("x0", 0.0));
        let f_m = r.get("f_m", 2.0);
        let lambda = r.get("lambda", 2.0);
        let epsilon = r.get("epsilon", DEFAULT_TRUNCATION_EPSILON);
        let sigma2 = r.get("sigma2", 0.1);
        let sigma_d2 = r.get("sigma_d2", 2.9);
        let quantizer: QuantizerSpec = r.get("quantizer", QuantizerSpec::SingleBit);
        let quantizers: Vec<QuantizerSpec> = r.list(
            "quantizers",
            vec![
                QuantizerSpec::FullPrecision,
                QuantizerSpec::SingleBit,
                QuantizerSpec::Uniform { bits: 2, range: f64::NAN },
                QuantizerSpec::Uniform { bits: 4, range: f64::NAN },
                QuantizerSpec::Uniform { bits: 8, range: f64::NAN },
            ],
        );
        let n_factor = r.get("N", 2usize);
        let n_factors = r.list("N_list", vec![2usize, 5, 10, 25]);
        let seeds = r.get("seeds", 5usize);
        let seed = r.get("seed", 0u64);
        let edge = r.get("edge", EdgeMode::Auto);
        let mask = r.get("mask", MaskShape::Sharp);
        let margin_samples = r.get("margin_samples", 2usize);
        let out = PathBuf::from(pairs.get("out").map(String::as_str).unwrap_or("out"));
        let mut problems = r.problems;

        let grid = match x0 {
            Some(x0) => GridSpec::new(x0, dx, n),
            None => GridSpec::centered(n, dx),
        };
        let grid = grid.unwrap_or_else(|e| {
            problems.push(format!("grid: {e}"));
            GridSpec { x0: 0.0, dx: 1.0, n: 2 }
        });

        let config = RunConfig {
            image,
            grid,
            f_m,
            lambda,
            epsilon,
            sigma2,
            sigma_d2,
            quantizer: quantizer.with_default_range(sigma2, sigma_d2),
            quantizers: quantizers
                .into_iter()
                .map(|q| q.with_default_range(sigma2, sigma_d2))
                .collect(),
            n_factor,
            n_factors,
            seeds,
            seed,
            edge,
            mask,
            margin_samples,
            out,
        };
        if problems.is_empty() {
            config.validate(stage, &mut problems);
        }
        if problems.is_empty() {
            Ok(config)
        } else {
            Err(ConfigError(problems))
        }
    }

    fn validate(&self, stage: Stage, problems: &mut Vec<String>) {
        let kernel = KernelParams::with_epsilon(self.lambda, self.epsilon);
        if let Err(e) = &kernel {
            problems.push(e.to_string());
        }
        if !(self.f_m.is_finite() && self.f_m > 0.0) {
            problems.push(format!("f_m: {} must be positive", self.f_m));
        } else if kernel.is_ok() {
            if let Err(e) = cutoff_index_for(self.f_m, &self.grid, self.lambda) {
                problems.push(format!("f_m: {e}"));
            }
        }
        let (factors, quantizers) = match stage {
            Stage::Acquire => (vec![self.n_factor], vec![self.quantizer]),
            Stage::Sweep => (self.n_factors.clone(), self.quantizers.clone()),
            Stage::Generate | Stage::Reconstruct | Stage::Report => (Vec::new(), Vec::new()),
        };
        if self.f_m > 0.0 {
            let admissible = admissible_factors(&self.grid, self.f_m);
            for &n in &factors {
                if let Err(e) = sample_positions(&self.grid, self.f_m, n) {
                    problems.push(format!("N={n}: {e} (admissible: {admissible:?})"));
                }
            }
        }
        if stage == Stage::Sweep {
            if self.n_factors.is_empty() {
                problems.push("N_list: no oversampling factors given".into());
            }
            if self.quantizers.is_empty() {
                problems.push("quantizers: no quantizers given".into());
            }
            if self.seeds == 0 {
                problems.push("seeds: need at least one seed per cell".into());
            }
        }
        for q in quantizers {
            if let Err(e) = AcquisitionConfig::new(1, self.sigma2, self.sigma_d2, q, self.seed) {
                problems.push(format!("quantizer {}: {e}", q.tag()));
            }
        }
        if stage != Stage::Report {
            if let ImageSource::Pgm(path) = &self.image {
                match crate::commands::read_pgm_file(path) {
                    Ok(raw) if raw.dim() != (self.grid.n, self.grid.n) => problems.push(format!(
                        "image: {} is {}x{}, grid needs {}x{}",
                        path.display(),
                        raw.ncols(),
                        raw.nrows(),
                        self.grid.n,
                        self.grid.n
                    )),
                    Ok(_) => {}
                    Err(e) => problems.push(format!("image: {}: {e}", path.display())),
                }
            }
        }
    }

    pub fn kernel(&self) -> KernelParams {
        KernelParams::with_epsilon(self.lambda, self.epsilon).expect("validated")
    }

    pub fn cutoff(&self) -> usize {
        cutoff_index_for(self.f_m, &self.grid, self.lambda).expect("validated")
    }

    pub fn estimator(&self) -> EstimatorConfig {
        EstimatorConfig::new(self.kernel(), self.cutoff())
            .with_edge(self.edge)
            .with_mask(self.mask)
    }

    pub fn margin(&self) -> InteriorMargin {
        InteriorMargin::Samples(self.margin_samples)
    }
}
