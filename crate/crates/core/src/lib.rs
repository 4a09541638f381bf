//! Reconstruction of cosine-bandlimited images from noisy pixels that may be
//! kept at full precision, uniformly quantized, or reduced to a single bit.
//!
//! The pipeline is: build a [`BandlimitedImage`] on a fine [`GridSpec`],
//! [`acquire`] noisy samples on an oversampled lattice, then estimate the
//! image with an [`Estimator`]. [`run_sweep`] repeats this over oversampling
//! factors and quantizers and fits distortion slopes.

pub mod acquisition;
pub mod error;
pub mod imagemodel;
pub mod io;
pub mod kernel;
pub mod metrics;
pub mod noise;
pub mod reconstruct;
pub mod transform;

pub use acquisition::{
    acquire, admissible_factors, sample_positions, AcquisitionConfig, Lattice, QuantizerSpec, SampleSet,
    SampleValues,
};
pub use error::{Error, Result};
pub use imagemodel::{bandlimit_image, make_cosine_image, BandlimitedImage};
pub use kernel::{phi1d, phi2d, trapezoid_response, truncation_radius, KernelParams};
pub use metrics::{
    fit_loglog_slope, mse, run_sweep, InteriorMargin, SlopeFit, SweepPlan, SweepReport, SweepRow,
};
pub use reconstruct::{
    gaussian_cdf, secant_slope, CdfModel, EdgeMode, Estimator, EstimatorConfig, MaskShape,
    ReconstructionResult,
};
pub use transform::{cutoff_index_for, CosineBasis, GridSpec};
