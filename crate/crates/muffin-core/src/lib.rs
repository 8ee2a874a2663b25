//! Multi-frequency image deconvolution with self-tuned regularization.
//!
//! Reconstructs a nonnegative sky cube from per-band dirty images and PSFs
//! by primal-dual splitting with two analysis priors — a union of eight
//! Daubechies wavelet bases within each band (weight μ_s) and an orthonormal
//! DCT across bands at each pixel (weight μ_λ). Both weights can be tuned
//! on the fly, without ground truth, by greedily minimizing a predicted-SURE
//! risk estimate whose Jacobian term is tracked by a shadow recursion.
//!
//! Crate layout:
//! - [`cube`]: the plane-major `ImageCube` data model and its file format
//! - [`operators`]: FFT-backed circular convolution per band
//! - [`transforms`]: spatial wavelet union and spectral DCT analyses
//! - [`solver`]: the primal-dual iteration, cost, worker pool
//! - [`psure`]: probe vectors, shadow recursion, risk estimate
//! - [`tuner`]: golden-section search and the three-phase greedy schedule
//! - [`simulator`]: seeded synthetic skies, PSFs, and noise
//! - [`metrics`]: ground-truth metrics and the run-trace CSV

pub mod cube;
pub mod error;
pub mod metrics;
pub mod operators;
pub mod psure;
pub mod simulator;
pub mod solver;
pub mod transforms;
pub mod tuner;

pub use cube::{cube_read, cube_write, CoefficientCube, ImageCube, NoiseModel};
pub use error::{CoreError, Result};
pub use metrics::{db, read_metrics, snr_db, true_wmse, MetricsRow, MetricsWriter, METRICS_HEADER};
pub use operators::{BandOperator, PsfSet};
pub use psure::{
    hutchinson_trace, psure_evaluate, shadow_iterate, ProbeVector, RiskReport, ShadowState,
};
pub use simulator::{
    add_noise, make_dirty_cube, make_psf_cube, make_sky_cube, make_wavelengths, synthesize,
    SkyModel, SyntheticDataset, UvCoverage,
};
pub use solver::{
    band_update, cost, master_update, muffin_iterate, project_positive, sat, spectral_feedback,
    IterateTrace, Problem, SolverParams, SolverState, WorkerPool,
};
pub use transforms::{SpatialAnalysis, SpectralAnalysis, WaveletBasis};
pub use tuner::{
    golden_section, greedy_step, self_tuned_run, step_with_risk, GoldenResult, GreedyOutcome,
    SearchInterval, StopRule, TuneRecord, TuneSchedule, TunedParam, TunedRun, TunedState,
};
