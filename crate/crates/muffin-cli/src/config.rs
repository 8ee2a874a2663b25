//! Experiment configuration: a JSON document mirroring every knob of the
//! pipeline, plus per-field command-line overrides. The fully resolved
//! configuration is embedded in the run manifest so any run can be replayed
//! bit for bit from its manifest alone.

use crate::error::{CliError, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Desk-scale defaults: small enough that the full self-tuned pipeline and
/// the grid-search oracle complete in minutes on a single machine.
pub const DESK_WIDTH: usize = 32;
pub const DESK_HEIGHT: usize = 32;
pub const DESK_BANDS: usize = 4;
/// Published-scale instance behind `--paper-scale`.
pub const PAPER_WIDTH: usize = 256;
pub const PAPER_HEIGHT: usize = 256;
pub const PAPER_BANDS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    /// Image width in pixels; must be a power of two (Fourier-plane masks).
    pub width: usize,
    /// Image height in pixels; must be a power of two.
    pub height: usize,
    /// Number of frequency bands (≥ 2, wavelengths span a 2:1 range).
    pub bands: usize,
    /// Fourier-plane coverage fraction per band, in (0, 1].
    pub fill: f64,
    /// Target signal-to-noise of the dirty cube in dB; `null` → noiseless.
    pub target_snr_db: Option<f64>,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            width: DESK_WIDTH,
            height: DESK_HEIGHT,
            bands: DESK_BANDS,
            fill: 0.15,
            target_snr_db: Some(10.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// Dirty cube to reconstruct; defaults to `<output_dir>/dirty.cube`.
    pub dirty: Option<PathBuf>,
    /// PSF cube; defaults to `<output_dir>/psf.cube`.
    pub psf: Option<PathBuf>,
    /// Ground-truth sky cube; optional, enables true-WMSE/SNR reporting.
    pub truth: Option<PathBuf>,
    /// Where all artifacts are written.
    pub output_dir: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            dirty: None,
            psf: None,
            truth: None,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl PathsConfig {
    pub fn dirty_path(&self) -> PathBuf {
        self.dirty.clone().unwrap_or_else(|| self.output_dir.join("dirty.cube"))
    }

    pub fn psf_path(&self) -> PathBuf {
        self.psf.clone().unwrap_or_else(|| self.output_dir.join("psf.cube"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Spatial regularization weight (fixed-parameter runs).
    pub mu_s: f64,
    /// Spectral regularization weight (fixed-parameter runs).
    pub mu_lambda: f64,
    /// Primal step; `null` → certificate-tight step derived from the PSF
    /// norm and (for self-tuned runs) the far corner of the search box.
    pub tau: Option<f64>,
    /// Dual step.
    pub sigma: f64,
    /// Tune (μ_s, μ_λ) by risk minimization instead of using fixed values.
    pub self_tune: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            mu_s: 0.3,
            mu_lambda: 0.5,
            tau: None,
            sigma: 10.0,
            self_tune: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    /// Iterates for the three phases: tune μ_s, tune μ_λ, frozen. A
    /// fixed-parameter run executes the summed budget.
    pub budgets: [u64; 3],
    /// Optional early stop: end a phase once the relative risk change over
    /// `window` iterates drops below `threshold`.
    pub stop_threshold: Option<f64>,
    pub stop_window: Option<usize>,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            budgets: [100, 100, 500],
            stop_threshold: None,
            stop_window: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntervalsConfig {
    /// Search interval for μ_s as [lo, hi].
    pub mu_s: [f64; 2],
    /// Search interval for μ_λ as [lo, hi].
    pub mu_lambda: [f64; 2],
    /// Golden-section bracket tolerance as a fraction of interval width.
    pub tolerance_fraction: f64,
}

impl Default for IntervalsConfig {
    fn default() -> Self {
        IntervalsConfig {
            mu_s: [0.0, 2.0],
            mu_lambda: [0.0, 3.0],
            tolerance_fraction: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedsConfig {
    /// Master seed for synthetic data generation.
    pub data: u64,
    /// Seed of the risk-estimate probe vector.
    pub probe: u64,
}

impl Default for SeedsConfig {
    fn default() -> Self {
        SeedsConfig { data: 7, probe: 4242 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scene: SceneConfig,
    pub paths: PathsConfig,
    pub solver: SolverConfig,
    pub schedule: ScheduleConfig,
    pub intervals: IntervalsConfig,
    pub seeds: SeedsConfig,
    /// Uniform per-band noise variance, needed whenever the risk estimate
    /// is computed (self-tuned runs, or the estimated-WMSE column).
    pub noise_variance: Option<f64>,
    /// Worker threads; `null` → min(bands, available cores).
    pub workers: Option<usize>,
}

fn field_err(field: &str, msg: String) -> CliError {
    CliError::Config(format!("{field}: {msg}"))
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("reading config {}: {e}", path.display())))?;
        let config: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("parsing config {}: {e}", path.display())))?;
        Ok(config)
    }

    /// Field-level validation shared by every subcommand; path existence is
    /// checked separately because only some subcommands read inputs.
    pub fn validate(&self) -> Result<()> {
        let s = &self.scene;
        if !s.width.is_power_of_two() || !s.height.is_power_of_two() {
            return Err(field_err(
                "scene.width/scene.height",
                format!("must be powers of two, got {}×{}", s.width, s.height),
            ));
        }
        if s.bands < 2 {
            return Err(field_err("scene.bands", format!("need ≥ 2 bands, got {}", s.bands)));
        }
        if !(s.fill > 0.0 && s.fill <= 1.0) {
            return Err(field_err("scene.fill", format!("must be in (0, 1], got {}", s.fill)));
        }
        if let Some(snr) = s.target_snr_db {
            if snr.is_nan() {
                return Err(field_err("scene.target_snr_db", "must not be NaN".into()));
            }
        }
        let sv = &self.solver;
        for (name, v) in [("solver.mu_s", sv.mu_s), ("solver.mu_lambda", sv.mu_lambda)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(field_err(name, format!("must be finite and ≥ 0, got {v}")));
            }
        }
        if let Some(tau) = sv.tau {
            if !(tau.is_finite() && tau > 0.0) {
                return Err(field_err("solver.tau", format!("must be finite and > 0, got {tau}")));
            }
        }
        if !(sv.sigma.is_finite() && sv.sigma > 0.0) {
            return Err(field_err("solver.sigma", format!("must be finite and > 0, got {}", sv.sigma)));
        }
        if self.schedule.budgets.iter().any(|&b| b == 0) {
            return Err(field_err(
                "schedule.budgets",
                format!("every phase budget must be ≥ 1, got {:?}", self.schedule.budgets),
            ));
        }
        if let Some(t) = self.schedule.stop_threshold {
            if !(t.is_finite() && t > 0.0) {
                return Err(field_err("schedule.stop_threshold", format!("must be > 0, got {t}")));
            }
            if self.schedule.stop_window.is_none() {
                return Err(field_err(
                    "schedule.stop_window",
                    "required when stop_threshold is set".into(),
                ));
            }
        }
        if self.schedule.stop_window == Some(0) {
            return Err(field_err("schedule.stop_window", "must be ≥ 1".into()));
        }
        for (name, [lo, hi]) in [
            ("intervals.mu_s", self.intervals.mu_s),
            ("intervals.mu_lambda", self.intervals.mu_lambda),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo <= hi) {
                return Err(field_err(name, format!("must satisfy 0 ≤ lo ≤ hi finite, got [{lo}, {hi}]")));
            }
        }
        let tf = self.intervals.tolerance_fraction;
        if !(tf.is_finite() && tf > 0.0 && tf <= 1.0) {
            return Err(field_err(
                "intervals.tolerance_fraction",
                format!("must be in (0, 1], got {tf}"),
            ));
        }
        if let Some(v) = self.noise_variance {
            if !(v.is_finite() && v > 0.0) {
                return Err(field_err("noise_variance", format!("must be finite and > 0, got {v}")));
            }
        }
        if self.workers == Some(0) {
            return Err(field_err("workers", "must be ≥ 1".into()));
        }
        Ok(())
    }

    /// Check that an input cube referenced by `field` exists.
    pub fn require_input(path: &Path, field: &str) -> Result<()> {
        if !path.is_file() {
            return Err(field_err(field, format!("input file {} does not exist", path.display())));
        }
        Ok(())
    }

    /// Worker-count resolution: explicit value, else one per band capped at
    /// the available cores.
    pub fn resolved_workers(&self, bands: usize) -> usize {
        self.workers.unwrap_or_else(|| {
            let cores = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
            bands.min(cores).max(1)
        })
    }
}
