//! Run manifest: a JSON record written next to every run's outputs that
//! captures the subcommand, the fully resolved configuration, and every
//! derived quantity (sub-seeds, noise variances, result parameters) needed
//! to replay the run bit for bit.

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunResults {
    /// Spatial regularization weight actually used (tuned or fixed).
    pub mu_s: f64,
    /// Spectral regularization weight actually used (tuned or fixed).
    pub mu_lambda: f64,
    /// Primal and dual steps actually used.
    pub tau: f64,
    pub sigma: f64,
    /// Total solver iterations executed.
    pub iterations: u64,
    /// Estimated weighted mean squared error at the final iterate, when a
    /// noise variance was available.
    pub estimated_wmse: Option<f64>,
    /// True weighted mean squared error and SNR, when a truth cube was given.
    pub true_wmse: Option<f64>,
    pub snr_db: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    /// Subcommand that produced this manifest.
    pub command: String,
    /// Crate version, for provenance.
    pub version: String,
    /// Fully resolved configuration; replaying with this config reproduces
    /// the run exactly (wall-clock columns aside).
    pub config: ExperimentConfig,
    /// Per-component seeds derived from the master data seed during
    /// synthesis: [sky, coverage, noise].
    pub sub_seeds: Option<[u64; 3]>,
    /// Per-band noise variances realized by the simulator, or the uniform
    /// variance assumed by a reconstruction.
    pub noise_variances: Option<Vec<f64>>,
    /// Artifact name → path, for every file the run wrote.
    pub outputs: BTreeMap<String, PathBuf>,
    /// Solver results; absent for `simulate`.
    pub results: Option<RunResults>,
}

impl Manifest {
    pub fn new(command: &str, config: ExperimentConfig) -> Self {
        Manifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            sub_seeds: None,
            noise_variances: None,
            outputs: BTreeMap::new(),
            results: None,
        }
    }

    pub fn record_output(&mut self, name: &str, path: &Path) {
        self.outputs.insert(name.to_string(), path.to_path_buf());
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Config(format!("serializing manifest: {e}")))?;
        std::fs::write(path, text)
            .map_err(|e| CliError::Io(format!("writing manifest {}: {e}", path.display())))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("reading manifest {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("parsing manifest {}: {e}", path.display())))
    }
}
