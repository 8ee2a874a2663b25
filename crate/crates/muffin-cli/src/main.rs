//! `muffin` — multi-frequency image deconvolution from the command line.
//!
//! Three subcommands cover the full experimental loop:
//! - `simulate`: seeded synthetic dataset (sky, PSF, noiseless, dirty cubes)
//! - `reconstruct`: fixed-parameter or self-tuned reconstruction
//! - `gridsearch`: ground-truth oracle for the two regularization weights
//!
//! Every run accepts `--config <json>` plus per-field override flags
//! (flags beat the config file), and writes a manifest sufficient to replay
//! it bit for bit.

mod config;
mod error;
mod manifest;
mod plot;
mod run;

use clap::{Args, Parser, Subcommand};
use config::{ExperimentConfig, PAPER_BANDS, PAPER_HEIGHT, PAPER_WIDTH};
use error::{CliError, Result, EXIT_OK};
use manifest::Manifest;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "muffin",
    version,
    about = "Multi-frequency image deconvolution with self-tuned regularization",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic dataset (sky, PSF, noiseless, dirty cubes)
    Simulate(SimulateArgs),
    /// Reconstruct a sky cube from dirty + PSF cubes, fixed or self-tuned
    Reconstruct(ReconstructArgs),
    /// Ground-truth oracle: golden-section over μ_s, then μ_λ, on true WMSE
    Gridsearch(GridsearchArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// JSON experiment configuration; flags override individual fields
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory for all artifacts
    #[arg(long, short = 'o', value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads (default: min(bands, available cores))
    #[arg(long, value_name = "N")]
    workers: Option<usize>,
    /// Master seed for synthetic data
    #[arg(long, value_name = "SEED")]
    seed: Option<u64>,
}

#[derive(Args)]
struct SceneArgs {
    /// Image width in pixels (power of two)
    #[arg(long, value_name = "W")]
    width: Option<usize>,
    /// Image height in pixels (power of two)
    #[arg(long, value_name = "H")]
    height: Option<usize>,
    /// Number of frequency bands
    #[arg(long, value_name = "L")]
    bands: Option<usize>,
    /// Fourier-plane coverage fraction per band, in (0, 1]
    #[arg(long, value_name = "FRAC")]
    fill: Option<f64>,
    /// Target SNR of the dirty cube in dB
    #[arg(long, value_name = "DB", conflicts_with = "noiseless")]
    target_snr: Option<f64>,
    /// Generate noiseless data
    #[arg(long)]
    noiseless: bool,
    /// Full-scale 256×256×100 instance (default is desk-scale 32×32×4);
    /// explicit --width/--height/--bands still override
    #[arg(long)]
    full_scale: bool,
}

#[derive(Args)]
struct SolveArgs {
    /// Dirty cube to reconstruct (default: <out>/dirty.cube)
    #[arg(long, value_name = "PATH")]
    dirty: Option<PathBuf>,
    /// PSF cube (default: <out>/psf.cube)
    #[arg(long, value_name = "PATH")]
    psf: Option<PathBuf>,
    /// Ground-truth cube; enables the true-WMSE and SNR columns
    #[arg(long, value_name = "PATH")]
    truth: Option<PathBuf>,
    /// Import input paths, noise variance, and dataset provenance from a
    /// simulate manifest
    #[arg(long, value_name = "PATH")]
    manifest: Option<PathBuf>,
    /// Spatial regularization weight
    #[arg(long, value_name = "F")]
    mu_s: Option<f64>,
    /// Spectral regularization weight
    #[arg(long, value_name = "F")]
    mu_lambda: Option<f64>,
    /// Primal step (default: certificate-tight for the given weights)
    #[arg(long, value_name = "F")]
    tau: Option<f64>,
    /// Dual step
    #[arg(long, value_name = "F")]
    sigma: Option<f64>,
    /// Tune (μ_s, μ_λ) on the fly by risk minimization
    #[arg(long)]
    self_tune: bool,
    /// Phase budgets: three comma-separated iterate counts
    #[arg(long, value_name = "A,B,C", value_delimiter = ',', num_args = 1..)]
    budgets: Option<Vec<u64>>,
    /// Early-stop threshold on the relative risk change per phase
    #[arg(long, value_name = "F", requires = "stop_window")]
    stop_threshold: Option<f64>,
    /// Early-stop window in iterates
    #[arg(long, value_name = "N")]
    stop_window: Option<usize>,
    /// μ_s search interval as lo,hi
    #[arg(long, value_name = "LO,HI", value_delimiter = ',', num_args = 1..)]
    interval_s: Option<Vec<f64>>,
    /// μ_λ search interval as lo,hi
    #[arg(long, value_name = "LO,HI", value_delimiter = ',', num_args = 1..)]
    interval_lambda: Option<Vec<f64>>,
    /// Golden-section bracket tolerance as a fraction of interval width
    #[arg(long, value_name = "F")]
    tolerance_fraction: Option<f64>,
    /// Uniform per-band noise variance; enables the risk estimate
    #[arg(long, value_name = "VAR")]
    noise_variance: Option<f64>,
    /// Seed of the risk-estimate probe vector
    #[arg(long, value_name = "SEED")]
    probe_seed: Option<u64>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    scene: SceneArgs,
}

#[derive(Args)]
struct ReconstructArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    solve: SolveArgs,
}

#[derive(Args)]
struct GridsearchArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    solve: SolveArgs,
}

fn load_base_config(common: &CommonArgs) -> Result<ExperimentConfig> {
    match &common.config {
        Some(path) => ExperimentConfig::load(path),
        None => Ok(ExperimentConfig::default()),
    }
}

fn apply_common(cfg: &mut ExperimentConfig, a: &CommonArgs) {
    if let Some(out) = &a.out {
        cfg.paths.output_dir = out.clone();
    }
    if let Some(workers) = a.workers {
        cfg.workers = Some(workers);
    }
    if let Some(seed) = a.seed {
        cfg.seeds.data = seed;
    }
}

fn apply_scene(cfg: &mut ExperimentConfig, a: &SceneArgs) {
    if a.full_scale {
        cfg.scene.width = PAPER_WIDTH;
        cfg.scene.height = PAPER_HEIGHT;
        cfg.scene.bands = PAPER_BANDS;
    }
    if let Some(width) = a.width {
        cfg.scene.width = width;
    }
    if let Some(height) = a.height {
        cfg.scene.height = height;
    }
    if let Some(bands) = a.bands {
        cfg.scene.bands = bands;
    }
    if let Some(fill) = a.fill {
        cfg.scene.fill = fill;
    }
    if a.noiseless {
        cfg.scene.target_snr_db = None;
    } else if let Some(snr) = a.target_snr {
        cfg.scene.target_snr_db = Some(snr);
    }
}

/// Import from a simulate manifest: input cube paths still unset after the
/// config file (the simulated sky doubles as ground truth), the realized
/// noise variance, and the dataset provenance (scene + data seed) so the
/// manifest this run writes still records how its inputs were made even when
/// it lands in the same directory. Explicit flags, applied afterwards, win.
fn apply_manifest_imports(cfg: &mut ExperimentConfig, path: &Path) -> Result<()> {
    let m = Manifest::load(path)?;
    cfg.scene = m.config.scene.clone();
    cfg.seeds.data = m.config.seeds.data;
    if cfg.paths.dirty.is_none() {
        cfg.paths.dirty = m.outputs.get("dirty").cloned();
    }
    if cfg.paths.psf.is_none() {
        cfg.paths.psf = m.outputs.get("psf").cloned();
    }
    if cfg.paths.truth.is_none() {
        cfg.paths.truth = m.outputs.get("sky").cloned();
    }
    if cfg.noise_variance.is_none() {
        cfg.noise_variance = m.noise_variances.as_ref().and_then(|v| v.first().copied());
    }
    Ok(())
}

fn pair(values: &[f64], flag: &str) -> Result<[f64; 2]> {
    values.try_into().map_err(|_| {
        CliError::Config(format!(
            "{flag}: need exactly two comma-separated numbers (lo,hi), got {}",
            values.len()
        ))
    })
}

fn apply_solve(cfg: &mut ExperimentConfig, a: &SolveArgs, allow_self_tune: bool) -> Result<()> {
    if let Some(p) = &a.dirty {
        cfg.paths.dirty = Some(p.clone());
    }
    if let Some(p) = &a.psf {
        cfg.paths.psf = Some(p.clone());
    }
    if let Some(p) = &a.truth {
        cfg.paths.truth = Some(p.clone());
    }
    if let Some(v) = a.mu_s {
        cfg.solver.mu_s = v;
    }
    if let Some(v) = a.mu_lambda {
        cfg.solver.mu_lambda = v;
    }
    if let Some(v) = a.tau {
        cfg.solver.tau = Some(v);
    }
    if let Some(v) = a.sigma {
        cfg.solver.sigma = v;
    }
    if a.self_tune {
        if !allow_self_tune {
            return Err(CliError::Config(
                "--self-tune: not applicable to gridsearch (the oracle tunes by ground truth)"
                    .into(),
            ));
        }
        cfg.solver.self_tune = true;
    }
    if let Some(budgets) = &a.budgets {
        cfg.schedule.budgets = budgets.as_slice().try_into().map_err(|_| {
            CliError::Config(format!(
                "--budgets: need exactly three comma-separated counts, got {}",
                budgets.len()
            ))
        })?;
    }
    if let Some(v) = a.stop_threshold {
        cfg.schedule.stop_threshold = Some(v);
    }
    if let Some(v) = a.stop_window {
        cfg.schedule.stop_window = Some(v);
    }
    if let Some(iv) = &a.interval_s {
        cfg.intervals.mu_s = pair(iv, "--interval-s")?;
    }
    if let Some(iv) = &a.interval_lambda {
        cfg.intervals.mu_lambda = pair(iv, "--interval-lambda")?;
    }
    if let Some(v) = a.tolerance_fraction {
        cfg.intervals.tolerance_fraction = v;
    }
    if let Some(v) = a.noise_variance {
        cfg.noise_variance = Some(v);
    }
    if let Some(v) = a.probe_seed {
        cfg.seeds.probe = v;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => {
            let mut cfg = load_base_config(&a.common)?;
            apply_common(&mut cfg, &a.common);
            apply_scene(&mut cfg, &a.scene);
            run::cmd_simulate(cfg)
        }
        Command::Reconstruct(a) => {
            let mut cfg = load_base_config(&a.common)?;
            if let Some(m) = &a.solve.manifest {
                apply_manifest_imports(&mut cfg, m)?;
            }
            apply_common(&mut cfg, &a.common);
            apply_solve(&mut cfg, &a.solve, true)?;
            run::cmd_reconstruct(cfg)
        }
        Command::Gridsearch(a) => {
            let mut cfg = load_base_config(&a.common)?;
            if let Some(m) = &a.solve.manifest {
                apply_manifest_imports(&mut cfg, m)?;
            }
            apply_common(&mut cfg, &a.common);
            apply_solve(&mut cfg, &a.solve, false)?;
            run::cmd_gridsearch(cfg)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::from(EXIT_OK),
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
