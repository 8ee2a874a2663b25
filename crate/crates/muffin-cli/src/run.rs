//! Subcommand drivers. Each driver validates its configuration, runs the
//! pipeline, and writes a self-describing set of artifacts: cube files,
//! `metrics.csv`, `manifest.json`, and PNG plots rendered from the CSV
//! (the CSV is the authoritative record; the plots are read back from it).

use crate::config::{ExperimentConfig, IntervalsConfig, ScheduleConfig, SolverConfig};
use crate::error::{CliError, Result};
use crate::manifest::{Manifest, RunResults};
use crate::plot::{line_chart, Series};
use muffin_core::{
    cost, cube_read, cube_write, db, golden_section, muffin_iterate, read_metrics, self_tuned_run,
    snr_db, step_with_risk, synthesize, true_wmse, ImageCube, MetricsRow, MetricsWriter,
    NoiseModel, Problem, ProbeVector, RiskReport, SearchInterval, SolverParams, SolverState,
    StopRule, TuneSchedule, TunedState, WorkerPool,
};
use serde::Serialize;
use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .map_err(|e| CliError::Io(format!("creating {}: {e}", parent.display())))?;
        }
    }
    Ok(())
}

fn create_out_dir(config: &ExperimentConfig) -> Result<PathBuf> {
    let out = config.paths.output_dir.clone();
    fs::create_dir_all(&out)
        .map_err(|e| CliError::Io(format!("creating output dir {}: {e}", out.display())))?;
    Ok(out)
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

pub fn cmd_simulate(config: ExperimentConfig) -> Result<()> {
    config.validate()?;
    let out = create_out_dir(&config)?;
    let scene = &config.scene;
    let dataset = synthesize(
        scene.width,
        scene.height,
        scene.bands,
        scene.fill,
        scene.target_snr_db,
        config.seeds.data,
    )?;

    let sky_path = config
        .paths
        .truth
        .clone()
        .unwrap_or_else(|| out.join("sky.cube"));
    let psf_path = config.paths.psf_path();
    let noiseless_path = out.join("noiseless.cube");
    let dirty_path = config.paths.dirty_path();

    let mut manifest = Manifest::new("simulate", config.clone());
    manifest.sub_seeds = Some(dataset.seeds);
    manifest.noise_variances = Some(dataset.noise.variances().to_vec());
    for (name, path, cube) in [
        ("sky", &sky_path, &dataset.sky),
        ("psf", &psf_path, &dataset.psf),
        ("noiseless", &noiseless_path, &dataset.noiseless),
        ("dirty", &dirty_path, &dataset.dirty),
    ] {
        ensure_parent(path)?;
        cube_write(cube, path)?;
        manifest.record_output(name, path);
    }
    let manifest_path = out.join("manifest.json");
    manifest.write(&manifest_path)?;

    println!(
        "simulate: {}×{}×{} cube, fill {}, {} (seed {})",
        scene.width,
        scene.height,
        scene.bands,
        scene.fill,
        match scene.target_snr_db {
            Some(snr) => format!("target SNR {snr} dB"),
            None => "noiseless".to_string(),
        },
        config.seeds.data,
    );
    println!("simulate: wrote sky/psf/noiseless/dirty cubes and {}", manifest_path.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// Shared reconstruction plumbing
// ---------------------------------------------------------------------------

struct Inputs {
    problem: Problem,
    truth: Option<ImageCube>,
}

fn load_inputs(config: &ExperimentConfig) -> Result<Inputs> {
    let dirty_path = config.paths.dirty_path();
    let psf_path = config.paths.psf_path();
    ExperimentConfig::require_input(&dirty_path, "paths.dirty")?;
    ExperimentConfig::require_input(&psf_path, "paths.psf")?;
    let dirty = cube_read(&dirty_path)?;
    dirty.check_finite()?;
    let psf = cube_read(&psf_path)?;
    psf.check_finite()?;
    let truth = match &config.paths.truth {
        Some(path) => {
            ExperimentConfig::require_input(path, "paths.truth")?;
            let cube = cube_read(path)?;
            cube.check_finite()?;
            Some(cube)
        }
        None => None,
    };
    if let Some(t) = &truth {
        if t.width() != dirty.width() || t.height() != dirty.height() || t.bands() != dirty.bands()
        {
            return Err(CliError::Config(format!(
                "paths.truth: truth cube {}×{}×{} does not match dirty cube {}×{}×{}",
                t.width(),
                t.height(),
                t.bands(),
                dirty.width(),
                dirty.height(),
                dirty.bands(),
            )));
        }
    }
    let problem = Problem::new(dirty, &psf)?;
    Ok(Inputs { problem, truth })
}

/// Resolve the solver parameters actually used. With `tune_box` the
/// certificate step is computed at the far corner of the search intervals so
/// every candidate the tuner may try stays certified, and the returned μ
/// values are zeroed (the tuner owns them).
fn base_params(
    solver: &SolverConfig,
    intervals: &IntervalsConfig,
    tune_box: bool,
    problem: &Problem,
) -> Result<SolverParams> {
    let beta = problem.beta();
    let basis_count = problem.spatial.basis_count();
    let (mu_s, mu_lambda) = if tune_box {
        (intervals.mu_s[1], intervals.mu_lambda[1])
    } else {
        (solver.mu_s, solver.mu_lambda)
    };
    let mut params = SolverParams::auto(mu_s, mu_lambda, solver.sigma, beta, basis_count);
    if let Some(tau) = solver.tau {
        params.tau = tau;
    }
    params.validate()?;
    if let Some(warning) = params.certificate_warning(beta, basis_count) {
        eprintln!("warning: {warning}");
    }
    if tune_box {
        params.mu_s = 0.0;
        params.mu_lambda = 0.0;
    }
    Ok(params)
}

fn search_intervals(cfg: &IntervalsConfig) -> Result<(SearchInterval, SearchInterval)> {
    let make = |range: [f64; 2]| -> Result<SearchInterval> {
        let tolerance = ((range[1] - range[0]) * cfg.tolerance_fraction).max(f64::MIN_POSITIVE);
        Ok(SearchInterval::with_tolerance(range[0], range[1], tolerance)?)
    };
    Ok((make(cfg.mu_s)?, make(cfg.mu_lambda)?))
}

fn stop_rule(schedule: &ScheduleConfig) -> StopRule {
    match (schedule.stop_threshold, schedule.stop_window) {
        (Some(threshold), Some(window)) => StopRule::PsureRelative { threshold, window },
        _ => StopRule::FixedBudgets,
    }
}

/// Append one metrics row for the current iterate.
#[allow(clippy::too_many_arguments)]
fn write_row<W: Write>(
    writer: &mut MetricsWriter<W>,
    iter: u64,
    phase: u8,
    params: &SolverParams,
    state: &SolverState,
    report: Option<&RiskReport>,
    truth: Option<&ImageCube>,
    problem: &Problem,
    started: Instant,
) -> Result<()> {
    let run_cost = cost(state, problem, params)?;
    let (wmse_db, snr) = match truth {
        Some(t) => (
            db(true_wmse(&state.x_tilde, t, &problem.psfs)?),
            Some(snr_db(&state.x_tilde, t)?).filter(|v| v.is_finite()),
        ),
        None => (None, None),
    };
    let row = MetricsRow {
        iter,
        phase,
        mu_s: params.mu_s,
        mu_lambda: params.mu_lambda,
        wmse_db,
        wmse_hat_db: report.and_then(|r| db(r.estimated_wmse)),
        snr_db: snr,
        cost: run_cost,
        seconds: started.elapsed().as_secs_f64(),
    };
    writer.write_row(&row)?;
    Ok(())
}

/// Run consecutive fixed-parameter segments from a cold start, appending one
/// metrics row per iterate. With a noise model the risk estimate is tracked
/// alongside (shadow recursion in lockstep); without, the plain iteration
/// runs and the estimated-WMSE column stays blank.
#[allow(clippy::too_many_arguments)]
fn run_segments<W: Write>(
    problem: &Problem,
    segments: &[(u8, u64, SolverParams)],
    noise: Option<&NoiseModel>,
    probe_seed: u64,
    pool: &WorkerPool,
    writer: &mut MetricsWriter<W>,
    truth: Option<&ImageCube>,
    started: Instant,
) -> Result<(SolverState, Option<RiskReport>)> {
    match noise {
        Some(noise) => {
            let probe = ProbeVector::rademacher(&problem.dirty, probe_seed);
            let mut state = TunedState::cold_start(problem);
            let mut last = None;
            for (phase, iters, params) in segments {
                for _ in 0..*iters {
                    let report =
                        step_with_risk(&mut state, problem, params, &probe, noise, pool)?;
                    write_row(
                        writer,
                        state.solver.iteration,
                        *phase,
                        params,
                        &state.solver,
                        Some(&report),
                        truth,
                        problem,
                        started,
                    )?;
                    last = Some(report);
                }
            }
            Ok((state.solver, last))
        }
        None => {
            let mut state = SolverState::cold_start(problem);
            for (phase, iters, params) in segments {
                for _ in 0..*iters {
                    muffin_iterate(&mut state, problem, params, pool, false)?;
                    write_row(
                        writer,
                        state.iteration,
                        *phase,
                        params,
                        &state,
                        None,
                        truth,
                        problem,
                        started,
                    )?;
                }
            }
            Ok((state, None))
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn make_results(
    params: &SolverParams,
    mu_s: f64,
    mu_lambda: f64,
    iterations: u64,
    report: Option<&RiskReport>,
    state: &SolverState,
    truth: Option<&ImageCube>,
    problem: &Problem,
) -> Result<RunResults> {
    let (final_wmse, final_snr) = match truth {
        Some(t) => (
            Some(true_wmse(&state.x_tilde, t, &problem.psfs)?),
            Some(snr_db(&state.x_tilde, t)?),
        ),
        None => (None, None),
    };
    Ok(RunResults {
        mu_s,
        mu_lambda,
        tau: params.tau,
        sigma: params.sigma,
        iterations,
        estimated_wmse: report.map(|r| r.estimated_wmse),
        true_wmse: final_wmse,
        snr_db: final_snr,
    })
}

/// Render `wmse.png` and `snr.png` from the written CSV (the CSV is the
/// source of truth for the plots). Plots without any finite series are
/// skipped with a note instead of emitting empty charts.
fn render_plots(csv_path: &Path, out: &Path, manifest: &mut Manifest) -> Result<()> {
    let text = fs::read_to_string(csv_path)
        .map_err(|e| CliError::Io(format!("reading {}: {e}", csv_path.display())))?;
    let rows = read_metrics(&text)?;
    let pick = |field: fn(&MetricsRow) -> Option<f64>| -> Vec<(f64, f64)> {
        rows.iter()
            .filter_map(|r| field(r).map(|v| (r.iter as f64, v)))
            .collect()
    };

    let wmse_path = out.join("wmse.png");
    let wrote = line_chart(
        &wmse_path,
        "Weighted MSE vs iteration",
        "iteration",
        "WMSE (dB)",
        &[
            Series {
                label: "estimated WMSE".to_string(),
                points: pick(|r| r.wmse_hat_db),
            },
            Series {
                label: "true WMSE".to_string(),
                points: pick(|r| r.wmse_db),
            },
        ],
    )?;
    if wrote {
        manifest.record_output("wmse_plot", &wmse_path);
    } else {
        eprintln!("note: skipped wmse.png (no WMSE series; supply a noise variance or truth cube)");
    }

    let snr_path = out.join("snr.png");
    let wrote = line_chart(
        &snr_path,
        "Reconstruction SNR vs iteration",
        "iteration",
        "SNR (dB)",
        &[Series {
            label: "SNR".to_string(),
            points: pick(|r| r.snr_db),
        }],
    )?;
    if wrote {
        manifest.record_output("snr_plot", &snr_path);
    } else {
        eprintln!("note: skipped snr.png (SNR needs a ground-truth cube)");
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// reconstruct
// ---------------------------------------------------------------------------

pub fn cmd_reconstruct(config: ExperimentConfig) -> Result<()> {
    config.validate()?;
    let out = create_out_dir(&config)?;
    let inputs = load_inputs(&config)?;
    let problem = &inputs.problem;
    let pool = WorkerPool::new(config.resolved_workers(problem.bands()))?;
    let noise = match config.noise_variance {
        Some(v) => Some(NoiseModel::uniform(v, problem.bands())?),
        None => None,
    };

    let started = Instant::now();
    let metrics_path = out.join("metrics.csv");
    let file = File::create(&metrics_path)
        .map_err(|e| CliError::Io(format!("creating {}: {e}", metrics_path.display())))?;
    let mut writer = MetricsWriter::new(BufWriter::new(file))?;

    let mut manifest = Manifest::new("reconstruct", config.clone());
    manifest.noise_variances = noise.as_ref().map(|n| n.variances().to_vec());

    let (state, results) = if config.solver.self_tune {
        let Some(noise) = noise.as_ref() else {
            return Err(CliError::Config(
                "noise_variance: required for self-tuned runs — the risk estimate needs the \
                 per-band noise level (supply --noise-variance or --manifest)"
                    .into(),
            ));
        };
        let base = base_params(&config.solver, &config.intervals, true, problem)?;
        let schedule = TuneSchedule {
            budgets: config.schedule.budgets,
            stop: stop_rule(&config.schedule),
        };
        let (interval_s, interval_lambda) = search_intervals(&config.intervals)?;
        let mut row_err: Option<CliError> = None;
        let run = self_tuned_run(
            problem,
            noise,
            &schedule,
            interval_s,
            interval_lambda,
            &base,
            config.seeds.probe,
            &pool,
            |record, tuned| {
                if row_err.is_some() {
                    return;
                }
                let params = SolverParams {
                    mu_s: record.mu_s,
                    mu_lambda: record.mu_lambda,
                    ..base.clone()
                };
                if let Err(e) = write_row(
                    &mut writer,
                    record.iteration,
                    record.phase,
                    &params,
                    &tuned.solver,
                    Some(&record.report),
                    inputs.truth.as_ref(),
                    problem,
                    started,
                ) {
                    row_err = Some(e);
                }
            },
        )?;
        if let Some(e) = row_err {
            return Err(e);
        }
        let state = run.state.solver;
        let params = SolverParams {
            mu_s: run.mu_s,
            mu_lambda: run.mu_lambda,
            ..base
        };
        let results = make_results(
            &params,
            run.mu_s,
            run.mu_lambda,
            state.iteration,
            run.reports.last(),
            &state,
            inputs.truth.as_ref(),
            problem,
        )?;
        println!(
            "reconstruct: self-tuned μ_s = {:.4}, μ_λ = {:.4} after {} iterates",
            run.mu_s, run.mu_lambda, state.iteration
        );
        (state, results)
    } else {
        let params = base_params(&config.solver, &config.intervals, false, problem)?;
        let total: u64 = config.schedule.budgets.iter().sum();
        let segments = [(0u8, total, params.clone())];
        let (state, report) = run_segments(
            problem,
            &segments,
            noise.as_ref(),
            config.seeds.probe,
            &pool,
            &mut writer,
            inputs.truth.as_ref(),
            started,
        )?;
        let results = make_results(
            &params,
            params.mu_s,
            params.mu_lambda,
            state.iteration,
            report.as_ref(),
            &state,
            inputs.truth.as_ref(),
            problem,
        )?;
        println!(
            "reconstruct: fixed μ_s = {:.4}, μ_λ = {:.4} for {} iterates",
            params.mu_s, params.mu_lambda, state.iteration
        );
        (state, results)
    };
    writer.flush()?;

    let result_path = out.join("result.cube");
    cube_write(&state.x_tilde, &result_path)?;
    manifest.record_output("result", &result_path);
    manifest.record_output("metrics", &metrics_path);
    render_plots(&metrics_path, &out, &mut manifest)?;

    if let Some(snr) = results.snr_db {
        println!("reconstruct: final SNR {snr:.3} dB");
    }
    if let Some(wmse) = results.estimated_wmse {
        println!("reconstruct: final estimated WMSE {wmse:.6e}");
    }
    manifest.results = Some(results);
    let manifest_path = out.join("manifest.json");
    manifest.write(&manifest_path)?;
    println!("reconstruct: artifacts in {}", out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// gridsearch
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct EvalPoint {
    value: f64,
    wmse: f64,
}

#[derive(Serialize)]
struct GoldenTrace {
    argmin: f64,
    min_wmse: f64,
    evals: usize,
    /// Every objective evaluation in search order.
    trace: Vec<EvalPoint>,
}

#[derive(Serialize)]
struct GridSearchReport {
    mu_s: GoldenTrace,
    mu_lambda: GoldenTrace,
    budgets: [u64; 3],
}

fn run_plain(
    problem: &Problem,
    params: &SolverParams,
    iters: u64,
    pool: &WorkerPool,
    from: Option<&SolverState>,
) -> muffin_core::Result<SolverState> {
    let mut state = from
        .cloned()
        .unwrap_or_else(|| SolverState::cold_start(problem));
    for _ in 0..iters {
        muffin_iterate(&mut state, problem, params, pool, false)?;
    }
    Ok(state)
}

/// Ground-truth oracle: golden-section over μ_s scored by true WMSE at the
/// end of the phase-1 budget (spectral weight off), then golden-section over
/// μ_λ scored at the end of the total budget continuing from the μ_s
/// snapshot. The chosen pair is then rerun through the full phased schedule
/// to produce the same artifact set as `reconstruct`.
pub fn cmd_gridsearch(config: ExperimentConfig) -> Result<()> {
    config.validate()?;
    if config.paths.truth.is_none() {
        return Err(CliError::Config(
            "paths.truth: gridsearch scores candidates by true WMSE and needs a ground-truth \
             cube (supply --truth or --manifest from simulate)"
                .into(),
        ));
    }
    let out = create_out_dir(&config)?;
    let inputs = load_inputs(&config)?;
    let problem = &inputs.problem;
    let truth = inputs.truth.as_ref().expect("checked above");
    let pool = WorkerPool::new(config.resolved_workers(problem.bands()))?;
    // Same step resolution as a self-tuned run so the comparison is like
    // for like: certificate τ at the far corner of the search box.
    let base = base_params(&config.solver, &config.intervals, true, problem)?;
    let (interval_s, interval_lambda) = search_intervals(&config.intervals)?;
    let [b0, b1, b2] = config.schedule.budgets;
    let started = Instant::now();

    let mut trace_s = Vec::new();
    let mut memo: HashMap<u64, f64> = HashMap::new();
    let golden_s = golden_section(interval_s, |mu| {
        if let Some(&w) = memo.get(&mu.to_bits()) {
            return Ok(w);
        }
        let params = SolverParams {
            mu_s: mu,
            mu_lambda: 0.0,
            ..base.clone()
        };
        let state = run_plain(problem, &params, b0, &pool, None)?;
        let wmse = true_wmse(&state.x_tilde, truth, &problem.psfs)?;
        memo.insert(mu.to_bits(), wmse);
        trace_s.push(EvalPoint { value: mu, wmse });
        Ok(wmse)
    })?;
    let mu_s_star = golden_s.argmin;
    println!(
        "gridsearch: μ_s* = {:.4} (true WMSE {:.6e}, {} evaluations)",
        mu_s_star, golden_s.min_value, golden_s.evals
    );

    let params_s = SolverParams {
        mu_s: mu_s_star,
        mu_lambda: 0.0,
        ..base.clone()
    };
    let snapshot = run_plain(problem, &params_s, b0, &pool, None)?;

    let mut trace_l = Vec::new();
    let mut memo_l: HashMap<u64, f64> = HashMap::new();
    let golden_l = golden_section(interval_lambda, |lambda| {
        if let Some(&w) = memo_l.get(&lambda.to_bits()) {
            return Ok(w);
        }
        let params = SolverParams {
            mu_s: mu_s_star,
            mu_lambda: lambda,
            ..base.clone()
        };
        let state = run_plain(problem, &params, b1 + b2, &pool, Some(&snapshot))?;
        let wmse = true_wmse(&state.x_tilde, truth, &problem.psfs)?;
        memo_l.insert(lambda.to_bits(), wmse);
        trace_l.push(EvalPoint { value: lambda, wmse });
        Ok(wmse)
    })?;
    let mu_lambda_star = golden_l.argmin;
    println!(
        "gridsearch: μ_λ* = {:.4} (true WMSE {:.6e}, {} evaluations)",
        mu_lambda_star, golden_l.min_value, golden_l.evals
    );

    // Full phased rerun at the oracle pair, producing the standard artifacts.
    let noise = match config.noise_variance {
        Some(v) => Some(NoiseModel::uniform(v, problem.bands())?),
        None => None,
    };
    let metrics_path = out.join("metrics.csv");
    let file = File::create(&metrics_path)
        .map_err(|e| CliError::Io(format!("creating {}: {e}", metrics_path.display())))?;
    let mut writer = MetricsWriter::new(BufWriter::new(file))?;
    let phase1 = SolverParams {
        mu_s: mu_s_star,
        mu_lambda: 0.0,
        ..base.clone()
    };
    let rest = SolverParams {
        mu_s: mu_s_star,
        mu_lambda: mu_lambda_star,
        ..base.clone()
    };
    let segments = [
        (1u8, b0, phase1),
        (2u8, b1, rest.clone()),
        (3u8, b2, rest.clone()),
    ];
    let (state, report) = run_segments(
        problem,
        &segments,
        noise.as_ref(),
        config.seeds.probe,
        &pool,
        &mut writer,
        Some(truth),
        started,
    )?;
    writer.flush()?;

    let mut manifest = Manifest::new("gridsearch", config.clone());
    manifest.noise_variances = noise.as_ref().map(|n| n.variances().to_vec());
    let result_path = out.join("result.cube");
    cube_write(&state.x_tilde, &result_path)?;
    manifest.record_output("result", &result_path);
    manifest.record_output("metrics", &metrics_path);

    let grid_report = GridSearchReport {
        mu_s: GoldenTrace {
            argmin: mu_s_star,
            min_wmse: golden_s.min_value,
            evals: golden_s.evals,
            trace: trace_s,
        },
        mu_lambda: GoldenTrace {
            argmin: mu_lambda_star,
            min_wmse: golden_l.min_value,
            evals: golden_l.evals,
            trace: trace_l,
        },
        budgets: config.schedule.budgets,
    };
    let grid_path = out.join("gridsearch.json");
    let text = serde_json::to_string_pretty(&grid_report)
        .map_err(|e| CliError::Config(format!("serializing gridsearch report: {e}")))?;
    fs::write(&grid_path, text)
        .map_err(|e| CliError::Io(format!("writing {}: {e}", grid_path.display())))?;
    manifest.record_output("gridsearch", &grid_path);

    render_plots(&metrics_path, &out, &mut manifest)?;
    let results = make_results(
        &rest,
        mu_s_star,
        mu_lambda_star,
        state.iteration,
        report.as_ref(),
        &state,
        Some(truth),
        problem,
    )?;
    if let Some(snr) = results.snr_db {
        println!("gridsearch: final SNR {snr:.3} dB at the oracle pair");
    }
    manifest.results = Some(results);
    let manifest_path = out.join("manifest.json");
    manifest.write(&manifest_path)?;
    println!("gridsearch: artifacts in {}", out.display());
    Ok(())
}
