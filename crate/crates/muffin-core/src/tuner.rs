//! Self-tuning of the two regularization weights by greedy risk descent.
//!
//! At each tuned iterate, a golden-section search proposes candidate values
//! of one parameter; every candidate is scored by running a *single trial
//! iterate* (solver + shadow + risk estimate) from a bitwise-identical
//! snapshot of the current state. The candidate minimizing the trial risk
//! wins, its trial state is committed, and everything else is discarded.
//! The schedule has three phases:
//!
//!   1. tune μ_s with μ_λ = 0,
//!   2. freeze μ_s at its last committed value, tune μ_λ,
//!   3. iterate with both frozen until the phase budget (or an optional
//!      relative-change rule on the risk) says stop.
//!
//! Step sizes τ and σ stay fixed across the whole run; when they come from
//! the convergence certificate the caller should size them for the interval
//! maxima so every candidate keeps the certificate satisfied.
//!
//! Scoring note: a trial that diverges (non-finite risk) is scored +∞ —
//! a perfectly orderable "worst possible" value — so the bracket simply
//! moves away from it. A NaN reaching the golden section itself aborts,
//! since NaN would poison bracket comparisons.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::cube::NoiseModel;
use crate::error::{CoreError, Result};
use crate::psure::{psure_evaluate, shadow_iterate, ProbeVector, RiskReport, ShadowState};
use crate::solver::{muffin_iterate, Problem, SolverParams, SolverState, WorkerPool};

/// Bracket for a single parameter search. `tolerance` is the absolute
/// bracket width at which the search stops.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchInterval {
    pub lo: f64,
    pub hi: f64,
    pub tolerance: f64,
}

impl SearchInterval {
    /// Interval with the default tolerance of 1% of the width.
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        Self::with_tolerance(lo, hi, ((hi - lo) * 1e-2).max(f64::MIN_POSITIVE))
    }

    pub fn with_tolerance(lo: f64, hi: f64, tolerance: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo <= hi) {
            return Err(CoreError::InvalidArgument(format!(
                "search interval [{lo}, {hi}] must satisfy 0 ≤ lo ≤ hi, finite"
            )));
        }
        if !(tolerance > 0.0 && tolerance.is_finite()) {
            return Err(CoreError::InvalidArgument(format!(
                "bracket tolerance {tolerance} must be positive"
            )));
        }
        Ok(SearchInterval { lo, hi, tolerance })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoldenResult {
    /// Midpoint of the final bracket.
    pub argmin: f64,
    /// Smallest objective value observed during the search.
    pub min_value: f64,
    /// Number of objective evaluations.
    pub evals: usize,
}

/// Derivative-free 1-D minimization by golden-section bracket contraction.
///
/// The bracket shrinks by the golden-ratio conjugate ρ ≈ 0.618 per
/// evaluation after the first two, so the evaluation count is at most
/// 2 + ⌈log(width/tol) / log(1/ρ)⌉. The objective may return +∞ (treated as
/// a worst-case score); NaN aborts with the offending parameter.
pub fn golden_section(
    interval: SearchInterval,
    mut f: impl FnMut(f64) -> Result<f64>,
) -> Result<GoldenResult> {
    let mut eval = |x: f64, evals: &mut usize| -> Result<f64> {
        let v = f(x)?;
        *evals += 1;
        if v.is_nan() {
            return Err(CoreError::Numerical(format!(
                "objective is NaN at parameter {x}"
            )));
        }
        Ok(v)
    };

    let mut evals = 0usize;
    let (mut a, mut b) = (interval.lo, interval.hi);
    if b - a <= interval.tolerance {
        let mid = interval.midpoint();
        let v = eval(mid, &mut evals)?;
        return Ok(GoldenResult {
            argmin: mid,
            min_value: v,
            evals,
        });
    }

    let shrink = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - shrink * (b - a);
    let mut x2 = a + shrink * (b - a);
    let mut f1 = eval(x1, &mut evals)?;
    let mut f2 = eval(x2, &mut evals)?;
    let mut best = if f1 <= f2 { f1 } else { f2 };

    while b - a > interval.tolerance {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - shrink * (b - a);
            f1 = eval(x1, &mut evals)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + shrink * (b - a);
            f2 = eval(x2, &mut evals)?;
        }
        best = best.min(f1.min(f2));
    }

    Ok(GoldenResult {
        argmin: 0.5 * (a + b),
        min_value: best,
        evals,
    })
}

/// Which regularization weight a greedy step searches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TunedParam {
    MuS,
    MuLambda,
}

impl TunedParam {
    fn set(self, params: &mut SolverParams, value: f64) {
        match self {
            TunedParam::MuS => params.mu_s = value,
            TunedParam::MuLambda => params.mu_lambda = value,
        }
    }
}

/// Solver and shadow states advanced in lockstep.
#[derive(Debug, Clone, PartialEq)]
pub struct TunedState {
    pub solver: SolverState,
    pub shadow: ShadowState,
}

impl TunedState {
    pub fn cold_start(problem: &Problem) -> Self {
        TunedState {
            solver: SolverState::cold_start(problem),
            shadow: ShadowState::cold_start(problem),
        }
    }
}

/// Advance solver and shadow by one iterate and evaluate the risk estimate.
/// This is the trial primitive of the greedy search and equally the inner
/// loop of a fixed-parameter run that tracks its own risk.
pub fn step_with_risk(
    state: &mut TunedState,
    problem: &Problem,
    params: &SolverParams,
    probe: &ProbeVector,
    noise: &NoiseModel,
    pool: &WorkerPool,
) -> Result<RiskReport> {
    let trace = muffin_iterate(&mut state.solver, problem, params, pool, true)?
        .expect("trace requested");
    shadow_iterate(&mut state.shadow, probe, &trace, problem, params, pool)?;
    psure_evaluate(&state.solver, &state.shadow, probe, problem, noise, pool)
}

#[derive(Debug, Clone)]
pub struct GreedyOutcome {
    /// Committed parameter value (bracket midpoint of the golden search).
    pub chosen: f64,
    /// State after the committed trial.
    pub state: TunedState,
    /// Risk report of the committed trial.
    pub report: RiskReport,
    /// Golden-section objective evaluations.
    pub evals: usize,
    /// Actual trial iterates executed (≤ evals + 1 thanks to memoization;
    /// +1 for the commit).
    pub trials: usize,
}

/// One greedy tuning step: golden-section over `which`, every candidate
/// scored by a one-iterate trial from a snapshot of `current`, winner
/// committed. `current` itself is never mutated, so discarded trials cannot
/// leak state.
#[allow(clippy::too_many_arguments)]
pub fn greedy_step(
    current: &TunedState,
    problem: &Problem,
    base_params: &SolverParams,
    which: TunedParam,
    interval: SearchInterval,
    probe: &ProbeVector,
    noise: &NoiseModel,
    pool: &WorkerPool,
) -> Result<GreedyOutcome> {
    let mut trials = 0usize;
    let mut run_trial = |value: f64| -> Result<(TunedState, RiskReport)> {
        let mut params = base_params.clone();
        which.set(&mut params, value);
        let mut state = current.clone();
        trials += 1;
        let report = step_with_risk(&mut state, problem, &params, probe, noise, pool)?;
        Ok((state, report))
    };

    let mut memo: HashMap<u64, f64> = HashMap::new();
    let golden = {
        let run_trial = &mut run_trial;
        golden_section(interval, |mu| {
            if let Some(&score) = memo.get(&mu.to_bits()) {
                return Ok(score);
            }
            let (_, report) = run_trial(mu)?;
            // Divergent candidates score +∞ so the bracket walks away from
            // them instead of aborting the search.
            let score = if report.total.is_finite() {
                report.total
            } else {
                f64::INFINITY
            };
            memo.insert(mu.to_bits(), score);
            Ok(score)
        })?
    };

    let (state, report) = run_trial(golden.argmin)?;
    Ok(GreedyOutcome {
        chosen: golden.argmin,
        state,
        report,
        evals: golden.evals,
        trials,
    })
}

/// When a tuning phase hands control to the next one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StopRule {
    /// Run each phase for exactly its budget.
    FixedBudgets,
    /// Stop a phase early once |risk_k − risk_{k−window}| / |risk_{k−window}|
    /// drops below `threshold` (budget still caps the phase).
    PsureRelative { threshold: f64, window: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneSchedule {
    /// Iterates for phases 1 (tune μ_s), 2 (tune μ_λ), 3 (both frozen).
    pub budgets: [u64; 3],
    pub stop: StopRule,
}

impl Default for TuneSchedule {
    /// The reference schedule: 100 + 100 + 500 iterates.
    fn default() -> Self {
        TuneSchedule {
            budgets: [100, 100, 500],
            stop: StopRule::FixedBudgets,
        }
    }
}

impl TuneSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.budgets.iter().any(|&b| b == 0) {
            return Err(CoreError::InvalidArgument(
                "phase budgets must be ≥ 1".into(),
            ));
        }
        if let StopRule::PsureRelative { threshold, window } = self.stop {
            if !(threshold > 0.0 && threshold.is_finite()) {
                return Err(CoreError::InvalidArgument(format!(
                    "stop threshold {threshold} must be positive"
                )));
            }
            if window == 0 {
                return Err(CoreError::InvalidArgument("stop window must be ≥ 1".into()));
            }
        }
        Ok(())
    }

    fn phase_done(&self, history: &[f64]) -> bool {
        match self.stop {
            StopRule::FixedBudgets => false,
            StopRule::PsureRelative { threshold, window } => {
                let k = history.len();
                if k <= window {
                    return false;
                }
                let old = history[k - 1 - window];
                let new = history[k - 1];
                (new - old).abs() < threshold * old.abs().max(f64::MIN_POSITIVE)
            }
        }
    }
}

/// One committed iterate of a self-tuned run, as seen by the observer.
#[derive(Debug, Clone)]
pub struct TuneRecord {
    /// Global iterate counter, 1-based, strictly increasing.
    pub iteration: u64,
    /// 1 = tune μ_s, 2 = tune μ_λ, 3 = frozen.
    pub phase: u8,
    /// Parameter values in effect for this committed iterate.
    pub mu_s: f64,
    pub mu_lambda: f64,
    /// Golden-section evaluations spent (0 in phase 3).
    pub evals: usize,
    pub report: RiskReport,
}

/// Result of a complete self-tuned run.
#[derive(Debug, Clone)]
pub struct TunedRun {
    pub state: TunedState,
    pub mu_s: f64,
    pub mu_lambda: f64,
    /// Risk report per committed iterate, in order.
    pub reports: Vec<RiskReport>,
}

/// The full three-phase self-tuned reconstruction. `base_params` supplies
/// τ and σ; its μ values are ignored (phase 1 starts from μ_λ = 0 by
/// construction). The observer sees every committed iterate together with
/// the state that produced it.
#[allow(clippy::too_many_arguments)]
pub fn self_tuned_run(
    problem: &Problem,
    noise: &NoiseModel,
    schedule: &TuneSchedule,
    interval_s: SearchInterval,
    interval_lambda: SearchInterval,
    base_params: &SolverParams,
    probe_seed: u64,
    pool: &WorkerPool,
    mut observer: impl FnMut(&TuneRecord, &TunedState),
) -> Result<TunedRun> {
    schedule.validate()?;
    base_params.validate()?;
    let probe = ProbeVector::rademacher(&problem.dirty, probe_seed);
    let mut state = TunedState::cold_start(problem);
    let mut reports = Vec::new();
    let mut iteration = 0u64;
    let mut mu_s = 0.0;
    let mut mu_lambda = 0.0;

    for phase in 1u8..=3 {
        let budget = schedule.budgets[(phase - 1) as usize];
        let mut history = Vec::new();
        for _ in 0..budget {
            let (evals, report) = match phase {
                1 => {
                    let params = SolverParams {
                        mu_s: 0.0,
                        mu_lambda: 0.0,
                        ..base_params.clone()
                    };
                    let out = greedy_step(
                        &state, problem, &params, TunedParam::MuS, interval_s, &probe, noise,
                        pool,
                    )?;
                    mu_s = out.chosen;
                    state = out.state;
                    (out.evals, out.report)
                }
                2 => {
                    let params = SolverParams {
                        mu_s,
                        mu_lambda: 0.0,
                        ..base_params.clone()
                    };
                    let out = greedy_step(
                        &state,
                        problem,
                        &params,
                        TunedParam::MuLambda,
                        interval_lambda,
                        &probe,
                        noise,
                        pool,
                    )?;
                    mu_lambda = out.chosen;
                    state = out.state;
                    (out.evals, out.report)
                }
                _ => {
                    let params = SolverParams {
                        mu_s,
                        mu_lambda,
                        ..base_params.clone()
                    };
                    let report =
                        step_with_risk(&mut state, problem, &params, &probe, noise, pool)?;
                    (0, report)
                }
            };
            iteration += 1;
            history.push(report.total);
            let record = TuneRecord {
                iteration,
                phase,
                mu_s,
                mu_lambda,
                evals,
                report: report.clone(),
            };
            observer(&record, &state);
            reports.push(report);
            if schedule.phase_done(&history) {
                break;
            }
        }
    }

    Ok(TunedRun {
        state,
        mu_s,
        mu_lambda,
        reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cube::ImageCube;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn golden_eval_bound(interval: &SearchInterval) -> usize {
        let shrink = (5.0_f64.sqrt() - 1.0) / 2.0;
        let ratio = interval.width() / interval.tolerance;
        2 + (ratio.ln() / (1.0 / shrink).ln()).ceil().max(0.0) as usize
    }

    #[test]
    fn golden_finds_quadratic_minimum() {
        let interval = SearchInterval::with_tolerance(0.0, 3.0, 1e-3).unwrap();
        let got = golden_section(interval, |mu| Ok((mu - 1.0) * (mu - 1.0))).unwrap();
        assert!((got.argmin - 1.0).abs() <= 1e-3, "argmin {}", got.argmin);
        assert!(got.min_value < 1e-6);
        assert!(got.evals <= golden_eval_bound(&interval), "{} evals", got.evals);
    }

    #[test]
    fn golden_monotone_objective_hits_boundary() {
        let interval = SearchInterval::with_tolerance(0.0, 2.0, 1e-3).unwrap();
        let got = golden_section(interval, |mu| Ok(-mu)).unwrap();
        assert!((got.argmin - 2.0).abs() <= 1e-3, "argmin {}", got.argmin);
        assert!(got.evals <= golden_eval_bound(&interval));
    }

    #[test]
    fn golden_plateau_lands_on_plateau() {
        // Piecewise-constant oracle: 0 on [0.8, 1.3], 1 elsewhere. The final
        // bracket may straddle a plateau edge, so the guarantee is the
        // midpoint sits within one tolerance of the plateau and the observed
        // minimum equals the plateau value.
        let tol = 1e-3;
        let interval = SearchInterval::with_tolerance(0.0, 3.0, tol).unwrap();
        let got = golden_section(interval, |mu| {
            Ok(if (0.8..=1.3).contains(&mu) { 0.0 } else { 1.0 })
        })
        .unwrap();
        assert!(
            got.argmin >= 0.8 - tol && got.argmin <= 1.3 + tol,
            "argmin {} more than one tolerance off the plateau",
            got.argmin
        );
        assert_eq!(got.min_value, 0.0);
    }

    #[test]
    fn golden_aborts_on_nan_and_tolerates_infinity() {
        let interval = SearchInterval::with_tolerance(0.0, 2.0, 1e-2).unwrap();
        let err = golden_section(interval, |mu| {
            Ok(if mu > 1.0 { f64::NAN } else { mu })
        });
        assert!(err.is_err());

        // +∞ on part of the domain just steers the bracket away.
        let got = golden_section(interval, |mu| {
            Ok(if mu < 0.5 {
                f64::INFINITY
            } else {
                (mu - 1.0) * (mu - 1.0)
            })
        })
        .unwrap();
        assert!((got.argmin - 1.0).abs() <= 2e-2, "argmin {}", got.argmin);
    }

    #[test]
    fn golden_collapsed_interval_evaluates_midpoint_once() {
        let interval = SearchInterval::with_tolerance(0.7, 0.7, 1e-3).unwrap();
        let got = golden_section(interval, |mu| Ok(mu * 10.0)).unwrap();
        assert_eq!(got.argmin, 0.7);
        assert_eq!(got.min_value, 7.0);
        assert_eq!(got.evals, 1);
    }

    #[test]
    fn interval_validation() {
        assert!(SearchInterval::new(0.0, 2.0).is_ok());
        assert!(SearchInterval::new(2.0, 0.0).is_err());
        assert!(SearchInterval::new(-1.0, 2.0).is_err());
        assert!(SearchInterval::with_tolerance(0.0, 1.0, 0.0).is_err());
        assert!(SearchInterval::new(0.5, 0.5).is_ok(), "collapsed is allowed");
    }

    fn small_problem(seed: u64, w: usize, h: usize, l: usize) -> (Problem, NoiseModel) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = w * h;
        let mut psf = ImageCube::zeros(w, h, l, (0..l).map(|i| 1.0 + i as f64).collect()).unwrap();
        for band in 0..l {
            let plane = psf.plane_mut(band);
            plane[0] = 1.0;
            for v in plane.iter_mut().skip(1) {
                *v = rng.random_range(-0.1..0.3);
            }
        }
        let data: Vec<f64> = (0..n * l).map(|_| rng.random_range(-0.2..1.0)).collect();
        let dirty =
            ImageCube::from_data(w, h, l, (0..l).map(|i| 1.0 + i as f64).collect(), data).unwrap();
        let problem = Problem::new(dirty, &psf).unwrap();
        let noise = NoiseModel::uniform(0.01, l).unwrap();
        (problem, noise)
    }

    #[test]
    fn collapsed_interval_greedy_equals_plain_iterate() {
        let (problem, noise) = small_problem(41, 8, 8, 2);
        let pool = WorkerPool::new(2).unwrap();
        let probe = ProbeVector::rademacher(&problem.dirty, 9);
        let base = SolverParams::paper(0.0, 0.0);

        // Warm up two iterates at μ_s = 0.4.
        let mut warm = SolverParams::paper(0.4, 0.0);
        warm.mu_s = 0.4;
        let mut state = TunedState::cold_start(&problem);
        for _ in 0..2 {
            step_with_risk(&mut state, &problem, &warm, &probe, &noise, &pool).unwrap();
        }

        let interval = SearchInterval::with_tolerance(0.4, 0.4, 1e-3).unwrap();
        let out = greedy_step(
            &state, &problem, &base, TunedParam::MuS, interval, &probe, &noise, &pool,
        )
        .unwrap();
        assert_eq!(out.chosen, 0.4);

        let mut plain = state.clone();
        let report = step_with_risk(&mut plain, &problem, &warm, &probe, &noise, &pool).unwrap();
        assert_eq!(out.state, plain, "collapsed greedy must equal a plain iterate");
        assert_eq!(out.report, report);
    }

    #[test]
    fn committed_risk_not_worse_than_endpoint_trials() {
        let (problem, noise) = small_problem(42, 16, 16, 4);
        let pool = WorkerPool::new(2).unwrap();
        let probe = ProbeVector::rademacher(&problem.dirty, 13);
        let base = SolverParams::paper(0.0, 0.0);

        let mut state = TunedState::cold_start(&problem);
        for _ in 0..5 {
            step_with_risk(&mut state, &problem, &base, &probe, &noise, &pool).unwrap();
        }

        let interval = SearchInterval::new(0.0, 2.0).unwrap();
        let out = greedy_step(
            &state, &problem, &base, TunedParam::MuS, interval, &probe, &noise, &pool,
        )
        .unwrap();

        let trial_at = |mu: f64| {
            let mut params = base.clone();
            params.mu_s = mu;
            let mut s = state.clone();
            step_with_risk(&mut s, &problem, &params, &probe, &noise, &pool).unwrap()
        };
        let lo = trial_at(interval.lo);
        let hi = trial_at(interval.hi);
        assert!(
            out.report.total <= lo.total + 1e-12 * lo.total.abs(),
            "committed {} vs lo {}",
            out.report.total,
            lo.total
        );
        assert!(
            out.report.total <= hi.total + 1e-12 * hi.total.abs(),
            "committed {} vs hi {}",
            out.report.total,
            hi.total
        );
        assert!(out.trials <= out.evals + 1, "memoization regressed");
    }

    #[test]
    fn greedy_is_pure_in_its_snapshot() {
        let (problem, noise) = small_problem(43, 8, 8, 2);
        let pool = WorkerPool::new(1).unwrap();
        let probe = ProbeVector::rademacher(&problem.dirty, 3);
        let base = SolverParams::paper(0.0, 0.0);
        let mut state = TunedState::cold_start(&problem);
        for _ in 0..3 {
            step_with_risk(&mut state, &problem, &base, &probe, &noise, &pool).unwrap();
        }
        let snapshot = state.clone();
        let interval = SearchInterval::new(0.0, 1.0).unwrap();
        let a = greedy_step(
            &state, &problem, &base, TunedParam::MuS, interval, &probe, &noise, &pool,
        )
        .unwrap();
        assert_eq!(state, snapshot, "greedy must not mutate its snapshot");
        let b = greedy_step(
            &state, &problem, &base, TunedParam::MuS, interval, &probe, &noise, &pool,
        )
        .unwrap();
        assert_eq!(a.chosen, b.chosen);
        assert_eq!(a.state, b.state, "greedy must be deterministic");
    }

    #[test]
    fn self_tuned_run_walks_the_three_phases() {
        let (problem, noise) = small_problem(44, 8, 8, 3);
        let pool = WorkerPool::new(2).unwrap();
        let schedule = TuneSchedule {
            budgets: [3, 3, 4],
            stop: StopRule::FixedBudgets,
        };
        let interval_s = SearchInterval::new(0.0, 1.0).unwrap();
        let interval_l = SearchInterval::new(0.0, 1.5).unwrap();
        let base = SolverParams::paper(0.0, 0.0);
        let mut seen = Vec::new();
        let run = self_tuned_run(
            &problem,
            &noise,
            &schedule,
            interval_s,
            interval_l,
            &base,
            77,
            &pool,
            |rec, _state| seen.push((rec.iteration, rec.phase, rec.mu_s, rec.mu_lambda, rec.evals)),
        )
        .unwrap();

        assert_eq!(run.reports.len(), 10);
        assert_eq!(seen.len(), 10);
        let phases: Vec<u8> = seen.iter().map(|r| r.1).collect();
        assert_eq!(phases, [1, 1, 1, 2, 2, 2, 3, 3, 3, 3]);
        for (k, rec) in seen.iter().enumerate() {
            assert_eq!(rec.0, k as u64 + 1, "iterations strictly increasing");
        }
        // Phase 1 searches μ_s with μ_λ pinned at zero.
        for rec in &seen[..3] {
            assert_eq!(rec.3, 0.0);
            assert!(rec.4 > 0, "phase 1 spends golden evaluations");
        }
        // Phase 2 freezes μ_s at its last committed value.
        let frozen_mu_s = seen[2].2;
        for rec in &seen[3..6] {
            assert_eq!(rec.2, frozen_mu_s);
        }
        // Phase 3 freezes both and spends no evaluations.
        let frozen_mu_l = seen[5].3;
        for rec in &seen[6..] {
            assert_eq!(rec.2, frozen_mu_s);
            assert_eq!(rec.3, frozen_mu_l);
            assert_eq!(rec.4, 0);
        }
        assert_eq!(run.mu_s, frozen_mu_s);
        assert_eq!(run.mu_lambda, frozen_mu_l);
        assert_eq!(run.state.solver.iteration, 10);
        run.state.solver.check_feasible().unwrap();
    }

    #[test]
    fn relative_stop_rule_cuts_phases_short() {
        let (problem, noise) = small_problem(45, 8, 8, 2);
        let pool = WorkerPool::new(1).unwrap();
        let window = 2;
        let schedule = TuneSchedule {
            budgets: [10, 10, 10],
            stop: StopRule::PsureRelative {
                threshold: 1e9, // absurdly lax: stop as soon as the window fills
                window,
            },
        };
        let base = SolverParams::paper(0.0, 0.0);
        let mut phase_lengths = [0u64; 3];
        self_tuned_run(
            &problem,
            &noise,
            &schedule,
            SearchInterval::new(0.0, 1.0).unwrap(),
            SearchInterval::new(0.0, 1.0).unwrap(),
            &base,
            5,
            &pool,
            |rec, _| phase_lengths[(rec.phase - 1) as usize] += 1,
        )
        .unwrap();
        assert_eq!(phase_lengths, [(window + 1) as u64; 3]);
    }

    #[test]
    fn zero_budgets_rejected() {
        let schedule = TuneSchedule {
            budgets: [0, 5, 5],
            stop: StopRule::FixedBudgets,
        };
        assert!(schedule.validate().is_err());
        let bad_rule = TuneSchedule {
            budgets: [1, 1, 1],
            stop: StopRule::PsureRelative {
                threshold: 0.0,
                window: 10,
            },
        };
        assert!(bad_rule.validate().is_err());
    }
}
