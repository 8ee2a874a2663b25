//! The primal-dual deconvolution iteration.
//!
//! One iterate, given dirty images y_ℓ, convolutions H_ℓ, spatial analysis
//! W_s and spectral analysis W_λ:
//!
//! master (feedback):  tⁿ = μ_λ W_λ† vⁿ            (recomputed each iterate
//!                     with the current μ_λ, so parameter changes from the
//!                     tuner take effect at iterate boundaries)
//! per band ℓ:         x_ℓ ← x̃_ℓ
//!                     ∇_ℓ = H†(H x_ℓ − y_ℓ)
//!                     s_ℓ = μ_s W_s† u_ℓ
//!                     m_ℓ = x_ℓ − τ(∇_ℓ + s_ℓ + t_ℓ)
//!                     x̃_ℓ = (m_ℓ)₊
//!                     p_ℓ = u_ℓ + σ μ_s W_s(2x̃_ℓ − x_ℓ)
//!                     u_ℓ = sat(p_ℓ)
//! master (dual):      ṽⁿ = vⁿ + σ μ_λ W_λ(2x̃ⁿ − xⁿ)
//!                     vⁿ = sat(ṽⁿ)
//!
//! sat clamps to [−1,1]; (·)₊ projects onto the nonnegative orthant. The
//! objective being minimized is
//!   Σ_ℓ ½‖y_ℓ − H_ℓ x̃_ℓ‖² + μ_s Σ_ℓ‖W_s x̃_ℓ‖₁ + μ_λ Σ_n‖W_λ x̃ⁿ‖₁
//! over x̃ ≥ 0.
//!
//! Convergence certificate: τ·(β/2 + σ·(μ_s²·B + μ_λ²)) ≤ 1 with
//! β = max_ℓ ‖H_ℓ‖² and B the number of stacked wavelet bases. The check
//! warns rather than aborts: the reference configuration (σ=10, τ=10⁻³) is
//! used as given.
//!
//! Concurrency contract: band updates run on a worker pool and the master
//! phase is parallel across pixel chunks, but every cross-band reduction
//! (cost, risk sums) folds in ascending band order over an index-ordered
//! buffer, so results are bitwise identical for any worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cube::{CoefficientCube, ImageCube};
use crate::error::{CoreError, Result};
use crate::operators::{BandOperator, PsfSet};
use crate::transforms::{SpatialAnalysis, SpectralAnalysis};

/// Fixed pixel-chunk size for master-phase parallelism. Chunk boundaries
/// must not depend on the worker count or results could not be bitwise
/// reproducible across pools.
const PIXEL_CHUNK: usize = 2048;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    pub mu_s: f64,
    pub mu_lambda: f64,
    pub tau: f64,
    pub sigma: f64,
}

impl SolverParams {
    /// The reference configuration: σ = 10, τ = 10⁻³.
    pub fn paper(mu_s: f64, mu_lambda: f64) -> Self {
        SolverParams {
            mu_s,
            mu_lambda,
            tau: 1e-3,
            sigma: 10.0,
        }
    }

    /// Step size from the convergence certificate with 10% margin:
    /// τ = 0.9 / (β/2 + σ(μ_s²·B + μ_λ²)).
    pub fn auto(mu_s: f64, mu_lambda: f64, sigma: f64, beta: f64, basis_count: usize) -> Self {
        let tau = 0.9 / (beta / 2.0 + sigma * (mu_s * mu_s * basis_count as f64 + mu_lambda * mu_lambda));
        SolverParams {
            mu_s,
            mu_lambda,
            tau,
            sigma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu_s >= 0.0 && self.mu_s.is_finite()) {
            return Err(CoreError::InvalidArgument(format!("mu_s = {}", self.mu_s)));
        }
        if !(self.mu_lambda >= 0.0 && self.mu_lambda.is_finite()) {
            return Err(CoreError::InvalidArgument(format!(
                "mu_lambda = {}",
                self.mu_lambda
            )));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(CoreError::InvalidArgument(format!("tau = {}", self.tau)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(CoreError::InvalidArgument(format!("sigma = {}", self.sigma)));
        }
        Ok(())
    }

    /// Left-hand side of the convergence certificate; ≤ 1 guarantees
    /// convergence.
    pub fn certificate(&self, beta: f64, basis_count: usize) -> f64 {
        self.tau
            * (beta / 2.0
                + self.sigma
                    * (self.mu_s * self.mu_s * basis_count as f64
                        + self.mu_lambda * self.mu_lambda))
    }

    /// Warn-level certificate check; `None` when satisfied.
    pub fn certificate_warning(&self, beta: f64, basis_count: usize) -> Option<String> {
        let c = self.certificate(beta, basis_count);
        (c > 1.0).then(|| {
            format!(
                "step sizes violate the convergence certificate: τ(β/2 + σ(μ_s²B + μ_λ²)) = {c:.3} > 1"
            )
        })
    }
}

/// Immutable problem data shared by every iterate.
pub struct Problem {
    pub dirty: ImageCube,
    pub psfs: PsfSet,
    pub spatial: SpatialAnalysis,
    pub spectral: SpectralAnalysis,
}

impl Problem {
    /// Standard transforms: db1..8 union at default depth, DCT-II over bands.
    pub fn new(dirty: ImageCube, psf_cube: &ImageCube) -> Result<Self> {
        let spatial = SpatialAnalysis::daubechies_union(dirty.width(), dirty.height())?;
        let spectral = SpectralAnalysis::new(dirty.bands())?;
        Self::with_transforms(dirty, PsfSet::from_cube(psf_cube)?, spatial, spectral)
    }

    pub fn with_transforms(
        dirty: ImageCube,
        psfs: PsfSet,
        spatial: SpatialAnalysis,
        spectral: SpectralAnalysis,
    ) -> Result<Self> {
        if psfs.width() != dirty.width() || psfs.height() != dirty.height() {
            return Err(CoreError::DimensionMismatch(format!(
                "psf grid {}x{} vs dirty grid {}x{}",
                psfs.width(),
                psfs.height(),
                dirty.width(),
                dirty.height()
            )));
        }
        if psfs.bands() != dirty.bands() {
            return Err(CoreError::DimensionMismatch(format!(
                "{} psf bands vs {} dirty bands",
                psfs.bands(),
                dirty.bands()
            )));
        }
        if spatial.width() != dirty.width() || spatial.height() != dirty.height() {
            return Err(CoreError::DimensionMismatch(
                "spatial analysis grid differs from image grid".into(),
            ));
        }
        if spectral.len() != dirty.bands() {
            return Err(CoreError::DimensionMismatch(
                "spectral analysis length differs from band count".into(),
            ));
        }
        Ok(Problem {
            dirty,
            psfs,
            spatial,
            spectral,
        })
    }

    pub fn bands(&self) -> usize {
        self.dirty.bands()
    }

    pub fn pixels(&self) -> usize {
        self.dirty.pixels()
    }

    /// β = max_ℓ ‖H_ℓ‖².
    pub fn beta(&self) -> f64 {
        self.psfs.max_norm_sq()
    }
}

/// All primal/dual variables of the iteration.
///
/// `v` holds the per-pixel spectral dual *pixel-major* (entry (pixel n,
/// coefficient k) at n·L + k) because it is only ever read and written one
/// pixel-spectrum at a time; everything else is plane-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub x: ImageCube,
    pub x_tilde: ImageCube,
    pub u: CoefficientCube,
    pub v: Vec<f64>,
    pub t: ImageCube,
    pub iteration: u64,
}

impl SolverState {
    /// Cold start: everything zero.
    pub fn cold_start(problem: &Problem) -> Self {
        let dirty = &problem.dirty;
        let zero = ImageCube::zeros_like(dirty);
        SolverState {
            x: zero.clone(),
            x_tilde: zero.clone(),
            u: CoefficientCube::zeros(
                dirty.width(),
                dirty.height(),
                dirty.bands(),
                problem.spatial.basis_count(),
            ),
            v: vec![0.0; dirty.pixels() * dirty.bands()],
            t: zero,
            iteration: 0,
        }
    }

    /// Feasibility invariants: x̃ ≥ 0, |u| ≤ 1, |v| ≤ 1.
    pub fn check_feasible(&self) -> Result<()> {
        if self.x_tilde.data().iter().any(|&v| v < 0.0) {
            return Err(CoreError::Numerical("x̃ has negative entries".into()));
        }
        if self.u.data().iter().any(|&c| c.abs() > 1.0) {
            return Err(CoreError::Numerical("spatial dual left [−1,1]".into()));
        }
        if self.v.iter().any(|&c| c.abs() > 1.0) {
            return Err(CoreError::Numerical("spectral dual left [−1,1]".into()));
        }
        Ok(())
    }
}

/// Elementwise clamp to [−1, 1].
pub fn sat(values: &[f64]) -> Vec<f64> {
    values.iter().map(|&v| v.clamp(-1.0, 1.0)).collect()
}

pub fn sat_in_place(values: &mut [f64]) {
    for v in values {
        *v = v.clamp(-1.0, 1.0);
    }
}

/// Elementwise projection onto the nonnegative orthant.
pub fn project_positive(values: &[f64]) -> Vec<f64> {
    values.iter().map(|&v| v.max(0.0)).collect()
}

pub fn project_positive_in_place(values: &mut [f64]) {
    for v in values {
        *v = v.max(0.0);
    }
}

/// Worker pool with a fixed thread count; all solver parallelism goes
/// through it so the count is a single reproducible knob.
pub struct WorkerPool {
    pool: rayon::ThreadPool,
    workers: usize,
}

impl WorkerPool {
    pub fn new(workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(CoreError::InvalidArgument("worker count must be ≥ 1".into()));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| CoreError::InvalidArgument(format!("thread pool: {e}")))?;
        Ok(WorkerPool { pool, workers })
    }

    /// Default sizing: min(bands, available cores).
    pub fn default_for_bands(bands: usize) -> Result<Self> {
        let cores = std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1);
        Self::new(bands.min(cores).max(1))
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        self.pool.install(f)
    }
}

/// Piecewise-derivative masks recorded while an iterate runs, consumed by
/// the shadow (Jacobian) iteration of the same iterate. `kink_margin` is the
/// smallest distance any m, p or ṽ entry came to its kink (0 for m, ±1 for
/// p and ṽ) — a diagnostic for finite-difference validation.
#[derive(Debug, Clone)]
pub struct IterateTrace {
    /// Per band: U(m_ℓ) over the N pixels (true where m > 0).
    pub positive: Vec<Vec<bool>>,
    /// Per band: Π(p_ℓ) over the B·N coefficients (true where −1 ≤ p ≤ 1).
    pub within_sat: Vec<Vec<bool>>,
    /// Π(ṽ) over all N·L spectral coefficients, pixel-major.
    pub spectral_within_sat: Vec<bool>,
    pub kink_margin: f64,
}

/// One band's recorded masks and kink distance (masks present only when
/// requested).
pub struct BandOutcome {
    pub positive: Option<Vec<bool>>,
    pub within_sat: Option<Vec<bool>>,
    pub kink_margin: f64,
}

/// One band's primal/spatial-dual update, in the exact published order.
#[allow(clippy::too_many_arguments)]
pub fn band_update(
    x_plane: &mut [f64],
    xt_plane: &mut [f64],
    u_stack: &mut [f64],
    t_plane: &[f64],
    y_plane: &[f64],
    op: &BandOperator,
    spatial: &SpatialAnalysis,
    params: &SolverParams,
    want_masks: bool,
) -> Result<BandOutcome> {
    let n = y_plane.len();
    if x_plane.len() != n || xt_plane.len() != n || t_plane.len() != n {
        return Err(CoreError::DimensionMismatch("band planes disagree".into()));
    }

    // x ← x̃
    x_plane.copy_from_slice(xt_plane);

    // ∇ = H†(Hx − y)
    let grad = op.gradient(x_plane, y_plane)?;

    // s = μ_s W_s† u
    let s = if params.mu_s != 0.0 {
        let mut s = spatial.adjoint(u_stack)?;
        for v in &mut s {
            *v *= params.mu_s;
        }
        Some(s)
    } else {
        None
    };

    // m = x − τ(∇ + s + t); x̃ = (m)₊ with its derivative mask U(m)
    let mut positive = want_masks.then(|| vec![false; n]);
    let mut kink_margin = f64::INFINITY;
    for i in 0..n {
        let s_i = s.as_ref().map_or(0.0, |s| s[i]);
        let m = x_plane[i] - params.tau * (grad[i] + s_i + t_plane[i]);
        kink_margin = kink_margin.min(m.abs());
        let active = m > 0.0;
        if let Some(mask) = positive.as_mut() {
            mask[i] = active;
        }
        xt_plane[i] = if active { m } else { 0.0 };
    }

    // p = u + σ μ_s W_s(2x̃ − x); u = sat(p) with its mask Π(p)
    let mut within_sat = want_masks.then(|| vec![false; u_stack.len()]);
    if params.mu_s != 0.0 {
        let arg: Vec<f64> = xt_plane
            .iter()
            .zip(x_plane.iter())
            .map(|(&xt, &x)| 2.0 * xt - x)
            .collect();
        let w = spatial.analyze(&arg)?;
        let gain = params.sigma * params.mu_s;
        for (j, uj) in u_stack.iter_mut().enumerate() {
            let p = *uj + gain * w[j];
            kink_margin = kink_margin.min((p.abs() - 1.0).abs());
            let inside = (-1.0..=1.0).contains(&p);
            if let Some(mask) = within_sat.as_mut() {
                mask[j] = inside;
            }
            *uj = p.clamp(-1.0, 1.0);
        }
    } else {
        // p = u: the dual is already saturated, so sat(p) = u exactly.
        for (j, uj) in u_stack.iter().enumerate() {
            kink_margin = kink_margin.min((uj.abs() - 1.0).abs());
            if let Some(mask) = within_sat.as_mut() {
                mask[j] = (-1.0..=1.0).contains(uj);
            }
        }
    }

    Ok(BandOutcome {
        positive,
        within_sat,
        kink_margin,
    })
}

pub struct MasterOutcome {
    pub spectral_within_sat: Option<Vec<bool>>,
    pub kink_margin: f64,
}

/// Master spectral-dual update: per pixel ṽ = v + σ μ_λ W_λ(2x̃ − x),
/// v = sat(ṽ). The feedback t for the *next* iterate is recomputed at the
/// next iterate's start (see `spectral_feedback`).
pub fn master_update(
    x: &ImageCube,
    x_tilde: &ImageCube,
    v: &mut [f64],
    spectral: &SpectralAnalysis,
    params: &SolverParams,
    pool: &WorkerPool,
    want_masks: bool,
) -> Result<MasterOutcome> {
    let n = x.pixels();
    let l = x.bands();
    if v.len() != n * l {
        return Err(CoreError::DimensionMismatch("spectral dual length".into()));
    }

    if params.mu_lambda == 0.0 {
        // ṽ = v and sat(v) = v (the dual is already in [−1,1]): a no-op.
        let masks = want_masks.then(|| v.iter().map(|p| (-1.0..=1.0).contains(p)).collect());
        let margin = v
            .iter()
            .map(|p| (p.abs() - 1.0).abs())
            .fold(f64::INFINITY, f64::min);
        return Ok(MasterOutcome {
            spectral_within_sat: masks,
            kink_margin: margin,
        });
    }

    let gain = params.sigma * params.mu_lambda;
    let x_data = x.data();
    let xt_data = x_tilde.data();

    let chunks: Vec<(usize, &mut [f64])> = v
        .chunks_mut(PIXEL_CHUNK * l)
        .enumerate()
        .map(|(i, c)| (i * PIXEL_CHUNK, c))
        .collect();

    let outcomes: Vec<(Option<Vec<bool>>, f64)> = pool.install(|| {
        chunks
            .into_par_iter()
            .map(|(pixel0, v_chunk)| {
                let mut arg = vec![0.0; l];
                let mut coef = vec![0.0; l];
                let pixels_here = v_chunk.len() / l;
                let mut masks = want_masks.then(|| vec![false; v_chunk.len()]);
                let mut margin = f64::INFINITY;
                for p in 0..pixels_here {
                    let pix = pixel0 + p;
                    for k in 0..l {
                        let idx = k * n + pix;
                        arg[k] = 2.0 * xt_data[idx] - x_data[idx];
                    }
                    spectral.analyze_into(&arg, &mut coef).expect("lengths fixed");
                    let vp = &mut v_chunk[p * l..(p + 1) * l];
                    for k in 0..l {
                        let vt = vp[k] + gain * coef[k];
                        margin = margin.min((vt.abs() - 1.0).abs());
                        if let Some(m) = masks.as_mut() {
                            m[p * l + k] = (-1.0..=1.0).contains(&vt);
                        }
                        vp[k] = vt.clamp(-1.0, 1.0);
                    }
                }
                (masks, margin)
            })
            .collect()
    });

    let mut kink_margin = f64::INFINITY;
    let mut spectral_within_sat = want_masks.then(Vec::new);
    for (masks, margin) in outcomes {
        kink_margin = kink_margin.min(margin);
        if let (Some(all), Some(part)) = (spectral_within_sat.as_mut(), masks) {
            all.extend(part);
        }
    }
    Ok(MasterOutcome {
        spectral_within_sat,
        kink_margin,
    })
}

/// tⁿ = μ_λ W_λ† vⁿ, scattered into a plane-major cube.
pub fn spectral_feedback(
    v: &[f64],
    spectral: &SpectralAnalysis,
    mu_lambda: f64,
    t: &mut ImageCube,
    pool: &WorkerPool,
) -> Result<()> {
    let n = t.pixels();
    let l = t.bands();
    if v.len() != n * l {
        return Err(CoreError::DimensionMismatch("spectral dual length".into()));
    }
    if mu_lambda == 0.0 {
        t.data_mut().fill(0.0);
        return Ok(());
    }

    // Pixel-major staging buffer so chunks can be computed in parallel, then
    // one sequential scatter into the plane-major cube.
    let mut staged = vec![0.0; n * l];
    pool.install(|| {
        staged
            .par_chunks_mut(PIXEL_CHUNK * l)
            .zip(v.par_chunks(PIXEL_CHUNK * l))
            .for_each(|(out_chunk, v_chunk)| {
                let mut coef = vec![0.0; l];
                for (out_p, v_p) in out_chunk.chunks_mut(l).zip(v_chunk.chunks(l)) {
                    spectral.adjoint_into(v_p, &mut coef).expect("lengths fixed");
                    for (o, &c) in out_p.iter_mut().zip(&coef) {
                        *o = mu_lambda * c;
                    }
                }
            });
    });
    let t_data = t.data_mut();
    for pix in 0..n {
        for k in 0..l {
            t_data[k * n + pix] = staged[pix * l + k];
        }
    }
    Ok(())
}

/// One full iterate: feedback recompute, parallel band updates, master dual
/// update. Returns the derivative masks when `want_trace` is set.
pub fn muffin_iterate(
    state: &mut SolverState,
    problem: &Problem,
    params: &SolverParams,
    pool: &WorkerPool,
    want_trace: bool,
) -> Result<Option<IterateTrace>> {
    params.validate()?;
    let n = problem.pixels();
    let bands = problem.bands();
    let stack = problem.spatial.basis_count() * n;

    spectral_feedback(&state.v, &problem.spectral, params.mu_lambda, &mut state.t, pool)?;

    let SolverState {
        x, x_tilde, u, t, ..
    } = state;
    let t_ref: &ImageCube = t;
    let dirty = &problem.dirty;
    let spatial = &problem.spatial;

    let band_outcomes: Result<Vec<BandOutcome>> = pool.install(|| {
        x.data_mut()
            .par_chunks_exact_mut(n)
            .zip(x_tilde.data_mut().par_chunks_exact_mut(n))
            .zip(u.data_mut().par_chunks_exact_mut(stack))
            .enumerate()
            .map(|(l, ((x_plane, xt_plane), u_stack))| {
                band_update(
                    x_plane,
                    xt_plane,
                    u_stack,
                    t_ref.plane(l),
                    dirty.plane(l),
                    problem.psfs.band(l),
                    spatial,
                    params,
                    want_trace,
                )
            })
            .collect()
    });
    let band_outcomes = band_outcomes?;

    let master = master_update(
        &state.x,
        &state.x_tilde,
        &mut state.v,
        &problem.spectral,
        params,
        pool,
        want_trace,
    )?;

    state.iteration += 1;
    debug_assert_eq!(band_outcomes.len(), bands);

    if !want_trace {
        return Ok(None);
    }
    let mut kink_margin = master.kink_margin;
    let mut positive = Vec::with_capacity(bands);
    let mut within_sat = Vec::with_capacity(bands);
    for outcome in band_outcomes {
        kink_margin = kink_margin.min(outcome.kink_margin);
        positive.push(outcome.positive.unwrap());
        within_sat.push(outcome.within_sat.unwrap());
    }
    Ok(Some(IterateTrace {
        positive,
        within_sat,
        spectral_within_sat: master.spectral_within_sat.unwrap(),
        kink_margin,
    }))
}

/// Objective value at the current feasible iterate x̃; +∞ if x̃ is
/// infeasible (negative entries).
pub fn cost(state: &SolverState, problem: &Problem, params: &SolverParams) -> Result<f64> {
    let xt = &state.x_tilde;
    if xt.data().iter().any(|&v| v < 0.0) {
        return Ok(f64::INFINITY);
    }
    let n = problem.pixels();
    let l = problem.bands();

    // Per-band terms, ascending-ℓ reduction.
    let mut band_terms = Vec::with_capacity(l);
    for band in 0..l {
        let hx = problem.psfs.band(band).apply(xt.plane(band))?;
        let mut fidelity = 0.0;
        for (hxv, yv) in hx.iter().zip(problem.dirty.plane(band)) {
            let r = yv - hxv;
            fidelity += r * r;
        }
        let mut l1 = 0.0;
        if params.mu_s != 0.0 {
            let w = problem.spatial.analyze(xt.plane(band))?;
            l1 = w.iter().map(|v| v.abs()).sum();
        }
        band_terms.push(0.5 * fidelity + params.mu_s * l1);
    }
    let mut total: f64 = band_terms.iter().sum();

    if params.mu_lambda != 0.0 {
        let mut spectrum = vec![0.0; l];
        let mut coeffs = vec![0.0; l];
        let mut spectral_l1 = 0.0;
        for pix in 0..n {
            xt.spectrum_into(pix, &mut spectrum);
            problem.spectral.analyze_into(&spectrum, &mut coeffs)?;
            spectral_l1 += coeffs.iter().map(|v| v.abs()).sum::<f64>();
        }
        total += params.mu_lambda * spectral_l1;
    }
    Ok(total)
}
