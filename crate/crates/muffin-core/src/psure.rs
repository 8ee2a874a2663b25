//! Predicted-SURE: an unbiased estimate of the *predicted* weighted MSE
//! E‖H(x̂ − x⋆)‖² that needs no ground truth, so the reconstruction can
//! score itself on real data.
//!
//! Per band, with noise variance σ_ℓ² and N pixels:
//!
//!   PSURE_ℓ = ‖y_ℓ − H x̃_ℓ‖² + 2σ_ℓ²·⟨e_ℓ, H J_e(x̃_ℓ)⟩ − N σ_ℓ²
//!
//! where e is a Rademacher probe (entries ±1) and J_e(x̃) is the directional
//! derivative of the reconstruction with respect to the data along e —
//! a Hutchinson one-probe estimate of the degrees-of-freedom trace
//! tr(H ∂x̃/∂y). One probe is drawn per run and reused at every iterate so
//! risk trajectories are smooth in the iteration index.
//!
//! J_e is tracked by a *shadow recursion*: differentiate every solver update
//! with respect to y along e. Linear steps differentiate to themselves; the
//! two nonlinearities become diagonal masks recorded by the solver on the
//! same iterate:
//!
//!   J(∇_ℓ) = H†(H J(x_ℓ) − e_ℓ)          (∂y gradient picks up −H†e)
//!   J(s_ℓ) = μ_s W_s† J(u_ℓ)
//!   J(m_ℓ) = J(x_ℓ) − τ(J(∇_ℓ) + J(s_ℓ) + J(t_ℓ))
//!   J(x̃_ℓ) = U(m_ℓ) ∘ J(m_ℓ)             U = 1 where m > 0, else 0
//!   J(p_ℓ) = J(u_ℓ) + σ μ_s W_s(2J(x̃_ℓ) − J(x_ℓ))
//!   J(u_ℓ) = Π(p_ℓ) ∘ J(p_ℓ)              Π = 1 where −1 ≤ p ≤ 1, else 0
//!   J(ṽⁿ) = J(vⁿ) + σ μ_λ W_λ(2J(x̃ⁿ) − J(xⁿ))
//!   J(vⁿ) = Π(ṽⁿ) ∘ J(ṽⁿ)
//!   J(tⁿ) = μ_λ W_λ† J(vⁿ)                (at the start of the next iterate)
//!
//! The masks use the solver's own m, p and ṽ, so solver and shadow stay in
//! exact lockstep; U(0) = 0 and Π(±1) = 1 by convention.

use rayon::prelude::*;

use crate::cube::{CoefficientCube, ImageCube, NoiseModel};
use crate::error::{CoreError, Result};
use crate::operators::BandOperator;
use crate::solver::{spectral_feedback, IterateTrace, Problem, SolverParams, SolverState, WorkerPool};
use crate::transforms::SpatialAnalysis;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PIXEL_CHUNK: usize = 2048;

/// A fixed ±1 probe cube, one entry per data sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeVector {
    cube: ImageCube,
}

impl ProbeVector {
    /// Rademacher probe matching the dirty cube's shape, drawn from a seeded
    /// generator so runs are replayable.
    pub fn rademacher(like: &ImageCube, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cube = ImageCube::zeros_like(like);
        for v in cube.data_mut() {
            *v = if rng.random::<bool>() { 1.0 } else { -1.0 };
        }
        ProbeVector { cube }
    }

    pub fn plane(&self, band: usize) -> &[f64] {
        self.cube.plane(band)
    }

    pub fn cube(&self) -> &ImageCube {
        &self.cube
    }
}

/// The derivative variables, mirroring `SolverState` shape for shape:
/// J(x), J(x̃), J(u), J(v) (pixel-major), J(t). Unlike the solver state the
/// shadow variables are unconstrained — masks, not projections, act here.
#[derive(Debug, Clone, PartialEq)]
pub struct ShadowState {
    pub x: ImageCube,
    pub x_tilde: ImageCube,
    pub u: CoefficientCube,
    pub v: Vec<f64>,
    pub t: ImageCube,
    pub iteration: u64,
}

impl ShadowState {
    /// Cold start: the derivative of a zero initialization is zero.
    pub fn cold_start(problem: &Problem) -> Self {
        let dirty = &problem.dirty;
        let zero = ImageCube::zeros_like(dirty);
        ShadowState {
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
}

/// One band's shadow update; must run against the masks the solver recorded
/// for the same band on the same iterate.
#[allow(clippy::too_many_arguments)]
pub fn shadow_band_update(
    jx_plane: &mut [f64],
    jxt_plane: &mut [f64],
    ju_stack: &mut [f64],
    jt_plane: &[f64],
    probe_plane: &[f64],
    positive: &[bool],
    within_sat: &[bool],
    op: &BandOperator,
    spatial: &SpatialAnalysis,
    params: &SolverParams,
) -> Result<()> {
    let n = probe_plane.len();
    if jx_plane.len() != n || jxt_plane.len() != n || jt_plane.len() != n {
        return Err(CoreError::DimensionMismatch("shadow planes disagree".into()));
    }
    if positive.len() != n || within_sat.len() != ju_stack.len() {
        return Err(CoreError::DimensionMismatch("mask lengths disagree".into()));
    }

    // J(x) ← J(x̃)
    jx_plane.copy_from_slice(jxt_plane);

    // J(∇) = H†(H J(x) − e): the data enters the gradient as −H†y, so its
    // derivative along the probe is −H†e — the same affine map `gradient`
    // computes with e in the data slot.
    let jgrad = op.gradient(jx_plane, probe_plane)?;

    // J(s) = μ_s W_s† J(u)
    let js = if params.mu_s != 0.0 {
        let mut js = spatial.adjoint(ju_stack)?;
        for v in &mut js {
            *v *= params.mu_s;
        }
        Some(js)
    } else {
        None
    };

    // J(m) = J(x) − τ(J(∇) + J(s) + J(t)); J(x̃) = U(m) ∘ J(m)
    for i in 0..n {
        let js_i = js.as_ref().map_or(0.0, |js| js[i]);
        let jm = jx_plane[i] - params.tau * (jgrad[i] + js_i + jt_plane[i]);
        jxt_plane[i] = if positive[i] { jm } else { 0.0 };
    }

    // J(p) = J(u) + σ μ_s W_s(2J(x̃) − J(x)); J(u) = Π(p) ∘ J(p)
    if params.mu_s != 0.0 {
        let jarg: Vec<f64> = jxt_plane
            .iter()
            .zip(jx_plane.iter())
            .map(|(&jxt, &jx)| 2.0 * jxt - jx)
            .collect();
        let jw = spatial.analyze(&jarg)?;
        let gain = params.sigma * params.mu_s;
        for (j, ju) in ju_stack.iter_mut().enumerate() {
            let jp = *ju + gain * jw[j];
            *ju = if within_sat[j] { jp } else { 0.0 };
        }
    } else {
        // J(p) = J(u); the mask still gates it.
        for (j, ju) in ju_stack.iter_mut().enumerate() {
            if !within_sat[j] {
                *ju = 0.0;
            }
        }
    }
    Ok(())
}

/// Shadow of the master dual update, gated by the solver's Π(ṽ) masks.
pub fn shadow_master_update(
    jx: &ImageCube,
    jx_tilde: &ImageCube,
    jv: &mut [f64],
    spectral_within_sat: &[bool],
    problem: &Problem,
    params: &SolverParams,
    pool: &WorkerPool,
) -> Result<()> {
    let n = jx.pixels();
    let l = jx.bands();
    if jv.len() != n * l || spectral_within_sat.len() != n * l {
        return Err(CoreError::DimensionMismatch("shadow spectral dual length".into()));
    }

    if params.mu_lambda == 0.0 {
        // J(ṽ) = J(v); only the mask acts.
        for (jvk, &inside) in jv.iter_mut().zip(spectral_within_sat) {
            if !inside {
                *jvk = 0.0;
            }
        }
        return Ok(());
    }

    let gain = params.sigma * params.mu_lambda;
    let jx_data = jx.data();
    let jxt_data = jx_tilde.data();
    let spectral = &problem.spectral;

    let chunks: Vec<(usize, &mut [f64], &[bool])> = jv
        .chunks_mut(PIXEL_CHUNK * l)
        .zip(spectral_within_sat.chunks(PIXEL_CHUNK * l))
        .enumerate()
        .map(|(i, (c, m))| (i * PIXEL_CHUNK, c, m))
        .collect();

    pool.install(|| {
        chunks.into_par_iter().for_each(|(pixel0, jv_chunk, mask_chunk)| {
            let mut arg = vec![0.0; l];
            let mut coef = vec![0.0; l];
            let pixels_here = jv_chunk.len() / l;
            for p in 0..pixels_here {
                let pix = pixel0 + p;
                for k in 0..l {
                    let idx = k * n + pix;
                    arg[k] = 2.0 * jxt_data[idx] - jx_data[idx];
                }
                spectral.analyze_into(&arg, &mut coef).expect("lengths fixed");
                for k in 0..l {
                    let j = p * l + k;
                    let jvt = jv_chunk[j] + gain * coef[k];
                    jv_chunk[j] = if mask_chunk[j] { jvt } else { 0.0 };
                }
            }
        });
    });
    Ok(())
}

/// One full shadow iterate, consuming the masks the solver recorded on the
/// matching iterate.
pub fn shadow_iterate(
    shadow: &mut ShadowState,
    probe: &ProbeVector,
    trace: &IterateTrace,
    problem: &Problem,
    params: &SolverParams,
    pool: &WorkerPool,
) -> Result<()> {
    let n = problem.pixels();
    let bands = problem.bands();
    let stack = problem.spatial.basis_count() * n;
    if trace.positive.len() != bands || trace.within_sat.len() != bands {
        return Err(CoreError::DimensionMismatch("trace band count".into()));
    }

    // J(t) = μ_λ W_λ† J(v): same linear feedback as the solver.
    spectral_feedback(&shadow.v, &problem.spectral, params.mu_lambda, &mut shadow.t, pool)?;

    let ShadowState {
        x, x_tilde, u, t, ..
    } = shadow;
    let t_ref: &ImageCube = t;
    let spatial = &problem.spatial;

    let results: Result<Vec<()>> = pool.install(|| {
        x.data_mut()
            .par_chunks_exact_mut(n)
            .zip(x_tilde.data_mut().par_chunks_exact_mut(n))
            .zip(u.data_mut().par_chunks_exact_mut(stack))
            .enumerate()
            .map(|(l, ((jx_plane, jxt_plane), ju_stack))| {
                shadow_band_update(
                    jx_plane,
                    jxt_plane,
                    ju_stack,
                    t_ref.plane(l),
                    probe.plane(l),
                    &trace.positive[l],
                    &trace.within_sat[l],
                    problem.psfs.band(l),
                    spatial,
                    params,
                )
            })
            .collect()
    });
    results?;

    shadow_master_update(
        &shadow.x,
        &shadow.x_tilde,
        &mut shadow.v,
        &trace.spectral_within_sat,
        problem,
        params,
        pool,
    )?;
    shadow.iteration += 1;
    Ok(())
}

/// Per-band and aggregate risk figures at one iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskReport {
    /// PSURE_ℓ per band, ascending ℓ.
    pub per_band: Vec<f64>,
    /// Σ_ℓ PSURE_ℓ, folded in ascending band order.
    pub total: f64,
    /// total / (L·N): directly comparable to the per-sample weighted MSE.
    pub estimated_wmse: f64,
    /// Solver iterate the estimate belongs to.
    pub iteration: u64,
}

/// Evaluate the risk estimate at the current iterate. The caller guarantees
/// solver and shadow are in lockstep (same number of iterates, shadow driven
/// by the solver's own masks).
pub fn psure_evaluate(
    state: &SolverState,
    shadow: &ShadowState,
    probe: &ProbeVector,
    problem: &Problem,
    noise: &NoiseModel,
    pool: &WorkerPool,
) -> Result<RiskReport> {
    let bands = problem.bands();
    let n = problem.pixels() as f64;
    if noise.bands() != bands {
        return Err(CoreError::DimensionMismatch("noise model band count".into()));
    }

    let per_band: Result<Vec<f64>> = pool.install(|| {
        (0..bands)
            .into_par_iter()
            .map(|band| {
                let op = problem.psfs.band(band);
                let hx = op.apply(state.x_tilde.plane(band))?;
                let mut residual_sq = 0.0;
                for (hxv, yv) in hx.iter().zip(problem.dirty.plane(band)) {
                    let r = yv - hxv;
                    residual_sq += r * r;
                }
                let hj = op.apply(shadow.x_tilde.plane(band))?;
                let mut dof = 0.0;
                for (e, hjv) in probe.plane(band).iter().zip(&hj) {
                    dof += e * hjv;
                }
                let var = noise.variance(band);
                Ok(residual_sq + 2.0 * var * dof - n * var)
            })
            .collect()
    });
    let per_band = per_band?;
    let total: f64 = per_band.iter().sum();
    Ok(RiskReport {
        estimated_wmse: total / (bands as f64 * n),
        per_band,
        total,
        iteration: state.iteration,
    })
}

/// Monte-Carlo trace estimate: (1/K) Σ_k eₖᵀ A eₖ over Rademacher probes.
/// For diagonal A a single probe is already exact since e_i² = 1.
pub fn hutchinson_trace(
    dim: usize,
    probes: usize,
    seed: u64,
    mut apply: impl FnMut(&[f64]) -> Vec<f64>,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = 0.0;
    let mut e = vec![0.0; dim];
    for _ in 0..probes {
        for v in &mut e {
            *v = if rng.random::<bool>() { 1.0 } else { -1.0 };
        }
        let ae = apply(&e);
        let mut dot = 0.0;
        for (ev, av) in e.iter().zip(&ae) {
            dot += ev * av;
        }
        acc += dot;
    }
    acc / probes as f64
}
