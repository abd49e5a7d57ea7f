//! Single-matrix β-NMF, `min D_β(M ‖ W·H)`, with the classical multiplicative
//! updates. Used for the one-observation baselines and the rank-1 oracle factors.

use crate::betadiv::{divergence_sum, BetaParam};
use crate::error::{Error, Result};
use crate::matrix::NonnegMatrix;
use crate::rng::{self, streams};

use super::updates::{fit_terms, multiplicative_step};
use super::{normalize, rounding_slack, SolverConfig, MONOTONE_TOLERANCE};

#[derive(Debug, Clone)]
pub struct BaselineResult {
    pub w: NonnegMatrix,
    pub h: NonnegMatrix,
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
}

/// `H ⊙ (Wᵀ(V̂^(β-2) ⊙ M) / Wᵀ V̂^(β-1))^γ` with `V̂ = W·H`.
pub fn baseline_update_h(
    m: &NonnegMatrix,
    w: &NonnegMatrix,
    h: &NonnegMatrix,
    beta: BetaParam,
    floor: f64,
) -> Result<NonnegMatrix> {
    let (a, b) = fit_terms(&w.matmul(h)?, m, beta.beta(), floor);
    Ok(multiplicative_step(
        h,
        &w.matmul_tn(&a)?,
        &w.matmul_tn(&b)?,
        beta.gamma(),
        floor,
    ))
}

/// `W ⊙ ((V̂^(β-2) ⊙ M)Hᵀ / V̂^(β-1)Hᵀ)^γ` with `V̂ = W·H`.
pub fn baseline_update_w(
    m: &NonnegMatrix,
    w: &NonnegMatrix,
    h: &NonnegMatrix,
    beta: BetaParam,
    floor: f64,
) -> Result<NonnegMatrix> {
    let (a, b) = fit_terms(&w.matmul(h)?, m, beta.beta(), floor);
    Ok(multiplicative_step(
        w,
        &a.matmul_nt(h)?,
        &b.matmul_nt(h)?,
        beta.gamma(),
        floor,
    ))
}

/// Factorizes `m` at the given rank. Initialization, normalization and stopping
/// follow [`super::solve`]'s first loop with `cfg.max_iter_l1` sweeps, so the
/// two agree when the coupled problem degenerates to a single observation.
pub fn baseline_beta_nmf(
    m: &NonnegMatrix,
    rank: usize,
    beta: BetaParam,
    cfg: &SolverConfig,
) -> Result<BaselineResult> {
    cfg.validate()?;
    let (f, n) = m.shape();
    if rank == 0 || rank > f.min(n) {
        return Err(Error::Parameter(format!(
            "rank must be in 1..={}, got {rank}",
            f.min(n)
        )));
    }
    let data = if beta.floors_data() {
        m.floor(cfg.floor)
    } else {
        m.clone()
    };
    let objective = |w: &NonnegMatrix, h: &NonnegMatrix| -> Result<f64> {
        Ok(divergence_sum(data.as_slice(), w.matmul(h)?.as_slice(), beta.beta()))
    };

    let mut init = rng::stream(cfg.seed, streams::INIT);
    let mut w = rng::uniform_matrix(f, rank, &mut init);
    let mut h = rng::uniform_matrix(rank, n, &mut init);
    let mut reseed_rng = rng::stream(cfg.seed, streams::RESEED);

    let slack = rounding_slack(&data);
    let mut prev = objective(&w, &h)?;
    let mut trace = vec![prev];
    let mut iterations = 0;
    for sweep in 1..=cfg.max_iter_l1 {
        h = baseline_update_h(&data, &w, &h, beta, cfg.floor)?;
        w = baseline_update_w(&data, &w, &h, beta, cfg.floor)?;
        if !(w.is_finite() && h.is_finite()) {
            return Err(Error::NonFinite {
                factor: "W/H",
                iteration: sweep,
            });
        }
        let mut current = objective(&w, &h)?;
        if current > prev + MONOTONE_TOLERANCE * prev + slack {
            return Err(Error::Consistency {
                iteration: sweep,
                previous: prev,
                current,
            });
        }
        let normalized = normalize(&w, &h, cfg.floor, &mut reseed_rng)?;
        w = normalized.w;
        h = normalized.h;
        if !normalized.reseeded.is_empty() {
            current = objective(&w, &h)?;
        }
        trace.push(current);
        iterations = sweep;
        let converged = (prev - current).abs() <= cfg.kappa * prev;
        prev = current;
        if converged {
            break;
        }
    }
    Ok(BaselineResult {
        w,
        h,
        objective_trace: trace,
        iterations,
    })
}
