//! Multiplicative updates for the coupled objective
//! `D_β(X ‖ R·W·H) + λ·D_β(Y ‖ W·H·S)`.
//!
//! Each update multiplies the current factor entrywise by
//! `(negative gradient part / positive gradient part)^γ(β)`. Entries that are zero
//! stay zero, which is what keeps the operator sparsity patterns fixed.

use crate::error::{Error, Result};
use crate::matrix::{NonnegMatrix, EPS};
use crate::operators::SparseOperator;

use super::{CoupledProblem, FactorEstimate};

/// The two nonnegative halves of a gradient: `∇ = positive - negative`.
#[derive(Debug, Clone)]
pub struct GradientParts {
    pub positive: NonnegMatrix,
    pub negative: NonnegMatrix,
}

impl GradientParts {
    /// `positive - negative`, row-major.
    pub fn gradient(&self) -> Vec<f64> {
        self.positive
            .as_slice()
            .iter()
            .zip(self.negative.as_slice())
            .map(|(p, n)| p - n)
            .collect()
    }
}

/// `(model^(β-2) ⊙ data, model^(β-1))`, with `model` floored at `eps`.
pub(crate) fn fit_terms(
    model: &NonnegMatrix,
    data: &NonnegMatrix,
    beta: f64,
    eps: f64,
) -> (NonnegMatrix, NonnegMatrix) {
    debug_assert_eq!(model.shape(), data.shape());
    let n = model.as_slice().len();
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    for (m, x) in model.as_slice().iter().zip(data.as_slice()) {
        let m = m.max(eps);
        let (ta, tb) = if beta == 1.0 {
            (x / m, 1.0)
        } else if beta == 2.0 {
            (*x, m)
        } else if beta == 0.0 {
            let inv = 1.0 / m;
            (x * inv * inv, inv)
        } else {
            let p = m.powf(beta - 2.0);
            (x * p, p * m)
        };
        a.push(ta);
        b.push(tb);
    }
    let (rows, cols) = model.shape();
    (
        NonnegMatrix::from_raw(rows, cols, a),
        NonnegMatrix::from_raw(rows, cols, b),
    )
}

/// `old ⊙ (num / max(den, eps))^γ`.
pub(crate) fn multiplicative_step(
    old: &NonnegMatrix,
    num: &NonnegMatrix,
    den: &NonnegMatrix,
    gamma: f64,
    eps: f64,
) -> NonnegMatrix {
    let data = old
        .as_slice()
        .iter()
        .zip(num.as_slice())
        .zip(den.as_slice())
        .map(|((o, n), d)| o * step_factor(*n, *d, gamma, eps))
        .collect();
    NonnegMatrix::from_raw(old.rows(), old.cols(), data)
}

#[inline]
fn step_factor(num: f64, den: f64, gamma: f64, eps: f64) -> f64 {
    let r = num / den.max(eps);
    if gamma == 1.0 {
        r
    } else if gamma == 0.5 {
        r.sqrt()
    } else {
        r.powf(gamma)
    }
}

/// Gradient halves of the objective with respect to the high-resolution product
/// `V = W·H`, shape `F x N`. Both factor updates and the H-gradient derive from
/// these.
fn product_gradient(
    p: &CoupledProblem,
    w: &NonnegMatrix,
    h: &NonnegMatrix,
    r: &SparseOperator,
    s: &SparseOperator,
    eps: f64,
) -> Result<(NonnegMatrix, NonnegMatrix)> {
    let beta = p.beta().beta();
    let v = w.matmul(h)?;
    let x_model = r.apply(&v)?;
    let (xa, xb) = fit_terms(&x_model, p.x(), beta, eps);
    let mut num = r.apply_transposed(&xa)?;
    let mut den = r.apply_transposed(&xb)?;
    if p.lambda() > 0.0 {
        let y_model = s.right_apply(&v)?;
        let (ya, yb) = fit_terms(&y_model, p.y(), beta, eps);
        num.add_scaled_assign(p.lambda(), &s.right_apply_transposed(&ya)?);
        den.add_scaled_assign(p.lambda(), &s.right_apply_transposed(&yb)?);
    }
    Ok((num, den))
}

pub(crate) fn gradient_h_with_floor(
    p: &CoupledProblem,
    e: &FactorEstimate,
    eps: f64,
) -> Result<GradientParts> {
    let (num, den) = product_gradient(p, &e.w, &e.h, &e.r, &e.s, eps)?;
    Ok(GradientParts {
        positive: e.w.matmul_tn(&den)?,
        negative: e.w.matmul_tn(&num)?,
    })
}

/// Gradient of the objective with respect to `H`, split into its halves.
pub fn gradient_h(p: &CoupledProblem, e: &FactorEstimate) -> Result<GradientParts> {
    gradient_h_with_floor(p, e, EPS)
}

pub(crate) fn update_h_with_floor(
    p: &CoupledProblem,
    e: &FactorEstimate,
    eps: f64,
) -> Result<NonnegMatrix> {
    let g = gradient_h_with_floor(p, e, eps)?;
    Ok(multiplicative_step(
        &e.h,
        &g.negative,
        &g.positive,
        p.beta().gamma(),
        eps,
    ))
}

pub(crate) fn update_w_with_floor(
    p: &CoupledProblem,
    e: &FactorEstimate,
    eps: f64,
) -> Result<NonnegMatrix> {
    let (num, den) = product_gradient(p, &e.w, &e.h, &e.r, &e.s, eps)?;
    Ok(multiplicative_step(
        &e.w,
        &num.matmul_nt(&e.h)?,
        &den.matmul_nt(&e.h)?,
        p.beta().gamma(),
        eps,
    ))
}

pub(crate) fn update_s_with_floor(
    p: &CoupledProblem,
    e: &FactorEstimate,
    eps: f64,
) -> Result<SparseOperator> {
    let beta = p.beta().beta();
    let gamma = p.beta().gamma();
    let v = e.w.matmul(&e.h)?;
    let y_model = e.s.right_apply(&v)?;
    let (ya, yb) = fit_terms(&y_model, p.y(), beta, eps);
    // K x N_low
    let wa = e.w.matmul_tn(&ya)?;
    let wb = e.w.matmul_tn(&yb)?;
    let k = e.h.rows();
    let mut s = e.s.clone();
    s.update_weights(|i, j, old| {
        let (mut num, mut den) = (0.0, 0.0);
        for c in 0..k {
            let hv = e.h.get(c, i);
            num += hv * wa.get(c, j);
            den += hv * wb.get(c, j);
        }
        old * step_factor(num, den, gamma, eps)
    });
    Ok(s)
}

pub(crate) fn update_r_with_floor(
    p: &CoupledProblem,
    e: &FactorEstimate,
    eps: f64,
) -> Result<SparseOperator> {
    let beta = p.beta().beta();
    let gamma = p.beta().gamma();
    let v = e.w.matmul(&e.h)?;
    let x_model = e.r.apply(&v)?;
    let (xa, xb) = fit_terms(&x_model, p.x(), beta, eps);
    // F_low x K
    let ah = xa.matmul_nt(&e.h)?;
    let bh = xb.matmul_nt(&e.h)?;
    let k = e.w.cols();
    let mut r = e.r.clone();
    r.update_weights(|i, j, old| {
        let (a_row, b_row, w_row) = (ah.row(i), bh.row(i), e.w.row(j));
        let mut num = 0.0;
        let mut den = 0.0;
        for c in 0..k {
            num += a_row[c] * w_row[c];
            den += b_row[c] * w_row[c];
        }
        old * step_factor(num, den, gamma, eps)
    });
    Ok(r)
}

/// One multiplicative update of `H` with `W`, `R`, `S` fixed.
pub fn update_h(p: &CoupledProblem, e: &FactorEstimate) -> Result<NonnegMatrix> {
    checked(update_h_with_floor(p, e, EPS)?, "H")
}

/// One multiplicative update of `W` with `H`, `R`, `S` fixed.
pub fn update_w(p: &CoupledProblem, e: &FactorEstimate) -> Result<NonnegMatrix> {
    checked(update_w_with_floor(p, e, EPS)?, "W")
}

/// One multiplicative update of the weights of `S` on its support. Only the
/// second term of the objective depends on `S`.
pub fn update_s(p: &CoupledProblem, e: &FactorEstimate) -> Result<SparseOperator> {
    let s = update_s_with_floor(p, e, EPS)?;
    check_weights(&s, "S", 0)?;
    Ok(s)
}

/// One multiplicative update of the weights of `R` on its support. Only the first
/// term of the objective depends on `R`.
pub fn update_r(p: &CoupledProblem, e: &FactorEstimate) -> Result<SparseOperator> {
    let r = update_r_with_floor(p, e, EPS)?;
    check_weights(&r, "R", 0)?;
    Ok(r)
}

fn checked(m: NonnegMatrix, factor: &'static str) -> Result<NonnegMatrix> {
    if !m.is_finite() {
        return Err(Error::NonFinite {
            factor,
            iteration: 0,
        });
    }
    Ok(m)
}

pub(crate) fn check_weights(op: &SparseOperator, factor: &'static str, iteration: usize) -> Result<()> {
    if op.values().iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { factor, iteration })
    }
}
