//! Coupled β-NMF solver.
//!
//! Given a low first-dimension-resolution observation `X ≈ R·W·H` and a low
//! second-dimension-resolution observation `Y ≈ W·H·S`, [`solve`] estimates the
//! shared factors `W` (`F x K`) and `H` (`K x N`), and optionally refines the
//! weights of `R` and `S`, by minimizing
//!
//! ```text
//! L = D_β(X ‖ R·W·H) + λ·D_β(Y ‖ W·H·S)
//! ```
//!
//! with multiplicative updates. Every individual update is non-increasing in `L`.

mod baseline;
pub mod checkpoint;
mod updates;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::betadiv::{divergence_sum, BetaParam};
use crate::error::{Error, Result};
use crate::matrix::{NonnegMatrix, EPS};
use crate::operators::SparseOperator;
use crate::rng::{self, streams};

pub use baseline::{baseline_beta_nmf, baseline_update_h, baseline_update_w, BaselineResult};
pub use updates::{gradient_h, update_h, update_r, update_s, update_w, GradientParts};

/// Relative slack allowed on a single step before descent is declared violated.
pub const MONOTONE_TOLERANCE: f64 = 1e-9;

/// One problem instance. Shapes: `X` is `F_low x N`, `Y` is `F x N_low`, `R` is
/// `F_low x F`, `S` is `N x N_low`.
#[derive(Debug, Clone)]
pub struct CoupledProblem {
    x: NonnegMatrix,
    y: NonnegMatrix,
    r: SparseOperator,
    s: SparseOperator,
    lambda: f64,
    beta: BetaParam,
    rank: usize,
}

impl CoupledProblem {
    /// Validates the shape chain. With `β = 0` the observations are floored at
    /// [`EPS`] so the Itakura-Saito fit stays finite on zero data.
    pub fn new(
        x: NonnegMatrix,
        y: NonnegMatrix,
        r: SparseOperator,
        s: SparseOperator,
        lambda: f64,
        beta: BetaParam,
        rank: usize,
    ) -> Result<Self> {
        if r.rows() != x.rows() || r.cols() != y.rows() {
            return Err(Error::shape("R against X/Y rows", r.shape(), (x.rows(), y.rows())));
        }
        if s.rows() != x.cols() || s.cols() != y.cols() {
            return Err(Error::shape("S against X/Y cols", s.shape(), (x.cols(), y.cols())));
        }
        let (f, n) = (y.rows(), x.cols());
        if rank == 0 || rank > f.min(n) {
            return Err(Error::Parameter(format!(
                "rank must be in 1..={}, got {rank}",
                f.min(n)
            )));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::Parameter(format!("lambda must be >= 0, got {lambda}")));
        }
        let (x, y) = if beta.floors_data() {
            (x.floor(EPS), y.floor(EPS))
        } else {
            (x, y)
        };
        Ok(Self {
            x,
            y,
            r,
            s,
            lambda,
            beta,
            rank,
        })
    }

    pub fn x(&self) -> &NonnegMatrix {
        &self.x
    }

    pub fn y(&self) -> &NonnegMatrix {
        &self.y
    }

    pub fn r(&self) -> &SparseOperator {
        &self.r
    }

    pub fn s(&self) -> &SparseOperator {
        &self.s
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn beta(&self) -> BetaParam {
        self.beta
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// `(F, N)`: shape of the high-resolution product `W·H`.
    pub fn high_shape(&self) -> (usize, usize) {
        (self.y.rows(), self.x.cols())
    }

    /// Same instance with a different β.
    pub fn with_beta(&self, beta: BetaParam) -> Result<Self> {
        Self::new(
            self.x.clone(),
            self.y.clone(),
            self.r.clone(),
            self.s.clone(),
            self.lambda,
            beta,
            self.rank,
        )
    }

    /// Absolute slack for the descent check, far below any meaningful change in L.
    fn rounding_slack(&self) -> f64 {
        rounding_slack(&self.x) + self.lambda * rounding_slack(&self.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Sweeps updating `H, W` with the operators fixed.
    pub max_iter_l1: usize,
    /// Sweeps updating `H, W, S, R`.
    pub max_iter_l2: usize,
    /// Stop when `|L_i - L_{i+1}| <= kappa * L_i`.
    pub kappa: f64,
    pub seed: u64,
    /// Denominator and model floor.
    pub floor: f64,
    /// After each sweep that touches the operators, rescale `R` and `S` by a common
    /// factor (absorbed into `H`) so the mean row sum of `R` is one. This leaves
    /// `R·W·H` and `W·H·S` unchanged.
    pub renormalize_operators: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iter_l1: 500,
            max_iter_l2: 0,
            kappa: 1e-6,
            seed: 0,
            floor: EPS,
            renormalize_operators: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return Err(Error::Parameter(format!(
                "kappa must lie in (0, 1), got {}",
                self.kappa
            )));
        }
        if !(self.floor > 0.0 && self.floor.is_finite()) {
            return Err(Error::Parameter(format!("floor must be positive, got {}", self.floor)));
        }
        Ok(())
    }
}

/// Current iterate of the solver.
#[derive(Debug, Clone)]
pub struct FactorEstimate {
    pub w: NonnegMatrix,
    pub h: NonnegMatrix,
    pub r: SparseOperator,
    pub s: SparseOperator,
    /// Objective at the initial point followed by one value per sweep.
    pub objective_trace: Vec<f64>,
    pub iterations_l1: usize,
    pub iterations_l2: usize,
    pub warnings: Vec<String>,
}

impl FactorEstimate {
    /// Random start: `W` then `H` drawn i.i.d. uniform on `(0, 1]` from the
    /// initialization stream of `seed`. The operators are copied from the problem.
    pub fn random(p: &CoupledProblem, seed: u64) -> Self {
        let (f, n) = p.high_shape();
        let mut rng = rng::stream(seed, streams::INIT);
        let w = rng::uniform_matrix(f, p.rank(), &mut rng);
        let h = rng::uniform_matrix(p.rank(), n, &mut rng);
        Self::from_factors(p, w, h)
    }

    pub fn from_factors(p: &CoupledProblem, w: NonnegMatrix, h: NonnegMatrix) -> Self {
        Self {
            w,
            h,
            r: p.r().clone(),
            s: p.s().clone(),
            objective_trace: Vec::new(),
            iterations_l1: 0,
            iterations_l2: 0,
            warnings: Vec::new(),
        }
    }

    fn check_shapes(&self, p: &CoupledProblem) -> Result<()> {
        let (f, n) = p.high_shape();
        let k = p.rank();
        if self.w.shape() != (f, k) {
            return Err(Error::shape("W against problem", self.w.shape(), (f, k)));
        }
        if self.h.shape() != (k, n) {
            return Err(Error::shape("H against problem", self.h.shape(), (k, n)));
        }
        if self.r.shape() != p.r().shape() {
            return Err(Error::shape("R against problem", self.r.shape(), p.r().shape()));
        }
        if self.s.shape() != p.s().shape() {
            return Err(Error::shape("S against problem", self.s.shape(), p.s().shape()));
        }
        Ok(())
    }
}

/// `D_β(X ‖ R·W·H) + λ·D_β(Y ‖ W·H·S)` at the estimate's factors and operators.
pub fn objective(p: &CoupledProblem, e: &FactorEstimate) -> Result<f64> {
    e.check_shapes(p)?;
    let v = e.w.matmul(&e.h)?;
    let beta = p.beta().beta();
    let mut total = divergence_sum(p.x().as_slice(), e.r.apply(&v)?.as_slice(), beta);
    if p.lambda() > 0.0 {
        total += p.lambda() * divergence_sum(p.y().as_slice(), e.s.right_apply(&v)?.as_slice(), beta);
    }
    Ok(total)
}

/// `V̂ = W·H`.
pub fn reconstruct(e: &FactorEstimate) -> NonnegMatrix {
    e.w.matmul(&e.h).expect("estimate factors have matching inner dimension")
}

/// Result of [`normalize`].
#[derive(Debug, Clone)]
pub struct Normalized {
    pub w: NonnegMatrix,
    pub h: NonnegMatrix,
    /// Columns of `W` whose L1 norm fell below the floor and were redrawn.
    pub reseeded: Vec<usize>,
}

/// Scales every column of `W` to unit L1 norm and the matching row of `H` by the
/// inverse factor, leaving `W·H` unchanged. A column with norm below `floor`
/// cannot recover under multiplicative updates; it is redrawn uniformly from
/// `rng` (and normalized) while its row of `H` is kept as is.
pub fn normalize(
    w: &NonnegMatrix,
    h: &NonnegMatrix,
    floor: f64,
    rng: &mut impl Rng,
) -> Result<Normalized> {
    if w.cols() != h.rows() {
        return Err(Error::shape("normalize", w.shape(), h.shape()));
    }
    let norms = w.column_l1_norms();
    let mut w = w.clone();
    let mut h = h.clone();
    let mut reseeded = Vec::new();
    for (k, &c) in norms.iter().enumerate() {
        if c < floor {
            let fresh: Vec<f64> = (0..w.rows()).map(|_| rng::uniform_positive(rng)).collect();
            let total: f64 = fresh.iter().sum();
            for (i, v) in fresh.into_iter().enumerate() {
                w.set(i, k, v / total);
            }
            reseeded.push(k);
            continue;
        }
        for i in 0..w.rows() {
            let v = w.get(i, k) / c;
            w.set(i, k, v);
        }
        for v in h.row_mut(k) {
            *v *= c;
        }
    }
    Ok(Normalized { w, h, reseeded })
}

/// Rescales `R` and `S` by `1/c` and `H` by `c`, with `c` the mean row sum of `R`.
/// Both model terms are invariant under this change.
fn rescale_operators(e: &mut FactorEstimate) {
    let c = e.r.total_weight() / e.r.rows() as f64;
    if !(c > 0.0 && c.is_finite()) {
        return;
    }
    e.r.scale_in_place(1.0 / c);
    e.s.scale_in_place(1.0 / c);
    for v in e.h.data_mut() {
        *v *= c;
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Phase {
    Factors,
    FactorsAndOperators,
}

/// Runs the two-loop scheme.
///
/// Loop 1 alternates `H` and `W` updates with `R`, `S` fixed for at most
/// `max_iter_l1` sweeps; loop 2 alternates `H, W, S, R` for at most `max_iter_l2`
/// sweeps. After each sweep the objective is recorded, `W` is column-normalized
/// and the loop ends once the relative change falls to `kappa`. Loop 2's first
/// convergence test compares against the last loop-1 value.
pub fn solve(
    p: &CoupledProblem,
    cfg: &SolverConfig,
    init: Option<FactorEstimate>,
) -> Result<FactorEstimate> {
    cfg.validate()?;
    let mut e = init.unwrap_or_else(|| FactorEstimate::random(p, cfg.seed));
    e.check_shapes(p)?;
    let mut reseed_rng = rng::stream(cfg.seed, streams::RESEED);
    let slack = p.rounding_slack();

    let mut prev = objective(p, &e)?;
    if !prev.is_finite() {
        return Err(Error::NonFinite {
            factor: "objective",
            iteration: 0,
        });
    }
    e.objective_trace = vec![prev];
    e.iterations_l1 = 0;
    e.iterations_l2 = 0;
    let mut sweep = 0;

    for phase in [Phase::Factors, Phase::FactorsAndOperators] {
        let max_iter = match phase {
            Phase::Factors => cfg.max_iter_l1,
            Phase::FactorsAndOperators => cfg.max_iter_l2,
        };
        for _ in 0..max_iter {
            sweep += 1;
            e.h = updates::update_h_with_floor(p, &e, cfg.floor)?;
            ensure_finite(&e.h, "H", sweep)?;
            e.w = updates::update_w_with_floor(p, &e, cfg.floor)?;
            ensure_finite(&e.w, "W", sweep)?;
            if phase == Phase::FactorsAndOperators {
                e.s = updates::update_s_with_floor(p, &e, cfg.floor)?;
                updates::check_weights(&e.s, "S", sweep)?;
                e.r = updates::update_r_with_floor(p, &e, cfg.floor)?;
                updates::check_weights(&e.r, "R", sweep)?;
            }

            let mut current = objective(p, &e)?;
            if !current.is_finite() {
                return Err(Error::NonFinite {
                    factor: "objective",
                    iteration: sweep,
                });
            }
            if current > prev + MONOTONE_TOLERANCE * prev + slack {
                return Err(Error::Consistency {
                    iteration: sweep,
                    previous: prev,
                    current,
                });
            }

            if phase == Phase::FactorsAndOperators && cfg.renormalize_operators {
                rescale_operators(&mut e);
            }
            let normalized = normalize(&e.w, &e.h, cfg.floor, &mut reseed_rng)?;
            e.w = normalized.w;
            e.h = normalized.h;
            if !normalized.reseeded.is_empty() {
                e.warnings.push(format!(
                    "sweep {sweep}: reseeded dead columns {:?} of W",
                    normalized.reseeded
                ));
                // the redraw changes W·H, so the descent reference restarts here
                current = objective(p, &e)?;
            }

            e.objective_trace.push(current);
            match phase {
                Phase::Factors => e.iterations_l1 += 1,
                Phase::FactorsAndOperators => e.iterations_l2 += 1,
            }
            let converged = (prev - current).abs() <= cfg.kappa * prev;
            prev = current;
            if converged {
                break;
            }
        }
    }
    Ok(e)
}

/// Absolute slack for the descent check on data `m`: negligible next to any real
/// change of the objective, but above rounding noise at an exact fit.
pub(crate) fn rounding_slack(m: &NonnegMatrix) -> f64 {
    let mass = m.as_slice().len() as f64 + m.sum() + m.as_slice().iter().map(|v| v * v).sum::<f64>();
    1e-13 * mass
}

fn ensure_finite(m: &NonnegMatrix, factor: &'static str, iteration: usize) -> Result<()> {
    if m.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { factor, iteration })
    }
}
