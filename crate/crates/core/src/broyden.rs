//! Limited-memory "bad" Broyden updates of the inverse Jacobian.
//!
//! The approximation after `l` pairs is never formed. A product with it costs one
//! reuse of the anchor factorization plus `O(l)` vector operations.

use nalgebra::{DMatrix, DVector};

use crate::error::{CoreError, Result};
use crate::kkt::{jacobian_dense, KktFactor};
use crate::lp::{stack, Direction, IteratePoint, Problem};

/// Relative tolerance for `next == prev + alpha * d` in [`record_step`].
const STEP_CONSISTENCY: f64 = 1e-12;

/// Relative agreement required between the two dense forms of the update.
pub const ORACLE_AGREEMENT: f64 = 1e-10;

/// One secant pair, stacked in `(x, lambda, z)` block order.
#[derive(Debug, Clone, PartialEq)]
pub struct SecantPair {
    /// `alpha * (dx, dlambda, dz)`.
    pub s: DVector<f64>,
    /// `F(next) - F(prev)`.
    pub y: DVector<f64>,
    /// `y'y`.
    pub rho: f64,
    pub alpha: f64,
}

/// Builds the secant pair of the step `prev -> next = prev + alpha * direction`.
pub fn record_step(
    problem: &Problem,
    prev: &IteratePoint,
    next: &IteratePoint,
    direction: &Direction,
    alpha: f64,
) -> Result<SecantPair> {
    let expected = prev.step(alpha, direction);
    let gap = (&expected.stacked() - next.stacked()).amax();
    let scale = 1.0_f64.max(prev.stacked().amax()).max(alpha.abs() * direction.stacked().amax());
    if !(gap <= STEP_CONSISTENCY * scale) {
        return Err(CoreError::StepContract(format!("|next - (prev + alpha d)|_inf = {gap:e}")));
    }
    let a = problem.a();
    let y = stack(
        &(alpha * (a.tr_mul(&direction.dlambda) + &direction.dz)),
        &(alpha * (a * &direction.dx)),
        &(next.products() - prev.products()),
    );
    let rho = y.norm_squared();
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(CoreError::DegenerateSecant(rho));
    }
    Ok(SecantPair { s: alpha * direction.stacked(), y, rho, alpha })
}

/// Anchor factorization plus the pairs recorded since, oldest first.
#[derive(Debug, Clone)]
pub struct QuasiNewtonState {
    factor: KktFactor,
    pairs: Vec<SecantPair>,
}

impl QuasiNewtonState {
    pub fn new(factor: KktFactor) -> Self {
        Self { factor, pairs: Vec::new() }
    }

    pub fn push(&mut self, pair: SecantPair) {
        self.pairs.push(pair);
    }

    /// Number of stored pairs.
    pub fn ell(&self) -> usize {
        self.pairs.len()
    }

    pub fn pairs(&self) -> &[SecantPair] {
        &self.pairs
    }

    pub fn factor(&self) -> &KktFactor {
        &self.factor
    }
}

/// Projection coefficients `gamma_1..gamma_l`; `gamma_1` belongs to the newest pair.
///
/// `gamma_i = y_{k-i}' (V_{k-i+1} ... V_{k-1} v) / rho_{k-i}` with `V = I - y y' / rho`.
pub fn gamma_coefficients(state: &QuasiNewtonState, v: &DVector<f64>) -> Vec<f64> {
    let mut w = v.clone();
    let mut out = Vec::with_capacity(state.ell());
    for pair in state.pairs.iter().rev() {
        let g = pair.y.dot(&w) / pair.rho;
        w.axpy(-g, &pair.y, 1.0);
        out.push(g);
    }
    out
}

/// A quasi-Newton direction with the coefficients used to build it.
#[derive(Debug, Clone, PartialEq)]
pub struct QnDirection {
    pub direction: Direction,
    pub gamma: Vec<f64>,
}

/// Computes `H_k v` by solving `J(anchor) r = v + sum_i gamma_i (J(anchor) s_i - y_i)`.
///
/// Only the complementarity block of `J(anchor) s_i - y_i` is nonzero, so the
/// correction is assembled from the stored pairs and the anchor point alone.
pub fn qn_direction(problem: &Problem, state: &QuasiNewtonState, v: &DVector<f64>) -> Result<QnDirection> {
    if v.len() != problem.dim() {
        return Err(CoreError::Dimension(format!("v has length {}, expected {}", v.len(), problem.dim())));
    }
    let gamma = gamma_coefficients(state, v);
    let (n, m) = (problem.n(), problem.m());
    let anchor = state.factor.anchor();
    let mut rhs = v.clone();
    for (g, pair) in gamma.iter().zip(state.pairs.iter().rev()) {
        for i in 0..n {
            let corr = anchor.z[i] * pair.s[i] + anchor.x[i] * pair.s[n + m + i] - pair.y[n + m + i];
            rhs[n + m + i] += g * corr;
        }
    }
    let direction = state.factor.solve(problem, &rhs)?;
    Ok(QnDirection { direction, gamma })
}

/// Dense reference for the update sequence.
#[derive(Debug, Clone)]
pub struct DenseBroyden {
    /// `H_0 = J(anchor)^{-1}` followed by one matrix per applied pair.
    pub sequence: Vec<DMatrix<f64>>,
}

impl DenseBroyden {
    pub fn last(&self) -> &DMatrix<f64> {
        self.sequence.last().expect("sequence holds at least H_0")
    }
}

/// Applies the updates one at a time and cross-checks against the closed product form.
pub fn dense_broyden(problem: &Problem, anchor: &IteratePoint, pairs: &[SecantPair]) -> Result<DenseBroyden> {
    let h0 = jacobian_dense(problem, anchor).try_inverse().ok_or(CoreError::SingularJacobian)?;
    let mut sequence = vec![h0.clone()];
    let mut h = h0.clone();
    for p in pairs {
        h = broyden_update(&h, &p.s, &p.y);
        sequence.push(h.clone());
    }
    let product = broyden_product_form(&h0, pairs);
    let diff = (&product - &h).norm() / h.norm().max(1.0);
    if !(diff <= ORACLE_AGREEMENT) {
        return Err(CoreError::OracleMismatch(diff));
    }
    Ok(DenseBroyden { sequence })
}

/// `H + (s - H y) y' / (y'y)`, the inverse update with least Frobenius change subject to `H y = s`.
pub fn broyden_update(h: &DMatrix<f64>, s: &DVector<f64>, y: &DVector<f64>) -> DMatrix<f64> {
    let hy = h * y;
    h + (s - hy) * y.transpose() / y.norm_squared()
}

/// `H_0 V_0 ... V_{l-1} + sum_j s_j y_j' / rho_j V_{j+1} ... V_{l-1}` for pairs stored oldest first.
pub fn broyden_product_form(h0: &DMatrix<f64>, pairs: &[SecantPair]) -> DMatrix<f64> {
    let dim = h0.nrows();
    let v_mat = |p: &SecantPair| DMatrix::identity(dim, dim) - &p.y * p.y.transpose() / p.rho;
    // tails[j] = V_{j+1} ... V_{l-1}
    let mut tails = vec![DMatrix::identity(dim, dim); pairs.len() + 1];
    for j in (0..pairs.len()).rev() {
        tails[j] = v_mat(&pairs[j]) * &tails[j + 1];
    }
    let full = if pairs.is_empty() { DMatrix::identity(dim, dim) } else { v_mat(&pairs[0]) * &tails[1] };
    let mut h = h0 * full;
    for (j, p) in pairs.iter().enumerate() {
        h += &p.s * (p.y.transpose() * &tails[j + 1]) / p.rho;
    }
    h
}
