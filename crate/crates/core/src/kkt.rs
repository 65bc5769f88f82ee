//! Newton system assembly and solution through the normal equations.

use nalgebra::{DMatrix, DVector};

use crate::error::{CoreError, Result};
use crate::lp::{evaluate_f, split, stack, Direction, IteratePoint, Problem};

/// Accepted normwise backward error of a KKT solve.
pub const SOLVE_TOLERANCE: f64 = 1e-8;

/// Pivots below this fraction of their diagonal entry are treated as breakdown.
const PIVOT_FLOOR: f64 = 1e-14;

/// Lower-triangular Cholesky factor, computed without pivoting.
///
/// Fails with the index of the first pivot that is non-positive or negligible.
pub fn cholesky(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let k = m.nrows();
    assert_eq!(k, m.ncols(), "cholesky needs a square matrix");
    let mut l = DMatrix::<f64>::zeros(k, k);
    for j in 0..k {
        let mut d = m[(j, j)];
        for p in 0..j {
            d -= l[(j, p)] * l[(j, p)];
        }
        if !d.is_finite() || d <= PIVOT_FLOOR * m[(j, j)].abs() {
            return Err(CoreError::Factorization { pivot: j, value: d });
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..k {
            let mut s = m[(i, j)];
            for p in 0..j {
                s -= l[(i, p)] * l[(j, p)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

/// Solves `L L' y = r` in place.
fn cholesky_solve(l: &DMatrix<f64>, r: &mut DVector<f64>) {
    let k = l.nrows();
    for i in 0..k {
        let mut s = r[i];
        for p in 0..i {
            s -= l[(i, p)] * r[p];
        }
        r[i] = s / l[(i, i)];
    }
    for i in (0..k).rev() {
        let mut s = r[i];
        for p in i + 1..k {
            s -= l[(p, i)] * r[p];
        }
        r[i] = s / l[(i, i)];
    }
}

/// Factorization of the Jacobian at an anchor point, kept for reuse by later steps.
#[derive(Debug, Clone)]
pub struct KktFactor {
    anchor: IteratePoint,
    d2: DVector<f64>,
    l: DMatrix<f64>,
    refine: bool,
}

/// Factorizes `A D^2 A'` with `D^2 = X Z^{-1}` at `point`.
pub fn factorize(problem: &Problem, point: &IteratePoint) -> Result<KktFactor> {
    evaluate_f(problem, point)?;
    if !point.is_interior() {
        return Err(CoreError::DegeneratePoint("anchor point is not strictly positive".into()));
    }
    let d2 = point.x.component_div(&point.z);
    let mut ad = problem.a().clone();
    for (k, mut col) in ad.column_iter_mut().enumerate() {
        col *= d2[k];
    }
    let normal = &ad * problem.a().transpose();
    let l = cholesky(&normal)?;
    Ok(KktFactor { anchor: point.clone(), d2, l, refine: false })
}

impl KktFactor {
    pub fn anchor(&self) -> &IteratePoint {
        &self.anchor
    }

    /// `D^2 = x / z` at the anchor.
    pub fn scaling(&self) -> &DVector<f64> {
        &self.d2
    }

    /// Lower triangular `L` with `L L' = A D^2 A'`.
    pub fn normal_factor(&self) -> &DMatrix<f64> {
        &self.l
    }

    /// Enables one step of iterative refinement when the first solve is inaccurate.
    pub fn with_refinement(mut self, refine: bool) -> Self {
        self.refine = refine;
        self
    }

    /// `J(anchor) d`, returned stacked.
    pub fn apply_jacobian(&self, problem: &Problem, d: &Direction) -> DVector<f64> {
        jacobian_apply(problem, &self.anchor, d)
    }

    fn solve_once(&self, problem: &Problem, rhs: &DVector<f64>) -> Direction {
        let (n, m) = (problem.n(), problem.m());
        let (r1, r2, r3) = split(rhs, n, m);
        let a = problem.a();
        let t = (r3 - self.anchor.x.component_mul(&r1)).component_div(&self.anchor.z);
        let mut dlambda = r2 - a * &t;
        cholesky_solve(&self.l, &mut dlambda);
        let atl = a.tr_mul(&dlambda);
        let dx = t + self.d2.component_mul(&atl);
        let dz = r1 - atl;
        Direction { dx, dlambda, dz }
    }

    fn backward_error(&self, problem: &Problem, d: &Direction, rhs: &DVector<f64>) -> f64 {
        let res = (self.apply_jacobian(problem, d) - rhs).norm();
        let jnorm = (2.0 * problem.a().norm_squared()
            + problem.n() as f64
            + self.anchor.x.norm_squared()
            + self.anchor.z.norm_squared())
        .sqrt();
        let scale = jnorm * d.stacked().norm() + rhs.norm();
        if scale == 0.0 {
            0.0
        } else {
            res / scale
        }
    }

    /// Solves `J(anchor) d = rhs` for a stacked right-hand side.
    pub fn solve(&self, problem: &Problem, rhs: &DVector<f64>) -> Result<Direction> {
        if rhs.len() != problem.dim() || self.anchor.n() != problem.n() {
            return Err(CoreError::Dimension(format!(
                "right-hand side has length {}, expected {}",
                rhs.len(),
                problem.dim()
            )));
        }
        if !rhs.iter().all(|v| v.is_finite()) {
            return Err(CoreError::NonFinite("KKT right-hand side".into()));
        }
        let mut d = self.solve_once(problem, rhs);
        let mut err = self.backward_error(problem, &d, rhs);
        if self.refine && err > f64::EPSILON {
            let res = rhs - self.apply_jacobian(problem, &d);
            let corr = self.solve_once(problem, &res);
            let refined = Direction { dx: &d.dx + corr.dx, dlambda: &d.dlambda + corr.dlambda, dz: &d.dz + corr.dz };
            let refined_err = self.backward_error(problem, &refined, rhs);
            if refined_err < err {
                d = refined;
                err = refined_err;
            }
        }
        if !d.is_finite() || !(err <= SOLVE_TOLERANCE) {
            return Err(CoreError::SolveAccuracy { residual: err });
        }
        Ok(d)
    }
}

/// `J(point) d` with `J = [[0, A', I], [A, 0, 0], [Z, 0, X]]`, returned stacked.
pub fn jacobian_apply(problem: &Problem, point: &IteratePoint, d: &Direction) -> DVector<f64> {
    let a = problem.a();
    stack(&(a.tr_mul(&d.dlambda) + &d.dz), &(a * &d.dx), &(point.z.component_mul(&d.dx) + point.x.component_mul(&d.dz)))
}

/// Dense Jacobian of the KKT map at `point`.
pub fn jacobian_dense(problem: &Problem, point: &IteratePoint) -> DMatrix<f64> {
    let (n, m) = (problem.n(), problem.m());
    let mut j = DMatrix::zeros(2 * n + m, 2 * n + m);
    j.view_mut((0, n), (n, m)).copy_from(&problem.a().transpose());
    j.view_mut((n, 0), (m, n)).copy_from(problem.a());
    for i in 0..n {
        j[(i, n + m + i)] = 1.0;
        j[(n + m + i, i)] = point.z[i];
        j[(n + m + i, n + m + i)] = point.x[i];
    }
    j
}

/// Newton right-hand side `(c - z - A'lambda, b - Ax, sigma mu e - XZe)`.
pub fn newton_rhs(problem: &Problem, point: &IteratePoint, sigma: f64) -> Result<DVector<f64>> {
    let r = evaluate_f(problem, point)?;
    let mu = crate::lp::mu(point)?;
    Ok(stack(&(-r.rc), &(-r.rb), &r.xz.map(|v| sigma * mu - v)))
}
