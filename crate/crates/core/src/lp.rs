//! Standard-form linear programs `min c'x  s.t. Ax = b, x >= 0` and the KKT map.

use nalgebra::{DMatrix, DVector};

use crate::error::{CoreError, Result};

/// Smallest accepted ratio of extreme singular values of `A`.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: DVector<f64>,
}

impl Problem {
    /// Builds a problem after checking shapes, finiteness and full row rank.
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, c: DVector<f64>) -> Result<Self> {
        let (m, n) = a.shape();
        if m == 0 || n == 0 {
            return Err(CoreError::Dimension(format!("empty constraint matrix {m}x{n}")));
        }
        if m > n {
            return Err(CoreError::Dimension(format!("more rows than columns ({m} > {n})")));
        }
        if b.len() != m {
            return Err(CoreError::Dimension(format!("b has length {}, expected {m}", b.len())));
        }
        if c.len() != n {
            return Err(CoreError::Dimension(format!("c has length {}, expected {n}", c.len())));
        }
        for (name, ok) in [
            ("A", a.iter().all(|v| v.is_finite())),
            ("b", b.iter().all(|v| v.is_finite())),
            ("c", c.iter().all(|v| v.is_finite())),
        ] {
            if !ok {
                return Err(CoreError::NonFinite(name.into()));
            }
        }
        let sv = a.clone().singular_values();
        let max = sv.max();
        let min = sv.min();
        let ratio = if max > 0.0 { min / max } else { 0.0 };
        if ratio <= RANK_TOLERANCE {
            return Err(CoreError::RankDeficient { ratio });
        }
        Ok(Self { a, b, c })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn c(&self) -> &DVector<f64> {
        &self.c
    }

    /// Number of equality constraints.
    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    /// Number of variables.
    pub fn n(&self) -> usize {
        self.a.ncols()
    }

    /// Length of a stacked `(x, lambda, z)` vector.
    pub fn dim(&self) -> usize {
        2 * self.n() + self.m()
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        self.c.dot(x)
    }

    /// Scale used for the absolute feasibility tolerance.
    pub fn data_scale(&self) -> f64 {
        1.0 + self.b.amax() + self.c.amax()
    }

    fn check_point(&self, p: &IteratePoint) -> Result<()> {
        if p.x.len() != self.n() || p.z.len() != self.n() || p.lambda.len() != self.m() {
            return Err(CoreError::Dimension(format!(
                "point has (x, lambda, z) lengths ({}, {}, {}), problem is m={} n={}",
                p.x.len(),
                p.lambda.len(),
                p.z.len(),
                self.m(),
                self.n()
            )));
        }
        Ok(())
    }
}

/// A primal-dual point `(x, lambda, z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IteratePoint {
    pub x: DVector<f64>,
    pub lambda: DVector<f64>,
    pub z: DVector<f64>,
}

impl IteratePoint {
    pub fn new(x: DVector<f64>, lambda: DVector<f64>, z: DVector<f64>) -> Result<Self> {
        if x.len() != z.len() {
            return Err(CoreError::Dimension(format!("x has length {} but z has length {}", x.len(), z.len())));
        }
        Ok(Self { x, lambda, z })
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn is_interior(&self) -> bool {
        self.x.iter().all(|&v| v > 0.0) && self.z.iter().all(|&v| v > 0.0)
    }

    /// Componentwise products `x_i z_i`.
    pub fn products(&self) -> DVector<f64> {
        self.x.component_mul(&self.z)
    }

    /// `self + alpha * d`.
    pub fn step(&self, alpha: f64, d: &Direction) -> IteratePoint {
        IteratePoint {
            x: &self.x + alpha * &d.dx,
            lambda: &self.lambda + alpha * &d.dlambda,
            z: &self.z + alpha * &d.dz,
        }
    }

    pub fn stacked(&self) -> DVector<f64> {
        stack(&self.x, &self.lambda, &self.z)
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(self.lambda.iter()).chain(self.z.iter()).all(|v| v.is_finite())
    }
}

/// A search direction `(dx, dlambda, dz)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Direction {
    pub dx: DVector<f64>,
    pub dlambda: DVector<f64>,
    pub dz: DVector<f64>,
}

impl Direction {
    pub fn stacked(&self) -> DVector<f64> {
        stack(&self.dx, &self.dlambda, &self.dz)
    }

    pub fn from_stacked(v: &DVector<f64>, n: usize, m: usize) -> Self {
        let (dx, dlambda, dz) = split(v, n, m);
        Self { dx, dlambda, dz }
    }

    pub fn dx_dot_dz(&self) -> f64 {
        self.dx.dot(&self.dz)
    }

    pub fn is_finite(&self) -> bool {
        self.dx.iter().chain(self.dlambda.iter()).chain(self.dz.iter()).all(|v| v.is_finite())
    }
}

/// Value of the KKT map at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct Residuals {
    /// Dual residual `A'lambda + z - c`.
    pub rc: DVector<f64>,
    /// Primal residual `Ax - b`.
    pub rb: DVector<f64>,
    /// Complementarity products `XZe`.
    pub xz: DVector<f64>,
}

impl Residuals {
    pub fn norm_rb(&self) -> f64 {
        self.rb.norm()
    }

    pub fn norm_rc(&self) -> f64 {
        self.rc.norm()
    }

    /// Euclidean norm of the stacked `(r_b, r_c)`.
    pub fn norm_r(&self) -> f64 {
        (self.rb.norm_squared() + self.rc.norm_squared()).sqrt()
    }

    /// Stacked value of F in `(dual, primal, complementarity)` block order.
    pub fn stacked(&self) -> DVector<f64> {
        stack(&self.rc, &self.rb, &self.xz)
    }
}

/// Evaluates `F(x, lambda, z) = (A'lambda + z - c, Ax - b, XZe)`.
pub fn evaluate_f(problem: &Problem, point: &IteratePoint) -> Result<Residuals> {
    problem.check_point(point)?;
    let a = problem.a();
    let rc = a.tr_mul(&point.lambda) + &point.z - problem.c();
    let rb = a * &point.x - problem.b();
    let xz = point.products();
    let r = Residuals { rc, rb, xz };
    if !(r.rc.iter().chain(r.rb.iter()).chain(r.xz.iter()).all(|v| v.is_finite())) {
        return Err(CoreError::NonFinite("KKT residual".into()));
    }
    Ok(r)
}

/// Duality measure `x'z / n`.
pub fn mu(point: &IteratePoint) -> Result<f64> {
    let n = point.n();
    if n == 0 {
        return Err(CoreError::Dimension("duality measure of an empty point".into()));
    }
    Ok(point.x.dot(&point.z) / n as f64)
}

pub fn stack(a: &DVector<f64>, b: &DVector<f64>, c: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(a.len() + b.len() + c.len());
    out.rows_mut(0, a.len()).copy_from(a);
    out.rows_mut(a.len(), b.len()).copy_from(b);
    out.rows_mut(a.len() + b.len(), c.len()).copy_from(c);
    out
}

/// Splits a stacked vector into blocks of length `n`, `m`, `n`.
pub fn split(v: &DVector<f64>, n: usize, m: usize) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
    (v.rows(0, n).into_owned(), v.rows(n, m).into_owned(), v.rows(n + m, n).into_owned())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_problem() -> Problem {
        Problem::new(
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            DVector::from_vec(vec![1.0]),
            DVector::from_vec(vec![1.0, 2.0]),
        )
        .unwrap()
    }

    #[test]
    fn kkt_map_at_optimum_is_zero_except_products() {
        let p = unit_problem();
        let pt = IteratePoint::new(
            DVector::from_vec(vec![1.0, 0.0]),
            DVector::from_vec(vec![1.0]),
            DVector::from_vec(vec![0.0, 1.0]),
        )
        .unwrap();
        let r = evaluate_f(&p, &pt).unwrap();
        assert_eq!(r.rb.as_slice(), &[0.0]);
        assert_eq!(r.rc.as_slice(), &[0.0, 0.0]);
        assert_eq!(r.xz.as_slice(), &[0.0, 0.0]);
        assert_eq!(mu(&pt).unwrap(), 0.0);
    }

    #[test]
    fn kkt_map_interior_point() {
        let p = unit_problem();
        let pt = IteratePoint::new(
            DVector::from_vec(vec![0.5, 0.5]),
            DVector::from_vec(vec![0.0]),
            DVector::from_vec(vec![1.0, 2.0]),
        )
        .unwrap();
        let r = evaluate_f(&p, &pt).unwrap();
        assert_eq!(r.rb.as_slice(), &[0.0]);
        assert_eq!(r.rc.as_slice(), &[0.0, 0.0]);
        assert_eq!(r.xz.as_slice(), &[0.5, 1.0]);
        assert_relative_eq!(mu(&pt).unwrap(), 0.75);
    }

    #[test]
    fn rejects_bad_shapes_and_rank() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]);
        let err = Problem::new(a, DVector::zeros(2), DVector::zeros(2)).unwrap_err();
        assert!(matches!(err, CoreError::RankDeficient { .. }));
        let err = Problem::new(DMatrix::zeros(3, 2), DVector::zeros(3), DVector::zeros(2)).unwrap_err();
        assert!(matches!(err, CoreError::Dimension(_)));
        let p = unit_problem();
        let pt = IteratePoint::new(DVector::zeros(3), DVector::zeros(1), DVector::zeros(3)).unwrap();
        assert!(matches!(evaluate_f(&p, &pt), Err(CoreError::Dimension(_))));
        assert!(IteratePoint::new(DVector::zeros(3), DVector::zeros(1), DVector::zeros(2)).is_err());
        let empty = IteratePoint::new(DVector::zeros(0), DVector::zeros(0), DVector::zeros(0)).unwrap();
        assert!(mu(&empty).is_err());
    }

    #[test]
    fn stack_and_split_round_trip() {
        let v = DVector::from_vec((0..7).map(|i| i as f64).collect());
        let (a, b, c) = split(&v, 3, 1);
        assert_eq!(stack(&a, &b, &c), v);
    }
}
