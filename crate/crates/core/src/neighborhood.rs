//! Central-path neighbourhoods and proximity diagnostics.

use crate::error::{CoreError, Result};
use crate::lp::{evaluate_f, mu, IteratePoint, Problem, Residuals};

/// Relative slack applied to every membership inequality.
pub const MEMBERSHIP_SLACK: f64 = 1e-12;

/// Absolute feasibility tolerance before scaling by `1 + |b|_inf + |c|_inf`.
pub const FEASIBILITY_TOL: f64 = 1e-8;

/// Proximity of a point to the central path, all relative to `mu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Proximity {
    pub mu: f64,
    /// `|XZe - mu e| / mu`.
    pub n2: f64,
    /// `min_i x_i z_i / mu`.
    pub ns_min: f64,
    /// `max_i x_i z_i / mu`.
    pub ns_max: f64,
}

pub fn proximity(point: &IteratePoint) -> Result<Proximity> {
    let mu = mu(point)?;
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(CoreError::DegeneratePoint(format!("duality measure is {mu:e}")));
    }
    let xz = point.products();
    let n2 = xz.map(|v| v - mu).norm() / mu;
    Ok(Proximity { mu, n2, ns_min: xz.min() / mu, ns_max: xz.max() / mu })
}

pub fn n2_proximity(point: &IteratePoint) -> Result<f64> {
    Ok(proximity(point)?.n2)
}

fn le(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs + MEMBERSHIP_SLACK * rhs.abs().max(lhs.abs())
}

/// `|XZe - mu e| <= theta mu`; feasibility is the caller's concern.
pub fn in_n2(prox: &Proximity, theta: f64) -> bool {
    le(prox.n2, theta)
}

/// `gamma mu <= x_i z_i <= mu / gamma`.
pub fn in_ns(prox: &Proximity, gamma: f64) -> bool {
    le(gamma, prox.ns_min) && le(prox.ns_max, 1.0 / gamma)
}

/// Symmetric neighbourhood plus the residual bound `|r| <= (|r0| / mu0) beta mu`.
pub fn in_ns_inf(prox: &Proximity, residual_norm: f64, gamma: f64, beta: f64, init_ratio: f64) -> bool {
    in_ns(prox, gamma) && le(residual_norm, init_ratio * beta * prox.mu)
}

/// The neighbourhood a variant keeps its iterates in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Neighborhood {
    N2 {
        theta: f64,
    },
    Ns {
        gamma: f64,
    },
    /// `init_ratio` is `|(r_b^0, r_c^0)| / mu_0`.
    NsInf {
        gamma: f64,
        beta: f64,
        init_ratio: f64,
    },
}

/// Result of a membership test.
#[derive(Debug, Clone, PartialEq)]
pub struct Membership {
    pub prox: Proximity,
    pub residuals: Residuals,
    /// First violated condition, if any.
    pub violation: Option<String>,
}

impl Membership {
    pub fn holds(&self) -> bool {
        self.violation.is_none()
    }
}

impl Neighborhood {
    pub fn check(&self, problem: &Problem, point: &IteratePoint) -> Result<Membership> {
        let residuals = evaluate_f(problem, point)?;
        if !point.is_interior() {
            let prox = proximity(point).unwrap_or(Proximity {
                mu: f64::NAN,
                n2: f64::NAN,
                ns_min: f64::NAN,
                ns_max: f64::NAN,
            });
            return Ok(Membership { prox, residuals, violation: Some("point is not strictly positive".into()) });
        }
        let prox = proximity(point)?;
        let feas_tol = FEASIBILITY_TOL * problem.data_scale();
        let violation = match *self {
            Neighborhood::N2 { theta } => {
                if !in_n2(&prox, theta) {
                    Some(format!("n2 proximity {:.6e} exceeds theta {theta}", prox.n2))
                } else {
                    feasibility_violation(&residuals, feas_tol)
                }
            }
            Neighborhood::Ns { gamma } => {
                if !in_ns(&prox, gamma) {
                    Some(ns_message(&prox, gamma))
                } else {
                    feasibility_violation(&residuals, feas_tol)
                }
            }
            Neighborhood::NsInf { gamma, beta, init_ratio } => {
                if !in_ns(&prox, gamma) {
                    Some(ns_message(&prox, gamma))
                } else if !in_ns_inf(&prox, residuals.norm_r(), gamma, beta, init_ratio) {
                    Some(format!(
                        "residual norm {:.6e} exceeds beta * |r0|/mu0 * mu = {:.6e}",
                        residuals.norm_r(),
                        init_ratio * beta * prox.mu
                    ))
                } else {
                    None
                }
            }
        };
        Ok(Membership { prox, residuals, violation })
    }
}

fn ns_message(prox: &Proximity, gamma: f64) -> String {
    format!("products/mu in [{:.6e}, {:.6e}] leave [{gamma}, {:.6e}]", prox.ns_min, prox.ns_max, 1.0 / gamma)
}

fn feasibility_violation(r: &Residuals, tol: f64) -> Option<String> {
    let rb = r.rb.amax();
    let rc = r.rc.amax();
    if rb > tol || rc > tol {
        Some(format!("infeasible point: |r_b|_inf = {rb:.3e}, |r_c|_inf = {rc:.3e}, tolerance {tol:.3e}"))
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    fn point(x: &[f64], z: &[f64]) -> IteratePoint {
        IteratePoint::new(DVector::from_row_slice(x), DVector::zeros(1), DVector::from_row_slice(z)).unwrap()
    }

    #[test]
    fn centred_point_has_zero_proximity() {
        let p = proximity(&point(&[1.0, 2.0, 4.0], &[4.0, 2.0, 1.0])).unwrap();
        assert_eq!(p.n2, 0.0);
        assert_eq!(p.ns_min, 1.0);
        assert_eq!(p.ns_max, 1.0);
        assert_eq!(p.mu, 4.0);
    }

    #[test]
    fn n2_boundary_is_inclusive() {
        // products (1.5, 0.5): mu = 1 and |XZe - mu e| = sqrt(0.5)
        let p = proximity(&point(&[1.5, 0.5], &[1.0, 1.0])).unwrap();
        assert!((p.n2 - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(in_n2(&p, 0.5f64.sqrt()));
        assert!(!in_n2(&p, 0.7));
    }

    #[test]
    fn ns_bounds() {
        let p = proximity(&point(&[0.5, 1.5], &[1.0, 1.0])).unwrap();
        assert!(in_ns(&p, 0.5));
        assert!(!in_ns(&p, 0.6));
        let p = proximity(&point(&[0.2, 1.8], &[1.0, 1.0])).unwrap();
        assert!(!in_ns(&p, 0.5));
    }

    #[test]
    fn zero_mu_is_degenerate() {
        assert!(matches!(proximity(&point(&[0.0, 0.0], &[1.0, 1.0])), Err(CoreError::DegeneratePoint(_))));
    }

    #[test]
    fn residual_bound_for_infeasible_neighbourhood() {
        let problem = crate::lp::Problem::new(
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            DVector::from_vec(vec![1.0]),
            DVector::from_vec(vec![1.0, 1.0]),
        )
        .unwrap();
        // x = z = e gives mu = 1, r_b = 1, r_c = (0, 0) with lambda = 0
        let pt = point(&[1.0, 1.0], &[1.0, 1.0]);
        let at_boundary = Neighborhood::NsInf { gamma: 0.5, beta: 1.0, init_ratio: 1.0 };
        assert!(at_boundary.check(&problem, &pt).unwrap().holds());
        let tighter = Neighborhood::NsInf { gamma: 0.5, beta: 0.9, init_ratio: 1.0 };
        assert!(!tighter.check(&problem, &pt).unwrap().holds());
        let feasible = Neighborhood::Ns { gamma: 0.5 };
        assert!(!feasible.check(&problem, &pt).unwrap().holds());
    }
}
