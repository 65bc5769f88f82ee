//! Runtime verification of the convergence analysis against a solver trace.
//!
//! Every check is evaluated only where its hypotheses hold. Checks that need the
//! directions themselves run only on traces recorded with full detail.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DVector;

use crate::driver::{SolverOptions, StepMode, StepRecord, StepType, TheoryConstants, Variant};
use crate::error::{CoreError, Result};
use crate::lp::{IteratePoint, Problem};

/// Relative slack applied to every inequality.
pub const INEQUALITY_SLACK: f64 = 1e-12;
/// Relative tolerance for orthogonality of direction blocks.
pub const ORTHOGONALITY_TOL: f64 = 1e-10;
/// Relative tolerance of the duality-measure identity.
pub const MU_IDENTITY_TOL: f64 = 1e-10;
/// Relative tolerance of the residual scaling `|r_k| = nu_k |r_0|`.
pub const RESIDUAL_SCALING_TOL: f64 = 1e-8;
/// Relative tolerance of the combined-step vector identity.
pub const COMBINED_IDENTITY_TOL: f64 = 1e-8;

pub const ROW_INDEX: &str = "row_index";
pub const NU_PRODUCT: &str = "nu_product";
pub const MU_CONTINUITY: &str = "mu_continuity";
pub const FEASIBILITY: &str = "feasibility";
pub const DIRECTION_ORTHOGONALITY: &str = "direction_orthogonality";
pub const COMBINED_ORTHOGONALITY: &str = "combined_orthogonality";
pub const MU_DECREASE_IDENTITY: &str = "mu_decrease_identity";
pub const COMBINED_STEP_IDENTITY: &str = "combined_step_identity";
pub const SECANT_LOWER_BOUND: &str = "secant_norm_lower_bound";
pub const PROJECTION_BOUND: &str = "projection_coefficient_bound";
pub const GAMMA1_BOUND: &str = "gamma1_bound";
pub const NEIGHBORHOOD_RETENTION: &str = "neighborhood_retention";
pub const NEWTON_MU_RATE: &str = "newton_mu_rate";
pub const MU_MONOTONE: &str = "mu_monotone";
pub const RESIDUAL_SCALING: &str = "residual_scaling";
pub const SUFFICIENT_DECREASE: &str = "sufficient_decrease";
pub const COMPLEMENTARITY_FLOOR: &str = "complementarity_floor";
pub const PAIR_PRODUCT_BOUNDS: &str = "pair_product_bounds";
pub const STEP_SIZE_RANGE: &str = "step_size_range";
pub const COMPOSITE_ERROR_BOUND: &str = "composite_error_bound";
pub const SCALED_COMPOSITE_BOUND: &str = "scaled_composite_bound";

/// Every check name `verify_trace` can report.
pub const ALL_CHECKS: [&str; 21] = [
    ROW_INDEX,
    NU_PRODUCT,
    MU_CONTINUITY,
    FEASIBILITY,
    DIRECTION_ORTHOGONALITY,
    COMBINED_ORTHOGONALITY,
    MU_DECREASE_IDENTITY,
    COMBINED_STEP_IDENTITY,
    SECANT_LOWER_BOUND,
    PROJECTION_BOUND,
    GAMMA1_BOUND,
    NEIGHBORHOOD_RETENTION,
    NEWTON_MU_RATE,
    MU_MONOTONE,
    RESIDUAL_SCALING,
    SUFFICIENT_DECREASE,
    COMPLEMENTARITY_FLOOR,
    PAIR_PRODUCT_BOUNDS,
    STEP_SIZE_RANGE,
    COMPOSITE_ERROR_BOUND,
    SCALED_COMPOSITE_BOUND,
];

const TWO_SQRT2: f64 = std::f64::consts::SQRT_2 * 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckFailure {
    pub check: &'static str,
    pub k: usize,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CheckReport {
    /// Number of evaluations per check.
    pub evaluated: BTreeMap<&'static str, usize>,
    pub failures: Vec<CheckFailure>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn failed_checks(&self) -> BTreeSet<&'static str> {
        self.failures.iter().map(|f| f.check).collect()
    }

    pub fn merge(&mut self, other: CheckReport) {
        for (k, v) in other.evaluated {
            *self.evaluated.entry(k).or_default() += v;
        }
        self.failures.extend(other.failures);
    }

    fn record(&mut self, check: &'static str, k: usize, ok: bool, detail: impl FnOnce() -> String) {
        *self.evaluated.entry(check).or_default() += 1;
        if !ok {
            self.failures.push(CheckFailure { check, k, detail: detail() });
        }
    }

    /// One line per failure, then one line per evaluated check.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for f in &self.failures {
            s.push_str(&format!("FAIL {} at k={}: {}\n", f.check, f.k, f.detail));
        }
        let failed = self.failed_checks();
        for (name, count) in &self.evaluated {
            let verdict = if failed.contains(name) { "fail" } else { "ok" };
            s.push_str(&format!("{name}: {verdict} ({count} evaluations)\n"));
        }
        s
    }
}

/// `lhs <= rhs` up to a relative slack.
pub fn le(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs + INEQUALITY_SLACK * lhs.abs().max(rhs.abs())
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

/// Constants recomputed from the first row of a trace.
fn constants_for(problem: &Problem, options: &SolverOptions, trace: &[StepRecord]) -> Option<TheoryConstants> {
    let first = trace.first()?;
    Some(TheoryConstants::new(options, problem.n(), first.residual_norm(), first.mu_before))
}

/// Indices `i` where row `i` is a Newton step and row `i + 1` its single quasi-Newton follow-up.
fn newton_qn_pairs(trace: &[StepRecord]) -> impl Iterator<Item = usize> + '_ {
    (0..trace.len().saturating_sub(1)).filter(move |&i| {
        trace[i].step_type == StepType::Newton
            && trace[i + 1].step_type == StepType::QuasiNewton
            && trace[i + 1].ell == 1
            && trace[i + 1].k == trace[i].k + 1
    })
}

/// Runs every applicable check over a trace produced with `options`.
pub fn verify_trace(problem: &Problem, options: &SolverOptions, trace: &[StepRecord]) -> CheckReport {
    let mut rep = CheckReport::default();
    let Some(constants) = constants_for(problem, options, trace) else {
        return rep;
    };
    let n = problem.n();
    let nf = n as f64;
    let theory = options.mode == StepMode::Theory;
    let feasible = options.variant.is_feasible();
    let mu0 = trace[0].mu_before;
    let r0 = trace[0].residual_norm();
    let init_ratio = r0 / mu0;
    let feas_tol = crate::neighborhood::FEASIBILITY_TOL * problem.data_scale();
    let mut expected_nu = 1.0;

    for (i, r) in trace.iter().enumerate() {
        let k = r.k;
        rep.record(ROW_INDEX, k, k == i, || format!("row {i} carries k = {k}"));

        rep.record(NU_PRODUCT, k, rel_close(r.nu, expected_nu, 1e-12), || {
            format!("nu = {:e}, product of (1 - alpha) = {expected_nu:e}", r.nu)
        });
        expected_nu *= 1.0 - r.alpha;

        if let Some(next) = trace.get(i + 1) {
            rep.record(MU_CONTINUITY, k, rel_close(r.mu_after, next.mu_before, 1e-14), || {
                format!("mu_after = {:e} but the next row starts at {:e}", r.mu_after, next.mu_before)
            });
        }

        if feasible {
            let tol = feas_tol * (nf.max(problem.m() as f64)).sqrt();
            rep.record(FEASIBILITY, k, r.norm_rb <= tol && r.norm_rc <= tol, || {
                format!("|r_b| = {:e}, |r_c| = {:e}, tolerance {tol:e}", r.norm_rb, r.norm_rc)
            });
            if let Some(d) = &r.detail {
                let dir = &d.direction;
                let bound = ORTHOGONALITY_TOL * dir.dx.norm() * dir.dz.norm()
                    + orthogonality_floor(problem, &d.point, &dir.dx, &d.point, &dir.dlambda);
                rep.record(DIRECTION_ORTHOGONALITY, k, r.dx_dot_dz.abs() <= bound, || {
                    format!("|dx'dz| = {:e} exceeds {bound:e}", r.dx_dot_dz.abs())
                });
            }
            let predicted = (1.0 - r.alpha * (1.0 - r.sigma)) * r.mu_before;
            rep.record(MU_DECREASE_IDENTITY, k, rel_close(r.mu_after, predicted, MU_IDENTITY_TOL), || {
                format!("mu_after = {:e}, predicted {predicted:e}", r.mu_after)
            });
        }

        if r.alpha > 0.0 && r.sigma < 1.0 {
            rep.record(MU_MONOTONE, k, r.mu_after < r.mu_before, || {
                format!("mu went from {:e} to {:e}", r.mu_before, r.mu_after)
            });
        }

        let target = r.nu * r0;
        let tol = RESIDUAL_SCALING_TOL * target + 1e-12 * (1.0 + r0);
        rep.record(RESIDUAL_SCALING, k, (r.residual_norm() - target).abs() <= tol, || {
            format!("|r| = {:e} but nu |r0| = {target:e}", r.residual_norm())
        });

        let retained = match options.variant {
            Variant::FeasibleN2 => le(r.prox.n2, options.theta),
            Variant::FeasibleNs => le(options.gamma, r.prox.ns_min) && le(r.prox.ns_max, 1.0 / options.gamma),
            Variant::InfeasibleNs => {
                le(options.gamma, r.prox.ns_min)
                    && le(r.prox.ns_max, 1.0 / options.gamma)
                    && le(r.residual_norm(), init_ratio * options.beta * r.mu_before)
            }
        };
        rep.record(NEIGHBORHOOD_RETENTION, k, retained, || {
            format!(
                "n2 = {:e}, products/mu in [{:e}, {:e}], |r| = {:e}",
                r.prox.n2,
                r.prox.ns_min,
                r.prox.ns_max,
                r.residual_norm()
            )
        });

        if options.variant == Variant::InfeasibleNs {
            let bound = (1.0 - options.alpha_dec * r.alpha) * r.mu_before;
            rep.record(SUFFICIENT_DECREASE, k, le(r.mu_after, bound), || {
                format!("mu_after = {:e} exceeds {bound:e}", r.mu_after)
            });
            if theory {
                let floor = (1.0 - r.alpha) * r.mu_before;
                rep.record(COMPLEMENTARITY_FLOOR, k, le(floor, r.mu_after), || {
                    format!("mu_after = {:e} below (1 - alpha) mu = {floor:e}", r.mu_after)
                });
            }
        }

        if theory && options.variant == Variant::FeasibleN2 && r.step_type == StepType::Newton {
            let ratio = r.mu_after / r.mu_before;
            let bound = 1.0 - 0.012 / nf;
            rep.record(NEWTON_MU_RATE, k, le(ratio, bound), || format!("mu ratio {ratio} exceeds {bound}"));
        }

        if r.step_type == StepType::QuasiNewton {
            if let (Some(g), Some(vn), Some(yn)) = (r.gamma1, r.rhs_norm, r.secant_norm) {
                rep.record(PROJECTION_BOUND, k, le(g.abs(), vn / yn), || {
                    format!("|gamma1| = {:e} exceeds |v|/|y| = {:e}", g.abs(), vn / yn)
                });
            }
            if let (Some(yn), Some(prev)) = (r.secant_norm, i.checked_sub(1).map(|j| &trace[j])) {
                let rho = if feasible { 1.0 - prev.sigma } else { options.alpha_dec };
                let hypothesis = le(prev.mu_after, (1.0 - rho * prev.alpha) * prev.mu_before);
                if hypothesis && rho > 0.0 && rho <= 1.0 && prev.alpha <= 1.0 {
                    let bound = 0.5 * rho * prev.alpha * prev.mu_before;
                    rep.record(SECANT_LOWER_BOUND, k, le(bound, yn), || {
                        format!("|y| = {yn:e} below (rho/2) alpha mu = {bound:e}")
                    });
                }
            }
        }

        if theory {
            check_step_size(&mut rep, trace, i, &constants);
        }
    }

    for i in newton_qn_pairs(trace) {
        let (nw, qn) = (&trace[i], &trace[i + 1]);
        let Some(g) = qn.gamma1 else { continue };
        if !(nw.alpha > 0.0 && nw.alpha <= 1.0 && nw.sigma < 1.0) {
            continue;
        }
        let bound = match constants {
            TheoryConstants::N2 { theta, .. } => {
                2.0 * (1.0 - nw.alpha * (1.0 - nw.sigma)) * (theta * theta + (1.0 - qn.sigma).powi(2) * nf).sqrt()
                    / (nw.alpha * (1.0 - nw.sigma))
            }
            TheoryConstants::Ns { gamma, .. } => 2.0 * nf.sqrt() / ((1.0 - nw.sigma) * nw.alpha * gamma),
            TheoryConstants::Inf { c3, .. } => c3 * nf.sqrt() / nw.alpha,
        };
        rep.record(GAMMA1_BOUND, qn.k, le(g.abs(), bound), || format!("|gamma1| = {:e} exceeds {bound:e}", g.abs()));

        if options.variant == Variant::InfeasibleNs && theory {
            if let Some(after) = trace.get(i + 2) {
                let ok = le(options.gamma, after.prox.ns_min) && le(after.prox.ns_max, 1.0 / options.gamma);
                rep.record(PAIR_PRODUCT_BOUNDS, after.k, ok, || {
                    format!("products/mu in [{:e}, {:e}] after the pair", after.prox.ns_min, after.prox.ns_max)
                });
            }
        }
    }

    if feasible {
        check_combined(&mut rep, problem, trace);
    }
    rep.merge(composite_error_check(&constants, trace));
    rep
}

fn check_step_size(rep: &mut CheckReport, trace: &[StepRecord], i: usize, constants: &TheoryConstants) {
    let r = &trace[i];
    let n = match *constants {
        TheoryConstants::N2 { n, .. } | TheoryConstants::Ns { n, .. } | TheoryConstants::Inf { n, .. } => n as f64,
    };
    let (lo, hi) = match (r.step_type, *constants) {
        (StepType::Newton, TheoryConstants::N2 { alpha, .. }) => (0.0, alpha),
        (StepType::Newton, TheoryConstants::Ns { alpha_newton, .. }) => (0.0, alpha_newton),
        (StepType::Newton, TheoryConstants::Inf { alpha_newton, .. }) => (0.0, alpha_newton),
        (StepType::QuasiNewton, c) => {
            let Some(prev) = i.checked_sub(1).map(|j| &trace[j]) else { return };
            if prev.step_type != StepType::Newton || r.ell != 1 {
                return;
            }
            let ak = prev.alpha;
            match c {
                TheoryConstants::N2 { alpha, .. } => (ak, alpha),
                TheoryConstants::Ns { gamma, l, .. } => (2.0 * ak, (1.0 - gamma) * l / n.powi(3)),
                TheoryConstants::Inf { c3, c5, .. } => (n.powi(5) * ak * ak / (c3 * c5), ak / c3),
            }
        }
    };
    let ok = r.alpha > 0.0 && le(lo, r.alpha) && le(r.alpha, hi);
    rep.record(STEP_SIZE_RANGE, r.k, ok, || format!("alpha = {:e} outside [{lo:e}, {hi:e}]", r.alpha));
}

/// Size of `dx' dz` that the identity permits once neither point is exactly feasible.
///
/// `dx` was computed at `px` and `dz = -r_c(pz) - A' dlambda` at `pz`, so
/// `dx' dz = -dx' r_c(pz) - (A dx)' dlambda` with `A dx = -r_b(px)` up to rounding.
/// The rounding allowance is the error in evaluating each residual.
fn orthogonality_floor(
    problem: &Problem,
    px: &IteratePoint,
    dx: &DVector<f64>,
    pz: &IteratePoint,
    dlambda: &DVector<f64>,
) -> f64 {
    let a = problem.a();
    let a_norm = a.norm();
    let u = (problem.n() + problem.m()) as f64 * f64::EPSILON;
    let rb = (a * &px.x - problem.b()).norm() + u * (a_norm * px.x.norm() + problem.b().norm());
    let rc = (a.tr_mul(&pz.lambda) + &pz.z - problem.c()).norm()
        + u * (a_norm * pz.lambda.norm() + pz.z.norm() + problem.c().norm());
    dx.norm() * rc + dlambda.norm() * rb
}

fn check_combined(rep: &mut CheckReport, problem: &Problem, trace: &[StepRecord]) {
    for i in 0..trace.len().saturating_sub(1) {
        let (a, b) = (&trace[i], &trace[i + 1]);
        let (Some(da), Some(db)) = (&a.detail, &b.detail) else { continue };
        let (d1, d2) = (&da.direction, &db.direction);
        let (p1, p2) = (&da.point, &db.point);
        let pairs = [
            (
                d1.dx.dot(&d2.dz),
                ORTHOGONALITY_TOL * d1.dx.norm() * d2.dz.norm()
                    + orthogonality_floor(problem, p1, &d1.dx, p2, &d2.dlambda),
                "dx_k' dz_k+1",
            ),
            (
                d1.dz.dot(&d2.dx),
                ORTHOGONALITY_TOL * d1.dz.norm() * d2.dx.norm()
                    + orthogonality_floor(problem, p2, &d2.dx, p1, &d1.dlambda),
                "dz_k' dx_k+1",
            ),
        ];
        for (dot, bound, what) in pairs {
            rep.record(COMBINED_ORTHOGONALITY, b.k, dot.abs() <= bound, || {
                format!("|{what}| = {:e} exceeds {bound:e}", dot.abs())
            });
        }
        let cx = a.alpha * &d1.dx + b.alpha * &d2.dx;
        let cz = a.alpha * &d1.dz + b.alpha * &d2.dz;
        let cl = a.alpha * &d1.dlambda + b.alpha * &d2.dlambda;
        // the combined pair mixes residuals of both points
        let floor = orthogonality_floor(problem, p1, &cx, p1, &cl) + orthogonality_floor(problem, p2, &cx, p2, &cl);
        let bound = ORTHOGONALITY_TOL * cx.norm() * cz.norm() + floor;
        let dot = cx.dot(&cz);
        rep.record(COMBINED_ORTHOGONALITY, b.k, dot.abs() <= bound, || {
            format!("|combined dx' combined dz| = {:e} exceeds {bound:e}", dot.abs())
        });
    }

    for i in newton_qn_pairs(trace) {
        let (nw, qn) = (&trace[i], &trace[i + 1]);
        let (Some(dn), Some(dq), Some(g)) = (&nw.detail, &qn.detail, qn.gamma1) else { continue };
        let pt = &dn.point;
        let (ak, a) = (nw.alpha, qn.alpha);
        let zdx = pt.z.component_mul(&(ak * &dn.direction.dx + a * &dq.direction.dx));
        let xdz = pt.x.component_mul(&(ak * &dn.direction.dz + a * &dq.direction.dz));
        let lhs = &zdx + &xdz;
        let mu_k = nw.mu_before;
        let mu_end = qn.mu_after;
        let centring = (a + ak * (1.0 - a)) * pt.products().map(|p| mu_k - p);
        let shift = DVector::from_element(pt.n(), mu_end - mu_k);
        let second = (1.0 + g) * a * ak * ak * dn.direction.dx.component_mul(&dn.direction.dz);
        let rhs = &centring + &shift - &second;
        let scale = zdx.norm() + xdz.norm() + centring.norm() + shift.norm() + second.norm();
        let err = (&lhs - &rhs).norm();
        rep.record(COMBINED_STEP_IDENTITY, qn.k, err <= COMBINED_IDENTITY_TOL * scale, || {
            format!("identity residual {err:e} against scale {scale:e}")
        });
    }
}

/// Bounds on the second-order term of a Newton step followed by a quasi-Newton step.
///
/// Needs traces with full detail; pairs without it are skipped.
pub fn composite_error_check(constants: &TheoryConstants, trace: &[StepRecord]) -> CheckReport {
    let mut rep = CheckReport::default();
    for i in newton_qn_pairs(trace) {
        let (nw, qn) = (&trace[i], &trace[i + 1]);
        let (Some(dn), Some(dq), Some(g)) = (&nw.detail, &qn.detail, qn.gamma1) else { continue };
        let (ak, a) = (nw.alpha, qn.alpha);
        let cx = ak * &dn.direction.dx + a * &dq.direction.dx;
        let cz = ak * &dn.direction.dz + a * &dq.direction.dz;
        let mu_k = nw.mu_before;
        let nf = dn.point.n() as f64;
        let shrink = 1.0 - (1.0 - a * (1.0 - qn.sigma)) * (1.0 - ak * (1.0 - nw.sigma));
        let lhs = cx.component_mul(&cz).norm();
        match *constants {
            TheoryConstants::N2 { theta, .. } => {
                let inner = (a + ak * (1.0 - a)) * theta
                    + (1.0 + g).abs() * a * ak * ak * (theta * theta + nf * (1.0 - nw.sigma).powi(2))
                        / (TWO_SQRT2 * (1.0 - theta));
                let bound = mu_k / (TWO_SQRT2 * (1.0 - theta)) * (shrink * shrink * nf + inner * inner);
                rep.record(COMPOSITE_ERROR_BOUND, qn.k, le(lhs, bound), || {
                    format!("|combined dX dZ e| = {lhs:e} exceeds {bound:e}")
                });
            }
            TheoryConstants::Ns { gamma, .. } => {
                let inner = (a + ak * (1.0 - a)) + (1.0 + g).abs() * a * ak * ak / TWO_SQRT2;
                let growth = ((1.0 + gamma) / gamma).powi(2);
                let bound = nf * mu_k / (TWO_SQRT2 * gamma) * (inner * inner * growth * nf + shrink * shrink);
                rep.record(COMPOSITE_ERROR_BOUND, qn.k, le(lhs, bound), || {
                    format!("|combined dX dZ e| = {lhs:e} exceeds {bound:e}")
                });
            }
            TheoryConstants::Inf { gamma, beta, sigma_max, omega, c3, c6, .. } => {
                let d = dn.point.x.component_div(&dn.point.z).map(f64::sqrt);
                let scaled_x = cx.component_div(&d).norm();
                let scaled_z = cz.component_mul(&d).norm();
                let lead = sigma_max + 1.0 / gamma + 8.0 * beta;
                let bound =
                    (lead * (ak + a) + (ak + c3) * omega * omega * ak * a) / gamma.sqrt() * nf.powf(2.5) * mu_k.sqrt();
                let worst = scaled_x.max(scaled_z);
                rep.record(SCALED_COMPOSITE_BOUND, qn.k, le(worst, bound), || {
                    format!("scaled combined step {worst:e} exceeds {bound:e}")
                });
                if ak <= lead / ((1.0 + c3) * omega * omega) && le(a, ak / c3) {
                    let simple = c6 * ak * nf.powf(2.5) * mu_k.sqrt();
                    rep.record(SCALED_COMPOSITE_BOUND, qn.k, le(worst, simple), || {
                        format!("scaled combined step {worst:e} exceeds {simple:e}")
                    });
                }
            }
        }
    }
    rep
}

/// Least-squares fit of `log(iterations) = exponent * log(n) + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexityFit {
    pub exponent: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn complexity_fit(samples: &[(usize, f64)]) -> Result<ComplexityFit> {
    let sizes: BTreeSet<usize> = samples.iter().map(|s| s.0).collect();
    if sizes.len() < 3 {
        return Err(CoreError::TooFewSizes(sizes.len()));
    }
    if samples.iter().any(|&(n, it)| n == 0 || !(it > 0.0)) {
        return Err(CoreError::Parse("complexity fit needs positive sizes and iteration counts".into()));
    }
    let pts: Vec<(f64, f64)> = samples.iter().map(|&(n, it)| ((n as f64).ln(), it.ln())).collect();
    let len = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / len;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / len;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(ComplexityFit { exponent, intercept, r_squared })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_a_power_law() {
        let samples: Vec<(usize, f64)> = [4usize, 9, 16, 25].iter().map(|&n| (n, 3.0 * (n as f64).powf(1.5))).collect();
        let fit = complexity_fit(&samples).unwrap();
        assert!((fit.exponent - 1.5).abs() < 1e-12);
        assert!((fit.intercept - 3.0f64.ln()).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fit_needs_three_sizes() {
        let samples = [(4, 10.0), (4, 12.0), (9, 20.0)];
        assert!(matches!(complexity_fit(&samples), Err(CoreError::TooFewSizes(2))));
    }

    #[test]
    fn slack_is_relative() {
        assert!(le(1.0 + 1e-13, 1.0));
        assert!(!le(1.0 + 1e-11, 1.0));
        assert!(le(1e-20 + 1e-33, 1e-20));
    }
}
