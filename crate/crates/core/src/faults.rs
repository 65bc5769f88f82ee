//! Hand-corrupted traces, one per check, showing that each check can fail.

use crate::checks::*;
use crate::driver::{run, SolverOptions, StepMode, StepRecord, TraceDetail, Variant};
use crate::error::Result;
use crate::generate::{cold_start, generate_centered, generate_solved};
use crate::lp::Problem;

/// A clean theory-mode trace with full detail to corrupt.
#[derive(Debug, Clone)]
pub struct Baseline {
    pub problem: Problem,
    pub options: SolverOptions,
    pub trace: Vec<StepRecord>,
}

/// Twelve theory-mode steps on a fixed small instance.
pub fn baseline(variant: Variant) -> Result<Baseline> {
    let n = 6;
    let m = 3;
    let mut options = SolverOptions::new(variant, StepMode::Theory);
    options.max_iters = 12;
    options.trace = TraceDetail::Full;
    let (problem, start) = if variant.is_feasible() {
        let g = generate_centered(n, m, 1.0, 11)?;
        let s = g.central_start.clone().expect("centered instances carry a start");
        (g.problem, s)
    } else {
        let g = generate_solved(n, m, 11)?;
        let s = cold_start(n, m, g.xi.expect("solved instances carry xi"));
        (g.problem, s)
    };
    let trace = run(&problem, &start, &options)?.trace;
    Ok(Baseline { problem, options, trace })
}

/// A corruption aimed at one named check.
pub struct Fault {
    pub check: &'static str,
    pub variant: Variant,
    pub corrupt: fn(&mut [StepRecord]),
}

fn detail(r: &mut StepRecord) -> &mut crate::driver::StepDetail {
    r.detail.as_mut().expect("baseline keeps full detail")
}

/// Rows 2 and 3 form a Newton and quasi-Newton pair in every baseline.
pub fn catalogue() -> Vec<Fault> {
    use Variant::*;
    let f = |check, variant, corrupt: fn(&mut [StepRecord])| Fault { check, variant, corrupt };
    vec![
        f(ROW_INDEX, FeasibleN2, |t| t[3].k = 7),
        f(NU_PRODUCT, FeasibleN2, |t| t[4].nu *= 1.5),
        f(MU_CONTINUITY, FeasibleN2, |t| t[5].mu_before *= 1.0 + 1e-6),
        f(FEASIBILITY, FeasibleN2, |t| t[2].norm_rb = 1.0),
        f(DIRECTION_ORTHOGONALITY, FeasibleN2, |t| t[2].dx_dot_dz = 1e-3),
        f(COMBINED_ORTHOGONALITY, FeasibleN2, |t| {
            let dx = t[2].detail.as_ref().expect("baseline keeps full detail").direction.dx.clone();
            detail(&mut t[3]).direction.dz += 0.1 * dx;
        }),
        f(MU_DECREASE_IDENTITY, FeasibleN2, |t| t[6].mu_after += 1e-3),
        f(COMBINED_STEP_IDENTITY, FeasibleN2, |t| {
            let g = t[3].gamma1.expect("quasi-Newton row");
            t[3].gamma1 = Some(g + 1.0);
        }),
        f(SECANT_LOWER_BOUND, FeasibleN2, |t| t[3].secant_norm = Some(1e-30)),
        f(PROJECTION_BOUND, FeasibleN2, |t| t[3].rhs_norm = Some(1e-30)),
        f(GAMMA1_BOUND, FeasibleN2, |t| t[3].gamma1 = Some(1e12)),
        f(NEIGHBORHOOD_RETENTION, FeasibleN2, |t| t[4].prox.n2 = 0.5),
        f(NEWTON_MU_RATE, FeasibleN2, |t| t[4].mu_after = t[4].mu_before * (1.0 - 1e-6)),
        f(MU_MONOTONE, FeasibleNs, |t| t[4].mu_after = t[4].mu_before * 1.01),
        f(RESIDUAL_SCALING, InfeasibleNs, |t| t[3].norm_rb *= 1.01),
        f(SUFFICIENT_DECREASE, InfeasibleNs, |t| t[3].mu_after = t[3].mu_before * 1.001),
        f(COMPLEMENTARITY_FLOOR, InfeasibleNs, |t| t[3].mu_after = 0.5 * (1.0 - t[3].alpha) * t[3].mu_before),
        f(PAIR_PRODUCT_BOUNDS, InfeasibleNs, |t| t[4].prox.ns_min = 0.1),
        f(STEP_SIZE_RANGE, FeasibleNs, |t| t[2].alpha *= 2.0),
        f(COMPOSITE_ERROR_BOUND, FeasibleNs, |t| {
            let d = detail(&mut t[2]);
            d.direction.dx *= 1e3;
            d.direction.dz *= 1e3;
        }),
        f(SCALED_COMPOSITE_BOUND, InfeasibleNs, |t| {
            let d = detail(&mut t[2]);
            d.direction.dx *= 1e3;
            d.direction.dz *= 1e3;
        }),
    ]
}

/// Outcome of one corruption: did the clean trace pass and did the target check then fail.
#[derive(Debug, Clone)]
pub struct FaultOutcome {
    pub check: &'static str,
    pub clean_passed: bool,
    pub caught: bool,
}

/// Applies every corruption to a fresh copy of its baseline.
pub fn run_catalogue() -> Result<Vec<FaultOutcome>> {
    let bases = [baseline(Variant::FeasibleN2)?, baseline(Variant::FeasibleNs)?, baseline(Variant::InfeasibleNs)?];
    let mut out = Vec::new();
    for fault in catalogue() {
        let base = bases.iter().find(|b| b.options.variant == fault.variant).expect("one baseline per variant");
        let clean = verify_trace(&base.problem, &base.options, &base.trace);
        let mut trace = base.trace.clone();
        (fault.corrupt)(&mut trace);
        let rep = verify_trace(&base.problem, &base.options, &trace);
        out.push(FaultOutcome {
            check: fault.check,
            clean_passed: clean.passed() && clean.evaluated.contains_key(fault.check),
            caught: rep.failed_checks().contains(fault.check),
        });
    }
    Ok(out)
}
