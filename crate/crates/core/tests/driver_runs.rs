use nalgebra::{DMatrix, DVector};
use qnipm::driver::{infeasible_gamma_lower_bound, ns_l_constant, predicted_mu};
use qnipm::*;

fn centered(n: usize, seed: u64) -> (GeneratedInstance, IteratePoint) {
    let g = generate_centered(n, (n / 2).max(1), 1.0, seed).unwrap();
    let s = g.central_start.clone().unwrap();
    (g, s)
}

fn solved(n: usize, seed: u64) -> (GeneratedInstance, IteratePoint) {
    let m = (n / 2).max(1);
    let g = generate_solved(n, m, seed).unwrap();
    let s = cold_start(n, m, g.xi.unwrap());
    (g, s)
}

fn config_error(o: &SolverOptions, n: usize) -> String {
    match o.validate(n) {
        Err(CoreError::Config(msg)) => msg,
        other => panic!("expected a configuration error, got {other:?}"),
    }
}

#[test]
fn two_norm_step_lengths_by_hand() {
    let o = SolverOptions::new(Variant::FeasibleN2, StepMode::Theory);
    let (a, q) = step_size_plan(&o, 1, 0.0, 1.0).unwrap();
    assert!((a - 0.03).abs() < 1e-15 && a == q);
    let (a, _) = step_size_plan(&o, 4, 0.0, 1.0).unwrap();
    assert!((a - 0.16 / 6.0).abs() < 1e-15);
}

#[test]
fn symmetric_step_lengths_by_hand() {
    let l = ns_l_constant(0.5, 0.5, 0.5);
    assert!((l - 0.25 / ((3.0 / (2f64.powf(1.5) * 0.5)) * 36.0 * 9.0)).abs() < 1e-18);
    assert!((l - 3.637e-4).abs() < 1e-7);
    let mut o = SolverOptions::new(Variant::FeasibleNs, StepMode::Theory);
    o.gamma = 0.5;
    o.sigma_min = 0.5;
    o.sigma_max = 0.5;
    let (a, q) = step_size_plan(&o, 2, 0.0, 1.0).unwrap();
    let cap = 2f64.powf(1.5) * 0.5 * (0.5 / 1.5) * 0.5 / 2.0;
    assert_eq!(a, cap.min(0.5 * l / 16.0));
    assert_eq!(q, 2.0 * a);
}

#[test]
fn infeasible_constants_are_consistent() {
    let o = SolverOptions::new(Variant::InfeasibleNs, StepMode::Theory);
    for (n, r0, mu0) in [(5, 4.0, 4.0), (20, 13.0, 4.0), (3, 0.0, 1.0)] {
        let TheoryConstants::Inf { omega, c3, c4, c5, c6, kappa, alpha_newton, .. } =
            TheoryConstants::new(&o, n, r0, mu0)
        else {
            unreachable!()
        };
        assert!((omega - 9.0 / 0.8f64.sqrt()).abs() < 1e-12);
        assert!(c3 >= 1.0);
        assert!((kappa - (2.0 * omega * omega + c6 * c6)).abs() <= 1e-12 * kappa);
        assert!(c5 <= c4);
        assert!(alpha_newton <= c5 / (n as f64).powi(5));
    }
}

#[test]
fn duality_measure_prediction_by_hand() {
    assert_eq!(predicted_mu(2.0, 0.0, 0.4), 2.0);
    assert_eq!(predicted_mu(2.0, 1.0, 1.0), 2.0);
    assert!((predicted_mu(2.0, 0.5, 0.6) - 1.6).abs() < 1e-15);
}

#[test]
fn zero_step_leaves_the_point() {
    let (_, s) = centered(4, 1);
    let d =
        Direction { dx: DVector::from_element(4, 1.0), dlambda: DVector::zeros(2), dz: DVector::from_element(4, -1.0) };
    assert_eq!(s.step(0.0, &d), s);
}

#[test]
fn configuration_conditions_are_named() {
    let mut o = SolverOptions::new(Variant::FeasibleN2, StepMode::Theory);
    o.theta = 0.7;
    assert!(config_error(&o, 4).contains("theta in (0, 16/25)"));
    o.theta = 0.05;
    assert!(config_error(&o, 4).contains("(theta^2 + n (1 - sigma)^2) / (2^(3/2) (1 - theta)) <= theta sigma"));

    let mut o = SolverOptions::new(Variant::FeasibleNs, StepMode::Theory);
    o.gamma = 0.05;
    o.sigma_min = 0.5;
    assert!(config_error(&o, 4).contains("gamma >= sigma_min / 4"));

    let mut o = SolverOptions::new(Variant::InfeasibleNs, StepMode::Theory);
    o.alpha_dec = 0.6;
    assert!(config_error(&o, 4).contains("alpha_dec + sigma_max <= 1 - sigma_min"));
    let mut o = SolverOptions::new(Variant::InfeasibleNs, StepMode::Theory);
    o.gamma = 0.5;
    assert!(config_error(&o, 4).contains("gamma >= 2 / (sqrt((8 beta + 2)^2 + 4 / (3 sigma_min)) - 8 beta)"));
    assert!(infeasible_gamma_lower_bound(1.0, 0.1) < 0.8);

    let mut o = SolverOptions::new(Variant::FeasibleNs, StepMode::Adaptive);
    o.sigma = Some(0.9);
    assert!(config_error(&o, 4).contains("sigma_min <= sigma <= sigma_max"));
}

#[test]
fn default_options_are_valid_for_every_variant() {
    for v in [Variant::FeasibleN2, Variant::FeasibleNs, Variant::InfeasibleNs] {
        for mode in [StepMode::Theory, StepMode::Adaptive] {
            for n in [1, 4, 25, 100] {
                SolverOptions::new(v, mode).validate(n).unwrap();
            }
        }
    }
}

#[test]
fn start_outside_neighbourhood_is_refused() {
    let (g, mut s) = centered(4, 2);
    s.x[0] *= 3.0;
    let o = SolverOptions::new(Variant::FeasibleN2, StepMode::Theory);
    assert!(matches!(run(&g.problem, &s, &o), Err(CoreError::StartOutsideNeighborhood(_))));
    s.x[0] = -1.0;
    assert!(matches!(run(&g.problem, &s, &o), Err(CoreError::StartOutsideNeighborhood(_))));
}

#[test]
fn two_norm_theory_run_meets_its_rate() {
    for n in [4, 9] {
        let (g, s) = centered(n, 3);
        let mut o = SolverOptions::new(Variant::FeasibleN2, StepMode::Theory);
        o.epsilon = 1e-2;
        let out = run(&g.problem, &s, &o).unwrap();
        assert_eq!(out.status, Status::Converged);
        assert!(out.mu <= 1e-2 * out.mu0);
        let rate = 1.0 - 0.012 / n as f64;
        for r in &out.trace {
            assert!(r.prox.n2 <= 0.4);
            if r.step_type == StepType::Newton {
                assert!(r.mu_after / r.mu_before <= rate);
            }
        }
        let cap = ((100f64).ln() * n as f64 / 0.012 * 1.05).ceil() as usize;
        assert!(out.iterations <= cap);
        assert!(verify_trace(&g.problem, &o, &out.trace).passed());
    }
}

#[test]
fn steps_alternate_newton_and_quasi_newton() {
    let (g, s) = centered(5, 4);
    let mut o = SolverOptions::new(Variant::FeasibleN2, StepMode::Theory);
    o.max_iters = 20;
    let out = run(&g.problem, &s, &o).unwrap();
    assert_eq!(out.status, Status::IterLimit);
    for r in &out.trace {
        let expected = if r.k % 2 == 0 { StepType::Newton } else { StepType::QuasiNewton };
        assert_eq!(r.step_type, expected);
        assert_eq!(r.ell, r.k % 2);
        assert_eq!(r.gamma1.is_some(), r.k % 2 == 1);
    }

    o.qn_steps = 2;
    let out = run(&g.problem, &s, &o).unwrap();
    let ells: Vec<usize> = out.trace.iter().map(|r| r.ell).collect();
    assert_eq!(&ells[..6], &[0, 1, 2, 0, 1, 2]);
}

#[test]
fn theory_traces_pass_every_check() {
    for (v, n) in [(Variant::FeasibleN2, 9), (Variant::FeasibleNs, 6), (Variant::InfeasibleNs, 5)] {
        let (g, s) = if v.is_feasible() { centered(n, 5) } else { solved(n, 5) };
        let mut o = SolverOptions::new(v, StepMode::Theory);
        o.max_iters = 300;
        o.trace = TraceDetail::Full;
        let out = run(&g.problem, &s, &o).unwrap();
        assert_eq!(out.status, Status::IterLimit, "{v:?}");
        let rep = verify_trace(&g.problem, &o, &out.trace);
        assert!(rep.passed(), "{v:?}: {:?}", rep.failures.first());
        assert!(rep.evaluated.contains_key("gamma1_bound"));
    }
}

#[test]
fn adaptive_runs_converge_and_verify() {
    for v in [Variant::FeasibleN2, Variant::FeasibleNs] {
        for n in [4, 12] {
            let (g, s) = centered(n, 6);
            let mut o = SolverOptions::new(v, StepMode::Adaptive);
            o.trace = TraceDetail::Full;
            let out = run(&g.problem, &s, &o).unwrap();
            assert_eq!(out.status, Status::Converged, "{v:?} n={n}");
            let rep = verify_trace(&g.problem, &o, &out.trace);
            assert!(rep.passed(), "{v:?} n={n}: {:?}", rep.failures.first());
        }
    }
}

#[test]
fn infeasible_adaptive_run_finds_the_planted_optimum() {
    for n in [5, 10, 20] {
        let (g, s) = solved(n, 7);
        let mut o = SolverOptions::new(Variant::InfeasibleNs, StepMode::Adaptive);
        o.epsilon = 1e-6;
        o.trace = TraceDetail::Full;
        let out = run(&g.problem, &s, &o).unwrap();
        assert_eq!(out.status, Status::Converged);
        assert!(out.residual_norm <= 1e-6 * (1.0 + out.r0_norm));
        let best = g.problem.objective(&g.optimal.as_ref().unwrap().x);
        let got = g.problem.objective(&out.point.x);
        assert!((got - best).abs() <= 1e-4 * best.abs().max(1.0));
        for r in &out.trace {
            let target = r.nu * out.r0_norm;
            assert!((r.residual_norm() - target).abs() <= 1e-8 * target + 1e-12 * (1.0 + out.r0_norm));
        }
        assert!(verify_trace(&g.problem, &o, &out.trace).passed());
    }
}

#[test]
fn extra_quasi_newton_steps_still_converge() {
    let (g, s) = centered(8, 8);
    let mut o = SolverOptions::new(Variant::FeasibleNs, StepMode::Adaptive);
    o.qn_steps = 3;
    let out = run(&g.problem, &s, &o).unwrap();
    assert_eq!(out.status, Status::Converged);
    assert!(out.trace.iter().any(|r| r.ell == 3));
}

#[test]
fn reaching_the_limit_and_tolerance_together_counts_as_converged() {
    let (g, s) = centered(4, 9);
    let o = SolverOptions::new(Variant::FeasibleNs, StepMode::Adaptive);
    let first = run(&g.problem, &s, &o).unwrap();
    let mut tight = o.clone();
    tight.max_iters = first.iterations;
    let again = run(&g.problem, &s, &tight).unwrap();
    assert_eq!(again.status, Status::Converged);
    assert_eq!(again.iterations, first.iterations);
    tight.max_iters = first.iterations - 1;
    assert_eq!(run(&g.problem, &s, &tight).unwrap().status, Status::IterLimit);
}

#[test]
fn trace_detail_controls_what_is_kept() {
    let (g, s) = centered(4, 10);
    let mut o = SolverOptions::new(Variant::FeasibleN2, StepMode::Adaptive);
    o.trace = TraceDetail::Off;
    let out = run(&g.problem, &s, &o).unwrap();
    assert!(out.trace.is_empty() && out.status == Status::Converged);
    o.trace = TraceDetail::Summary;
    let out = run(&g.problem, &s, &o).unwrap();
    assert!(out.trace.iter().all(|r| r.detail.is_none()));
    assert_eq!(out.trace.len(), out.iterations);
}

#[test]
fn nearly_dependent_rows_end_in_a_step_failure() {
    let a = DMatrix::from_row_slice(2, 4, &[1.0, 2.0, -1.0, 0.5, 1.0, 2.0, -1.0, 0.5 + 1e-9]);
    let x = DVector::from_element(4, 1.0);
    let b = &a * &x;
    let p = Problem::new(a, b, DVector::from_element(4, 1.0)).unwrap();
    let s = IteratePoint::new(x, DVector::zeros(2), DVector::from_element(4, 1.0)).unwrap();
    let out = run(&p, &s, &SolverOptions::new(Variant::FeasibleN2, StepMode::Adaptive)).unwrap();
    assert_eq!(out.status, Status::StepFailure);
    assert!(out.failure.unwrap().contains("Newton direction failed"));
}

#[test]
fn empty_trace_verifies_trivially() {
    let (g, _) = centered(4, 1);
    let o = SolverOptions::new(Variant::FeasibleN2, StepMode::Theory);
    let rep = verify_trace(&g.problem, &o, &[]);
    assert!(rep.passed() && rep.evaluated.is_empty());
}
