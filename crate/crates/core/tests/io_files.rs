use proptest::prelude::*;
use qnipm::io::{attach_full, full_sidecar_path, read_trace, write_trace, FullTrace, ProblemFile, TRACE_HEADER};
use qnipm::*;

fn theory_run(v: Variant, n: usize) -> (Problem, SolverOptions, Vec<StepRecord>) {
    let m = n / 2;
    let (problem, start) = if v.is_feasible() {
        let g = generate_centered(n, m, 1.0, 31).unwrap();
        let s = g.central_start.clone().unwrap();
        (g.problem, s)
    } else {
        let g = generate_solved(n, m, 31).unwrap();
        let s = cold_start(n, m, g.xi.unwrap());
        (g.problem, s)
    };
    let mut o = SolverOptions::new(v, StepMode::Theory);
    o.max_iters = 40;
    o.trace = TraceDetail::Full;
    let trace = run(&problem, &start, &o).unwrap().trace;
    (problem, o, trace)
}

fn table_bytes(records: &[StepRecord]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_trace(&mut buf, records).unwrap();
    buf
}

#[test]
fn empty_trace_is_a_bare_header() {
    let bytes = table_bytes(&[]);
    assert_eq!(String::from_utf8(bytes.clone()).unwrap().trim_end(), TRACE_HEADER.join(","));
    assert!(read_trace(&bytes[..]).unwrap().is_empty());
}

#[test]
fn table_round_trip_keeps_every_column() {
    let (_, _, trace) = theory_run(Variant::FeasibleN2, 6);
    let bytes = table_bytes(&trace);
    let back = read_trace(&bytes[..]).unwrap();
    assert_eq!(back.len(), trace.len());
    for (a, b) in trace.iter().zip(&back) {
        assert_eq!((a.k, a.step_type, a.ell), (b.k, b.step_type, b.ell));
        assert_eq!(
            [
                a.alpha,
                a.sigma,
                a.mu_before,
                a.mu_after,
                a.prox.n2,
                a.prox.ns_min,
                a.prox.ns_max,
                a.norm_rb,
                a.norm_rc,
                a.nu,
                a.dx_dot_dz
            ],
            [
                b.alpha,
                b.sigma,
                b.mu_before,
                b.mu_after,
                b.prox.n2,
                b.prox.ns_min,
                b.prox.ns_max,
                b.norm_rb,
                b.norm_rc,
                b.nu,
                b.dx_dot_dz
            ]
        );
        assert_eq!(a.gamma1, b.gamma1);
    }
    assert_eq!(table_bytes(&back), bytes);
}

#[test]
fn sidecar_restores_what_the_checks_need() {
    for v in [Variant::FeasibleN2, Variant::FeasibleNs, Variant::InfeasibleNs] {
        let (problem, o, trace) = theory_run(v, 6);
        let dir = tempfile::tempdir().unwrap();
        let table = dir.path().join("t.csv");
        std::fs::write(&table, table_bytes(&trace)).unwrap();
        let full = FullTrace::from_records(problem.n(), problem.m(), &trace).unwrap();
        full.write(&full_sidecar_path(&table)).unwrap();

        let mut back = read_trace(std::fs::File::open(&table).unwrap()).unwrap();
        let sidecar = FullTrace::read(&full_sidecar_path(&table)).unwrap();
        assert_eq!(sidecar, full);
        attach_full(&problem, &mut back, &sidecar).unwrap();

        let direct = verify_trace(&problem, &o, &trace);
        let restored = verify_trace(&problem, &o, &back);
        assert!(direct.passed() && restored.passed(), "{v:?}: {:?}", restored.failures.first());
        assert_eq!(direct.evaluated, restored.evaluated, "{v:?}");
    }
}

#[test]
fn sidecar_mismatches_are_reported() {
    let (problem, _, trace) = theory_run(Variant::FeasibleN2, 6);
    let full = FullTrace::from_records(problem.n(), problem.m(), &trace).unwrap();
    let table = read_trace(&table_bytes(&trace)[..]).unwrap();

    let mut short = table.clone();
    short.pop();
    assert!(matches!(attach_full(&problem, &mut short, &full), Err(CoreError::TraceMismatch(_))));

    let other = generate_centered(8, 4, 1.0, 1).unwrap().problem;
    assert!(matches!(attach_full(&other, &mut table.clone(), &full), Err(CoreError::TraceMismatch(_))));

    let mut shifted = full.clone();
    shifted.steps[2].k = 9;
    assert!(matches!(attach_full(&problem, &mut table.clone(), &shifted), Err(CoreError::TraceMismatch(_))));

    let mut ragged = full;
    ragged.steps[1].dx.pop();
    assert!(matches!(attach_full(&problem, &mut table.clone(), &ragged), Err(CoreError::TraceMismatch(_))));
}

#[test]
fn malformed_tables_are_rejected() {
    assert!(matches!(read_trace(&b"k,alpha\n0,1\n"[..]), Err(CoreError::Parse(_))));
    let mut bytes = table_bytes(&theory_run(Variant::FeasibleN2, 4).2[..2]);
    let text = String::from_utf8(bytes.clone()).unwrap().replacen(",N,", ",X,", 1);
    assert!(matches!(read_trace(text.as_bytes()), Err(CoreError::Parse(_))));
    bytes.extend_from_slice(b"2,N,abc,0,0,0,0,0,0,0,0,0,,0\n");
    assert!(matches!(read_trace(&bytes[..]), Err(CoreError::Parse(_))));
}

#[test]
fn generated_instance_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for g in [generate_centered(5, 2, 0.7, 3).unwrap(), generate_solved(7, 3, 4).unwrap()] {
        let path = dir.path().join("p.json");
        ProblemFile::from_instance(&g).write(&path).unwrap();
        let back = ProblemFile::read(&path).unwrap();
        assert_eq!(back.to_problem().unwrap(), g.problem);
        assert_eq!(back.central_start().unwrap(), g.central_start);
        assert_eq!(back.optimal().unwrap(), g.optimal);
        assert_eq!(back.xi, g.xi);
        assert_eq!(back.seed, Some(g.seed));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn any_finite_problem_round_trips_bitwise(
        seed in any::<u64>(),
        n in 2usize..8,
        scale in prop::sample::select(vec![1e-300, 1e-7, 1.0, 3.3e5, 1e300]),
    ) {
        let m = 1 + (seed as usize) % (n - 1);
        let g = generate_solved(n, m, seed).unwrap();
        let p = Problem::new(g.problem.a() * scale, g.problem.b() * scale, g.problem.c() / scale).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        ProblemFile::from_problem(&p).write(&path).unwrap();
        let back = ProblemFile::read(&path).unwrap().to_problem().unwrap();
        prop_assert_eq!(back, p);
    }

    #[test]
    fn table_floats_round_trip_bitwise(vals in prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 12)) {
        let (_, _, trace) = theory_run(Variant::FeasibleN2, 4);
        let mut r = trace[1].clone();
        r.alpha = vals[0];
        r.sigma = vals[1];
        r.mu_before = vals[2];
        r.mu_after = vals[3];
        r.prox.n2 = vals[4];
        r.prox.ns_min = vals[5];
        r.prox.ns_max = vals[6];
        r.norm_rb = vals[7];
        r.norm_rc = vals[8];
        r.nu = vals[9];
        r.gamma1 = Some(vals[10]);
        r.dx_dot_dz = vals[11];
        let back = read_trace(&table_bytes(std::slice::from_ref(&r))[..]).unwrap();
        let b = &back[0];
        prop_assert_eq!(
            [r.alpha, r.sigma, r.mu_before, r.mu_after, r.prox.n2, r.prox.ns_min, r.prox.ns_max, r.norm_rb, r.norm_rc, r.nu, r.dx_dot_dz].map(f64::to_bits),
            [b.alpha, b.sigma, b.mu_before, b.mu_after, b.prox.n2, b.prox.ns_min, b.prox.ns_max, b.norm_rb, b.norm_rc, b.nu, b.dx_dot_dz].map(f64::to_bits)
        );
        prop_assert_eq!(r.gamma1.map(f64::to_bits), b.gamma1.map(f64::to_bits));
    }
}
