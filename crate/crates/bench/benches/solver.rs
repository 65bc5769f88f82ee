use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qnipm::{
    factorize, newton_rhs, qn_direction, random_secant_history, run, QuasiNewtonState, SolverOptions, StepMode,
    TraceDetail, Variant,
};
use qnipm_bench::centered_fixture;
use std::hint::black_box;

fn factorization(c: &mut Criterion) {
    let mut group = c.benchmark_group("factorize");
    for n in [10usize, 40, 160] {
        let (g, start) = centered_fixture(n, 1);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| factorize(black_box(&g.problem), black_box(&start)).unwrap())
        });
    }
    group.finish();
}

fn newton_versus_quasi_newton(c: &mut Criterion) {
    let mut group = c.benchmark_group("direction");
    for n in [10usize, 40, 160] {
        let (g, start) = centered_fixture(n, 2);
        let v = newton_rhs(&g.problem, &start, 0.5).unwrap();
        group.bench_with_input(BenchmarkId::new("newton", n), &n, |b, _| {
            b.iter(|| factorize(&g.problem, &start).unwrap().solve(&g.problem, black_box(&v)).unwrap())
        });

        let h = random_secant_history(n, n / 2, 2, 3).unwrap();
        let mut state = QuasiNewtonState::new(factorize(&h.problem, &h.anchor).unwrap());
        for p in &h.pairs {
            state.push(p.clone());
        }
        let v = newton_rhs(&h.problem, h.points.last().unwrap(), 0.5).unwrap();
        group.bench_with_input(BenchmarkId::new("quasi_newton", n), &n, |b, _| {
            b.iter(|| qn_direction(&h.problem, &state, black_box(&v)).unwrap())
        });
    }
    group.finish();
}

fn short_runs(c: &mut Criterion) {
    let mut group = c.benchmark_group("run_100_steps");
    for n in [10usize, 40] {
        let (g, start) = centered_fixture(n, 4);
        for (name, qn_steps) in [("newton_every_other", 1usize), ("newton_every_fourth", 3)] {
            let mut o = SolverOptions::new(Variant::FeasibleN2, StepMode::Adaptive);
            o.max_iters = 100;
            o.epsilon = 1e-300;
            o.qn_steps = qn_steps;
            o.trace = TraceDetail::Off;
            group.bench_with_input(BenchmarkId::new(name, n), &n, |b, _| {
                b.iter(|| run(&g.problem, &start, black_box(&o)).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, factorization, newton_versus_quasi_newton, short_runs);
criterion_main!(benches);
