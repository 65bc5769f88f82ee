//! Seeded random instances with a known central point or a known optimum.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::broyden::{record_step, SecantPair};
use crate::error::{CoreError, Result};
use crate::lp::{Direction, IteratePoint, Problem};

const MAX_RESAMPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstanceKind {
    /// Feasible instance whose start lies exactly on the central path.
    Centered,
    /// Instance built around a known primal-dual optimum.
    Solved,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedInstance {
    pub problem: Problem,
    pub kind: InstanceKind,
    pub seed: u64,
    pub central_start: Option<IteratePoint>,
    pub optimal: Option<IteratePoint>,
    /// `ceil(max(|x*|_inf, |z*|_inf))` for solved instances.
    pub xi: Option<f64>,
}

fn check_dims(n: usize, m: usize) -> Result<()> {
    if m == 0 || m >= n {
        return Err(CoreError::Config(format!("need 1 <= m < n, got m = {m}, n = {n}")));
    }
    Ok(())
}

fn uniform(rng: &mut ChaCha8Rng, len: usize, lo: f64, hi: f64) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.random_range(lo..=hi))
}

/// Draws `A` with entries in `[-1, 1]` until it has full row rank.
fn full_rank_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize) -> Result<DMatrix<f64>> {
    for _ in 0..MAX_RESAMPLES {
        let a = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..=1.0));
        if Problem::new(a.clone(), DVector::zeros(m), DVector::zeros(n)).is_ok() {
            return Ok(a);
        }
    }
    Err(CoreError::Generation(format!("no full-rank {m}x{n} matrix after {MAX_RESAMPLES} draws")))
}

/// Feasible instance with start `(x0, lambda0, z0)` satisfying `x0_i z0_i = mu0`.
pub fn generate_centered(n: usize, m: usize, mu0: f64, seed: u64) -> Result<GeneratedInstance> {
    check_dims(n, m)?;
    if !(mu0 > 0.0) || !mu0.is_finite() {
        return Err(CoreError::Config(format!("mu0 must be positive, got {mu0}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = full_rank_matrix(&mut rng, m, n)?;
    let x = uniform(&mut rng, n, 0.5, 2.0);
    let z = x.map(|v| mu0 / v);
    let lambda = uniform(&mut rng, m, -1.0, 1.0);
    let b = &a * &x;
    let c = a.tr_mul(&lambda) + &z;
    let problem = Problem::new(a, b, c)?;
    Ok(GeneratedInstance {
        problem,
        kind: InstanceKind::Centered,
        seed,
        central_start: Some(IteratePoint { x, lambda, z }),
        optimal: None,
        xi: None,
    })
}

/// Instance with a strictly complementary optimum supported on a random set of `m` columns.
pub fn generate_solved(n: usize, m: usize, seed: u64) -> Result<GeneratedInstance> {
    check_dims(n, m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = full_rank_matrix(&mut rng, m, n)?;
    let support = sample(&mut rng, n, m).into_vec();
    let mut x = DVector::zeros(n);
    let mut z = DVector::zeros(n);
    let mut in_support = vec![false; n];
    for &j in &support {
        in_support[j] = true;
    }
    for j in 0..n {
        let v = rng.random_range(0.5..=2.0);
        if in_support[j] {
            x[j] = v;
        } else {
            z[j] = v;
        }
    }
    let lambda = uniform(&mut rng, m, -1.0, 1.0);
    let b = &a * &x;
    let c = a.tr_mul(&lambda) + &z;
    let problem = Problem::new(a, b, c)?;
    let primal = problem.objective(&x);
    let dual = problem.b().dot(&lambda);
    if (primal - dual).abs() > 1e-10 * (1.0 + primal.abs()) {
        return Err(CoreError::Generation(format!("duality gap {:e} at the planted optimum", primal - dual)));
    }
    let xi = x.amax().max(z.amax()).ceil();
    Ok(GeneratedInstance {
        problem,
        kind: InstanceKind::Solved,
        seed,
        central_start: None,
        optimal: Some(IteratePoint { x, lambda, z }),
        xi: Some(xi),
    })
}

/// A centered instance with `ell` random steps taken from its central start.
#[derive(Debug, Clone)]
pub struct SecantHistory {
    pub problem: Problem,
    /// Point the first step starts from; a quasi-Newton state anchors its factorization here.
    pub anchor: IteratePoint,
    /// `points[0]` is the anchor; `points[j + 1]` follows step `j`.
    pub points: Vec<IteratePoint>,
    /// Pairs oldest first.
    pub pairs: Vec<SecantPair>,
}

/// Random directions with step lengths that keep every point strictly positive.
pub fn random_secant_history(n: usize, m: usize, ell: usize, seed: u64) -> Result<SecantHistory> {
    let g = generate_centered(n, m, 1.0, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eca_9751);
    let anchor = g.central_start.expect("centered instances carry a start");
    let mut points = vec![anchor.clone()];
    let mut pairs = Vec::with_capacity(ell);
    for _ in 0..ell {
        let prev = points.last().expect("starts with the anchor");
        let d = Direction {
            dx: uniform(&mut rng, n, -1.0, 1.0),
            dlambda: uniform(&mut rng, m, -1.0, 1.0),
            dz: uniform(&mut rng, n, -1.0, 1.0),
        };
        let mut to_boundary = f64::INFINITY;
        for (v, dv) in prev.x.iter().zip(d.dx.iter()).chain(prev.z.iter().zip(d.dz.iter())) {
            if *dv < 0.0 {
                to_boundary = to_boundary.min(-v / dv);
            }
        }
        let alpha = rng.random_range(0.1..=0.9) * to_boundary.min(1.0);
        let next = prev.step(alpha, &d);
        pairs.push(record_step(&g.problem, prev, &next, &d, alpha)?);
        points.push(next);
    }
    Ok(SecantHistory { problem: g.problem, anchor, points, pairs })
}

/// `(xi e, 0, xi e)`.
pub fn cold_start(n: usize, m: usize, xi: f64) -> IteratePoint {
    IteratePoint { x: DVector::from_element(n, xi), lambda: DVector::zeros(m), z: DVector::from_element(n, xi) }
}
