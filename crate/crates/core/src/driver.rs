//! The interior point loop: Newton steps alternating with quasi-Newton steps.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;

use crate::broyden::{qn_direction, record_step, QuasiNewtonState};
use crate::error::{CoreError, Result};
use crate::kkt::factorize;
use crate::lp::{stack, Direction, IteratePoint, Problem};
use crate::neighborhood::{Membership, Neighborhood, Proximity, MEMBERSHIP_SLACK};

/// Adaptive backtracking gives up below this step length.
pub const MIN_ADAPTIVE_STEP: f64 = 1e-12;

/// Relative tolerance of the inline duality-measure prediction check.
pub const MU_PREDICTION_TOL: f64 = 1e-10;

const TWO_SQRT2: f64 = std::f64::consts::SQRT_2 * 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    FeasibleN2,
    FeasibleNs,
    InfeasibleNs,
}

impl Variant {
    pub fn is_feasible(self) -> bool {
        !matches!(self, Variant::InfeasibleNs)
    }

    pub fn cli_name(self) -> &'static str {
        match self {
            Variant::FeasibleN2 => "n2",
            Variant::FeasibleNs => "ns",
            Variant::InfeasibleNs => "ns-inf",
        }
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "n2" => Ok(Variant::FeasibleN2),
            "ns" => Ok(Variant::FeasibleNs),
            "ns-inf" => Ok(Variant::InfeasibleNs),
            _ => Err(format!("unknown variant '{s}' (expected n2, ns or ns-inf)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StepMode {
    /// Fixed step lengths from the convergence analysis.
    Theory,
    /// Backtracking from a full step until the neighbourhood conditions hold.
    Adaptive,
}

impl FromStr for StepMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "theory" => Ok(StepMode::Theory),
            "adaptive" => Ok(StepMode::Adaptive),
            _ => Err(format!("unknown mode '{s}' (expected theory or adaptive)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StepType {
    Newton,
    QuasiNewton,
}

impl StepType {
    pub fn code(self) -> &'static str {
        match self {
            StepType::Newton => "N",
            StepType::QuasiNewton => "Q",
        }
    }
}

/// How much of each step is kept in memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceDetail {
    Off,
    Summary,
    /// Also keeps the pre-step point and the direction.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    IterLimit,
    StepFailure,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Status::Converged => "Converged",
            Status::IterLimit => "IterLimit",
            Status::StepFailure => "StepFailure",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub variant: Variant,
    pub mode: StepMode,
    pub theta: f64,
    pub gamma: f64,
    pub beta: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// Centering parameter for the symmetric-neighbourhood variants; defaults to the midpoint.
    pub sigma: Option<f64>,
    pub alpha_dec: f64,
    pub epsilon: f64,
    pub max_iters: usize,
    /// Quasi-Newton steps after each Newton step. Values above 1 carry no guarantees.
    pub qn_steps: usize,
    pub backtrack_ratio: f64,
    pub trace: TraceDetail,
    pub refine: bool,
}

impl SolverOptions {
    pub fn new(variant: Variant, mode: StepMode) -> Self {
        let (gamma, sigma_min, sigma_max) = match variant {
            Variant::FeasibleN2 => (0.5, 0.4, 0.6),
            Variant::FeasibleNs => (0.5, 0.4, 0.6),
            Variant::InfeasibleNs => (0.8, 0.1, 0.5),
        };
        Self {
            variant,
            mode,
            theta: 0.4,
            gamma,
            beta: 1.0,
            sigma_min,
            sigma_max,
            sigma: None,
            alpha_dec: 0.1,
            epsilon: 1e-8,
            max_iters: 100_000,
            qn_steps: 1,
            backtrack_ratio: 0.5,
            trace: TraceDetail::Summary,
            refine: false,
        }
    }

    /// Centering parameter used for every step of a problem with `n` variables.
    pub fn sigma_for(&self, n: usize) -> f64 {
        match self.variant {
            Variant::FeasibleN2 => 1.0 - 0.4 / (n as f64).sqrt(),
            _ => self.sigma.unwrap_or(0.5 * (self.sigma_min + self.sigma_max)),
        }
    }

    /// Neighbourhood of the variant; `init_ratio` is `|r0| / mu0`.
    pub fn neighborhood(&self, init_ratio: f64) -> Neighborhood {
        match self.variant {
            Variant::FeasibleN2 => Neighborhood::N2 { theta: self.theta },
            Variant::FeasibleNs => Neighborhood::Ns { gamma: self.gamma },
            Variant::InfeasibleNs => Neighborhood::NsInf { gamma: self.gamma, beta: self.beta, init_ratio },
        }
    }

    /// Checks parameter ranges and the step-size conditions of the variant.
    pub fn validate(&self, n: usize) -> Result<()> {
        let bad = |msg: String| Err(CoreError::Config(msg));
        if n == 0 {
            return bad("problem has no variables".into());
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad(format!("condition 0 < epsilon < 1 violated: epsilon = {}", self.epsilon));
        }
        if !(self.backtrack_ratio > 0.0 && self.backtrack_ratio < 1.0) {
            return bad(format!("condition 0 < backtrack_ratio < 1 violated: {}", self.backtrack_ratio));
        }
        match self.variant {
            Variant::FeasibleN2 => {
                let theta = self.theta;
                if !(theta > 0.0 && theta < 16.0 / 25.0) {
                    return bad(format!("condition theta in (0, 16/25) violated: theta = {theta}"));
                }
                let sigma = self.sigma_for(n);
                let lhs = (theta * theta + n as f64 * (1.0 - sigma).powi(2)) / (TWO_SQRT2 * (1.0 - theta));
                let rhs = theta * sigma;
                if lhs > rhs {
                    return bad(format!(
                        "condition (theta^2 + n (1 - sigma)^2) / (2^(3/2) (1 - theta)) <= theta sigma violated \
                         for n = {n}, sigma = {sigma}: {lhs:.6e} > {rhs:.6e}"
                    ));
                }
            }
            Variant::FeasibleNs | Variant::InfeasibleNs => {
                self.validate_sigma_range()?;
                if !(self.gamma > 0.0 && self.gamma < 1.0) {
                    return bad(format!("condition 0 < gamma < 1 violated: gamma = {}", self.gamma));
                }
                if self.variant == Variant::FeasibleNs {
                    if self.gamma < self.sigma_min / 4.0 {
                        return bad(format!(
                            "condition gamma >= sigma_min / 4 violated: gamma = {}, sigma_min / 4 = {}",
                            self.gamma,
                            self.sigma_min / 4.0
                        ));
                    }
                } else {
                    if !(self.beta >= 1.0) || !self.beta.is_finite() {
                        return bad(format!("condition beta >= 1 violated: beta = {}", self.beta));
                    }
                    if !(self.alpha_dec > 0.0 && self.alpha_dec < 1.0) {
                        return bad(format!("condition 0 < alpha_dec < 1 violated: alpha_dec = {}", self.alpha_dec));
                    }
                    if self.alpha_dec + self.sigma_max > 1.0 - self.sigma_min {
                        return bad(format!(
                            "condition alpha_dec + sigma_max <= 1 - sigma_min violated: {} + {} > 1 - {}",
                            self.alpha_dec, self.sigma_max, self.sigma_min
                        ));
                    }
                    let bound = infeasible_gamma_lower_bound(self.beta, self.sigma_min);
                    if self.gamma < bound {
                        return bad(format!(
                            "condition gamma >= 2 / (sqrt((8 beta + 2)^2 + 4 / (3 sigma_min)) - 8 beta) violated: \
                             gamma = {}, bound = {bound:.6}",
                            self.gamma
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    fn validate_sigma_range(&self) -> Result<()> {
        let (lo, hi) = (self.sigma_min, self.sigma_max);
        if !(lo > 0.0 && lo <= hi && hi < 1.0) {
            return Err(CoreError::Config(format!(
                "condition 0 < sigma_min <= sigma_max < 1 violated: sigma_min = {lo}, sigma_max = {hi}"
            )));
        }
        if let Some(s) = self.sigma {
            if !(s >= lo && s <= hi) {
                return Err(CoreError::Config(format!(
                    "condition sigma_min <= sigma <= sigma_max violated: sigma = {s}"
                )));
            }
        }
        Ok(())
    }
}

/// Smallest `gamma` accepted by the infeasible variant.
pub fn infeasible_gamma_lower_bound(beta: f64, sigma_min: f64) -> f64 {
    2.0 / (-8.0 * beta + ((8.0 * beta + 2.0).powi(2) + 4.0 / (3.0 * sigma_min)).sqrt())
}

/// Constants of the convergence analysis and the fixed step lengths they imply.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TheoryConstants {
    N2 {
        n: usize,
        theta: f64,
        sigma: f64,
        alpha: f64,
    },
    Ns {
        n: usize,
        gamma: f64,
        sigma: f64,
        l: f64,
        alpha_newton: f64,
    },
    Inf {
        n: usize,
        gamma: f64,
        beta: f64,
        sigma_min: f64,
        sigma_max: f64,
        alpha_dec: f64,
        sigma: f64,
        omega: f64,
        c3: f64,
        c4: f64,
        c5: f64,
        c6: f64,
        kappa: f64,
        delta_bar: f64,
        alpha_newton: f64,
    },
}

impl TheoryConstants {
    /// `r0_norm` and `mu0` describe the starting point; only the infeasible variant uses them.
    pub fn new(options: &SolverOptions, n: usize, r0_norm: f64, mu0: f64) -> Self {
        let nf = n as f64;
        let sigma = options.sigma_for(n);
        match options.variant {
            Variant::FeasibleN2 => {
                let alpha = ((1.0 - sigma) / (4.0 * sigma)).min(sigma * (1.0 - sigma) / (10.0 * (1.0 - sigma) + 4.0));
                TheoryConstants::N2 { n, theta: options.theta, sigma, alpha }
            }
            Variant::FeasibleNs => {
                let g = options.gamma;
                let l = ns_l_constant(g, options.sigma_min, options.sigma_max);
                let alpha_newton =
                    (TWO_SQRT2 * g * ((1.0 - g) / (1.0 + g)) * sigma / nf).min((1.0 - g) * l / (2.0 * nf.powi(3)));
                TheoryConstants::Ns { n, gamma: g, sigma, l, alpha_newton }
            }
            Variant::InfeasibleNs => {
                let (g, beta, smin, smax, adec) =
                    (options.gamma, options.beta, options.sigma_min, options.sigma_max, options.alpha_dec);
                let omega = 9.0 * beta / g.sqrt();
                let ratio = r0_norm * beta * g / mu0;
                let c3 = 2.0 / (g * adec) * (ratio * ratio + 1.0).sqrt();
                let c6 = (smax + 1.0 / g + 8.0 * beta) * (1.0 + 2.0 / c3) / g.sqrt();
                let kappa = 2.0 * omega * omega + c6 * c6;
                let c4 = (smin / c3) / (smin / c3 + kappa);
                let c5 = (smin / c3) / (smin / c3 + (1.0 + g) / (1.0 - g) * kappa);
                let delta_bar = smin * (1.0 - g) / (omega * omega * (1.0 + g));
                let alpha_newton =
                    1.0_f64.min(1.0 / ((1.0 + c3) * omega * omega)).min(c5 / nf.powi(5)).min(delta_bar / (nf * nf));
                TheoryConstants::Inf {
                    n,
                    gamma: g,
                    beta,
                    sigma_min: smin,
                    sigma_max: smax,
                    alpha_dec: adec,
                    sigma,
                    omega,
                    c3,
                    c4,
                    c5,
                    c6,
                    kappa,
                    delta_bar,
                    alpha_newton,
                }
            }
        }
    }

    /// Fixed `(newton, quasi_newton)` step lengths.
    pub fn step_sizes(&self) -> (f64, f64) {
        match *self {
            TheoryConstants::N2 { alpha, .. } => (alpha, alpha),
            TheoryConstants::Ns { alpha_newton, .. } => (alpha_newton, 2.0 * alpha_newton),
            TheoryConstants::Inf { alpha_newton, c3, .. } => (alpha_newton, alpha_newton / c3),
        }
    }

    pub fn sigma(&self) -> f64 {
        match *self {
            TheoryConstants::N2 { sigma, .. }
            | TheoryConstants::Ns { sigma, .. }
            | TheoryConstants::Inf { sigma, .. } => sigma,
        }
    }
}

/// Scale `l` of the symmetric-neighbourhood step bound.
pub fn ns_l_constant(gamma: f64, sigma_min: f64, sigma_max: f64) -> f64 {
    let a = 2.0 + 1.0 / (gamma * (1.0 - sigma_max));
    let b = (1.0 + gamma) / gamma;
    0.5 * sigma_min / ((3.0 / (TWO_SQRT2 * gamma)) * a * a * b * b)
}

/// Fixed step lengths for a validated configuration.
pub fn step_size_plan(options: &SolverOptions, n: usize, r0_norm: f64, mu0: f64) -> Result<(f64, f64)> {
    options.validate(n)?;
    Ok(TheoryConstants::new(options, n, r0_norm, mu0).step_sizes())
}

/// Pre-step point and direction, kept when [`TraceDetail::Full`] is requested.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDetail {
    pub point: IteratePoint,
    pub direction: Direction,
}

/// One row of the solver trace. Diagnostics describe the iterate before the step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub k: usize,
    pub step_type: StepType,
    /// Secant pairs used: 0 for Newton steps.
    pub ell: usize,
    pub alpha: f64,
    pub sigma: f64,
    pub mu_before: f64,
    pub mu_after: f64,
    pub prox: Proximity,
    pub norm_rb: f64,
    pub norm_rc: f64,
    /// `prod_{i<k} (1 - alpha_i)`.
    pub nu: f64,
    pub gamma1: Option<f64>,
    pub dx_dot_dz: f64,
    pub dx_norm: Option<f64>,
    pub dz_norm: Option<f64>,
    /// `|y|` of the newest secant pair, quasi-Newton rows only.
    pub secant_norm: Option<f64>,
    /// `|v|` of the right-hand side, quasi-Newton rows only.
    pub rhs_norm: Option<f64>,
    pub detail: Option<StepDetail>,
}

impl StepRecord {
    pub fn residual_norm(&self) -> f64 {
        self.norm_rb.hypot(self.norm_rc)
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub status: Status,
    pub iterations: usize,
    pub point: IteratePoint,
    pub mu: f64,
    pub mu0: f64,
    pub residual_norm: f64,
    pub r0_norm: f64,
    pub trace: Vec<StepRecord>,
    pub failure: Option<String>,
    pub constants: TheoryConstants,
}

fn converged(mem: &Membership, mu0: f64, r0: f64, eps: f64) -> bool {
    mem.prox.mu <= eps * mu0 && mem.residuals.norm_r() <= eps * (1.0 + r0)
}

fn le_slack(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs + MEMBERSHIP_SLACK * lhs.abs().max(rhs.abs())
}

/// Runs the method from `start`, which must lie in the variant's neighbourhood.
pub fn run(problem: &Problem, start: &IteratePoint, options: &SolverOptions) -> Result<SolveOutcome> {
    let n = problem.n();
    options.validate(n)?;
    if !start.is_interior() {
        return Err(CoreError::StartOutsideNeighborhood("start point is not strictly positive".into()));
    }
    let r0 = crate::lp::evaluate_f(problem, start)?;
    let r0_norm = r0.norm_r();
    let mu0 = crate::lp::mu(start)?;
    let nbhd = options.neighborhood(r0_norm / mu0);
    let mut mem = nbhd.check(problem, start)?;
    if let Some(v) = &mem.violation {
        return Err(CoreError::StartOutsideNeighborhood(v.clone()));
    }
    let constants = TheoryConstants::new(options, n, r0_norm, mu0);
    let (alpha_newton, alpha_qn) = constants.step_sizes();
    let sigma = constants.sigma();

    let mut point = start.clone();
    let mut nu = 1.0;
    let mut state: Option<QuasiNewtonState> = None;
    // quasi-Newton steps taken since the last factorization
    let mut qn_taken = 0usize;
    let mut trace = Vec::new();
    let mut failure = None;
    let mut iterations = options.max_iters;
    let eps = options.epsilon;

    let outcome_status = 'outer: {
        for k in 0..options.max_iters {
            if converged(&mem, mu0, r0_norm, eps) {
                iterations = k;
                break 'outer Status::Converged;
            }
            let mu = mem.prox.mu;
            let v = newton_rhs_from(&mem, sigma);
            let newton = state.is_none() || qn_taken >= options.qn_steps;
            let mut gamma1 = None;
            let mut secant_norm = None;
            let direction = if newton {
                let dir = factorize(problem, &point).map(|f| f.with_refinement(options.refine)).and_then(|f| {
                    let d = f.solve(problem, &v)?;
                    state = Some(QuasiNewtonState::new(f));
                    Ok(d)
                });
                match dir {
                    Ok(d) => d,
                    Err(e) => {
                        failure = Some(format!("step {k}: Newton direction failed: {e}"));
                        iterations = k;
                        break 'outer Status::StepFailure;
                    }
                }
            } else {
                let st = state.as_ref().expect("quasi-Newton step needs a stored factorization");
                match qn_direction(problem, st, &v) {
                    Ok(q) => {
                        gamma1 = q.gamma.first().copied();
                        secant_norm = st.pairs().last().map(|p| p.rho.sqrt());
                        q.direction
                    }
                    Err(e) => {
                        failure = Some(format!("step {k}: quasi-Newton direction failed: {e}"));
                        iterations = k;
                        break 'outer Status::StepFailure;
                    }
                }
            };
            if !direction.is_finite() {
                failure = Some(format!("step {k}: direction is not finite"));
                iterations = k;
                break 'outer Status::StepFailure;
            }

            let step = match options.mode {
                StepMode::Theory => {
                    let alpha = if newton { alpha_newton } else { alpha_qn };
                    let next = point.step(alpha, &direction);
                    let m = nbhd.check(problem, &next)?;
                    match accept(options, &m, mu, alpha) {
                        Ok(()) => Ok((alpha, next, m)),
                        Err(why) => Err(format!("step {k}: {why} after a fixed step of length {alpha:e}")),
                    }
                }
                StepMode::Adaptive => {
                    backtrack(problem, options, &nbhd, &point, &direction, mu).map_err(|why| format!("step {k}: {why}"))
                }
            };
            let (alpha, next, next_mem) = match step {
                Ok(s) => s,
                Err(why) => {
                    failure = Some(why);
                    iterations = k;
                    break 'outer Status::StepFailure;
                }
            };
            let mu_after = next_mem.prox.mu;
            if options.variant.is_feasible() {
                let predicted = (1.0 - alpha * (1.0 - sigma)) * mu;
                if (mu_after - predicted).abs() > MU_PREDICTION_TOL * mu_after.abs().max(predicted.abs()) {
                    failure = Some(format!(
                        "step {k}: duality measure {mu_after:e} differs from the predicted {predicted:e}"
                    ));
                    iterations = k;
                    break 'outer Status::StepFailure;
                }
            }

            let ell = state.as_ref().map_or(0, |s| if newton { 0 } else { s.ell() });
            if options.trace != TraceDetail::Off {
                trace.push(StepRecord {
                    k,
                    step_type: if newton { StepType::Newton } else { StepType::QuasiNewton },
                    ell,
                    alpha,
                    sigma,
                    mu_before: mu,
                    mu_after,
                    prox: mem.prox,
                    norm_rb: mem.residuals.norm_rb(),
                    norm_rc: mem.residuals.norm_rc(),
                    nu,
                    gamma1,
                    dx_dot_dz: direction.dx_dot_dz(),
                    dx_norm: Some(direction.dx.norm()),
                    dz_norm: Some(direction.dz.norm()),
                    secant_norm,
                    rhs_norm: if newton { None } else { Some(v.norm()) },
                    detail: (options.trace == TraceDetail::Full)
                        .then(|| StepDetail { point: point.clone(), direction: direction.clone() }),
                });
            }

            qn_taken = if newton { 0 } else { qn_taken + 1 };
            if let Some(st) = state.as_mut() {
                if qn_taken < options.qn_steps {
                    match record_step(problem, &point, &next, &direction, alpha) {
                        Ok(pair) => st.push(pair),
                        Err(CoreError::DegenerateSecant(_)) => state = None,
                        Err(e) => {
                            failure = Some(format!("step {k}: {e}"));
                            iterations = k;
                            break 'outer Status::StepFailure;
                        }
                    }
                }
            }
            nu *= 1.0 - alpha;
            point = next;
            mem = next_mem;
        }
        if converged(&mem, mu0, r0_norm, eps) {
            Status::Converged
        } else {
            Status::IterLimit
        }
    };

    Ok(SolveOutcome {
        status: outcome_status,
        iterations,
        mu: mem.prox.mu,
        residual_norm: mem.residuals.norm_r(),
        point,
        mu0,
        r0_norm,
        trace,
        failure,
        constants,
    })
}

/// Conditions a trial point must meet besides neighbourhood membership.
fn accept(options: &SolverOptions, m: &Membership, mu: f64, alpha: f64) -> std::result::Result<(), String> {
    if let Some(v) = &m.violation {
        return Err(format!("neighbourhood violated ({v})"));
    }
    if options.variant == Variant::InfeasibleNs {
        let bound = (1.0 - options.alpha_dec * alpha) * mu;
        if !le_slack(m.prox.mu, bound) {
            return Err(format!("insufficient decrease: mu {:e} > {bound:e}", m.prox.mu));
        }
    }
    Ok(())
}

fn backtrack(
    problem: &Problem,
    options: &SolverOptions,
    nbhd: &Neighborhood,
    point: &IteratePoint,
    direction: &Direction,
    mu: f64,
) -> std::result::Result<(f64, IteratePoint, Membership), String> {
    let mut alpha = 1.0;
    loop {
        let next = point.step(alpha, direction);
        let m = nbhd.check(problem, &next).map_err(|e| e.to_string())?;
        let decreases = m.prox.mu < mu;
        if decreases && accept(options, &m, mu, alpha).is_ok() {
            return Ok((alpha, next, m));
        }
        alpha *= options.backtrack_ratio;
        if alpha < MIN_ADAPTIVE_STEP {
            return Err(format!("backtracking fell below {MIN_ADAPTIVE_STEP:e} without an acceptable point"));
        }
    }
}

/// `(1 - alpha (1 - sigma)) mu`, the duality measure after a step from a feasible point.
pub fn predicted_mu(mu: f64, alpha: f64, sigma: f64) -> f64 {
    (1.0 - alpha * (1.0 - sigma)) * mu
}

/// Newton right-hand side built from an already evaluated membership test.
pub fn newton_rhs_from(mem: &Membership, sigma: f64) -> DVector<f64> {
    let mu = mem.prox.mu;
    stack(&(-&mem.residuals.rc), &(-&mem.residuals.rb), &mem.residuals.xz.map(|p| sigma * mu - p))
}
