//! The adaptive regularization loop AR(p).

use thiserror::Error;

use crate::exec::Execution;
use crate::model::{build_taylor, RegularizedModel};
use crate::objective::{ObjectiveError, ObjectiveSpec};
use crate::point::Point;
use crate::precision::{factorial, PrecisionConfig, Real};
use crate::subsolver::{select_with_tol, SelectionPolicy, SubsolverError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DriverError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error("iteration {k}: {source}")]
    Subsolver { k: usize, source: SubsolverError },
    #[error("iteration {k}: {msg}")]
    Contract { k: usize, msg: String },
}

/// Termination tests beyond the always-active exact zero-gradient exit.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StopRule {
    pub grad_tol: Option<Real>,
    /// Needs a known minimizer in the objective's metadata.
    pub dist_tol: Option<Real>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArpConfig {
    pub p: usize,
    pub eta1: Real,
    pub eta2: Real,
    pub gamma1: Real,
    pub gamma2: Real,
    pub theta: Real,
    pub sigma0: Real,
    /// Optional floor on sigma; absent by default.
    pub sigma_min: Option<Real>,
    pub policy: SelectionPolicy,
    pub max_iterations: usize,
    pub stop: StopRule,
    /// Inner tolerance for component descent; defaults to a multiple of the
    /// working precision times the gradient norm.
    pub inner_tol: Option<Real>,
}

impl ArpConfig {
    /// The parameter set used in the numerical experiments: eta = 1/2,
    /// gamma1 = 1/2, gamma2 = 2, theta = 0, sigma0 = 1/2.
    pub fn standard(p: usize, policy: SelectionPolicy, prec: PrecisionConfig) -> Self {
        ArpConfig {
            p,
            eta1: prec.ratio(1, 2),
            eta2: prec.ratio(1, 2),
            gamma1: prec.ratio(1, 2),
            gamma2: prec.int(2),
            theta: prec.zero(),
            sigma0: prec.ratio(1, 2),
            sigma_min: None,
            policy,
            max_iterations: 500,
            stop: StopRule::default(),
            inner_tol: None,
        }
    }

    pub fn precision(&self) -> PrecisionConfig {
        self.sigma0.precision()
    }

    pub fn validate(&self) -> Result<(), DriverError> {
        let prec = self.precision();
        let (zero, one) = (prec.zero(), prec.one());
        let bad = |m: &str| Err(DriverError::InvalidConfig(m.to_string()));
        if self.p < 1 {
            return bad("p must be at least 1");
        }
        if !(self.eta1 > zero && self.eta1 <= self.eta2 && self.eta2 < one) {
            return bad("need 0 < eta1 <= eta2 < 1");
        }
        if !(self.gamma1 > zero && self.gamma1 <= one && self.gamma2 > one) {
            return bad("need 0 < gamma1 <= 1 < gamma2");
        }
        if self.theta.is_negative() {
            return bad("theta must be nonnegative");
        }
        if !self.sigma0.is_positive() {
            return bad("sigma0 must be positive");
        }
        if self.sigma_min.as_ref().is_some_and(|s| !s.is_positive()) {
            return bad("sigma_min must be positive when given");
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum IterationStatus {
    VerySuccessful,
    Successful,
    Unsuccessful,
}

impl IterationStatus {
    pub fn code(self) -> char {
        match self {
            IterationStatus::VerySuccessful => 'V',
            IterationStatus::Successful => 'S',
            IterationStatus::Unsuccessful => 'U',
        }
    }

    pub fn from_code(c: char) -> Option<Self> {
        match c {
            'V' => Some(IterationStatus::VerySuccessful),
            'S' => Some(IterationStatus::Successful),
            'U' => Some(IterationStatus::Unsuccessful),
            _ => None,
        }
    }

    /// Very successful or successful: the trial point was taken.
    pub fn accepted(self) -> bool {
        self != IterationStatus::Unsuccessful
    }
}

/// One iteration, described at its starting point `x_k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IterationRecord {
    pub k: usize,
    pub x: Point,
    pub f_value: Real,
    /// `f(x_k) - f*` when the minimizer is known.
    pub f_gap: Option<Real>,
    pub grad_norm: Real,
    pub sigma: Real,
    /// Trial point; absent for records re-read from a trace file.
    pub y: Option<Point>,
    pub step_norm: Real,
    pub rho: Real,
    pub status: IterationStatus,
    /// `t(x_k) - t(y_k)`; absent for records re-read from a trace file.
    pub taylor_decrease: Option<Real>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    ZeroGradient,
    GradTol,
    DistTol,
    MaxIterations,
}

impl Termination {
    pub fn name(self) -> &'static str {
        match self {
            Termination::ZeroGradient => "zero_gradient",
            Termination::GradTol => "grad_tol",
            Termination::DistTol => "dist_tol",
            Termination::MaxIterations => "max_iterations",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [Termination::ZeroGradient, Termination::GradTol, Termination::DistTol, Termination::MaxIterations]
            .into_iter()
            .find(|t| t.name() == s)
    }
}

/// The point where a run stopped.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FinalState {
    pub k: usize,
    pub x: Point,
    pub f_value: Real,
    pub f_gap: Option<Real>,
    pub grad_norm: Real,
    pub sigma: Real,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NewtonConfig {
    pub max_iterations: usize,
    pub stop: StopRule,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SolverConfig {
    Arp(ArpConfig),
    Newton(NewtonConfig),
}

impl SolverConfig {
    pub fn name(&self) -> &'static str {
        match self {
            SolverConfig::Arp(_) => "arp",
            SolverConfig::Newton(_) => "newton",
        }
    }

    pub fn arp(&self) -> Option<&ArpConfig> {
        match self {
            SolverConfig::Arp(c) => Some(c),
            SolverConfig::Newton(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub config: SolverConfig,
    pub objective_id: String,
    pub records: Vec<IterationRecord>,
    pub final_state: FinalState,
    pub termination: Termination,
}

impl Trace {
    /// Accepted iterates `x_0, x_{k_1}, ...` followed by the final point,
    /// i.e. the distinct points the method moved through.
    pub fn accepted_points(&self) -> Vec<Point> {
        let mut pts: Vec<Point> = Vec::new();
        for r in &self.records {
            if pts.last() != Some(&r.x) {
                pts.push(r.x.clone());
            }
        }
        if pts.last() != Some(&self.final_state.x) {
            pts.push(self.final_state.x.clone());
        }
        pts
    }

    /// Iterates `x_0, ..., x_K` including repeats after unsuccessful steps.
    pub fn all_points(&self) -> Vec<Point> {
        self.records
            .iter()
            .map(|r| r.x.clone())
            .chain(std::iter::once(self.final_state.x.clone()))
            .collect()
    }

    pub fn sigmas(&self) -> Vec<Real> {
        self.records.iter().map(|r| r.sigma.clone()).collect()
    }

    pub fn statuses(&self) -> Vec<IterationStatus> {
        self.records.iter().map(|r| r.status).collect()
    }
}

/// `L_p / ((1 - eta1) (p+1)!)`: iterations with sigma at least this large
/// are guaranteed to succeed.
pub fn success_threshold(cfg: &ArpConfig, l_p: &Real) -> Real {
    let prec = cfg.precision();
    l_p / ((prec.one() - &cfg.eta1) * factorial(cfg.p as u32 + 1, prec))
}

/// `max(sigma0, gamma2 L_p / ((1 - eta1) (p+1)!))`, the ceiling on sigma.
pub fn sigma_max_bound(cfg: &ArpConfig, l_p: &Real) -> Real {
    cfg.sigma0.clone().max(&cfg.gamma2 * success_threshold(cfg, l_p))
}

/// `(f(x_k) - f(y_k)) / (t(x_k) - t(y_k))` for the trial step `d = y_k - x_k`,
/// both differences formed from increments so tiny steps stay accurate.
pub fn compute_rho(f: &ObjectiveSpec, m: &RegularizedModel, d: &Point) -> Option<Real> {
    let model_dec = -m.increment(d);
    let denom = &model_dec + m.regularizer(d);
    if !denom.is_positive() {
        return None;
    }
    let num = -f.increment(m.expansion_point(), d);
    Some(num / denom)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArpState {
    pub x: Point,
    pub sigma: Real,
}

pub(crate) fn stop_reason(
    f: &ObjectiveSpec,
    stop: &StopRule,
    x: &Point,
    grad_norm: &Real,
) -> Result<Option<Termination>, DriverError> {
    if grad_norm.is_zero() {
        return Ok(Some(Termination::ZeroGradient));
    }
    if stop.grad_tol.as_ref().is_some_and(|t| grad_norm <= t) {
        return Ok(Some(Termination::GradTol));
    }
    if let Some(t) = &stop.dist_tol {
        let m = f.meta()?;
        if &x.distance(&m.x_star) < t {
            return Ok(Some(Termination::DistTol));
        }
    }
    Ok(None)
}

pub(crate) fn gap(f: &ObjectiveSpec, x: &Point) -> Option<Real> {
    f.gap(x).ok()
}

/// One iteration from `state`. The caller guarantees a nonzero gradient.
pub fn arp_step(
    k: usize,
    state: &ArpState,
    cfg: &ArpConfig,
    f: &ObjectiveSpec,
) -> Result<(ArpState, IterationRecord), DriverError> {
    let taylor = build_taylor(f, &state.x, cfg.p)?;
    let grad_norm = taylor.gradient_at_x().norm();
    let f_value = taylor.f_x().clone();
    let m = RegularizedModel::new(taylor, state.sigma.clone());
    let cand = select_with_tol(&cfg.policy, f, &m, &cfg.theta, cfg.inner_tol.as_ref())
        .map_err(|source| DriverError::Subsolver { k, source })?;
    let rho = compute_rho(f, &m, &cand.step).ok_or_else(|| DriverError::Contract {
        k,
        msg: "nonpositive predicted decrease".into(),
    })?;
    let taylor_decrease = -m.taylor.increment(&cand.step);
    let status = if rho >= cfg.eta2 {
        IterationStatus::VerySuccessful
    } else if rho >= cfg.eta1 {
        IterationStatus::Successful
    } else {
        IterationStatus::Unsuccessful
    };
    let next = match status {
        IterationStatus::VerySuccessful => {
            let mut s = &cfg.gamma1 * &state.sigma;
            if let Some(lo) = &cfg.sigma_min {
                s = s.max(lo.clone());
            }
            ArpState { x: cand.point.clone(), sigma: s }
        }
        IterationStatus::Successful => ArpState { x: cand.point.clone(), sigma: state.sigma.clone() },
        IterationStatus::Unsuccessful => ArpState { x: state.x.clone(), sigma: &cfg.gamma2 * &state.sigma },
    };
    let record = IterationRecord {
        k,
        x: state.x.clone(),
        f_value,
        f_gap: gap(f, &state.x),
        grad_norm,
        sigma: state.sigma.clone(),
        y: Some(cand.point),
        step_norm: cand.step.norm(),
        rho,
        status,
        taylor_decrease: Some(taylor_decrease),
    };
    Ok((next, record))
}

/// Runs AR(p) from `x0` until a stop rule fires or the iteration budget is
/// spent.
pub fn run(cfg: &ArpConfig, f: &ObjectiveSpec, x0: &Point) -> Result<Trace, DriverError> {
    cfg.validate()?;
    f.check_point(x0)?;
    if cfg.p > f.p_max() {
        return Err(ObjectiveError::OrderUnavailable { order: cfg.p, p_max: f.p_max() }.into());
    }
    let mut state = ArpState { x: x0.clone(), sigma: cfg.sigma0.clone() };
    let mut records = Vec::new();
    let termination = loop {
        let k = records.len();
        let g = f.gradient(&state.x).norm();
        if let Some(t) = stop_reason(f, &cfg.stop, &state.x, &g)? {
            break t;
        }
        if k >= cfg.max_iterations {
            break Termination::MaxIterations;
        }
        let (next, rec) = arp_step(k, &state, cfg, f)?;
        records.push(rec);
        state = next;
    };
    let final_state = FinalState {
        k: records.len(),
        f_value: f.value(&state.x),
        f_gap: gap(f, &state.x),
        grad_norm: f.gradient(&state.x).norm(),
        x: state.x,
        sigma: state.sigma,
    };
    Ok(Trace {
        config: SolverConfig::Arp(cfg.clone()),
        objective_id: f.id.clone(),
        records,
        final_state,
        termination,
    })
}

/// Independent runs from several starting points.
pub fn run_batch(cfg: &ArpConfig, f: &ObjectiveSpec, x0s: &[Point], exec: Execution) -> Vec<Result<Trace, DriverError>> {
    exec.map(x0s, |x0| run(cfg, f, x0))
}
