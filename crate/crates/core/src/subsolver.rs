//! Approximate minimization of the regularized model.
//!
//! In one dimension every critical point of the model is enumerated exactly
//! (up to working precision) from its two polynomial branches. In any
//! dimension a monotone damped-Newton descent from the expansion point finds
//! the minimizer in the connected component of the sublevel set.
//!
//! All work happens in the step variable `d = y - x_k`, so steps far below
//! the resolution of `x_k` keep full relative accuracy.

use thiserror::Error;

use crate::model::RegularizedModel;
use crate::objective::{ObjectiveKind, ObjectiveSpec};
use crate::point::{solve_spd, Point};
use crate::poly::Polynomial1D;
use crate::precision::Real;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SubsolverError {
    #[error("model is constant; it has no isolated critical points")]
    ConstantModel,
    #[error("model is unbounded below (sigma = 0 with an odd or negative leading term)")]
    UnboundedModel,
    #[error("no local minimizer of the model decreases it")]
    NoCandidate,
    #[error("gradient vanishes at the expansion point")]
    StartIsCritical,
    #[error("monotone descent stalled after {iterations} iterations (gradient norm {grad_norm})")]
    DescentStalled { iterations: usize, grad_norm: Real },
    #[error("approximate-minimizer condition fails: |grad m(y)| = {grad_norm} > {bound}")]
    ThetaUnachievable { grad_norm: Real, bound: Real },
    #[error("policy not applicable: {0}")]
    PolicyNotApplicable(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CandidateKind {
    StrictLocalMin,
    SaddleOrMax,
    /// A zero of the derivative whose classification is inconclusive.
    BoundaryArtifact,
}

/// A critical point (or descent end point) of the model.
#[derive(Clone, Debug)]
pub struct CandidateMinimizer {
    pub point: Point,
    /// `point - x_k`, kept at full relative precision.
    pub step: Point,
    /// `m(point) - m(x_k)`.
    pub increment: Real,
    pub model_value: Real,
    pub model_grad_norm: Real,
    pub kind: CandidateKind,
}

impl CandidateMinimizer {
    fn from_step(m: &RegularizedModel, step: Point, kind: CandidateKind) -> Self {
        let increment = m.increment(&step);
        CandidateMinimizer {
            point: m.expansion_point().add(&step),
            model_value: m.taylor.f_x() + &increment,
            model_grad_norm: m.grad_step(&step).norm(),
            increment,
            step,
            kind,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SelectionPolicy {
    /// Least model value among all local minimizers (1-D only).
    GlobalMin,
    /// Monotone descent from `x_k`.
    LocalComponent,
    /// Local minimizer closest to a reference point (1-D only).
    NearestToRef(Point),
    /// `y = -|x|^(p/(q-1)) sign(x)` for the built-in `x^q/q + x^(p+1)/(p+1)`.
    ClosedFormExampleB,
}

impl SelectionPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            SelectionPolicy::GlobalMin => "global",
            SelectionPolicy::LocalComponent => "component",
            SelectionPolicy::NearestToRef(_) => "nearest_ref",
            SelectionPolicy::ClosedFormExampleB => "closed_form_b",
        }
    }
}

/// Tolerance added to the gradient test: half the working precision, scaled
/// by the magnitude of the terms that make up `grad m` at the step.
pub fn default_slack(m: &RegularizedModel, d: &Point) -> Real {
    let prec = d.precision();
    let r = d.norm();
    let mut s = prec.zero();
    for (j, t) in m.taylor.terms().iter().enumerate().skip(1) {
        s += t.norm() * prec.int(j as i64) * r.powi(j as u32 - 1);
    }
    let p = m.taylor.order() as u32;
    s += &m.sigma * prec.int(p as i64 + 1) * r.powi(p);
    s.mul_pow2(-(prec.mantissa_bits() as i64 / 2))
}

/// `m(x_k + d) < m(x_k)` and `|grad m(x_k + d)| <= theta |d|^p + slack`.
pub fn verify_theta_step(m: &RegularizedModel, d: &Point, theta: &Real, slack: &Real) -> bool {
    if !m.increment(d).is_negative() {
        return false;
    }
    let p = m.taylor.order() as u32;
    m.grad_step(d).norm() <= theta * d.norm().powi(p) + slack
}

/// The approximate-minimizer test for a trial point `y`.
pub fn verify_theta_condition(m: &RegularizedModel, y: &Point, theta: &Real, slack: &Real) -> bool {
    verify_theta_step(m, &y.sub(m.expansion_point()), theta, slack)
}

fn classify(sign_left: i32, sign_right: i32, second: &Real) -> CandidateKind {
    match (sign_left, sign_right) {
        (l, r) if l < 0 && r > 0 => CandidateKind::StrictLocalMin,
        (l, r) if l != 0 && r != 0 => CandidateKind::SaddleOrMax,
        _ if second.is_positive() => CandidateKind::StrictLocalMin,
        _ if second.is_negative() => CandidateKind::SaddleOrMax,
        _ => CandidateKind::BoundaryArtifact,
    }
}

/// Every real critical point of a 1-D model, sorted by model value (ties
/// broken toward the expansion point).
pub fn critical_points_1d(m: &RegularizedModel) -> Result<Vec<CandidateMinimizer>, SubsolverError> {
    assert_eq!(m.dimension(), 1, "critical point enumeration is one-dimensional");
    let prec = m.sigma.precision();
    let b = m.branches();
    let dr = b.right.derivative();
    let dl = b.left.derivative();
    if dr.is_zero() && dl.is_zero() {
        return Err(SubsolverError::ConstantModel);
    }
    let zero = prec.zero();
    let mut out = Vec::new();
    // sign of m' just left and just right of s = 0, if 0 is critical
    let mut at_zero: (Option<i32>, Option<i32>) = (None, None);

    let mut scan = |branch: &Polynomial1D, deriv: &Polynomial1D, right: bool| {
        if deriv.is_zero() {
            return;
        }
        let bound = deriv.root_bound();
        let (lo, hi) = if right { (zero.clone(), bound) } else { (-&bound, zero.clone()) };
        let second = deriv.derivative();
        for r in deriv.roots_in(&lo, &hi) {
            if r.at.is_zero() {
                if right {
                    at_zero.1 = Some(r.sign_right);
                } else {
                    at_zero.0 = Some(r.sign_left);
                }
                continue;
            }
            let kind = classify(r.sign_left, r.sign_right, &second.eval(&r.at));
            let step = Point::scalar(r.at.clone());
            let increment = branch.eval_increment(&r.at);
            out.push(CandidateMinimizer {
                point: m.expansion_point().add(&step),
                model_value: m.taylor.f_x() + &increment,
                model_grad_norm: deriv.eval(&r.at).abs(),
                increment,
                step,
                kind,
            });
        }
    };
    scan(&b.right, &dr, true);
    scan(&b.left, &dl, false);

    if at_zero.0.is_some() || at_zero.1.is_some() {
        let l = at_zero.0.unwrap_or(0);
        let r = at_zero.1.unwrap_or(0);
        let second = dr.derivative().eval(&zero);
        let step = Point::scalar(zero.clone());
        out.push(CandidateMinimizer::from_step(m, step, classify(l, r, &second)));
    }

    out.sort_by(|a, b| {
        a.increment
            .cmp(&b.increment)
            .then_with(|| a.step.norm().cmp(&b.step.norm()))
    });
    Ok(out)
}

/// Whether a 1-D model with `sigma = 0` decreases without bound.
fn unbounded_1d(m: &RegularizedModel) -> bool {
    if !m.sigma.is_zero() {
        return false;
    }
    let t = m.taylor.shifted_polynomial();
    match t.degree() {
        None | Some(0) => false,
        Some(deg) => {
            let lead = t.coeff(deg);
            deg % 2 == 1 || lead.is_negative()
        }
    }
}

/// Result of a monotone descent: the end point and the model increments
/// along the path, strictly decreasing.
#[derive(Clone, Debug)]
pub struct Descent {
    pub candidate: CandidateMinimizer,
    pub path: Vec<Real>,
}

const MAX_DESCENT_STEPS: usize = 1000;
const ARMIJO: f64 = 1e-4;

/// Default inner tolerance: `2^-(bits-8) |grad f(x_k)|`.
pub fn default_inner_tol(m: &RegularizedModel) -> Real {
    let prec = m.sigma.precision();
    m.taylor.gradient_at_x().norm().mul_pow2(-(prec.mantissa_bits() as i64 - 8))
}

/// Largest model increment on the open segment between steps `a` and `b`,
/// exact in 1-D (via the interior critical points), sampled otherwise.
fn segment_ok(m: &RegularizedModel, crit: Option<&[CandidateMinimizer]>, a: &Point, b: &Point, level: &Real) -> bool {
    match crit {
        Some(cps) => {
            let (lo, hi) = {
                let (u, v) = (a.as_scalar(), b.as_scalar());
                if u <= v { (u, v) } else { (v, u) }
            };
            cps.iter()
                .filter(|c| c.step.as_scalar() > lo && c.step.as_scalar() < hi)
                .all(|c| &c.increment <= level)
        }
        None => {
            let prec = level.precision();
            let dir = b.sub(a);
            (1..8).all(|k| &m.increment(&a.offset(&prec.ratio(k, 8), &dir)) <= level)
        }
    }
}

/// Monotone damped-Newton descent on `m` from `x_k`, stopping once
/// `|grad m| <= max(theta |d|^p, inner_tol)`. Every accepted step lowers the
/// model and never crosses a point above the current level, so the path
/// stays inside the sublevel-set component of `x_k`.
pub fn descend_component(
    m: &RegularizedModel,
    theta: &Real,
    inner_tol: Option<&Real>,
) -> Result<Descent, SubsolverError> {
    let prec = m.sigma.precision();
    let n = m.dimension();
    if m.taylor.gradient_at_x().is_zero() {
        return Err(SubsolverError::StartIsCritical);
    }
    let tol = inner_tol.cloned().unwrap_or_else(|| default_inner_tol(m));
    let crit = if n == 1 { Some(critical_points_1d(m)?) } else { None };
    let crit = crit.as_deref();
    let p = m.taylor.order() as u32;
    let tiny = prec.pow2(-(prec.mantissa_bits() as i64));
    let armijo = prec.from_f64(ARMIJO);

    let mut d = Point::zeros(n, prec);
    let mut inc = prec.zero();
    let mut path = vec![inc.clone()];
    for it in 0..MAX_DESCENT_STEPS {
        let g = m.grad_step(&d);
        let gn = g.norm();
        let target = (theta * d.norm().powi(p)).max(tol.clone());
        if inc.is_negative() && gn <= target {
            let candidate = CandidateMinimizer::from_step(m, d, CandidateKind::StrictLocalMin);
            return Ok(Descent { candidate, path });
        }
        let h = m.hessian_step(&d);
        let newton = solve_spd(&h, &g).map(|v| v.neg()).filter(|v| g.dot(v).is_negative());
        let (dir, expand) = match newton {
            Some(v) => (v, false),
            None => {
                let hn = h.norm();
                let scale = if hn.is_zero() { prec.one() } else { prec.one() / hn };
                (g.neg().scale(&scale), true)
            }
        };
        let slope = g.dot(&dir);
        let accept = |alpha: &Real| -> Option<(Point, Real)> {
            let trial = d.offset(alpha, &dir);
            if trial == d {
                return None;
            }
            let ti = m.increment(&trial);
            let armijo_ok = ti <= &inc + &armijo * alpha * &slope;
            (ti < inc && armijo_ok && segment_ok(m, crit, &d, &trial, &inc)).then_some((trial, ti))
        };
        let mut alpha = prec.one();
        let mut found = accept(&alpha);
        if found.is_some() && expand {
            for _ in 0..200 {
                let bigger = alpha.mul_pow2(1);
                match accept(&bigger) {
                    Some(t) if found.as_ref().is_some_and(|f| t.1 < f.1) => {
                        alpha = bigger;
                        found = Some(t);
                    }
                    _ => break,
                }
            }
        }
        while found.is_none() && alpha > tiny {
            alpha = alpha.mul_pow2(-1);
            found = accept(&alpha);
        }
        match found {
            Some((trial, ti)) => {
                d = trial;
                inc = ti;
                path.push(inc.clone());
            }
            None => {
                // rounding floor of the model value: finish on the gradient
                let d = polish(m, crit, d, &inc, &target);
                if (m.increment(&d).is_negative() && m.grad_step(&d).norm() <= target) || verify_theta_step(m, &d, theta, &default_slack(m, &d)) {
                    let candidate = CandidateMinimizer::from_step(m, d, CandidateKind::StrictLocalMin);
                    return Ok(Descent { candidate, path });
                }
                return Err(SubsolverError::DescentStalled { iterations: it, grad_norm: gn });
            }
        }
    }
    let gn = m.grad_step(&d).norm();
    Err(SubsolverError::DescentStalled { iterations: MAX_DESCENT_STEPS, grad_norm: gn })
}

/// Rounding noise in `m.increment(d)`: a few ulps of the largest term.
fn value_noise(m: &RegularizedModel, d: &Point) -> Real {
    let prec = d.precision();
    let r = d.norm();
    let p = m.taylor.order() as u32;
    let mut s = &m.sigma * r.powi(p + 1);
    for (j, t) in m.taylor.terms().iter().enumerate().skip(1) {
        s = s.max(t.norm() * r.powi(j as u32));
    }
    s.mul_pow2(-(prec.mantissa_bits() as i64 - 4))
}

/// Plain Newton steps once value comparisons can no longer separate trial
/// points. A step is taken only while the Hessian stays positive definite,
/// the gradient shrinks and the model does not rise above `level` by more
/// than its rounding noise.
fn polish(m: &RegularizedModel, crit: Option<&[CandidateMinimizer]>, mut d: Point, level: &Real, target: &Real) -> Point {
    let mut gn = m.grad_step(&d).norm();
    for _ in 0..64 {
        if &gn <= target {
            break;
        }
        let g = m.grad_step(&d);
        let Some(v) = solve_spd(&m.hessian_step(&d), &g) else { break };
        let trial = d.sub(&v);
        let tg = m.grad_step(&trial).norm();
        let cap = level + value_noise(m, &trial);
        if tg >= gn || m.increment(&trial) > cap || !segment_ok(m, crit, &d, &trial, &cap) {
            break;
        }
        d = trial;
        gn = tg;
    }
    d
}

fn decreasing_minima(cps: Vec<CandidateMinimizer>) -> impl Iterator<Item = CandidateMinimizer> {
    cps.into_iter()
        .filter(|c| c.kind == CandidateKind::StrictLocalMin && c.increment.is_negative())
}

/// Picks `y_k` by `policy` and checks the approximate-minimizer condition
/// `m(y) < m(x_k)`, `|grad m(y)| <= theta |y - x_k|^p` (plus rounding slack).
pub fn select(
    policy: &SelectionPolicy,
    f: &ObjectiveSpec,
    m: &RegularizedModel,
    theta: &Real,
) -> Result<CandidateMinimizer, SubsolverError> {
    select_with_tol(policy, f, m, theta, None)
}

pub fn select_with_tol(
    policy: &SelectionPolicy,
    f: &ObjectiveSpec,
    m: &RegularizedModel,
    theta: &Real,
    inner_tol: Option<&Real>,
) -> Result<CandidateMinimizer, SubsolverError> {
    let one_d = |name: &str| {
        if m.dimension() == 1 {
            Ok(())
        } else {
            Err(SubsolverError::PolicyNotApplicable(format!("{name} needs a 1-D objective")))
        }
    };
    if m.taylor.gradient_at_x().is_zero() {
        return Err(SubsolverError::StartIsCritical);
    }
    let chosen = match policy {
        SelectionPolicy::GlobalMin => {
            one_d("global")?;
            if unbounded_1d(m) {
                return Err(SubsolverError::UnboundedModel);
            }
            // already sorted by value, ties toward x_k
            decreasing_minima(critical_points_1d(m)?).next().ok_or(SubsolverError::NoCandidate)?
        }
        SelectionPolicy::LocalComponent => descend_component(m, theta, inner_tol)?.candidate,
        SelectionPolicy::NearestToRef(r) => {
            one_d("nearest_ref")?;
            let offset = r.sub(m.expansion_point());
            decreasing_minima(critical_points_1d(m)?)
                .min_by(|a, b| a.step.distance(&offset).cmp(&b.step.distance(&offset)))
                .ok_or(SubsolverError::NoCandidate)?
        }
        SelectionPolicy::ClosedFormExampleB => {
            let ObjectiveKind::ExampleB { p, q } = f.kind else {
                return Err(SubsolverError::PolicyNotApplicable(format!(
                    "closed_form_b needs the built-in example B, not `{}`",
                    f.id
                )));
            };
            if p != m.taylor.order() {
                return Err(SubsolverError::PolicyNotApplicable(format!(
                    "closed_form_b built for p = {p}, model has order {}",
                    m.taylor.order()
                )));
            }
            let x = m.expansion_point().as_scalar();
            let mag = x.abs().pow_ratio(p as u32, q as u32 - 1);
            let y = if x.is_negative() { mag } else { -mag };
            let step = Point::scalar(&y - x);
            let mut c = CandidateMinimizer::from_step(m, step, CandidateKind::StrictLocalMin);
            c.point = Point::scalar(y);
            c
        }
    };
    let slack = default_slack(m, &chosen.step);
    if !verify_theta_step(m, &chosen.step, theta, &slack) {
        let p = m.taylor.order() as u32;
        return Err(SubsolverError::ThetaUnachievable {
            grad_norm: chosen.model_grad_norm.clone(),
            bound: theta * chosen.step.norm().powi(p) + slack,
        });
    }
    Ok(chosen)
}
