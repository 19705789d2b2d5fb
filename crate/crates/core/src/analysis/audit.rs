use crate::driver::{sigma_max_bound, success_threshold, ArpConfig, Trace};
use crate::objective::{point_margins, ConvexityMeta, ObjectiveSpec};
use crate::point::Point;
use crate::precision::{factorial, Real};

use super::cycle::rational_exponent;
use super::AnalysisError;

/// Per-trace checks of the convergence theory. Margins are `lhs - rhs`
/// oriented so that negative means violated; `None` means not applicable.
#[derive(Clone, Debug)]
pub struct TraceAudit {
    pub sigma_max: Option<Real>,
    /// `min_k (sigma_max - sigma_k)`.
    pub sigma_ceiling: Option<Real>,
    /// Iterations with `sigma_k` above the success threshold that failed.
    pub guaranteed_success_violations: Vec<usize>,
    /// Iterations where `f` rose on acceptance or `x` moved on rejection.
    pub monotone_violations: Vec<usize>,
    /// `min_k (1 - |g(x_{k+1})| / (R_k |x_{k+1} - x_k|^p))` over successful
    /// iterations, with a one-ulp allowance for the rounded iterate.
    pub gradient_bound: Option<Real>,
    pub gradient_bound_checked: usize,
    /// `min_k (s_k - k/(alpha+1) + log(sigma_max/sigma0)/((alpha+1) log gamma2))`.
    pub success_count: Option<Real>,
    /// Worst growth, gradient-growth and gradient-domination margins over
    /// accepted iterates inside `B(x*, r_q)`.
    pub convexity: Option<[Real; 3]>,
    pub convexity_checked: usize,
}

impl TraceAudit {
    pub fn ok(&self) -> bool {
        let nonneg = |m: &Option<Real>| m.as_ref().is_none_or(|v| !v.is_negative());
        nonneg(&self.sigma_ceiling)
            && nonneg(&self.gradient_bound)
            && nonneg(&self.success_count)
            && self.convexity.as_ref().is_none_or(|c| c.iter().all(|v| !v.is_negative()))
            && self.guaranteed_success_violations.is_empty()
            && self.monotone_violations.is_empty()
    }
}

fn ulp_of(x: &Point) -> Real {
    x.coords().iter().map(Real::ulp).max().expect("non-empty point")
}

/// Runs every applicable audit on `trace`. Lipschitz-based checks are
/// skipped when the metadata constant refers to a different order than the
/// run used.
pub fn audit_trace(trace: &Trace, f: &ObjectiveSpec) -> Result<TraceAudit, AnalysisError> {
    let meta = f.meta()?;
    let next_x = |i: usize| -> &Point {
        trace.records.get(i + 1).map_or(&trace.final_state.x, |r| &r.x)
    };

    let mut monotone_violations = Vec::new();
    for (i, r) in trace.records.iter().enumerate() {
        let xn = next_x(i);
        let bad = if r.status.accepted() {
            f.increment(&r.x, &xn.sub(&r.x)).is_positive()
        } else {
            xn != &r.x
        };
        if bad {
            monotone_violations.push(r.k);
        }
    }

    let mut audit = TraceAudit {
        sigma_max: None,
        sigma_ceiling: None,
        guaranteed_success_violations: Vec::new(),
        monotone_violations,
        gradient_bound: None,
        gradient_bound_checked: 0,
        success_count: None,
        convexity: None,
        convexity_checked: 0,
    };
    if let Some(cfg) = trace.config.arp().filter(|c| c.p == meta.p) {
        lipschitz_audits(&mut audit, trace, f, meta, cfg, next_x);
    }
    convexity_audit(&mut audit, trace, f, meta);
    Ok(audit)
}

fn lipschitz_audits<'a>(
    audit: &mut TraceAudit,
    trace: &'a Trace,
    f: &ObjectiveSpec,
    meta: &ConvexityMeta,
    cfg: &ArpConfig,
    next_x: impl Fn(usize) -> &'a Point,
) {
    let prec = cfg.precision();
    let smax = sigma_max_bound(cfg, &meta.l_p);
    let threshold = success_threshold(cfg, &meta.l_p);
    audit.sigma_ceiling = trace.records.iter().map(|r| &smax - &r.sigma).chain([&smax - &trace.final_state.sigma]).min();
    audit.guaranteed_success_violations = trace
        .records
        .iter()
        .filter(|r| r.sigma >= threshold && !r.status.accepted())
        .map(|r| r.k)
        .collect();

    let lp_term = &meta.l_p / factorial(cfg.p as u32, prec);
    let mut worst: Option<Real> = None;
    for (i, r) in trace.records.iter().enumerate() {
        if !r.status.accepted() {
            continue;
        }
        let xn = next_x(i);
        let r_k = &lp_term + &cfg.theta + prec.int(cfg.p as i64 + 1) * &r.sigma;
        let bound = r_k * xn.distance(&r.x).powi(cfg.p as u32);
        let allowance = f.derivative(2, xn).norm() * ulp_of(xn);
        let g = f.gradient(xn).norm();
        let denom = bound + allowance;
        let margin = if denom.is_zero() {
            if g.is_zero() { prec.one() } else { -prec.one() }
        } else {
            prec.one() - g / denom
        };
        worst = Some(worst.map_or(margin.clone(), |w| w.min(margin)));
        audit.gradient_bound_checked += 1;
    }
    audit.gradient_bound = worst;

    if cfg.sigma_min.is_none() {
        if let Some((a, b)) = rational_exponent(&cfg.gamma1, &cfg.gamma2) {
            // alpha = a/b
            let alpha1 = prec.int(a + b) / prec.int(b);
            let offset = (&smax / &cfg.sigma0).ln() / (&alpha1 * cfg.gamma2.ln());
            let mut s = 0i64;
            let mut worst = offset.clone();
            for (k, r) in trace.records.iter().enumerate() {
                if r.status.accepted() {
                    s += 1;
                }
                let m = prec.int(s) - prec.int(k as i64 + 1) / &alpha1 + &offset;
                worst = worst.min(m);
            }
            audit.success_count = Some(worst);
        }
    }
    audit.sigma_max = Some(smax);
}

fn convexity_audit(audit: &mut TraceAudit, trace: &Trace, f: &ObjectiveSpec, meta: &ConvexityMeta) {
    let mut worst: Option<[Real; 3]> = None;
    let mut prev: Option<&Point> = None;
    let points = trace.records.iter().map(|r| &r.x).chain([&trace.final_state.x]);
    for x in points {
        if prev == Some(x) {
            continue;
        }
        prev = Some(x);
        if x.distance(&meta.x_star) > meta.r_q {
            continue;
        }
        let [g, gg, d, _, _] = point_margins(f, meta, x).0;
        worst = Some(match worst {
            None => [g, gg, d],
            Some([wg, wgg, wd]) => [wg.min(g), wgg.min(gg), wd.min(d)],
        });
        audit.convexity_checked += 1;
    }
    audit.convexity = worst;
}
