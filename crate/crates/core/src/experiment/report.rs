//! `key: value` summaries of order estimates, cycles and audits.

use std::fmt::Write;

use crate::analysis::{
    detect_cycle, error_sequence, estimate_order_at, AnalysisError, ErrorMetric, OrderEstimate, OrderMode,
    TraceAudit,
};
use crate::driver::Trace;
use crate::objective::ObjectiveSpec;
use crate::precision::Real;

const DIGITS: usize = 12;

fn dec(v: &Real) -> String {
    v.to_decimal(DIGITS)
}

fn opt(v: &Option<Real>) -> String {
    v.as_ref().map_or_else(|| "n/a".to_string(), dec)
}

fn list<T: ToString>(v: &[T]) -> String {
    if v.is_empty() {
        "none".to_string()
    } else {
        v.iter().map(T::to_string).collect::<Vec<_>>().join(";")
    }
}

/// Order estimates in both modes; estimation failures are reported inline.
pub fn order_estimates(
    trace: &Trace,
    f: &ObjectiveSpec,
    metric: ErrorMetric,
) -> [(OrderMode, Result<OrderEstimate, AnalysisError>); 2] {
    [OrderMode::SuccessfulOnly, OrderMode::AllIterations]
        .map(|mode| (mode, error_sequence(trace, f, metric, mode).and_then(|e| estimate_order_at(&e, mode))))
}

pub fn order_report(trace: &Trace, f: &ObjectiveSpec, metric: ErrorMetric) -> String {
    let mut s = String::new();
    writeln!(s, "metric: {}", metric.name()).unwrap();
    for (mode, est) in order_estimates(trace, f, metric) {
        let tag = match mode {
            OrderMode::SuccessfulOnly => "successful",
            OrderMode::AllIterations => "all",
        };
        match est {
            Ok(e) => {
                writeln!(s, "{tag}.samples: {}", e.samples_used).unwrap();
                writeln!(s, "{tag}.tail_q_order: {}", dec(&e.tail_q_order)).unwrap();
                writeln!(s, "{tag}.r_order: {}", dec(&e.r_order)).unwrap();
                let q: Vec<String> = e.q_ratios.iter().map(|r| r.to_decimal(6)).collect();
                writeln!(s, "{tag}.q_ratios: {}", list(&q)).unwrap();
            }
            Err(e) => writeln!(s, "{tag}.error: {e}").unwrap(),
        }
    }
    s
}

pub fn cycle_report(trace: &Trace) -> String {
    let mut s = String::new();
    match detect_cycle(trace) {
        Ok(c) => {
            writeln!(s, "preperiod: {}", c.preperiod).unwrap();
            writeln!(s, "period: {}", c.period).unwrap();
            let st: Vec<char> = c.status_cycle.iter().map(|x| x.code()).collect();
            writeln!(s, "statuses: {}", list(&st)).unwrap();
            let sig: Vec<String> = c.sigma_cycle.iter().map(dec).collect();
            writeln!(s, "sigma_cycle: {}", list(&sig)).unwrap();
            writeln!(s, "grid_cycle: {}", list(&c.grid_cycle)).unwrap();
            writeln!(s, "unsuccessful: {}", c.unsuccessful_count).unwrap();
            writeln!(s, "successful: {}", c.successful_count).unwrap();
            match c.ratio() {
                Some((u, k)) => writeln!(s, "ratio: {u}:{k}").unwrap(),
                None => writeln!(s, "ratio: n/a").unwrap(),
            }
        }
        Err(e) => writeln!(s, "error: {e}").unwrap(),
    }
    s
}

pub fn audit_report(audit: &TraceAudit) -> String {
    let mut s = String::new();
    writeln!(s, "ok: {}", audit.ok()).unwrap();
    writeln!(s, "sigma_max: {}", opt(&audit.sigma_max)).unwrap();
    writeln!(s, "sigma_ceiling_margin: {}", opt(&audit.sigma_ceiling)).unwrap();
    writeln!(s, "guaranteed_success_violations: {}", list(&audit.guaranteed_success_violations)).unwrap();
    writeln!(s, "monotone_violations: {}", list(&audit.monotone_violations)).unwrap();
    writeln!(s, "gradient_bound_margin: {}", opt(&audit.gradient_bound)).unwrap();
    writeln!(s, "gradient_bound_checked: {}", audit.gradient_bound_checked).unwrap();
    writeln!(s, "success_count_margin: {}", opt(&audit.success_count)).unwrap();
    let names = ["growth", "gradient_growth", "domination"];
    for (i, n) in names.iter().enumerate() {
        let v = audit.convexity.as_ref().map(|c| c[i].clone());
        writeln!(s, "convexity_{n}_margin: {}", opt(&v)).unwrap();
    }
    writeln!(s, "convexity_checked: {}", audit.convexity_checked).unwrap();
    s
}
