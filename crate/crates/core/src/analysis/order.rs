use crate::driver::Trace;
use crate::objective::ObjectiveSpec;
use crate::precision::Real;

use super::AnalysisError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OrderMode {
    /// Only iterates the method moved to (repeats collapsed).
    SuccessfulOnly,
    /// Every iteration, repeats included.
    AllIterations,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ErrorMetric {
    #[default]
    Distance,
    GradNorm,
    FGap,
}

impl ErrorMetric {
    pub fn name(self) -> &'static str {
        match self {
            ErrorMetric::Distance => "dist",
            ErrorMetric::GradNorm => "grad_norm",
            ErrorMetric::FGap => "f_gap",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "dist" => Some(ErrorMetric::Distance),
            "grad_norm" => Some(ErrorMetric::GradNorm),
            "f_gap" => Some(ErrorMetric::FGap),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct OrderEstimate {
    /// `log e_{k+1} / log e_k` for consecutive samples.
    pub q_ratios: Vec<Real>,
    /// Median of the last (up to) five ratios, the final two excluded.
    pub tail_q_order: Real,
    /// `exp` of the least-squares slope of `log log (1/e_i)` against the
    /// sample position `i`.
    pub r_order: Real,
    pub samples_used: usize,
}

const MIN_SAMPLES: usize = 5;
const TAIL: usize = 5;
const DROP_LAST: usize = 2;

fn median(v: &[Real]) -> Real {
    let mut s = v.to_vec();
    s.sort();
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2].clone()
    } else {
        (&s[n / 2 - 1] + &s[n / 2]).mul_pow2(-1)
    }
}

/// Estimates the convergence order of an error sequence indexed by position.
/// Leading errors `>= 1` and trailing exact zeros are discarded first.
pub fn estimate_order(errors: &[Real], mode: OrderMode) -> Result<OrderEstimate, AnalysisError> {
    let indexed: Vec<(usize, Real)> = errors.iter().cloned().enumerate().collect();
    estimate_order_at(&indexed, mode)
}

/// As [`estimate_order`], for samples tagged with the iteration that
/// produced them. The tail statistic ignores ratios ending in the last two
/// iterations, whether or not those iterations produced a sample.
pub fn estimate_order_at(samples: &[(usize, Real)], mode: OrderMode) -> Result<OrderEstimate, AnalysisError> {
    let mut e: Vec<(usize, Real)> = samples.to_vec();
    if mode == OrderMode::SuccessfulOnly {
        e.dedup_by(|b, a| a.1 == b.1);
    }
    while e.last().is_some_and(|(_, v)| v.is_zero()) {
        e.pop();
    }
    let one = match e.first() {
        Some((_, x)) => x.precision().one(),
        None => return Err(AnalysisError::TooFewSamples { needed: MIN_SAMPLES, got: 0 }),
    };
    let start = e.iter().position(|(_, x)| x < &one).unwrap_or(e.len());
    let e = &e[start..];
    for (i, w) in e.windows(2).enumerate() {
        let bad = match mode {
            OrderMode::SuccessfulOnly => w[1].1 >= w[0].1,
            OrderMode::AllIterations => w[1].1 > w[0].1,
        };
        if bad || !w[1].1.is_positive() {
            return Err(AnalysisError::NonMonotone(start + i + 1));
        }
    }
    if e.len() < MIN_SAMPLES {
        return Err(AnalysisError::TooFewSamples { needed: MIN_SAMPLES, got: e.len() });
    }
    let logs: Vec<Real> = e.iter().map(|(_, v)| v.ln()).collect();
    let q_ratios: Vec<Real> = logs.windows(2).map(|w| &w[1] / &w[0]).collect();
    let last = e[e.len() - 1].0;
    let usable: Vec<Real> = q_ratios
        .iter()
        .zip(&e[1..])
        .filter(|(_, (k, _))| k + DROP_LAST <= last)
        .map(|(q, _)| q.clone())
        .collect();
    let tail = &usable[usable.len().saturating_sub(TAIL)..];
    if tail.is_empty() {
        return Err(AnalysisError::TooFewSamples { needed: MIN_SAMPLES, got: e.len() });
    }
    let tail_q_order = median(tail);

    let prec = one.precision();
    let n = prec.int(e.len() as i64);
    let ys: Vec<Real> = logs.iter().map(|l| (-l).ln()).collect();
    let ks: Vec<Real> = (0..e.len()).map(|i| prec.int(i as i64)).collect();
    let mean_k = ks.iter().sum::<Option<Real>>().expect("non-empty") / &n;
    let mean_y = ys.iter().sum::<Option<Real>>().expect("non-empty") / &n;
    let mut sxy = prec.zero();
    let mut sxx = prec.zero();
    for (k, y) in ks.iter().zip(&ys) {
        let dk = k - &mean_k;
        sxy += &dk * (y - &mean_y);
        sxx += dk.square();
    }
    let r_order = (sxy / sxx).exp();
    Ok(OrderEstimate { q_ratios, tail_q_order, r_order, samples_used: e.len() })
}

/// The error of every iterate of `trace` under `metric`, final point
/// included, tagged with its iteration index. `SuccessfulOnly` keeps one
/// entry per distinct iterate.
pub fn error_sequence(
    trace: &Trace,
    f: &ObjectiveSpec,
    metric: ErrorMetric,
    mode: OrderMode,
) -> Result<Vec<(usize, Real)>, AnalysisError> {
    let mut out: Vec<(usize, Real)> = Vec::new();
    let fin = &trace.final_state;
    let mut push = |k: usize, moved: bool, v: Real| {
        if mode == OrderMode::AllIterations || moved || out.is_empty() {
            out.push((k, v));
        }
    };
    let mut prev: Option<&crate::point::Point> = None;
    let states = trace
        .records
        .iter()
        .map(|r| (r.k, &r.x, &r.grad_norm, r.f_gap.as_ref()))
        .chain(std::iter::once((fin.k, &fin.x, &fin.grad_norm, fin.f_gap.as_ref())));
    for (k, x, g, gap) in states {
        let moved = prev != Some(x);
        prev = Some(x);
        let v = match metric {
            ErrorMetric::Distance => x.distance(&f.meta()?.x_star),
            ErrorMetric::GradNorm => g.clone(),
            ErrorMetric::FGap => match gap {
                Some(v) => v.clone(),
                None => f.gap(x)?,
            },
        };
        push(k, moved, v);
    }
    Ok(out)
}
