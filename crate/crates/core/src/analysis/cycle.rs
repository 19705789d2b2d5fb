use crate::driver::{IterationStatus, Trace};
use crate::precision::Real;

use super::AnalysisError;

/// Eventually periodic behaviour of `(sigma_k, status_k)`.
#[derive(Clone, Debug)]
pub struct CycleReport {
    pub preperiod: usize,
    pub period: usize,
    pub sigma_cycle: Vec<Real>,
    pub status_cycle: Vec<IterationStatus>,
    /// Grid exponents `c_k` with `sigma_k = sigma0 gamma2^(c_k / b)` over the cycle.
    pub grid_cycle: Vec<i64>,
    pub unsuccessful_count: usize,
    pub successful_count: usize,
}

impl CycleReport {
    /// Unsuccessful per successful iteration within one period.
    pub fn ratio(&self) -> Option<(usize, usize)> {
        (self.successful_count > 0).then_some((self.unsuccessful_count, self.successful_count))
    }

    pub fn ratio_value(&self) -> Option<f64> {
        self.ratio().map(|(u, s)| u as f64 / s as f64)
    }
}

/// `(a, b)` with `gamma1 = gamma2^(-a/b)`, `b <= 1000`, verified to half the
/// working precision. `gamma1 = 1` gives `(0, 1)`.
pub fn rational_exponent(gamma1: &Real, gamma2: &Real) -> Option<(i64, i64)> {
    let prec = gamma1.precision();
    if gamma1 == &prec.one() {
        return Some((0, 1));
    }
    let alpha = -gamma1.ln() / gamma2.ln();
    if !alpha.is_positive() {
        return None;
    }
    let tol = prec.pow2(-(prec.mantissa_bits() as i64 / 2)) * (prec.one() + &alpha);
    // continued-fraction convergents h/k
    let (mut h0, mut h1, mut k0, mut k1) = (0i64, 1i64, 1i64, 0i64);
    let mut x = alpha.clone();
    for _ in 0..64 {
        let mut a = x.to_f64().floor() as i64;
        if prec.int(a) > x {
            a -= 1;
        }
        if &x - prec.int(a) >= prec.one() {
            a += 1;
        }
        let (h2, k2) = (a.checked_mul(h1)?.checked_add(h0)?, a.checked_mul(k1)?.checked_add(k0)?);
        if k2 > 1000 {
            return None;
        }
        if (prec.int(h2) / prec.int(k2) - &alpha).abs() <= tol {
            return Some((h2, k2));
        }
        let frac = &x - prec.int(a);
        if frac.is_zero() {
            return None;
        }
        x = prec.one() / frac;
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
    }
    None
}

/// Finds the smallest period, then the smallest preperiod, for which the
/// observed `(grid exponent, status)` sequence repeats at least twice.
pub fn detect_cycle(trace: &Trace) -> Result<CycleReport, AnalysisError> {
    let cfg = trace.config.arp().ok_or(AnalysisError::NotArp)?;
    let n = trace.records.len();
    if n + 1 < 8 {
        return Err(AnalysisError::TraceTooShort(n + 1));
    }
    let prec = cfg.sigma0.precision();
    let (a, b) = rational_exponent(&cfg.gamma1, &cfg.gamma2)
        .ok_or_else(|| AnalysisError::OffGrid("gamma1 is not a rational power of gamma2".into()))?;
    let tol = prec.pow2(-(prec.mantissa_bits() as i64 / 2));
    let mut c = 0i64;
    let mut items = Vec::with_capacity(n);
    for r in &trace.records {
        let expect = &cfg.sigma0 * cfg.gamma2.pow_ratio_signed(c, b);
        if ((&r.sigma - &expect) / &expect).abs() > tol {
            return Err(AnalysisError::OffGrid(format!("sigma at iteration {} is {}", r.k, r.sigma)));
        }
        items.push((c, r.status));
        c += match r.status {
            IterationStatus::VerySuccessful => -a,
            IterationStatus::Successful => 0,
            IterationStatus::Unsuccessful => b,
        };
    }
    for period in 1..=n / 2 {
        let last_bad = (0..n - period).rev().find(|&i| items[i] != items[i + period]);
        let pre = last_bad.map_or(0, |i| i + 1);
        if n - pre >= 2 * period {
            let cyc = &items[pre..pre + period];
            let unsuccessful_count = cyc.iter().filter(|(_, s)| !s.accepted()).count();
            return Ok(CycleReport {
                preperiod: pre,
                period,
                sigma_cycle: trace.records[pre..pre + period].iter().map(|r| r.sigma.clone()).collect(),
                status_cycle: cyc.iter().map(|(_, s)| *s).collect(),
                grid_cycle: cyc.iter().map(|(c, _)| *c).collect(),
                unsuccessful_count,
                successful_count: period - unsuccessful_count,
            });
        }
    }
    Err(AnalysisError::NoCycle)
}

trait GridPower {
    fn pow_ratio_signed(&self, num: i64, den: i64) -> Real;
}

impl GridPower for Real {
    /// `self^(num/den)` for any integer `num`.
    fn pow_ratio_signed(&self, num: i64, den: i64) -> Real {
        let prec = self.precision();
        if num == 0 {
            return prec.one();
        }
        let v = self.pow_ratio(num.unsigned_abs() as u32, den as u32);
        if num < 0 {
            prec.one() / v
        } else {
            v
        }
    }
}
