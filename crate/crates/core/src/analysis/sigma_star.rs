use crate::model::{build_taylor, RegularizedModel};
use crate::objective::ObjectiveSpec;
use crate::precision::Real;
use crate::subsolver::{critical_points_1d, CandidateKind};

use super::AnalysisError;

/// `min_y m_{x*,sigma}(y) - f(x*)`, which is zero when `x*` itself minimizes
/// the model and negative otherwise.
pub fn global_model_drop(f: &ObjectiveSpec, p: usize, sigma: &Real) -> Result<Real, AnalysisError> {
    let meta = f.meta()?;
    let t = build_taylor(f, &meta.x_star, p)?;
    let m = RegularizedModel::new(t, sigma.clone());
    let zero = sigma.precision().zero();
    let best = critical_points_1d(&m)?
        .into_iter()
        .filter(|c| c.kind == CandidateKind::StrictLocalMin)
        .map(|c| c.increment)
        .min()
        .unwrap_or_else(|| zero.clone());
    Ok(best.min(zero))
}

/// Bisection for the smallest sigma at which the model around `x*` no longer
/// dips below `f*`. `bracket.0` must lie below the threshold and `bracket.1`
/// at or above it.
pub fn estimate_sigma_star(
    f: &ObjectiveSpec,
    p: usize,
    bracket: (&Real, &Real),
    tol: &Real,
) -> Result<Real, AnalysisError> {
    let prec = tol.precision();
    let meta = f.meta()?;
    let eps = prec.pow2(-(prec.mantissa_bits() as i64 / 2)) * (prec.one() + meta.f_star.abs());
    let below = |s: &Real| -> Result<bool, AnalysisError> { Ok(global_model_drop(f, p, s)? < -&eps) };
    let (mut lo, mut hi) = (bracket.0.clone(), bracket.1.clone());
    if !below(&lo)? {
        return Err(AnalysisError::BracketDoesNotStraddle(format!("model minimum equals f* already at sigma = {lo}")));
    }
    if below(&hi)? {
        return Err(AnalysisError::BracketDoesNotStraddle(format!("model still dips below f* at sigma = {hi}")));
    }
    while &hi - &lo > *tol {
        let mid = (&lo + &hi).mul_pow2(-1);
        if below(&mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo + hi).mul_pow2(-1))
}
