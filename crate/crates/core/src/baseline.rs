//! Pure Newton iteration, for comparison with AR(p).

use crate::driver::{
    gap, stop_reason, DriverError, FinalState, IterationRecord, IterationStatus, NewtonConfig, SolverConfig,
    Termination, Trace,
};
use crate::objective::ObjectiveSpec;
use crate::point::{solve_spd, Point};

/// `x_{k+1} = x_k - H(x_k)^{-1} g(x_k)` without damping. Records use
/// `sigma = 0`, status `S`, and the ratio of actual to quadratic-model
/// decrease as `rho`.
pub fn newton_run(f: &ObjectiveSpec, x0: &Point, cfg: &NewtonConfig) -> Result<Trace, DriverError> {
    f.check_point(x0)?;
    let prec = x0.precision();
    let mut x = x0.clone();
    let mut records = Vec::new();
    let termination = loop {
        let k = records.len();
        let g = f.gradient(&x);
        let gn = g.norm();
        if let Some(t) = stop_reason(f, &cfg.stop, &x, &gn)? {
            break t;
        }
        if k >= cfg.max_iterations {
            break Termination::MaxIterations;
        }
        let h = f.derivative(2, &x);
        let step = if x.dim() == 1 {
            let h = h.as_scalar();
            if h.is_zero() {
                return Err(DriverError::Contract { k, msg: "singular second derivative".into() });
            }
            Point::scalar(-(g.as_scalar() / h))
        } else {
            solve_spd(&h, &g)
                .ok_or_else(|| DriverError::Contract { k, msg: "Hessian is not positive definite".into() })?
                .neg()
        };
        // quadratic model decrease: -(g.s + s.H.s / 2)
        let quad = -(g.dot(&step) + h.contract_times(&step, 2).as_scalar().mul_pow2(-1));
        let actual = -f.increment(&x, &step);
        let rho = if quad.is_zero() { prec.zero() } else { &actual / &quad };
        let y = x.add(&step);
        records.push(IterationRecord {
            k,
            x: x.clone(),
            f_value: f.value(&x),
            f_gap: gap(f, &x),
            grad_norm: gn,
            sigma: prec.zero(),
            y: Some(y.clone()),
            step_norm: step.norm(),
            rho,
            status: IterationStatus::Successful,
            taylor_decrease: Some(quad),
        });
        x = y;
    };
    let final_state = FinalState {
        k: records.len(),
        f_value: f.value(&x),
        f_gap: gap(f, &x),
        grad_norm: f.gradient(&x).norm(),
        sigma: prec.zero(),
        x,
    };
    Ok(Trace {
        config: SolverConfig::Newton(cfg.clone()),
        objective_id: f.id.clone(),
        records,
        final_state,
        termination,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driver::StopRule;
    use crate::objective::builtin_example_b;
    use crate::precision::PrecisionConfig;

    #[test]
    fn exact_on_quadratics() {
        let p = PrecisionConfig::default();
        let f = ObjectiveSpec::poly1d(vec![p.zero(), p.zero(), p.one()], p);
        let cfg = NewtonConfig { max_iterations: 10, stop: StopRule::default() };
        let t = newton_run(&f, &Point::scalar(p.one()), &cfg).unwrap();
        assert_eq!(t.records.len(), 1);
        assert!(t.final_state.x.is_zero());
        assert_eq!(t.termination, Termination::ZeroGradient);
    }

    #[test]
    fn linear_rate_on_degenerate_minimizer() {
        let p = PrecisionConfig::default();
        let f = builtin_example_b(4, 4, p).unwrap();
        let cfg = NewtonConfig { max_iterations: 200, stop: StopRule::default() };
        let t = newton_run(&f, &Point::scalar(p.ratio(1, 10)), &cfg).unwrap();
        let xs = t.all_points();
        let n = xs.len();
        let ratio = xs[n - 1].as_scalar() / xs[n - 2].as_scalar();
        assert!((ratio - p.ratio(2, 3)).abs() < p.parse("1e-3").unwrap());
    }
}
