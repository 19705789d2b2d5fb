use arp_core::analysis::{audit_trace, detect_cycle, estimate_order, global_model_drop, OrderMode};
use arp_core::baseline::newton_run;
use arp_core::driver::{run, ArpConfig, IterationStatus, NewtonConfig, SolverConfig, StopRule, Trace};
use arp_core::experiment::{read_trace_csv, write_trace_csv};
use arp_core::model::{build_taylor, model_decrease, RegularizedModel};
use arp_core::objective::{builtin_example_a, builtin_example_b, finite_difference_check, ObjectiveSpec};
use arp_core::point::Point;
use arp_core::precision::{PrecisionConfig, Real};
use arp_core::subsolver::{descend_component, select, SelectionPolicy};
use proptest::prelude::*;

fn prec() -> PrecisionConfig {
    PrecisionConfig::default()
}

fn x(v: f64) -> Point {
    Point::scalar(prec().from_f64(v))
}

fn rel_close(a: &Real, b: &Real, scale: &Real, ulps: i64) -> bool {
    (a - b).abs() <= scale.abs() * prec().epsilon() * prec().int(ulps)
}

fn poly(coeffs: &[i64]) -> ObjectiveSpec {
    let p = prec();
    ObjectiveSpec::poly1d(coeffs.iter().map(|&c| p.int(c)).collect(), p)
}

fn model_a(at: f64, sigma: f64) -> (ObjectiveSpec, RegularizedModel) {
    let f = builtin_example_a(prec());
    let m = RegularizedModel::new(build_taylor(&f, &x(at), 3).unwrap(), prec().from_f64(sigma));
    (f, m)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sum_then_difference_is_exact(a in -(1i64 << 40)..(1i64 << 40), b in -(1i64 << 40)..(1i64 << 40), ea in -60i64..60, eb in -60i64..60) {
        let p = prec();
        let a = p.int(a).mul_pow2(ea);
        let b = p.int(b).mul_pow2(eb);
        prop_assert_eq!(&(&a + &b) - &b, a);
    }

    #[test]
    fn signed_power_is_odd(v in 1e-6f64..1e3, num in 1u32..7, den in 1u32..7) {
        let p = prec();
        let v = p.from_f64(v);
        prop_assert_eq!((-&v).signed_power_ratio(num, den), -v.signed_power_ratio(num, den));
    }

    #[test]
    fn comparisons_survive_precision_increase(a in -1e6f64..1e6, b in -1e6f64..1e6) {
        let lo = PrecisionConfig::new(64).unwrap();
        let hi = PrecisionConfig::new(1024).unwrap();
        prop_assert_eq!(lo.from_f64(a) < lo.from_f64(b), hi.from_f64(a) < hi.from_f64(b));
        prop_assert_eq!(lo.from_f64(a) == lo.from_f64(b), hi.from_f64(a) == hi.from_f64(b));
    }

    #[test]
    fn example_a_gap_factorizes(v in -3.0f64..3.0) {
        let p = prec();
        let f = builtin_example_a(p);
        let xv = p.from_f64(v);
        let u = &xv - p.one();
        let rhs = u.square() * (p.int(3) * xv.square() + p.int(2) * &xv + p.one());
        let lhs = f.gap(&Point::scalar(xv.clone())).unwrap();
        prop_assert!(rel_close(&lhs, &rhs, &(rhs.clone().max(p.epsilon())), 16), "{lhs} vs {rhs}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn oracle_derivatives_match_differences(c in prop::collection::vec(-5i64..=5, 6), v in -1.0f64..1.0) {
        let f = poly(&c);
        let h = prec().parse("1e-20").unwrap();
        for order in 1..=4 {
            prop_assert!(finite_difference_check(&f, order, &x(v), &h) < prec().parse("1e-35").unwrap());
        }
    }

    #[test]
    fn sigma_three_model_reproduces_example_a(at in 0.5f64..1.5, y in -2.0f64..2.0) {
        let (f, m) = model_a(at, 3.0);
        let fy = f.value(&x(y));
        prop_assert!(rel_close(&m.eval(&x(y)), &fy, &(fy.abs() + prec().int(100)), 16));
    }

    #[test]
    fn model_agrees_with_f_at_expansion_point(at in -2.0f64..2.0, sigma in 0.1f64..10.0) {
        let (f, m) = model_a(at, sigma);
        prop_assert_eq!(m.taylor.f_x(), &f.value(&x(at)));
        prop_assert_eq!(m.eval(&x(at)), f.value(&x(at)));
        prop_assert!(m.increment(&Point::zeros(1, prec())).is_zero());
    }

    #[test]
    fn model_gradient_matches_differences(at in -2.0f64..2.0, sigma in 0.1f64..10.0, d in -1.0f64..1.0) {
        let (_, m) = model_a(at, sigma);
        let p = prec();
        let h = p.parse("1e-25").unwrap();
        let d = p.from_f64(d);
        let up = m.increment(&Point::scalar(&d + &h));
        let dn = m.increment(&Point::scalar(&d - &h));
        let fd = (up - dn) / h.mul_pow2(1);
        let g = m.grad_step(&Point::scalar(d)).as_scalar().clone();
        prop_assert!((fd - &g).abs() < p.parse("1e-40").unwrap());
    }

    #[test]
    fn decrease_forms_agree(at in -2.0f64..2.0, sigma in 0.1f64..10.0, y in -2.0f64..2.0) {
        let (_, m) = model_a(at, sigma);
        let d = model_decrease(&m, &x(y));
        let direct = m.eval(&x(at)) - m.eval(&x(y));
        let scale = m.eval(&x(at)).abs().max(m.eval(&x(y)).abs());
        prop_assert!(rel_close(&d.model, &direct, &scale, 8));
        let step = x(y).sub(&x(at));
        prop_assert_eq!(&d.taylor - &d.model, m.regularizer(&step));
    }

    #[test]
    fn global_min_beats_grid(c in prop::collection::vec(-5i64..=5, 6), at in -1.0f64..1.0, sigma in 0.5f64..5.0) {
        let f = poly(&c);
        let m = RegularizedModel::new(build_taylor(&f, &x(at), 3).unwrap(), prec().from_f64(sigma));
        prop_assume!(!m.taylor.gradient_at_x().is_zero());
        let best = select(&SelectionPolicy::GlobalMin, &f, &m, &prec().zero()).unwrap();
        let slack = prec().pow2(-(prec().mantissa_bits() as i64 / 2));
        for i in -400..=400 {
            let d = Point::scalar(prec().ratio(i, 100));
            prop_assert!(best.increment <= &m.increment(&d) + &slack, "grid step {i}");
        }
    }

    #[test]
    fn component_descent_path_decreases(at in 0.5f64..1.5, sigma in 0.5f64..8.0) {
        let (_, m) = model_a(at, sigma);
        prop_assume!(!m.taylor.gradient_at_x().is_zero());
        let d = descend_component(&m, &prec().zero(), None).unwrap();
        prop_assert!(d.path.windows(2).all(|w| w[1] < w[0]));
        prop_assert!(d.candidate.increment.is_negative());
    }

    #[test]
    fn policies_agree_above_threshold(at in 0.9f64..1.1, sigma in 3.0f64..8.0) {
        let (f, m) = model_a(at, sigma);
        prop_assume!(!m.taylor.gradient_at_x().is_zero());
        let a = select(&SelectionPolicy::GlobalMin, &f, &m, &prec().zero()).unwrap();
        let b = select(&SelectionPolicy::LocalComponent, &f, &m, &prec().zero()).unwrap();
        let tol = m.taylor.gradient_at_x().norm().mul_pow2(-(prec().mantissa_bits() as i64 - 8));
        prop_assert!(a.point.distance(&b.point) <= tol);
    }

    #[test]
    fn order_is_invariant_under_powers(r in prop::sample::select(vec![(4u32, 3u32), (2, 1), (3, 1)]), c in 0.5f64..3.0) {
        let p = prec();
        let q = p.ratio(r.0 as i64, r.1 as u64);
        let mut e = vec![p.ratio(1, 4)];
        for _ in 0..6 {
            let next = e.last().unwrap().powr(&q);
            e.push(next);
        }
        let c = p.from_f64(c);
        let powered: Vec<Real> = e.iter().map(|v| v.powr(&c)).collect();
        let a = estimate_order(&e, OrderMode::AllIterations).unwrap();
        let b = estimate_order(&powered, OrderMode::AllIterations).unwrap();
        let tol = p.parse("1e-30").unwrap();
        prop_assert!((&a.tail_q_order - &b.tail_q_order).abs() < tol);
        prop_assert!((&a.r_order - &b.r_order).abs() < tol);
    }

    #[test]
    fn model_drop_is_monotone_in_sigma(s1 in 2.0f64..6.0, s2 in 2.0f64..6.0) {
        let p = prec();
        let f = builtin_example_a(p);
        let (lo, hi) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
        let dlo = global_model_drop(&f, 3, &p.from_f64(lo)).unwrap();
        let dhi = global_model_drop(&f, 3, &p.from_f64(hi)).unwrap();
        let eps = p.pow2(-(p.mantissa_bits() as i64 / 2));
        prop_assert!(dlo <= &dhi + &eps);
        let star = 8.0 / 3.0;
        if hi < star - 1e-6 {
            prop_assert!(dhi < -&eps);
        }
        if lo > star + 1e-6 {
            prop_assert!(dlo.abs() <= eps);
        }
    }
}

fn random_run(x0: f64, sigma0: f64, policy: SelectionPolicy) -> (ObjectiveSpec, Trace) {
    let p = prec();
    let f = builtin_example_a(p);
    let mut cfg = ArpConfig::standard(3, policy, p);
    cfg.sigma0 = p.from_f64(sigma0);
    cfg.max_iterations = 30;
    cfg.stop = StopRule { grad_tol: None, dist_tol: Some(p.parse("1e-100").unwrap()) };
    let t = run(&cfg, &f, &x(x0)).unwrap();
    (f, t)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn runs_pass_the_trace_audit(x0 in 0.6f64..1.6, sigma0 in 0.05f64..20.0, global in any::<bool>()) {
        let policy = if global { SelectionPolicy::GlobalMin } else { SelectionPolicy::LocalComponent };
        let (f, t) = random_run(x0, sigma0, policy);
        let a = audit_trace(&t, &f).unwrap();
        prop_assert!(a.sigma_ceiling.as_ref().is_none_or(|m| !m.is_negative()));
        prop_assert!(a.guaranteed_success_violations.is_empty());
        prop_assert!(a.monotone_violations.is_empty());
        prop_assert!(a.gradient_bound.as_ref().is_none_or(|m| !m.is_negative()));
        prop_assert!(a.success_count.as_ref().is_none_or(|m| !m.is_negative()));
        prop_assert!(a.ok());
        for r in &t.records {
            prop_assert!(!r.status.accepted() || r.f_value >= f.value(&r.y.clone().unwrap()));
        }
    }

    #[test]
    fn trace_csv_round_trips(x0 in 0.6f64..1.6, sigma0 in 0.05f64..20.0) {
        let (f, t) = random_run(x0, sigma0, SelectionPolicy::GlobalMin);
        let mut buf = Vec::new();
        write_trace_csv(&t, &mut buf).unwrap();
        let back = read_trace_csv(buf.as_slice(), &f, t.config.clone(), prec()).unwrap();
        prop_assert_eq!(back.records.len(), t.records.len());
        for (a, b) in back.records.iter().zip(&t.records) {
            prop_assert_eq!(&a.x, &b.x);
            prop_assert_eq!(&a.sigma, &b.sigma);
            prop_assert_eq!(a.status, b.status);
        }
        prop_assert_eq!(&back.final_state.x, &t.final_state.x);
        prop_assert_eq!(back.termination, t.termination);
        prop_assert_eq!(audit_trace(&back, &f).unwrap().ok(), audit_trace(&t, &f).unwrap().ok());
    }

    #[test]
    fn newton_on_example_b_contracts_by_two_thirds(x0 in 0.05f64..0.2) {
        let p = prec();
        let f = builtin_example_b(4, 4, p).unwrap();
        let t = newton_run(&f, &x(x0), &NewtonConfig { max_iterations: 200, stop: StopRule::default() }).unwrap();
        prop_assert_eq!(t.records.len(), 200);
        let pts = t.all_points();
        let target = p.ratio(2, 3);
        for w in pts[pts.len() - 21..].windows(2) {
            let ratio = w[1].as_scalar().abs() / w[0].as_scalar().abs();
            prop_assert!((ratio - &target).abs() < p.parse("1e-3").unwrap());
        }
    }

    #[test]
    fn cycle_survives_a_prepended_prefix(statuses in prop::collection::vec(0u8..3, 0..=5)) {
        let p = prec();
        let f = builtin_example_a(p);
        let mut cfg = ArpConfig::standard(3, SelectionPolicy::GlobalMin, p);
        cfg.sigma0 = p.int(6);
        cfg.gamma1 = p.ratio(1, 3);
        cfg.gamma2 = p.int(3);
        cfg.stop = StopRule { grad_tol: None, dist_tol: Some(p.parse("1e-100").unwrap()) };
        let base = run(&cfg, &f, &x(1.05)).unwrap();
        let before = detect_cycle(&base).unwrap();

        let statuses: Vec<IterationStatus> = statuses
            .iter()
            .map(|s| [IterationStatus::VerySuccessful, IterationStatus::Successful, IterationStatus::Unsuccessful][*s as usize])
            .collect();
        let shift: i64 = statuses.iter().map(|s| match s {
            IterationStatus::VerySuccessful => -1,
            IterationStatus::Successful => 0,
            IterationStatus::Unsuccessful => 1,
        }).sum();
        let three = p.int(3);
        let grid = |c: i64| if c >= 0 { &cfg.sigma0 * three.powi(c as u32) } else { &cfg.sigma0 / three.powi((-c) as u32) };
        let mut records = Vec::new();
        let mut c = -shift;
        for s in &statuses {
            let mut r = base.records[0].clone();
            r.sigma = grid(c);
            r.status = *s;
            records.push(r);
            c += match s {
                IterationStatus::VerySuccessful => -1,
                IterationStatus::Successful => 0,
                IterationStatus::Unsuccessful => 1,
            };
        }
        records.extend(base.records.iter().cloned());
        let mut cfg2 = cfg.clone();
        cfg2.sigma0 = grid(-shift);
        let longer = Trace { config: SolverConfig::Arp(cfg2), records, ..base.clone() };
        let after = detect_cycle(&longer).unwrap();
        prop_assert_eq!(after.period, before.period);
        prop_assert_eq!(after.ratio(), before.ratio());
        prop_assert!(after.preperiod <= before.preperiod + statuses.len());
    }
}
