//! Acceptance gate. Prints one PASS/FAIL line per criterion and fails if
//! any criterion fails.

use std::io::Write;

use arp_core::analysis::{
    audit_trace, detect_cycle, error_sequence, estimate_order, estimate_order_at, estimate_sigma_star,
    global_model_drop, ErrorMetric, OrderEstimate, OrderMode,
};
use arp_core::baseline::newton_run;
use arp_core::driver::{run, ArpConfig, IterationStatus, NewtonConfig, StopRule, Trace};
use arp_core::model::{build_taylor, RegularizedModel};
use arp_core::objective::{builtin_example_a, builtin_example_b, finite_difference_check, ObjectiveSpec};
use arp_core::point::Point;
use arp_core::precision::{PrecisionConfig, Real};
use arp_core::subsolver::{critical_points_1d, select, CandidateKind, SelectionPolicy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Gate {
    failed: Vec<String>,
}

impl Gate {
    fn check(&mut self, id: &str, ok: bool, detail: impl AsRef<str>) {
        // bypass the test harness capture so the lines reach the log
        let mut out = std::io::stdout().lock();
        writeln!(out, "{} criterion {id}: {}", if ok { "PASS" } else { "FAIL" }, detail.as_ref()).unwrap();
        if !ok {
            self.failed.push(id.to_string());
        }
    }
}

fn prec() -> PrecisionConfig {
    PrecisionConfig::default()
}

fn r(s: &str) -> Real {
    prec().parse_rational(s).unwrap()
}

fn arp_cfg(p: usize, policy: SelectionPolicy, sigma0: &str, gamma1: &str, gamma2: &str, theta: &str) -> ArpConfig {
    let mut c = ArpConfig::standard(p, policy, prec());
    c.eta1 = r("1/2");
    c.eta2 = r("1/2");
    c.sigma0 = r(sigma0);
    c.gamma1 = r(gamma1);
    c.gamma2 = r(gamma2);
    c.theta = r(theta);
    c.stop = StopRule { grad_tol: None, dist_tol: Some(r("1e-100")) };
    c
}

fn newton_cfg(max_iterations: usize) -> NewtonConfig {
    NewtonConfig { max_iterations, stop: StopRule { grad_tol: None, dist_tol: Some(r("1e-100")) } }
}

fn order(trace: &Trace, f: &ObjectiveSpec, mode: OrderMode) -> OrderEstimate {
    let e = error_sequence(trace, f, ErrorMetric::Distance, mode).unwrap();
    estimate_order_at(&e, mode).unwrap()
}

fn in_band(v: &Real, lo: f64, hi: f64) -> bool {
    let x = v.to_f64();
    (lo..=hi).contains(&x)
}

fn final_dist(t: &Trace, f: &ObjectiveSpec) -> Real {
    t.final_state.x.distance(&f.meta().unwrap().x_star)
}

fn oscillation(g: &mut Gate) -> Trace {
    let f = builtin_example_a(prec());
    let cfg = arp_cfg(3, SelectionPolicy::GlobalMin, "6", "1/3", "3", "0");
    let t = run(&cfg, &f, &Point::scalar(r("1.05"))).unwrap();
    let recs = &t.records;
    let first = recs[0].status.accepted() && recs.get(1).is_some_and(|x| x.sigma == r("2"));
    let alternating = recs.iter().skip(1).all(|x| {
        let odd = x.k % 2 == 1;
        let status_ok = if odd { x.status == IterationStatus::Unsuccessful } else { x.status.accepted() };
        let sigma_ok = x.sigma == if odd { r("2") } else { r("6") };
        status_ok && sigma_ok
    });
    let statuses: String = recs.iter().map(|x| x.status.code()).collect();
    g.check("1a", first && alternating && recs.len() >= 4, format!("statuses {statuses}, sigma alternates 2,6 after k=0"));
    let (lo, hi) = (r("4/5"), r("6/5"));
    let inside = t.all_points().iter().all(|x| x.as_scalar() >= &lo && x.as_scalar() <= &hi);
    g.check("1b", inside, "all iterates in [4/5, 6/5]");
    let d = final_dist(&t, &f);
    g.check("1c", d < r("1e-100"), format!("final |x-1| = {d:.3}"));
    t
}

struct Top {
    local: Trace,
    global: Trace,
}

fn top_panel(g: &mut Gate) -> Top {
    let f = builtin_example_a(prec());
    let x0 = Point::scalar(r("1.1"));
    let newton = newton_run(&f, &x0, &newton_cfg(200)).unwrap();
    let q = order(&newton, &f, OrderMode::SuccessfulOnly).tail_q_order;
    g.check("2a", in_band(&q, 1.9, 2.1), format!("Newton tail Q-order {q:.5} in [1.9, 2.1]"));

    let local = run(&arp_cfg(3, SelectionPolicy::LocalComponent, "1/2", "1/2", "2", "0"), &f, &x0).unwrap();
    let q = order(&local, &f, OrderMode::SuccessfulOnly).tail_q_order;
    let first_ok = local.records.iter().position(|x| x.status.accepted()).unwrap_or(local.records.len());
    let settled = local.records[first_ok..].iter().all(|x| x.status.accepted());
    let statuses: String = local.records.iter().map(|x| x.status.code()).collect();
    g.check(
        "2b",
        in_band(&q, 2.8, 3.2) && settled && final_dist(&local, &f) < r("1e-100"),
        format!("AR3 component tail Q-order {q:.5} in [2.8, 3.2], statuses {statuses}"),
    );

    let global = run(&arp_cfg(3, SelectionPolicy::GlobalMin, "1/2", "1/2", "2", "0"), &f, &x0).unwrap();
    let q = order(&global, &f, OrderMode::SuccessfulOnly).tail_q_order;
    let ro = order(&global, &f, OrderMode::AllIterations).r_order;
    let ratio = detect_cycle(&global).ok().and_then(|c| c.ratio());
    let sqrt3 = 3f64.sqrt();
    g.check(
        "2c",
        in_band(&q, 2.8, 3.2) && in_band(&ro, sqrt3 - 0.15, sqrt3 + 0.15) && ratio == Some((1, 1)),
        format!("AR3 global successful Q-order {q:.5} in [2.8, 3.2], R-order {ro:.5} in [sqrt3 -+ 0.15], cycle {ratio:?}"),
    );
    Top { local, global }
}

/// `|x_k| - |x_0|^((4/3)^k)` in units of the iterate's ulp, with the law
/// evaluated at twice the working precision.
fn law_ulps(t: &Trace) -> f64 {
    let hi = PrecisionConfig::new(2 * prec().mantissa_bits()).unwrap();
    let ln_x0 = hi.parse("0.1").unwrap().ln();
    let mut worst = 0f64;
    for (k, x) in t.all_points().iter().enumerate() {
        let xs = x.as_scalar();
        if xs.is_zero() {
            continue;
        }
        let law = (hi.ratio(4, 3).powi(k as u32) * &ln_x0).exp();
        let got = hi.parse(&xs.abs().to_decimal(400)).unwrap();
        let ulp = hi.parse(&xs.ulp().to_decimal(40)).unwrap();
        worst = worst.max(((got - law) / ulp).abs().to_f64());
    }
    worst
}

fn bottom_panel(g: &mut Gate) -> Trace {
    let p = prec();
    let f = builtin_example_b(4, 4, p).unwrap();
    let x0 = Point::scalar(r("0.1"));
    let newton = newton_run(&f, &x0, &newton_cfg(1000)).unwrap();
    let q = order(&newton, &f, OrderMode::SuccessfulOnly).tail_q_order;
    let xs = newton.all_points();
    let n = xs.len();
    let ratio = (xs[n - 1].as_scalar() / xs[n - 2].as_scalar()).abs();
    let ratio_ok = (&ratio - p.ratio(2, 3)).abs() <= r("0.01");
    g.check(
        "3a",
        in_band(&q, 0.95, 1.05) && ratio_ok,
        format!("Newton tail Q-order {q:.5} in [0.95, 1.05], last ratio {ratio:.6} within 0.01 of 2/3"),
    );

    let ar4 = run(&arp_cfg(4, SelectionPolicy::ClosedFormExampleB, "1/8", "1/2", "2", "3"), &f, &x0).unwrap();
    let q = order(&ar4, &f, OrderMode::SuccessfulOnly).tail_q_order;
    let ulps = law_ulps(&ar4);
    g.check(
        "3b",
        ulps <= 10.0 && in_band(&q, 1.28, 1.39) && final_dist(&ar4, &f) < r("1e-100"),
        format!("AR4 |x_k| vs |x_0|^((4/3)^k): worst {ulps:.2} ulps (<= 10), tail Q-order {q:.5} in [1.28, 1.39]"),
    );
    ar4
}

fn lemma_audits(g: &mut Gate, runs: &[(&str, &Trace, &ObjectiveSpec)]) {
    let mut ceiling = Vec::new();
    let mut bound = Vec::new();
    let (mut ok4, mut ok5) = (true, true);
    for (name, t, f) in runs {
        let a = audit_trace(t, f).unwrap();
        let c = a.sigma_ceiling.clone().expect("AR(p) trace with matching Lipschitz order");
        ok4 &= !c.is_negative() && a.guaranteed_success_violations.is_empty();
        ceiling.push(format!("{name} {:.3}", c));
        let b = a.gradient_bound.clone().expect("successful iterations present");
        ok5 &= !b.is_negative() && a.gradient_bound_checked > 0;
        bound.push(format!("{name} {:.3}/{}", b, a.gradient_bound_checked));
    }
    g.check("4", ok4, format!("sigma ceiling margins [{}], no failed guaranteed successes", ceiling.join(", ")));
    g.check("5", ok5, format!("gradient bound relative margins/checked [{}]", bound.join(", ")));
}

/// Global minimum over `u` of `6u^2 + 8u^3 + sigma u^4`, the model of
/// example A around `x* = 1` relative to `f*`, by grid search refined with
/// golden-section steps.
fn model_min_oracle(sigma: f64) -> f64 {
    let m = |u: f64| 6.0 * u * u + 8.0 * u * u * u + sigma * u.powi(4);
    let (a, b, n) = (-5.0, 5.0, 100_000);
    let h = (b - a) / n as f64;
    let best = (0..=n).map(|i| a + h * i as f64).min_by(|x, y| m(*x).total_cmp(&m(*y))).unwrap();
    let (mut lo, mut hi) = (best - h, best + h);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let (c, d) = (hi - g * (hi - lo), lo + g * (hi - lo));
        if m(c) < m(d) {
            hi = d;
        } else {
            lo = c;
        }
    }
    m((lo + hi) / 2.0).min(0.0)
}

fn sigma_star(g: &mut Gate) {
    let p = prec();
    let f = builtin_example_a(p);
    let s = estimate_sigma_star(&f, 3, (&p.int(2), &p.int(6)), &r("1e-8")).unwrap();
    let err = (&s - p.ratio(8, 3)).abs();
    let below = model_min_oracle(8.0 / 3.0 - 1e-3);
    let above = model_min_oracle(8.0 / 3.0 + 1e-3);
    let lib_below = global_model_drop(&f, 3, &(p.ratio(8, 3) - r("1e-3"))).unwrap().to_f64();
    let oracle_ok = below < -1e-6 && above.abs() < 1e-12 && (lib_below - below).abs() < 1e-9;
    g.check(
        "6",
        err <= r("1e-6") && oracle_ok,
        format!("sigma* = {s:.12}, |sigma* - 8/3| = {err:.2}; grid oracle min {below:.3e} below, {above:.1e} above"),
    );
}

fn cycle_ratios(g: &mut Gate, global: &Trace) {
    let a = detect_cycle(global).map(|c| c.ratio());
    g.check("7a", matches!(a, Ok(Some((1, 1)))), format!("gamma1 = 1/2: unsuccessful:successful {a:?}"));
    let f = builtin_example_a(prec());
    let t = run(&arp_cfg(3, SelectionPolicy::GlobalMin, "1/2", "1", "2", "0"), &f, &Point::scalar(r("1.1"))).unwrap();
    let c = detect_cycle(&t);
    let ok = matches!(&c, Ok(c) if c.period == 1 && c.ratio() == Some((0, 1)));
    g.check("7b", ok, format!("gamma1 = 1: {:?}", c.map(|c| (c.period, c.ratio()))));
}

fn random_poly(rng: &mut ChaCha8Rng, deg: usize) -> ObjectiveSpec {
    let p = prec();
    let coeffs = (0..=deg).map(|_| p.int(rng.random_range(-5..=5))).collect();
    ObjectiveSpec::poly1d(coeffs, p)
}

fn property_suites(g: &mut Gate) {
    let p = prec();
    let mut rng = ChaCha8Rng::seed_from_u64(8);

    // Taylor exactness: degree <= p gives rho = 1 on every iteration
    let mut exact = true;
    let mut iters = 0;
    for _ in 0..10 {
        let mut coeffs: Vec<Real> = (0..4).map(|_| p.int(rng.random_range(-5..=5))).collect();
        coeffs.push(p.int(rng.random_range(1..=5)));
        let f = ObjectiveSpec::poly1d(coeffs, p);
        let mut cfg = ArpConfig::standard(4, SelectionPolicy::GlobalMin, p);
        cfg.max_iterations = 6;
        let t = run(&cfg, &f, &Point::scalar(p.int(rng.random_range(-3..=3)))).unwrap();
        iters += t.records.len();
        // rho is a quotient of two separately rounded sums
        let ulps = p.epsilon().mul_pow2(2);
        exact &= t.records.iter().all(|x| (&x.rho - p.one()).abs() <= ulps && x.status == IterationStatus::VerySuccessful);
    }
    g.check("8a", exact && iters > 0, format!("|rho - 1| <= 4 ulp on all {iters} iterations of 10 quartic runs with p = 4"));

    // finite differences, O(h^2)
    let mut fd_ok = true;
    let h1 = r("1e-20");
    let h2 = r("1e-21");
    for _ in 0..10 {
        let f = random_poly(&mut rng, 5);
        let x = Point::scalar(p.from_f64(rng.random_range(-1.0..1.0)));
        for order in 1..=4 {
            let (e1, e2) = (finite_difference_check(&f, order, &x, &h1), finite_difference_check(&f, order, &x, &h2));
            fd_ok &= e1 < r("1e-35") && (e2 < r("1e-37") || e2 <= e1.mul_pow2(-6));
        }
        let m = RegularizedModel::new(build_taylor(&f, &x, 3).unwrap(), r("3/2"));
        let d = Point::scalar(p.from_f64(rng.random_range(-1.0..1.0)));
        let central = |h: &Real| {
            let up = m.increment(&d.add(&Point::scalar(h.clone())));
            let dn = m.increment(&d.sub(&Point::scalar(h.clone())));
            (up - dn) / h.mul_pow2(1)
        };
        let g_exact = m.grad_step(&d).as_scalar().clone();
        let (e1, e2) = ((central(&h1) - &g_exact).abs(), (central(&h2) - &g_exact).abs());
        fd_ok &= e1 < r("1e-35") && e2 <= e1.clone().max(r("1e-130")).mul_pow2(-6);
    }
    g.check("8b", fd_ok, "oracle and model gradients match central differences, error shrinking as h^2");

    // 1-D critical point enumeration vs a grid oracle
    let mut enum_ok = 0;
    let mut misses = Vec::new();
    for case in 0..200 {
        let f = random_poly(&mut rng, 5);
        let pp = rng.random_range(3..=4);
        let x = Point::scalar(p.from_f64(rng.random_range(-1.0..1.0)));
        let sigma = rng.random_range(0.1..5.0);
        let m = RegularizedModel::new(build_taylor(&f, &x, pp).unwrap(), p.from_f64(sigma));
        let Ok(cps) = critical_points_1d(&m) else {
            misses.push(case);
            continue;
        };
        if grid_matches(&m, &cps, sigma) {
            enum_ok += 1;
        } else {
            misses.push(case);
        }
    }
    g.check("8c", enum_ok == 200, format!("{enum_ok}/200 random models match the grid oracle (misses {misses:?})"));

    // policy agreement when sigma >= L_p/(p+1)!
    let fa = builtin_example_a(p);
    let mut agree = true;
    let mut cases = 0;
    for _ in 0..12 {
        let x = Point::scalar(p.from_f64(rng.random_range(0.9..1.1)));
        let sigma = p.int(3) + p.from_f64(rng.random_range(0.0..5.0));
        let m = RegularizedModel::new(build_taylor(&fa, &x, 3).unwrap(), sigma);
        let a = select(&SelectionPolicy::GlobalMin, &fa, &m, &p.zero()).unwrap();
        let b = select(&SelectionPolicy::LocalComponent, &fa, &m, &p.zero()).unwrap();
        let tol = m.taylor.gradient_at_x().norm().mul_pow2(-(p.mantissa_bits() as i64 - 8));
        agree &= a.point.distance(&b.point) <= tol;
        cases += 1;
    }
    g.check("8d", agree, format!("GlobalMin and LocalComponent agree within inner_tol on {cases} example A models"));

    // order estimator on constructed sequences
    let mut est_ok = true;
    let mut found = Vec::new();
    for (num, den) in [(4u32, 3u32), (2, 1), (3, 1)] {
        let rate = p.ratio(num as i64, den as u64);
        let e: Vec<Real> = (0..14).map(|k| (rate.powi(k) * p.ratio(1, 10).ln()).exp()).collect();
        let est = estimate_order(&e, OrderMode::SuccessfulOnly).unwrap();
        est_ok &= (&est.tail_q_order - &rate).abs() < r("1e-6") && (&est.r_order - &rate).abs() < r("1e-6");
        found.push(format!("{:.6}", est.tail_q_order));
    }
    let lin: Vec<Real> = (0..300).map(|k| p.ratio(2, 3).powi(k) * p.ratio(1, 10)).collect();
    let est = estimate_order(&lin, OrderMode::SuccessfulOnly).unwrap();
    est_ok &= (&est.tail_q_order - p.one()).abs() < r("0.01");
    found.insert(0, format!("{:.6}", est.tail_q_order));
    g.check("8e", est_ok, format!("estimated orders [{}] for targets [1, 4/3, 2, 3]", found.join(", ")));
}

/// Every strict local minimum seen on a fine grid of the model has a
/// matching enumerated minimizer, and none is lower than the best
/// enumerated one.
fn grid_matches(m: &RegularizedModel, cps: &[arp_core::subsolver::CandidateMinimizer], sigma: f64) -> bool {
    let t: Vec<f64> = m.taylor.terms().iter().map(|x| x.as_scalar().to_f64()).collect();
    let pp = m.taylor.order();
    // terms already carry the 1/j! factor
    let model = |s: f64| {
        let mut v = sigma * s.abs().powi(pp as i32 + 1);
        for j in 1..=pp {
            v += t[j] * s.powi(j as i32);
        }
        v
    };
    let slope = |s: f64| {
        let mut v = (pp as f64 + 1.0) * sigma * s.abs().powi(pp as i32) * s.signum();
        for j in 1..=pp {
            v += j as f64 * t[j] * s.powi(j as i32 - 1);
        }
        v
    };
    let bound = 1.0 + (1..=pp).map(|j| j as f64 * t[j].abs()).fold(0.0, f64::max) / ((pp as f64 + 1.0) * sigma);
    let n = 400_000;
    let h = 2.0 * bound / n as f64;
    let mins: Vec<f64> = cps.iter().filter(|c| c.kind == CandidateKind::StrictLocalMin).map(|c| c.step.as_scalar().to_f64()).collect();
    let best = cps.iter().map(|c| c.increment.to_f64()).fold(0.0, f64::min);
    let mut prev = slope(-bound);
    let mut grid_best = f64::INFINITY;
    for i in 1..=n {
        let s = -bound + h * i as f64;
        let cur = slope(s);
        grid_best = grid_best.min(model(s));
        if prev < 0.0 && cur > 0.0 && !mins.iter().any(|c| (c - s).abs() <= 2.0 * h) {
            return false;
        }
        prev = cur;
    }
    best <= grid_best + 1e-9 * (1.0 + grid_best.abs())
}

#[test]
fn acceptance() {
    let mut g = Gate { failed: Vec::new() };
    let ex = oscillation(&mut g);
    let top = top_panel(&mut g);
    let ar4 = bottom_panel(&mut g);
    let fa = builtin_example_a(prec());
    let fb = builtin_example_b(4, 4, prec()).unwrap();
    lemma_audits(
        &mut g,
        &[("oscillation", &ex, &fa), ("top-component", &top.local, &fa), ("top-global", &top.global, &fa), ("bottom-ar4", &ar4, &fb)],
    );
    sigma_star(&mut g);
    cycle_ratios(&mut g, &top.global);
    property_suites(&mut g);
    assert!(g.failed.is_empty(), "failed criteria: {:?}", g.failed);
}
