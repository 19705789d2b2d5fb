//! Objective functions with exact derivative oracles.
//!
//! Built-in objectives are small polynomials whose derivatives are computed in
//! closed form, so the solver never sees differentiation error.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::exec::Execution;
use crate::point::{Point, Tensor};
use crate::poly::Polynomial1D;
use crate::precision::{factorial, PrecisionConfig, Real};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ObjectiveError {
    #[error("example B needs an even q >= 2 and p > q - 1 (got p = {p}, q = {q})")]
    InvalidExampleB { p: usize, q: usize },
    #[error("derivative of order {order} requested but only {p_max} are available")]
    OrderUnavailable { order: usize, p_max: usize },
    #[error("objective `{0}` carries no convexity metadata")]
    MissingMetadata(String),
    #[error("point has dimension {got}, objective expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Exact derivatives of a function R^n -> R.
pub trait DerivativeOracle: Send + Sync {
    fn dimension(&self) -> usize;

    /// Highest derivative order available.
    fn p_max(&self) -> usize;

    /// The `order`-th derivative tensor at `x` (order 0 is the value).
    /// Callers guarantee `order <= p_max()`.
    fn derivative(&self, order: usize, x: &Point) -> Tensor;

    /// Total degree for polynomial objectives, enabling exact increments.
    fn degree(&self) -> Option<usize> {
        None
    }
}

/// `n (n-1) ... (n-j+1)`.
fn falling(n: usize, j: usize) -> i64 {
    (n - j + 1..=n).map(|v| v as i64).product()
}

impl DerivativeOracle for Polynomial1D {
    fn dimension(&self) -> usize {
        1
    }

    fn p_max(&self) -> usize {
        usize::MAX
    }

    fn derivative(&self, order: usize, x: &Point) -> Tensor {
        let prec = self.precision();
        let t = x.as_scalar();
        let mut acc = prec.zero();
        for (i, c) in self.coeffs().iter().enumerate().skip(order).rev() {
            acc = acc * t + c * prec.int(falling(i, order));
        }
        Tensor::from_data(order, 1, vec![acc])
    }

    fn degree(&self) -> Option<usize> {
        Some(Polynomial1D::degree(self).unwrap_or(0))
    }
}

/// A polynomial stored in powers of `u = x - center`. Derivatives evaluated
/// near the center keep full relative accuracy, which a monomial-basis
/// Horner scheme loses to cancellation.
#[derive(Clone, Debug)]
pub struct CenteredPolynomial {
    pub center: Real,
    pub poly: Polynomial1D,
}

impl DerivativeOracle for CenteredPolynomial {
    fn dimension(&self) -> usize {
        1
    }

    fn p_max(&self) -> usize {
        usize::MAX
    }

    fn derivative(&self, order: usize, x: &Point) -> Tensor {
        let u = Point::scalar(x.as_scalar() - &self.center);
        DerivativeOracle::derivative(&self.poly, order, &u)
    }

    fn degree(&self) -> Option<usize> {
        DerivativeOracle::degree(&self.poly)
    }
}

/// `x^q / q + x^(p+1) / (p+1)`, with derivatives of order >= 1 formed from
/// integer falling factorials so they are exact.
#[derive(Clone, Debug)]
struct ExampleB {
    p: usize,
    q: usize,
    prec: PrecisionConfig,
}

impl ExampleB {
    fn term(&self, n: usize, order: usize, x: &Real) -> Real {
        let prec = self.prec;
        match order {
            0 => x.powi(n as u32) / prec.int(n as i64),
            j if j <= n => x.powi((n - j) as u32) * prec.int(falling(n - 1, j - 1)),
            _ => prec.zero(),
        }
    }
}

impl DerivativeOracle for ExampleB {
    fn dimension(&self) -> usize {
        1
    }

    fn p_max(&self) -> usize {
        usize::MAX
    }

    fn derivative(&self, order: usize, x: &Point) -> Tensor {
        let t = x.as_scalar();
        let v = self.term(self.q, order, t) + self.term(self.p + 1, order, t);
        Tensor::from_data(order, 1, vec![v])
    }

    fn degree(&self) -> Option<usize> {
        Some(self.p + 1)
    }
}

/// Ground truth about a local minimizer, used by audits and error metrics.
#[derive(Clone, Debug)]
pub struct ConvexityMeta {
    pub x_star: Point,
    pub f_star: Real,
    /// Order of local uniform convexity.
    pub q: usize,
    pub mu_q: Real,
    /// Radius of the ball on which the convexity bound holds.
    pub r_q: Real,
    /// Derivative order `p` to which `l_p` refers.
    pub p: usize,
    /// Lipschitz constant of the `p`-th derivative.
    pub l_p: Real,
    /// Local Hessian bound.
    pub nu: Real,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ObjectiveKind {
    ExampleA,
    ExampleB { p: usize, q: usize },
    Poly1d,
    Custom,
}

/// An objective together with its oracle and optional metadata. Cheap to
/// clone and safe to share across threads.
#[derive(Clone)]
pub struct ObjectiveSpec {
    pub id: String,
    pub kind: ObjectiveKind,
    pub oracle: Arc<dyn DerivativeOracle>,
    pub meta: Option<ConvexityMeta>,
}

impl fmt::Debug for ObjectiveSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ObjectiveSpec")
            .field("id", &self.id)
            .field("kind", &self.kind)
            .field("dimension", &self.dimension())
            .field("meta", &self.meta)
            .finish()
    }
}

impl ObjectiveSpec {
    pub fn custom(id: impl Into<String>, oracle: Arc<dyn DerivativeOracle>, meta: Option<ConvexityMeta>) -> Self {
        ObjectiveSpec { id: id.into(), kind: ObjectiveKind::Custom, oracle, meta }
    }

    /// Polynomial objective from ascending coefficients.
    pub fn poly1d(coeffs: Vec<Real>, prec: PrecisionConfig) -> Self {
        let poly = Polynomial1D::new(coeffs, prec);
        ObjectiveSpec {
            id: "poly1d".into(),
            kind: ObjectiveKind::Poly1d,
            oracle: Arc::new(poly),
            meta: None,
        }
    }

    pub fn with_meta(mut self, meta: ConvexityMeta) -> Self {
        self.meta = Some(meta);
        self
    }

    pub fn dimension(&self) -> usize {
        self.oracle.dimension()
    }

    pub fn p_max(&self) -> usize {
        self.oracle.p_max()
    }

    pub fn meta(&self) -> Result<&ConvexityMeta, ObjectiveError> {
        self.meta.as_ref().ok_or_else(|| ObjectiveError::MissingMetadata(self.id.clone()))
    }

    pub fn check_point(&self, x: &Point) -> Result<(), ObjectiveError> {
        if x.dim() != self.dimension() {
            return Err(ObjectiveError::DimensionMismatch { expected: self.dimension(), got: x.dim() });
        }
        Ok(())
    }

    pub fn try_derivative(&self, order: usize, x: &Point) -> Result<Tensor, ObjectiveError> {
        if order > self.p_max() {
            return Err(ObjectiveError::OrderUnavailable { order, p_max: self.p_max() });
        }
        self.check_point(x)?;
        Ok(self.oracle.derivative(order, x))
    }

    /// Panics if `order` exceeds `p_max` or the dimension is wrong.
    pub fn derivative(&self, order: usize, x: &Point) -> Tensor {
        self.try_derivative(order, x).unwrap_or_else(|e| panic!("{e}"))
    }

    pub fn value(&self, x: &Point) -> Real {
        self.derivative(0, x).as_scalar().clone()
    }

    pub fn gradient(&self, x: &Point) -> Point {
        self.derivative(1, x).to_point()
    }

    /// `f(x + d) - f(x)`. For polynomials this is the full Taylor sum at `x`,
    /// which stays accurate when `d` is far below the resolution of `f(x)`.
    pub fn increment(&self, x: &Point, d: &Point) -> Real {
        let Some(deg) = self.oracle.degree() else {
            return self.value(&x.add(d)) - self.value(x);
        };
        let prec = d.precision();
        let mut acc = prec.zero();
        for j in 1..=deg {
            let t = self.derivative(j, x).contract_times(d, j);
            acc += t.as_scalar() / factorial(j as u32, prec);
        }
        acc
    }

    /// `f(x) - f*`, evaluated as an increment from the known minimizer.
    pub fn gap(&self, x: &Point) -> Result<Real, ObjectiveError> {
        let m = self.meta()?;
        Ok(self.increment(&m.x_star, &x.sub(&m.x_star)) + (self.value(&m.x_star) - &m.f_star))
    }
}

/// `f(x) = 3x^4 - 4x^3`, minimizer `x* = 1`, `f* = -1`.
pub fn builtin_example_a(prec: PrecisionConfig) -> ObjectiveSpec {
    // 3x^4 - 4x^3 = -1 + 6u^2 + 8u^3 + 3u^4 with u = x - 1
    let coeffs = [-1, 0, 6, 8, 3].iter().map(|&c| prec.int(c)).collect();
    let oracle = CenteredPolynomial { center: prec.one(), poly: Polynomial1D::new(coeffs, prec) };
    let meta = ConvexityMeta {
        x_star: Point::scalar(prec.one()),
        f_star: prec.int(-1),
        q: 2,
        mu_q: prec.int(4),
        r_q: prec.ratio(1, 10),
        p: 3,
        l_p: prec.int(72),
        nu: prec.int(30),
    };
    ObjectiveSpec {
        id: "exampleA".into(),
        kind: ObjectiveKind::ExampleA,
        oracle: Arc::new(oracle),
        meta: Some(meta),
    }
}

/// `f(x) = x^q / q + x^(p+1) / (p+1)`, minimizer `x* = 0`, `L_p = p!`.
pub fn builtin_example_b(p: usize, q: usize, prec: PrecisionConfig) -> Result<ObjectiveSpec, ObjectiveError> {
    if q < 2 || q % 2 != 0 || p + 1 <= q {
        return Err(ObjectiveError::InvalidExampleB { p, q });
    }
    let oracle = ExampleB { p, q, prec };
    let meta = ConvexityMeta {
        x_star: Point::scalar(prec.zero()),
        f_star: prec.zero(),
        q,
        mu_q: prec.pow2(-(q as i64)),
        r_q: prec.ratio(1, 4),
        p,
        l_p: factorial(p as u32, prec),
        nu: prec.int(2),
    };
    Ok(ObjectiveSpec {
        id: format!("exampleB(p={p},q={q})"),
        kind: ObjectiveKind::ExampleB { p, q },
        oracle: Arc::new(oracle),
        meta: Some(meta),
    })
}

/// Max absolute difference between the `order`-th derivative and a central
/// difference of the `(order - 1)`-th derivative with step `h`.
pub fn finite_difference_check(f: &ObjectiveSpec, order: usize, x: &Point, h: &Real) -> Real {
    assert!(order >= 1 && order <= f.p_max(), "order out of range");
    assert!(h.is_positive(), "step must be positive");
    let n = f.dimension();
    let prec = h.precision();
    let exact = f.derivative(order, x);
    let two_h = h.mul_pow2(1);
    let mut worst = prec.zero();
    for i in 0..n {
        let mut e = Point::zeros(n, prec);
        let mut coords = e.coords().to_vec();
        coords[i] = prec.one();
        e = Point::new(coords);
        let plus = f.derivative(order - 1, &x.offset(h, &e));
        let minus = f.derivative(order - 1, &x.offset(&-h, &e));
        for (k, (a, b)) in plus.data().iter().zip(minus.data()).enumerate() {
            let fd = (a - b) / &two_h;
            let d = (fd - &exact.data()[k * n + i]).abs();
            worst = worst.max(d);
        }
    }
    worst
}

/// Worst margins (left minus right side, so negative means violated) of the
/// local uniform convexity inequalities and the Hessian-bound consequences.
#[derive(Clone, Debug)]
pub struct ConvexityReport {
    /// `(g(x) - g(y))^T (x - y) - mu |x - y|^q` over sampled pairs.
    pub gradient_monotonicity: Real,
    /// `f(y) - f(x) - g(x)^T (y - x) - (mu / q) |y - x|^q` over sampled pairs.
    pub function_convexity: Real,
    /// `f(x) - f* - (mu / q) e^q`.
    pub growth: Real,
    /// `|g(x)| - mu e^(q-1)`.
    pub gradient_growth: Real,
    /// `((q-1)/q) mu^(-1/(q-1)) |g(x)|^(q/(q-1)) - (f(x) - f*)`.
    pub gradient_domination: Real,
    /// `(nu / 2) e^2 - (f(x) - f*)`.
    pub quadratic_upper: Real,
    /// `nu e - |g(x)|`.
    pub gradient_upper: Real,
    pub points: usize,
    pub pairs: usize,
}

impl ConvexityReport {
    pub fn worst(&self) -> Real {
        [
            &self.gradient_monotonicity,
            &self.function_convexity,
            &self.growth,
            &self.gradient_growth,
            &self.gradient_domination,
            &self.quadratic_upper,
            &self.gradient_upper,
        ]
        .into_iter()
        .cloned()
        .min()
        .expect("non-empty")
    }

    pub fn consistent(&self) -> bool {
        !self.worst().is_negative()
    }
}

pub(crate) struct PointMargins(pub(crate) [Real; 5]);

pub(crate) fn point_margins(f: &ObjectiveSpec, m: &ConvexityMeta, x: &Point) -> PointMargins {
    let prec = m.mu_q.precision();
    let q = m.q as u32;
    let qr = prec.int(m.q as i64);
    let e = x.distance(&m.x_star);
    let gap = f.increment(&m.x_star, &x.sub(&m.x_star)) + (f.value(&m.x_star) - &m.f_star);
    let g = f.gradient(x).norm();
    let growth = &gap - &m.mu_q / &qr * e.powi(q);
    let gradient_growth = &g - &m.mu_q * e.powi(q - 1);
    let coef = prec.int(m.q as i64 - 1) / &qr * (prec.one() / &m.mu_q).pow_ratio(1, q - 1);
    let domination = coef * g.pow_ratio(q, q - 1) - &gap;
    let quad = m.nu.mul_pow2(-1) * e.square() - &gap;
    let grad_upper = &m.nu * &e - &g;
    PointMargins([growth, gradient_growth, domination, quad, grad_upper])
}

fn pair_margins(f: &ObjectiveSpec, m: &ConvexityMeta, x: &Point, y: &Point) -> (Real, Real) {
    let prec = m.mu_q.precision();
    let q = m.q as u32;
    let d = y.sub(x);
    let dq = d.norm().powi(q);
    let gx = f.gradient(x);
    let gy = f.gradient(y);
    let mono = gx.sub(&gy).dot(&d.neg()) - &m.mu_q * &dq;
    let conv = f.increment(x, &d) - gx.dot(&d) - &m.mu_q / prec.int(m.q as i64) * &dq;
    (mono, conv)
}

/// Samples a point uniformly from the ball `B(center, r)` by rejection.
fn sample_ball(rng: &mut ChaCha8Rng, center: &Point, r: &Real) -> Point {
    let n = center.dim();
    let prec = r.precision();
    loop {
        let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
        if u.iter().map(|v| v * v).sum::<f64>() <= 1.0 {
            let d = Point::new(u.iter().map(|&v| prec.from_f64(v)).collect());
            return center.offset(r, &d);
        }
    }
}

/// Checks the convexity metadata against the objective on `samples` points
/// of `B(x*, r_q)` (a uniform grid in 1-D, seeded random draws otherwise)
/// and as many point pairs.
pub fn audit_uniform_convexity(
    f: &ObjectiveSpec,
    samples: usize,
    exec: Execution,
) -> Result<ConvexityReport, ObjectiveError> {
    let m = f.meta()?;
    let prec = m.mu_q.precision();
    let samples = samples.max(2);
    let n = f.dimension();
    let points: Vec<Point> = if n == 1 {
        let x0 = m.x_star.as_scalar();
        let step = m.r_q.mul_pow2(1) / prec.int(samples as i64 - 1);
        (0..samples)
            .map(|i| Point::scalar(x0 - &m.r_q + &step * prec.int(i as i64)))
            .collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        (0..samples).map(|_| sample_ball(&mut rng, &m.x_star, &m.r_q)).collect()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0xba11);
    let mut pairs: Vec<(Point, Point)> = (0..samples)
        .map(|_| (sample_ball(&mut rng, &m.x_star, &m.r_q), sample_ball(&mut rng, &m.x_star, &m.r_q)))
        .collect();
    // structured pairs: every point against the minimizer and its neighbour
    for (i, p) in points.iter().enumerate() {
        pairs.push((p.clone(), m.x_star.clone()));
        if let Some(next) = points.get(i + 1) {
            pairs.push((p.clone(), next.clone()));
        }
    }

    let pm = exec.map(&points, |x| point_margins(f, m, x));
    let pp = exec.map(&pairs, |(x, y)| pair_margins(f, m, x, y));
    let col = |j: usize| pm.iter().map(|r| r.0[j].clone()).min().expect("points");
    Ok(ConvexityReport {
        gradient_monotonicity: pp.iter().map(|r| r.0.clone()).min().expect("pairs"),
        function_convexity: pp.iter().map(|r| r.1.clone()).min().expect("pairs"),
        growth: col(0),
        gradient_growth: col(1),
        gradient_domination: col(2),
        quadratic_upper: col(3),
        gradient_upper: col(4),
        points: points.len(),
        pairs: pairs.len(),
    })
}
