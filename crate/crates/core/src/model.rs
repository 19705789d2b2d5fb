//! Taylor expansions and their regularized counterparts.

use thiserror::Error;

use crate::objective::{ObjectiveError, ObjectiveSpec};
use crate::point::{Point, Tensor};
use crate::poly::Polynomial1D;
use crate::precision::{factorial, Real};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error("Lipschitz constant is known for order {available}, not {requested}")]
    LipschitzOrder { requested: usize, available: usize },
}

/// Degree-`p` Taylor expansion `t(y) = sum_j T_j [y - x]^j` with
/// `T_j = grad^j f(x) / j!`.
#[derive(Clone, Debug)]
pub struct TaylorModel {
    x: Point,
    p: usize,
    terms: Vec<Tensor>,
}

pub fn build_taylor(f: &ObjectiveSpec, x: &Point, p: usize) -> Result<TaylorModel, ObjectiveError> {
    if p > f.p_max() {
        return Err(ObjectiveError::OrderUnavailable { order: p, p_max: f.p_max() });
    }
    f.check_point(x)?;
    let prec = x.precision();
    let terms = (0..=p)
        .map(|j| {
            let d = f.derivative(j, x);
            if j < 2 {
                d
            } else {
                d.scale(&(prec.one() / factorial(j as u32, prec)))
            }
        })
        .collect();
    Ok(TaylorModel { x: x.clone(), p, terms })
}

impl TaylorModel {
    pub fn expansion_point(&self) -> &Point {
        &self.x
    }

    pub fn order(&self) -> usize {
        self.p
    }

    pub fn terms(&self) -> &[Tensor] {
        &self.terms
    }

    pub fn f_x(&self) -> &Real {
        self.terms[0].as_scalar()
    }

    pub fn gradient_at_x(&self) -> Point {
        self.terms[1].to_point()
    }

    pub fn dimension(&self) -> usize {
        self.x.dim()
    }

    /// `t(x + d) - t(x)`, never touching the constant term.
    pub fn increment(&self, d: &Point) -> Real {
        let mut acc = d.precision().zero();
        for (j, t) in self.terms.iter().enumerate().skip(1) {
            acc += t.contract_times(d, j).as_scalar();
        }
        acc
    }

    pub fn eval(&self, y: &Point) -> Real {
        self.f_x() + self.increment(&y.sub(&self.x))
    }

    /// Gradient at `x + d`.
    pub fn grad_step(&self, d: &Point) -> Point {
        let prec = d.precision();
        let mut g = Point::zeros(self.dimension(), prec);
        for (j, t) in self.terms.iter().enumerate().skip(1) {
            let v = t.contract_times(d, j - 1).to_point();
            g = g.add(&v.scale(&prec.int(j as i64)));
        }
        g
    }

    pub fn grad(&self, y: &Point) -> Point {
        self.grad_step(&y.sub(&self.x))
    }

    /// Hessian at `x + d` as an order-2 tensor.
    pub fn hessian_step(&self, d: &Point) -> Tensor {
        let prec = d.precision();
        let n = self.dimension();
        let mut h = Tensor::zeros(2, n, prec);
        for (j, t) in self.terms.iter().enumerate().skip(2) {
            let v = t.contract_times(d, j - 2);
            h = h.add(&v.scale(&prec.int((j * (j - 1)) as i64)));
        }
        h
    }

    /// In 1-D, `t(x + s)` as a polynomial in `s`.
    pub fn shifted_polynomial(&self) -> Polynomial1D {
        assert_eq!(self.dimension(), 1, "shifted polynomial needs a 1-D model");
        let prec = self.x.precision();
        Polynomial1D::new(self.terms.iter().map(|t| t.as_scalar().clone()).collect(), prec)
    }
}

/// `m(y) = t(y) + sigma |y - x|^(p+1)`.
#[derive(Clone, Debug)]
pub struct RegularizedModel {
    pub taylor: TaylorModel,
    pub sigma: Real,
}

/// The two polynomial pieces of a 1-D regularized model in the step
/// variable `s = y - x`: `right` is valid for `s >= 0`, `left` for `s <= 0`.
#[derive(Clone, Debug)]
pub struct Branches {
    pub right: Polynomial1D,
    pub left: Polynomial1D,
}

impl RegularizedModel {
    pub fn new(taylor: TaylorModel, sigma: Real) -> Self {
        assert!(!sigma.is_negative(), "sigma must be nonnegative");
        RegularizedModel { taylor, sigma }
    }

    pub fn power(&self) -> usize {
        self.taylor.p + 1
    }

    pub fn expansion_point(&self) -> &Point {
        &self.taylor.x
    }

    pub fn dimension(&self) -> usize {
        self.taylor.dimension()
    }

    /// `sigma |d|^(p+1)`.
    pub fn regularizer(&self, d: &Point) -> Real {
        &self.sigma * d.norm().powi(self.power() as u32)
    }

    /// `m(x + d) - m(x)`.
    pub fn increment(&self, d: &Point) -> Real {
        self.taylor.increment(d) + self.regularizer(d)
    }

    pub fn eval(&self, y: &Point) -> Real {
        self.taylor.f_x() + self.increment(&y.sub(&self.taylor.x))
    }

    pub fn grad_step(&self, d: &Point) -> Point {
        let p = self.taylor.p;
        let prec = d.precision();
        let g = self.taylor.grad_step(d);
        if self.sigma.is_zero() || d.is_zero() {
            return g;
        }
        let c = prec.int(p as i64 + 1) * &self.sigma * d.norm().powi(p as u32 - 1);
        g.add(&d.scale(&c))
    }

    pub fn grad(&self, y: &Point) -> Point {
        self.grad_step(&y.sub(&self.taylor.x))
    }

    /// Hessian at `x + d`. At `d = 0` with `p = 2` the regularizer is not
    /// twice differentiable; its rank-one part is dropped there.
    pub fn hessian_step(&self, d: &Point) -> Tensor {
        let p = self.taylor.p as i64;
        let n = self.dimension();
        let prec = d.precision();
        let h = self.taylor.hessian_step(d);
        if self.sigma.is_zero() {
            return h;
        }
        let r = d.norm();
        let c = prec.int(p + 1) * &self.sigma;
        let mut data = vec![prec.zero(); n * n];
        if n == 1 {
            data[0] = c * prec.int(p) * r.powi(p as u32 - 1);
        } else {
            let diag = &c * r.powi(p as u32 - 1);
            let rank1 = if p >= 2 && !r.is_zero() {
                let k = (p - 1) as u32;
                Some(&c * prec.int(p - 1) * r.powi(k) / r.powi(2))
            } else {
                None
            };
            for i in 0..n {
                for j in 0..n {
                    let mut v = if i == j { diag.clone() } else { prec.zero() };
                    if let Some(k) = &rank1 {
                        v += k * &d.coords()[i] * &d.coords()[j];
                    }
                    data[i * n + j] = v;
                }
            }
        }
        h.add(&Tensor::from_data(2, n, data))
    }

    /// Polynomial pieces of a 1-D model in the step variable.
    pub fn branches(&self) -> Branches {
        let base = self.taylor.shifted_polynomial();
        let prec = self.sigma.precision();
        let k = self.power();
        let mut right = base.coeffs().to_vec();
        right.resize(k + 1, prec.zero());
        let mut left = right.clone();
        right[k] += &self.sigma;
        if k % 2 == 0 {
            left[k] += &self.sigma;
        } else {
            left[k] -= &self.sigma;
        }
        Branches { right: Polynomial1D::new(right, prec), left: Polynomial1D::new(left, prec) }
    }
}

/// Decreases achieved by a trial point.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decrease {
    /// `t(x) - t(y)`.
    pub taylor: Real,
    /// `m(x) - m(y)`.
    pub model: Real,
}

/// Computes `m(x) - m(y)` from the step increment and recovers
/// `t(x) - t(y) = (m(x) - m(y)) + sigma |y - x|^(p+1)`.
pub fn model_decrease(m: &RegularizedModel, y: &Point) -> Decrease {
    let d = y.sub(m.expansion_point());
    let model = -m.increment(&d);
    let taylor = &model + m.regularizer(&d);
    Decrease { taylor, model }
}

/// Margins (right minus left side) of the Taylor remainder bounds for value,
/// gradient and, in 1-D, second derivative.
#[derive(Clone, Debug)]
pub struct TaylorBoundMargins {
    pub value: Real,
    pub gradient: Real,
    pub hessian: Option<Real>,
}

impl TaylorBoundMargins {
    pub fn all_nonnegative(&self) -> bool {
        !self.value.is_negative()
            && !self.gradient.is_negative()
            && self.hessian.as_ref().is_none_or(|h| !h.is_negative())
    }
}

pub fn audit_taylor_bounds(f: &ObjectiveSpec, x: &Point, y: &Point, p: usize) -> Result<TaylorBoundMargins, ModelError> {
    let meta = f.meta()?;
    if meta.p != p {
        return Err(ModelError::LipschitzOrder { requested: p, available: meta.p });
    }
    let t = build_taylor(f, x, p)?;
    let prec = x.precision();
    let r = x.distance(y);
    let lp = &meta.l_p;
    let pu = p as u32;
    let value = lp / factorial(pu + 1, prec) * r.powi(pu + 1) - (f.value(y) - t.eval(y)).abs();
    let gradient = lp / factorial(pu, prec) * r.powi(pu) - f.gradient(y).sub(&t.grad(y)).norm();
    let hessian = (f.dimension() == 1).then(|| {
        let d = y.sub(x);
        let h_f = f.derivative(2, y).as_scalar().clone();
        let h_t = t.hessian_step(&d).as_scalar().clone();
        lp / factorial(pu - 1, prec) * r.powi(pu - 1) - (h_f - h_t).abs()
    });
    Ok(TaylorBoundMargins { value, gradient, hessian })
}
