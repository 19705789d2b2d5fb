//! Points in R^n and dense derivative tensors.

use std::fmt;

use crate::precision::{PrecisionConfig, Real};

/// A point (or displacement) in R^n.
#[derive(Clone, PartialEq, Eq)]
pub struct Point(Vec<Real>);

impl Point {
    pub fn new(coords: Vec<Real>) -> Self {
        assert!(!coords.is_empty(), "points have at least one coordinate");
        Point(coords)
    }

    pub fn scalar(x: Real) -> Self {
        Point(vec![x])
    }

    pub fn zeros(dim: usize, prec: PrecisionConfig) -> Self {
        Point::new(vec![prec.zero(); dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[Real] {
        &self.0
    }

    pub fn precision(&self) -> PrecisionConfig {
        self.0[0].precision()
    }

    /// The single coordinate of a 1-D point.
    pub fn as_scalar(&self) -> &Real {
        assert_eq!(self.dim(), 1, "expected a 1-D point");
        &self.0[0]
    }

    pub fn norm(&self) -> Real {
        if self.dim() == 1 {
            return self.0[0].abs();
        }
        self.dot(self).sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(Real::is_zero)
    }

    pub fn dot(&self, other: &Point) -> Real {
        assert_eq!(self.dim(), other.dim());
        let mut acc = self.precision().zero();
        for (a, b) in self.0.iter().zip(&other.0) {
            acc += a * b;
        }
        acc
    }

    pub fn add(&self, other: &Point) -> Point {
        assert_eq!(self.dim(), other.dim());
        Point(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Point) -> Point {
        assert_eq!(self.dim(), other.dim());
        Point(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, s: &Real) -> Point {
        Point(self.0.iter().map(|a| a * s).collect())
    }

    pub fn neg(&self) -> Point {
        Point(self.0.iter().map(|a| -a).collect())
    }

    pub fn distance(&self, other: &Point) -> Real {
        self.sub(other).norm()
    }

    /// `axpy`: `self + s * d`.
    pub fn offset(&self, s: &Real, d: &Point) -> Point {
        assert_eq!(self.dim(), d.dim());
        Point(self.0.iter().zip(&d.0).map(|(a, b)| a + s * b).collect())
    }

    pub fn to_decimal_string(&self) -> String {
        self.0
            .iter()
            .map(Real::to_decimal_string)
            .collect::<Vec<_>>()
            .join(";")
    }

    pub fn parse(s: &str, prec: PrecisionConfig) -> Result<Point, crate::precision::PrecisionError> {
        let coords = s
            .split(';')
            .map(|c| prec.parse_rational(c.trim()))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Point::new(coords))
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

impl From<Real> for Point {
    fn from(x: Real) -> Self {
        Point::scalar(x)
    }
}

/// Dense tensor of order `order` over R^dim, stored row-major. Derivative
/// tensors are symmetric, so contraction always consumes the trailing index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tensor {
    order: usize,
    dim: usize,
    data: Vec<Real>,
}

impl Tensor {
    pub fn scalar(v: Real) -> Self {
        Tensor { order: 0, dim: 1, data: vec![v] }
    }

    pub fn from_data(order: usize, dim: usize, data: Vec<Real>) -> Self {
        assert_eq!(data.len(), dim.pow(order as u32), "tensor data length");
        Tensor { order, dim, data }
    }

    pub fn zeros(order: usize, dim: usize, prec: PrecisionConfig) -> Self {
        Tensor::from_data(order, dim, vec![prec.zero(); dim.pow(order as u32)])
    }

    pub fn vector(p: &Point) -> Self {
        Tensor::from_data(1, p.dim(), p.coords().to_vec())
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[Real] {
        &self.data
    }

    /// Value of a 1-D tensor (any order) or an order-0 tensor.
    pub fn as_scalar(&self) -> &Real {
        assert_eq!(self.data.len(), 1, "tensor is not scalar-valued");
        &self.data[0]
    }

    pub fn to_point(&self) -> Point {
        assert_eq!(self.order, 1, "only order-1 tensors are vectors");
        Point::new(self.data.clone())
    }

    pub fn get(&self, idx: &[usize]) -> &Real {
        assert_eq!(idx.len(), self.order);
        let flat = idx.iter().fold(0, |acc, &i| acc * self.dim + i);
        &self.data[flat]
    }

    pub fn scale(&self, s: &Real) -> Tensor {
        Tensor {
            order: self.order,
            dim: self.dim,
            data: self.data.iter().map(|a| a * s).collect(),
        }
    }

    pub fn add(&self, other: &Tensor) -> Tensor {
        assert_eq!((self.order, self.dim), (other.order, other.dim));
        Tensor {
            order: self.order,
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    /// Contracts the trailing index with `d`.
    pub fn contract(&self, d: &Point) -> Tensor {
        assert!(self.order > 0, "cannot contract a scalar");
        assert_eq!(d.dim(), self.dim);
        let n = self.dim;
        let prec = d.precision();
        let data = self
            .data
            .chunks(n)
            .map(|row| {
                let mut acc = prec.zero();
                for (a, b) in row.iter().zip(d.coords()) {
                    acc += a * b;
                }
                acc
            })
            .collect();
        Tensor { order: self.order - 1, dim: n, data }
    }

    /// `T[d]^times`.
    pub fn contract_times(&self, d: &Point, times: usize) -> Tensor {
        let mut t = self.clone();
        for _ in 0..times {
            t = t.contract(d);
        }
        t
    }

    /// Max-abs entry.
    pub fn max_abs(&self) -> Real {
        self.data
            .iter()
            .map(Real::abs)
            .max()
            .expect("non-empty tensor")
    }

    /// Spectral-norm upper bound used for derivative comparisons: exact in 1-D,
    /// the Frobenius norm otherwise.
    pub fn norm(&self) -> Real {
        if self.data.len() == 1 {
            return self.data[0].abs();
        }
        let mut acc = self.data[0].precision().zero();
        for a in &self.data {
            acc += a * a;
        }
        acc.sqrt()
    }
}

/// Solves `H x = g` for symmetric positive definite `H` (order-2 tensor) by
/// Cholesky factorization. Returns `None` if `H` is not positive definite.
pub fn solve_spd(h: &Tensor, g: &Point) -> Option<Point> {
    assert_eq!(h.order(), 2);
    let n = h.dim();
    assert_eq!(g.dim(), n);
    let prec = g.precision();
    let mut l = vec![prec.zero(); n * n];
    for j in 0..n {
        let mut diag = h.get(&[j, j]).clone();
        for k in 0..j {
            diag -= l[j * n + k].square();
        }
        if !diag.is_positive() {
            return None;
        }
        let ljj = diag.sqrt();
        for i in j + 1..n {
            let mut s = h.get(&[i, j]).clone();
            for k in 0..j {
                s -= &l[i * n + k] * &l[j * n + k];
            }
            l[i * n + j] = s / &ljj;
        }
        l[j * n + j] = ljj;
    }
    let mut y = vec![prec.zero(); n];
    for i in 0..n {
        let mut s = g.coords()[i].clone();
        for k in 0..i {
            s -= &l[i * n + k] * &y[k];
        }
        y[i] = s / &l[i * n + i];
    }
    let mut x = vec![prec.zero(); n];
    for i in (0..n).rev() {
        let mut s = y[i].clone();
        for k in i + 1..n {
            s -= &l[k * n + i] * &x[k];
        }
        x[i] = s / &l[i * n + i];
    }
    Some(Point::new(x))
}
