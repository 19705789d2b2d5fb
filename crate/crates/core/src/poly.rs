//! Univariate polynomials and real-root isolation.
//!
//! Roots are isolated with a derivative cascade: the real roots of `P'` split
//! the search interval into pieces on which `P` is monotone, so each piece
//! holds at most one root of `P`, found by sign-based bisection. The
//! recursion bottoms out at linear polynomials. Unlike a fixed sign-change
//! grid this cannot miss pairs of nearby roots.

use crate::precision::{PrecisionConfig, Real};

/// Polynomial with coefficients in ascending degree. Trailing zero
/// coefficients are trimmed on construction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Polynomial1D {
    coeffs: Vec<Real>,
    prec: PrecisionConfig,
}

/// A real root located to working precision.
#[derive(Clone, Debug)]
pub struct IsolatedRoot {
    pub at: Real,
    /// Sign of the polynomial just left of the root (-1, 0 or 1).
    pub sign_left: i32,
    /// Sign of the polynomial just right of the root.
    pub sign_right: i32,
}

impl Polynomial1D {
    pub fn new(mut coeffs: Vec<Real>, prec: PrecisionConfig) -> Self {
        while coeffs.last().is_some_and(Real::is_zero) {
            coeffs.pop();
        }
        Polynomial1D { coeffs, prec }
    }

    pub fn zero(prec: PrecisionConfig) -> Self {
        Polynomial1D { coeffs: Vec::new(), prec }
    }

    pub fn coeffs(&self) -> &[Real] {
        &self.coeffs
    }

    pub fn precision(&self) -> PrecisionConfig {
        self.prec
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn coeff(&self, i: usize) -> Real {
        self.coeffs.get(i).cloned().unwrap_or_else(|| self.prec.zero())
    }

    pub fn eval(&self, x: &Real) -> Real {
        let mut acc = self.prec.zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    pub fn derivative(&self) -> Polynomial1D {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, c)| c * self.prec.int(i as i64))
            .collect();
        Polynomial1D::new(coeffs, self.prec)
    }

    /// `P(x) - P(0)` evaluated without forming `P(x)`; exact cancellation of the
    /// constant term matters when `|x|` is tiny.
    pub fn eval_increment(&self, x: &Real) -> Real {
        let mut acc = self.prec.zero();
        for c in self.coeffs.iter().skip(1).rev() {
            acc = acc * x + c;
        }
        acc * x
    }

    /// Cauchy bound: every real root lies in `[-R, R]`.
    pub fn root_bound(&self) -> Real {
        let n = self.coeffs.len();
        let one = self.prec.one();
        if n <= 1 {
            return one;
        }
        let lead = self.coeffs[n - 1].abs();
        let m = self.coeffs[..n - 1]
            .iter()
            .map(|c| c.abs() / &lead)
            .max()
            .unwrap_or_else(|| self.prec.zero());
        one + m
    }

    /// All real roots in `[lo, hi]`, ascending, each refined by bisection until
    /// the bracket's relative width is at most `2^-(mantissa_bits - 8)`.
    ///
    /// Panics on the zero polynomial.
    pub fn roots_in(&self, lo: &Real, hi: &Real) -> Vec<IsolatedRoot> {
        assert!(!self.is_zero(), "roots of the zero polynomial are not isolated");
        assert!(lo <= hi);
        let deg = self.degree().unwrap_or(0);
        if deg == 0 {
            return Vec::new();
        }
        if deg == 1 {
            let r = -(&self.coeffs[0]) / &self.coeffs[1];
            if &r < lo || &r > hi {
                return Vec::new();
            }
            let s = self.coeffs[1].signum();
            return vec![IsolatedRoot { at: r, sign_left: -s, sign_right: s }];
        }
        let mut knots = vec![lo.clone()];
        for c in self.derivative().roots_in(lo, hi) {
            if &c.at > knots.last().expect("non-empty") && &c.at < hi {
                knots.push(c.at);
            }
        }
        if hi > lo {
            knots.push(hi.clone());
        }
        let values: Vec<Real> = knots.iter().map(|k| self.eval(k)).collect();
        let mut roots: Vec<IsolatedRoot> = Vec::new();
        for i in 0..knots.len() {
            if values[i].is_zero() {
                let left = if i > 0 { values[i - 1].signum() } else { 0 };
                let right = values.get(i + 1).map_or(0, Real::signum);
                roots.push(IsolatedRoot { at: knots[i].clone(), sign_left: left, sign_right: right });
            }
            if i + 1 < knots.len() {
                let (su, sv) = (values[i].signum(), values[i + 1].signum());
                if su * sv < 0 {
                    let at = self.bisect(&knots[i], &knots[i + 1], su);
                    roots.push(IsolatedRoot { at, sign_left: su, sign_right: sv });
                }
            }
        }
        roots
    }

    /// Real roots on the whole line.
    pub fn real_roots(&self) -> Vec<IsolatedRoot> {
        let r = self.root_bound();
        self.roots_in(&-&r, &r)
    }

    fn bisect(&self, lo: &Real, hi: &Real, sign_lo: i32) -> Real {
        let width_bits = self.prec.mantissa_bits() as i64 - 8;
        let mut u = lo.clone();
        let mut v = hi.clone();
        // a bracket straddling zero never shrinks in relative terms
        if u.is_negative() && v.is_positive() {
            let zero = self.prec.zero();
            match self.coeff(0).signum() {
                0 => return zero,
                s if s == sign_lo => u = zero,
                _ => v = zero,
            }
        }
        loop {
            let mid = (&u + &v).mul_pow2(-1);
            if mid == u || mid == v {
                break;
            }
            let scale = u.abs().max(v.abs());
            if (&v - &u) <= scale.mul_pow2(-width_bits) {
                break;
            }
            let pm = self.eval(&mid);
            match pm.signum() {
                0 => return mid,
                s if s == sign_lo => u = mid,
                _ => v = mid,
            }
        }
        if self.eval(&u).abs() <= self.eval(&v).abs() {
            u
        } else {
            v
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(c: &[i64]) -> Polynomial1D {
        let p = PrecisionConfig::default();
        Polynomial1D::new(c.iter().map(|&v| p.int(v)).collect(), p)
    }

    #[test]
    fn horner_and_derivative() {
        let f = poly(&[0, 0, 0, -4, 3]);
        let p = f.precision();
        assert_eq!(f.eval(&p.int(1)), p.int(-1));
        assert_eq!(f.derivative().coeffs(), poly(&[0, 0, -12, 12]).coeffs());
        assert_eq!(f.eval_increment(&p.int(2)), p.int(16));
        assert_eq!(poly(&[1, 2, 0, 0]).degree(), Some(1));
        assert_eq!(poly(&[0]).degree(), None);
    }

    #[test]
    fn isolates_simple_roots() {
        // (x - 1)(x + 2)(x - 3) = x^3 - 2x^2 - 5x + 6
        let f = poly(&[6, -5, -2, 1]);
        let p = f.precision();
        let roots: Vec<Real> = f.real_roots().into_iter().map(|r| r.at).collect();
        let expect = [p.int(-2), p.int(1), p.int(3)];
        assert_eq!(roots.len(), 3);
        for (r, e) in roots.iter().zip(&expect) {
            assert!((r - e).abs() <= p.pow2(-495), "{r:?} vs {e:?}");
        }
    }

    #[test]
    fn separates_nearby_roots() {
        // roots 1 and 1 + 2^-200 share any reasonable grid cell
        let p = PrecisionConfig::default();
        let a = p.one();
        let b = p.one() + p.pow2(-200);
        let f = Polynomial1D::new(vec![&a * &b, -(&a + &b), p.one()], p);
        let roots = f.real_roots();
        assert_eq!(roots.len(), 2);
        assert!((&roots[1].at - &roots[0].at - p.pow2(-200)).abs() < p.pow2(-400));
        assert_eq!((roots[0].sign_left, roots[0].sign_right), (1, -1));
    }

    #[test]
    fn finds_tiny_root_near_zero() {
        let p = PrecisionConfig::default();
        let tiny = p.parse("1e-90").unwrap();
        // (x - tiny)(x + 3)
        let f = Polynomial1D::new(vec![-(&tiny * p.int(3)), p.int(3) - &tiny, p.one()], p);
        let roots = f.roots_in(&p.zero(), &p.int(10));
        assert_eq!(roots.len(), 1);
        assert!(((&roots[0].at - &tiny) / &tiny).abs() < p.pow2(-500));
    }

    #[test]
    fn exact_zero_at_knot() {
        // x^2 (x - 2): double root at 0 reported once
        let f = poly(&[0, 0, -2, 1]);
        let roots = f.real_roots();
        assert_eq!(roots.len(), 2);
        assert!(roots[0].at.is_zero());
        assert_eq!((roots[0].sign_left, roots[0].sign_right), (-1, -1));
    }
}
