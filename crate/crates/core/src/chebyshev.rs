//! Truncated Chebyshev series on the unit interval.
//!
//! A series stores coefficients `c_k` of `f(x) = sum c_k T_k(2x - 1)` for
//! `x` in `[0, 1]`. Products and derivatives stay inside the representation,
//! which is what the associated matrices and the regularization check rely on.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Debug, PartialEq, Default)]
pub struct ChebSeries {
    coeffs: Vec<Complex64>,
}

impl ChebSeries {
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        ChebSeries { coeffs }
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        ChebSeries {
            coeffs: coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect(),
        }
    }

    pub fn zero() -> Self {
        ChebSeries { coeffs: Vec::new() }
    }

    pub fn constant(c: Complex64) -> Self {
        ChebSeries { coeffs: vec![c] }
    }

    /// The identity function `x`.
    pub fn x() -> Self {
        ChebSeries::from_real(&[0.5, 0.5])
    }

    /// Builds a series from monomial coefficients `a_0 + a_1 x + a_2 x^2 + ...`.
    pub fn from_monomials(a: &[f64]) -> Self {
        let x = ChebSeries::x();
        let mut acc = ChebSeries::zero();
        for &ak in a.iter().rev() {
            acc = &(&acc * &x) + &ChebSeries::constant(Complex64::new(ak, 0.0));
        }
        acc
    }

    /// Interpolates `f` at `degree + 1` Chebyshev points of the first kind.
    pub fn interpolate<F: Fn(f64) -> Complex64>(degree: usize, f: F) -> Self {
        let m = degree + 1;
        let samples: Vec<Complex64> = (0..m)
            .map(|j| {
                let theta = PI * (j as f64 + 0.5) / m as f64;
                f(0.5 * (theta.cos() + 1.0))
            })
            .collect();
        let coeffs = (0..m)
            .map(|k| {
                let s: Complex64 = samples
                    .iter()
                    .enumerate()
                    .map(|(j, v)| v * (k as f64 * PI * (j as f64 + 0.5) / m as f64).cos())
                    .sum();
                let w = if k == 0 { 1.0 } else { 2.0 };
                s * (w / m as f64)
            })
            .collect();
        ChebSeries { coeffs }
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// True when every coefficient vanishes exactly.
    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == ZERO)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Drops trailing coefficients with modulus at most `tol`.
    pub fn trimmed(mut self, tol: f64) -> Self {
        while self.coeffs.last().is_some_and(|c| c.norm() <= tol) {
            self.coeffs.pop();
        }
        self
    }

    /// Clenshaw evaluation at `x`.
    pub fn eval(&self, x: f64) -> Complex64 {
        let t = 2.0 * x - 1.0;
        let mut b1 = ZERO;
        let mut b2 = ZERO;
        for c in self.coeffs.iter().skip(1).rev() {
            let b0 = c + b1 * (2.0 * t) - b2;
            b2 = b1;
            b1 = b0;
        }
        match self.coeffs.first() {
            Some(c0) => c0 + b1 * t - b2,
            None => ZERO,
        }
    }

    /// Derivative with respect to `x`.
    pub fn derivative(&self) -> Self {
        let n = self.coeffs.len();
        if n <= 1 {
            return ChebSeries::zero();
        }
        let mut d = vec![ZERO; n + 1];
        for k in (1..n).rev() {
            d[k - 1] = d[k + 1] + self.coeffs[k] * (2.0 * k as f64);
        }
        d[0] *= 0.5;
        d.truncate(n - 1);
        // chain rule for t = 2x - 1
        ChebSeries {
            coeffs: d.into_iter().map(|c| c * 2.0).collect(),
        }
    }

    pub fn scale(&self, s: Complex64) -> Self {
        ChebSeries {
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    /// Max of `|f(x)|` on a uniform grid of `points` nodes.
    pub fn sup_norm(&self, points: usize) -> f64 {
        let m = points.max(2);
        (0..m)
            .map(|i| self.eval(i as f64 / (m - 1) as f64).norm())
            .fold(0.0, f64::max)
    }
}

impl Add for &ChebSeries {
    type Output = ChebSeries;
    fn add(self, rhs: &ChebSeries) -> ChebSeries {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        let coeffs = (0..n)
            .map(|k| {
                self.coeffs.get(k).copied().unwrap_or(ZERO) + rhs.coeffs.get(k).copied().unwrap_or(ZERO)
            })
            .collect();
        ChebSeries { coeffs }
    }
}

impl Sub for &ChebSeries {
    type Output = ChebSeries;
    fn sub(self, rhs: &ChebSeries) -> ChebSeries {
        self + &(-rhs)
    }
}

impl Neg for &ChebSeries {
    type Output = ChebSeries;
    fn neg(self) -> ChebSeries {
        ChebSeries {
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
        }
    }
}

impl Mul for &ChebSeries {
    type Output = ChebSeries;
    /// Exact product via `T_j T_k = (T_{j+k} + T_{|j-k|}) / 2`.
    fn mul(self, rhs: &ChebSeries) -> ChebSeries {
        if self.coeffs.is_empty() || rhs.coeffs.is_empty() {
            return ChebSeries::zero();
        }
        let mut out = vec![ZERO; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (j, a) in self.coeffs.iter().enumerate() {
            for (k, b) in rhs.coeffs.iter().enumerate() {
                let p = a * b * 0.5;
                out[j + k] += p;
                out[j.abs_diff(k)] += p;
            }
        }
        ChebSeries { coeffs: out }
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for ChebSeries {
            type Output = ChebSeries;
            fn $m(self, rhs: ChebSeries) -> ChebSeries {
                (&self).$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for ChebSeries {
    type Output = ChebSeries;
    fn neg(self) -> ChebSeries {
        -&self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn monomials_round_trip_through_evaluation() {
        let s = ChebSeries::from_monomials(&[1.0, -2.0, 0.0, 3.0]);
        for &x in &[0.0, 0.3, 0.77, 1.0] {
            let expect = 1.0 - 2.0 * x + 3.0 * x * x * x;
            assert!((s.eval(x) - c(expect)).norm() < 1e-14);
        }
    }

    #[test]
    fn derivative_of_cubic() {
        let s = ChebSeries::from_monomials(&[0.0, 0.0, 0.0, 1.0]);
        let d = s.derivative();
        let dd = d.derivative();
        for &x in &[0.1, 0.5, 0.9] {
            assert!((d.eval(x) - c(3.0 * x * x)).norm() < 1e-13);
            assert!((dd.eval(x) - c(6.0 * x)).norm() < 1e-13);
        }
        assert!(dd.derivative().derivative().is_zero() || dd.derivative().derivative().max_abs_coeff() < 1e-13);
    }

    #[test]
    fn product_matches_pointwise() {
        let a = ChebSeries::from_real(&[0.3, -0.2, 0.7]);
        let b = ChebSeries::new(vec![Complex64::new(0.1, 1.0), c(0.5)]);
        let p = &a * &b;
        for &x in &[0.0, 0.25, 0.6, 1.0] {
            assert!((p.eval(x) - a.eval(x) * b.eval(x)).norm() < 1e-14);
        }
    }

    #[test]
    fn interpolation_reproduces_smooth_function() {
        let s = ChebSeries::interpolate(20, |x| c((3.0 * x).sin()));
        for &x in &[0.0, 0.41, 1.0] {
            assert!((s.eval(x) - c((3.0 * x).sin())).norm() < 1e-13);
        }
    }
}
