//! Closed forms for the free case `F = 0`, where quasi-derivatives are
//! ordinary derivatives and `y^(n) = lambda y`.
//!
//! With `rho^n = lambda` and `omega` running over the `n`-th roots of unity,
//! `W[s][r] = (1/n) sum_omega (rho omega)^{r-s} e^{rho omega}`, equivalently
//! `W[s][r] = sum_l lambda^l / (l n + s - r)!`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::characteristic::{dense_minor, BoundarySpec};
use crate::error::{Error, Result};
use crate::model::Order;
use crate::propagator::principal_root;
use crate::rootfinder::{find_zeros_with, plan_search_box, Eigenvalue, DEFAULT_QUADRATURE};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
/// Below this `|rho|` the power series is used.
const SERIES_RADIUS: f64 = 3.0;

/// Boundary matrix of the free problem from the power series.
pub fn free_boundary_series(n: usize, lambda: Complex64) -> DMatrix<Complex64> {
    DMatrix::from_fn(n, n, |s, r| {
        let mut sum = ZERO;
        let mut pow = Complex64::new(1.0, 0.0);
        for l in 0..200 {
            let k = (l * n + s) as i64 - r as i64;
            if k >= 0 {
                let term = pow / factorial(k as u32);
                sum += term;
                if l > 2 && term.norm() < 1e-18 * sum.norm().max(1e-300) {
                    break;
                }
            }
            pow *= lambda;
        }
        sum
    })
}

fn factorial(k: u32) -> f64 {
    (1..=k).fold(1.0, |a, b| a * b as f64)
}

/// Minor `det W[rows, cols]` (1-based, order-sensitive) of the free
/// boundary matrix. Large `|rho|` uses Cauchy-Binet over the exponentials,
/// which avoids cancellation between exponentially different columns.
pub fn free_minor(n: usize, lambda: Complex64, rows: &[usize], cols: &[usize]) -> Complex64 {
    let m = rows.len();
    if m == 0 {
        return Complex64::new(1.0, 0.0);
    }
    let rho = principal_root(lambda, n);
    if rho.norm() < SERIES_RADIUS {
        return dense_minor(&free_boundary_series(n, lambda), rows, cols);
    }
    let roots: Vec<Complex64> = (0..n)
        .map(|k| rho * Complex64::from_polar(1.0, 2.0 * PI * k as f64 / n as f64))
        .collect();
    // W = A diag(e^{mu}) B / n with A[s][w] = mu_w^{-s}, B[w][r] = mu_w^r
    let mut total = ZERO;
    let mut subset: Vec<usize> = (0..m).collect();
    loop {
        let a = DMatrix::from_fn(m, m, |i, j| roots[subset[j]].powi(-(rows[i] as i32)));
        let b = DMatrix::from_fn(m, m, |i, j| roots[subset[i]].powi(cols[j] as i32));
        let e: Complex64 = subset.iter().map(|&w| roots[w]).sum::<Complex64>().exp();
        total += a.determinant() * b.determinant() * e;
        if !next_subset(&mut subset, n) {
            break;
        }
    }
    total / (n as f64).powi(m as i32)
}

fn next_subset(s: &mut [usize], n: usize) -> bool {
    let m = s.len();
    for i in (0..m).rev() {
        if s[i] < n - m + i {
            s[i] += 1;
            for j in i + 1..m {
                s[j] = s[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Characteristic function of a free problem.
pub fn free_char_function(spec: &BoundarySpec, lambda: Complex64) -> Complex64 {
    free_minor(spec.order, lambda, &spec.at_one, &spec.free_columns())
}

/// `lambda = k^4` for the roots `k` of `1 + cos k cosh k = 0`, the spectrum
/// of a beam free at one end and clamped at the other.
pub fn beam_eigenvalues(count: usize) -> Vec<f64> {
    let g = |k: f64| 1.0 + k.cos() * k.cosh();
    (1..=count)
        .map(|i| {
            let (mut a, mut b) = ((i as f64 - 1.0) * PI, i as f64 * PI);
            while b - a > 1e-15 * b {
                let mid = 0.5 * (a + b);
                if g(a) * g(mid) <= 0.0 {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            (0.5 * (a + b)).powi(4)
        })
        .collect()
}

/// The first `count` eigenvalues (with multiplicity) of a free problem,
/// from the closed-form determinant.
pub fn free_spectrum(order: Order, name: &str, count: usize) -> Result<Vec<Eigenvalue>> {
    let spec = BoundarySpec::named(order, name)?;
    let n = order.n();
    let mut rect = plan_search_box(n, count);
    let mut found = 0;
    for _ in 0..4 {
        let f = |z: Complex64| Ok(free_char_function(&spec, z));
        let zs = find_zeros_with(&f, &f, &rect, usize::MAX, DEFAULT_QUADRATURE, Some(n))?;
        let r = zs.region.inner_radius();
        let mut out = Vec::new();
        let mut total = 0;
        for e in zs.zeros.iter().filter(|e| e.lambda.norm() <= r) {
            if total >= count {
                break;
            }
            out.push(*e);
            total += e.multiplicity;
        }
        if total >= count {
            return Ok(out);
        }
        found = total;
        rect.half_re *= 4.0;
        rect.half_im *= 4.0;
    }
    Err(Error::NotEnoughEigenvalues { found, wanted: count })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_and_exponential_forms_agree() {
        for n in 3..=5 {
            for &lambda in &[Complex64::new(300.0, 40.0), Complex64::new(-900.0, 5.0), Complex64::new(10.0, -700.0)] {
                let w = free_boundary_series(n, lambda);
                for s in 1..=n {
                    for r in 1..=n {
                        let cb = free_minor(n, lambda, &[s], &[r]);
                        assert!((cb - w[(s - 1, r - 1)]).norm() < 1e-9 * (1.0 + cb.norm()));
                    }
                }
            }
        }
    }

    #[test]
    fn free_boundary_at_zero() {
        let w = free_boundary_series(3, ZERO);
        assert_eq!(w[(2, 0)], Complex64::new(0.5, 0.0));
        assert_eq!(w[(0, 2)], ZERO);
    }

    #[test]
    fn beam_roots() {
        let b = beam_eigenvalues(3);
        assert!((b[0].powf(0.25) - 1.87510).abs() < 1e-5);
        assert!((b[1].powf(0.25) - 4.69409).abs() < 1e-5);
        assert!((b[2].powf(0.25) - 7.85476).abs() < 1e-5);
    }

    #[test]
    fn free_beam_from_closed_form() {
        let s = free_spectrum(Order::Fourth, "S12", 3).unwrap();
        let b = beam_eigenvalues(3);
        for (e, w) in s.iter().zip(&b) {
            assert!((e.lambda - w).norm() < 1e-9 * w);
        }
    }
}
