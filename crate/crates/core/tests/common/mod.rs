//! Oracles shared by the integration tests, written independently of the
//! library code paths they check.
#![allow(dead_code)]

use std::f64::consts::PI;

use quasispec::chebyshev::ChebSeries;
use quasispec::model::CoefficientSet;
use quasispec::Complex64;

/// Roots of `1 + cos k cosh k = 0` by a sign scan followed by bisection,
/// returned as `k^4`.
pub fn beam_lambdas(count: usize) -> Vec<f64> {
    let g = |k: f64| 1.0 + k.cos() * k.cosh();
    let mut out = Vec::new();
    let step = 1e-3;
    let mut a = step;
    while out.len() < count {
        let b = a + step;
        if g(a).signum() != g(b).signum() {
            let (mut lo, mut hi) = (a, b);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if g(lo).signum() == g(mid).signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            out.push((0.5 * (lo + hi)).powi(4));
        }
        a = b;
    }
    out
}

pub fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm().max(1.0)
}

fn real(f: impl Fn(f64) -> f64, modes: usize) -> ChebSeries {
    ChebSeries::interpolate(modes - 1, |x| Complex64::new(f(x), 0.0))
}

/// Smooth truths of the twin experiments, as interpolants with `modes`
/// coefficients.
pub fn twin_truth(n: usize, modes: usize) -> CoefficientSet {
    match n {
        3 => CoefficientSet::third(real(|x| 0.3 * (PI * x).cos(), modes)),
        4 => CoefficientSet::fourth(real(|x| 0.2 * x * (1.0 - x), modes), real(|x| 0.1 * (PI * x).sin(), modes)),
        5 => CoefficientSet::fifth(real(|x| 0.3 * (PI * x).cos(), modes), real(|x| 0.2 * x, modes)),
        _ => panic!("order {n}"),
    }
    .unwrap()
}
