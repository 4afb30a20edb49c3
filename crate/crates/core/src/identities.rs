//! Numerical checks of the structural relations satisfied by the
//! Weyl-Yurko matrix.
//!
//! Residuals are relative: a difference is divided by `1 +` the size of
//! the terms it cancels, so thresholds do not depend on the scale of `M`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::characteristic::{build_sign_matrices, delta, weyl_matrix, BoundarySpec, CharacteristicFunction, WeylSample};
use crate::chebyshev::ChebSeries;
use crate::error::{Error, Result};
use crate::model::{build_star_matrix, AssociatedMatrix, CoefficientSet, Order};
use crate::propagator::fundamental_matrix;
use crate::rootfinder::{circle_winding, find_spectrum, laurent_coeffs, Rect, Spectrum};

/// Samples with any `|m_jk|` above this are treated as pole neighbourhoods.
const POLE_GUARD: f64 = 1e4;

fn max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn parity(n: usize) -> f64 {
    if n.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// `M*(lambda)`: the Weyl-Yurko matrix of the star problem, whose equation
/// `(-1)^n z^[n] = lambda z` reads `z^[n] = (-1)^n lambda z`.
pub fn star_weyl_matrix(f: &AssociatedMatrix, lambda: Complex64, tol: f64) -> Result<WeylSample> {
    let fs = build_star_matrix(f);
    let mut w = weyl_matrix(&fs, lambda * parity(f.order()), tol)?;
    w.lambda = lambda;
    Ok(w)
}

/// Max of `||[M*]^T J_0 M - J_0|| / (1 + ||M*|| ||M||)` and
/// `||M*(lambda) - M((-1)^n lambda)|| / (1 + ||M||)`.
pub fn check_symplectic(f: &AssociatedMatrix, lambda: Complex64, tol: f64) -> Result<f64> {
    let n = f.order();
    let j0 = build_sign_matrices(n)?.j0;
    let m = weyl_matrix(f, lambda, tol)?.matrix;
    let ms = star_weyl_matrix(f, lambda, tol)?.matrix;
    let m_reflected = weyl_matrix(f, lambda * parity(n), tol)?.matrix;
    let a = max_abs(&(ms.transpose() * &j0 * &m - &j0)) / (1.0 + max_abs(&ms) * max_abs(&m));
    let b = max_abs(&(&ms - &m_reflected)) / (1.0 + max_abs(&m_reflected));
    Ok(a.max(b))
}

/// Residuals of the order-specific relations, in the order
/// n = 3: `m21(-l) = m32(l)`;
/// n = 4: `m43 = m21`, `m42 - m32 m21 + m31 = 0`;
/// n = 5: `m21(-l) = m54(l)`, `m32(-l) = m43(l)`,
/// `m31(-l) - m21(-l) m43(l) + m53(l) = 0`.
pub fn check_order_relations(f: &AssociatedMatrix, lambda: Complex64, tol: f64) -> Result<Vec<f64>> {
    let n = f.order();
    let p = weyl_matrix(f, lambda, tol)?;
    let rel = |a: Complex64, b: Complex64| (a - b).norm() / (1.0 + a.norm().max(b.norm()));
    let sum = |terms: &[Complex64]| {
        let s: Complex64 = terms.iter().sum();
        s.norm() / (1.0 + terms.iter().map(|t| t.norm()).fold(0.0, f64::max))
    };
    match n {
        3 => {
            let q = weyl_matrix(f, -lambda, tol)?;
            Ok(vec![rel(q.m(2, 1), p.m(3, 2))])
        }
        4 => Ok(vec![
            rel(p.m(4, 3), p.m(2, 1)),
            sum(&[p.m(4, 2), -p.m(3, 2) * p.m(2, 1), p.m(3, 1)]),
        ]),
        5 => {
            let q = weyl_matrix(f, -lambda, tol)?;
            Ok(vec![
                rel(q.m(2, 1), p.m(5, 4)),
                rel(q.m(3, 2), p.m(4, 3)),
                sum(&[q.m(3, 1), -q.m(2, 1) * p.m(4, 3), p.m(5, 3)]),
            ])
        }
        _ => Err(Error::UnsupportedOrder(n)),
    }
}

/// Index of the characteristic determinant whose zeros carry the poles in
/// the Laurent relation: `Delta_22` for n = 4 and `Delta_33` for n = 5.
pub fn laurent_pole_index(n: usize) -> Result<usize> {
    match n {
        4 => Ok(2),
        5 => Ok(3),
        _ => Err(Error::InvalidArgument(format!("no Laurent convolution relation for order {n}"))),
    }
}

/// Radius for contour quadrature around a zero `lambda0` of
/// `Delta_{k,k}`: `1e-3 (1 + |lambda0|)`, halved until the disk holds only
/// that zero and no zero of the other denominators involved.
fn laurent_radius(f: &AssociatedMatrix, lambda0: Complex64, tol: f64) -> Result<(f64, usize)> {
    let n = f.order();
    let k = laurent_pole_index(n)?;
    let dkk = CharacteristicFunction::for_delta(f, k, k, tol)?;
    let d11 = CharacteristicFunction::for_delta(f, 1, 1, tol)?;
    let mut r = 1e-3 * (1.0 + lambda0.norm());
    let mut last = None;
    for _ in 0..6 {
        let main = circle_winding(&|z| dkk.eval(z), lambda0, r, 16)?;
        // other poles: Delta_11 at lambda (n = 4) or at -lambda (n = 5)
        let reflect = if n == 5 { -1.0 } else { 1.0 };
        let other = circle_winding(&|z| d11.eval(z * reflect), lambda0, r, 16)?;
        if let (Some(m), Some(0)) = (main, other) {
            if last == Some(m) {
                return Ok((r, m));
            }
            last = Some(m);
        } else {
            last = None;
        }
        r *= 0.5;
    }
    match last {
        Some(m) => Ok((r * 2.0, m)),
        None => Err(Error::Refinement(format!("no clean disk around {lambda0}"))),
    }
}

/// Residual of `m42<i> = sum_l m32<l> m21<i-l>` (n = 4) or
/// `m53<i> = sum_l m43<l> g<i-l>`, `g(l) = m21(-l)` (n = 5), for
/// `i = -kappa..-1` at a zero `lambda0` of `Delta_22` resp. `Delta_33`.
/// The column-`k` entries come from `f_alt` when given (the comparison
/// problem of the uniqueness argument), `m21` always from `f`. Returns
/// `max_i |lhs - rhs| / (1 + max |terms|)`; 0 at an analytic point.
pub fn check_laurent_convolution(
    f: &AssociatedMatrix,
    f_alt: Option<&AssociatedMatrix>,
    lambda0: Complex64,
    kappa: usize,
    tol: f64,
) -> Result<f64> {
    let n = f.order();
    let k = laurent_pole_index(n)?;
    if let Some(g) = f_alt {
        if g.order() != n {
            return Err(Error::InvalidArgument("comparison problem has a different order".into()));
        }
    }
    let (radius, measured) = laurent_radius(f, lambda0, tol)?;
    if measured != kappa {
        return Err(Error::MultiplicityMismatch {
            stated: kappa,
            measured,
        });
    }
    if kappa == 0 {
        return Ok(0.0);
    }
    let col = f_alt.unwrap_or(f);
    let (j_lhs, j_mid) = (k + 2, k + 1);
    let values = |z: Complex64| -> Result<Vec<Complex64>> {
        let a = weyl_matrix(col, z, tol)?;
        let m21 = if n == 5 {
            weyl_matrix(f, -z, tol)?.m(2, 1)
        } else if std::ptr::eq(col, f) {
            a.m(2, 1)
        } else {
            weyl_matrix(f, z, tol)?.m(2, 1)
        };
        Ok(vec![a.m(j_lhs, k), a.m(j_mid, k), m21])
    };
    let kk = kappa as i32;
    let ks: Vec<i32> = (-kk..kk).collect();
    let c = laurent_coeffs(&values, lambda0, &ks, radius, 32)?;
    let at = |comp: usize, i: i32| c[comp][(i + kk) as usize];
    let mut worst: f64 = 0.0;
    for i in -kk..0 {
        let lhs = at(0, i);
        let terms: Vec<Complex64> = (-kk..=i).map(|l| at(1, l) * at(2, i - l)).collect();
        let rhs: Complex64 = terms.iter().sum();
        let scale = terms.iter().map(|t| t.norm()).fold(lhs.norm(), f64::max);
        worst = worst.max((lhs - rhs).norm() / (1.0 + scale));
    }
    Ok(worst)
}

/// Singular part of `G_1 / Delta_22` at one zero of `Delta_22`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoleReport {
    pub lambda: Complex64,
    pub multiplicity: usize,
    /// Coefficients `<-kappa> .. <-1>`.
    pub coefficients: Vec<Complex64>,
    /// Largest modulus relative to the size of `Delta_11 Delta~_21 / Delta_22`
    /// on the quadrature circle.
    pub relative: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntireRatioReport {
    pub poles: Vec<PoleReport>,
    pub max_singular: f64,
    pub max_relative: f64,
}

/// Laurent coefficients `<-kappa>..<-1>` of
/// `(Delta_11 Delta~_21 - Delta~_11 Delta_21) / Delta_22` at each zero of
/// `Delta_22` in `rect`.
pub fn check_entire_ratio(
    f: &AssociatedMatrix,
    f_tilde: &AssociatedMatrix,
    rect: &Rect,
    tol: f64,
) -> Result<EntireRatioReport> {
    let n = f.order();
    if f_tilde.order() != n {
        return Err(Error::InvalidArgument("problems of different order".into()));
    }
    let spec = BoundarySpec::diagonal(n, 2)?;
    let zeros = find_spectrum(f, &spec, rect, usize::MAX, tol)?;
    let d22 = CharacteristicFunction::for_delta(f, 2, 2, tol)?;
    let mut poles = Vec::new();
    for (i, e) in zeros.eigenvalues.iter().enumerate() {
        let gap = zeros
            .eigenvalues
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, o)| (o.lambda - e.lambda).norm())
            .fold(f64::INFINITY, f64::min);
        let mut r = (1e-3 * (1.0 + e.lambda.norm())).min(0.3 * gap);
        while circle_winding(&|z| d22.eval(z), e.lambda, r, 16)? != Some(e.multiplicity) {
            r *= 0.5;
            if r < 1e-9 * (1.0 + e.lambda.norm()) {
                return Err(Error::Refinement(format!("no clean disk around {}", e.lambda)));
            }
        }
        let parts = |z: Complex64| -> Result<(Complex64, f64)> {
            let a11 = delta(f, z, 1, 1, tol)?;
            let a21 = delta(f, z, 2, 1, tol)?;
            let b11 = delta(f_tilde, z, 1, 1, tol)?;
            let b21 = delta(f_tilde, z, 2, 1, tol)?;
            let d = d22.eval(z)?;
            Ok(((a11 * b21 - b11 * a21) / d, (a11 * b21).norm().max((b11 * a21).norm()) / d.norm()))
        };
        let kk = e.multiplicity as i32;
        let ks: Vec<i32> = (-kk..0).collect();
        let c = laurent_coeffs(&|z| Ok(vec![parts(z)?.0]), e.lambda, &ks, r, 32)?;
        let coefficients = c[0].clone();
        // size of the cancelling products on the circle sets the scale
        let scale = parts(e.lambda + r)?.1.max(f64::MIN_POSITIVE);
        let biggest = coefficients
            .iter()
            .zip(&ks)
            .map(|(a, &k)| a.norm() * r.powi(k))
            .fold(0.0, f64::max);
        poles.push(PoleReport {
            lambda: e.lambda,
            multiplicity: e.multiplicity,
            relative: biggest / scale,
            coefficients,
        });
    }
    let max_singular = poles
        .iter()
        .flat_map(|p| p.coefficients.iter().map(|c| c.norm()))
        .fold(0.0, f64::max);
    let max_relative = poles.iter().map(|p| p.relative).fold(0.0, f64::max);
    Ok(EntireRatioReport {
        poles,
        max_singular,
        max_relative,
    })
}

/// `Phi(x, lambda) = C(x, lambda) M(lambda)` at the given points.
pub fn weyl_solutions(
    f: &AssociatedMatrix,
    lambda: Complex64,
    x_points: &[f64],
    tol: f64,
) -> Result<Vec<DMatrix<Complex64>>> {
    let m = weyl_matrix(f, lambda, tol)?.matrix;
    let c = fundamental_matrix(f, lambda, x_points, tol)?;
    Ok(c.values.into_iter().map(|(_, cx)| cx * &m).collect())
}

/// With `P(x, lambda) = Phi(x, lambda) Phi~(x, lambda)^{-1}`: the largest
/// entrywise difference `P(x, l1) - P(x, l2)` over pairs of `lambdas` and
/// points, plus the deviation of `P(0, lambda)` from the identity.
pub fn check_p_matrix(
    f: &AssociatedMatrix,
    f_tilde: &AssociatedMatrix,
    lambdas: &[Complex64],
    x_points: &[f64],
    tol: f64,
) -> Result<f64> {
    let n = f.order();
    if f_tilde.order() != n {
        return Err(Error::InvalidArgument("problems of different order".into()));
    }
    let mut pts: Vec<f64> = x_points.to_vec();
    pts.push(0.0);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let per_lambda: Vec<Vec<DMatrix<Complex64>>> = lambdas
        .par_iter()
        .map(|&l| {
            let a = weyl_solutions(f, l, &pts, tol)?;
            let b = weyl_solutions(f_tilde, l, &pts, tol)?;
            a.into_iter()
                .zip(b)
                .zip(&pts)
                .map(|((pa, pb), x)| {
                    let inv = pb
                        .try_inverse()
                        .ok_or_else(|| Error::Singular(format!("Phi~ at x = {x}, lambda = {l}")))?;
                    Ok(pa * inv)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let eye = DMatrix::<Complex64>::identity(n, n);
    let mut at_zero: f64 = 0.0;
    for ps in &per_lambda {
        at_zero = at_zero.max(max_abs(&(&ps[0] - &eye)));
    }
    let mut spread: f64 = 0.0;
    for a in 0..per_lambda.len() {
        for b in a + 1..per_lambda.len() {
            for (pa, pb) in per_lambda[a].iter().zip(&per_lambda[b]) {
                spread = spread.max(max_abs(&(pa - pb)));
            }
        }
    }
    Ok(spread + at_zero)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    /// `+inf` when no pair has eigenvalues on both sides.
    pub min_distance: f64,
    pub violation: bool,
}

/// Smallest distance between eigenvalues of paired spectra.
pub fn check_separation(pairs: &[(Spectrum, Spectrum)], tol: f64) -> SeparationReport {
    let mut d = f64::INFINITY;
    for (a, b) in pairs {
        for x in &a.eigenvalues {
            for y in &b.eigenvalues {
                d = d.min((x.lambda - y.lambda).norm());
            }
        }
    }
    SeparationReport {
        min_distance: d,
        violation: d <= tol,
    }
}

/// Zero sets of `Delta_{m,m}` and `Delta_{m+1,m+1}`, `m = 1..n-2`, over a
/// common region.
pub fn separation_pairs(f: &AssociatedMatrix, rect: &Rect, tol: f64) -> Result<Vec<(Spectrum, Spectrum)>> {
    let n = f.order();
    let spectra: Vec<Spectrum> = (1..n)
        .map(|m| find_spectrum(f, &BoundarySpec::diagonal(n, m)?, rect, usize::MAX, tol))
        .collect::<Result<_>>()?;
    Ok(spectra.windows(2).map(|w| (w[0].clone(), w[1].clone())).collect())
}

/// Reproducible points in the annulus `1 <= |lambda| <= 50`.
pub fn annulus_samples(seed: u64, count: usize) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let r = rng.gen_range(1.0..=50.0);
            let t = rng.gen_range(-PI..PI);
            Complex64::from_polar(r, t)
        })
        .collect()
}

/// True when `lambda` and its reflections needed by the checks are away
/// from poles of `M`.
pub fn is_regular_sample(f: &AssociatedMatrix, lambda: Complex64, tol: f64) -> bool {
    [lambda, -lambda].iter().all(|&z| match weyl_matrix(f, z, tol) {
        Ok(w) => max_abs(&w.matrix) <= POLE_GUARD,
        Err(_) => false,
    })
}

/// `count` seeded annulus samples, skipping pole neighbourhoods.
pub fn regular_samples(f: &AssociatedMatrix, seed: u64, count: usize, tol: f64) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(count);
    let mut batch = 0u64;
    while out.len() < count && batch < 64 {
        for z in annulus_samples(seed.wrapping_add(batch.wrapping_mul(0x9e37_79b9)), count) {
            if out.len() < count && is_regular_sample(f, z, tol) {
                out.push(z);
            }
        }
        batch += 1;
    }
    out
}

/// A smooth real coefficient set with `modes` Chebyshev coefficients per
/// function, decaying like `amplitude / (1 + k)^2`.
pub fn random_smooth_set(order: Order, seed: u64, modes: usize, amplitude: f64) -> CoefficientSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let series: Vec<ChebSeries> = order
        .function_names()
        .iter()
        .map(|_| {
            let c: Vec<f64> = (0..modes)
                .map(|k| amplitude * rng.gen_range(-1.0..1.0) / ((1 + k) * (1 + k)) as f64)
                .collect();
            ChebSeries::from_real(&c)
        })
        .collect();
    CoefficientSet::from_series(order, series).expect("names match the order")
}

/// One line of a verification report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub digest: String,
    pub residual: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl CheckRecord {
    /// A check passing when `residual < threshold`.
    pub fn below(name: &str, digest: &str, residual: f64, threshold: f64) -> Self {
        CheckRecord {
            name: name.to_string(),
            digest: digest.to_string(),
            residual,
            threshold,
            pass: residual < threshold,
        }
    }

    /// A check passing when `value > threshold`.
    pub fn above(name: &str, digest: &str, value: f64, threshold: f64) -> Self {
        CheckRecord {
            name: name.to_string(),
            digest: digest.to_string(),
            residual: value,
            threshold,
            pass: value > threshold,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub checks: Vec<CheckRecord>,
}

impl VerificationReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_associated_matrix;

    const ZERO: Complex64 = Complex64::new(0.0, 0.0);

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn symplectic_examples() {
        let f3 = build_associated_matrix(&CoefficientSet::third(ChebSeries::from_real(&[0.3, -0.4, 0.1])).unwrap());
        assert!(check_symplectic(&f3, c(2.0, 1.0), 1e-12).unwrap() < 1e-8);
        let f4 = build_associated_matrix(
            &CoefficientSet::fourth(ChebSeries::from_real(&[0.2, 0.3]), ChebSeries::from_real(&[-0.1, 0.2, 0.05])).unwrap(),
        );
        assert!(check_symplectic(&f4, c(5.0, 0.0), 1e-12).unwrap() < 1e-8);
        for o in [Order::Third, Order::Fourth, Order::Fifth] {
            let f = build_associated_matrix(&CoefficientSet::free(o));
            assert!(check_symplectic(&f, c(1.0, 0.0), 1e-12).unwrap() < 1e-10);
        }
    }

    #[test]
    fn order_relation_examples() {
        let p = ChebSeries::interpolate(24, |x| c((PI * x).cos(), 0.0));
        let f3 = build_associated_matrix(&CoefficientSet::third(p).unwrap());
        assert!(check_order_relations(&f3, c(1.7, 0.0), 1e-12).unwrap()[0] < 1e-8);

        let t2 = ChebSeries::interpolate(24, |x| c(x.sin(), 0.0));
        let f4 = build_associated_matrix(&CoefficientSet::fourth(ChebSeries::x(), t2).unwrap());
        let r4 = check_order_relations(&f4, c(2.0, -1.0), 1e-12).unwrap();
        assert_eq!(r4.len(), 2);
        assert!(r4.iter().all(|&r| r < 1e-8), "{r4:?}");

        let f5 = build_associated_matrix(
            &CoefficientSet::fifth(ChebSeries::constant(c(1.0, 0.0)), ChebSeries::from_monomials(&[0.0, 0.0, 1.0])).unwrap(),
        );
        let r5 = check_order_relations(&f5, c(3.0, 0.0), 1e-12).unwrap();
        assert_eq!(r5.len(), 3);
        assert!(r5.iter().all(|&r| r < 1e-8), "{r5:?}");
    }

    #[test]
    fn annulus_samples_are_reproducible() {
        let a = annulus_samples(7, 20);
        assert_eq!(a, annulus_samples(7, 20));
        assert!(a.iter().all(|z| (1.0..=50.0 + 1e-12).contains(&z.norm())));
    }

    #[test]
    fn separation_degenerate_inputs() {
        let spec = BoundarySpec::diagonal(3, 1).unwrap();
        let f = build_associated_matrix(&CoefficientSet::free(Order::Third));
        let s = find_spectrum(&f, &spec, &Rect::square(ZERO, 50.0), 100, 1e-10).unwrap();
        assert!(!s.eigenvalues.is_empty());
        let same = check_separation(&[(s.clone(), s.clone())], 1e-9);
        assert_eq!(same.min_distance, 0.0);
        assert!(same.violation);
        let empty = Spectrum {
            eigenvalues: vec![],
            ..s.clone()
        };
        let vac = check_separation(&[(empty, s)], 1e-9);
        assert!(vac.min_distance.is_infinite() && !vac.violation);
    }

    #[test]
    fn p_matrix_identity_for_identical_problems() {
        let cs = random_smooth_set(Order::Fourth, 3, 5, 0.5);
        let f = build_associated_matrix(&cs);
        let r = check_p_matrix(&f, &f, &[c(2.0, 1.0), c(-3.0, 4.0)], &[0.3, 0.7, 1.0], 1e-12).unwrap();
        assert!(r < 1e-8, "{r}");
    }

    #[test]
    fn entire_ratio_vanishes_for_identical_problems() {
        let f = build_associated_matrix(&CoefficientSet::free(Order::Fourth));
        let rep = check_entire_ratio(&f, &f, &Rect::square(ZERO, 200.0), 1e-12).unwrap();
        assert!(!rep.poles.is_empty());
        assert_eq!(rep.max_singular, 0.0);
    }

    #[test]
    fn laurent_residue_at_simple_zero() {
        let cs = random_smooth_set(Order::Fourth, 11, 5, 0.5);
        let f = build_associated_matrix(&cs);
        let spec = BoundarySpec::diagonal(4, 2).unwrap();
        let s = find_spectrum(&f, &spec, &Rect::square(ZERO, 200.0), 100, 1e-12).unwrap();
        let z0 = s.eigenvalues[0];
        let r = check_laurent_convolution(&f, None, z0.lambda, z0.multiplicity, 1e-12).unwrap();
        assert!(r < 1e-6, "{r}");
        assert!(matches!(
            check_laurent_convolution(&f, None, z0.lambda, 2, 1e-12),
            Err(Error::MultiplicityMismatch { stated: 2, measured: 1 })
        ));
        assert_eq!(check_laurent_convolution(&f, None, c(0.37, 0.21), 0, 1e-12).unwrap(), 0.0);
    }

    #[test]
    fn gauge_shift_keeps_identities_but_moves_u1_spectra() {
        let cs = random_smooth_set(Order::Fourth, 5, 5, 0.5);
        let shifted = CoefficientSet::fourth(
            cs.series()[0].clone(),
            cs.series()[1] + &ChebSeries::x().scale(c(0.3, 0.0)),
        )
        .unwrap();
        let f = build_associated_matrix(&cs);
        let g = build_associated_matrix(&shifted);
        for z in [c(2.0, 1.0), c(-7.0, 3.0)] {
            assert!(check_symplectic(&f, z, 1e-12).unwrap() < 1e-8);
            assert!(check_symplectic(&g, z, 1e-12).unwrap() < 1e-8);
            assert!(check_order_relations(&g, z, 1e-12).unwrap().iter().all(|&r| r < 1e-8));
            // U_1 = y^[3](0) picks up c y(0); S23 avoids U_1, S12 does not
            let s23 = BoundarySpec::named(Order::Fourth, "S23").unwrap();
            let a = CharacteristicFunction::new(&f, &s23, 1e-12).unwrap().eval(z).unwrap();
            let b = CharacteristicFunction::new(&g, &s23, 1e-12).unwrap().eval(z).unwrap();
            assert!((a - b).norm() < 1e-9 * a.norm());
            let s12 = BoundarySpec::named(Order::Fourth, "S12").unwrap();
            let a = CharacteristicFunction::new(&f, &s12, 1e-12).unwrap().eval(z).unwrap();
            let b = CharacteristicFunction::new(&g, &s12, 1e-12).unwrap().eval(z).unwrap();
            assert!((a - b).norm() > 1e-3 * a.norm());
        }
    }

    #[test]
    fn unrelated_problems_show_lambda_dependence() {
        let f = build_associated_matrix(&random_smooth_set(Order::Third, 1, 4, 1.0));
        let g = build_associated_matrix(&random_smooth_set(Order::Third, 2, 4, 1.0));
        let r = check_p_matrix(&f, &g, &[c(2.0, 1.0), c(-9.0, 2.0)], &[0.5, 1.0], 1e-12).unwrap();
        assert!(r > 1e-4, "{r}");
    }

    #[test]
    fn laurent_relation_order_five() {
        let f = build_associated_matrix(&random_smooth_set(Order::Fifth, 4, 5, 0.5));
        let spec = BoundarySpec::diagonal(5, 3).unwrap();
        let s = find_spectrum(&f, &spec, &Rect::square(ZERO, 3000.0), 100, 1e-12).unwrap();
        let z0 = s.eigenvalues[0];
        let r = check_laurent_convolution(&f, None, z0.lambda, z0.multiplicity, 1e-12).unwrap();
        assert!(r < 1e-6, "{r}");
    }
}
