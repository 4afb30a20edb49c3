mod common;

use std::f64::consts::PI;

use nalgebra::DMatrix;
use proptest::prelude::*;
use quasispec::characteristic::{weyl_matrix, BoundarySpec};
use quasispec::chebyshev::ChebSeries;
use quasispec::identities::random_smooth_set;
use quasispec::inversion::{forward_spectra, match_nearest, Parameterization};
use quasispec::model::{build_associated_matrix, build_star_matrix, AssociatedMatrix, CoefficientSet, Order};
use quasispec::oracle::free_boundary_series;
use quasispec::propagator::{boundary_matrix, DEFAULT_TOL};
use quasispec::Complex64;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Classical RK4 on `Y' = (F + lambda E_{n,1}) Y`, `Y(0)` antidiagonal,
/// returning `W[s][r] = Y[n-1-s][r](1)`.
fn rk4_boundary_matrix(f: &AssociatedMatrix, lambda: Complex64, steps: usize) -> DMatrix<Complex64> {
    let n = f.order();
    let a = |x: f64| {
        let mut m = f.evaluate(x);
        m[(n - 1, 0)] += lambda;
        m
    };
    let mut y = DMatrix::from_fn(n, n, |i, k| if i + k == n - 1 { c(1.0, 0.0) } else { c(0.0, 0.0) });
    let h = 1.0 / steps as f64;
    for i in 0..steps {
        let x = i as f64 * h;
        let (a0, am, a1) = (a(x), a(x + 0.5 * h), a(x + h));
        let k1 = &a0 * &y;
        let k2 = &am * (&y + &k1 * c(0.5 * h, 0.0));
        let k3 = &am * (&y + &k2 * c(0.5 * h, 0.0));
        let k4 = &a1 * (&y + &k3 * c(h, 0.0));
        y += (k1 + k2 * c(2.0, 0.0) + k3 * c(2.0, 0.0) + k4) * c(h / 6.0, 0.0);
    }
    DMatrix::from_fn(n, n, |s, r| y[(n - 1 - s, r)])
}

fn max_rel(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    let scale = b.iter().map(|z| z.norm()).fold(1.0, f64::max);
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max) / scale
}

#[test]
fn propagator_matches_plain_rk4() {
    for n in 3..=5 {
        let f = build_associated_matrix(&random_smooth_set(Order::new(n).unwrap(), 40 + n as u64, 5, 0.5));
        for lambda in [c(3.0, 1.0), c(-20.0, 5.0), c(0.5, -40.0)] {
            let w = boundary_matrix(&f, lambda, DEFAULT_TOL).unwrap();
            let oracle = rk4_boundary_matrix(&f, lambda, 4000);
            let e = max_rel(&w, &oracle);
            assert!(e < 1e-9, "n={n} lambda={lambda}: {e:e}");
        }
    }
}

#[test]
fn free_series_matches_exponential_sum() {
    for n in 3..=5 {
        for lambda in [c(2.0, 0.5), c(-7.0, 3.0), c(30.0, -10.0)] {
            let rho = lambda.powf(1.0 / n as f64);
            let sum = DMatrix::from_fn(n, n, |s, r| {
                (0..n)
                    .map(|k| {
                        let mu = rho * Complex64::from_polar(1.0, 2.0 * PI * k as f64 / n as f64);
                        mu.powi(r as i32 - s as i32) * mu.exp()
                    })
                    .sum::<Complex64>()
                    / n as f64
            });
            let e = max_rel(&free_boundary_series(n, lambda), &sum);
            assert!(e < 1e-12, "n={n}: {e:e}");
        }
    }
}

/// Every computed eigenvalue is a zero of the boundary determinant built
/// from the plain RK4 solution.
#[test]
fn eigenvalues_are_zeros_of_the_rk4_determinant() {
    let cs = random_smooth_set(Order::Third, 9, 4, 0.5);
    let f = build_associated_matrix(&cs);
    let spectra = forward_spectra(&cs, &["S1".to_string(), "S2".to_string()], 3, DEFAULT_TOL).unwrap();
    for (spec, name) in spectra.iter().zip(["S1", "S2"]) {
        let b = BoundarySpec::named(Order::Third, name).unwrap();
        let req = b.minor_request();
        let det = |z: Complex64| {
            let w = rk4_boundary_matrix(&f, z, 4000);
            DMatrix::from_fn(req.rows.len(), req.columns.len(), |i, j| w[(req.rows[i] - 1, req.columns[j] - 1)]).determinant()
        };
        for z in spec.leading().into_iter().take(3) {
            let ratio = det(z).norm() / det(z + 0.5).norm();
            assert!(ratio < 1e-6, "{name} at {z}: {ratio:e}");
        }
    }
}

fn coeffs(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-0.5f64..0.5, len)
}

fn real_set(n: usize, a: Vec<f64>, b: Vec<f64>) -> CoefficientSet {
    let (s, t) = (ChebSeries::from_real(&a), ChebSeries::from_real(&b));
    match n {
        3 => CoefficientSet::third(s),
        4 => CoefficientSet::fourth(s, t),
        _ => CoefficientSet::fifth(s, t),
    }
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn star_is_an_involution(n in 3usize..=5, a in coeffs(4), b in coeffs(4)) {
        let f = build_associated_matrix(&real_set(n, a, b));
        let back = build_star_matrix(&build_star_matrix(&f));
        for x in [0.0, 0.3, 1.0] {
            prop_assert!(max_rel(&back.evaluate(x), &f.evaluate(x)) < 1e-14);
        }
    }

    #[test]
    fn real_coefficients_give_conjugate_symmetry(
        n in 3usize..=5, a in coeffs(3), b in coeffs(3), re in -30.0f64..30.0, im in 1.0f64..30.0,
    ) {
        let f = build_associated_matrix(&real_set(n, a, b));
        let z = c(re, im);
        let m = weyl_matrix(&f, z, DEFAULT_TOL).unwrap().matrix;
        let mc = weyl_matrix(&f, z.conj(), DEFAULT_TOL).unwrap().matrix;
        prop_assert!(max_rel(&mc, &m.map(|v| v.conj())) < 1e-8);
    }

    #[test]
    fn parameterization_round_trips(n in 3usize..=5, seed in 0u64..1000, modes in 3usize..8) {
        let order = Order::new(n).unwrap();
        let p = Parameterization::new(order, modes).unwrap();
        let x = quasispec::inversion::perturbation(p.count(order), 0.7, seed);
        let back = p.from_set(&p.to_set(order, &x).unwrap());
        for (u, v) in x.iter().zip(&back) {
            prop_assert!((u - v).abs() < 1e-14);
        }
    }

    #[test]
    fn nearest_matching_is_a_permutation_inverse(seed in 0u64..1000, len in 1usize..10) {
        let model: Vec<Complex64> = (0..len).map(|k| c((k * k) as f64 + 1.0, (k as f64).sin())).collect();
        let mut perm: Vec<usize> = (0..len).collect();
        let shift = seed as usize % len;
        perm.rotate_left(shift);
        let targets: Vec<Complex64> = perm.iter().map(|&i| model[i] + c(1e-3, 0.0)).collect();
        let m = match_nearest(&targets, &model, |_| 1.0);
        prop_assert_eq!(m, perm);
    }

    #[test]
    fn chebyshev_derivative_matches_finite_difference(a in coeffs(6), x in 0.05f64..0.95) {
        let s = ChebSeries::from_real(&a);
        let h = 1e-5;
        let fd = (s.eval(x + h) - s.eval(x - h)) / (2.0 * h);
        prop_assert!((s.derivative().eval(x) - fd).norm() < 1e-6);
    }

    #[test]
    fn interpolation_reproduces_polynomials(m in coeffs(5)) {
        let p = ChebSeries::from_monomials(&m);
        let q = ChebSeries::interpolate(4, |x| p.eval(x));
        prop_assert!((&p - &q).sup_norm(101) < 1e-13);
    }
}

#[test]
fn beam_oracle_frozen_values() {
    let l = common::beam_lambdas(3);
    for (got, k) in l.iter().zip([1.87510, 4.69409, 7.85476]) {
        assert!((got.powf(0.25) - k).abs() < 1e-5);
    }
    let lib = quasispec::oracle::beam_eigenvalues(3);
    for (a, b) in l.iter().zip(&lib) {
        assert!((a - b).abs() / b < 1e-12);
    }
}
