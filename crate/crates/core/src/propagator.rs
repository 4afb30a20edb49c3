//! Integration of `Y' = (F(x) + Lambda) Y` on `[0, 1]`.
//!
//! The scheme is classical fourth-order Runge-Kutta on a uniform mesh. Each
//! solve runs on meshes `N` and `2N`; the difference gives a Richardson
//! estimate, the mesh is doubled until the estimate meets the tolerance and
//! the extrapolated value is returned. For `|lambda| > 1` the state is
//! integrated in the scaled variable `Y exp(-gamma x)`, `gamma` being the
//! dominant growth rate of the free system, and rescaled on output.
//!
//! The same machinery propagates wedges of solutions in an exterior power,
//! which gives minors of the boundary matrix without the cancellation a
//! determinant of propagated columns would suffer.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::exterior::{apply, ExteriorPower, Term};
use crate::model::AssociatedMatrix;

pub const DEFAULT_TOL: f64 = 1e-10;

const MAX_STEPS: usize = 1 << 21;
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Principal `n`-th root of `lambda`.
pub fn principal_root(lambda: Complex64, n: usize) -> Complex64 {
    if lambda == ZERO {
        return ZERO;
    }
    Complex64::from_polar(lambda.norm().powf(1.0 / n as f64), lambda.arg() / n as f64)
}

/// Sum of the `m` largest values of `Re(rho * omega)` over the `n`-th roots
/// of unity, i.e. the growth rate of an `m`-fold wedge in the free case.
pub fn growth_rate(lambda: Complex64, n: usize, m: usize) -> f64 {
    let rho = principal_root(lambda, n);
    let mut re: Vec<f64> = (0..n)
        .map(|k| (rho * Complex64::from_polar(1.0, 2.0 * PI * k as f64 / n as f64)).re)
        .collect();
    re.sort_by(|a, b| b.partial_cmp(a).unwrap());
    re.iter().take(m).sum()
}

/// Linear system on the `m`-th exterior power.
pub(crate) struct WedgeFlow<'a> {
    f: &'a AssociatedMatrix,
    pub ext: ExteriorPower,
    terms: Vec<Term>,
    n_entries: usize,
    lambda: Complex64,
    shift: f64,
    rate: f64,
}

impl<'a> WedgeFlow<'a> {
    pub fn new(f: &'a AssociatedMatrix, lambda: Complex64, m: usize) -> Self {
        let n = f.order();
        let ext = ExteriorPower::new(n, m);
        // values layout: stored F entries, superdiagonal ones, lambda at (n, 1)
        let mut pattern: Vec<(usize, usize)> = f.entries().keys().copied().collect();
        let n_entries = pattern.len();
        pattern.extend((0..n - 1).map(|k| (k, k + 1)));
        pattern.push((n - 1, 0));
        let terms = ext.derivation_terms(&pattern);
        let shift = if lambda.norm() > 1.0 { growth_rate(lambda, n, m) } else { 0.0 };
        let fscale: f64 = f.entries().values().map(|s| s.coeffs().iter().map(|c| c.norm()).sum::<f64>()).sum();
        let rate = principal_root(lambda, n).norm() * (m as f64).sqrt() + fscale + 1.0;
        WedgeFlow {
            f,
            ext,
            terms,
            n_entries,
            lambda,
            shift,
            rate,
        }
    }

    fn fill_values(&self, x: f64, values: &mut [Complex64]) {
        self.f.eval_entries_into(x, &mut values[..self.n_entries]);
    }

    fn template_values(&self) -> Vec<Complex64> {
        let n = self.f.order();
        let mut v = vec![ZERO; self.n_entries + n];
        for slot in v[self.n_entries..self.n_entries + n - 1].iter_mut() {
            *slot = Complex64::new(1.0, 0.0);
        }
        v[self.n_entries + n - 1] = self.lambda;
        v
    }

    /// Derivative of a batch of wedge vectors (column-major blocks of `dim`).
    fn rhs(&self, values: &[Complex64], z: &[Complex64], out: &mut [Complex64]) {
        let d = self.ext.dim();
        for (zb, ob) in z.chunks_exact(d).zip(out.chunks_exact_mut(d)) {
            apply(&self.terms, values, zb, ob);
            if self.shift != 0.0 {
                for (o, zi) in ob.iter_mut().zip(zb) {
                    *o -= zi * self.shift;
                }
            }
        }
    }

    /// Fixed-mesh RK4 through the sorted points with about `steps` steps on
    /// `[0, 1]`; returns the (scaled) state at every point.
    fn run(&self, init: &[Complex64], points: &[f64], steps: usize) -> Result<Vec<Vec<Complex64>>> {
        let len = init.len();
        let mut z = init.to_vec();
        let mut k1 = vec![ZERO; len];
        let mut k2 = vec![ZERO; len];
        let mut k3 = vec![ZERO; len];
        let mut k4 = vec![ZERO; len];
        let mut tmp = vec![ZERO; len];
        let mut v0 = self.template_values();
        let mut vm = v0.clone();
        let mut v1 = v0.clone();
        let mut out = Vec::with_capacity(points.len());
        let mut x = 0.0;
        self.fill_values(x, &mut v0);
        for &target in points {
            let span = target - x;
            let k = if span > 0.0 { ((steps as f64 * span).ceil() as usize).max(1) } else { 0 };
            let h = if k > 0 { span / k as f64 } else { 0.0 };
            for step in 0..k {
                let xs = x + step as f64 * h;
                let xe = if step + 1 == k { target } else { xs + h };
                self.fill_values(xs + 0.5 * h, &mut vm);
                self.fill_values(xe, &mut v1);
                self.rhs(&v0, &z, &mut k1);
                for i in 0..len {
                    tmp[i] = z[i] + k1[i] * (0.5 * h);
                }
                self.rhs(&vm, &tmp, &mut k2);
                for i in 0..len {
                    tmp[i] = z[i] + k2[i] * (0.5 * h);
                }
                self.rhs(&vm, &tmp, &mut k3);
                for i in 0..len {
                    tmp[i] = z[i] + k3[i] * h;
                }
                self.rhs(&v1, &tmp, &mut k4);
                for i in 0..len {
                    z[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0);
                }
                std::mem::swap(&mut v0, &mut v1);
            }
            if z.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
                return Err(Error::Integration {
                    x: target,
                    reason: "non-finite state".into(),
                });
            }
            x = target;
            out.push(z.clone());
        }
        Ok(out)
    }

    /// Solves with error control; the returned states are unscaled.
    pub fn solve(&self, init: &[Complex64], points: &[f64], tol: f64) -> Result<Vec<Vec<Complex64>>> {
        if !(tol > 0.0) {
            return Err(Error::InvalidArgument("tolerance must be positive".into()));
        }
        if points.windows(2).any(|w| w[1] < w[0]) || points.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::InvalidArgument("points must be sorted within [0, 1]".into()));
        }
        let d = self.ext.dim();
        let r = self.rate;
        let guess = 0.5 * r * (r / (120.0 * tol)).powf(0.25);
        let mut steps = (guess.max(8.0) as usize).next_power_of_two();
        let mut coarse = self.run(init, points, steps)?;
        loop {
            let fine = self.run(init, points, 2 * steps)?;
            let mut err: f64 = 0.0;
            let mut worst_x = 0.0;
            for (pi, (c, f)) in coarse.iter().zip(&fine).enumerate() {
                for (cb, fb) in c.chunks_exact(d).zip(f.chunks_exact(d)) {
                    let scale = fb.iter().map(|v| v.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
                    let diff = cb.iter().zip(fb).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
                    let e = diff / (15.0 * scale);
                    if e > err {
                        err = e;
                        worst_x = points[pi];
                    }
                }
            }
            if err <= tol {
                let out = coarse
                    .iter()
                    .zip(&fine)
                    .zip(points)
                    .map(|((c, f), &x)| {
                        let back = (self.shift * x).exp();
                        c.iter().zip(f).map(|(a, b)| (b * 16.0 - a) / 15.0 * back).collect()
                    })
                    .collect();
                return Ok(out);
            }
            let factor = (1.2 * (err / tol).powf(0.25)).max(2.0);
            let jump = 1usize << (factor.log2().ceil() as u32).clamp(1, 20);
            let next = steps * jump;
            if next > MAX_STEPS {
                return Err(Error::Integration {
                    x: worst_x,
                    reason: format!("step size underflow (estimate {err:e} above {tol:e})"),
                });
            }
            coarse = if next == 2 * steps { fine } else { self.run(init, points, next)? };
            steps = next;
        }
    }
}

/// Values `[C_k^{[j-1]}(x)]` of the fundamental solutions at requested points.
#[derive(Clone, Debug, PartialEq)]
pub struct FundamentalSolution {
    pub lambda: Complex64,
    pub order: usize,
    /// `(x, matrix)` pairs; rows are quasi-derivative orders, columns `k`.
    pub values: Vec<(f64, DMatrix<Complex64>)>,
}

impl FundamentalSolution {
    pub fn at(&self, x: f64) -> Option<&DMatrix<Complex64>> {
        self.values.iter().find(|(p, _)| *p == x).map(|(_, m)| m)
    }
}

/// Initial matrix `C(0)`: `C_k^{[j]}(0) = delta_{j, n-k}`.
pub fn initial_matrix(n: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(n, n, |i, k| {
        if i + k == n - 1 {
            Complex64::new(1.0, 0.0)
        } else {
            ZERO
        }
    })
}

/// Fundamental solutions `C_1..C_n` and their quasi-derivatives at `x_points`.
pub fn fundamental_matrix(
    f: &AssociatedMatrix,
    lambda: Complex64,
    x_points: &[f64],
    tol: f64,
) -> Result<FundamentalSolution> {
    let n = f.order();
    let flow = WedgeFlow::new(f, lambda, 1);
    let c0 = initial_matrix(n);
    let init: Vec<Complex64> = c0.iter().copied().collect();
    let states = flow.solve(&init, x_points, tol)?;
    let values = x_points
        .iter()
        .zip(states)
        .map(|(&x, s)| (x, DMatrix::from_column_slice(n, n, &s)))
        .collect();
    Ok(FundamentalSolution {
        lambda,
        order: n,
        values,
    })
}

/// `W[s][r] = V_s(C_r) = C_r^{[n-s]}(1)`.
pub fn boundary_matrix(f: &AssociatedMatrix, lambda: Complex64, tol: f64) -> Result<DMatrix<Complex64>> {
    let n = f.order();
    let sol = fundamental_matrix(f, lambda, &[1.0], tol)?;
    let c1 = &sol.values[0].1;
    Ok(DMatrix::from_fn(n, n, |s, r| c1[(n - 1 - s, r)]))
}

/// A minor `det[V_s(C_r)]` with rows `s` and columns `r` in the given order
/// (1-based indices as in the boundary forms).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MinorRequest {
    pub rows: Vec<usize>,
    pub columns: Vec<usize>,
}

/// Evaluates minors of the boundary matrix by propagating wedges of the
/// requested columns. Empty requests evaluate to 1.
pub fn boundary_minors(
    f: &AssociatedMatrix,
    lambda: Complex64,
    requests: &[MinorRequest],
    tol: f64,
) -> Result<Vec<Complex64>> {
    let n = f.order();
    if requests.iter().any(|r| r.columns.is_empty() && !r.rows.is_empty()) {
        return Err(Error::InvalidArgument("minor with rows but no columns".into()));
    }
    let mut out = vec![Complex64::new(1.0, 0.0); requests.len()];
    for m in 1..=n {
        let group: Vec<usize> = (0..requests.len()).filter(|&i| requests[i].columns.len() == m).collect();
        if group.is_empty() {
            continue;
        }
        let flow = WedgeFlow::new(f, lambda, m);
        let d = flow.ext.dim();
        let mut init = vec![ZERO; d * group.len()];
        for (b, &gi) in group.iter().enumerate() {
            let req = &requests[gi];
            if req.rows.len() != m {
                return Err(Error::InvalidArgument(format!(
                    "minor with {} rows and {} columns",
                    req.rows.len(),
                    m
                )));
            }
            if req.rows.iter().chain(&req.columns).any(|&i| i == 0 || i > n) {
                return Err(Error::InvalidArgument("minor index out of range".into()));
            }
            // C_r(0) = e_{n-r}
            let idx: Vec<usize> = req.columns.iter().map(|&r| n - r).collect();
            if let Some((k, sign)) = flow.ext.locate(&idx) {
                init[b * d + k] = Complex64::new(sign, 0.0);
            }
        }
        let end = flow.solve(&init, &[1.0], tol)?;
        let z = &end[0];
        for (b, &gi) in group.iter().enumerate() {
            let idx: Vec<usize> = requests[gi].rows.iter().map(|&s| n - s).collect();
            out[gi] = match flow.ext.locate(&idx) {
                Some((k, sign)) => z[b * d + k] * sign,
                None => ZERO,
            };
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_associated_matrix, CoefficientSet, Order};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn initial_condition_is_antidiagonal() {
        let f = build_associated_matrix(&CoefficientSet::free(Order::Fifth));
        let sol = fundamental_matrix(&f, Complex64::new(3.0, -1.0), &[0.0, 0.5], 1e-10).unwrap();
        assert_eq!(sol.values[0].1, initial_matrix(5));
    }

    #[test]
    fn free_order_four_at_zero_is_polynomial() {
        let f = build_associated_matrix(&CoefficientSet::free(Order::Fourth));
        let sol = fundamental_matrix(&f, c(0.0), &[1.0], 1e-12).unwrap();
        let m = &sol.values[0].1;
        let expect = [1.0 / 6.0, 0.5, 1.0, 1.0];
        for k in 0..4 {
            assert!((m[(0, k)] - c(expect[k])).norm() < 1e-13);
        }
        let w = boundary_matrix(&f, c(0.0), 1e-12).unwrap();
        assert!(w[(2, 3)].norm() < 1e-14);
        for k in 0..4 {
            assert!((w[(3, k)] - c(expect[k])).norm() < 1e-13);
        }
    }

    #[test]
    fn free_order_three_boundary_matrix() {
        let f = build_associated_matrix(&CoefficientSet::free(Order::Third));
        let w = boundary_matrix(&f, c(0.0), 1e-12).unwrap();
        let expect = [[1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.5, 1.0, 1.0]];
        for s in 0..3 {
            for r in 0..3 {
                assert!((w[(s, r)] - c(expect[s][r])).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn wedge_minor_matches_dense_minor() {
        let cs = CoefficientSet::fourth(
            crate::chebyshev::ChebSeries::from_real(&[0.2, 0.1, -0.3]),
            crate::chebyshev::ChebSeries::from_real(&[-0.1, 0.4]),
        )
        .unwrap();
        let f = build_associated_matrix(&cs);
        let lambda = Complex64::new(7.0, 2.0);
        let w = boundary_matrix(&f, lambda, 1e-12).unwrap();
        let req = MinorRequest {
            rows: vec![3, 4],
            columns: vec![4, 2],
        };
        let got = boundary_minors(&f, lambda, &[req], 1e-12).unwrap()[0];
        let dense = w[(2, 3)] * w[(3, 1)] - w[(2, 1)] * w[(3, 3)];
        assert!((got - dense).norm() < 1e-9 * (1.0 + dense.norm()), "{got} vs {dense}");
    }

    #[test]
    fn rejects_unsorted_points() {
        let f = build_associated_matrix(&CoefficientSet::free(Order::Third));
        assert!(fundamental_matrix(&f, c(1.0), &[0.5, 0.2], 1e-8).is_err());
    }
}
