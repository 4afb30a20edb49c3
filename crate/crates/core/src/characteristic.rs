//! Characteristic determinants, the Weyl-Yurko matrix and Weyl solutions.
//!
//! Boundary forms are `U_s(y) = y^{[n-s]}(0)` and `V_s(y) = y^{[n-s]}(1)`.
//! The fundamental solutions satisfy `U_s(C_k) = delta_{s,k}`, so a candidate
//! eigenfunction `y = sum c_r C_r` has `U_s(y) = c_s`, and the conditions
//! `U_s(y) = 0, s in A` simply drop the columns in `A`.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AssociatedMatrix, Order};
use crate::propagator::{boundary_matrix, boundary_minors, fundamental_matrix, MinorRequest};

const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Index sets of the boundary forms imposed at `x = 0` and `x = 1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoundarySpec {
    pub order: usize,
    pub at_zero: Vec<usize>,
    pub at_one: Vec<usize>,
}

impl BoundarySpec {
    pub fn new(order: usize, at_zero: Vec<usize>, at_one: Vec<usize>) -> Result<Self> {
        let check = |set: &[usize], side: &str| -> Result<Vec<usize>> {
            let uniq: BTreeSet<usize> = set.iter().copied().collect();
            if uniq.len() != set.len() {
                return Err(Error::InvalidArgument(format!("repeated index in forms at {side}")));
            }
            if uniq.iter().any(|&s| s == 0 || s > order) {
                return Err(Error::InvalidArgument(format!("form index out of 1..={order} at {side}")));
            }
            Ok(uniq.into_iter().collect())
        };
        let a = check(&at_zero, "x = 0")?;
        let b = check(&at_one, "x = 1")?;
        if a.len() + b.len() != order {
            return Err(Error::InvalidArgument(format!(
                "{} + {} boundary conditions for order {}",
                a.len(),
                b.len(),
                order
            )));
        }
        Ok(BoundarySpec {
            order,
            at_zero: a,
            at_one: b,
        })
    }

    /// The problem whose characteristic function is `Delta_{k,k}`:
    /// `A = {1..k}`, `B = {k+1..n}`.
    pub fn diagonal(order: usize, k: usize) -> Result<Self> {
        BoundarySpec::new(order, (1..=k).collect(), (k + 1..=order).collect())
    }

    /// The designated spectra: `S1, S2` (order 3), `S12, S13, S23` (order 4)
    /// and `S123, S124, S125` (order 5).
    pub fn named(order: Order, name: &str) -> Result<Self> {
        let n = order.n();
        let unknown = || Error::UnknownSpectrum {
            name: name.to_string(),
            order: n,
        };
        if !spectrum_names(order).contains(&name) {
            return Err(unknown());
        }
        let digits: Vec<usize> = name[1..]
            .chars()
            .map(|c| c.to_digit(10).map(|d| d as usize).ok_or_else(unknown))
            .collect::<Result<_>>()?;
        let at_one = match order {
            Order::Third => vec![2, 3],
            Order::Fourth => vec![3, 4],
            Order::Fifth => vec![4, 5],
        };
        BoundarySpec::new(n, digits, at_one)
    }

    /// Columns `{1..n} \ A` of the boundary matrix, increasing.
    pub fn free_columns(&self) -> Vec<usize> {
        (1..=self.order).filter(|s| !self.at_zero.contains(s)).collect()
    }

    pub fn minor_request(&self) -> MinorRequest {
        MinorRequest {
            rows: self.at_one.clone(),
            columns: self.free_columns(),
        }
    }
}

pub fn spectrum_names(order: Order) -> &'static [&'static str] {
    match order {
        Order::Third => &["S1", "S2"],
        Order::Fourth => &["S12", "S13", "S23"],
        Order::Fifth => &["S123", "S124", "S125"],
    }
}

/// Determinant of `W` restricted to rows `B` and columns `{1..n} \ A`.
pub fn char_function(w: &DMatrix<Complex64>, spec: &BoundarySpec) -> Result<Complex64> {
    if w.nrows() != spec.order || w.ncols() != spec.order {
        return Err(Error::InvalidArgument(format!(
            "boundary matrix is {}x{}, spec has order {}",
            w.nrows(),
            w.ncols(),
            spec.order
        )));
    }
    Ok(dense_minor(w, &spec.at_one, &spec.free_columns()))
}

/// `det W[rows, cols]` for 1-based ordered index lists.
pub fn dense_minor(w: &DMatrix<Complex64>, rows: &[usize], cols: &[usize]) -> Complex64 {
    if rows.is_empty() {
        return ONE;
    }
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| w[(rows[i] - 1, cols[j] - 1)]).determinant()
}

/// Minor request for `Delta_{j,k}`: columns `k+1..n` with `C_j` replaced in
/// place by `C_k`, rows `k+1..n`.
pub fn delta_request(n: usize, j: usize, k: usize) -> Result<MinorRequest> {
    if !(1 <= k && k <= j && j <= n) {
        return Err(Error::InvalidArgument(format!("Delta_{{{j},{k}}} needs 1 <= k <= j <= {n}")));
    }
    let rows: Vec<usize> = (k + 1..=n).collect();
    let columns = rows.iter().map(|&r| if r == j { k } else { r }).collect();
    Ok(MinorRequest { rows, columns })
}

/// `Delta_{j,k}(lambda)`.
pub fn delta(f: &AssociatedMatrix, lambda: Complex64, j: usize, k: usize, tol: f64) -> Result<Complex64> {
    let req = delta_request(f.order(), j, k)?;
    Ok(boundary_minors(f, lambda, &[req], tol)?[0])
}

/// Sign relating `Delta_{j,k}` (replaced column kept in place) to the minor
/// with columns sorted increasingly: `Delta_{j,k} = sign * sorted minor`.
pub fn delta_sort_sign(j: usize, k: usize) -> f64 {
    if j > k && (j - k - 1) % 2 == 1 {
        -1.0
    } else {
        1.0
    }
}

/// Entire function `lambda -> det` for a fixed problem, evaluated by wedge
/// propagation.
#[derive(Clone, Debug)]
pub struct CharacteristicFunction {
    matrix: AssociatedMatrix,
    request: MinorRequest,
    tol: f64,
}

impl CharacteristicFunction {
    pub fn new(f: &AssociatedMatrix, spec: &BoundarySpec, tol: f64) -> Result<Self> {
        if spec.order != f.order() {
            return Err(Error::InvalidArgument("spec order differs from matrix order".into()));
        }
        Ok(CharacteristicFunction {
            matrix: f.clone(),
            request: spec.minor_request(),
            tol,
        })
    }

    pub fn for_delta(f: &AssociatedMatrix, j: usize, k: usize, tol: f64) -> Result<Self> {
        Ok(CharacteristicFunction {
            matrix: f.clone(),
            request: delta_request(f.order(), j, k)?,
            tol,
        })
    }

    pub fn with_tol(&self, tol: f64) -> Self {
        CharacteristicFunction {
            tol,
            ..self.clone()
        }
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn matrix(&self) -> &AssociatedMatrix {
        &self.matrix
    }

    pub fn eval(&self, lambda: Complex64) -> Result<Complex64> {
        Ok(boundary_minors(&self.matrix, lambda, std::slice::from_ref(&self.request), self.tol)?[0])
    }
}

/// The Weyl-Yurko matrix at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct WeylSample {
    pub lambda: Complex64,
    pub matrix: DMatrix<Complex64>,
}

impl WeylSample {
    /// `m_{j,k}` with 1-based indices.
    pub fn m(&self, j: usize, k: usize) -> Complex64 {
        self.matrix[(j - 1, k - 1)]
    }
}

/// Near-pole floor on `|Delta_{k,k}|`.
pub fn pole_floor(lambda: Complex64) -> f64 {
    1e-12 * (1.0 + lambda.norm())
}

/// `M_{j,k} = -Delta_{j,k} / Delta_{k,k}` below the unit diagonal.
pub fn weyl_matrix(f: &AssociatedMatrix, lambda: Complex64, tol: f64) -> Result<WeylSample> {
    let n = f.order();
    let mut reqs = Vec::new();
    let mut slots = Vec::new();
    for k in 1..n {
        for j in k..=n {
            reqs.push(delta_request(n, j, k)?);
            slots.push((j, k));
        }
    }
    let vals = boundary_minors(f, lambda, &reqs, tol)?;
    let mut diag = vec![ONE; n + 1];
    for (&(j, k), v) in slots.iter().zip(&vals) {
        if j == k {
            diag[k] = *v;
            if v.norm() < pole_floor(lambda) {
                return Err(Error::NearPole {
                    lambda,
                    column: k,
                    modulus: v.norm(),
                });
            }
        }
    }
    let mut m = DMatrix::identity(n, n);
    for (&(j, k), v) in slots.iter().zip(&vals) {
        if j > k {
            m[(j - 1, k - 1)] = -v / diag[k];
        }
    }
    Ok(WeylSample { lambda, matrix: m })
}

/// The Weyl-Yurko matrix from a dense boundary matrix (no wedge propagation).
pub fn weyl_from_boundary_matrix(w: &DMatrix<Complex64>, lambda: Complex64) -> Result<WeylSample> {
    let n = w.nrows();
    let mut m = DMatrix::identity(n, n);
    for k in 1..n {
        let req = delta_request(n, k, k)?;
        let dkk = dense_minor(w, &req.rows, &req.columns);
        if dkk.norm() < pole_floor(lambda) {
            return Err(Error::NearPole {
                lambda,
                column: k,
                modulus: dkk.norm(),
            });
        }
        for j in k + 1..=n {
            let req = delta_request(n, j, k)?;
            m[(j - 1, k - 1)] = -dense_minor(w, &req.rows, &req.columns) / dkk;
        }
    }
    Ok(WeylSample { lambda, matrix: m })
}

/// `Phi_k` and its quasi-derivatives at `x_points` (one vector per point),
/// from `Phi_k = Delta_kk^{-1} det[C_nu(x); V_{k+1}(C_nu); ...; V_n(C_nu)]`.
pub fn phi_solution(
    f: &AssociatedMatrix,
    lambda: Complex64,
    k: usize,
    x_points: &[f64],
    tol: f64,
) -> Result<Vec<(f64, DVector<Complex64>)>> {
    let n = f.order();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("Weyl solution index {k} out of 1..={n}")));
    }
    let w = boundary_matrix(f, lambda, tol)?;
    let req = delta_request(n, k, k)?;
    let dkk = dense_minor(&w, &req.rows, &req.columns);
    if dkk.norm() < pole_floor(lambda) {
        return Err(Error::NearPole {
            lambda,
            column: k,
            modulus: dkk.norm(),
        });
    }
    let sol = fundamental_matrix(f, lambda, x_points, tol)?;
    let size = n - k + 1;
    let mut out = Vec::with_capacity(x_points.len());
    for (x, c) in &sol.values {
        let v = DVector::from_fn(n, |q, _| {
            let mat = DMatrix::from_fn(size, size, |row, col| {
                let nu = k + col;
                if row == 0 {
                    c[(q, nu - 1)]
                } else {
                    w[(k + row - 1, nu - 1)]
                }
            });
            mat.determinant() / dkk
        });
        out.push((*x, v));
    }
    Ok(out)
}

/// The signed anti-diagonal matrices `J_0`, `J_1` and `J`.
#[derive(Clone, Debug, PartialEq)]
pub struct SignMatrices {
    pub j0: DMatrix<Complex64>,
    pub j1: DMatrix<Complex64>,
    pub j: DMatrix<Complex64>,
}

/// `J_a[k][n-k+1] = (-1)^{n-k}` (from `p*_{k,a} = n-1-p_{n-k+1,a}` with
/// `p_{s,a} = n-s`) and `J[k][n-k+1] = (-1)^{k+1}`.
pub fn build_sign_matrices(n: usize) -> Result<SignMatrices> {
    Order::new(n)?;
    let sign = |e: usize| if e.is_multiple_of(2) { ONE } else { -ONE };
    let anti = |g: &dyn Fn(usize) -> Complex64| {
        DMatrix::from_fn(n, n, |r, c| if r + c == n - 1 { g(r + 1) } else { Complex64::new(0.0, 0.0) })
    };
    let ja = anti(&|k| sign(n - k));
    Ok(SignMatrices {
        j0: ja.clone(),
        j1: ja,
        j: anti(&|k| sign(k + 1)),
    })
}

/// Coefficient matrix of the forms `U_s(y) = sum_j u_{s,j} y^{[j-1]}(0)`;
/// for `U_s(y) = y^{[n-s]}(0)` this is the anti-diagonal permutation.
pub fn form_matrix(n: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(n, n, |s, j| if s + j == n - 1 { ONE } else { Complex64::new(0.0, 0.0) })
}

/// `U* = [J_0^{-1} U^{-1} J]^T` for the standard forms.
pub fn star_form_matrix(n: usize) -> Result<DMatrix<Complex64>> {
    let sm = build_sign_matrices(n)?;
    let u = form_matrix(n);
    let j0_inv = sm.j0.clone().try_inverse().ok_or_else(|| Error::Singular("J_0".into()))?;
    let u_inv = u.try_inverse().ok_or_else(|| Error::Singular("U".into()))?;
    Ok((j0_inv * u_inv * sm.j).transpose())
}
