//! Coefficient sets, associated matrices and the quasi-derivative
//! regularization of the three operator families.
//!
//! * order 3: `y''' + (p y)' + p y'`, unknown `p`;
//! * order 4: `y'''' - (p y')' + q y` with `tau1' = p`, `tau2'' = q`;
//! * order 5: `y^(5) + (p y'')' + (p y')'' + (q y)' + q y'` with
//!   `sigma0 = p`, `-sigma1' = q`.
//!
//! Coefficients are stored as their antiderivatives in Chebyshev form, so
//! every entry of the associated matrix is again a Chebyshev series.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::chebyshev::ChebSeries;
use crate::error::{Error, Result};

/// Differential order of one of the implemented operator families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Order {
    Third,
    Fourth,
    Fifth,
}

impl Order {
    pub fn new(n: usize) -> Result<Self> {
        match n {
            3 => Ok(Order::Third),
            4 => Ok(Order::Fourth),
            5 => Ok(Order::Fifth),
            other => Err(Error::UnsupportedOrder(other)),
        }
    }

    pub fn n(self) -> usize {
        match self {
            Order::Third => 3,
            Order::Fourth => 4,
            Order::Fifth => 5,
        }
    }

    /// Names of the unknown functions, in canonical order.
    pub fn function_names(self) -> &'static [&'static str] {
        match self {
            Order::Third => &["p"],
            Order::Fourth => &["tau1", "tau2"],
            Order::Fifth => &["sigma0", "sigma1"],
        }
    }
}

impl fmt::Display for Order {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.n())
    }
}

/// How a coefficient function was supplied.
#[derive(Clone, Debug, PartialEq)]
pub enum Representation {
    Chebyshev,
    /// Uniform samples on `[0, 1]`, piecewise-linear, converted to a
    /// Chebyshev interpolant of the given degree.
    Grid { samples: Vec<Complex64>, degree: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientFunction {
    series: ChebSeries,
    representation: Representation,
}

impl CoefficientFunction {
    pub fn chebyshev(series: ChebSeries) -> Result<Self> {
        if series.coeffs().iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidCoefficients("non-finite Chebyshev coefficient".into()));
        }
        Ok(CoefficientFunction {
            series,
            representation: Representation::Chebyshev,
        })
    }

    pub fn grid(samples: Vec<Complex64>, degree: usize) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidCoefficients("grid needs at least two samples".into()));
        }
        if samples.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidCoefficients("non-finite grid sample".into()));
        }
        let m = samples.len() - 1;
        let series = ChebSeries::interpolate(degree, |x| {
            let s = (x.clamp(0.0, 1.0) * m as f64).min(m as f64);
            let i = (s.floor() as usize).min(m - 1);
            let w = s - i as f64;
            samples[i] * (1.0 - w) + samples[i + 1] * w
        });
        Ok(CoefficientFunction {
            series,
            representation: Representation::Grid { samples, degree },
        })
    }

    pub fn series(&self) -> &ChebSeries {
        &self.series
    }

    pub fn representation(&self) -> &Representation {
        &self.representation
    }

    pub fn is_smooth(&self) -> bool {
        matches!(self.representation, Representation::Chebyshev)
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        self.series.eval(x)
    }
}

/// The unknown functions of one operator family.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientSet {
    order: Order,
    functions: BTreeMap<String, CoefficientFunction>,
}

impl CoefficientSet {
    pub fn new<I, S>(order: Order, functions: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, CoefficientFunction)>,
        S: Into<String>,
    {
        let functions: BTreeMap<String, CoefficientFunction> =
            functions.into_iter().map(|(k, v)| (k.into(), v)).collect();
        let expected = order.function_names();
        let mut names: Vec<&str> = functions.keys().map(String::as_str).collect();
        names.sort_unstable();
        let mut want = expected.to_vec();
        want.sort_unstable();
        if names != want {
            return Err(Error::InvalidCoefficients(format!(
                "order {} expects functions {:?}, got {:?}",
                order, expected, names
            )));
        }
        Ok(CoefficientSet { order, functions })
    }

    /// Builds a set from Chebyshev series given in canonical name order.
    pub fn from_series(order: Order, series: Vec<ChebSeries>) -> Result<Self> {
        let names = order.function_names();
        if series.len() != names.len() {
            return Err(Error::InvalidCoefficients(format!(
                "order {} expects {} functions, got {}",
                order,
                names.len(),
                series.len()
            )));
        }
        let mut fns = Vec::with_capacity(names.len());
        for (name, s) in names.iter().zip(series) {
            fns.push((*name, CoefficientFunction::chebyshev(s)?));
        }
        CoefficientSet::new(order, fns)
    }

    /// All coefficients identically zero.
    pub fn free(order: Order) -> Self {
        let zeros = order.function_names().iter().map(|_| ChebSeries::zero()).collect();
        CoefficientSet::from_series(order, zeros).expect("names match by construction")
    }

    pub fn third(p: ChebSeries) -> Result<Self> {
        CoefficientSet::from_series(Order::Third, vec![p])
    }

    pub fn fourth(tau1: ChebSeries, tau2: ChebSeries) -> Result<Self> {
        CoefficientSet::from_series(Order::Fourth, vec![tau1, tau2])
    }

    pub fn fifth(sigma0: ChebSeries, sigma1: ChebSeries) -> Result<Self> {
        CoefficientSet::from_series(Order::Fifth, vec![sigma0, sigma1])
    }

    pub fn order(&self) -> Order {
        self.order
    }

    pub fn function(&self, name: &str) -> Option<&CoefficientFunction> {
        self.functions.get(name)
    }

    /// Series in canonical name order.
    pub fn series(&self) -> Vec<&ChebSeries> {
        self.order
            .function_names()
            .iter()
            .map(|n| self.functions[*n].series())
            .collect()
    }

    pub fn functions(&self) -> impl Iterator<Item = (&str, &CoefficientFunction)> {
        self.functions.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn is_smooth(&self) -> bool {
        self.functions.values().all(CoefficientFunction::is_smooth)
    }

    /// `tau2(1) - tau2(0)` for order 4, zero otherwise.
    pub fn gauge_offset(&self) -> Complex64 {
        match self.order {
            Order::Fourth => {
                let t2 = self.functions["tau2"].series();
                t2.eval(1.0) - t2.eval(0.0)
            }
            _ => Complex64::new(0.0, 0.0),
        }
    }

    /// Whether `tau2(1) = tau2(0)` holds (always true for orders 3 and 5).
    pub fn is_canonical(&self) -> bool {
        self.gauge_offset().norm() <= 1e-12
    }

    /// Removes the `c x` component from `tau2` so that `tau2(1) = tau2(0)`.
    pub fn canonicalized(&self) -> Self {
        if self.order != Order::Fourth {
            return self.clone();
        }
        let c = self.gauge_offset();
        let t1 = self.functions["tau1"].series().clone();
        let t2 = self.functions["tau2"].series() - &ChebSeries::x().scale(c);
        CoefficientSet::fourth(t1, t2).expect("valid by construction")
    }
}

/// Lower part of a matrix function in the class with zero entries above the
/// superdiagonal, unit superdiagonal and zero trace.
///
/// Only entries on or below the diagonal are stored (0-based `(row, col)`,
/// `col <= row`); the superdiagonal is implicit.
#[derive(Clone, Debug, PartialEq)]
pub struct AssociatedMatrix {
    n: usize,
    entries: BTreeMap<(usize, usize), ChebSeries>,
}

impl AssociatedMatrix {
    /// Validates and wraps lower-triangle entries.
    pub fn from_lower(n: usize, entries: BTreeMap<(usize, usize), ChebSeries>) -> Result<Self> {
        if n < 2 {
            return Err(Error::Structure(format!("order {n} too small")));
        }
        for &(i, j) in entries.keys() {
            if i >= n || j > i {
                return Err(Error::Structure(format!(
                    "entry ({}, {}) is not on or below the diagonal",
                    i + 1,
                    j + 1
                )));
            }
        }
        let mut trace = ChebSeries::zero();
        for (&(i, j), s) in &entries {
            if i == j {
                trace = &trace + s;
            }
        }
        let scale = entries.values().map(ChebSeries::max_abs_coeff).fold(1.0, f64::max);
        if trace.max_abs_coeff() > 1e-13 * scale {
            return Err(Error::Structure("trace is not identically zero".into()));
        }
        let entries = entries.into_iter().filter(|(_, s)| !s.is_zero()).collect();
        Ok(AssociatedMatrix { n, entries })
    }

    pub fn order(&self) -> usize {
        self.n
    }

    /// Non-zero stored entries, 0-based.
    pub fn entries(&self) -> &BTreeMap<(usize, usize), ChebSeries> {
        &self.entries
    }

    pub fn entry(&self, i: usize, j: usize) -> Option<&ChebSeries> {
        self.entries.get(&(i, j))
    }

    /// `F(x)` as a dense matrix.
    pub fn evaluate(&self, x: f64) -> DMatrix<Complex64> {
        let n = self.n;
        let mut m = DMatrix::zeros(n, n);
        for k in 0..n - 1 {
            m[(k, k + 1)] = Complex64::new(1.0, 0.0);
        }
        for (&(i, j), s) in &self.entries {
            m[(i, j)] = s.eval(x);
        }
        m
    }

    /// Entry values at `x` in the iteration order of [`entries`](Self::entries).
    pub(crate) fn eval_entries_into(&self, x: f64, out: &mut [Complex64]) {
        for (slot, s) in out.iter_mut().zip(self.entries.values()) {
            *slot = s.eval(x);
        }
    }

    /// Structural check on the stored representation; the superdiagonal and
    /// upper zeros hold by construction.
    pub fn trace_residual(&self, x: f64) -> f64 {
        (0..self.n)
            .filter_map(|k| self.entries.get(&(k, k)))
            .map(|s| s.eval(x))
            .sum::<Complex64>()
            .norm()
    }
}

/// Builds the associated matrix of the order-`n` expression.
pub fn build_associated_matrix(cs: &CoefficientSet) -> AssociatedMatrix {
    let mut e = BTreeMap::new();
    let s = cs.series();
    match cs.order() {
        Order::Third => {
            let p = s[0];
            e.insert((1, 0), -p);
            e.insert((2, 1), -p);
        }
        Order::Fourth => {
            let (t1, t2) = (s[0], s[1]);
            let t1t2 = t1 * t2;
            e.insert((1, 0), -t2);
            e.insert((1, 1), t1.clone());
            e.insert((2, 0), t1t2.clone());
            e.insert((2, 1), &(-&(t1 * t1)) + &t2.scale(Complex64::new(2.0, 0.0)));
            e.insert((2, 2), -t1);
            e.insert((3, 0), t2 * t2);
            e.insert((3, 1), -&t1t2);
            e.insert((3, 2), -t2);
        }
        Order::Fifth => {
            let (s0, s1) = (s[0], s[1]);
            e.insert((2, 0), s1.clone());
            e.insert((2, 1), -s0);
            e.insert((3, 2), -s0);
            e.insert((4, 2), -s1);
        }
    }
    AssociatedMatrix::from_lower(cs.order().n(), e).expect("displayed matrices are trace-free")
}

/// `f*_{k,j} = (-1)^{k+j+1} f_{n-j+1, n-k+1}` (1-based indices).
pub fn build_star_matrix(f: &AssociatedMatrix) -> AssociatedMatrix {
    let n = f.n;
    let mut e = BTreeMap::new();
    for (&(i, j), s) in &f.entries {
        // source (i, j) lands at (a, b) with i = n-1-b, j = n-1-a
        let (a, b) = (n - 1 - j, n - 1 - i);
        let sign = if (a + b + 1) % 2 == 0 { 1.0 } else { -1.0 };
        e.insert((a, b), s.scale(Complex64::new(sign, 0.0)));
    }
    AssociatedMatrix::from_lower(n, e).expect("star of a valid matrix is valid")
}

/// Quasi-derivatives `y^[0..=n]` of a polynomial `y` for the matrix `f`.
pub fn quasi_derivatives(f: &AssociatedMatrix, y: &ChebSeries) -> Vec<ChebSeries> {
    let n = f.order();
    let mut q = vec![y.clone()];
    for k in 1..=n {
        let mut next = q[k - 1].derivative();
        for j in 0..k {
            if let Some(fkj) = f.entry(k - 1, j) {
                next = &next - &(fkj * &q[j]);
            }
        }
        q.push(next);
    }
    q
}

/// The classical expression `l_n(y)` for polynomial `y` and smooth coefficients.
pub fn classical_expression(cs: &CoefficientSet, y: &ChebSeries) -> ChebSeries {
    let d = |s: &ChebSeries, k: usize| (0..k).fold(s.clone(), |acc, _| acc.derivative());
    let s = cs.series();
    match cs.order() {
        Order::Third => {
            let p = s[0];
            &(&d(y, 3) + &(p * y).derivative()) + &(p * &d(y, 1))
        }
        Order::Fourth => {
            let p = s[0].derivative();
            let q = d(s[1], 2);
            &(&d(y, 4) - &(&p * &d(y, 1)).derivative()) + &(&q * y)
        }
        Order::Fifth => {
            let p = s[0];
            let q = -s[1].derivative();
            let mut acc = d(y, 5);
            acc = &acc + &(p * &d(y, 2)).derivative();
            acc = &acc + &d(&(p * &d(y, 1)), 2);
            acc = &acc + &(&q * y).derivative();
            &acc + &(&q * &d(y, 1))
        }
    }
}

/// Max over `x_grid` of `|y^[n](x) - l_n(y)(x)|`.
pub fn verify_regularization(cs: &CoefficientSet, y: &ChebSeries, x_grid: &[f64]) -> Result<f64> {
    if !cs.is_smooth() {
        return Err(Error::NotSmooth(
            "regularization check needs Chebyshev-represented coefficients".into(),
        ));
    }
    if x_grid.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return Err(Error::InvalidArgument("grid points must lie in [0, 1]".into()));
    }
    let f = build_associated_matrix(cs);
    let quasi = quasi_derivatives(&f, y);
    let direct = classical_expression(cs, y);
    let top = &quasi[f.order()];
    Ok(x_grid
        .iter()
        .map(|&x| (top.eval(x) - direct.eval(x)).norm())
        .fold(0.0, f64::max))
}
