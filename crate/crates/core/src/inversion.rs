//! Forward map from coefficients to leading eigenvalues, and recovery of
//! coefficients from several spectra by damped least squares.
//!
//! Unknown functions are real Chebyshev series with a fixed number of modes.
//! For order 4 the coefficient of `T_1` in `tau2` is eliminated through
//! `tau2(1) = tau2(0)`, i.e. `sum_{k odd} a_k = 0`.
//!
//! Residuals are eigenvalue differences scaled by `(1 + |lambda|)^{(n-1)/n}`,
//! which measures them in units of `rho = lambda^{1/n}`. Jacobian rows come
//! from the implicit function theorem on the characteristic functions,
//! `d lambda / d c = -(d Delta / d c) / (d Delta / d lambda)`, with the
//! parameter derivative taken by forward differences. Trial points are
//! reached by Newton tracking from the linear prediction; a full search of
//! the planned box is the fallback and the final check.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::characteristic::{spectrum_names, BoundarySpec, CharacteristicFunction};
use crate::chebyshev::ChebSeries;
use crate::error::{Error, Result};
use crate::identities::{check_separation, separation_pairs, SeparationReport};
use crate::model::{build_associated_matrix, CoefficientSet, Order};
use crate::propagator::DEFAULT_TOL;
use crate::rootfinder::{derivative, find_spectrum, newton, plan_search_box, Spectrum};

/// Box growth steps allowed when the planned box holds too few eigenvalues.
const MAX_GROWTH: usize = 4;
const TRACK_SUBSTEPS: [usize; 4] = [1, 2, 4, 8];
/// Columns whose normalised singular value falls below this are dependent.
const RANK_RATIO: f64 = 1e-8;
const GAUGE_FUNCTION: &str = "tau2";

/// Default spectrum selection of an order.
pub fn default_selection(order: Order) -> Vec<String> {
    spectrum_names(order).iter().map(|s| s.to_string()).collect()
}

/// Unknowns of an inverse problem: real Chebyshev coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Parameterization {
    pub modes: usize,
    /// Eliminates the `c x` direction of `tau2` (order 4 only).
    pub gauge: bool,
}

impl Parameterization {
    pub fn new(order: Order, modes: usize) -> Result<Self> {
        if modes < 2 {
            return Err(Error::InvalidArgument("at least two modes per function".into()));
        }
        Ok(Parameterization {
            modes,
            gauge: order == Order::Fourth,
        })
    }

    fn gauged(&self, name: &str) -> bool {
        self.gauge && name == GAUGE_FUNCTION
    }

    pub fn count(&self, order: Order) -> usize {
        order
            .function_names()
            .iter()
            .map(|name| if self.gauged(name) { self.modes - 1 } else { self.modes })
            .sum()
    }

    /// Coefficient set of a parameter vector.
    pub fn to_set(&self, order: Order, x: &[f64]) -> Result<CoefficientSet> {
        if x.len() != self.count(order) {
            return Err(Error::InvalidArgument(format!(
                "expected {} parameters, got {}",
                self.count(order),
                x.len()
            )));
        }
        let mut rest = x;
        let mut series = Vec::new();
        for name in order.function_names() {
            let coeffs = if self.gauged(name) {
                let (head, tail) = rest.split_at(self.modes - 1);
                rest = tail;
                let mut c = Vec::with_capacity(self.modes);
                c.push(head[0]);
                let odd: f64 = head[1..].iter().enumerate().filter(|(i, _)| i % 2 == 1).map(|(_, v)| v).sum();
                c.push(-odd);
                c.extend_from_slice(&head[1..]);
                c
            } else {
                let (head, tail) = rest.split_at(self.modes);
                rest = tail;
                head.to_vec()
            };
            series.push(ChebSeries::from_real(&coeffs));
        }
        CoefficientSet::from_series(order, series)
    }

    /// Parameters of the closest representable set: real parts of the
    /// leading coefficients, after reduction to the canonical gauge.
    pub fn from_set(&self, cs: &CoefficientSet) -> Vec<f64> {
        let canon = if self.gauge { cs.canonicalized() } else { cs.clone() };
        let mut x = Vec::new();
        for (name, s) in canon.order().function_names().iter().zip(canon.series()) {
            let c: Vec<f64> = (0..self.modes).map(|k| s.coeffs().get(k).map_or(0.0, |v| v.re)).collect();
            if self.gauged(name) {
                x.push(c[0]);
                x.extend_from_slice(&c[2..]);
            } else {
                x.extend_from_slice(&c);
            }
        }
        x
    }
}

/// Target data of an inverse problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InverseSpec {
    pub order: usize,
    pub selection: Vec<String>,
    /// Per spectrum, leading eigenvalues in canonical order with repetition.
    pub targets: Vec<Vec<Complex64>>,
    pub parameterization: Parameterization,
}

impl InverseSpec {
    pub fn new(order: Order, targets: Vec<Vec<Complex64>>, modes: usize) -> Result<Self> {
        let spec = InverseSpec {
            order: order.n(),
            selection: default_selection(order),
            targets,
            parameterization: Parameterization::new(order, modes)?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let order = Order::new(self.order)?;
        for name in &self.selection {
            BoundarySpec::named(order, name)?;
        }
        if self.selection.is_empty() || self.selection.len() != self.targets.len() {
            return Err(Error::InvalidArgument("one target list per selected spectrum".into()));
        }
        if self.targets.iter().any(|t| t.is_empty()) {
            return Err(Error::InvalidArgument("empty target list".into()));
        }
        if self.parameterization.gauge != (order == Order::Fourth) {
            return Err(Error::InvalidArgument("the tau2 gauge applies to order 4 exactly".into()));
        }
        if self.parameterization.modes < 2 {
            return Err(Error::InvalidArgument("at least two modes per function".into()));
        }
        Ok(())
    }

    pub fn order(&self) -> Order {
        Order::new(self.order).expect("validated")
    }

    pub fn parameter_count(&self) -> usize {
        self.parameterization.count(self.order())
    }

    /// Real residual components against real unknowns.
    pub fn residual_count(&self) -> usize {
        2 * self.targets.iter().map(Vec::len).sum::<usize>()
    }

    /// At least as many target eigenvalues per spectrum as parameters per
    /// spectrum.
    pub fn is_overdetermined(&self) -> bool {
        let per = self.parameter_count() as f64 / self.selection.len() as f64;
        self.targets.iter().all(|t| t.len() as f64 >= per)
    }
}

/// Argument-principle bookkeeping of one full spectrum search.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RootCount {
    pub spectrum: String,
    pub multiplicity_sum: usize,
    pub argument_count: usize,
}

impl RootCount {
    pub fn of(s: &Spectrum, name: &str) -> Self {
        RootCount {
            spectrum: name.to_string(),
            multiplicity_sum: s.total_multiplicity(),
            argument_count: s.argument_count,
        }
    }

    pub fn consistent(&self) -> bool {
        self.multiplicity_sum == self.argument_count
    }
}

/// Full spectra of the selected problems over a box holding at least
/// `count` eigenvalues below its inner radius. Order-4 input is reduced to
/// the canonical gauge first.
pub fn forward_spectra(cs: &CoefficientSet, selection: &[String], count: usize, tol: f64) -> Result<Vec<Spectrum>> {
    if count == 0 {
        return Err(Error::InvalidArgument("count must be positive".into()));
    }
    let canon = cs.canonicalized();
    let f = build_associated_matrix(&canon);
    let order = canon.order();
    let n = order.n();
    selection
        .iter()
        .map(|name| {
            let spec = BoundarySpec::named(order, name)?;
            let mut rect = plan_search_box(n, count);
            let mut found = 0;
            for _ in 0..=MAX_GROWTH {
                let s = find_spectrum(&f, &spec, &rect, usize::MAX, tol)?;
                found = s.leading().len();
                if found >= count {
                    return Ok(s);
                }
                rect.half_re *= 4.0;
                rect.half_im *= 4.0;
            }
            Err(Error::NotEnoughEigenvalues { found, wanted: count })
        })
        .collect()
}

/// First `count` eigenvalues of each selected spectrum, canonical order,
/// multiplicities repeated.
pub fn forward_map(cs: &CoefficientSet, selection: &[String], count: usize, tol: f64) -> Result<Vec<Vec<Complex64>>> {
    Ok(forward_spectra(cs, selection, count, tol)?
        .iter()
        .map(|s| s.leading().into_iter().take(count).collect())
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoverOptions {
    pub max_iterations: usize,
    /// Convergence threshold on the scaled residual norm.
    pub residual_tol: f64,
    /// Propagation tolerance.
    pub tol: f64,
    pub initial_damping: f64,
    /// Eigenvalues tracked beyond the targets, for matching.
    pub extra: usize,
    pub jacobian_step: f64,
}

impl Default for RecoverOptions {
    fn default() -> Self {
        RecoverOptions {
            max_iterations: 40,
            residual_tol: 1e-9,
            tol: DEFAULT_TOL,
            initial_damping: 1e-3,
            extra: 2,
            jacobian_step: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub residual_norm: f64,
    pub trial_residual_norm: f64,
    pub damping: f64,
    pub step_norm: f64,
    pub accepted: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InverseResult {
    pub recovered: CoefficientSet,
    pub parameters: Vec<f64>,
    pub iterations: usize,
    pub residual_norm: f64,
    pub residual_tol: f64,
    pub history: Vec<IterationRecord>,
    /// Residual below tolerance, full column rank and confirmed by a fresh
    /// search.
    pub converged: bool,
    pub rank_deficient: bool,
    /// Smallest over largest singular value of the column-normalised
    /// Jacobian at the final point.
    pub singular_ratio: f64,
    /// Model eigenvalues matched to the targets.
    pub eigenvalues: Vec<Vec<Complex64>>,
    /// Largest scaled gap between tracked eigenvalues and a full search at
    /// the final point.
    pub verification_gap: f64,
    pub root_counts: Vec<RootCount>,
}

/// Characteristic functions of the selected spectra at one parameter point.
struct Point {
    x: Vec<f64>,
    chars: Vec<CharacteristicFunction>,
}

struct Problem<'a> {
    spec: &'a InverseSpec,
    order: Order,
    bspecs: Vec<BoundarySpec>,
    options: &'a RecoverOptions,
}

impl<'a> Problem<'a> {
    fn point(&self, x: &[f64]) -> Result<Point> {
        let cs = self.spec.parameterization.to_set(self.order, x)?;
        let f = build_associated_matrix(&cs);
        let chars = self
            .bspecs
            .iter()
            .map(|b| CharacteristicFunction::new(&f, b, self.options.tol))
            .collect::<Result<_>>()?;
        Ok(Point { x: x.to_vec(), chars })
    }

    fn weight(&self, lambda: Complex64) -> f64 {
        let n = self.order.n() as f64;
        (1.0 + lambda.norm()).powf((n - 1.0) / n)
    }

    fn tracked_count(&self, s: usize) -> usize {
        self.spec.targets[s].len() + self.options.extra
    }

    /// Leading eigenvalues from a full search.
    fn search(&self, x: &[f64], counts: &mut Vec<RootCount>) -> Result<Vec<Vec<Complex64>>> {
        let cs = self.spec.parameterization.to_set(self.order, x)?;
        let wanted = (0..self.bspecs.len()).map(|s| self.tracked_count(s)).max().unwrap_or(1);
        let spectra = forward_spectra(&cs, &self.spec.selection, wanted, self.options.tol)?;
        let mut out = Vec::with_capacity(spectra.len());
        for (s, sp) in spectra.iter().enumerate() {
            counts.push(RootCount::of(sp, &self.spec.selection[s]));
            out.push(sp.leading().into_iter().take(self.tracked_count(s)).collect());
        }
        Ok(out)
    }

    /// Newton from predicted positions; every eigenvalue must stay within a
    /// fraction of its separation from the others.
    fn track(&self, p: &Point, from: &[Vec<Complex64>], predicted: &[Vec<Complex64>]) -> Result<Vec<Vec<Complex64>>> {
        let mut out = Vec::with_capacity(from.len());
        for (s, (old, pred)) in from.iter().zip(predicted).enumerate() {
            let g = |z: Complex64| p.chars[s].eval(z);
            let new: Vec<Option<Complex64>> = (0..old.len())
                .into_par_iter()
                .map(|i| {
                    let gap = old
                        .iter()
                        .enumerate()
                        .filter(|&(j, _)| j != i)
                        .map(|(_, z)| (z - old[i]).norm())
                        .fold(f64::INFINITY, f64::min);
                    let radius = 0.3 * gap.min(1.0 + old[i].norm());
                    if (pred[i] - old[i]).norm() > radius {
                        return Ok(None);
                    }
                    let inside = |z: Complex64| (z - old[i]).norm() <= radius;
                    newton(&g, pred[i], 1, &inside, 1e-13)
                })
                .collect::<Result<_>>()?;
            let Some(new) = new.into_iter().collect::<Option<Vec<_>>>() else {
                return Err(Error::Tracking(format!("lost an eigenvalue of {}", self.spec.selection[s])));
            };
            out.push(new);
        }
        Ok(out)
    }

    /// Eigenvalues at `x1`, continuing from `(p0, eig0)` along a straight
    /// parameter path with the linear predictor `jac`, or searching afresh.
    fn advance(
        &self,
        eig0: &[Vec<Complex64>],
        jac: &[Vec<Vec<Complex64>>],
        x0: &[f64],
        x1: &[f64],
        counts: &mut Vec<RootCount>,
    ) -> Result<(Point, Vec<Vec<Complex64>>)> {
        let target = self.point(x1)?;
        for &sub in &TRACK_SUBSTEPS {
            let mut eig = eig0.to_vec();
            let mut ok = true;
            for k in 1..=sub {
                let t = k as f64 / sub as f64;
                let xt: Vec<f64> = x0.iter().zip(x1).map(|(a, b)| a + t * (b - a)).collect();
                let dx: Vec<f64> = x0.iter().zip(x1).map(|(a, b)| (b - a) / sub as f64).collect();
                let pred: Vec<Vec<Complex64>> = eig
                    .iter()
                    .zip(jac)
                    .map(|(e, js)| {
                        e.iter()
                            .zip(js)
                            .map(|(z, row)| z + row.iter().zip(&dx).map(|(j, d)| j * d).sum::<Complex64>())
                            .collect()
                    })
                    .collect();
                let p = if k == sub { None } else { Some(self.point(&xt)?) };
                match self.track(p.as_ref().unwrap_or(&target), &eig, &pred) {
                    Ok(e) => eig = e,
                    Err(Error::Tracking(_)) => {
                        ok = false;
                        break;
                    }
                    Err(e) => return Err(e),
                }
            }
            if ok && distinct(&eig) {
                return Ok((target, eig));
            }
        }
        let eig = self.search(x1, counts)?;
        Ok((target, eig))
    }

    /// `d lambda / d x_p` for every tracked eigenvalue.
    fn jacobian(&self, p: &Point, eig: &[Vec<Complex64>]) -> Result<Vec<Vec<Vec<Complex64>>>> {
        let h = self.options.jacobian_step;
        let shifted: Vec<Point> = (0..p.x.len())
            .into_par_iter()
            .map(|k| {
                let mut x = p.x.clone();
                x[k] += h;
                self.point(&x)
            })
            .collect::<Result<_>>()?;
        eig.iter()
            .enumerate()
            .map(|(s, list)| {
                list.par_iter()
                    .map(|&z| {
                        let g = |w: Complex64| p.chars[s].eval(w);
                        let d = derivative(&g, z)?;
                        let base = g(z)?;
                        shifted
                            .iter()
                            .map(|q| Ok(-(q.chars[s].eval(z)? - base) / h / d))
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect()
    }

    /// Scaled residual vector and the matched model index of each target.
    fn residual(&self, eig: &[Vec<Complex64>]) -> (DVector<f64>, Vec<Vec<usize>>) {
        let mut r = Vec::with_capacity(self.spec.residual_count());
        let mut matches = Vec::with_capacity(eig.len());
        for (targets, model) in self.spec.targets.iter().zip(eig) {
            let m = match_nearest(targets, model, |z| self.weight(z));
            for (t, &j) in targets.iter().zip(&m) {
                let d = (model[j] - t) / self.weight(*t);
                r.push(d.re);
                r.push(d.im);
            }
            matches.push(m);
        }
        (DVector::from_vec(r), matches)
    }

    fn jacobian_matrix(&self, jac: &[Vec<Vec<Complex64>>], matches: &[Vec<usize>]) -> DMatrix<f64> {
        let p = self.spec.parameter_count();
        let mut rows: Vec<f64> = Vec::with_capacity(self.spec.residual_count() * p);
        for (s, m) in matches.iter().enumerate() {
            for (t, &j) in self.spec.targets[s].iter().zip(m) {
                let w = self.weight(*t);
                rows.extend(jac[s][j].iter().map(|d| d.re / w));
                rows.extend(jac[s][j].iter().map(|d| d.im / w));
            }
        }
        DMatrix::from_row_slice(rows.len() / p, p, &rows)
    }
}

fn distinct(eig: &[Vec<Complex64>]) -> bool {
    eig.iter().all(|list| {
        list.iter().enumerate().all(|(i, a)| {
            list[i + 1..]
                .iter()
                .all(|b| (a - b).norm() > 1e-6 * (1.0 + a.norm()))
        })
    })
}

/// Greedy nearest-neighbour assignment of targets to model eigenvalues by
/// scaled distance, closest pairs first.
pub fn match_nearest(targets: &[Complex64], model: &[Complex64], weight: impl Fn(Complex64) -> f64) -> Vec<usize> {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(targets.len() * model.len());
    for (i, t) in targets.iter().enumerate() {
        for (j, m) in model.iter().enumerate() {
            pairs.push(((m - t).norm() / weight(*t), i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut out = vec![usize::MAX; targets.len()];
    let mut used = vec![false; model.len()];
    for (_, i, j) in pairs {
        if out[i] == usize::MAX && !used[j] {
            out[i] = j;
            used[j] = true;
        }
    }
    out
}

/// Smallest over largest singular value after scaling columns to unit norm.
fn singular_ratio(j: &DMatrix<f64>) -> f64 {
    if j.nrows() < j.ncols() {
        return 0.0;
    }
    let mut jn = j.clone();
    for mut col in jn.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        }
    }
    let sv = jn.singular_values();
    let max = sv.max();
    if max > 0.0 {
        sv.min() / max
    } else {
        0.0
    }
}

/// Levenberg-Marquardt from `initial`.
pub fn recover(spec: &InverseSpec, initial: &CoefficientSet, options: &RecoverOptions) -> Result<InverseResult> {
    spec.validate()?;
    let order = spec.order();
    if initial.order() != order {
        return Err(Error::InvalidArgument("initial set has a different order".into()));
    }
    let bspecs = spec
        .selection
        .iter()
        .map(|name| BoundarySpec::named(order, name))
        .collect::<Result<Vec<_>>>()?;
    let problem = Problem {
        spec,
        order,
        bspecs,
        options,
    };
    let mut counts = Vec::new();
    let mut x = spec.parameterization.from_set(initial);
    let mut point = problem.point(&x)?;
    let mut eig = problem.search(&x, &mut counts)?;
    let (mut r, mut matches) = problem.residual(&eig);
    let mut jac = problem.jacobian(&point, &eig)?;
    let mut jm = problem.jacobian_matrix(&jac, &matches);
    let mut mu = options.initial_damping;
    let mut history = Vec::new();
    let mut iterations = 0;
    while r.norm() > options.residual_tol && iterations < options.max_iterations {
        iterations += 1;
        let a = jm.transpose() * &jm;
        let g = jm.transpose() * &r;
        let dmax = a.diagonal().max();
        let mut lhs = a.clone();
        for i in 0..lhs.nrows() {
            lhs[(i, i)] += mu * a[(i, i)].max(1e-12 * dmax).max(f64::MIN_POSITIVE);
        }
        let Some(chol) = lhs.cholesky() else {
            mu *= 10.0;
            continue;
        };
        let step = -chol.solve(&g);
        let x1: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
        let trial = problem.advance(&eig, &jac, &x, &x1, &mut counts);
        let (accepted, trial_norm) = match trial {
            Ok((p1, e1)) => {
                let (r1, m1) = problem.residual(&e1);
                let n1 = r1.norm();
                if n1 < r.norm() {
                    x = x1;
                    point = p1;
                    eig = e1;
                    r = r1;
                    matches = m1;
                    jac = problem.jacobian(&point, &eig)?;
                    jm = problem.jacobian_matrix(&jac, &matches);
                    (true, n1)
                } else {
                    (false, n1)
                }
            }
            Err(Error::Tracking(_)) | Err(Error::NotEnoughEigenvalues { .. }) => (false, f64::INFINITY),
            Err(e) => return Err(e),
        };
        history.push(IterationRecord {
            iteration: iterations,
            residual_norm: r.norm(),
            trial_residual_norm: trial_norm,
            damping: mu,
            step_norm: step.norm(),
            accepted,
        });
        if accepted {
            mu = (mu / 10.0).max(1e-12);
            if step.norm() <= 1e-13 * (1.0 + x.iter().map(|v| v * v).sum::<f64>().sqrt()) {
                break;
            }
        } else {
            mu *= 10.0;
            if mu > 1e12 {
                break;
            }
        }
    }
    let ratio = singular_ratio(&jm);
    let rank_deficient = jm.nrows() < jm.ncols() || ratio < RANK_RATIO;
    let fresh = problem.search(&x, &mut counts)?;
    let mut gap: f64 = 0.0;
    let mut matched = Vec::with_capacity(eig.len());
    for (s, m) in matches.iter().enumerate() {
        let picked: Vec<Complex64> = m.iter().map(|&j| eig[s][j]).collect();
        let again = match_nearest(&picked, &fresh[s], |z| problem.weight(z));
        for (z, &k) in picked.iter().zip(&again) {
            gap = gap.max((fresh[s][k] - z).norm() / problem.weight(*z));
        }
        matched.push(picked);
    }
    let residual_norm = r.norm();
    let converged = residual_norm <= options.residual_tol && !rank_deficient && gap <= options.residual_tol.max(1e-9);
    Ok(InverseResult {
        recovered: spec.parameterization.to_set(order, &x)?,
        parameters: x,
        iterations,
        residual_norm,
        residual_tol: options.residual_tol,
        history,
        converged,
        rank_deficient,
        singular_ratio: ratio,
        eigenvalues: matched,
        verification_gap: gap,
        root_counts: counts,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwinOptions {
    pub modes: usize,
    /// Seed of the perturbation direction.
    pub seed: u64,
    pub recover: RecoverOptions,
}

impl Default for TwinOptions {
    fn default() -> Self {
        TwinOptions {
            modes: 6,
            seed: 1,
            recover: RecoverOptions::default(),
        }
    }
}

/// Sup-norm distance of one function (or derived coefficient) to the truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionError {
    pub name: String,
    pub sup_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TwinReport {
    pub spec: InverseSpec,
    pub perturbation: f64,
    pub truth_parameters: Vec<f64>,
    pub initial_parameters: Vec<f64>,
    pub result: InverseResult,
    /// Errors of the unknown functions; `tau2` modulo `c x`.
    pub errors: Vec<FunctionError>,
    /// Errors of the classical coefficients `p`, `q`.
    pub derived_errors: Vec<FunctionError>,
    pub max_error: f64,
    pub separation: SeparationReport,
    /// Full searches for the targets, then those made during recovery.
    pub root_counts: Vec<RootCount>,
}

const SUP_POINTS: usize = 1025;

/// Sup-norm errors of the stored functions; order-4 sets are compared in
/// the canonical gauge, which is the quotient by `span{x}`.
pub fn parameter_errors(truth: &CoefficientSet, recovered: &CoefficientSet) -> Vec<FunctionError> {
    let (a, b) = (truth.canonicalized(), recovered.canonicalized());
    a.order()
        .function_names()
        .iter()
        .zip(a.series().into_iter().zip(b.series()))
        .map(|(name, (s, t))| FunctionError {
            name: name.to_string(),
            sup_error: (s - t).sup_norm(SUP_POINTS),
        })
        .collect()
}

/// Sup-norm errors of `p` and (orders 4, 5) `q`.
pub fn classical_errors(truth: &CoefficientSet, recovered: &CoefficientSet) -> Vec<FunctionError> {
    let classical = |cs: &CoefficientSet| -> Vec<ChebSeries> {
        let s = cs.series();
        match cs.order() {
            Order::Third => vec![s[0].clone()],
            Order::Fourth => vec![s[0].derivative(), s[1].derivative().derivative()],
            Order::Fifth => vec![s[0].clone(), -&s[1].derivative()],
        }
    };
    let names = ["p", "q"];
    classical(truth)
        .iter()
        .zip(classical(recovered).iter())
        .enumerate()
        .map(|(i, (s, t))| FunctionError {
            name: names[i].to_string(),
            sup_error: (s - t).sup_norm(SUP_POINTS),
        })
        .collect()
}

/// Random direction of Euclidean length `scale`.
pub fn perturbation(count: usize, scale: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v: Vec<f64> = (0..count).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if norm == 0.0 || scale == 0.0 {
        return vec![0.0; count];
    }
    v.iter().map(|a| a * scale / norm).collect()
}

/// Targets from `truth`, recovery from a perturbed start, and the errors.
pub fn twin_experiment(truth: &CoefficientSet, perturbation_scale: f64, count: usize, options: &TwinOptions) -> Result<TwinReport> {
    let order = truth.order();
    let selection = default_selection(order);
    let spectra = forward_spectra(truth, &selection, count, options.recover.tol)?;
    let mut root_counts: Vec<RootCount> = spectra.iter().zip(&selection).map(|(s, n)| RootCount::of(s, n)).collect();
    let targets = spectra.iter().map(|s| s.leading().into_iter().take(count).collect()).collect();
    let spec = InverseSpec::new(order, targets, options.modes)?;
    let truth_parameters = spec.parameterization.from_set(truth);
    let shift = perturbation(truth_parameters.len(), perturbation_scale, options.seed);
    let initial_parameters: Vec<f64> = truth_parameters.iter().zip(&shift).map(|(a, b)| a + b).collect();
    let initial = spec.parameterization.to_set(order, &initial_parameters)?;
    let result = recover(&spec, &initial, &options.recover)?;
    let f = build_associated_matrix(&truth.canonicalized());
    let pairs = separation_pairs(&f, &plan_search_box(order.n(), count), options.recover.tol)?;
    let separation = check_separation(&pairs, 1e-8);
    for (a, b) in &pairs {
        root_counts.push(RootCount::of(a, &format!("D{}{}", diag_index(a), diag_index(a))));
        root_counts.push(RootCount::of(b, &format!("D{}{}", diag_index(b), diag_index(b))));
    }
    root_counts.extend(result.root_counts.iter().cloned());
    let errors = parameter_errors(truth, &result.recovered);
    let derived_errors = classical_errors(truth, &result.recovered);
    let max_error = errors.iter().map(|e| e.sup_error).fold(0.0, f64::max);
    Ok(TwinReport {
        spec,
        perturbation: perturbation_scale,
        truth_parameters,
        initial_parameters,
        result,
        errors,
        derived_errors,
        max_error,
        separation,
        root_counts,
    })
}

/// `m` of a `Delta_{m,m}` problem (`m` conditions at zero).
fn diag_index(s: &Spectrum) -> usize {
    s.problem.at_zero.len()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn gauge_parameterization_is_canonical_and_round_trips() {
        let order = Order::Fourth;
        let par = Parameterization::new(order, 6).unwrap();
        assert_eq!(par.count(order), 11);
        let x: Vec<f64> = (0..11).map(|i| 0.1 * (i as f64 + 1.0).sin()).collect();
        let cs = par.to_set(order, &x).unwrap();
        assert!(cs.is_canonical());
        for (a, b) in x.iter().zip(&par.from_set(&cs)) {
            assert!((a - b).abs() < 1e-15);
        }
        let shifted = CoefficientSet::fourth(
            cs.series()[0].clone(),
            cs.series()[1] + &ChebSeries::x().scale(c(0.7, 0.0)),
        )
        .unwrap();
        let y = par.from_set(&shifted);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn nearest_matching_survives_reordering() {
        let t = [c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0)];
        let m = [c(3.01, 0.0), c(0.99, 0.0), c(7.0, 0.0), c(2.02, 0.0)];
        assert_eq!(match_nearest(&t, &m, |_| 1.0), vec![1, 3, 0]);
    }

    #[test]
    fn perturbation_has_requested_length() {
        let p = perturbation(7, 0.1, 3);
        assert!((p.iter().map(|v| v * v).sum::<f64>().sqrt() - 0.1).abs() < 1e-15);
        assert_eq!(perturbation(7, 0.1, 3), p);
        assert!(perturbation(4, 0.0, 3).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn spec_validation() {
        assert!(InverseSpec::new(Order::Third, vec![vec![c(1.0, 0.0)]], 4).is_err());
        let s = InverseSpec::new(Order::Third, vec![vec![c(1.0, 0.0)]; 2], 4).unwrap();
        assert_eq!(s.parameter_count(), 4);
        assert!(!s.is_overdetermined());
        let mut bad = s.clone();
        bad.selection[1] = "S12".into();
        assert!(matches!(bad.validate(), Err(Error::UnknownSpectrum { .. })));
    }

    #[test]
    fn forward_map_is_deterministic() {
        let cs = CoefficientSet::third(ChebSeries::from_real(&[0.1, -0.2, 0.05])).unwrap();
        let sel = default_selection(Order::Third);
        let a = forward_map(&cs, &sel, 3, DEFAULT_TOL).unwrap();
        let b = forward_map(&cs, &sel, 3, DEFAULT_TOL).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|l| l.len() == 3));
    }

    #[test]
    fn fixed_point_needs_no_iterations() {
        let cs = CoefficientSet::third(ChebSeries::from_real(&[0.1, -0.2, 0.05, 0.01])).unwrap();
        let targets = forward_map(&cs, &default_selection(Order::Third), 5, DEFAULT_TOL).unwrap();
        let spec = InverseSpec::new(Order::Third, targets, 4).unwrap();
        let r = recover(&spec, &cs, &RecoverOptions::default()).unwrap();
        assert_eq!(r.iterations, 0);
        assert!(r.residual_norm < 1e-12);
        assert!(r.converged);
        assert!(r.root_counts.iter().all(RootCount::consistent));
    }

    #[test]
    fn underdetermined_recovery_is_not_claimed() {
        let truth = CoefficientSet::third(ChebSeries::from_real(&[0.1, -0.2, 0.05, 0.01, 0.02])).unwrap();
        let targets = forward_map(&truth, &default_selection(Order::Third), 2, DEFAULT_TOL).unwrap();
        let spec = InverseSpec::new(Order::Third, targets, 5).unwrap();
        let init = CoefficientSet::free(Order::Third);
        let r = recover(&spec, &init, &RecoverOptions::default()).unwrap();
        assert!(r.rank_deficient);
        assert!(!r.converged);
    }
}
