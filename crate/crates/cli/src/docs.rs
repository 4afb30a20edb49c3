//! JSON documents read and written by the command line. Complex numbers are
//! `[re, im]` arrays throughout.

use std::collections::BTreeMap;

use quasispec::chebyshev::ChebSeries;
use quasispec::identities::{CheckRecord, SeparationReport};
use quasispec::inversion::{FunctionError, InverseSpec, IterationRecord, RootCount};
use quasispec::model::{CoefficientFunction, CoefficientSet, Order, Representation};
use quasispec::rootfinder::{Eigenvalue, Rect};
use quasispec::{Complex64, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDoc {
    pub order: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub functions: BTreeMap<String, FunctionDoc>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionDoc {
    /// Coefficients of `T_k(2x - 1)`.
    Chebyshev(Vec<Complex64>),
    /// Uniform samples on `[0, 1]`, interpolated at the given degree.
    Grid { samples: Vec<Complex64>, degree: usize },
}

impl ProblemDoc {
    pub fn to_set(&self) -> Result<CoefficientSet> {
        let order = Order::new(self.order)?;
        let functions = self
            .functions
            .iter()
            .map(|(name, f)| {
                let cf = match f {
                    FunctionDoc::Chebyshev(c) => CoefficientFunction::chebyshev(ChebSeries::new(c.clone()))?,
                    FunctionDoc::Grid { samples, degree } => CoefficientFunction::grid(samples.clone(), *degree)?,
                };
                Ok((name.clone(), cf))
            })
            .collect::<Result<Vec<_>>>()?;
        CoefficientSet::new(order, functions)
    }

    pub fn from_set(cs: &CoefficientSet, name: Option<String>) -> Self {
        let functions = cs
            .functions()
            .map(|(n, f)| {
                let doc = match f.representation() {
                    Representation::Grid { samples, degree } => FunctionDoc::Grid {
                        samples: samples.clone(),
                        degree: *degree,
                    },
                    Representation::Chebyshev => FunctionDoc::Chebyshev(f.series().coeffs().to_vec()),
                };
                (n.to_string(), doc)
            })
            .collect();
        ProblemDoc {
            order: cs.order().n(),
            name,
            functions,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectraDoc {
    pub order: usize,
    pub spectrum: String,
    pub count: usize,
    /// Whether the input already satisfied `tau2(1) = tau2(0)`.
    pub canonical: bool,
    pub gauge_offset: Complex64,
    /// The first `count` eigenvalues, canonical order, with repetition.
    pub eigenvalues: Vec<Complex64>,
    /// Every zero found in the searched region.
    pub zeros: Vec<Eigenvalue>,
    pub argument_count: usize,
    pub multiplicity_sum: usize,
    pub region: Rect,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeylSampleDoc {
    pub lambda: Complex64,
    /// Row-major `M(lambda)`.
    pub matrix: Vec<Vec<Complex64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeylDoc {
    pub order: usize,
    pub samples: Vec<WeylSampleDoc>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerifyDoc {
    pub order: usize,
    pub seed: u64,
    pub problem_digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem2_digest: Option<String>,
    pub checks: Vec<CheckRecord>,
    pub all_pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InvertDoc {
    pub converged: bool,
    pub iterations: usize,
    pub residual_norm: f64,
    pub residual_tol: f64,
    pub rank_deficient: bool,
    pub singular_ratio: f64,
    pub verification_gap: f64,
    pub recovered: ProblemDoc,
    pub parameters: Vec<f64>,
    pub eigenvalues: Vec<Vec<Complex64>>,
    pub history: Vec<IterationRecord>,
    pub root_counts: Vec<RootCount>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TwinDoc {
    pub targets: InverseSpec,
    pub perturbation: f64,
    pub truth_parameters: Vec<f64>,
    pub initial_parameters: Vec<f64>,
    pub result: InvertDoc,
    pub errors: Vec<FunctionError>,
    pub derived_errors: Vec<FunctionError>,
    pub max_error: f64,
    pub separation: SeparationReport,
    pub root_counts: Vec<RootCount>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OracleDoc {
    pub order: usize,
    pub spectrum: String,
    pub eigenvalues: Vec<Eigenvalue>,
}
