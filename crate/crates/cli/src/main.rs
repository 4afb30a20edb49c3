//! `quasispec`: spectra, Weyl matrices, identity checks, inversion and twin
//! experiments from the command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 numerical failure, 3 failed
//! verification.

mod docs;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use quasispec::characteristic::{weyl_matrix, BoundarySpec};
use quasispec::identities::{
    check_entire_ratio, check_laurent_convolution, check_order_relations, check_p_matrix, check_separation,
    check_symplectic, laurent_pole_index, regular_samples, separation_pairs, CheckRecord,
};
use quasispec::inversion::{forward_spectra, recover, twin_experiment, InverseResult, InverseSpec, RecoverOptions, TwinOptions};
use quasispec::model::{build_associated_matrix, AssociatedMatrix, CoefficientSet, Order};
use quasispec::oracle::free_spectrum;
use quasispec::propagator::DEFAULT_TOL;
use quasispec::rootfinder::{find_spectrum, plan_search_box};
use quasispec::Complex64;
use serde::Serialize;
use sha2::{Digest, Sha256};

use docs::*;

const IDENTITY_THRESHOLD: f64 = 1e-7;
const LAURENT_THRESHOLD: f64 = 1e-5;
const ENTIRE_THRESHOLD: f64 = 1e-6;
const P_THRESHOLD: f64 = 1e-7;
const SEPARATION_THRESHOLD: f64 = 1e-8;
const LAMBDA_SAMPLES: usize = 20;
const P_POINTS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];
const CHECKS: [&str; 6] = ["symplectic", "order_relations", "laurent", "entire_ratio", "p_matrix", "separation"];

#[derive(Parser)]
#[command(name = "quasispec", version, about = "Spectral problems for operators with distribution coefficients")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Leading eigenvalues of one named spectrum.
    Spectra {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        spectrum: String,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Eigenvalue table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
    /// Weyl-Yurko matrix at given points.
    Weyl {
        #[arg(long)]
        problem: PathBuf,
        /// `re,im`; repeat the flag for several points.
        #[arg(long = "lambda", required = true, allow_hyphen_values = true)]
        lambdas: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
    /// Numerical checks of the structural identities.
    Verify {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        problem2: Option<PathBuf>,
        /// Comma-separated names or `all`.
        #[arg(long, default_value = "all")]
        checks: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
    /// Coefficients from target spectra.
    Invert {
        #[arg(long)]
        targets: PathBuf,
        #[arg(long)]
        init: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Targets from a known truth, then recovery from a perturbed start.
    Twin {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        perturb: f64,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 6)]
        modes: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Free-case eigenvalues from the closed-form determinant.
    Oracle {
        #[arg(long)]
        order: usize,
        #[arg(long)]
        spectrum: String,
        #[arg(long)]
        count: usize,
        /// Significant digits printed.
        #[arg(long, default_value_t = 6)]
        digits: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Iteration history as CSV.
    #[arg(long)]
    history: Option<PathBuf>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    residual_tol: Option<f64>,
}

impl RunArgs {
    fn options(&self) -> RecoverOptions {
        let mut o = RecoverOptions::default();
        if let Some(m) = self.max_iterations {
            o.max_iterations = m;
        }
        if let Some(r) = self.residual_tol {
            o.residual_tol = r;
        }
        o
    }
}

enum Failure {
    Usage(String),
    Numerical(String),
    Verification(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Numerical(_) => 2,
            Failure::Verification(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Numerical(m) | Failure::Verification(m) => m,
        }
    }
}

impl From<quasispec::Error> for Failure {
    fn from(e: quasispec::Error) -> Self {
        if e.is_usage() {
            Failure::Usage(e.to_string())
        } else {
            Failure::Numerical(e.to_string())
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(f) = configure_threads() {
        eprintln!("error: {}", f.message());
        return ExitCode::from(f.code());
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn configure_threads() -> Outcome {
    let Ok(v) = std::env::var("QUASISPEC_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Usage(format!("QUASISPEC_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Usage(e.to_string()))
}

fn run(command: Command) -> Outcome {
    match command {
        Command::Spectra {
            problem,
            spectrum,
            count,
            out,
            csv,
            tol,
        } => spectra(&problem, &spectrum, count, out.as_deref(), csv.as_deref(), tol),
        Command::Weyl {
            problem,
            lambdas,
            out,
            tol,
        } => weyl(&problem, &lambdas, out.as_deref(), tol),
        Command::Verify {
            problem,
            problem2,
            checks,
            seed,
            report,
            tol,
        } => verify(&problem, problem2.as_deref(), &checks, seed, report.as_deref(), tol),
        Command::Invert { targets, init, out, run } => invert(&targets, &init, out.as_deref(), &run),
        Command::Twin {
            truth,
            perturb,
            count,
            out,
            modes,
            seed,
            run,
        } => twin(&truth, perturb, count, out.as_deref(), modes, seed, &run),
        Command::Oracle {
            order,
            spectrum,
            count,
            digits,
            out,
        } => oracle(order, &spectrum, count, digits, out.as_deref()),
    }
}

fn read(path: &Path) -> std::result::Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

fn parse<T: serde::de::DeserializeOwned>(path: &Path, text: &str) -> std::result::Result<T, Failure> {
    serde_json::from_str(text).map_err(|e| Failure::Usage(format!("malformed {}: {e}", path.display())))
}

fn load_problem(path: &Path) -> std::result::Result<(CoefficientSet, String), Failure> {
    let text = read(path)?;
    let doc: ProblemDoc = parse(path, &text)?;
    Ok((doc.to_set()?, digest(&text)))
}

fn digest(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

fn emit<T: Serialize>(doc: &T, out: Option<&Path>) -> Outcome {
    let mut text = serde_json::to_string_pretty(doc).map_err(|e| Failure::Numerical(e.to_string()))?;
    text.push('\n');
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_csv<T: Serialize>(rows: &[T], path: &Path) -> Outcome {
    let fail = |e: csv::Error| Failure::Usage(format!("cannot write {}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(fail)?;
    for r in rows {
        w.serialize(r).map_err(fail)?;
    }
    w.flush().map_err(|e| Failure::Usage(e.to_string()))
}

#[derive(Serialize)]
struct EigenRow {
    index: usize,
    re: f64,
    im: f64,
}

fn spectra(problem: &Path, name: &str, count: usize, out: Option<&Path>, csv: Option<&Path>, tol: f64) -> Outcome {
    let (cs, _) = load_problem(problem)?;
    BoundarySpec::named(cs.order(), name)?;
    let s = forward_spectra(&cs, &[name.to_string()], count, tol)?.remove(0);
    let eigenvalues: Vec<Complex64> = s.leading().into_iter().take(count).collect();
    if let Some(path) = csv {
        let rows: Vec<EigenRow> = eigenvalues
            .iter()
            .enumerate()
            .map(|(i, z)| EigenRow {
                index: i + 1,
                re: z.re,
                im: z.im,
            })
            .collect();
        write_csv(&rows, path)?;
    }
    let doc = SpectraDoc {
        order: cs.order().n(),
        spectrum: name.to_string(),
        count,
        canonical: cs.is_canonical(),
        gauge_offset: cs.gauge_offset(),
        eigenvalues,
        multiplicity_sum: s.total_multiplicity(),
        argument_count: s.argument_count,
        zeros: s.eigenvalues,
        region: s.region,
    };
    emit(&doc, out)
}

fn parse_lambda(s: &str) -> std::result::Result<Complex64, Failure> {
    let bad = || Failure::Usage(format!("expected re,im for lambda, got {s:?}"));
    let (re, im) = s.split_once(',').ok_or_else(bad)?;
    let re: f64 = re.trim().parse().map_err(|_| bad())?;
    let im: f64 = im.trim().parse().map_err(|_| bad())?;
    if !re.is_finite() || !im.is_finite() {
        return Err(bad());
    }
    Ok(Complex64::new(re, im))
}

fn weyl(problem: &Path, lambdas: &[String], out: Option<&Path>, tol: f64) -> Outcome {
    let (cs, _) = load_problem(problem)?;
    let f = build_associated_matrix(&cs);
    let points = lambdas.iter().map(|s| parse_lambda(s)).collect::<std::result::Result<Vec<_>, _>>()?;
    let samples = points
        .iter()
        .map(|&z| {
            let w = weyl_matrix(&f, z, tol)?;
            let m = &w.matrix;
            Ok(WeylSampleDoc {
                lambda: z,
                matrix: (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect(),
            })
        })
        .collect::<quasispec::Result<Vec<_>>>()?;
    emit(
        &WeylDoc {
            order: cs.order().n(),
            samples,
        },
        out,
    )
}

fn selected_checks(list: &str) -> std::result::Result<Vec<&'static str>, Failure> {
    if list.trim() == "all" {
        return Ok(CHECKS.to_vec());
    }
    let mut out = Vec::new();
    for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let known = CHECKS
            .iter()
            .find(|c| **c == name)
            .ok_or_else(|| Failure::Usage(format!("unknown check {name:?}; known: {}", CHECKS.join(", "))))?;
        if !out.contains(known) {
            out.push(*known);
        }
    }
    if out.is_empty() {
        return Err(Failure::Usage("no checks selected".into()));
    }
    Ok(out)
}

fn verify(problem: &Path, problem2: Option<&Path>, checks: &str, seed: u64, report: Option<&Path>, tol: f64) -> Outcome {
    let names = selected_checks(checks)?;
    let (cs, d1) = load_problem(problem)?;
    let second = problem2.map(load_problem).transpose()?;
    if let Some((cs2, _)) = &second {
        if cs2.order() != cs.order() {
            return Err(Failure::Usage("the two problems have different orders".into()));
        }
    }
    let f = build_associated_matrix(&cs);
    let g = second.as_ref().map(|(c, _)| build_associated_matrix(c));
    let other: &AssociatedMatrix = g.as_ref().unwrap_or(&f);
    let digest_all = match &second {
        Some((_, d2)) => digest(&format!("{d1}{d2}")),
        None => d1.clone(),
    };
    let n = cs.order().n();
    let samples = regular_samples(&f, seed, LAMBDA_SAMPLES, tol);
    if samples.len() < LAMBDA_SAMPLES {
        return Err(Failure::Numerical("too few regular lambda samples".into()));
    }
    let mut records = Vec::new();
    for name in names {
        let record = match name {
            "symplectic" => {
                let r = samples
                    .iter()
                    .map(|&z| check_symplectic(&f, z, tol))
                    .collect::<quasispec::Result<Vec<_>>>()?;
                CheckRecord::below(name, &digest_all, max(&r), IDENTITY_THRESHOLD)
            }
            "order_relations" => {
                let r = samples
                    .iter()
                    .map(|&z| check_order_relations(&f, z, tol).map(|v| max(&v)))
                    .collect::<quasispec::Result<Vec<_>>>()?;
                CheckRecord::below(name, &digest_all, max(&r), IDENTITY_THRESHOLD)
            }
            "laurent" => {
                if n == 3 {
                    continue;
                }
                let k = laurent_pole_index(n)?;
                let spec = BoundarySpec::diagonal(n, k)?;
                let zeros = find_spectrum(&f, &spec, &plan_search_box(n, 3), usize::MAX, tol)?;
                let Some(z) = zeros.eigenvalues.iter().find(|e| e.multiplicity == 1) else {
                    return Err(Failure::Numerical("no simple pole for the Laurent check".into()));
                };
                let alt = g.as_ref();
                let r = check_laurent_convolution(&f, alt, z.lambda, 1, tol)?;
                CheckRecord::below(name, &digest_all, r, LAURENT_THRESHOLD)
            }
            "entire_ratio" => {
                let rep = check_entire_ratio(&f, other, &plan_search_box(n, 3), tol)?;
                CheckRecord::below(name, &digest_all, rep.max_relative, ENTIRE_THRESHOLD)
            }
            "p_matrix" => {
                let r = check_p_matrix(&f, other, &samples[..3], &P_POINTS, tol)?;
                CheckRecord::below(name, &digest_all, r, P_THRESHOLD)
            }
            "separation" => {
                let pairs = separation_pairs(&f, &plan_search_box(n, 3), tol)?;
                let rep = check_separation(&pairs, SEPARATION_THRESHOLD);
                CheckRecord::above(name, &digest_all, rep.min_distance, SEPARATION_THRESHOLD)
            }
            _ => unreachable!("names come from CHECKS"),
        };
        records.push(record);
    }
    let all_pass = records.iter().all(|r| r.pass);
    let doc = VerifyDoc {
        order: n,
        seed,
        problem_digest: d1,
        problem2_digest: second.map(|(_, d)| d),
        checks: records,
        all_pass,
    };
    emit(&doc, report)?;
    if all_pass {
        Ok(())
    } else {
        let failed: Vec<&str> = doc.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
        Err(Failure::Verification(format!("checks above threshold: {}", failed.join(", "))))
    }
}

fn max(v: &[f64]) -> f64 {
    v.iter().copied().fold(0.0, f64::max)
}

fn invert_doc(r: &InverseResult) -> InvertDoc {
    InvertDoc {
        converged: r.converged,
        iterations: r.iterations,
        residual_norm: r.residual_norm,
        residual_tol: r.residual_tol,
        rank_deficient: r.rank_deficient,
        singular_ratio: r.singular_ratio,
        verification_gap: r.verification_gap,
        recovered: ProblemDoc::from_set(&r.recovered, None),
        parameters: r.parameters.clone(),
        eigenvalues: r.eigenvalues.clone(),
        history: r.history.clone(),
        root_counts: r.root_counts.clone(),
    }
}

fn finish(r: &InverseResult) -> Outcome {
    if r.converged {
        Ok(())
    } else if r.rank_deficient {
        Err(Failure::Numerical("no convergence: the Jacobian is rank deficient".into()))
    } else {
        Err(Failure::Numerical(format!(
            "no convergence: residual {:e} above {:e}",
            r.residual_norm, r.residual_tol
        )))
    }
}

fn invert(targets: &Path, init: &Path, out: Option<&Path>, run: &RunArgs) -> Outcome {
    let text = read(targets)?;
    let spec: InverseSpec = parse(targets, &text)?;
    spec.validate()?;
    let (initial, _) = load_problem(init)?;
    let r = recover(&spec, &initial, &run.options())?;
    if let Some(h) = &run.history {
        write_csv(&r.history, h)?;
    }
    emit(&invert_doc(&r), out)?;
    finish(&r)
}

#[allow(clippy::too_many_arguments)]
fn twin(truth: &Path, perturb: f64, count: usize, out: Option<&Path>, modes: usize, seed: u64, run: &RunArgs) -> Outcome {
    if !(perturb >= 0.0) || !perturb.is_finite() {
        return Err(Failure::Usage("--perturb must be a non-negative number".into()));
    }
    let (cs, _) = load_problem(truth)?;
    let options = TwinOptions {
        modes,
        seed,
        recover: run.options(),
    };
    let rep = twin_experiment(&cs, perturb, count, &options)?;
    if let Some(h) = &run.history {
        write_csv(&rep.result.history, h)?;
    }
    let doc = TwinDoc {
        targets: rep.spec.clone(),
        perturbation: rep.perturbation,
        truth_parameters: rep.truth_parameters.clone(),
        initial_parameters: rep.initial_parameters.clone(),
        result: invert_doc(&rep.result),
        errors: rep.errors.clone(),
        derived_errors: rep.derived_errors.clone(),
        max_error: rep.max_error,
        separation: rep.separation,
        root_counts: rep.root_counts.clone(),
    };
    emit(&doc, out)?;
    finish(&rep.result)
}

/// `x` with `digits` significant digits in positional notation.
fn significant(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i64;
    let decimals = (digits as i64 - 1 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

fn oracle(order: usize, name: &str, count: usize, digits: usize, out: Option<&Path>) -> Outcome {
    let order = Order::new(order)?;
    if count == 0 {
        return Err(Failure::Usage("count must be positive".into()));
    }
    let eigenvalues = free_spectrum(order, name, count)?;
    for e in &eigenvalues {
        let line = if e.lambda.im.abs() <= 1e-12 * e.lambda.norm() {
            significant(e.lambda.re, digits)
        } else {
            format!("{} {}", significant(e.lambda.re, digits), significant(e.lambda.im, digits))
        };
        for _ in 0..e.multiplicity {
            println!("{line}");
        }
    }
    if let Some(path) = out {
        let doc = OracleDoc {
            order: order.n(),
            spectrum: name.to_string(),
            eigenvalues,
        };
        emit(&doc, Some(path))?;
    }
    Ok(())
}
