//! Acceptance run: one line per criterion, non-zero exit on any failure.

mod common;

use std::time::{Duration, Instant};

use common::{beam_lambdas, rel, twin_truth};
use quasispec::chebyshev::ChebSeries;
use quasispec::identities::{
    check_laurent_convolution, check_order_relations, check_separation, check_symplectic, laurent_pole_index,
    random_smooth_set, regular_samples, separation_pairs,
};
use quasispec::inversion::{default_selection, forward_map, forward_spectra, twin_experiment, RootCount, TwinOptions};
use quasispec::model::{build_associated_matrix, CoefficientSet, Order};
use quasispec::oracle::free_spectrum;
use quasispec::propagator::DEFAULT_TOL;
use quasispec::rootfinder::{find_spectrum, find_zeros, plan_search_box, Rect, DEFAULT_QUADRATURE};
use quasispec::characteristic::BoundarySpec;
use quasispec::Complex64;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn order(n: usize) -> Order {
    Order::new(n).unwrap()
}

/// Free beam, `S12`, against the bisection oracle.
fn beam(counts: &mut Vec<RootCount>) -> Outcome {
    let cs = CoefficientSet::free(order(4));
    let spectra = forward_spectra(&cs, &["S12".to_string()], 3, DEFAULT_TOL).unwrap();
    counts.push(RootCount::of(&spectra[0], "S12"));
    let got = spectra[0].leading();
    let want = beam_lambdas(3);
    let err = want.iter().zip(&got).map(|(w, g)| rel(*g, c(*w, 0.0))).fold(0.0, f64::max);
    outcome(got.len() >= 3 && err < 1e-7, format!("max relative error {err:.2e}"))
}

/// `S1` (n = 3) and `S123` (n = 5) against the closed-form determinant.
fn free_orders(counts: &mut Vec<RootCount>) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for (n, name) in [(3, "S1"), (5, "S123")] {
        let cs = CoefficientSet::free(order(n));
        let spectra = forward_spectra(&cs, &[name.to_string()], 5, DEFAULT_TOL).unwrap();
        counts.push(RootCount::of(&spectra[0], name));
        let got = spectra[0].leading();
        let want: Vec<Complex64> = free_spectrum(order(n), name, 5)
            .unwrap()
            .iter()
            .flat_map(|e| std::iter::repeat_n(e.lambda, e.multiplicity))
            .take(5)
            .collect();
        ok &= got.len() >= 5 && want.len() == 5;
        for (g, w) in got.iter().zip(&want) {
            worst = worst.max(rel(*g, *w));
        }
    }
    outcome(ok && worst < 1e-7, format!("max relative error {worst:.2e}"))
}

/// Symplectic and order relations over random sets and samples.
fn identity_suite() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut evaluated = 0;
    for n in 3..=5 {
        for seed in 0..10 {
            let f = build_associated_matrix(&random_smooth_set(order(n), 100 * n as u64 + seed, 5, 0.5));
            for z in regular_samples(&f, seed, 20, DEFAULT_TOL) {
                worst = worst.max(check_symplectic(&f, z, DEFAULT_TOL).unwrap());
                let r = check_order_relations(&f, z, DEFAULT_TOL).unwrap();
                worst = r.into_iter().fold(worst, f64::max);
                evaluated += 1;
            }
        }
    }
    outcome(evaluated == 600 && worst < 1e-7, format!("{evaluated} samples, max residual {worst:.2e}"))
}

/// `tau2` and `tau2 + 0.5 x` give the same spectra.
fn gauge() -> Outcome {
    let t = twin_truth(4, 6);
    let s = t.series();
    let shifted = CoefficientSet::fourth(s[0].clone(), s[1] + &ChebSeries::x().scale(c(0.5, 0.0))).unwrap();
    let sel = default_selection(order(4));
    let a = forward_map(&t, &sel, 8, DEFAULT_TOL).unwrap();
    let b = forward_map(&shifted, &sel, 8, DEFAULT_TOL).unwrap();
    let err = a
        .iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| rel(*y, *x))
        .fold(0.0, f64::max);
    // S23 does not see the gauge even without canonicalization.
    let raw = |cs: &CoefficientSet| {
        let f = build_associated_matrix(cs);
        let spec = BoundarySpec::named(order(4), "S23").unwrap();
        find_spectrum(&f, &spec, &plan_search_box(4, 5), usize::MAX, DEFAULT_TOL).unwrap().expanded()
    };
    let (ra, rb) = (raw(&t), raw(&shifted));
    let raw_err = ra.iter().zip(&rb).map(|(x, y)| rel(*y, *x)).fold(0.0, f64::max);
    outcome(
        a.len() == 3 && a.iter().all(|l| l.len() == 8) && err < 1e-7 && ra.len() == rb.len() && raw_err < 1e-7,
        format!("max relative difference {err:.2e}, raw S23 {raw_err:.2e}"),
    )
}

/// Twin experiments for all orders.
fn twins(counts: &mut Vec<RootCount>, lines: &mut Vec<String>) -> Outcome {
    let mut ok = true;
    for n in 3..=5 {
        let start = Instant::now();
        let truth = twin_truth(n, 6);
        let report = twin_experiment(&truth, 0.1, 8, &TwinOptions::default()).unwrap();
        let elapsed = start.elapsed();
        counts.extend(report.root_counts.iter().cloned());
        let pass = report.result.converged && report.max_error < 1e-3 && elapsed < Duration::from_secs(600);
        ok &= pass;
        lines.push(format!(
            "    n={n}: converged={} iterations={} max error {:.2e} ({:.1}s)",
            report.result.converged,
            report.result.iterations,
            report.max_error,
            elapsed.as_secs_f64()
        ));
    }
    outcome(ok, "all orders within 1e-3".into())
}

/// Double zero of a synthetic function, then the Laurent relation at a
/// simple pole of a random order-4 problem.
fn multiplicity_and_laurent() -> Outcome {
    let z0 = c(1.5, 0.5);
    let f = move |z: Complex64| Ok((z - z0) * (z - z0) * (z + 2.0) * z.exp());
    let zs = find_zeros(&f, &Rect::square(c(0.0, 0.0), 4.0), usize::MAX, DEFAULT_QUADRATURE).unwrap();
    let double = zs.zeros.iter().any(|e| (e.lambda - z0).norm() < 1e-8 && e.multiplicity == 2);
    let simple = zs.zeros.iter().any(|e| (e.lambda + 2.0).norm() < 1e-8 && e.multiplicity == 1);

    let fm = build_associated_matrix(&random_smooth_set(order(4), 11, 5, 0.5));
    let k = laurent_pole_index(4).unwrap();
    let poles = find_spectrum(&fm, &BoundarySpec::diagonal(4, k).unwrap(), &plan_search_box(4, 3), usize::MAX, DEFAULT_TOL)
        .unwrap();
    let pole = poles.eigenvalues.iter().find(|e| e.multiplicity == 1).expect("a simple pole");
    let r = check_laurent_convolution(&fm, None, pole.lambda, 1, DEFAULT_TOL).unwrap();
    outcome(
        double && simple && zs.zeros.len() == 2 && r < 1e-5,
        format!("double zero resolved: {double}, Laurent residual {r:.2e} at {:.4}", pole.lambda),
    )
}

/// Consecutive diagonal spectra of the free problems do not meet.
fn separation() -> Outcome {
    let mut d = f64::INFINITY;
    for n in 3..=5 {
        let f = build_associated_matrix(&CoefficientSet::free(order(n)));
        let pairs = separation_pairs(&f, &plan_search_box(n, 3), DEFAULT_TOL).unwrap();
        d = d.min(check_separation(&pairs, 0.0).min_distance);
    }
    outcome(d > 0.0, format!("min distance {d:.4}"))
}

fn main() {
    let mut counts = Vec::new();
    let mut extra = Vec::new();
    let mut results: Vec<(usize, &str, Outcome, Duration)> = Vec::new();
    let run = |id: usize, name: &'static str, limit: Option<u64>, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let mut o = f();
        let t = start.elapsed();
        if let Some(s) = limit {
            o.pass &= t < Duration::from_secs(s);
        }
        (id, name, o, t)
    };
    results.push(run(1, "free beam spectrum", Some(60), &mut || beam(&mut counts)));
    results.push(run(2, "free spectra orders 3 and 5", None, &mut || free_orders(&mut counts)));
    results.push(run(3, "identity suite", Some(300), &mut identity_suite));
    results.push(run(4, "gauge invariance", None, &mut gauge));
    results.push(run(5, "twin experiments", None, &mut || twins(&mut counts, &mut extra)));
    let consistent = counts.iter().filter(|c| c.consistent()).count();
    let root = outcome(
        !counts.is_empty() && consistent == counts.len(),
        format!("{consistent}/{} searches consistent", counts.len()),
    );
    results.push((6, "root-count consistency", root, Duration::ZERO));
    results.push(run(7, "multiplicity and Laurent", None, &mut multiplicity_and_laurent));
    results.push(run(8, "separation", None, &mut separation));

    let mut failed = 0;
    for (id, name, o, t) in &results {
        println!(
            "criterion {id} {name}: {} ({}; {:.1}s)",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t.as_secs_f64()
        );
        if *id == 5 {
            extra.iter().for_each(|l| println!("{l}"));
        }
        failed += usize::from(!o.pass);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
