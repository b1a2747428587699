//! One PASS/FAIL line per acceptance criterion, at the shipped tolerances.
//! Runs the standard bidisc and tridisc configurations.

use std::process::ExitCode;
use std::time::Instant;

use dbp_core::config::ExperimentConfig;
use dbp_core::experiments::{run_experiments, Comparison, Criterion, Report};

const RUNTIME_LIMIT_S: f64 = 600.0;

struct Run {
    label: &'static str,
    report: Report,
    seconds: f64,
}

/// How close a criterion is to failing: ≥ 1 means it fails.
fn tightness(c: &Criterion) -> f64 {
    if !c.passed {
        return f64::INFINITY;
    }
    match c.comparison {
        Comparison::AtMost | Comparison::Below => c.value / c.threshold,
        Comparison::AtLeast => {
            if c.value > 0.0 {
                c.threshold / c.value
            } else {
                0.0
            }
        }
    }
}

fn line(title: &str, runs: &[&Run], experiment: &str, extra: Option<(bool, String)>) -> bool {
    let mut picked: Vec<(&str, &Criterion)> = Vec::new();
    let mut errors = Vec::new();
    for r in runs {
        for e in r.report.experiments.iter().filter(|e| e.name == experiment) {
            if let Some(err) = &e.error {
                errors.push(format!("{}: {err}", r.label));
            }
            picked.extend(e.criteria.iter().map(|c| (r.label, c)));
        }
    }
    let mut ok = errors.is_empty() && !picked.is_empty() && picked.iter().all(|(_, c)| c.passed);
    let labels: Vec<&str> = runs.iter().map(|r| r.label).collect();
    let worst = picked
        .iter()
        .max_by(|a, b| tightness(a.1).total_cmp(&tightness(b.1)))
        .map(|(l, c)| format!("tightest [{l}] {}", c.line()))
        .unwrap_or_else(|| "no criteria".into());
    let mut msg = format!("{title} ({}, {} checks); {worst}", labels.join(" + "), picked.len());
    if let Some((pass, text)) = extra {
        ok &= pass;
        msg.push_str(&format!("; {text}"));
    }
    for e in &errors {
        msg.push_str(&format!("; error {e}"));
    }
    println!("{} {msg}", if ok { "PASS" } else { "FAIL" });
    for (l, c) in picked.iter().filter(|(_, c)| !c.passed) {
        println!("    [{l}] {}", c.line());
    }
    ok
}

fn main() -> ExitCode {
    let mut runs = Vec::new();
    for (label, m) in [("bidisc", 2), ("tridisc", 3)] {
        let cfg = ExperimentConfig::standard(m);
        let t = Instant::now();
        match run_experiments(&cfg, false) {
            Ok(report) => runs.push(Run {
                label,
                report,
                seconds: t.elapsed().as_secs_f64(),
            }),
            Err(e) => {
                println!("FAIL {label} run: {e}");
                return ExitCode::FAILURE;
            }
        }
    }
    let (bi, tri) = (&runs[0], &runs[1]);
    let both = [bi, tri];
    let slowest = runs.iter().map(|r| r.seconds).fold(0.0, f64::max);
    let mut ok = true;
    ok &= line(
        "homotopy identity, 12-member smooth corpus, per degree, N=32,64,128",
        &both,
        "homotopy-identity",
        Some((
            slowest <= RUNTIME_LIMIT_S,
            format!("slowest full run {slowest:.1}s <= {RUNTIME_LIMIT_S}s"),
        )),
    );
    ok &= line("dbar solution on closed corpus forms", &both, "dbar-solution", None);
    ok &= line("exactness oracle over 6 potentials", &both, "exactness", None);
    ok &= line("classical Cauchy identity and FFT vs direct", &[bi], "cauchy-identity", None);
    ok &= line("anticommutation and sign-flip control", &both, "anticommutation", None);
    ok &= line("projection laws and holomorphic fixtures", &both, "projection-laws", None);
    ok &= line("Sobolev boundedness of H and P, negative control", &[bi], "boundedness", None);
    ok &= line("Fubini ratio band", &both, "fubini", None);
    ok &= line("cross-formulation agreement", &both, "cross-formulation", None);
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
