//! `dbp`: runs homotopy-operator experiments, writes corpora, evaluates
//! norms of field snapshots and runs the example suite.
//!
//! Exit codes: 0 all checks pass, 2 some threshold failed, 1 usage or
//! configuration error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dbp_core::config::ExperimentConfig;
use dbp_core::corpus::{self, CorpusSpec};
use dbp_core::experiments::run_experiments;
use dbp_core::planar::ExtensionKind;
use dbp_core::selftest::run_selftest;
use dbp_core::snapshot::{self, write_atomic};
use dbp_core::sobolev::{dense_fubini_ratio, dense_sobolev_norm, NormEntry, NormReport, SobolevSpec};
use dbp_core::DbpError;
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "dbp", version, about = "dbar homotopy operators on product domains")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// Grid sizes N per factor, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    grid: Option<Vec<usize>>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Composition order of the factors, 1-based, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    factor_order: Option<Vec<usize>>,
    /// `zero` or `reflection:r` with r in 1..=3.
    #[arg(long, global = true)]
    extension: Option<String>,
    /// Print machine-readable JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the experiments in a TOML config.
    Run {
        config: PathBuf,
        #[arg(short, long)]
        verbose: bool,
    },
    /// Write a corpus file (and optional field snapshots).
    Corpus {
        /// TOML corpus spec; the standard smooth and closed corpora if omitted.
        spec: Option<PathBuf>,
        /// Number of factors.
        #[arg(short, long, default_value_t = 2)]
        m: usize,
    },
    /// Sobolev norms and Fubini ratios of a field snapshot.
    Norms {
        field: PathBuf,
        /// Factors 1..=cut form U in the Fubini ratio.
        #[arg(long, default_value_t = 1)]
        cut: usize,
    },
    /// Run the example suite.
    Selftest,
}

enum Failure {
    Usage(String),
    Threshold,
}

impl From<DbpError> for Failure {
    fn from(e: DbpError) -> Self {
        Failure::Usage(e.to_string())
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
    let out = match &cli.command {
        Command::Run { config, verbose } => run(config, *verbose, &cli.common),
        Command::Corpus { spec, m } => write_corpus(spec.as_deref(), *m, &cli.common),
        Command::Norms { field, cut } => norms(field, *cut, &cli.common),
        Command::Selftest => selftest(&cli.common),
    };
    match out {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Threshold) => ExitCode::from(2),
        Err(Failure::Usage(msg)) => {
            eprintln!("dbp: {msg}");
            ExitCode::from(1)
        }
    }
}

fn print_json<T: Serialize>(v: &T) -> Outcome {
    let s = serde_json::to_string_pretty(v).map_err(|e| Failure::Usage(e.to_string()))?;
    println!("{s}");
    Ok(())
}

fn apply_overrides(cfg: &mut ExperimentConfig, c: &Common) -> Outcome {
    if let Some(g) = &c.grid {
        cfg.domain.grids = g.clone();
    }
    if let Some(o) = &c.out {
        cfg.out = o.clone();
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(f) = &c.factor_order {
        cfg.operators.factor_order = Some(f.clone());
    }
    if let Some(e) = &c.extension {
        e.parse::<ExtensionKind>()?.validate()?;
        cfg.operators.extension = e.clone();
    }
    cfg.validate()?;
    Ok(())
}

fn run(config: &Path, verbose: bool, c: &Common) -> Outcome {
    let mut cfg = ExperimentConfig::load(config)?;
    apply_overrides(&mut cfg, c)?;
    let report = run_experiments(&cfg, verbose)?;
    let (json, csv) = report.write(&cfg.out)?;
    if c.json {
        print_json(&report)?;
    } else {
        for l in report.summary_lines() {
            println!("{l}");
        }
        println!("wrote {} and {}", json.display(), csv.display());
    }
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Threshold)
    }
}

fn write_corpus(spec: Option<&Path>, m: usize, c: &Common) -> Outcome {
    let seed = c.seed.unwrap_or(0);
    let out = c.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out).map_err(|e| Failure::Usage(format!("{}: {e}", out.display())))?;
    let mut files = Vec::new();
    let (members, path) = match spec {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Failure::Usage(format!("cannot read spec {}: {e}", p.display())))?;
            let mut s: CorpusSpec =
                toml::from_str(&text).map_err(|e| Failure::Usage(format!("invalid corpus spec: {e}")))?;
            if let Some(seed) = c.seed {
                s.seed = seed;
            }
            let file = corpus::corpus_file(&s, m)?;
            let path = out.join("corpus.json");
            snapshot::write_json(&path, &file)?;
            files.push(path.clone());
            (file.members, path)
        }
        None => {
            let smooth = corpus::smooth_corpus(m, seed)?;
            let closed = corpus::closed_corpus(m, seed)?;
            let path = out.join("corpus.json");
            let body = StandardCorpus {
                schema: corpus::CORPUS_SCHEMA,
                m,
                seed,
                smooth: &smooth,
                closed: &closed,
            };
            snapshot::write_json(&path, &body)?;
            files.push(path.clone());
            (smooth.into_iter().chain(closed).collect(), path)
        }
    };
    if let Some(grids) = &c.grid {
        let n = *grids.last().ok_or_else(|| Failure::Usage("empty --grid".into()))?;
        let mut cfg = ExperimentConfig::standard(m);
        cfg.domain.grids = vec![n];
        cfg.validate()?;
        let dom = cfg.domain_at(n)?;
        for member in &members {
            let (f, _) = member.sample(&dom)?;
            let p = out.join(format!("{}-N{n}.dbpf", member.id));
            snapshot::write_form(&p, &f, &member.id, vec![format!("corpus seed {seed}")])?;
            files.push(p);
        }
    }
    if c.json {
        print_json(&files)?;
    } else {
        println!("{} members written to {}", members.len(), path.display());
        for f in files.iter().skip(1) {
            println!("{}", f.display());
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct StandardCorpus<'a> {
    schema: &'a str,
    m: usize,
    seed: u64,
    smooth: &'a [corpus::CorpusMember],
    closed: &'a [corpus::CorpusMember],
}

#[derive(Serialize)]
struct ComponentNorms {
    index: Vec<usize>,
    norms: NormReport,
}

fn norms(path: &Path, cut: usize, c: &Common) -> Outcome {
    let (snap, dom, side) = snapshot::read_form(path)?;
    let mut out = Vec::new();
    for (idx, dense) in &snap.components {
        let mut rep = NormReport::default();
        for k in 0..=2 {
            for p in [2.0, 4.0] {
                let spec = SobolevSpec::new(k, p)?;
                rep.norms.push(NormEntry {
                    k,
                    p,
                    value: dense_sobolev_norm(dense, &dom, spec)?,
                });
            }
        }
        if dom.m() >= 2 {
            let mut lo = f64::INFINITY;
            let mut hi = 0.0f64;
            for k in 1..=2 {
                for p in [2.0, 4.0] {
                    let r = dense_fubini_ratio(dense, &dom, SobolevSpec::new(k, p)?, cut)?.ratio;
                    if r.is_finite() {
                        lo = lo.min(r);
                        hi = hi.max(r);
                    }
                }
            }
            if hi > 0.0 {
                rep.fubini_band = Some((lo, hi));
            }
        }
        out.push(ComponentNorms {
            index: idx.indices().iter().map(|j| j + 1).collect(),
            norms: rep,
        });
    }
    if c.json {
        return print_json(&out);
    }
    println!("{} ({}), {}", side.label, path.display(), dom.describe());
    for comp in &out {
        println!("component {:?}", comp.index);
        for e in &comp.norms.norms {
            println!("  W^{{{},{}}} = {:.6e}", e.k, e.p, e.value);
        }
        if let Some((lo, hi)) = comp.norms.fubini_band {
            println!("  Fubini ratio in [{lo:.4}, {hi:.4}]");
        }
    }
    Ok(())
}

fn selftest(c: &Common) -> Outcome {
    let rep = run_selftest();
    if let Some(dir) = &c.out {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Usage(format!("{}: {e}", dir.display())))?;
        let bytes = serde_json::to_vec_pretty(&rep).map_err(|e| Failure::Usage(e.to_string()))?;
        write_atomic(&dir.join("selftest.json"), &bytes)?;
    }
    if c.json {
        print_json(&rep)?;
    } else {
        for ch in &rep.checks {
            println!("{}", ch.line());
        }
        let failed = rep.checks.iter().filter(|c| !c.passed).count();
        println!("{} checks, {failed} failed, {:.1}s", rep.checks.len(), rep.seconds);
    }
    if rep.passed {
        Ok(())
    } else {
        Err(Failure::Threshold)
    }
}
