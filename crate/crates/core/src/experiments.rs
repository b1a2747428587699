//! Refinement experiments and the `dbp-report/1` report.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, ExperimentKind, Tolerances};
use crate::convergence::{OrderFit, ROUNDING_FLOOR};
use crate::corpus::{self, CorpusMember};
use crate::domain::{PlanarDomain, ProductDomain, Shape};
use crate::error::{DbpError, Result};
use crate::field::SeparatedField;
use crate::form::FormField;
use crate::multi_index::MultiIndex;
use crate::planar::{oracle, CauchyKernelTable, ExtensionKind, PlanarCauchy};
use crate::product::{self, apply_slicewise, ComposedOperators, GeneratorAction, RESIDUAL_EROSION};
use crate::snapshot::{self, write_atomic};
use crate::sobolev::{self, SobolevSpec};
use crate::symbolic::{ExpPoly, SymTerm, SymbolicForm};

pub const REPORT_SCHEMA: &str = "dbp-report/1";

/// Caps rayon parallelism.
pub const THREADS_ENV: &str = "DBP_THREADS";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub experiment: String,
    pub grid: usize,
    pub h: f64,
    pub member: String,
    pub quantity: String,
    pub degree: Option<usize>,
    pub raw: f64,
    pub reference: f64,
    pub relative: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Comparison {
    AtMost,
    AtLeast,
    Below,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub name: String,
    pub value: f64,
    pub comparison: Comparison,
    pub threshold: f64,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl Criterion {
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Criterion {
            name: name.into(),
            value,
            comparison: Comparison::AtMost,
            threshold,
            passed: value <= threshold,
            detail: String::new(),
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Criterion {
            name: name.into(),
            value,
            comparison: Comparison::AtLeast,
            threshold,
            passed: value >= threshold,
            detail: String::new(),
        }
    }

    pub fn below(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Criterion {
            name: name.into(),
            value,
            comparison: Comparison::Below,
            threshold,
            passed: value < threshold,
            detail: String::new(),
        }
    }

    pub fn with_detail(mut self, d: impl Into<String>) -> Self {
        self.detail = d.into();
        self
    }

    /// Order criterion for a sweep, waived at the rounding floor.
    fn order(name: impl Into<String>, fit: &OrderFit, min_order: f64) -> Self {
        let name = name.into();
        if fit.at_floor {
            return Criterion::at_most(name, fit.finest, ROUNDING_FLOOR)
                .with_detail(format!("at the rounding floor; order ≥ {min_order} waived"));
        }
        let v = fit.order.unwrap_or(f64::NAN);
        Criterion::at_least(name, v, min_order)
    }

    pub fn line(&self) -> String {
        format!("{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.verdict())
    }

    /// `value op threshold (detail)`.
    pub fn verdict(&self) -> String {
        let op = match self.comparison {
            Comparison::AtMost => "<=",
            Comparison::AtLeast => ">=",
            Comparison::Below => "<",
        };
        let mut s = format!("{:.4e} {op} {:.4e}", self.value, self.threshold);
        if !self.detail.is_empty() {
            s.push_str(&format!(" ({})", self.detail));
        }
        s
    }
}

/// A refinement series with its fitted order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub grids: Vec<usize>,
    pub h: Vec<f64>,
    pub values: Vec<f64>,
    pub fit: OrderFit,
}

impl Series {
    pub fn new(name: impl Into<String>, grids: Vec<usize>, h: Vec<f64>, values: Vec<f64>) -> Self {
        let fit = OrderFit::new(&h, &values);
        Series {
            name: name.into(),
            grids,
            h,
            values,
            fit,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub passed: bool,
    pub criteria: Vec<Criterion>,
    pub series: Vec<Series>,
    #[serde(default)]
    pub sweeps: Vec<sobolev::RatioSweep>,
    pub rows: Vec<Row>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ExperimentReport {
    fn new(kind: ExperimentKind) -> Self {
        ExperimentReport {
            name: kind.name().to_string(),
            passed: false,
            criteria: Vec::new(),
            series: Vec::new(),
            sweeps: Vec::new(),
            rows: Vec::new(),
            notes: Vec::new(),
            error: None,
        }
    }

    fn finish(mut self) -> Self {
        self.passed = self.error.is_none() && self.criteria.iter().all(|c| c.passed);
        self
    }

    fn row(&mut self, grid: usize, h: f64, member: &str, quantity: &str, degree: Option<usize>, raw: f64, reference: f64) {
        let relative = if reference > 0.0 { raw / reference } else { raw };
        self.rows.push(Row {
            experiment: self.name.clone(),
            grid,
            h,
            member: member.to_string(),
            quantity: quantity.to_string(),
            degree,
            raw,
            reference,
            relative,
        });
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub timestamp: String,
    pub config: ExperimentConfig,
    pub domain: String,
    pub m: usize,
    pub extension: String,
    /// 1-based composition order.
    pub factor_order: Vec<usize>,
    pub provenance: Vec<String>,
    pub experiments: Vec<ExperimentReport>,
    pub passed: bool,
}

impl Report {
    pub fn criteria(&self) -> impl Iterator<Item = (&str, &Criterion)> {
        self.experiments
            .iter()
            .flat_map(|e| e.criteria.iter().map(move |c| (e.name.as_str(), c)))
    }

    pub fn summary_lines(&self) -> Vec<String> {
        let mut out = Vec::new();
        for e in &self.experiments {
            if let Some(err) = &e.error {
                out.push(format!("FAIL {}: error: {err}", e.name));
            }
            for c in &e.criteria {
                out.push(format!("[{}] {}", e.name, c.line()));
            }
        }
        out
    }

    /// Writes `report.json` and `report.csv` into `dir`; returns both paths.
    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let json = dir.join("report.json");
        snapshot::write_json(&json, self)?;
        let csv_path = dir.join("report.csv");
        let mut w = csv::Writer::from_writer(Vec::new());
        for e in &self.experiments {
            for r in &e.rows {
                w.serialize(r).map_err(|e| DbpError::Format(e.to_string()))?;
            }
        }
        let bytes = w.into_inner().map_err(|e| DbpError::Format(e.to_string()))?;
        write_atomic(&csv_path, &bytes)?;
        Ok((json, csv_path))
    }
}

fn timestamp() -> String {
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    format!("unix:{secs}")
}

/// Runs `f` on a pool capped by `DBP_THREADS` (if set).
pub fn with_thread_cap<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .ok()
                .filter(|n| *n > 0)
                .ok_or_else(|| DbpError::Config(format!("{THREADS_ENV} must be a positive integer, got '{v}'")))?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| DbpError::Config(e.to_string()))?;
            Ok(pool.install(f))
        }
        Err(_) => Ok(f()),
    }
}

struct Level {
    n: usize,
    h: f64,
    dom: Arc<ProductDomain>,
    ops: ComposedOperators,
}

struct Runner<'a> {
    cfg: &'a ExperimentConfig,
    tol: &'a Tolerances,
    kind: ExtensionKind,
    order: Vec<usize>,
    levels: Vec<Level>,
    smooth: Vec<CorpusMember>,
    closed: Vec<CorpusMember>,
    e1_scale: Option<f64>,
    verbose: bool,
}

fn relative(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        a / b
    } else {
        a
    }
}

fn l2(f: &FormField) -> Result<f64> {
    sobolev::form_l2_norm(&f.compress(), RESIDUAL_EROSION)
}

fn planar_l2(dom: &Arc<PlanarDomain>, a: &Array2<C64>, erosion: usize) -> Result<f64> {
    let pd = ProductDomain::new(vec![dom.clone()])?;
    sobolev::l2_norm(&SeparatedField::from_factors(vec![a.clone()]), &pd, erosion)
}

/// `Σ_r |c_r| Π_j max |A_{j,r}|` over the eroded masks: the sup norm for a
/// rank-one field and an upper bound otherwise.
pub fn sup_norm_bound(f: &SeparatedField, dom: &ProductDomain, erosion: usize) -> f64 {
    let masks: Vec<Array2<bool>> = dom.factors().iter().map(|d| d.eroded_mask(erosion)).collect();
    f.terms()
        .iter()
        .map(|t| {
            t.factors.iter().zip(&masks).fold(t.coeff.norm(), |acc, (a, mask)| {
                let mx = a
                    .iter()
                    .zip(mask.iter())
                    .filter(|(_, &b)| b)
                    .map(|(v, _)| v.norm())
                    .fold(0.0, f64::max);
                acc * mx
            })
        })
        .sum::<f64>()
        + 0.0
}

impl<'a> Runner<'a> {
    fn new(cfg: &'a ExperimentConfig, verbose: bool) -> Result<Self> {
        cfg.validate()?;
        let kind = cfg.extension()?;
        let m = cfg.m();
        let order = cfg.factor_order().unwrap_or_else(|| (0..m).collect());
        let cache = cfg.kernel_cache.clone();
        let table = move |h: f64, n: usize| -> Result<CauchyKernelTable> {
            match &cache {
                Some(dir) => snapshot::cached_kernel_table(dir, h, n),
                None => CauchyKernelTable::for_grid(h, n),
            }
        };
        let mut levels = Vec::new();
        for &n in &cfg.domain.grids {
            let dom = cfg.domain_at(n)?;
            let ops = ComposedOperators::planar_with_tables(dom.clone(), kind, Some(&order), &table)?;
            levels.push(Level {
                n,
                h: dom.factor(0).h(),
                dom,
                ops,
            });
        }
        Ok(Runner {
            cfg,
            tol: &cfg.tolerances,
            kind,
            order,
            levels,
            smooth: corpus::smooth_corpus(m, cfg.seed)?,
            closed: corpus::closed_corpus(m, cfg.seed)?,
            e1_scale: None,
            verbose,
        })
    }

    fn m(&self) -> usize {
        self.cfg.m()
    }

    fn grids(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.n).collect()
    }

    fn hs(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.h).collect()
    }

    fn finest(&self) -> &Level {
        self.levels.last().expect("validated non-empty grids")
    }

    fn log(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn series(&self, name: impl Into<String>, values: Vec<f64>) -> Series {
        Series::new(name, self.grids(), self.hs(), values)
    }

    fn push_fit(&self, rep: &mut ExperimentReport, s: Series, finest_tol: Option<f64>) {
        if let Some(t) = finest_tol {
            rep.criteria.push(Criterion::at_most(
                format!("{} at N={}", s.name, s.grids.last().copied().unwrap_or(0)),
                s.fit.finest,
                t,
            ));
        }
        if s.grids.len() >= 2 {
            rep.criteria.push(Criterion::order(format!("{} order", s.name), &s.fit, self.tol.min_order));
        } else {
            rep.notes.push(format!("{}: a single grid, no order fitted", s.name));
        }
        rep.series.push(s);
    }

    fn run(&mut self, kind: ExperimentKind) -> ExperimentReport {
        let t = Instant::now();
        let mut rep = ExperimentReport::new(kind);
        let out = match kind {
            ExperimentKind::CauchyIdentity => self.cauchy_identity(&mut rep),
            ExperimentKind::HomotopyIdentity => self.homotopy_identity(&mut rep),
            ExperimentKind::DbarSolution => self.dbar_solution(&mut rep),
            ExperimentKind::Exactness => self.exactness(&mut rep),
            ExperimentKind::ProjectionLaws => self.projection_laws(&mut rep),
            ExperimentKind::Boundedness => self.boundedness(&mut rep),
            ExperimentKind::Fubini => self.fubini(&mut rep),
            ExperimentKind::Anticommutation => self.anticommutation(&mut rep),
            ExperimentKind::CrossFormulation => self.cross_formulation(&mut rep),
            ExperimentKind::Asymmetry => self.asymmetry(&mut rep),
            ExperimentKind::All => Ok(()),
        };
        if let Err(e) = out {
            rep.error = Some(e.to_string());
        }
        self.log(format!("{}: {:.1}s", kind.name(), t.elapsed().as_secs_f64()));
        rep.finish()
    }

    /// `H₁(1) = z̄` on the unit disk (zero extension) and FFT vs direct sums.
    fn cauchy_identity(&mut self, rep: &mut ExperimentReport) -> Result<()> {
        let mut worst = 0.0f64;
        let (mut errs, mut hs) = (Vec::new(), Vec::new());
        for l in &self.levels {
            let d = Arc::new(PlanarDomain::new(Shape::unit_disk(), l.n)?);
            let op = PlanarCauchy::new(d.clone(), ExtensionKind::Zero)?;
            let one = Array2::from_elem(d.dims(), C64::new(1.0, 0.0));
            let u = op.cauchy_transform(&one)?;
            let mask = d.eroded_mask(RESIDUAL_EROSION);
            let mut err = 0.0f64;
            for ((iy, ix), v) in u.indexed_iter() {
                if mask[[iy, ix]] {
                    err = err.max((v - d.grid().node(iy, ix).conj()).norm());
                }
            }
            rep.row(l.n, d.h(), "one", "max|H1(1)-conj(z)|", Some(1), err, d.h());
            worst = worst.max(err / d.h());
            errs.push(err);
            hs.push(d.h());
        }
        rep.criteria.push(
            Criterion::at_most("max |H1(1) - conj z| / h on the unit disk", worst, self.tol.cauchy_h_multiple)
                .with_detail(format!("grids {:?}", self.grids())),
        );
        rep.series.push(Series::new("max |H1(1) - conj z|", self.grids(), hs, errs));
        let n = self.tol.fft_check_grid;
        let d = Arc::new(PlanarDomain::new(Shape::unit_disk(), n)?);
        let table = CauchyKernelTable::for_grid(d.h(), n)?;
        let g = d.grid().sample(|z| (-(z - C64::new(0.2, -0.1)).norm_sqr()).exp() * (1.0 + z.conj()));
        let mut g = g;
        crate::planar::cauchy::restrict(&mut g, d.mask());
        let fast = table.convolve(&g)?;
        let slow = oracle::direct_cauchy_sum(&table, &g);
        let diff = (&fast - &slow).iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let scale = slow.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        rep.row(n, d.h(), "gauss", "fft-vs-direct", None, diff, scale);
        rep.criteria.push(Criterion::at_most(
            format!("FFT vs direct summation at N={n}"),
            relative(diff, scale),
            self.tol.fft_vs_direct,
        ));
        Ok(())
    }

    fn homotopy_identity(&mut self, rep: &mut ExperimentReport) -> Result<()> {
        let m = self.m();
        let mut worst = vec![vec![0.0f64; self.levels.len()]; m + 1];
        let mut seen = vec![false; m + 1];
        for (li, l) in self.levels.iter().enumerate() {
            for c in &self.smooth {
                let (f, df) = c.sample(&l.dom)?;
                for d in product::homotopy_residual(&l.ops, &f, Some(&df))? {
                    rep.row(l.n, l.h, &c.id, "f-Pf-dbarHf-Hdbarf", Some(d.degree), d.residual, d.reference);
                    worst[d.degree][li] = worst[d.degree][li].max(d.relative);
                    seen[d.degree] = true;
                }
            }
        }
        let mut scale = 0.0f64;
        for q in 0..=m {
            if !seen[q] {
                continue;
            }
            scale = scale.max(*worst[q].last().expect("grids"));
            let s = self.series(format!("degree-{q} homotopy residual"), worst[q].clone());
            self.push_fit(rep, s, Some(self.tol.homotopy_residual));
        }
        self.e1_scale = Some(scale);
        Ok(())
    }

    fn dbar_solution(&mut self, rep: &mut ExperimentReport) -> Result<()> {
        let mut worst = vec![0.0f64; self.levels.len()];
        for (li, l) in self.levels.iter().enumerate() {
            for c in &self.closed {
                let (f, _) = c.sample(&l.dom)?;
                let u = l.ops.homotopy(&f)?;
                let r = l2(&u.dbar().sub(&f))?;
                let reference = l2(&f)?;
                rep.row(l.n, l.h, &c.id, "dbarHf-f", f.pure_degree(), r, reference);
                worst[li] = worst[li].max(relative(r, reference));
            }
        }
        let s = self.series("closed-form dbar(Hf) - f", worst);
        self.push_fit(rep, s, Some(self.tol.dbar_solution));

        // H(dz̄₁) is z̄₁ up to O(h) with the zero extension
        let first = self.order[0];
        if let Shape::Disk { center, .. } = self.finest().dom.factor(first).shape().clone() {
            let mut worst_h = 0.0f64;
            for l in &self.levels {
                let ops = ComposedOperators::planar(l.dom.clone(), ExtensionKind::Zero, Some(&self.order))?;
                let mut sym = SymbolicForm::zero(self.m());
                sym.push(MultiIndex::single(first), SymTerm::new(C64::new(1.0, 0.0), vec![ExpPoly::one(); self.m()]))?;
                let f = sym.sample(&l.dom)?;
                let mut target = SymbolicForm::zero(self.m());
                let mut factors = vec![ExpPoly::one(); self.m()];
                factors[first] = ExpPoly::polynomial([(0, 0, -center.conj()), (0, 1, C64::new(1.0, 0.0))]);
                target.push(MultiIndex::EMPTY, SymTerm::new(C64::new(1.0, 0.0), factors))?;
                let diff = ops.homotopy(&f)?.sub(&target.sample(&l.dom)?).compress();
                let err = diff
                    .components()
                    .values()
                    .map(|c| sup_norm_bound(c, &l.dom, RESIDUAL_EROSION))
                    .sum::<f64>();
                let h = l.dom.factor(first).h();
                rep.row(l.n, h, &format!("dzbar{}", first + 1), "max|H(dzbar)-conj(z-c)|", Some(1), err, h);
                worst_h = worst_h.max(err / h);
            }
            rep.criteria.push(
                Criterion::at_most(format!("max |H(dzbar{}) - conj z{}| / h, zero extension", first + 1, first + 1), worst_h, 10.0)
                    .with_detail("sup norm bound over the eroded interior"),
            );
        } else {
            rep.notes.push("first factor is not a disk; dzbar witness skipped".into());
        }
        Ok(())
    }

    fn exactness(&mut self, rep: &mut ExperimentReport) -> Result<()> {
        let pots = corpus::standard_potentials(self.m(), self.cfg.seed)?;
        let mut worst = vec![0.0f64; self.levels.len()];
        for (li, l) in self.levels.iter().enumerate() {
            for (k, p) in pots.iter().enumerate() {
                let f = p.sample(&l.dom)?;
                let df = p.dbar().sample(&l.dom)?;
                let lhs = l.ops.homotopy(&df)?;
                let rhs = f.sub(&l.ops.projection(&f)?);
                let r = l2(&lhs.sub(&rhs))?;
                let reference = l2(&f)?;
                rep.row(l.n, l.h, &format!("pot{k}"), "H(dbarF)-(F-PF)", Some(0), r, reference);
                worst[li] = worst[li].max(relative(r, reference));
            }
        }
        let s = self.series("H(dbar F) - (F - PF)", worst);
        rep.criteria.push(Criterion::at_most(
            format!("H(dbar F) - (F - PF) over {} potentials at N={}", pots.len(), self.finest().n),
            s.fit.finest,
            self.tol.exactness,
        ));
        rep.series.push(s);
        Ok(())
    }

    fn e1_scale(&mut self) -> Result<f64> {
        if let Some(s) = self.e1_scale {
            return Ok(s);
        }
        let l = self.finest();
        let mut scale = 0.0f64;
        for c in &self.smooth {
            let (f, df) = c.sample(&l.dom)?;
            for d in product::homotopy_residual(&l.ops, &f, Some(&df))? {
                scale = scale.max(d.relative);
            }
        }
        self.e1_scale = Some(scale);
        Ok(scale)
    }

    fn projection_laws(&mut self, rep: &mut ExperimentReport) -> Result<()> {
        let scale = self.e1_scale()?;
        let l = self.finest();
        let first = self.order[0];
        let p1 = l.ops.factor_operators(first).expect("factor in chain").clone();
        let (mut big, mut single) = (0.0f64, 0.0f64);
        for c in &self.smooth {
            let (f, _) = c.sample(&l.dom)?;
            let f0 = f.degree_part(0);
            if f0.is_zero() {
                continue;
            }
            let reference = l2(&f0)?;
            let pf = l.ops.projection(&f0)?;
            let ppf = l.ops.projection(&pf)?;
            let r = l2(&ppf.sub(&pf))?;
            rep.row(l.n, l.h, &c.id, "PP-P", Some(0), r, reference);
            big = big.max(relative(r, reference));
            let proj = |a: &Array2<C64>| p1.project(a);
            let q1 = apply_slicewise(&f0, first, GeneratorAction::RequireAbsent, proj)?;
            let q2 = apply_slicewise(&q1, first, GeneratorAction::RequireAbsent, proj)?;
            let r = l2(&q2.sub(&q1))?;
            rep.row(l.n, l.h, &c.id, &format!("P{}P{}-P{}", first + 1, first + 1, first + 1), Some(0), r, reference);
            single = single.max(relative(r, reference));
        }
        let bound = self.tol.projection_multiple * scale;
        let detail = format!("homotopy residual scale {scale:.3e} at N={}", l.n);
        rep.criteria.push(Criterion::at_most("|PP - P| (product)", big, bound).with_detail(detail.clone()));
        rep.criteria.push(Criterion::at_most(format!("|P{0}P{0} - P{0}| (factor {0})", first + 1), single, bound).with_detail(detail));
        let d = l.dom.factor(first).clone();
        for (name, h) in corpus::holomorphic_fixtures() {
            let a = d.grid().sample(|z| h.eval(z));
            let pa = p1.project(&a)?;
            let r = planar_l2(&d, &(&pa - &a), RESIDUAL_EROSION)?;
            let reference = planar_l2(&d, &a, RESIDUAL_EROSION)?;
            rep.row(l.n, d.h(), &name, "Ph-h", Some(0), r, reference);
            rep.criteria.push(Criterion::at_most(
                format!("P h = h for h = {name} at N={}", l.n),
                relative(r, reference),
                self.tol.holomorphic_fixture,
            ));
        }
        Ok(())
    }

    fn boundedness(&mut self, rep: &mut ExperimentReport) -> Result<()> {
        if self.levels.len() < 2 {
            rep.notes.push("boundedness needs at least two grids".into());
            return Ok(());
        }
        // operator outputs, computed once per grid
        let mut outputs: Vec<Vec<(String, FormField, FormField, FormField)>> = Vec::new();
        for l in &self.levels {
            let mut v = Vec::new();
            for c in &self.smooth {
                let (f, _) = c.sample(&l.dom)?;
                let hf = l.ops.homotopy(&f)?.compress();
                let pf = l.ops.projection(&f)?.compress();
                v.push((c.id.clone(), f, hf, pf));
            }
            outputs.push(v);
        }
        let grids = self.grids();
        let index = |n: usize| grids.iter().position(|&g| g == n).expect("grid");
        for (label, which) in [("H", 0usize), ("P", 1usize)] {
            for (k, p) in [(0usize, 2.0f64), (0, 4.0), (1, 2.0), (1, 4.0)] {
                let spec = SobolevSpec::new(k, p)?;
                let mut sw = sobolev::operator_ratio_sweep(label, spec, &grids, |n| {
                    Ok(outputs[index(n)]
                        .iter()
                        .map(|(id, f, hf, pf)| (id.clone(), f.clone(), if which == 0 { hf.clone() } else { pf.clone() }))
                        .collect())
                })?;
                sw.bounded = sw.growth < self.tol.bounded_growth;
                for (i, &n) in grids.iter().enumerate() {
                    rep.row(n, self.levels[i].h, &sw.argmax[i], &format!("ratio {label} W^{{{k},{p}}}"), None, sw.ratios[i], 1.0);
                }
                rep.criteria.push(
                    Criterion::below(format!("{label} on W^{{{k},{p}}}: ratio growth N={}..{}", grids[0], grids[grids.len() - 1]), sw.growth, self.tol.bounded_growth)
                        .with_detail(if sw.bounded { "bounded" } else { "unbounded" }),
                );
                rep.sweeps.push(sw);
            }
        }
        // negative control: ∂/∂z̄ in the first factor on W^{0,2}, corpus plus a rough member
        let j = self.order[0];
        let spec = SobolevSpec::new(0, 2.0)?;
        let levels = &self.levels;
        let smooth = &self.smooth;
        let m = self.m();
        let mut sw = sobolev::operator_ratio_sweep(&format!("d/dzbar{}", j + 1), spec, &grids, |n| {
            let l = &levels[index(n)];
            let mut v = Vec::new();
            for c in smooth.iter().cloned().chain(std::iter::once(corpus::rough_member(m, l.h))) {
                let (f, _) = c.sample(&l.dom)?;
                let f0 = f.degree_part(0);
                if f0.is_zero() {
                    continue;
                }
                let d = f0.dbar_partial(MultiIndex::single(j));
                v.push((c.id.clone(), f0, d));
            }
            Ok(v)
        })?;
        sw.bounded = sw.growth < self.tol.bounded_growth;
        for (i, &n) in grids.iter().enumerate() {
            rep.row(n, self.levels[i].h, &sw.argmax[i], &format!("ratio d/dzbar{} W^{{0,2}}", j + 1), None, sw.ratios[i], 1.0);
        }
        rep.criteria.push(
            Criterion::at_least(format!("negative control d/dzbar{} on W^{{0,2}}: ratio growth", j + 1), sw.growth, self.tol.bounded_growth)
                .with_detail(if sw.bounded { "bounded (control failed)" } else { "unbounded, as expected" }),
        );
        rep.sweeps.push(sw);
        Ok(())
    }

    fn fubini(&mut self, rep: &mut ExperimentReport) -> Result<()> {
        let m = self.m();
        if m < 2 {
            rep.notes.push("the Fubini ratio needs m ≥ 2".into());
            return Ok(());
        }
        if self.levels.len() < 2 {
            rep.notes.push("the Fubini band needs at least two grids".into());
            return Ok(());
        }
        let cut = self.cfg.operators.cut;
        let (lo_l, hi_l) = (&self.levels[self.levels.len() - 2], self.finest());
        for (k, p) in [(1usize, 2.0f64), (1, 4.0), (2, 2.0), (2, 4.0)] {
            let spec = SobolevSpec::new(k, p)?;
            let mut bands = Vec::new();
            for l in [lo_l, hi_l] {
                let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
                for c in &self.smooth {
                    let (f, _) = c.sample(&l.dom)?;
                    for comp in f.components().values() {
                        let r = sobolev::fubini_ratio(comp, &l.dom, spec, cut)?;
                        rep.row(l.n, l.h, &c.id, &format!("fubini W^{{{k},{p}}}"), None, r.full, r.slicewise);
                        lo = lo.min(r.ratio);
                        hi = hi.max(r.ratio);
                    }
                }
                bands.push((lo, hi));
            }
            let ((lo0, hi0), (lo1, hi1)) = (bands[0], bands[1]);
            let drift = (lo1 / lo0 - 1.0).abs().max((hi1 / hi0 - 1.0).abs());
            rep.criteria.push(
                Criterion::at_most(format!("Fubini band W^{{{k},{p}}} drift N={}..{}", lo_l.n, hi_l.n), drift, self.tol.fubini_band)
                    .with_detail(format!("[{lo0:.4}, {hi0:.4}] -> [{lo1:.4}, {hi1:.4}]")),
            );
            // oscillating members up to a quarter of the Nyquist frequency
            let l = lo_l;
            let nyq4 = std::f64::consts::PI / l.h / 4.0;
            let (mut wlo, mut whi) = (f64::INFINITY, 0.0f64);
            for s in 0..=4 {
                let omega = nyq4 * s as f64 / 4.0;
                let c = corpus::plane_wave_member(m, omega);
                let (f, _) = c.sample(&l.dom)?;
                for comp in f.components().values() {
                    let r = sobolev::fubini_ratio(comp, &l.dom, spec, cut)?;
                    rep.row(l.n, l.h, &c.id, &format!("fubini W^{{{k},{p}}}"), None, r.full, r.slicewise);
                    wlo = wlo.min(r.ratio);
                    whi = whi.max(r.ratio);
                }
            }
            rep.notes.push(format!(
                "W^{{{k},{p}}}: plane waves up to omega = {nyq4:.1} at N={} give ratios in [{wlo:.4}, {whi:.4}]",
                l.n
            ));
        }
        Ok(())
    }

    fn witness(&self) -> Result<SymbolicForm> {
        let m = self.m();
        let j = self.order[0];
        let mut factors: Vec<ExpPoly> = (0..m)
            .map(|k| ExpPoly::gaussian(C64::new(0.1 * k as f64, -0.1), 0.8).mul(&ExpPoly::zbar().with_poly(vec![(0, 1, C64::new(1.0, 0.0)), (0, 0, C64::new(0.5, 0.0))])))
            .collect();
        factors[j] = ExpPoly::gaussian(C64::new(0.2, 0.1), 0.7);
        let mut f = SymbolicForm::zero(m);
        f.push(MultiIndex::single(j), SymTerm::new(C64::new(1.0, 0.0), factors))?;
        Ok(f)
    }

    fn anticommutation(&mut self, rep: &mut ExperimentReport) -> Result<()> {
        let m = self.m();
        if m < 2 {
            rep.notes.push("anticommutation needs m ≥ 2".into());
            return Ok(());
        }
        let cut = self.cfg.operators.cut;
        let witness = self.witness()?;
        let (mut hom, mut proj) = (vec![0.0f64; self.levels.len()], vec![0.0f64; self.levels.len()]);
        let mut flip = f64::INFINITY;
        for (li, l) in self.levels.iter().enumerate() {
            for c in &self.smooth {
                let (f, _) = c.sample(&l.dom)?;
                let r = product::anticommutation_check(&l.ops, &f, cut)?;
                rep.row(l.n, l.h, &c.id, "dbarV HU + HU dbarV", None, r.homotopy, 1.0);
                rep.row(l.n, l.h, &c.id, "dbar PU - PU dbar", None, r.projection, 1.0);
                rep.row(l.n, l.h, &c.id, "sign-flipped", None, r.sign_flipped, 1.0);
                hom[li] = hom[li].max(r.homotopy);
                proj[li] = proj[li].max(r.projection);
            }
            let f = witness.sample(&l.dom)?;
            let r = product::anticommutation_check(&l.ops, &f, cut)?;
            rep.row(l.n, l.h, "witness", "sign-flipped", Some(1), r.sign_flipped, 1.0);
            rep.row(l.n, l.h, "witness", "dbarV HU + HU dbarV", Some(1), r.homotopy, 1.0);
            flip = flip.min(r.sign_flipped);
        }
        let s = self.series("dbarV HU + HU dbarV", hom);
        self.push_fit(rep, s, None);
        let s = self.series("dbar PU - PU dbar", proj);
        self.push_fit(rep, s, None);
        rep.criteria.push(
            Criterion::at_least("sign-flipped control (min over grids)", flip, self.tol.sign_flip_min)
                .with_detail(if flip >= self.tol.sign_flip_min { "flagged" } else { "not flagged" }),
        );
        Ok(())
    }

    fn cross_formulation(&mut self, rep: &mut ExperimentReport) -> Result<()> {
        let mut worst = 0.0f64;
        for l in &self.levels {
            for c in self.smooth.iter().chain(&self.closed) {
                let (f, _) = c.sample(&l.dom)?;
                let a = l.ops.homotopy(&f)?;
                let b = l.ops.homotopy_recursive(&f)?;
                let d = product::relative_difference(&a, &b)?;
                rep.row(l.n, l.h, &c.id, "H fast vs recursive", None, d, 1.0);
                worst = worst.max(d);
            }
        }
        rep.criteria.push(Criterion::at_most("recursive vs first-generator evaluation", worst, self.tol.cross_formulation));
        Ok(())
    }

    fn asymmetry(&mut self, rep: &mut ExperimentReport) -> Result<()> {
        let m = self.m();
        if m < 2 {
            rep.notes.push("factor order is trivial for m = 1".into());
            return Ok(());
        }
        let l = self.finest();
        let rev: Vec<usize> = self.order.iter().rev().copied().collect();
        let ops_rev = ComposedOperators::planar(l.dom.clone(), self.kind, Some(&rev))?;
        let (mut change, mut res) = (0.0f64, 0.0f64);
        for c in &self.smooth {
            let (f, df) = c.sample(&l.dom)?;
            let d = product::relative_difference(&l.ops.homotopy(&f)?, &ops_rev.homotopy(&f)?)?;
            rep.row(l.n, l.h, &c.id, "H order change", None, d, 1.0);
            change = change.max(d);
            for (name, ops) in [("forward", &l.ops), ("reversed", &ops_rev)] {
                for r in product::homotopy_residual(ops, &f, Some(&df))? {
                    rep.row(l.n, l.h, &c.id, &format!("homotopy residual, {name} order"), Some(r.degree), r.residual, r.reference);
                    res = res.max(r.relative);
                }
            }
        }
        rep.criteria.push(Criterion::at_least("max change of Hf under factor reversal", change, self.tol.asymmetry_min));
        rep.criteria.push(Criterion::at_most(
            format!("homotopy residual, both orders, N={}", l.n),
            res,
            self.tol.homotopy_residual,
        ));
        Ok(())
    }
}

/// Runs every configured experiment; failures are recorded per experiment.
pub fn run_experiments(cfg: &ExperimentConfig, verbose: bool) -> Result<Report> {
    with_thread_cap(|| {
        let mut runner = Runner::new(cfg, verbose)?;
        let mut experiments = Vec::new();
        for kind in cfg.experiment_list() {
            experiments.push(runner.run(kind));
        }
        let passed = experiments.iter().all(|e| e.passed);
        let l = runner.finest();
        Ok(Report {
            schema: REPORT_SCHEMA.to_string(),
            timestamp: timestamp(),
            config: cfg.clone(),
            domain: l.dom.describe(),
            m: cfg.m(),
            extension: runner.kind.to_string(),
            factor_order: runner.order.iter().map(|j| j + 1).collect(),
            provenance: l.ops.provenance(),
            experiments,
            passed,
        })
    })?
}
