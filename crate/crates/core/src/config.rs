//! TOML experiment configuration.
//!
//! ```toml
//! out = "out"
//! seed = 0
//! experiments = ["homotopy-identity", "dbar-solution"]   # or ["all"]
//!
//! [domain]
//! shapes = ["disk(0,0,1)", "disk(0,0,1)"]
//! grids = [32, 64, 128]
//!
//! [operators]
//! extension = "reflection:3"      # or "zero"
//! factor_order = [2, 1]           # 1-based; default 1..=m
//! cut = 1                         # U = factors 1..=cut
//!
//! [tolerances]
//! homotopy_residual = 1e-2
//! ```
//!
//! Unknown keys are rejected. Omitted tolerances take the acceptance values.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::{PlanarDomain, ProductDomain, Shape};
use crate::error::{DbpError, Result};
use crate::planar::ExtensionKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    CauchyIdentity,
    HomotopyIdentity,
    DbarSolution,
    Exactness,
    ProjectionLaws,
    Boundedness,
    Fubini,
    Anticommutation,
    CrossFormulation,
    Asymmetry,
    All,
}

impl ExperimentKind {
    pub const EVERY: [ExperimentKind; 10] = [
        ExperimentKind::CauchyIdentity,
        ExperimentKind::HomotopyIdentity,
        ExperimentKind::DbarSolution,
        ExperimentKind::Exactness,
        ExperimentKind::ProjectionLaws,
        ExperimentKind::Boundedness,
        ExperimentKind::Fubini,
        ExperimentKind::Anticommutation,
        ExperimentKind::CrossFormulation,
        ExperimentKind::Asymmetry,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::CauchyIdentity => "cauchy-identity",
            ExperimentKind::HomotopyIdentity => "homotopy-identity",
            ExperimentKind::DbarSolution => "dbar-solution",
            ExperimentKind::Exactness => "exactness",
            ExperimentKind::ProjectionLaws => "projection-laws",
            ExperimentKind::Boundedness => "boundedness",
            ExperimentKind::Fubini => "fubini",
            ExperimentKind::Anticommutation => "anticommutation",
            ExperimentKind::CrossFormulation => "cross-formulation",
            ExperimentKind::Asymmetry => "asymmetry",
            ExperimentKind::All => "all",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub shapes: Vec<String>,
    pub grids: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorConfig {
    #[serde(default = "default_extension")]
    pub extension: String,
    /// 1-based factor order.
    #[serde(default)]
    pub factor_order: Option<Vec<usize>>,
    #[serde(default = "default_cut")]
    pub cut: usize,
}

fn default_extension() -> String {
    ExtensionKind::default().to_string()
}

fn default_cut() -> usize {
    1
}

impl Default for OperatorConfig {
    fn default() -> Self {
        OperatorConfig {
            extension: default_extension(),
            factor_order: None,
            cut: default_cut(),
        }
    }
}

/// Thresholds; defaults are the acceptance values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Relative residual at the finest grid, per degree.
    pub homotopy_residual: f64,
    pub dbar_solution: f64,
    pub exactness: f64,
    /// Minimum fitted order for every refinement sweep.
    pub min_order: f64,
    /// `max |H₁(1) − z̄|` on the disk, in units of `h`.
    pub cauchy_h_multiple: f64,
    pub fft_vs_direct: f64,
    /// Grid for the direct-summation check.
    pub fft_check_grid: usize,
    /// Idempotency defects relative to the largest homotopy residual.
    pub projection_multiple: f64,
    pub holomorphic_fixture: f64,
    pub sign_flip_min: f64,
    pub bounded_growth: f64,
    pub fubini_band: f64,
    pub cross_formulation: f64,
    /// Minimum relative change of `𝓗f` under factor reversal.
    pub asymmetry_min: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            homotopy_residual: 1e-2,
            dbar_solution: 1e-2,
            exactness: 1e-2,
            min_order: 1.5,
            cauchy_h_multiple: 10.0,
            fft_vs_direct: 1e-10,
            fft_check_grid: 64,
            projection_multiple: 10.0,
            holomorphic_fixture: 1e-3,
            sign_flip_min: 0.1,
            bounded_growth: crate::sobolev::BOUNDED_GROWTH,
            fubini_band: 0.3,
            cross_formulation: 1e-12,
            asymmetry_min: 1e-3,
        }
    }
}

impl Tolerances {
    fn validate(&self) -> Result<()> {
        let vals = [
            ("homotopy_residual", self.homotopy_residual),
            ("dbar_solution", self.dbar_solution),
            ("exactness", self.exactness),
            ("min_order", self.min_order),
            ("cauchy_h_multiple", self.cauchy_h_multiple),
            ("fft_vs_direct", self.fft_vs_direct),
            ("projection_multiple", self.projection_multiple),
            ("holomorphic_fixture", self.holomorphic_fixture),
            ("sign_flip_min", self.sign_flip_min),
            ("bounded_growth", self.bounded_growth),
            ("fubini_band", self.fubini_band),
            ("cross_formulation", self.cross_formulation),
            ("asymmetry_min", self.asymmetry_min),
        ];
        for (name, v) in vals {
            if !(v > 0.0 && v.is_finite()) {
                return Err(DbpError::Config(format!("tolerance {name} must be positive, got {v}")));
            }
        }
        if self.fft_check_grid < 5 {
            return Err(DbpError::Config("fft_check_grid must be at least 5".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: DomainConfig,
    #[serde(default)]
    pub operators: OperatorConfig,
    pub experiments: Vec<ExperimentKind>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Directory for cached kernel tables.
    #[serde(default)]
    pub kernel_cache: Option<PathBuf>,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    /// Bidisc, `N ∈ {32, 64, 128}`, all experiments.
    pub fn standard(m: usize) -> Self {
        ExperimentConfig {
            domain: DomainConfig {
                shapes: vec![Shape::unit_disk().to_string(); m],
                grids: vec![32, 64, 128],
            },
            operators: OperatorConfig::default(),
            experiments: vec![ExperimentKind::All],
            out: default_out(),
            seed: 0,
            tolerances: Tolerances::default(),
            kernel_cache: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| DbpError::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| DbpError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| DbpError::Config(e.to_string()))
    }

    pub fn m(&self) -> usize {
        self.domain.shapes.len()
    }

    pub fn shapes(&self) -> Result<Vec<Shape>> {
        self.domain.shapes.iter().map(|s| Shape::parse(s)).collect()
    }

    pub fn extension(&self) -> Result<ExtensionKind> {
        self.operators.extension.parse::<ExtensionKind>()?.validate()
    }

    /// 0-based factor order.
    pub fn factor_order(&self) -> Option<Vec<usize>> {
        self.operators
            .factor_order
            .as_ref()
            .map(|o| o.iter().map(|j| j.wrapping_sub(1)).collect())
    }

    pub fn experiment_list(&self) -> Vec<ExperimentKind> {
        if self.experiments.contains(&ExperimentKind::All) {
            return ExperimentKind::EVERY.to_vec();
        }
        let mut v = self.experiments.clone();
        v.sort();
        v.dedup();
        v
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.m();
        if m == 0 {
            return Err(DbpError::Config("domain.shapes is empty".into()));
        }
        if m > 4 {
            return Err(DbpError::Config(format!("{m} factors; at most 4 are supported by the harness")));
        }
        self.shapes()?;
        self.extension()?;
        let g = &self.domain.grids;
        if g.is_empty() {
            return Err(DbpError::Config("domain.grids is empty".into()));
        }
        if g.windows(2).any(|w| w[1] <= w[0]) {
            return Err(DbpError::Config(format!("grid sizes must be strictly increasing: {g:?}")));
        }
        if g[0] < 8 {
            return Err(DbpError::Config("grid sizes must be at least 8".into()));
        }
        if let Some(&n) = g.iter().find(|&&n| (n as u128) * (n as u128) > crate::field::DENSE_NODE_LIMIT) {
            return Err(DbpError::Config(format!("factor grid {n}² exceeds the node limit")));
        }
        if let Some(order) = &self.operators.factor_order {
            let mut s = order.clone();
            s.sort_unstable();
            if s != (1..=m).collect::<Vec<_>>() {
                return Err(DbpError::Config(format!("factor_order {order:?} is not a permutation of 1..={m}")));
            }
        }
        if m > 1 && !(1..m).contains(&self.operators.cut) {
            return Err(DbpError::Config(format!("cut {} must lie in 1..{m}", self.operators.cut)));
        }
        if self.experiments.is_empty() {
            return Err(DbpError::Config("no experiments listed".into()));
        }
        self.tolerances.validate()
    }

    /// The product domain at grid size `n`; equal shapes share one factor.
    pub fn domain_at(&self, n: usize) -> Result<Arc<ProductDomain>> {
        let shapes = self.shapes()?;
        let mut factors: Vec<Arc<PlanarDomain>> = Vec::with_capacity(shapes.len());
        for (j, s) in shapes.iter().enumerate() {
            match (0..j).find(|&k| shapes[k] == *s) {
                Some(k) => factors.push(factors[k].clone()),
                None => factors.push(Arc::new(PlanarDomain::new(s.clone(), n)?)),
            }
        }
        Ok(Arc::new(ProductDomain::new(factors)?))
    }
}
