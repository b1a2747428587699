//! Seeded test-form families, all with closed-form `∂̄`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::ProductDomain;
use crate::error::{DbpError, Result};
use crate::form::FormField;
use crate::multi_index::MultiIndex;
use crate::symbolic::{ExpPoly, SymTerm, SymbolicForm};

pub const CORPUS_SCHEMA: &str = "dbp-corpus/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CorpusFamily {
    /// Random coefficients on `z^a z̄^b`, `a + b ≤ degree`, in every factor.
    Polynomial { degree: u32 },
    /// Products of `exp(−|z − c|²/w²)`; empty lists draw at random.
    GaussianBump {
        #[serde(default)]
        centers: Vec<[f64; 2]>,
        #[serde(default)]
        widths: Vec<f64>,
    },
    /// Products of plane waves, one member per frequency and degree.
    Oscillatory { frequencies: Vec<f64> },
    /// `f = ∂̄F`. An empty list means the standard potentials.
    DbarPotential {
        #[serde(default)]
        potentials: Vec<SymbolicForm>,
    },
}

impl CorpusFamily {
    pub fn name(&self) -> &'static str {
        match self {
            CorpusFamily::Polynomial { .. } => "polynomial",
            CorpusFamily::GaussianBump { .. } => "gaussian-bump",
            CorpusFamily::Oscillatory { .. } => "oscillatory",
            CorpusFamily::DbarPotential { .. } => "dbar-potential",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub family: CorpusFamily,
    #[serde(default)]
    pub seed: u64,
    /// Form degrees to generate; `None` means `0..=m`.
    #[serde(default)]
    pub degrees: Option<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusMember {
    pub id: String,
    pub family: String,
    pub closed: bool,
    pub form: SymbolicForm,
    pub dbar: SymbolicForm,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<SymbolicForm>,
}

impl CorpusMember {
    pub fn new(id: impl Into<String>, family: &str, form: SymbolicForm) -> Self {
        let dbar = form.dbar();
        CorpusMember {
            id: id.into(),
            family: family.to_string(),
            closed: dbar.is_zero(),
            form,
            dbar,
            potential: None,
        }
    }

    pub fn from_potential(id: impl Into<String>, potential: SymbolicForm) -> Self {
        let form = potential.dbar();
        let mut m = Self::new(id, "dbar-potential", form);
        m.potential = Some(potential);
        m
    }

    pub fn m(&self) -> usize {
        self.form.m()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.form.degrees()
    }

    pub fn sample(&self, domain: &Arc<ProductDomain>) -> Result<(FormField, FormField)> {
        Ok((self.form.sample(domain)?, self.dbar.sample(domain)?))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusFile {
    pub schema: String,
    pub m: usize,
    pub spec: CorpusSpec,
    pub members: Vec<CorpusMember>,
}

fn one() -> C64 {
    C64::new(1.0, 0.0)
}

fn rand_c(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

fn rand_point(rng: &mut ChaCha8Rng, r: f64) -> C64 {
    let rho = r * rng.gen_range(0.0f64..1.0).sqrt();
    C64::from_polar(rho, rng.gen_range(0.0..2.0 * PI))
}

fn random_polynomial(rng: &mut ChaCha8Rng, d: u32) -> ExpPoly {
    let mut coeffs = Vec::new();
    for a in 0..=d {
        for b in 0..=(d - a) {
            coeffs.push((a, b, rand_c(rng)));
        }
    }
    ExpPoly::polynomial(coeffs)
}

fn random_gaussian(rng: &mut ChaCha8Rng) -> ExpPoly {
    ExpPoly::gaussian(rand_point(rng, 0.5), rng.gen_range(0.6..1.0))
}

fn random_wave(rng: &mut ChaCha8Rng, omega: f64) -> ExpPoly {
    ExpPoly::plane_wave(omega, rng.gen_range(0.0..2.0 * PI))
}

fn check_degrees(spec: &CorpusSpec, m: usize) -> Result<Vec<usize>> {
    if m == 0 {
        return Err(DbpError::Config("corpus needs at least one factor".into()));
    }
    let degrees = spec.degrees.clone().unwrap_or_else(|| (0..=m).collect());
    if let Some(q) = degrees.iter().find(|&&q| q > m) {
        return Err(DbpError::Config(format!(
            "{} family cannot produce degree-{q} forms when m = {m}",
            spec.family.name()
        )));
    }
    if degrees.is_empty() {
        return Err(DbpError::Config("no form degrees requested".into()));
    }
    Ok(degrees)
}

/// Form with the given per-component factor builder on every `|I| = q`.
fn form_of_degree(
    m: usize,
    q: usize,
    mut factor: impl FnMut(usize) -> ExpPoly,
    mut coeff: impl FnMut() -> C64,
) -> SymbolicForm {
    let mut f = SymbolicForm::zero(m);
    for i in MultiIndex::all_of_degree(m, q) {
        let factors = (0..m).map(&mut factor).collect();
        f.push(i, SymTerm::new(coeff(), factors)).expect("index within m");
    }
    f
}

fn index_label(i: MultiIndex) -> String {
    if i.is_empty() {
        "0".to_string()
    } else {
        i.iter().map(|j| (j + 1).to_string()).collect::<Vec<_>>().join("")
    }
}

pub fn generate_corpus(spec: &CorpusSpec, m: usize) -> Result<Vec<CorpusMember>> {
    let degrees = check_degrees(spec, m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::new();
    match &spec.family {
        CorpusFamily::Polynomial { degree } => {
            for &q in &degrees {
                for i in MultiIndex::all_of_degree(m, q) {
                    let mut f = SymbolicForm::zero(m);
                    let factors = (0..m).map(|_| random_polynomial(&mut rng, *degree)).collect();
                    f.push(i, SymTerm::new(one(), factors))?;
                    out.push(CorpusMember::new(format!("poly{degree}-I{}", index_label(i)), "polynomial", f));
                }
            }
        }
        CorpusFamily::GaussianBump { centers, widths } => {
            if widths.iter().any(|w| !(*w > 0.0)) {
                return Err(DbpError::Config("gaussian widths must be positive".into()));
            }
            let mut slot = 0usize;
            for &q in &degrees {
                let f = form_of_degree(
                    m,
                    q,
                    |_| {
                        let k = slot;
                        slot += 1;
                        let c = match centers.get(k % centers.len().max(1)) {
                            Some(&[x, y]) if !centers.is_empty() => C64::new(x, y),
                            _ => rand_point(&mut rng, 0.5),
                        };
                        let w = if widths.is_empty() {
                            rng.gen_range(0.6..1.0)
                        } else {
                            widths[k % widths.len()]
                        };
                        ExpPoly::gaussian(c, w)
                    },
                    one,
                );
                out.push(CorpusMember::new(format!("gauss-q{q}"), "gaussian-bump", f));
            }
        }
        CorpusFamily::Oscillatory { frequencies } => {
            if frequencies.is_empty() || frequencies.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                return Err(DbpError::Config("oscillatory frequencies must be finite and non-negative".into()));
            }
            for (k, &omega) in frequencies.iter().enumerate() {
                for &q in &degrees {
                    let mut thetas = Vec::new();
                    for _ in 0..m * MultiIndex::all_of_degree(m, q).len() {
                        thetas.push(rng.gen_range(0.0..2.0 * PI));
                    }
                    let mut it = thetas.into_iter();
                    let f = form_of_degree(m, q, |_| ExpPoly::plane_wave(omega, it.next().unwrap_or(0.0)), one);
                    out.push(CorpusMember::new(format!("osc{k}-q{q}"), "oscillatory", f));
                }
            }
        }
        CorpusFamily::DbarPotential { potentials } => {
            let list = if potentials.is_empty() {
                standard_potentials(m, spec.seed)?
            } else {
                potentials.clone()
            };
            for (k, p) in list.into_iter().enumerate() {
                if p.m() != m {
                    return Err(DbpError::Config(format!("potential {k} has m = {}, expected {m}", p.m())));
                }
                let member = CorpusMember::from_potential(format!("pot{k}"), p);
                if member.form.is_zero() {
                    return Err(DbpError::Config(format!("potential {k} is holomorphic; its ∂̄ vanishes")));
                }
                if member.form.degrees().iter().any(|q| !degrees.contains(q)) {
                    continue;
                }
                out.push(member);
            }
        }
    }
    Ok(out)
}

/// Twelve smooth members over form degrees `0..=m` and four function
/// families, each degree drawing on several families.
pub fn smooth_corpus(m: usize, seed: u64) -> Result<Vec<CorpusMember>> {
    if m == 0 {
        return Err(DbpError::Config("corpus needs at least one factor".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(12);
    for k in 0..12 {
        let q = (k + k / 4) % (m + 1);
        let kind = k % 4;
        let f = match kind {
            0 => form_of_degree(m, q, |_| random_polynomial(&mut rng, 3), one),
            1 => form_of_degree(m, q, |_| random_gaussian(&mut rng), one),
            2 => {
                let omega = rng.gen_range(1.0..2.5);
                form_of_degree(m, q, |_| random_wave(&mut rng, omega), one)
            }
            _ => form_of_degree(
                m,
                q,
                |_| {
                    let g = random_gaussian(&mut rng);
                    let w = random_wave(&mut rng, 1.0);
                    let p = random_polynomial(&mut rng, 1);
                    g.mul(&w).mul(&p)
                },
                one,
            ),
        };
        let family = ["polynomial", "gaussian-bump", "oscillatory", "mixed"][kind];
        out.push(CorpusMember::new(format!("s{k:02}-{family}-q{q}"), family, f));
    }
    Ok(out)
}

/// Six non-holomorphic functions `F`.
pub fn standard_potentials(m: usize, seed: u64) -> Result<Vec<SymbolicForm>> {
    if m == 0 {
        return Err(DbpError::Config("corpus needs at least one factor".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_f00d);
    let product = |factors: Vec<ExpPoly>| SymbolicForm::function(m, vec![SymTerm::new(one(), factors)]);
    let mut out = Vec::with_capacity(6);
    out.push(product(vec![ExpPoly::zbar(); m])?);
    out.push(product((0..m).map(|_| random_gaussian(&mut rng)).collect())?);
    out.push(product((0..m).map(|_| random_wave(&mut rng, 1.5)).collect())?);
    let mixed: Vec<ExpPoly> = (0..m)
        .map(|j| {
            if j == 0 {
                ExpPoly::polynomial([(1, 1, one())])
            } else {
                ExpPoly::exp_z(C64::new(0.5, 0.5))
            }
        })
        .collect();
    out.push(product(mixed)?);
    out.push(product((0..m).map(|_| random_polynomial(&mut rng, 3)).collect())?);
    out.push(product(
        (0..m)
            .map(|_| random_gaussian(&mut rng).mul(&random_polynomial(&mut rng, 2)))
            .collect(),
    )?);
    Ok(out)
}

/// Closed forms of degree ≥ 2 from degree-1 potentials (empty when `m < 2`).
pub fn higher_potentials(m: usize, seed: u64) -> Result<Vec<SymbolicForm>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0dd_ba11);
    let mut out = Vec::new();
    if m < 2 {
        return Ok(out);
    }
    for _ in 0..2 {
        let f = form_of_degree(m, 1, |_| random_gaussian(&mut rng).mul(&random_polynomial(&mut rng, 1)), one);
        out.push(f);
    }
    Ok(out)
}

/// `∂̄`-closed members from [`standard_potentials`] and [`higher_potentials`].
pub fn closed_corpus(m: usize, seed: u64) -> Result<Vec<CorpusMember>> {
    let mut out = Vec::new();
    for (k, p) in standard_potentials(m, seed)?.into_iter().enumerate() {
        out.push(CorpusMember::from_potential(format!("pot{k}"), p));
    }
    for (k, p) in higher_potentials(m, seed)?.into_iter().enumerate() {
        out.push(CorpusMember::from_potential(format!("pot1-{k}"), p));
    }
    Ok(out)
}

/// `Π_j exp(iω x_j)`, the oscillating function used as a rough member.
pub fn plane_wave_member(m: usize, omega: f64) -> CorpusMember {
    let f = SymbolicForm::function(m, vec![SymTerm::new(one(), vec![ExpPoly::plane_wave(omega, 0.0); m])])
        .expect("m factors");
    CorpusMember::new(format!("wave-{omega:.3}"), "oscillatory", f)
}

/// Plane wave at a quarter of the grid Nyquist frequency `π/h`.
pub fn rough_member(m: usize, h: f64) -> CorpusMember {
    let mut c = plane_wave_member(m, PI / h / 4.0);
    c.id = "rough-nyquist4".to_string();
    c
}

/// `1, z, z², Σ_{k≤12} z^k/k!` in one variable.
pub fn holomorphic_fixtures() -> Vec<(String, ExpPoly)> {
    let mut fact = 1.0;
    let mut taylor = Vec::new();
    for k in 0..=12u32 {
        if k > 0 {
            fact *= k as f64;
        }
        taylor.push((k, 0, C64::new(1.0 / fact, 0.0)));
    }
    vec![
        ("one".into(), ExpPoly::one()),
        ("z".into(), ExpPoly::z()),
        ("z^2".into(), ExpPoly::polynomial([(2, 0, one())])),
        ("exp-z-taylor12".into(), ExpPoly::polynomial(taylor)),
    ]
}

pub fn corpus_file(spec: &CorpusSpec, m: usize) -> Result<CorpusFile> {
    Ok(CorpusFile {
        schema: CORPUS_SCHEMA.to_string(),
        m,
        spec: spec.clone(),
        members: generate_corpus(spec, m)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_degree_zero_gives_constant_forms() {
        let spec = CorpusSpec {
            family: CorpusFamily::Polynomial { degree: 0 },
            seed: 1,
            degrees: None,
        };
        let c = generate_corpus(&spec, 2).unwrap();
        let idx: Vec<Vec<usize>> = c
            .iter()
            .map(|mm| mm.form.components().keys().next().unwrap().indices())
            .collect();
        assert_eq!(idx, vec![vec![], vec![0], vec![1], vec![0, 1]]);
        assert!(c.iter().all(|mm| mm.closed));
    }

    #[test]
    fn zbar_product_potential() {
        let f = &closed_corpus(2, 0).unwrap()[0];
        let z = [C64::new(0.3, 0.2), C64::new(-0.1, 0.4)];
        assert!((f.form.eval(MultiIndex::single(0), &z) - z[1].conj()).norm() < 1e-15);
        assert!((f.form.eval(MultiIndex::single(1), &z) - z[0].conj()).norm() < 1e-15);
        assert!(f.closed && f.dbar.is_zero());
    }

    #[test]
    fn seeded_generation_is_reproducible() {
        let spec = CorpusSpec {
            family: CorpusFamily::Polynomial { degree: 3 },
            seed: 7,
            degrees: None,
        };
        let a = serde_json::to_string(&corpus_file(&spec, 3).unwrap()).unwrap();
        let b = serde_json::to_string(&corpus_file(&spec, 3).unwrap()).unwrap();
        assert_eq!(a, b);
        let other = CorpusSpec { seed: 8, ..spec };
        assert_ne!(a, serde_json::to_string(&corpus_file(&other, 3).unwrap()).unwrap());
    }

    #[test]
    fn degree_above_m_is_a_config_error() {
        let spec = CorpusSpec {
            family: CorpusFamily::GaussianBump { centers: vec![], widths: vec![] },
            seed: 0,
            degrees: Some(vec![3]),
        };
        assert!(matches!(generate_corpus(&spec, 2), Err(DbpError::Config(_))));
    }

    #[test]
    fn smooth_corpus_covers_all_degrees() {
        for m in 1..=3 {
            let c = smooth_corpus(m, 0).unwrap();
            assert_eq!(c.len(), 12);
            let mut seen: Vec<usize> = c.iter().flat_map(|mm| mm.degrees()).collect();
            seen.sort_unstable();
            seen.dedup();
            assert_eq!(seen, (0..=m).collect::<Vec<_>>());
        }
    }

    #[test]
    fn closed_corpus_is_closed() {
        for m in 1..=3 {
            let c = closed_corpus(m, 3).unwrap();
            assert!(c.len() >= 6);
            assert!(c.iter().all(|mm| mm.closed && !mm.form.is_zero()));
        }
    }

    #[test]
    fn corpus_file_round_trips() {
        let spec = CorpusSpec {
            family: CorpusFamily::DbarPotential { potentials: vec![] },
            seed: 2,
            degrees: None,
        };
        let f = corpus_file(&spec, 2).unwrap();
        let s = serde_json::to_string(&f).unwrap();
        let g: CorpusFile = serde_json::from_str(&s).unwrap();
        assert_eq!(f, g);
    }
}
