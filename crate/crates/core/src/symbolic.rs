//! Closed-form test forms with exact `∂̄`.
//!
//! Factor functions are exp-polynomials
//! `P(z, z̄) · exp(e₀ + αz + βz̄ + γ z z̄)`, a class closed under `∂/∂z̄` and
//! `∂/∂z`. A [`SymbolicForm`] is a sum of separated products of these.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::domain::ProductDomain;
use crate::error::{DbpError, Result};
use crate::field::{FactorField, SeparatedField, Term};
use crate::form::FormField;
use crate::multi_index::MultiIndex;

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpPoly {
    /// `(a, b, c)`: `c · z^a z̄^b`, sorted by `(a, b)`, no zero `c`.
    pub poly: Vec<(u32, u32, C64)>,
    pub e0: C64,
    pub alpha: C64,
    pub beta: C64,
    pub gamma: C64,
}

impl ExpPoly {
    pub fn polynomial(coeffs: impl IntoIterator<Item = (u32, u32, C64)>) -> Self {
        ExpPoly {
            poly: normalise(coeffs),
            e0: zero(),
            alpha: zero(),
            beta: zero(),
            gamma: zero(),
        }
    }

    pub fn constant(c: C64) -> Self {
        Self::polynomial([(0, 0, c)])
    }

    pub fn one() -> Self {
        Self::constant(C64::new(1.0, 0.0))
    }

    pub fn z() -> Self {
        Self::polynomial([(1, 0, C64::new(1.0, 0.0))])
    }

    pub fn zbar() -> Self {
        Self::polynomial([(0, 1, C64::new(1.0, 0.0))])
    }

    /// `exp(−|z − c|²/w²)`.
    pub fn gaussian(c: C64, w: f64) -> Self {
        let s = 1.0 / (w * w);
        ExpPoly {
            poly: vec![(0, 0, C64::new(1.0, 0.0))],
            e0: C64::new(-c.norm_sqr() * s, 0.0),
            alpha: c.conj() * s,
            beta: c * s,
            gamma: C64::new(-s, 0.0),
        }
    }

    /// `exp(i ω Re(z e^{−iθ}))`, a plane wave of frequency `ω`.
    pub fn plane_wave(omega: f64, theta: f64) -> Self {
        let i = C64::i();
        ExpPoly {
            poly: vec![(0, 0, C64::new(1.0, 0.0))],
            e0: zero(),
            alpha: i * omega * 0.5 * C64::from_polar(1.0, -theta),
            beta: i * omega * 0.5 * C64::from_polar(1.0, theta),
            gamma: zero(),
        }
    }

    /// `exp(α z)`.
    pub fn exp_z(alpha: C64) -> Self {
        ExpPoly {
            poly: vec![(0, 0, C64::new(1.0, 0.0))],
            e0: zero(),
            alpha,
            beta: zero(),
            gamma: zero(),
        }
    }

    pub fn with_poly(&self, poly: Vec<(u32, u32, C64)>) -> Self {
        ExpPoly {
            poly: normalise(poly),
            ..self.clone()
        }
    }

    pub fn is_zero(&self) -> bool {
        self.poly.is_empty()
    }

    pub fn eval(&self, z: C64) -> C64 {
        let zb = z.conj();
        let p: C64 = self
            .poly
            .iter()
            .map(|&(a, b, c)| c * z.powu(a) * zb.powu(b))
            .sum();
        if self.e0 == zero() && self.alpha == zero() && self.beta == zero() && self.gamma == zero()
        {
            return p;
        }
        p * (self.e0 + self.alpha * z + self.beta * zb + self.gamma * z * zb).exp()
    }

    /// Holomorphic in `z` (no `z̄` dependence).
    pub fn is_holomorphic(&self) -> bool {
        self.beta == zero() && self.gamma == zero() && self.poly.iter().all(|&(_, b, _)| b == 0)
    }

    /// `∂/∂z̄`: `(∂_z̄ P + P(β + γz)) · E`.
    pub fn dzbar(&self) -> Self {
        let mut terms = Vec::new();
        for &(a, b, c) in &self.poly {
            if b > 0 {
                terms.push((a, b - 1, c * b as f64));
            }
            terms.push((a, b, c * self.beta));
            terms.push((a + 1, b, c * self.gamma));
        }
        self.with_poly(terms)
    }

    /// `∂/∂z`: `(∂_z P + P(α + γz̄)) · E`.
    pub fn dz(&self) -> Self {
        let mut terms = Vec::new();
        for &(a, b, c) in &self.poly {
            if a > 0 {
                terms.push((a - 1, b, c * a as f64));
            }
            terms.push((a, b, c * self.alpha));
            terms.push((a, b + 1, c * self.gamma));
        }
        self.with_poly(terms)
    }

    /// Pointwise product.
    pub fn mul(&self, other: &ExpPoly) -> Self {
        let mut terms = Vec::new();
        for &(a, b, c) in &self.poly {
            for &(a2, b2, c2) in &other.poly {
                terms.push((a + a2, b + b2, c * c2));
            }
        }
        ExpPoly {
            poly: normalise(terms),
            e0: self.e0 + other.e0,
            alpha: self.alpha + other.alpha,
            beta: self.beta + other.beta,
            gamma: self.gamma + other.gamma,
        }
    }

    fn exp_key(&self) -> [u64; 8] {
        [
            self.e0.re.to_bits(),
            self.e0.im.to_bits(),
            self.alpha.re.to_bits(),
            self.alpha.im.to_bits(),
            self.beta.re.to_bits(),
            self.beta.im.to_bits(),
            self.gamma.re.to_bits(),
            self.gamma.im.to_bits(),
        ]
    }

    /// Exact structural key.
    fn key(&self) -> Vec<u64> {
        let mut k: Vec<u64> = self.exp_key().to_vec();
        for &(a, b, c) in &self.poly {
            k.extend([a as u64, b as u64, c.re.to_bits(), c.im.to_bits()]);
        }
        k
    }
}

fn normalise(coeffs: impl IntoIterator<Item = (u32, u32, C64)>) -> Vec<(u32, u32, C64)> {
    let mut map: BTreeMap<(u32, u32), C64> = BTreeMap::new();
    for (a, b, c) in coeffs {
        *map.entry((a, b)).or_insert_with(zero) += c;
    }
    map.into_iter()
        .filter(|(_, c)| *c != zero())
        .map(|((a, b), c)| (a, b, c))
        .collect()
}

/// `coeff · Π_j factors[j](z_j)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymTerm {
    pub coeff: C64,
    pub factors: Vec<ExpPoly>,
}

impl SymTerm {
    pub fn new(coeff: C64, factors: Vec<ExpPoly>) -> Self {
        SymTerm { coeff, factors }
    }

    pub fn eval(&self, z: &[C64]) -> C64 {
        self.factors
            .iter()
            .zip(z)
            .fold(self.coeff, |acc, (f, &zj)| acc * f.eval(zj))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymComponent {
    /// 1-based factor indices, strictly increasing.
    pub index: Vec<usize>,
    pub terms: Vec<SymTerm>,
}

/// A `(0,q)` form with closed-form components (any mix of degrees).
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolicForm {
    m: usize,
    components: BTreeMap<MultiIndex, Vec<SymTerm>>,
}

impl SymbolicForm {
    pub fn zero(m: usize) -> Self {
        SymbolicForm {
            m,
            components: BTreeMap::new(),
        }
    }

    pub fn function(m: usize, terms: Vec<SymTerm>) -> Result<Self> {
        let mut f = Self::zero(m);
        for t in terms {
            f.push(MultiIndex::EMPTY, t)?;
        }
        Ok(f)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn components(&self) -> &BTreeMap<MultiIndex, Vec<SymTerm>> {
        &self.components
    }

    pub fn push(&mut self, index: MultiIndex, term: SymTerm) -> Result<()> {
        if let Some(j) = index.iter().find(|&j| j >= self.m) {
            return Err(DbpError::FactorOutOfRange { index: j, m: self.m });
        }
        if term.factors.len() != self.m {
            return Err(DbpError::ShapeMismatch {
                expected: vec![self.m],
                got: vec![term.factors.len()],
            });
        }
        self.components.entry(index).or_default().push(term);
        Ok(())
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d: Vec<usize> = self.components.keys().map(|i| i.len()).collect();
        d.sort_unstable();
        d.dedup();
        d
    }

    pub fn is_zero(&self) -> bool {
        self.components.values().all(|t| t.is_empty())
    }

    /// Merges terms with identical factors and drops zero terms.
    pub fn simplify(&self) -> Self {
        let mut out = Self::zero(self.m);
        for (i, terms) in &self.components {
            let mut order: Vec<Vec<u64>> = Vec::new();
            let mut merged: HashMap<Vec<u64>, SymTerm> = HashMap::new();
            for t in terms {
                if t.coeff == zero() || t.factors.iter().any(|f| f.is_zero()) {
                    continue;
                }
                let key: Vec<u64> = t.factors.iter().flat_map(|f| {
                    let mut k = f.key();
                    k.push(u64::MAX);
                    k
                }).collect();
                match merged.get_mut(&key) {
                    Some(e) => e.coeff += t.coeff,
                    None => {
                        order.push(key.clone());
                        merged.insert(key, t.clone());
                    }
                }
            }
            let kept: Vec<SymTerm> = order
                .into_iter()
                .map(|k| merged.remove(&k).expect("key"))
                .filter(|t| t.coeff != zero())
                .collect();
            if !kept.is_empty() {
                out.components.insert(*i, kept);
            }
        }
        out
    }

    /// Exact `∂̄_S = Σ_{j∈S} dz̄_j ∂/∂z̄_j`.
    pub fn dbar_partial(&self, subset: MultiIndex) -> Self {
        let mut out = Self::zero(self.m);
        for (i, terms) in &self.components {
            for j in subset.iter().filter(|&j| j < self.m) {
                let Ok((target, sign)) = i.wedge_insert(j) else {
                    continue;
                };
                for t in terms {
                    let mut factors = t.factors.clone();
                    factors[j] = factors[j].dzbar();
                    out.components
                        .entry(target)
                        .or_default()
                        .push(SymTerm::new(t.coeff * sign, factors));
                }
            }
        }
        out.simplify()
    }

    pub fn dbar(&self) -> Self {
        self.dbar_partial(MultiIndex::full(self.m))
    }

    pub fn add(&self, other: &SymbolicForm) -> Self {
        let mut out = self.clone();
        for (i, terms) in &other.components {
            out.components.entry(*i).or_default().extend(terms.iter().cloned());
        }
        out.simplify()
    }

    pub fn scaled(&self, c: C64) -> Self {
        let mut out = self.clone();
        for terms in out.components.values_mut() {
            for t in terms {
                t.coeff *= c;
            }
        }
        out.simplify()
    }

    /// Component value at a point of `ℂ^m`.
    pub fn eval(&self, index: MultiIndex, z: &[C64]) -> C64 {
        self.components
            .get(&index)
            .map(|ts| ts.iter().map(|t| t.eval(z)).sum())
            .unwrap_or_else(zero)
    }

    /// Samples every term on the product grid; equal factor functions share
    /// one array.
    pub fn sample(&self, domain: &Arc<ProductDomain>) -> Result<FormField> {
        if domain.m() != self.m {
            return Err(DbpError::ShapeMismatch {
                expected: vec![self.m],
                got: vec![domain.m()],
            });
        }
        let dims: Vec<(usize, usize)> = domain.factors().iter().map(|d| d.dims()).collect();
        let mut cache: HashMap<(usize, Vec<u64>), Arc<FactorField>> = HashMap::new();
        let mut out = FormField::zero(domain.clone());
        for (i, terms) in &self.components {
            let mut field = SeparatedField::zeros(dims.clone());
            for t in terms {
                let factors = t
                    .factors
                    .iter()
                    .enumerate()
                    .map(|(j, f)| {
                        cache
                            .entry((j, f.key()))
                            .or_insert_with(|| Arc::new(domain.factor(j).grid().sample(|z| f.eval(z))))
                            .clone()
                    })
                    .collect();
                field.push(Term {
                    coeff: t.coeff,
                    factors,
                });
            }
            out.add_component(*i, field)?;
        }
        Ok(out)
    }

    pub fn to_components(&self) -> Vec<SymComponent> {
        self.components
            .iter()
            .map(|(i, t)| SymComponent {
                index: i.iter().map(|j| j + 1).collect(),
                terms: t.clone(),
            })
            .collect()
    }

    pub fn from_components(m: usize, comps: Vec<SymComponent>) -> Result<Self> {
        let mut f = Self::zero(m);
        for c in comps {
            let idx: Vec<usize> = c
                .index
                .iter()
                .map(|&j| {
                    j.checked_sub(1)
                        .ok_or_else(|| DbpError::Config("factor indices are 1-based".into()))
                })
                .collect::<Result<_>>()?;
            let i = MultiIndex::from_slice(&idx)?;
            for t in c.terms {
                f.push(i, t)?;
            }
        }
        Ok(f)
    }
}

impl Serialize for SymbolicForm {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr {
            m: usize,
            components: Vec<SymComponent>,
        }
        Repr {
            m: self.m,
            components: self.to_components(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SymbolicForm {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            m: usize,
            components: Vec<SymComponent>,
        }
        let r = Repr::deserialize(d)?;
        SymbolicForm::from_components(r.m, r.components).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn numeric_dzbar(f: &ExpPoly, z: C64) -> C64 {
        let h = 1e-5;
        let dx = (f.eval(z + h) - f.eval(z - h)) / (2.0 * h);
        let dy = (f.eval(z + C64::i() * h) - f.eval(z - C64::i() * h)) / (2.0 * h);
        0.5 * (dx + C64::i() * dy)
    }

    #[test]
    fn dzbar_matches_finite_differences() {
        let fs = [
            ExpPoly::gaussian(c(0.2, -0.1), 0.7),
            ExpPoly::plane_wave(2.0, 0.4).with_poly(vec![(1, 1, c(1.0, 0.5)), (0, 0, c(0.3, 0.0))]),
            ExpPoly::polynomial([(2, 1, c(1.0, -1.0)), (0, 3, c(0.5, 0.0))]),
        ];
        for f in &fs {
            for z in [c(0.3, 0.2), c(-0.5, 0.1)] {
                let a = f.dzbar().eval(z);
                let b = numeric_dzbar(f, z);
                assert!((a - b).norm() < 1e-8 * (1.0 + b.norm()), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn dz_and_holomorphy() {
        let f = ExpPoly::exp_z(c(1.0, 0.0));
        assert!(f.is_holomorphic());
        assert!(f.dzbar().is_zero());
        let z = c(0.3, 0.4);
        assert!((f.dz().eval(z) - z.exp()).norm() < 1e-14);
        assert!(!ExpPoly::zbar().is_holomorphic());
    }

    #[test]
    fn dbar_of_zbar1_zbar2() {
        let f = SymbolicForm::function(2, vec![SymTerm::new(c(1.0, 0.0), vec![ExpPoly::zbar(), ExpPoly::zbar()])]).unwrap();
        let df = f.dbar();
        let i1 = MultiIndex::single(0);
        let i2 = MultiIndex::single(1);
        let z = [c(0.3, 0.1), c(-0.2, 0.5)];
        assert!((df.eval(i1, &z) - z[1].conj()).norm() < 1e-15);
        assert!((df.eval(i2, &z) - z[0].conj()).norm() < 1e-15);
        assert!(df.dbar().is_zero());
    }

    #[test]
    fn dbar_squared_vanishes_exactly() {
        let g = |s: f64| ExpPoly::gaussian(c(0.1 * s, 0.2), 0.8);
        let f = SymbolicForm::function(
            3,
            vec![
                SymTerm::new(c(1.0, 0.2), vec![g(1.0), ExpPoly::plane_wave(1.5, 0.3), g(-1.0)]),
                SymTerm::new(c(0.0, 1.0), vec![ExpPoly::zbar(), g(2.0), ExpPoly::one()]),
            ],
        )
        .unwrap();
        assert!(f.dbar().dbar().is_zero());
        let mut h = SymbolicForm::zero(3);
        h.push(MultiIndex::single(1), SymTerm::new(c(1.0, 0.0), vec![g(1.0), g(2.0), g(3.0)])).unwrap();
        assert!(h.dbar().dbar().is_zero());
    }

    #[test]
    fn serde_round_trip() {
        let mut f = SymbolicForm::zero(2);
        f.push(MultiIndex::single(1), SymTerm::new(c(2.0, 0.0), vec![ExpPoly::gaussian(c(0.1, 0.0), 0.5), ExpPoly::z()])).unwrap();
        let s = serde_json::to_string(&f).unwrap();
        let g: SymbolicForm = serde_json::from_str(&s).unwrap();
        assert_eq!(f, g);
        assert!(s.contains("\"index\":[2]"));
    }
}
