//! `(0,q)` forms `Σ_I f_I dz̄^I` on product grids.
//!
//! A [`FormField`] may hold components of several degrees at once (the
//! mixed-degree convention). Absent components are identically zero.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64 as C64;

use crate::domain::ProductDomain;
use crate::error::{DbpError, Result};
use crate::fd;
use crate::field::{FactorField, SeparatedField};
use crate::multi_index::MultiIndex;

#[derive(Clone, Debug)]
pub struct FormField {
    domain: Arc<ProductDomain>,
    components: BTreeMap<MultiIndex, SeparatedField>,
}

impl FormField {
    pub fn zero(domain: Arc<ProductDomain>) -> Self {
        FormField {
            domain,
            components: BTreeMap::new(),
        }
    }

    pub fn dims(&self) -> Vec<(usize, usize)> {
        self.domain.factors().iter().map(|d| d.dims()).collect()
    }

    pub fn from_component(
        domain: Arc<ProductDomain>,
        index: MultiIndex,
        field: SeparatedField,
    ) -> Result<Self> {
        let mut f = FormField::zero(domain);
        f.add_component(index, field)?;
        Ok(f)
    }

    /// A function (degree 0 form).
    pub fn function(domain: Arc<ProductDomain>, field: SeparatedField) -> Result<Self> {
        Self::from_component(domain, MultiIndex::EMPTY, field)
    }

    pub fn domain(&self) -> &Arc<ProductDomain> {
        &self.domain
    }

    pub fn m(&self) -> usize {
        self.domain.m()
    }

    pub fn components(&self) -> &BTreeMap<MultiIndex, SeparatedField> {
        &self.components
    }

    pub fn component(&self, index: MultiIndex) -> Option<&SeparatedField> {
        self.components.get(&index)
    }

    pub fn is_zero(&self) -> bool {
        self.components.values().all(|c| c.is_zero())
    }

    /// Adds `field` into component `index`.
    pub fn add_component(&mut self, index: MultiIndex, field: SeparatedField) -> Result<()> {
        if index.iter().any(|j| j >= self.m()) {
            return Err(DbpError::FactorOutOfRange {
                index: index.iter().last().unwrap_or(0),
                m: self.m(),
            });
        }
        if field.dims() != self.dims().as_slice() {
            return Err(DbpError::ShapeMismatch {
                expected: self.dims().iter().flat_map(|&(a, b)| [a, b]).collect(),
                got: field.dims().iter().flat_map(|&(a, b)| [a, b]).collect(),
            });
        }
        if field.is_zero() {
            return Ok(());
        }
        match self.components.get_mut(&index) {
            Some(c) => c.add_assign(&field),
            None => {
                self.components.insert(index, field);
            }
        }
        Ok(())
    }

    fn add_component_unchecked(&mut self, index: MultiIndex, field: SeparatedField) {
        if field.is_zero() {
            return;
        }
        match self.components.get_mut(&index) {
            Some(c) => c.add_assign(&field),
            None => {
                self.components.insert(index, field);
            }
        }
    }

    /// Degrees with at least one nonzero component.
    pub fn degrees(&self) -> Vec<usize> {
        let mut d: Vec<usize> = self
            .components
            .iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, _)| i.len())
            .collect();
        d.dedup();
        d
    }

    /// `Some(q)` if every nonzero component has degree `q`.
    pub fn pure_degree(&self) -> Option<usize> {
        match self.degrees().as_slice() {
            [q] => Some(*q),
            _ => None,
        }
    }

    /// The degree-`q` part.
    pub fn degree_part(&self, q: usize) -> FormField {
        self.filter(|i| i.len() == q)
    }

    pub fn filter(&self, keep: impl Fn(MultiIndex) -> bool) -> FormField {
        FormField {
            domain: self.domain.clone(),
            components: self
                .components
                .iter()
                .filter(|(i, _)| keep(**i))
                .map(|(i, c)| (*i, c.clone()))
                .collect(),
        }
    }

    pub fn add(&self, other: &FormField) -> FormField {
        assert!(
            self.domain.same_grids(&other.domain),
            "forms live on different grids"
        );
        let mut out = self.clone();
        for (i, c) in &other.components {
            out.add_component_unchecked(*i, c.clone());
        }
        out
    }

    pub fn scaled(&self, c: C64) -> FormField {
        FormField {
            domain: self.domain.clone(),
            components: self
                .components
                .iter()
                .map(|(i, f)| (*i, f.scaled(c)))
                .collect(),
        }
    }

    pub fn sub(&self, other: &FormField) -> FormField {
        self.add(&other.scaled(C64::new(-1.0, 0.0)))
    }

    pub fn compress(&self) -> FormField {
        FormField {
            domain: self.domain.clone(),
            components: self
                .components
                .iter()
                .map(|(i, f)| (*i, f.compress()))
                .filter(|(_, f)| !f.is_zero())
                .collect(),
        }
    }

    /// Applies a factor-`j` scalar operator to selected components, rewriting
    /// their multi-indices. `route(I)` returns the target index and sign, or
    /// `None` to drop the component.
    pub fn map_components<F, R>(&self, j: usize, op: F, route: R) -> FormField
    where
        F: Fn(&FactorField) -> FactorField + Sync,
        R: Fn(MultiIndex) -> Option<(MultiIndex, f64)>,
    {
        let mut out = FormField::zero(self.domain.clone());
        for (i, c) in &self.components {
            if let Some((target, sign)) = route(*i) {
                let mapped = c.map_factor(j, &op);
                out.add_component_unchecked(target, mapped.scaled(C64::new(sign, 0.0)));
            }
        }
        out
    }

    /// `π_{j,k}`: components with `j` generators among factors `< cut` and `k`
    /// among factors `≥ cut`.
    pub fn project_degree(&self, j: usize, k: usize, cut: usize) -> FormField {
        self.filter(|i| i.split_counts(cut) == (j, k))
    }

    /// Fourth-order finite-difference `∂̄ = Σ_j dz̄_j ∂/∂z̄_j`.
    pub fn dbar(&self) -> FormField {
        self.dbar_partial(MultiIndex::full(self.m()))
    }

    /// `Σ_{j ∈ S} dz̄_j ∂/∂z̄_j`.
    pub fn dbar_partial(&self, subset: MultiIndex) -> FormField {
        let mut out = FormField::zero(self.domain.clone());
        for j in subset.iter().filter(|&j| j < self.m()) {
            let dom = self.domain.factor(j).clone();
            let part = self.map_components(
                j,
                move |a| fd::dbar(dom.plan(), a, dom.h()),
                |i| i.wedge_insert(j).ok(),
            );
            out = out.add(&part);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::ProductDomain;
    use ndarray::Array2;

    fn bidisc() -> Arc<ProductDomain> {
        Arc::new(ProductDomain::polydisc(2, 16).unwrap())
    }

    fn ones(d: &ProductDomain) -> SeparatedField {
        SeparatedField::from_factors(
            d.factors()
                .iter()
                .map(|f| Array2::from_elem(f.dims(), C64::new(1.0, 0.0)))
                .collect(),
        )
    }

    fn mi(v: &[usize]) -> MultiIndex {
        MultiIndex::from_slice(v).unwrap()
    }

    #[test]
    fn projection_examples() {
        let d = bidisc();
        let mut f = FormField::zero(d.clone());
        f.add_component(mi(&[0]), ones(&d)).unwrap();
        f.add_component(mi(&[1]), ones(&d)).unwrap();
        let p10 = f.project_degree(1, 0, 1);
        assert_eq!(p10.components().keys().copied().collect::<Vec<_>>(), vec![mi(&[0])]);
        let p01 = f.project_degree(0, 1, 1);
        assert_eq!(p01.components().keys().copied().collect::<Vec<_>>(), vec![mi(&[1])]);
        assert!(f.project_degree(2, 0, 1).is_zero());
        let sum = p10.add(&p01);
        assert_eq!(
            sum.components().keys().collect::<Vec<_>>(),
            f.components().keys().collect::<Vec<_>>()
        );
    }

    #[test]
    fn dbar_of_top_degree_is_zero() {
        let d = bidisc();
        let f = FormField::from_component(d.clone(), mi(&[0, 1]), ones(&d)).unwrap();
        assert!(f.dbar().is_zero());
    }

    #[test]
    fn dbar_sign_of_second_generator() {
        // ∂̄(z̄2 dz̄1) = dz̄2∧dz̄1 = −dz̄1∧dz̄2
        let d = bidisc();
        let g0 = Array2::from_elem(d.factor(0).dims(), C64::new(1.0, 0.0));
        let g1 = d.factor(1).grid().sample(|z| z.conj());
        let f = FormField::from_component(
            d.clone(),
            mi(&[0]),
            SeparatedField::from_factors(vec![g0, g1]),
        )
        .unwrap();
        let df = f.dbar();
        assert_eq!(df.components().len(), 1);
        let c = df.component(mi(&[0, 1])).unwrap();
        let mask = d.factor(0).mask();
        let flat0 = mask.iter().position(|&b| b).unwrap();
        let flat1 = mask.iter().position(|&b| b).unwrap();
        let v = c.value_at(&[flat0, flat1]);
        assert!((v - C64::new(-1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn dbar_partial_splits_linearly() {
        let d = bidisc();
        let g0 = d.factor(0).grid().sample(|z| z.conj() * z);
        let g1 = d.factor(1).grid().sample(|z| z.conj());
        let f = FormField::function(d.clone(), SeparatedField::from_factors(vec![g0, g1])).unwrap();
        assert!(f.dbar_partial(MultiIndex::EMPTY).is_zero());
        let a = f.dbar_partial(mi(&[0]));
        let b = f.dbar_partial(mi(&[1]));
        let full = f.dbar();
        let diff = full.sub(&a.add(&b)).compress();
        assert!(diff.is_zero());
    }

    #[test]
    fn rejects_out_of_range_index() {
        let d = bidisc();
        let mut f = FormField::zero(d.clone());
        assert!(f.add_component(mi(&[2]), ones(&d)).is_err());
    }
}
