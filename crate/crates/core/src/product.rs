//! Product-domain operators built from planar factor pairs.
//!
//! With the factors taken in composition order `σ_1, …, σ_m`,
//!
//! ```text
//! 𝓟 = P_{σ1} ⋯ P_{σm}
//! 𝓗 = H_{σ1} + P_{σ1} H_{σ2} + ⋯ + P_{σ1} ⋯ P_{σm−1} H_{σm}
//! ```
//!
//! where each factor operator acts slicewise. `H_j` consumes `dz̄_j` after
//! moving it to the front of `dz̄^I`; `P_j` acts on components free of
//! `dz̄_j` and annihilates the others. For a component `f_I dz̄^I` only the
//! term whose `H` factor is the first element of `I` in composition order
//! survives, which gives the evaluator in [`ComposedOperators::homotopy`].
//! [`ComposedOperators::homotopy_recursive`] evaluates the left-associated
//! pairwise recursion `𝓗^{U×V} = 𝓗^U + 𝓟^U 𝓗^V` instead.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::{PlanarDomain, ProductDomain};
use crate::error::{DbpError, Result};
use crate::field::FactorField;
use crate::form::FormField;
use crate::multi_index::MultiIndex;
use crate::planar::{CauchyKernelTable, ExtensionKind, PlanarCauchy};
use crate::sobolev;

/// A planar factor's homotopy pair.
pub trait FactorOperators: Send + Sync {
    fn domain(&self) -> &Arc<PlanarDomain>;
    /// `H₁`: the `dz̄`-coefficient solver.
    fn solve(&self, g: &FactorField) -> Result<FactorField>;
    /// `P = id − H₁∂̄`.
    fn project(&self, g: &FactorField) -> Result<FactorField>;
    fn provenance(&self) -> String;
}

impl FactorOperators for PlanarCauchy {
    fn domain(&self) -> &Arc<PlanarDomain> {
        PlanarCauchy::domain(self)
    }

    fn solve(&self, g: &FactorField) -> Result<FactorField> {
        self.cauchy_transform(g)
    }

    fn project(&self, g: &FactorField) -> Result<FactorField> {
        self.skew_bergman(g)
    }

    fn provenance(&self) -> String {
        PlanarCauchy::provenance(self)
    }
}

/// What a slicewise factor-`j` operator does with `dz̄_j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GeneratorAction {
    /// Acts on every component, indices unchanged.
    Preserve,
    /// Acts on components containing `j`, removing `dz̄_j` from the front.
    Consume,
    /// Acts on components without `j`; the others map to zero.
    RequireAbsent,
}

/// Applies a factor-`j` scalar operator along every slice of every
/// component, with the wedge bookkeeping given by `action`.
pub fn apply_slicewise<F>(f: &FormField, j: usize, action: GeneratorAction, op: F) -> Result<FormField>
where
    F: Fn(&FactorField) -> Result<FactorField> + Sync,
{
    if j >= f.m() {
        return Err(DbpError::FactorOutOfRange { index: j, m: f.m() });
    }
    let dims = f.domain().factor(j).dims();
    for c in f.components().values() {
        if c.dims()[j] != dims {
            return Err(DbpError::ShapeMismatch {
                expected: vec![dims.0, dims.1],
                got: vec![c.dims()[j].0, c.dims()[j].1],
            });
        }
    }
    // shapes are checked above, so the operator only fails on internal bugs
    let op = |a: &FactorField| op(a).expect("factor operator on checked dims");
    let out = match action {
        GeneratorAction::Preserve => f.map_components(j, op, |i| Some((i, 1.0))),
        GeneratorAction::Consume => f.map_components(j, op, |i| i.extract_front(j)),
        GeneratorAction::RequireAbsent => {
            f.map_components(j, op, |i| (!i.contains(j)).then_some((i, 1.0)))
        }
    };
    Ok(out)
}

/// Left-associated composition of factor pairs in a chosen factor order.
#[derive(Clone)]
pub struct ComposedOperators {
    domain: Arc<ProductDomain>,
    /// `(factor index, operators)` in composition order.
    chain: Vec<(usize, Arc<dyn FactorOperators>)>,
}

impl std::fmt::Debug for ComposedOperators {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ComposedOperators")
            .field("order", &self.order())
            .field("factors", &self.provenance())
            .finish()
    }
}

impl ComposedOperators {
    /// Base case: a single factor.
    pub fn single(
        domain: Arc<ProductDomain>,
        j: usize,
        ops: Arc<dyn FactorOperators>,
    ) -> Result<Self> {
        let base = ComposedOperators {
            domain,
            chain: Vec::new(),
        };
        base.compose_pair(j, ops)
    }

    /// `(𝓗, 𝓟)` for `U × V` from those of `U` (self) and a factor pair `V`.
    pub fn compose_pair(&self, j: usize, ops: Arc<dyn FactorOperators>) -> Result<Self> {
        let m = self.domain.m();
        if j >= m {
            return Err(DbpError::FactorOutOfRange { index: j, m });
        }
        if self.chain.iter().any(|(k, _)| *k == j) {
            return Err(DbpError::Config(format!(
                "factor {} composed twice",
                j + 1
            )));
        }
        let want = self.domain.factor(j);
        let have = ops.domain();
        if want.dims() != have.dims() || want.grid() != have.grid() {
            return Err(DbpError::ShapeMismatch {
                expected: vec![want.n(), want.n()],
                got: vec![have.n(), have.n()],
            });
        }
        let mut chain = self.chain.clone();
        chain.push((j, ops));
        Ok(ComposedOperators {
            domain: self.domain.clone(),
            chain,
        })
    }

    /// Planar Cauchy operators on every factor, composed in `order`
    /// (0-based factor indices; identity order if `None`).
    pub fn planar(
        domain: Arc<ProductDomain>,
        kind: ExtensionKind,
        order: Option<&[usize]>,
    ) -> Result<Self> {
        Self::planar_with_tables(domain, kind, order, &CauchyKernelTable::for_grid)
    }

    /// As [`ComposedOperators::planar`], obtaining each distinct kernel table
    /// from `table(h, n)` (e.g. an on-disk cache).
    pub fn planar_with_tables(
        domain: Arc<ProductDomain>,
        kind: ExtensionKind,
        order: Option<&[usize]>,
        table: &dyn Fn(f64, usize) -> Result<CauchyKernelTable>,
    ) -> Result<Self> {
        let m = domain.m();
        let order: Vec<usize> = match order {
            Some(o) => o.to_vec(),
            None => (0..m).collect(),
        };
        let mut sorted = order.clone();
        sorted.sort_unstable();
        if sorted != (0..m).collect::<Vec<_>>() {
            return Err(DbpError::Config(format!(
                "factor order {:?} is not a permutation of 1..={m}",
                order.iter().map(|j| j + 1).collect::<Vec<_>>()
            )));
        }
        // factors sharing a domain share operators; equal grids share tables
        let mut by_domain: Vec<(Arc<PlanarDomain>, Arc<dyn FactorOperators>)> = Vec::new();
        let mut tables: HashMap<(u64, usize), Arc<CauchyKernelTable>> = HashMap::new();
        let mut per_factor: Vec<Arc<dyn FactorOperators>> = Vec::with_capacity(m);
        for d in domain.factors() {
            if let Some((_, ops)) = by_domain.iter().find(|(e, _)| Arc::ptr_eq(e, d)) {
                per_factor.push(ops.clone());
                continue;
            }
            let key = (d.h().to_bits(), d.n());
            let table = match tables.get(&key) {
                Some(t) => t.clone(),
                None => {
                    let t = Arc::new(table(d.h(), d.n())?);
                    tables.insert(key, t.clone());
                    t
                }
            };
            let ops: Arc<dyn FactorOperators> =
                Arc::new(PlanarCauchy::with_table(d.clone(), kind, table)?);
            by_domain.push((d.clone(), ops.clone()));
            per_factor.push(ops);
        }
        let mut out = ComposedOperators {
            domain: domain.clone(),
            chain: Vec::new(),
        };
        for j in order {
            out = out.compose_pair(j, per_factor[j].clone())?;
        }
        Ok(out)
    }

    pub fn domain(&self) -> &Arc<ProductDomain> {
        &self.domain
    }

    /// Factor indices in composition order.
    pub fn order(&self) -> Vec<usize> {
        self.chain.iter().map(|(j, _)| *j).collect()
    }

    pub fn factor_operators(&self, j: usize) -> Option<&Arc<dyn FactorOperators>> {
        self.chain.iter().find(|(k, _)| *k == j).map(|(_, o)| o)
    }

    pub fn provenance(&self) -> Vec<String> {
        self.chain
            .iter()
            .map(|(j, o)| format!("{}: {}", j + 1, o.provenance()))
            .collect()
    }

    /// The first `len` factors of the chain, as operators on the same domain.
    pub fn prefix(&self, len: usize) -> ComposedOperators {
        ComposedOperators {
            domain: self.domain.clone(),
            chain: self.chain[..len.min(self.chain.len())].to_vec(),
        }
    }

    /// Set of composed factors.
    pub fn factor_set(&self) -> MultiIndex {
        self.chain
            .iter()
            .fold(MultiIndex::EMPTY, |acc, (j, _)| MultiIndex::from_bits(acc.bits() | (1 << j)))
    }

    fn check(&self, f: &FormField) -> Result<()> {
        if !self.domain.same_grids(f.domain()) {
            return Err(DbpError::ShapeMismatch {
                expected: self.domain.factors().iter().map(|d| d.n()).collect(),
                got: f.domain().factors().iter().map(|d| d.n()).collect(),
            });
        }
        Ok(())
    }

    fn h_step(&self, f: &FormField, pos: usize) -> Result<FormField> {
        let (j, ops) = &self.chain[pos];
        apply_slicewise(f, *j, GeneratorAction::Consume, |a| ops.solve(a))
    }

    fn p_step(&self, f: &FormField, pos: usize) -> Result<FormField> {
        let (j, ops) = &self.chain[pos];
        apply_slicewise(f, *j, GeneratorAction::RequireAbsent, |a| ops.project(a))
    }

    /// `𝓟 f`. Components carrying any composed `dz̄_j` map to zero, so on
    /// the full chain only the degree-0 part survives.
    pub fn projection(&self, f: &FormField) -> Result<FormField> {
        self.check(f)?;
        let mut out = f.clone();
        for pos in 0..self.chain.len() {
            out = self.p_step(&out, pos)?;
        }
        Ok(out)
    }

    /// `𝓗 f` by the first-generator expansion.
    pub fn homotopy(&self, f: &FormField) -> Result<FormField> {
        self.check(f)?;
        let mut out = FormField::zero(self.domain.clone());
        for pos in 0..self.chain.len() {
            let j = self.chain[pos].0;
            let earlier = self.prefix(pos).factor_set();
            // components whose first generator in composition order is j
            let part = f.filter(|i| i.contains(j) && (i.bits() & earlier.bits()) == 0);
            if part.is_zero() {
                continue;
            }
            let mut g = self.h_step(&part, pos)?;
            for q in 0..pos {
                g = self.p_step(&g, q)?;
            }
            out = out.add(&g);
        }
        Ok(out)
    }

    /// `𝓗 f` by the pairwise recursion `𝓗^{U×V} = 𝓗^U + 𝓟^U 𝓗^V`.
    pub fn homotopy_recursive(&self, f: &FormField) -> Result<FormField> {
        self.check(f)?;
        let len = self.chain.len();
        if len == 0 {
            return Ok(FormField::zero(self.domain.clone()));
        }
        let u = self.prefix(len - 1);
        let hu = u.homotopy_recursive(f)?;
        let hv = self.h_step(f, len - 1)?;
        let mut puhv = hv;
        for pos in 0..len - 1 {
            puhv = u.p_step(&puhv, pos)?;
        }
        Ok(hu.add(&puhv))
    }
}

/// How `∂̄f` inside `𝓗∂̄f` is obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DbarScheme {
    Analytic,
    Fd4,
}

/// Erosion used for every residual.
pub const RESIDUAL_EROSION: usize = 2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreeResidual {
    pub degree: usize,
    pub residual: f64,
    pub reference: f64,
    pub relative: f64,
}

/// Per-degree relative `L²` norms of `f − 𝓟f − ∂̄𝓗f − 𝓗∂̄f`.
///
/// `dbar_f` supplies `∂̄f` (e.g. sampled from an analytic formula); without
/// it the finite-difference `∂̄` is used.
pub fn homotopy_residual(
    ops: &ComposedOperators,
    f: &FormField,
    dbar_f: Option<&FormField>,
) -> Result<Vec<DegreeResidual>> {
    let fd;
    let df = match dbar_f {
        Some(d) => d,
        None => {
            fd = f.dbar();
            &fd
        }
    };
    let pf = ops.projection(f)?;
    let dhf = ops.homotopy(f)?.dbar();
    let hdf = ops.homotopy(df)?;
    let res = f.sub(&pf).sub(&dhf).sub(&hdf).compress();
    let mut degrees = f.degrees();
    for q in res.degrees() {
        if !degrees.contains(&q) {
            degrees.push(q);
        }
    }
    degrees.sort_unstable();
    degrees
        .into_iter()
        .map(|q| {
            let r = sobolev::form_l2_norm(&res.degree_part(q), RESIDUAL_EROSION)?;
            let reference = sobolev::form_l2_norm(&f.degree_part(q), RESIDUAL_EROSION)?;
            Ok(DegreeResidual {
                degree: q,
                residual: r,
                reference,
                relative: if reference > 0.0 { r / reference } else { r },
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnticommutationReport {
    /// `‖∂̄_V 𝓗^U f + 𝓗^U ∂̄_V f‖ / ‖f‖`.
    pub homotopy: f64,
    /// `‖∂̄ 𝓟^U f − 𝓟^U ∂̄ f‖ / ‖f‖`.
    pub projection: f64,
    /// The first residual with the sign flipped; should be O(1).
    pub sign_flipped: f64,
}

/// Checks `∂̄_V 𝓗^U = −𝓗^U ∂̄_V` and `∂̄ 𝓟^U = 𝓟^U ∂̄` with `U` the first
/// `cut` factors of the composition order and `V` the rest.
pub fn anticommutation_check(
    ops: &ComposedOperators,
    f: &FormField,
    cut: usize,
) -> Result<AnticommutationReport> {
    let m = ops.domain().m();
    if cut == 0 || cut >= m {
        return Err(DbpError::Config(format!("cut {cut} must lie in 1..{m}")));
    }
    let u = ops.prefix(cut);
    let v_set = MultiIndex::from_bits(MultiIndex::full(m).bits() & !u.factor_set().bits());
    let scale = sobolev::form_l2_norm(f, RESIDUAL_EROSION)?;
    let rel = |g: &FormField| -> Result<f64> {
        Ok(sobolev::form_l2_norm(&g.compress(), RESIDUAL_EROSION)? / scale)
    };
    let dv_hu = u.homotopy(f)?.dbar_partial(v_set);
    let hu_dv = u.homotopy(&f.dbar_partial(v_set))?;
    let d_pu = u.projection(f)?.dbar();
    let pu_d = u.projection(&f.dbar())?;
    Ok(AnticommutationReport {
        homotopy: rel(&dv_hu.add(&hu_dv))?,
        projection: rel(&d_pu.sub(&pu_d))?,
        sign_flipped: rel(&dv_hu.sub(&hu_dv))?,
    })
}

/// `‖a − b‖ / ‖b‖` in `L²` on the residual mask (both as forms).
pub fn relative_difference(a: &FormField, b: &FormField) -> Result<f64> {
    let d = sobolev::form_l2_norm(&a.sub(b).compress(), RESIDUAL_EROSION)?;
    let n = sobolev::form_l2_norm(b, RESIDUAL_EROSION)?;
    Ok(if n > 0.0 { d / n } else { d })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::SeparatedField;
    use ndarray::Array2;
    use num_complex::Complex64 as C64;

    /// Factor pair with `H = 2·`, `P = 3·` for sign and routing checks.
    struct Scalar(Arc<PlanarDomain>);

    impl FactorOperators for Scalar {
        fn domain(&self) -> &Arc<PlanarDomain> {
            &self.0
        }
        fn solve(&self, g: &FactorField) -> Result<FactorField> {
            Ok(g * C64::new(2.0, 0.0))
        }
        fn project(&self, g: &FactorField) -> Result<FactorField> {
            Ok(g * C64::new(3.0, 0.0))
        }
        fn provenance(&self) -> String {
            "scalar".into()
        }
    }

    fn setup(m: usize) -> (Arc<ProductDomain>, ComposedOperators) {
        let d = Arc::new(ProductDomain::polydisc(m, 8).unwrap());
        let mut ops: Option<ComposedOperators> = None;
        for j in 0..m {
            let pair: Arc<dyn FactorOperators> = Arc::new(Scalar(d.factor(j).clone()));
            ops = Some(match ops {
                None => ComposedOperators::single(d.clone(), j, pair).unwrap(),
                Some(o) => o.compose_pair(j, pair).unwrap(),
            });
        }
        (d, ops.unwrap())
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

    fn value(f: &FormField, i: MultiIndex) -> C64 {
        f.component(i)
            .map(|c| c.value_at(&vec![0; f.m()]))
            .unwrap_or(C64::new(0.0, 0.0))
    }

    #[test]
    fn slicewise_signs() {
        let (d, _) = setup(2);
        let f = FormField::from_component(d.clone(), mi(&[0, 1]), ones(&d)).unwrap();
        let id = |a: &FactorField| Ok(a.clone());
        let h0 = apply_slicewise(&f, 0, GeneratorAction::Consume, id).unwrap();
        assert_eq!(value(&h0, mi(&[1])), C64::new(1.0, 0.0));
        let h1 = apply_slicewise(&f, 1, GeneratorAction::Consume, id).unwrap();
        assert_eq!(value(&h1, mi(&[0])), C64::new(-1.0, 0.0));
        let g = FormField::from_component(d.clone(), mi(&[1]), ones(&d)).unwrap();
        assert!(apply_slicewise(&g, 0, GeneratorAction::Consume, id).unwrap().is_zero());
        let same = apply_slicewise(&g, 0, GeneratorAction::Preserve, id).unwrap();
        assert_eq!(value(&same, mi(&[1])), C64::new(1.0, 0.0));
    }

    #[test]
    fn expansion_weights() {
        // H f for f = dz̄_3 on a tridisc: P1 P2 H3 → 3·3·2
        let (d, ops) = setup(3);
        let f = FormField::from_component(d.clone(), mi(&[2]), ones(&d)).unwrap();
        let h = ops.homotopy(&f).unwrap();
        assert_eq!(value(&h, MultiIndex::EMPTY), C64::new(18.0, 0.0));
        // f = dz̄_2 ∧ dz̄_3: P1 H2 → 3·2 on dz̄_3
        let f = FormField::from_component(d.clone(), mi(&[1, 2]), ones(&d)).unwrap();
        let h = ops.homotopy(&f).unwrap();
        assert_eq!(value(&h, mi(&[2])), C64::new(6.0, 0.0));
        let r = ops.homotopy_recursive(&f).unwrap();
        assert_eq!(value(&r, mi(&[2])), C64::new(6.0, 0.0));
    }

    #[test]
    fn projection_kills_positive_degree() {
        let (d, ops) = setup(2);
        let f = FormField::from_component(d.clone(), mi(&[0]), ones(&d)).unwrap();
        assert!(ops.projection(&f).unwrap().is_zero());
        let g = FormField::function(d.clone(), ones(&d)).unwrap();
        assert_eq!(value(&ops.projection(&g).unwrap(), MultiIndex::EMPTY), C64::new(9.0, 0.0));
    }

    #[test]
    fn degree_zero_input_gives_zero() {
        let (d, ops) = setup(2);
        let g = FormField::function(d.clone(), ones(&d)).unwrap();
        assert!(ops.homotopy(&g).unwrap().is_zero());
    }

    #[test]
    fn reversed_order_uses_other_first_generator() {
        let (d, _) = setup(2);
        let pair = |j: usize| -> Arc<dyn FactorOperators> { Arc::new(Scalar(d.factor(j).clone())) };
        let rev = ComposedOperators::single(d.clone(), 1, pair(1))
            .unwrap()
            .compose_pair(0, pair(0))
            .unwrap();
        assert_eq!(rev.order(), vec![1, 0]);
        // f = dz̄_1 ∧ dz̄_2 with H_2 first: −2 on dz̄_1
        let f = FormField::from_component(d.clone(), mi(&[0, 1]), ones(&d)).unwrap();
        let h = rev.homotopy(&f).unwrap();
        assert_eq!(value(&h, mi(&[0])), C64::new(-2.0, 0.0));
    }

    #[test]
    fn composing_twice_is_rejected() {
        let (d, ops) = setup(2);
        let pair: Arc<dyn FactorOperators> = Arc::new(Scalar(d.factor(0).clone()));
        assert!(ops.compose_pair(0, pair.clone()).is_err());
        assert!(ops.compose_pair(5, pair).is_err());
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let (_, ops) = setup(2);
        let other = Arc::new(PlanarDomain::new(crate::domain::Shape::unit_disk(), 12).unwrap());
        let pair: Arc<dyn FactorOperators> = Arc::new(Scalar(other));
        let partial = ops.prefix(1);
        assert!(matches!(
            partial.compose_pair(1, pair),
            Err(DbpError::ShapeMismatch { .. })
        ));
    }
}
