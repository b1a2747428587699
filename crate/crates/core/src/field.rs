//! Scalar fields on product grids in separated (tensor-product sum) form.
//!
//! A field on `Ω_1 × ⋯ × Ω_m` is stored as `Σ_r c_r · a_{r,1} ⊗ ⋯ ⊗ a_{r,m}`
//! with each `a_{r,j}` a dense array over factor `j`'s bounding-box grid.
//! Operators acting in a single factor variable map each term to one term,
//! so slicewise application never densifies. Factor arrays are shared
//! through `Arc` so that terms left untouched by an operator cost nothing.

use std::collections::HashMap;
use std::sync::Arc;

use ndarray::{Array2, ArrayD, IxDyn};
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{DbpError, Result};

pub type FactorField = Array2<C64>;

/// Upper bound on nodes for any dense product-grid materialisation.
pub const DENSE_NODE_LIMIT: u128 = 1 << 26;

#[derive(Clone, Debug)]
pub struct Term {
    pub coeff: C64,
    pub factors: Vec<Arc<FactorField>>,
}

#[derive(Clone, Debug)]
pub struct SeparatedField {
    dims: Vec<(usize, usize)>,
    terms: Vec<Term>,
}

fn content_hash(a: &FactorField) -> u64 {
    use std::hash::{Hash, Hasher};
    let mut h = std::collections::hash_map::DefaultHasher::new();
    a.dim().hash(&mut h);
    for v in a.iter() {
        v.re.to_bits().hash(&mut h);
        v.im.to_bits().hash(&mut h);
    }
    h.finish()
}

/// Points equal factor arrays (by value) at one shared allocation so that
/// pointer-keyed merging sees them as equal.
fn share_equal_factors(terms: &mut [Term]) {
    let Some(m) = terms.first().map(|t| t.factors.len()) else {
        return;
    };
    for j in 0..m {
        let mut seen: HashMap<u64, Vec<Arc<FactorField>>> = HashMap::new();
        for t in terms.iter_mut() {
            let a = &t.factors[j];
            let bucket = seen.entry(content_hash(a)).or_default();
            match bucket.iter().find(|b| Arc::ptr_eq(b, a) || b.as_ref() == a.as_ref()) {
                Some(b) => t.factors[j] = b.clone(),
                None => bucket.push(a.clone()),
            }
        }
    }
}

fn key(t: &Term, skip: Option<usize>) -> Vec<usize> {
    t.factors
        .iter()
        .enumerate()
        .filter(|(j, _)| Some(*j) != skip)
        .map(|(_, a)| Arc::as_ptr(a) as usize)
        .collect()
}

impl SeparatedField {
    pub fn zeros(dims: Vec<(usize, usize)>) -> Self {
        SeparatedField {
            dims,
            terms: Vec::new(),
        }
    }

    pub fn from_factors(factors: Vec<FactorField>) -> Self {
        let dims = factors.iter().map(|a| a.dim()).collect();
        SeparatedField {
            dims,
            terms: vec![Term {
                coeff: C64::new(1.0, 0.0),
                factors: factors.into_iter().map(Arc::new).collect(),
            }],
        }
    }

    pub fn from_terms(dims: Vec<(usize, usize)>, terms: Vec<Term>) -> Result<Self> {
        for t in &terms {
            let got: Vec<(usize, usize)> = t.factors.iter().map(|a| a.dim()).collect();
            if got != dims {
                return Err(DbpError::ShapeMismatch {
                    expected: dims.iter().flat_map(|&(a, b)| [a, b]).collect(),
                    got: got.iter().flat_map(|&(a, b)| [a, b]).collect(),
                });
            }
        }
        Ok(SeparatedField { dims, terms })
    }

    pub fn m(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[(usize, usize)] {
        &self.dims
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn rank(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn push(&mut self, t: Term) {
        debug_assert_eq!(t.factors.len(), self.m());
        if t.coeff != C64::new(0.0, 0.0) {
            self.terms.push(t);
        }
    }

    pub fn add_assign(&mut self, other: &SeparatedField) {
        assert_eq!(self.dims, other.dims, "grid mismatch in field sum");
        self.terms.extend(other.terms.iter().cloned());
    }

    pub fn scaled(&self, c: C64) -> SeparatedField {
        if c == C64::new(0.0, 0.0) {
            return SeparatedField::zeros(self.dims.clone());
        }
        SeparatedField {
            dims: self.dims.clone(),
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    coeff: t.coeff * c,
                    factors: t.factors.clone(),
                })
                .collect(),
        }
    }

    pub fn add(&self, other: &SeparatedField) -> SeparatedField {
        let mut out = self.clone();
        out.add_assign(other);
        out
    }

    pub fn sub(&self, other: &SeparatedField) -> SeparatedField {
        self.add(&other.scaled(C64::new(-1.0, 0.0)))
    }

    /// Applies a factor-`j` operator to every term. Identical input arrays are
    /// transformed once and the results shared.
    pub fn map_factor<F>(&self, j: usize, op: F) -> SeparatedField
    where
        F: Fn(&FactorField) -> FactorField + Sync,
    {
        let mut unique: Vec<Arc<FactorField>> = Vec::new();
        let mut seen: HashMap<usize, usize> = HashMap::new();
        for t in &self.terms {
            let p = Arc::as_ptr(&t.factors[j]) as usize;
            seen.entry(p).or_insert_with(|| {
                unique.push(t.factors[j].clone());
                unique.len() - 1
            });
        }
        let mapped: Vec<Arc<FactorField>> = unique.par_iter().map(|a| Arc::new(op(a))).collect();
        let dims_j = mapped.first().map(|a| a.dim()).unwrap_or(self.dims[j]);
        let mut dims = self.dims.clone();
        dims[j] = dims_j;
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let mut factors = t.factors.clone();
                factors[j] = mapped[seen[&(Arc::as_ptr(&t.factors[j]) as usize)]].clone();
                Term {
                    coeff: t.coeff,
                    factors,
                }
            })
            .collect();
        SeparatedField { dims, terms }
    }

    /// Merges terms that share factor arrays: exact duplicates add
    /// coefficients, and terms equal in all factors but one are summed in
    /// that factor. Does not change the represented field beyond rounding.
    pub fn compress(&self) -> SeparatedField {
        let zero = C64::new(0.0, 0.0);
        let mut terms = self.terms.clone();
        share_equal_factors(&mut terms);
        loop {
            let before = terms.len();
            // exact duplicates
            let mut idx: HashMap<Vec<usize>, usize> = HashMap::new();
            let mut merged: Vec<Term> = Vec::new();
            for t in terms {
                match idx.get(&key(&t, None)) {
                    Some(&k) => merged[k].coeff += t.coeff,
                    None => {
                        idx.insert(key(&t, None), merged.len());
                        merged.push(t);
                    }
                }
            }
            terms = merged.into_iter().filter(|t| t.coeff != zero).collect();
            // equal in all factors but one
            if self.m() > 1 {
                for j in 0..self.m() {
                    let mut groups: HashMap<Vec<usize>, Vec<usize>> = HashMap::new();
                    let mut order: Vec<Vec<usize>> = Vec::new();
                    for (k, t) in terms.iter().enumerate() {
                        let kk = key(t, Some(j));
                        groups
                            .entry(kk.clone())
                            .or_insert_with(|| {
                                order.push(kk);
                                Vec::new()
                            })
                            .push(k);
                    }
                    if groups.values().all(|g| g.len() == 1) {
                        continue;
                    }
                    let mut next = Vec::with_capacity(groups.len());
                    for kk in order {
                        let g = &groups[&kk];
                        if g.len() == 1 {
                            next.push(terms[g[0]].clone());
                            continue;
                        }
                        let mut sum = terms[g[0]].factors[j].as_ref() * terms[g[0]].coeff;
                        for &k in &g[1..] {
                            sum.scaled_add(terms[k].coeff, terms[k].factors[j].as_ref());
                        }
                        if sum.iter().all(|v| *v == zero) {
                            continue;
                        }
                        let mut factors = terms[g[0]].factors.clone();
                        factors[j] = Arc::new(sum);
                        next.push(Term {
                            coeff: C64::new(1.0, 0.0),
                            factors,
                        });
                    }
                    terms = next;
                }
            } else if terms.len() > 1 {
                let mut sum = terms[0].factors[0].as_ref() * terms[0].coeff;
                for t in &terms[1..] {
                    sum.scaled_add(t.coeff, t.factors[0].as_ref());
                }
                terms = if sum.iter().all(|v| *v == zero) {
                    Vec::new()
                } else {
                    vec![Term {
                        coeff: C64::new(1.0, 0.0),
                        factors: vec![Arc::new(sum)],
                    }]
                };
            }
            if terms.len() == before || terms.len() <= 1 {
                terms.retain(|t| t.factors.iter().all(|a| a.iter().any(|v| *v != zero)));
                break;
            }
        }
        SeparatedField {
            dims: self.dims.clone(),
            terms,
        }
    }

    /// Value at one product-grid node given per-factor flat indices.
    pub fn value_at(&self, flat: &[usize]) -> C64 {
        self.terms
            .iter()
            .map(|t| {
                t.factors
                    .iter()
                    .zip(flat)
                    .fold(t.coeff, |acc, (a, &k)| acc * a.as_slice().expect("layout")[k])
            })
            .sum()
    }

    /// Materialises the field with axes `[n1y, n1x, n2y, n2x, …]`.
    pub fn to_dense(&self) -> Result<ArrayD<C64>> {
        let nodes: u128 = self.dims.iter().map(|&(a, b)| (a * b) as u128).product();
        if nodes > DENSE_NODE_LIMIT {
            return Err(DbpError::TooLarge {
                nodes,
                limit: DENSE_NODE_LIMIT,
            });
        }
        let shape: Vec<usize> = self.dims.iter().flat_map(|&(a, b)| [a, b]).collect();
        let mut out = ArrayD::<C64>::zeros(IxDyn(&shape));
        let sizes: Vec<usize> = self.dims.iter().map(|&(a, b)| a * b).collect();
        let flat = out.as_slice_mut().expect("layout");
        for t in &self.terms {
            let slices: Vec<&[C64]> = t
                .factors
                .iter()
                .map(|a| a.as_slice().expect("layout"))
                .collect();
            accumulate_outer(flat, &slices, &sizes, t.coeff);
        }
        Ok(out)
    }

    /// Product-grid field of a single factor function, constant in the others.
    pub fn lift(dims: Vec<(usize, usize)>, j: usize, a: FactorField) -> Self {
        let factors = dims
            .iter()
            .enumerate()
            .map(|(k, &d)| {
                if k == j {
                    Arc::new(a.clone())
                } else {
                    Arc::new(Array2::from_elem(d, C64::new(1.0, 0.0)))
                }
            })
            .collect();
        SeparatedField {
            dims,
            terms: vec![Term {
                coeff: C64::new(1.0, 0.0),
                factors,
            }],
        }
    }
}

/// `out += c · a_1 ⊗ ⋯ ⊗ a_m` on row-major flattened storage.
fn accumulate_outer(out: &mut [C64], factors: &[&[C64]], sizes: &[usize], c: C64) {
    if factors.len() == 1 {
        for (o, &v) in out.iter_mut().zip(factors[0]) {
            *o += c * v;
        }
        return;
    }
    let inner: usize = sizes[1..].iter().product();
    for (k, &v) in factors[0].iter().enumerate() {
        if v == C64::new(0.0, 0.0) {
            continue;
        }
        accumulate_outer(
            &mut out[k * inner..(k + 1) * inner],
            &factors[1..],
            &sizes[1..],
            c * v,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arr(n: usize, f: impl Fn(usize) -> f64) -> FactorField {
        Array2::from_shape_fn((n, n), |(a, b)| C64::new(f(a * n + b), 0.0))
    }

    #[test]
    fn dense_matches_pointwise() {
        let f = SeparatedField::from_factors(vec![arr(3, |k| k as f64), arr(2, |k| 1.0 + k as f64)]);
        let g = f.add(&f.scaled(C64::new(0.0, 2.0)));
        let d = g.to_dense().unwrap();
        assert_eq!(d.shape(), &[3, 3, 2, 2]);
        for k1 in 0..9 {
            for k2 in 0..4 {
                let v = d[[k1 / 3, k1 % 3, k2 / 2, k2 % 2]];
                assert!((v - g.value_at(&[k1, k2])).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn compress_preserves_values_and_reduces_rank() {
        let a = Arc::new(arr(3, |k| k as f64));
        let b = Arc::new(arr(3, |k| (k * k) as f64));
        let c = Arc::new(arr(3, |k| 1.0 / (1.0 + k as f64)));
        let dims = vec![(3, 3), (3, 3)];
        let t = |x: &Arc<FactorField>, y: &Arc<FactorField>, s: f64| Term {
            coeff: C64::new(s, 0.0),
            factors: vec![x.clone(), y.clone()],
        };
        let f = SeparatedField::from_terms(
            dims,
            vec![t(&a, &b, 1.0), t(&c, &b, 2.0), t(&a, &c, 3.0), t(&a, &b, -0.5)],
        )
        .unwrap();
        let g = f.compress();
        assert!(g.rank() < f.rank());
        let (df, dg) = (f.to_dense().unwrap(), g.to_dense().unwrap());
        for (x, y) in df.iter().zip(dg.iter()) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn exact_cancellation_drops_terms() {
        let f = SeparatedField::from_factors(vec![arr(3, |k| k as f64), arr(3, |k| k as f64)]);
        let z = f.sub(&f).compress();
        assert!(z.is_zero());
    }

    #[test]
    fn map_factor_shares_work() {
        let a = SeparatedField::from_factors(vec![arr(2, |k| k as f64), arr(2, |k| k as f64)]);
        let f = a.add(&a);
        let counter = std::sync::atomic::AtomicUsize::new(0);
        let g = f.map_factor(0, |x| {
            counter.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
            x * C64::new(2.0, 0.0)
        });
        assert_eq!(counter.into_inner(), 1);
        assert_eq!(g.rank(), 2);
    }

    #[test]
    fn dense_guard() {
        let big = SeparatedField::zeros(vec![(256, 256), (256, 256), (256, 256)]);
        assert!(matches!(big.to_dense(), Err(DbpError::TooLarge { .. })));
    }
}
