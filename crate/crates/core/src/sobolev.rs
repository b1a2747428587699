//! Discrete `W^{k,p}` norms on product grids, the Fubini ratio test and
//! operator-ratio sweeps.
//!
//! Integrals are composite midpoint sums over the product of per-factor
//! masks eroded by `2k` cells. For separated fields the `L²` norm never
//! materialises the product grid: each factor's weighted sample matrix is
//! QR-factored and the norm is the Frobenius norm of the small core
//! `Σ_r c_r ⊗_j R_j[:, r]`. `L⁴` uses `∫|f|⁴ = ‖f²‖²_{L²}` with `f²` again
//! separated. Other exponents stream over the product grid.

use nalgebra::{DMatrix, DVector};
use ndarray::{ArrayD, IxDyn};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::domain::{PlanarDomain, ProductDomain};
use crate::error::{DbpError, Result};
use crate::fd::Axis;
use crate::field::{FactorField, SeparatedField, DENSE_NODE_LIMIT};
use crate::form::FormField;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SobolevSpec {
    pub k: usize,
    pub p: f64,
}

impl SobolevSpec {
    pub fn new(k: usize, p: f64) -> Result<Self> {
        if k > 2 {
            return Err(DbpError::Config(format!("derivative order {k} > 2 unsupported")));
        }
        if !(p > 1.0 && p.is_finite()) {
            return Err(DbpError::Config(format!("exponent p = {p} outside (1, ∞)")));
        }
        Ok(SobolevSpec { k, p })
    }

    /// Mask erosion in cells: two per derivative order.
    pub fn erosion(&self) -> usize {
        2 * self.k
    }
}

/// A real partial derivative: `(∂x^a ∂y^b)` counts per factor.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Derivative {
    pub counts: Vec<(u8, u8)>,
}

impl Derivative {
    pub fn identity(m: usize) -> Self {
        Derivative {
            counts: vec![(0, 0); m],
        }
    }

    pub fn order(&self) -> usize {
        self.counts.iter().map(|&(a, b)| (a + b) as usize).sum()
    }

    /// True if only factors in `lo..hi` are differentiated.
    pub fn within(&self, lo: usize, hi: usize) -> bool {
        self.counts
            .iter()
            .enumerate()
            .all(|(j, &(a, b))| (lo..hi).contains(&j) || a + b == 0)
    }
}

/// All `D^α` with `|α| ≤ k` in the `2m` real variables.
pub fn derivatives_up_to(m: usize, k: usize) -> Vec<Derivative> {
    fn rec(var: usize, left: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if var == cur.len() {
            out.push(cur.clone());
            return;
        }
        for c in 0..=left {
            cur[var] = c as u8;
            rec(var + 1, left - c, cur, out);
        }
        cur[var] = 0;
    }
    let mut raw = Vec::new();
    rec(0, k, &mut vec![0; 2 * m], &mut raw);
    let mut out: Vec<Derivative> = raw
        .into_iter()
        .map(|v| Derivative {
            counts: v.chunks(2).map(|c| (c[0], c[1])).collect(),
        })
        .collect();
    out.sort_by_key(|d| d.order());
    out
}

fn axis_power(dom: &PlanarDomain, a: FactorField, axis: Axis, count: u8) -> FactorField {
    match count {
        0 => a,
        2 => dom.plan().derivative(&a, axis, 2, dom.h()),
        _ => (0..count).fold(a, |acc, _| dom.plan().derivative(&acc, axis, 1, dom.h())),
    }
}

/// `D^α` of a factor array by fourth-order finite differences.
pub fn factor_derivative(dom: &PlanarDomain, a: &FactorField, nx: u8, ny: u8) -> FactorField {
    let a = axis_power(dom, a.clone(), Axis::X, nx);
    axis_power(dom, a, Axis::Y, ny)
}

pub fn apply_derivative(f: &SeparatedField, dom: &ProductDomain, d: &Derivative) -> SeparatedField {
    let mut out = f.clone();
    for (j, &(nx, ny)) in d.counts.iter().enumerate() {
        if nx + ny > 0 {
            let fac = dom.factor(j).clone();
            out = out.map_factor(j, move |a| factor_derivative(&fac, a, nx, ny));
        }
    }
    out
}

/// Masked factor samples of a separated field: `f = Σ_r c_r ⊗_j A_j[:, r]`
/// over the product of eroded masks, with per-factor cell areas.
#[derive(Clone, Debug)]
struct MaskedSeparated {
    coeffs: Vec<C64>,
    mats: Vec<DMatrix<C64>>,
    area: Vec<f64>,
}

fn masked_indices(dom: &ProductDomain, erosion: usize) -> Result<Vec<Vec<usize>>> {
    dom.factors()
        .iter()
        .map(|d| {
            let idx = d.masked_indices(erosion);
            if idx.is_empty() {
                Err(DbpError::DegenerateGrid(format!(
                    "mask of {} at n={} is empty after eroding {erosion} cells",
                    d.shape(),
                    d.n()
                )))
            } else {
                Ok(idx)
            }
        })
        .collect()
}

impl MaskedSeparated {
    fn new(f: &SeparatedField, dom: &ProductDomain, erosion: usize) -> Result<Self> {
        let dims: Vec<(usize, usize)> = dom.factors().iter().map(|d| d.dims()).collect();
        if f.dims() != dims.as_slice() {
            return Err(DbpError::ShapeMismatch {
                expected: dims.iter().flat_map(|&(a, b)| [a, b]).collect(),
                got: f.dims().iter().flat_map(|&(a, b)| [a, b]).collect(),
            });
        }
        let idx = masked_indices(dom, erosion)?;
        let terms = f.terms();
        let mats = (0..f.m())
            .map(|j| {
                DMatrix::from_fn(idx[j].len(), terms.len(), |row, r| {
                    terms[r].factors[j].as_slice().expect("layout")[idx[j][row]]
                })
            })
            .collect();
        Ok(MaskedSeparated {
            coeffs: terms.iter().map(|t| t.coeff).collect(),
            mats,
            area: dom.factors().iter().map(|d| d.h() * d.h()).collect(),
        })
    }

    fn rank(&self) -> usize {
        self.coeffs.len()
    }

    /// `(Σ cell-area · |f|²)^{1/2}` via QR of each weighted factor matrix.
    fn l2(&self) -> f64 {
        if self.rank() == 0 {
            return 0.0;
        }
        let rs: Vec<DMatrix<C64>> = self
            .mats
            .iter()
            .zip(&self.area)
            .map(|(a, &w)| {
                let a = a * C64::new(w.sqrt(), 0.0);
                if a.nrows() > a.ncols() {
                    a.qr().r()
                } else {
                    a
                }
            })
            .collect();
        let c = DVector::from_column_slice(&self.coeffs);
        if rs.len() == 1 {
            return (&rs[0] * c).norm();
        }
        let left = &rs[0] * DMatrix::from_diagonal(&c);
        let kr = khatri_rao(&rs[1..]);
        (left * kr.transpose()).norm()
    }

    /// Re-expresses a two-factor field in orthogonal form, dropping
    /// singular values below `rtol` relative to the largest.
    fn orthogonalised(&self, rtol: f64) -> MaskedSeparated {
        if self.mats.len() != 2 || self.rank() <= 1 {
            return self.clone();
        }
        let q1 = self.mats[0].clone().qr();
        let q2 = self.mats[1].clone().qr();
        let c = DMatrix::from_diagonal(&DVector::from_column_slice(&self.coeffs));
        let core = q1.r() * c * q2.r().transpose();
        let svd = core.svd(true, true);
        let s = &svd.singular_values;
        let smax = s.max();
        let keep: Vec<usize> = (0..s.len()).filter(|&t| s[t] > rtol * smax).collect();
        let u = q1.q() * svd.u.expect("u");
        let v = q2.q() * svd.v_t.expect("v_t").transpose();
        MaskedSeparated {
            coeffs: keep.iter().map(|&t| C64::new(s[t], 0.0)).collect(),
            mats: vec![u.select_columns(&keep), v.select_columns(&keep)],
            area: self.area.clone(),
        }
    }

    /// Pointwise square `f²`, one column per unordered pair of terms.
    fn squared(&self) -> MaskedSeparated {
        let r = self.rank();
        let pairs: Vec<(usize, usize)> = (0..r).flat_map(|a| (a..r).map(move |b| (a, b))).collect();
        let coeffs = pairs
            .iter()
            .map(|&(a, b)| {
                let mult = if a == b { 1.0 } else { 2.0 };
                self.coeffs[a] * self.coeffs[b] * mult
            })
            .collect();
        let mats = self
            .mats
            .iter()
            .map(|m| {
                DMatrix::from_fn(m.nrows(), pairs.len(), |row, col| {
                    let (a, b) = pairs[col];
                    m[(row, a)] * m[(row, b)]
                })
            })
            .collect();
        MaskedSeparated {
            coeffs,
            mats,
            area: self.area.clone(),
        }
    }

    /// `Σ cell-area · |f|^p` by streaming over the product grid.
    fn stream_pow_sum(&self, p: f64) -> Result<f64> {
        let nodes: u128 = self.mats.iter().map(|a| a.nrows() as u128).product();
        if nodes > DENSE_NODE_LIMIT {
            return Err(DbpError::TooLarge {
                nodes,
                limit: DENSE_NODE_LIMIT,
            });
        }
        if self.rank() == 0 {
            return Ok(0.0);
        }
        let m = self.mats.len();
        let last = &self.mats[m - 1];
        let mut total = 0.0;
        let mut idx = vec![0usize; m - 1];
        let dims: Vec<usize> = self.mats[..m - 1].iter().map(|a| a.nrows()).collect();
        loop {
            let partial = DVector::from_fn(self.rank(), |r, _| {
                idx.iter()
                    .enumerate()
                    .fold(self.coeffs[r], |acc, (j, &i)| acc * self.mats[j][(i, r)])
            });
            let line = last * partial;
            total += line.iter().map(|v| v.norm().powf(p)).sum::<f64>();
            // odometer over the leading factors
            let mut j = m - 1;
            loop {
                if j == 0 {
                    let area: f64 = self.area.iter().product();
                    return Ok(total * area);
                }
                j -= 1;
                idx[j] += 1;
                if idx[j] < dims[j] {
                    break;
                }
                idx[j] = 0;
            }
        }
    }
}

fn khatri_rao(mats: &[DMatrix<C64>]) -> DMatrix<C64> {
    let r = mats[0].ncols();
    let rows: usize = mats.iter().map(|a| a.nrows()).product();
    let mut out = DMatrix::from_element(rows, r, C64::new(1.0, 0.0));
    for col in 0..r {
        let mut acc = vec![C64::new(1.0, 0.0)];
        for a in mats {
            let mut next = Vec::with_capacity(acc.len() * a.nrows());
            for &x in &acc {
                for i in 0..a.nrows() {
                    next.push(x * a[(i, col)]);
                }
            }
            acc = next;
        }
        out.set_column(col, &DVector::from_vec(acc));
    }
    out
}

/// Relative threshold for dropping singular values before squaring.
const SQUARE_RTOL: f64 = 1e-13;

/// `‖f‖_{L^p}` over the product of masks eroded by `erosion` cells.
pub fn lp_norm(f: &SeparatedField, dom: &ProductDomain, p: f64, erosion: usize) -> Result<f64> {
    let f = if f.rank() > 1 { f.compress() } else { f.clone() };
    let ms = MaskedSeparated::new(&f, dom, erosion)?;
    if (p - 2.0).abs() < 1e-15 {
        Ok(ms.l2())
    } else if (p - 4.0).abs() < 1e-15 {
        Ok(ms.orthogonalised(SQUARE_RTOL).squared().l2().sqrt())
    } else {
        Ok(ms.stream_pow_sum(p)?.powf(1.0 / p))
    }
}

pub fn l2_norm(f: &SeparatedField, dom: &ProductDomain, erosion: usize) -> Result<f64> {
    lp_norm(f, dom, 2.0, erosion)
}

/// Reference `L^p` norm from a dense materialisation (small grids only).
pub fn lp_norm_dense(f: &SeparatedField, dom: &ProductDomain, p: f64, erosion: usize) -> Result<f64> {
    dense_lp_norm(&f.to_dense()?, dom, p, erosion)
}

/// Masked `L^p` norm of a dense array shaped `[ny₁, nx₁, ny₂, nx₂, …]`.
pub fn dense_lp_norm(dense: &ArrayD<C64>, dom: &ProductDomain, p: f64, erosion: usize) -> Result<f64> {
    check_dense_shape(dense, dom)?;
    let masks: Vec<Vec<bool>> = dom
        .factors()
        .iter()
        .map(|d| d.eroded_mask(erosion).iter().copied().collect())
        .collect();
    if masks.iter().any(|m| !m.iter().any(|&b| b)) {
        return Err(DbpError::DegenerateGrid("empty eroded mask".into()));
    }
    let sizes: Vec<usize> = masks.iter().map(|m| m.len()).collect();
    let area: f64 = dom.factors().iter().map(|d| d.h() * d.h()).product();
    let mut sum = 0.0;
    for (flat, v) in dense.iter().enumerate() {
        let mut rem = flat;
        let mut inside = true;
        for j in (0..sizes.len()).rev() {
            inside &= masks[j][rem % sizes[j]];
            rem /= sizes[j];
        }
        if inside {
            sum += v.norm().powf(p);
        }
    }
    Ok((sum * area).powf(1.0 / p))
}

fn check_dense_shape(dense: &ArrayD<C64>, dom: &ProductDomain) -> Result<()> {
    let expected: Vec<usize> = dom
        .factors()
        .iter()
        .flat_map(|d| {
            let (a, b) = d.dims();
            [a, b]
        })
        .collect();
    if dense.shape() != expected.as_slice() {
        return Err(DbpError::ShapeMismatch {
            expected,
            got: dense.shape().to_vec(),
        });
    }
    Ok(())
}

/// `D^α` of a dense product-grid array, factor by factor.
pub fn dense_derivative(dense: &ArrayD<C64>, dom: &ProductDomain, d: &Derivative) -> Result<ArrayD<C64>> {
    check_dense_shape(dense, dom)?;
    let mut out = dense.as_standard_layout().into_owned();
    let rank = out.ndim();
    for (j, &(nx, ny)) in d.counts.iter().enumerate() {
        if nx + ny == 0 {
            continue;
        }
        let fac = dom.factor(j);
        let (a, b) = fac.dims();
        let mut perm: Vec<usize> = (0..rank).filter(|&k| k != 2 * j && k != 2 * j + 1).collect();
        perm.extend([2 * j, 2 * j + 1]);
        let moved = out.view().permuted_axes(IxDyn(&perm)).as_standard_layout().into_owned();
        let moved_shape = moved.shape().to_vec();
        let rest = moved.len() / (a * b);
        let mut flat = moved.into_shape_with_order(IxDyn(&[rest, a, b])).expect("contiguous");
        for mut slab in flat.outer_iter_mut() {
            let sl = slab.view().into_dimensionality::<ndarray::Ix2>().expect("2-d").to_owned();
            let dsl = factor_derivative(fac, &sl, nx, ny);
            slab.assign(&dsl.into_dyn());
        }
        let back = flat.into_shape_with_order(IxDyn(&moved_shape)).expect("contiguous");
        let mut inv = vec![0; rank];
        for (k, &pk) in perm.iter().enumerate() {
            inv[pk] = k;
        }
        out = back.permuted_axes(IxDyn(&inv)).as_standard_layout().into_owned();
    }
    Ok(out)
}

/// Sobolev norm of a dense array; agrees with [`sobolev_norm`] on the same values.
pub fn dense_sobolev_norm(dense: &ArrayD<C64>, dom: &ProductDomain, spec: SobolevSpec) -> Result<f64> {
    let mut acc = 0.0;
    for d in derivatives_up_to(dom.m(), spec.k) {
        let g = dense_derivative(dense, dom, &d)?;
        acc += dense_lp_norm(&g, dom, spec.p, spec.erosion())?.powf(spec.p);
    }
    Ok(acc.powf(1.0 / spec.p))
}

/// [`fubini_ratio`] on a dense array.
pub fn dense_fubini_ratio(
    dense: &ArrayD<C64>,
    dom: &ProductDomain,
    spec: SobolevSpec,
    cut: usize,
) -> Result<FubiniRatio> {
    let m = dom.m();
    if spec.k == 0 {
        return Err(DbpError::Config("the Fubini ratio needs k ≥ 1".into()));
    }
    if cut == 0 || cut >= m {
        return Err(DbpError::Config(format!("cut {cut} must lie in 1..{m}")));
    }
    let (mut full, mut slicewise) = (0.0, 0.0);
    for d in derivatives_up_to(m, spec.k) {
        let g = dense_derivative(dense, dom, &d)?;
        let v = dense_lp_norm(&g, dom, spec.p, spec.erosion())?.powf(spec.p);
        full += v;
        if d.within(0, cut) {
            slicewise += v;
        }
        if d.within(cut, m) {
            slicewise += v;
        }
    }
    Ok(FubiniRatio {
        full,
        slicewise,
        ratio: full / slicewise,
    })
}

/// `(Σ_{|α|≤k} ‖D^α f‖_p^p)^{1/p}` on the mask eroded by `2k` cells.
pub fn sobolev_norm(f: &SeparatedField, dom: &ProductDomain, spec: SobolevSpec) -> Result<f64> {
    sobolev_norm_eroded(f, dom, spec, spec.erosion())
}

/// As [`sobolev_norm`] with an explicit erosion; at a fixed erosion the norm
/// is monotone in `k`.
pub fn sobolev_norm_eroded(
    f: &SeparatedField,
    dom: &ProductDomain,
    spec: SobolevSpec,
    erosion: usize,
) -> Result<f64> {
    let mut acc = 0.0;
    for d in derivatives_up_to(dom.m(), spec.k) {
        let g = apply_derivative(f, dom, &d);
        acc += lp_norm(&g, dom, spec.p, erosion)?.powf(spec.p);
    }
    Ok(acc.powf(1.0 / spec.p))
}

/// Form norm: sum of component norms.
pub fn form_sobolev_norm(f: &FormField, spec: SobolevSpec) -> Result<f64> {
    f.components()
        .values()
        .map(|c| sobolev_norm(c, f.domain(), spec))
        .try_fold(0.0, |acc, v| v.map(|v| acc + v))
}

/// Form `L²` norm (sum of component norms) on the mask eroded by `erosion`.
pub fn form_l2_norm(f: &FormField, erosion: usize) -> Result<f64> {
    f.components()
        .values()
        .map(|c| l2_norm(c, f.domain(), erosion))
        .try_fold(0.0, |acc, v| v.map(|v| acc + v))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FubiniRatio {
    /// `‖f‖^p_{W^{k,p}(U×V)}` with all mixed derivatives.
    pub full: f64,
    /// `∫_V ‖f(·,v)‖^p_{W^{k,p}(U)} + ∫_U ‖f(u,·)‖^p_{W^{k,p}(V)}`.
    pub slicewise: f64,
    pub ratio: f64,
}

/// Splits the factors at `cut` into `U = 0..cut`, `V = cut..m` and compares
/// the full `W^{k,p}` norm with the slicewise pure-derivative sum.
pub fn fubini_ratio(
    f: &SeparatedField,
    dom: &ProductDomain,
    spec: SobolevSpec,
    cut: usize,
) -> Result<FubiniRatio> {
    if spec.k == 0 {
        return Err(DbpError::Config("the Fubini ratio needs k ≥ 1".into()));
    }
    let m = dom.m();
    if cut == 0 || cut >= m {
        return Err(DbpError::Config(format!("cut {cut} must lie in 1..{m}")));
    }
    let (mut full, mut slicewise) = (0.0, 0.0);
    for d in derivatives_up_to(m, spec.k) {
        let g = apply_derivative(f, dom, &d);
        let v = lp_norm(&g, dom, spec.p, spec.erosion())?.powf(spec.p);
        full += v;
        if d.within(0, cut) {
            slicewise += v;
        }
        if d.within(cut, m) {
            slicewise += v;
        }
    }
    Ok(FubiniRatio {
        full,
        slicewise,
        ratio: full / slicewise,
    })
}

/// Ratio growth below which a sweep is called bounded.
pub const BOUNDED_GROWTH: f64 = 0.2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioSweep {
    pub label: String,
    pub spec: SobolevSpec,
    pub grids: Vec<usize>,
    /// Max over the corpus of `‖op f‖ / ‖f‖`, per grid.
    pub ratios: Vec<f64>,
    /// Member achieving the max, per grid.
    pub argmax: Vec<String>,
    pub growth: f64,
    pub bounded: bool,
}

/// Evaluates `‖op f‖_{W^{k,p}} / ‖f‖_{W^{k,p}}` for the pairs produced by
/// `eval(n)` at each grid size `n`.
pub fn operator_ratio_sweep<F>(
    label: &str,
    spec: SobolevSpec,
    grids: &[usize],
    mut eval: F,
) -> Result<RatioSweep>
where
    F: FnMut(usize) -> Result<Vec<(String, FormField, FormField)>>,
{
    if grids.is_empty() {
        return Err(DbpError::Config("empty grid list".into()));
    }
    let mut ratios = Vec::new();
    let mut argmax = Vec::new();
    for &n in grids {
        let mut best = (0.0f64, String::new());
        for (id, input, output) in eval(n)? {
            let den = form_sobolev_norm(&input, spec)?;
            if den == 0.0 {
                continue;
            }
            let r = form_sobolev_norm(&output, spec)? / den;
            if r > best.0 || best.1.is_empty() {
                best = (r, id);
            }
        }
        ratios.push(best.0);
        argmax.push(best.1);
    }
    let growth = ratios.last().expect("nonempty") / ratios[0] - 1.0;
    Ok(RatioSweep {
        label: label.to_string(),
        spec,
        grids: grids.to_vec(),
        ratios,
        argmax,
        growth,
        bounded: growth < BOUNDED_GROWTH,
    })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NormEntry {
    pub k: usize,
    pub p: f64,
    pub value: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub norms: Vec<NormEntry>,
    /// `(min, max)` of the Fubini ratio over a corpus.
    pub fubini_band: Option<(f64, f64)>,
    pub sweeps: Vec<RatioSweep>,
}
