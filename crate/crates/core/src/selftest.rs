//! Fast example suite run by `dbp selftest`: small closed-form checks of
//! every layer, then the standard bidisc experiment run.

use std::sync::Arc;
use std::time::Instant;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::corpus::{self, CorpusFamily, CorpusMember, CorpusSpec};
use crate::domain::{PlanarDomain, ProductDomain, Shape};
use crate::error::Result;
use crate::experiments::{run_experiments, sup_norm_bound};
use crate::field::SeparatedField;
use crate::form::FormField;
use crate::multi_index::MultiIndex;
use crate::planar::oracle::{direct_cauchy_sum, disk_cauchy_of_one};
use crate::planar::kernel::singular_cell_mean;
use crate::planar::{CauchyKernelTable, ExtensionKind, PlanarCauchy, PreparedExtension};
use crate::product::{apply_slicewise, relative_difference, ComposedOperators, GeneratorAction};
use crate::sobolev::{self, SobolevSpec};
use crate::symbolic::{ExpPoly, SymTerm, SymbolicForm};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn line(&self) -> String {
        format!("{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelftestReport {
    pub checks: Vec<Check>,
    pub seconds: f64,
    pub passed: bool,
}

type Outcome = Result<(bool, String)>;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn within(v: f64, tol: f64) -> (bool, String) {
    (v <= tol, format!("{v:.3e} <= {tol:.1e}"))
}

fn bidisc(n: usize) -> Result<Arc<ProductDomain>> {
    Ok(Arc::new(ProductDomain::polydisc(2, n)?))
}

fn disk(n: usize) -> Result<Arc<PlanarDomain>> {
    Ok(Arc::new(PlanarDomain::new(Shape::unit_disk(), n)?))
}

fn sym(m: usize, parts: Vec<(&[usize], Vec<ExpPoly>)>) -> Result<SymbolicForm> {
    let mut f = SymbolicForm::zero(m);
    for (idx, factors) in parts {
        f.push(MultiIndex::from_slice(idx)?, SymTerm::new(c(1.0), factors))?;
    }
    Ok(f)
}

/// `‖a − b‖_{L²}` over the residual mask, absolute.
fn form_gap(a: &FormField, b: &FormField) -> Result<f64> {
    sobolev::form_l2_norm(&a.sub(b).compress(), 2)
}

fn sup_gap(a: &FormField, b: &FormField, erosion: usize) -> f64 {
    let d = a.sub(b).compress();
    d.components()
        .values()
        .map(|f| sup_norm_bound(f, d.domain(), erosion))
        .fold(0.0, f64::max)
}

/// Pointwise max of `|a − b|` over a sub-lattice of the eroded interior with
/// at most about 4·10⁶ product nodes.
fn lattice_max_gap(a: &FormField, b: &FormField, erosion: usize) -> f64 {
    let d = a.sub(b).compress();
    let dom = d.domain();
    let m = dom.m();
    let per = (4.0e6f64).powf(1.0 / m as f64).floor().max(1.0) as usize;
    let idx: Vec<Vec<usize>> = dom
        .factors()
        .iter()
        .map(|f| {
            let all = f.masked_indices(erosion);
            let stride = all.len().div_ceil(per).max(1);
            all.into_iter().step_by(stride).collect()
        })
        .collect();
    let mut worst = 0.0f64;
    for comp in d.components().values() {
        let mut cur = vec![0usize; m];
        'outer: loop {
            let flat: Vec<usize> = cur.iter().zip(&idx).map(|(&k, v)| v[k]).collect();
            worst = worst.max(comp.value_at(&flat).norm());
            for j in (0..m).rev() {
                cur[j] += 1;
                if cur[j] < idx[j].len() {
                    continue 'outer;
                }
                cur[j] = 0;
            }
            break;
        }
    }
    worst
}

fn disk_max_error(d: &PlanarDomain, u: &Array2<C64>, exact: impl Fn(C64) -> C64, erosion: usize) -> f64 {
    let mask = d.eroded_mask(erosion);
    let mut err = 0.0f64;
    for ((iy, ix), &m) in mask.indexed_iter() {
        if m {
            err = err.max((u[[iy, ix]] - exact(d.grid().node(iy, ix))).norm());
        }
    }
    err
}

fn wedge_examples() -> Outcome {
    let cases: [(&[usize], usize, &[usize], f64); 3] =
        [(&[1, 2], 0, &[0, 1, 2], 1.0), (&[0, 2], 1, &[0, 1, 2], -1.0), (&[], 4, &[4], 1.0)];
    for (i, j, want, sign) in cases {
        let (got, s) = MultiIndex::from_slice(i)?.wedge_insert(j)?;
        if got != MultiIndex::from_slice(want)? || s != sign {
            return Ok((false, format!("inserting {j} into {i:?} gave {got:?} sign {s}")));
        }
    }
    let dup = MultiIndex::from_slice(&[0, 1])?.wedge_insert(1).is_err();
    Ok((dup, "three insertions and a duplicate rejection".into()))
}

fn projection_examples() -> Outcome {
    let d = bidisc(16)?;
    let f = sym(2, vec![(&[0], vec![ExpPoly::one(), ExpPoly::one()]), (&[1], vec![ExpPoly::one(), ExpPoly::one()])])?
        .sample(&d)?;
    let p10 = f.project_degree(1, 0, 1);
    let p01 = f.project_degree(0, 1, 1);
    let ok = p10.components().keys().copied().collect::<Vec<_>>() == vec![MultiIndex::single(0)]
        && p01.components().keys().copied().collect::<Vec<_>>() == vec![MultiIndex::single(1)]
        && f.sub(&p10.add(&p01)).compress().is_zero();
    Ok((ok, "π_{1,0} and π_{0,1} of dz̄₁ + dz̄₂ and their sum".into()))
}

fn dbar_examples() -> Outcome {
    let d = bidisc(24)?;
    let zbar1 = sym(2, vec![(&[], vec![ExpPoly::zbar(), ExpPoly::one()])])?.sample(&d)?;
    let dz1 = sym(2, vec![(&[0], vec![ExpPoly::one(), ExpPoly::one()])])?.sample(&d)?;
    let e1 = sup_gap(&zbar1.dbar(), &dz1, 0);
    let holo = sym(2, vec![(&[], vec![ExpPoly::z(), ExpPoly::z()])])?.sample(&d)?;
    let e2 = sup_gap(&holo.dbar(), &FormField::zero(d.clone()), 0);
    let mixed = sym(2, vec![(&[0], vec![ExpPoly::one(), ExpPoly::zbar()])])?.sample(&d)?;
    let minus = sym(2, vec![(&[0, 1], vec![ExpPoly::one(), ExpPoly::one()])])?.sample(&d)?.scaled(c(-1.0));
    let e3 = sup_gap(&mixed.dbar(), &minus, 0);
    let worst = e1.max(e2).max(e3);
    let (ok, detail) = within(worst, 1e-9);
    Ok((ok, format!("z̄₁, z₁z₂, z̄₂dz̄₁: {detail}")))
}

fn partial_dbar_examples() -> Outcome {
    let d = bidisc(24)?;
    let f = sym(2, vec![(&[], vec![ExpPoly::zbar(), ExpPoly::zbar()])])?.sample(&d)?;
    let empty = f.dbar_partial(MultiIndex::EMPTY).is_zero();
    let want = sym(2, vec![(&[0], vec![ExpPoly::one(), ExpPoly::zbar()])])?.sample(&d)?;
    let e1 = sup_gap(&f.dbar_partial(MultiIndex::single(0)), &want, 0);
    let g = corpus::smooth_corpus(2, 3)?[1].sample(&d)?.0;
    let split = g.dbar_partial(MultiIndex::single(0)).add(&g.dbar_partial(MultiIndex::single(1)));
    let e2 = sup_gap(&split, &g.dbar(), 0);
    let worst = e1.max(e2);
    let (ok, detail) = within(worst, 1e-9);
    Ok((empty && ok, format!("S = ∅, S = {{1}}, S ∪ Sᶜ: {detail}")))
}

fn extension_examples() -> Outcome {
    let dk = disk(48)?;
    let e = PreparedExtension::new(&dk, ExtensionKind::Reflection { order: 2 })?;
    let one = Array2::from_elem(dk.dims(), c(1.0));
    let eg = e.apply(&one)?;
    let mut near = 0.0f64;
    let mut edge = 0.0f64;
    for ((iy, ix), v) in eg.indexed_iter() {
        if dk.grid().node(iy, ix).norm() < 1.0 + 2.0 * dk.h() {
            near = near.max((v - 1.0).norm());
        }
        if iy == 0 || ix == 0 || iy + 1 == dk.n() || ix + 1 == dk.n() {
            edge = edge.max(v.norm());
        }
    }
    let rect = Shape::Rectangle {
        min: C64::new(-1.0, -0.5),
        max: C64::new(1.0, 0.5),
    };
    let dr = PlanarDomain::new(rect, 48)?;
    let er = PreparedExtension::new(&dr, ExtensionKind::Reflection { order: 2 })?;
    let g = dr.grid().sample(|z| z.re.into());
    let eg = er.apply(&g)?;
    let mut lin = 0.0f64;
    for ((iy, ix), v) in eg.indexed_iter() {
        let z = dr.grid().node(iy, ix);
        // within a third of the cutoff width (0.1 here) the cutoff is 1
        if z.re.abs() < 1.09 && z.im.abs() < 0.59 {
            lin = lin.max((v - g[[iy, ix]]).norm());
        }
    }
    let ez = PreparedExtension::new(&dk, ExtensionKind::Zero)?;
    let gz = dk.grid().sample(|z| z * 3.0 + 1.0);
    let zeroed = ez
        .apply(&gz)?
        .iter()
        .zip(dk.mask())
        .all(|(v, &m)| m || *v == c(0.0));
    let ok = near < 1e-9 && edge == 0.0 && lin < 1e-9 && zeroed;
    Ok((ok, format!("1 near disk {near:.1e}, edge {edge:.1e}, Re z near rectangle {lin:.1e}, zero exterior {zeroed}")))
}

fn cauchy_examples() -> Outcome {
    let mut worst_ratio = 0.0f64;
    for n in [32, 64, 128] {
        let d = disk(n)?;
        let s = PlanarCauchy::new(d.clone(), ExtensionKind::Zero)?;
        let zero = s.cauchy_transform(&Array2::zeros(d.dims()))?;
        if zero.iter().any(|v| *v != c(0.0)) {
            return Ok((false, format!("H₁(0) nonzero at N={n}")));
        }
        let u = s.cauchy_transform(&Array2::from_elem(d.dims(), c(1.0)))?;
        worst_ratio = worst_ratio.max(disk_max_error(&d, &u, |z| z.conj(), 0) / d.h());
    }
    let z = C64::new(0.3, -0.2);
    let quad = (disk_cauchy_of_one(z, c(0.0), 1.0, 1e-12) - z.conj()).norm();
    let ok = worst_ratio <= 10.0 && quad < 1e-9;
    Ok((ok, format!("max error {worst_ratio:.2}h <= 10h, quadrature oracle gap {quad:.1e}")))
}

fn fft_vs_direct() -> Outcome {
    let d = disk(64)?;
    let s = PlanarCauchy::new(d.clone(), ExtensionKind::Zero)?;
    let mut g = d.grid().sample(|z| z.conj());
    for (v, &m) in g.iter_mut().zip(d.mask()) {
        if !m {
            *v = c(0.0);
        }
    }
    let fast = s.table().convolve(&g)?;
    let slow = direct_cauchy_sum(s.table(), &g);
    let num: f64 = fast.iter().zip(&slow).map(|(a, b)| (a - b).norm_sqr()).sum();
    let den: f64 = slow.iter().map(|b| b.norm_sqr()).sum();
    Ok(within((num / den).sqrt(), 1e-10))
}

fn kernel_examples() -> Outcome {
    let a = CauchyKernelTable::for_grid(0.05, 8)?;
    let b = CauchyKernelTable::for_grid(0.1, 8)?;
    let mut odd = 0.0f64;
    let mut scale = 0.0f64;
    for dy in -7..8i64 {
        for dx in -7..8i64 {
            odd = odd.max((a.at(dy, dx) + a.at(-dy, -dx)).norm() / a.at(dy, dx).norm().max(1.0));
            if (dy, dx) != (0, 0) {
                scale = scale.max((b.at(dy, dx) / a.at(dy, dx) - 0.5).norm());
            }
        }
    }
    let centre = singular_cell_mean(1.0).norm();
    let ok = odd < 1e-12 && scale < 1e-13 && centre < 1e-12;
    Ok((ok, format!("oddness {odd:.1e}, h-scaling {scale:.1e}, centre cell {centre:.1e}")))
}

fn skew_bergman_examples() -> Outcome {
    let d = disk(64)?;
    let s = PlanarCauchy::new(d.clone(), ExtensionKind::default())?;
    let z2 = d.grid().sample(|z| z * z);
    let e1 = disk_max_error(&d, &s.skew_bergman(&z2)?, |z| z * z, 0);
    let zb = d.grid().sample(|z| z.conj());
    let e2 = disk_max_error(&d, &s.skew_bergman(&zb)?, |_| c(0.0), 2);
    let g = d.grid().sample(|z| (-(z - 0.2).norm_sqr()).exp() * (z.conj() + 0.5));
    let pg = s.skew_bergman(&g)?;
    let ppg = s.skew_bergman(&pg)?;
    let e3 = disk_max_error(&d, &(&ppg - &pg), |_| c(0.0), 2) / disk_max_error(&d, &pg, |_| c(0.0), 2);
    let ok = e1 < 1e-9 && e2 <= 10.0 * d.h() && e3 < 1e-2;
    Ok((ok, format!("P z² − z² {e1:.1e}, P z̄ {:.2e}h, P²g − Pg {e3:.1e} relative", e2 / d.h())))
}

fn slicewise_examples() -> Outcome {
    let d = bidisc(24)?;
    let g = ExpPoly::gaussian(C64::new(0.1, -0.1), 0.7);
    let w = ExpPoly::plane_wave(1.3, 0.4);
    let scalar = SymbolicForm::function(2, vec![SymTerm::new(c(1.0), vec![g, w])])?.sample(&d)?;
    let base = scalar.component(MultiIndex::EMPTY).expect("component").clone();
    let t: Vec<PlanarCauchy> = (0..2)
        .map(|j| PlanarCauchy::new(d.factor(j).clone(), ExtensionKind::Zero))
        .collect::<Result<_>>()?;
    let op = |j: usize| {
        let tj = &t[j];
        move |a: &Array2<C64>| tj.cauchy_transform(a)
    };
    let along = |j: usize| apply_slicewise(&scalar, j, GeneratorAction::Preserve, op(j));
    let place = |f: FormField, i: MultiIndex, sign: f64| -> Result<FormField> {
        let comp = f.component(MultiIndex::EMPTY).expect("component").scaled(c(sign));
        FormField::from_component(d.clone(), i, comp)
    };
    let ident = apply_slicewise(&scalar, 0, GeneratorAction::Preserve, |a| Ok(a.clone()))?;
    let e0 = form_gap(&ident, &scalar)?;
    let f2 = FormField::from_component(d.clone(), MultiIndex::single(1), base.clone())?;
    let e1 = form_gap(&apply_slicewise(&f2, 1, GeneratorAction::Consume, op(1))?, &along(1)?)?;
    let top = FormField::from_component(d.clone(), MultiIndex::full(2), base)?;
    let a = apply_slicewise(&top, 0, GeneratorAction::Consume, op(0))?;
    let e2 = form_gap(&a, &place(along(0)?, MultiIndex::single(1), 1.0)?)?;
    let b = apply_slicewise(&top, 1, GeneratorAction::Consume, op(1))?;
    let e3 = form_gap(&b, &place(along(1)?, MultiIndex::single(0), -1.0)?)?;
    let worst = e0.max(e1).max(e2).max(e3);
    let (ok, detail) = within(worst, 1e-14);
    Ok((ok, format!("identity, dz̄₂ (+1), dz̄₁∧dz̄₂ on factor 1 (+1) and factor 2 (−1): {detail}")))
}

fn composed_examples() -> Outcome {
    let m1 = Arc::new(ProductDomain::polydisc(1, 32)?);
    let one = ComposedOperators::planar(m1.clone(), ExtensionKind::Zero, None)?;
    let s = PlanarCauchy::new(m1.factor(0).clone(), ExtensionKind::Zero)?;
    let g = sym(1, vec![(&[0], vec![ExpPoly::gaussian(C64::new(0.1, 0.0), 0.8)])])?.sample(&m1)?;
    let base = g.component(MultiIndex::single(0)).expect("component").terms()[0].factors[0].clone();
    let direct = s.cauchy_transform(&base)?;
    let via = one.homotopy(&g)?;
    let got = via.component(MultiIndex::EMPTY).expect("component").to_dense()?;
    let base_gap = got.iter().zip(direct.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);

    let mut worst = 0.0f64;
    for (m, j) in [(2usize, 1usize), (2, 0), (3, 1)] {
        let d = Arc::new(ProductDomain::polydisc(m, 64)?);
        let ops = ComposedOperators::planar(d.clone(), ExtensionKind::Zero, None)?;
        let mut factors = vec![ExpPoly::one(); m];
        let f = sym(m, vec![(&[j], factors.clone())])?.sample(&d)?;
        factors[j] = ExpPoly::zbar();
        let want = sym(m, vec![(&[], factors)])?.sample(&d)?;
        worst = worst.max(lattice_max_gap(&ops.homotopy(&f)?, &want, 0) / d.factor(0).h());
    }
    let zero = {
        let d = bidisc(32)?;
        let ops = ComposedOperators::planar(d.clone(), ExtensionKind::default(), None)?;
        ops.homotopy(&FormField::zero(d))?.is_zero()
    };
    let ok = base_gap < 1e-12 && worst <= 10.0 && zero;
    Ok((ok, format!("m=1 base case {base_gap:.1e}; 𝓗dz̄_j − z̄_j max {worst:.2}h <= 10h; 𝓗0 = 0 {zero}")))
}

fn projection_product_examples() -> Outcome {
    let d = bidisc(64)?;
    let ops = ComposedOperators::planar(d.clone(), ExtensionKind::default(), None)?;
    let holo = sym(2, vec![(&[], vec![ExpPoly::polynomial([(2, 0, c(1.0)), (0, 0, c(0.5))]), ExpPoly::z()])])?
        .sample(&d)?;
    let e1 = relative_difference(&ops.projection(&holo)?, &holo)?;
    let zb = sym(2, vec![(&[], vec![ExpPoly::zbar(), ExpPoly::one()])])?.sample(&d)?;
    let e2 = sup_gap(&ops.projection(&zb)?, &FormField::zero(d.clone()), 2) / d.factor(0).h();
    let g = corpus::smooth_corpus(2, 1)?[3].sample(&d)?.0;
    let pg = ops.projection(&g)?;
    let e3 = relative_difference(&ops.projection(&pg)?, &pg)?;
    let ok = e1 < 1e-8 && e2 <= 10.0 && e3 < 1e-2;
    Ok((ok, format!("𝓟h − h {e1:.1e}, 𝓟z̄₁ {e2:.2e}h, 𝓟² − 𝓟 {e3:.1e} relative")))
}

fn exactness_example() -> Outcome {
    let d = bidisc(64)?;
    let ops = ComposedOperators::planar(d.clone(), ExtensionKind::default(), None)?;
    let pot = corpus::standard_potentials(2, 0)?.remove(1);
    let member = CorpusMember::from_potential("gauss", pot.clone());
    let big_f = pot.sample(&d)?;
    let f = member.form.sample(&d)?;
    let lhs = ops.homotopy(&f)?;
    let rhs = big_f.sub(&ops.projection(&big_f)?);
    let r = form_gap(&lhs, &rhs)? / sobolev::form_l2_norm(&big_f, 2)?;
    Ok(within(r, 1e-2))
}

fn holomorphic_residual() -> Outcome {
    let d = bidisc(32)?;
    let ops = ComposedOperators::planar(d.clone(), ExtensionKind::default(), None)?;
    let f = sym(2, vec![(&[], vec![ExpPoly::exp_z(C64::new(0.5, 0.5)), ExpPoly::z()])])?.sample(&d)?;
    let res = crate::product::homotopy_residual(&ops, &f, None)?;
    let worst = res.iter().map(|r| r.relative).fold(0.0, f64::max);
    Ok(within(worst, 1e-8))
}

fn v_independent_anticommutation() -> Outcome {
    let d = bidisc(32)?;
    let ops = ComposedOperators::planar(d.clone(), ExtensionKind::default(), None)?;
    let f = sym(2, vec![(&[0], vec![ExpPoly::gaussian(C64::new(0.1, 0.2), 0.7), ExpPoly::one()])])?.sample(&d)?;
    let r = crate::product::anticommutation_check(&ops, &f, 1)?;
    let (ok, detail) = within(r.homotopy, 1e-12);
    Ok((ok, format!("homotopy part {detail}, projection part {:.1e}", r.projection)))
}

fn norm_examples() -> Outcome {
    let d = bidisc(64)?;
    let zero = sobolev::form_sobolev_norm(&FormField::zero(d.clone()), SobolevSpec::new(2, 3.0)?)? == 0.0;
    let dims: Vec<(usize, usize)> = d.factors().iter().map(|x| x.dims()).collect();
    let cval = C64::new(0.6, 0.8) * 2.0;
    let konst = SeparatedField::from_factors(dims.iter().map(|&s| Array2::from_elem(s, c(1.0))).collect()).scaled(cval);
    let mut worst = 0.0f64;
    for (k, p) in [(0, 2.0), (1, 4.0), (2, 2.0)] {
        let spec = SobolevSpec::new(k, p)?;
        let area: f64 = d
            .factors()
            .iter()
            .map(|x| x.masked_indices(spec.erosion()).len() as f64 * x.h() * x.h())
            .product();
        let want = cval.norm() * area.powf(1.0 / p);
        let got = sobolev::sobolev_norm(&konst, &d, spec)?;
        worst = worst.max((got - want).abs() / want);
    }
    let ok = zero && worst < 1e-9;
    Ok((ok, format!("‖0‖ = 0 {zero}, constant vs |c|·area^(1/p) {worst:.1e}")))
}

fn corpus_examples() -> Outcome {
    let spec = CorpusSpec {
        family: CorpusFamily::Polynomial { degree: 0 },
        seed: 7,
        degrees: None,
    };
    let members = corpus::generate_corpus(&spec, 2)?;
    let want: Vec<MultiIndex> = (0..4).map(MultiIndex::from_bits).collect();
    let mut got: Vec<MultiIndex> = members.iter().flat_map(|m| m.form.components().keys().copied()).collect();
    got.sort();
    let constants = got == want;
    let pot = sym(2, vec![(&[], vec![ExpPoly::zbar(), ExpPoly::zbar()])])?;
    let member = CorpusMember::from_potential("zz", pot);
    let expected = sym(2, vec![(&[0], vec![ExpPoly::one(), ExpPoly::zbar()]), (&[1], vec![ExpPoly::zbar(), ExpPoly::one()])])?;
    let closed = member.form.add(&expected.scaled(c(-1.0))).simplify().is_zero() && member.form.dbar().simplify().is_zero();
    let again = corpus::generate_corpus(&spec, 2)?;
    let same = serde_json::to_string(&members).ok() == serde_json::to_string(&again).ok();
    Ok((constants && closed && same, format!("d=0 indices {constants}, ∂̄(z̄₁z̄₂) closed {closed}, reproducible {same}")))
}

fn fubini_example() -> Outcome {
    let mut ratios = Vec::new();
    for n in [32, 64] {
        let d = bidisc(n)?;
        let g = ExpPoly::gaussian(C64::new(0.1, 0.0), 0.7);
        let f = SymbolicForm::function(2, vec![SymTerm::new(c(1.0), vec![g.clone(), g])])?.sample(&d)?;
        let comp = f.component(MultiIndex::EMPTY).expect("component");
        ratios.push(sobolev::fubini_ratio(comp, &d, SobolevSpec::new(1, 2.0)?, 1)?.ratio);
    }
    let ok = ratios.iter().all(|r| (0.2..=5.0).contains(r));
    Ok((ok, format!("gaussian product ratios {ratios:.3?} in [0.2, 5]")))
}

fn harness_suite(checks: &mut Vec<Check>) {
    let mut cfg = ExperimentConfig::standard(2);
    cfg.out = std::env::temp_dir();
    match run_experiments(&cfg, false) {
        Ok(report) => {
            for (exp, cr) in report.criteria() {
                checks.push(Check {
                    name: format!("bidisc {exp}: {}", cr.name),
                    passed: cr.passed,
                    detail: cr.verdict(),
                });
            }
            for e in report.experiments.iter().filter(|e| e.error.is_some()) {
                checks.push(Check {
                    name: format!("bidisc {}", e.name),
                    passed: false,
                    detail: e.error.clone().unwrap_or_default(),
                });
            }
        }
        Err(e) => checks.push(Check {
            name: "bidisc experiments".into(),
            passed: false,
            detail: e.to_string(),
        }),
    }
}

/// Runs every example check and the standard bidisc experiments.
pub fn run_selftest() -> SelftestReport {
    let t = Instant::now();
    let cases: Vec<(&str, fn() -> Outcome)> = vec![
        ("wedge insertion signs", wedge_examples),
        ("bidegree projections", projection_examples),
        ("dbar of z̄₁, z₁z₂, z̄₂dz̄₁", dbar_examples),
        ("partial dbar", partial_dbar_examples),
        ("extension reproduction", extension_examples),
        ("Cauchy transform of 1 on the disk", cauchy_examples),
        ("FFT vs direct summation", fft_vs_direct),
        ("kernel table symmetries", kernel_examples),
        ("skew Bergman projection", skew_bergman_examples),
        ("slicewise wedge signs", slicewise_examples),
        ("composed homotopy on coordinate forms", composed_examples),
        ("product projection", projection_product_examples),
        ("exactness on a gaussian potential", exactness_example),
        ("homotopy residual of a holomorphic function", holomorphic_residual),
        ("anticommutation for V-independent forms", v_independent_anticommutation),
        ("Sobolev norms of 0 and constants", norm_examples),
        ("corpus examples", corpus_examples),
        ("Fubini ratio band", fubini_example),
    ];
    let mut checks: Vec<Check> = cases
        .into_iter()
        .map(|(name, f)| {
            let (passed, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
            Check {
                name: name.to_string(),
                passed,
                detail,
            }
        })
        .collect();
    harness_suite(&mut checks);
    let passed = checks.iter().all(|c| c.passed);
    SelftestReport {
        checks,
        seconds: t.elapsed().as_secs_f64(),
        passed,
    }
}
