use std::f64::consts::PI;
use std::sync::Arc;

use dbp_core::convergence::{fit_order, OrderFit};
use dbp_core::corpus::smooth_corpus;
use dbp_core::planar::ExtensionKind;
use dbp_core::quadrature::integrate;
use dbp_core::sobolev::{form_l2_norm, form_sobolev_norm, sobolev_norm, SobolevSpec};
use dbp_core::symbolic::{ExpPoly, SymTerm, SymbolicForm};
use dbp_core::{ComposedOperators, FormField, MultiIndex, ProductDomain, SeparatedField};
use ndarray::Array2;
use num_complex::Complex64 as C64;
use proptest::prelude::*;

fn polydisc(m: usize, n: usize) -> Arc<ProductDomain> {
    Arc::new(ProductDomain::polydisc(m, n).unwrap())
}

fn random_form(d: &Arc<ProductDomain>, bits: &[u32], seed: u64) -> FormField {
    let mut f = FormField::zero(d.clone());
    for (k, &b) in bits.iter().enumerate() {
        let s = (seed as f64 + k as f64) * 0.37;
        let factors = d
            .factors()
            .iter()
            .enumerate()
            .map(|(j, p)| p.grid().sample(|z| (z * C64::new(0.3 + s.sin(), 0.2 * j as f64)).exp() + s.cos()))
            .collect();
        let comp = SeparatedField::from_factors(factors);
        let i = MultiIndex::from_bits(b);
        if f.component(i).is_none() {
            f.add_component(i, comp).unwrap();
        }
    }
    f
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bidegree_projections_are_complete(m in 1usize..=4, raw in proptest::collection::vec(0u32..16, 1..6), seed in 0u64..1000) {
        let d = polydisc(m, 9);
        let bits: Vec<u32> = raw.iter().map(|b| b & ((1 << m) - 1)).collect();
        let f = random_form(&d, &bits, seed);
        for cut in 0..=m {
            let mut sum = FormField::zero(d.clone());
            for j in 0..=cut {
                for k in 0..=(m - cut) {
                    sum = sum.add(&f.project_degree(j, k, cut));
                }
            }
            prop_assert!(sum.sub(&f).compress().is_zero());
        }
    }

    #[test]
    fn analytic_dbar_squared_is_exactly_zero(m in 1usize..=3, seed in 0u64..1000) {
        for member in smooth_corpus(m, seed).unwrap() {
            prop_assert!(member.form.dbar().dbar().simplify().is_zero(), "{}", member.id);
            prop_assert!(member.dbar.dbar().simplify().is_zero(), "{}", member.id);
        }
    }

    #[test]
    fn norm_homogeneity_and_triangle(re in -3.0f64..3.0, im in -3.0f64..3.0, s1 in 0u64..100, s2 in 0u64..100, k in 0usize..=2) {
        let d = polydisc(2, 20);
        let f = random_form(&d, &[0], s1);
        let g = random_form(&d, &[0], s2 + 100);
        let spec = SobolevSpec::new(k, 2.0 + (s1 % 3) as f64).unwrap();
        let c = C64::new(re, im);
        let nf = form_sobolev_norm(&f, spec).unwrap();
        let ncf = form_sobolev_norm(&f.scaled(c), spec).unwrap();
        prop_assert!((ncf - c.norm() * nf).abs() <= 1e-12 * (c.norm() * nf).max(1e-300));
        let ng = form_sobolev_norm(&g, spec).unwrap();
        let nfg = form_sobolev_norm(&f.add(&g), spec).unwrap();
        prop_assert!(nfg <= (nf + ng) * (1.0 + 1e-12));
    }
}

#[test]
fn degree_bookkeeping_of_composed_operators() {
    for m in [1, 2, 3] {
        let d = polydisc(m, 16);
        let ops = ComposedOperators::planar(d.clone(), ExtensionKind::default(), None).unwrap();
        for member in smooth_corpus(m, 4).unwrap() {
            let f = member.form.sample(&d).unwrap();
            let q = f.pure_degree().unwrap();
            let hf = ops.homotopy(&f).unwrap();
            if q == 0 {
                assert!(hf.is_zero());
            } else {
                assert!(hf.degrees().iter().all(|&p| p == q - 1), "{}", member.id);
                assert!(ops.projection(&f).unwrap().is_zero(), "{}", member.id);
            }
        }
    }
}

/// Relative `L²` gaps, per grid, between finite-difference and analytic ∂̄
/// and of the finite-difference ∂̄∂̄.
fn fd_dbar_sweep(grids: &[usize]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let members = smooth_corpus(2, 11).unwrap();
    let picks: Vec<_> = members.iter().filter(|c| c.degrees() != vec![2]).take(4).collect();
    let (mut hs, mut first, mut second) = (Vec::new(), Vec::new(), Vec::new());
    for &n in grids {
        let d = polydisc(2, n);
        let (mut a, mut b) = (0.0f64, 0.0f64);
        for c in &picks {
            let (f, df) = c.sample(&d).unwrap();
            let fd = f.dbar();
            let scale = form_l2_norm(&df, 2).unwrap();
            a = a.max(form_l2_norm(&fd.sub(&df).compress(), 2).unwrap() / scale);
            b = b.max(form_l2_norm(&fd.dbar().compress(), 4).unwrap() / scale);
        }
        hs.push(d.factor(0).h());
        first.push(a);
        second.push(b);
    }
    (hs, first, second)
}

#[test]
fn fd_dbar_converges_at_fourth_order() {
    let (hs, first, second) = fd_dbar_sweep(&[32, 64, 128]);
    let p1 = fit_order(&hs, &first).unwrap();
    assert!(p1 >= 3.5, "∂̄ gaps {first:?}, order {p1}");
    // stencils on different factors act on different factor arrays, so the
    // discrete ∂̄∂̄ cancels exactly in separated storage
    let fit = OrderFit::new(&hs, &second);
    assert!(fit.at_floor || fit.order.is_some_and(|p| p >= 3.5), "∂̄∂̄ residuals {second:?}");
}

/// `∫_D |g|²` and `∫_D |∇g|²` for `g = exp(−r²/w²)` on the unit disk.
fn gaussian_disk_integrals(w: f64) -> (f64, f64) {
    let a = integrate(&|r| C64::new(2.0 * PI * r * (-2.0 * r * r / (w * w)).exp(), 0.0), 0.0, 1.0, 1e-14).re;
    let b = integrate(
        &|r| {
            let g2 = (-2.0 * r * r / (w * w)).exp();
            C64::new(2.0 * PI * r * 4.0 * r * r / w.powi(4) * g2, 0.0)
        },
        0.0,
        1.0,
        1e-14,
    )
    .re;
    (a, b)
}

#[test]
fn discrete_w12_norm_converges_to_quadrature_value() {
    let w = 0.7;
    let (a, b) = gaussian_disk_integrals(w);
    // ‖g⊗g‖²_{W^{1,2}} = a² + 2ab on the bidisc
    let exact = (a * a + 2.0 * a * b).sqrt();
    let spec = SobolevSpec::new(1, 2.0).unwrap();
    let (mut hs, mut errs) = (Vec::new(), Vec::new());
    for n in [64, 128, 256, 512] {
        let d = polydisc(2, n);
        let g = ExpPoly::gaussian(C64::new(0.0, 0.0), w);
        let f = SymbolicForm::function(2, vec![SymTerm::new(C64::new(1.0, 0.0), vec![g.clone(), g])])
            .unwrap()
            .sample(&d)
            .unwrap();
        let v = sobolev_norm(f.component(MultiIndex::EMPTY).unwrap(), &d, spec).unwrap();
        hs.push(d.factor(0).h());
        errs.push((v - exact).abs() / exact);
    }
    let p = fit_order(&hs, &errs).unwrap();
    assert!(p >= 1.0, "errors {errs:?}, order {p}");
}

#[test]
fn re_z1_norm_on_the_bidisc_within_one_percent() {
    // ∫_{D×D} |Re z₁|² + |∂_{x₁} Re z₁|² = π·π/4 + π·π
    let exact = (PI * PI * 1.25).sqrt();
    let d = polydisc(2, 2048);
    let dims: Vec<(usize, usize)> = d.factors().iter().map(|p| p.dims()).collect();
    let f = SeparatedField::from_factors(vec![
        d.factor(0).grid().sample(|z| z.re.into()),
        Array2::from_elem(dims[1], C64::new(1.0, 0.0)),
    ]);
    let v = sobolev_norm(&f, &d, SobolevSpec::new(1, 2.0).unwrap()).unwrap();
    let rel = (v - exact).abs() / exact;
    assert!(rel <= 1e-2, "{v} vs {exact}: {rel}");
}
