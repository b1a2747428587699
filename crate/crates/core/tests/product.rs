use std::sync::Arc;

use dbp_core::product::{homotopy_residual, relative_difference};
use dbp_core::symbolic::{ExpPoly, SymTerm, SymbolicForm};
use dbp_core::{ComposedOperators, ExtensionKind, MultiIndex, ProductDomain};
use num_complex::Complex64 as C64;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn bidisc(n: usize) -> Arc<ProductDomain> {
    Arc::new(ProductDomain::polydisc(2, n).unwrap())
}

fn sample_function() -> SymbolicForm {
    SymbolicForm::function(
        2,
        vec![SymTerm::new(
            c(1.0, 0.0),
            vec![ExpPoly::gaussian(c(0.2, -0.1), 0.8), ExpPoly::plane_wave(1.5, 0.7)],
        )],
    )
    .unwrap()
}

fn slope(hs: &[f64], rs: &[f64]) -> f64 {
    let n = hs.len() as f64;
    let x: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let y: Vec<f64> = rs.iter().map(|r| r.ln()).collect();
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[test]
fn bidisc_function_identity_converges() {
    let sym = sample_function();
    let dsym = sym.dbar();
    let mut hs = Vec::new();
    let mut rs = Vec::new();
    for n in [32, 64, 128] {
        let dom = bidisc(n);
        let ops = ComposedOperators::planar(dom.clone(), ExtensionKind::default(), None).unwrap();
        let f = sym.sample(&dom).unwrap();
        let df = dsym.sample(&dom).unwrap();
        let r = homotopy_residual(&ops, &f, Some(&df)).unwrap();
        let worst = r.iter().map(|d| d.relative).fold(0.0, f64::max);
        hs.push(dom.factor(0).h());
        rs.push(worst);
    }
    let order = slope(&hs, &rs);
    assert!(rs[2] <= 1e-2, "{rs:?}");
    assert!(order >= 1.5, "order {order}, {rs:?}");
}

#[test]
fn bidisc_one_form_identity_converges() {
    let mut sym = SymbolicForm::zero(2);
    sym.push(
        MultiIndex::single(0),
        SymTerm::new(c(1.0, 0.0), vec![ExpPoly::plane_wave(1.0, 0.2), ExpPoly::gaussian(c(0.0, 0.1), 0.9)]),
    )
    .unwrap();
    sym.push(
        MultiIndex::single(1),
        SymTerm::new(c(0.0, 1.0), vec![ExpPoly::z(), ExpPoly::zbar()]),
    )
    .unwrap();
    let dsym = sym.dbar();
    let mut hs = Vec::new();
    let mut rs = Vec::new();
    for n in [32, 64, 128] {
        let dom = bidisc(n);
        let ops = ComposedOperators::planar(dom.clone(), ExtensionKind::default(), None).unwrap();
        let f = sym.sample(&dom).unwrap();
        let df = dsym.sample(&dom).unwrap();
        let r = homotopy_residual(&ops, &f, Some(&df)).unwrap();
        hs.push(dom.factor(0).h());
        rs.push(r.iter().map(|d| d.relative).fold(0.0, f64::max));
    }
    let order = slope(&hs, &rs);
    assert!(rs[2] <= 1e-2, "{rs:?}");
    assert!(order >= 1.5, "order {order}, {rs:?}");
}

#[test]
fn recursive_and_fast_homotopy_agree() {
    let dom = Arc::new(ProductDomain::polydisc(3, 32).unwrap());
    let ops = ComposedOperators::planar(dom.clone(), ExtensionKind::default(), None).unwrap();
    let mut sym = SymbolicForm::zero(3);
    let g = ExpPoly::gaussian(c(0.1, 0.1), 0.7);
    for i in [vec![0], vec![2], vec![0, 1], vec![1, 2], vec![0, 1, 2]] {
        sym.push(
            MultiIndex::from_slice(&i).unwrap(),
            SymTerm::new(c(1.0, 0.5), vec![g.clone(), ExpPoly::plane_wave(1.0, 0.3), ExpPoly::zbar()]),
        )
        .unwrap();
    }
    let f = sym.sample(&dom).unwrap();
    let a = ops.homotopy(&f).unwrap();
    let b = ops.homotopy_recursive(&f).unwrap();
    let d = relative_difference(&a, &b).unwrap();
    assert!(d <= 1e-12, "{d}");
}

#[test]
fn homotopy_of_dzbar2_solves_dbar() {
    let dom = bidisc(128);
    let ops = ComposedOperators::planar(dom.clone(), ExtensionKind::default(), None).unwrap();
    let mut sym = SymbolicForm::zero(2);
    sym.push(MultiIndex::single(1), SymTerm::new(c(1.0, 0.0), vec![ExpPoly::one(), ExpPoly::one()]))
        .unwrap();
    let f = sym.sample(&dom).unwrap();
    let u = ops.homotopy(&f).unwrap();
    let r = u.dbar().sub(&f).compress();
    let rel = dbp_core::sobolev::form_l2_norm(&r, 2).unwrap()
        / dbp_core::sobolev::form_l2_norm(&f, 2).unwrap();
    assert!(rel < 1e-2, "{rel}");
    assert_eq!(u.degrees(), vec![0]);
}
