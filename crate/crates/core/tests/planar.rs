use std::sync::Arc;

use dbp_core::fd;
use dbp_core::planar::oracle::{direct_cauchy_sum, disk_cauchy_of_one};
use dbp_core::planar::{ExtensionKind, PlanarCauchy, PreparedExtension};
use dbp_core::{PlanarDomain, Shape};
use ndarray::Array2;
use num_complex::Complex64 as C64;

fn disk(n: usize) -> Arc<PlanarDomain> {
    Arc::new(PlanarDomain::new(Shape::unit_disk(), n).unwrap())
}

fn rel_l2(a: &Array2<C64>, b: &Array2<C64>, mask: &Array2<bool>) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for ((x, y), &m) in a.iter().zip(b).zip(mask) {
        if m {
            num += (x - y).norm_sqr();
            den += y.norm_sqr();
        }
    }
    (num / den).sqrt()
}

fn slope(h: &[f64], r: &[f64]) -> f64 {
    let n = h.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = h.iter().zip(r).map(|(h, r)| (h.ln(), r.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[test]
fn cauchy_of_one_is_conj_z_on_disk() {
    for n in [32, 64, 128] {
        let d = disk(n);
        let s = PlanarCauchy::new(d.clone(), ExtensionKind::Zero).unwrap();
        let one = Array2::from_elem(d.dims(), C64::new(1.0, 0.0));
        let u = s.cauchy_transform(&one).unwrap();
        let mut err = 0.0f64;
        for ((iy, ix), &m) in d.mask().indexed_iter() {
            if m {
                err = err.max((u[[iy, ix]] - d.grid().node(iy, ix).conj()).norm());
            }
        }
        assert!(err <= 10.0 * d.h(), "n={n}: {err} vs {}", 10.0 * d.h());
    }
}

#[test]
fn quadrature_oracle_agrees_with_conj_z() {
    let d = disk(32);
    for (iy, ix) in [(16, 16), (10, 20), (22, 9)] {
        let z = d.grid().node(iy, ix);
        let v = disk_cauchy_of_one(z, C64::new(0.0, 0.0), 1.0, 1e-13);
        assert!((v - z.conj()).norm() < 1e-10);
    }
}

#[test]
fn fft_matches_direct_sum() {
    let d = disk(64);
    let s = PlanarCauchy::new(d.clone(), ExtensionKind::Zero).unwrap();
    let mut g = d.grid().sample(|z| z.conj());
    for (v, &m) in g.iter_mut().zip(d.mask()) {
        if !m {
            *v = C64::new(0.0, 0.0);
        }
    }
    let fast = s.table().convolve(&g).unwrap();
    let slow = direct_cauchy_sum(s.table(), &g);
    let full = Array2::from_elem(d.dims(), true);
    let r = rel_l2(&fast, &slow, &full);
    assert!(r <= 1e-10, "{r}");
}

#[test]
fn dbar_of_cauchy_converges_with_reflection() {
    let mut hs = Vec::new();
    let mut rs = Vec::new();
    for n in [32, 64, 128] {
        let d = disk(n);
        let s = PlanarCauchy::new(d.clone(), ExtensionKind::Reflection { order: 3 }).unwrap();
        let g = d
            .grid()
            .sample(|z| (-(z - C64::new(0.3, 0.0)).norm_sqr() / 0.5).exp().into());
        let u = s.cauchy_transform(&g).unwrap();
        let du = fd::dbar(d.plan(), &u, d.h());
        let r = rel_l2(&du, &g, &d.eroded_mask(2));
        hs.push(d.h());
        rs.push(r);
    }
    let p = slope(&hs, &rs);
    assert!(rs[2] < 1e-2 && p >= 1.5, "{rs:?} order {p}");
}

#[test]
fn reflection_reproduces_low_degree_near_boundary() {
    let rect = Shape::Rectangle {
        min: C64::new(-1.0, -0.5),
        max: C64::new(1.0, 0.5),
    };
    let d = PlanarDomain::new(rect, 64).unwrap();
    let e = PreparedExtension::new(&d, ExtensionKind::Reflection { order: 2 }).unwrap();
    let g = d.grid().sample(|z| z.re.into());
    let eg = e.apply(&g).unwrap();
    let h = d.h();
    let mut checked = 0;
    for ((iy, ix), v) in eg.indexed_iter() {
        let z = d.grid().node(iy, ix);
        let near = z.re.abs() < 1.0 + 2.0 * h && z.im.abs() < 0.5 + 2.0 * h;
        if near {
            assert!((v - g[[iy, ix]]).norm() < 1e-9, "{z}: {v}");
            checked += 1;
        }
    }
    assert!(checked > 0);

    let dk = disk(48);
    let e = PreparedExtension::new(&dk, ExtensionKind::Reflection { order: 2 }).unwrap();
    let one = Array2::from_elem(dk.dims(), C64::new(1.0, 0.0));
    let eg = e.apply(&one).unwrap();
    for ((iy, ix), v) in eg.indexed_iter() {
        let z = dk.grid().node(iy, ix);
        if z.norm() < 1.0 + 2.0 * dk.h() {
            assert!((v - 1.0).norm() < 1e-9);
        }
        let edge = iy == 0 || ix == 0 || iy + 1 == dk.n() || ix + 1 == dk.n();
        if edge {
            assert_eq!(*v, C64::new(0.0, 0.0));
        }
    }
}

#[test]
fn zero_extension_clears_exterior() {
    let d = disk(32);
    let e = PreparedExtension::new(&d, ExtensionKind::Zero).unwrap();
    let g = d.grid().sample(|z| z * 3.0 + 1.0);
    let eg = e.apply(&g).unwrap();
    for ((v, w), &m) in eg.iter().zip(&g).zip(d.mask()) {
        if m {
            assert_eq!(v, w);
        } else {
            assert_eq!(*v, C64::new(0.0, 0.0));
        }
    }
}

#[test]
fn annulus_reflection_is_supported() {
    let ann = Shape::Annulus {
        center: C64::new(0.0, 0.0),
        inner: 0.4,
        outer: 1.0,
    };
    let d = PlanarDomain::new(ann, 64).unwrap();
    let e = PreparedExtension::new(&d, ExtensionKind::Reflection { order: 3 }).unwrap();
    let one = Array2::from_elem(d.dims(), C64::new(1.0, 0.0));
    let eg = e.apply(&one).unwrap();
    // the hole near its rim is filled with 1
    let mut rim = 0;
    for ((iy, ix), v) in eg.indexed_iter() {
        let r = d.grid().node(iy, ix).norm();
        if r > 0.36 && r <= 0.4 {
            assert!((v - 1.0).norm() < 1e-9);
            rim += 1;
        }
    }
    assert!(rim > 0);
}

#[test]
fn skew_bergman_kills_conj_z() {
    let d = disk(128);
    let s = PlanarCauchy::new(d.clone(), ExtensionKind::default()).unwrap();
    let g = d.grid().sample(|z| z.conj());
    let pg = s.skew_bergman(&g).unwrap();
    let mut max = 0.0f64;
    for (v, &m) in pg.iter().zip(&d.eroded_mask(2)) {
        if m {
            max = max.max(v.norm());
        }
    }
    assert!(max < 10.0 * d.h(), "{max}");
}

#[test]
fn rectangle_corners_reproduce_quadratics_on_every_grid() {
    let rect = Shape::Rectangle {
        min: C64::new(-1.0, -0.5),
        max: C64::new(1.0, 0.5),
    };
    // δ/3 = 0.1 for order 2 on this rectangle: the cutoff is 1 there
    for n in [24, 32, 40, 48, 96] {
        let d = PlanarDomain::new(rect.clone(), n).unwrap();
        let e = PreparedExtension::new(&d, ExtensionKind::Reflection { order: 2 }).unwrap();
        let g = d.grid().sample(|z| z * z + z.re * 2.0);
        let eg = e.apply(&g).unwrap();
        for ((iy, ix), v) in eg.indexed_iter() {
            let z = d.grid().node(iy, ix);
            if z.re.abs() < 1.09 && z.im.abs() < 0.59 {
                assert!((v - g[[iy, ix]]).norm() < 1e-9, "n={n} at {z}: {v}");
            }
        }
    }
}
