//! Extension of factor fields from the mask to the whole bounding box.
//!
//! `Zero` sets the exterior to 0. `Reflection { order: r }` is a
//! Hestenes-type reflection: an exterior node at normal distance `d` gets
//! `χ(d) Σ_i c_i g(b − λ_i d n)` with `λ_i = i/2` (`i = 1..=r+1`) and
//! `Σ_i c_i (−λ_i)^k = 1` for `k ≤ r`, so polynomials of degree `≤ r` along
//! the normal are continued exactly where `χ = 1`. Values at the reflected
//! points come from a local cubic least-squares fit over masked nodes.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use ndarray::Array2;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{PlanarDomain, Shape};
use crate::error::{DbpError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ExtensionKind {
    Zero,
    Reflection { order: u8 },
}

impl ExtensionKind {
    pub fn validate(self) -> Result<Self> {
        match self {
            ExtensionKind::Reflection { order } if !(1..=3).contains(&order) => Err(
                DbpError::Config(format!("reflection order must be 1, 2 or 3, got {order}")),
            ),
            k => Ok(k),
        }
    }
}

impl Default for ExtensionKind {
    fn default() -> Self {
        ExtensionKind::Reflection { order: 3 }
    }
}

impl fmt::Display for ExtensionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtensionKind::Zero => write!(f, "zero"),
            ExtensionKind::Reflection { order } => write!(f, "reflection:{order}"),
        }
    }
}

impl FromStr for ExtensionKind {
    type Err = DbpError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "zero" {
            return Ok(ExtensionKind::Zero);
        }
        let order = s
            .strip_prefix("reflection:")
            .and_then(|r| r.parse::<u8>().ok())
            .ok_or_else(|| {
                DbpError::Config(format!(
                    "unknown extension '{s}', expected zero or reflection:r"
                ))
            })?;
        ExtensionKind::Reflection { order }.validate()
    }
}

/// Coefficients `c` with `Σ_i c_i (−λ_i)^k = 1` for `k = 0..=r`.
pub fn hestenes_coefficients(lambdas: &[f64]) -> Vec<f64> {
    let n = lambdas.len();
    let a = DMatrix::from_fn(n, n, |k, i| (-lambdas[i]).powi(k as i32));
    let b = nalgebra::DVector::from_element(n, 1.0);
    let c = a.lu().solve(&b).expect("distinct reflection factors");
    c.iter().copied().collect()
}

pub fn reflection_factors(order: u8) -> Vec<f64> {
    (1..=order as usize + 1).map(|i| i as f64 / 2.0).collect()
}

/// `C^∞` step: 1 for `t ≤ 0`, 0 for `t ≥ 1`.
pub fn smooth_step(t: f64) -> f64 {
    let f = |s: f64| if s > 0.0 { (-1.0 / s).exp() } else { 0.0 };
    let t = t.clamp(0.0, 1.0);
    let (a, b) = (f(1.0 - t), f(t));
    a / (a + b)
}

/// Cutoff in the normal distance: 1 for `d ≤ δ/3`, 0 for `d ≥ δ`.
pub fn cutoff(d: f64, delta: f64) -> f64 {
    smooth_step((d - delta / 3.0) / (2.0 * delta / 3.0))
}

const INTERP_RADIUS: f64 = 3.0;
const INTERP_MIN_POINTS: usize = 20;
const INTERP_MIN_RCOND: f64 = 1e-3;

/// Weights over masked nodes that reproduce cubic polynomials at `p`.
pub fn interpolation_weights(dom: &PlanarDomain, p: C64) -> Vec<(usize, f64)> {
    let grid = dom.grid();
    let mask = dom.mask();
    let n = grid.n as i64;
    let h = grid.h;
    let (fx, fy) = grid.index_coords(p);
    let (cx, cy) = (fx.round() as i64, fy.round() as i64);
    let mut radius = INTERP_RADIUS;
    loop {
        let r = radius.ceil() as i64 + 1;
        let mut pts: Vec<(usize, f64, f64)> = Vec::new();
        for iy in (cy - r).max(0)..=(cy + r).min(n - 1) {
            for ix in (cx - r).max(0)..=(cx + r).min(n - 1) {
                let (iy, ix) = (iy as usize, ix as usize);
                if !mask[[iy, ix]] {
                    continue;
                }
                let d = (grid.node(iy, ix) - p) / h;
                if d.norm() <= radius {
                    // offsets scaled to the unit disk keep the monomial columns
                    // comparable; row 0 of the pseudo-inverse is unaffected
                    pts.push((iy * grid.n + ix, d.re / radius, d.im / radius));
                }
            }
        }
        if pts.len() >= INTERP_MIN_POINTS {
            let a = DMatrix::from_fn(pts.len(), 10, |row, col| {
                let (_, x, y) = pts[row];
                let (ea, eb) = MONOMIALS[col];
                x.powi(ea) * y.powi(eb)
            });
            let svd = a.svd(true, true);
            let s = &svd.singular_values;
            let (smax, smin) = (s.max(), s.min());
            if smin > INTERP_MIN_RCOND * smax {
                let u = svd.u.as_ref().expect("u");
                let vt = svd.v_t.as_ref().expect("v_t");
                // row 0 of the pseudo-inverse: Σ_k V[0,k] U[:,k] / σ_k
                return pts
                    .iter()
                    .enumerate()
                    .map(|(row, &(k, _, _))| {
                        let w: f64 = (0..s.len()).map(|c| vt[(c, 0)] * u[(row, c)] / s[c]).sum();
                        (k, w)
                    })
                    .collect();
            }
        }
        radius += 0.5;
        if radius > n as f64 {
            // the mask is non-empty, so this only happens on absurd grids
            return Vec::new();
        }
    }
}

const MONOMIALS: [(i32, i32); 10] = [
    (0, 0),
    (1, 0),
    (0, 1),
    (2, 0),
    (1, 1),
    (0, 2),
    (3, 0),
    (2, 1),
    (1, 2),
    (0, 3),
];

/// An exterior node: a cutoff weight times a combination of sample points.
type Stencil = Vec<(C64, f64)>;

/// Sparse rows `Eg[t] = Σ w g[s]` for exterior targets, ready to apply.
#[derive(Clone, Debug)]
pub struct PreparedExtension {
    kind: ExtensionKind,
    dims: (usize, usize),
    mask: Vec<bool>,
    targets: Vec<usize>,
    offsets: Vec<usize>,
    sources: Vec<usize>,
    weights: Vec<f64>,
}

impl PreparedExtension {
    pub fn new(dom: &PlanarDomain, kind: ExtensionKind) -> Result<Self> {
        let kind = kind.validate()?;
        let mask: Vec<bool> = dom.mask().iter().copied().collect();
        let mut out = PreparedExtension {
            kind,
            dims: dom.dims(),
            mask,
            targets: Vec::new(),
            offsets: vec![0],
            sources: Vec::new(),
            weights: Vec::new(),
        };
        let order = match kind {
            ExtensionKind::Zero => return Ok(out),
            ExtensionKind::Reflection { order } => order,
        };
        let geometry = ReflectionGeometry::new(dom, order)?;
        let n = dom.n();
        let exterior: Vec<usize> = (0..n * n).filter(|&k| !out.mask[k]).collect();
        let rows: Vec<(usize, Vec<(usize, f64)>)> = exterior
            .par_iter()
            .filter_map(|&k| {
                let z = dom.grid().node(k / n, k % n);
                let stencil = geometry.stencil(z);
                if stencil.is_empty() {
                    return None;
                }
                let mut acc: Vec<(usize, f64)> = Vec::new();
                for (p, c) in stencil {
                    for (s, w) in interpolation_weights(dom, p) {
                        acc.push((s, c * w));
                    }
                }
                acc.sort_unstable_by_key(|e| e.0);
                let mut merged: Vec<(usize, f64)> = Vec::with_capacity(acc.len());
                for (s, w) in acc {
                    match merged.last_mut() {
                        Some(last) if last.0 == s => last.1 += w,
                        _ => merged.push((s, w)),
                    }
                }
                Some((k, merged))
            })
            .collect();
        for (k, row) in rows {
            out.targets.push(k);
            for (s, w) in row {
                out.sources.push(s);
                out.weights.push(w);
            }
            out.offsets.push(out.sources.len());
        }
        Ok(out)
    }

    pub fn kind(&self) -> ExtensionKind {
        self.kind
    }

    /// Number of exterior nodes that receive a nonzero extension.
    pub fn support_len(&self) -> usize {
        self.targets.len()
    }

    /// `Eg`: equal to `g` on the mask; exterior values of `g` are ignored.
    pub fn apply(&self, g: &Array2<C64>) -> Result<Array2<C64>> {
        if g.dim() != self.dims {
            return Err(DbpError::ShapeMismatch {
                expected: vec![self.dims.0, self.dims.1],
                got: vec![g.dim().0, g.dim().1],
            });
        }
        let src = g.as_standard_layout();
        let src = src.as_slice().expect("layout");
        let mut out: Vec<C64> = src
            .iter()
            .zip(&self.mask)
            .map(|(&v, &m)| if m { v } else { C64::new(0.0, 0.0) })
            .collect();
        for (r, &t) in self.targets.iter().enumerate() {
            let (a, b) = (self.offsets[r], self.offsets[r + 1]);
            out[t] = self.sources[a..b]
                .iter()
                .zip(&self.weights[a..b])
                .map(|(&s, &w)| src[s] * w)
                .sum();
        }
        Ok(Array2::from_shape_vec(self.dims, out).expect("dims"))
    }
}

/// Per-shape reflection data.
struct ReflectionGeometry {
    shape: Shape,
    lambdas: Vec<f64>,
    coeffs: Vec<f64>,
    /// Cutoff widths: outer (or x) interface, inner (or y) interface.
    delta: (f64, f64),
}

impl ReflectionGeometry {
    fn new(dom: &PlanarDomain, order: u8) -> Result<Self> {
        let lambdas = reflection_factors(order);
        let coeffs = hestenes_coefficients(&lambdas);
        let lmax = *lambdas.last().expect("nonempty");
        let bbox = dom.grid().bbox;
        let (lo, hi) = dom.shape().bounds();
        let gap_x = (lo.re - bbox.x_min).min(bbox.x_max() - hi.re);
        let gap_y = (lo.im - bbox.y_min).min(bbox.y_max() - hi.im);
        let gap = gap_x.min(gap_y);
        let delta = match *dom.shape() {
            Shape::Disk { radius, .. } => {
                let d = (0.8 * gap).min(0.9 * radius / lmax);
                (d, d)
            }
            Shape::Annulus { inner, outer, .. } => {
                let band = 0.45 * (outer - inner) / lmax;
                ((0.8 * gap).min(band), (0.9 * inner).min(band))
            }
            Shape::Rectangle { min, max } => (
                (0.8 * gap_x).min(0.45 * (max.re - min.re) / lmax),
                (0.8 * gap_y).min(0.45 * (max.im - min.im) / lmax),
            ),
        };
        if !(delta.0 > 0.0 && delta.1 > 0.0) {
            return Err(DbpError::UnsupportedShape(dom.shape().to_string()));
        }
        Ok(ReflectionGeometry {
            shape: dom.shape().clone(),
            lambdas,
            coeffs,
            delta,
        })
    }

    fn radial(&self, z: C64, center: C64, r0: f64, d: f64, outward: f64, delta: f64) -> Stencil {
        if d >= delta {
            return Vec::new();
        }
        let chi = cutoff(d, delta);
        if chi == 0.0 {
            return Vec::new();
        }
        let w = z - center;
        let e = if w.norm() > 0.0 { w / w.norm() } else { C64::new(1.0, 0.0) };
        self.lambdas
            .iter()
            .zip(&self.coeffs)
            .map(|(&l, &c)| (center + e * (r0 - outward * l * d), chi * c))
            .collect()
    }

    /// Reflection along one axis: `(coordinate, weight)` pairs.
    fn axis(&self, x: f64, lo: f64, hi: f64, delta: f64) -> Vec<(f64, f64)> {
        let (d, edge, dir) = if x >= hi {
            (x - hi, hi, -1.0)
        } else if x <= lo {
            (lo - x, lo, 1.0)
        } else {
            return vec![(x, 1.0)];
        };
        if d >= delta {
            return Vec::new();
        }
        let chi = cutoff(d, delta);
        if chi == 0.0 {
            return Vec::new();
        }
        self.lambdas
            .iter()
            .zip(&self.coeffs)
            .map(|(&l, &c)| (edge + dir * l * d, chi * c))
            .collect()
    }

    fn stencil(&self, z: C64) -> Stencil {
        match self.shape {
            Shape::Disk { center, radius } => {
                let d = (z - center).norm() - radius;
                self.radial(z, center, radius, d.max(0.0), 1.0, self.delta.0)
            }
            Shape::Annulus {
                center,
                inner,
                outer,
            } => {
                let rho = (z - center).norm();
                if rho >= outer {
                    self.radial(z, center, outer, rho - outer, 1.0, self.delta.0)
                } else if rho <= inner {
                    self.radial(z, center, inner, inner - rho, -1.0, self.delta.1)
                } else {
                    // an exterior node strictly inside the annulus cannot occur
                    Vec::new()
                }
            }
            Shape::Rectangle { min, max } => {
                let xs = self.axis(z.re, min.re, max.re, self.delta.0);
                let ys = self.axis(z.im, min.im, max.im, self.delta.1);
                let mut out = Vec::with_capacity(xs.len() * ys.len());
                for &(x, wx) in &xs {
                    for &(y, wy) in &ys {
                        out.push((C64::new(x, y), wx * wy));
                    }
                }
                out
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hestenes_moments() {
        for order in 1..=3u8 {
            let l = reflection_factors(order);
            let c = hestenes_coefficients(&l);
            for k in 0..=order as i32 {
                let s: f64 = l.iter().zip(&c).map(|(l, c)| c * (-l).powi(k)).sum();
                assert!((s - 1.0).abs() < 1e-12, "order {order} moment {k}: {s}");
            }
        }
    }

    #[test]
    fn cutoff_profile() {
        assert_eq!(cutoff(0.0, 0.3), 1.0);
        assert_eq!(cutoff(0.1, 0.3), 1.0);
        assert_eq!(cutoff(0.3, 0.3), 0.0);
        let mid = cutoff(0.2, 0.3);
        assert!(mid > 0.0 && mid < 1.0);
    }

    #[test]
    fn parse_kinds() {
        assert_eq!("zero".parse::<ExtensionKind>().unwrap(), ExtensionKind::Zero);
        assert_eq!(
            "reflection:2".parse::<ExtensionKind>().unwrap(),
            ExtensionKind::Reflection { order: 2 }
        );
        assert!("reflection:4".parse::<ExtensionKind>().is_err());
        assert!("mirror".parse::<ExtensionKind>().is_err());
        let k = ExtensionKind::Reflection { order: 1 };
        assert_eq!(k.to_string().parse::<ExtensionKind>().unwrap(), k);
    }

    #[test]
    fn interpolation_reproduces_cubics() {
        let dom = PlanarDomain::new(Shape::unit_disk(), 32).unwrap();
        let f = |z: C64| z.re.powi(3) - 2.0 * z.re * z.im + z.im * z.im + 0.5;
        for p in [C64::new(0.1, 0.2), C64::new(0.95, 0.0), C64::new(-0.6, -0.7)] {
            let w = interpolation_weights(&dom, p);
            let n = dom.n();
            let v: f64 = w.iter().map(|&(k, w)| w * f(dom.grid().node(k / n, k % n))).sum();
            assert!((v - f(p)).abs() < 1e-10, "{p}: {v} vs {}", f(p));
        }
    }
}
