//! Planar factor domains on uniform cell-centred grids, and their products.

use std::fmt;
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{DbpError, Result};
use crate::fd::StencilPlan;

/// Minimum box margin as a fraction of the shape diameter.
pub const MIN_MARGIN_FRACTION: f64 = 0.25;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Shape {
    Disk { center: C64, radius: f64 },
    Rectangle { min: C64, max: C64 },
    Annulus { center: C64, inner: f64, outer: f64 },
}

impl Shape {
    pub fn unit_disk() -> Self {
        Shape::Disk {
            center: C64::new(0.0, 0.0),
            radius: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Shape::Disk { radius, .. } => radius > 0.0 && radius.is_finite(),
            Shape::Rectangle { min, max } => min.re < max.re && min.im < max.im,
            Shape::Annulus { inner, outer, .. } => inner > 0.0 && inner < outer,
        };
        if ok {
            Ok(())
        } else {
            Err(DbpError::InvalidDomain(format!("degenerate shape {self}")))
        }
    }

    /// Membership in the open domain; boundary points are exterior.
    pub fn contains(&self, z: C64) -> bool {
        match *self {
            Shape::Disk { center, radius } => (z - center).norm() < radius,
            Shape::Rectangle { min, max } => {
                z.re > min.re && z.re < max.re && z.im > min.im && z.im < max.im
            }
            Shape::Annulus {
                center,
                inner,
                outer,
            } => {
                let r = (z - center).norm();
                r > inner && r < outer
            }
        }
    }

    /// Axis-aligned bounds `(min, max)` of the closure.
    pub fn bounds(&self) -> (C64, C64) {
        match *self {
            Shape::Disk { center, radius } | Shape::Annulus {
                center,
                outer: radius,
                ..
            } => (
                center - C64::new(radius, radius),
                center + C64::new(radius, radius),
            ),
            Shape::Rectangle { min, max } => (min, max),
        }
    }

    pub fn diameter(&self) -> f64 {
        match *self {
            Shape::Disk { radius, .. } => 2.0 * radius,
            Shape::Annulus { outer, .. } => 2.0 * outer,
            Shape::Rectangle { min, max } => (max - min).norm(),
        }
    }

    pub fn area(&self) -> f64 {
        use std::f64::consts::PI;
        match *self {
            Shape::Disk { radius, .. } => PI * radius * radius,
            Shape::Annulus { inner, outer, .. } => PI * (outer * outer - inner * inner),
            Shape::Rectangle { min, max } => (max.re - min.re) * (max.im - min.im),
        }
    }

    /// Parses `disk(cx,cy,r)`, `rect(x0,y0,x1,y1)` or `annulus(cx,cy,rin,rout)`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || DbpError::Config(format!("cannot parse shape '{s}'"));
        let open = s.find('(').ok_or_else(bad)?;
        if !s.ends_with(')') {
            return Err(bad());
        }
        let name = s[..open].trim().to_ascii_lowercase();
        let args: Vec<f64> = s[open + 1..s.len() - 1]
            .split(',')
            .map(|a| a.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad())?;
        let shape = match (name.as_str(), args.as_slice()) {
            ("disk", &[cx, cy, r]) => Shape::Disk {
                center: C64::new(cx, cy),
                radius: r,
            },
            ("rect" | "rectangle", &[x0, y0, x1, y1]) => Shape::Rectangle {
                min: C64::new(x0, y0),
                max: C64::new(x1, y1),
            },
            ("annulus", &[cx, cy, ri, ro]) => Shape::Annulus {
                center: C64::new(cx, cy),
                inner: ri,
                outer: ro,
            },
            _ => return Err(bad()),
        };
        shape.validate()?;
        Ok(shape)
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Shape::Disk { center, radius } => {
                write!(f, "disk({},{},{})", center.re, center.im, radius)
            }
            Shape::Rectangle { min, max } => {
                write!(f, "rect({},{},{},{})", min.re, min.im, max.re, max.im)
            }
            Shape::Annulus {
                center,
                inner,
                outer,
            } => write!(f, "annulus({},{},{},{})", center.re, center.im, inner, outer),
        }
    }
}

/// Square bounding box `[x_min, x_min + side] × [y_min, y_min + side]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x_min: f64,
    pub y_min: f64,
    pub side: f64,
}

impl BoundingBox {
    pub fn x_max(&self) -> f64 {
        self.x_min + self.side
    }

    pub fn y_max(&self) -> f64 {
        self.y_min + self.side
    }

    /// Square box centred on the shape with the minimum admissible margin.
    pub fn around(shape: &Shape) -> Self {
        let (lo, hi) = shape.bounds();
        let margin = MIN_MARGIN_FRACTION * shape.diameter();
        let side = (hi.re - lo.re).max(hi.im - lo.im) + 2.0 * margin;
        let c = (lo + hi) * 0.5;
        BoundingBox {
            x_min: c.re - side / 2.0,
            y_min: c.im - side / 2.0,
            side,
        }
    }

    /// `[x_min, y_min, x_max, y_max]`, the snapshot layout.
    pub fn to_array(&self) -> [f64; 4] {
        [self.x_min, self.y_min, self.x_max(), self.y_max()]
    }
}

/// A uniform cell-centred `n × n` grid. Arrays are indexed `[iy, ix]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FactorGrid {
    pub bbox: BoundingBox,
    pub n: usize,
    pub h: f64,
}

impl FactorGrid {
    pub fn new(bbox: BoundingBox, n: usize) -> Self {
        FactorGrid {
            bbox,
            n,
            h: bbox.side / n as f64,
        }
    }

    pub fn x(&self, ix: usize) -> f64 {
        self.bbox.x_min + (ix as f64 + 0.5) * self.h
    }

    pub fn y(&self, iy: usize) -> f64 {
        self.bbox.y_min + (iy as f64 + 0.5) * self.h
    }

    pub fn node(&self, iy: usize, ix: usize) -> C64 {
        C64::new(self.x(ix), self.y(iy))
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Real-valued index coordinates of `z` (`ix`, `iy`), unclamped.
    pub fn index_coords(&self, z: C64) -> (f64, f64) {
        (
            (z.re - self.bbox.x_min) / self.h - 0.5,
            (z.im - self.bbox.y_min) / self.h - 0.5,
        )
    }

    /// Samples `f` at every node.
    pub fn sample(&self, f: impl Fn(C64) -> C64) -> Array2<C64> {
        Array2::from_shape_fn((self.n, self.n), |(iy, ix)| f(self.node(iy, ix)))
    }
}

/// One planar factor: a shape, its grid and the node mask.
pub struct PlanarDomain {
    shape: Shape,
    grid: FactorGrid,
    mask: Array2<bool>,
    plan: StencilPlan,
}

impl fmt::Debug for PlanarDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PlanarDomain")
            .field("shape", &self.shape)
            .field("grid", &self.grid)
            .finish()
    }
}

impl PlanarDomain {
    pub fn new(shape: Shape, n: usize) -> Result<Self> {
        let bbox = BoundingBox::around(&shape);
        Self::with_box(shape, bbox, n)
    }

    pub fn with_box(shape: Shape, bbox: BoundingBox, n: usize) -> Result<Self> {
        shape.validate()?;
        if n < 5 {
            return Err(DbpError::DegenerateGrid(format!(
                "need at least 5 nodes per axis, got {n}"
            )));
        }
        let (lo, hi) = shape.bounds();
        let margin = MIN_MARGIN_FRACTION * shape.diameter() * (1.0 - 1e-12);
        let gaps = [
            lo.re - bbox.x_min,
            lo.im - bbox.y_min,
            bbox.x_max() - hi.re,
            bbox.y_max() - hi.im,
        ];
        if gaps.iter().any(|&g| g < margin) {
            return Err(DbpError::InvalidDomain(format!(
                "bounding box margin below {MIN_MARGIN_FRACTION} of the diameter for {shape}"
            )));
        }
        let grid = FactorGrid::new(bbox, n);
        let mask = Array2::from_shape_fn((n, n), |(iy, ix)| shape.contains(grid.node(iy, ix)));
        if !mask.iter().any(|&b| b) {
            return Err(DbpError::DegenerateGrid(format!(
                "no grid node of {n}x{n} lies inside {shape}"
            )));
        }
        let plan = StencilPlan::new(&mask);
        Ok(PlanarDomain {
            shape,
            grid,
            mask,
            plan,
        })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn grid(&self) -> &FactorGrid {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.grid.n
    }

    pub fn h(&self) -> f64 {
        self.grid.h
    }

    pub fn mask(&self) -> &Array2<bool> {
        &self.mask
    }

    pub fn plan(&self) -> &StencilPlan {
        &self.plan
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.grid.n, self.grid.n)
    }

    /// Mask eroded by `cells` along both axes: a node survives iff every node
    /// within `cells` steps in ±x and ±y is inside.
    pub fn eroded_mask(&self, cells: usize) -> Array2<bool> {
        erode(&self.mask, cells)
    }

    /// Flat indices of the nodes in the eroded mask.
    pub fn masked_indices(&self, erosion: usize) -> Vec<usize> {
        self.eroded_mask(erosion)
            .iter()
            .enumerate()
            .filter_map(|(k, &b)| b.then_some(k))
            .collect()
    }

    /// Same shape and box, different resolution.
    pub fn refined(&self, n: usize) -> Result<Self> {
        Self::with_box(self.shape.clone(), self.grid.bbox, n)
    }

    pub fn check_field(&self, dims: (usize, usize)) -> Result<()> {
        if dims != self.dims() {
            return Err(DbpError::ShapeMismatch {
                expected: vec![self.grid.n, self.grid.n],
                got: vec![dims.0, dims.1],
            });
        }
        Ok(())
    }
}

pub fn erode(mask: &Array2<bool>, cells: usize) -> Array2<bool> {
    let (ny, nx) = mask.dim();
    Array2::from_shape_fn((ny, nx), |(iy, ix)| {
        if !mask[[iy, ix]] {
            return false;
        }
        (1..=cells).all(|k| {
            ix >= k
                && ix + k < nx
                && iy >= k
                && iy + k < ny
                && mask[[iy, ix - k]]
                && mask[[iy, ix + k]]
                && mask[[iy - k, ix]]
                && mask[[iy + k, ix]]
        })
    })
}

/// `Ω = Ω_1 × ⋯ × Ω_m`, factor order fixed.
#[derive(Clone, Debug)]
pub struct ProductDomain {
    factors: Vec<Arc<PlanarDomain>>,
}

impl ProductDomain {
    pub fn new(factors: Vec<Arc<PlanarDomain>>) -> Result<Self> {
        if factors.is_empty() {
            return Err(DbpError::InvalidDomain("a product needs m ≥ 1 factors".into()));
        }
        if factors.len() > crate::multi_index::MAX_FACTORS {
            return Err(DbpError::InvalidDomain("too many factors".into()));
        }
        Ok(ProductDomain { factors })
    }

    /// `m` copies of the same shape at resolution `n`.
    pub fn uniform(shape: Shape, m: usize, n: usize) -> Result<Self> {
        let d = Arc::new(PlanarDomain::new(shape, n)?);
        Self::new(vec![d; m])
    }

    pub fn polydisc(m: usize, n: usize) -> Result<Self> {
        Self::uniform(Shape::unit_disk(), m, n)
    }

    pub fn m(&self) -> usize {
        self.factors.len()
    }

    pub fn factor(&self, j: usize) -> &Arc<PlanarDomain> {
        &self.factors[j]
    }

    pub fn factors(&self) -> &[Arc<PlanarDomain>] {
        &self.factors
    }

    /// Total node count of the full product grid.
    pub fn total_nodes(&self) -> u128 {
        self.factors.iter().map(|d| d.grid().len() as u128).product()
    }

    pub fn same_grids(&self, other: &ProductDomain) -> bool {
        self.m() == other.m()
            && self
                .factors
                .iter()
                .zip(&other.factors)
                .all(|(a, b)| Arc::ptr_eq(a, b) || (a.grid() == b.grid() && a.shape() == b.shape()))
    }

    pub fn refined(&self, n: usize) -> Result<Self> {
        let mut out: Vec<Arc<PlanarDomain>> = Vec::with_capacity(self.m());
        for (j, f) in self.factors.iter().enumerate() {
            // reuse a refined factor if an earlier factor is the same domain
            if let Some(k) = (0..j).find(|&k| Arc::ptr_eq(&self.factors[k], f)) {
                out.push(out[k].clone());
            } else {
                out.push(Arc::new(f.refined(n)?));
            }
        }
        Self::new(out)
    }

    pub fn describe(&self) -> String {
        self.factors
            .iter()
            .map(|f| f.shape().to_string())
            .collect::<Vec<_>>()
            .join(" x ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_disk_box_has_quarter_diameter_margin() {
        let d = PlanarDomain::new(Shape::unit_disk(), 32).unwrap();
        assert!((d.grid().bbox.side - 3.0).abs() < 1e-15);
        assert!((d.h() - 3.0 / 32.0).abs() < 1e-15);
    }

    #[test]
    fn box_with_small_margin_rejected() {
        let bbox = BoundingBox {
            x_min: -1.2,
            y_min: -1.2,
            side: 2.4,
        };
        assert!(PlanarDomain::with_box(Shape::unit_disk(), bbox, 16).is_err());
    }

    #[test]
    fn too_few_nodes_rejected() {
        assert!(matches!(
            PlanarDomain::new(Shape::unit_disk(), 4),
            Err(DbpError::DegenerateGrid(_))
        ));
    }

    #[test]
    fn boundary_nodes_are_exterior() {
        // rect aligned so that nodes never land on the boundary, but a disk of
        // radius exactly hitting a node centre must exclude it
        let s = Shape::Disk {
            center: C64::new(0.0, 0.0),
            radius: 0.5,
        };
        assert!(!s.contains(C64::new(0.5, 0.0)));
        assert!(s.contains(C64::new(0.4999, 0.0)));
    }

    #[test]
    fn erosion_shrinks_mask() {
        let d = PlanarDomain::new(Shape::unit_disk(), 32).unwrap();
        let c0 = d.mask().iter().filter(|&&b| b).count();
        let c2 = d.eroded_mask(2).iter().filter(|&&b| b).count();
        assert!(c2 < c0 && c2 > 0);
        assert_eq!(d.eroded_mask(0), *d.mask());
    }

    #[test]
    fn parse_shapes() {
        assert_eq!(Shape::parse("disk(0,0,1)").unwrap(), Shape::unit_disk());
        assert!(matches!(
            Shape::parse("rect(-1, -1, 1, 2)").unwrap(),
            Shape::Rectangle { .. }
        ));
        assert!(Shape::parse("annulus(0,0,1,0.5)").is_err());
        assert!(Shape::parse("hexagon(1)").is_err());
        let s = Shape::parse("annulus(0,0,0.5,1)").unwrap();
        assert_eq!(Shape::parse(&s.to_string()).unwrap(), s);
    }

    #[test]
    fn refined_product_shares_identical_factors() {
        let p = ProductDomain::polydisc(3, 16).unwrap();
        let q = p.refined(32).unwrap();
        assert!(Arc::ptr_eq(q.factor(0), q.factor(2)));
        assert_eq!(q.factor(1).n(), 32);
    }
}
