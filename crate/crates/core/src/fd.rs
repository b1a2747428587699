//! Fourth-order finite differences on masked factor grids.
//!
//! Each masked node gets a 5-point stencil along the axis, centred when the
//! run of masked nodes allows it and shifted to a one-sided stencil within two
//! cells of the mask boundary. Unmasked nodes get no stencil and their
//! derivative is reported as zero.

use ndarray::Array2;
use num_complex::Complex64 as C64;

pub const STENCIL_WIDTH: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

/// Finite-difference weights for the `order`-th derivative at `x0` from
/// samples at `xs` (Fornberg's recursion).
pub fn fornberg_weights(x0: f64, xs: &[f64], order: usize) -> Vec<f64> {
    let n = xs.len();
    let mut c = vec![vec![0.0; n]; order + 1];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c.swap_remove(order)
}

#[derive(Clone, Copy, Debug)]
struct Stencil {
    /// Flat index of the first sample.
    start: u32,
    len: u8,
    weights: [f64; STENCIL_WIDTH],
}

/// Precomputed stencils for first and second derivatives along both axes.
#[derive(Clone, Debug)]
pub struct StencilPlan {
    ny: usize,
    nx: usize,
    // [axis][order-1][flat node]
    stencils: [[Vec<Option<Stencil>>; 2]; 2],
}

impl StencilPlan {
    pub fn new(mask: &Array2<bool>) -> Self {
        let (ny, nx) = mask.dim();
        let mut stencils: [[Vec<Option<Stencil>>; 2]; 2] = Default::default();
        for (a, axis) in [Axis::X, Axis::Y].into_iter().enumerate() {
            for order in 1..=2 {
                stencils[a][order - 1] = build_axis(mask, axis, order);
            }
        }
        StencilPlan { ny, nx, stencils }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.ny, self.nx)
    }

    /// `∂^order f / ∂axis^order` at masked nodes, zero elsewhere.
    pub fn derivative(&self, f: &Array2<C64>, axis: Axis, order: usize, h: f64) -> Array2<C64> {
        assert!((1..=2).contains(&order), "only first and second derivatives");
        assert_eq!(f.dim(), (self.ny, self.nx));
        let a = match axis {
            Axis::X => 0,
            Axis::Y => 1,
        };
        let stride = match axis {
            Axis::X => 1,
            Axis::Y => self.nx,
        };
        let scale = h.powi(-(order as i32));
        let flat = f.as_slice().expect("standard layout");
        let plan = &self.stencils[a][order - 1];
        let data: Vec<C64> = plan
            .iter()
            .map(|s| match s {
                Some(s) => {
                    let mut acc = C64::new(0.0, 0.0);
                    for k in 0..s.len as usize {
                        acc += flat[s.start as usize + k * stride] * s.weights[k];
                    }
                    acc * scale
                }
                None => C64::new(0.0, 0.0),
            })
            .collect();
        Array2::from_shape_vec((self.ny, self.nx), data).expect("shape")
    }

    /// Applies an axis derivative along one line of samples taken from a
    /// larger array (used by the dense product-grid route). `line[k]` is the
    /// value at node `k` of the given line.
    pub fn derivative_line(
        &self,
        line: &[C64],
        axis: Axis,
        line_index: usize,
        order: usize,
        h: f64,
        out: &mut [C64],
    ) {
        let a = match axis {
            Axis::X => 0,
            Axis::Y => 1,
        };
        let plan = &self.stencils[a][order - 1];
        let scale = h.powi(-(order as i32));
        let len = line.len();
        for (k, o) in out.iter_mut().enumerate().take(len) {
            let flat = match axis {
                Axis::X => line_index * self.nx + k,
                Axis::Y => k * self.nx + line_index,
            };
            *o = match &plan[flat] {
                Some(s) => {
                    let first = match axis {
                        Axis::X => s.start as usize - line_index * self.nx,
                        Axis::Y => (s.start as usize - line_index) / self.nx,
                    };
                    let mut acc = C64::new(0.0, 0.0);
                    for q in 0..s.len as usize {
                        acc += line[first + q] * s.weights[q];
                    }
                    acc * scale
                }
                None => C64::new(0.0, 0.0),
            };
        }
    }
}

fn build_axis(mask: &Array2<bool>, axis: Axis, order: usize) -> Vec<Option<Stencil>> {
    let (ny, nx) = mask.dim();
    let mut out = vec![None; ny * nx];
    let (lines, len) = match axis {
        Axis::X => (ny, nx),
        Axis::Y => (nx, ny),
    };
    let flat = |line: usize, k: usize| match axis {
        Axis::X => line * nx + k,
        Axis::Y => k * nx + line,
    };
    let at = |line: usize, k: usize| match axis {
        Axis::X => mask[[line, k]],
        Axis::Y => mask[[k, line]],
    };
    // weights depend only on (run length capped at 5, position in stencil)
    let mut cache: std::collections::HashMap<(usize, usize), [f64; STENCIL_WIDTH]> =
        Default::default();
    for line in 0..lines {
        let mut k = 0;
        while k < len {
            if !at(line, k) {
                k += 1;
                continue;
            }
            let start = k;
            while k < len && at(line, k) {
                k += 1;
            }
            let end = k;
            let run = end - start;
            let w = run.min(STENCIL_WIDTH);
            if w < order + 1 {
                continue;
            }
            for p in start..end {
                let s = (p.saturating_sub(2)).max(start).min(end - w);
                let pos = p - s;
                let weights = *cache.entry((w, pos)).or_insert_with(|| {
                    let xs: Vec<f64> = (0..w).map(|q| q as f64).collect();
                    let c = fornberg_weights(pos as f64, &xs, order);
                    let mut arr = [0.0; STENCIL_WIDTH];
                    arr[..w].copy_from_slice(&c);
                    arr
                });
                out[flat(line, p)] = Some(Stencil {
                    start: flat(line, s) as u32,
                    len: w as u8,
                    weights,
                });
            }
        }
    }
    out
}

/// `∂/∂z̄ = ½(∂x + i∂y)`.
pub fn dbar(plan: &StencilPlan, f: &Array2<C64>, h: f64) -> Array2<C64> {
    let dx = plan.derivative(f, Axis::X, 1, h);
    let dy = plan.derivative(f, Axis::Y, 1, h);
    ndarray::Zip::from(&dx)
        .and(&dy)
        .map_collect(|&a, &b| 0.5 * (a + C64::i() * b))
}

/// `∂/∂z = ½(∂x − i∂y)`.
pub fn dz(plan: &StencilPlan, f: &Array2<C64>, h: f64) -> Array2<C64> {
    let dx = plan.derivative(f, Axis::X, 1, h);
    let dy = plan.derivative(f, Axis::Y, 1, h);
    ndarray::Zip::from(&dx)
        .and(&dy)
        .map_collect(|&a, &b| 0.5 * (a - C64::i() * b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn centred_weights() {
        let w = fornberg_weights(2.0, &[0.0, 1.0, 2.0, 3.0, 4.0], 1);
        let expect = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];
        for (a, b) in w.iter().zip(expect) {
            assert_relative_eq!(*a, b, epsilon = 1e-14);
        }
        let w2 = fornberg_weights(2.0, &[0.0, 1.0, 2.0, 3.0, 4.0], 2);
        let expect2 = [-1.0 / 12.0, 4.0 / 3.0, -5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0];
        for (a, b) in w2.iter().zip(expect2) {
            assert_relative_eq!(*a, b, epsilon = 1e-13);
        }
    }

    #[test]
    fn one_sided_weights_exact_on_quartics() {
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
        for pos in 0..5 {
            let w = fornberg_weights(pos as f64, &xs, 1);
            for deg in 0..=4 {
                let d: f64 = w.iter().zip(xs).map(|(w, x)| w * x.powi(deg)).sum();
                let exact = if deg == 0 {
                    0.0
                } else {
                    deg as f64 * (pos as f64).powi(deg - 1)
                };
                assert_relative_eq!(d, exact, epsilon = 1e-10);
            }
        }
    }

    fn full_mask(n: usize) -> Array2<bool> {
        Array2::from_elem((n, n), true)
    }

    #[test]
    fn derivative_of_quartic_is_exact() {
        let n = 9;
        let h = 0.1;
        let plan = StencilPlan::new(&full_mask(n));
        let f = Array2::from_shape_fn((n, n), |(iy, ix)| {
            let x = ix as f64 * h;
            let y = iy as f64 * h;
            C64::new(x.powi(4) + y * x, y.powi(3))
        });
        let dx = plan.derivative(&f, Axis::X, 1, h);
        let dy = plan.derivative(&f, Axis::Y, 1, h);
        for iy in 0..n {
            for ix in 0..n {
                let x = ix as f64 * h;
                let y = iy as f64 * h;
                assert_relative_eq!(dx[[iy, ix]].re, 4.0 * x.powi(3) + y, epsilon = 1e-9);
                assert_relative_eq!(dy[[iy, ix]].re, x, epsilon = 1e-9);
                assert_relative_eq!(dy[[iy, ix]].im, 3.0 * y * y, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn masked_out_nodes_are_zero_and_unused() {
        let n = 12;
        let mut mask = full_mask(n);
        for iy in 0..n {
            mask[[iy, 6]] = false;
        }
        let plan = StencilPlan::new(&mask);
        // poison masked-out column; derivatives elsewhere must not see it
        let h = 0.5;
        let mut f = Array2::from_shape_fn((n, n), |(_, ix)| C64::new(ix as f64 * h, 0.0));
        for iy in 0..n {
            f[[iy, 6]] = C64::new(1e30, 0.0);
        }
        let dx = plan.derivative(&f, Axis::X, 1, h);
        for iy in 0..n {
            for ix in 0..n {
                let expect = if ix == 6 { 0.0 } else { 1.0 };
                assert_relative_eq!(dx[[iy, ix]].re, expect, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn dbar_of_conjugate_is_one() {
        let n = 10;
        let h = 0.2;
        let plan = StencilPlan::new(&full_mask(n));
        let f = Array2::from_shape_fn((n, n), |(iy, ix)| C64::new(ix as f64 * h, -(iy as f64) * h));
        let g = dbar(&plan, &f, h);
        let k = dz(&plan, &f, h);
        for v in g.iter() {
            assert_relative_eq!(v.re, 1.0, epsilon = 1e-12);
            assert!(v.im.abs() < 1e-12);
        }
        for v in k.iter() {
            assert!(v.norm() < 1e-12);
        }
    }

    #[test]
    fn line_route_matches_array_route() {
        let n = 11;
        let mut mask = full_mask(n);
        mask[[3, 0]] = false;
        mask[[0, 4]] = false;
        mask[[7, 7]] = false;
        let plan = StencilPlan::new(&mask);
        let f = Array2::from_shape_fn((n, n), |(iy, ix)| {
            C64::new((ix as f64).sin(), (iy as f64 * 0.3).cos())
        });
        for axis in [Axis::X, Axis::Y] {
            let d = plan.derivative(&f, axis, 2, 0.1);
            for line in 0..n {
                let vals: Vec<C64> = (0..n)
                    .map(|k| match axis {
                        Axis::X => f[[line, k]],
                        Axis::Y => f[[k, line]],
                    })
                    .collect();
                let mut out = vec![C64::new(0.0, 0.0); n];
                plan.derivative_line(&vals, axis, line, 2, 0.1, &mut out);
                for k in 0..n {
                    let e = match axis {
                        Axis::X => d[[line, k]],
                        Axis::Y => d[[k, line]],
                    };
                    assert_eq!(out[k], e);
                }
            }
        }
    }
}
