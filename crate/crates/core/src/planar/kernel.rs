//! Cell-sampled free-space kernel `1/(πζ)` and the zero-padded FFT
//! convolution built on it.

use std::f64::consts::{FRAC_PI_4, PI};
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};

use crate::error::{DbpError, Result};
use crate::quadrature;

/// Absolute tolerance for the singular-cell quadrature.
pub const SINGULAR_CELL_TOL: f64 = 1e-12;

/// Mean of `1/(πζ)` over the cell `[-h/2, h/2]²`.
///
/// In polar coordinates the integrand `r/(π r e^{iθ})` is bounded, so the
/// cell integral reduces to `(1/π) ∫ e^{-iθ} R(θ) dθ` with `R(θ)` the distance
/// from the centre to the cell edge. Odd symmetry makes the exact value 0.
pub fn singular_cell_mean(h: f64) -> C64 {
    let half = 0.5 * h;
    let edge = |t: f64| half / t.cos().abs().max(t.sin().abs());
    let f = |t: f64| C64::from_polar(edge(t) / PI, -t);
    let breaks: Vec<f64> = (0..=8).map(|k| k as f64 * FRAC_PI_4).collect();
    let integral = quadrature::integrate_pieces(&f, &breaks, SINGULAR_CELL_TOL * h * h);
    integral / (h * h)
}

/// 2-D FFT of size `size × size` built from 1-D plans.
#[derive(Clone)]
pub struct Fft2 {
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Fft2({})", self.size)
    }
}

impl Fft2 {
    pub fn new(size: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft2 {
            size,
            forward: planner.plan_fft_forward(size),
            inverse: planner.plan_fft_inverse(size),
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    fn run(&self, data: &mut [C64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.size;
        debug_assert_eq!(data.len(), n * n);
        plan.process(data);
        let mut t = vec![C64::new(0.0, 0.0); n * n];
        transpose(data, &mut t, n);
        plan.process(&mut t);
        transpose(&t, data, n);
    }

    /// Unnormalised forward transform, in place.
    pub fn forward(&self, data: &mut [C64]) {
        self.run(data, &self.forward);
    }

    /// Unnormalised inverse transform, in place.
    pub fn inverse(&self, data: &mut [C64]) {
        self.run(data, &self.inverse);
    }
}

fn transpose(src: &[C64], dst: &mut [C64], n: usize) {
    const B: usize = 32;
    for i0 in (0..n).step_by(B) {
        for j0 in (0..n).step_by(B) {
            for i in i0..(i0 + B).min(n) {
                for j in j0..(j0 + B).min(n) {
                    dst[j * n + i] = src[i * n + j];
                }
            }
        }
    }
}

/// Kernel samples on the padded grid in wrap-around order, with spectrum.
///
/// Entry `[a, b]` holds `K(ζ)` at offset `(dy, dx)` where `dy = a` for
/// `a < n` and `dy = a − padded` for `a > padded − n` (same for `b`/`dx`).
#[derive(Clone, Debug)]
pub struct CauchyKernelTable {
    h: f64,
    n: usize,
    padded: usize,
    values: Array2<C64>,
    spectrum: Vec<C64>,
    fft: Fft2,
}

/// Builds the table for an `n × n` field with spacing `h`, padded to
/// `padded × padded` (at least `2n`).
pub fn build_kernel_table(h: f64, n: usize, padded: usize) -> Result<CauchyKernelTable> {
    if padded < 2 * n {
        return Err(DbpError::DegenerateGrid(format!(
            "padded size {padded} is below twice the field size {n}"
        )));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(DbpError::DegenerateGrid(format!("invalid spacing {h}")));
    }
    let centre = singular_cell_mean(h);
    let offset = |a: usize| -> Option<i64> {
        if a < n {
            Some(a as i64)
        } else if a > padded - n {
            Some(a as i64 - padded as i64)
        } else {
            None
        }
    };
    let values = Array2::from_shape_fn((padded, padded), |(a, b)| {
        match (offset(a), offset(b)) {
            (Some(0), Some(0)) => centre,
            (Some(dy), Some(dx)) => {
                let zeta = C64::new(dx as f64 * h, dy as f64 * h);
                1.0 / (PI * zeta)
            }
            _ => C64::new(0.0, 0.0),
        }
    });
    let fft = Fft2::new(padded);
    let mut spectrum = values.as_slice().expect("layout").to_vec();
    fft.forward(&mut spectrum);
    Ok(CauchyKernelTable {
        h,
        n,
        padded,
        values,
        spectrum,
        fft,
    })
}

impl CauchyKernelTable {
    pub fn for_grid(h: f64, n: usize) -> Result<Self> {
        build_kernel_table(h, n, 2 * n)
    }

    /// Rebuilds a table from stored values (e.g. a cached snapshot).
    pub fn from_values(h: f64, n: usize, values: Array2<C64>) -> Result<Self> {
        let padded = values.nrows();
        if values.ncols() != padded || padded < 2 * n {
            return Err(DbpError::ShapeMismatch {
                expected: vec![2 * n, 2 * n],
                got: vec![values.nrows(), values.ncols()],
            });
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(DbpError::DegenerateGrid(format!("invalid spacing {h}")));
        }
        let fft = Fft2::new(padded);
        let values = values.as_standard_layout().into_owned();
        let mut spectrum = values.as_slice().expect("layout").to_vec();
        fft.forward(&mut spectrum);
        Ok(CauchyKernelTable {
            h,
            n,
            padded,
            values,
            spectrum,
            fft,
        })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn padded(&self) -> usize {
        self.padded
    }

    pub fn values(&self) -> &Array2<C64> {
        &self.values
    }

    /// Kernel value at lattice offset `(dy, dx)`, `|dy|, |dx| < n`.
    pub fn at(&self, dy: i64, dx: i64) -> C64 {
        let wrap = |d: i64| -> usize {
            if d >= 0 {
                d as usize
            } else {
                (self.padded as i64 + d) as usize
            }
        };
        self.values[[wrap(dy), wrap(dx)]]
    }

    /// `u(z_t) = Σ_s K(z_t − ζ_s) g(ζ_s) h²` for all box nodes.
    pub fn convolve(&self, g: &Array2<C64>) -> Result<Array2<C64>> {
        if g.dim() != (self.n, self.n) {
            return Err(DbpError::ShapeMismatch {
                expected: vec![self.n, self.n],
                got: vec![g.dim().0, g.dim().1],
            });
        }
        let m = self.padded;
        let mut buf = vec![C64::new(0.0, 0.0); m * m];
        for ((iy, ix), v) in g.indexed_iter() {
            buf[iy * m + ix] = *v;
        }
        self.fft.forward(&mut buf);
        for (b, k) in buf.iter_mut().zip(&self.spectrum) {
            *b *= k;
        }
        self.fft.inverse(&mut buf);
        let scale = self.h * self.h / (m * m) as f64;
        Ok(Array2::from_shape_fn((self.n, self.n), |(iy, ix)| {
            buf[iy * m + ix] * scale
        }))
    }
}
