//! Independent reference values for the planar solver.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::planar::kernel::CauchyKernelTable;
use crate::quadrature;

/// `Σ_s K(z_t − ζ_s) g(ζ_s) h²` by explicit double loop, `O(n⁴)`.
pub fn direct_cauchy_sum(table: &CauchyKernelTable, g: &Array2<C64>) -> Array2<C64> {
    let n = table.n();
    let h2 = table.h() * table.h();
    let sources: Vec<(i64, i64, C64)> = g
        .indexed_iter()
        .filter(|(_, v)| v.norm() != 0.0)
        .map(|((iy, ix), v)| (iy as i64, ix as i64, *v))
        .collect();
    let values: Vec<C64> = (0..n * n)
        .into_par_iter()
        .map(|t| {
            let (ty, tx) = ((t / n) as i64, (t % n) as i64);
            sources
                .iter()
                .map(|&(sy, sx, v)| table.at(ty - sy, tx - sx) * v)
                .sum::<C64>()
                * h2
        })
        .collect();
    Array2::from_shape_vec((n, n), values).expect("dims")
}

/// `(1/π) ∫_{D(c,R)} dA(ζ)/(z − ζ)` for `z` inside the disk, by quadrature
/// over rays: with `ζ = z + r e^{iθ}` the area integral becomes
/// `−(1/π) ∫ e^{−iθ} ρ(θ) dθ`, `ρ(θ)` the ray length to the circle.
pub fn disk_cauchy_of_one(z: C64, center: C64, radius: f64, tol: f64) -> C64 {
    let w = z - center;
    let rho = |t: f64| {
        let e = C64::from_polar(1.0, t);
        let b = (w.conj() * e).re;
        -b + (b * b - w.norm_sqr() + radius * radius).sqrt()
    };
    let f = |t: f64| C64::from_polar(rho(t), -t);
    -quadrature::integrate_pieces(&f, &[0.0, PI / 2.0, PI, 1.5 * PI, 2.0 * PI], tol) / PI
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_identity_by_quadrature() {
        let c = C64::new(0.2, -0.1);
        for z in [C64::new(0.0, 0.0), C64::new(0.5, 0.3), C64::new(-0.6, 0.6)] {
            let v = disk_cauchy_of_one(z, c, 1.3, 1e-13);
            assert!((v - (z - c).conj()).norm() < 1e-11, "{z}: {v}");
        }
    }
}
