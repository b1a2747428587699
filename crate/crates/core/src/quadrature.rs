//! Adaptive Gauss–Kronrod (7/15) quadrature for complex integrands on an
//! interval. Used for the singular kernel cell and for reference values.

use num_complex::Complex64 as C64;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &dyn Fn(f64) -> C64, a: f64, b: f64) -> (C64, f64) {
    let c = 0.5 * (a + b);
    let hl = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for k in 0..7 {
        let dx = hl * XGK[k];
        let s = f(c - dx) + f(c + dx);
        kron += s * WGK[k];
        if k % 2 == 1 {
            gauss += s * WG[k / 2];
        }
    }
    (kron * hl, ((kron - gauss) * hl).norm())
}

/// `∫_a^b f` to absolute tolerance `tol` (best effort within `max_depth`
/// bisections).
pub fn integrate(f: &dyn Fn(f64) -> C64, a: f64, b: f64, tol: f64) -> C64 {
    fn rec(f: &dyn Fn(f64) -> C64, a: f64, b: f64, tol: f64, depth: u32) -> C64 {
        let (v, err) = gk15(f, a, b);
        if err <= tol || depth == 0 {
            return v;
        }
        let m = 0.5 * (a + b);
        rec(f, a, m, tol / 2.0, depth - 1) + rec(f, m, b, tol / 2.0, depth - 1)
    }
    rec(f, a, b, tol, 40)
}

/// Integrates over consecutive breakpoints.
pub fn integrate_pieces(f: &dyn Fn(f64) -> C64, breaks: &[f64], tol: f64) -> C64 {
    let pieces = (breaks.len().max(2) - 1) as f64;
    breaks
        .windows(2)
        .map(|w| integrate(f, w[0], w[1], tol / pieces))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_exact() {
        let v = integrate(&|x| C64::new(x.powi(5), 1.0), 0.0, 2.0, 1e-14);
        assert!((v - C64::new(64.0 / 6.0, 2.0)).norm() < 1e-12);
    }

    #[test]
    fn oscillatory() {
        let v = integrate(&|t| C64::from_polar(1.0, -t), 0.0, 2.0 * PI, 1e-13);
        assert!(v.norm() < 1e-12);
        let w = integrate(&|x| C64::new(x.sqrt(), 0.0), 0.0, 1.0, 1e-12);
        assert!((w.re - 2.0 / 3.0).abs() < 1e-11);
    }
}
