//! Observed convergence orders from refinement sweeps.

use serde::{Deserialize, Serialize};

/// Residuals at or below this are rounding noise: the identity holds exactly
/// in the discrete setting and no order can be fitted.
pub const ROUNDING_FLOOR: f64 = 1e-10;

/// Least-squares slope of `log r` against `log h`.
pub fn fit_order(hs: &[f64], rs: &[f64]) -> Option<f64> {
    if hs.len() != rs.len() || hs.len() < 2 {
        return None;
    }
    if hs.iter().chain(rs).any(|v| !(*v > 0.0 && v.is_finite())) {
        return None;
    }
    let n = hs.len() as f64;
    let x: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let y: Vec<f64> = rs.iter().map(|r| r.ln()).collect();
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    Some(sxy / sxx)
}

pub fn strictly_decreasing(rs: &[f64]) -> bool {
    rs.windows(2).all(|w| w[1] < w[0])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderFit {
    /// `None` when the sweep sits at the rounding floor or cannot be fitted.
    pub order: Option<f64>,
    pub finest: f64,
    pub at_floor: bool,
    pub decreasing: bool,
}

impl OrderFit {
    pub fn new(hs: &[f64], rs: &[f64]) -> Self {
        let finest = rs.last().copied().unwrap_or(f64::NAN);
        let at_floor = !rs.is_empty() && rs.iter().all(|r| *r <= ROUNDING_FLOOR);
        OrderFit {
            order: if at_floor { None } else { fit_order(hs, rs) },
            finest,
            at_floor,
            decreasing: strictly_decreasing(rs),
        }
    }

    /// Passes when the finest residual meets `tol` and the order reaches
    /// `min_order`, or when every residual is at the rounding floor.
    pub fn passes(&self, tol: f64, min_order: f64) -> bool {
        if self.at_floor {
            return true;
        }
        self.finest <= tol && self.order.is_some_and(|p| p >= min_order)
    }
}
