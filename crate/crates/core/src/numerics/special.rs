//! Special functions used across the crate.

use std::f64::consts::PI;

pub use libm::{erfc, lgamma as ln_gamma, tgamma as gamma};

use super::quadrature::adaptive_gk;

/// Volume of the unit ball in `R^n`.
pub fn unit_ball_volume(n: usize) -> f64 {
    let h = n as f64 / 2.0;
    PI.powf(h) / gamma(h + 1.0)
}

/// Upper incomplete gamma `Gamma(a, x)` (not regularized).
///
/// Orders 1/2, 1, 3/2 and 2 (everything the supported dimensions need) use
/// closed forms; other orders fall back to adaptive quadrature.
pub fn upper_incomplete_gamma(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return gamma(a);
    }
    if a == 0.5 {
        PI.sqrt() * erfc(x.sqrt())
    } else if a == 1.0 {
        (-x).exp()
    } else if a == 1.5 {
        0.5 * PI.sqrt() * erfc(x.sqrt()) + x.sqrt() * (-x).exp()
    } else if a == 2.0 {
        (1.0 + x) * (-x).exp()
    } else {
        // s = x + u, truncated where e^{-u} is negligible
        let f = |u: f64| (x + u).powf(a - 1.0) * (-(x + u)).exp();
        adaptive_gk(f, 0.0, 60.0 + a.abs() * 10.0, 0.0, 1e-13).unwrap_or(f64::NAN)
    }
}
