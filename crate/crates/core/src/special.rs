//! Special functions used for kernels and reference solutions.

use std::f64::consts::PI;

use statrs::function::gamma::{gamma as stat_gamma, ln_gamma};

use crate::{Error, Result};

/// Largest `|z|` handled by the power series; beyond it the integral
/// representation is used.
const SERIES_RADIUS: f64 = 1.0;

pub fn gamma(x: f64) -> f64 {
    stat_gamma(x)
}

/// One-parameter Mittag-Leffler function `E_α(z) = Σ zᵐ / Γ(αm + 1)` for
/// `0 < α ≤ 1` and real `z ≤ 0`.
///
/// Small arguments use the power series; larger ones use the Laplace
/// representation of the relaxation function,
///
/// `E_α(−x) = sin(απ)/(απ) ∫₀^∞ exp(−(ux)^{1/α}) / (u² + 2u cos(απ) + 1) du`,
///
/// which has no cancellation.
pub fn mittag_leffler(alpha: f64, z: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid("alpha", format!("must lie in (0, 1], got {alpha}")));
    }
    if z.is_nan() || z > 0.0 {
        return Err(Error::Unsupported(format!(
            "Mittag-Leffler argument must be real and <= 0, got {z}"
        )));
    }
    if alpha == 1.0 {
        return Ok(z.exp());
    }
    if z == 0.0 {
        return Ok(1.0);
    }
    if z == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    if -z <= SERIES_RADIUS {
        Ok(ml_series(alpha, z))
    } else {
        Ok(ml_integral(alpha, -z))
    }
}

pub(crate) fn ml_series(alpha: f64, z: f64) -> f64 {
    let log_abs = z.abs().ln();
    let mut sum = 1.0;
    let mut prev_mag = f64::INFINITY;
    for m in 1..2000 {
        let mf = m as f64;
        let mag = (mf * log_abs - ln_gamma(alpha * mf + 1.0)).exp();
        let term = if z < 0.0 && m % 2 == 1 { -mag } else { mag };
        sum += term;
        // magnitudes are eventually decreasing; stop once past the peak and negligible
        if mag < prev_mag && mag <= 1e-17 * sum.abs().max(1.0) {
            break;
        }
        prev_mag = mag;
    }
    sum
}

pub(crate) fn ml_integral(alpha: f64, x: f64) -> f64 {
    let (s, c) = (alpha * PI).sin_cos();
    let inv_alpha = 1.0 / alpha;
    // u in [0, 1]
    let near = |u: f64| (-(u * x).powf(inv_alpha)).exp() / (u * u + 2.0 * c * u + 1.0);
    // u = 1/v, v in [0, 1]
    let far = |v: f64| {
        if v <= 0.0 {
            0.0
        } else {
            (-(x / v).powf(inv_alpha)).exp() / (1.0 + 2.0 * c * v + v * v)
        }
    };
    let tol = 1e-14;
    let a = quadrature::double_exponential::integrate(near, 0.0, 1.0, tol).integral;
    let b = quadrature::double_exponential::integrate(far, 0.0, 1.0, tol).integral;
    s / (alpha * PI) * (a + b)
}
