//! Error function, its inverses, and the standard normal cdf/quantile.
//!
//! `erf`/`erfc` come from `libm`. The inverses start from Acklam's rational
//! approximation of the normal quantile and are polished with Halley steps
//! on `erf`/`erfc`, which brings them to within a few ulps.

use std::f64::consts::{FRAC_2_SQRT_PI, SQRT_2};

pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Standard normal cumulative distribution.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Acklam's approximation of the standard normal quantile, relative error
/// about 1.15e-9. Used only as a starting point.
#[allow(clippy::excessive_precision)]
fn acklam(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00, 3.754408661907416e+00];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

const MAX_POLISH: usize = 8;

/// Inverse complementary error function on (0, 2).
///
/// Returns `+inf` at 0, `-inf` at 2 and NaN outside [0, 2].
pub fn erfc_inv(q: f64) -> f64 {
    if q.is_nan() || !(0.0..=2.0).contains(&q) {
        return f64::NAN;
    }
    if q == 0.0 {
        return f64::INFINITY;
    }
    if q == 2.0 {
        return f64::NEG_INFINITY;
    }
    if q > 1.0 {
        return -erfc_inv(2.0 - q);
    }
    if q == 1.0 {
        return 0.0;
    }
    // erfc(x) = q  <=>  x = -quantile(q / 2) / sqrt(2)
    let mut x = -acklam(0.5 * q) / SQRT_2;
    for _ in 0..MAX_POLISH {
        let deriv = -FRAC_2_SQRT_PI * (-x * x).exp();
        if deriv == 0.0 {
            break;
        }
        let ratio = (erfc(x) - q) / deriv;
        // Halley: f'' = -2x f'
        let step = ratio / (1.0 + x * ratio);
        x -= step;
        if step.abs() <= 1e-16 * x.abs().max(1.0) {
            break;
        }
    }
    x
}

/// Inverse error function on (-1, 1).
///
/// Near zero the Halley polish runs on `erf` itself; in the tails it is
/// delegated to [`erfc_inv`] so that arguments close to +/-1 keep their
/// information.
pub fn erf_inv(p: f64) -> f64 {
    if p.is_nan() || !(-1.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return 0.0;
    }
    if p.abs() > 0.5 {
        return p.signum() * erfc_inv(1.0 - p.abs());
    }
    let mut x = acklam(0.5 * (1.0 + p)) / SQRT_2;
    for _ in 0..MAX_POLISH {
        let deriv = FRAC_2_SQRT_PI * (-x * x).exp();
        let ratio = (erf(x) - p) / deriv;
        let step = ratio / (1.0 + x * ratio);
        x -= step;
        if step.abs() <= 1e-16 * x.abs().max(1e-300) {
            break;
        }
    }
    x
}

/// Standard normal quantile on (0, 1).
pub fn norm_quantile(u: f64) -> f64 {
    -SQRT_2 * erfc_inv(2.0 * u)
}
