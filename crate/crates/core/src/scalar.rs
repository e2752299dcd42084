//! Scalar special functions: the principal branch of the Lambert W function,
//! the standard normal density and upper tail, and soft thresholding.

use crate::error::{CoxError, Result};

const INV_E: f64 = 0.367_879_441_171_442_33;
const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const BRANCH_SLACK: f64 = 1e-12;
const MAX_HALLEY: usize = 50;
const LARGE: f64 = 1e100;
const LOG_LARGE: f64 = 230.258_509_299_404_57;

/// Principal branch `W0(x)` of the Lambert W function, i.e. the solution
/// `w >= -1` of `w e^w = x` for `x >= -1/e`.
///
/// Arguments within `1e-12` below the branch point are clamped to it.
pub fn lambert_w0(x: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(CoxError::Domain {
            function: "lambert_w0",
            value: x,
        });
    }
    let branch = x + INV_E;
    if branch < -BRANCH_SLACK {
        return Err(CoxError::Domain {
            function: "lambert_w0",
            value: x,
        });
    }
    if branch <= 0.0 {
        return Ok(-1.0);
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(f64::INFINITY);
    }
    if x > LARGE {
        return Ok(w_from_log(x.ln()));
    }

    let mut w = initial_guess(x, branch);
    for _ in 0..MAX_HALLEY {
        let wp1 = w + 1.0;
        if wp1.abs() < 1e-9 {
            break;
        }
        let ew = w.exp();
        let f = w * ew - x;
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        if denom == 0.0 || !denom.is_finite() {
            break;
        }
        let step = f / denom;
        w -= step;
        if step.abs() <= 4.0 * f64::EPSILON * (1.0 + w.abs()) {
            break;
        }
    }
    Ok(w.max(-1.0))
}

fn initial_guess(x: f64, branch: f64) -> f64 {
    if branch < 0.25 && x < 0.0 {
        // expansion around the branch point -1/e
        let p = (2.0 * std::f64::consts::E * branch).sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else if x.abs() < 0.25 {
        x - x * x + 1.5 * x * x * x
    } else if x < std::f64::consts::E {
        x.ln_1p()
    } else {
        let l1 = x.ln();
        let l2 = l1.ln();
        l1 - l2 + l2 / l1
    }
}

/// `W0(e^log_y)` evaluated without forming `e^log_y`, for arguments whose
/// exponential would overflow.
pub fn lambert_w0_exp(log_y: f64) -> f64 {
    if log_y < LOG_LARGE {
        // exp cannot overflow here and the argument is positive
        return lambert_w0(log_y.exp()).unwrap_or(f64::NAN);
    }
    w_from_log(log_y)
}

/// Solves `w + ln w = log_y` by Newton from the asymptotic guess; accurate
/// for `log_y >= LOG_LARGE`.
fn w_from_log(log_y: f64) -> f64 {
    let mut w = log_y - log_y.ln();
    for _ in 0..MAX_HALLEY {
        let step = (w + w.ln() - log_y) / (1.0 + 1.0 / w);
        w -= step;
        if step.abs() <= 4.0 * f64::EPSILON * w {
            break;
        }
    }
    w
}

/// Standard normal density.
#[inline]
pub fn std_normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Upper tail `P(Z > x)` of the standard normal (the complementary
/// distribution function). Computed through `erfc`, whose absolute error is
/// below 1e-16 on the whole line.
#[inline]
pub fn std_normal_tail(x: f64) -> f64 {
    0.5 * libm::erfc(x * std::f64::consts::FRAC_1_SQRT_2)
}

#[inline]
pub fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Soft thresholding `relu(x - a) - relu(-x - a)` for `a >= 0`.
#[inline]
pub fn soft_threshold(x: f64, a: f64) -> f64 {
    relu(x - a) - relu(-x - a)
}
