//! Principal branch of the Lambert W function.

use std::f64::consts::E;

use crate::error::NumericalError;

const MAX_HALLEY_STEPS: usize = 10;

/// `W0(x)`: the solution `w >= -1` of `w * exp(w) = x`, for `x >= -1/e`.
///
/// The starting point is the branch-point series in `p = sqrt(2(e x + 1))`
/// close to `-1/e` and Winitzki's logarithmic approximation elsewhere;
/// Halley's iteration then refines it.
pub fn lambert_w0(x: f64) -> Result<f64, NumericalError> {
    if x.is_nan() {
        return Err(NumericalError::LambertDomain(x));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    // e*x + 1 with one rounding less than the naive product
    let q = E.mul_add(x, 1.0);
    if q < 0.0 {
        // x rounded a hair below -1/e still means the branch point
        if q > -4.0 * f64::EPSILON {
            return Ok(-1.0);
        }
        return Err(NumericalError::LambertDomain(x));
    }
    if q == 0.0 {
        return Ok(-1.0);
    }

    let mut w = if x < -0.32 {
        let p = (2.0 * q).sqrt();
        -1.0 + p * (1.0 + p * (-1.0 / 3.0 + p * (11.0 / 72.0 + p * (-43.0 / 540.0))))
    } else {
        let l = x.ln_1p();
        l * (1.0 - (1.0 + l).ln() / (2.0 + l))
    };
    if x > 1e3 {
        let l1 = x.ln();
        let l2 = l1.ln();
        w = l1 - l2 + l2 / l1;
    }

    for _ in 0..MAX_HALLEY_STEPS {
        let ew = w.exp();
        let r = w * ew - x;
        let wp1 = w + 1.0;
        if wp1 == 0.0 {
            break;
        }
        let denom = ew * wp1 - (w + 2.0) * r / (2.0 * wp1);
        if denom == 0.0 || !denom.is_finite() {
            break;
        }
        let step = r / denom;
        w -= step;
        if step.abs() <= 2.0 * f64::EPSILON * (1.0 + w.abs()) {
            break;
        }
    }
    Ok(w.max(-1.0))
}
