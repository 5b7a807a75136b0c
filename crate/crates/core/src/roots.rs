//! Bracketed scalar root finding (Brent's method).

use crate::error::NumericalError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootTolerance {
    /// Target bracket width.
    pub x: f64,
    /// Target residual `|f(root)|`.
    pub f: f64,
    pub max_iter: usize,
}

impl Default for RootTolerance {
    fn default() -> Self {
        Self {
            x: 1e-14,
            f: 1e-12,
            max_iter: 500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    pub fx: f64,
    /// Final bracket.
    pub lo: f64,
    pub hi: f64,
    pub iterations: usize,
}

/// Finds a root of `f` in `[lo, hi]`, given `f(lo)` and `f(hi)` of opposite
/// sign (or zero).
///
/// Inverse quadratic and secant steps are taken when they stay inside the
/// bracket and shrink it fast enough; otherwise the step is a bisection.
/// Iteration stops once the bracket is below `tol.x` and the residual below
/// `tol.f`. When the residual target is not met at width `tol.x`, the
/// bracket keeps shrinking down to adjacent floating-point numbers.
pub fn brent<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    tol: RootTolerance,
) -> Result<Root, NumericalError> {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(Root {
            x: a,
            fx: 0.0,
            lo: a,
            hi: a,
            iterations: 0,
        });
    }
    if fb == 0.0 {
        return Ok(Root {
            x: b,
            fx: 0.0,
            lo: b,
            hi: b,
            iterations: 0,
        });
    }
    if fa.signum() == fb.signum() || !fa.is_finite() && !fb.is_finite() {
        return Err(NumericalError::NoBracket {
            lo,
            hi,
            flo: fa,
            fhi: fb,
        });
    }

    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    let mut xtol = tol.x;

    for it in 1..=tol.max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if fb == 0.0 || m.abs() <= tol1 {
            if fb == 0.0 || fb.abs() <= tol.f || xtol == 0.0 {
                let (l, h) = if b < c { (b, c) } else { (c, b) };
                return Ok(Root {
                    x: b,
                    fx: fb,
                    lo: l,
                    hi: h,
                    iterations: it,
                });
            }
            xtol = 0.0;
            continue;
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                // secant
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                // inverse quadratic interpolation
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(m) };
        fb = f(b);
    }
    Err(NumericalError::RootNotConverged {
        iterations: tol.max_iter,
        lo: b.min(c),
        hi: b.max(c),
    })
}
