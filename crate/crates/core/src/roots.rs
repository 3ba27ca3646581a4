//! Bracketed bisection for monotone scalar equations.

use crate::error::{Error, Result};

pub const MAX_ITER: usize = 200;

/// Finds a root of `f` on `[lo, hi]` given `f(lo)` and `f(hi)` of opposite
/// sign (or one of them zero). Halves until the bracket cannot shrink in
/// floating point (at most `MAX_ITER` steps) and returns the endpoint with
/// the smaller residual.
pub fn bisect<F>(f: F, mut lo: f64, mut hi: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let mut flo = f(lo);
    let mut fhi = f(hi);
    if !(flo.is_finite() && fhi.is_finite()) {
        return Err(Error::Convergence(format!(
            "non-finite bracket values f({lo}) = {flo}, f({hi}) = {fhi}"
        )));
    }
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::Bracket {
            target: 0.0,
            lo: flo,
            hi: fhi,
        });
    }
    for _ in 0..MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
            fhi = fm;
        }
    }
    Ok(if flo.abs() <= fhi.abs() { lo } else { hi })
}
