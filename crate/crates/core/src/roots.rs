//! Bracketed one-dimensional root finding for monotone functions.
//!
//! Every caller in this crate inverts a strictly monotone branch, so the
//! solvers here assume a sign change on the initial bracket and never leave it.

use crate::error::{Error, Result};

/// Shrink `[lo, hi]` by bisection until its width is at most `width`.
///
/// `f(lo)` and `f(hi)` must have opposite signs (or one of them is zero).
/// Returns the final bracket.
pub fn bisect<F>(f: F, mut lo: f64, mut hi: f64, width: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> f64,
{
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok((lo, lo));
    }
    if f_hi == 0.0 {
        return Ok((hi, hi));
    }
    if f_lo.signum() == f_hi.signum() || f_lo.is_nan() || f_hi.is_nan() {
        return Err(Error::RootFinding { lo, hi });
    }
    // 200 halvings exhaust f64 resolution on any bracket in [-1, 1].
    for _ in 0..200 {
        if hi - lo <= width {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok((mid, mid));
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo, hi))
}

/// Newton iteration safeguarded by a bracket.
///
/// Steps that leave the current bracket are replaced by bisection. Stops when
/// the step is below `rel_tol * |x|` (or the bracket collapses), after at most
/// `max_iter` iterations; returns the best iterate either way.
pub fn safeguarded_newton<F, D>(
    f: F,
    df: D,
    mut lo: f64,
    mut hi: f64,
    x0: f64,
    rel_tol: f64,
    max_iter: usize,
) -> Result<f64>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    if lo > hi {
        std::mem::swap(&mut lo, &mut hi);
    }
    let f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() || f_lo.is_nan() || f_hi.is_nan() {
        return Err(Error::RootFinding { lo, hi });
    }
    let lo_sign = f_lo.signum();
    let mut x = x0.clamp(lo, hi);
    for _ in 0..max_iter {
        let fx = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if fx.signum() == lo_sign {
            lo = x;
        } else {
            hi = x;
        }
        let d = df(x);
        let mut next = x - fx / d;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        let step = (next - x).abs();
        x = next;
        if step <= rel_tol * x.abs().max(f64::MIN_POSITIVE) || hi - lo <= rel_tol * x.abs() {
            return Ok(x);
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_brackets_sqrt2() {
        let (lo, hi) = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert!(hi - lo <= 1e-14);
        assert!((lo - 2f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn bisect_rejects_same_sign() {
        assert!(bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-12).is_err());
    }

    #[test]
    fn newton_decreasing_function() {
        let r = safeguarded_newton(|x| 1.0 - x * x * x, |x| -3.0 * x * x, 0.0, 2.0, 2.0, 1e-15, 100)
            .unwrap();
        assert!((r - 1.0).abs() < 1e-14);
    }

    #[test]
    fn newton_zero_derivative_falls_back_to_bisection() {
        // df = 0 at the start point
        let r = safeguarded_newton(|x| x * x * x - 0.125, |x| 3.0 * x * x, 0.0, 1.0, 0.0, 1e-15, 200)
            .unwrap();
        assert!((r - 0.5).abs() < 1e-14);
    }
}
