//! One-dimensional bracketing searches.

use crate::error::{Error, Result};

/// Bisection for a monotone predicate.
///
/// `pred(lo)` must be false and `pred(hi)` true. Returns the final bracket
/// `(lo, hi)` with `hi - lo <= abs_tol`; `hi` is the smallest point known to
/// satisfy the predicate.
pub fn bisect_predicate<P: FnMut(f64) -> bool>(mut lo: f64, mut hi: f64, abs_tol: f64, mut pred: P) -> (f64, f64) {
    for _ in 0..200 {
        if hi - lo <= abs_tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (lo, hi)
}

/// Bisection in log-space for a positive variable, stopping at relative
/// width `rel_tol`. Same bracket convention as [`bisect_predicate`].
pub fn bisect_predicate_log<P: FnMut(f64) -> bool>(lo: f64, hi: f64, rel_tol: f64, mut pred: P) -> (f64, f64) {
    debug_assert!(lo > 0.0 && hi > lo);
    let (a, b) = bisect_predicate(lo.ln(), hi.ln(), (1.0 + rel_tol).ln(), |u| pred(u.exp()));
    (a.exp(), b.exp())
}

/// Root of a continuous function with a sign change on `[lo, hi]`.
pub fn bisect_root<F: FnMut(f64) -> f64>(mut lo: f64, mut hi: f64, abs_tol: f64, mut f: F) -> Result<f64> {
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::Numerical(format!("no sign change on [{lo}, {hi}]")));
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= abs_tol || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section minimisation of a unimodal function on `[a, b]`.
///
/// Returns `(x_min, f(x_min))`.
pub fn golden_section<F: FnMut(f64) -> f64>(mut a: f64, mut b: f64, abs_tol: f64, mut f: F) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > abs_tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc < fd { (c, fc) } else { (d, fd) }
}

/// Expands geometrically around `start` until the middle point is lower than
/// both ends, giving a bracket `(lo, mid, hi)` for a minimum.
pub fn bracket_minimum<F: FnMut(f64) -> f64>(start: f64, step: f64, lo_limit: f64, hi_limit: f64, mut f: F) -> Result<(f64, f64, f64)> {
    let mut mid = start;
    let mut f_mid = f(mid);
    let mut lo = mid - step;
    let mut hi = mid + step;
    let mut f_lo = f(lo);
    let mut f_hi = f(hi);
    for _ in 0..200 {
        if f_mid <= f_lo && f_mid <= f_hi {
            return Ok((lo, mid, hi));
        }
        if f_lo < f_hi {
            // Move left.
            hi = mid;
            f_hi = f_mid;
            mid = lo;
            f_mid = f_lo;
            lo = mid - (hi - mid) * 2.0;
            if lo < lo_limit {
                break;
            }
            f_lo = f(lo);
        } else {
            lo = mid;
            f_lo = f_mid;
            mid = hi;
            f_mid = f_hi;
            hi = mid + (mid - lo) * 2.0;
            if hi > hi_limit {
                break;
            }
            f_hi = f(hi);
        }
    }
    Err(Error::Numerical(format!("could not bracket a minimum near {start}")))
}
