//! One-dimensional search primitives.

use crate::scalar::Real;

/// Minimizer and minimum of a unimodal `f` on `[a, b]` by golden-section
/// search, stopping once the bracket is narrower than `tol`.
pub fn golden_min<T: Real>(mut f: impl FnMut(T) -> T, mut a: T, mut b: T, tol: T) -> (T, T) {
    let inv_phi = (T::lit(5.0).sqrt() - T::one()) / T::lit(2.0);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..400 {
        if (b - a).abs() <= tol {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Golden-section minimization of a convex `f` on the whole line: the
/// bracket around `guess` doubles outward until `f` rises on both sides.
/// Returns `None` if `f` keeps decreasing past `limit` in either direction.
pub fn convex_min<T: Real>(
    mut f: impl FnMut(T) -> T,
    guess: T,
    width: T,
    limit: T,
    tol: T,
) -> Option<(T, T)> {
    let mut step = width;
    let mut lo = guess - step;
    let mut flo = f(lo);
    let mut fmid = f(guess);
    let mut mid = guess;
    while flo < fmid {
        mid = lo;
        fmid = flo;
        step *= T::lit(2.0);
        lo = mid - step;
        if lo < -limit {
            return None;
        }
        flo = f(lo);
    }
    step = width;
    let mut hi = mid + step;
    let mut fhi = f(hi);
    while fhi < fmid {
        lo = mid;
        mid = hi;
        fmid = fhi;
        step *= T::lit(2.0);
        hi = mid + step;
        if hi > limit {
            return None;
        }
        fhi = f(hi);
    }
    Some(golden_min(f, lo, hi, tol))
}

/// Bisection for the boundary of `{x ∈ [lo, hi] : pred(x)}` where `pred(lo)`
/// holds and `pred(hi)` does not. Returns the last point known to satisfy
/// `pred`, within `tol` of the boundary.
pub fn bisect_boundary<T: Real>(
    mut pred: impl FnMut(T) -> bool,
    mut lo: T,
    mut hi: T,
    tol: T,
) -> T {
    for _ in 0..200 {
        if (hi - lo).abs() <= tol {
            break;
        }
        let mid = (lo + hi) / T::lit(2.0);
        if mid == lo || mid == hi {
            break;
        }
        if pred(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}
