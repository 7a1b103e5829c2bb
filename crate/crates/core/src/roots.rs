//! Bracketing scalar solvers used for bound parameters and confidence limits.

/// Invphi = (sqrt(5) - 1) / 2
const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Bisection for a monotone predicate.
///
/// `pred` must be false at `lo` and true at `hi` and switch exactly once.
/// Returns the final bracket `(lo, hi)` with `hi - lo <= tol`; `pred(hi)` is
/// true and `pred(lo)` is false.
pub fn bisect_predicate<F>(mut lo: f64, mut hi: f64, tol: f64, mut pred: F) -> (f64, f64)
where
    F: FnMut(f64) -> bool,
{
    debug_assert!(lo <= hi);
    // 200 halvings exhaust any f64 bracket.
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = lo + 0.5 * (hi - lo);
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

/// Smallest `t` in `[lo, hi]` with `f(t) >= target` for increasing `f`,
/// resolved to absolute tolerance `tol`. Returns `None` when `f(hi) < target`.
pub fn invert_increasing<F>(lo: f64, hi: f64, target: f64, tol: f64, f: F) -> Option<f64>
where
    F: Fn(f64) -> f64,
{
    if f(lo) >= target {
        return Some(lo);
    }
    if f(hi) < target {
        return None;
    }
    Some(bisect_predicate(lo, hi, tol, |t| f(t) >= target).1)
}

/// Golden-section search for the maximizer of a unimodal function on `[lo, hi]`.
pub fn golden_section_max<F>(mut lo: f64, mut hi: f64, tol: f64, f: F) -> f64
where
    F: Fn(f64) -> f64,
{
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    while hi - lo > tol {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}
