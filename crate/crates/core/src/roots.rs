//! Bracketing root finders shared by the boundary tracer, the critical-curve
//! solver and the cascade locator.

use crate::error::AnalysisError;

/// Bisection on a sign change of `f` over `[lo, hi]`, run until the bracket
/// is narrower than `tol` or stops shrinking in floating point.
pub fn bisect<F>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64, AnalysisError>
where
    F: FnMut(f64) -> f64,
{
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() || f_lo.is_nan() || f_hi.is_nan() {
        return Err(AnalysisError::NotBracketed { lo, hi });
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if (hi - lo).abs() <= tol || mid <= lo.min(hi) || mid >= lo.max(hi) {
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
}

/// Bisection on a boolean predicate that is false at `lo` and true at `hi`.
/// Returns the final `(false side, true side)` bracket.
pub fn bisect_predicate<F>(mut pred: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64)
where
    F: FnMut(f64) -> bool,
{
    while (hi - lo).abs() > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo.min(hi) || mid >= lo.max(hi) {
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

/// All roots of `f` on `[a, b]` found by sampling `samples` equally spaced
/// points and bisecting every sign change. Exact zeros at samples count.
pub fn roots_on_segment<F>(f: F, a: f64, b: f64, samples: usize) -> Vec<f64>
where
    F: Fn(f64) -> f64,
{
    let n = samples.max(2);
    let xs: Vec<f64> = (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let mut out = Vec::new();
    for k in 0..n {
        if ys[k] == 0.0 {
            out.push(xs[k]);
            continue;
        }
        if k + 1 < n && ys[k + 1] != 0.0 && ys[k].signum() != ys[k + 1].signum() {
            if let Ok(r) = bisect(&f, xs[k], xs[k + 1], 0.0) {
                out.push(r);
            }
        }
    }
    out
}
