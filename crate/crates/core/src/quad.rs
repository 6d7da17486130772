//! Adaptive Simpson quadrature.

/// Default absolute tolerance for longitudinal integrals.
pub const DEFAULT_TOLERANCE: f64 = 1e-10;

const MAX_DEPTH: u32 = 50;

/// Integrates `f` over `[a, b]` to absolute tolerance `tol`.
///
/// Returns `(a > b)` integrals with the usual sign convention. The
/// integrand is evaluated only at interior and end points, never outside.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    if a > b {
        return -adaptive_simpson(f, b, a, tol);
    }
    // A few coarse panels first so narrow features are not skipped.
    const PANELS: usize = 16;
    let h = (b - a) / PANELS as f64;
    let panel_tol = tol / PANELS as f64;
    (0..PANELS)
        .map(|i| {
            let lo = a + i as f64 * h;
            let hi = if i + 1 == PANELS { b } else { lo + h };
            let fa = f(lo);
            let fb = f(hi);
            let m = 0.5 * (lo + hi);
            let fm = f(m);
            let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
            recurse(&f, lo, hi, fa, fm, fb, whole, panel_tol, MAX_DEPTH)
        })
        .sum()
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}
