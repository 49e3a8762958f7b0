//! Scalar minimisation helpers.
//!
//! Every inner optimisation in this crate (truncation level, product split
//! point, conjugate slope, block count) is one-dimensional and unimodal for
//! the parametric families in scope.  A coarse scan followed by
//! golden-section refinement is enough; decade-shifted restarts guard grid
//! inputs with flat stretches.

/// 2 - phi, the golden-section interior ratio.
const INV_GOLD: f64 = 0.381_966_011_250_105_1;

/// Golden-section minimum of `f` on `[a, b]`.  Returns `(argmin, f(argmin))`.
pub fn golden_min(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    if b < a {
        std::mem::swap(&mut a, &mut b);
    }
    let mut x1 = a + INV_GOLD * (b - a);
    let mut x2 = b - INV_GOLD * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut iters = 0usize;
    while (b - a) > tol && iters < 200 {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = a + INV_GOLD * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = b - INV_GOLD * (b - a);
            f2 = f(x2);
        }
        iters += 1;
    }
    if f1 < f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Golden-section maximum of `f` on `[a, b]`.
pub fn golden_max(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> (f64, f64) {
    let neg = |x: f64| -f(x);
    let (x, v) = golden_min(&neg, a, b, tol);
    (x, -v)
}

/// Minimise `f` over positive `x in [lo, hi]` by scanning `ln x` on `coarse`
/// points and refining with golden section around the best bracket plus two
/// decade-shifted restarts.  `f` is evaluated exactly at the returned point.
pub fn min_on_log_axis(
    f: &dyn Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    coarse: usize,
    tol_log: f64,
) -> (f64, f64) {
    assert!(lo > 0.0 && hi > lo, "log-axis search needs 0 < lo < hi");
    let ulo = lo.ln();
    let uhi = hi.ln();
    let g = |u: f64| f(u.exp());
    let n = coarse.max(8);
    let mut best_u = ulo;
    let mut best_v = f64::INFINITY;
    for j in 0..=n {
        let u = ulo + (uhi - ulo) * j as f64 / n as f64;
        let v = g(u);
        if v < best_v {
            best_v = v;
            best_u = u;
        }
    }
    let step = (uhi - ulo) / n as f64;
    let mut best = (best_u.exp(), best_v);
    let decade = std::f64::consts::LN_10;
    // tight bracket around the scan winner, then two decade-shifted restarts
    let windows = [
        (best_u - step, best_u + step),
        (best_u - decade - step, best_u - decade + step),
        (best_u + decade - step, best_u + decade + step),
    ];
    for (wa, wb) in windows {
        let a = wa.max(ulo);
        let b = wb.min(uhi);
        if b <= a {
            continue;
        }
        let (u, v) = golden_min(&g, a, b, tol_log);
        if v < best.1 {
            best = (u.exp(), v);
        }
    }
    best
}

/// Maximise `f` over `[lo, hi]` by a uniform linear scan plus golden-section
/// refinement around the best bracket.
pub fn max_on_linear_axis(
    f: &dyn Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    coarse: usize,
    tol: f64,
) -> (f64, f64) {
    assert!(hi >= lo);
    if hi == lo {
        return (lo, f(lo));
    }
    let n = coarse.max(8);
    let mut best_x = lo;
    let mut best_v = f64::NEG_INFINITY;
    let mut best_j = 0usize;
    for j in 0..=n {
        let x = lo + (hi - lo) * j as f64 / n as f64;
        let v = f(x);
        if v > best_v {
            best_v = v;
            best_x = x;
            best_j = j;
        }
    }
    let step = (hi - lo) / n as f64;
    let a = if best_j == 0 { lo } else { best_x - step };
    let b = if best_j == n { hi } else { best_x + step };
    let (x, v) = golden_max(f, a, b, tol);
    if v > best_v {
        (x, v)
    } else {
        (best_x, best_v)
    }
}
