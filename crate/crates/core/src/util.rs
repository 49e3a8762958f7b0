//! Small shared helpers.

/// Binomial coefficient as f64 (exact for the small arguments used here).
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut out = 1.0f64;
    for j in 0..k {
        out = out * (n - j) as f64 / (j + 1) as f64;
    }
    out
}

/// Least-squares slope of `y` against `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        cov += (xi - mx) * (yi - my);
        var += (xi - mx) * (xi - mx);
    }
    cov / var
}

/// Fit `y ~ s * u + c * w + b` by least squares and return `(s, c)`.
///
/// Used to extract a power exponent in the presence of a logarithmic
/// correction: with `u = log p` and `w = log log p`, the fitted `s` is the
/// pure power and `c` the log-power.
pub fn fit_power_with_log(u: &[f64], w: &[f64], y: &[f64]) -> (f64, f64) {
    let n = u.len() as f64;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / n;
    let (mu, mw, my) = (mean(u), mean(w), mean(y));
    let mut suu = 0.0;
    let mut sww = 0.0;
    let mut suw = 0.0;
    let mut suy = 0.0;
    let mut swy = 0.0;
    for i in 0..u.len() {
        let du = u[i] - mu;
        let dw = w[i] - mw;
        let dy = y[i] - my;
        suu += du * du;
        sww += dw * dw;
        suw += du * dw;
        suy += du * dy;
        swy += dw * dy;
    }
    let det = suu * sww - suw * suw;
    if det.abs() < 1e-12 {
        return (suy / suu, 0.0);
    }
    let s = (suy * sww - swy * suw) / det;
    let c = (swy * suu - suy * suw) / det;
    (s, c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn binomial_small_values() {
        assert_eq!(binomial(2, 1), 2.0);
        assert_eq!(binomial(6, 2), 15.0);
        assert_eq!(binomial(10, 5), 252.0);
        assert_eq!(binomial(3, 5), 0.0);
    }

    #[test]
    fn slope_of_line_is_recovered() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v + 1.0).collect();
        assert_relative_eq!(ls_slope(&x, &y), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn two_regressor_fit_separates_log_factor() {
        // y = 1.5 u - 0.75 w + 2
        let ps: Vec<f64> = (2..40).map(|p| p as f64).collect();
        let u: Vec<f64> = ps.iter().map(|p| p.ln()).collect();
        let w: Vec<f64> = ps.iter().map(|p| p.ln().ln()).collect();
        let y: Vec<f64> = u.iter().zip(&w).map(|(a, b)| 1.5 * a - 0.75 * b + 2.0).collect();
        let (s, c) = fit_power_with_log(&u, &w, &y);
        assert_relative_eq!(s, 1.5, epsilon = 1e-9);
        assert_relative_eq!(c, -0.75, epsilon = 1e-9);
    }
}
