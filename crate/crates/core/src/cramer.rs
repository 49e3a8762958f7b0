//! Cramer profiles: log-MGF envelopes, their l2-aggregates, and the
//! Young-Fenchel (convex conjugate) machinery that turns them into
//! Chernoff-type tail bounds for coefficient-normalised sums.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::optimize::{golden_max, max_on_linear_axis};
use crate::tail::{truncation_bound, TailFunction};
use crate::quad::adaptive_simpson;

/// `log cosh(u)`, stable for tiny and huge arguments.
pub(crate) fn ln_cosh(u: f64) -> f64 {
    let a = u.abs();
    if a < 1e-4 {
        let s = a * a;
        s / 2.0 - s * s / 12.0
    } else {
        a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
    }
}

/// A scalar function of one nonnegative variable, either sampled on a grid
/// (piecewise linear, with a quadratic first segment so that centered
/// log-MGF envelopes keep their curvature at zero) or analytic.
#[derive(Clone)]
pub enum ScalarCurve {
    Grid { x: Vec<f64>, y: Vec<f64> },
    Analytic(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for ScalarCurve {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScalarCurve::Grid { x, .. } => write!(f, "ScalarCurve::Grid({} nodes)", x.len()),
            ScalarCurve::Analytic(_) => write!(f, "ScalarCurve::Analytic"),
        }
    }
}

impl ScalarCurve {
    pub fn analytic(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        ScalarCurve::Analytic(Arc::new(f))
    }

    pub fn from_points(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() || x.len() < 2 {
            return Err(Error::InvalidInput("curve needs at least two matching nodes".into()));
        }
        if x[0] != 0.0 || y[0] != 0.0 {
            return Err(Error::InvalidInput("curve must pass through the origin".into()));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("curve abscissas must be strictly increasing".into()));
        }
        Ok(ScalarCurve::Grid { x, y })
    }

    /// Largest abscissa with a stored value (infinite for analytic curves).
    pub fn upper_x(&self) -> f64 {
        match self {
            ScalarCurve::Grid { x, .. } => x[x.len() - 1],
            ScalarCurve::Analytic(_) => f64::INFINITY,
        }
    }

    pub fn eval(&self, lambda: f64) -> f64 {
        let l = lambda.abs();
        match self {
            ScalarCurve::Analytic(f) => f(l),
            ScalarCurve::Grid { x, y } => {
                if l == 0.0 {
                    return 0.0;
                }
                let m = x.len() - 1;
                if l >= x[m] {
                    // linear continuation with the final slope
                    let s = (y[m] - y[m - 1]) / (x[m] - x[m - 1]);
                    return y[m] + s * (l - x[m]);
                }
                let i = x.partition_point(|&xi| xi <= l) - 1;
                if i == 0 {
                    // quadratic through the origin: keeps centered envelopes
                    // quadratic near zero instead of the linear chord
                    let r = l / x[1];
                    return y[1] * r * r;
                }
                let w = (l - x[i]) / (x[i + 1] - x[i]);
                y[i] + w * (y[i + 1] - y[i])
            }
        }
    }
}

/// A log-MGF envelope `phi` together with the largest abscissa where it is
/// finite.  `lambda_max == 0` encodes the absence of an exponential-moment
/// condition; every Chernoff-type branch then degenerates to the vacuous
/// bound.
#[derive(Clone, Debug)]
pub struct CramerProfile {
    phi: ScalarCurve,
    lambda_max: f64,
}

impl CramerProfile {
    pub fn new(phi: ScalarCurve, lambda_max: f64) -> Result<Self> {
        if lambda_max < 0.0 {
            return Err(Error::InvalidInput("lambda_max must be nonnegative".into()));
        }
        if lambda_max > 0.0 {
            let probe = if lambda_max.is_finite() { lambda_max * (1.0 - 1e-9) } else { 1.0 };
            if phi.eval(0.0).abs() > 1e-12 {
                return Err(Error::InvalidInput("phi(0) must be 0".into()));
            }
            let mut prev = 0.0f64;
            for j in 1..=64 {
                let l = probe * j as f64 / 64.0;
                let v = phi.eval(l);
                if v < prev - 1e-10 * (1.0 + prev.abs()) {
                    return Err(Error::InvalidInput("phi must be nondecreasing on [0, lambda_max)".into()));
                }
                prev = v;
            }
        }
        Ok(CramerProfile { phi, lambda_max })
    }

    /// No exponential-moment condition at all.
    pub fn degenerate() -> Self {
        CramerProfile { phi: ScalarCurve::analytic(|_| 0.0), lambda_max: 0.0 }
    }

    /// `phi(l) = sigma2 l^2 / 2`, the sub-Gaussian envelope.
    pub fn quadratic(sigma2: f64) -> Self {
        CramerProfile {
            phi: ScalarCurve::analytic(move |l| 0.5 * sigma2 * l * l),
            lambda_max: f64::INFINITY,
        }
    }

    /// Envelope of a variable bounded by `k`: `phi(l) = log cosh(k l)`.
    pub fn bounded(k: f64) -> Self {
        CramerProfile {
            phi: ScalarCurve::analytic(move |l| ln_cosh(k * l)),
            lambda_max: f64::INFINITY,
        }
    }

    /// Exact envelope of a finite-support variable: `max over signs of
    /// log sum p_i exp(+-l v_i)`.
    pub fn finite_support(values: &[f64], probs: &[f64]) -> Result<Self> {
        if values.len() != probs.len() || values.is_empty() {
            return Err(Error::InvalidInput("finite-support profile needs matching atoms".into()));
        }
        let vals: Vec<f64> = values.to_vec();
        let ps: Vec<f64> = probs.to_vec();
        let phi = move |l: f64| {
            let mut best = f64::NEG_INFINITY;
            for sign in [1.0, -1.0] {
                let m = vals.iter().map(|v| sign * l * v).fold(f64::NEG_INFINITY, f64::max);
                let v = if m < 30.0 {
                    // E e^X = 1 + sum p (e^x - 1): expm1/ln_1p keep full
                    // precision when the exponents are tiny
                    let s: f64 = vals
                        .iter()
                        .zip(&ps)
                        .map(|(v, p)| p * (sign * l * v).exp_m1())
                        .sum();
                    s.ln_1p()
                } else {
                    let s: f64 = vals
                        .iter()
                        .zip(&ps)
                        .map(|(v, p)| p * (sign * l * v - m).exp())
                        .sum();
                    m + s.ln()
                };
                best = best.max(v);
            }
            best.max(0.0)
        };
        CramerProfile::new(ScalarCurve::analytic(phi), f64::INFINITY)
    }

    /// Numeric envelope of a symmetric variable whose modulus tail is
    /// `exp(-(x/k)^q)`.  Finite for every `lambda` when `q > 1`, finite below
    /// `1/k` when `q = 1`, nonexistent for `q < 1`.
    pub fn weibull_symmetric(q: f64, k: f64) -> Option<Self> {
        if !(q >= 1.0 && k > 0.0) {
            return None;
        }
        let lambda_max = if q == 1.0 { (1.0 / k) * (1.0 - 1e-9) } else { f64::INFINITY };
        let phi_exact = move |l: f64| weibull_log_mgf(q, k, l);
        // sample once on a geometric grid; evaluation stays cheap afterwards
        let l_ref = 1.0 / k;
        let mut hi = l_ref * 1e-4;
        let cap = if q == 1.0 { lambda_max } else { l_ref * 1e9 };
        let mut nodes = vec![0.0];
        while hi < cap {
            nodes.push(hi);
            if phi_exact(hi) > 720.0 {
                break;
            }
            hi *= 1.06;
        }
        if nodes.len() < 3 {
            nodes.push(cap * 0.5);
            nodes.push(cap);
        }
        let ys: Vec<f64> = nodes.iter().map(|&l| if l == 0.0 { 0.0 } else { phi_exact(l) }).collect();
        let grid_hi = *nodes.last().unwrap();
        let phi = ScalarCurve::from_points(nodes, ys).ok()?;
        CramerProfile::new(phi, if q == 1.0 { lambda_max } else { grid_hi }).ok()
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    pub fn phi(&self) -> &ScalarCurve {
        &self.phi
    }

    pub fn phi_at(&self, lambda: f64) -> f64 {
        self.phi.eval(lambda)
    }

    /// l2-aggregate of the envelope: the supremum of `nu phi(lambda /
    /// sqrt(nu))` over block counts `nu >= 1`.  The integer supremum is
    /// relaxed to real `nu`, which can only increase the value and keeps the
    /// derived tail bounds conservative; for the exactly-quadratic envelope
    /// the two agree.
    pub fn chi(&self, lambda: f64) -> Result<f64> {
        let l = lambda.abs();
        if l == 0.0 {
            return Ok(0.0);
        }
        let g = |u: f64| u.exp() * self.phi.eval(l * (-0.5 * u).exp());
        const U_HI: f64 = 80.0;
        let (_, sup) = max_on_linear_axis(&g, 0.0, U_HI, 128, 1e-9);
        // diverging supremand means phi grows slower than quadratically near
        // zero, which no centered log-MGF does
        let tail_a = g(64.0);
        let tail_b = g(U_HI);
        if tail_b > 1e-12 && tail_b > 1.02 * tail_a && tail_b >= sup * (1.0 - 1e-9) {
            return Err(Error::UnboundedChi);
        }
        Ok(sup.max(self.phi.eval(l)))
    }

    /// `chi` sampled on a grid of abscissas.
    pub fn chi_curve(&self, lambdas: &[f64]) -> Result<Vec<(f64, f64)>> {
        lambdas.iter().map(|&l| Ok((l, self.chi(l)?))).collect()
    }

    /// Young-Fenchel conjugate of `chi` at `x >= 0`.
    pub fn chi_star(&self, x: f64) -> Result<f64> {
        if self.lambda_max <= 0.0 || x <= 0.0 {
            return Ok(0.0);
        }
        let cap = if self.lambda_max.is_finite() {
            self.lambda_max * (1.0 - 1e-12)
        } else {
            self.phi.upper_x().min(1e12)
        };
        let m = |l: f64| -> Result<f64> { Ok(l * x - self.chi(l)?) };
        // expand until the objective stops growing
        let mut hi = cap.min(1.0);
        while hi < cap {
            let a = m(hi)?;
            let b = m((hi * 2.0).min(cap))?;
            if b <= a {
                break;
            }
            hi = (hi * 2.0).min(cap);
        }
        // scan + golden on [0, hi*2 clipped]; chi failures surface as a flag
        let hi = (hi * 2.0).min(cap);
        let err = std::cell::Cell::new(false);
        let obj = |l: f64| match m(l) {
            Ok(v) => v,
            Err(_) => {
                err.set(true);
                f64::NEG_INFINITY
            }
        };
        let (_, sup) = max_on_linear_axis(&obj, 0.0, hi, 192, hi * 1e-12);
        if err.get() {
            return Err(Error::UnboundedChi);
        }
        Ok(sup.max(0.0))
    }
}

/// `log E exp(l |xi|)`-style envelope for the symmetric stretched-exponential
/// family: `log int_0^inf cosh(l k w) q w^{q-1} e^{-w^q} dw`, computed in the
/// log domain.
fn weibull_log_mgf(q: f64, k: f64, l: f64) -> f64 {
    if l == 0.0 {
        return 0.0;
    }
    let a = l * k;
    let h = |w: f64| {
        if w <= 0.0 {
            return f64::NEG_INFINITY;
        }
        ln_cosh(a * w) + q.ln() + (q - 1.0) * w.ln() - w.powf(q)
    };
    // mode of the exponent
    let w_star = if q > 1.0 { (a / q).powf(1.0 / (q - 1.0)).max(1e-12) } else { 1.0 };
    let (_, m_star) = golden_max(&h, w_star * 1e-3, w_star * 1e3 + 10.0, 1e-10);
    let m_star = m_star.max(h(1.0));
    let mut w_up = w_star.max(1.0);
    while h(w_up) > m_star - 60.0 {
        w_up *= 1.5;
        if w_up > 1e12 {
            break;
        }
    }
    let g = |w: f64| (h(w) - m_star).exp();
    let integral = adaptive_simpson(&g, 1e-12, w_up, 1e-9).max(1e-300);
    (m_star + integral.ln()).max(0.0)
}

/// Conjugate `sup_l (l x - chi(l))` of a sampled or analytic curve over
/// `l in [0, lambda_hi]`, on the given abscissas.
///
/// For sampled curves the conjugate of the piecewise-linear extension is
/// exact (node maximum plus the analytic first-segment candidate); for
/// analytic curves a scan with golden-section refinement is used.
pub fn young_fenchel(chi: &ScalarCurve, lambda_hi: f64, xs: &[f64]) -> Vec<(f64, f64)> {
    xs.iter()
        .map(|&x| {
            let v = match chi {
                ScalarCurve::Grid { x: ls, y } => {
                    let mut best = 0.0f64;
                    for (l, c) in ls.iter().zip(y) {
                        if *l > lambda_hi {
                            break;
                        }
                        best = best.max(l * x - c);
                    }
                    // interior candidate on the quadratic first segment
                    if ls.len() > 1 && y[1] > 0.0 {
                        let c = y[1] / (ls[1] * ls[1]);
                        let l_star = x / (2.0 * c);
                        if l_star > 0.0 && l_star < ls[1].min(lambda_hi) {
                            best = best.max(x * x / (4.0 * c));
                        }
                    }
                    best
                }
                ScalarCurve::Analytic(f) => {
                    if x <= 0.0 {
                        return (x, 0.0);
                    }
                    let obj = |l: f64| l * x - f(l);
                    let cap = lambda_hi.min(1e12);
                    let mut hi = cap.min(1.0);
                    while hi < cap && obj((2.0 * hi).min(cap)) > obj(hi) {
                        hi = (2.0 * hi).min(cap);
                    }
                    let hi = (2.0 * hi).min(cap);
                    let (_, sup) = max_on_linear_axis(&obj, 0.0, hi, 192, hi * 1e-12);
                    sup.max(0.0)
                }
            };
            (x, v.max(0.0))
        })
        .collect()
}

/// The Chernoff-type tail `exp(-chi*(x))` for coefficient-normalised sums of
/// independent variables with the given profile.
pub fn linear_sum_tail(profile: &CramerProfile) -> Result<TailFunction> {
    if profile.lambda_max() <= 0.0 {
        return Ok(TailFunction::constant_one());
    }
    // reference scale: where the conjugate passes 1
    let mut x1 = 1e-6;
    let mut guard = 0;
    while profile.chi_star(x1)? < 1.0 && guard < 240 {
        x1 *= 2.0;
        guard += 1;
    }
    let cache = std::cell::RefCell::new(std::collections::BTreeMap::<u64, f64>::new());
    let f = |x: f64| -> f64 {
        let key = x.to_bits();
        if let Some(v) = cache.borrow().get(&key) {
            return *v;
        }
        let v = match profile.chi_star(x) {
            Ok(cs) => (-cs).exp().min(1.0),
            Err(_) => 1.0,
        };
        cache.borrow_mut().insert(key, v);
        v
    };
    Ok(TailFunction::from_fn(f, x1))
}

/// Refined truncation bound: the pointwise minimum of the truncation bound
/// and the Chernoff branch `exp(-chi*(x))`.
pub fn cramer_refined_bound(tail: &TailFunction, profile: &CramerProfile) -> Result<TailFunction> {
    let w = truncation_bound(tail)?;
    if profile.lambda_max() <= 0.0 {
        return Ok(w);
    }
    let chernoff = linear_sum_tail(profile)?;
    Ok(TailFunction::pointwise_min(&w, &chernoff))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn quadratic_phi_is_chi_fixed_point() {
        // n phi(l/sqrt n) is constant in n for the quadratic envelope
        let p = CramerProfile::quadratic(1.0);
        for &l in &[0.3, 1.0, 4.0] {
            assert_relative_eq!(p.chi(l).unwrap(), 0.5 * l * l, max_relative = 1e-9);
        }
    }

    #[test]
    fn quartic_phi_keeps_single_block() {
        // n (l/sqrt n)^4 = l^4 / n is maximised at n = 1
        let p = CramerProfile::new(ScalarCurve::analytic(|l| l.powi(4)), f64::INFINITY).unwrap();
        for &l in &[0.5, 1.0, 2.0] {
            assert_relative_eq!(p.chi(l).unwrap(), l.powi(4), max_relative = 1e-9);
        }
    }

    #[test]
    fn subquadratic_tail_growth_aggregates_to_quadratic() {
        // phi ~ l^q with q in (1,2) at large l, quadratic near zero:
        // the aggregate grows like l^2
        let q = 1.5;
        let p = CramerProfile::new(
            ScalarCurve::analytic(move |l: f64| (1.0 + l * l).powf(q / 2.0) - 1.0),
            f64::INFINITY,
        )
        .unwrap();
        let lo = p.chi(10.0).unwrap();
        let hi = p.chi(100.0).unwrap();
        let slope = (hi / lo).ln() / (10.0f64).ln();
        assert!((slope - 2.0).abs() < 0.1, "aggregate slope {slope}, expected ~2");
    }

    #[test]
    fn genuinely_subquadratic_envelope_is_rejected() {
        // phi = l^1.5 all the way to zero cannot come from a centered
        // variable; the aggregate diverges
        let p = CramerProfile::new(ScalarCurve::analytic(|l: f64| l.powf(1.5)), f64::INFINITY).unwrap();
        assert!(matches!(p.chi(1.0), Err(Error::UnboundedChi)));
    }

    #[test]
    fn conjugate_of_quadratic_is_quadratic() {
        let chi = ScalarCurve::analytic(|l| 0.5 * l * l);
        let xs: Vec<f64> = (0..=100).map(|j| 10.0 * j as f64 / 100.0).collect();
        for (x, v) in young_fenchel(&chi, f64::INFINITY, &xs) {
            assert!((v - 0.5 * x * x).abs() <= 1e-6, "x={x}: {v}");
        }
    }

    #[test]
    fn conjugate_of_cubic_is_three_halves_power() {
        let chi = ScalarCurve::analytic(|l| l.powi(3) / 3.0);
        let xs: Vec<f64> = (1..=100).map(|j| 0.1 * j as f64).collect();
        for (x, v) in young_fenchel(&chi, f64::INFINITY, &xs) {
            let expect = 2.0 / 3.0 * x.powf(1.5);
            assert!((v - expect).abs() <= 1e-5 * expect, "x={x}: {v} vs {expect}");
        }
    }

    #[test]
    fn conjugate_at_zero_is_zero() {
        let chi = ScalarCurve::analytic(|l| l * l);
        let out = young_fenchel(&chi, f64::INFINITY, &[0.0]);
        assert_eq!(out[0].1, 0.0);
    }

    #[test]
    fn linear_sum_tail_of_gaussian_profile() {
        let p = CramerProfile::quadratic(1.0);
        let t = linear_sum_tail(&p).unwrap();
        assert_eq!(t.eval(0.0), 1.0);
        for &x in &[1.5, 3.0, 6.0] {
            let expect = (-(x * x) / 2.0f64).exp();
            assert_relative_eq!(t.eval(x), expect, max_relative = 2e-3);
        }
    }

    #[test]
    fn degenerate_profile_gives_vacuous_bound() {
        let p = CramerProfile::degenerate();
        let t = linear_sum_tail(&p).unwrap();
        for &x in &[0.0, 1.0, 100.0] {
            assert_eq!(t.eval(x), 1.0);
        }
    }

    #[test]
    fn degenerate_profile_leaves_truncation_bound_unchanged() {
        let tail = TailFunction::parametric(1.0, 1.0, 2.0, 0.0).unwrap();
        let w = truncation_bound(&tail).unwrap();
        let wbar = cramer_refined_bound(&tail, &CramerProfile::degenerate()).unwrap();
        for j in 0..60 {
            let x = 0.2 * j as f64;
            assert_relative_eq!(wbar.eval(x), w.eval(x), epsilon = 1e-15);
        }
    }

    #[test]
    fn refined_bound_never_exceeds_truncation_bound() {
        let tail = TailFunction::indicator(1.0).unwrap();
        let p = CramerProfile::quadratic(1.0);
        let w = truncation_bound(&tail).unwrap();
        let wbar = cramer_refined_bound(&tail, &p).unwrap();
        for j in 0..160 {
            let x = 12.0 * j as f64 / 159.0;
            assert!(wbar.eval(x) <= w.eval(x) * (1.0 + 1e-9), "x={x}");
        }
        // with the sub-Gaussian profile the Chernoff branch wins
        assert!(wbar.eval(3.0) <= (-(9.0f64) / 2.0).exp() * 1.01);
    }

    #[test]
    fn finite_support_profile_matches_cosh() {
        let p = CramerProfile::finite_support(&[1.0, -1.0], &[0.5, 0.5]).unwrap();
        for &l in &[0.1, 1.0, 5.0] {
            assert_relative_eq!(p.phi_at(l), ln_cosh(l), max_relative = 1e-12);
        }
    }

    #[test]
    fn weibull_profile_exists_only_above_q1() {
        assert!(CramerProfile::weibull_symmetric(0.5, 1.0).is_none());
        let p = CramerProfile::weibull_symmetric(2.0, 1.0).unwrap();
        // symmetric q=2 modulus tail: E cosh(l xi) = 1 + something ~ l^2/2 * E xi^2
        let small = p.phi_at(1e-3);
        assert!(small > 0.0 && small < 1e-5);
        assert!(p.phi_at(3.0) > p.phi_at(1.0));
    }

    #[test]
    fn cubic_grid_curve_conjugates_like_analytic() {
        let ls: Vec<f64> = (0..=4000).map(|j| 8.0 * j as f64 / 4000.0).collect();
        let ys: Vec<f64> = ls.iter().map(|l| l.powi(3) / 3.0).collect();
        let chi = ScalarCurve::from_points(ls, ys).unwrap();
        let xs = [1.0, 4.0, 9.0];
        for (x, v) in young_fenchel(&chi, f64::INFINITY, &xs) {
            let expect = 2.0 / 3.0 * x.powf(1.5);
            assert_relative_eq!(v, expect, max_relative = 1e-4);
        }
    }
}
