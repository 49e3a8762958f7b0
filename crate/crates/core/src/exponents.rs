//! The exponent catalog: every closed-form or recursive exponent and
//! constant used by the bound constructions, with branch provenance.
//!
//! Infinite moment-growth orders are carried as an explicit sentinel whose
//! reciprocal is zero; floating-point infinity never enters the arithmetic.

use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::optimize::max_on_linear_axis;
use crate::quad::adaptive_simpson;
use crate::util::binomial;

/// A moment-growth order in `(0, +inf]`, with `1/inf = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum QExp {
    Finite(f64),
    Inf,
}

impl QExp {
    pub fn finite(q: f64) -> Result<Self> {
        if q.is_infinite() && q > 0.0 {
            return Ok(QExp::Inf);
        }
        if !(q > 0.0) || !q.is_finite() {
            return Err(Error::InvalidInput(format!("order q must be positive, got {q}")));
        }
        Ok(QExp::Finite(q))
    }

    /// `1/q`, with the `1/inf = 0` convention.
    pub fn inv(self) -> f64 {
        match self {
            QExp::Finite(q) => 1.0 / q,
            QExp::Inf => 0.0,
        }
    }

    /// `min(q, 2)` as a finite number.
    pub fn min2(self) -> f64 {
        match self {
            QExp::Finite(q) => q.min(2.0),
            QExp::Inf => 2.0,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, QExp::Finite(_))
    }

    pub fn as_f64(self) -> f64 {
        match self {
            QExp::Finite(q) => q,
            QExp::Inf => f64::INFINITY,
        }
    }
}

impl FromStr for QExp {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") || t == "∞" {
            return Ok(QExp::Inf);
        }
        let v: f64 = t
            .parse()
            .map_err(|_| Error::InvalidInput(format!("cannot parse order '{s}'")))?;
        QExp::finite(v)
    }
}

impl Serialize for QExp {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            QExp::Finite(q) => s.serialize_f64(*q),
            QExp::Inf => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for QExp {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => QExp::finite(v).map_err(serde::de::Error::custom),
            Raw::Str(s) => QExp::from_str(&s).map_err(serde::de::Error::custom),
        }
    }
}

/// A vector of per-coordinate orders `q(1), ..., q(d)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QVector(pub Vec<QExp>);

impl QVector {
    pub fn new(q: Vec<QExp>) -> Result<Self> {
        if q.is_empty() {
            return Err(Error::InvalidInput("order vector must be nonempty".into()));
        }
        Ok(QVector(q))
    }

    pub fn homogeneous(d: usize, q: QExp) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidInput("dimension must be >= 1".into()));
        }
        Ok(QVector(vec![q; d]))
    }

    pub fn d(&self) -> usize {
        self.0.len()
    }

    pub fn parse(s: &str) -> Result<Self> {
        let q: Result<Vec<QExp>> = s.split(',').map(QExp::from_str).collect();
        QVector::new(q?)
    }
}

/// An exponent (optionally paired with a log-power) plus the branch that
/// produced it.
#[derive(Clone, Debug, Serialize)]
pub struct ExponentResult {
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_power: Option<f64>,
    pub branch: String,
}

impl ExponentResult {
    fn plain(value: f64, branch: impl Into<String>) -> Self {
        ExponentResult { value, log_power: None, branch: branch.into() }
    }

    fn pair(value: f64, log_power: f64, branch: impl Into<String>) -> Self {
        ExponentResult { value, log_power: Some(log_power), branch: branch.into() }
    }
}

/// Martingale tail exponent `M(d, q) = (d/2 + sum 1/q(m))^-1`.
pub fn exponent_m(qv: &QVector) -> ExponentResult {
    let d = qv.d() as f64;
    let inv_sum: f64 = qv.0.iter().map(|q| q.inv()).sum();
    ExponentResult::plain(1.0 / (d / 2.0 + inv_sum), "harmonic")
}

/// Base one-dimensional exponent: `2q/(q+2)` for `q <= 1`, `min(q, 2)` above.
pub fn base_exponent_n(q: QExp) -> f64 {
    match q {
        QExp::Finite(v) if v <= 1.0 => 2.0 * v / (v + 2.0),
        other => other.min2(),
    }
}

/// Tail exponent for totally independent coordinates:
/// `1/N_d^(k) = (d-1)/2 + sum_{m != k} 1/q(m) + 1/N(q(k))`, maximised over
/// the distinguished coordinate `k`.
pub fn exponent_nd(qv: &QVector) -> ExponentResult {
    nd_impl(qv, false)
}

/// Off-by-one variant with `(d-2)/2` in place of `(d-1)/2`, kept for
/// comparison.  It does not reproduce the homogeneous closed form.
pub fn exponent_nd_uncorrected(qv: &QVector) -> ExponentResult {
    nd_impl(qv, true)
}

fn nd_impl(qv: &QVector, uncorrected: bool) -> ExponentResult {
    let d = qv.d();
    let half = if uncorrected { (d as f64 - 2.0) / 2.0 } else { (d as f64 - 1.0) / 2.0 };
    let half = half.max(0.0);
    let inv_sum: f64 = qv.0.iter().map(|q| q.inv()).sum();
    let mut best = f64::NEG_INFINITY;
    let mut best_k = 0usize;
    for (k, qk) in qv.0.iter().enumerate() {
        let inv = half + (inv_sum - qk.inv()) + 1.0 / base_exponent_n(*qk);
        let v = 1.0 / inv;
        if v > best {
            best = v;
            best_k = k;
        }
    }
    ExponentResult::plain(best, format!("distinguished coordinate k = {}", best_k + 1))
}

/// Homogeneous closed form for the independent tail exponent:
/// three branches in `q`.
pub fn gamma_dq(d: usize, q: QExp) -> Result<ExponentResult> {
    if d == 0 {
        return Err(Error::InvalidInput("dimension must be >= 1".into()));
    }
    let df = d as f64;
    Ok(match q {
        QExp::Finite(v) if v <= 1.0 => {
            ExponentResult::plain(2.0 * v / (df * (v + 2.0)), "q <= 1")
        }
        QExp::Finite(v) if v <= 2.0 => {
            ExponentResult::plain(2.0 * v / (2.0 * df + v * (df - 1.0)), "1 < q <= 2")
        }
        other => {
            // 2q / (dq + 2(d-1)) = 2 / (d + 2(d-1)/q)
            let v = 2.0 / (df + 2.0 * (df - 1.0) * other.inv());
            ExponentResult::plain(v, "q > 2")
        }
    })
}

/// Exponent/log-power pair for the one-dimensional martingale transform
/// under a log-refined envelope: `(2q/(q+2), 2r/(q+2))`.
pub fn vector_l(q: f64, r: f64) -> Result<ExponentResult> {
    if !(q > 0.0) {
        return Err(Error::InvalidInput("q must be positive".into()));
    }
    Ok(ExponentResult::pair(2.0 * q / (q + 2.0), 2.0 * r / (q + 2.0), "L"))
}

/// Exponent/log-power pair for independent summands, by the three quoted
/// case branches (boundary membership exactly as stated).
pub fn vector_n_qr(q: f64, r: f64) -> Result<ExponentResult> {
    if !(q > 0.0) {
        return Err(Error::InvalidInput("q must be positive".into()));
    }
    let res = if q < 1.0 || (q == 1.0 && r < 0.0) {
        ExponentResult::pair(2.0 * q / (q + 2.0), 2.0 * r / (q + 2.0), "a: q<1 or q=1,r<0")
    } else if (q == 1.0 && r >= 0.0) || (q > 1.0 && q < 2.0) || (q == 2.0 && r < 0.0) {
        ExponentResult::pair(q, r, "b: q=1,r>=0 or 1<q<2 or q=2,r<0")
    } else {
        ExponentResult::pair(2.0, 0.0, "c: q=2,r>=0 or q>2")
    };
    Ok(res)
}

/// Log-refined martingale recursion: returns `(V(d,q), r(d))` where
/// `V(d,q) = 2q/(d(q+2))`, `r(1) = 2r/(q+2)` and
/// `r(s+1) = [r(s) q + V(s,q) r] / [V(s,q) q + 2 V(s,q) + 2q]`.
pub fn log_refined_recursion(d: usize, q: f64, r: f64) -> Result<ExponentResult> {
    if d == 0 || !(q > 0.0) {
        return Err(Error::InvalidInput("need d >= 1 and q > 0".into()));
    }
    let v_at = |s: usize| 2.0 * q / (s as f64 * (q + 2.0));
    let mut rd = 2.0 * r / (q + 2.0);
    for s in 1..d {
        let vs = v_at(s);
        rd = (rd * q + vs * r) / (vs * q + 2.0 * vs + 2.0 * q);
    }
    Ok(ExponentResult::pair(v_at(d), rd, format!("{} recursion steps", d - 1)))
}

/// Moment-bound constant: `gamma(1) = sqrt 2`,
/// `gamma(d+1) = sqrt 2 (1 + 1/d)^d gamma(d)`.
pub fn moment_gamma(d: usize) -> Result<f64> {
    if d == 0 {
        return Err(Error::InvalidInput("dimension must be >= 1".into()));
    }
    let mut g = std::f64::consts::SQRT_2;
    for s in 1..d {
        let sf = s as f64;
        g *= std::f64::consts::SQRT_2 * (1.0 + 1.0 / sf).powi(s as i32);
    }
    Ok(g)
}

/// Absolutely-summable-coefficient exponent `G = (sum 1/q(m))^-1`
/// (infinite when every coordinate is bounded).
pub fn exponent_g(qv: &QVector) -> ExponentResult {
    let inv_sum: f64 = qv.0.iter().map(|q| q.inv()).sum();
    if inv_sum == 0.0 {
        ExponentResult::plain(f64::INFINITY, "all coordinates bounded")
    } else {
        ExponentResult::plain(1.0 / inv_sum, "harmonic over coordinates")
    }
}

/// Rescaling weight for the decomposition of a rank-`r` kernel:
/// `t(d, k, r) = 1 / ((d - r + 1) C(d, k))`.
pub fn ustat_scale_t(d: usize, k: usize, r: usize) -> Result<f64> {
    if !(1 <= r && r <= k && k <= d) {
        return Err(Error::InvalidInput(format!("need 1 <= r <= k <= d, got d={d}, k={k}, r={r}")));
    }
    Ok(1.0 / ((d - r + 1) as f64 * binomial(d, k)))
}

/// `F(q, r)`: 1 for `r <= 0`, `exp(q)` for `r > 0`.
pub fn f_qr(q: f64, r: f64) -> f64 {
    if r <= 0.0 {
        1.0
    } else {
        q.exp()
    }
}

/// Auxiliary constants of the one-dimensional truncation analysis.
#[derive(Clone, Debug, Serialize)]
pub struct AuxConstants {
    /// `delta(q) = min(q/2, 1)^(-1/q)`.
    pub delta: f64,
    /// Numeric supremum `sup_{v in [0, 10]} exp(v^q) int_v^inf x exp(-x^q) dx`.
    pub beta_numeric: f64,
    /// Where the numeric supremum was attained (an edge hit means the
    /// supremand is still growing, i.e. the definition diverges for q < 2).
    pub beta_argmax: f64,
    /// Closed max-form `max(Gamma(2/q)/q, (e/q)(2/(e q))^(2/q))`.
    pub beta_max_form: f64,
    /// Closed form `Gamma(2/q)/(q e)`.
    pub beta_gamma_form: f64,
}

/// Compute `delta(q)`, the `beta(q)` supremum (numerically, on `v in
/// [0, 10]`) and both closed forms, leaving the choice between them to the
/// caller.
pub fn aux_constants(q: f64) -> Result<AuxConstants> {
    if !(q > 0.0) || !q.is_finite() {
        return Err(Error::InvalidInput("q must be positive and finite".into()));
    }
    let delta = (q / 2.0f64).min(1.0).powf(-1.0 / q);
    // g(v) = exp(v^q) int_v^inf x exp(-x^q) dx, integrated as
    // int_v^up x exp(v^q - x^q) dx so nothing overflows
    let g = |v: f64| {
        let vq = v.powf(q);
        let up = (vq + 90.0).powf(1.0 / q);
        let f = |x: f64| x * (vq - x.powf(q)).exp();
        adaptive_simpson(&f, v, up, 1e-9)
    };
    let v_cap = 10.0f64.min(600.0f64.powf(1.0 / q));
    let (arg, sup) = max_on_linear_axis(&g, 0.0, v_cap, 200, 1e-8);
    let beta_max_form = (gamma(2.0 / q) / q).max((std::f64::consts::E / q)
        * (2.0 / (std::f64::consts::E * q)).powf(2.0 / q));
    let beta_gamma_form = gamma(2.0 / q) / (q * std::f64::consts::E);
    Ok(AuxConstants {
        delta,
        beta_numeric: sup,
        beta_argmax: arg,
        beta_max_form,
        beta_gamma_form,
    })
}
