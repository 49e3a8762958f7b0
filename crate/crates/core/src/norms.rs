//! Norm recovery from moment sequences for the exponential-moment scales
//! `G(q)`, `G(q, r)` and `Psi(C, beta)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which moment-growth scale the norm lives in.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum NormFamily {
    /// `sup_p |eta|_p p^{-1/q}` over `p >= 1`.
    Gq { q: f64 },
    /// `sup_p |eta|_p p^{-1/q} (log p)^{-r}` over `p >= 2`.
    Gqr { q: f64, r: f64 },
    /// `sup_p |eta|_p exp(-c p^beta)` over `p >= 1`.
    PsiBeta { c: f64, beta: f64 },
}

impl NormFamily {
    fn min_p(&self) -> f64 {
        match self {
            NormFamily::Gq { .. } | NormFamily::PsiBeta { .. } => 1.0,
            NormFamily::Gqr { .. } => 2.0,
        }
    }

    fn weight(&self, p: f64) -> f64 {
        match self {
            NormFamily::Gq { q } => p.powf(-1.0 / q),
            NormFamily::Gqr { q, r } => p.powf(-1.0 / q) * p.ln().powf(-r),
            NormFamily::PsiBeta { c, beta } => (-c * p.powf(*beta)).exp(),
        }
    }
}

/// A finite-horizon lower estimate of a moment-scale norm.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct NormEstimate {
    pub value: f64,
    /// Largest moment order that entered the supremum.
    pub horizon: f64,
    /// Where the supremum was attained.
    pub argmax_p: f64,
}

/// Supremum of weighted moments over the supplied `(p, |eta|_p)` pairs.
///
/// The input must satisfy the Lyapunov ordering (`|eta|_p` nondecreasing in
/// `p`); the result is a lower estimate of the true norm, with the horizon
/// recorded.
pub fn norm_from_moments(moments: &[(f64, f64)], family: &NormFamily) -> Result<NormEstimate> {
    if moments.is_empty() {
        return Err(Error::InvalidInput("empty moment sequence".into()));
    }
    let mut sorted: Vec<(f64, f64)> = moments.to_vec();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut prev = 0.0f64;
    for &(p, m) in &sorted {
        if !(p >= 1.0) || !m.is_finite() || m < 0.0 {
            return Err(Error::InvalidInput(format!("bad moment entry ({p}, {m})")));
        }
        if m < prev * (1.0 - 1e-9) {
            return Err(Error::NonMonotoneMoments { p });
        }
        prev = prev.max(m);
    }
    let min_p = family.min_p();
    let mut best = f64::NEG_INFINITY;
    let mut arg = min_p;
    let mut horizon = min_p;
    for &(p, m) in &sorted {
        if p < min_p {
            continue;
        }
        horizon = horizon.max(p);
        let v = m * family.weight(p);
        if v > best {
            best = v;
            arg = p;
        }
    }
    if !best.is_finite() {
        return Err(Error::InvalidInput("no moments at or above the family's minimum order".into()));
    }
    Ok(NormEstimate { value: best, horizon, argmax_p: arg })
}
