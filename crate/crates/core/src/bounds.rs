//! End-to-end tail and moment bounds for degree-`d` multilinear sums of
//! martingale differences with unit-norm coefficients.
//!
//! The recursive constructions peel one coordinate at a time: the increment
//! of the degree-`d` sum factors into (outermost coordinate) x (normalised
//! degree-`d-1` sum), its tail is bounded by the product composition, and
//! the resulting martingale transform is bounded by the truncation operator.
//! Under total independence the innermost stage upgrades to the
//! Cramer-refined operator.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::cramer::{cramer_refined_bound, CramerProfile};
use crate::error::{Error, Result};
use crate::exponents::{exponent_m, exponent_nd, moment_gamma, QExp, QVector};
use crate::optimize::min_on_log_axis;
use crate::tail::{product_tail, truncation_bound, TailFunction};
use crate::util::ls_slope;

/// Dependence structure the coordinate families are assumed to satisfy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Independence {
    MartingaleOnly,
    TotallyIndependent,
}

/// A per-coordinate envelope `p -> sup_i |xi(i,m)|_p`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MomentEnvelope {
    Constant { value: f64 },
    /// `coef * p^(1/q) * (log p)^r`
    PowerLog { coef: f64, inv_q: f64, log_r: f64 },
    /// Moments of a modulus with tail `exp(-(x/k)^q)`:
    /// `|xi|_p <= k Gamma(p/q + 1)^(1/p)`.
    WeibullAbs { q: f64, k: f64 },
}

impl MomentEnvelope {
    pub fn eval(&self, p: f64) -> f64 {
        match self {
            MomentEnvelope::Constant { value } => *value,
            MomentEnvelope::PowerLog { coef, inv_q, log_r } => {
                coef * p.powf(*inv_q) * p.ln().max(1e-12).powf(*log_r)
            }
            MomentEnvelope::WeibullAbs { q, k } => k * (ln_gamma(p / q + 1.0) / p).exp(),
        }
    }
}

/// Everything the bound constructions are allowed to assume about the
/// coordinate families.
#[derive(Clone, Debug)]
pub struct FamilyAssumptions {
    pub d: usize,
    /// Per-coordinate tail envelopes dominating every summand of that
    /// coordinate.
    pub tails: Vec<TailFunction>,
    /// Optional per-coordinate log-MGF envelopes (independent case only).
    pub cramer: Vec<Option<CramerProfile>>,
    pub independence: Independence,
    /// Optional per-coordinate moment envelopes.
    pub moments: Vec<Option<MomentEnvelope>>,
}

impl FamilyAssumptions {
    pub fn new(
        tails: Vec<TailFunction>,
        cramer: Vec<Option<CramerProfile>>,
        independence: Independence,
        moments: Vec<Option<MomentEnvelope>>,
    ) -> Result<Self> {
        let d = tails.len();
        if d == 0 {
            return Err(Error::InvalidInput("need at least one coordinate".into()));
        }
        if cramer.len() != d || moments.len() != d {
            return Err(Error::InvalidInput("per-coordinate lists must have length d".into()));
        }
        Ok(FamilyAssumptions { d, tails, cramer, independence, moments })
    }

    /// Uniform assumptions across coordinates.
    pub fn homogeneous(
        d: usize,
        tail: TailFunction,
        cramer: Option<CramerProfile>,
        independence: Independence,
        moment: Option<MomentEnvelope>,
    ) -> Result<Self> {
        Self::new(
            vec![tail; d],
            vec![cramer; d],
            independence,
            vec![moment; d],
        )
    }

    pub fn describe(&self) -> Vec<String> {
        let mut out = vec![
            format!("d = {}", self.d),
            format!("independence = {:?}", self.independence),
        ];
        for (m, t) in self.tails.iter().enumerate() {
            let kind = if t.is_parametric() {
                let (y, k, q, rho) = t.parametric_params().unwrap();
                format!("parametric(Y={y}, K={k}, q={q}, rho={rho})")
            } else {
                format!("grid({} nodes)", t.grid_nodes().unwrap().0.len())
            };
            let cram = match &self.cramer[m] {
                Some(p) => format!("cramer(lambda_max={})", p.lambda_max()),
                None => "no cramer profile".into(),
            };
            let mom = match &self.moments[m] {
                Some(e) => format!("{e:?}"),
                None => "no moment envelope".into(),
            };
            out.push(format!("coordinate {}: {kind}; {cram}; {mom}", m + 1));
        }
        out
    }
}

/// Whether a bound caps the tail from above or sketches it from below.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundSide {
    Upper,
    Lower,
}

/// The payload of a bound: a tail curve or a moment curve `p -> bound`.
#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CurveData {
    Tail { tail: TailFunction },
    Moments { points: Vec<(f64, f64)> },
}

/// A constructed bound together with how it was built.
#[derive(Clone, Debug, Serialize)]
pub struct BoundResult {
    pub curve: CurveData,
    pub side: BoundSide,
    pub provenance: Vec<String>,
    pub assumptions: Vec<String>,
}

impl BoundResult {
    pub fn tail(&self) -> Option<&TailFunction> {
        match &self.curve {
            CurveData::Tail { tail } => Some(tail),
            CurveData::Moments { .. } => None,
        }
    }
}

/// In which order the recursion consumes coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoordinateOrder {
    /// Outermost coordinate first (`d, d-1, ..., 1`), matching the way the
    /// increment of the degree-`d` sum factors.  The default.
    Descending,
    /// Seed with coordinate `d`, then step through `2, 3, ..., d`,
    /// reproducing the index pattern of the original recursion display.
    /// Agrees with `Descending` for homogeneous envelopes.
    AscendingLiteral,
}

fn recursion_indices(d: usize, order: CoordinateOrder) -> (usize, Vec<usize>) {
    match order {
        CoordinateOrder::Descending => (d - 1, (0..d - 1).rev().collect()),
        CoordinateOrder::AscendingLiteral => (d - 1, (1..d).collect()),
    }
}

/// Tail bound for the degree-`d` martingale sum: seed with the truncation
/// bound of the last coordinate, then alternate product composition and
/// truncation through the remaining coordinates.
pub fn martingale_tail_bound(a: &FamilyAssumptions) -> Result<BoundResult> {
    martingale_tail_bound_with_order(a, CoordinateOrder::Descending)
}

pub fn martingale_tail_bound_with_order(
    a: &FamilyAssumptions,
    order: CoordinateOrder,
) -> Result<BoundResult> {
    let (seed, rest) = recursion_indices(a.d, order);
    let mut prov = vec![format!("seed: truncation bound of coordinate {}", seed + 1)];
    let mut t = truncation_bound(&a.tails[seed])?;
    for m in rest {
        prov.push(format!("compose with coordinate {} and truncate", m + 1));
        let composed = product_tail(&a.tails[m], &t);
        t = truncation_bound(&composed)?;
    }
    Ok(BoundResult {
        curve: CurveData::Tail { tail: t },
        side: BoundSide::Upper,
        provenance: prov,
        assumptions: a.describe(),
    })
}

/// Tail bound for totally independent coordinates: same recursion, but the
/// seed uses the Cramer-refined operator when the seed coordinate carries a
/// log-MGF envelope.  Without one the construction falls back to the
/// martingale seed (recorded in provenance).
pub fn independent_tail_bound(a: &FamilyAssumptions) -> Result<BoundResult> {
    independent_tail_bound_with_order(a, CoordinateOrder::Descending)
}

pub fn independent_tail_bound_with_order(
    a: &FamilyAssumptions,
    order: CoordinateOrder,
) -> Result<BoundResult> {
    if a.independence != Independence::TotallyIndependent {
        return Err(Error::InvalidInput(
            "independent tail bound requires the totally-independent flag".into(),
        ));
    }
    let (seed, rest) = recursion_indices(a.d, order);
    let mut prov = Vec::new();
    let mut t = match &a.cramer[seed] {
        Some(profile) if profile.lambda_max() > 0.0 => {
            prov.push(format!("seed: cramer-refined truncation bound of coordinate {}", seed + 1));
            cramer_refined_bound(&a.tails[seed], profile)?
        }
        _ => {
            prov.push(format!(
                "seed: no cramer profile for coordinate {}; falling back to the plain truncation bound",
                seed + 1
            ));
            truncation_bound(&a.tails[seed])?
        }
    };
    for m in rest {
        prov.push(format!("compose with coordinate {} and truncate", m + 1));
        let composed = product_tail(&a.tails[m], &t);
        t = truncation_bound(&composed)?;
    }
    Ok(BoundResult {
        curve: CurveData::Tail { tail: t },
        side: BoundSide::Upper,
        provenance: prov,
        assumptions: a.describe(),
    })
}

fn envelope_tails(qv: &QVector, scales: &[f64]) -> Result<Vec<TailFunction>> {
    if scales.len() != qv.d() {
        return Err(Error::InvalidInput("need one scale per coordinate".into()));
    }
    qv.0.iter()
        .zip(scales)
        .map(|(&q, &k)| match q {
            QExp::Finite(v) => TailFunction::parametric(1.0, k, v, 0.0),
            QExp::Inf => TailFunction::indicator(k),
        })
        .collect()
}

/// Fit the smallest scale constant `C` such that `exp(-(x/(C K))^m)`
/// dominates `pipeline` on its informative window.  Returns `(C, window)`.
fn fit_scale_constant(pipeline: &TailFunction, m: f64, k_prod: f64) -> (f64, (f64, f64)) {
    // window: from where the pipeline drops below 0.9 down to 1e-16
    let mut x_lo = None;
    let mut x_hi = None;
    for j in 0..4000 {
        let x = k_prod * 1e-3 * (1.0095f64).powi(j);
        let v = pipeline.eval(x);
        if x_lo.is_none() && v < 0.9 {
            x_lo = Some(x);
        }
        if v < 1e-16 {
            x_hi = Some(x);
            break;
        }
    }
    let x_lo = x_lo.unwrap_or(k_prod);
    let x_hi = x_hi.unwrap_or(x_lo * 1e3).max(x_lo * 2.0);
    let mut c: f64 = 0.0;
    for j in 0..=256 {
        let x = x_lo * (x_hi / x_lo).powf(j as f64 / 256.0);
        let v = pipeline.eval(x);
        if v <= 0.0 || v >= 1.0 {
            continue;
        }
        let needed = x / (k_prod * (-v.ln()).powf(1.0 / m));
        c = c.max(needed);
    }
    (c.max(1e-12), (x_lo, x_hi))
}

/// Closed-form martingale envelope: a parametric tail with the harmonic
/// exponent `M(d, q)`, scale constant fitted from the recursive pipeline so
/// that the envelope is a true relaxation of it on the informative window.
pub fn martingale_envelope(qv: &QVector, scales: &[f64]) -> Result<BoundResult> {
    let tails = envelope_tails(qv, scales)?;
    let a = FamilyAssumptions::new(
        tails,
        vec![None; qv.d()],
        Independence::MartingaleOnly,
        vec![None; qv.d()],
    )?;
    let pipeline = martingale_tail_bound(&a)?;
    let m = exponent_m(qv);
    let k_prod: f64 = scales.iter().product();
    let pipe_tail = pipeline.tail().unwrap();
    let (c, window) = fit_scale_constant(pipe_tail, m.value, k_prod);
    let envelope = TailFunction::parametric(1.0, c * k_prod, m.value, 0.0)?;
    let mut prov = vec![
        format!("exponent M = {:.6} ({})", m.value, m.branch),
        format!(
            "scale constant C = {:.6} from the recursive pipeline on x in [{:.3e}, {:.3e}] (constant up to proof-tracking)",
            c, window.0, window.1
        ),
        format!("matching lower envelope has the same exponent M = {:.6}; its constant is not tracked", m.value),
    ];
    prov.extend(pipeline.provenance.iter().map(|s| format!("pipeline: {s}")));
    Ok(BoundResult {
        curve: CurveData::Tail { tail: envelope },
        side: BoundSide::Upper,
        provenance: prov,
        assumptions: a.describe(),
    })
}

/// Closed-form independent envelope: a parametric tail with the recursion
/// exponent `N_d(q)`, scale constant fitted from the independent pipeline.
pub fn independent_envelope(qv: &QVector, scales: &[f64]) -> Result<BoundResult> {
    let tails = envelope_tails(qv, scales)?;
    let cramer: Vec<Option<CramerProfile>> = qv
        .0
        .iter()
        .zip(scales)
        .map(|(&q, &k)| match q {
            QExp::Finite(v) => CramerProfile::weibull_symmetric(v, k),
            QExp::Inf => Some(CramerProfile::bounded(k)),
        })
        .collect();
    let a = FamilyAssumptions::new(
        tails,
        cramer,
        Independence::TotallyIndependent,
        vec![None; qv.d()],
    )?;
    let pipeline = independent_tail_bound(&a)?;
    let nd = exponent_nd(qv);
    let k_prod: f64 = scales.iter().product();
    let pipe_tail = pipeline.tail().unwrap();
    let (c, window) = fit_scale_constant(pipe_tail, nd.value, k_prod);
    let envelope = TailFunction::parametric(1.0, c * k_prod, nd.value, 0.0)?;
    let mut prov = vec![
        format!("exponent N_d = {:.6} ({})", nd.value, nd.branch),
        format!(
            "scale constant C = {:.6} from the independent pipeline on x in [{:.3e}, {:.3e}] (constant up to proof-tracking)",
            c, window.0, window.1
        ),
    ];
    prov.extend(pipeline.provenance.iter().map(|s| format!("pipeline: {s}")));
    Ok(BoundResult {
        curve: CurveData::Tail { tail: envelope },
        side: BoundSide::Upper,
        provenance: prov,
        assumptions: a.describe(),
    })
}

/// Lower envelope realised by the product construction: exponent
/// `min(q, 2) / d`.  Used to sandwich empirical tails, never as an upper
/// bound.
pub fn product_lower_envelope(d: usize, q: QExp) -> Result<BoundResult> {
    if d == 0 {
        return Err(Error::InvalidInput("dimension must be >= 1".into()));
    }
    let expo = q.min2() / d as f64;
    let tail = TailFunction::parametric(1.0, 1.0, expo, 0.0)?;
    Ok(BoundResult {
        curve: CurveData::Tail { tail },
        side: BoundSide::Lower,
        provenance: vec![
            format!("lower bound: product construction exponent min(q,2)/d = {expo:.6}"),
            "used to sandwich empirical tails; the constant is not tracked".into(),
        ],
        assumptions: vec![format!("d = {d}, homogeneous q = {}", q.as_f64())],
    })
}

fn product_of_moments(a: &FamilyAssumptions, p: f64) -> Result<f64> {
    let mut prod = 1.0;
    for (m, env) in a.moments.iter().enumerate() {
        match env {
            Some(e) => prod *= e.eval(p),
            None => return Err(Error::MissingMoments { coordinate: m }),
        }
    }
    Ok(prod)
}

/// Martingale moment bound: `gamma(d) p^d prod_m mu_m(d p)`.
pub fn martingale_moment_bound(a: &FamilyAssumptions, p: f64) -> Result<f64> {
    if !(p >= 2.0) {
        return Err(Error::InvalidInput(format!("moment order p must be >= 2, got {p}")));
    }
    let d = a.d;
    Ok(moment_gamma(d)? * p.powi(d as i32) * product_of_moments(a, d as f64 * p)?)
}

/// Independent moment bound: `2^(d/2) p^d prod_m mu_m(p) / log p`.
pub fn independent_moment_bound(a: &FamilyAssumptions, p: f64) -> Result<f64> {
    if a.independence != Independence::TotallyIndependent {
        return Err(Error::InvalidInput(
            "independent moment bound requires the totally-independent flag".into(),
        ));
    }
    if !(p >= 2.0) {
        return Err(Error::InvalidInput(format!("moment order p must be >= 2, got {p}")));
    }
    let d = a.d;
    Ok(2f64.powf(d as f64 / 2.0) * p.powi(d as i32) * product_of_moments(a, p)? / p.ln())
}

/// Moment curve sampled for reporting.
pub fn moment_curve(
    a: &FamilyAssumptions,
    ps: &[f64],
    independent: bool,
) -> Result<BoundResult> {
    let points: Result<Vec<(f64, f64)>> = ps
        .iter()
        .map(|&p| {
            let v = if independent {
                independent_moment_bound(a, p)?
            } else {
                martingale_moment_bound(a, p)?
            };
            Ok((p, v))
        })
        .collect();
    Ok(BoundResult {
        curve: CurveData::Moments { points: points? },
        side: BoundSide::Upper,
        provenance: vec![if independent {
            "independent moment bound 2^(d/2) p^d prod mu_m(p) / log p".into()
        } else {
            "martingale moment bound gamma(d) p^d prod mu_m(d p)".into()
        }],
        assumptions: a.describe(),
    })
}

/// Markov/moment-method tail: `x -> min(1, inf_{p in [2, p_hi]}
/// (curve(p)/x)^p)`.
pub fn moments_to_tail(curve: &dyn Fn(f64) -> f64, p_hi: f64) -> TailFunction {
    let p_hi = p_hi.max(2.5);
    let f = |x: f64| -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        let obj = |p: f64| {
            let b = curve(p);
            if b <= 0.0 {
                return f64::INFINITY;
            }
            let lg = p * (b.ln() - x.ln());
            if lg > 0.0 {
                1.0
            } else {
                lg.exp()
            }
        };
        let (_, v) = min_on_log_axis(&obj, 2.0, p_hi, 128, 1e-8);
        v.min(1.0)
    };
    // reference scale: where the order-2 bound starts to bite
    let k_ref = curve(2.0).abs().max(1e-9);
    TailFunction::from_fn(f, k_ref)
}

/// Least-squares slope of `log(-log T)` against `log x` over `[x_lo, x_hi]`,
/// the standard way to read off a tail exponent.
pub fn tail_exponent_slope(tail: &TailFunction, x_lo: f64, x_hi: f64, points: usize) -> f64 {
    let mut us = Vec::new();
    let mut vs = Vec::new();
    for j in 0..points {
        let x = x_lo * (x_hi / x_lo).powf(j as f64 / (points - 1) as f64);
        let t = tail.eval(x);
        if t > 0.0 && t < 1.0 {
            us.push(x.ln());
            vs.push((-t.ln()).ln());
        }
    }
    if us.len() < 2 {
        return f64::NAN;
    }
    ls_slope(&us, &vs)
}
