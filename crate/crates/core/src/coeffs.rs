//! Coefficient-field analytics: split measures over a magnitude threshold,
//! the threshold-optimised tail and moment bounds they induce, power-law
//! coefficient regimes with integral-comparison remainders, and the
//! variance-normalised multilinear sums.
//!
//! Displayed split bounds pair an l1 route with an l2 route.  The l1
//! (triangle-inequality) route is only finite over the *large* coefficients
//! near the origin, and the l2 (variance) route needs the *small* far
//! coefficients, so the threshold bounds below combine `l1 over {|b| >
//! lambda}` with `l2 over {|b| <= lambda}`; that is the combination the
//! power-law regime table comes from.  [`split_profile`] itself reports the
//! literal `(l1 over small, l2 over large)` pair, whose l1 part may be
//! infinite.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::bounds::{
    independent_tail_bound, martingale_tail_bound, moments_to_tail, BoundResult, BoundSide,
    CurveData, FamilyAssumptions, Independence, MomentEnvelope,
};
use crate::cramer::CramerProfile;
use crate::error::{Error, Result};
use crate::exponents::{exponent_g, exponent_m, exponent_nd, QExp, QVector};
use crate::optimize::min_on_log_axis;
use crate::tail::TailFunction;
use crate::util::binomial;

/// A possibly infinite coefficient mass.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mass {
    Finite { value: f64 },
    Infinite,
}

impl Mass {
    pub fn value(self) -> Option<f64> {
        match self {
            Mass::Finite { value } => Some(value),
            Mass::Infinite => None,
        }
    }
}

/// The coefficient array `b(I)` over strictly increasing index tuples.
#[derive(Clone, Debug)]
pub enum CoefficientField {
    /// Explicit entries (tuples are 1-based, strictly increasing, sorted).
    Dense { d: usize, n: usize, entries: Vec<(Vec<u32>, f64)> },
    /// `b(I) = prod_m beta[m][i_m - 1]`.
    Separable { d: usize, n: usize, beta: Vec<Vec<f64>> },
    /// `|b(I)| = coef |I|^-alpha` with infinite horizon, kept dense up to
    /// index `cap` with integral-comparison bounds beyond.
    PowerLaw { d: usize, alpha: f64, coef: f64, cap: u32 },
}

fn check_tuple(idx: &[u32], d: usize, n: usize) -> Result<()> {
    if idx.len() != d {
        return Err(Error::InvalidInput("tuple length must equal d".into()));
    }
    let mut prev = 0u32;
    for &i in idx {
        if i <= prev || i as usize > n {
            return Err(Error::InvalidInput(format!("tuple {idx:?} is not strictly increasing within 1..={n}")));
        }
        prev = i;
    }
    Ok(())
}

/// Euclidean norm of an index tuple.
fn tuple_norm(idx: &[u32]) -> f64 {
    idx.iter().map(|&i| (i as f64) * (i as f64)).sum::<f64>().sqrt()
}

/// Visit all strictly increasing `d`-tuples over `1..=n`.
pub fn for_each_increasing_tuple(n: usize, d: usize, mut f: impl FnMut(&[u32])) {
    if d == 0 || n < d {
        return;
    }
    let mut idx: Vec<u32> = (1..=d as u32).collect();
    loop {
        f(&idx);
        let mut pos = d;
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            if idx[pos] < (n - (d - 1 - pos)) as u32 {
                idx[pos] += 1;
                for j in pos + 1..d {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

impl CoefficientField {
    pub fn dense(d: usize, n: usize, mut entries: Vec<(Vec<u32>, f64)>) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidInput("d must be >= 1".into()));
        }
        for (idx, _) in &entries {
            check_tuple(idx, d, n)?;
        }
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidInput("duplicate index tuple".into()));
        }
        Ok(CoefficientField::Dense { d, n, entries })
    }

    pub fn separable(beta: Vec<Vec<f64>>) -> Result<Self> {
        let d = beta.len();
        if d == 0 {
            return Err(Error::InvalidInput("need at least one coordinate array".into()));
        }
        let n = beta[0].len();
        if beta.iter().any(|b| b.len() != n) || n == 0 {
            return Err(Error::InvalidInput("coordinate arrays must share a nonzero length".into()));
        }
        if n < d {
            return Err(Error::InvalidInput("horizon n must be at least d".into()));
        }
        Ok(CoefficientField::Separable { d, n, beta })
    }

    /// The unit-norm uniform field: `b(I) = C(n, d)^(-1/2)`.
    pub fn uniform(d: usize, n: usize) -> Result<Self> {
        if n < d || d == 0 {
            return Err(Error::InvalidInput("need n >= d >= 1".into()));
        }
        let count = binomial(n, d);
        let beta_val = count.powf(-0.5 / d as f64);
        CoefficientField::separable(vec![vec![beta_val; n]; d])
    }

    pub fn power_law(d: usize, alpha: f64, coef: f64, cap: u32) -> Result<Self> {
        if d == 0 || !(coef > 0.0) || (cap as usize) < d + 2 {
            return Err(Error::InvalidInput(
                "power-law field needs d >= 1, coef > 0 and a usable cap".into(),
            ));
        }
        // at or below alpha = d/2 not even the square mass converges; no
        // bound in scope applies, so the field is rejected outright
        if !(alpha > d as f64 / 2.0) {
            return Err(Error::NonSummable);
        }
        Ok(CoefficientField::PowerLaw { d, alpha, coef, cap })
    }

    pub fn d(&self) -> usize {
        match self {
            CoefficientField::Dense { d, .. }
            | CoefficientField::Separable { d, .. }
            | CoefficientField::PowerLaw { d, .. } => *d,
        }
    }

    /// Finite horizon, if any.
    pub fn horizon(&self) -> Option<usize> {
        match self {
            CoefficientField::Dense { n, .. } | CoefficientField::Separable { n, .. } => Some(*n),
            CoefficientField::PowerLaw { .. } => None,
        }
    }

    pub fn b_at(&self, idx: &[u32]) -> f64 {
        match self {
            CoefficientField::Dense { entries, .. } => entries
                .binary_search_by(|e| e.0.as_slice().cmp(idx))
                .map(|j| entries[j].1)
                .unwrap_or(0.0),
            CoefficientField::Separable { beta, .. } => idx
                .iter()
                .enumerate()
                .map(|(m, &i)| beta[m][(i - 1) as usize])
                .product(),
            CoefficientField::PowerLaw { alpha, coef, .. } => coef * tuple_norm(idx).powf(-alpha),
        }
    }

    /// Visit the explicitly representable entries (all of them for finite
    /// fields, the dense window for power-law fields).
    pub fn for_each_entry(&self, mut f: impl FnMut(&[u32], f64)) {
        match self {
            CoefficientField::Dense { entries, .. } => {
                for (idx, b) in entries {
                    f(idx, *b);
                }
            }
            CoefficientField::Separable { d, n, beta } => {
                for_each_increasing_tuple(*n, *d, |idx| {
                    let b: f64 = idx
                        .iter()
                        .enumerate()
                        .map(|(m, &i)| beta[m][(i - 1) as usize])
                        .product();
                    f(idx, b);
                });
            }
            CoefficientField::PowerLaw { d, alpha, coef, cap } => {
                for_each_increasing_tuple(*cap as usize, *d, |idx| {
                    f(idx, coef * tuple_norm(idx).powf(-alpha));
                });
            }
        }
    }

    /// `sum b^2` (dense part plus the analytic remainder for power-law
    /// fields; the remainder is an upper bound, so the result is one too).
    pub fn l2_mass(&self) -> f64 {
        let mut s = 0.0;
        self.for_each_entry(|_, b| s += b * b);
        if let CoefficientField::PowerLaw { d, alpha, coef, cap } = self {
            s += coef * coef * ordered_tail_sum(*d, 2.0 * alpha, *cap as f64);
        }
        s
    }

    /// `sum |b|`, possibly infinite.
    pub fn l1_mass(&self) -> Mass {
        let mut s = 0.0;
        self.for_each_entry(|_, b| s += b.abs());
        if let CoefficientField::PowerLaw { d, alpha, coef, cap } = self {
            if *alpha <= *d as f64 {
                return Mass::Infinite;
            }
            s += coef * ordered_tail_sum(*d, *alpha, *cap as f64);
        }
        Mass::Finite { value: s }
    }
}

/// Upper bound for `sum_{ordered tuples, |I| > R} |I|^-s`, `s > d`, by
/// integral comparison: each lattice tuple owns the unit cube below it, so
/// the sum is at most `(1/d!) (d V_d / 2^d) (R - sqrt d)^(d-s) / (s - d)`.
fn ordered_tail_sum(d: usize, s: f64, r: f64) -> f64 {
    let df = d as f64;
    debug_assert!(s > df);
    let rho = (r - df.sqrt()).max(1.0);
    let v_d = std::f64::consts::PI.powf(df / 2.0) / gamma(df / 2.0 + 1.0);
    let orthant_area = df * v_d / 2f64.powi(d as i32);
    let mut fact = 1.0;
    for j in 2..=d {
        fact *= j as f64;
    }
    orthant_area / fact * rho.powf(df - s) / (s - df)
}

/// Upper bound for `sum_{ordered tuples, R1 < |I| <= R2} |I|^-s` (any `s`).
fn ordered_band_sum(d: usize, s: f64, r1: f64, r2: f64) -> f64 {
    if r2 <= r1 {
        return 0.0;
    }
    let df = d as f64;
    let lo = (r1 - df.sqrt()).max(0.5);
    let hi = r2.max(lo);
    let v_d = std::f64::consts::PI.powf(df / 2.0) / gamma(df / 2.0 + 1.0);
    let orthant_area = df * v_d / 2f64.powi(d as i32);
    let mut fact = 1.0;
    for j in 2..=d {
        fact *= j as f64;
    }
    let a = df - s;
    let integral = if a.abs() < 1e-12 {
        (hi / lo).ln()
    } else {
        (hi.powf(a) - lo.powf(a)) / a
    };
    orthant_area / fact * integral.max(0.0)
}

/// Sorted magnitude table with prefix sums, for O(log) mass queries.
struct MassTable {
    /// ascending |b|
    abs: Vec<f64>,
    /// prefix sums over the ascending order
    pre_l1: Vec<f64>,
    pre_l2: Vec<f64>,
    power: Option<(usize, f64, f64, u32)>, // (d, alpha, coef, cap)
}

impl MassTable {
    fn build(field: &CoefficientField) -> Self {
        let mut abs: Vec<f64> = Vec::new();
        field.for_each_entry(|_, b| abs.push(b.abs()));
        abs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut pre_l1 = Vec::with_capacity(abs.len() + 1);
        let mut pre_l2 = Vec::with_capacity(abs.len() + 1);
        pre_l1.push(0.0);
        pre_l2.push(0.0);
        for &a in &abs {
            pre_l1.push(pre_l1.last().unwrap() + a);
            pre_l2.push(pre_l2.last().unwrap() + a * a);
        }
        let power = match field {
            CoefficientField::PowerLaw { d, alpha, coef, cap } => Some((*d, *alpha, *coef, *cap)),
            _ => None,
        };
        MassTable { abs, pre_l1, pre_l2, power }
    }

    /// index of the first magnitude strictly above `lambda`
    fn split_idx(&self, lambda: f64) -> usize {
        self.abs.partition_point(|&a| a <= lambda)
    }

    /// radius beyond which power-law magnitudes drop to `lambda` or below
    fn power_radius(&self, lambda: f64) -> Option<f64> {
        self.power.map(|(_, alpha, coef, _)| (coef / lambda.max(1e-300)).powf(1.0 / alpha))
    }

    /// l1 mass of the small coefficients `{|b| <= lambda}` (literal split).
    fn l1_small(&self, lambda: f64) -> Mass {
        let j = self.split_idx(lambda);
        let dense = self.pre_l1[j];
        match self.power {
            None => Mass::Finite { value: dense },
            Some((d, alpha, coef, cap)) => {
                if alpha <= d as f64 {
                    return Mass::Infinite;
                }
                let r = self.power_radius(lambda).unwrap().max(cap as f64);
                Mass::Finite { value: dense + coef * ordered_tail_sum(d, alpha, r) }
            }
        }
    }

    /// l2 mass of the large coefficients `{|b| > lambda}` (literal split).
    fn l2_large(&self, lambda: f64) -> f64 {
        let j = self.split_idx(lambda);
        let dense = self.pre_l2[self.abs.len()] - self.pre_l2[j];
        match self.power {
            None => dense,
            Some((d, alpha, coef, cap)) => {
                let r = self.power_radius(lambda).unwrap();
                if r > cap as f64 {
                    dense + coef * coef * ordered_band_sum(d, 2.0 * alpha, cap as f64, r)
                } else {
                    dense
                }
            }
        }
    }

    /// l1 mass of the large coefficients `{|b| > lambda}` (always finite).
    fn l1_large(&self, lambda: f64) -> f64 {
        let j = self.split_idx(lambda);
        let dense = self.pre_l1[self.abs.len()] - self.pre_l1[j];
        match self.power {
            None => dense,
            Some((d, alpha, coef, cap)) => {
                let r = self.power_radius(lambda).unwrap();
                if r > cap as f64 {
                    dense + coef * ordered_band_sum(d, alpha, cap as f64, r)
                } else {
                    dense
                }
            }
        }
    }

    /// l2 mass of the small coefficients `{|b| <= lambda}` (finite whenever
    /// the field is square-summable).
    fn l2_small(&self, lambda: f64) -> f64 {
        let j = self.split_idx(lambda);
        let dense = self.pre_l2[j];
        match self.power {
            None => dense,
            Some((d, alpha, coef, cap)) => {
                let r = self.power_radius(lambda).unwrap().max(cap as f64);
                dense + coef * coef * ordered_tail_sum(d, 2.0 * alpha, r)
            }
        }
    }

    /// Candidate thresholds: the distinct magnitudes plus surrounding
    /// endpoints (the masses are piecewise constant between magnitudes).
    fn probes(&self, max_count: usize) -> Vec<f64> {
        let mut probes = Vec::new();
        let positive: Vec<f64> = self.abs.iter().copied().filter(|&a| a > 0.0).collect();
        if positive.is_empty() {
            return vec![1.0];
        }
        let lo = positive[0];
        let hi = positive[positive.len() - 1];
        probes.push(lo * 0.5);
        if positive.len() <= max_count {
            probes.extend_from_slice(&positive);
        } else {
            for j in 0..max_count {
                let idx = j * (positive.len() - 1) / (max_count - 1);
                probes.push(positive[idx]);
            }
        }
        probes.push(hi * 2.0);
        if self.power.is_some() {
            // reach below the dense window for infinite fields
            let mut v = lo * 0.5;
            for _ in 0..24 {
                v *= 0.25;
                probes.push(v);
            }
        }
        probes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        probes.dedup();
        probes
    }
}

/// The literal split at threshold `lambda`: l1 mass of the small
/// coefficients and the root-l2 mass of the large ones.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SplitProfile {
    pub lambda: f64,
    /// `sum_{|b| <= lambda} |b|` (may be infinite for power-law fields)
    pub a1: Mass,
    /// `sqrt(sum_{|b| > lambda} b^2)`
    pub a2: f64,
}

pub fn split_profile(field: &CoefficientField, lambda: f64) -> Result<SplitProfile> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidInput("threshold must be positive".into()));
    }
    let table = MassTable::build(field);
    Ok(SplitProfile {
        lambda,
        a1: table.l1_small(lambda),
        a2: table.l2_large(lambda).sqrt(),
    })
}

fn envelope_assumptions(qv: &QVector, scales: &[f64], independent: bool) -> Result<FamilyAssumptions> {
    if scales.len() != qv.d() {
        return Err(Error::InvalidInput("need one scale per coordinate".into()));
    }
    let tails: Result<Vec<TailFunction>> = qv
        .0
        .iter()
        .zip(scales)
        .map(|(&q, &k)| match q {
            QExp::Finite(v) => TailFunction::parametric(1.0, k, v, 0.0),
            QExp::Inf => TailFunction::indicator(k),
        })
        .collect();
    let cramer: Vec<Option<CramerProfile>> = if independent {
        qv.0.iter()
            .zip(scales)
            .map(|(&q, &k)| match q {
                QExp::Finite(v) => CramerProfile::weibull_symmetric(v, k),
                QExp::Inf => Some(CramerProfile::bounded(k)),
            })
            .collect()
    } else {
        vec![None; qv.d()]
    };
    let moments: Vec<Option<MomentEnvelope>> = qv
        .0
        .iter()
        .zip(scales)
        .map(|(&q, &k)| {
            Some(match q {
                QExp::Finite(v) => MomentEnvelope::WeibullAbs { q: v, k },
                QExp::Inf => MomentEnvelope::Constant { value: k },
            })
        })
        .collect();
    FamilyAssumptions::new(
        tails?,
        cramer,
        if independent { Independence::TotallyIndependent } else { Independence::MartingaleOnly },
        moments,
    )
}

/// Threshold-optimised tail bound for a square-summable coefficient field:
/// the l1 route (Markov over the product-moment curve) handles the large
/// coefficients, the recursive pipeline handles the unit-normalised small
/// ones, and the split inequality at `x/2` glues them.
pub fn split_tail_bound(
    field: &CoefficientField,
    qv: &QVector,
    scales: &[f64],
    independent: bool,
) -> Result<BoundResult> {
    if field.d() != qv.d() {
        return Err(Error::DimensionMismatch { field_d: field.d(), batch_d: qv.d() });
    }
    let a = envelope_assumptions(qv, scales, independent)?;
    let pipeline = if independent {
        independent_tail_bound(&a)?
    } else {
        martingale_tail_bound(&a)?
    };
    let pipe_tail = pipeline.tail().unwrap().clone();
    // Markov route for the heavy part: |sum| <= l1 x product envelope
    let d = qv.d() as f64;
    let envs: Vec<MomentEnvelope> = a.moments.iter().map(|e| e.clone().unwrap()).collect();
    let base = move |p: f64| -> f64 { envs.iter().map(|e| e.eval(p * d)).product() };
    let markov = moments_to_tail(&base, 64.0);

    let table = MassTable::build(field);
    let probes = table.probes(96);
    let g = exponent_g(qv);
    let m = if independent { exponent_nd(qv) } else { exponent_m(qv) };

    let value_at = |x: f64, lambda: f64| -> f64 {
        let heavy = table.l1_large(lambda);
        let light = table.l2_small(lambda).sqrt();
        let y = x / 2.0;
        let t1 = if heavy > 0.0 { markov.eval(y / heavy) } else { 0.0 };
        let t2 = if light > 0.0 { pipe_tail.eval(y / light) } else { 0.0 };
        t1 + t2
    };
    let lam_lo = probes[0];
    let lam_hi = probes[probes.len() - 1];
    let f = |x: f64| -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        let mut best = f64::INFINITY;
        for &lam in &probes {
            best = best.min(value_at(x, lam));
        }
        let obj = |lam: f64| value_at(x, lam);
        let (_, refined) = min_on_log_axis(&obj, lam_lo, lam_hi, 64, 1e-6);
        best.min(refined).min(1.0)
    };
    let k_ref = field.l2_mass().sqrt().max(1e-9) * scales.iter().product::<f64>();
    let tail = TailFunction::from_fn(f, k_ref);
    Ok(BoundResult {
        curve: CurveData::Tail { tail },
        side: BoundSide::Upper,
        provenance: vec![
            format!(
                "l1 route over large coefficients: Markov of the product-moment curve (exponent G = {:.6})",
                g.value
            ),
            format!(
                "l2 route over small coefficients: {} pipeline (exponent {:.6})",
                if independent { "independent" } else { "martingale" },
                m.value
            ),
            "threshold optimised over coefficient magnitudes; constants tracked from the pipeline".into(),
        ],
        assumptions: a.describe(),
    })
}

/// Threshold-optimised moment bound under unit per-coordinate moment
/// envelopes: `inf_lambda [ l1_large + sqrt(l2_small) p^d / log p ]` in the
/// independent case, without the `log p` gain in the martingale case.
/// The overall constant is 1, tracked rather than asserted.
pub fn split_moment_bound(field: &CoefficientField, p: f64, independent: bool) -> Result<f64> {
    if !(p >= 2.0) {
        return Err(Error::InvalidInput("need p >= 2".into()));
    }
    let table = MassTable::build(field);
    let d = field.d() as f64;
    let gain = if independent { p.powf(d) / p.ln() } else { p.powf(d) };
    let value_at = |lambda: f64| table.l1_large(lambda) + table.l2_small(lambda).sqrt() * gain;
    let probes = table.probes(128);
    let mut best = f64::INFINITY;
    for &lam in &probes {
        best = best.min(value_at(lam));
    }
    let (_, refined) = min_on_log_axis(&value_at, probes[0], probes[probes.len() - 1], 96, 1e-8);
    Ok(best.min(refined))
}

/// Which bound a variance-normalised sum should delegate to.
#[derive(Clone, Debug)]
pub enum SumMode {
    MartingaleTail,
    IndependentTail,
    MartingaleMoment { ps: Vec<f64> },
    IndependentMoment { ps: Vec<f64> },
}

/// Build the induced unit-norm coefficient field
/// `b(I) = prod sigma(i_m, m) / sqrt(sum prod sigma^2)` from a table of
/// per-coordinate standard deviations (`sigma[m][i]`).  Returns the field
/// and the achieved `|sum b^2 - 1|`.
pub fn normalized_sum_field(sigma: &[Vec<f64>]) -> Result<(CoefficientField, f64)> {
    let d = sigma.len();
    if d == 0 || sigma[0].is_empty() {
        return Err(Error::InvalidInput("sigma table must be nonempty".into()));
    }
    let n = sigma[0].len();
    if sigma.iter().any(|s| s.len() != n) {
        return Err(Error::InvalidInput("sigma rows must share a length".into()));
    }
    if sigma.iter().flatten().any(|&s| !(s > 0.0)) {
        return Err(Error::InvalidInput("sigma values must be positive".into()));
    }
    if n < d {
        return Err(Error::InvalidInput("need n >= d".into()));
    }
    // norm^2 = sum over tuples of prod sigma^2, by prefix recursion
    let mut prev = vec![1.0f64; n + 1]; // depth 0
    for row in sigma.iter().take(d) {
        let mut cur = vec![0.0f64; n + 1];
        for j in 1..=n {
            cur[j] = cur[j - 1] + row[j - 1] * row[j - 1] * prev[j - 1];
        }
        prev = cur;
    }
    let norm2 = prev[n];
    if !(norm2 > 0.0) {
        return Err(Error::InvalidInput("normalisation vanished".into()));
    }
    let scale = norm2.sqrt().powf(1.0 / d as f64);
    let beta: Vec<Vec<f64>> = sigma
        .iter()
        .map(|row| row.iter().map(|s| s / scale).collect())
        .collect();
    let field = CoefficientField::separable(beta)?;
    let err = (field.l2_mass() - 1.0).abs();
    Ok((field, err))
}

/// Tail or moment bound for the variance-normalised multilinear sum, by the
/// unit-norm substitution plus the corresponding engine bound.
pub fn normalized_sum_bound(
    sigma: &[Vec<f64>],
    qv: &QVector,
    mode: &SumMode,
) -> Result<BoundResult> {
    let (field, err) = normalized_sum_field(sigma)?;
    if err > 1e-12 {
        return Err(Error::AssumptionViolated(format!(
            "normalised field misses unit norm by {err:.3e}"
        )));
    }
    if qv.d() != field.d() {
        return Err(Error::DimensionMismatch { field_d: field.d(), batch_d: qv.d() });
    }
    let ones = vec![1.0; qv.d()];
    let mut out = match mode {
        SumMode::MartingaleTail => crate::bounds::martingale_envelope(qv, &ones)?,
        SumMode::IndependentTail => crate::bounds::independent_envelope(qv, &ones)?,
        SumMode::MartingaleMoment { ps } | SumMode::IndependentMoment { ps } => {
            let independent = matches!(mode, SumMode::IndependentMoment { .. });
            let a = FamilyAssumptions::homogeneous(
                qv.d(),
                TailFunction::indicator(1.0)?,
                None,
                if independent {
                    Independence::TotallyIndependent
                } else {
                    Independence::MartingaleOnly
                },
                Some(MomentEnvelope::Constant { value: 1.0 }),
            )?;
            crate::bounds::moment_curve(&a, ps, independent)?
        }
    };
    out.provenance.insert(
        0,
        format!("normalised coefficient field verified in the unit sphere (|sum b^2 - 1| = {err:.2e})"),
    );
    Ok(out)
}

// --- JSON forms -------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct EntryJson {
    #[serde(rename = "I")]
    i: Vec<u32>,
    b: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum FieldJson {
    Power {
        rule: String,
        alpha: f64,
        #[serde(rename = "C")]
        coef: f64,
        #[serde(default)]
        cap: Option<u32>,
        #[serde(default)]
        d: Option<usize>,
    },
    Dense {
        d: usize,
        n: usize,
        entries: Vec<EntryJson>,
    },
}

impl Serialize for CoefficientField {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let json = match self {
            CoefficientField::PowerLaw { d, alpha, coef, cap } => FieldJson::Power {
                rule: "power".into(),
                alpha: *alpha,
                coef: *coef,
                cap: Some(*cap),
                d: Some(*d),
            },
            other => {
                let mut entries = Vec::new();
                other.for_each_entry(|idx, b| entries.push(EntryJson { i: idx.to_vec(), b }));
                FieldJson::Dense {
                    d: other.d(),
                    n: other.horizon().unwrap_or(0),
                    entries,
                }
            }
        };
        json.serialize(s)
    }
}

impl<'de> Deserialize<'de> for CoefficientField {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let json = FieldJson::deserialize(de)?;
        let out = match json {
            FieldJson::Power { rule, alpha, coef, cap, d } => {
                if rule != "power" {
                    return Err(serde::de::Error::custom(format!("unknown rule '{rule}'")));
                }
                CoefficientField::power_law(d.unwrap_or(2), alpha, coef, cap.unwrap_or(400))
            }
            FieldJson::Dense { d, n, entries } => CoefficientField::dense(
                d,
                n,
                entries.into_iter().map(|e| (e.i, e.b)).collect(),
            ),
        };
        out.map_err(serde::de::Error::custom)
    }
}
