//! The simulation lab: coordinate-family generators with reproducible
//! counter-based substreams, exact evaluators for the multilinear sums, and
//! the campaign machinery that certifies bounds against empirical tails,
//! moments and exact enumeration.

pub mod campaign;
pub mod oracle;
pub mod stats;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::bounds::{FamilyAssumptions, Independence, MomentEnvelope};
use crate::coeffs::CoefficientField;
use crate::cramer::CramerProfile;
use crate::error::{Error, Result};
use crate::tail::TailFunction;

/// Scale factor of the predictable multiplier in the dependent family,
/// chosen so that `sup |xi| = 1`.
const DEPENDENT_SCALE: f64 = 2.0 / 3.0;

/// Which coordinate family to generate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilyKind {
    /// Signs `+-1` with probability 1/2.
    Rademacher,
    /// Symmetric variable whose modulus tail is exactly `exp(-x^q)`.
    WeibullSymmetric { q: f64 },
    /// `xi(i, m) = tau_m nu(i, m)` with one shared stretched-exponential
    /// factor per coordinate: martingale differences that are not
    /// independent across `i`.
    ScaledProduct { q: f64 },
    /// `xi(i) = nu(i) (1 + sign(nu(i-1))/2) (2/3)`: bounded, predictable
    /// multiplier, martingale but visibly non-independent.
    DependentMartingale,
}

/// A coordinate-family specification: the distribution kind plus the
/// dimensions of the array `xi(i, m)`, `i = 1..=n`, `m = 1..=d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    #[serde(rename = "distribution")]
    pub kind: FamilyKind,
    pub d: usize,
    pub n: usize,
}

impl FamilySpec {
    pub fn new(kind: FamilyKind, d: usize, n: usize) -> Result<Self> {
        if d == 0 || n == 0 {
            return Err(Error::InvalidInput("need d >= 1 and n >= 1".into()));
        }
        if let FamilyKind::WeibullSymmetric { q } | FamilyKind::ScaledProduct { q } = &kind {
            if !(*q > 0.0) || !q.is_finite() {
                return Err(Error::InvalidInput("family order q must be positive and finite".into()));
            }
        }
        Ok(FamilySpec { kind, d, n })
    }

    /// Whether the coordinates are totally independent across `i` and `m`.
    pub fn is_independent(&self) -> bool {
        matches!(self.kind, FamilyKind::Rademacher | FamilyKind::WeibullSymmetric { .. })
    }

    /// Per-coordinate tail envelope `T_m(x) >= sup_i T(xi(i,m), x)`.
    pub fn tail_envelope(&self) -> TailFunction {
        match &self.kind {
            FamilyKind::Rademacher | FamilyKind::DependentMartingale => {
                TailFunction::indicator(1.0).expect("unit indicator")
            }
            FamilyKind::WeibullSymmetric { q } | FamilyKind::ScaledProduct { q } => {
                TailFunction::parametric(1.0, 1.0, *q, 0.0).expect("weibull envelope")
            }
        }
    }

    /// Log-MGF envelope where one exists (used only when the family is
    /// independent).
    pub fn cramer_profile(&self) -> Option<CramerProfile> {
        match &self.kind {
            FamilyKind::Rademacher | FamilyKind::DependentMartingale => {
                Some(CramerProfile::bounded(1.0))
            }
            FamilyKind::WeibullSymmetric { q } | FamilyKind::ScaledProduct { q } => {
                CramerProfile::weibull_symmetric(*q, 1.0)
            }
        }
    }

    pub fn moment_envelope(&self) -> MomentEnvelope {
        match &self.kind {
            FamilyKind::Rademacher | FamilyKind::DependentMartingale => {
                MomentEnvelope::Constant { value: 1.0 }
            }
            FamilyKind::WeibullSymmetric { q } | FamilyKind::ScaledProduct { q } => {
                MomentEnvelope::WeibullAbs { q: *q, k: 1.0 }
            }
        }
    }

    /// `E xi(i, m)^2` (exact; position-dependent only for the dependent
    /// family).
    pub fn second_moment_at(&self, i: usize) -> f64 {
        match &self.kind {
            FamilyKind::Rademacher => 1.0,
            FamilyKind::WeibullSymmetric { q } | FamilyKind::ScaledProduct { q } => {
                gamma(2.0 / q + 1.0)
            }
            FamilyKind::DependentMartingale => {
                let c2 = DEPENDENT_SCALE * DEPENDENT_SCALE;
                if i <= 1 {
                    c2
                } else {
                    c2 * 1.25
                }
            }
        }
    }

    /// The assumptions a bound construction may rely on for this family.
    pub fn assumptions(&self) -> FamilyAssumptions {
        let independence = if self.is_independent() {
            Independence::TotallyIndependent
        } else {
            Independence::MartingaleOnly
        };
        let cramer = if self.is_independent() { self.cramer_profile() } else { None };
        FamilyAssumptions::homogeneous(
            self.d,
            self.tail_envelope(),
            cramer,
            independence,
            Some(self.moment_envelope()),
        )
        .expect("homogeneous assumptions")
    }
}

/// Counter-based substream: one independent generator per replication,
/// identical regardless of how replications are distributed over workers.
pub fn substream(seed: u64, replication: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication);
    rng
}

fn rademacher(rng: &mut ChaCha8Rng) -> f64 {
    if rng.gen::<bool>() {
        1.0
    } else {
        -1.0
    }
}

fn weibull_modulus(rng: &mut ChaCha8Rng, q: f64) -> f64 {
    // inverse CDF: |xi| = (-log U)^(1/q) has P(|xi| > x) = exp(-x^q) exactly
    let u: f64 = rng.gen::<f64>().max(1e-300);
    (-u.ln()).powf(1.0 / q)
}

/// Fill `out` (layout `out[i * d + m]`) with one replication of the family.
fn draw_replication(spec: &FamilySpec, rng: &mut ChaCha8Rng, out: &mut [f64]) {
    let (n, d) = (spec.n, spec.d);
    debug_assert_eq!(out.len(), n * d);
    match &spec.kind {
        FamilyKind::Rademacher => {
            for slot in out.iter_mut() {
                *slot = rademacher(rng);
            }
        }
        FamilyKind::WeibullSymmetric { q } => {
            for slot in out.iter_mut() {
                let v = weibull_modulus(rng, *q);
                *slot = v * rademacher(rng);
            }
        }
        FamilyKind::ScaledProduct { q } => {
            let taus: Vec<f64> = (0..d).map(|_| weibull_modulus(rng, *q)).collect();
            for i in 0..n {
                for (m, tau) in taus.iter().enumerate() {
                    out[i * d + m] = tau * rademacher(rng);
                }
            }
        }
        FamilyKind::DependentMartingale => {
            for m in 0..d {
                let mut prev = 0.0f64;
                for i in 0..n {
                    let nu = rademacher(rng);
                    let h = (1.0 + 0.5 * prev) * DEPENDENT_SCALE;
                    out[i * d + m] = nu * h;
                    prev = nu;
                }
            }
        }
    }
}

/// A generated batch: `replications x n x d` values.
#[derive(Clone, Debug)]
pub struct SampleBatch {
    pub spec: FamilySpec,
    pub replications: usize,
    values: Vec<f64>,
}

impl SampleBatch {
    pub fn xi(&self, rep: usize, i: usize, m: usize) -> f64 {
        self.values[(rep * self.spec.n + i) * self.spec.d + m]
    }

    pub fn replication(&self, rep: usize) -> &[f64] {
        let stride = self.spec.n * self.spec.d;
        &self.values[rep * stride..(rep + 1) * stride]
    }
}

/// Generate a batch; deterministic given `(spec, seed)` for any worker
/// count because every replication draws from its own substream.
pub fn generate_batch(spec: &FamilySpec, replications: usize, seed: u64) -> SampleBatch {
    let stride = spec.n * spec.d;
    let mut values = vec![0.0f64; replications * stride];
    values
        .par_chunks_mut(stride)
        .enumerate()
        .for_each(|(rep, chunk)| {
            let mut rng = substream(seed, rep as u64);
            draw_replication(spec, &mut rng, chunk);
        });
    SampleBatch { spec: spec.clone(), replications, values }
}

/// Evaluate the multilinear sum for one replication laid out as
/// `xi[i * d + m]`, by dynamic programming over prefixes when the field is
/// separable (`O(n d)`).
fn qd_separable(beta: &[Vec<f64>], xi: &[f64], n: usize, d: usize) -> f64 {
    // p[m] = sum over increasing m-tuples from the prefix of prod beta xi
    let mut p = vec![0.0f64; d + 1];
    p[0] = 1.0;
    for j in 0..n {
        for m in (1..=d).rev() {
            p[m] += beta[m - 1][j] * xi[j * d + (m - 1)] * p[m - 1];
        }
    }
    p[d]
}

/// Evaluate by explicit tuple enumeration (`O(C(n, d) d)`); the independent
/// cross-check for the separable path.
fn qd_enumeration(field: &CoefficientField, xi: &[f64], d: usize) -> f64 {
    let mut total = 0.0;
    field.for_each_entry(|idx, b| {
        let mut prod = b;
        for (m, &i) in idx.iter().enumerate() {
            prod *= xi[(i as usize - 1) * d + m];
        }
        total += prod;
    });
    total
}

/// Exact values of the multilinear sum `sum_I b(I) prod_m xi(i_m, m)` for
/// every replication in the batch.
pub fn evaluate_qd(field: &CoefficientField, batch: &SampleBatch) -> Result<Vec<f64>> {
    let d = batch.spec.d;
    if field.d() != d {
        return Err(Error::DimensionMismatch { field_d: field.d(), batch_d: d });
    }
    match field.horizon() {
        Some(n) if n <= batch.spec.n => {}
        _ => {
            return Err(Error::InvalidInput(
                "field horizon must be finite and within the generated n".into(),
            ))
        }
    }
    let n = field.horizon().unwrap();
    let out: Vec<f64> = (0..batch.replications)
        .into_par_iter()
        .map(|rep| {
            let xi = batch.replication(rep);
            match field {
                CoefficientField::Separable { beta, .. } => qd_separable(beta, xi, n, d),
                _ => qd_enumeration(field, xi, d),
            }
        })
        .collect();
    Ok(out)
}

/// Streamed variant: generate and evaluate per replication without holding
/// the whole batch (used for large campaigns).
pub fn sample_qd_values(
    field: &CoefficientField,
    spec: &FamilySpec,
    replications: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let d = spec.d;
    if field.d() != d {
        return Err(Error::DimensionMismatch { field_d: field.d(), batch_d: d });
    }
    let n = match field.horizon() {
        Some(n) if n <= spec.n => n,
        _ => {
            return Err(Error::InvalidInput(
                "field horizon must be finite and within the generated n".into(),
            ))
        }
    };
    let out: Vec<f64> = (0..replications)
        .into_par_iter()
        .map(|rep| {
            let mut rng = substream(seed, rep as u64);
            let mut xi = vec![0.0f64; spec.n * d];
            draw_replication(spec, &mut rng, &mut xi);
            match field {
                CoefficientField::Separable { beta, .. } => qd_separable(beta, &xi, n, d),
                _ => qd_enumeration(field, &xi, d),
            }
        })
        .collect();
    Ok(out)
}

/// Degree-2 sum with diagonal terms: `sum_{i<j} b(i,j) xi_i xi_j +
/// sum_i diag_i (xi_i^2 - E xi_i^2)`, over coordinate 1 of the batch.
/// The diagonal centering uses the family's analytic second moment, which
/// is only meaningful for independent families.
pub fn evaluate_r2(
    off_diagonal: &CoefficientField,
    diagonal: &[f64],
    batch: &SampleBatch,
) -> Result<Vec<f64>> {
    if !batch.spec.is_independent() {
        return Err(Error::InvalidInput(
            "diagonal terms are defined for independent families only".into(),
        ));
    }
    if off_diagonal.d() != 2 {
        return Err(Error::DimensionMismatch { field_d: off_diagonal.d(), batch_d: 2 });
    }
    let n = batch.spec.n;
    if diagonal.len() != n || off_diagonal.horizon() != Some(n) {
        return Err(Error::InvalidInput("coefficient horizons must match the batch".into()));
    }
    let d = batch.spec.d;
    let out: Vec<f64> = (0..batch.replications)
        .into_par_iter()
        .map(|rep| {
            let xi = |i: usize| batch.xi(rep, i, 0);
            let mut total = 0.0;
            off_diagonal.for_each_entry(|idx, b| {
                total += b * xi(idx[0] as usize - 1) * xi(idx[1] as usize - 1);
            });
            for (i, &c) in diagonal.iter().enumerate() {
                let v = xi(i);
                total += c * (v * v - batch.spec.second_moment_at(i + 1));
            }
            let _ = d;
            total
        })
        .collect();
    Ok(out)
}
