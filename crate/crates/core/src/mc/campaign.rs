//! Verification campaigns: generate a family, evaluate the multilinear sum,
//! and certify a bound against empirical tails (with exact binomial upper
//! bands), empirical moments (with bootstrap bands) and, where feasible,
//! exact enumeration.  Reports are deterministic given the master seed; the
//! only nondeterministic fields (timestamp, runtime) live in the header.

use serde::{Deserialize, Serialize};

use crate::bounds::{
    independent_moment_bound, independent_tail_bound, martingale_moment_bound,
    martingale_tail_bound,
};
use crate::coeffs::{split_tail_bound, CoefficientField};
use crate::error::{Error, Result};
use crate::exponents::{QExp, QVector};
use crate::mc::oracle::{distribution_tail, exact_distribution, exact_tail, ORACLE_BIT_CAP};
use crate::mc::stats::{
    auto_x_grid, empirical_moments, empirical_tail, fit_tail_slope_window, MomentPoint, TailPoint,
};
use crate::mc::{generate_batch, sample_qd_values, FamilyKind, FamilySpec};
use crate::tail::TailFunction;

/// Which coefficient field a campaign runs on.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    /// Unit-norm uniform coefficients over all tuples.
    Uniform,
    /// Explicit per-coordinate factors, `b(I) = prod beta[m][i_m - 1]`.
    Separable { beta: Vec<Vec<f64>> },
    /// An explicit field in its JSON form.
    Explicit { field: CoefficientField },
}

impl FieldSpec {
    pub fn build(&self, d: usize, n: usize) -> Result<CoefficientField> {
        match self {
            FieldSpec::Uniform => CoefficientField::uniform(d, n),
            FieldSpec::Separable { beta } => {
                let f = CoefficientField::separable(beta.clone())?;
                if f.d() != d || f.horizon() != Some(n) {
                    return Err(Error::InvalidInput("separable field shape must match the family".into()));
                }
                Ok(f)
            }
            FieldSpec::Explicit { field } => {
                if field.d() != d {
                    return Err(Error::DimensionMismatch { field_d: field.d(), batch_d: d });
                }
                Ok(field.clone())
            }
        }
    }
}

/// Which bound the campaign certifies.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundSpec {
    /// Recursive martingale pipeline from the family's envelopes.
    RecursionMartingale,
    /// Recursive independent pipeline (Cramer-refined seed).
    RecursionIndependent,
    /// Threshold-split bound, martingale flavour.
    SplitMartingale,
    /// Threshold-split bound, independent flavour.
    SplitIndependent,
    /// An explicit parametric curve.
    Parametric { y: f64, k: f64, q: f64, rho: f64 },
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum MomentMode {
    Martingale,
    Independent,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentCheckSpec {
    pub mode: MomentMode,
    pub p_list: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum XGridSpec {
    Auto { points: usize },
    Explicit { values: Vec<f64> },
}

fn default_grid() -> XGridSpec {
    XGridSpec::Auto { points: 32 }
}

fn default_scale() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

/// A full campaign description.  Unknown keys are rejected so that typos in
/// config files fail loudly.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub name: String,
    pub seed: u64,
    pub family: FamilySpec,
    pub field: FieldSpec,
    pub replications: usize,
    #[serde(default = "default_grid")]
    pub x_grid: XGridSpec,
    #[serde(default)]
    pub bound: Option<BoundSpec>,
    /// Multiplies the bound curve before comparison (falsifiability knob).
    #[serde(default = "default_scale")]
    pub scale_bound: f64,
    #[serde(default)]
    pub moment_check: Option<MomentCheckSpec>,
    /// Also compare against exact enumeration when the instance is small
    /// enough.
    #[serde(default)]
    pub oracle: bool,
    #[serde(default = "default_true")]
    pub check_assumptions: bool,
    /// Diagnostic detail level for front ends (0 = verdicts only).
    #[serde(default)]
    pub verbosity: u8,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TailRow {
    pub x: f64,
    pub empirical: f64,
    pub cp_upper: f64,
    pub bound: f64,
    /// Whether any exceedance was observed at this level.  With zero
    /// successes the exact binomial band is floored at the Monte Carlo
    /// resolution (about `4.6/replications` at 99%), and a bound tighter
    /// than that floor is not evidence of a violation.
    pub informative: bool,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MomentRow {
    pub p: f64,
    pub estimate: f64,
    pub boot_lower: f64,
    pub boot_upper: f64,
    pub reliable: bool,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OracleRow {
    pub x: f64,
    pub exact: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AssumptionChecks {
    /// Worst empirical excess over a declared tail envelope, in standard
    /// errors (negative when comfortably inside).
    pub envelope_excess_se: f64,
    /// Lagged sign-product drift statistic and its standard error: a
    /// direct martingale check.
    pub drift_stat: f64,
    pub drift_se: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReportHeader {
    pub timestamp_ms: u64,
    pub runtime_ms: u64,
    pub version: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReportBody {
    pub config: CampaignConfig,
    pub assumption: Option<AssumptionChecks>,
    pub tail: Vec<TailRow>,
    pub moments: Vec<MomentRow>,
    pub oracle: Vec<OracleRow>,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerificationReport {
    pub header: ReportHeader,
    pub body: ReportBody,
}

impl VerificationReport {
    /// Deterministic part of the report as canonical JSON.
    pub fn body_json(&self) -> String {
        serde_json::to_string_pretty(&self.body).expect("report body serialises")
    }
}

fn family_qvector(spec: &FamilySpec) -> QVector {
    let q = match &spec.kind {
        FamilyKind::Rademacher | FamilyKind::DependentMartingale => QExp::Inf,
        FamilyKind::WeibullSymmetric { q } | FamilyKind::ScaledProduct { q } => QExp::Finite(*q),
    };
    QVector::homogeneous(spec.d, q).expect("valid family dimensions")
}

fn build_bound_tail(
    cfg: &CampaignConfig,
    field: &CoefficientField,
) -> Result<Option<TailFunction>> {
    let spec = &cfg.family;
    let Some(bound) = &cfg.bound else { return Ok(None) };
    let needs_unit_norm = matches!(
        bound,
        BoundSpec::RecursionMartingale | BoundSpec::RecursionIndependent
    );
    if needs_unit_norm {
        let l2 = field.l2_mass();
        if (l2 - 1.0).abs() > 1e-9 {
            return Err(Error::AssumptionViolated(format!(
                "recursion bounds assume unit-norm coefficients; got sum b^2 = {l2}"
            )));
        }
    }
    let needs_independence = matches!(
        bound,
        BoundSpec::RecursionIndependent | BoundSpec::SplitIndependent
    );
    if needs_independence && !spec.is_independent() {
        return Err(Error::AssumptionViolated(
            "independent-flavour bound requested for a non-independent family".into(),
        ));
    }
    let tail = match bound {
        BoundSpec::RecursionMartingale => {
            martingale_tail_bound(&spec.assumptions())?.tail().unwrap().clone()
        }
        BoundSpec::RecursionIndependent => {
            independent_tail_bound(&spec.assumptions())?.tail().unwrap().clone()
        }
        BoundSpec::SplitMartingale | BoundSpec::SplitIndependent => {
            let independent = matches!(bound, BoundSpec::SplitIndependent);
            let qv = family_qvector(spec);
            let ones = vec![1.0; spec.d];
            split_tail_bound(field, &qv, &ones, independent)?.tail().unwrap().clone()
        }
        BoundSpec::Parametric { y, k, q, rho } => TailFunction::parametric(*y, *k, *q, *rho)?,
    };
    Ok(Some(tail))
}

/// Empirical check that a generated family obeys the declared envelopes and
/// the martingale property.  Exposed so that deliberately wrong envelopes
/// can be exercised directly.
pub fn check_family_assumptions(
    spec: &FamilySpec,
    envelope: &TailFunction,
    replications: usize,
    seed: u64,
) -> Result<AssumptionChecks> {
    let reps = replications.clamp(200, 4000);
    let batch = generate_batch(spec, reps, seed);
    let total = reps * spec.n * spec.d;
    // envelope: compare one-sided frequencies against the envelope at the
    // pooled quantiles
    let mut pooled: Vec<f64> = Vec::with_capacity(total);
    for rep in 0..reps {
        pooled.extend_from_slice(batch.replication(rep));
    }
    let mut mods: Vec<f64> = pooled.iter().map(|v| v.abs()).collect();
    mods.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut worst_excess = f64::NEG_INFINITY;
    for q in [0.5, 0.9, 0.99, 0.999] {
        let x = mods[((mods.len() - 1) as f64 * q) as usize] * 0.999;
        if x <= 0.0 {
            continue;
        }
        let above = pooled.iter().filter(|&&v| v > x).count() as f64 / total as f64;
        let below = pooled.iter().filter(|&&v| v < -x).count() as f64 / total as f64;
        let freq = above.max(below);
        let envv = envelope.eval(x);
        let se = (freq.max(1e-12) * (1.0 - freq) / total as f64).sqrt().max(1e-12);
        let excess = (freq - envv) / se;
        worst_excess = worst_excess.max(excess);
        if freq > envv + 4.0 * se + 5.0 / total as f64 {
            return Err(Error::AssumptionViolated(format!(
                "empirical tail {freq:.4e} exceeds envelope {envv:.4e} at x = {x:.4}"
            )));
        }
    }
    // martingale drift: lagged sign products average to zero
    let mut drift_sum = 0.0;
    let mut drift_sq = 0.0;
    let mut count = 0.0;
    for rep in 0..reps {
        for m in 0..spec.d {
            for i in 1..spec.n {
                let t = batch.xi(rep, i, m) * batch.xi(rep, i - 1, m).signum();
                drift_sum += t;
                drift_sq += t * t;
                count += 1.0;
            }
        }
    }
    let (drift_stat, drift_se) = if count > 1.0 {
        let mean = drift_sum / count;
        let var = (drift_sq / count - mean * mean).max(0.0);
        (mean, (var / count).sqrt().max(1e-12))
    } else {
        (0.0, 1.0)
    };
    if drift_stat.abs() > 4.0 * drift_se {
        return Err(Error::AssumptionViolated(format!(
            "conditional drift {drift_stat:.3e} exceeds 4 standard errors ({drift_se:.3e})"
        )));
    }
    Ok(AssumptionChecks { envelope_excess_se: worst_excess, drift_stat, drift_se })
}

/// Run a campaign end to end.
pub fn run_campaign(cfg: &CampaignConfig) -> Result<VerificationReport> {
    let started = std::time::Instant::now();
    if cfg.replications == 0 {
        return Err(Error::InvalidInput("need at least one replication".into()));
    }
    if !(cfg.scale_bound > 0.0) {
        return Err(Error::InvalidInput("scale_bound must be positive".into()));
    }
    let field = cfg.field.build(cfg.family.d, cfg.family.n)?;
    let bound_tail = build_bound_tail(cfg, &field)?;

    let assumption = if cfg.check_assumptions {
        Some(check_family_assumptions(
            &cfg.family,
            &cfg.family.tail_envelope(),
            cfg.replications,
            cfg.seed,
        )?)
    } else {
        None
    };

    let values = sample_qd_values(&field, &cfg.family, cfg.replications, cfg.seed)?;
    let xs: Vec<f64> = match &cfg.x_grid {
        XGridSpec::Auto { points } => auto_x_grid(&values, (*points).max(4)),
        XGridSpec::Explicit { values: v } => v.clone(),
    };

    let tail_points: Vec<TailPoint> = empirical_tail(&values, &xs, 0.99);
    let tail: Vec<TailRow> = tail_points
        .iter()
        .map(|p| {
            let bound = match &bound_tail {
                Some(t) => (cfg.scale_bound * t.eval(p.x)).min(1.0),
                None => 1.0,
            };
            let informative = p.empirical > 0.0;
            TailRow {
                x: p.x,
                empirical: p.empirical,
                cp_upper: p.cp_upper,
                bound,
                informative,
                pass: bound_tail.is_none() || bound >= p.cp_upper || !informative,
            }
        })
        .collect();

    let moments: Vec<MomentRow> = match &cfg.moment_check {
        None => Vec::new(),
        Some(mc) => {
            if mc.mode == MomentMode::Independent && !cfg.family.is_independent() {
                return Err(Error::AssumptionViolated(
                    "independent moment bound requested for a non-independent family".into(),
                ));
            }
            let a = cfg.family.assumptions();
            let points: Vec<MomentPoint> =
                empirical_moments(&values, &mc.p_list, 1000, 0.99, cfg.seed);
            points
                .iter()
                .map(|pt| {
                    let raw = match mc.mode {
                        MomentMode::Martingale => martingale_moment_bound(&a, pt.p),
                        MomentMode::Independent => independent_moment_bound(&a, pt.p),
                    }?;
                    let bound = cfg.scale_bound * raw;
                    Ok(MomentRow {
                        p: pt.p,
                        estimate: pt.estimate,
                        boot_lower: pt.boot_lower,
                        boot_upper: pt.boot_upper,
                        reliable: pt.reliable,
                        bound,
                        pass: pt.estimate <= bound && pt.boot_upper <= bound,
                    })
                })
                .collect::<Result<Vec<_>>>()?
        }
    };

    let oracle: Vec<OracleRow> = if cfg.oracle {
        if cfg.family.kind != FamilyKind::Rademacher {
            return Err(Error::AssumptionViolated(
                "exact enumeration needs Rademacher coordinates".into(),
            ));
        }
        let bits = (cfg.family.n * cfg.family.d) as u32;
        if bits > ORACLE_BIT_CAP {
            return Err(Error::TooLarge { bits, cap: ORACLE_BIT_CAP });
        }
        let atoms = if bits <= 20 { Some(exact_distribution(&field)?) } else { None };
        xs.iter()
            .map(|&x| {
                let exact = match &atoms {
                    Some(a) => distribution_tail(a, x),
                    None => exact_tail(&field, x)?,
                };
                let bound = match &bound_tail {
                    Some(t) => (cfg.scale_bound * t.eval(x)).min(1.0),
                    None => 1.0,
                };
                Ok(OracleRow { x, exact, bound, pass: bound >= exact - 1e-12 })
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };

    let all_pass = tail.iter().all(|r| r.pass)
        && moments.iter().all(|r| r.pass)
        && oracle.iter().all(|r| r.pass);
    let report = VerificationReport {
        header: ReportHeader {
            timestamp_ms: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_millis() as u64)
                .unwrap_or(0),
            runtime_ms: started.elapsed().as_millis() as u64,
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
        body: ReportBody {
            config: cfg.clone(),
            assumption,
            tail,
            moments,
            oracle,
            verdict: if all_pass { Verdict::Pass } else { Verdict::Fail },
        },
    };
    Ok(report)
}

/// Fixed-schema CSV of the tail comparison: one row per grid point.
pub fn tail_csv(report: &VerificationReport) -> String {
    let mut out = String::from("x,empirical,cp_upper,bound,verdict\n");
    for r in &report.body.tail {
        out.push_str(&format!(
            "{:.12e},{:.12e},{:.12e},{:.12e},{}\n",
            r.x,
            r.empirical,
            r.cp_upper,
            r.bound,
            if r.pass { "PASS" } else { "FAIL" }
        ));
    }
    out
}

/// Fixed-schema CSV of the moment comparison.
pub fn moment_csv(report: &VerificationReport) -> String {
    let mut out = String::from("p,estimate,boot_lower,boot_upper,bound,reliable,verdict\n");
    for r in &report.body.moments {
        out.push_str(&format!(
            "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{},{}\n",
            r.p,
            r.estimate,
            r.boot_lower,
            r.boot_upper,
            r.bound,
            r.reliable,
            if r.pass { "PASS" } else { "FAIL" }
        ));
    }
    out
}

/// Fixed-schema CSV of the oracle comparison.
pub fn oracle_csv(report: &VerificationReport) -> String {
    let mut out = String::from("x,exact,bound,verdict\n");
    for r in &report.body.oracle {
        out.push_str(&format!(
            "{:.12e},{:.12e},{:.12e},{}\n",
            r.x,
            r.exact,
            r.bound,
            if r.pass { "PASS" } else { "FAIL" }
        ));
    }
    out
}

/// Result of the lower-envelope probe: fitted log-log slopes of
/// `-log(empirical tail)` for the normalised-sum and product constructions,
/// against the predicted exponent `min(q, 2) / d`.
#[derive(Clone, Debug, Serialize)]
pub struct ProbeResult {
    /// The lower-envelope exponent `min(q, 2) / d`: the better (smaller) of
    /// the two construction exponents.
    pub predicted_exponent: f64,
    /// What the normalised-sum construction itself realises (`2 / d`).
    pub predicted_sum_exponent: f64,
    /// What the plain product construction realises (`q / d`, finite `q`).
    pub predicted_product_exponent: Option<f64>,
    /// `(n, fitted slope)` for the uniform-coefficient sum construction.
    pub sum_slopes: Vec<(usize, f64)>,
    /// Fitted slope of the plain product of `d` coordinates (degenerate for
    /// bounded coordinates, hence optional).
    pub product_slope: Option<f64>,
}

/// Empirical lower-envelope study for homogeneous order `q`.
pub fn lower_envelope_probe(
    d: usize,
    q: QExp,
    n_list: &[usize],
    replications: usize,
    seed: u64,
) -> Result<ProbeResult> {
    if d == 0 || n_list.is_empty() {
        return Err(Error::InvalidInput("need d >= 1 and at least one n".into()));
    }
    let predicted = q.min2() / d as f64;
    let kind = match q {
        QExp::Inf => FamilyKind::Rademacher,
        QExp::Finite(v) => FamilyKind::WeibullSymmetric { q: v },
    };
    // fit in the tail proper: below the 2% shoulder, above the
    // replication resolution floor, where the exponent is legible
    let floor = (20.0 / replications as f64).max(1e-7);
    let ceiling = 0.02;
    let mut sum_slopes = Vec::new();
    for &n in n_list {
        let spec = FamilySpec::new(kind.clone(), d, n)?;
        let field = CoefficientField::uniform(d, n)?;
        let values = sample_qd_values(&field, &spec, replications, seed)?;
        let xs = auto_x_grid(&values, 48);
        let points = empirical_tail(&values, &xs, 0.99);
        sum_slopes.push((n, fit_tail_slope_window(&points, floor, ceiling)?));
    }
    let product_slope = match q {
        QExp::Inf => None,
        QExp::Finite(_) => {
            // plain product of d independent symmetric coordinates
            let spec = FamilySpec::new(kind, d, 1)?;
            let batch = generate_batch(&spec, replications, seed ^ 0x9e3779b97f4a7c15);
            let values: Vec<f64> = (0..batch.replications)
                .map(|rep| (0..d).map(|m| batch.xi(rep, 0, m)).product())
                .collect();
            let xs = auto_x_grid(&values, 48);
            let points = empirical_tail(&values, &xs, 0.99);
            Some(fit_tail_slope_window(&points, floor, ceiling)?)
        }
    };
    Ok(ProbeResult {
        predicted_exponent: predicted,
        predicted_sum_exponent: 2.0 / d as f64,
        predicted_product_exponent: match q {
            QExp::Finite(v) => Some(v / d as f64),
            QExp::Inf => None,
        },
        sum_slopes,
        product_slope,
    })
}
