//! Command-line front door: exponent queries, bound construction,
//! simulation campaigns, exact-enumeration oracles, and report emission.
//!
//! Results go to stdout as JSON; diagnostics go to stderr.  Exit codes:
//! 0 success / all checks passed, 1 a verification verdict failed,
//! 2 invalid parameters or schema, 3 assumption-level errors,
//! 4 an enumeration request over the size cap.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chaos_tails::bounds::{
    independent_tail_bound, martingale_envelope, martingale_tail_bound, moment_curve, BoundResult,
    BoundSide, CurveData, FamilyAssumptions, Independence, MomentEnvelope,
};
use chaos_tails::coeffs::{split_moment_bound, split_tail_bound, CoefficientField};
use chaos_tails::cramer::CramerProfile;
use chaos_tails::error::Error as CoreError;
use chaos_tails::exponents::{
    exponent_g, exponent_m, exponent_nd, exponent_nd_uncorrected, gamma_dq, log_refined_recursion,
    moment_gamma, ustat_scale_t, vector_l, vector_n_qr, ExponentResult, QExp, QVector,
};
use chaos_tails::mc::campaign::{
    moment_csv, oracle_csv, run_campaign, tail_csv, CampaignConfig, VerificationReport, Verdict,
};
use chaos_tails::mc::oracle::exact_tail;
use chaos_tails::tail::TailFunction;
use chaos_tails::ustat::{ustat_moment_bound, ustat_recursive_tail, ustat_tail_from_envelope, FiniteKernel};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(
    name = "chaos-tails",
    version,
    about = "Tail and moment bounds for multilinear martingale sums, with Monte Carlo verification"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Closed-form exponents and constants from the catalog.
    Exponent(ExponentArgs),
    /// Construct a tail or moment bound from an assumptions file.
    Bound(BoundArgs),
    /// Run a simulation campaign and emit its report without gating on the
    /// verdict.
    Simulate(CampaignArgs),
    /// Exact enumeration of a small sign-pattern instance.
    Oracle(OracleArgs),
    /// Run a verification campaign; the exit code encodes the verdict.
    Verify(CampaignArgs),
    /// Re-emit CSV curves and a summary from a stored report.
    Report(ReportArgs),
}

#[derive(Args)]
struct ExponentArgs {
    /// One of M, Nd, gamma_dq, L, N_qr, rV, gamma_moment, G, t.
    #[arg(long)]
    name: String,
    /// Comma-separated order vector (entries positive or "inf").
    #[arg(long)]
    q: Option<String>,
    #[arg(long)]
    d: Option<usize>,
    /// Log-refinement power.
    #[arg(long)]
    r: Option<f64>,
    /// Projection order (for the rescaling weight `t`).
    #[arg(long)]
    k: Option<usize>,
    /// Kernel rank (for the rescaling weight `t`).
    #[arg(long)]
    rank: Option<usize>,
    /// Use the off-by-one recursion variant kept for comparison.
    #[arg(long, default_value_t = false)]
    uncorrected: bool,
}

#[derive(Args)]
struct BoundArgs {
    /// "tail" or "moment".
    #[arg(long)]
    mode: String,
    /// Bound construction id: 1, 2, 4, 5, 6, 7, 8, 9, 10, 13, 14, 15, 16.
    #[arg(long)]
    theorem: u8,
    /// Path to the assumptions JSON file.
    #[arg(long)]
    assumptions: PathBuf,
    /// Moment order (moment mode).
    #[arg(long)]
    p: Option<f64>,
    /// Comma-separated moment orders (moment mode).
    #[arg(long)]
    p_list: Option<String>,
    /// Write the result JSON here as well as to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Export the tail curve as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct CampaignArgs {
    /// Campaign configuration JSON.
    #[arg(long)]
    config: PathBuf,
    /// Directory for the report and CSV exports.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Override the config's bound scale (falsifiability knob).
    #[arg(long)]
    scale_bound: Option<f64>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    d: usize,
    #[arg(long)]
    n: usize,
    /// Threshold to evaluate the exact tail at.
    #[arg(long)]
    x: f64,
    /// Optional coefficient-field JSON (uniform unit-norm by default).
    #[arg(long)]
    field: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// A stored verification report (JSON).
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Serialize)]
struct ErrorJson<'a> {
    error: ErrorBody<'a>,
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    kind: &'a str,
    message: String,
}

enum CliError {
    Core(CoreError),
    Usage(String),
    Io(String),
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 2,
            CliError::Core(e) => match e {
                CoreError::TooLarge { .. } => 4,
                CoreError::AssumptionViolated(_)
                | CoreError::MissingMoments { .. }
                | CoreError::Divergent { .. }
                | CoreError::UnboundedChi
                | CoreError::AllProjectionsZero
                | CoreError::NonSummable => 3,
                _ => 2,
            },
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Io(_) => "io",
            CliError::Core(e) => match e {
                CoreError::TooLarge { .. } => "too_large",
                CoreError::AssumptionViolated(_) => "assumption_violated",
                CoreError::MissingMoments { .. } => "missing_moments",
                CoreError::Divergent { .. } => "divergent",
                CoreError::UnboundedChi => "unbounded_chi",
                CoreError::AllProjectionsZero => "all_projections_zero",
                CoreError::NonSummable => "non_summable",
                CoreError::DimensionMismatch { .. } => "dimension_mismatch",
                CoreError::NonMonotoneMoments { .. } => "non_monotone_moments",
                CoreError::InvalidInput(_) => "invalid_input",
            },
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Usage(m) | CliError::Io(m) => m.clone(),
            CliError::Core(e) => e.to_string(),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)
                .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
        }
    }
    std::fs::write(path, text)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn main() -> ExitCode {
    if let Ok(workers) = std::env::var("CHAOS_TAILS_WORKERS") {
        if let Ok(n) = workers.trim().parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
        } else {
            eprintln!("ignoring unparsable CHAOS_TAILS_WORKERS = {workers:?}");
        }
    }
    let cli = Cli::parse();
    let outcome = match cli.cmd {
        Cmd::Exponent(args) => cmd_exponent(args),
        Cmd::Bound(args) => cmd_bound(args),
        Cmd::Simulate(args) => cmd_campaign(args, false),
        Cmd::Verify(args) => cmd_campaign(args, true),
        Cmd::Oracle(args) => cmd_oracle(args),
        Cmd::Report(args) => cmd_report(args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            let payload = ErrorJson {
                error: ErrorBody { kind: e.kind(), message: e.message() },
            };
            println!("{}", serde_json::to_string(&payload).unwrap());
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

// --- exponent ----------------------------------------------------------

#[derive(Serialize)]
struct ExponentJson<'a> {
    name: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    d: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    q: Option<QVector>,
    #[serde(skip_serializing_if = "Option::is_none")]
    r: Option<f64>,
    /// A number, or the string "inf" for the bounded-coordinates sentinel.
    value: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    log_power: Option<f64>,
    branch: String,
}

fn value_json(v: f64) -> serde_json::Value {
    if v.is_finite() {
        serde_json::json!(v)
    } else {
        serde_json::json!("inf")
    }
}

fn parse_qvec(args: &ExponentArgs) -> CliResult<QVector> {
    let text = args.q.as_ref().ok_or_else(|| usage("--q is required for this name"))?;
    Ok(QVector::parse(text)?)
}

fn parse_single_q(args: &ExponentArgs) -> CliResult<f64> {
    let v = parse_qvec(args)?;
    if v.d() != 1 {
        return Err(usage("this name takes a single order --q"));
    }
    match v.0[0] {
        QExp::Finite(q) => Ok(q),
        QExp::Inf => Err(usage("this name needs a finite order")),
    }
}

fn cmd_exponent(args: ExponentArgs) -> CliResult<ExitCode> {
    let name = args.name.clone();
    let (res, d, q, r): (ExponentResult, Option<usize>, Option<QVector>, Option<f64>) =
        match name.as_str() {
            "M" => {
                let qv = parse_qvec(&args)?;
                (exponent_m(&qv), Some(qv.d()), Some(qv), None)
            }
            "Nd" => {
                let qv = parse_qvec(&args)?;
                let res = if args.uncorrected {
                    exponent_nd_uncorrected(&qv)
                } else {
                    exponent_nd(&qv)
                };
                (res, Some(qv.d()), Some(qv), None)
            }
            "gamma_dq" => {
                let d = args.d.ok_or_else(|| usage("--d is required"))?;
                let qv = parse_qvec(&args)?;
                if qv.d() != 1 {
                    return Err(usage("gamma_dq takes a single order --q"));
                }
                (gamma_dq(d, qv.0[0])?, Some(d), Some(qv), None)
            }
            "L" => {
                let q = parse_single_q(&args)?;
                let r = args.r.ok_or_else(|| usage("--r is required"))?;
                (vector_l(q, r)?, None, args.q.as_deref().map(|s| QVector::parse(s).unwrap()), Some(r))
            }
            "N_qr" => {
                let q = parse_single_q(&args)?;
                let r = args.r.ok_or_else(|| usage("--r is required"))?;
                (vector_n_qr(q, r)?, None, None, Some(r))
            }
            "rV" => {
                let d = args.d.ok_or_else(|| usage("--d is required"))?;
                let q = parse_single_q(&args)?;
                let r = args.r.ok_or_else(|| usage("--r is required"))?;
                (log_refined_recursion(d, q, r)?, Some(d), None, Some(r))
            }
            "gamma_moment" => {
                let d = args.d.ok_or_else(|| usage("--d is required"))?;
                let v = moment_gamma(d)?;
                (
                    ExponentResult { value: v, log_power: None, branch: format!("recursion to d = {d}") },
                    Some(d),
                    None,
                    None,
                )
            }
            "G" => {
                let qv = parse_qvec(&args)?;
                (exponent_g(&qv), Some(qv.d()), Some(qv), None)
            }
            "t" => {
                let d = args.d.ok_or_else(|| usage("--d is required"))?;
                let k = args.k.ok_or_else(|| usage("--k is required"))?;
                let rank = args.rank.ok_or_else(|| usage("--rank is required"))?;
                let v = ustat_scale_t(d, k, rank)?;
                (
                    ExponentResult {
                        value: v,
                        log_power: None,
                        branch: format!("1/((d-r+1) C(d,k)) at d={d}, k={k}, r={rank}"),
                    },
                    Some(d),
                    None,
                    None,
                )
            }
            other => return Err(usage(format!("unknown exponent name '{other}'"))),
        };
    let out = ExponentJson {
        name: &name,
        d,
        q,
        r,
        value: value_json(res.value),
        log_power: res.log_power,
        branch: res.branch,
    };
    println!("{}", serde_json::to_string(&out).unwrap());
    Ok(ExitCode::SUCCESS)
}

// --- bound -------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AssumptionsFile {
    #[serde(default)]
    d: Option<usize>,
    #[serde(default)]
    q: Option<QVector>,
    #[serde(default)]
    scales: Option<Vec<f64>>,
    #[serde(default)]
    independence: Option<Independence>,
    #[serde(default)]
    tails: Option<Vec<TailFunction>>,
    #[serde(default)]
    cramer: Option<Vec<CramerJson>>,
    #[serde(default)]
    moments: Option<Vec<MomentEnvelope>>,
    #[serde(default)]
    field: Option<CoefficientField>,
    #[serde(default)]
    kernel: Option<KernelJson>,
    #[serde(default)]
    kernel_q: Option<f64>,
    #[serde(default)]
    kernel_r: Option<f64>,
    #[serde(default)]
    kernel_scale: Option<f64>,
    #[serde(default)]
    ustat_constant: Option<f64>,
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum CramerJson {
    Quadratic { sigma2: f64 },
    Bounded { k: f64 },
    Weibull { q: f64, k: f64 },
    None,
}

impl CramerJson {
    fn build(&self) -> CliResult<Option<CramerProfile>> {
        Ok(match self {
            CramerJson::Quadratic { sigma2 } => Some(CramerProfile::quadratic(*sigma2)),
            CramerJson::Bounded { k } => Some(CramerProfile::bounded(*k)),
            CramerJson::Weibull { q, k } => CramerProfile::weibull_symmetric(*q, *k),
            CramerJson::None => None,
        })
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelJson {
    support: Vec<AtomJson>,
    d: usize,
    phi: serde_json::Value,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AtomJson {
    x: f64,
    p: f64,
}

fn flatten_phi(value: &serde_json::Value, depth: usize, s: usize, out: &mut Vec<f64>) -> CliResult<()> {
    if depth == 0 {
        let v = value
            .as_f64()
            .ok_or_else(|| usage("kernel table entries must be numbers"))?;
        out.push(v);
        return Ok(());
    }
    let arr = value
        .as_array()
        .ok_or_else(|| usage("kernel table must be nested arrays of depth d"))?;
    if arr.len() != s {
        return Err(usage(format!("kernel table axis has {} entries, support has {s}", arr.len())));
    }
    for v in arr {
        flatten_phi(v, depth - 1, s, out)?;
    }
    Ok(())
}

impl KernelJson {
    fn build(&self) -> CliResult<FiniteKernel> {
        let atoms: Vec<f64> = self.support.iter().map(|a| a.x).collect();
        let probs: Vec<f64> = self.support.iter().map(|a| a.p).collect();
        let mut phi = Vec::new();
        flatten_phi(&self.phi, self.d, atoms.len(), &mut phi)?;
        Ok(FiniteKernel::new(atoms, probs, self.d, phi)?)
    }
}

impl AssumptionsFile {
    fn family(&self, default_independence: Independence) -> CliResult<FamilyAssumptions> {
        let independence = self.independence.unwrap_or(default_independence);
        if let Some(tails) = &self.tails {
            let d = tails.len();
            let cramer: Vec<Option<CramerProfile>> = match &self.cramer {
                None => vec![None; d],
                Some(list) => {
                    if list.len() != d {
                        return Err(usage("cramer list must match the number of tails"));
                    }
                    list.iter().map(|c| c.build()).collect::<CliResult<Vec<_>>>()?
                }
            };
            let moments: Vec<Option<MomentEnvelope>> = match &self.moments {
                None => vec![None; d],
                Some(list) => {
                    if list.len() != d {
                        return Err(usage("moments list must match the number of tails"));
                    }
                    list.iter().map(|m| Some(m.clone())).collect()
                }
            };
            return Ok(FamilyAssumptions::new(tails.clone(), cramer, independence, moments)?);
        }
        // moment-only assumptions: tails are irrelevant placeholders
        let moments = self
            .moments
            .as_ref()
            .ok_or_else(|| usage("assumptions need 'tails' or 'moments'"))?;
        let d = self.d.unwrap_or(moments.len());
        if moments.len() != d {
            return Err(usage("moments list must have length d"));
        }
        Ok(FamilyAssumptions::new(
            vec![TailFunction::constant_one(); d],
            vec![None; d],
            independence,
            moments.iter().map(|m| Some(m.clone())).collect(),
        )?)
    }

    fn q_and_scales(&self) -> CliResult<(QVector, Vec<f64>)> {
        let q = self.q.clone().ok_or_else(|| usage("assumptions need 'q'"))?;
        let scales = self.scales.clone().unwrap_or_else(|| vec![1.0; q.d()]);
        if scales.len() != q.d() {
            return Err(usage("'scales' must match the length of 'q'"));
        }
        Ok((q, scales))
    }
}

fn parse_p_list(args: &BoundArgs) -> CliResult<Vec<f64>> {
    if let Some(p) = args.p {
        return Ok(vec![p]);
    }
    if let Some(list) = &args.p_list {
        let ps: Result<Vec<f64>, _> = list.split(',').map(|t| t.trim().parse::<f64>()).collect();
        return ps.map_err(|e| usage(format!("bad --p-list: {e}")));
    }
    Err(usage("moment mode needs --p or --p-list"))
}

fn tail_curve_csv(tail: &TailFunction) -> String {
    let mut out = String::from("x,bound\n");
    match tail.grid_nodes() {
        Some((xs, ts)) => {
            for (x, t) in xs.iter().zip(ts) {
                out.push_str(&format!("{x:.12e},{t:.12e}\n"));
            }
        }
        None => {
            let k = tail.scale_ref();
            for j in 0..=256 {
                let x = k * 1e-2 * (1e6f64).powf(j as f64 / 256.0);
                out.push_str(&format!("{:.12e},{:.12e}\n", x, tail.eval(x)));
            }
        }
    }
    out
}

fn cmd_bound(args: BoundArgs) -> CliResult<ExitCode> {
    let file: AssumptionsFile = read_json(&args.assumptions)?;
    let tail_theorems = [1u8, 2, 4, 5, 9, 10, 13, 14];
    let moment_theorems = [6u8, 7, 8, 15, 16];
    let is_tail = match args.mode.as_str() {
        "tail" => true,
        "moment" => false,
        other => return Err(usage(format!("unknown mode '{other}'"))),
    };
    if is_tail && !tail_theorems.contains(&args.theorem) {
        return Err(usage(format!("construction {} is not a tail bound", args.theorem)));
    }
    if !is_tail && !moment_theorems.contains(&args.theorem) {
        return Err(usage(format!("construction {} is not a moment bound", args.theorem)));
    }

    let result: BoundResult = match args.theorem {
        1 => {
            let (q, scales) = file.q_and_scales()?;
            martingale_envelope(&q, &scales)?
        }
        2 => {
            let (q, scales) = file.q_and_scales()?;
            chaos_tails::bounds::independent_envelope(&q, &scales)?
        }
        4 => martingale_tail_bound(&file.family(Independence::MartingaleOnly)?)?,
        5 => independent_tail_bound(&file.family(Independence::TotallyIndependent)?)?,
        6 => moment_curve(&file.family(Independence::MartingaleOnly)?, &parse_p_list(&args)?, false)?,
        7 => moment_curve(&file.family(Independence::TotallyIndependent)?, &parse_p_list(&args)?, true)?,
        8 => {
            let kernel = file
                .kernel
                .as_ref()
                .ok_or_else(|| usage("construction 8 needs 'kernel'"))?
                .build()?;
            let ps = parse_p_list(&args)?;
            let mut points = Vec::new();
            let mut provenance = Vec::new();
            for &p in &ps {
                let (v, prov) = ustat_moment_bound(&kernel, p, file.ustat_constant)?;
                points.push((p, v));
                if provenance.is_empty() {
                    provenance.push(prov);
                }
            }
            BoundResult {
                curve: CurveData::Moments { points },
                side: BoundSide::Upper,
                provenance,
                assumptions: vec![format!("finite kernel, d = {}", kernel.d())],
            }
        }
        9 => {
            let kq = file.kernel_q.ok_or_else(|| usage("construction 9 needs 'kernel_q'"))?;
            let kr = file.kernel_r.unwrap_or(0.0);
            let ks = file.kernel_scale.unwrap_or(1.0);
            let d = file
                .d
                .or_else(|| file.kernel.as_ref().map(|k| k.d))
                .ok_or_else(|| usage("construction 9 needs 'd' or a kernel"))?;
            let tail = ustat_tail_from_envelope(d, kq, kr, ks)?;
            let (_, _, expo, rho) = tail.parametric_params().unwrap();
            BoundResult {
                curve: CurveData::Tail { tail },
                side: BoundSide::Upper,
                provenance: vec![format!(
                    "normalised U-statistic tail: exponent {expo:.6}, log power {rho:.6} (constant not asserted)"
                )],
                assumptions: vec![format!("kernel tail envelope with q = {kq}, r = {kr}, K = {ks}")],
            }
        }
        10 => {
            let kernel = file
                .kernel
                .as_ref()
                .ok_or_else(|| usage("construction 10 needs 'kernel'"))?
                .build()?;
            let tail = ustat_recursive_tail(&kernel)?;
            BoundResult {
                curve: CurveData::Tail { tail },
                side: BoundSide::Upper,
                provenance: vec!["recursive slice/mixture/truncation construction".into()],
                assumptions: vec![format!("finite kernel, d = {}", kernel.d())],
            }
        }
        13 | 14 => {
            let field = file.field.as_ref().ok_or_else(|| usage("split bounds need 'field'"))?;
            let (q, scales) = file.q_and_scales()?;
            split_tail_bound(field, &q, &scales, args.theorem == 14)?
        }
        15 | 16 => {
            let field = file.field.as_ref().ok_or_else(|| usage("split bounds need 'field'"))?;
            let ps = parse_p_list(&args)?;
            let independent = args.theorem == 15;
            let points: Vec<(f64, f64)> = ps
                .iter()
                .map(|&p| Ok((p, split_moment_bound(field, p, independent)?)))
                .collect::<CliResult<Vec<_>>>()?;
            BoundResult {
                curve: CurveData::Moments { points },
                side: BoundSide::Upper,
                provenance: vec![format!(
                    "threshold-optimised moment bound ({}); overall constant tracked as 1",
                    if independent { "independent" } else { "martingale" }
                )],
                assumptions: vec!["unit per-coordinate moment envelopes".into()],
            }
        }
        other => return Err(usage(format!("unknown construction id {other}"))),
    };

    #[derive(Serialize)]
    struct BoundJson<'a> {
        mode: &'a str,
        theorem: u8,
        result: &'a BoundResult,
    }
    let payload = BoundJson { mode: &args.mode, theorem: args.theorem, result: &result };
    let json = serde_json::to_string_pretty(&payload).unwrap();
    println!("{json}");
    if let Some(out) = &args.out {
        write_text(out, &json)?;
    }
    if let Some(csv_path) = &args.csv {
        if let CurveData::Tail { tail } = &result.curve {
            write_text(csv_path, &tail_curve_csv(tail))?;
        } else {
            return Err(usage("--csv applies to tail bounds only"));
        }
    }
    Ok(ExitCode::SUCCESS)
}

// --- campaigns ---------------------------------------------------------

fn emit_campaign_files(
    report: &VerificationReport,
    name: &str,
    out_dir: &Path,
) -> CliResult<()> {
    let base = out_dir.join(name);
    write_text(
        &base.with_extension("report.json"),
        &serde_json::to_string_pretty(report).unwrap(),
    )?;
    write_text(&base.with_extension("tail.csv"), &tail_csv(report))?;
    if !report.body.moments.is_empty() {
        write_text(&base.with_extension("moments.csv"), &moment_csv(report))?;
    }
    if !report.body.oracle.is_empty() {
        write_text(&base.with_extension("oracle.csv"), &oracle_csv(report))?;
    }
    Ok(())
}

fn cmd_campaign(args: CampaignArgs, gate_on_verdict: bool) -> CliResult<ExitCode> {
    let mut cfg: CampaignConfig = read_json(&args.config)?;
    if let Some(scale) = args.scale_bound {
        cfg.scale_bound = scale;
    }
    let report = run_campaign(&cfg)?;
    if cfg.verbosity >= 1 {
        for r in &report.body.tail {
            eprintln!(
                "x = {:10.4}  empirical {:.4e}  band {:.4e}  bound {:.4e}  {}",
                r.x,
                r.empirical,
                r.cp_upper,
                r.bound,
                if r.pass { "ok" } else { "FAIL" }
            );
        }
    }
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
    if let Some(dir) = &args.out_dir {
        emit_campaign_files(&report, &cfg.name, dir)?;
    }
    let verdict = report.body.verdict.clone();
    eprintln!(
        "campaign '{}': {:?} ({} tail rows, {} moment rows, {} oracle rows)",
        cfg.name,
        verdict,
        report.body.tail.len(),
        report.body.moments.len(),
        report.body.oracle.len()
    );
    if gate_on_verdict && verdict == Verdict::Fail {
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_oracle(args: OracleArgs) -> CliResult<ExitCode> {
    let field = match &args.field {
        Some(path) => {
            let f: CoefficientField = read_json(path)?;
            if f.d() != args.d {
                return Err(usage("field dimension does not match --d"));
            }
            f
        }
        None => CoefficientField::uniform(args.d, args.n)?,
    };
    let tail = exact_tail(&field, args.x)?;
    #[derive(Serialize)]
    struct OracleJson {
        d: usize,
        n: usize,
        x: f64,
        tail: f64,
    }
    println!(
        "{}",
        serde_json::to_string(&OracleJson { d: args.d, n: args.n, x: args.x, tail }).unwrap()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_report(args: ReportArgs) -> CliResult<ExitCode> {
    let report: VerificationReport = read_json(&args.report)?;
    #[derive(Serialize)]
    struct Summary<'a> {
        name: &'a str,
        verdict: &'a Verdict,
        tail_rows: usize,
        moment_rows: usize,
        oracle_rows: usize,
        replications: usize,
        seed: u64,
    }
    let summary = Summary {
        name: &report.body.config.name,
        verdict: &report.body.verdict,
        tail_rows: report.body.tail.len(),
        moment_rows: report.body.moments.len(),
        oracle_rows: report.body.oracle.len(),
        replications: report.body.config.replications,
        seed: report.body.config.seed,
    };
    println!("{}", serde_json::to_string_pretty(&summary).unwrap());
    if let Some(dir) = &args.out_dir {
        emit_campaign_files(&report, &report.body.config.name, dir)?;
    }
    Ok(ExitCode::SUCCESS)
}
