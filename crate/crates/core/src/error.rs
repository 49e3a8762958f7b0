use thiserror::Error;

/// Crate-wide error type; variants map one-to-one onto the failure modes of
/// the numeric operators and the simulation lab.
#[derive(Debug, Error)]
pub enum Error {
    /// The tail decays slower than `y^-2` on its extrapolated branch, so the
    /// implied second moment is infinite.
    #[error("tail second moment diverges: extrapolated decay slope {slope:.4} >= -2")]
    Divergent { slope: f64 },

    /// The aggregate log-MGF supremum keeps growing in the block count; the
    /// underlying envelope is not a valid centered log-MGF.
    #[error("aggregated log-MGF is unbounded (envelope sub-quadratic near zero)")]
    UnboundedChi,

    #[error("moment sequence is not nondecreasing at p = {p}")]
    NonMonotoneMoments { p: f64 },

    #[error("moment envelope missing for coordinate {coordinate}")]
    MissingMoments { coordinate: usize },

    #[error("dimension mismatch: field has d = {field_d}, samples have d = {batch_d}")]
    DimensionMismatch { field_d: usize, batch_d: usize },

    #[error("exact enumeration needs {bits} sign bits, cap is {cap}")]
    TooLarge { bits: u32, cap: u32 },

    #[error("generated family violates a declared assumption: {0}")]
    AssumptionViolated(String),

    #[error("all Hoeffding projections vanish: kernel has zero variance")]
    AllProjectionsZero,

    #[error("coefficient mass is not summable in the requested regime")]
    NonSummable,

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
