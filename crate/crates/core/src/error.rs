use thiserror::Error;

/// Errors raised by the certification toolkit.
///
/// Condition failures found while sampling are *not* errors; they are
/// recorded in reports. Errors are reserved for violated preconditions and
/// numerical breakdowns that make a result meaningless.
#[derive(Debug, Error)]
pub enum SpasError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid set: {0}")]
    InvalidSet(String),

    #[error("projection onto intersection did not converge after {sweeps} sweeps (residual {residual:e})")]
    IntersectionNonconvergence { sweeps: usize, residual: f64 },

    #[error("map returned a nonfinite state at t={t}: {state:?}")]
    NonfiniteState { t: usize, state: Vec<f64> },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("ray along direction {direction:?} never exceeded level {level} within the doubling budget")]
    RayUnbounded { direction: Vec<f64>, level: f64 },

    #[error("construction failed: {0}")]
    Construction(String),

    #[error("no admissible gain found in (0, {alpha_max}]: {reason}")]
    NoAdmissibleGain { alpha_max: f64, reason: String },

    #[error("gain set is not down-closed: conditions fail at alpha = {alpha}")]
    NotDownClosed { alpha: f64 },

    #[error("sampling starved: {0}")]
    SamplingStarved(String),

    #[error("certificate margin not positive on the descent region (gamma = {gamma:e})")]
    NonpositiveGamma { gamma: f64 },

    #[error("search direction vanishes on the target set")]
    DegenerateSearchDirection,

    #[error("pseudogradient inequality violated at {witness:?} (slack {slack:e})")]
    PseudogradientViolation { witness: Vec<f64>, slack: f64 },

    #[error("communication matrix: {0}")]
    Matrix(String),

    #[error("contraction factor mu = {mu} is not below 1")]
    NoContraction { mu: f64 },

    #[error("gain {alpha} is not below tau / L_s^2 = {limit}")]
    GainTooLarge { alpha: f64, limit: f64 },
}

pub type Result<T> = std::result::Result<T, SpasError>;
