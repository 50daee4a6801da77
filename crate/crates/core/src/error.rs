use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("malformed trace: {0}")]
    MalformedTrace(String),

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("window [{start}, {end}] is outside the trace support [{support_start}, {support_end}]")]
    WindowOutsideTrace {
        start: f64,
        end: f64,
        support_start: f64,
        support_end: f64,
    },

    #[error("initial state has dimension {got}, `{system}` expects {expected}")]
    StateDimension {
        system: String,
        expected: usize,
        got: usize,
    },

    #[error("step size underflow at t = {time} (step {step:e})")]
    StepUnderflow { time: f64, step: f64 },

    #[error("simulation diverged at t = {time}: {reason}")]
    Divergence { time: f64, reason: String },

    #[error("certificate for `{certificate}` applied to a trajectory of `{trajectory}`")]
    SystemMismatch {
        certificate: String,
        trajectory: String,
    },

    #[error("no {form} certificate for `{system}`")]
    UnknownPairing { system: String, form: String },

    #[error("invalid certificate: {0}")]
    InvalidCertificate(String),

    #[error("no gain in [{lo}, {hi}] passes every probe")]
    NoPassingGain { lo: f64, hi: f64 },

    #[error("gain monotonicity violated: {passing} passes but {failing} fails")]
    MonotonicityViolation { passing: f64, failing: f64 },

    #[error("incompatible gain functions: {0}")]
    IncompatibleGains(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn require_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("must be positive and finite, got {value}")))
    }
}

pub(crate) fn require_finite(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(invalid(name, format!("must be finite, got {value}")))
    }
}
