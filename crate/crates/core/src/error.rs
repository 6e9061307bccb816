use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("systems live in different domains ({0} vs {1})")]
    DomainMismatch(String, String),

    #[error("source system is not minimum-phase (a zero or pole lies outside the stability region)")]
    SourceNotMinimumPhase,

    #[error("{0} system is not BIBO stable")]
    UnstableSystem(&'static str),

    #[error("target system is not BIBO stable")]
    UnstableTarget,

    #[error("system is non-causal (relative degree {0})")]
    NonCausal(i32),

    #[error("denominator is the zero polynomial")]
    ZeroDenominator,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("signals are incompatible: {0}")]
    SignalMismatch(String),

    #[error("signal too short: {len} samples, need more than {needed}")]
    SignalTooShort { len: usize, needed: usize },

    #[error("cutoff {cutoff_hz} Hz is not below the Nyquist frequency {nyquist_hz} Hz")]
    CutoffAboveNyquist { cutoff_hz: f64, nyquist_hz: f64 },

    #[error("shift of {shift} samples is not shorter than the signal ({len} samples)")]
    ShiftTooLarge { shift: usize, len: usize },

    #[error("simulation diverged at sample {index}")]
    SimulationDiverged { index: usize },

    #[error("no sample exceeds the detection threshold")]
    NoResponse,

    #[error("output is not at rest before the step (sample {index})")]
    NotAtRest { index: usize },

    #[error("relative degree is inconclusive: {0}")]
    Inconclusive(String),

    #[error("input signal carries no excitation")]
    NoExcitation,

    #[error("regressor matrix is rank deficient (condition number {condition:.3e})")]
    RankDeficient { condition: f64 },

    #[error("reference signal is constant; the fit normalizer is zero")]
    ConstantReference,

    #[error("free-run simulation of the identified model diverged at sample {index}")]
    ModelDiverged { index: usize },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Wraps the error with the name of the pipeline stage that produced it.
    pub fn at(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// True for failures caused by numerics (divergence, rank loss, ...) rather
    /// than by malformed input.
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::Stage { source, .. } => source.is_numeric(),
            Error::SimulationDiverged { .. }
            | Error::ModelDiverged { .. }
            | Error::RankDeficient { .. }
            | Error::NoResponse
            | Error::Inconclusive(_)
            | Error::NoExcitation
            | Error::ConstantReference
            | Error::SourceNotMinimumPhase
            | Error::UnstableSystem(_)
            | Error::UnstableTarget
            | Error::NonCausal(_) => true,
            _ => false,
        }
    }
}

pub trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.at(stage))
    }
}
