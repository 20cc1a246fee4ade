use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dyad ({i}, {j}) appears more than once")]
    DuplicateDyad { i: usize, j: usize },

    #[error("self-loop dyad on agent {agent}: outcomes are only defined for i != j")]
    SelfLoop { agent: String },

    #[error("unknown agent id {0}")]
    UnknownAgent(String),

    #[error("invalid range: lo = {lo} must be below hi = {hi}")]
    BadRange { lo: f64, hi: f64 },

    #[error("no kernel mass near the conditioning point (denominator is zero)")]
    NoLocalMass,

    #[error("probability level {0} is outside (0, 1)")]
    BadProbability(f64),

    #[error("could not bracket level {level} after {expansions} expansions")]
    BracketFailure { level: f64, expansions: usize },

    #[error("e = {e} and ebar = {ebar} have different signs (lambda = e/ebar must be positive)")]
    SignMismatch { e: f64, ebar: f64 },

    #[error("conditional density at the estimate is {0:e}; variance is unavailable")]
    DegenerateDensity(f64),

    #[error("structural function is singular at e = 0")]
    Singularity,

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("line {line}: {source}")]
    AtLine {
        line: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numeric,
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub fn at_line(self, line: u64) -> Self {
        Error::AtLine {
            line,
            source: Box::new(self),
        }
    }

    /// Short stable tag used in tabular output for failed evaluations.
    pub fn reason_code(&self) -> &'static str {
        match self {
            Error::DuplicateDyad { .. } => "DuplicateDyad",
            Error::SelfLoop { .. } => "SelfLoop",
            Error::UnknownAgent(_) => "UnknownAgent",
            Error::BadRange { .. } => "BadRange",
            Error::NoLocalMass => "NoLocalMass",
            Error::BadProbability(_) => "BadProbability",
            Error::BracketFailure { .. } => "BracketFailure",
            Error::SignMismatch { .. } => "SignMismatch",
            Error::DegenerateDensity(_) => "DegenerateDensity",
            Error::Singularity => "Singularity",
            Error::Invalid(_) => "Invalid",
            Error::AtLine { source, .. } => source.reason_code(),
            Error::Csv(_) => "Csv",
            Error::Io(_) => "Io",
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::DuplicateDyad { .. }
            | Error::SelfLoop { .. }
            | Error::UnknownAgent(_)
            | Error::Csv(_)
            | Error::Io(_) => ErrorClass::Data,
            Error::NoLocalMass | Error::BracketFailure { .. } | Error::DegenerateDensity(_) | Error::Singularity => {
                ErrorClass::Numeric
            }
            Error::BadRange { .. } | Error::BadProbability(_) | Error::SignMismatch { .. } | Error::Invalid(_) => {
                ErrorClass::Usage
            }
            Error::AtLine { source, .. } => source.class(),
        }
    }
}
