use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("syntax error at byte {position}: {message}")]
    Syntax { position: usize, message: String },

    #[error("unknown identifier `{name}` at byte {position}")]
    UnknownIdentifier { name: String, position: usize },

    #[error("tabulated function needs at least 2 samples, got {0}")]
    TooFewSamples(usize),

    #[error("tabulated samples must strictly increase in t (row {row})")]
    UnsortedSamples { row: usize },

    #[error("malformed table: {0}")]
    Table(String),

    #[error("t = {t} lies outside the domain [{start}, {end}]")]
    OutOfDomain { t: f64, start: f64, end: f64 },

    #[error("invalid system: {0}")]
    InvalidSpec(String),

    #[error("no constant rotation decouples the system: residual {residual:e} exceeds {threshold:e}")]
    NotDecouplable { residual: f64, threshold: f64 },

    #[error("decoupling residual {residual:e} exceeds {threshold:e}; the closed-form kernel does not apply")]
    NotDecoupled { residual: f64, threshold: f64 },

    #[error("integrator failure at t = {t}: {message}")]
    Integrator { t: f64, message: String },

    #[error("caustic: sin(phase) vanishes at phase = {phase}")]
    Caustic { phase: f64 },

    #[error("quadrature did not converge (estimated error {estimate:e})")]
    Quadrature { estimate: f64 },

    #[error("grid too coarse: boundary population {population:e}")]
    GridTooCoarse { population: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Short machine-readable tag used in CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Syntax { .. } => "syntax",
            Error::UnknownIdentifier { .. } => "unknown_identifier",
            Error::TooFewSamples(_) => "too_few_samples",
            Error::UnsortedSamples { .. } => "unsorted_samples",
            Error::Table(_) => "table",
            Error::OutOfDomain { .. } => "out_of_domain",
            Error::InvalidSpec(_) => "invalid_spec",
            Error::NotDecouplable { .. } => "not_decouplable",
            Error::NotDecoupled { .. } => "not_decoupled",
            Error::Integrator { .. } => "integrator",
            Error::Caustic { .. } => "caustic",
            Error::Quadrature { .. } => "quadrature",
            Error::GridTooCoarse { .. } => "grid_too_coarse",
            Error::GridMismatch(_) => "grid_mismatch",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }

    /// Input errors (bad expressions, files, configuration) as opposed to
    /// numerical failures on valid input.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Syntax { .. }
                | Error::UnknownIdentifier { .. }
                | Error::TooFewSamples(_)
                | Error::UnsortedSamples { .. }
                | Error::Table(_)
                | Error::OutOfDomain { .. }
                | Error::InvalidSpec(_)
                | Error::Config(_)
                | Error::Io(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
