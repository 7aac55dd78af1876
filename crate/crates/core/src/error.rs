use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("operand is not trig-pure: {0}")]
    NotTrigPure(&'static str),

    #[error("incompatible Neumann data: defect {defect:.3e} exceeds tolerance {tolerance:.1e}")]
    Compatibility { defect: f64, tolerance: f64 },

    #[error("derivative order {requested} exceeds the conditioning cap; max trustworthy order is {max_order}")]
    Conditioning { requested: usize, max_order: usize },

    #[error("singular tau matrix for wavenumber k = {k}")]
    SingularTau { k: i64 },

    #[error("zero right-hand side in {0}")]
    ZeroDenominator(&'static str),

    #[error("invariant violated at t = {time:.6e}: {what} = {value:.3e} (limit {limit:.3e})")]
    Invariant {
        time: f64,
        what: &'static str,
        value: f64,
        limit: f64,
    },

    #[error("blow-up guard: norm {norm:.3e} exceeded ceiling {ceiling:.3e} at t = {time:.6e}")]
    BlowUp { time: f64, norm: f64, ceiling: f64 },

    #[error("Picard iterates diverge: composite norms {trace:?}")]
    Diverged { trace: Vec<f64> },

    #[error("certificate violation in {name}: {count} instance(s)")]
    Certificate { name: String, count: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code for the command-line surface.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parse(_) => 2,
            Error::Certificate { .. } => 4,
            Error::Io(_) | Error::Csv(_) => 1,
            _ => 3,
        }
    }
}
