use thiserror::Error;

/// Errors raised anywhere in the pipeline, from CSV ingestion to the
/// statevector simulator.
#[derive(Debug, Error)]
pub enum QbError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("config: {0}")]
    Config(String),

    #[error("malformed price data: {0}")]
    MalformedPrices(String),
    #[error("missing value for {ticker} at row {row}")]
    MissingValue { row: usize, ticker: String },
    #[error("non-positive price {value} for {ticker} at row {row}")]
    NonPositivePrice { row: usize, ticker: String, value: f64 },
    #[error("need at least {needed} dates, got {got}")]
    TooFewDates { needed: usize, got: usize },
    #[error("covariance matrix is singular (condition number {0:e})")]
    SingularCovariance(f64),
    #[error("invalid market moments: {0}")]
    InvalidMoments(String),
    #[error("degenerate frontier: {0}")]
    DegenerateFrontier(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("bound {value} is not a multiple of precision {alpha}")]
    GridMisaligned { value: f64, alpha: f64 },
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("enumeration of {size} candidates exceeds cap {cap}")]
    CapExceeded { size: f64, cap: f64 },

    #[error("value {value} out of range [0, {range}] for asset {asset}")]
    OutOfRange { asset: usize, value: u64, range: u64 },
    #[error("basis index {index} out of range for {n_qubits} qubits")]
    BasisOutOfRange { index: usize, n_qubits: usize },
    #[error("qubit {qubit} out of range for {n_qubits} qubits")]
    QubitOutOfRange { qubit: usize, n_qubits: usize },
    #[error("invalid gate operands: {0}")]
    InvalidGate(String),
    #[error("state norm drifted to {0}")]
    NormDrift(f64),

    #[error("objective returned a non-finite value {0}")]
    NonFiniteObjective(f64),
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
}

pub type Result<T> = std::result::Result<T, QbError>;
