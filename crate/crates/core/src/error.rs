use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("syntax error at position {pos}: {message}")]
    Syntax { pos: usize, message: String },

    #[error("invalid elementary label {0:?}")]
    InvalidLabel(String),

    #[error("no projector assigned to label `{0}`")]
    MissingLabel(String),

    #[error("sequential exclusive OR cannot be compiled into the reduction protocol")]
    UnsupportedXor,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("state is not normalized (squared norm {norm_sqr})")]
    NotNormalized { norm_sqr: f64 },

    #[error("operator for `{label}` is not a projector (defect {defect:e})")]
    NotProjector { label: String, defect: f64 },

    #[error("matrix is not Hermitian (defect {defect:e})")]
    NotHermitian { defect: f64 },

    #[error("matrix has negative eigenvalue {0:e}")]
    NegativeEigenvalue(f64),

    #[error("matrix is not unitary (defect {defect:e})")]
    NotUnitary { defect: f64 },

    #[error("measurement operators do not resolve the identity (defect {defect:e})")]
    Incomplete { defect: f64 },

    #[error("branch {outcome} of slot {slot} is impossible (probability {probability:e})")]
    ImpossibleBranch {
        slot: usize,
        outcome: usize,
        probability: f64,
    },

    #[error("no forced outcome given for slot {0}")]
    MissingOutcome(usize),

    #[error("register {register} is entangled and cannot be discarded (linear entropy {entropy:e})")]
    EntangledDiscard { register: usize, entropy: f64 },

    #[error("register {0} is not live")]
    DeadRegister(usize),

    #[error("both branches annihilate the state")]
    Degenerate,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("register needs {needed:.1} qubit-equivalents, limit is {limit}")]
    TooLarge { needed: f64, limit: usize },

    #[error("no success after {attempts} attempts (empirical failure rate {failure_rate})")]
    ExhaustedAttempts { attempts: u64, failure_rate: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid assignment file: {0}")]
    InvalidFile(String),
}
