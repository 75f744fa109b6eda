use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension must be at least 1")]
    EmptyDimension,

    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is not Hermitian (deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPositive { min_eigenvalue: f64 },

    #[error("trace {trace:e} is too small to normalize")]
    DegenerateTrace { trace: f64 },

    #[error("density operator trace {trace} deviates from 1")]
    NotUnitTrace { trace: f64 },

    #[error("jump operator {index} has negative rate {rate}")]
    NegativeRate { index: usize, rate: f64 },

    #[error("basis is not orthonormal (Gram deviation {deviation:e})")]
    NotOrthonormal { deviation: f64 },

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("trace drift {drift:e} at t = {time} exceeds tolerance; reduce the step size")]
    StepSize { time: f64, drift: f64 },

    #[error("at least {required} samples are required, got {found}")]
    TooFewSamples { required: usize, found: usize },

    #[error("observable value {value} has non-negligible imaginary part {imag:e}")]
    NonRealObservable { value: f64, imag: f64 },

    #[error("grid index {index} is out of range or was not recorded")]
    IndexNotRecorded { index: usize },

    #[error("the exact method requires a time-independent generator")]
    TimeDependentExact,

    #[error("invalid drift schedule: {0}")]
    InvalidSchedule(String),
}

pub type Result<T> = std::result::Result<T, Error>;
