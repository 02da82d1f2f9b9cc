use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (max deviation {deviation:.3e})")]
    NonHermitianInput { deviation: f64 },

    #[error("columns are not orthonormal (max deviation {deviation:.3e})")]
    ColumnsNotOrthonormal { deviation: f64 },

    #[error("effects do not sum to identity (max deviation {deviation:.3e})")]
    NotNormalized { deviation: f64 },

    #[error("effect {index} is not PSD (smallest eigenvalue {eigenvalue:.3e})")]
    EffectNotPsd { index: usize, eigenvalue: f64 },

    #[error("effect {index} is not rank one (rank {rank})")]
    EffectNotRankOne { index: usize, rank: usize },

    #[error("strategy member {index} is not a projective measurement")]
    NotProjective { index: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("weights do not form a probability distribution (sum {sum})")]
    InvalidWeights { sum: f64 },

    #[error("invalid covariant seed: {0}")]
    InvalidSeed(String),

    #[error("effect {index} does not have unit trace (trace {trace})")]
    NotTraceOne { index: usize, trace: f64 },

    #[error("rank class {0:?} cannot occur for a trace-one qutrit POVM")]
    ImpossibleRankClass(Vec<usize>),

    #[error("decomposition exceeded depth bound {0}")]
    DepthExceeded(usize),

    #[error("certificate inconsistent: {0}")]
    CertificateInconsistent(String),

    #[error("ill-formed SDP: {0}")]
    IllFormedProblem(String),

    #[error("SDP solver failed: {0}")]
    Solver(String),

    #[error("directions do not span R^3")]
    DegenerateDirections,

    #[error("polytope is unbounded")]
    Unbounded,

    #[error("ambient dimension {0} exceeds the enumeration guard")]
    DimensionTooLarge(usize),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Variant name, used as the machine-readable error code.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonHermitianInput { .. } => "NonHermitianInput",
            Error::ColumnsNotOrthonormal { .. } => "ColumnsNotOrthonormal",
            Error::NotNormalized { .. } => "NotNormalized",
            Error::EffectNotPsd { .. } => "EffectNotPsd",
            Error::EffectNotRankOne { .. } => "EffectNotRankOne",
            Error::NotProjective { .. } => "NotProjective",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::OutOfRange(_) => "OutOfRange",
            Error::InvalidWeights { .. } => "InvalidWeights",
            Error::InvalidSeed(_) => "InvalidSeed",
            Error::NotTraceOne { .. } => "NotTraceOne",
            Error::ImpossibleRankClass(_) => "ImpossibleRankClass",
            Error::DepthExceeded(_) => "DepthExceeded",
            Error::CertificateInconsistent(_) => "CertificateInconsistent",
            Error::IllFormedProblem(_) => "IllFormedProblem",
            Error::Solver(_) => "Solver",
            Error::DegenerateDirections => "DegenerateDirections",
            Error::Unbounded => "Unbounded",
            Error::DimensionTooLarge(_) => "DimensionTooLarge",
            Error::Unsupported(_) => "Unsupported",
            Error::Parse(_) => "Parse",
        }
    }

    /// True for errors caused by input that fails a model invariant.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::NonHermitianInput { .. }
                | Error::NotNormalized { .. }
                | Error::EffectNotPsd { .. }
                | Error::EffectNotRankOne { .. }
                | Error::NotProjective { .. }
                | Error::DimensionMismatch(_)
                | Error::OutOfRange(_)
                | Error::InvalidWeights { .. }
                | Error::InvalidSeed(_)
                | Error::NotTraceOne { .. }
                | Error::Parse(_)
                | Error::ColumnsNotOrthonormal { .. }
        )
    }
}
