//! Crate-wide error type.

/// Errors raised across the library. Numerical failures carry the condition
/// estimate that triggered them so callers can decide on fallbacks.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("matrix is singular to working precision (condition estimate {cond_estimate:.3e})")]
    SingularMatrix { cond_estimate: f64 },

    #[error("interaction matrix of the connection is singular (condition estimate {cond_estimate:.3e})")]
    SingularInteraction { cond_estimate: f64 },

    #[error("(I - S) is singular: the system contains ideal delta-connection content and has no impedance representation; use a quasi-delta work-around")]
    DeltaLikeSingularity,

    #[error("small update matrix is singular; fall back to a full re-evaluation")]
    SingularUpdate,

    #[error("block must be square, got {rows}x{cols}")]
    InvalidBlock { rows: usize, cols: usize },

    #[error("unknown port set `{label}`")]
    UnknownPortSet { label: String },

    #[error("reference impedance must have positive real part, got {value}")]
    InvalidReference { value: num_complex::Complex64 },

    #[error("port sets do not match: {context}")]
    PortSetMismatch { context: String },

    #[error("connection system port order does not match the supersystem: {context}")]
    PortOrderMismatch { context: String },

    #[error("invalid reduction: {context}")]
    InvalidReduction { context: String },

    #[error("epsilon must lie strictly between 0 and 1, got {value}")]
    InvalidEpsilon { value: f64 },

    #[error("subsystem {index} is not part of the cached supersystem; updates require it there")]
    SubsystemNotInSupersystem { index: usize },

    #[error("bond between nodes {a} and {b} is resonant at the given wavevector (|sin(k l)| = {magnitude:.3e})")]
    ResonantBond { a: usize, b: usize, magnitude: f64 },

    #[error("graph wave problem is resonant: (M + WᵀW) is singular")]
    ResonantGraph,

    #[error("invalid gluing: {context}")]
    InvalidGluing { context: String },

    #[error("invalid node subset: {context}")]
    InvalidSubset { context: String },

    #[error("random graph generation failed after {attempts} attempts: {context}")]
    GenerationFailed { attempts: usize, context: String },

    #[error("representation mismatch: expected {expected}, got {actual}")]
    RepresentationMismatch { expected: String, actual: String },

    #[error("shape mismatch: {context}")]
    ShapeMismatch { context: String },

    #[error("matrix entries must be finite")]
    NonFiniteEntry,

    #[error("invalid network description: {context}")]
    InvalidNetwork { context: String },

    #[error("invalid connection scheme: {context}")]
    InvalidScheme { context: String },
}

pub type Result<T> = std::result::Result<T, Error>;
