use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors surfaced by configuration checks, operator builders, and solvers.
#[derive(Debug, Error)]
pub enum Error {
    /// Site counts must be even and at least 4 (2 only through the dedicated
    /// test constructor). Odd or tiny chains break the ladder construction.
    #[error("invalid site count {n}: need an even count of at least 4")]
    SiteCount { n: usize },

    /// Couplings outside their physical domain (j_se must be nonzero,
    /// omega non-negative).
    #[error("coupling `{name}` = {value} outside its valid range: {need}")]
    CouplingRange {
        name: &'static str,
        value: f64,
        need: &'static str,
    },

    /// A flip phase that is a multiple of 2*pi drives every site in phase,
    /// so no part of the drive couples to spin waves.
    #[error("flip phase {phi} is a multiple of 2*pi; the drive is uniform and never splits")]
    UniformPhase { phi: f64 },

    /// Magnetization sector outside |m| <= n/2.
    #[error("magnetization m = {m} outside the physical range for {n} sites")]
    SectorRange { m: i32, n: usize },

    /// Magnon index outside the allowed range for the requested construction.
    #[error("magnon index q = {q} outside the valid range {lo}..={hi} for {n} sites")]
    MagnonRange {
        q: usize,
        lo: usize,
        hi: usize,
        n: usize,
    },

    /// Vector or matrix dimensions do not line up.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// An operator flagged Hermitian failed the element-wise adjoint check.
    #[error("operator flagged Hermitian deviates from its adjoint by {max_dev:.3e}")]
    NotHermitian { max_dev: f64 },

    /// Requested a closed-form evaluation at a phase that is not an integer
    /// multiple of 2*pi/n.
    #[error("phase {phi} is not commensurate (2*pi*k/{n}) so no closed form applies")]
    NotCommensurate { phi: f64, n: usize },

    /// The mean spin shrank below threshold, leaving the squeezing frame
    /// undefined.
    #[error("mean spin length {length:.3e} below threshold {threshold:.3e}; transverse frame undefined")]
    MeanSpinCollapsed { length: f64, threshold: f64 },

    /// A basis was used where a different span was required, for instance a
    /// sector basis handed to a sector-mixing builder.
    #[error("basis mismatch: {detail}")]
    BasisMismatch { detail: String },

    /// Numerical failure inside a solver or a violated runtime tolerance.
    #[error("numerical failure: {detail}")]
    Numerical { detail: String },

    /// A search over time or phase could not run as requested.
    #[error("search setup invalid: {detail}")]
    Search { detail: String },

    /// The mean spin collapsed before any squeezing minimum appeared; the
    /// samples gathered up to the collapse ride along for diagnosis.
    #[error("mean spin collapsed at t = {at_time:.6e} before any squeezing minimum")]
    SearchCollapsed {
        at_time: f64,
        partial: Box<crate::dynamics::SqueezingTrace>,
    },

    /// A construction outside the supported regime, for instance the
    /// effective model on a periodic ring.
    #[error("unsupported request: {detail}")]
    Unsupported { detail: String },
}

impl Error {
    pub(crate) fn numerical(detail: impl Into<String>) -> Self {
        Error::Numerical {
            detail: detail.into(),
        }
    }

    pub(crate) fn search(detail: impl Into<String>) -> Self {
        Error::Search {
            detail: detail.into(),
        }
    }

    pub(crate) fn basis(detail: impl Into<String>) -> Self {
        Error::BasisMismatch {
            detail: detail.into(),
        }
    }

    pub(crate) fn unsupported(detail: impl Into<String>) -> Self {
        Error::Unsupported {
            detail: detail.into(),
        }
    }
}
