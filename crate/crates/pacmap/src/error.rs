//! Error and warning types shared across the crate.

use thiserror::Error;

/// Errors returned by library operations.
#[derive(Debug, Error)]
#[non_exhaustive]
pub enum Error {
    /// The data matrix is too small for the requested operation.
    #[error("need at least {min} observations, got {got}")]
    TooFewObservations { min: usize, got: usize },

    /// A matrix contains a NaN or infinite entry.
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    /// A matrix has an empty dimension.
    #[error("matrix must have at least {min_rows} row(s) and {min_cols} column(s), got {rows}x{cols}")]
    EmptyMatrix {
        rows: usize,
        cols: usize,
        min_rows: usize,
        min_cols: usize,
    },

    /// A configuration value is outside its legal range.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Iteration phase boundaries are not ordered `1 = tau1 <= tau2 <= tau3 <= n_iterations`.
    #[error("invalid phase boundaries: tau=({tau1},{tau2},{tau3}), n_iterations={n_iterations}")]
    InvalidSchedule {
        tau1: usize,
        tau2: usize,
        tau3: usize,
        n_iterations: usize,
    },

    /// The optimizer encountered a non-finite gradient or loss.
    #[error("non-finite {what} at iteration {iteration}")]
    NonFiniteOptimization { what: &'static str, iteration: usize },

    /// Label-based metric was requested without labels or with too few classes.
    #[error("metric `{metric}` needs at least {min_classes} classes, got {got}")]
    TooFewClasses {
        metric: &'static str,
        min_classes: usize,
        got: usize,
    },

    /// Labels are missing entirely.
    #[error("metric `{0}` requires labels")]
    MissingLabels(&'static str),

    /// Mismatched row counts between two matrices that must align.
    #[error("row count mismatch: {left} vs {right}")]
    RowMismatch { left: usize, right: usize },

    /// A rejection sampler could not produce enough points.
    #[error("rejection sampling exhausted after {attempts} attempts ({accepted}/{requested} accepted)")]
    RejectionExhausted {
        attempts: usize,
        accepted: usize,
        requested: usize,
    },

    /// Unknown built-in loss surface or profile name.
    #[error("unknown loss name `{0}`")]
    UnknownLoss(String),

    /// Invalid parameter for a built-in force profile.
    #[error("invalid profile parameter: {0}")]
    InvalidProfileParam(String),

    /// CSV parse failure with 1-based location.
    #[error("{path}: parse error at row {row}, column {col}: {msg}")]
    CsvParse {
        path: String,
        row: usize,
        col: usize,
        msg: String,
    },

    /// A CSV row had a different number of fields than the first row.
    #[error("{path}: ragged row {row}: expected {expected} fields, got {got}")]
    CsvRagged {
        path: String,
        row: usize,
        expected: usize,
        got: usize,
    },

    /// CSV file contained no data rows.
    #[error("{path}: no data rows")]
    CsvEmpty { path: String },

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Non-fatal conditions surfaced to the caller.
///
/// Operations that can degrade gracefully (clamped neighbor counts, degenerate
/// duplicate points, rank-deficient initialization) push one of these into the
/// caller-supplied sink instead of failing.
#[derive(Debug, Clone, PartialEq, Eq)]
#[non_exhaustive]
pub enum Warning {
    /// Fewer than 7 observations: sigma fell back to the farthest available neighbors.
    SigmaFallback { n: usize },
    /// Zero-distance duplicates: the listed number of sigmas were replaced by machine epsilon.
    ZeroSigmaReplaced { count: usize },
    /// Requested neighbor count exceeded N-1 and was clamped.
    NeighborCountClamped { requested: usize, actual: usize },
    /// Mid-near sampling had 6 or fewer candidates and used all other points.
    MidNearSmallPool { n: usize },
    /// Further-pair sampling ran out of eligible partners for an anchor.
    FurtherPoolExhausted {
        anchor: usize,
        available: usize,
        requested: usize,
    },
    /// Data rank was below the output dimension; missing components were noise-filled.
    RankDeficientInit { rank: usize, d_out: usize },
    /// KNN accuracy over a single class is trivially 1.
    SingleClass,
}

impl std::fmt::Display for Warning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Warning::SigmaFallback { n } => write!(
                f,
                "only {n} observations: sigma uses the farthest available neighbors instead of the 4th-6th"
            ),
            Warning::ZeroSigmaReplaced { count } => {
                write!(f, "{count} zero sigma(s) replaced by machine epsilon")
            }
            Warning::NeighborCountClamped { requested, actual } => {
                write!(f, "n_neighbors clamped from {requested} to {actual}")
            }
            Warning::MidNearSmallPool { n } => {
                write!(f, "mid-near sampling pool has only {n} observations")
            }
            Warning::FurtherPoolExhausted {
                anchor,
                available,
                requested,
            } => write!(
                f,
                "anchor {anchor}: only {available} eligible further partners (requested {requested})"
            ),
            Warning::RankDeficientInit { rank, d_out } => {
                write!(f, "data rank {rank} < {d_out} output dims: noise-filled missing components")
            }
            Warning::SingleClass => write!(f, "labels contain a single class; accuracy is trivially 1"),
        }
    }
}
