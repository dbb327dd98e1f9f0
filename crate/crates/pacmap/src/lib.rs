//! Pairwise controlled manifold approximation: a dimension-reduction library
//! built on three kinds of point pairs (neighbor, mid-near, further), a
//! three-term pairwise loss, and a three-phase dynamically weighted Adam
//! optimization.
//!
//! The crate also ships the evaluation side of the method: leave-one-out KNN
//! accuracy and triplet-based global structure metrics, synthetic benchmark
//! generators (a three-level hierarchical Gaussian mixture and an
//! S-curve-with-hole manifold), and a numeric auditor that tests loss
//! functions against six principles of local-structure preservation.
//!
//! ## Quick start
//!
//! ```
//! use ndarray::Array2;
//! use pacmap::{fit, DataMatrix, FitConfig, ScheduleConfig};
//!
//! let points = Array2::from_shape_fn((64, 4), |(i, j)| ((i * 7 + j * 3) % 13) as f64);
//! let x = DataMatrix::new(points).unwrap();
//! let cfg = FitConfig {
//!     schedule: ScheduleConfig::new(1, 11, 21, 50).unwrap(),
//!     ..FitConfig::default()
//! };
//! let result = fit(&x, &cfg).unwrap();
//! assert_eq!(result.embedding.n(), 64);
//! assert_eq!(result.embedding.d_out(), 2);
//! ```

pub mod datagen;
pub mod error;
pub mod metrics;
pub mod objective;
pub mod optimizer;
pub mod pairset;
pub mod principles;

pub use error::{Error, Result, Warning};
pub use metrics::{
    centroid_triplet_accuracy, knn_accuracy, random_triplet_accuracy, LabeledDataset, MetricReport,
};
pub use objective::{
    dtilde, gradient, pair_force, pair_loss, total_loss, weight_schedule, Embedding, PairKind,
    PhaseWeights, ScheduleConfig,
};
pub use optimizer::{
    adam_step, fit, pca_init, random_init, AdamState, FitConfig, FitResult, Init,
};
pub use pairset::{
    build_pair_set, compute_sigmas, sample_further, sample_mid_near, scaled_distance,
    select_neighbors, DataMatrix, PairConfig, PairSet, ScaleVector,
};
pub use principles::{
    builtin_profile, builtin_surface, check_principles, check_prop1, rainbow_grid,
    surface_from_profile, write_rainbow_csv, AuditTolerances, GridSpec, PrincipleReport,
    ProfileSpec, Prop1Report, RainbowGrid, SeparableProfile, TripletLossSurface, Verdict,
};

/// Default KNN accuracy grid used when callers do not supply one.
pub const DEFAULT_K_SET: [usize; 6] = [1, 3, 5, 10, 15, 20];

/// Default triplets per anchor for the random triplet metric.
pub const DEFAULT_TRIPLETS_PER_POINT: usize = 5;

/// Default evaluation repeats for the random triplet metric.
pub const DEFAULT_METRIC_REPEATS: usize = 5;
