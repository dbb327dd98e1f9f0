//! Embedding initialization (PCA or random), the Adam update, and the
//! one-call fit pipeline over the three-phase weight schedule.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result, Warning};
use crate::objective::{loss_and_gradient, weight_schedule, Embedding, ScheduleConfig};
use crate::pairset::{build_pair_set, DataMatrix, PairConfig, PairSet};

/// Adam defaults. The paper leaves the optimizer hyperparameters open; these
/// match the 0.01 initialization scale and the acceptance targets.
pub const LEARNING_RATE: f64 = 1.0;
pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-7;

/// Scale applied to PCA coordinates so initial pairs start inside the active
/// force zone of the losses.
pub const PCA_INIT_SCALE: f64 = 0.01;

/// Standard deviation of random initialization, Normal(0, 1e-4).
pub const RANDOM_INIT_STD: f64 = 0.01;

/// Feature dimension above which PCA switches from the dense covariance
/// eigendecomposition to randomized subspace iteration.
const DENSE_EIGEN_MAX_P: usize = 1000;

/// Stream salt for initialization randomness.
const INIT_SALT: u64 = 0x696e_6974_5f73_616c;

/// First/second moment accumulators and hyperparameters for Adam.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Array2<f64>,
    v: Array2<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub lr: f64,
    pub eps: f64,
    pub step: usize,
}

impl AdamState {
    /// State for an `n x d_out` embedding with the default hyperparameters.
    pub fn new(n: usize, d_out: usize) -> Self {
        Self::with_params(n, d_out, LEARNING_RATE, BETA1, BETA2, ADAM_EPS)
            .expect("default Adam hyperparameters are valid")
    }

    /// State with explicit hyperparameters, validated against the invariants
    /// `0 <= beta < 1`, `lr > 0`, `eps > 0`.
    pub fn with_params(
        n: usize,
        d_out: usize,
        lr: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
    ) -> Result<Self> {
        if !(lr > 0.0 && eps > 0.0 && (0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2)) {
            return Err(Error::InvalidConfig(format!(
                "invalid Adam hyperparameters: lr={lr}, beta1={beta1}, beta2={beta2}, eps={eps}"
            )));
        }
        Ok(Self {
            m: Array2::zeros((n, d_out)),
            v: Array2::zeros((n, d_out)),
            beta1,
            beta2,
            lr,
            eps,
            step: 0,
        })
    }
}

/// One bias-corrected Adam update of `y` in place.
///
/// Fails on shape mismatch or a non-finite gradient entry.
pub fn adam_step(state: &mut AdamState, grad: &Array2<f64>, y: &mut Array2<f64>) -> Result<()> {
    if grad.dim() != y.dim() || grad.dim() != state.m.dim() {
        return Err(Error::InvalidConfig(format!(
            "adam shapes disagree: grad {:?}, y {:?}, state {:?}",
            grad.dim(),
            y.dim(),
            state.m.dim()
        )));
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteOptimization {
            what: "gradient",
            iteration: state.step + 1,
        });
    }
    state.step += 1;
    let bc1 = 1.0 - state.beta1.powi(state.step as i32);
    let bc2 = 1.0 - state.beta2.powi(state.step as i32);
    let (b1, b2, lr, eps) = (state.beta1, state.beta2, state.lr, state.eps);
    for ((m, v), (g, y)) in state
        .m
        .iter_mut()
        .zip(state.v.iter_mut())
        .zip(grad.iter().zip(y.iter_mut()))
    {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        *y -= lr * (*m / bc1) / ((*v / bc2).sqrt() + eps);
    }
    Ok(())
}

/// Top `d_out` principal directions of the centered data, with eigenvalues.
///
/// Dense covariance eigendecomposition for `p <= 1000`, randomized subspace
/// iteration above. Columns carry a deterministic sign convention (largest
/// absolute component positive).
fn top_components(
    centered: &Array2<f64>,
    d_out: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<f64>, Array2<f64>) {
    let p = centered.ncols();
    let take = d_out.min(p);
    let (mut eigvals, mut components) = if p <= DENSE_EIGEN_MAX_P {
        dense_top_components(centered, take)
    } else {
        randomized_top_components(centered, take, rng)
    };
    // Deterministic sign: largest-|.| entry of each component positive.
    for k in 0..components.ncols() {
        let mut col = components.column_mut(k);
        let lead = col
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map(|(i, _)| i)
            .unwrap_or(0);
        if col[lead] < 0.0 {
            col.mapv_inplace(|v| -v);
        }
    }
    // Pad with zero directions when p < d_out; those columns are noise-filled
    // by the caller.
    if take < d_out {
        let mut padded = Array2::zeros((p, d_out));
        padded.slice_mut(ndarray::s![.., ..take]).assign(&components);
        components = padded;
        eigvals.resize(d_out, 0.0);
    }
    (eigvals, components)
}

fn covariance(centered: &Array2<f64>) -> Array2<f64> {
    let n = centered.nrows();
    let denom = (n - 1).max(1) as f64;
    centered.t().dot(centered) / denom
}

fn dense_top_components(centered: &Array2<f64>, take: usize) -> (Vec<f64>, Array2<f64>) {
    let p = centered.ncols();
    let cov = covariance(centered);
    let m = nalgebra::DMatrix::from_fn(p, p, |r, c| cov[[r, c]]);
    let eig = nalgebra::SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let eigvals: Vec<f64> = order.iter().take(take).map(|&i| eig.eigenvalues[i]).collect();
    let mut components = Array2::zeros((p, take));
    for (k, &i) in order.iter().take(take).enumerate() {
        for r in 0..p {
            components[[r, k]] = eig.eigenvectors[(r, i)];
        }
    }
    (eigvals, components)
}

/// Randomized subspace iteration on the covariance operator, applied through
/// the centered data matrix so the `p x p` covariance is never formed.
fn randomized_top_components(
    centered: &Array2<f64>,
    take: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<f64>, Array2<f64>) {
    let (n, p) = centered.dim();
    let l = (take + 8).min(p);
    let denom = (n - 1).max(1) as f64;
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut q = nalgebra::DMatrix::from_fn(p, l, |_, _| normal.sample(rng));
    let x = nalgebra::DMatrix::from_fn(n, p, |r, c| centered[[r, c]]);

    for _ in 0..30 {
        let z = (x.transpose() * (&x * &q)) / denom;
        q = z.qr().q();
    }
    let cq = (x.transpose() * (&x * &q)) / denom;
    let t = q.transpose() * &cq;
    let t = (&t + t.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::new(t);
    let mut order: Vec<usize> = (0..l).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let rotated = q * &eig.eigenvectors;
    let eigvals: Vec<f64> = order.iter().take(take).map(|&i| eig.eigenvalues[i]).collect();
    let mut components = Array2::zeros((p, take));
    for (k, &i) in order.iter().take(take).enumerate() {
        for r in 0..p {
            components[[r, k]] = rotated[(r, i)];
        }
    }
    (eigvals, components)
}

/// PCA initialization: center columns, project onto the top `d_out` principal
/// components, scale by 0.01.
///
/// Components with (numerically) zero variance are replaced by Normal(0, 1e-4)
/// draws and a [`Warning::RankDeficientInit`] is emitted.
pub fn pca_init<R: Rng>(
    x: &DataMatrix,
    d_out: usize,
    rng: &mut R,
    warnings: &mut Vec<Warning>,
) -> Result<Embedding> {
    if d_out < 1 {
        return Err(Error::InvalidConfig("d_out must be >= 1".into()));
    }
    let mean: Array1<f64> = x.values().mean_axis(Axis(0)).expect("n >= 2");
    let centered = x.values() - &mean.insert_axis(Axis(0));

    // The component solver's internal randomness must stay deterministic for
    // a given caller rng.
    let mut comp_rng = ChaCha8Rng::seed_from_u64(rng.random());
    let (eigvals, components) = top_components(&centered, d_out, &mut comp_rng);

    let mut y = centered.dot(&components) * PCA_INIT_SCALE;

    let lead = eigvals.first().copied().unwrap_or(0.0).max(0.0);
    let rank_tol = lead * 1e-12;
    let deficient: Vec<usize> = (0..d_out).filter(|&k| eigvals[k] <= rank_tol).collect();
    if !deficient.is_empty() {
        warnings.push(Warning::RankDeficientInit {
            rank: d_out - deficient.len(),
            d_out,
        });
        let noise = Normal::new(0.0, RANDOM_INIT_STD).expect("valid normal");
        for k in deficient {
            for i in 0..y.nrows() {
                y[[i, k]] = noise.sample(rng);
            }
        }
    }
    Embedding::new(y)
}

/// Random initialization: i.i.d. Normal(0, 1e-4) per coordinate.
pub fn random_init<R: Rng>(n: usize, d_out: usize, rng: &mut R) -> Embedding {
    let normal = Normal::new(0.0, RANDOM_INIT_STD).expect("valid normal");
    let values = Array2::from_shape_fn((n, d_out), |_| normal.sample(rng));
    Embedding::new(values).expect("normal draws are finite")
}

/// Initialization procedure for the embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Init {
    #[default]
    Pca,
    Random,
}

/// Full fit configuration. Defaults: 10 neighbors, ratios (0.5, 2), schedule
/// (1, 101, 201) over 450 iterations, PCA init, 2 output dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub pairs: PairConfig,
    pub schedule: ScheduleConfig,
    pub init: Init,
    pub seed: u64,
    pub d_out: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            pairs: PairConfig::default(),
            schedule: ScheduleConfig::default(),
            init: Init::Pca,
            seed: 0,
            d_out: 2,
        }
    }
}

/// Output of [`fit`]: the embedding, the pair set it was optimized over, and
/// any warnings raised along the way.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub embedding: Embedding,
    pub pairs: PairSet,
    pub warnings: Vec<Warning>,
}

/// Runs the full pipeline: build the pair set once, initialize, then run
/// exactly `n_iterations` Adam steps with the scheduled weights.
pub fn fit(x: &DataMatrix, cfg: &FitConfig) -> Result<FitResult> {
    cfg.schedule.validate()?;
    if cfg.d_out < 1 {
        return Err(Error::InvalidConfig("d_out must be >= 1".into()));
    }
    let mut warnings = Vec::new();
    let pairs = build_pair_set(x, &cfg.pairs, cfg.seed, &mut warnings)?;

    let mut init_rng =
        ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ INIT_SALT);
    let mut y = match cfg.init {
        Init::Pca => pca_init(x, cfg.d_out, &mut init_rng, &mut warnings)?.into_values(),
        Init::Random => random_init(x.n(), cfg.d_out, &mut init_rng).into_values(),
    };

    let mut adam = AdamState::new(x.n(), cfg.d_out);
    for t in 1..=cfg.schedule.n_iterations {
        let w = weight_schedule(t, &cfg.schedule);
        let (loss, grad) = loss_and_gradient(&y, &pairs, &w);
        if !loss.is_finite() {
            return Err(Error::NonFiniteOptimization {
                what: "loss",
                iteration: t,
            });
        }
        adam_step(&mut adam, &grad, &mut y)?;
    }

    Ok(FitResult {
        embedding: Embedding::new(y)?,
        pairs,
        warnings,
    })
}
