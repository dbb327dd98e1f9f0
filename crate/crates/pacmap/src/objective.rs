//! The three pairwise loss terms, their analytic gradients with respect to
//! embedding coordinates, and the three-phase weight schedule.
//!
//! All losses act on the transformed distance `dt = ||y_a - y_b||^2 + 1`:
//!
//! - neighbor pairs:  `dt / (10 + dt)` (attractive)
//! - mid-near pairs:  `dt / (10000 + dt)` (weakly attractive)
//! - further pairs:   `1 / (1 + dt)` (repulsive)
//!
//! The denominators are fixed constants, not hyperparameters.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::pairset::PairSet;

/// Which of the three pair lists a loss term belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairKind {
    Neighbor,
    MidNear,
    Further,
}

/// Low-dimensional coordinates, one row per observation.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    values: Array2<f64>,
}

impl Embedding {
    /// Wraps a coordinate matrix, rejecting non-finite entries.
    pub fn new(values: Array2<f64>) -> Result<Self> {
        for ((row, col), v) in values.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::NonFinite { row, col });
            }
        }
        Ok(Self { values })
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn d_out(&self) -> usize {
        self.values.ncols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.values.row(i).to_slice().expect("row-major storage")
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }
}

/// The `(w_nb, w_mn, w_fp)` weight triple applied to the three loss sums.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseWeights {
    pub w_nb: f64,
    pub w_mn: f64,
    pub w_fp: f64,
}

/// Phase boundaries for the weight schedule.
///
/// Iterations are 1-based. Phase 1 covers `[tau1, tau2)`, phase 2 `[tau2,
/// tau3)`, phase 3 `[tau3, n_iterations]`, with `1 = tau1 <= tau2 <= tau3 <=
/// n_iterations`. Defaults are `(1, 101, 201)` with 450 iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScheduleConfig {
    pub tau1: usize,
    pub tau2: usize,
    pub tau3: usize,
    pub n_iterations: usize,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            tau1: 1,
            tau2: 101,
            tau3: 201,
            n_iterations: 450,
        }
    }
}

impl ScheduleConfig {
    /// Builds a schedule after checking the ordering invariant.
    pub fn new(tau1: usize, tau2: usize, tau3: usize, n_iterations: usize) -> Result<Self> {
        let cfg = Self {
            tau1,
            tau2,
            tau3,
            n_iterations,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.tau1 == 1 && self.tau1 <= self.tau2 && self.tau2 <= self.tau3 && self.tau3 <= self.n_iterations
        {
            Ok(())
        } else {
            Err(Error::InvalidSchedule {
                tau1: self.tau1,
                tau2: self.tau2,
                tau3: self.tau3,
                n_iterations: self.n_iterations,
            })
        }
    }
}

/// Transformed distance `||y_a - y_b||^2 + 1`.
pub fn dtilde(y_a: &[f64], y_b: &[f64]) -> f64 {
    crate::pairset::dist2(y_a, y_b) + 1.0
}

/// Loss of a single pair as a function of the transformed distance `dt >= 1`.
pub fn pair_loss(kind: PairKind, dt: f64) -> f64 {
    debug_assert!(dt >= 1.0, "transformed distance must be >= 1, got {dt}");
    match kind {
        PairKind::Neighbor => dt / (10.0 + dt),
        PairKind::MidNear => dt / (10_000.0 + dt),
        PairKind::Further => 1.0 / (1.0 + dt),
    }
}

/// Derivative of [`pair_loss`] with respect to the embedding distance `d`
/// (where `dt = d^2 + 1`): positive for attractive kinds, negative for the
/// repulsive kind, zero at `d = 0`.
pub fn pair_force(kind: PairKind, d: f64) -> f64 {
    let dt = d * d + 1.0;
    match kind {
        PairKind::Neighbor => 20.0 * d / ((10.0 + dt) * (10.0 + dt)),
        PairKind::MidNear => 20_000.0 * d / ((10_000.0 + dt) * (10_000.0 + dt)),
        PairKind::Further => -2.0 * d / ((1.0 + dt) * (1.0 + dt)),
    }
}

/// Weights for iteration `t` (1-based):
///
/// - phase 1: `w_nb = 2`, `w_mn` linear from 1000 down to 3, `w_fp = 1`;
/// - phase 2: `(3, 3, 1)`;
/// - phase 3: `(1, 0, 1)`.
///
/// # Panics
/// If `t` is outside `[1, n_iterations]` (contract violation).
pub fn weight_schedule(t: usize, cfg: &ScheduleConfig) -> PhaseWeights {
    assert!(
        t >= 1 && t <= cfg.n_iterations,
        "iteration {t} outside [1, {}]",
        cfg.n_iterations
    );
    if t < cfg.tau2 {
        let s = (t - 1) as f64 / (cfg.tau2 - 1) as f64;
        PhaseWeights {
            w_nb: 2.0,
            w_mn: 1000.0 * (1.0 - s) + 3.0 * s,
            w_fp: 1.0,
        }
    } else if t < cfg.tau3 {
        PhaseWeights {
            w_nb: 3.0,
            w_mn: 3.0,
            w_fp: 1.0,
        }
    } else {
        PhaseWeights {
            w_nb: 1.0,
            w_mn: 0.0,
            w_fp: 1.0,
        }
    }
}

/// Per-pair gradient coefficient: `pair_force(kind, d) / d`, which is finite
/// for all `d >= 0`. The gradient contribution to `y_a` is `w * coeff * (y_a
/// - y_b)`, so the `d = 0` case is the zero vector.
#[inline]
fn force_coeff(kind: PairKind, dt: f64) -> f64 {
    match kind {
        PairKind::Neighbor => 20.0 / ((10.0 + dt) * (10.0 + dt)),
        PairKind::MidNear => 20_000.0 / ((10_000.0 + dt) * (10_000.0 + dt)),
        PairKind::Further => -2.0 / ((1.0 + dt) * (1.0 + dt)),
    }
}

fn accumulate(
    kind: PairKind,
    pairs: &[(u32, u32)],
    w: f64,
    y: &Array2<f64>,
    mut grad: Option<&mut Array2<f64>>,
) -> f64 {
    let d_out = y.ncols();
    let ys = y.as_slice().expect("row-major storage");
    let mut loss = 0.0;
    let mut diff = [0.0_f64; 8];
    let diff = &mut diff[..d_out.min(8)];
    let mut diff_vec;
    let diff: &mut [f64] = if d_out <= 8 {
        diff
    } else {
        diff_vec = vec![0.0; d_out];
        &mut diff_vec
    };

    for &(a, b) in pairs {
        let (a, b) = (a as usize * d_out, b as usize * d_out);
        let mut d2 = 0.0;
        for (k, d) in diff.iter_mut().enumerate() {
            *d = ys[a + k] - ys[b + k];
            d2 += *d * *d;
        }
        let dt = d2 + 1.0;
        loss += pair_loss(kind, dt);
        if let Some(grad) = grad.as_deref_mut() {
            let c = w * force_coeff(kind, dt);
            let gs = grad.as_slice_mut().expect("row-major storage");
            for (k, d) in diff.iter().enumerate() {
                gs[a + k] += c * d;
                gs[b + k] -= c * d;
            }
        }
    }
    w * loss
}

/// Weighted total loss over all three pair lists.
pub fn total_loss(y: &Embedding, pairs: &PairSet, w: &PhaseWeights) -> f64 {
    let y = y.values();
    accumulate(PairKind::Neighbor, &pairs.nb, w.w_nb, y, None)
        + accumulate(PairKind::MidNear, &pairs.mn, w.w_mn, y, None)
        + accumulate(PairKind::Further, &pairs.fp, w.w_fp, y, None)
}

/// Analytic gradient of [`total_loss`] with respect to the embedding.
///
/// Both endpoints of every pair receive equal and opposite contributions;
/// accumulation order is fixed (nb, mn, fp; pairs in list order) so the result
/// is bit-reproducible.
pub fn gradient(y: &Embedding, pairs: &PairSet, w: &PhaseWeights) -> Array2<f64> {
    loss_and_gradient(y.values(), pairs, w).1
}

/// Fused loss + gradient evaluation used by the optimizer loop.
pub(crate) fn loss_and_gradient(
    y: &Array2<f64>,
    pairs: &PairSet,
    w: &PhaseWeights,
) -> (f64, Array2<f64>) {
    let mut grad = Array2::zeros(y.dim());
    let mut loss = 0.0;
    loss += accumulate(PairKind::Neighbor, &pairs.nb, w.w_nb, y, Some(&mut grad));
    loss += accumulate(PairKind::MidNear, &pairs.mn, w.w_mn, y, Some(&mut grad));
    loss += accumulate(PairKind::Further, &pairs.fp, w.w_fp, y, Some(&mut grad));
    (loss, grad)
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn dtilde_symmetric(a in prop::collection::vec(-100.0_f64..100.0, 2),
                            b in prop::collection::vec(-100.0_f64..100.0, 2)) {
            prop_assert_eq!(dtilde(&a, &b), dtilde(&b, &a));
        }

        #[test]
        fn dtilde_at_least_one(a in prop::collection::vec(-100.0_f64..100.0, 3),
                               b in prop::collection::vec(-100.0_f64..100.0, 3)) {
            prop_assert!(dtilde(&a, &b) >= 1.0);
        }

        #[test]
        fn schedule_weights_nonnegative(t in 1_usize..=450) {
            let w = weight_schedule(t, &ScheduleConfig::default());
            prop_assert!(w.w_nb >= 0.0 && w.w_mn >= 0.0 && w.w_fp >= 0.0);
            prop_assert!(w.w_mn <= 1000.0);
        }
    }
}
