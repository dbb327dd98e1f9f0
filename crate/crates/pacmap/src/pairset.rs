//! Pair-set construction: per-point distance scaling, two-stage nearest
//! neighbor selection, and seeded sampling of mid-near and further pairs.
//!
//! The optimization graph is built once, up front, from three lists of index
//! pairs:
//!
//! - neighbor pairs `(i, j)`: the `n_nb` nearest neighbors of `i` under the
//!   scaled distance, prefiltered by plain Euclidean distance;
//! - mid-near pairs `(i, k)`: `k` is the 2nd nearest of 6 uniformly sampled
//!   observations, repeated `n_mn` times per anchor;
//! - further pairs `(i, l)`: `n_fp` uniform draws from the non-neighbors of `i`.
//!
//! All sampling goes through per-anchor ChaCha substreams so that serial and
//! parallel construction produce byte-identical pair lists for a fixed seed.

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result, Warning};

/// Stream salts separating the independent sampling purposes of one seed.
const MN_SALT: u64 = 0x6d69_646e_6561_7231;
const FP_SALT: u64 = 0x6675_7274_6865_7232;

/// Dense matrix of high-dimensional observations, one row per observation.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: Array2<f64>,
}

impl DataMatrix {
    /// Wraps a matrix after checking the type invariants: at least 2 rows,
    /// at least 1 column, all entries finite.
    pub fn new(values: Array2<f64>) -> Result<Self> {
        let (n, p) = values.dim();
        if n < 2 || p < 1 {
            return Err(Error::EmptyMatrix {
                rows: n,
                cols: p,
                min_rows: 2,
                min_cols: 1,
            });
        }
        for ((row, col), v) in values.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::NonFinite { row, col });
            }
        }
        Ok(Self { values })
    }

    /// Number of observations.
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    /// Feature dimension.
    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    /// Row `i` as a contiguous slice.
    pub fn row(&self, i: usize) -> &[f64] {
        self.values
            .row(i)
            .to_slice()
            .expect("row-major storage")
    }

    /// The underlying matrix.
    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    /// Consumes the wrapper.
    pub fn into_values(self) -> Array2<f64> {
        self.values
    }
}

/// Per-point scale factors `sigma[i]`: the mean Euclidean distance from point
/// `i` to its 4th-6th nearest neighbors. Always strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleVector {
    sigma: Vec<f64>,
}

impl ScaleVector {
    /// Scale factor for point `i`.
    pub fn get(&self, i: usize) -> f64 {
        self.sigma[i]
    }

    /// All scale factors.
    pub fn as_slice(&self) -> &[f64] {
        &self.sigma
    }
}

/// The three pair lists that define the optimization graph, together with the
/// per-point counts they were built from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairSet {
    /// Neighbor pairs, `n_nb` per anchor, sorted by scaled distance.
    pub nb: Vec<(u32, u32)>,
    /// Mid-near pairs, `n_mn` per anchor, in draw order.
    pub mn: Vec<(u32, u32)>,
    /// Further pairs, `n_fp` per anchor, in draw order.
    pub fp: Vec<(u32, u32)>,
    /// Effective neighbor count per point (after clamping).
    pub n_nb: usize,
    /// Mid-near pairs per point.
    pub n_mn: usize,
    /// Further pairs per point.
    pub n_fp: usize,
}

impl PairSet {
    /// Checks the structural invariants: indices in range, no self pairs, and
    /// no further pair duplicating a neighbor pair of the same anchor.
    pub fn validate(&self, n: usize) -> Result<()> {
        let check = |pairs: &[(u32, u32)]| -> Result<()> {
            for &(i, j) in pairs {
                if i as usize >= n || j as usize >= n {
                    return Err(Error::InvalidConfig(format!(
                        "pair index out of range: ({i},{j}) with n={n}"
                    )));
                }
                if i == j {
                    return Err(Error::InvalidConfig(format!("self pair ({i},{j})")));
                }
            }
            Ok(())
        };
        check(&self.nb)?;
        check(&self.mn)?;
        check(&self.fp)?;
        for &(i, l) in &self.fp {
            if self.nb.contains(&(i, l)) {
                return Err(Error::InvalidConfig(format!(
                    "further pair ({i},{l}) duplicates a neighbor pair"
                )));
            }
        }
        Ok(())
    }
}

/// Pair-construction configuration. Defaults: 10 neighbors, mid-near ratio
/// 0.5, further ratio 2.
#[derive(Debug, Clone, PartialEq)]
pub struct PairConfig {
    pub n_nb: usize,
    pub mn_ratio: f64,
    pub fp_ratio: f64,
}

impl Default for PairConfig {
    fn default() -> Self {
        Self {
            n_nb: 10,
            mn_ratio: 0.5,
            fp_ratio: 2.0,
        }
    }
}

impl PairConfig {
    /// Mid-near pairs per point: `floor(n_nb * mn_ratio)`.
    pub fn n_mn(&self) -> usize {
        (self.n_nb as f64 * self.mn_ratio).floor() as usize
    }

    /// Further pairs per point: `floor(n_nb * fp_ratio)`.
    pub fn n_fp(&self) -> usize {
        (self.n_nb as f64 * self.fp_ratio).floor() as usize
    }

    fn validate(&self) -> Result<()> {
        if self.n_nb < 1 {
            return Err(Error::InvalidConfig("n_nb must be >= 1".into()));
        }
        if !(self.mn_ratio >= 0.0 && self.fp_ratio >= 0.0) {
            return Err(Error::InvalidConfig("pair ratios must be >= 0".into()));
        }
        Ok(())
    }
}

/// Squared Euclidean distance between two equal-length slices.
#[inline]
pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc
}

/// The `k` nearest neighbors of point `i` (self excluded) by Euclidean
/// distance, sorted ascending with ties broken by smaller index.
///
/// Returns `(distance, index)` tuples; `k` is clamped to `n - 1`.
fn k_nearest(x: &DataMatrix, i: usize, k: usize, buf: &mut Vec<(f64, u32)>) -> Vec<(f64, u32)> {
    let n = x.n();
    let k = k.min(n - 1);
    buf.clear();
    let xi = x.row(i);
    for j in 0..n {
        if j != i {
            buf.push((dist2(xi, x.row(j)), j as u32));
        }
    }
    let cmp = |a: &(f64, u32), b: &(f64, u32)| {
        a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1))
    };
    if k < buf.len() {
        buf.select_nth_unstable_by(k - 1, cmp);
        buf.truncate(k);
    }
    buf.sort_unstable_by(cmp);
    buf.iter().map(|&(d2, j)| (d2.sqrt(), j)).collect()
}

/// Per-point scale factors per the selection metric: `sigma[i]` is the mean
/// Euclidean distance from `x_i` to its 4th, 5th and 6th nearest neighbors.
///
/// With fewer than 7 observations the farthest three available neighbors are
/// averaged instead and a [`Warning::SigmaFallback`] is emitted. Zero sigmas
/// (exact duplicate points) are replaced by machine epsilon with a
/// [`Warning::ZeroSigmaReplaced`].
pub fn compute_sigmas(x: &DataMatrix, warnings: &mut Vec<Warning>) -> ScaleVector {
    let n = x.n();
    if n < 7 {
        warnings.push(Warning::SigmaFallback { n });
    }
    let sigma: Vec<f64> = (0..n)
        .into_par_iter()
        .map_init(Vec::new, |buf, i| {
            let nearest = k_nearest(x, i, 6, buf);
            let window: &[(f64, u32)] = if nearest.len() >= 6 {
                &nearest[3..6]
            } else {
                // Fallback: the farthest three (or all) available neighbors.
                let start = nearest.len().saturating_sub(3);
                &nearest[start..]
            };
            window.iter().map(|&(d, _)| d).sum::<f64>() / window.len() as f64
        })
        .collect();

    let mut zeroed = 0;
    let sigma: Vec<f64> = sigma
        .into_iter()
        .map(|s| {
            if s > 0.0 {
                s
            } else {
                zeroed += 1;
                f64::EPSILON
            }
        })
        .collect();
    if zeroed > 0 {
        warnings.push(Warning::ZeroSigmaReplaced { count: zeroed });
    }
    ScaleVector { sigma }
}

/// Scaled squared distance `||x_i - x_j||^2 / (sigma_i * sigma_j)` used for
/// neighbor selection only.
pub fn scaled_distance(x: &DataMatrix, s: &ScaleVector, i: usize, j: usize) -> f64 {
    debug_assert_ne!(i, j);
    dist2(x.row(i), x.row(j)) / (s.get(i) * s.get(j))
}

/// Selects the neighbor pairs: for each anchor, the `min(n_nb + 50, N - 1)`
/// Euclidean nearest candidates are rescored by [`scaled_distance`] and the
/// `n_nb` smallest kept, ties broken by smaller index.
///
/// Returns pairs `(i, j_t)` sorted by scaled distance per anchor. `n_nb >= N`
/// clamps to `N - 1` with a warning.
pub fn select_neighbors(
    x: &DataMatrix,
    s: &ScaleVector,
    n_nb: usize,
    warnings: &mut Vec<Warning>,
) -> Vec<(u32, u32)> {
    let n = x.n();
    let n_nb_eff = n_nb.min(n - 1);
    if n_nb_eff < n_nb {
        warnings.push(Warning::NeighborCountClamped {
            requested: n_nb,
            actual: n_nb_eff,
        });
    }
    let prefilter = (n_nb + 50).min(n - 1);

    let per_anchor: Vec<Vec<(u32, u32)>> = (0..n)
        .into_par_iter()
        .map_init(Vec::new, |buf, i| {
            let candidates = k_nearest(x, i, prefilter, buf);
            let mut scored: Vec<(f64, u32)> = candidates
                .iter()
                .map(|&(d, j)| (d * d / (s.get(i) * s.get(j as usize)), j))
                .collect();
            scored.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
            scored
                .iter()
                .take(n_nb_eff)
                .map(|&(_, j)| (i as u32, j))
                .collect()
        })
        .collect();

    per_anchor.into_iter().flatten().collect()
}

/// ChaCha substream for one anchor under one purpose salt. Independent of the
/// execution order of anchors, which keeps parallel and serial sampling
/// byte-identical.
fn anchor_rng(seed: u64, salt: u64, anchor: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ salt);
    rng.set_stream(anchor as u64);
    rng
}

/// Draws `count` distinct indices from `0..n` excluding `anchor`.
fn draw_distinct(rng: &mut ChaCha8Rng, n: usize, anchor: usize, count: usize, out: &mut Vec<u32>) {
    out.clear();
    while out.len() < count {
        let j = rng.random_range(0..n) as u32;
        if j as usize != anchor && !out.contains(&j) {
            out.push(j);
        }
    }
}

/// Samples the mid-near pairs: for each anchor and each of `n_mn` draws, six
/// distinct other observations are sampled uniformly and the 2nd nearest of
/// the six (by Euclidean distance, ties by index) is paired with the anchor.
///
/// With `N <= 6` every draw uses all other points instead, with a warning.
pub fn sample_mid_near(
    x: &DataMatrix,
    n_mn: usize,
    seed: u64,
    warnings: &mut Vec<Warning>,
) -> Vec<(u32, u32)> {
    let n = x.n();
    if n <= 6 {
        warnings.push(Warning::MidNearSmallPool { n });
    }
    let per_anchor: Vec<Vec<(u32, u32)>> = (0..n)
        .into_par_iter()
        .map_init(Vec::new, |cand: &mut Vec<u32>, i| {
            let mut rng = anchor_rng(seed, MN_SALT, i);
            let xi = x.row(i);
            (0..n_mn)
                .map(|_| {
                    if n - 1 <= 6 {
                        cand.clear();
                        cand.extend((0..n as u32).filter(|&j| j as usize != i));
                    } else {
                        draw_distinct(&mut rng, n, i, 6, cand);
                    }
                    let mut scored: Vec<(f64, u32)> = cand
                        .iter()
                        .map(|&j| (dist2(xi, x.row(j as usize)), j))
                        .collect();
                    scored
                        .sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
                    let pick = if scored.len() >= 2 { scored[1].1 } else { scored[0].1 };
                    (i as u32, pick)
                })
                .collect()
        })
        .collect();
    per_anchor.into_iter().flatten().collect()
}

/// Samples the further pairs: `n_fp` distinct uniform draws per anchor from
/// all points that are neither the anchor nor one of its neighbor partners.
///
/// Anchors with fewer eligible partners than `n_fp` take all of them (in
/// index order) and emit a warning.
pub fn sample_further(
    x: &DataMatrix,
    nb: &[(u32, u32)],
    n_fp: usize,
    seed: u64,
    warnings: &mut Vec<Warning>,
) -> Vec<(u32, u32)> {
    let n = x.n();

    // Neighbor partners per anchor, sorted for binary-search exclusion.
    let mut excluded: Vec<Vec<u32>> = vec![Vec::new(); n];
    for &(i, j) in nb {
        excluded[i as usize].push(j);
    }
    for (i, ex) in excluded.iter_mut().enumerate() {
        ex.push(i as u32);
        ex.sort_unstable();
    }

    let per_anchor: Vec<(Vec<(u32, u32)>, Option<Warning>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let ex = &excluded[i];
            let eligible = n - ex.len();
            if eligible < n_fp {
                let pairs = (0..n as u32)
                    .filter(|j| ex.binary_search(j).is_err())
                    .map(|j| (i as u32, j))
                    .collect();
                let warn = Warning::FurtherPoolExhausted {
                    anchor: i,
                    available: eligible,
                    requested: n_fp,
                };
                return (pairs, Some(warn));
            }
            let mut rng = anchor_rng(seed, FP_SALT, i);
            let mut chosen: Vec<u32> = Vec::with_capacity(n_fp);
            while chosen.len() < n_fp {
                let j = rng.random_range(0..n) as u32;
                if ex.binary_search(&j).is_err() && !chosen.contains(&j) {
                    chosen.push(j);
                }
            }
            (chosen.into_iter().map(|j| (i as u32, j)).collect(), None)
        })
        .collect();

    let mut pairs = Vec::new();
    for (mut chunk, warn) in per_anchor {
        pairs.append(&mut chunk);
        if let Some(w) = warn {
            warnings.push(w);
        }
    }
    pairs
}

/// Builds the full [`PairSet`]: sigmas, scaled-distance neighbor selection,
/// then mid-near and further sampling, with `n_mn = floor(n_nb * mn_ratio)`
/// and `n_fp = floor(n_nb * fp_ratio)`.
pub fn build_pair_set(
    x: &DataMatrix,
    cfg: &PairConfig,
    seed: u64,
    warnings: &mut Vec<Warning>,
) -> Result<PairSet> {
    cfg.validate()?;
    let sigmas = compute_sigmas(x, warnings);
    let nb = select_neighbors(x, &sigmas, cfg.n_nb, warnings);
    let n_mn = cfg.n_mn();
    let n_fp = cfg.n_fp();
    let mn = sample_mid_near(x, n_mn, seed, warnings);
    let fp = sample_further(x, &nb, n_fp, seed, warnings);
    Ok(PairSet {
        n_nb: cfg.n_nb.min(x.n() - 1),
        n_mn,
        n_fp,
        nb,
        mn,
        fp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;
    use rand::RngCore;

    fn matrix_from_rows(rows: &[Vec<f64>]) -> DataMatrix {
        let p = rows[0].len();
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        DataMatrix::new(Array2::from_shape_vec((rows.len(), p), flat).unwrap()).unwrap()
    }

    fn random_matrix(n: usize, p: usize, seed: u64) -> DataMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let flat: Vec<f64> = (0..n * p)
            .map(|_| rng.next_u64() as f64 / u64::MAX as f64)
            .collect();
        DataMatrix::new(Array2::from_shape_vec((n, p), flat).unwrap()).unwrap()
    }

    /// Oracle: sigma from a full sort of every pairwise distance row.
    fn sigma_oracle(x: &DataMatrix) -> Vec<f64> {
        let n = x.n();
        (0..n)
            .map(|i| {
                let mut d: Vec<f64> = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| dist2(x.row(i), x.row(j)).sqrt())
                    .collect();
                d.sort_by(f64::total_cmp);
                (d[3] + d[4] + d[5]) / 3.0
            })
            .collect()
    }

    #[test]
    fn data_matrix_rejects_bad_input() {
        assert!(DataMatrix::new(arr2(&[[1.0_f64]])).is_err());
        assert!(DataMatrix::new(arr2(&[[1.0], [f64::NAN]])).is_err());
        assert!(DataMatrix::new(arr2(&[[1.0], [2.0]])).is_ok());
    }

    #[test]
    fn sigma_collinear_points() {
        // 8 collinear points at 0..7: from the endpoint the sorted neighbor
        // distances are 1..7, so sigma = (4+5+6)/3 = 5.
        let rows: Vec<Vec<f64>> = (0..8).map(|v| vec![v as f64]).collect();
        let x = matrix_from_rows(&rows);
        let mut w = Vec::new();
        let s = compute_sigmas(&x, &mut w);
        assert_eq!(s.get(0), 5.0);
        assert!(w.is_empty());
    }

    #[test]
    fn sigma_matches_full_sort_oracle() {
        let x = random_matrix(20, 2, 7);
        let mut w = Vec::new();
        let s = compute_sigmas(&x, &mut w);
        assert_eq!(s.as_slice(), sigma_oracle(&x).as_slice());
    }

    #[test]
    fn sigma_duplicate_points_replaced_with_epsilon() {
        let rows = vec![vec![1.0, 2.0]; 9];
        let x = matrix_from_rows(&rows);
        let mut w = Vec::new();
        let s = compute_sigmas(&x, &mut w);
        assert!(s.as_slice().iter().all(|&v| v == f64::EPSILON && v > 0.0));
        assert!(w.contains(&Warning::ZeroSigmaReplaced { count: 9 }));
    }

    #[test]
    fn sigma_small_n_falls_back_with_warning() {
        let rows: Vec<Vec<f64>> = (0..5).map(|v| vec![v as f64]).collect();
        let x = matrix_from_rows(&rows);
        let mut w = Vec::new();
        let s = compute_sigmas(&x, &mut w);
        // Point 0 has neighbor distances 1,2,3,4: farthest three average 3.
        assert_eq!(s.get(0), 3.0);
        assert!(w.contains(&Warning::SigmaFallback { n: 5 }));
    }

    #[test]
    fn scaled_distance_hand_example() {
        // ||x_i - x_j||^2 = 16 with sigma_i = sigma_j = 2 gives 4.
        let x = matrix_from_rows(&[vec![0.0], vec![4.0]]);
        let s = ScaleVector {
            sigma: vec![2.0, 2.0],
        };
        assert_eq!(scaled_distance(&x, &s, 0, 1), 4.0);
    }

    #[test]
    fn scaled_distance_zero_for_equal_coordinates() {
        let x = matrix_from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0], vec![2.0, 2.0]]);
        let s = ScaleVector {
            sigma: vec![1.0, 1.0, 1.0],
        };
        assert_eq!(scaled_distance(&x, &s, 0, 1), 0.0);
    }

    #[test]
    fn uniform_sigma_preserves_euclidean_ranking() {
        let x = random_matrix(30, 3, 11);
        let s = ScaleVector {
            sigma: vec![3.7; 30],
        };
        for i in 0..5 {
            let mut by_scaled: Vec<usize> = (0..30).filter(|&j| j != i).collect();
            by_scaled.sort_by(|&a, &b| {
                scaled_distance(&x, &s, i, a).total_cmp(&scaled_distance(&x, &s, i, b))
            });
            let mut by_euclid: Vec<usize> = (0..30).filter(|&j| j != i).collect();
            by_euclid
                .sort_by(|&a, &b| dist2(x.row(i), x.row(a)).total_cmp(&dist2(x.row(i), x.row(b))));
            assert_eq!(by_scaled, by_euclid);
        }
    }

    #[test]
    fn neighbors_with_uniform_sigma_equal_plain_knn() {
        let x = random_matrix(40, 2, 3);
        let s = ScaleVector {
            sigma: vec![1.0; 40],
        };
        let mut w = Vec::new();
        let nb = select_neighbors(&x, &s, 5, &mut w);
        for i in 0..40 {
            let got: Vec<u32> = nb
                .iter()
                .filter(|&&(a, _)| a == i as u32)
                .map(|&(_, j)| j)
                .collect();
            let mut buf = Vec::new();
            let expect: Vec<u32> = k_nearest(&x, i, 5, &mut buf).iter().map(|&(_, j)| j).collect();
            assert_eq!(got, expect, "anchor {i}");
        }
    }

    /// Oracle that scores all N-1 candidates by the scaled distance.
    fn neighbor_oracle(x: &DataMatrix, s: &ScaleVector, i: usize, n_nb: usize) -> Vec<u32> {
        let mut scored: Vec<(f64, u32)> = (0..x.n())
            .filter(|&j| j != i)
            .map(|j| (scaled_distance(x, s, i, j), j as u32))
            .collect();
        scored.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        scored.iter().take(n_nb).map(|&(_, j)| j).collect()
    }

    #[test]
    fn scaled_selection_differs_from_euclidean_and_matches_oracle() {
        // A dense cluster (tiny sigma) plus sparse far points (large sigma):
        // from the anchor at 10, the cluster is Euclidean-nearest but the
        // sparse points win under the scaled distance.
        let mut rows: Vec<Vec<f64>> = (0..7).map(|v| vec![v as f64 * 0.1]).collect();
        rows.extend([vec![10.0], vec![30.0], vec![70.0]]);
        let x = matrix_from_rows(&rows);
        let mut w = Vec::new();
        let s = compute_sigmas(&x, &mut w);
        let anchor = 7; // the point at 10
        let euclid_ranking: Vec<u32> = {
            let mut buf = Vec::new();
            k_nearest(&x, anchor, 3, &mut buf).iter().map(|&(_, j)| j).collect()
        };
        let scaled_ranking = neighbor_oracle(&x, &s, anchor, 3);
        assert_ne!(euclid_ranking, scaled_ranking);
        // The sparse points at 30 and 70 outrank every cluster point.
        assert_eq!(&scaled_ranking[..2], &[8, 9]);

        let nb = select_neighbors(&x, &s, 3, &mut w);
        let got: Vec<u32> = nb
            .iter()
            .filter(|&&(a, _)| a == anchor as u32)
            .map(|&(_, j)| j)
            .collect();
        assert_eq!(got, scaled_ranking);
    }

    #[test]
    fn neighbor_selection_matches_exhaustive_oracle() {
        let x = random_matrix(120, 4, 5);
        let mut w = Vec::new();
        let s = compute_sigmas(&x, &mut w);
        let nb = select_neighbors(&x, &s, 10, &mut w);
        for i in 0..x.n() {
            let got: Vec<u32> = nb
                .iter()
                .filter(|&&(a, _)| a == i as u32)
                .map(|&(_, j)| j)
                .collect();
            assert_eq!(got, neighbor_oracle(&x, &s, i, 10), "anchor {i}");
        }
    }

    #[test]
    fn neighbor_count_clamps_with_warning() {
        let x = random_matrix(5, 2, 1);
        let s = ScaleVector { sigma: vec![1.0; 5] };
        let mut w = Vec::new();
        let nb = select_neighbors(&x, &s, 10, &mut w);
        assert_eq!(nb.len(), 5 * 4);
        assert!(w.contains(&Warning::NeighborCountClamped {
            requested: 10,
            actual: 4
        }));
    }

    #[test]
    fn mid_near_picks_second_order_statistic() {
        // Anchor at 0 with six candidates at distances {3, 1, 4, 1.5, 9, 2.6}:
        // the candidate at distance 1.5 must be chosen.
        let x = matrix_from_rows(&[
            vec![0.0],
            vec![3.0],
            vec![1.0],
            vec![4.0],
            vec![1.5],
            vec![9.0],
            vec![2.6],
        ]);
        let mut w = Vec::new();
        // N = 7 means each draw samples 6 of 6 candidates.
        let mn = sample_mid_near(&x, 3, 99, &mut w);
        for &(i, k) in mn.iter().filter(|&&(i, _)| i == 0) {
            assert_eq!((i, k), (0, 4));
        }
    }

    #[test]
    fn mid_near_is_deterministic_for_fixed_seed() {
        let x = random_matrix(50, 3, 2);
        let mut w = Vec::new();
        let a = sample_mid_near(&x, 5, 1234, &mut w);
        let b = sample_mid_near(&x, 5, 1234, &mut w);
        let c = sample_mid_near(&x, 5, 4321, &mut w);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn mid_near_rank_matches_order_statistic_oracle() {
        // Empirical mean rank of the chosen partner vs a Monte-Carlo oracle
        // of the 2nd-of-6 order statistic, within 2% of the rank scale.
        let n = 100;
        let x = random_matrix(n, 2, 8);
        let draws = 10_000;
        let n_mn_per_anchor = draws / n;
        let mut w = Vec::new();
        let mn = sample_mid_near(&x, n_mn_per_anchor, 77, &mut w);

        // Rank of each chosen partner among all N-1 by distance (0-based).
        let rank_of = |i: usize, k: usize| -> f64 {
            let dk = dist2(x.row(i), x.row(k));
            (0..n)
                .filter(|&j| j != i && dist2(x.row(i), x.row(j)) < dk)
                .count() as f64
        };
        let mean_rank: f64 =
            mn.iter().map(|&(i, k)| rank_of(i as usize, k as usize)).sum::<f64>() / mn.len() as f64;

        // Oracle: sample 6 distinct ranks out of 0..n-1, keep the 2nd smallest.
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut acc = 0.0;
        let oracle_draws = 200_000;
        let mut cand = Vec::new();
        for _ in 0..oracle_draws {
            cand.clear();
            while cand.len() < 6 {
                let r = rng.random_range(0..n as u32 - 1);
                if !cand.contains(&r) {
                    cand.push(r);
                }
            }
            cand.sort_unstable();
            acc += cand[1] as f64;
        }
        let oracle_mean = acc / oracle_draws as f64;

        let scale = (n - 1) as f64;
        assert!(mean_rank < scale / 2.0, "mid-near ranks should sit below the median");
        assert!(
            (mean_rank - oracle_mean).abs() < 0.02 * scale,
            "mean rank {mean_rank} vs oracle {oracle_mean}"
        );
    }

    #[test]
    fn further_pairs_forced_when_pool_small() {
        // N = 5 with 2 neighbors per anchor: the two non-neighbors are forced.
        let x = random_matrix(5, 2, 13);
        let s = ScaleVector { sigma: vec![1.0; 5] };
        let mut w = Vec::new();
        let nb = select_neighbors(&x, &s, 2, &mut w);
        let fp = sample_further(&x, &nb, 2, 0, &mut w);
        for i in 0..5u32 {
            let nbs: Vec<u32> = nb.iter().filter(|&&(a, _)| a == i).map(|&(_, j)| j).collect();
            let fps: Vec<u32> = fp.iter().filter(|&&(a, _)| a == i).map(|&(_, j)| j).collect();
            assert_eq!(fps.len(), 2);
            for j in fps {
                assert!(!nbs.contains(&j) && j != i);
            }
        }
    }

    #[test]
    fn further_pairs_never_collide_with_neighbors() {
        for seed in 0..100 {
            let x = random_matrix(30, 2, 17);
            let mut w = Vec::new();
            let s = compute_sigmas(&x, &mut w);
            let nb = select_neighbors(&x, &s, 4, &mut w);
            let fp = sample_further(&x, &nb, 8, seed, &mut w);
            for &(i, l) in &fp {
                assert_ne!(i, l);
                assert!(!nb.contains(&(i, l)), "seed {seed}: fp ({i},{l}) is a neighbor pair");
            }
        }
    }

    #[test]
    fn further_sampling_is_uniform_over_eligible() {
        // 50,000 single-pair draws from one anchor over N = 200; every
        // eligible partner's frequency must sit within 3 sigma of uniform.
        let n = 200;
        let x = random_matrix(n, 3, 21);
        let mut w = Vec::new();
        let s = compute_sigmas(&x, &mut w);
        let nb = select_neighbors(&x, &s, 10, &mut w);
        let anchor_nbs: Vec<u32> = nb.iter().filter(|&&(a, _)| a == 0).map(|&(_, j)| j).collect();
        let eligible = n - 1 - anchor_nbs.len();

        let draws = 50_000;
        let mut counts = vec![0u32; n];
        for seed in 0..draws {
            let fp = sample_further(&x, &nb, 1, 1000 + seed as u64, &mut Vec::new());
            let (_, j) = fp.iter().find(|&&(a, _)| a == 0).copied().unwrap();
            counts[j as usize] += 1;
        }
        let p = 1.0 / eligible as f64;
        let expect = draws as f64 * p;
        let sd = (draws as f64 * p * (1.0 - p)).sqrt();
        for j in 0..n as u32 {
            if j == 0 || anchor_nbs.contains(&j) {
                assert_eq!(counts[j as usize], 0);
            } else {
                let z = (counts[j as usize] as f64 - expect) / sd;
                assert!(z.abs() <= 3.0, "partner {j}: count {} z {z}", counts[j as usize]);
            }
        }
    }

    #[test]
    fn build_pair_set_default_counts() {
        let x = random_matrix(80, 3, 4);
        let mut w = Vec::new();
        let ps = build_pair_set(&x, &PairConfig::default(), 0, &mut w).unwrap();
        assert_eq!((ps.n_nb, ps.n_mn, ps.n_fp), (10, 5, 20));
        assert_eq!(ps.nb.len(), 80 * 10);
        assert_eq!(ps.mn.len(), 80 * 5);
        assert_eq!(ps.fp.len(), 80 * 20);
        ps.validate(80).unwrap();
    }

    #[test]
    fn build_pair_set_floor_arithmetic() {
        let x = random_matrix(60, 2, 9);
        let cfg = PairConfig {
            n_nb: 4,
            mn_ratio: 0.6,
            fp_ratio: 1.3,
        };
        let ps = build_pair_set(&x, &cfg, 0, &mut Vec::new()).unwrap();
        assert_eq!((ps.n_nb, ps.n_mn, ps.n_fp), (4, 2, 5));
    }

    #[test]
    fn build_pair_set_zero_mn_ratio() {
        let x = random_matrix(30, 2, 10);
        let cfg = PairConfig {
            mn_ratio: 0.0,
            ..PairConfig::default()
        };
        let ps = build_pair_set(&x, &cfg, 0, &mut Vec::new()).unwrap();
        assert!(ps.mn.is_empty());
    }

    #[test]
    fn pair_set_is_pure_function_of_inputs() {
        let x = random_matrix(70, 4, 6);
        let mut w = Vec::new();
        let a = build_pair_set(&x, &PairConfig::default(), 42, &mut w).unwrap();
        let b = build_pair_set(&x, &PairConfig::default(), 42, &mut w).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn pair_set_identical_across_thread_counts() {
        let x = random_matrix(64, 3, 14);
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| build_pair_set(&x, &PairConfig::default(), 5, &mut Vec::new()).unwrap())
        };
        assert_eq!(run(1), run(4));
    }
}
