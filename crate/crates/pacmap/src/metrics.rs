//! Embedding quality metrics: leave-one-out KNN accuracy (local structure),
//! random triplet accuracy and centroid triplet accuracy (global structure).
//!
//! A triplet `(i; j, k)` is preserved when the distance order of `j` and `k`
//! from the anchor `i` agrees between the two spaces. Exact ties in both
//! spaces count as preserved; a tie in only one space counts as violated.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result, Warning};
use crate::objective::Embedding;
use crate::pairset::{dist2, DataMatrix};

const RT_SALT: u64 = 0x7472_6970_6c65_7473;

/// Observations with optional integer class labels (labels are used only for
/// evaluation, never during fitting).
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    pub x: DataMatrix,
    pub labels: Option<Vec<i64>>,
}

/// One metric outcome: mean and standard deviation over evaluation repeats
/// plus the settings that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub name: String,
    pub mean: f64,
    pub std: f64,
    pub params: Vec<(String, String)>,
}

fn preserved(dx_j: f64, dx_k: f64, dy_j: f64, dy_k: f64) -> bool {
    let a = dx_j - dx_k;
    let b = dy_j - dy_k;
    if a == 0.0 && b == 0.0 {
        true
    } else {
        a != 0.0 && b != 0.0 && (a > 0.0) == (b > 0.0)
    }
}

/// Leave-one-out KNN classification accuracy over the embedding, reporting
/// the best accuracy across `k_set` and the `k` achieving it.
///
/// Vote ties are broken by the nearest neighbor whose label is among the tied
/// classes; distance ties are broken by smaller index. A single-class label
/// vector yields accuracy 1 with a warning.
pub fn knn_accuracy(
    y: &Embedding,
    labels: &[i64],
    k_set: &[usize],
    warnings: &mut Vec<Warning>,
) -> Result<MetricReport> {
    let n = y.n();
    if labels.len() != n {
        return Err(Error::RowMismatch {
            left: n,
            right: labels.len(),
        });
    }
    if k_set.is_empty() {
        return Err(Error::InvalidConfig("k_set must be non-empty".into()));
    }
    for &k in k_set {
        if k < 1 || k >= n {
            return Err(Error::InvalidConfig(format!(
                "each k must satisfy 1 <= k < N, got k={k}, N={n}"
            )));
        }
    }
    let mut classes: Vec<i64> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        warnings.push(Warning::SingleClass);
        return Ok(MetricReport {
            name: "knn_accuracy".into(),
            mean: 1.0,
            std: 0.0,
            params: vec![("k".into(), k_set[0].to_string())],
        });
    }

    let max_k = *k_set.iter().max().expect("non-empty");
    // Per point: labels of the max_k nearest neighbors, nearest first.
    let neighbor_labels: Vec<Vec<i64>> = (0..n)
        .into_par_iter()
        .map_init(Vec::new, |buf: &mut Vec<(f64, u32)>, i| {
            buf.clear();
            let yi = y.row(i);
            for j in 0..n {
                if j != i {
                    buf.push((dist2(yi, y.row(j)), j as u32));
                }
            }
            let cmp =
                |a: &(f64, u32), b: &(f64, u32)| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1));
            if max_k < buf.len() {
                buf.select_nth_unstable_by(max_k - 1, cmp);
                buf.truncate(max_k);
            }
            buf.sort_unstable_by(cmp);
            buf.iter().map(|&(_, j)| labels[j as usize]).collect()
        })
        .collect();

    let accuracy_for_k = |k: usize| -> f64 {
        let correct: usize = (0..n)
            .filter(|&i| {
                let neigh = &neighbor_labels[i][..k];
                let mut counts: Vec<(i64, usize)> = Vec::new();
                for &l in neigh {
                    match counts.iter_mut().find(|(c, _)| *c == l) {
                        Some((_, cnt)) => *cnt += 1,
                        None => counts.push((l, 1)),
                    }
                }
                let top = counts.iter().map(|&(_, c)| c).max().expect("k >= 1");
                let tied: Vec<i64> = counts
                    .iter()
                    .filter(|&&(_, c)| c == top)
                    .map(|&(l, _)| l)
                    .collect();
                let predicted = if tied.len() == 1 {
                    tied[0]
                } else {
                    *neigh.iter().find(|l| tied.contains(l)).expect("tied label present")
                };
                predicted == labels[i]
            })
            .count();
        correct as f64 / n as f64
    };

    let (best_k, best_acc) = k_set
        .iter()
        .map(|&k| (k, accuracy_for_k(k)))
        .max_by(|a, b| a.1.total_cmp(&b.1).then_with(|| b.0.cmp(&a.0)))
        .expect("non-empty k_set");

    Ok(MetricReport {
        name: "knn_accuracy".into(),
        mean: best_acc,
        std: 0.0,
        params: vec![
            ("k".into(), best_k.to_string()),
            (
                "k_set".into(),
                k_set.iter().map(|k| k.to_string()).collect::<Vec<_>>().join("/"),
            ),
        ],
    })
}

/// Random triplet accuracy: for every anchor, `per_point` unordered partner
/// pairs are sampled per repeat and the fraction of order-preserving triplets
/// reported as mean and std over `repeats` evaluations.
pub fn random_triplet_accuracy(
    x: &DataMatrix,
    y: &Embedding,
    per_point: usize,
    repeats: usize,
    seed: u64,
) -> Result<MetricReport> {
    let n = x.n();
    if y.n() != n {
        return Err(Error::RowMismatch { left: n, right: y.n() });
    }
    if n < 3 {
        return Err(Error::TooFewObservations { min: 3, got: n });
    }
    if per_point == 0 || repeats == 0 {
        return Err(Error::InvalidConfig("per_point and repeats must be >= 1".into()));
    }

    let accuracies: Vec<f64> = (0..repeats)
        .map(|rep| {
            let preserved_count: usize = (0..n)
                .into_par_iter()
                .map(|i| {
                    let mut rng = anchor_stream(seed, rep, i);
                    let xi = x.row(i);
                    let yi = y.row(i);
                    (0..per_point)
                        .filter(|_| {
                            let j = draw_other(&mut rng, n, &[i]);
                            let k = draw_other(&mut rng, n, &[i, j]);
                            preserved(
                                dist2(xi, x.row(j)),
                                dist2(xi, x.row(k)),
                                dist2(yi, y.row(j)),
                                dist2(yi, y.row(k)),
                            )
                        })
                        .count()
                })
                .sum();
            preserved_count as f64 / (n * per_point) as f64
        })
        .collect();

    let (mean, std) = mean_std(&accuracies);
    Ok(MetricReport {
        name: "random_triplet_accuracy".into(),
        mean,
        std,
        params: vec![
            ("per_point".into(), per_point.to_string()),
            ("repeats".into(), repeats.to_string()),
            ("seed".into(), seed.to_string()),
        ],
    })
}

/// Centroid triplet accuracy: distance-order preservation over all anchored
/// triplets of per-class centroids. Deterministic; needs at least 3 classes.
pub fn centroid_triplet_accuracy(
    x: &DataMatrix,
    y: &Embedding,
    labels: &[i64],
) -> Result<MetricReport> {
    let n = x.n();
    if y.n() != n || labels.len() != n {
        return Err(Error::RowMismatch {
            left: n,
            right: y.n().min(labels.len()),
        });
    }
    let mut classes: Vec<i64> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let m = classes.len();
    if m < 3 {
        return Err(Error::TooFewClasses {
            metric: "centroid_triplet_accuracy",
            min_classes: 3,
            got: m,
        });
    }

    let cx = class_centroids(x.values(), labels, &classes);
    let cy = class_centroids(y.values(), labels, &classes);

    let mut total = 0usize;
    let mut kept = 0usize;
    for a in 0..m {
        for b in 0..m {
            for c in (b + 1)..m {
                if a == b || a == c {
                    continue;
                }
                total += 1;
                if preserved(
                    dist2(&cx[a], &cx[b]),
                    dist2(&cx[a], &cx[c]),
                    dist2(&cy[a], &cy[b]),
                    dist2(&cy[a], &cy[c]),
                ) {
                    kept += 1;
                }
            }
        }
    }
    debug_assert_eq!(total, m * (m - 1) * (m - 2) / 2);

    Ok(MetricReport {
        name: "centroid_triplet_accuracy".into(),
        mean: kept as f64 / total as f64,
        std: 0.0,
        params: vec![("classes".into(), m.to_string())],
    })
}

fn class_centroids(values: &ndarray::Array2<f64>, labels: &[i64], classes: &[i64]) -> Vec<Vec<f64>> {
    let p = values.ncols();
    let mut sums = vec![vec![0.0; p]; classes.len()];
    let mut counts = vec![0usize; classes.len()];
    for (row, &label) in values.rows().into_iter().zip(labels) {
        let c = classes.binary_search(&label).expect("label in class list");
        counts[c] += 1;
        for (s, v) in sums[c].iter_mut().zip(row.iter()) {
            *s += v;
        }
    }
    for (sum, &count) in sums.iter_mut().zip(&counts) {
        for s in sum.iter_mut() {
            *s /= count as f64;
        }
    }
    sums
}

fn anchor_stream(seed: u64, repeat: usize, anchor: usize) -> ChaCha8Rng {
    let key = seed
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(repeat as u64)
        ^ RT_SALT;
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(anchor as u64);
    rng
}

fn draw_other(rng: &mut ChaCha8Rng, n: usize, exclude: &[usize]) -> usize {
    loop {
        let j = rng.random_range(0..n);
        if !exclude.contains(&j) {
            return j;
        }
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}
