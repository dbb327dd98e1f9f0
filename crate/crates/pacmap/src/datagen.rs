//! Synthetic benchmark generators and dense numeric CSV I/O.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::metrics::LabeledDataset;
use crate::pairset::DataMatrix;

/// Parameters of the three-level hierarchical Gaussian benchmark: macro
/// centers, meso centers around them, micro centers around those, and
/// observations around the micro centers, with strictly decreasing isotropic
/// variances at each level.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchicalSpec {
    pub dims: usize,
    /// (macro, meso-per-macro, micro-per-meso) branching factors.
    pub branching: (usize, usize, usize),
    pub points_per_micro: usize,
    /// Isotropic covariance multipliers for the four levels.
    pub variances: [f64; 4],
}

impl Default for HierarchicalSpec {
    fn default() -> Self {
        Self {
            dims: 50,
            branching: (5, 5, 5),
            points_per_micro: 500,
            variances: [10_000.0, 1_000.0, 100.0, 10.0],
        }
    }
}

impl HierarchicalSpec {
    fn validate(&self) -> Result<()> {
        let (a, b, c) = self.branching;
        if self.dims < 1 || a < 1 || b < 1 || c < 1 || self.points_per_micro < 1 {
            return Err(Error::InvalidConfig("hierarchical spec dimensions must be >= 1".into()));
        }
        let v = &self.variances;
        if !(v[0] > v[1] && v[1] > v[2] && v[2] > v[3] && v[3] > 0.0) {
            return Err(Error::InvalidConfig(
                "hierarchical variances must be positive and strictly decreasing".into(),
            ));
        }
        Ok(())
    }

    /// Total number of micro clusters.
    pub fn micro_clusters(&self) -> usize {
        self.branching.0 * self.branching.1 * self.branching.2
    }

    /// Total number of observations.
    pub fn total_points(&self) -> usize {
        self.micro_clusters() * self.points_per_micro
    }
}

/// Hierarchical sample together with the ground-truth micro centers.
#[derive(Debug, Clone)]
pub struct HierarchicalSample {
    pub dataset: LabeledDataset,
    /// Micro-cluster centers, row `c` for label `c`.
    pub micro_centers: Array2<f64>,
}

/// Generates the hierarchical benchmark, labelling each observation with its
/// micro-cluster id `(macro * b_meso + meso) * b_micro + micro`.
pub fn gen_hierarchical<R: Rng>(spec: &HierarchicalSpec, rng: &mut R) -> Result<LabeledDataset> {
    Ok(gen_hierarchical_detailed(spec, rng)?.dataset)
}

/// [`gen_hierarchical`] variant that also returns the micro centers.
pub fn gen_hierarchical_detailed<R: Rng>(
    spec: &HierarchicalSpec,
    rng: &mut R,
) -> Result<HierarchicalSample> {
    spec.validate()?;
    let dims = spec.dims;
    let (b_macro, b_meso, b_micro) = spec.branching;
    let stds: Vec<f64> = spec.variances.iter().map(|v| v.sqrt()).collect();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");

    let center_around = |center: &[f64], std: f64, rng: &mut R| -> Vec<f64> {
        center.iter().map(|c| c + std * normal.sample(rng)).collect()
    };

    let origin = vec![0.0; dims];
    let macros: Vec<Vec<f64>> = (0..b_macro)
        .map(|_| center_around(&origin, stds[0], rng))
        .collect();
    let mesos: Vec<Vec<f64>> = macros
        .iter()
        .flat_map(|m| (0..b_meso).map(|_| center_around(m, stds[1], rng)).collect::<Vec<_>>())
        .collect();
    let micros: Vec<Vec<f64>> = mesos
        .iter()
        .flat_map(|m| (0..b_micro).map(|_| center_around(m, stds[2], rng)).collect::<Vec<_>>())
        .collect();

    let n = spec.total_points();
    let mut values = Vec::with_capacity(n * dims);
    let mut labels = Vec::with_capacity(n);
    for (cluster, center) in micros.iter().enumerate() {
        for _ in 0..spec.points_per_micro {
            values.extend(center_around(center, stds[3], rng));
            labels.push(cluster as i64);
        }
    }

    let micro_centers =
        Array2::from_shape_vec((micros.len(), dims), micros.into_iter().flatten().collect())
            .expect("center shape");
    Ok(HierarchicalSample {
        dataset: LabeledDataset {
            x: DataMatrix::new(Array2::from_shape_vec((n, dims), values).expect("data shape"))?,
            labels: Some(labels),
        },
        micro_centers,
    })
}

/// Default radius of the hole cut out of the S-curve sheet.
pub const S_CURVE_HOLE_RADIUS: f64 = 0.6;

/// Geodesic anchor of the hole: the sheet point at `t = pi/4`, center height.
pub fn s_curve_hole_anchor() -> [f64; 3] {
    let t = std::f64::consts::FRAC_PI_4;
    [t.sin(), 1.0, t.signum() * (t.cos() - 1.0)]
}

/// Samples `n` points from the 3-D S-curve
/// `(sin t, u, sign(t) * (cos t - 1))` with `t ~ U(-3pi/2, 3pi/2)` and
/// `u ~ U(0, 2)`, rejecting points within `hole_radius` of the fixed anchor.
///
/// Fails if the acceptance rate is so low that the retry budget is exhausted
/// (a hole covering the whole sheet).
pub fn gen_s_curve_with_hole<R: Rng>(
    n: usize,
    hole_radius: f64,
    rng: &mut R,
) -> Result<DataMatrix> {
    if n < 2 {
        return Err(Error::TooFewObservations { min: 2, got: n });
    }
    if !(hole_radius >= 0.0) {
        return Err(Error::InvalidConfig("hole radius must be >= 0".into()));
    }
    let anchor = s_curve_hole_anchor();
    let t_range = 1.5 * std::f64::consts::PI;
    let max_attempts = 1000 * n + 100_000;

    let mut values = Vec::with_capacity(n * 3);
    let mut accepted = 0;
    let mut attempts = 0;
    while accepted < n {
        attempts += 1;
        if attempts > max_attempts {
            return Err(Error::RejectionExhausted {
                attempts,
                accepted,
                requested: n,
            });
        }
        let t: f64 = rng.random_range(-t_range..t_range);
        let u: f64 = rng.random_range(0.0..2.0);
        let p = [t.sin(), u, t.signum() * (t.cos() - 1.0)];
        let d2: f64 = p.iter().zip(&anchor).map(|(a, b)| (a - b) * (a - b)).sum();
        if d2 < hole_radius * hole_radius {
            continue;
        }
        values.extend_from_slice(&p);
        accepted += 1;
    }
    DataMatrix::new(Array2::from_shape_vec((n, 3), values).expect("shape"))
}

/// CSV layout options.
#[derive(Debug, Clone, Copy, Default)]
pub struct CsvOptions {
    /// Skip one header line on load.
    pub header: bool,
    /// Treat the final column as an integer class label.
    pub label_col_last: bool,
}

/// Loads a dense numeric CSV. Row numbers in errors are 1-based over data
/// rows (the header, when present, is not counted).
pub fn load_csv<P: AsRef<Path>>(path: P, opts: &CsvOptions) -> Result<LabeledDataset> {
    let display = path.as_ref().display().to_string();
    let file = std::fs::File::open(path.as_ref())?;
    let reader = BufReader::new(file);

    let mut width = 0usize;
    let mut values: Vec<f64> = Vec::new();
    let mut labels: Vec<i64> = Vec::new();
    let mut row = 0usize;

    for (line_idx, line) in reader.lines().enumerate() {
        let line = line?;
        if opts.header && line_idx == 0 {
            continue;
        }
        if line.is_empty() {
            continue;
        }
        row += 1;
        let fields: Vec<&str> = line.split(',').collect();
        if width == 0 {
            width = fields.len();
            if opts.label_col_last && width < 2 {
                return Err(Error::InvalidConfig(
                    "label column requested but rows have a single field".into(),
                ));
            }
        } else if fields.len() != width {
            return Err(Error::CsvRagged {
                path: display,
                row,
                expected: width,
                got: fields.len(),
            });
        }
        let feature_cols = if opts.label_col_last { width - 1 } else { width };
        for (col, field) in fields.iter().enumerate() {
            let trimmed = field.trim();
            if col < feature_cols {
                let v: f64 = trimmed.parse().map_err(|e| Error::CsvParse {
                    path: display.clone(),
                    row,
                    col: col + 1,
                    msg: format!("{e}"),
                })?;
                values.push(v);
            } else {
                let l: i64 = trimmed.parse().map_err(|e| Error::CsvParse {
                    path: display.clone(),
                    row,
                    col: col + 1,
                    msg: format!("not an integer label: {e}"),
                })?;
                labels.push(l);
            }
        }
    }

    if row == 0 {
        return Err(Error::CsvEmpty { path: display });
    }
    let feature_cols = if opts.label_col_last { width - 1 } else { width };
    let x = DataMatrix::new(Array2::from_shape_vec((row, feature_cols), values).expect("shape"))?;
    Ok(LabeledDataset {
        x,
        labels: if opts.label_col_last { Some(labels) } else { None },
    })
}

/// Writes a dense matrix as CSV using the shortest decimal representation
/// that round-trips each double exactly.
pub fn save_csv<P: AsRef<Path>>(path: P, values: &Array2<f64>) -> Result<()> {
    save_csv_impl(path, values, None)
}

/// [`save_csv`] with a trailing integer label column.
pub fn save_labeled_csv<P: AsRef<Path>>(
    path: P,
    values: &Array2<f64>,
    labels: &[i64],
) -> Result<()> {
    if labels.len() != values.nrows() {
        return Err(Error::RowMismatch {
            left: values.nrows(),
            right: labels.len(),
        });
    }
    save_csv_impl(path, values, Some(labels))
}

/// Writes a one-column integer CSV (labels for `metrics --labels`).
pub fn save_labels_csv<P: AsRef<Path>>(path: P, labels: &[i64]) -> Result<()> {
    let file = std::fs::File::create(path.as_ref())?;
    let mut out = BufWriter::new(file);
    for l in labels {
        writeln!(out, "{l}")?;
    }
    out.flush()?;
    Ok(())
}

fn save_csv_impl<P: AsRef<Path>>(
    path: P,
    values: &Array2<f64>,
    labels: Option<&[i64]>,
) -> Result<()> {
    let file = std::fs::File::create(path.as_ref())?;
    let mut out = BufWriter::new(file);
    let mut line = String::new();
    for (i, row) in values.rows().into_iter().enumerate() {
        line.clear();
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                line.push(',');
            }
            write!(line, "{v}").expect("write to string");
        }
        if let Some(labels) = labels {
            write!(line, ",{}", labels[i]).expect("write to string");
        }
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hierarchical_default_counts() {
        let spec = HierarchicalSpec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let sample = gen_hierarchical_detailed(&spec, &mut rng).unwrap();
        let data = &sample.dataset;
        assert_eq!(data.x.n(), 62_500);
        assert_eq!(data.x.p(), 50);
        let labels = data.labels.as_ref().unwrap();
        let mut distinct = labels.clone();
        distinct.sort_unstable();
        distinct.dedup();
        assert_eq!(distinct.len(), 125);
        assert_eq!(sample.micro_centers.nrows(), 125);
    }

    #[test]
    fn hierarchical_scaled_counts() {
        let spec = HierarchicalSpec {
            points_per_micro: 100,
            ..HierarchicalSpec::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data = gen_hierarchical(&spec, &mut rng).unwrap();
        assert_eq!(data.x.n(), 12_500);
        assert_eq!(data.x.p(), 50);
    }

    #[test]
    fn hierarchical_micro_cluster_covariance_trace() {
        // Observations are Normal(center, 10 I_50): the sample covariance
        // trace of a 500-point cluster is close to 50 * 10 = 500.
        let spec = HierarchicalSpec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let data = gen_hierarchical(&spec, &mut rng).unwrap();
        let labels = data.labels.as_ref().unwrap();
        for cluster in [0_i64, 60, 124] {
            let rows: Vec<usize> = (0..data.x.n()).filter(|&i| labels[i] == cluster).collect();
            assert_eq!(rows.len(), 500);
            let mut trace = 0.0;
            for d in 0..50 {
                let mean: f64 =
                    rows.iter().map(|&i| data.x.row(i)[d]).sum::<f64>() / rows.len() as f64;
                let var: f64 = rows
                    .iter()
                    .map(|&i| (data.x.row(i)[d] - mean) * (data.x.row(i)[d] - mean))
                    .sum::<f64>()
                    / (rows.len() - 1) as f64;
                trace += var;
            }
            assert!((trace - 500.0).abs() < 50.0, "cluster {cluster}: trace {trace}");
        }
    }

    #[test]
    fn hierarchical_sample_means_converge_to_centers() {
        let spec = HierarchicalSpec {
            points_per_micro: 200,
            ..HierarchicalSpec::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sample = gen_hierarchical_detailed(&spec, &mut rng).unwrap();
        let data = &sample.dataset;
        let labels = data.labels.as_ref().unwrap();
        let bound = 3.0 * (10.0_f64 / 200.0).sqrt() * 50.0_f64.sqrt();
        for cluster in 0..125 {
            let rows: Vec<usize> =
                (0..data.x.n()).filter(|&i| labels[i] == cluster as i64).collect();
            let mut dist2 = 0.0;
            for d in 0..50 {
                let mean: f64 =
                    rows.iter().map(|&i| data.x.row(i)[d]).sum::<f64>() / rows.len() as f64;
                let diff = mean - sample.micro_centers[[cluster, d]];
                dist2 += diff * diff;
            }
            assert!(dist2.sqrt() < bound, "cluster {cluster}: {} >= {bound}", dist2.sqrt());
        }
    }

    #[test]
    fn hierarchical_fixed_seed_is_deterministic() {
        let spec = HierarchicalSpec {
            points_per_micro: 10,
            ..HierarchicalSpec::default()
        };
        let a = gen_hierarchical(&spec, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = gen_hierarchical(&spec, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.labels, b.labels);
    }

    #[test]
    fn hierarchical_rejects_non_decreasing_variances() {
        let spec = HierarchicalSpec {
            variances: [10.0, 100.0, 1000.0, 10000.0],
            ..HierarchicalSpec::default()
        };
        assert!(gen_hierarchical(&spec, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn s_curve_shape_and_hole() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = gen_s_curve_with_hole(2000, S_CURVE_HOLE_RADIUS, &mut rng).unwrap();
        assert_eq!((x.n(), x.p()), (2000, 3));
        let anchor = s_curve_hole_anchor();
        for i in 0..x.n() {
            let p = x.row(i);
            let d2: f64 = p.iter().zip(&anchor).map(|(a, b)| (a - b) * (a - b)).sum();
            assert!(d2.sqrt() >= S_CURVE_HOLE_RADIUS, "point {i} inside the hole");
        }
    }

    #[test]
    fn s_curve_points_lie_on_the_manifold() {
        // Invert the parameterization: x = sin(t) has up to three candidate
        // branches in (-3pi/2, 3pi/2); one of them must reproduce z.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = gen_s_curve_with_hole(500, 0.3, &mut rng).unwrap();
        for i in 0..x.n() {
            let p = x.row(i);
            let a = p[0].clamp(-1.0, 1.0).asin();
            let candidates = [a, std::f64::consts::PI - a, -std::f64::consts::PI - a];
            let ok = candidates.iter().any(|&t| {
                (p[2] - t.signum() * (t.cos() - 1.0)).abs() < 1e-9
                    && (p[0] - t.sin()).abs() < 1e-9
            });
            assert!(ok, "point {i} = {p:?} not on the manifold");
            assert!((0.0..=2.0).contains(&p[1]));
        }
    }

    #[test]
    fn s_curve_total_hole_aborts() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let err = gen_s_curve_with_hole(50, 100.0, &mut rng);
        assert!(matches!(err, Err(Error::RejectionExhausted { .. })));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let values = Array2::from_shape_fn((20, 5), |_| {
            let v: f64 = rng.random_range(-1.0e3..1.0e3);
            v * rng.random_range(1e-8..1e8)
        });
        let dir = std::env::temp_dir().join("pacmap_csv_roundtrip");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("m.csv");
        save_csv(&path, &values).unwrap();
        let loaded = load_csv(&path, &CsvOptions::default()).unwrap();
        assert_eq!(loaded.x.values(), &values);
        assert!(loaded.labels.is_none());
    }

    #[test]
    fn csv_label_column_splits() {
        let values = Array2::from_shape_fn((6, 3), |(i, j)| (i * 3 + j) as f64);
        let labels = vec![0, 0, 1, 1, 2, 2];
        let dir = std::env::temp_dir().join("pacmap_csv_labels");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("l.csv");
        save_labeled_csv(&path, &values, &labels).unwrap();
        let loaded = load_csv(
            &path,
            &CsvOptions {
                label_col_last: true,
                ..CsvOptions::default()
            },
        )
        .unwrap();
        assert_eq!(loaded.x.p(), 3);
        assert_eq!(loaded.labels.as_deref(), Some(&labels[..]));
    }

    #[test]
    fn csv_ragged_row_is_located() {
        let dir = std::env::temp_dir().join("pacmap_csv_ragged");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("r.csv");
        let mut content = String::new();
        for i in 0..10 {
            if i == 6 {
                content.push_str("1.0,2.0\n"); // data row 7 is ragged
            } else {
                content.push_str("1.0,2.0,3.0\n");
            }
        }
        std::fs::write(&path, content).unwrap();
        match load_csv(&path, &CsvOptions::default()) {
            Err(Error::CsvRagged { row, .. }) => assert_eq!(row, 7),
            other => panic!("expected ragged error, got {other:?}"),
        }
    }

    #[test]
    fn csv_non_numeric_cell_is_located() {
        let dir = std::env::temp_dir().join("pacmap_csv_nonnum");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("n.csv");
        std::fs::write(&path, "1.0,2.0\n3.0,oops\n").unwrap();
        match load_csv(&path, &CsvOptions::default()) {
            Err(Error::CsvParse { row, col, .. }) => {
                assert_eq!((row, col), (2, 2));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn csv_header_is_skipped() {
        let dir = std::env::temp_dir().join("pacmap_csv_header");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("h.csv");
        std::fs::write(&path, "a,b\n1.5,2.5\n3.5,4.5\n").unwrap();
        let loaded = load_csv(
            &path,
            &CsvOptions {
                header: true,
                ..CsvOptions::default()
            },
        )
        .unwrap();
        assert_eq!(loaded.x.n(), 2);
        assert_eq!(loaded.x.row(0), &[1.5, 2.5]);
    }
}
