//! Local data sets: CSV ingestion, label preparation, partitioning across
//! nodes, and seeded synthetic fixtures.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::losses::QuadraticLoss;

/// Columns with variance below this standardize to all zeros.
const VARIANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// `K x d`, one sample per row.
    pub features: DMatrix<f64>,
    pub labels: DVector<f64>,
    pub columns: Vec<String>,
    pub provenance: String,
}

impl Dataset {
    pub fn new(features: DMatrix<f64>, labels: DVector<f64>, columns: Vec<String>, provenance: impl Into<String>) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::DimensionMismatch { expected: features.nrows(), found: labels.len() });
        }
        if columns.len() != features.ncols() {
            return Err(Error::DimensionMismatch { expected: features.ncols(), found: columns.len() });
        }
        if features.iter().chain(labels.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InfeasibleInput("non-finite value in data set".into()));
        }
        Ok(Self { features, labels, columns, provenance: provenance.into() })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn point(&self, k: usize) -> (Vec<f64>, f64) {
        (self.features.row(k).iter().copied().collect(), self.labels[k])
    }

    pub fn points(&self) -> Vec<(Vec<f64>, f64)> {
        (0..self.len()).map(|k| self.point(k)).collect()
    }

    /// Rows `idx` in the given order.
    pub fn select(&self, idx: &[usize], provenance: impl Into<String>) -> Self {
        Self {
            features: self.features.select_rows(idx),
            labels: DVector::from_iterator(idx.len(), idx.iter().map(|&k| self.labels[k])),
            columns: self.columns.clone(),
            provenance: provenance.into(),
        }
    }

    /// Appends a constant-one feature so a linear model gets an intercept.
    pub fn with_intercept(&self) -> Self {
        let k = self.len();
        let mut features = self.features.clone().insert_column(self.dim(), 1.0);
        features.set_column(self.dim(), &DVector::from_element(k, 1.0));
        let mut columns = self.columns.clone();
        columns.push("intercept".into());
        Self { features, labels: self.labels.clone(), columns, provenance: self.provenance.clone() }
    }

    /// Sufficient statistics of the mean-squared-error loss on this data.
    pub fn to_quadratic_loss(&self) -> Result<QuadraticLoss> {
        QuadraticLoss::from_design(self.features.clone(), &self.labels)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoadReport {
    pub rows_read: usize,
    pub rows_dropped: usize,
}

/// Reads a headered, comma-separated file. Rows with a missing or
/// unparseable selected field are skipped and counted.
pub fn load_csv(path: &Path, feature_columns: &[&str], label_column: &str, normalize: bool) -> Result<(Dataset, LoadReport)> {
    if !path.is_file() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).trim(csv::Trim::All).from_path(path).map_err(|e| Error::Io(e.to_string()))?;
    let header = reader.headers().map_err(|e| Error::Io(e.to_string()))?.clone();
    let locate = |name: &str| header.iter().position(|h| h == name).ok_or_else(|| Error::MissingColumn(name.to_string()));
    let feature_idx = feature_columns.iter().map(|c| locate(c)).collect::<Result<Vec<_>>>()?;
    let label_idx = locate(label_column)?;

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut report = LoadReport { rows_read: 0, rows_dropped: 0 };
    for record in reader.records() {
        report.rows_read += 1;
        let Ok(record) = record else {
            report.rows_dropped += 1;
            continue;
        };
        let parse = |i: usize| record.get(i).and_then(|s| s.parse::<f64>().ok()).filter(|v| v.is_finite());
        let row: Option<Vec<f64>> = feature_idx.iter().map(|&i| parse(i)).collect();
        match (row, parse(label_idx)) {
            (Some(row), Some(y)) => {
                values.extend(row);
                labels.push(y);
            }
            _ => report.rows_dropped += 1,
        }
    }
    if labels.is_empty() {
        return Err(Error::NoValidRows(path.display().to_string()));
    }
    let mut features = DMatrix::from_row_slice(labels.len(), feature_idx.len(), &values);
    if normalize {
        standardize_columns(&mut features);
    }
    let columns = feature_columns.iter().map(|c| c.to_string()).collect();
    let dataset = Dataset::new(features, DVector::from_vec(labels), columns, path.display().to_string())?;
    Ok((dataset, report))
}

fn standardize_columns(features: &mut DMatrix<f64>) {
    let k = features.nrows() as f64;
    for mut col in features.column_iter_mut() {
        let mean = col.sum() / k;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / k;
        if var < VARIANCE_FLOOR {
            col.fill(0.0);
        } else {
            let sd = var.sqrt();
            col.apply(|v| *v = (*v - mean) / sd);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    Median,
    Value(f64),
}

/// Maps labels above the threshold to `+1` and the rest (ties included) to `-1`.
pub fn binarize_labels(dataset: &Dataset, threshold: Threshold) -> Dataset {
    let t = match threshold {
        Threshold::Value(v) => v,
        Threshold::Median => median(dataset.labels.as_slice()),
    };
    let mut out = dataset.clone();
    out.labels.apply(|y| *y = if *y > t { 1.0 } else { -1.0 });
    out
}

fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartitionMode {
    /// Seeded shuffle, then contiguous blocks.
    Unbiased,
    /// Stable sort by label, then contiguous blocks: nearby nodes hold similar data.
    Biased,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionSpec {
    pub n_nodes: usize,
    pub mode: PartitionMode,
    pub seed: u64,
    /// Explicit per-node sizes; `None` splits the whole set equally with the
    /// remainder going to the lowest indices.
    pub sizes: Option<Vec<usize>>,
}

impl PartitionSpec {
    pub fn equal(n_nodes: usize, mode: PartitionMode, seed: u64) -> Self {
        Self { n_nodes, mode, seed, sizes: None }
    }

    fn block_sizes(&self, rows: usize) -> Result<Vec<usize>> {
        if self.n_nodes == 0 {
            return Err(Error::InvalidConfig("a partition needs at least one node".into()));
        }
        let sizes = match &self.sizes {
            Some(s) => {
                if s.len() != self.n_nodes {
                    return Err(Error::DimensionMismatch { expected: self.n_nodes, found: s.len() });
                }
                if s.iter().any(|&n| n == 0) {
                    return Err(Error::InvalidConfig("every node needs at least one row".into()));
                }
                s.clone()
            }
            None => {
                let (base, extra) = (rows / self.n_nodes, rows % self.n_nodes);
                (0..self.n_nodes).map(|i| base + usize::from(i < extra)).collect()
            }
        };
        if rows < self.n_nodes || sizes.iter().sum::<usize>() > rows {
            return Err(Error::TooFewRows { rows, nodes: self.n_nodes });
        }
        Ok(sizes)
    }
}

pub fn partition(dataset: &Dataset, spec: &PartitionSpec) -> Result<Vec<Dataset>> {
    let sizes = spec.block_sizes(dataset.len())?;
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    match spec.mode {
        PartitionMode::Unbiased => order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed)),
        PartitionMode::Biased => order.sort_by(|&a, &b| dataset.labels[a].total_cmp(&dataset.labels[b])),
    }
    let mut start = 0;
    let mut out = Vec::with_capacity(spec.n_nodes);
    for (node, size) in sizes.into_iter().enumerate() {
        out.push(dataset.select(&order[start..start + size], format!("{} [node {node}]", dataset.provenance)));
        start += size;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub enum SynthModel {
    /// Every node shares the weight vector.
    Shared(DVector<f64>),
    /// Node `i` uses `base + i * delta * e_0`, so nearby nodes have similar models.
    PerNodeShift { base: DVector<f64>, delta: f64 },
}

/// `rows` samples with `x ~ N(0, I_d)` and `y = x^T w + N(0, sigma^2)`.
pub fn synth_dataset(rows: usize, w: &DVector<f64>, noise_sigma: f64, rng: &mut ChaCha8Rng, provenance: impl Into<String>) -> Result<Dataset> {
    let d = w.len();
    if rows == 0 || d == 0 {
        return Err(Error::EmptyData);
    }
    let noise = Normal::new(0.0, noise_sigma).map_err(|e| Error::InvalidConfig(format!("noise sigma: {e}")))?;
    let features = DMatrix::from_fn(rows, d, |_, _| StandardNormal.sample(rng));
    let labels = DVector::from_fn(rows, |k, _| features.row(k).transpose().dot(w) + noise.sample(rng));
    let columns = (0..d).map(|c| format!("x{c}")).collect();
    Dataset::new(features, labels, columns, provenance)
}

/// Per-node synthetic data sets drawn from one seeded stream, node by node.
pub fn synth_generate(n_nodes: usize, per_node: usize, model: &SynthModel, noise_sigma: f64, seed: u64) -> Result<Vec<Dataset>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_nodes)
        .map(|i| {
            let w = match model {
                SynthModel::Shared(w) => w.clone(),
                SynthModel::PerNodeShift { base, delta } => {
                    let mut w = base.clone();
                    w[0] += i as f64 * delta;
                    w
                }
            };
            synth_dataset(per_node, &w, noise_sigma, &mut rng, format!("synthetic seed {seed} [node {i}]"))
        })
        .collect()
}
