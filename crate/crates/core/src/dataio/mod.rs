//! Loading and preprocessing of multivariate series.
//!
//! The pipeline order is fixed: mean-fill missing cells, fit min-max
//! statistics on the training rows only, apply them to the whole table, cut
//! sliding windows, then split chronologically.

mod synth;
mod table;

pub use synth::{feature_names, synth_tcs_generate, synth_tcs_with_lengths, SynthConfig, SynthOutput};
pub use table::{load_csv, CsvSchema, RawTable};

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numgraph::Matrix;

/// Replaces each missing cell with the mean of the present values in its column.
pub fn fill_missing(table: &RawTable) -> Result<RawTable> {
    let mut out = table.clone();
    for (name, col) in out.columns.iter().zip(out.data.iter_mut()) {
        let present: Vec<f64> = col.iter().flatten().copied().collect();
        if present.is_empty() {
            return Err(Error::Data(format!("column `{name}` has no values to average")));
        }
        let mean = present.iter().sum::<f64>() / present.len() as f64;
        for cell in col.iter_mut() {
            cell.get_or_insert(mean);
        }
    }
    Ok(out)
}

/// Per-column min/max fitted on a row range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub columns: Vec<String>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl NormStats {
    fn position(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Drops a column so [`apply_minmax`] leaves it untouched.
    pub fn without(mut self, name: &str) -> Self {
        if let Some(i) = self.position(name) {
            self.columns.remove(i);
            self.min.remove(i);
            self.max.remove(i);
        }
        self
    }

    /// Maps a normalized value of `column` back to its original scale.
    pub fn denormalize(&self, column: &str, value: f64) -> Option<f64> {
        let i = self.position(column)?;
        let span = self.max[i] - self.min[i];
        Some(if span > 0.0 { value * span + self.min[i] } else { self.min[i] })
    }
}

/// Fits min-max statistics on rows `fit_range` of every column.
///
/// Missing cells in the range are ignored.
pub fn fit_minmax(table: &RawTable, fit_range: Range<usize>) -> Result<NormStats> {
    if fit_range.is_empty() || fit_range.end > table.len() {
        return Err(Error::Data(format!(
            "fit range {}..{} is empty or beyond {} rows",
            fit_range.start,
            fit_range.end,
            table.len()
        )));
    }
    let mut min = Vec::with_capacity(table.columns.len());
    let mut max = Vec::with_capacity(table.columns.len());
    for col in &table.data {
        let (lo, hi) = col[fit_range.clone()]
            .iter()
            .flatten()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        if lo > hi {
            min.push(0.0);
            max.push(0.0);
        } else {
            min.push(lo);
            max.push(hi);
        }
    }
    Ok(NormStats {
        columns: table.columns.clone(),
        min,
        max,
    })
}

/// `(x - min) / (max - min)`; constant columns map to 0.
pub fn apply_minmax(table: &RawTable, stats: &NormStats) -> RawTable {
    let mut out = table.clone();
    for (name, col) in out.columns.iter().zip(out.data.iter_mut()) {
        let Some(i) = stats.position(name) else { continue };
        let (lo, span) = (stats.min[i], stats.max[i] - stats.min[i]);
        for v in col.iter_mut().flatten() {
            *v = if span > 0.0 { (*v - lo) / span } else { 0.0 };
        }
    }
    out
}

/// Sliding-window parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    /// Columns that make up each segment, in order.
    pub features: Vec<String>,
    pub target: String,
    pub window: usize,
    pub horizon: usize,
    pub stride: usize,
}

/// Fixed-length labeled segments in chronological order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Vec<String>,
    /// Each segment is `window x p`, one row per time step.
    pub segments: Vec<Matrix>,
    pub targets: Vec<Vec<f64>>,
    /// Row index in the source table where each segment starts.
    pub origins: Vec<usize>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn p(&self) -> usize {
        self.features.len()
    }

    pub fn window(&self) -> usize {
        self.segments.first().map_or(0, Matrix::rows)
    }

    pub fn target_dim(&self) -> usize {
        self.targets.first().map_or(0, Vec::len)
    }

    /// Copies segments `range` into a new dataset.
    pub fn slice(&self, range: Range<usize>) -> Dataset {
        Dataset {
            features: self.features.clone(),
            segments: self.segments[range.clone()].to_vec(),
            targets: self.targets[range.clone()].to_vec(),
            origins: self.origins[range].to_vec(),
        }
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.clone(),
            segments: indices.iter().map(|&i| self.segments[i].clone()).collect(),
            targets: indices.iter().map(|&i| self.targets[i].clone()).collect(),
            origins: indices.iter().map(|&i| self.origins[i]).collect(),
        }
    }
}

/// Number of windows a table of `len` rows yields.
pub fn window_count(len: usize, window: usize, horizon: usize, stride: usize) -> usize {
    if stride == 0 || len < window + horizon {
        0
    } else {
        (len - window - horizon) / stride + 1
    }
}

/// Cuts `window`-step segments every `stride` rows; each target is the next
/// `horizon` values of the target column.
pub fn make_windows(table: &RawTable, spec: &WindowSpec) -> Result<Dataset> {
    if spec.window == 0 || spec.stride == 0 {
        return Err(Error::Config("window and stride must be >= 1".into()));
    }
    let count = window_count(table.len(), spec.window, spec.horizon, spec.stride);
    if count == 0 {
        return Err(Error::Data(format!(
            "{} rows cannot hold a window of {} plus horizon {}",
            table.len(),
            spec.window,
            spec.horizon
        )));
    }
    let feature_cols = spec
        .features
        .iter()
        .map(|f| table.column_index(f))
        .collect::<Result<Vec<_>>>()?;
    let target_col = table.column_index(&spec.target)?;
    let dense = |col: usize, row: usize| -> Result<f64> {
        table.data[col][row].ok_or_else(|| {
            Error::Data(format!("missing value in `{}` at row {row}; fill before windowing", table.columns[col]))
        })
    };

    let p = feature_cols.len();
    let mut segments = Vec::with_capacity(count);
    let mut targets = Vec::with_capacity(count);
    let mut origins = Vec::with_capacity(count);
    for k in 0..count {
        let start = k * spec.stride;
        let mut data = Vec::with_capacity(spec.window * p);
        for row in start..start + spec.window {
            for &c in &feature_cols {
                data.push(dense(c, row)?);
            }
        }
        segments.push(Matrix::from_vec(spec.window, p, data)?);
        let tgt = (start + spec.window..start + spec.window + spec.horizon)
            .map(|row| dense(target_col, row))
            .collect::<Result<Vec<_>>>()?;
        targets.push(tgt);
        origins.push(start);
    }
    Ok(Dataset {
        features: spec.features.clone(),
        segments,
        targets,
        origins,
    })
}

/// Partition sizes for `n` items: valid and test get `floor(n * ratio)`,
/// training takes the remainder.
pub fn split_sizes(n: usize, ratios: [f64; 3]) -> Result<[usize; 3]> {
    if ratios.iter().any(|r| !(*r >= 0.0)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("split ratios {ratios:?} must be non-negative and sum to 1")));
    }
    let valid = (n as f64 * ratios[1]).floor() as usize;
    let test = (n as f64 * ratios[2]).floor() as usize;
    let train = n.saturating_sub(valid + test);
    let sizes = [train, valid, test];
    for (name, s) in ["train", "valid", "test"].iter().zip(sizes) {
        if s == 0 {
            return Err(Error::Data(format!("{name} partition of {n} segments is empty")));
        }
    }
    Ok(sizes)
}

/// Contiguous chronological train/valid/test partition.
pub fn chrono_split(dataset: &Dataset, ratios: [f64; 3]) -> Result<(Dataset, Dataset, Dataset)> {
    let [train, valid, _] = split_sizes(dataset.len(), ratios)?;
    Ok((
        dataset.slice(0..train),
        dataset.slice(train..train + valid),
        dataset.slice(train + valid..dataset.len()),
    ))
}

/// Output of [`prepare`].
#[derive(Debug, Clone)]
pub struct Prepared {
    pub train: Dataset,
    pub valid: Dataset,
    pub test: Dataset,
    pub stats: NormStats,
    /// Normalized full table.
    pub table: RawTable,
    /// Raw rows touched by training segments (inputs and targets).
    pub train_rows: Range<usize>,
}

/// Runs fill, min-max (fitted on training rows), windowing and splitting.
///
/// When `normalize_target` is false the target column keeps raw values (class labels).
pub fn prepare(raw: &RawTable, spec: &WindowSpec, ratios: [f64; 3], normalize_target: bool) -> Result<Prepared> {
    let filled = fill_missing(raw)?;
    let count = window_count(filled.len(), spec.window, spec.horizon, spec.stride);
    if count == 0 {
        return Err(Error::Data(format!(
            "{} rows cannot hold a window of {} plus horizon {}",
            filled.len(),
            spec.window,
            spec.horizon
        )));
    }
    let [n_train, _, _] = split_sizes(count, ratios)?;
    let train_rows = 0..(n_train - 1) * spec.stride + spec.window + spec.horizon;
    let mut stats = fit_minmax(&filled, train_rows.clone())?;
    if !normalize_target {
        stats = stats.without(&spec.target);
    }
    let table = apply_minmax(&filled, &stats);
    let dataset = make_windows(&table, spec)?;
    let (train, valid, test) = chrono_split(&dataset, ratios)?;
    Ok(Prepared {
        train,
        valid,
        test,
        stats,
        table,
        train_rows,
    })
}
