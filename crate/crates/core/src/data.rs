//! Dataset container, feature CSV ingestion, min-max scaling and subsampling.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::index;

use crate::error::{Error, Result};
use crate::rng;

/// Labeled feature matrix: `m` rows of `n` real features, labels in `0..k`.
///
/// Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<usize>,
    n: usize,
    k: usize,
}

impl Dataset {
    /// Builds a dataset from a row-major feature buffer.
    pub fn new(features: Vec<f64>, labels: Vec<usize>, n: usize, k: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("feature dimension must be at least 1"));
        }
        if k < 2 {
            return Err(Error::TooFewClasses);
        }
        if labels.is_empty() {
            return Err(Error::invalid("dataset must contain at least one sample"));
        }
        if features.len() != labels.len() * n {
            return Err(Error::Dimension {
                expected: labels.len() * n,
                found: features.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::invalid(format!("label {bad} out of range for {k} classes")));
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "feature at row {}, column {}",
                pos / n,
                pos % n
            )));
        }
        Ok(Dataset {
            features,
            labels,
            n,
            k,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<usize>, k: usize) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        if let Some((row, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(Error::Ragged {
                row,
                expected: n,
                found: r.len(),
            });
        }
        Dataset::new(rows.concat(), labels, n, k)
    }

    /// Number of samples.
    pub fn m(&self) -> usize {
        self.labels.len()
    }

    /// Feature dimension.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of classes.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.features.chunks_exact(self.n)
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    /// Iterates `(row, label)` pairs.
    pub fn samples(&self) -> impl Iterator<Item = (&[f64], usize)> + '_ {
        self.rows().zip(self.labels.iter().copied())
    }

    /// Per-class sample counts.
    pub fn class_sizes(&self) -> Vec<usize> {
        let mut counts = vec![0; self.k];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.n);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            features,
            labels,
            n: self.n,
            k: self.k,
        }
    }

    /// The first `m` rows.
    pub fn prefix(&self, m: usize) -> Dataset {
        let m = m.min(self.m());
        Dataset {
            features: self.features[..m * self.n].to_vec(),
            labels: self.labels[..m].to_vec(),
            n: self.n,
            k: self.k,
        }
    }

    /// Uniform sample of `m_sub` rows without replacement.
    ///
    /// Feature values are copied bit-exactly. The same `(self, m_sub, seed)`
    /// always selects the same rows in the same order.
    pub fn subsample(&self, m_sub: usize, seed: u64) -> Result<Dataset> {
        Ok(self.select(&self.subsample_indices(m_sub, seed)?))
    }

    pub fn subsample_indices(&self, m_sub: usize, seed: u64) -> Result<Vec<usize>> {
        if m_sub == 0 || m_sub > self.m() {
            return Err(Error::invalid(format!(
                "subsample size {m_sub} outside 1..={}",
                self.m()
            )));
        }
        let mut rng = rng::rng_from_seed(seed);
        Ok(index::sample(&mut rng, self.m(), m_sub).into_vec())
    }

    /// Writes the dataset as a feature CSV: header `x1..xn,label`, 1-based labels.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        let mut header: Vec<String> = (1..=self.n).map(|i| format!("x{i}")).collect();
        header.push("label".to_string());
        w.write_record(&header)?;
        let mut record = Vec::with_capacity(self.n + 1);
        for (row, label) in self.samples() {
            record.clear();
            record.extend(row.iter().map(|&v| fmt_real(v)));
            record.push((label + 1).to_string());
            w.write_record(&record)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Formats a real with 17 significant digits.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

/// Which CSV column holds the label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    /// Column header name; the file must have a header row.
    Name(String),
    /// 0-based column index.
    Index(usize),
}

impl LabelColumn {
    /// Parses a CLI-style selector: all digits means an index, otherwise a name.
    pub fn parse(s: &str) -> LabelColumn {
        match s.parse::<usize>() {
            Ok(i) => LabelColumn::Index(i),
            Err(_) => LabelColumn::Name(s.to_string()),
        }
    }
}

impl Default for LabelColumn {
    fn default() -> Self {
        LabelColumn::Name("label".to_string())
    }
}

/// Result of loading a feature CSV.
#[derive(Debug, Clone)]
pub struct LoadedCsv {
    pub dataset: Dataset,
    /// Original label values, indexed by dense class id.
    pub label_values: Vec<i64>,
    pub feature_names: Option<Vec<String>>,
}

impl LoadedCsv {
    /// Re-expresses the labels in another file's class ids, so that a test set
    /// missing some classes still lines up with its training set.
    pub fn relabel_to(&self, label_values: &[i64]) -> Result<Dataset> {
        let map = self
            .label_values
            .iter()
            .map(|v| {
                label_values
                    .iter()
                    .position(|t| t == v)
                    .ok_or_else(|| Error::invalid(format!("label {v} does not occur in the reference file")))
            })
            .collect::<Result<Vec<_>>>()?;
        let labels = self.dataset.labels().iter().map(|&l| map[l]).collect();
        Dataset::new(
            self.dataset.features().to_vec(),
            labels,
            self.dataset.n(),
            label_values.len(),
        )
    }
}

pub fn load_feature_csv(path: impl AsRef<Path>, label_column: &LabelColumn) -> Result<LoadedCsv> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_feature_csv(file, label_column)
}

/// Parses a feature CSV. A first row containing any non-numeric cell is a header.
/// Labels are remapped to dense ids preserving numeric order.
pub fn read_feature_csv<R: Read>(reader: R, label_column: &LabelColumn) -> Result<LoadedCsv> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = rdr.records();
    let first = match records.next() {
        Some(r) => r?,
        None => return Err(Error::invalid("empty feature file")),
    };
    let width = first.len();
    let is_header = first.iter().any(|c| c.parse::<f64>().is_err());
    let header: Option<Vec<String>> = is_header.then(|| first.iter().map(str::to_string).collect());

    let label_idx = match label_column {
        LabelColumn::Index(i) => *i,
        LabelColumn::Name(name) => header
            .as_ref()
            .ok_or_else(|| Error::invalid(format!("label column '{name}' requires a header row")))?
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::invalid(format!("no column named '{name}'")))?,
    };
    if label_idx >= width {
        return Err(Error::invalid(format!(
            "label column {label_idx} out of range for {width} columns"
        )));
    }
    let n = width - 1;
    if n == 0 {
        return Err(Error::invalid("feature file has no feature columns"));
    }

    let mut features = Vec::new();
    let mut raw_labels = Vec::new();
    let mut parse_row = |row: usize, rec: &csv::StringRecord| -> Result<()> {
        if rec.len() != width {
            return Err(Error::Ragged {
                row,
                expected: width,
                found: rec.len(),
            });
        }
        for (column, cell) in rec.iter().enumerate() {
            if column == label_idx {
                raw_labels.push(parse_label(cell).ok_or_else(|| Error::Parse {
                    row,
                    column,
                    message: format!("label '{cell}' is not an integer"),
                })?);
            } else {
                let v: f64 = cell.parse().map_err(|_| Error::Parse {
                    row,
                    column,
                    message: format!("'{cell}' is not a real number"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        row,
                        column,
                        message: format!("'{cell}' is not finite"),
                    });
                }
                features.push(v);
            }
        }
        Ok(())
    };
    if !is_header {
        parse_row(0, &first)?;
    }
    for (i, rec) in records.enumerate() {
        parse_row(i + 1, &rec?)?;
    }
    if raw_labels.is_empty() {
        return Err(Error::invalid("feature file has no data rows"));
    }

    let mut label_values = raw_labels.clone();
    label_values.sort_unstable();
    label_values.dedup();
    if label_values.len() < 2 {
        return Err(Error::TooFewClasses);
    }
    let labels = raw_labels
        .iter()
        .map(|l| label_values.binary_search(l).expect("label present"))
        .collect();
    let feature_names = header.map(|h| {
        h.into_iter()
            .enumerate()
            .filter(|&(i, _)| i != label_idx)
            .map(|(_, s)| s)
            .collect()
    });
    let k = label_values.len();
    Ok(LoadedCsv {
        dataset: Dataset::new(features, labels, n, k)?,
        label_values,
        feature_names,
    })
}

fn parse_label(cell: &str) -> Option<i64> {
    if let Ok(v) = cell.parse::<i64>() {
        return Some(v);
    }
    let v: f64 = cell.parse().ok()?;
    (v.is_finite() && v.fract() == 0.0 && v.abs() < 9.0e15).then_some(v as i64)
}

/// Per-feature affine map onto `[0, 1]`, fit on one dataset and reusable on another.
#[derive(Debug, Clone, PartialEq)]
pub struct MinMaxScaler {
    ranges: Vec<(f64, f64)>,
}

impl MinMaxScaler {
    pub fn fit(d: &Dataset) -> MinMaxScaler {
        let mut ranges = vec![(f64::INFINITY, f64::NEG_INFINITY); d.n()];
        for row in d.rows() {
            for (r, &v) in ranges.iter_mut().zip(row) {
                r.0 = r.0.min(v);
                r.1 = r.1.max(v);
            }
        }
        MinMaxScaler { ranges }
    }

    /// `(min, max)` per feature as seen by [`MinMaxScaler::fit`].
    pub fn ranges(&self) -> &[(f64, f64)] {
        &self.ranges
    }

    pub fn transform_value(&self, feature: usize, v: f64) -> f64 {
        let (lo, hi) = self.ranges[feature];
        if hi > lo {
            (v - lo) / (hi - lo)
        } else {
            // constant in the fit data
            0.0
        }
    }

    /// Applies the stored map. Values outside the fit range land outside `[0,1]`.
    pub fn transform(&self, d: &Dataset) -> Result<Dataset> {
        if d.n() != self.ranges.len() {
            return Err(Error::Dimension {
                expected: self.ranges.len(),
                found: d.n(),
            });
        }
        let n = d.n();
        let features = d
            .features()
            .iter()
            .enumerate()
            .map(|(pos, &v)| self.transform_value(pos % n, v))
            .collect();
        Dataset::new(features, d.labels().to_vec(), n, d.k())
    }
}

/// Scales every column of `d` onto `[0,1]`; constant columns become all zeros.
pub fn minmax_scale(d: &Dataset) -> (Dataset, MinMaxScaler) {
    let scaler = MinMaxScaler::fit(d);
    let scaled = scaler.transform(d).expect("scaler fit on the same dataset");
    (scaled, scaler)
}

/// Integer counts behind the discrete naive Bayes estimators.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassCounts {
    /// `#{y=k}`.
    pub class: Vec<u64>,
    /// `#{x_i=1, y=k}`, row-major `k × n`.
    pub positive: Vec<u64>,
    pub n: usize,
}

impl ClassCounts {
    /// Counts from a dataset whose features are all 0 or 1.
    pub fn from_binary(d: &Dataset) -> Result<ClassCounts> {
        let n = d.n();
        let mut class = vec![0u64; d.k()];
        let mut positive = vec![0u64; d.k() * n];
        for (row_idx, (row, y)) in d.samples().enumerate() {
            class[y] += 1;
            let counts = &mut positive[y * n..(y + 1) * n];
            for (column, (&v, c)) in row.iter().zip(counts).enumerate() {
                if v == 1.0 {
                    *c += 1;
                } else if v != 0.0 {
                    return Err(Error::NonBinary {
                        row: row_idx,
                        column,
                        value: v,
                    });
                }
            }
        }
        Ok(ClassCounts { class, positive, n })
    }

    pub fn total(&self) -> u64 {
        self.class.iter().sum()
    }

    pub fn positive(&self, k: usize, i: usize) -> u64 {
        self.positive[k * self.n + i]
    }
}
