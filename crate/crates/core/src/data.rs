//! Tabular classification data: CSV loading, train-only standardization,
//! seeded train/validation/test partitions, and synthetic Gaussian blobs.

use std::collections::HashMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Batch, OwnedBatch};
use crate::rng::RngState;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    /// Row-major, `len() == labels.len() * n_features`.
    pub features: Vec<f64>,
    pub labels: Vec<usize>,
    pub n_features: usize,
    pub class_count: usize,
    /// Original label text, indexed by class id.
    pub class_names: Vec<String>,
}

/// Which CSV column holds the class label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
}

impl Default for LabelColumn {
    fn default() -> Self {
        LabelColumn::Name("label".into())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvOptions {
    pub delimiter: u8,
    pub has_header: bool,
    pub label: LabelColumn,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            delimiter: b',',
            has_header: true,
            label: LabelColumn::default(),
        }
    }
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    /// All rows as a batch.
    pub fn batch(&self) -> Result<Batch<'_>> {
        Batch::new(&self.features, self.n_features, &self.labels)
    }

    /// Copies the listed rows, in order, into a batch.
    pub fn gather(&self, rows: &[usize]) -> OwnedBatch {
        let mut inputs = Vec::with_capacity(rows.len() * self.n_features);
        for &r in rows {
            inputs.extend_from_slice(self.row(r));
        }
        OwnedBatch {
            inputs,
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            n_features: self.n_features,
        }
    }

    /// A new dataset holding the listed rows; class metadata is kept.
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        let OwnedBatch { inputs, labels, .. } = self.gather(rows);
        Dataset {
            name: self.name.clone(),
            features: inputs,
            labels,
            n_features: self.n_features,
            class_count: self.class_count,
            class_names: self.class_names.clone(),
        }
    }

    /// Checks finiteness and that labels cover `0..class_count` with at least
    /// two classes.
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Error::Data {
            path: self.name.clone().into(),
            line: 0,
            reason,
        };
        if self.features.len() != self.labels.len() * self.n_features {
            return Err(bad("feature matrix does not match row count".into()));
        }
        if let Some(pos) = self.features.iter().position(|v| !v.is_finite()) {
            return Err(bad(format!(
                "non-finite feature in row {}",
                pos / self.n_features.max(1)
            )));
        }
        if self.class_count < 2 {
            return Err(bad(format!("need at least 2 classes, found {}", self.class_count)));
        }
        let mut seen = vec![false; self.class_count];
        for &l in &self.labels {
            if l >= self.class_count {
                return Err(bad(format!("label {l} outside 0..{}", self.class_count)));
            }
            seen[l] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(bad(format!("class {missing} has no rows")));
        }
        Ok(())
    }

    /// Order-sensitive FNV-1a digest of features and labels.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |bytes: &[u8]| {
            for b in bytes {
                h ^= *b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        for v in &self.features {
            eat(&v.to_bits().to_le_bytes());
        }
        for l in &self.labels {
            eat(&(*l as u64).to_le_bytes());
        }
        h
    }
}

/// Reads a delimited file. Label strings become class ids in order of first
/// appearance; every other column must parse as a real number.
pub fn load_csv(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<Dataset> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::DatasetNotFound(path.to_path_buf()));
    }
    let data_err = |line: usize, reason: String| Error::Data {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(opts.delimiter)
        .has_headers(opts.has_header)
        .flexible(true)
        .from_path(path)
        .map_err(|e| data_err(0, e.to_string()))?;

    let label_idx = match &opts.label {
        LabelColumn::Index(i) => *i,
        LabelColumn::Name(name) => {
            if !opts.has_header {
                return Err(Error::config(
                    "label_column",
                    format!("column name `{name}` needs a header row"),
                ));
            }
            let headers = reader.headers().map_err(|e| data_err(1, e.to_string()))?;
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| data_err(1, format!("no column named `{name}`")))?
        }
    };

    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut class_ids: HashMap<String, usize> = HashMap::new();
    let mut class_names = Vec::new();
    let mut width: Option<usize> = None;

    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            data_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(data_err(
                line,
                format!("expected {expected} fields, found {}", record.len()),
            ));
        }
        if label_idx >= record.len() {
            return Err(data_err(
                line,
                format!("label column {label_idx} out of range for {} fields", record.len()),
            ));
        }
        for (col, field) in record.iter().enumerate() {
            let field = field.trim();
            if field.is_empty() {
                return Err(data_err(line, format!("missing value in column {col}")));
            }
            if col == label_idx {
                let next = class_ids.len();
                let id = *class_ids.entry(field.to_string()).or_insert_with(|| {
                    class_names.push(field.to_string());
                    next
                });
                labels.push(id);
            } else {
                let v: f64 = field
                    .parse()
                    .map_err(|_| data_err(line, format!("column {col}: `{field}` is not a number")))?;
                if !v.is_finite() {
                    return Err(data_err(line, format!("column {col}: non-finite value")));
                }
                features.push(v);
            }
        }
    }

    let n_features = width.map_or(0, |w| w - 1);
    let ds = Dataset {
        name: path
            .file_stem()
            .map_or_else(|| "dataset".into(), |s| s.to_string_lossy().into_owned()),
        features,
        labels,
        n_features,
        class_count: class_names.len(),
        class_names,
    };
    ds.validate()?;
    Ok(ds)
}

/// Per-feature mean and standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureStats {
    /// Population statistics over `rows` of `ds`.
    pub fn fit(ds: &Dataset, rows: &[usize]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::config("train", "standardization needs at least one row"));
        }
        let n = ds.n_features;
        let count = rows.len() as f64;
        let mut mean = vec![0.0; n];
        for &r in rows {
            for (m, v) in mean.iter_mut().zip(ds.row(r)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= count);
        let mut var = vec![0.0; n];
        for &r in rows {
            for ((s, v), m) in var.iter_mut().zip(ds.row(r)).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var.into_iter().map(|s| (s / count).sqrt()).collect();
        Ok(Self { mean, std })
    }

    pub fn apply(&self, ds: &Dataset) -> Dataset {
        let mut out = ds.clone();
        for row in out.features.chunks_exact_mut(ds.n_features) {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                // zero-variance (up to rounding) features carry no information
                *v = if *s > 1e-12 * m.abs().max(1.0) {
                    (*v - m) / s
                } else {
                    0.0
                };
            }
        }
        out
    }
}

/// Rescales every row to zero mean / unit variance using statistics from
/// `train_rows` only.
pub fn standardize(ds: &Dataset, train_rows: &[usize]) -> Result<Dataset> {
    Ok(FeatureStats::fit(ds, train_rows)?.apply(ds))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    /// Fraction of the non-test rows held out for validation.
    pub validation_fraction: f64,
    pub split_seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            validation_fraction: 0.1,
            split_seed: 0,
        }
    }
}

/// Disjoint row-index sets covering a dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded shuffle, then `test_count` rows for test and
/// `floor(validation_fraction · rest)` of the remainder for validation.
pub fn split(ds: &Dataset, test_count: usize, spec: &SplitSpec) -> Result<Split> {
    let n = ds.len();
    if !(0.0..1.0).contains(&spec.validation_fraction) {
        return Err(Error::config(
            "validation_fraction",
            format!("{} is outside [0, 1)", spec.validation_fraction),
        ));
    }
    if test_count + 1 > n {
        return Err(Error::config(
            "test_count",
            format!("{test_count} test rows leave no training rows out of {n}"),
        ));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut RngState::new(spec.split_seed));
    let rest = n - test_count;
    let val_count = (spec.validation_fraction * rest as f64).floor() as usize;
    let test = order[..test_count].to_vec();
    let validation = order[test_count..test_count + val_count].to_vec();
    let train = order[test_count + val_count..].to_vec();
    if train.is_empty() {
        return Err(Error::config("validation_fraction", "no training rows remain"));
    }
    Ok(Split {
        train,
        validation,
        test,
    })
}

/// Isotropic unit-variance clusters around centers drawn from
/// `N(0, separation²)`, labeled by cluster.
pub fn synth_gaussian_blobs(
    classes: usize,
    per_class: usize,
    n_features: usize,
    separation: f64,
    seed: u64,
) -> Dataset {
    let mut rng = RngState::new(seed);
    let centers: Vec<Vec<f64>> = (0..classes)
        .map(|_| {
            (0..n_features)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    separation * z
                })
                .collect()
        })
        .collect();
    let mut features = Vec::with_capacity(classes * per_class * n_features);
    let mut labels = Vec::with_capacity(classes * per_class);
    for _ in 0..per_class {
        for (c, center) in centers.iter().enumerate() {
            for mu in center {
                let z: f64 = StandardNormal.sample(&mut rng);
                features.push(mu + z);
            }
            labels.push(c);
        }
    }
    Dataset {
        name: "blobs".into(),
        features,
        labels,
        n_features,
        class_count: classes,
        class_names: (0..classes).map(|c| c.to_string()).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn minimal_file_loads() {
        let f = write_tmp("x1,x2,label\n1.0,2.0,a\n3.0,4.0,b\n5.0,6.0,a\n");
        let ds = load_csv(f.path(), &CsvOptions::default()).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.n_features, 2);
        assert_eq!(ds.labels, vec![0, 1, 0]);
        assert_eq!(ds.class_names, vec!["a", "b"]);
        assert_eq!(ds.row(1), &[3.0, 4.0]);
    }

    #[test]
    fn label_by_index_without_header() {
        let f = write_tmp("b;1.5;2\na;0.5;3\n");
        let opts = CsvOptions {
            delimiter: b';',
            has_header: false,
            label: LabelColumn::Index(0),
        };
        let ds = load_csv(f.path(), &opts).unwrap();
        assert_eq!(ds.labels, vec![0, 1]);
        assert_eq!(ds.features, vec![1.5, 2.0, 0.5, 3.0]);
    }

    #[test]
    fn malformed_row_reports_line() {
        let f = write_tmp("x,label\n1.0,a\n2.0\n3.0,b\n");
        match load_csv(f.path(), &CsvOptions::default()) {
            Err(Error::Data { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let f = write_tmp("x,label\n1.0,a\nfoo,b\n");
        assert!(matches!(
            load_csv(f.path(), &CsvOptions::default()),
            Err(Error::Data { line: 3, .. })
        ));
    }

    #[test]
    fn missing_value_is_an_error() {
        let f = write_tmp("x,y,label\n1.0,,a\n2.0,1.0,b\n");
        assert!(matches!(
            load_csv(f.path(), &CsvOptions::default()),
            Err(Error::Data { line: 2, .. })
        ));
    }

    #[test]
    fn single_class_file_rejected() {
        let f = write_tmp("x,label\n1.0,a\n2.0,a\n");
        assert!(load_csv(f.path(), &CsvOptions::default()).is_err());
    }

    #[test]
    fn missing_file() {
        let err = load_csv("/nonexistent/data.csv", &CsvOptions::default()).unwrap_err();
        assert_eq!(err.to_string(), "dataset not found: /nonexistent/data.csv");
    }

    fn small() -> Dataset {
        Dataset {
            name: "t".into(),
            features: vec![1.0, 7.0, 2.0, 7.0, 3.0, 7.0, 10.0, 7.0],
            labels: vec![0, 1, 0, 1],
            n_features: 2,
            class_count: 2,
            class_names: vec!["0".into(), "1".into()],
        }
    }

    #[test]
    fn standardize_uses_train_rows_only() {
        let ds = small();
        let out = standardize(&ds, &[0, 1, 2]).unwrap();
        // constant feature maps to zero
        assert!(out.features.iter().skip(1).step_by(2).all(|v| *v == 0.0));
        let train_mean: f64 = [0, 1, 2].iter().map(|&r| out.row(r)[0]).sum::<f64>() / 3.0;
        assert!(train_mean.abs() < 1e-10);
        // row 3 sits outside the train statistics
        let std = (2.0f64 / 3.0).sqrt();
        assert!((out.row(3)[0] - (10.0 - 2.0) / std).abs() < 1e-12);

        let mut perturbed = ds.clone();
        perturbed.features[6] = -500.0;
        let again = standardize(&perturbed, &[0, 1, 2]).unwrap();
        assert_eq!(&again.features[..6], &out.features[..6]);
    }

    #[test]
    fn standardize_is_idempotent() {
        let ds = synth_gaussian_blobs(2, 20, 3, 4.0, 9);
        let rows: Vec<usize> = (0..ds.len()).collect();
        let once = standardize(&ds, &rows).unwrap();
        let twice = standardize(&once, &rows).unwrap();
        for (a, b) in once.features.iter().zip(&twice.features) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn cancer_sized_split() {
        let ds = synth_gaussian_blobs(2, 300, 1, 1.0, 1).subset(&(0..569).collect::<Vec<_>>());
        let spec = SplitSpec {
            validation_fraction: 0.1,
            split_seed: 7,
        };
        let s = split(&ds, 85, &spec).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (436, 48, 85));
        let mut all: Vec<usize> = s.train.iter().chain(&s.validation).chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..569).collect::<Vec<_>>());
        assert_eq!(split(&ds, 85, &spec).unwrap(), s);

        let none = split(
            &ds,
            85,
            &SplitSpec {
                validation_fraction: 0.0,
                ..spec
            },
        )
        .unwrap();
        assert!(none.validation.is_empty());
        assert_eq!(none.train.len(), 484);
    }

    #[test]
    fn impossible_split_sizes() {
        let ds = small();
        assert!(matches!(
            split(&ds, 4, &SplitSpec::default()),
            Err(Error::Config { .. })
        ));
        assert!(split(&ds, 3, &SplitSpec::default()).is_ok());
        let bad = SplitSpec {
            validation_fraction: 1.0,
            split_seed: 0,
        };
        assert!(split(&ds, 1, &bad).is_err());
    }

    #[test]
    fn blob_shapes() {
        let ds = synth_gaussian_blobs(2, 1, 3, 1.0, 0);
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.features.len(), 6);
        ds.validate().unwrap();
        let single = synth_gaussian_blobs(1, 5, 2, 1.0, 0);
        assert!(single.validate().is_err());
        assert_eq!(
            synth_gaussian_blobs(3, 4, 2, 5.0, 11),
            synth_gaussian_blobs(3, 4, 2, 5.0, 11)
        );
    }
}
