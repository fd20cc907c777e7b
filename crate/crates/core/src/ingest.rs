//! Loading, validating and splitting labeled flow records.
//!
//! Input is comma-delimited UTF-8 text with a mandatory header row. One
//! column holds the class label; it is mapped to `1` for the positive
//! (attack) label and `0` for the other one. Feature columns are either
//! every remaining column or an explicit include-list. Missing or
//! non-numeric cells are rejected, never imputed.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng;

pub const NORMAL: u8 = 0;
pub const ATTACK: u8 = 1;
pub const NUM_CLASSES: usize = 2;

/// The ten-feature subset published with the 5% Bot-IoT extraction.
pub const BOT_IOT_BEST_10: [&str; 10] = [
    "seq",
    "stddev",
    "N_IN_Conn_P_SrcIP",
    "min",
    "state_number",
    "mean",
    "N_IN_Conn_P_DstIP",
    "drate",
    "srate",
    "max",
];

/// Labeled feature matrix. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Vec<u8>,
    feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(features: Array2<f64>, labels: Vec<u8>, feature_names: Vec<String>) -> Result<Self> {
        let (m, n) = features.dim();
        if m == 0 {
            return Err(Error::InvalidDataset("dataset has no rows".into()));
        }
        if n == 0 {
            return Err(Error::InvalidDataset("dataset has no features".into()));
        }
        if labels.len() != m {
            return Err(Error::InvalidDataset(format!(
                "{} rows but {} labels",
                m,
                labels.len()
            )));
        }
        if feature_names.len() != n {
            return Err(Error::InvalidDataset(format!(
                "{} columns but {} feature names",
                n,
                feature_names.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= NUM_CLASSES) {
            return Err(Error::InvalidDataset(format!("label {bad} is not a class id")));
        }
        if let Some(((r, c), v)) = features.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!(
                "non-finite value {v} at row {r}, column {c}"
            )));
        }
        Ok(Dataset {
            features,
            labels,
            feature_names,
        })
    }

    /// Builds a dataset with generated feature names `f0..fN`.
    pub fn from_parts(features: Array2<f64>, labels: Vec<u8>) -> Result<Self> {
        let names = (0..features.ncols()).map(|j| format!("f{j}")).collect();
        Dataset::new(features, labels, names)
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    /// Rows at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Dataset> {
        let features = self.features.select(Axis(0), indices);
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Dataset::new(features, labels, self.feature_names.clone())
    }

    /// Same labels and names over a replacement feature matrix.
    pub fn with_features(&self, features: Array2<f64>) -> Result<Dataset> {
        if features.ncols() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                found: features.ncols(),
            });
        }
        Dataset::new(features, self.labels.clone(), self.feature_names.clone())
    }

    pub fn class_counts(&self) -> ClassCounts {
        class_counts(&self.labels)
    }
}

pub type ClassCounts = BTreeMap<u8, usize>;

pub fn class_counts(labels: &[u8]) -> ClassCounts {
    let mut counts = ClassCounts::new();
    for &l in labels {
        *counts.entry(l).or_insert(0) += 1;
    }
    counts
}

#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub label_column: String,
    pub positive_label: String,
    /// When unset, the single label value other than `positive_label` is
    /// taken as negative and any third value is rejected.
    pub negative_label: Option<String>,
    /// Feature columns to keep, in this order. `None` keeps every
    /// non-label column, all of which must then be numeric.
    pub include: Option<Vec<String>>,
}

impl LoadOptions {
    pub fn new(label_column: impl Into<String>, positive_label: impl Into<String>) -> Self {
        LoadOptions {
            label_column: label_column.into(),
            positive_label: positive_label.into(),
            negative_label: None,
            include: None,
        }
    }
}

pub fn load_flows(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_flows(file, opts)
}

pub fn read_flows<R: Read>(reader: R, opts: &LoadOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(Error::Empty("missing header row".into()));
    }

    let column = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_owned()))
    };
    let label_idx = column(&opts.label_column)?;
    let feature_idx: Vec<usize> = match &opts.include {
        Some(names) => names.iter().map(|n| column(n)).collect::<Result<_>>()?,
        None => (0..header.len()).filter(|&i| i != label_idx).collect(),
    };
    if feature_idx.is_empty() {
        return Err(Error::InvalidDataset("no feature columns selected".into()));
    }
    if feature_idx.contains(&label_idx) {
        return Err(Error::InvalidConfig(format!(
            "label column '{}' is also listed as a feature",
            opts.label_column
        )));
    }

    let mut negative = opts.negative_label.clone();
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let row = r + 1;
        let raw_label = record.get(label_idx).unwrap_or("");
        let label = if raw_label == opts.positive_label {
            ATTACK
        } else {
            match &negative {
                Some(neg) if neg == raw_label => NORMAL,
                None if !raw_label.is_empty() => {
                    negative = Some(raw_label.to_owned());
                    NORMAL
                }
                _ => {
                    return Err(Error::UnknownLabel {
                        row,
                        column: opts.label_column.clone(),
                        value: raw_label.to_owned(),
                    })
                }
            }
        };
        labels.push(label);
        for &j in &feature_idx {
            let cell = record.get(j).unwrap_or("");
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => values.push(v),
                _ => {
                    return Err(Error::InvalidCell {
                        row,
                        column: header[j].clone(),
                        value: cell.to_owned(),
                    })
                }
            }
        }
    }
    if labels.is_empty() {
        return Err(Error::Empty("file has a header but no data rows".into()));
    }

    let names = feature_idx.iter().map(|&j| header[j].clone()).collect();
    let features = Array2::from_shape_vec((labels.len(), feature_idx.len()), values)
        .expect("row width checked per record");
    Dataset::new(features, labels, names)
}

/// Writes `d` back as delimited text with a trailing label column.
///
/// Values use the shortest representation that parses back to the same
/// `f64`, so `write_flows` followed by `read_flows` is lossless.
pub fn write_flows<W: Write>(
    d: &Dataset,
    writer: W,
    label_column: &str,
    positive_label: &str,
    negative_label: &str,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = d.feature_names.iter().map(String::as_str).collect();
    header.push(label_column);
    w.write_record(&header)?;
    for (row, &label) in d.features.rows().into_iter().zip(&d.labels) {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        rec.push(if label == ATTACK { positive_label } else { negative_label }.to_owned());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<writer>", e))?;
    Ok(())
}

/// Train/test partition of a source dataset. Index lists refer to source
/// rows and are sorted ascending.
#[derive(Debug, Clone)]
pub struct SplitPair {
    pub train: Dataset,
    pub test: Dataset,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub seed: u64,
}

fn indices_by_class(labels: &[u8]) -> BTreeMap<u8, Vec<usize>> {
    let mut by_class: BTreeMap<u8, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    by_class
}

/// Index-level stratified split; returns `(train, test)` index lists.
///
/// Each class contributes `round(count * test_fraction)` rows to the test
/// side, clamped so both sides keep at least one row of every class.
pub fn stratified_split_indices(
    labels: &[u8],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "test_fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let mut rng = rng::seeded(seed);
    let mut train = Vec::with_capacity(labels.len());
    let mut test = Vec::new();
    for (class, mut idx) in indices_by_class(labels) {
        let n = idx.len();
        if n < 2 {
            return Err(Error::CannotStratify {
                class,
                count: n,
                required: 2,
            });
        }
        let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
        idx.shuffle(&mut rng);
        test.extend_from_slice(&idx[..n_test]);
        train.extend_from_slice(&idx[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn stratified_split(d: &Dataset, test_fraction: f64, seed: u64) -> Result<SplitPair> {
    let (train_indices, test_indices) = stratified_split_indices(&d.labels, test_fraction, seed)?;
    Ok(SplitPair {
        train: d.select(&train_indices)?,
        test: d.select(&test_indices)?,
        train_indices,
        test_indices,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

/// Stratified k-fold partition of `0..labels.len()`.
///
/// Every class is shuffled and dealt round-robin across folds; the dealing
/// offset carries over between classes so fold sizes differ by at most one.
pub fn stratified_kfold(labels: &[u8], k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 folds, got {k}")));
    }
    let mut rng = rng::seeded(seed);
    let mut assignment = vec![0usize; labels.len()];
    let mut offset = 0;
    for (class, mut idx) in indices_by_class(labels) {
        if idx.len() < k {
            return Err(Error::CannotStratify {
                class,
                count: idx.len(),
                required: k,
            });
        }
        idx.shuffle(&mut rng);
        for (pos, &i) in idx.iter().enumerate() {
            assignment[i] = (pos + offset) % k;
        }
        offset = (offset + idx.len()) % k;
    }
    Ok((0..k)
        .map(|f| {
            let (validation, train): (Vec<usize>, Vec<usize>) =
                (0..labels.len()).partition(|&i| assignment[i] == f);
            Fold { train, validation }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn opts() -> LoadOptions {
        LoadOptions::new("label", "attack")
    }

    #[test]
    fn loads_small_file_in_order() {
        let csv = "a,b,label\n1,2,normal\n3,4,attack\n5,6.5,attack\n7,8,normal\n";
        let d = read_flows(csv.as_bytes(), &opts()).unwrap();
        assert_eq!(d.n_rows(), 4);
        assert_eq!(d.n_features(), 2);
        assert_eq!(d.labels(), &[0, 1, 1, 0]);
        assert_eq!(d.features()[[2, 1]], 6.5);
        assert_eq!(d.feature_names(), &["a", "b"]);
    }

    #[test]
    fn rejects_non_numeric_cell_with_location() {
        let csv = "a,b,label\n1,2,normal\n3,abc,attack\n";
        let err = read_flows(csv.as_bytes(), &opts()).unwrap_err();
        match err {
            Error::InvalidCell { row, column, value } => {
                assert_eq!((row, column.as_str(), value.as_str()), (2, "b", "abc"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_missing_cell() {
        let csv = "a,b,label\n1,,normal\n";
        assert!(matches!(
            read_flows(csv.as_bytes(), &opts()),
            Err(Error::InvalidCell { row: 1, .. })
        ));
    }

    #[test]
    fn rejects_third_label_value() {
        let csv = "a,label\n1,normal\n2,attack\n3,scan\n";
        match read_flows(csv.as_bytes(), &opts()).unwrap_err() {
            Error::UnknownLabel { row, value, .. } => assert_eq!((row, value.as_str()), (3, "scan")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn explicit_negative_label_is_enforced() {
        let mut o = opts();
        o.negative_label = Some("benign".into());
        let csv = "a,label\n1,normal\n";
        assert!(matches!(
            read_flows(csv.as_bytes(), &o),
            Err(Error::UnknownLabel { .. })
        ));
    }

    #[test]
    fn empty_inputs_are_errors() {
        assert!(read_flows("".as_bytes(), &opts()).is_err());
        assert!(matches!(
            read_flows("a,label\n".as_bytes(), &opts()),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn include_list_drops_string_columns() {
        let csv = "saddr,x,y,label\n10.0.0.1,1,2,attack\n10.0.0.2,3,4,normal\n";
        let mut o = opts();
        o.include = Some(vec!["y".into(), "x".into()]);
        let d = read_flows(csv.as_bytes(), &o).unwrap();
        assert_eq!(d.feature_names(), &["y", "x"]);
        assert_eq!(d.features(), &array![[2.0, 1.0], [4.0, 3.0]]);
        // without the include-list the address column is rejected
        assert!(read_flows(csv.as_bytes(), &opts()).is_err());
    }

    #[test]
    fn missing_label_column() {
        let csv = "a,b\n1,2\n";
        assert!(matches!(
            read_flows(csv.as_bytes(), &opts()),
            Err(Error::MissingColumn(c)) if c == "label"
        ));
    }

    #[test]
    fn counts() {
        assert_eq!(class_counts(&[0, 1, 1, 0]), BTreeMap::from([(0, 2), (1, 2)]));
        assert_eq!(class_counts(&[1; 5]), BTreeMap::from([(1, 5)]));
    }

    fn ninety_ten() -> Dataset {
        let labels: Vec<u8> = (0..100).map(|i| u8::from(i % 10 != 0)).collect();
        let x = Array2::from_shape_fn((100, 1), |(i, _)| i as f64);
        Dataset::from_parts(x, labels).unwrap()
    }

    #[test]
    fn split_forces_proportions() {
        let d = ninety_ten();
        let s = stratified_split(&d, 0.2, 3).unwrap();
        let test = s.test.class_counts();
        assert_eq!(test[&1], 18);
        assert_eq!(test[&0], 2);
        assert_eq!(s.train.n_rows() + s.test.n_rows(), 100);
    }

    #[test]
    fn split_is_deterministic() {
        let d = ninety_ten();
        let a = stratified_split(&d, 0.2, 11).unwrap();
        let b = stratified_split(&d, 0.2, 11).unwrap();
        assert_eq!(a.test_indices, b.test_indices);
        assert_eq!(a.train_indices, b.train_indices);
    }

    #[test]
    fn split_golden_partitions() {
        // Pinned from a reference run; guards against silent RNG-stream changes.
        let d = ninety_ten();
        let a = stratified_split(&d, 0.2, 1).unwrap();
        let b = stratified_split(&d, 0.2, 2).unwrap();
        assert_eq!(a.test_indices, GOLDEN_SEED_1);
        assert_eq!(b.test_indices, GOLDEN_SEED_2);
        assert_ne!(a.test_indices, b.test_indices);
    }

    const GOLDEN_SEED_1: [usize; 20] = [4, 14, 17, 24, 30, 35, 36, 37, 43, 45, 47, 51, 57, 71, 80, 83, 86, 92, 95, 96];
    const GOLDEN_SEED_2: [usize; 20] = [0, 1, 4, 14, 22, 27, 29, 30, 31, 32, 39, 45, 53, 63, 69, 72, 77, 86, 93, 96];

    #[test]
    fn split_rejects_singleton_class() {
        let x = Array2::zeros((4, 1));
        let d = Dataset::from_parts(x, vec![0, 1, 1, 1]).unwrap();
        assert!(matches!(
            stratified_split(&d, 0.5, 0),
            Err(Error::CannotStratify { class: 0, count: 1, .. })
        ));
    }

    #[test]
    fn kfold_partitions_and_stratifies() {
        let labels: Vec<u8> = (0..30).map(|i| u8::from(i % 5 != 0)).collect();
        let folds = stratified_kfold(&labels, 3, 9).unwrap();
        let mut seen = [0; 30];
        for f in &folds {
            for &i in &f.validation {
                seen[i] += 1;
            }
            assert_eq!(f.train.len() + f.validation.len(), 30);
            assert_eq!(f.validation.iter().filter(|&&i| labels[i] == 0).count(), 2);
        }
        assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn dataset_rejects_non_finite() {
        let x = array![[1.0], [f64::NAN]];
        assert!(Dataset::from_parts(x, vec![0, 1]).is_err());
    }
}
