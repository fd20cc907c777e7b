//! Classification metrics and two-component PCA for plot export.

use std::fmt;
use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::ingest::{ATTACK, NORMAL};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
    pub positive_class: u8,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// Same counts seen from the other class.
    pub fn flipped(&self, positive_class: u8) -> ConfusionMatrix {
        ConfusionMatrix {
            tp: self.tn,
            tn: self.tp,
            fp: self.fn_,
            fn_: self.fp,
            positive_class,
        }
    }
}

pub fn confusion(y_true: &[u8], y_pred: &[u8], positive_class: u8) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch(y_true.len(), y_pred.len()));
    }
    if y_true.is_empty() {
        return Err(Error::Empty("no predictions to score".into()));
    }
    let mut cm = ConfusionMatrix {
        tp: 0,
        tn: 0,
        fp: 0,
        fn_: 0,
        positive_class,
    };
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t == positive_class, p == positive_class) {
            (true, true) => cm.tp += 1,
            (false, false) => cm.tn += 1,
            (false, true) => cm.fp += 1,
            (true, false) => cm.fn_ += 1,
        }
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Accuracy, precision, recall and F-score; empty denominators give 0.
pub fn compute_metrics(cm: &ConfusionMatrix) -> Metrics {
    let accuracy = ratio(cm.tp + cm.tn, cm.total());
    let precision = ratio(cm.tp, cm.tp + cm.fp);
    let recall = ratio(cm.tp, cm.tp + cm.fn_);
    let f_score = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Metrics {
        accuracy,
        precision,
        recall,
        f_score,
    }
}

/// Metrics under both positive-class conventions plus their macro averages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    /// Positive class = attack.
    pub attack: Metrics,
    /// Positive class = normal.
    pub normal: Metrics,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f_score: f64,
}

impl MetricsReport {
    pub fn from_confusion(cm: &ConfusionMatrix) -> Self {
        let attack_cm = if cm.positive_class == ATTACK { *cm } else { cm.flipped(ATTACK) };
        let attack = compute_metrics(&attack_cm);
        let normal = compute_metrics(&attack_cm.flipped(NORMAL));
        MetricsReport {
            confusion: attack_cm,
            accuracy: attack.accuracy,
            attack,
            normal,
            macro_precision: (attack.precision + normal.precision) / 2.0,
            macro_recall: (attack.recall + normal.recall) / 2.0,
            macro_f_score: (attack.f_score + normal.f_score) / 2.0,
        }
    }

    /// Metrics for the configured positive class.
    pub fn for_class(&self, positive_class: u8) -> &Metrics {
        if positive_class == ATTACK {
            &self.attack
        } else {
            &self.normal
        }
    }

    /// `key = value` lines, each key prefixed with `prefix.`.
    pub fn write_kv(&self, prefix: &str, out: &mut impl fmt::Write) -> fmt::Result {
        let cm = &self.confusion;
        writeln!(out, "{prefix}.tp_attack = {}", cm.tp)?;
        writeln!(out, "{prefix}.tn_attack = {}", cm.tn)?;
        writeln!(out, "{prefix}.fp_attack = {}", cm.fp)?;
        writeln!(out, "{prefix}.fn_attack = {}", cm.fn_)?;
        writeln!(out, "{prefix}.accuracy = {}", self.accuracy)?;
        for (name, m) in [("attack", &self.attack), ("normal", &self.normal)] {
            writeln!(out, "{prefix}.{name}.precision = {}", m.precision)?;
            writeln!(out, "{prefix}.{name}.recall = {}", m.recall)?;
            writeln!(out, "{prefix}.{name}.f_score = {}", m.f_score)?;
        }
        writeln!(out, "{prefix}.macro.precision = {}", self.macro_precision)?;
        writeln!(out, "{prefix}.macro.recall = {}", self.macro_recall)?;
        writeln!(out, "{prefix}.macro.f_score = {}", self.macro_f_score)
    }
}

pub fn evaluate(y_true: &[u8], y_pred: &[u8]) -> Result<MetricsReport> {
    Ok(MetricsReport::from_confusion(&confusion(y_true, y_pred, ATTACK)?))
}

#[derive(Debug, Clone)]
pub struct Pca2 {
    /// M×2 scores of the centered data.
    pub projections: Array2<f64>,
    /// 2×N, rows orthonormal.
    pub components: Array2<f64>,
    pub explained_variance: [f64; 2],
    pub mean: Vec<f64>,
}

/// Top two principal components from the sample covariance (divisor M-1).
///
/// Each component is signed so its largest-magnitude entry is positive.
pub fn pca2(m: ArrayView2<'_, f64>) -> Result<Pca2> {
    let (rows, cols) = m.dim();
    if rows < 2 || cols < 2 {
        return Err(Error::InvalidDataset(format!(
            "PCA needs at least 2 rows and 2 columns, got {rows}×{cols}"
        )));
    }
    let mean: Vec<f64> = (0..cols).map(|j| m.column(j).sum() / rows as f64).collect();
    let centered = DMatrix::from_fn(rows, cols, |i, j| m[[i, j]] - mean[j]);
    let cov = (centered.transpose() * &centered) / (rows as f64 - 1.0);
    if cov.trace() <= 0.0 {
        return Err(Error::ZeroVariance);
    }

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut components = Array2::zeros((2, cols));
    let mut explained = [0.0; 2];
    for (k, &idx) in order.iter().take(2).enumerate() {
        let v = eig.eigenvectors.column(idx);
        let pivot = (0..cols)
            .max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()).then(b.cmp(&a)))
            .expect("cols >= 2");
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..cols {
            components[[k, j]] = sign * v[j];
        }
        explained[k] = eig.eigenvalues[idx].max(0.0);
    }

    let mut projections = Array2::zeros((rows, 2));
    for i in 0..rows {
        for k in 0..2 {
            projections[[i, k]] = (0..cols).map(|j| centered[(i, j)] * components[[k, j]]).sum();
        }
    }
    Ok(Pca2 {
        projections,
        components,
        explained_variance: explained,
        mean,
    })
}

impl Pca2 {
    /// `pc1,pc2,label` rows for external plotting.
    pub fn write_csv<W: Write>(&self, labels: &[u8], writer: W) -> Result<()> {
        if labels.len() != self.projections.nrows() {
            return Err(Error::LengthMismatch(self.projections.nrows(), labels.len()));
        }
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["pc1", "pc2", "label"])?;
        for (row, label) in self.projections.rows().into_iter().zip(labels) {
            w.write_record([row[0].to_string(), row[1].to_string(), label.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<writer>", e))?;
        Ok(())
    }
}
