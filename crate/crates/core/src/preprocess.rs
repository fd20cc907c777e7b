//! Min-max feature scaling and SMOTE oversampling.

use std::io::Write;

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ingest::{Dataset, ATTACK, NORMAL};
use crate::rng;

/// Per-feature extrema captured from training data.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

pub fn fit_minmax(train: &Dataset) -> Scaler {
    fit_minmax_matrix(train.features().view())
}

pub fn fit_minmax_matrix(m: ArrayView2<'_, f64>) -> Scaler {
    let mut mins = vec![f64::INFINITY; m.ncols()];
    let mut maxs = vec![f64::NEG_INFINITY; m.ncols()];
    for row in m.rows() {
        for (j, &v) in row.iter().enumerate() {
            mins[j] = mins[j].min(v);
            maxs[j] = maxs[j].max(v);
        }
    }
    Scaler { mins, maxs }
}

impl Scaler {
    pub fn n_features(&self) -> usize {
        self.mins.len()
    }

    /// Maps `x` to `(x - min) / (max - min)`. Constant features map to 0 and
    /// values outside the training range are left unclamped.
    pub fn apply(&self, m: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if m.ncols() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                found: m.ncols(),
            });
        }
        let mut out = m.to_owned();
        for mut row in out.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.scale_value(j, *v);
            }
        }
        Ok(out)
    }

    pub fn scale_value(&self, feature: usize, x: f64) -> f64 {
        let (lo, hi) = (self.mins[feature], self.maxs[feature]);
        if hi > lo {
            (x - lo) / (hi - lo)
        } else {
            0.0
        }
    }

    pub fn apply_dataset(&self, d: &Dataset) -> Result<Dataset> {
        d.with_features(self.apply(d.features().view())?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoteConfig {
    pub k: usize,
    /// Desired minority/majority ratio after oversampling, in (0, 1].
    pub target_ratio: f64,
    pub seed: u64,
}

impl Default for SmoteConfig {
    fn default() -> Self {
        SmoteConfig {
            k: 5,
            target_ratio: 1.0,
            seed: 0,
        }
    }
}

impl SmoteConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("SMOTE k must be at least 1".into()));
        }
        if !(self.target_ratio > 0.0 && self.target_ratio <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "SMOTE target_ratio must lie in (0, 1], got {}",
                self.target_ratio
            )));
        }
        Ok(())
    }
}

/// How one synthetic row was produced. Indices refer to rows of the SMOTE input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticRecord {
    pub seed_index: usize,
    pub neighbor_index: usize,
    pub lambda: f64,
}

#[derive(Debug, Clone)]
pub struct SmoteOutput {
    /// Original rows first, then synthetic minority rows.
    pub dataset: Dataset,
    pub minority_class: u8,
    /// One record per synthetic row, in output order.
    pub provenance: Vec<SyntheticRecord>,
}

impl SmoteOutput {
    pub fn n_synthetic(&self) -> usize {
        self.provenance.len()
    }

    pub fn write_provenance<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["synthetic_row", "seed_index", "neighbor_index", "lambda"])?;
        let first = self.dataset.n_rows() - self.provenance.len();
        for (i, rec) in self.provenance.iter().enumerate() {
            w.write_record([
                (first + i).to_string(),
                rec.seed_index.to_string(),
                rec.neighbor_index.to_string(),
                rec.lambda.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<writer>", e))?;
        Ok(())
    }
}

/// Number of synthetic rows needed to bring `minority` up to
/// `ceil(target_ratio * majority)`.
pub fn synthetic_count(minority: usize, majority: usize, target_ratio: f64) -> usize {
    let target = (target_ratio * majority as f64).ceil() as usize;
    target.saturating_sub(minority)
}

/// Indices (into `points`) of the `k` nearest other points to each point,
/// by squared Euclidean distance, ties broken by lower index.
pub fn nearest_neighbors(points: ArrayView2<'_, f64>, k: usize) -> Vec<Vec<usize>> {
    let n = points.nrows();
    (0..n)
        .into_par_iter()
        .map(|a| {
            let pa = points.row(a);
            let mut dist: Vec<(f64, usize)> = (0..n)
                .filter(|&b| b != a)
                .map(|b| {
                    let d2 = pa
                        .iter()
                        .zip(points.row(b).iter())
                        .map(|(x, y)| (x - y) * (x - y))
                        .sum::<f64>();
                    (d2, b)
                })
                .collect();
            let k = k.min(dist.len());
            if k > 0 && k < dist.len() {
                dist.select_nth_unstable_by(k - 1, |x, y| x.partial_cmp(y).unwrap());
            }
            dist.truncate(k);
            dist.sort_by(|x, y| x.partial_cmp(y).unwrap());
            dist.into_iter().map(|(_, b)| b).collect()
        })
        .collect()
}

/// Oversamples the minority class by interpolating towards nearest minority neighbors.
///
/// Synthetic sample `s` uses minority point `s mod M_min` as its seed and
/// reads its own RNG stream, so the output is fixed by `cfg.seed` alone.
pub fn smote(d: &Dataset, cfg: &SmoteConfig) -> Result<SmoteOutput> {
    cfg.validate()?;
    let counts = d.class_counts();
    let n_normal = counts.get(&NORMAL).copied().unwrap_or(0);
    let n_attack = counts.get(&ATTACK).copied().unwrap_or(0);
    let (minority_class, n_min, n_maj) = if n_normal <= n_attack {
        (NORMAL, n_normal, n_attack)
    } else {
        (ATTACK, n_attack, n_normal)
    };
    if n_min == 0 {
        return Err(Error::EmptyMinority);
    }

    let n_synth = synthetic_count(n_min, n_maj, cfg.target_ratio);
    if n_synth == 0 {
        return Ok(SmoteOutput {
            dataset: d.clone(),
            minority_class,
            provenance: Vec::new(),
        });
    }

    let minority_rows: Vec<usize> = d
        .labels()
        .iter()
        .enumerate()
        .filter(|(_, &l)| l == minority_class)
        .map(|(i, _)| i)
        .collect();
    let minority = d.features().select(Axis(0), &minority_rows);
    let k = cfg.k.min(n_min - 1);
    if k == 0 {
        log::warn!("SMOTE: single minority instance, emitting {n_synth} exact duplicates");
    }
    let neighbors = nearest_neighbors(minority.view(), k);

    let n_features = d.n_features();
    let provenance: Vec<SyntheticRecord> = (0..n_synth)
        .into_par_iter()
        .map(|s| {
            let base = s % n_min;
            if k == 0 {
                return SyntheticRecord {
                    seed_index: minority_rows[base],
                    neighbor_index: minority_rows[base],
                    lambda: 0.0,
                };
            }
            let mut rng = rng::stream(cfg.seed, s as u64);
            let nb = neighbors[base][rng.random_range(0..k)];
            let lambda: f64 = rng.random();
            SyntheticRecord {
                seed_index: minority_rows[base],
                neighbor_index: minority_rows[nb],
                lambda,
            }
        })
        .collect();

    let m = d.n_rows();
    let mut features = Array2::zeros((m + n_synth, n_features));
    features.slice_mut(ndarray::s![..m, ..]).assign(d.features());
    for (s, rec) in provenance.iter().enumerate() {
        let x = d.row(rec.seed_index);
        let nb = d.row(rec.neighbor_index);
        let mut out = features.row_mut(m + s);
        for j in 0..n_features {
            out[j] = x[j] + rec.lambda * (nb[j] - x[j]);
        }
    }
    let mut labels = d.labels().to_vec();
    labels.resize(m + n_synth, minority_class);
    let dataset = Dataset::new(features, labels, d.feature_names().to_vec())?;
    Ok(SmoteOutput {
        dataset,
        minority_class,
        provenance,
    })
}
