//! CART classification tree with Gini impurity.
//!
//! Candidate thresholds are midpoints between consecutive distinct values
//! of a feature. Split quality is compared exactly: for a split with child
//! class counts `l` and `r`, the impurity decrease is
//! `S/n - P/n²` with `S = Σl²/|l| + Σr²/|r|` and `P = Σp²` over the parent
//! counts, so ranking splits only needs the rational `S`, which is compared
//! by integer cross-multiplication. Ties go to the lower feature index,
//! then the lower threshold.
//!
//! Each node's split search is independent per feature and is spread over
//! the rayon pool for large nodes; per-feature winners are reduced in
//! ascending feature order, so the result does not depend on scheduling.

use std::cmp::Ordering;
use std::fmt::Write as _;

use ndarray::{Array2, ArrayView2};
use rand::seq::index::sample;
use rayon::prelude::*;

use crate::bayesopt::Config;
use crate::error::{Error, Result};
use crate::ingest::{Dataset, NUM_CLASSES};
use crate::rng::{self, StageRng};

/// Nodes with at least this many `rows × features` search in parallel.
const PARALLEL_WORK: usize = 16_384;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub max_features_fraction: f64,
}

impl Default for HyperParams {
    /// Unbounded depth (capped at 50), split anything, use every feature.
    fn default() -> Self {
        HyperParams {
            max_depth: 50,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features_fraction: 1.0,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth == 0 {
            return Err(Error::InvalidConfig("max_depth must be positive".into()));
        }
        if self.min_samples_split < 2 {
            return Err(Error::InvalidConfig("min_samples_split must be at least 2".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::InvalidConfig("min_samples_leaf must be at least 1".into()));
        }
        if !(self.max_features_fraction > 0.0 && self.max_features_fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "max_features_fraction must lie in (0, 1], got {}",
                self.max_features_fraction
            )));
        }
        Ok(())
    }

    /// Reads a tuned configuration; dimensions it does not name keep their defaults.
    pub fn from_config(config: &Config) -> Result<Self> {
        let mut hp = HyperParams::default();
        for (name, v) in config.iter() {
            match name {
                "max_depth" => hp.max_depth = v.round() as usize,
                "min_samples_split" => hp.min_samples_split = v.round() as usize,
                "min_samples_leaf" => hp.min_samples_leaf = v.round() as usize,
                "max_features_fraction" => hp.max_features_fraction = v,
                other => {
                    return Err(Error::InvalidConfig(format!(
                        "unknown tree hyperparameter '{other}'"
                    )))
                }
            }
        }
        hp.validate()?;
        Ok(hp)
    }

    /// Number of features examined per node out of `n`.
    pub fn features_per_node(&self, n: usize) -> usize {
        ((self.max_features_fraction * n as f64).ceil() as usize).clamp(1, n)
    }
}

/// `1 - Σ (c_i / Σc)²`.
pub fn gini(counts: &[usize]) -> Result<f64> {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(Error::ZeroCounts);
    }
    let t = total as f64;
    Ok(1.0 - counts.iter().map(|&c| (c as f64 / t).powi(2)).sum::<f64>())
}

/// Threshold between two consecutive distinct sorted values `a < b`.
/// Guaranteed to satisfy `a <= t < b`.
pub fn midpoint(a: f64, b: f64) -> f64 {
    let mid = a + (b - a) / 2.0;
    if mid >= b || !mid.is_finite() {
        a
    } else {
        mid
    }
}

/// `Σ l²/|l| + Σ r²/|r|` as an exact fraction.
#[derive(Debug, Clone, Copy)]
struct SplitScore {
    num: u128,
    den: u128,
}

impl SplitScore {
    fn new(left: &[usize; NUM_CLASSES], right: &[usize; NUM_CLASSES]) -> Self {
        let nl: u128 = left.iter().map(|&c| c as u128).sum();
        let nr: u128 = right.iter().map(|&c| c as u128).sum();
        let sl: u128 = left.iter().map(|&c| (c as u128) * (c as u128)).sum();
        let sr: u128 = right.iter().map(|&c| (c as u128) * (c as u128)).sum();
        SplitScore {
            num: sl * nr + sr * nl,
            den: nl * nr,
        }
    }

    fn cmp(&self, other: &SplitScore) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }

    /// True when the split strictly lowers impurity below the parent's.
    fn improves(&self, parent: &[usize; NUM_CLASSES]) -> bool {
        let n: u128 = parent.iter().map(|&c| c as u128).sum();
        let p: u128 = parent.iter().map(|&c| (c as u128) * (c as u128)).sum();
        self.num * n > p * self.den
    }

    fn decrease(&self, parent: &[usize; NUM_CLASSES]) -> f64 {
        let n = parent.iter().sum::<usize>() as f64;
        let p: f64 = parent.iter().map(|&c| (c as f64) * (c as f64)).sum();
        (self.num as f64 / self.den as f64) / n - p / (n * n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    /// Weighted Gini decrease `g(parent) - |l|/n·g(l) - |r|/n·g(r)`.
    pub decrease: f64,
}

fn class_counts_of(rows: &[usize], y: &[u8]) -> [usize; NUM_CLASSES] {
    let mut c = [0usize; NUM_CLASSES];
    for &r in rows {
        c[y[r] as usize] += 1;
    }
    c
}

/// Best threshold on one feature, given the node's rows sorted by that feature.
fn scan_feature(
    col: &[f64],
    y: &[u8],
    sorted_rows: &[usize],
    parent: &[usize; NUM_CLASSES],
    min_leaf: usize,
) -> Option<(SplitScore, f64)> {
    let n = sorted_rows.len();
    let mut left = [0usize; NUM_CLASSES];
    let mut best: Option<(SplitScore, f64)> = None;
    for i in 1..n {
        left[y[sorted_rows[i - 1]] as usize] += 1;
        if i < min_leaf || n - i < min_leaf {
            continue;
        }
        let (a, b) = (col[sorted_rows[i - 1]], col[sorted_rows[i]]);
        if a >= b {
            continue;
        }
        let mut right = *parent;
        for c in 0..NUM_CLASSES {
            right[c] -= left[c];
        }
        let score = SplitScore::new(&left, &right);
        if best.as_ref().is_none_or(|(s, _)| score.cmp(s) == Ordering::Greater) {
            best = Some((score, midpoint(a, b)));
        }
    }
    best
}

/// Feature-major copy of the matrix so each feature scan reads a contiguous column.
struct Columns {
    data: Vec<Vec<f64>>,
}

impl Columns {
    fn new(x: ArrayView2<'_, f64>) -> Self {
        Columns {
            data: x.columns().into_iter().map(|c| c.to_vec()).collect(),
        }
    }
}

/// Reduces per-feature winners in ascending feature order.
fn pick_split(
    candidates: Vec<(usize, Option<(SplitScore, f64)>)>,
    parent: &[usize; NUM_CLASSES],
) -> Option<Split> {
    let mut best: Option<(usize, SplitScore, f64)> = None;
    for (f, cand) in candidates {
        if let Some((score, thr)) = cand {
            if best.as_ref().is_none_or(|(_, s, _)| score.cmp(s) == Ordering::Greater) {
                best = Some((f, score, thr));
            }
        }
    }
    let (feature, score, threshold) = best?;
    score.improves(parent).then(|| Split {
        feature,
        threshold,
        decrease: score.decrease(parent),
    })
}

fn sort_rows_by(col: &[f64], rows: &mut [usize]) {
    rows.sort_unstable_by(|&a, &b| col[a].total_cmp(&col[b]).then(a.cmp(&b)));
}

/// Best split of `rows` over the features in `feature_subset`.
///
/// Returns `None` when `rows` is smaller than `min_samples_split`, when no
/// threshold leaves `min_samples_leaf` rows on both sides, or when the best
/// decrease is not positive.
pub fn best_split(
    x: ArrayView2<'_, f64>,
    y: &[u8],
    rows: &[usize],
    hp: &HyperParams,
    feature_subset: &[usize],
) -> Option<Split> {
    if rows.len() < hp.min_samples_split.max(2) {
        return None;
    }
    let cols = Columns::new(x);
    let parent = class_counts_of(rows, y);
    let mut features = feature_subset.to_vec();
    features.sort_unstable();
    features.dedup();
    let candidates = features
        .iter()
        .map(|&f| {
            let mut sorted = rows.to_vec();
            sort_rows_by(&cols.data[f], &mut sorted);
            (f, scan_feature(&cols.data[f], y, &sorted, &parent, hp.min_samples_leaf))
        })
        .collect();
    pick_split(candidates, &parent)
}

/// Seeded feature subset for one node, ascending. Draws nothing when every
/// feature is used.
pub fn feature_subset(rng: &mut StageRng, n_features: usize, size: usize) -> Vec<usize> {
    if size >= n_features {
        return (0..n_features).collect();
    }
    let mut f = sample(rng, n_features, size).into_vec();
    f.sort_unstable();
    f
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf {
        counts: [usize; NUM_CLASSES],
        class: u8,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        counts: [usize; NUM_CLASSES],
    },
}

impl Node {
    pub fn counts(&self) -> &[usize; NUM_CLASSES] {
        match self {
            Node::Leaf { counts, .. } | Node::Split { counts, .. } => counts,
        }
    }
}

/// Majority class; ties go to class 0.
pub fn majority(counts: &[usize; NUM_CLASSES]) -> u8 {
    let mut best = 0;
    for c in 1..NUM_CLASSES {
        if counts[c] > counts[best] {
            best = c;
        }
    }
    best as u8
}

/// Fitted tree. Node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeModel {
    nodes: Vec<Node>,
    n_features: usize,
    depth: usize,
    hp: HyperParams,
}

struct Task {
    node: usize,
    depth: usize,
    /// Per feature: the node's rows sorted by that feature.
    sorted: Vec<Vec<usize>>,
}

pub fn fit_tree(train: &Dataset, hp: &HyperParams, seed: u64) -> Result<TreeModel> {
    hp.validate()?;
    let x = train.features().view();
    let y = train.labels();
    let n_features = train.n_features();
    let cols = Columns::new(x);
    let subset_size = hp.features_per_node(n_features);
    let mut rng = rng::seeded(seed);

    let all_rows: Vec<usize> = (0..train.n_rows()).collect();
    let sorted: Vec<Vec<usize>> = (0..n_features)
        .into_par_iter()
        .map(|f| {
            let mut r = all_rows.clone();
            sort_rows_by(&cols.data[f], &mut r);
            r
        })
        .collect();

    let mut nodes = vec![Node::Leaf {
        counts: [0; NUM_CLASSES],
        class: 0,
    }];
    let mut depth = 0;
    let mut goes_left = vec![false; train.n_rows()];
    let mut stack = vec![Task {
        node: 0,
        depth: 0,
        sorted,
    }];

    while let Some(task) = stack.pop() {
        let rows = &task.sorted[0];
        let counts = class_counts_of(rows, y);
        depth = depth.max(task.depth);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;

        let split = if task.depth >= hp.max_depth || rows.len() < hp.min_samples_split || pure {
            None
        } else {
            let features = feature_subset(&mut rng, n_features, subset_size);
            let scan = |&f: &usize| {
                (f, scan_feature(&cols.data[f], y, &task.sorted[f], &counts, hp.min_samples_leaf))
            };
            let candidates = if rows.len() * features.len() >= PARALLEL_WORK {
                features.par_iter().map(scan).collect()
            } else {
                features.iter().map(scan).collect()
            };
            pick_split(candidates, &counts)
        };

        let Some(split) = split else {
            nodes[task.node] = Node::Leaf {
                counts,
                class: majority(&counts),
            };
            continue;
        };

        let col = &cols.data[split.feature];
        for &r in rows {
            goes_left[r] = col[r] <= split.threshold;
        }
        let (left_sorted, right_sorted): (Vec<Vec<usize>>, Vec<Vec<usize>>) = task
            .sorted
            .into_iter()
            .map(|list| list.into_iter().partition(|&r| goes_left[r]))
            .unzip();

        let left = nodes.len();
        let right = left + 1;
        let placeholder = Node::Leaf {
            counts: [0; NUM_CLASSES],
            class: 0,
        };
        nodes.push(placeholder.clone());
        nodes.push(placeholder);
        nodes[task.node] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
            counts,
        };
        // Right is pushed first so the left subtree is grown (and draws its
        // feature subsets) before the right one.
        stack.push(Task {
            node: right,
            depth: task.depth + 1,
            sorted: right_sorted,
        });
        stack.push(Task {
            node: left,
            depth: task.depth + 1,
            sorted: left_sorted,
        });
    }

    Ok(TreeModel {
        nodes,
        n_features,
        depth,
        hp: *hp,
    })
}

impl TreeModel {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn hyper_params(&self) -> &HyperParams {
        &self.hp
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn predict(&self, row: &[f64]) -> Result<u8> {
        if row.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                found: row.len(),
            });
        }
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { class, .. } => return Ok(*class),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => i = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn predict_matrix(&self, x: &Array2<f64>) -> Result<Vec<u8>> {
        if x.ncols() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                found: x.ncols(),
            });
        }
        x.rows()
            .into_iter()
            .map(|r| self.predict(&r.to_vec()))
            .collect()
    }

    /// Indented text rendering, one node per line.
    pub fn dump(&self, feature_names: &[String]) -> String {
        let mut out = String::new();
        let mut stack = vec![(0usize, 0usize, "")];
        while let Some((i, level, side)) = stack.pop() {
            let pad = "  ".repeat(level);
            match &self.nodes[i] {
                Node::Leaf { counts, class } => {
                    let _ = writeln!(out, "{pad}{side}leaf class={class} counts={counts:?}");
                }
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    counts,
                } => {
                    let name = feature_names
                        .get(*feature)
                        .cloned()
                        .unwrap_or_else(|| format!("f{feature}"));
                    let _ = writeln!(out, "{pad}{side}{name} <= {threshold} counts={counts:?}");
                    stack.push((*right, level + 1, "else: "));
                    stack.push((*left, level + 1, "then: "));
                }
            }
        }
        out
    }
}

pub fn predict(t: &TreeModel, row: &[f64]) -> Result<u8> {
    t.predict(row)
}
