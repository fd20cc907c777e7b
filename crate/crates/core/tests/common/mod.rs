//! Independent reference implementations used as test oracles.
//!
//! None of these call into the code paths they check: the GP oracle uses
//! dense nalgebra inverses and determinants, the tree oracle re-scans every
//! row for every candidate split, the PCA oracle runs cyclic Jacobi, and so on.

#![allow(dead_code)]

use botdetect::dtree::{self, HyperParams};
use botdetect::gp::KernelParams;
use botdetect::rng;
use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, ArrayView2};
use rand::Rng;

// ---------------------------------------------------------------- GP

pub fn rbf(p: &KernelParams, a: &[f64], b: &[f64]) -> f64 {
    let mut d2 = 0.0;
    for i in 0..a.len() {
        d2 += (a[i] - b[i]).powi(2);
    }
    p.signal_variance * (-0.5 * d2 / p.lengthscale.powi(2)).exp()
}

pub struct DenseGp {
    pub k_inv: DMatrix<f64>,
    pub log_det: f64,
    pub y: DVector<f64>,
    pub x: Vec<Vec<f64>>,
    pub p: KernelParams,
}

pub fn dense_gp(x: &[Vec<f64>], y: &[f64], p: KernelParams, noise: f64) -> DenseGp {
    let t = x.len();
    let k = DMatrix::from_fn(t, t, |i, j| rbf(&p, &x[i], &x[j]) + if i == j { noise } else { 0.0 });
    let det = k.determinant();
    DenseGp {
        k_inv: k.try_inverse().expect("invertible"),
        log_det: det.ln(),
        y: DVector::from_column_slice(y),
        x: x.to_vec(),
        p,
    }
}

impl DenseGp {
    pub fn predict(&self, q: &[f64]) -> (f64, f64) {
        let ks = DVector::from_iterator(self.x.len(), self.x.iter().map(|xi| rbf(&self.p, xi, q)));
        let mean = (ks.transpose() * &self.k_inv * &self.y)[(0, 0)];
        let var = rbf(&self.p, q, q) - (ks.transpose() * &self.k_inv * &ks)[(0, 0)];
        (mean, var)
    }

    pub fn lml(&self) -> f64 {
        let t = self.x.len() as f64;
        let fit = (self.y.transpose() * &self.k_inv * &self.y)[(0, 0)];
        -0.5 * fit - 0.5 * self.log_det - 0.5 * t * (2.0 * std::f64::consts::PI).ln()
    }
}

pub fn to_array(x: &[Vec<f64>]) -> Array2<f64> {
    Array2::from_shape_fn((x.len(), x[0].len()), |(i, j)| x[i][j])
}

// ---------------------------------------------------------------- EI

/// E[max(Y - b - xi, 0)] for Y ~ N(mean, std²) by composite Simpson quadrature.
pub fn ei_quadrature(mean: f64, std: f64, best: f64, xi: f64) -> f64 {
    let b = best + xi;
    let lo = b.max(mean - 14.0 * std);
    let hi = mean + 14.0 * std;
    if hi <= lo {
        return 0.0;
    }
    let n = 200_000;
    let h = (hi - lo) / n as f64;
    let f = |y: f64| {
        let z = (y - mean) / std;
        (y - b) * (-0.5 * z * z).exp() / (std * (2.0 * std::f64::consts::PI).sqrt())
    };
    let mut s = f(lo) + f(hi);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(lo + i as f64 * h);
    }
    s * h / 3.0
}

// ---------------------------------------------------------------- trees

/// Pre-order flattening used for node-for-node comparison.
#[derive(Debug, Clone, PartialEq)]
pub enum FlatNode {
    Leaf([usize; 2]),
    Split(usize, f64, [usize; 2]),
}

pub fn flatten(tree: &dtree::TreeModel) -> Vec<FlatNode> {
    let mut out = Vec::new();
    let mut stack = vec![0usize];
    while let Some(i) = stack.pop() {
        match &tree.nodes()[i] {
            dtree::Node::Leaf { counts, .. } => out.push(FlatNode::Leaf(*counts)),
            dtree::Node::Split {
                feature,
                threshold,
                left,
                right,
                counts,
            } => {
                out.push(FlatNode::Split(*feature, *threshold, *counts));
                stack.push(*right);
                stack.push(*left);
            }
        }
    }
    out
}

fn counts(rows: &[usize], y: &[u8]) -> [usize; 2] {
    let mut c = [0; 2];
    for &r in rows {
        c[y[r] as usize] += 1;
    }
    c
}

/// Weighted child impurity `(|l|·g(l) + |r|·g(r)) / n` as an exact fraction.
fn weighted_impurity(l: [usize; 2], r: [usize; 2]) -> (i128, i128) {
    let nl = (l[0] + l[1]) as i128;
    let nr = (r[0] + r[1]) as i128;
    let sl = (l[0] as i128).pow(2) + (l[1] as i128).pow(2);
    let sr = (r[0] as i128).pow(2) + (r[1] as i128).pow(2);
    // |l|·g(l) = (nl² - sl)/nl
    let num = (nl * nl - sl) * nr + (nr * nr - sr) * nl;
    let den = nl * nr * (nl + nr);
    (num, den)
}

fn less(a: (i128, i128), b: (i128, i128)) -> bool {
    a.0 * b.1 < b.0 * a.1
}

/// Exhaustive split search: every (feature, midpoint) pair, counts by full scan.
pub fn brute_force_split(
    x: ArrayView2<'_, f64>,
    y: &[u8],
    rows: &[usize],
    hp: &HyperParams,
    features: &[usize],
) -> Option<(usize, f64)> {
    if rows.len() < hp.min_samples_split {
        return None;
    }
    let parent = counts(rows, y);
    let n = rows.len() as i128;
    let parent_imp = (n * n - (parent[0] as i128).pow(2) - (parent[1] as i128).pow(2), n * n);
    let mut best: Option<((i128, i128), usize, f64)> = None;
    let mut feats = features.to_vec();
    feats.sort_unstable();
    for &f in &feats {
        let mut vals: Vec<f64> = rows.iter().map(|&r| x[[r, f]]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let thr = dtree::midpoint(w[0], w[1]);
            let left: Vec<usize> = rows.iter().copied().filter(|&r| x[[r, f]] <= thr).collect();
            let right: Vec<usize> = rows.iter().copied().filter(|&r| x[[r, f]] > thr).collect();
            if left.len() < hp.min_samples_leaf || right.len() < hp.min_samples_leaf {
                continue;
            }
            let imp = weighted_impurity(counts(&left, y), counts(&right, y));
            if best.is_none_or(|(b, _, _)| less(imp, b)) {
                best = Some((imp, f, thr));
            }
        }
    }
    let (imp, f, thr) = best?;
    less(imp, parent_imp).then_some((f, thr))
}

/// Reference recursive CART builder with the same stopping and tie rules.
pub fn reference_tree(
    x: ArrayView2<'_, f64>,
    y: &[u8],
    hp: &HyperParams,
    seed: u64,
) -> Vec<FlatNode> {
    let mut rng = rng::seeded(seed);
    let mut out = Vec::new();
    let rows: Vec<usize> = (0..y.len()).collect();
    grow(x, y, hp, &rows, 0, &mut rng, &mut out);
    out
}

fn grow(
    x: ArrayView2<'_, f64>,
    y: &[u8],
    hp: &HyperParams,
    rows: &[usize],
    depth: usize,
    rng: &mut rng::StageRng,
    out: &mut Vec<FlatNode>,
) {
    let c = counts(rows, y);
    let pure = c[0] == 0 || c[1] == 0;
    if depth >= hp.max_depth || rows.len() < hp.min_samples_split || pure {
        out.push(FlatNode::Leaf(c));
        return;
    }
    let n = x.ncols();
    let feats = dtree::feature_subset(rng, n, hp.features_per_node(n));
    match brute_force_split(x, y, rows, hp, &feats) {
        None => out.push(FlatNode::Leaf(c)),
        Some((f, thr)) => {
            out.push(FlatNode::Split(f, thr, c));
            let left: Vec<usize> = rows.iter().copied().filter(|&r| x[[r, f]] <= thr).collect();
            let right: Vec<usize> = rows.iter().copied().filter(|&r| x[[r, f]] > thr).collect();
            grow(x, y, hp, &left, depth + 1, rng, out);
            grow(x, y, hp, &right, depth + 1, rng, out);
        }
    }
}

/// Random 2-class dataset with values on a coarse grid so ties occur.
pub fn random_dataset(seed: u64, max_rows: usize, max_features: usize) -> (Array2<f64>, Vec<u8>) {
    let mut r = rng::seeded(seed);
    let m = r.random_range(2..=max_rows);
    let n = r.random_range(1..=max_features);
    let levels = r.random_range(3..12) as f64;
    let x = Array2::from_shape_fn((m, n), |_| (r.random::<f64>() * levels).floor() / levels);
    let y = (0..m).map(|_| u8::from(r.random::<f64>() < 0.6)).collect();
    (x, y)
}

// ---------------------------------------------------------------- PCA

/// Eigenpairs of a symmetric matrix by cyclic Jacobi rotations, descending.
pub fn jacobi_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut m = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for row in v.iter_mut() {
                    let (vkp, vkq) = (row[p], row[q]);
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j][j].total_cmp(&m[i][i]));
    let vals = order.iter().map(|&i| m[i][i]).collect();
    let vecs = order
        .iter()
        .map(|&i| (0..n).map(|k| v[k][i]).collect())
        .collect();
    (vals, vecs)
}

// ---------------------------------------------------------------- SMOTE

/// Re-derives SMOTE output from the documented sampling rule with brute-force neighbors.
pub fn smote_reference(
    x: &Array2<f64>,
    y: &[u8],
    minority: u8,
    k: usize,
    n_synth: usize,
    seed: u64,
) -> Vec<Vec<f64>> {
    let rows: Vec<usize> = (0..y.len()).filter(|&i| y[i] == minority).collect();
    let k = k.min(rows.len() - 1);
    let mut out = Vec::new();
    for s in 0..n_synth {
        let base = rows[s % rows.len()];
        let mut others: Vec<(f64, usize)> = rows
            .iter()
            .enumerate()
            .filter(|(_, &r)| r != base)
            .map(|(local, &r)| {
                let d: f64 = (0..x.ncols()).map(|j| (x[[base, j]] - x[[r, j]]).powi(2)).sum();
                (d, local)
            })
            .collect();
        others.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut r = rng::stream(seed, s as u64);
        let pick = others[r.random_range(0..k)].1;
        let lambda: f64 = r.random();
        let nb = rows[pick];
        out.push((0..x.ncols()).map(|j| x[[base, j]] + lambda * (x[[nb, j]] - x[[base, j]])).collect());
    }
    out
}
