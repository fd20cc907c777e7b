//! Seeded synthetic flow data for tests, demos and the always-on acceptance check.

use ndarray::Array2;
use rand_distr::{Distribution, Normal};

use crate::error::Result;
use crate::ingest::{Dataset, ATTACK, NORMAL};
use crate::rng;

/// Two isotropic 2-D Gaussian clusters with a small overlap.
///
/// Attack rows are drawn around (0, 0) with unit spread; normal rows around
/// (3, 3) with spread 0.6. Attack rows come first.
pub fn gaussian_clusters(n_attack: usize, n_normal: usize, seed: u64) -> Result<Dataset> {
    let mut rng = rng::seeded(seed);
    let attack = Normal::new(0.0, 1.0).expect("valid spread");
    let normal = Normal::new(3.0, 0.6).expect("valid spread");
    let m = n_attack + n_normal;
    let mut x = Array2::zeros((m, 2));
    let mut labels = Vec::with_capacity(m);
    for i in 0..m {
        let (dist, label) = if i < n_attack { (&attack, ATTACK) } else { (&normal, NORMAL) };
        x[[i, 0]] = dist.sample(&mut rng);
        x[[i, 1]] = dist.sample(&mut rng);
        labels.push(label);
    }
    Dataset::new(x, labels, vec!["x0".into(), "x1".into()])
}
