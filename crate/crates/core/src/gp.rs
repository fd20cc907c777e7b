//! Gaussian-process regression surrogate.
//!
//! Zero-mean GP with a squared-exponential (RBF) kernel sharing one
//! lengthscale across dimensions. Fitting factorizes `K + noise·I` by
//! Cholesky; if that fails, a diagonal jitter starting at 1e-8 is grown
//! tenfold up to 1e-4 before giving up.

use std::f64::consts::PI;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

pub const INITIAL_JITTER: f64 = 1e-8;
pub const MAX_JITTER: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Rbf,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    pub signal_variance: f64,
    pub lengthscale: f64,
    pub kind: KernelKind,
}

impl KernelParams {
    pub fn rbf(signal_variance: f64, lengthscale: f64) -> Self {
        KernelParams {
            signal_variance,
            lengthscale,
            kind: KernelKind::Rbf,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if ok(self.signal_variance) && ok(self.lengthscale) {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "kernel parameters must be positive, got {self:?}"
            )))
        }
    }

    fn eval_unchecked(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.kind {
            KernelKind::Rbf => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                self.signal_variance * (-d2 / (2.0 * self.lengthscale * self.lengthscale)).exp()
            }
        }
    }
}

impl Default for KernelParams {
    fn default() -> Self {
        KernelParams::rbf(1.0, 1.0)
    }
}

pub fn kernel_eval(p: &KernelParams, a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(p.eval_unchecked(a, b))
}

/// Log-spaced candidates: lengthscale 2^-4..2^4, signal variance 2^-2..2^2.
pub fn default_grid() -> Vec<KernelParams> {
    let mut grid = Vec::with_capacity(45);
    for ls in -4..=4 {
        for sv in -2..=2 {
            grid.push(KernelParams::rbf(2f64.powi(sv), 2f64.powi(ls)));
        }
    }
    grid
}

/// In-place lower Cholesky factor of a symmetric matrix; `None` if not
/// numerically positive definite.
fn cholesky(a: &Array2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[[i, j]];
            for k in 0..j {
                sum -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if !(sum > 0.0) || !sum.is_finite() {
                    return None;
                }
                l[[i, i]] = sum.sqrt();
            } else {
                l[[i, j]] = sum / l[[j, j]];
            }
        }
    }
    Some(l)
}

/// Solves `L z = b` for lower-triangular `L`.
fn forward_solve(l: &Array2<f64>, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut z = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[[i, k]] * z[k];
        }
        z[i] = s / l[[i, i]];
    }
    z
}

/// Solves `Lᵀ x = z`.
fn backward_solve(l: &Array2<f64>, z: &[f64]) -> Vec<f64> {
    let n = z.len();
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = z[i];
        for k in i + 1..n {
            s -= l[[k, i]] * x[k];
        }
        x[i] = s / l[[i, i]];
    }
    x
}

#[derive(Debug, Clone)]
pub struct GpModel {
    x: Array2<f64>,
    y: Vec<f64>,
    kernel: KernelParams,
    noise: f64,
    jitter: f64,
    chol: Array2<f64>,
    alpha: Vec<f64>,
}

pub fn kernel_matrix(p: &KernelParams, x: ArrayView2<'_, f64>) -> Array2<f64> {
    let t = x.nrows();
    let rows: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
    let mut k = Array2::zeros((t, t));
    for i in 0..t {
        for j in 0..=i {
            let v = p.eval_unchecked(&rows[i], &rows[j]);
            k[[i, j]] = v;
            k[[j, i]] = v;
        }
    }
    k
}

pub fn gp_fit(x: ArrayView2<'_, f64>, y: &[f64], p: KernelParams, noise: f64) -> Result<GpModel> {
    p.validate()?;
    if x.nrows() == 0 {
        return Err(Error::Empty("GP needs at least one observation".into()));
    }
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            found: y.len(),
        });
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::InvalidConfig(format!("noise must be non-negative, got {noise}")));
    }

    let k = kernel_matrix(&p, x);
    let t = y.len();
    let mut jitter = 0.0;
    loop {
        let mut a = k.clone();
        for i in 0..t {
            a[[i, i]] += noise + jitter;
        }
        if let Some(chol) = cholesky(&a) {
            let alpha = backward_solve(&chol, &forward_solve(&chol, y));
            return Ok(GpModel {
                x: x.as_standard_layout().into_owned(),
                y: y.to_vec(),
                kernel: p,
                noise,
                jitter,
                chol,
                alpha,
            });
        }
        jitter = if jitter == 0.0 {
            INITIAL_JITTER
        } else {
            jitter * 10.0
        };
        if jitter > MAX_JITTER * (1.0 + 1e-9) {
            return Err(Error::NotPositiveDefinite { jitter: MAX_JITTER });
        }
    }
}

impl GpModel {
    pub fn inputs(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn targets(&self) -> &[f64] {
        &self.y
    }

    pub fn kernel(&self) -> &KernelParams {
        &self.kernel
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    /// Extra diagonal added to make the factorization succeed (0 if none).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Lower-triangular factor of `K + (noise + jitter)·I`.
    pub fn chol(&self) -> &Array2<f64> {
        &self.chol
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn n_obs(&self) -> usize {
        self.y.len()
    }

    /// Posterior mean and variance at `q`. Variance is floored at 0.
    pub fn predict(&self, q: &[f64]) -> Result<(f64, f64)> {
        if q.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: q.len(),
            });
        }
        let k_star: Vec<f64> = self
            .x
            .rows()
            .into_iter()
            .map(|r| self.kernel.eval_unchecked(r.as_slice().expect("standard layout"), q))
            .collect();
        let mean = k_star.iter().zip(&self.alpha).map(|(a, b)| a * b).sum();
        let v = forward_solve(&self.chol, &k_star);
        let prior = self.kernel.eval_unchecked(q, q);
        let var = prior - v.iter().map(|z| z * z).sum::<f64>();
        Ok((mean, var.max(0.0)))
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        let t = self.n_obs() as f64;
        let fit: f64 = self.y.iter().zip(&self.alpha).map(|(a, b)| a * b).sum();
        let log_det_half: f64 = self.chol.diag().iter().map(|d| d.ln()).sum();
        -0.5 * fit - log_det_half - 0.5 * t * (2.0 * PI).ln()
    }
}

pub fn gp_predict(m: &GpModel, q: &[f64]) -> Result<(f64, f64)> {
    m.predict(q)
}

pub fn log_marginal_likelihood(m: &GpModel) -> f64 {
    m.log_marginal_likelihood()
}

/// Grid member with the highest evidence; earliest wins ties. Candidates
/// that cannot be factorized are skipped.
pub fn tune_kernel(
    x: ArrayView2<'_, f64>,
    y: &[f64],
    grid: &[KernelParams],
    noise: f64,
) -> Result<KernelParams> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("kernel grid is empty".into()));
    }
    let mut best: Option<(f64, KernelParams)> = None;
    for p in grid {
        let Ok(model) = gp_fit(x, y, *p, noise) else {
            continue;
        };
        let lml = model.log_marginal_likelihood();
        if !lml.is_finite() {
            continue;
        }
        if best.is_none_or(|(b, _)| lml > b) {
            best = Some((lml, *p));
        }
    }
    best.map(|(_, p)| p).ok_or(Error::NoViableKernel)
}
