//! Sequential Bayesian optimization with a GP surrogate and Expected Improvement.
//!
//! The optimizer works in the unit cube. Configurations are mapped to native
//! bounds (integer dimensions rounded) only at evaluation time, and every
//! evaluated configuration is cached by its rounded value so equivalent
//! points never cost a second objective call.

use std::collections::HashMap;
use std::fmt::Display;
use std::io::Write;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::gp::{self, GpModel, KernelParams};
use crate::rng;

pub const DEFAULT_XI: f64 = 0.01;
pub const DEFAULT_CANDIDATES: usize = 1000;
pub const DEFAULT_NOISE: f64 = 1e-6;
pub const DEFAULT_RETUNE_EVERY: usize = 5;
pub const DEFAULT_BUDGET: usize = 30;
const SUBSTITUTE_ATTEMPTS: usize = 100;

const TAG_LHS: u64 = 0x004c_4853;
const TAG_PROPOSE: u64 = 0x5052_4f50;
const TAG_SUBSTITUTE: u64 = 0x5355_4253;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DimKind {
    Integer,
    Continuous,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dim {
    pub name: String,
    pub kind: DimKind,
    pub lower: f64,
    pub upper: f64,
}

impl Dim {
    pub fn integer(name: &str, lower: i64, upper: i64) -> Self {
        Dim {
            name: name.to_owned(),
            kind: DimKind::Integer,
            lower: lower as f64,
            upper: upper as f64,
        }
    }

    pub fn continuous(name: &str, lower: f64, upper: f64) -> Self {
        Dim {
            name: name.to_owned(),
            kind: DimKind::Continuous,
            lower,
            upper,
        }
    }

    fn at_unit(&self, u: f64) -> f64 {
        let v = self.lower + u.clamp(0.0, 1.0) * (self.upper - self.lower);
        match self.kind {
            DimKind::Integer => v.round().clamp(self.lower, self.upper),
            DimKind::Continuous => v.clamp(self.lower, self.upper),
        }
    }

    fn to_unit(&self, v: f64) -> f64 {
        if self.upper > self.lower {
            (v - self.lower) / (self.upper - self.lower)
        } else {
            0.0
        }
    }

    fn contains(&self, v: f64) -> bool {
        v >= self.lower && v <= self.upper && (self.kind == DimKind::Continuous || v.fract() == 0.0)
    }
}

/// Ordered box of named dimensions. A dimension with `lower == upper` is
/// fixed at that value.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    dims: Vec<Dim>,
}

impl SearchSpace {
    pub fn new(dims: Vec<Dim>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidConfig("search space has no dimensions".into()));
        }
        for (i, d) in dims.iter().enumerate() {
            if !(d.lower.is_finite() && d.upper.is_finite() && d.lower <= d.upper) {
                return Err(Error::InvalidConfig(format!(
                    "dimension '{}' has invalid bounds [{}, {}]",
                    d.name, d.lower, d.upper
                )));
            }
            if d.kind == DimKind::Integer && (d.lower.fract() != 0.0 || d.upper.fract() != 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "integer dimension '{}' needs integer bounds",
                    d.name
                )));
            }
            if dims[..i].iter().any(|o| o.name == d.name) {
                return Err(Error::InvalidConfig(format!("duplicate dimension '{}'", d.name)));
            }
        }
        Ok(SearchSpace { dims })
    }

    /// max_depth, min_samples_split, min_samples_leaf, max_features_fraction.
    pub fn decision_tree_default() -> Self {
        SearchSpace::new(vec![
            Dim::integer("max_depth", 1, 50),
            Dim::integer("min_samples_split", 2, 100),
            Dim::integer("min_samples_leaf", 1, 50),
            Dim::continuous("max_features_fraction", 0.05, 1.0),
        ])
        .expect("static space is valid")
    }

    pub fn dims(&self) -> &[Dim] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn to_native(&self, unit: &[f64]) -> Config {
        Config {
            entries: self
                .dims
                .iter()
                .zip(unit)
                .map(|(d, &u)| (d.name.clone(), d.at_unit(u)))
                .collect(),
        }
    }

    pub fn to_unit(&self, config: &Config) -> Vec<f64> {
        self.dims
            .iter()
            .zip(config.values())
            .map(|(d, v)| d.to_unit(v))
            .collect()
    }

    pub fn contains(&self, config: &Config) -> bool {
        config.entries.len() == self.dims.len()
            && self
                .dims
                .iter()
                .zip(&config.entries)
                .all(|(d, (n, v))| *n == d.name && d.contains(*v))
    }
}

/// Named values in search-space order.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    entries: Vec<(String, f64)>,
}

impl Config {
    pub fn new(entries: Vec<(String, f64)>) -> Self {
        Config { entries }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.entries.iter().map(|(n, v)| (n.as_str(), *v))
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|(_, v)| *v)
    }

    fn key(&self) -> Vec<u64> {
        self.values().map(|v| (v + 0.0).to_bits()).collect()
    }
}

impl Display for Config {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (i, (n, v)) in self.entries.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{n}={v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub index: usize,
    pub config: Config,
    pub objective: f64,
    /// The objective errored; `objective` holds the penalty value.
    pub failed: bool,
    /// Duplicate of an earlier configuration; objective reused, not re-evaluated.
    pub cached: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub trials: Vec<Trial>,
    best: usize,
}

impl Trace {
    fn from_trials(trials: Vec<Trial>) -> Self {
        let mut best = 0;
        for (i, t) in trials.iter().enumerate() {
            if t.objective > trials[best].objective {
                best = i;
            }
        }
        Trace { trials, best }
    }

    pub fn best(&self) -> &Trial {
        &self.trials[self.best]
    }

    pub fn running_best(&self) -> Vec<f64> {
        self.trials
            .iter()
            .scan(f64::NEG_INFINITY, |acc, t| {
                *acc = acc.max(t.objective);
                Some(*acc)
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["index".to_owned()];
        if let Some(t) = self.trials.first() {
            header.extend(t.config.iter().map(|(n, _)| n.to_owned()));
        }
        header.extend(["objective".to_owned(), "running_best".to_owned()]);
        w.write_record(&header)?;
        for (t, rb) in self.trials.iter().zip(self.running_best()) {
            let mut rec = vec![t.index.to_string()];
            rec.extend(t.config.values().map(|v| v.to_string()));
            rec.push(t.objective.to_string());
            rec.push(rb.to_string());
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<writer>", e))?;
        Ok(())
    }
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Expected amount by which `N(mean, std²)` exceeds `best_so_far + xi`.
pub fn expected_improvement(mean: f64, std: f64, best_so_far: f64, xi: f64) -> f64 {
    if !(std > 0.0) {
        return 0.0;
    }
    let gain = mean - best_so_far - xi;
    let z = gain / std;
    (gain * std_normal_cdf(z) + std * std_normal_pdf(z)).max(0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub unit: Vec<f64>,
    pub config: Config,
    pub ei: f64,
}

/// Best of `n_candidates` seeded uniform candidates by EI (first wins ties).
pub fn propose_next_scored(
    m: &GpModel,
    space: &SearchSpace,
    best_so_far: f64,
    seed: u64,
    n_candidates: usize,
    xi: f64,
) -> Result<Proposal> {
    if m.dim() != space.len() {
        return Err(Error::DimensionMismatch {
            expected: space.len(),
            found: m.dim(),
        });
    }
    let mut rng = rng::seeded(seed);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for _ in 0..n_candidates.max(1) {
        let u: Vec<f64> = (0..space.len()).map(|_| rng.random::<f64>()).collect();
        let (mean, var) = m.predict(&u)?;
        let ei = expected_improvement(mean, var.sqrt(), best_so_far, xi);
        if best.as_ref().is_none_or(|(b, _)| ei > *b) {
            best = Some((ei, u));
        }
    }
    let (ei, unit) = best.expect("at least one candidate");
    Ok(Proposal {
        config: space.to_native(&unit),
        unit,
        ei,
    })
}

pub fn propose_next(
    m: &GpModel,
    space: &SearchSpace,
    best_so_far: f64,
    seed: u64,
    n_candidates: usize,
) -> Result<Config> {
    Ok(propose_next_scored(m, space, best_so_far, seed, n_candidates, DEFAULT_XI)?.config)
}

/// `n` stratified points in `[0,1]^d`, one per stratum along every axis.
pub fn latin_hypercube(n: usize, d: usize, rng: &mut rng::StageRng) -> Vec<Vec<f64>> {
    let mut points = vec![vec![0.0; d]; n];
    for j in 0..d {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(rng);
        for (i, s) in strata.into_iter().enumerate() {
            points[i][j] = (s as f64 + rng.random::<f64>()) / n as f64;
        }
    }
    points
}

pub fn default_n_init(dims: usize) -> usize {
    5.max(2 * dims)
}

#[derive(Debug, Clone)]
pub struct BoOptions {
    pub xi: f64,
    pub n_candidates: usize,
    pub noise: f64,
    /// Kernel parameters are re-selected once this many new observations arrive.
    pub retune_every: usize,
    pub kernel_grid: Vec<KernelParams>,
}

impl Default for BoOptions {
    fn default() -> Self {
        BoOptions {
            xi: DEFAULT_XI,
            n_candidates: DEFAULT_CANDIDATES,
            noise: DEFAULT_NOISE,
            retune_every: DEFAULT_RETUNE_EVERY,
            kernel_grid: gp::default_grid(),
        }
    }
}

/// Observations in unit coordinates with standardized targets, ready for the GP.
struct Surrogate {
    kernel: Option<KernelParams>,
    tuned_at: usize,
}

impl Surrogate {
    fn fit(&mut self, xs: &[Vec<f64>], ys: &[f64], opts: &BoOptions) -> Result<(GpModel, f64)> {
        let t = ys.len();
        let mean = ys.iter().sum::<f64>() / t as f64;
        let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / t as f64;
        let scale = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
        let z: Vec<f64> = ys.iter().map(|y| (y - mean) / scale).collect();
        let x = Array2::from_shape_fn((t, xs[0].len()), |(i, j)| xs[i][j]);

        if self.kernel.is_none() || t - self.tuned_at >= opts.retune_every {
            self.kernel = Some(gp::tune_kernel(x.view(), &z, &opts.kernel_grid, opts.noise)?);
            self.tuned_at = t;
        }
        let model = gp::gp_fit(x.view(), &z, self.kernel.expect("tuned above"), opts.noise)?;
        let best = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok((model, best))
    }
}

pub fn optimize<F, E>(
    objective: F,
    space: &SearchSpace,
    budget: usize,
    n_init: usize,
    seed: u64,
) -> Result<Trace>
where
    F: FnMut(&Config) -> std::result::Result<f64, E>,
    E: Display,
{
    optimize_with(objective, space, budget, n_init, seed, &BoOptions::default())
}

/// Maximizes `objective` over `space` in `budget` evaluations.
///
/// The first `n_init` points come from a seeded Latin hypercube, the rest
/// from EI maximization on a GP fit to all distinct observations. A failing
/// objective is recorded with the penalty `worst_so_far - 1`.
pub fn optimize_with<F, E>(
    mut objective: F,
    space: &SearchSpace,
    budget: usize,
    n_init: usize,
    seed: u64,
    opts: &BoOptions,
) -> Result<Trace>
where
    F: FnMut(&Config) -> std::result::Result<f64, E>,
    E: Display,
{
    if n_init == 0 || budget < n_init {
        return Err(Error::InvalidConfig(format!(
            "need budget >= n_init >= 1, got budget {budget}, n_init {n_init}"
        )));
    }
    let d = space.len();
    let design = latin_hypercube(n_init, d, &mut rng::seeded(rng::derive_seed(seed, TAG_LHS)));

    let mut cache: HashMap<Vec<u64>, f64> = HashMap::new();
    let mut xs: Vec<Vec<f64>> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    let mut trials: Vec<Trial> = Vec::with_capacity(budget);
    let mut surrogate = Surrogate {
        kernel: None,
        tuned_at: 0,
    };

    for index in 0..budget {
        let unit = if index < n_init {
            design[index].clone()
        } else {
            let (model, best) = surrogate.fit(&xs, &ys, opts)?;
            let propose_seed = rng::derive_seed(rng::derive_seed(seed, TAG_PROPOSE), index as u64);
            propose_next_scored(&model, space, best, propose_seed, opts.n_candidates, opts.xi)?.unit
        };

        let mut config = space.to_native(&unit);
        if cache.contains_key(&config.key()) {
            let mut alt = rng::stream(rng::derive_seed(seed, TAG_SUBSTITUTE), index as u64);
            for _ in 0..SUBSTITUTE_ATTEMPTS {
                let u: Vec<f64> = (0..d).map(|_| alt.random::<f64>()).collect();
                let candidate = space.to_native(&u);
                if !cache.contains_key(&candidate.key()) {
                    config = candidate;
                    break;
                }
            }
        }

        if let Some(&cached) = cache.get(&config.key()) {
            log::debug!("trial {index}: {config} already evaluated, reusing {cached}");
            trials.push(Trial {
                index,
                config,
                objective: cached,
                failed: false,
                cached: true,
            });
            continue;
        }

        let (value, failed) = match objective(&config) {
            Ok(v) if v.is_finite() => (v, false),
            outcome => {
                let worst = trials.iter().map(|t| t.objective).fold(f64::INFINITY, f64::min);
                let penalty = if worst.is_finite() { worst - 1.0 } else { -1.0 };
                match outcome {
                    Err(e) => log::warn!("trial {index}: objective failed ({e}); penalty {penalty}"),
                    Ok(v) => log::warn!("trial {index}: objective returned {v}; penalty {penalty}"),
                }
                (penalty, true)
            }
        };
        log::debug!("trial {index}: {config} -> {value}");
        cache.insert(config.key(), value);
        xs.push(space.to_unit(&config));
        ys.push(value);
        trials.push(Trial {
            index,
            config,
            objective: value,
            failed,
            cached: false,
        });
    }
    Ok(Trace::from_trials(trials))
}
