//! End-to-end detection pipeline.
//!
//! ingest → stratified split → min-max scaling (fit on train) → BO-GP
//! tuning of the tree with SMOTE applied inside each CV training fold →
//! SMOTE on the full training set → default and tuned trees fit on the
//! same augmented data → evaluation on the untouched test rows.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::Deserialize;

use crate::bayesopt::{self, Dim, DimKind, SearchSpace, Trace};
use crate::dtree::{self, HyperParams, TreeModel};
use crate::error::{Error, Result};
use crate::ingest::{self, ClassCounts, Dataset, LoadOptions, ATTACK, NORMAL};
use crate::metrics::{self, MetricsReport, Pca2};
use crate::preprocess::{self, Scaler, SmoteConfig};
use crate::rng::derive_seed;

const TAG_SPLIT: u64 = 1;
const TAG_FOLDS: u64 = 2;
const TAG_SMOTE: u64 = 3;
const TAG_TREE: u64 = 4;
const TAG_BO: u64 = 5;
const TAG_SUBSAMPLE: u64 = 6;

/// Published SVM results on the same dataset (accuracy, precision, recall,
/// F-score). Reported for comparison only, never recomputed.
pub const REFERENCE_SVM: [f64; 4] = [0.8837, 1.0, 0.88, 0.94];

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SmoteSection {
    pub k: usize,
    pub target_ratio: f64,
}

impl Default for SmoteSection {
    fn default() -> Self {
        let d = SmoteConfig::default();
        SmoteSection {
            k: d.k,
            target_ratio: d.target_ratio,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimSpec {
    pub name: String,
    pub kind: String,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub data_path: Option<PathBuf>,
    pub label_column: String,
    pub positive_label: String,
    pub negative_label: Option<String>,
    /// Feature include-list; empty keeps every non-label column.
    pub features: Vec<String>,
    /// Keep at most this many rows of the class (seeded sample, order kept).
    pub max_attack_rows: Option<usize>,
    pub max_normal_rows: Option<usize>,
    pub test_fraction: f64,
    pub seed: u64,
    pub smote: SmoteSection,
    /// Empty means the default tree search space.
    pub search_space: Vec<DimSpec>,
    pub budget: usize,
    /// Defaults to `max(5, 2·dims)`.
    pub n_init: Option<usize>,
    pub cv_folds: usize,
    /// Class reported as "positive" in the headline metrics.
    pub positive_class: u8,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            data_path: None,
            label_column: "attack".into(),
            positive_label: "1".into(),
            negative_label: None,
            features: Vec::new(),
            max_attack_rows: None,
            max_normal_rows: None,
            test_fraction: 0.2,
            seed: 0,
            smote: SmoteSection::default(),
            search_space: Vec::new(),
            budget: bayesopt::DEFAULT_BUDGET,
            n_init: None,
            cv_folds: 3,
            positive_class: ATTACK,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn load_options(&self) -> LoadOptions {
        LoadOptions {
            label_column: self.label_column.clone(),
            positive_label: self.positive_label.clone(),
            negative_label: self.negative_label.clone(),
            include: (!self.features.is_empty()).then(|| self.features.clone()),
        }
    }

    pub fn smote_config(&self, tag: u64) -> SmoteConfig {
        SmoteConfig {
            k: self.smote.k,
            target_ratio: self.smote.target_ratio,
            seed: derive_seed(self.seed, tag),
        }
    }

    pub fn space(&self) -> Result<SearchSpace> {
        if self.search_space.is_empty() {
            return Ok(SearchSpace::decision_tree_default());
        }
        let dims = self
            .search_space
            .iter()
            .map(|d| {
                let kind = match d.kind.as_str() {
                    "integer" | "int" => DimKind::Integer,
                    "continuous" | "real" | "float" => DimKind::Continuous,
                    other => {
                        return Err(Error::InvalidConfig(format!(
                            "dimension '{}' has unknown kind '{other}'",
                            d.name
                        )))
                    }
                };
                Ok(Dim {
                    name: d.name.clone(),
                    kind,
                    lower: d.lower,
                    upper: d.upper,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        SearchSpace::new(dims)
    }

    pub fn n_init(&self, dims: usize) -> usize {
        self.n_init.unwrap_or_else(|| bayesopt::default_n_init(dims))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "test_fraction must lie in (0, 1), got {}",
                self.test_fraction
            )));
        }
        if self.cv_folds < 2 {
            return Err(Error::InvalidConfig("cv_folds must be at least 2".into()));
        }
        if self.positive_class > 1 {
            return Err(Error::InvalidConfig("positive_class must be 0 or 1".into()));
        }
        self.smote_config(0).validate()?;
        let space = self.space()?;
        let n_init = self.n_init(space.len());
        if n_init == 0 || self.budget < n_init {
            return Err(Error::InvalidConfig(format!(
                "need budget >= n_init >= 1, got budget {}, n_init {n_init}",
                self.budget
            )));
        }
        Ok(())
    }
}

/// Wall-clock per named stage, in execution order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Timings(pub Vec<(&'static str, Duration)>);

impl Timings {
    fn time<T>(&mut self, stage: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f().map_err(|e| e.in_stage(stage));
        self.0.push((stage, start.elapsed()));
        out
    }

    pub fn get(&self, stage: &str) -> Option<Duration> {
        self.0.iter().find(|(s, _)| *s == stage).map(|(_, d)| *d)
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub seed: u64,
    pub positive_class: u8,
    pub source_counts: ClassCounts,
    pub train_counts: ClassCounts,
    pub train_counts_after_smote: ClassCounts,
    pub test_counts: ClassCounts,
    pub trace: Trace,
    pub chosen: HyperParams,
    pub default_metrics: MetricsReport,
    pub optimized_metrics: MetricsReport,
    pub timings: Timings,
}

fn counts_kv(out: &mut String, key: &str, c: &ClassCounts) {
    let _ = writeln!(out, "{key}.normal = {}", c.get(&NORMAL).copied().unwrap_or(0));
    let _ = writeln!(out, "{key}.attack = {}", c.get(&ATTACK).copied().unwrap_or(0));
}

impl RunReport {
    /// Everything except wall-clock timings; equal for equal config and seed.
    pub fn same_outcome(&self, other: &RunReport) -> bool {
        self.seed == other.seed
            && self.source_counts == other.source_counts
            && self.train_counts == other.train_counts
            && self.train_counts_after_smote == other.train_counts_after_smote
            && self.test_counts == other.test_counts
            && self.trace == other.trace
            && self.chosen == other.chosen
            && self.default_metrics == other.default_metrics
            && self.optimized_metrics == other.optimized_metrics
    }

    /// `key = value` text, one fact per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(
            out,
            "positive_class = {}",
            if self.positive_class == ATTACK { "attack" } else { "normal" }
        );
        counts_kv(&mut out, "counts.source", &self.source_counts);
        counts_kv(&mut out, "counts.train", &self.train_counts);
        counts_kv(&mut out, "counts.train_after_smote", &self.train_counts_after_smote);
        counts_kv(&mut out, "counts.test", &self.test_counts);
        let hp = &self.chosen;
        let _ = writeln!(out, "chosen.max_depth = {}", hp.max_depth);
        let _ = writeln!(out, "chosen.min_samples_split = {}", hp.min_samples_split);
        let _ = writeln!(out, "chosen.min_samples_leaf = {}", hp.min_samples_leaf);
        let _ = writeln!(out, "chosen.max_features_fraction = {}", hp.max_features_fraction);
        let _ = writeln!(out, "tuning.trials = {}", self.trace.trials.len());
        let _ = writeln!(out, "tuning.best_index = {}", self.trace.best().index);
        let _ = writeln!(out, "tuning.best_cv_macro_f = {}", self.trace.best().objective);
        for (name, m) in [("default_dt", &self.default_metrics), ("optimized_dt", &self.optimized_metrics)] {
            let _ = m.write_kv(name, &mut out);
            let p = m.for_class(self.positive_class);
            let _ = writeln!(out, "{name}.precision = {}", p.precision);
            let _ = writeln!(out, "{name}.recall = {}", p.recall);
            let _ = writeln!(out, "{name}.f_score = {}", p.f_score);
        }
        let [acc, prec, rec, f] = REFERENCE_SVM;
        let _ = writeln!(out, "# published SVM results on this dataset; reference only, not recomputed");
        let _ = writeln!(out, "reference_svm.accuracy = {acc}");
        let _ = writeln!(out, "reference_svm.precision = {prec}");
        let _ = writeln!(out, "reference_svm.recall = {rec}");
        let _ = writeln!(out, "reference_svm.f_score = {f}");
        for (stage, d) in &self.timings.0 {
            let _ = writeln!(out, "time.{stage}_s = {:.6}", d.as_secs_f64());
        }
        out
    }
}

/// Keeps at most `cap` rows of `class`, chosen by seeded sampling; row order is preserved.
fn cap_class(indices: &mut Vec<usize>, labels: &[u8], class: u8, cap: usize, seed: u64) {
    use rand::seq::index::sample;
    let of_class: Vec<usize> = indices.iter().copied().filter(|&i| labels[i] == class).collect();
    if of_class.len() <= cap {
        return;
    }
    let mut rng = crate::rng::seeded(derive_seed(seed, class as u64));
    let keep: HashSet<usize> = sample(&mut rng, of_class.len(), cap)
        .into_iter()
        .map(|k| of_class[k])
        .collect();
    indices.retain(|i| labels[*i] != class || keep.contains(i));
}

pub fn load_dataset(cfg: &PipelineConfig) -> Result<Dataset> {
    let path = cfg
        .data_path
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("no data_path configured".into()))?;
    let d = ingest::load_flows(path, &cfg.load_options())?;
    subsample(cfg, &d)
}

/// Applies `max_attack_rows` / `max_normal_rows`.
pub fn subsample(cfg: &PipelineConfig, d: &Dataset) -> Result<Dataset> {
    if cfg.max_attack_rows.is_none() && cfg.max_normal_rows.is_none() {
        return Ok(d.clone());
    }
    let seed = derive_seed(cfg.seed, TAG_SUBSAMPLE);
    let mut idx: Vec<usize> = (0..d.n_rows()).collect();
    if let Some(cap) = cfg.max_attack_rows {
        cap_class(&mut idx, d.labels(), ATTACK, cap, seed);
    }
    if let Some(cap) = cfg.max_normal_rows {
        cap_class(&mut idx, d.labels(), NORMAL, cap, seed);
    }
    d.select(&idx)
}

fn check_disjoint(a: &[usize], b: &[usize], what: &str) -> Result<()> {
    let set: HashSet<usize> = a.iter().copied().collect();
    if let Some(i) = b.iter().find(|i| set.contains(i)) {
        return Err(Error::Leakage(format!("row {i} appears in both {what}")));
    }
    Ok(())
}

/// Scaled train/test split; the scaler sees training rows only.
pub struct Prepared {
    pub split: ingest::SplitPair,
    pub scaler: Scaler,
    pub train: Dataset,
    pub test: Dataset,
}

fn prepare(cfg: &PipelineConfig, data: &Dataset, timings: &mut Timings) -> Result<Prepared> {
    let split = timings.time("split", || {
        let split = ingest::stratified_split(data, cfg.test_fraction, derive_seed(cfg.seed, TAG_SPLIT))?;
        check_disjoint(&split.train_indices, &split.test_indices, "train and test")?;
        Ok(split)
    })?;
    let (scaler, train, test) = timings.time("normalize", || {
        let scaler = preprocess::fit_minmax(&split.train);
        let train = scaler.apply_dataset(&split.train)?;
        let test = scaler.apply_dataset(&split.test)?;
        Ok((scaler, train, test))
    })?;
    Ok(Prepared {
        split,
        scaler,
        train,
        test,
    })
}

/// Per-fold training data (SMOTE-augmented) and validation rows.
struct CvFolds {
    folds: Vec<(Dataset, Dataset)>,
}

impl CvFolds {
    fn build(cfg: &PipelineConfig, train: &Dataset) -> Result<Self> {
        let folds = ingest::stratified_kfold(train.labels(), cfg.cv_folds, derive_seed(cfg.seed, TAG_FOLDS))?;
        let mut out = Vec::with_capacity(folds.len());
        for (i, fold) in folds.iter().enumerate() {
            check_disjoint(&fold.train, &fold.validation, "a CV training fold and its validation fold")?;
            let fit_rows = train.select(&fold.train)?;
            let smote_cfg = cfg.smote_config(derive_seed(TAG_SMOTE, 100 + i as u64));
            let augmented = preprocess::smote(&fit_rows, &smote_cfg)?.dataset;
            out.push((augmented, train.select(&fold.validation)?));
        }
        Ok(CvFolds { folds: out })
    }

    /// Mean validation macro-F over folds.
    fn score(&self, hp: &HyperParams, tree_seed: u64) -> Result<f64> {
        let mut total = 0.0;
        for (fit, val) in &self.folds {
            let tree = dtree::fit_tree(fit, hp, tree_seed)?;
            let pred = tree.predict_matrix(val.features())?;
            total += metrics::evaluate(val.labels(), &pred)?.macro_f_score;
        }
        Ok(total / self.folds.len() as f64)
    }
}

fn tune_on(cfg: &PipelineConfig, train: &Dataset, timings: &mut Timings) -> Result<(Trace, HyperParams)> {
    let space = cfg.space()?;
    let n_init = cfg.n_init(space.len());
    let tree_seed = derive_seed(cfg.seed, TAG_TREE);
    timings.time("tune", || {
        let folds = CvFolds::build(cfg, train)?;
        let trace = bayesopt::optimize(
            |config| {
                let hp = HyperParams::from_config(config)?;
                folds.score(&hp, tree_seed)
            },
            &space,
            cfg.budget,
            n_init,
            derive_seed(cfg.seed, TAG_BO),
        )?;
        let chosen = HyperParams::from_config(&trace.best().config)?;
        Ok((trace, chosen))
    })
}

/// BO-GP search only, on the scaled training split of `data`.
pub fn tune(cfg: &PipelineConfig, data: &Dataset) -> Result<(Trace, HyperParams)> {
    cfg.validate()?;
    let mut timings = Timings::default();
    let prepared = prepare(cfg, data, &mut timings)?;
    tune_on(cfg, &prepared.train, &mut timings)
}

pub struct Evaluation {
    pub tree: TreeModel,
    pub metrics: MetricsReport,
    pub train_counts_after_smote: ClassCounts,
}

/// Fits one tree with fixed hyperparameters on the SMOTE-augmented training
/// split and scores it on the test split.
pub fn evaluate_with(cfg: &PipelineConfig, data: &Dataset, hp: &HyperParams) -> Result<Evaluation> {
    cfg.validate()?;
    let mut timings = Timings::default();
    let prepared = prepare(cfg, data, &mut timings)?;
    let augmented = timings.time("smote", || {
        Ok(preprocess::smote(&prepared.train, &cfg.smote_config(TAG_SMOTE))?.dataset)
    })?;
    let tree = timings.time("fit", || dtree::fit_tree(&augmented, hp, derive_seed(cfg.seed, TAG_TREE)))?;
    let metrics = timings.time("evaluate", || {
        let pred = tree.predict_matrix(prepared.test.features())?;
        metrics::evaluate(prepared.test.labels(), &pred)
    })?;
    Ok(Evaluation {
        tree,
        metrics,
        train_counts_after_smote: augmented.class_counts(),
    })
}

pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunReport> {
    cfg.validate()?;
    let mut timings = Timings::default();
    let data = timings.time("ingest", || load_dataset(cfg))?;
    run_with_timings(cfg, &data, timings)
}

/// Full pipeline on an already-loaded dataset.
pub fn run_on_dataset(cfg: &PipelineConfig, data: &Dataset) -> Result<RunReport> {
    cfg.validate()?;
    run_with_timings(cfg, data, Timings::default())
}

fn run_with_timings(cfg: &PipelineConfig, data: &Dataset, mut timings: Timings) -> Result<RunReport> {
    let prepared = prepare(cfg, data, &mut timings)?;
    let (trace, chosen) = tune_on(cfg, &prepared.train, &mut timings)?;

    let augmented = timings.time("smote", || {
        Ok(preprocess::smote(&prepared.train, &cfg.smote_config(TAG_SMOTE))?.dataset)
    })?;
    let tree_seed = derive_seed(cfg.seed, TAG_TREE);
    let (default_tree, tuned_tree) = timings.time("fit", || {
        Ok((
            dtree::fit_tree(&augmented, &HyperParams::default(), tree_seed)?,
            dtree::fit_tree(&augmented, &chosen, tree_seed)?,
        ))
    })?;
    let (default_metrics, optimized_metrics) = timings.time("evaluate", || {
        let test = &prepared.test;
        let d = metrics::evaluate(test.labels(), &default_tree.predict_matrix(test.features())?)?;
        let o = metrics::evaluate(test.labels(), &tuned_tree.predict_matrix(test.features())?)?;
        Ok((d, o))
    })?;

    Ok(RunReport {
        seed: cfg.seed,
        positive_class: cfg.positive_class,
        source_counts: data.class_counts(),
        train_counts: prepared.train.class_counts(),
        train_counts_after_smote: augmented.class_counts(),
        test_counts: prepared.test.class_counts(),
        trace,
        chosen,
        default_metrics,
        optimized_metrics,
        timings,
    })
}

/// PCA of the min-max scaled dataset; returns the projection and row labels.
pub fn pca_projection(data: &Dataset) -> Result<Pca2> {
    let scaled = preprocess::fit_minmax(data).apply(data.features().view())?;
    metrics::pca2(scaled.view())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub m: usize,
    pub stage: &'static str,
    pub seconds: f64,
}

/// Per-stage wall-clock on stratified subsamples of `data` of each size.
/// Sizes at or above the dataset size use every row.
pub fn benchmark_scaling(cfg: &PipelineConfig, data: &Dataset, sizes: &[usize]) -> Result<Vec<BenchRow>> {
    cfg.validate()?;
    if sizes.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidConfig("benchmark sizes must be ascending".into()));
    }
    let mut rows = Vec::new();
    for &m in sizes {
        let sample = if m >= data.n_rows() {
            data.clone()
        } else {
            let frac = m as f64 / data.n_rows() as f64;
            let (_, keep) = ingest::stratified_split_indices(data.labels(), frac, derive_seed(cfg.seed, TAG_SUBSAMPLE))?;
            data.select(&keep)?
        };
        let mut timings = Timings::default();
        let prepared = prepare(cfg, &sample, &mut timings)?;
        let (_, chosen) = tune_on(cfg, &prepared.train, &mut timings)?;
        let augmented = timings.time("smote", || {
            Ok(preprocess::smote(&prepared.train, &cfg.smote_config(TAG_SMOTE))?.dataset)
        })?;
        timings.time("fit", || dtree::fit_tree(&augmented, &chosen, derive_seed(cfg.seed, TAG_TREE)))?;
        rows.extend(timings.0.into_iter().map(|(stage, d)| BenchRow {
            m: sample.n_rows(),
            stage,
            seconds: d.as_secs_f64(),
        }));
    }
    Ok(rows)
}

pub fn write_bench_csv<W: std::io::Write>(rows: &[BenchRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["m", "stage", "seconds"])?;
    for r in rows {
        w.write_record([r.m.to_string(), r.stage.to_owned(), format!("{:.9}", r.seconds)])?;
    }
    w.flush().map_err(|e| Error::io("<writer>", e))?;
    Ok(())
}
