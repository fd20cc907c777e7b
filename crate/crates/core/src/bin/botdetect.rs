use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use botdetect::dtree::HyperParams;
use botdetect::ingest::{write_flows, Dataset};
use botdetect::pipeline::{self, DimSpec, PipelineConfig};
use botdetect::{synthetic, Error, Result, ATTACK, NORMAL};

#[derive(Parser)]
#[command(name = "botdetect", version, about = "Botnet detection with a BO-tuned decision tree")]
struct Cli {
    /// Log filter, e.g. `info` or `botdetect=debug`. RUST_LOG takes precedence.
    #[arg(long, global = true, default_value = "warn")]
    log: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline: split, scale, tune, fit both arms, evaluate.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: u64,
        /// Report destination; stdout when omitted.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Optimization trace CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Hyperparameter search only; writes the trace.
    Tune {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
        /// Trace CSV; stdout when omitted.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Fit one tree with fixed hyperparameters and score it.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        tree: TreeArgs,
        /// Write a text dump of the fitted tree here.
        #[arg(long)]
        dump_tree: Option<PathBuf>,
    },
    /// Two-component PCA of the scaled data, as pc1,pc2,label rows.
    Pca {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
        /// Output CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-stage timings on subsamples of increasing size.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
        /// Ascending subsample sizes.
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the seeded two-cluster synthetic dataset as CSV.
    Synth {
        #[arg(long, default_value_t = 10_000)]
        attack: usize,
        #[arg(long, default_value_t = 100)]
        normal: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ClassArg {
    Attack,
    Normal,
}

/// Config file plus per-field overrides.
#[derive(Args)]
struct Common {
    /// TOML config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    label_column: Option<String>,
    #[arg(long)]
    positive_label: Option<String>,
    #[arg(long)]
    negative_label: Option<String>,
    /// Comma-separated feature include-list.
    #[arg(long, value_delimiter = ',')]
    features: Option<Vec<String>>,
    #[arg(long)]
    max_attack_rows: Option<usize>,
    #[arg(long)]
    max_normal_rows: Option<usize>,
    #[arg(long)]
    test_fraction: Option<f64>,
    #[arg(long)]
    smote_k: Option<usize>,
    #[arg(long)]
    smote_ratio: Option<f64>,
    /// Replaces the search space; repeat as `name:kind:lower:upper`.
    #[arg(long = "dim", value_parser = parse_dim)]
    dims: Vec<DimSpec>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    n_init: Option<usize>,
    #[arg(long)]
    cv_folds: Option<usize>,
    #[arg(long, value_enum)]
    positive_class: Option<ClassArg>,
}

#[derive(Args)]
struct TreeArgs {
    #[arg(long, default_value_t = HyperParams::default().max_depth)]
    max_depth: usize,
    #[arg(long, default_value_t = HyperParams::default().min_samples_split)]
    min_samples_split: usize,
    #[arg(long, default_value_t = HyperParams::default().min_samples_leaf)]
    min_samples_leaf: usize,
    #[arg(long, default_value_t = HyperParams::default().max_features_fraction)]
    max_features_fraction: f64,
}

fn parse_dim(s: &str) -> std::result::Result<DimSpec, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [name, kind, lower, upper] = parts[..] else {
        return Err(format!("expected name:kind:lower:upper, got '{s}'"));
    };
    let num = |v: &str| v.parse::<f64>().map_err(|e| format!("bad bound '{v}': {e}"));
    Ok(DimSpec {
        name: name.into(),
        kind: kind.into(),
        lower: num(lower)?,
        upper: num(upper)?,
    })
}

impl Common {
    fn resolve(self, seed: Option<u64>) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::from_file(p)?,
            None => PipelineConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field { cfg.$field = v; }
            )*};
        }
        set!(label_column, positive_label, features, test_fraction, budget, cv_folds);
        if let Some(p) = self.data {
            cfg.data_path = Some(p);
        }
        if self.negative_label.is_some() {
            cfg.negative_label = self.negative_label;
        }
        if self.max_attack_rows.is_some() {
            cfg.max_attack_rows = self.max_attack_rows;
        }
        if self.max_normal_rows.is_some() {
            cfg.max_normal_rows = self.max_normal_rows;
        }
        if self.n_init.is_some() {
            cfg.n_init = self.n_init;
        }
        if let Some(k) = self.smote_k {
            cfg.smote.k = k;
        }
        if let Some(r) = self.smote_ratio {
            cfg.smote.target_ratio = r;
        }
        if !self.dims.is_empty() {
            cfg.search_space = self.dims;
        }
        if let Some(c) = self.positive_class {
            cfg.positive_class = match c {
                ClassArg::Attack => ATTACK,
                ClassArg::Normal => NORMAL,
            };
        }
        if let Some(s) = seed {
            cfg.seed = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| Error::io(p, e))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    let mut w = sink(path)?;
    w.write_all(text.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path.unwrap_or(Path::new("<stdout>")), e))
}

fn load(cfg: &PipelineConfig) -> Result<Dataset> {
    pipeline::load_dataset(cfg)
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run {
            common,
            seed,
            report,
            trace,
        } => {
            let cfg = common.resolve(Some(seed))?;
            let r = pipeline::run_pipeline(&cfg)?;
            if let Some(p) = &trace {
                r.trace.write_csv(sink(Some(p))?)?;
            }
            write_text(report.as_deref(), &r.to_text())
        }
        Command::Tune { common, seed, trace } => {
            let cfg = common.resolve(seed)?;
            let (t, hp) = pipeline::tune(&cfg, &load(&cfg)?)?;
            log::info!("best trial {}: {:?}", t.best().index, hp);
            t.write_csv(sink(trace.as_deref())?)
        }
        Command::Eval {
            common,
            seed,
            tree,
            dump_tree,
        } => {
            let cfg = common.resolve(seed)?;
            let hp = HyperParams {
                max_depth: tree.max_depth,
                min_samples_split: tree.min_samples_split,
                min_samples_leaf: tree.min_samples_leaf,
                max_features_fraction: tree.max_features_fraction,
            };
            hp.validate()?;
            let data = load(&cfg)?;
            let e = pipeline::evaluate_with(&cfg, &data, &hp)?;
            if let Some(p) = &dump_tree {
                write_text(Some(p), &e.tree.dump(data.feature_names()))?;
            }
            let mut out = String::new();
            let _ = writeln!(out, "seed = {}", cfg.seed);
            let _ = writeln!(out, "tree.depth = {}", e.tree.depth());
            let _ = writeln!(out, "tree.leaves = {}", e.tree.n_leaves());
            let _ = e.metrics.write_kv("eval", &mut out);
            write_text(None, &out)
        }
        Command::Pca { common, seed, out } => {
            let cfg = common.resolve(seed)?;
            let data = load(&cfg)?;
            let p = pipeline::pca_projection(&data)?;
            log::info!("explained variance {:?}", p.explained_variance);
            p.write_csv(data.labels(), sink(out.as_deref())?)
        }
        Command::Bench {
            common,
            seed,
            sizes,
            out,
        } => {
            let cfg = common.resolve(seed)?;
            let rows = pipeline::benchmark_scaling(&cfg, &load(&cfg)?, &sizes)?;
            pipeline::write_bench_csv(&rows, sink(out.as_deref())?)
        }
        Command::Synth {
            attack,
            normal,
            seed,
            out,
        } => {
            let d = synthetic::gaussian_clusters(attack, normal, seed)?;
            write_flows(&d, sink(out.as_deref())?, "attack", "1", "0")
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(&cli.log)).init();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // Display already carries the source chain.
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
