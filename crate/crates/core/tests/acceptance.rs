//! Acceptance suite: one PASS/FAIL/SKIP line per criterion, non-zero exit on any FAIL.
//!
//! Set `BOTIOT_5PCT_CSV` to the 5% Bot-IoT extraction to enable the
//! real-data check; it is skipped otherwise.

mod common;

use std::convert::Infallible;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use botdetect::bayesopt::{optimize, Config, Dim, SearchSpace};
use botdetect::dtree::{fit_tree, HyperParams};
use botdetect::gp::{gp_fit, KernelParams};
use botdetect::ingest::BOT_IOT_BEST_10;
use botdetect::metrics::{compute_metrics, ConfusionMatrix};
use botdetect::pipeline::{run_on_dataset, run_pipeline, PipelineConfig};
use botdetect::preprocess::{smote, synthetic_count, SmoteConfig};
use botdetect::{rng, synthetic, Dataset, ATTACK, NORMAL};
use common::{dense_gp, flatten, random_dataset, reference_tree, to_array};
use ndarray::Array2;
use rand::Rng;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
    Info(String),
}

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Option<Duration>,
    run: fn() -> Outcome,
}

fn c1_metric_identities() -> Outcome {
    let mut r = rng::seeded(1);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let (tp, tn, fp, fn_) = (
            r.random_range(0..10_000usize),
            r.random_range(0..10_000usize),
            r.random_range(0..10_000usize),
            r.random_range(0..10_000usize),
        );
        let m = compute_metrics(&ConfusionMatrix {
            tp,
            tn,
            fp,
            fn_,
            positive_class: ATTACK,
        });
        let (tp, tn, fp, fn_) = (tp as f64, tn as f64, fp as f64, fn_ as f64);
        let total = tp + tn + fp + fn_;
        let acc = if total > 0.0 { (tp + tn) / total } else { 0.0 };
        let p = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let rc = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        let f = if p + rc > 0.0 { 2.0 * p * rc / (p + rc) } else { 0.0 };
        for (a, b) in [(m.accuracy, acc), (m.precision, p), (m.recall, rc), (m.f_score, f)] {
            worst = worst.max((a - b).abs());
        }
    }
    let msg = format!("1000 matrices, max abs error {worst:.1e}");
    if worst <= 1e-12 {
        Outcome::Pass(msg)
    } else {
        Outcome::Fail(msg)
    }
}

fn c2_gp() -> Outcome {
    let mut r = rng::seeded(2);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let t = r.random_range(1..=10);
        let d = r.random_range(1..=3);
        let x: Vec<Vec<f64>> = (0..t).map(|_| (0..d).map(|_| r.random::<f64>()).collect()).collect();
        let y: Vec<f64> = (0..t).map(|_| r.random_range(-2.0..2.0)).collect();
        let p = KernelParams::rbf(r.random_range(0.2..2.0), r.random_range(0.2..1.0));
        let noise = r.random_range(1e-3..1e-1);
        let model = match gp_fit(to_array(&x).view(), &y, p, noise) {
            Ok(m) => m,
            Err(e) => return Outcome::Fail(format!("gp_fit failed: {e}")),
        };
        let oracle = dense_gp(&x, &y, p, noise);
        worst = worst.max((model.log_marginal_likelihood() - oracle.lml()).abs());
        for _ in 0..5 {
            let q: Vec<f64> = (0..d).map(|_| r.random_range(-0.5..1.5)).collect();
            let (mean, var) = model.predict(&q).expect("matching dimension");
            let (om, ov) = oracle.predict(&q);
            worst = worst.max((mean - om).abs()).max((var - ov.max(0.0)).abs());
        }
    }
    let msg = format!("200 instances, max abs error {worst:.1e}");
    if worst <= 1e-8 {
        Outcome::Pass(msg)
    } else {
        Outcome::Fail(msg)
    }
}

fn c3_bo() -> Outcome {
    // Grid oracle: the maximizer of -(x-0.3)^2 on a 1e-4 grid over [0, 1].
    let target = (0..=10_000)
        .map(|i| i as f64 / 10_000.0)
        .max_by(|a, b| (-(a - 0.3f64).powi(2)).total_cmp(&-(b - 0.3f64).powi(2)))
        .expect("non-empty grid");
    let space = SearchSpace::new(vec![Dim::continuous("x", 0.0, 1.0)]).expect("valid space");
    let f = |c: &Config| -> Result<f64, Infallible> { Ok(-(c.get("x").unwrap() - 0.3).powi(2)) };
    let mut hits = 0;
    let mut monotone = true;
    for seed in 0..10 {
        let trace = match optimize(f, &space, 20, 5, seed) {
            Ok(t) => t,
            Err(e) => return Outcome::Fail(format!("seed {seed}: {e}")),
        };
        if (trace.best().config.get("x").unwrap() - target).abs() <= 0.05 {
            hits += 1;
        }
        monotone &= trace.running_best().windows(2).all(|w| w[1] >= w[0]);
    }
    let msg = format!("{hits}/10 seeds within 0.05 of {target}, running best nondecreasing: {monotone}");
    if hits >= 9 && monotone {
        Outcome::Pass(msg)
    } else {
        Outcome::Fail(msg)
    }
}

fn c4_tree() -> Outcome {
    let settings = [
        HyperParams::default(),
        HyperParams {
            max_depth: 4,
            min_samples_split: 6,
            min_samples_leaf: 2,
            max_features_fraction: 0.6,
        },
    ];
    let mut nodes = 0;
    for seed in 0..50 {
        let (x, y) = random_dataset(1000 + seed, 200, 5);
        let d = Dataset::from_parts(x.clone(), y.clone()).expect("valid dataset");
        for hp in &settings {
            let tree = fit_tree(&d, hp, seed).expect("fit succeeds");
            let got = flatten(&tree);
            if got != reference_tree(x.view(), &y, hp, seed) {
                return Outcome::Fail(format!("dataset {seed} differs from reference under {hp:?}"));
            }
            nodes += got.len();
        }
    }
    let mut r = rng::seeded(4);
    let x = Array2::from_shape_fn((200, 5), |_| r.random::<f64>());
    let y: Vec<u8> = (0..200).map(|_| r.random_range(0..2)).collect();
    let d = Dataset::from_parts(x.clone(), y.clone()).expect("valid dataset");
    let pred = fit_tree(&d, &HyperParams::default(), 0)
        .and_then(|t| t.predict_matrix(&x))
        .expect("fit and predict");
    let correct = pred.iter().zip(&y).filter(|(a, b)| a == b).count();
    let msg = format!("50 datasets x 2 settings, {nodes} nodes identical; memorizing tree {correct}/200 on train");
    if correct == 200 {
        Outcome::Pass(msg)
    } else {
        Outcome::Fail(msg)
    }
}

fn on_segment(p: &[f64], a: &[f64], b: &[f64], lambda: f64) -> bool {
    p.iter()
        .zip(a.iter().zip(b))
        .all(|(p, (a, b))| (p - (a + lambda * (b - a))).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs())))
}

fn c5_smote() -> Outcome {
    let mut r = rng::seeded(5);
    let mut total = 0;
    for set in 0..100 {
        let n_min = r.random_range(2..30);
        let n_maj = r.random_range(n_min + 1..n_min + 80);
        let n = r.random_range(1..=5);
        let m = n_min + n_maj;
        let x = Array2::from_shape_fn((m, n), |(i, _)| {
            if i < n_min {
                r.random_range(-1.0..1.0)
            } else {
                r.random_range(2.0..4.0)
            }
        });
        let labels: Vec<u8> = (0..m).map(|i| if i < n_min { NORMAL } else { ATTACK }).collect();
        let d = Dataset::from_parts(x, labels).expect("valid dataset");
        let cfg = SmoteConfig {
            k: r.random_range(1..8),
            target_ratio: 1.0,
            seed: set,
        };
        let out = match smote(&d, &cfg) {
            Ok(o) => o,
            Err(e) => return Outcome::Fail(format!("set {set}: {e}")),
        };
        let want = synthetic_count(n_min, n_maj, 1.0);
        let counts = out.dataset.class_counts();
        if out.n_synthetic() != want || counts[&NORMAL] != n_maj || counts[&ATTACK] != n_maj {
            return Outcome::Fail(format!("set {set}: counts {counts:?}"));
        }
        for (s, rec) in out.provenance.iter().enumerate() {
            let ok = d.labels()[rec.seed_index] == NORMAL
                && d.labels()[rec.neighbor_index] == NORMAL
                && (0.0..1.0).contains(&rec.lambda)
                && on_segment(
                    &out.dataset.row(m + s).to_vec(),
                    &d.row(rec.seed_index).to_vec(),
                    &d.row(rec.neighbor_index).to_vec(),
                    rec.lambda,
                );
            if !ok {
                return Outcome::Fail(format!("set {set}: synthetic row {s} fails the segment audit"));
            }
        }
        total += want;
    }
    Outcome::Pass(format!("100 sets, {total} synthetic rows audited, class counts exact"))
}

fn c6_bot_iot() -> Outcome {
    let Some(path) = std::env::var_os("BOTIOT_5PCT_CSV") else {
        return Outcome::Skip("BOTIOT_5PCT_CSV not set; data-dependent check not run".into());
    };
    if !std::path::Path::new(&path).exists() {
        return Outcome::Skip(format!("{} not found; data-dependent check not run", path.to_string_lossy()));
    }
    let cfg = PipelineConfig {
        data_path: Some(path.into()),
        label_column: "attack".into(),
        positive_label: "1".into(),
        negative_label: Some("0".into()),
        features: BOT_IOT_BEST_10.iter().map(|s| s.to_string()).collect(),
        max_attack_rows: Some(50_000),
        seed: 2020,
        ..Default::default()
    };
    let r = match run_pipeline(&cfg) {
        Ok(r) => r,
        Err(e) => return Outcome::Fail(format!("pipeline failed: {e}")),
    };
    let normal = r.source_counts.get(&NORMAL).copied().unwrap_or(0);
    let attack = r.source_counts.get(&ATTACK).copied().unwrap_or(0);
    let o = &r.optimized_metrics;
    let msg = format!(
        "{normal} normal + {attack} attack rows; accuracy {:.5}, attack F {:.4}, macro-F optimized {:.4} vs default {:.4} (full-scale published: 0.9999, F 1.00)",
        o.accuracy, o.attack.f_score, o.macro_f_score, r.default_metrics.macro_f_score
    );
    if normal == 477
        && attack == 50_000
        && o.accuracy >= 0.999
        && o.attack.f_score >= 0.99
        && o.macro_f_score >= r.default_metrics.macro_f_score
    {
        Outcome::Pass(msg)
    } else {
        Outcome::Fail(msg)
    }
}

fn c7_synthetic() -> Outcome {
    let d = synthetic::gaussian_clusters(10_000, 100, 7).expect("valid dataset");
    let cfg = PipelineConfig {
        seed: 7,
        ..Default::default()
    };
    let r = match run_on_dataset(&cfg, &d) {
        Ok(r) => r,
        Err(e) => return Outcome::Fail(format!("pipeline failed: {e}")),
    };
    let (o, b) = (&r.optimized_metrics, &r.default_metrics);
    let msg = format!(
        "accuracy {:.4}, macro-F optimized {:.4} vs default {:.4}, {} trials",
        o.accuracy,
        o.macro_f_score,
        b.macro_f_score,
        r.trace.trials.len()
    );
    if o.accuracy >= 0.99 && o.macro_f_score >= b.macro_f_score {
        Outcome::Pass(msg)
    } else {
        Outcome::Fail(msg)
    }
}

fn c8_scope() -> Outcome {
    Outcome::Info(
        "full 3.67M-row numbers are not reproduced; criteria 6 and 1-5 stand in. `bench` reports scaling, nothing asserted"
            .into(),
    )
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { id: 1, name: "metric identities", limit: Some(Duration::from_secs(1)), run: c1_metric_identities },
        Criterion { id: 2, name: "GP vs dense oracle", limit: Some(Duration::from_secs(5)), run: c2_gp },
        Criterion { id: 3, name: "BO sanity", limit: Some(Duration::from_secs(10)), run: c3_bo },
        Criterion { id: 4, name: "tree oracle equivalence", limit: Some(Duration::from_secs(30)), run: c4_tree },
        Criterion { id: 5, name: "SMOTE properties", limit: Some(Duration::from_secs(5)), run: c5_smote },
        Criterion { id: 6, name: "Bot-IoT reduced scale", limit: Some(Duration::from_secs(600)), run: c6_bot_iot },
        Criterion { id: 7, name: "synthetic imbalance", limit: Some(Duration::from_secs(300)), run: c7_synthetic },
        Criterion { id: 8, name: "scope", limit: None, run: c8_scope },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.run)();
        let took = start.elapsed();
        let over = c.limit.filter(|l| took > *l);
        let (tag, msg) = match outcome {
            Outcome::Pass(m) if over.is_some() => ("FAIL", format!("{m}; exceeded {:?}", over.unwrap())),
            Outcome::Pass(m) => ("PASS", m),
            Outcome::Fail(m) => ("FAIL", m),
            Outcome::Skip(m) => ("SKIP", m),
            Outcome::Info(m) => ("INFO", m),
        };
        if tag == "FAIL" {
            failed += 1;
        }
        println!("criterion {} ({}): {tag}: {msg} [{:.2}s]", c.id, c.name, took.as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
