use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ill_core::labels::{read_dataset, read_dataset_with_classes, BlobSpec, ImpreciseDataset};
use ill_core::rng::{derive_seed, Stream};
use ill_core::task;
use ill_core::trainer::{evaluate, train, write_metrics_csv, TrainOutcome};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::RunConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct SeedResult {
    pub seed: u64,
    /// Accuracy on the held-out set, when there is one.
    pub test_acc: Option<f64>,
    /// Accuracy against the training set's true labels.
    pub train_true_acc: f64,
    pub transition_tv: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub seeds: Vec<SeedResult>,
}

impl RunSummary {
    pub fn test_acc(&self) -> Option<Stat> {
        Stat::of(self.seeds.iter().map(|s| s.test_acc).collect::<Option<Vec<_>>>()?)
    }
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl Stat {
    pub fn of(values: Vec<f64>) -> Option<Stat> {
        if values.is_empty() {
            return None;
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(Stat { mean, std, n })
    }

    fn json(values: &[f64]) -> Value {
        match Stat::of(values.to_vec()) {
            Some(s) => json!({ "mean": s.mean, "std": s.std, "per_seed": values }),
            None => Value::Null,
        }
    }
}

pub struct Datasets {
    pub train: ImpreciseDataset,
    pub test: Option<ImpreciseDataset>,
}

fn blob_spec(cfg: &RunConfig) -> BlobSpec {
    BlobSpec {
        classes: cfg.data.classes,
        dim: cfg.data.dim,
        separation: cfg.data.separation,
        std: cfg.data.blob_std,
    }
}

/// Loads the configured files, or generates and corrupts blobs for `seed`.
pub fn datasets(cfg: &RunConfig, seed: u64) -> Result<Datasets> {
    if let Some(path) = &cfg.data.train_file {
        let train = read_dataset(path).with_context(|| format!("reading {}", path.display()))?;
        let test = match &cfg.data.test_file {
            Some(p) => Some(
                read_dataset_with_classes(p, train.classes()).with_context(|| format!("reading {}", p.display()))?,
            ),
            None => None,
        };
        return Ok(Datasets { train, test });
    }
    let spec = blob_spec(cfg);
    let clean = spec.generate(cfg.data.n_train, seed, Stream::TrainData)?;
    let test = spec.generate(cfg.data.n_test, seed, Stream::TestData)?;
    let train = task::builtin()
        .get(&cfg.task)?
        .corrupt(&clean, &cfg.corruption, derive_seed(seed, Stream::Corruption))?;
    Ok(Datasets { train, test: Some(test) })
}

fn dataset_note(cfg: &RunConfig) -> String {
    match &cfg.data.train_file {
        Some(p) => format!(
            "file {}{}",
            p.display(),
            cfg.data
                .test_file
                .as_ref()
                .map_or(String::new(), |t| format!(", test file {}", t.display()))
        ),
        None => format!(
            "gaussian blobs C={} D={} separation={} std={} n_train={} n_test={}, regenerated per seed",
            cfg.data.classes, cfg.data.dim, cfg.data.separation, cfg.data.blob_std, cfg.data.n_train, cfg.data.n_test
        ),
    }
}

fn model_json(outcome: &TrainOutcome, result: &SeedResult) -> Value {
    let c = &outcome.classifier;
    let norm = c.params().iter().map(|v| v * v).sum::<f64>().sqrt();
    let last = outcome.metrics.last();
    json!({
        "architecture": c.architecture().name(),
        "hidden": match c.architecture() {
            ill_core::model::Architecture::Mlp { hidden } => Some(hidden),
            ill_core::model::Architecture::Linear => None,
        },
        "input_dim": c.input_dim(),
        "classes": c.classes(),
        "param_count": c.params().len(),
        "param_norm": norm,
        "epochs_run": outcome.metrics.len(),
        "final_loss": last.map(|m| m.loss_total),
        "test_acc": result.test_acc,
        "train_true_acc": result.train_true_acc,
        "transition_tv": result.transition_tv,
        "params": c.params(),
    })
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Trains one seed and writes its artifacts into `out`.
pub fn run_seed(cfg: &RunConfig, seed: u64, out: &Path) -> Result<SeedResult> {
    let data = datasets(cfg, seed)?;
    let outcome = train(&data.train, &cfg.train_config(seed), data.test.as_ref())
        .with_context(|| format!("training seed {seed}"))?;

    let metrics_path = out.join(format!("metrics_seed{seed}.csv"));
    let file = fs::File::create(&metrics_path).with_context(|| format!("creating {}", metrics_path.display()))?;
    write_metrics_csv(&outcome.metrics, BufWriter::new(file))?;

    let result = SeedResult {
        seed,
        test_acc: data.test.as_ref().map(|t| evaluate(&outcome.classifier, t)).transpose()?,
        train_true_acc: evaluate(&outcome.classifier, &data.train)?,
        transition_tv: outcome.metrics.last().and_then(|m| m.transition_tv),
    };
    write_json(&out.join(format!("model_seed{seed}.json")), &model_json(&outcome, &result))?;
    if let Some(noise) = &outcome.noise {
        let path = out.join(format!("transition_seed{seed}.json"));
        fs::write(&path, noise.transition_matrix().to_json(noise.scale()))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(result)
}

pub fn manifest_path(out: &Path) -> PathBuf {
    out.join("manifest.conf")
}

/// Runs every seed, writing the manifest first and the aggregate last.
pub fn run(cfg: &RunConfig, pool: &rayon::ThreadPool) -> Result<RunSummary> {
    let out = &cfg.out;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    fs::write(manifest_path(out), cfg.manifest(&dataset_note(cfg)))
        .with_context(|| format!("writing manifest in {}", out.display()))?;

    let results: Vec<Result<SeedResult>> =
        pool.install(|| cfg.seeds.par_iter().map(|&s| run_seed(cfg, s, out)).collect());
    let seeds = results.into_iter().collect::<Result<Vec<_>>>()?;
    let summary = RunSummary { seeds };
    write_json(&out.join("aggregate.json"), &aggregate_json(cfg, &summary))?;
    Ok(summary)
}

pub fn aggregate_json(cfg: &RunConfig, summary: &RunSummary) -> Value {
    let test: Option<Vec<f64>> = summary.seeds.iter().map(|s| s.test_acc).collect();
    let train: Vec<f64> = summary.seeds.iter().map(|s| s.train_true_acc).collect();
    let tv: Option<Vec<f64>> = summary.seeds.iter().map(|s| s.transition_tv).collect();
    json!({
        "task": cfg.task,
        "seeds": summary.seeds.iter().map(|s| s.seed).collect::<Vec<_>>(),
        "test_acc": test.as_deref().map_or(Value::Null, Stat::json),
        "train_true_acc": Stat::json(&train),
        "transition_tv": tv.as_deref().map_or(Value::Null, Stat::json),
    })
}

pub fn build_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    if jobs == 0 {
        bail!("jobs must be at least 1");
    }
    Ok(rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?)
}
