//! Layered `key = value` configuration: built-in defaults, then a config
//! file, then command-line flags.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ill_core::model::{Architecture, DEFAULT_HIDDEN};
use ill_core::optim::SgdConfig;
use ill_core::task::{self, CorruptionParams};
use ill_core::trainer::{AugmentConfig, TrainConfig};

/// Invalid user input; maps to the usage exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage<T>(msg: impl Into<String>) -> Result<T, UsageError> {
    Err(UsageError(msg.into()))
}

pub const DEFAULTS: &[(&str, &str)] = &[
    ("task", "supervised"),
    ("q", "0"),
    ("eta", "0"),
    ("labels", "all"),
    ("asymmetric", "false"),
    ("C", "10"),
    ("D", "16"),
    ("separation", "3"),
    ("blob_std", "1"),
    ("n_train", "4000"),
    ("n_test", "2000"),
    ("arch", "linear"),
    ("epochs", "40"),
    ("batch_size", "64"),
    ("lr", "0.2"),
    ("momentum", "0.9"),
    ("weight_decay", "0.0005"),
    ("noise_lr", "0.05"),
    ("entropy_weight", "0.1"),
    ("noise_scale", "1"),
    ("ema", "off"),
    ("weak_std", "0.05"),
    ("strong_std", "0.3"),
    ("strong_dropout", "0"),
    ("seeds", "0,1,2"),
    ("data", ""),
    ("test_data", ""),
    ("out", "runs"),
    ("jobs", "1"),
    ("grid_labels", "1000,2000,4000"),
    ("grid_q", "0.1,0.3,0.5"),
    ("grid_eta", "0,0.1,0.2,0.3"),
    ("check_trend", "false"),
];

/// Keys written by the manifest for provenance only.
const INFORMATIONAL: &[&str] = &["version"];

pub fn is_known_key(key: &str) -> bool {
    DEFAULTS.iter().any(|(k, _)| *k == key) || INFORMATIONAL.contains(&key)
}

/// String-valued settings; later layers override earlier ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings(BTreeMap<String, String>);

impl Settings {
    pub fn defaults() -> Self {
        Settings(DEFAULTS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect())
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.0.insert(key.to_string(), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn overlay(&mut self, other: &Settings) {
        for (k, v) in &other.0 {
            self.0.insert(k.clone(), v.clone());
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn parse(text: &str) -> Result<Self, UsageError> {
        let mut s = Settings::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return usage(format!("config line {}: expected `key = value`", i + 1));
            };
            let key = k.trim();
            if !is_known_key(key) {
                return usage(format!("config line {}: unknown key `{key}`", i + 1));
            }
            s.set(key, v.trim());
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, UsageError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        Settings::parse(&text)
    }

    /// `key = value` lines, sorted by key.
    pub fn render(&self) -> String {
        self.0.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    fn value<T: FromStr>(&self, key: &str) -> Result<T, UsageError> {
        let raw = self.get(key).unwrap_or("");
        raw.parse()
            .map_err(|_| UsageError(format!("invalid value `{raw}` for `{key}`")))
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>, UsageError> {
        let raw = self.get(key).unwrap_or("");
        let items: Vec<T> = raw
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse())
            .collect::<Result<_, _>>()
            .map_err(|_| UsageError(format!("invalid list `{raw}` for `{key}`")))?;
        if items.is_empty() {
            return usage(format!("`{key}` must not be empty"));
        }
        Ok(items)
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.get(key).filter(|v| !v.is_empty()).map(PathBuf::from)
    }

    fn optional_f64(&self, key: &str) -> Result<Option<f64>, UsageError> {
        match self.get(key) {
            None | Some("") | Some("off") | Some("none") => Ok(None),
            Some(_) => self.value(key).map(Some),
        }
    }
}

/// Parses `linear`, `mlp` or `mlp:<hidden>`.
pub fn parse_arch(raw: &str) -> Result<Architecture, UsageError> {
    match raw.split_once(':') {
        None if raw == "linear" => Ok(Architecture::Linear),
        None if raw == "mlp" => Ok(Architecture::Mlp { hidden: DEFAULT_HIDDEN }),
        Some(("mlp", h)) => match h.parse() {
            Ok(hidden) if hidden > 0 => Ok(Architecture::Mlp { hidden }),
            _ => usage(format!("invalid hidden width `{h}`")),
        },
        _ => usage(format!("unknown architecture `{raw}` (linear, mlp, mlp:<hidden>)")),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataConfig {
    pub classes: usize,
    pub dim: usize,
    pub separation: f64,
    pub blob_std: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub train_file: Option<PathBuf>,
    pub test_file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub labels: Vec<usize>,
    pub q: Vec<f64>,
    pub eta: Vec<f64>,
    pub check_trend: bool,
}

/// Fully resolved, validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub settings: Settings,
    pub task: String,
    pub corruption: CorruptionParams,
    pub data: DataConfig,
    pub train: TrainConfig,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    pub jobs: usize,
    pub grid: GridConfig,
}

impl RunConfig {
    pub fn from_settings(settings: Settings) -> Result<Self, UsageError> {
        let s = &settings;
        let task: String = s.value("task")?;
        let registry = task::builtin();
        if registry.get(&task).is_err() {
            return usage(format!("unknown task `{task}` (one of {})", registry.names().collect::<Vec<_>>().join(", ")));
        }
        let labels = match s.get("labels") {
            Some("all") | None => None,
            Some(_) => Some(s.value::<usize>("labels")?),
        };
        let corruption = CorruptionParams {
            q: s.value("q")?,
            eta: s.value("eta")?,
            labels,
            asymmetric: s.value("asymmetric")?,
        };
        let data = DataConfig {
            classes: s.value("C")?,
            dim: s.value("D")?,
            separation: s.value("separation")?,
            blob_std: s.value("blob_std")?,
            n_train: s.value("n_train")?,
            n_test: s.value("n_test")?,
            train_file: s.path("data"),
            test_file: s.path("test_data"),
        };
        let train = TrainConfig {
            task: task.clone(),
            arch: parse_arch(s.get("arch").unwrap_or(""))?,
            epochs: s.value("epochs")?,
            batch_size: s.value("batch_size")?,
            sgd: SgdConfig {
                lr: s.value("lr")?,
                momentum: s.value("momentum")?,
                weight_decay: s.value("weight_decay")?,
            },
            noise_lr: s.optional_f64("noise_lr")?,
            entropy_weight: s.value("entropy_weight")?,
            augment: AugmentConfig {
                weak_std: s.value("weak_std")?,
                strong_std: s.value("strong_std")?,
                strong_dropout: s.value("strong_dropout")?,
            },
            ema: s.optional_f64("ema")?,
            noise_scale: s.value("noise_scale")?,
            seed: 0,
        };
        train.validate().map_err(|e| UsageError(e.to_string()))?;
        let seeds: Vec<u64> = s.list("seeds")?;
        let mut seen = seeds.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != seeds.len() {
            return usage("seed list has duplicates");
        }
        let jobs: usize = s.value("jobs")?;
        if jobs == 0 {
            return usage("jobs must be at least 1");
        }
        let mut eta: Vec<f64> = s.list("grid_eta")?;
        if eta.iter().any(|v| !v.is_finite()) {
            return usage("grid_eta values must be finite");
        }
        eta.sort_by(f64::total_cmp);
        eta.dedup();
        let grid = GridConfig {
            labels: s.list("grid_labels")?,
            q: s.list("grid_q")?,
            eta,
            check_trend: s.value("check_trend")?,
        };
        let cfg = RunConfig {
            task,
            corruption,
            data,
            train,
            seeds,
            out: s.path("out").unwrap_or_else(|| PathBuf::from("runs")),
            jobs,
            grid,
            settings,
        };
        cfg.check_combination()?;
        Ok(cfg)
    }

    /// Rejects corruption settings the task would silently ignore.
    fn check_combination(&self) -> Result<(), UsageError> {
        let c = &self.corruption;
        let knobs = task::builtin()
            .get(&self.task)
            .map_err(|e| UsageError(e.to_string()))?
            .knobs();
        let (q, eta, labels) = (knobs.q, knobs.eta, knobs.labels);
        let reject = |flag: &str| usage(format!("`{flag}` does not apply to task `{}`", self.task));
        if self.data.train_file.is_some() {
            if c.q != 0.0 || c.eta != 0.0 || c.labels.is_some() || c.asymmetric {
                return usage("corruption settings cannot be combined with `data`; the file's annotations are used as-is");
            }
            return Ok(());
        }
        if !q && c.q != 0.0 {
            return reject("q");
        }
        if !eta && (c.eta != 0.0 || c.asymmetric) {
            return reject(if c.asymmetric { "asymmetric" } else { "eta" });
        }
        if !labels && c.labels.is_some() {
            return reject("labels");
        }
        if self.task == "ssl" && c.labels.is_none() {
            return usage("task `ssl` needs `labels`");
        }
        if self.train_file_missing_and_tiny() {
            return usage("n_train and n_test must be positive");
        }
        Ok(())
    }

    fn train_file_missing_and_tiny(&self) -> bool {
        self.data.train_file.is_none() && (self.data.n_train == 0 || self.data.n_test == 0)
    }

    /// Training configuration for one seed.
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            seed,
            ..self.train.clone()
        }
    }

    /// A copy with different corruption settings and output directory.
    pub fn with_cell(&self, labels: usize, q: f64, eta: f64, out: PathBuf) -> Result<RunConfig, UsageError> {
        let mut s = self.settings.clone();
        s.set("labels", labels.to_string());
        s.set("q", q.to_string());
        s.set("eta", eta.to_string());
        s.set("out", out.display().to_string());
        RunConfig::from_settings(s)
    }

    /// The manifest: every resolved setting plus provenance comments.
    pub fn manifest(&self, dataset_note: &str) -> String {
        let mut s = self.settings.clone();
        s.set("version", env!("CARGO_PKG_VERSION"));
        format!(
            "# ill run manifest; rerun with `ill run --config <this file>`\n# dataset: {dataset_note}\n{}",
            s.render()
        )
    }
}
