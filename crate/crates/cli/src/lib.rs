//! Experiment runner for the imprecise-label EM engine.

pub mod config;
pub mod run;
pub mod sweep;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use config::{Settings, UsageError};

#[derive(Debug, Parser)]
#[command(name = "ill", version, about = "Train classifiers from imprecise labels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train across seeds and write metrics, models and an aggregate.
    Run(Flags),
    /// Run the labels × q × eta grid of the mixed task.
    Sweep(Flags),
    /// List the registered tasks.
    Tasks,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// supervised, pll, ssl, nll or mixed.
    #[arg(long)]
    pub task: Option<String>,
    /// Partial ratio.
    #[arg(long)]
    pub q: Option<f64>,
    /// Noise ratio.
    #[arg(long)]
    pub eta: Option<f64>,
    /// Label budget (`all` keeps every label).
    #[arg(long)]
    pub labels: Option<String>,
    /// Flip labels along y -> y+1 instead of uniformly.
    #[arg(long)]
    pub asymmetric: bool,
    #[arg(long = "C", value_name = "CLASSES")]
    pub classes: Option<usize>,
    #[arg(long = "D", value_name = "DIM")]
    pub dim: Option<usize>,
    #[arg(long)]
    pub separation: Option<f64>,
    #[arg(long)]
    pub n_train: Option<usize>,
    #[arg(long)]
    pub n_test: Option<usize>,
    /// linear, mlp or mlp:<hidden>.
    #[arg(long)]
    pub arch: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    /// Learning rate of the noise model (`off` reuses --lr).
    #[arg(long)]
    pub noise_lr: Option<String>,
    #[arg(long)]
    pub entropy_weight: Option<f64>,
    #[arg(long)]
    pub noise_scale: Option<f64>,
    /// Momentum of the per-sample target average (`off` disables).
    #[arg(long)]
    pub ema: Option<String>,
    #[arg(long)]
    pub weak_std: Option<f64>,
    #[arg(long)]
    pub strong_std: Option<f64>,
    #[arg(long)]
    pub strong_dropout: Option<f64>,
    /// Comma-separated seeds.
    #[arg(long)]
    pub seeds: Option<String>,
    /// Training set CSV; replaces the generated blobs.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Held-out CSV used with --data.
    #[arg(long)]
    pub test_data: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// `key = value` file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Concurrent seeds (run) or cells (sweep).
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub grid_labels: Option<String>,
    #[arg(long)]
    pub grid_q: Option<String>,
    #[arg(long)]
    pub grid_eta: Option<String>,
    /// Fail the sweep when accuracy rises with eta beyond one pooled std.
    #[arg(long)]
    pub check_trend: bool,
}

impl Flags {
    fn settings(&self) -> Settings {
        let mut s = Settings::default();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                s.set(k, v);
            }
        };
        let show = |v: Option<f64>| v.map(|x| x.to_string());
        put("task", self.task.clone());
        put("q", show(self.q));
        put("eta", show(self.eta));
        put("labels", self.labels.clone());
        put("asymmetric", self.asymmetric.then(|| "true".into()));
        put("C", self.classes.map(|v| v.to_string()));
        put("D", self.dim.map(|v| v.to_string()));
        put("separation", show(self.separation));
        put("n_train", self.n_train.map(|v| v.to_string()));
        put("n_test", self.n_test.map(|v| v.to_string()));
        put("arch", self.arch.clone());
        put("epochs", self.epochs.map(|v| v.to_string()));
        put("batch_size", self.batch_size.map(|v| v.to_string()));
        put("lr", show(self.lr));
        put("momentum", show(self.momentum));
        put("weight_decay", show(self.weight_decay));
        put("noise_lr", self.noise_lr.clone());
        put("entropy_weight", show(self.entropy_weight));
        put("noise_scale", show(self.noise_scale));
        put("ema", self.ema.clone());
        put("weak_std", show(self.weak_std));
        put("strong_std", show(self.strong_std));
        put("strong_dropout", show(self.strong_dropout));
        put("seeds", self.seeds.clone());
        put("data", self.data.as_ref().map(|p| p.display().to_string()));
        put("test_data", self.test_data.as_ref().map(|p| p.display().to_string()));
        put("out", self.out.as_ref().map(|p| p.display().to_string()));
        put("jobs", self.jobs.map(|v| v.to_string()));
        put("grid_labels", self.grid_labels.clone());
        put("grid_q", self.grid_q.clone());
        put("grid_eta", self.grid_eta.clone());
        put("check_trend", self.check_trend.then(|| "true".into()));
        s
    }

    /// Defaults, then the config file, then explicit flags.
    pub fn resolve(&self, base: Settings) -> Result<config::RunConfig, UsageError> {
        let mut s = base;
        if let Some(path) = &self.config {
            let file = Settings::load(path)?;
            if let Some(v) = file.get("version") {
                if v != env!("CARGO_PKG_VERSION") {
                    eprintln!("warning: config written by version {v}, running {}", env!("CARGO_PKG_VERSION"));
                }
            }
            s.overlay(&file);
        }
        s.overlay(&self.settings());
        s.set("version", env!("CARGO_PKG_VERSION"));
        config::RunConfig::from_settings(s)
    }
}

pub const EXIT_RUNTIME: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

/// Executes a parsed command; the error carries the exit code.
pub fn execute(cli: Cli) -> Result<(), (u8, String)> {
    let to_usage = |e: UsageError| (EXIT_USAGE, e.0);
    let to_runtime = |e: anyhow::Error| {
        let code = if e.downcast_ref::<UsageError>().is_some() {
            EXIT_USAGE
        } else {
            EXIT_RUNTIME
        };
        (code, format!("{e:#}"))
    };
    match cli.command {
        Command::Tasks => {
            for t in ill_core::task::builtin().iter() {
                println!("{:<11} {}", t.name(), t.description());
            }
            Ok(())
        }
        Command::Run(flags) => {
            let cfg = flags.resolve(Settings::defaults()).map_err(to_usage)?;
            let pool = run::build_pool(cfg.jobs).map_err(to_runtime)?;
            let summary = run::run(&cfg, &pool).map_err(to_runtime)?;
            match summary.test_acc() {
                Some(s) => println!(
                    "{}: test accuracy {:.4} ± {:.4} over {} seeds -> {}",
                    cfg.task,
                    s.mean,
                    s.std,
                    s.n,
                    cfg.out.display()
                ),
                None => println!("{}: done -> {}", cfg.task, cfg.out.display()),
            }
            Ok(())
        }
        Command::Sweep(flags) => {
            let mut base = Settings::defaults();
            base.set("task", "mixed");
            let cfg = flags.resolve(base).map_err(to_usage)?;
            if cfg.task != "mixed" {
                return Err((EXIT_USAGE, "sweep runs the mixed task".into()));
            }
            let pool = run::build_pool(cfg.jobs).map_err(to_runtime)?;
            let cells = sweep::sweep(&cfg, &pool).map_err(to_runtime)?;
            print!("{}", sweep::summary_csv(&cfg.grid.eta, &cells, |s| s.mean));
            if cfg.grid.check_trend {
                let violations = sweep::check_trend(&cells, &cfg.grid.eta);
                if !violations.is_empty() {
                    let lines: Vec<String> = violations
                        .iter()
                        .map(|v| {
                            format!(
                                "l={} q={}: accuracy rises {:.4} from eta={} to eta={} (tolerance {:.4})",
                                v.labels, v.q, v.rise, v.low_eta, v.high_eta, v.tolerance
                            )
                        })
                        .collect();
                    return Err((EXIT_RUNTIME, format!("trend check failed:\n{}", lines.join("\n"))));
                }
                println!("trend check passed");
            }
            Ok(())
        }
    }
}
