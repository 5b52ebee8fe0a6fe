use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::run::{run, RunSummary, Stat};

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub labels: usize,
    pub q: f64,
    pub eta: f64,
    pub acc: Stat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrendViolation {
    pub labels: usize,
    pub q: f64,
    pub low_eta: f64,
    pub high_eta: f64,
    pub rise: f64,
    pub tolerance: f64,
}

pub fn cell_dir(labels: usize, q: f64, eta: f64) -> String {
    format!("l{labels}_q{q}_eta{eta}")
}

/// Runs the `labels × q × eta` grid; cells run in parallel, seeds within a
/// cell sequentially.
pub fn sweep(cfg: &RunConfig, pool: &rayon::ThreadPool) -> Result<Vec<Cell>> {
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    fs::write(cfg.out.join("manifest.conf"), cfg.manifest("sweep grid, see per-cell manifests"))?;
    let mut cells = Vec::new();
    for &l in &cfg.grid.labels {
        for &q in &cfg.grid.q {
            for &eta in &cfg.grid.eta {
                let out: PathBuf = cfg.out.join(cell_dir(l, q, eta));
                let cell = cfg.with_cell(l, q, eta, out)?;
                cells.push((l, q, eta, cell));
            }
        }
    }
    let serial = build_serial()?;
    let results: Vec<Result<(usize, f64, f64, RunSummary)>> = pool.install(|| {
        cells
            .par_iter()
            .map(|(l, q, eta, c)| Ok((*l, *q, *eta, run(c, &serial)?)))
            .collect()
    });
    let mut out = Vec::with_capacity(results.len());
    for r in results {
        let (labels, q, eta, summary) = r?;
        let acc = summary
            .test_acc()
            .context("sweep cells need held-out accuracy")?;
        out.push(Cell { labels, q, eta, acc });
    }
    fs::write(cfg.out.join("summary.csv"), summary_csv(&cfg.grid.eta, &out, |s| s.mean))?;
    fs::write(cfg.out.join("summary_std.csv"), summary_csv(&cfg.grid.eta, &out, |s| s.std))?;
    Ok(out)
}

fn build_serial() -> Result<rayon::ThreadPool> {
    crate::run::build_pool(1)
}

/// Rows `labels × q`, one column per `eta`.
pub fn summary_csv(etas: &[f64], cells: &[Cell], pick: impl Fn(&Stat) -> f64) -> String {
    let mut s = String::from("l,q");
    for eta in etas {
        let _ = write!(s, ",eta={eta}");
    }
    s.push('\n');
    for row in cells.chunks(etas.len()) {
        let _ = write!(s, "{},{}", row[0].labels, row[0].q);
        for c in row {
            let _ = write!(s, ",{:.6}", pick(&c.acc));
        }
        s.push('\n');
    }
    s
}

/// Accuracy must not rise with `eta` by more than the row's pooled
/// standard deviation.
pub fn check_trend(cells: &[Cell], etas: &[f64]) -> Vec<TrendViolation> {
    let mut violations = Vec::new();
    for row in cells.chunks(etas.len()) {
        let pooled = (row.iter().map(|c| c.acc.std * c.acc.std).sum::<f64>() / row.len() as f64).sqrt();
        for i in 0..row.len() {
            for j in i + 1..row.len() {
                let rise = row[j].acc.mean - row[i].acc.mean;
                if rise > pooled {
                    violations.push(TrendViolation {
                        labels: row[i].labels,
                        q: row[i].q,
                        low_eta: row[i].eta,
                        high_eta: row[j].eta,
                        rise,
                        tolerance: pooled,
                    });
                }
            }
        }
    }
    violations
}
