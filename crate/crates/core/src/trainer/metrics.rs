use std::io::Write;

use crate::error::Result;
use crate::labels::format_f64;

pub const METRICS_HEADER: &str =
    "epoch,loss_total,loss_consistency,loss_supervised,loss_entropy,test_acc,obs_loglik,transition_tv";

/// One row of the per-epoch metrics stream.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub epoch: usize,
    pub loss_total: f64,
    pub loss_consistency: f64,
    pub loss_supervised: f64,
    pub loss_entropy: f64,
    pub test_acc: Option<f64>,
    /// Mean per-sample observed-annotation log-likelihood.
    pub obs_loglik: f64,
    pub transition_tv: Option<f64>,
}

fn cell(v: Option<f64>) -> String {
    v.map(format_f64).unwrap_or_default()
}

pub fn write_metrics_csv(records: &[MetricsRecord], mut out: impl Write) -> Result<()> {
    writeln!(out, "{METRICS_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.epoch,
            format_f64(r.loss_total),
            format_f64(r.loss_consistency),
            format_f64(r.loss_supervised),
            format_f64(r.loss_entropy),
            cell(r.test_acc),
            format_f64(r.obs_loglik),
            cell(r.transition_tv),
        )?;
    }
    Ok(())
}
