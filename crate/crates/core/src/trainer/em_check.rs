//! Batch generalized EM on un-augmented features.
//!
//! Each iteration computes exact posteriors at the current parameters, then
//! takes gradient steps on the expected complete-data log-likelihood
//! `Q(θ, ω) = Σ_i Σ_y t_i(y) [log p(y | x_i; θ) + log P(I_i | y; ω)]`, keeping
//! a step only when `Q` increases. That acceptance rule is what guarantees
//! the observed log-likelihood never decreases; the online trainer has no
//! such guarantee.

use crate::error::{Error, Result};
use crate::labels::{ImpreciseDataset, LabelInfo};
use crate::model::Classifier;
use crate::noise::NoiseModel;
use crate::posterior::posterior;
use crate::simplex::{log_softmax, ProbVector};

use super::eval::{log_transition, observed_log_likelihood};

/// Largest dataset the full-batch checker accepts.
pub const MAX_SAMPLES: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmCheckConfig {
    pub iterations: usize,
    /// Gradient steps per M-step.
    pub m_steps: usize,
    pub lr: f64,
    /// Step-halvings tried before a gradient step is abandoned.
    pub max_halvings: usize,
}

impl Default for EmCheckConfig {
    fn default() -> Self {
        EmCheckConfig {
            iterations: 50,
            m_steps: 5,
            lr: 0.5,
            max_halvings: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmTrace {
    /// Observed log-likelihood before the first iteration and after each.
    pub log_likelihood: Vec<f64>,
    /// Whether the M-step of each iteration accepted at least one step.
    pub accepted: Vec<bool>,
}

impl EmTrace {
    /// Largest single-iteration decrease (zero if the trace never drops).
    pub fn max_decrease(&self) -> f64 {
        self.log_likelihood
            .windows(2)
            .map(|w| w[0] - w[1])
            .fold(0.0, f64::max)
    }
}

/// `log P(I | y; ω)` per class, or `None` for annotations whose likelihood
/// is a constant on the admitted classes.
fn log_annotation_weights(label: &LabelInfo, log_t: Option<&[Vec<f64>]>, classes: usize) -> Option<Vec<f64>> {
    let log_t = log_t?;
    match label {
        LabelInfo::Noisy(o) => Some((0..classes).map(|y| log_t[y][*o]).collect()),
        LabelInfo::NoisyCandidates(s) => Some(
            (0..classes)
                .map(|y| crate::simplex::log_sum_exp(&s.iter().map(|k| log_t[y][k]).collect::<Vec<_>>()))
                .collect(),
        ),
        _ => None,
    }
}

/// `Q` for fixed targets, with gradients of `−Q / N` when requested.
pub fn q_objective(
    classifier: &Classifier,
    noise: Option<&NoiseModel>,
    dataset: &ImpreciseDataset,
    targets: &[ProbVector],
    grads: Option<(&mut [f64], Option<&mut [f64]>)>,
) -> Result<f64> {
    let c = dataset.classes();
    let log_t = log_transition(noise);
    let t = noise.map(NoiseModel::transition_matrix);
    let n = dataset.len() as f64;
    let mut q = 0.0;
    let (mut g_theta, mut g_omega) = match grads {
        Some((a, b)) => (Some(a), b),
        None => (None, None),
    };
    if let Some(g) = g_theta.as_deref_mut() {
        g.fill(0.0);
    }
    if let Some(g) = g_omega.as_deref_mut() {
        g.fill(0.0);
    }
    for (e, target) in dataset.entries().iter().zip(targets) {
        let x = &e.sample.features;
        let cache = classifier.forward_cached(x)?;
        let log_p = log_softmax(&cache.logits);
        let log_w = log_annotation_weights(&e.label, log_t.as_deref(), c);
        for y in 0..c {
            let ty = target[y];
            if ty == 0.0 {
                continue;
            }
            q += ty * (log_p[y] + log_w.as_ref().map_or(0.0, |w| w[y]));
        }
        if let Some(g) = g_theta.as_deref_mut() {
            let p = cache.probs();
            let dz: Vec<f64> = (0..c).map(|k| (p[k] - target[k]) / n).collect();
            classifier.backward(x, &cache, &dz, g);
        }
        if let (Some(g), Some(t)) = (g_omega.as_deref_mut(), t.as_ref()) {
            let set = match &e.label {
                LabelInfo::Noisy(o) => crate::labels::CandidateSet::singleton(*o),
                LabelInfo::NoisyCandidates(s) => s.clone(),
                _ => continue,
            };
            let in_set = set.mask(c);
            let r = t.set_likelihood(&set);
            for y in 0..c {
                let ty = target[y];
                if ty == 0.0 {
                    continue;
                }
                let row = t.row(y);
                for j in 0..c {
                    let indicator = if in_set[j] { row[j] } else { 0.0 };
                    g[y * c + j] -= ty * (indicator - row[j] * r[y]) / r[y] / n;
                }
            }
        }
    }
    if !q.is_finite() {
        return Err(Error::Numeric {
            context: "expected complete-data log-likelihood".into(),
        });
    }
    Ok(q)
}

fn exact_targets(
    classifier: &Classifier,
    noise: Option<&NoiseModel>,
    dataset: &ImpreciseDataset,
) -> Result<Vec<ProbVector>> {
    let t = noise.map(NoiseModel::transition_matrix);
    dataset
        .entries()
        .iter()
        .map(|e| Ok(posterior(&classifier.predict(&e.sample.features)?, &e.label, t.as_ref())?.probs))
        .collect()
}

/// Runs generalized EM in place and returns the observed log-likelihood
/// trace.
pub fn exact_em_check(
    dataset: &ImpreciseDataset,
    classifier: &mut Classifier,
    mut noise: Option<&mut NoiseModel>,
    config: &EmCheckConfig,
) -> Result<EmTrace> {
    if dataset.len() > MAX_SAMPLES {
        return Err(Error::config(format!(
            "exact EM check is full-batch; {} samples exceeds {MAX_SAMPLES}",
            dataset.len()
        )));
    }
    if dataset.is_empty() {
        return Err(Error::contract("exact EM check needs samples"));
    }
    if dataset.has_noisy() && noise.is_none() {
        return Err(Error::config("dataset has noisy annotations but no noise model"));
    }
    let mut trace = EmTrace {
        log_likelihood: vec![observed_log_likelihood(classifier, noise.as_deref(), dataset)?],
        accepted: Vec::with_capacity(config.iterations),
    };
    let mut g_theta = vec![0.0; classifier.params().len()];
    let mut g_omega = noise.as_deref().map(|m| vec![0.0; m.params().len()]);

    for _ in 0..config.iterations {
        let targets = exact_targets(classifier, noise.as_deref(), dataset)?;
        let mut accepted_any = false;
        let mut current = q_objective(
            classifier,
            noise.as_deref(),
            dataset,
            &targets,
            Some((&mut g_theta, g_omega.as_deref_mut())),
        )?;
        for _ in 0..config.m_steps {
            let mut lr = config.lr;
            let mut stepped = false;
            for _ in 0..=config.max_halvings {
                let mut cand = classifier.clone();
                for (p, g) in cand.params_mut().iter_mut().zip(&g_theta) {
                    *p -= lr * g;
                }
                let mut cand_noise = noise.as_deref().cloned();
                if let (Some(m), Some(g)) = (cand_noise.as_mut(), g_omega.as_ref()) {
                    for (p, gv) in m.params_mut().iter_mut().zip(g) {
                        *p -= lr * gv;
                    }
                }
                let q_new = q_objective(&cand, cand_noise.as_ref(), dataset, &targets, None);
                if matches!(q_new, Ok(v) if v > current) {
                    *classifier = cand;
                    if let (Some(m), Some(new)) = (noise.as_deref_mut(), cand_noise) {
                        *m = new;
                    }
                    stepped = true;
                    break;
                }
                lr *= 0.5;
            }
            if !stepped {
                break;
            }
            accepted_any = true;
            current = q_objective(
                classifier,
                noise.as_deref(),
                dataset,
                &targets,
                Some((&mut g_theta, g_omega.as_deref_mut())),
            )?;
        }
        trace.accepted.push(accepted_any);
        trace
            .log_likelihood
            .push(observed_log_likelihood(classifier, noise.as_deref(), dataset)?);
    }
    Ok(trace)
}
