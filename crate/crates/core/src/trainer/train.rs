use rand::seq::SliceRandom;

use super::augment::{AugmentConfig, Augmenter, View};
use super::eval::{evaluate, observed_log_likelihood};
use super::loss::{e_step, loss_given_targets, BatchInput, LossParts};
use super::metrics::MetricsRecord;
use crate::error::{Error, Result};
use crate::labels::ImpreciseDataset;
use crate::model::{Architecture, Classifier};
use crate::noise::{transition_recovery_error, NoiseModel, TransitionMatrix, DEFAULT_SCALE};
use crate::optim::{sgd_step, OptimizerState, SgdConfig};
use crate::rng::{stream_rng, Stream};
use crate::simplex::ProbVector;
use crate::task;

/// Batch losses above this abort the run.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Registered task name; the dataset's annotation kinds must be ones it
    /// accepts.
    pub task: String,
    pub arch: Architecture,
    pub epochs: usize,
    pub batch_size: usize,
    pub sgd: SgdConfig,
    /// Learning rate for the noise parameters; defaults to `sgd.lr`.
    pub noise_lr: Option<f64>,
    pub entropy_weight: f64,
    pub augment: AugmentConfig,
    /// Momentum of the per-sample moving average of soft targets.
    pub ema: Option<f64>,
    pub noise_scale: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            task: "supervised".into(),
            arch: Architecture::Linear,
            epochs: 40,
            batch_size: 64,
            sgd: SgdConfig {
                lr: 0.2,
                momentum: 0.9,
                weight_decay: 5e-4,
            },
            noise_lr: Some(0.05),
            entropy_weight: 0.1,
            augment: AugmentConfig::default(),
            ema: None,
            noise_scale: DEFAULT_SCALE,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        task::builtin().get(&self.task)?;
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be positive"));
        }
        if !(self.entropy_weight >= 0.0 && self.entropy_weight.is_finite()) {
            return Err(Error::config("entropy weight must be nonnegative"));
        }
        if !(self.sgd.lr > 0.0 && self.sgd.lr.is_finite()) {
            return Err(Error::config("learning rate must be positive"));
        }
        if let Some(m) = self.ema {
            if !(0.0..1.0).contains(&m) {
                return Err(Error::config(format!("EMA momentum {m} outside [0, 1)")));
            }
        }
        self.augment.validate()
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub classifier: Classifier,
    pub noise: Option<NoiseModel>,
    pub metrics: Vec<MetricsRecord>,
}

/// Online EM: every batch takes detached targets at the current parameters
/// and one optimizer step on the resulting loss.
pub fn train(
    dataset: &ImpreciseDataset,
    config: &TrainConfig,
    test: Option<&ImpreciseDataset>,
) -> Result<TrainOutcome> {
    config.validate()?;
    task::builtin().get(&config.task)?.check_compatible(dataset)?;
    if dataset.is_empty() {
        return Err(Error::contract("training set is empty"));
    }
    let classes = dataset.classes();
    let mut classifier = Classifier::init(
        config.arch,
        dataset.dim(),
        classes,
        &mut stream_rng(config.seed, Stream::Init),
    )?;
    let mut noise = if dataset.has_noisy() {
        Some(NoiseModel::new(classes, config.noise_scale)?)
    } else {
        None
    };
    let mut metrics = Vec::with_capacity(config.epochs);
    if config.epochs == 0 {
        return Ok(TrainOutcome {
            classifier,
            noise,
            metrics,
        });
    }

    let true_t = match (&noise, dataset.corruption().and_then(|c| c.true_transition(classes))) {
        (Some(_), Some(rows)) => Some(TransitionMatrix::from_rows(&rows)?),
        _ => None,
    };
    let augmenter = Augmenter::new(config.augment, dataset.feature_std())?;
    let n = dataset.len();
    let batches_per_epoch = n.div_ceil(config.batch_size);
    let total_steps = config.epochs * batches_per_epoch;
    let mut opt_theta = OptimizerState::new(config.sgd, classifier.params().len(), total_steps);
    let mut opt_omega = noise.as_ref().map(|m| {
        let cfg = SgdConfig {
            lr: config.noise_lr.unwrap_or(config.sgd.lr),
            momentum: config.sgd.momentum,
            weight_decay: 0.0,
        };
        OptimizerState::new(cfg, m.params().len(), total_steps)
    });
    let mut shuffle_rng = stream_rng(config.seed, Stream::Shuffle);
    let mut aug_rng = stream_rng(config.seed, Stream::Augment);
    let mut ema_targets: Vec<Option<Vec<f64>>> = vec![None; if config.ema.is_some() { n } else { 0 }];
    let mut order: Vec<usize> = (0..n).collect();

    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut sums = LossParts::default();
        for chunk in order.chunks(config.batch_size) {
            let mut input = BatchInput {
                labels: Vec::with_capacity(chunk.len()),
                weak: Vec::with_capacity(chunk.len()),
                strong: Vec::with_capacity(chunk.len()),
            };
            for &i in chunk {
                let e = &dataset.entries()[i];
                input.labels.push(&e.label);
                input.weak.push(augmenter.apply(&e.sample.features, View::Weak, &mut aug_rng));
                input.strong.push(augmenter.apply(&e.sample.features, View::Strong, &mut aug_rng));
            }
            let mut estep = e_step(&classifier, noise.as_ref(), &input)?;
            if let Some(m) = config.ema {
                for (&i, target) in chunk.iter().zip(estep.targets.iter_mut()) {
                    let Some(t) = target else { continue };
                    let blended: Vec<f64> = match &ema_targets[i] {
                        Some(prev) => prev
                            .iter()
                            .zip(t.as_slice())
                            .map(|(a, b)| m * a + (1.0 - m) * b)
                            .collect(),
                        None => t.as_slice().to_vec(),
                    };
                    ema_targets[i] = Some(blended.clone());
                    *t = ProbVector::from_vec_unchecked(blended);
                }
            }
            let loss = loss_given_targets(&classifier, noise.as_ref(), &input, &estep, config.entropy_weight)?;
            let total = loss.total();
            if !total.is_finite() || total > DIVERGENCE_LIMIT {
                return Err(Error::Diverged { epoch, loss: total });
            }
            let w = chunk.len() as f64;
            sums.consistency += loss.parts.consistency * w;
            sums.supervised += loss.parts.supervised * w;
            sums.entropy += loss.parts.entropy * w;

            sgd_step(classifier.params_mut(), &mut opt_theta, &loss.grad_theta)?;
            if let (Some(m), Some(opt), Some(g)) = (noise.as_mut(), opt_omega.as_mut(), loss.grad_omega.as_ref()) {
                sgd_step(m.params_mut(), opt, g)?;
            }
            let finite = |p: &[f64]| p.iter().all(|v| v.is_finite());
            if !finite(classifier.params()) || !noise.as_ref().is_none_or(|m| finite(m.params())) {
                return Err(Error::Diverged { epoch, loss: total });
            }
        }

        let nf = n as f64;
        let parts = LossParts {
            consistency: sums.consistency / nf,
            supervised: sums.supervised / nf,
            entropy: sums.entropy / nf,
        };
        let transition_tv = match (&noise, &true_t) {
            (Some(m), Some(t)) => Some(transition_recovery_error(&m.transition_matrix(), t)?),
            _ => None,
        };
        metrics.push(MetricsRecord {
            epoch,
            loss_total: parts.total(),
            loss_consistency: parts.consistency,
            loss_supervised: parts.supervised,
            loss_entropy: parts.entropy,
            test_acc: test.map(|t| evaluate(&classifier, t)).transpose()?,
            obs_loglik: observed_log_likelihood(&classifier, noise.as_ref(), dataset)? / nf,
            transition_tv,
        });
    }
    Ok(TrainOutcome {
        classifier,
        noise,
        metrics,
    })
}
