//! Per-batch objective: E-step targets from the weak view, then the M-step
//! loss and its gradients.
//!
//! Per sample, by annotation:
//!
//! | annotation          | consistency (strong view)              | supervised (weak view)            |
//! |---------------------|----------------------------------------|-----------------------------------|
//! | exact / `{y}`       | none                                   | `−log p(y)`                       |
//! | candidates          | `CE(p_s, post_partial)`                | none                              |
//! | unlabeled           | `CE(p_s, p_w)`                         | none                              |
//! | noisy `ŷ`           | `CE(p_s ⊙ T[·][ŷ], post_noisy)`        | `−log Σ_y p_w(y) T[y][ŷ]`         |
//! | noisy candidates    | `CE(p_s ⊙ r, post_noisy_partial)`      | `−log Σ_y p_w(y) r_y`             |
//!
//! where `r_y = Σ_{ŷ∈s} T[y][ŷ]` and `⊙` means reweight-and-normalize. The
//! batch loss averages annotated and unlabeled samples separately and adds
//! the two means, plus `λ_ent` times the entropy-balance term on the weak
//! predictions. A batch with a single group reduces to the plain mean.
//! Targets, and the transition matrix inside the consistency branch, are
//! computed once from the current parameters and held fixed.

use crate::error::{Error, Result};
use crate::labels::{CandidateSet, LabelInfo};
use crate::model::{cross_entropy_unchecked, entropy_balance_grad, entropy_balance_loss, Classifier, ForwardCache};
use crate::noise::{set_marginal_gradients, NoiseModel, TransitionMatrix};
use crate::posterior::{posterior, MASS_FLOOR};
use crate::simplex::{ProbVector, LOG_EPS};

/// One batch with its augmentation draws already made.
#[derive(Debug, Clone)]
pub struct BatchInput<'a> {
    pub labels: Vec<&'a LabelInfo>,
    pub weak: Vec<Vec<f64>>,
    pub strong: Vec<Vec<f64>>,
}

impl BatchInput<'_> {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Detached E-step output for a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct EStep {
    /// Soft target for every sample with a consistency term, `None` for
    /// samples whose class is determined.
    pub targets: Vec<Option<ProbVector>>,
    /// Transition matrix at the current noise parameters.
    pub transition: Option<TransitionMatrix>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossParts {
    pub consistency: f64,
    pub supervised: f64,
    /// Already multiplied by the entropy weight.
    pub entropy: f64,
}

impl LossParts {
    pub fn total(&self) -> f64 {
        self.consistency + self.supervised + self.entropy
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchLoss {
    pub parts: LossParts,
    pub grad_theta: Vec<f64>,
    pub grad_omega: Option<Vec<f64>>,
}

impl BatchLoss {
    pub fn total(&self) -> f64 {
        self.parts.total()
    }
}

fn needs_noise(labels: &[&LabelInfo], noise: Option<&NoiseModel>) -> Result<()> {
    if noise.is_none() && labels.iter().any(|l| l.kind().is_noisy()) {
        return Err(Error::config("batch has noisy annotations but no noise model"));
    }
    Ok(())
}

fn check_batch(input: &BatchInput<'_>) -> Result<()> {
    if input.is_empty() {
        return Err(Error::contract("empty batch"));
    }
    if input.weak.len() != input.len() || input.strong.len() != input.len() {
        return Err(Error::Shape {
            what: "augmented batch",
            expected: input.len(),
            actual: input.weak.len().min(input.strong.len()),
        });
    }
    Ok(())
}

/// Computes detached targets from the weak view at the current parameters.
pub fn e_step(classifier: &Classifier, noise: Option<&NoiseModel>, input: &BatchInput<'_>) -> Result<EStep> {
    check_batch(input)?;
    needs_noise(&input.labels, noise)?;
    let transition = noise.map(NoiseModel::transition_matrix);
    let targets = input
        .labels
        .iter()
        .zip(&input.weak)
        .map(|(label, x)| {
            if label.determined_class().is_some() {
                return Ok(None);
            }
            let pred = classifier.predict(x)?;
            Ok(Some(posterior(&pred, label, transition.as_ref())?.probs))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EStep { targets, transition })
}

/// Reweights `pred` by `w` and renormalizes, falling back to `pred`.
fn joined(pred: &[f64], w: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = pred.iter().zip(w).map(|(p, w)| p * w).collect();
    let total: f64 = out.iter().sum();
    if total < MASS_FLOOR {
        return pred.to_vec();
    }
    out.iter_mut().for_each(|v| *v /= total);
    out
}

/// Per-sample weight: one over the size of the sample's group (annotated or
/// unlabeled) within the batch.
pub fn group_weights(labels: &[&LabelInfo]) -> Vec<f64> {
    let unlabeled = labels.iter().filter(|l| matches!(l, LabelInfo::Unlabeled)).count();
    let annotated = labels.len() - unlabeled;
    labels
        .iter()
        .map(|l| match l {
            LabelInfo::Unlabeled => 1.0 / unlabeled as f64,
            _ => 1.0 / annotated as f64,
        })
        .collect()
}

/// Loss and gradients with the E-step output held fixed.
pub fn loss_given_targets(
    classifier: &Classifier,
    noise: Option<&NoiseModel>,
    input: &BatchInput<'_>,
    estep: &EStep,
    entropy_weight: f64,
) -> Result<BatchLoss> {
    check_batch(input)?;
    needs_noise(&input.labels, noise)?;
    if estep.targets.len() != input.len() {
        return Err(Error::Shape {
            what: "E-step targets",
            expected: input.len(),
            actual: estep.targets.len(),
        });
    }
    let c = classifier.classes();
    let n = input.len();
    let weights = group_weights(&input.labels);

    let weak: Vec<ForwardCache> = input
        .weak
        .iter()
        .map(|x| classifier.forward_cached(x))
        .collect::<Result<_>>()?;
    let weak_probs: Vec<ProbVector> = weak.iter().map(ForwardCache::probs).collect();

    let mut d_weak = vec![vec![0.0; c]; n];
    let mut d_strong: Vec<Option<(ForwardCache, Vec<f64>)>> = vec![None; n];
    let mut grad_omega = noise.map(|m| vec![0.0; m.params().len()]);
    let mut consistency = 0.0;
    let mut supervised = 0.0;

    for i in 0..n {
        let label = input.labels[i];
        let pw = &weak_probs[i];
        let wi = weights[i];

        if let Some(y) = label.determined_class() {
            let term = -(pw[y] + LOG_EPS).ln();
            if !term.is_finite() {
                return Err(Error::Numeric {
                    context: format!("supervised term of sample {i}"),
                });
            }
            supervised += wi * term;
            for (k, d) in d_weak[i].iter_mut().enumerate() {
                *d = pw[k] - if k == y { 1.0 } else { 0.0 };
            }
            continue;
        }

        let target = estep.targets[i]
            .as_ref()
            .ok_or_else(|| Error::contract(format!("missing E-step target for sample {i}")))?;
        let strong = classifier.forward_cached(&input.strong[i])?;
        let ps = strong.probs();

        // Observation weights entering the strong branch, and the set whose
        // noisy marginal forms the supervised term.
        let (weights, observed_set): (Option<Vec<f64>>, Option<CandidateSet>) = match label {
            LabelInfo::Candidates(_) | LabelInfo::Unlabeled => (None, None),
            LabelInfo::Noisy(y) => {
                let t = estep.transition.as_ref().expect("checked above");
                (Some(t.column(*y)), Some(CandidateSet::singleton(*y)))
            }
            LabelInfo::NoisyCandidates(s) => {
                let t = estep.transition.as_ref().expect("checked above");
                (Some(t.set_likelihood(s)), Some(s.clone()))
            }
            LabelInfo::Exact(_) => unreachable!("determined above"),
        };

        let student = match &weights {
            Some(w) => joined(ps.as_slice(), w),
            None => ps.as_slice().to_vec(),
        };
        let term = cross_entropy_unchecked(&student, target.as_slice());
        if !term.is_finite() {
            return Err(Error::Numeric {
                context: format!("consistency term of sample {i}"),
            });
        }
        consistency += wi * term;
        let ds: Vec<f64> = student.iter().zip(target.as_slice()).map(|(q, t)| q - t).collect();
        d_strong[i] = Some((strong, ds));

        if let Some(set) = observed_set {
            let model = noise.expect("checked above");
            let g = set_marginal_gradients(pw, &set, model);
            if !g.loss.is_finite() {
                return Err(Error::Numeric {
                    context: format!("noisy supervised term of sample {i}"),
                });
            }
            supervised += wi * g.loss;
            for (d, v) in d_weak[i].iter_mut().zip(&g.d_logits) {
                *d += v;
            }
            for (acc, v) in grad_omega.as_mut().expect("noise model present").iter_mut().zip(&g.d_omega) {
                *acc += v * wi;
            }
        }
    }

    let mut entropy = 0.0;
    let mut d_entropy = None;
    if entropy_weight != 0.0 {
        entropy = entropy_weight * entropy_balance_loss(&weak_probs)?;
        d_entropy = Some(entropy_balance_grad(&weak_probs)?);
    }

    let mut grad_theta = vec![0.0; classifier.params().len()];
    for i in 0..n {
        let mut dw: Vec<f64> = d_weak[i].iter().map(|v| v * weights[i]).collect();
        if let Some(de) = &d_entropy {
            for (a, b) in dw.iter_mut().zip(&de[i]) {
                *a += entropy_weight * b;
            }
        }
        classifier.backward(&input.weak[i], &weak[i], &dw, &mut grad_theta);
        if let Some((cache, ds)) = &d_strong[i] {
            let ds: Vec<f64> = ds.iter().map(|v| v * weights[i]).collect();
            classifier.backward(&input.strong[i], cache, &ds, &mut grad_theta);
        }
    }

    Ok(BatchLoss {
        parts: LossParts {
            consistency,
            supervised,
            entropy,
        },
        grad_theta,
        grad_omega,
    })
}

/// E-step followed by the loss at the same parameters.
pub fn batch_loss(
    classifier: &Classifier,
    noise: Option<&NoiseModel>,
    input: &BatchInput<'_>,
    entropy_weight: f64,
) -> Result<(BatchLoss, EStep)> {
    let estep = e_step(classifier, noise, input)?;
    let loss = loss_given_targets(classifier, noise, input, &estep, entropy_weight)?;
    Ok((loss, estep))
}
