use crate::error::{Error, Result};
use crate::labels::{ImpreciseDataset, LabelInfo};
use crate::model::Classifier;
use crate::noise::NoiseModel;
use crate::simplex::{argmax, log_softmax, log_sum_exp};

/// Fraction of samples whose argmax prediction (ties toward the smallest
/// class index) equals the true label.
pub fn evaluate(classifier: &Classifier, test: &ImpreciseDataset) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::contract("evaluation needs a nonempty test set"));
    }
    let mut correct = 0usize;
    for e in test.entries() {
        if argmax(&classifier.logits(&e.sample.features)?) == e.sample.true_label {
            correct += 1;
        }
    }
    Ok(correct as f64 / test.len() as f64)
}

/// `log P(I_i | x_i)` for one annotation, from log-probabilities over the
/// true class.
pub(crate) fn observed_term(log_p: &[f64], label: &LabelInfo, log_t: Option<&[Vec<f64>]>) -> Result<f64> {
    let need_t = || Error::config("noisy annotation without a noise model");
    Ok(match label {
        LabelInfo::Exact(y) => log_p[*y],
        LabelInfo::Candidates(s) => log_sum_exp(&s.iter().map(|k| log_p[k]).collect::<Vec<_>>()),
        LabelInfo::Unlabeled => 0.0,
        LabelInfo::Noisy(o) => {
            let log_t = log_t.ok_or_else(need_t)?;
            log_sum_exp(&log_p.iter().enumerate().map(|(y, lp)| lp + log_t[y][*o]).collect::<Vec<_>>())
        }
        LabelInfo::NoisyCandidates(s) => {
            let log_t = log_t.ok_or_else(need_t)?;
            let terms: Vec<f64> = log_p
                .iter()
                .enumerate()
                .flat_map(|(y, lp)| s.iter().map(move |k| lp + log_t[y][k]))
                .collect();
            log_sum_exp(&terms)
        }
    })
}

pub(crate) fn log_transition(noise: Option<&NoiseModel>) -> Option<Vec<Vec<f64>>> {
    noise.map(|m| {
        m.transition_matrix()
            .rows()
            .into_iter()
            .map(|row| row.into_iter().map(f64::ln).collect())
            .collect()
    })
}

/// Total log-likelihood of the observed annotations on un-augmented
/// features: the quantity generalized EM never decreases.
pub fn observed_log_likelihood(
    classifier: &Classifier,
    noise: Option<&NoiseModel>,
    dataset: &ImpreciseDataset,
) -> Result<f64> {
    let log_t = log_transition(noise);
    let mut total = 0.0;
    for e in dataset.entries() {
        let log_p = log_softmax(&classifier.logits(&e.sample.features)?);
        total += observed_term(&log_p, &e.label, log_t.as_deref())?;
    }
    Ok(total)
}
