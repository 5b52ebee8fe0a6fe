//! E-step targets `P(y | x, I; θᵗ)` for each annotation kind, in closed form.
//!
//! Each function takes the detached prediction on the weak view and returns
//! a distribution over the latent true class together with the set of
//! classes allowed to carry mass.

use crate::error::{Error, Result};
use crate::labels::{CandidateSet, LabelInfo};
use crate::noise::TransitionMatrix;
use crate::simplex::ProbVector;

/// Normalizers below this fall back to a documented default.
pub const MASS_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorTarget {
    pub probs: ProbVector,
    pub support: Vec<bool>,
}

impl PosteriorTarget {
    fn full(probs: Vec<f64>) -> Self {
        let support = vec![true; probs.len()];
        PosteriorTarget {
            probs: ProbVector::from_vec_unchecked(probs),
            support,
        }
    }

    pub fn is_one_hot(&self) -> bool {
        self.probs.as_slice().iter().filter(|&&v| v != 0.0).count() == 1
    }
}

fn check_set(set: &CandidateSet, classes: usize) -> Result<()> {
    if set.max_class() >= classes {
        return Err(Error::contract(format!(
            "candidate {} out of range for C = {classes}",
            set.max_class()
        )));
    }
    Ok(())
}

/// `y ↦ pred_y · weight_y`, normalized; `None` when the mass is below
/// [`MASS_FLOOR`].
fn reweight(pred: &ProbVector, weights: &[f64]) -> Option<Vec<f64>> {
    let mut out: Vec<f64> = pred.as_slice().iter().zip(weights).map(|(p, w)| p * w).collect();
    let total: f64 = out.iter().sum();
    if total < MASS_FLOOR {
        return None;
    }
    out.iter_mut().for_each(|v| *v /= total);
    Some(out)
}

/// Prediction renormalized onto the candidate set; uniform over the set if
/// the set carries no mass.
pub fn posterior_partial(pred: &ProbVector, set: &CandidateSet) -> Result<PosteriorTarget> {
    let c = pred.len();
    check_set(set, c)?;
    let mask = set.mask(c);
    let weights: Vec<f64> = mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect();
    let probs = reweight(pred, &weights).unwrap_or_else(|| {
        let u = 1.0 / set.len() as f64;
        weights.iter().map(|w| w * u).collect()
    });
    Ok(PosteriorTarget {
        probs: ProbVector::from_vec_unchecked(probs),
        support: mask,
    })
}

/// No constraint: the prediction itself.
pub fn posterior_unlabeled(pred: &ProbVector) -> PosteriorTarget {
    PosteriorTarget::full(pred.as_slice().to_vec())
}

/// `pred_y · T[y][ŷ]`, normalized; the prediction itself if that vanishes.
pub fn posterior_noisy(pred: &ProbVector, observed: usize, t: &TransitionMatrix) -> Result<PosteriorTarget> {
    if observed >= t.classes() || pred.len() != t.classes() {
        return Err(Error::contract(format!(
            "noisy label {observed} or prediction length {} incompatible with C = {}",
            pred.len(),
            t.classes()
        )));
    }
    let probs = reweight(pred, &t.column(observed)).unwrap_or_else(|| pred.as_slice().to_vec());
    Ok(PosteriorTarget::full(probs))
}

/// `pred_y · Σ_{ŷ∈s} T[y][ŷ]`, normalized over all classes (the true class
/// may lie outside `s`); the prediction itself if that vanishes.
pub fn posterior_noisy_partial(
    pred: &ProbVector,
    set: &CandidateSet,
    t: &TransitionMatrix,
) -> Result<PosteriorTarget> {
    if pred.len() != t.classes() {
        return Err(Error::Shape {
            what: "prediction",
            expected: t.classes(),
            actual: pred.len(),
        });
    }
    check_set(set, t.classes())?;
    let probs = reweight(pred, &t.set_likelihood(set)).unwrap_or_else(|| pred.as_slice().to_vec());
    Ok(PosteriorTarget::full(probs))
}

pub fn posterior_exact(class: usize, classes: usize) -> Result<PosteriorTarget> {
    if class >= classes {
        return Err(Error::contract(format!("label {class} out of range for C = {classes}")));
    }
    let mut support = vec![false; classes];
    support[class] = true;
    Ok(PosteriorTarget {
        probs: ProbVector::one_hot(classes, class),
        support,
    })
}

/// Dispatches on the annotation kind. Noisy kinds require `t`.
pub fn posterior(pred: &ProbVector, label: &LabelInfo, t: Option<&TransitionMatrix>) -> Result<PosteriorTarget> {
    let need_t = || Error::config("noisy annotation without a noise model");
    match label {
        LabelInfo::Exact(y) => posterior_exact(*y, pred.len()),
        LabelInfo::Candidates(s) => posterior_partial(pred, s),
        LabelInfo::Unlabeled => Ok(posterior_unlabeled(pred)),
        LabelInfo::Noisy(y) => posterior_noisy(pred, *y, t.ok_or_else(need_t)?),
        LabelInfo::NoisyCandidates(s) => posterior_noisy_partial(pred, s, t.ok_or_else(need_t)?),
    }
}
