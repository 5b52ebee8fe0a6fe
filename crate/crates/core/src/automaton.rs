//! Posterior targets by forward–backward over a label automaton.
//!
//! Each position `i` of a sample sequence admits a set of symbols (classes)
//! determined by its annotation, an emission distribution `e_i(y)` from the
//! classifier, and an optional per-symbol weight `w_i(y)` (the transition
//! likelihood for noisy annotations). Paths pass through one admitted symbol
//! per position; the per-position marginal of the path mass is the E-step
//! target. For the per-sample constraints handled here the trellis factorizes
//! and the marginals coincide with [`crate::posterior`], which is the point of
//! the cross-check; the recursion itself is general.
//!
//! All scores are kept in log space.

use crate::error::{Error, Result};
use crate::labels::{ImpreciseDataset, LabelInfo};
use crate::noise::TransitionMatrix;
use crate::posterior::PosteriorTarget;
use crate::simplex::{log_sum_exp, ProbVector};

/// Largest number of sequences [`brute_force_posterior`] will enumerate.
pub const ENUMERATION_LIMIT: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Position {
    pub allowed: Vec<bool>,
    pub emission: ProbVector,
    pub weights: Option<Vec<f64>>,
}

impl Position {
    fn log_score(&self, y: usize) -> f64 {
        if !self.allowed[y] {
            return f64::NEG_INFINITY;
        }
        let w = self.weights.as_ref().map_or(1.0, |w| w[y]);
        (self.emission[y] * w).ln()
    }

    fn score(&self, y: usize) -> f64 {
        if !self.allowed[y] {
            return 0.0;
        }
        self.emission[y] * self.weights.as_ref().map_or(1.0, |w| w[y])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelNfa {
    classes: usize,
    positions: Vec<Position>,
}

/// Forward and backward log scores, `[position][class]`, each row shifted
/// to unit mass. The true scores are `log_alpha[i][y] + alpha_offset[i]`
/// and `log_beta[i][y] + beta_offset[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrellisScores {
    pub log_alpha: Vec<Vec<f64>>,
    pub log_beta: Vec<Vec<f64>>,
    pub alpha_offset: Vec<f64>,
    pub beta_offset: Vec<f64>,
}

impl TrellisScores {
    fn joint(&self, i: usize) -> Vec<f64> {
        self.log_alpha[i]
            .iter()
            .zip(&self.log_beta[i])
            .map(|(a, b)| a + b)
            .collect()
    }

    /// `log Σ_y α(i,y) β(i,y)`, the total path mass seen from position `i`.
    pub fn log_total(&self, i: usize) -> f64 {
        log_sum_exp(&self.joint(i)) + self.alpha_offset[i] + self.beta_offset[i]
    }
}

fn shift_to_unit(row: &mut [f64]) -> f64 {
    let z = log_sum_exp(row);
    for v in row.iter_mut() {
        *v -= z;
    }
    z
}

impl LabelNfa {
    pub fn new(classes: usize, positions: Vec<Position>) -> Result<Self> {
        for (i, p) in positions.iter().enumerate() {
            if p.allowed.len() != classes || p.emission.len() != classes {
                return Err(Error::Shape {
                    what: "automaton position",
                    expected: classes,
                    actual: p.allowed.len().min(p.emission.len()),
                });
            }
            if !p.allowed.iter().any(|&a| a) {
                return Err(Error::contract(format!("position {i} admits no symbol")));
            }
            crate::simplex::check_simplex(p.emission.as_slice())?;
            if let Some(w) = &p.weights {
                if w.len() != classes || w.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(Error::contract(format!("position {i} has invalid weights")));
                }
            }
        }
        Ok(LabelNfa { classes, positions })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Position] {
        &self.positions
    }

    fn check_degenerate(&self) -> Result<()> {
        for (i, p) in self.positions.iter().enumerate() {
            if (0..self.classes).all(|y| p.score(y) == 0.0) {
                return Err(Error::DegeneratePosition { position: i });
            }
        }
        Ok(())
    }

    pub fn trellis(&self) -> Result<TrellisScores> {
        self.check_degenerate()?;
        let n = self.len();
        let c = self.classes;
        let local: Vec<Vec<f64>> = self
            .positions
            .iter()
            .map(|p| (0..c).map(|y| p.log_score(y)).collect())
            .collect();

        let mut log_alpha = vec![vec![f64::NEG_INFINITY; c]; n];
        let mut alpha_offset = vec![0.0; n];
        let mut carried = 0.0;
        for i in 0..n {
            // Every admitted symbol at i−1 may precede every admitted symbol
            // at i; disallowed predecessors already carry −∞.
            let incoming = if i == 0 { 0.0 } else { log_sum_exp(&log_alpha[i - 1]) };
            for y in 0..c {
                log_alpha[i][y] = incoming + local[i][y];
            }
            carried += shift_to_unit(&mut log_alpha[i]);
            alpha_offset[i] = carried;
        }

        let mut log_beta = vec![vec![f64::NEG_INFINITY; c]; n];
        let mut beta_offset = vec![0.0; n];
        let mut carried = 0.0;
        for i in (0..n).rev() {
            let outgoing = if i + 1 == n {
                0.0
            } else {
                let next: Vec<f64> = (0..c).map(|y| local[i + 1][y] + log_beta[i + 1][y]).collect();
                log_sum_exp(&next)
            };
            for (b, &ok) in log_beta[i].iter_mut().zip(&self.positions[i].allowed) {
                *b = if ok { outgoing } else { f64::NEG_INFINITY };
            }
            carried += shift_to_unit(&mut log_beta[i]);
            beta_offset[i] = carried;
        }
        Ok(TrellisScores {
            log_alpha,
            log_beta,
            alpha_offset,
            beta_offset,
        })
    }
}

fn normalize_log(joint: &[f64], allowed: &[bool]) -> PosteriorTarget {
    let total = log_sum_exp(joint);
    let probs = joint.iter().map(|v| (v - total).exp()).collect();
    PosteriorTarget {
        probs: ProbVector::from_vec_unchecked(probs),
        support: allowed.to_vec(),
    }
}

/// Per-position posteriors `α(i,y)β(i,y) / Σ_y' α(i,y')β(i,y')`.
pub fn forward_backward(nfa: &LabelNfa) -> Result<Vec<PosteriorTarget>> {
    let scores = nfa.trellis()?;
    Ok((0..nfa.len())
        .map(|i| normalize_log(&scores.joint(i), &nfa.positions[i].allowed))
        .collect())
}

/// Enumerates every label sequence and marginalizes per position.
pub fn brute_force_posterior(nfa: &LabelNfa) -> Result<Vec<PosteriorTarget>> {
    let n = nfa.len();
    let c = nfa.classes();
    let too_large = Error::TooLarge { classes: c, length: n };
    let mut count: usize = 1;
    for _ in 0..n {
        count = count.checked_mul(c).ok_or(Error::TooLarge { classes: c, length: n })?;
        if count > ENUMERATION_LIMIT {
            return Err(too_large);
        }
    }
    nfa.check_degenerate()?;

    let mut marginals = vec![vec![0.0; c]; n];
    let mut seq = vec![0usize; n];
    for _ in 0..count {
        let mass: f64 = seq
            .iter()
            .enumerate()
            .map(|(i, &y)| nfa.positions[i].score(y))
            .product();
        if mass > 0.0 {
            for (i, &y) in seq.iter().enumerate() {
                marginals[i][y] += mass;
            }
        }
        for digit in seq.iter_mut() {
            *digit += 1;
            if *digit < c {
                break;
            }
            *digit = 0;
        }
    }
    Ok(marginals
        .into_iter()
        .zip(&nfa.positions)
        .map(|(m, p)| {
            let total: f64 = m.iter().sum();
            PosteriorTarget {
                probs: ProbVector::from_vec_unchecked(m.iter().map(|v| v / total).collect()),
                support: p.allowed.clone(),
            }
        })
        .collect())
}

/// One automaton position for an annotation.
///
/// Exact labels admit one symbol, candidate sets admit their members, and
/// unlabeled or noisy annotations admit every class. Noisy positions are
/// weighted by `T[y][ŷ]`, noisy candidate sets by `Σ_{ŷ∈s} T[y][ŷ]`.
pub fn position_for(label: &LabelInfo, emission: ProbVector, t: Option<&TransitionMatrix>) -> Result<Position> {
    let c = emission.len();
    let need_t = || Error::config("noisy annotation without a noise model");
    let (allowed, weights) = match label {
        LabelInfo::Exact(y) => {
            let mut a = vec![false; c];
            *a.get_mut(*y).ok_or_else(|| Error::contract("label out of range"))? = true;
            (a, None)
        }
        LabelInfo::Candidates(s) => (s.mask(c), None),
        LabelInfo::Unlabeled => (vec![true; c], None),
        LabelInfo::Noisy(y) => (vec![true; c], Some(t.ok_or_else(need_t)?.column(*y))),
        LabelInfo::NoisyCandidates(s) => (vec![true; c], Some(t.ok_or_else(need_t)?.set_likelihood(s))),
    };
    Ok(Position {
        allowed,
        emission,
        weights,
    })
}

/// Builds the automaton for a whole dataset given per-sample emissions.
pub fn nfa_from_dataset(
    dataset: &ImpreciseDataset,
    emissions: Vec<ProbVector>,
    t: Option<&TransitionMatrix>,
) -> Result<LabelNfa> {
    if emissions.len() != dataset.len() {
        return Err(Error::Shape {
            what: "emissions",
            expected: dataset.len(),
            actual: emissions.len(),
        });
    }
    if dataset.has_noisy() && t.is_none() {
        return Err(Error::config("dataset has noisy annotations but no noise model was given"));
    }
    let positions = dataset
        .labels()
        .zip(emissions)
        .map(|(label, e)| position_for(label, e, t))
        .collect::<Result<Vec<_>>>()?;
    LabelNfa::new(dataset.classes(), positions)
}
