//! Small softmax classifiers with hand-derived gradients.
//!
//! Parameters live in one flat `Vec<f64>` so that the optimizer and the
//! finite-difference checker can treat every architecture uniformly. The
//! layout is row-major per layer:
//!
//! * linear: `W (C×D)`, `b (C)`
//! * mlp:    `W1 (H×D)`, `b1 (H)`, `W2 (C×H)`, `b2 (C)` with a ReLU between

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::simplex::{ProbVector, LOG_EPS};

pub const DEFAULT_HIDDEN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Architecture {
    Linear,
    Mlp { hidden: usize },
}

impl Architecture {
    pub fn name(&self) -> &'static str {
        match self {
            Architecture::Linear => "linear",
            Architecture::Mlp { .. } => "mlp",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    arch: Architecture,
    input_dim: usize,
    classes: usize,
    params: Vec<f64>,
}

/// Intermediate activations of one forward pass, needed by `backward`.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub logits: Vec<f64>,
    hidden: Option<Vec<f64>>,
}

impl ForwardCache {
    pub fn probs(&self) -> ProbVector {
        ProbVector::from_logits(&self.logits)
    }
}

impl Classifier {
    /// All-zero parameters: every input maps to the uniform distribution.
    pub fn zeros(arch: Architecture, input_dim: usize, classes: usize) -> Result<Self> {
        if input_dim == 0 || classes < 2 {
            return Err(Error::config(format!(
                "classifier needs D >= 1 and C >= 2 (got D={input_dim}, C={classes})"
            )));
        }
        if let Architecture::Mlp { hidden: 0 } = arch {
            return Err(Error::config("mlp hidden width must be positive"));
        }
        let count = param_count(arch, input_dim, classes);
        Ok(Classifier {
            arch,
            input_dim,
            classes,
            params: vec![0.0; count],
        })
    }

    /// Hidden layers are drawn uniformly in ±1/√fan_in; the output head
    /// starts at zero, so an untrained model predicts the uniform
    /// distribution.
    pub fn init(arch: Architecture, input_dim: usize, classes: usize, rng: &mut Rng) -> Result<Self> {
        let mut model = Self::zeros(arch, input_dim, classes)?;
        if let Architecture::Mlp { hidden } = arch {
            let bound = 1.0 / (input_dim as f64).sqrt();
            let first_layer = hidden * input_dim + hidden;
            for p in &mut model.params[..first_layer] {
                *p = rng.random_range(-bound..=bound);
            }
        }
        Ok(model)
    }

    /// Initializes every layer (head included) uniformly in ±1/√fan_in.
    /// Used for randomized gradient checks where a zero head would hide
    /// first-layer gradients.
    pub fn init_random_head(
        arch: Architecture,
        input_dim: usize,
        classes: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        let mut model = Self::init(arch, input_dim, classes, rng)?;
        let (head_start, fan_in) = match arch {
            Architecture::Linear => (0, input_dim),
            Architecture::Mlp { hidden } => (hidden * input_dim + hidden, hidden),
        };
        let bound = 1.0 / (fan_in as f64).sqrt();
        for p in &mut model.params[head_start..] {
            *p = rng.random_range(-bound..=bound);
        }
        Ok(model)
    }

    pub fn architecture(&self) -> Architecture {
        self.arch
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::Shape {
                what: "parameter vector",
                expected: self.params.len(),
                actual: params.len(),
            });
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::Shape {
                what: "feature dimension",
                expected: self.input_dim,
                actual: x.len(),
            });
        }
        Ok(())
    }

    pub fn forward_cached(&self, x: &[f64]) -> Result<ForwardCache> {
        self.check_input(x)?;
        let d = self.input_dim;
        let c = self.classes;
        Ok(match self.arch {
            Architecture::Linear => {
                let (w, b) = self.params.split_at(c * d);
                ForwardCache {
                    logits: affine(w, b, x),
                    hidden: None,
                }
            }
            Architecture::Mlp { hidden } => {
                let (w1, rest) = self.params.split_at(hidden * d);
                let (b1, rest) = rest.split_at(hidden);
                let (w2, b2) = rest.split_at(c * hidden);
                let mut h = affine(w1, b1, x);
                for v in &mut h {
                    *v = v.max(0.0);
                }
                ForwardCache {
                    logits: affine(w2, b2, &h),
                    hidden: Some(h),
                }
            }
        })
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_cached(x)?.logits)
    }

    pub fn predict(&self, x: &[f64]) -> Result<ProbVector> {
        Ok(self.forward_cached(x)?.probs())
    }

    /// Batch forward pass producing one `ProbVector` per row.
    pub fn forward<X: AsRef<[f64]>>(&self, batch: &[X]) -> Result<Vec<ProbVector>> {
        batch.iter().map(|x| self.predict(x.as_ref())).collect()
    }

    /// Accumulates `∂L/∂θ` into `grad` given `∂L/∂logits` for input `x`.
    pub fn backward(&self, x: &[f64], cache: &ForwardCache, dlogits: &[f64], grad: &mut [f64]) {
        let d = self.input_dim;
        let c = self.classes;
        debug_assert_eq!(grad.len(), self.params.len());
        debug_assert_eq!(dlogits.len(), c);
        match self.arch {
            Architecture::Linear => {
                let (gw, gb) = grad.split_at_mut(c * d);
                outer_accumulate(gw, gb, dlogits, x);
            }
            Architecture::Mlp { hidden } => {
                let h = cache.hidden.as_ref().expect("mlp cache carries hidden activations");
                let w2 = &self.params[hidden * d + hidden..hidden * d + hidden + c * hidden];
                let (g1, g2) = grad.split_at_mut(hidden * d + hidden);
                let (gw2, gb2) = g2.split_at_mut(c * hidden);
                outer_accumulate(gw2, gb2, dlogits, h);

                let mut dh = vec![0.0; hidden];
                for (k, &g) in dlogits.iter().enumerate() {
                    if g == 0.0 {
                        continue;
                    }
                    let row = &w2[k * hidden..(k + 1) * hidden];
                    for (acc, &w) in dh.iter_mut().zip(row) {
                        *acc += g * w;
                    }
                }
                for (v, &a) in dh.iter_mut().zip(h) {
                    if a <= 0.0 {
                        *v = 0.0;
                    }
                }
                let (gw1, gb1) = g1.split_at_mut(hidden * d);
                outer_accumulate(gw1, gb1, &dh, x);
            }
        }
    }
}

pub fn param_count(arch: Architecture, input_dim: usize, classes: usize) -> usize {
    match arch {
        Architecture::Linear => classes * input_dim + classes,
        Architecture::Mlp { hidden } => hidden * input_dim + hidden + classes * hidden + classes,
    }
}

fn affine(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    b.iter()
        .zip(w.chunks_exact(x.len()))
        .map(|(&bias, row)| bias + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
        .collect()
}

fn outer_accumulate(gw: &mut [f64], gb: &mut [f64], dout: &[f64], x: &[f64]) {
    for (k, &g) in dout.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        gb[k] += g;
        for (acc, &xi) in gw[k * x.len()..(k + 1) * x.len()].iter_mut().zip(x) {
            *acc += g * xi;
        }
    }
}

/// `−Σ_k target_k · log(pred_k + ε)`. The target is a constant.
pub fn soft_cross_entropy(pred: &ProbVector, target: &ProbVector) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::Shape {
            what: "cross-entropy target",
            expected: pred.len(),
            actual: target.len(),
        });
    }
    crate::simplex::check_simplex(pred.as_slice())?;
    crate::simplex::check_simplex(target.as_slice())?;
    Ok(cross_entropy_unchecked(pred.as_slice(), target.as_slice()))
}

pub(crate) fn cross_entropy_unchecked(pred: &[f64], target: &[f64]) -> f64 {
    -pred
        .iter()
        .zip(target)
        .filter(|(_, &t)| t != 0.0)
        .map(|(&p, &t)| t * (p + LOG_EPS).ln())
        .sum::<f64>()
}

/// Gradient of [`soft_cross_entropy`] with respect to the logits behind `pred`.
pub fn soft_cross_entropy_grad(pred: &[f64], target: &[f64]) -> Vec<f64> {
    pred.iter().zip(target).map(|(p, t)| p - t).collect()
}

/// Negative entropy of the batch-mean prediction, `Σ_k p̄_k log(p̄_k + ε)`.
pub fn entropy_balance_loss(batch: &[ProbVector]) -> Result<f64> {
    let mean = batch_mean(batch)?;
    Ok(mean.iter().map(|&p| p * (p + LOG_EPS).ln()).sum())
}

/// Gradient of [`entropy_balance_loss`] with respect to each row's logits.
pub fn entropy_balance_grad(batch: &[ProbVector]) -> Result<Vec<Vec<f64>>> {
    let mean = batch_mean(batch)?;
    let g: Vec<f64> = mean
        .iter()
        .map(|&p| (p + LOG_EPS).ln() + p / (p + LOG_EPS))
        .collect();
    let scale = 1.0 / batch.len() as f64;
    Ok(batch
        .iter()
        .map(|row| {
            let p = row.as_slice();
            let centered: f64 = p.iter().zip(&g).map(|(a, b)| a * b).sum();
            p.iter()
                .zip(&g)
                .map(|(&pj, &gj)| scale * pj * (gj - centered))
                .collect()
        })
        .collect())
}

fn batch_mean(batch: &[ProbVector]) -> Result<Vec<f64>> {
    let first = batch
        .first()
        .ok_or_else(|| Error::contract("entropy balance needs a nonempty batch"))?;
    let mut mean = vec![0.0; first.len()];
    for row in batch {
        if row.len() != mean.len() {
            return Err(Error::Shape {
                what: "batch row",
                expected: mean.len(),
                actual: row.len(),
            });
        }
        for (m, v) in mean.iter_mut().zip(row.as_slice()) {
            *m += v;
        }
    }
    let n = batch.len() as f64;
    for m in &mut mean {
        *m /= n;
    }
    Ok(mean)
}
