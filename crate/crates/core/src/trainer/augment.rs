//! Feature-space weak and strong views.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentConfig {
    /// Weak view noise, in units of each feature's standard deviation.
    pub weak_std: f64,
    /// Strong view noise, same units.
    pub strong_std: f64,
    /// Probability of zeroing each coordinate of the strong view.
    pub strong_dropout: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            weak_std: 0.05,
            strong_std: 0.3,
            strong_dropout: 0.0,
        }
    }
}

impl AugmentConfig {
    pub fn identity() -> Self {
        AugmentConfig {
            weak_std: 0.0,
            strong_std: 0.0,
            strong_dropout: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.weak_std >= 0.0 && self.weak_std <= self.strong_std && self.strong_std.is_finite()) {
            return Err(Error::config(format!(
                "augmentation needs 0 <= weak std ({}) <= strong std ({})",
                self.weak_std, self.strong_std
            )));
        }
        if !(0.0..1.0).contains(&self.strong_dropout) {
            return Err(Error::config(format!("strong dropout {} outside [0, 1)", self.strong_dropout)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum View {
    Weak,
    Strong,
}

#[derive(Debug, Clone)]
pub struct Augmenter {
    config: AugmentConfig,
    feature_std: Vec<f64>,
}

impl Augmenter {
    pub fn new(config: AugmentConfig, feature_std: Vec<f64>) -> Result<Self> {
        config.validate()?;
        Ok(Augmenter { config, feature_std })
    }

    /// Weak: `x + σ_w·std·z`. Strong: `x + σ_s·std·z`, then inverted dropout
    /// with rate ρ. Draw counts per call are fixed by the dimension.
    pub fn apply(&self, x: &[f64], view: View, rng: &mut Rng) -> Vec<f64> {
        let scale = match view {
            View::Weak => self.config.weak_std,
            View::Strong => self.config.strong_std,
        };
        let mut out: Vec<f64> = x
            .iter()
            .zip(&self.feature_std)
            .map(|(&v, &s)| {
                let z: f64 = StandardNormal.sample(rng);
                v + scale * s * z
            })
            .collect();
        if view == View::Strong {
            let rho = self.config.strong_dropout;
            let keep_scale = 1.0 / (1.0 - rho);
            for v in &mut out {
                if rng.random::<f64>() < rho {
                    *v = 0.0;
                } else {
                    *v *= keep_scale;
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn zero_strength_is_identity() {
        let x = vec![0.3, -1.7, 2.25];
        let aug = Augmenter::new(AugmentConfig::identity(), vec![1.0; 3]).unwrap();
        let mut rng = rng_from_seed(1);
        assert_eq!(aug.apply(&x, View::Weak, &mut rng), x);
        assert_eq!(aug.apply(&x, View::Strong, &mut rng), x);
    }

    #[test]
    fn strong_view_is_unbiased() {
        let x = vec![1.5, -2.0];
        let cfg = AugmentConfig::default();
        let aug = Augmenter::new(cfg, vec![1.0, 2.0]).unwrap();
        let mut rng = rng_from_seed(9);
        let n = 100_000;
        let mut sum = [0.0; 2];
        let mut sq = [0.0; 2];
        for _ in 0..n {
            let v = aug.apply(&x, View::Strong, &mut rng);
            for k in 0..2 {
                sum[k] += v[k];
                sq[k] += v[k] * v[k];
            }
        }
        for k in 0..2 {
            let mean = sum[k] / n as f64;
            let var = sq[k] / n as f64 - mean * mean;
            let se = (var / n as f64).sqrt();
            assert!((mean - x[k]).abs() < 3.0 * se, "coord {k}: {mean} vs {}", x[k]);
        }
    }

    #[test]
    fn rejects_inverted_strengths() {
        let cfg = AugmentConfig {
            weak_std: 0.5,
            strong_std: 0.1,
            strong_dropout: 0.0,
        };
        assert!(cfg.validate().is_err());
        let cfg = AugmentConfig {
            strong_dropout: 1.0,
            ..AugmentConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
