//! Instance-independent class-transition model `T(ŷ | y; ω)`.
//!
//! `T[y][·] = softmax(σ·e_y + ω[y][·])`: exactly `C²` free parameters, with
//! the scale `σ` setting how strongly the initial matrix favors the
//! diagonal.

use crate::error::{Error, Result};
use crate::labels::CandidateSet;
use crate::simplex::{softmax, ProbVector, LOG_EPS};

/// Noise scale used when none is configured.
pub const DEFAULT_SCALE: f64 = 1.0;

/// Row-stochastic `C×C` matrix indexed `[true class][observed class]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    classes: usize,
    data: Vec<f64>,
}

impl TransitionMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let classes = rows.len();
        let mut data = Vec::with_capacity(classes * classes);
        for (y, row) in rows.iter().enumerate() {
            if row.len() != classes {
                return Err(Error::Shape {
                    what: "transition row",
                    expected: classes,
                    actual: row.len(),
                });
            }
            crate::simplex::check_simplex(row)
                .map_err(|e| Error::contract(format!("transition row {y}: {e}")))?;
            data.extend_from_slice(row);
        }
        Ok(TransitionMatrix { classes, data })
    }

    pub fn identity(classes: usize) -> Self {
        let mut data = vec![0.0; classes * classes];
        for y in 0..classes {
            data[y * classes + y] = 1.0;
        }
        TransitionMatrix { classes, data }
    }

    pub fn uniform(classes: usize) -> Self {
        TransitionMatrix {
            classes,
            data: vec![1.0 / classes as f64; classes * classes],
        }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, true_class: usize, observed: usize) -> f64 {
        self.data[true_class * self.classes + observed]
    }

    pub fn row(&self, true_class: usize) -> &[f64] {
        &self.data[true_class * self.classes..(true_class + 1) * self.classes]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.classes).map(<[f64]>::to_vec).collect()
    }

    /// `r_y = Σ_{ŷ∈s} T[y][ŷ]`, the chance that class `y` is reported
    /// somewhere inside `s`.
    pub fn set_likelihood(&self, set: &CandidateSet) -> Vec<f64> {
        (0..self.classes)
            .map(|y| set.iter().map(|k| self.get(y, k)).sum())
            .collect()
    }

    /// Column `ŷ`: the likelihood of observing `ŷ` under each true class.
    pub fn column(&self, observed: usize) -> Vec<f64> {
        (0..self.classes).map(|y| self.get(y, observed)).collect()
    }

    /// JSON dump `{"C": C, "scale": σ, "T": [[...], ...]}` with 17
    /// significant digits.
    pub fn to_json(&self, scale: f64) -> String {
        let rows: Vec<String> = self
            .data
            .chunks(self.classes)
            .map(|row| {
                let cells: Vec<String> = row.iter().map(|&v| crate::labels::format_f64(v)).collect();
                format!("[{}]", cells.join(", "))
            })
            .collect();
        format!(
            "{{\"C\": {}, \"scale\": {}, \"T\": [\n  {}\n]}}\n",
            self.classes,
            crate::labels::format_f64(scale),
            rows.join(",\n  ")
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    classes: usize,
    scale: f64,
    omega: Vec<f64>,
}

impl NoiseModel {
    /// `ω = 0`: the prior matrix with diagonal `e^σ / (e^σ + C − 1)`.
    pub fn new(classes: usize, scale: f64) -> Result<Self> {
        if classes < 2 {
            return Err(Error::config("noise model needs at least 2 classes"));
        }
        if !(scale.is_finite() && scale >= 0.0) {
            return Err(Error::config(format!("noise scale {scale} must be finite and nonnegative")));
        }
        Ok(NoiseModel {
            classes,
            scale,
            omega: vec![0.0; classes * classes],
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn params(&self) -> &[f64] {
        &self.omega
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.omega
    }

    pub fn set_params(&mut self, omega: &[f64]) -> Result<()> {
        if omega.len() != self.omega.len() {
            return Err(Error::Shape {
                what: "noise parameters",
                expected: self.omega.len(),
                actual: omega.len(),
            });
        }
        self.omega.copy_from_slice(omega);
        Ok(())
    }

    pub fn transition_matrix(&self) -> TransitionMatrix {
        let c = self.classes;
        let mut data = Vec::with_capacity(c * c);
        for y in 0..c {
            let mut logits = self.omega[y * c..(y + 1) * c].to_vec();
            logits[y] += self.scale;
            data.extend(softmax(&logits));
        }
        TransitionMatrix { classes: c, data }
    }
}

/// `p(ŷ | x) = Σ_y p(y | x) T[y][ŷ]`.
pub fn noisy_marginal(pred: &ProbVector, t: &TransitionMatrix) -> ProbVector {
    let c = t.classes();
    let mut out = vec![0.0; c];
    for (y, &p) in pred.as_slice().iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for (o, &tv) in out.iter_mut().zip(t.row(y)) {
            *o += p * tv;
        }
    }
    ProbVector::from_vec_unchecked(out)
}

/// Loss and gradients of a supervised term on the noisy marginal.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseGradients {
    pub loss: f64,
    /// `∂loss/∂logits` of the classifier producing `pred`.
    pub d_logits: Vec<f64>,
    /// `∂loss/∂ω`, row-major `C×C`.
    pub d_omega: Vec<f64>,
}

/// `−log(Σ_{ŷ∈s} p(ŷ | x) + ε)` and its gradients. A singleton `s = {ŷ}` is
/// the plain noisy-label likelihood.
pub fn set_marginal_gradients(pred: &ProbVector, set: &CandidateSet, model: &NoiseModel) -> NoiseGradients {
    let c = model.classes();
    let t = model.transition_matrix();
    let p = pred.as_slice();
    let r = t.set_likelihood(set);
    let m: f64 = p.iter().zip(&r).map(|(a, b)| a * b).sum();
    let inv = 1.0 / (m + LOG_EPS);
    let d_logits = p.iter().zip(&r).map(|(&pj, &rj)| -pj * (rj - m) * inv).collect();
    let mut d_omega = vec![0.0; c * c];
    let in_set = set.mask(c);
    for y in 0..c {
        if p[y] == 0.0 {
            continue;
        }
        let row = t.row(y);
        let coef = -p[y] * inv;
        for j in 0..c {
            let indicator = if in_set[j] { row[j] } else { 0.0 };
            d_omega[y * c + j] = coef * (indicator - row[j] * r[y]);
        }
    }
    NoiseGradients {
        loss: -(m + LOG_EPS).ln(),
        d_logits,
        d_omega,
    }
}

/// Gradients of `−log p(ŷ | x; θ, ω)` with respect to ω and to the logits
/// behind `pred`.
pub fn noise_gradients(pred: &ProbVector, observed: usize, model: &NoiseModel) -> Result<NoiseGradients> {
    if observed >= model.classes() {
        return Err(Error::contract(format!(
            "noisy label {observed} out of range for C = {}",
            model.classes()
        )));
    }
    if pred.len() != model.classes() {
        return Err(Error::Shape {
            what: "prediction",
            expected: model.classes(),
            actual: pred.len(),
        });
    }
    Ok(set_marginal_gradients(pred, &CandidateSet::singleton(observed), model))
}

/// Largest total-variation distance between corresponding rows.
pub fn transition_recovery_error(estimate: &TransitionMatrix, truth: &TransitionMatrix) -> Result<f64> {
    if estimate.classes() != truth.classes() {
        return Err(Error::Shape {
            what: "transition matrix",
            expected: truth.classes(),
            actual: estimate.classes(),
        });
    }
    Ok((0..truth.classes())
        .map(|y| {
            0.5 * estimate
                .row(y)
                .iter()
                .zip(truth.row(y))
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
        })
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::max_relative_error;
    use crate::rng::rng_from_seed;
    use crate::simplex::softmax;
    use rand::Rng as _;

    fn pv(v: &[f64]) -> ProbVector {
        ProbVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn transition_extremes() {
        let t = NoiseModel::new(4, 0.0).unwrap().transition_matrix();
        assert!(t.rows().iter().flatten().all(|&v| (v - 0.25).abs() < 1e-15));
        let t = NoiseModel::new(4, 30.0).unwrap().transition_matrix();
        for y in 0..4 {
            assert!(t.get(y, y) > 1.0 - 1e-12);
        }
        let t = NoiseModel::new(10, 1.0).unwrap().transition_matrix();
        let e = 1f64.exp();
        assert!((t.get(3, 3) - e / (e + 9.0)).abs() < 1e-15);
        assert!((t.get(3, 3) - 0.23197).abs() < 1e-5);
    }

    #[test]
    fn diagonal_grows_with_scale() {
        let mut prev = 0.0;
        for i in 0..=50 {
            let d = NoiseModel::new(5, i as f64 * 0.5).unwrap().transition_matrix().get(2, 2);
            assert!(d > prev || i == 0);
            prev = d;
        }
    }

    #[test]
    fn marginal_values() {
        let t = TransitionMatrix::from_rows(&[vec![0.8, 0.2], vec![0.3, 0.7]]).unwrap();
        let m = noisy_marginal(&pv(&[0.9, 0.1]), &t);
        assert!((m[0] - 0.75).abs() < 1e-15 && (m[1] - 0.25).abs() < 1e-15);
        let p = pv(&[0.2, 0.5, 0.3]);
        assert_eq!(noisy_marginal(&p, &TransitionMatrix::identity(3)), p);
        let u = noisy_marginal(&p, &TransitionMatrix::uniform(3));
        assert!(u.as_slice().iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn perfect_fit_has_no_gradient() {
        let model = NoiseModel::new(3, 40.0).unwrap();
        let g = noise_gradients(&ProbVector::one_hot(3, 1), 1, &model).unwrap();
        assert!(g.loss.abs() < 1e-11);
        assert!(g.d_logits.iter().all(|v| v.abs() < 1e-11));
        assert!(g.d_omega.iter().all(|v| v.abs() < 1e-11));
    }

    #[test]
    fn zero_mass_rows_get_zero_gradient() {
        let model = NoiseModel::new(3, 1.0).unwrap();
        let g = noise_gradients(&pv(&[0.0, 0.6, 0.4]), 2, &model).unwrap();
        assert!(g.d_omega[..3].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = rng_from_seed(17);
        for _ in 0..20 {
            let c = 5;
            let mut model = NoiseModel::new(c, 1.0).unwrap();
            for w in model.params_mut() {
                *w = rng.random_range(-1.0..1.0);
            }
            let logits: Vec<f64> = (0..c).map(|_| rng.random_range(-2.0..2.0)).collect();
            let observed = rng.random_range(0..c);
            let pred = ProbVector::from_logits(&logits);
            let g = noise_gradients(&pred, observed, &model).unwrap();

            let e = max_relative_error(model.params(), &g.d_omega, 1e-5, |w| {
                let mut m = model.clone();
                m.set_params(w)?;
                Ok(noise_gradients(&pred, observed, &m)?.loss)
            })
            .unwrap();
            assert!(e < 1e-4, "omega {e}");

            let e = max_relative_error(&logits, &g.d_logits, 1e-5, |z| {
                let p = ProbVector::from_vec_unchecked(softmax(z));
                Ok(noise_gradients(&p, observed, &model)?.loss)
            })
            .unwrap();
            assert!(e < 1e-4, "logits {e}");
        }
    }

    #[test]
    fn recovery_error_values() {
        let a = TransitionMatrix::identity(10);
        let b = TransitionMatrix::uniform(10);
        assert_eq!(transition_recovery_error(&a, &a).unwrap(), 0.0);
        let e = transition_recovery_error(&a, &b).unwrap();
        assert!((e - 0.9).abs() < 1e-12);
        assert_eq!(e, transition_recovery_error(&b, &a).unwrap());
    }

    #[test]
    fn json_dump_parses() {
        let t = NoiseModel::new(3, 1.0).unwrap().transition_matrix();
        let v: serde_json::Value = serde_json::from_str(&t.to_json(1.0)).unwrap();
        assert_eq!(v["C"], 3);
        assert_eq!(v["scale"].as_f64(), Some(1.0));
        let parsed: Vec<Vec<f64>> = serde_json::from_value(v["T"].clone()).unwrap();
        assert_eq!(parsed, t.rows());
    }

    #[test]
    fn rows_stay_stochastic_under_extreme_parameters() {
        let mut rng = rng_from_seed(5);
        for scale in [0.0, 1.0, 10.0, 50.0] {
            let mut model = NoiseModel::new(6, scale).unwrap();
            for w in model.params_mut() {
                *w = rng.random_range(-30.0..30.0);
            }
            for row in model.transition_matrix().rows() {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }
}
