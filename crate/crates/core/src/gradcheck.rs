//! Central finite-difference gradient checking.

use crate::error::{Error, Result};
use crate::model::Classifier;

/// Floor on the denominator of the relative error.
pub const REL_FLOOR: f64 = 1e-8;

/// Compares `analytic` against a fourth-order central difference of `loss`
/// around `params`, returning `max |a − n| / max(|n|, 1e-8)`.
///
/// `loss` must be deterministic; it is evaluated at `params ± ε e_i` and
/// `params ± 2ε e_i` for every coordinate.
pub fn max_relative_error<F>(params: &[f64], analytic: &[f64], eps: f64, mut loss: F) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if !(1e-7..=1e-4).contains(&eps) {
        return Err(Error::contract(format!("perturbation {eps} outside [1e-7, 1e-4]")));
    }
    if analytic.len() != params.len() {
        return Err(Error::Shape {
            what: "analytic gradient",
            expected: params.len(),
            actual: analytic.len(),
        });
    }
    let mut probe = params.to_vec();
    let mut eval = |probe: &mut Vec<f64>, i: usize, offset: f64| -> Result<f64> {
        probe[i] = params[i] + offset;
        let v = loss(probe)?;
        probe[i] = params[i];
        if !v.is_finite() {
            return Err(Error::Numeric {
                context: format!("loss at parameter {i} offset {offset:e}"),
            });
        }
        Ok(v)
    };
    let mut worst: f64 = 0.0;
    for (i, &a) in analytic.iter().enumerate() {
        let f_p1 = eval(&mut probe, i, eps)?;
        let f_m1 = eval(&mut probe, i, -eps)?;
        let f_p2 = eval(&mut probe, i, 2.0 * eps)?;
        let f_m2 = eval(&mut probe, i, -2.0 * eps)?;
        let numeric = (8.0 * (f_p1 - f_m1) - (f_p2 - f_m2)) / (12.0 * eps);
        let err = (a - numeric).abs() / numeric.abs().max(REL_FLOOR);
        worst = worst.max(err);
    }
    Ok(worst)
}

/// [`max_relative_error`] over every parameter of a classifier.
pub fn finite_difference_check<F>(
    classifier: &Classifier,
    analytic: &[f64],
    eps: f64,
    mut loss: F,
) -> Result<f64>
where
    F: FnMut(&Classifier) -> Result<f64>,
{
    let mut probe = classifier.clone();
    max_relative_error(classifier.params(), analytic, eps, |p| {
        probe.set_params(p)?;
        loss(&probe)
    })
}
