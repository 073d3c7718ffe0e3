use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::{sqrt, Parameterized};
use crate::{Error, Result};

/// Central finite differences against `analytic`, one coordinate at a time;
/// returns the max over coordinates of `|a − fd| / max(|a|, |fd|, 1e-12)`.
/// `theta` is restored.
pub fn grad_check<F>(theta: &mut [f64], analytic: &[f64], mut f: F, epsilon: f64) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if theta.len() != analytic.len() {
        return Err(Error::Shape(format!("{} parameters, {} gradients", theta.len(), analytic.len())));
    }
    let mut worst: f64 = 0.0;
    for i in 0..theta.len() {
        let orig = theta[i];
        theta[i] = orig + epsilon;
        let plus = finite(f(theta)?)?;
        theta[i] = orig - epsilon;
        let minus = finite(f(theta)?)?;
        theta[i] = orig;
        let fd = (plus - minus) / (2.0 * epsilon);
        worst = worst.max(relative_error(analytic[i].abs(), fd.abs(), (analytic[i] - fd).abs()));
    }
    Ok(worst)
}

/// Finite-difference agreement for one named parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckEntry {
    pub name: String,
    /// `‖a − fd‖ / max(‖a‖, ‖fd‖, 1e-12)` over the whole tensor.
    pub relative_error: f64,
    /// Worst single-coordinate relative error inside the tensor.
    pub max_elementwise_error: f64,
}

/// Checks every parameter tensor of a model. `loss_and_grads` must return
/// the loss and accumulate analytic gradients into the model's (pre-zeroed)
/// accumulators.
pub fn grad_check_report<M, F>(model: &mut M, mut loss_and_grads: F, epsilon: f64) -> Result<Vec<GradCheckEntry>>
where
    M: Parameterized,
    F: FnMut(&mut M) -> Result<f64>,
{
    model.zero_grads();
    finite(loss_and_grads(model)?)?;
    let analytic: Vec<(String, Vec<f64>)> =
        model.params().iter().map(|p| (p.name.clone(), p.grad.data().to_vec())).collect();
    let mut report = Vec::with_capacity(analytic.len());
    for (pi, (name, grads)) in analytic.into_iter().enumerate() {
        let (mut diff2, mut a2, mut fd2, mut elem) = (0.0, 0.0, 0.0, 0.0f64);
        for (vi, &a) in grads.iter().enumerate() {
            let orig = model.params()[pi].value.data()[vi];
            let mut eval = |model: &mut M, v: f64| -> Result<f64> {
                model.params_mut()[pi].value.data_mut()[vi] = v;
                model.zero_grads();
                finite(loss_and_grads(model)?)
            };
            let plus = eval(model, orig + epsilon)?;
            let minus = eval(model, orig - epsilon)?;
            model.params_mut()[pi].value.data_mut()[vi] = orig;
            let fd = (plus - minus) / (2.0 * epsilon);
            diff2 += (a - fd) * (a - fd);
            a2 += a * a;
            fd2 += fd * fd;
            elem = elem.max(relative_error(a.abs(), fd.abs(), (a - fd).abs()));
        }
        report.push(GradCheckEntry {
            name,
            relative_error: relative_error(sqrt(a2), sqrt(fd2), sqrt(diff2)),
            max_elementwise_error: elem,
        });
    }
    model.zero_grads();
    Ok(report)
}

/// Max over named parameters of the tensor-level relative error.
pub fn grad_check_params<M, F>(model: &mut M, loss_and_grads: F, epsilon: f64) -> Result<f64>
where
    M: Parameterized,
    F: FnMut(&mut M) -> Result<f64>,
{
    Ok(grad_check_report(model, loss_and_grads, epsilon)?.iter().map(|e| e.relative_error).fold(0.0, f64::max))
}

fn relative_error(a: f64, fd: f64, diff: f64) -> f64 {
    diff / a.max(fd).max(1e-12)
}

fn finite(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numeric(format!("non-finite function value {v}")))
    }
}
