use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::{check_len, matvec_rows, matvec_t_rows_acc, outer_rows_acc, sigmoid, Param, Parameterized, Tensor};
use crate::Result;

/// Transform gate of a highway connection: `t = σ(W_t x + b_t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HighwayParams {
    pub w: Param,
    pub b: Param,
}

impl HighwayParams {
    pub fn new<R: Rng + ?Sized>(name: &str, dim: usize, rng: &mut R) -> Self {
        HighwayParams {
            w: Param::new(format!("{name}.w"), Tensor::glorot(&[dim, dim], rng)),
            b: Param::new(format!("{name}.b"), Tensor::zeros(&[dim])),
        }
    }

    pub fn dim(&self) -> usize {
        self.b.value.len()
    }
}

impl Parameterized for HighwayParams {
    fn params(&self) -> Vec<&Param> {
        vec![&self.w, &self.b]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.w, &mut self.b]
    }
}

#[derive(Debug, Clone)]
pub struct HighwayStep {
    x: Vec<f64>,
    transformed: Vec<f64>,
    gate: Vec<f64>,
}

/// `t⊙transformed + (1−t)⊙x`.
pub fn highway_combine(x: &[f64], transformed: &[f64], p: &HighwayParams) -> Result<(Vec<f64>, HighwayStep)> {
    let d = p.dim();
    check_len("highway input", x.len(), d)?;
    check_len("highway transform", transformed.len(), d)?;
    let mut pre = p.b.value.data().to_vec();
    matvec_rows(p.w.value.data(), d, 0, x, &mut pre);
    let gate: Vec<f64> = pre.into_iter().map(sigmoid).collect();
    let out = (0..d).map(|i| gate[i] * transformed[i] + (1.0 - gate[i]) * x[i]).collect();
    Ok((out, HighwayStep { x: x.to_vec(), transformed: transformed.to_vec(), gate }))
}

/// Returns `(d_x, d_transformed)` and accumulates gate gradients.
pub fn highway_combine_backward(step: &HighwayStep, dout: &[f64], p: &mut HighwayParams) -> (Vec<f64>, Vec<f64>) {
    let d = p.dim();
    let mut dx = vec![0.0; d];
    let mut dtr = vec![0.0; d];
    let mut dpre = vec![0.0; d];
    for i in 0..d {
        let t = step.gate[i];
        dtr[i] = dout[i] * t;
        dx[i] = dout[i] * (1.0 - t);
        dpre[i] = dout[i] * (step.transformed[i] - step.x[i]) * t * (1.0 - t);
    }
    matvec_t_rows_acc(p.w.value.data(), d, 0, &dpre, &mut dx);
    outer_rows_acc(p.w.grad.data_mut(), d, 0, &dpre, &step.x);
    for (g, v) in p.b.grad.data_mut().iter_mut().zip(&dpre) {
        *g += v;
    }
    (dx, dtr)
}
