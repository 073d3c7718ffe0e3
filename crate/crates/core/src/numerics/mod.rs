//! Dense f64 tensors and hand-written forward/backward layer pairs.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::{Error, Result};

mod conv;
mod gradcheck;
pub(crate) mod gru;
mod highway;
mod linear;
mod softmax;

pub use conv::{conv1d_maxpool, conv1d_maxpool_backward, ConvBank, ConvCache, ConvFilters};
pub use gradcheck::{grad_check, grad_check_params, grad_check_report, GradCheckEntry};
pub use gru::{gru_cell, gru_cell_backward, GruParams, GruStep};
pub use highway::{highway_combine, highway_combine_backward, HighwayParams, HighwayStep};
pub use linear::{Embedding, Linear};
pub use softmax::{log_sum_exp, softmax, softmax_xent};

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn tanh(x: f64) -> f64 {
    libm::tanh(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + exp(-x))
    } else {
        let e = exp(x);
        e / (1.0 + e)
    }
}

/// Row-major tensor of 64-bit floats.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Tensor { shape: shape.to_vec(), data: vec![0.0; n] }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Shape(format!(
                "shape {:?} needs {} values, got {}",
                shape,
                n,
                data.len()
            )));
        }
        Ok(Tensor { shape: shape.to_vec(), data })
    }

    /// Builds a `rows x cols` matrix from equal-length rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::Shape(format!("ragged row: {} vs {}", r.len(), cols)));
            }
            data.extend_from_slice(r);
        }
        Tensor::from_vec(&[rows.len(), cols], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Leading dimension (1 for scalars).
    pub fn rows(&self) -> usize {
        self.shape.first().copied().unwrap_or(1)
    }

    /// Product of trailing dimensions.
    pub fn cols(&self) -> usize {
        self.shape.iter().skip(1).product()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let c = self.cols();
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn sq_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    /// Uniform(-r, r) with r = sqrt(6 / (fan_in + fan_out)); fan_in is the
    /// trailing size and fan_out the leading size of a 2-D shape.
    pub fn glorot<R: Rng + ?Sized>(shape: &[usize], rng: &mut R) -> Self {
        let fan_out = shape.first().copied().unwrap_or(1);
        let fan_in: usize = shape.iter().skip(1).product::<usize>().max(1);
        Self::uniform(shape, sqrt(6.0 / (fan_in + fan_out) as f64), rng)
    }

    pub fn uniform<R: Rng + ?Sized>(shape: &[usize], r: f64, rng: &mut R) -> Self {
        let n = shape.iter().product();
        let data = (0..n).map(|_| rng.gen_range(-r..=r)).collect();
        Tensor { shape: shape.to_vec(), data }
    }
}

/// A named learnable tensor with its gradient accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
}

impl Param {
    pub fn new(name: impl Into<String>, value: Tensor) -> Self {
        let grad = Tensor::zeros(value.shape());
        Param { name: name.into(), value, grad }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

/// Anything that owns learnable parameters, visited in a fixed order.
pub trait Parameterized {
    fn params(&self) -> Vec<&Param>;
    fn params_mut(&mut self) -> Vec<&mut Param>;

    fn zero_grads(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    fn grad_sq_norm(&self) -> f64 {
        self.params().iter().map(|p| p.grad.sq_norm()).sum()
    }

    fn num_values(&self) -> usize {
        self.params().iter().map(|p| p.value.len()).sum()
    }
}

/// Named parameter group: a flat list of `Param`s.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LayerParams {
    pub entries: Vec<Param>,
}

impl LayerParams {
    pub fn get(&self, name: &str) -> Option<&Param> {
        self.entries.iter().find(|p| p.name == name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Param> {
        self.entries.iter_mut().find(|p| p.name == name)
    }
}

impl Parameterized for LayerParams {
    fn params(&self) -> Vec<&Param> {
        self.entries.iter().collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        self.entries.iter_mut().collect()
    }
}

/// out[i] = sum_j w[row0 + i][j] * x[j] for `out.len()` rows.
pub(crate) fn matvec_rows(w: &[f64], cols: usize, row0: usize, x: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        let row = &w[(row0 + i) * cols..(row0 + i + 1) * cols];
        *o += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// dx[j] += sum_i w[row0 + i][j] * dy[i].
pub(crate) fn matvec_t_rows_acc(w: &[f64], cols: usize, row0: usize, dy: &[f64], dx: &mut [f64]) {
    for (i, &g) in dy.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        let row = &w[(row0 + i) * cols..(row0 + i + 1) * cols];
        for (d, a) in dx.iter_mut().zip(row) {
            *d += a * g;
        }
    }
}

/// grad[row0 + i][j] += dy[i] * x[j].
pub(crate) fn outer_rows_acc(grad: &mut [f64], cols: usize, row0: usize, dy: &[f64], x: &[f64]) {
    for (i, &g) in dy.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        let row = &mut grad[(row0 + i) * cols..(row0 + i + 1) * cols];
        for (r, b) in row.iter_mut().zip(x) {
            *r += g * b;
        }
    }
}

pub(crate) fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::Shape(format!("{what}: expected length {want}, got {got}")));
    }
    Ok(())
}
