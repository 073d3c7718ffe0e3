use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::{check_len, matvec_rows, matvec_t_rows_acc, outer_rows_acc, sqrt, Param, Parameterized, Tensor};
use crate::{Error, Result};

/// Affine map `y = W x + b`, `W` is `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Param,
    pub bias: Param,
}

impl Linear {
    pub fn new<R: Rng + ?Sized>(name: &str, input: usize, output: usize, rng: &mut R) -> Self {
        Linear {
            weight: Param::new(format!("{name}.w"), Tensor::glorot(&[output, input], rng)),
            bias: Param::new(format!("{name}.b"), Tensor::zeros(&[output])),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.value.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.value.rows()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("linear input", x.len(), self.input_dim())?;
        let mut y = self.bias.value.data().to_vec();
        matvec_rows(self.weight.value.data(), self.input_dim(), 0, x, &mut y);
        Ok(y)
    }

    /// Accumulates parameter gradients and returns `d_x`.
    pub fn backward(&mut self, x: &[f64], dy: &[f64]) -> Vec<f64> {
        let n = self.input_dim();
        outer_rows_acc(self.weight.grad.data_mut(), n, 0, dy, x);
        for (g, d) in self.bias.grad.data_mut().iter_mut().zip(dy) {
            *g += d;
        }
        let mut dx = vec![0.0; n];
        matvec_t_rows_acc(self.weight.value.data(), n, 0, dy, &mut dx);
        dx
    }
}

impl Parameterized for Linear {
    fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// Lookup table, one row per id.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub table: Param,
    /// Frozen tables receive no gradient.
    pub frozen: bool,
}

impl Embedding {
    /// Rows are drawn from Uniform(-r, r), r = sqrt(6 / (1 + dim)): a lookup
    /// is a one-hot product, so the fan-in is one active input.
    pub fn new<R: Rng + ?Sized>(name: &str, vocab: usize, dim: usize, rng: &mut R) -> Self {
        let r = sqrt(6.0 / (1 + dim) as f64);
        Embedding { table: Param::new(name, Tensor::uniform(&[vocab, dim], r, rng)), frozen: false }
    }

    pub fn vocab(&self) -> usize {
        self.table.value.rows()
    }

    pub fn dim(&self) -> usize {
        self.table.value.cols()
    }

    pub fn lookup(&self, id: usize) -> Result<&[f64]> {
        if id >= self.vocab() {
            return Err(Error::Index { index: id, len: self.vocab() });
        }
        Ok(self.table.value.row(id))
    }

    pub fn backward(&mut self, id: usize, dy: &[f64]) {
        if self.frozen {
            return;
        }
        for (g, d) in self.table.grad.row_mut(id).iter_mut().zip(dy) {
            *g += d;
        }
    }
}

impl Parameterized for Embedding {
    fn params(&self) -> Vec<&Param> {
        vec![&self.table]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.table]
    }
}
