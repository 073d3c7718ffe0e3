use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::{matvec_rows, matvec_t_rows_acc, outer_rows_acc, tanh, Param, Parameterized, Tensor};
use crate::{Error, Result};

/// `count` filters of one width; `weight` is `count x (width * dim)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvFilters {
    pub width: usize,
    pub weight: Param,
    pub bias: Param,
}

impl ConvFilters {
    pub fn count(&self) -> usize {
        self.bias.value.len()
    }
}

/// A bank of temporal convolution filters of mixed widths.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvBank {
    pub filters: Vec<ConvFilters>,
    input_dim: usize,
}

impl ConvBank {
    pub fn new<R: Rng + ?Sized>(name: &str, input_dim: usize, widths: &[usize], count: usize, rng: &mut R) -> Self {
        let filters = widths
            .iter()
            .map(|&w| ConvFilters {
                width: w,
                weight: Param::new(format!("{name}.w{w}"), Tensor::glorot(&[count, w * input_dim], rng)),
                bias: Param::new(format!("{name}.b{w}"), Tensor::zeros(&[count])),
            })
            .collect();
        ConvBank { filters, input_dim }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.filters.iter().map(ConvFilters::count).sum()
    }

    pub fn max_width(&self) -> usize {
        self.filters.iter().map(|f| f.width).max().unwrap_or(0)
    }
}

impl Parameterized for ConvBank {
    fn params(&self) -> Vec<&Param> {
        self.filters.iter().flat_map(|f| [&f.weight, &f.bias]).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        self.filters.iter_mut().flat_map(|f| [&mut f.weight, &mut f.bias]).collect()
    }
}

#[derive(Debug, Clone)]
pub struct ConvCache {
    input: Tensor,
    /// Per filter group: winning window start and its activation.
    argmax: Vec<Vec<(usize, f64)>>,
}

/// Valid convolution over time, tanh, max over time; outputs of all filter
/// groups are concatenated. Ties in the max pick the earliest window.
pub fn conv1d_maxpool(seq: &Tensor, bank: &ConvBank) -> Result<(Vec<f64>, ConvCache)> {
    let t_len = seq.rows();
    let d = bank.input_dim;
    if seq.shape().len() != 2 || seq.cols() != d {
        return Err(Error::Shape(format!("conv input {:?}, expected (T, {d})", seq.shape())));
    }
    if t_len < bank.max_width() {
        return Err(Error::Shape(format!(
            "sequence length {t_len} shorter than filter width {}",
            bank.max_width()
        )));
    }
    let data = seq.data();
    let mut out = Vec::with_capacity(bank.output_dim());
    let mut argmax = Vec::with_capacity(bank.filters.len());
    for f in &bank.filters {
        let k = f.count();
        let span = f.width * d;
        let mut best = vec![(0usize, f64::NEG_INFINITY); k];
        for s in 0..=t_len - f.width {
            let window = &data[s * d..s * d + span];
            let mut pre = f.bias.value.data().to_vec();
            matvec_rows(f.weight.value.data(), span, 0, window, &mut pre);
            for (j, v) in pre.into_iter().enumerate() {
                let a = tanh(v);
                if a > best[j].1 {
                    best[j] = (s, a);
                }
            }
        }
        out.extend(best.iter().map(|b| b.1));
        argmax.push(best);
    }
    Ok((out, ConvCache { input: seq.clone(), argmax }))
}

/// Routes `dout` to the arg-max windows; returns the input gradient.
pub fn conv1d_maxpool_backward(cache: &ConvCache, dout: &[f64], bank: &mut ConvBank) -> Tensor {
    let d = bank.input_dim;
    let mut dseq = Tensor::zeros(cache.input.shape());
    let data = cache.input.data();
    let mut offset = 0;
    for (f, best) in bank.filters.iter_mut().zip(&cache.argmax) {
        let span = f.width * d;
        for (j, &(s, a)) in best.iter().enumerate() {
            let g = dout[offset + j] * (1.0 - a * a);
            if g == 0.0 {
                continue;
            }
            let window = &data[s * d..s * d + span];
            outer_rows_acc(f.weight.grad.data_mut(), span, j, &[g], window);
            f.bias.grad.data_mut()[j] += g;
            matvec_t_rows_acc(f.weight.value.data(), span, j, &[g], &mut dseq.data_mut()[s * d..s * d + span]);
        }
        offset += f.count();
    }
    dseq
}
