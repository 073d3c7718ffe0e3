use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::{
    check_len, matvec_rows, matvec_t_rows_acc, outer_rows_acc, sigmoid, tanh, Param, Parameterized,
    Tensor,
};
use crate::Result;

/// GRU weights with the three gates stacked in the order update, reset,
/// candidate: `w` is `3h x in`, `u` is `3h x h`, `b` is `3h`.
#[derive(Debug, Clone, PartialEq)]
pub struct GruParams {
    pub w: Param,
    pub u: Param,
    pub b: Param,
    input_dim: usize,
    hidden_dim: usize,
}

impl GruParams {
    pub fn new<R: Rng + ?Sized>(name: &str, input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        // Each gate block is initialised with its own fan pair.
        let mut w = Vec::with_capacity(3 * hidden_dim * input_dim);
        let mut u = Vec::with_capacity(3 * hidden_dim * hidden_dim);
        for _ in 0..3 {
            w.extend(Tensor::glorot(&[hidden_dim, input_dim], rng).into_vec());
        }
        for _ in 0..3 {
            u.extend(Tensor::glorot(&[hidden_dim, hidden_dim], rng).into_vec());
        }
        GruParams {
            w: Param::new(format!("{name}.w"), Tensor::from_vec(&[3 * hidden_dim, input_dim], w).unwrap()),
            u: Param::new(format!("{name}.u"), Tensor::from_vec(&[3 * hidden_dim, hidden_dim], u).unwrap()),
            b: Param::new(format!("{name}.b"), Tensor::zeros(&[3 * hidden_dim])),
            input_dim,
            hidden_dim,
        }
    }

    pub fn zeros(name: &str, input_dim: usize, hidden_dim: usize) -> Self {
        GruParams {
            w: Param::new(format!("{name}.w"), Tensor::zeros(&[3 * hidden_dim, input_dim])),
            u: Param::new(format!("{name}.u"), Tensor::zeros(&[3 * hidden_dim, hidden_dim])),
            b: Param::new(format!("{name}.b"), Tensor::zeros(&[3 * hidden_dim])),
            input_dim,
            hidden_dim,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }
}

impl Parameterized for GruParams {
    fn params(&self) -> Vec<&Param> {
        vec![&self.w, &self.u, &self.b]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.w, &mut self.u, &mut self.b]
    }
}

/// Activations of one GRU step, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct GruStep {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    cand: Vec<f64>,
    rh: Vec<f64>,
}

/// One recurrence step:
/// z = σ(W_z x + U_z h + b_z), r = σ(W_r x + U_r h + b_r),
/// ĥ = tanh(W_h x + U_h (r⊙h) + b_h), h' = (1−z)⊙h + z⊙ĥ.
pub fn gru_cell(x: &[f64], h_prev: &[f64], p: &GruParams) -> Result<(Vec<f64>, GruStep)> {
    let h = p.hidden_dim;
    check_len("gru input", x.len(), p.input_dim)?;
    check_len("gru state", h_prev.len(), h)?;
    let w = p.w.value.data();
    let u = p.u.value.data();
    let b = p.b.value.data();

    let mut pre = b.to_vec();
    matvec_rows(w, p.input_dim, 0, x, &mut pre);
    matvec_rows(u, h, 0, h_prev, &mut pre[..2 * h]);

    let z: Vec<f64> = pre[..h].iter().map(|&v| sigmoid(v)).collect();
    let r: Vec<f64> = pre[h..2 * h].iter().map(|&v| sigmoid(v)).collect();
    let rh: Vec<f64> = r.iter().zip(h_prev).map(|(a, b)| a * b).collect();
    let mut cand_pre = pre[2 * h..].to_vec();
    matvec_rows(u, h, 2 * h, &rh, &mut cand_pre);
    let cand: Vec<f64> = cand_pre.iter().map(|&v| tanh(v)).collect();

    let out = (0..h).map(|i| (1.0 - z[i]) * h_prev[i] + z[i] * cand[i]).collect();
    Ok((out, GruStep { x: x.to_vec(), h_prev: h_prev.to_vec(), z, r, cand, rh }))
}

/// Backward of [`gru_cell`]: accumulates parameter gradients into `p` and
/// returns `(d_x, d_h_prev)`.
pub fn gru_cell_backward(step: &GruStep, dh: &[f64], p: &mut GruParams) -> (Vec<f64>, Vec<f64>) {
    let h = p.hidden_dim;
    let n_in = p.input_dim;
    let mut dh_prev: Vec<f64> = (0..h).map(|i| dh[i] * (1.0 - step.z[i])).collect();
    let mut dpre = vec![0.0; 3 * h];
    for i in 0..h {
        let dz = dh[i] * (step.cand[i] - step.h_prev[i]);
        dpre[i] = dz * step.z[i] * (1.0 - step.z[i]);
        let dc = dh[i] * step.z[i];
        dpre[2 * h + i] = dc * (1.0 - step.cand[i] * step.cand[i]);
    }

    let u = p.u.value.data();
    let mut drh = vec![0.0; h];
    matvec_t_rows_acc(u, h, 2 * h, &dpre[2 * h..], &mut drh);
    for i in 0..h {
        let dr = drh[i] * step.h_prev[i];
        dpre[h + i] = dr * step.r[i] * (1.0 - step.r[i]);
        dh_prev[i] += drh[i] * step.r[i];
    }
    matvec_t_rows_acc(u, h, 0, &dpre[..2 * h], &mut dh_prev);

    let mut dx = vec![0.0; n_in];
    matvec_t_rows_acc(p.w.value.data(), n_in, 0, &dpre, &mut dx);

    outer_rows_acc(p.w.grad.data_mut(), n_in, 0, &dpre, &step.x);
    let ug = p.u.grad.data_mut();
    outer_rows_acc(ug, h, 0, &dpre[..2 * h], &step.h_prev);
    outer_rows_acc(ug, h, 2 * h, &dpre[2 * h..], &step.rh);
    for (g, d) in p.b.grad.data_mut().iter_mut().zip(&dpre) {
        *g += d;
    }
    (dx, dh_prev)
}

/// Runs a GRU over a sequence, left to right or right to left. Returned
/// states are indexed by time position in both directions.
pub(crate) fn gru_sequence(
    xs: &[Vec<f64>],
    p: &GruParams,
    reverse: bool,
) -> Result<(Vec<Vec<f64>>, Vec<GruStep>)> {
    let n = xs.len();
    let mut hs = vec![Vec::new(); n];
    let mut steps = Vec::with_capacity(n);
    let mut h = vec![0.0; p.hidden_dim];
    for k in 0..n {
        let t = if reverse { n - 1 - k } else { k };
        let (next, step) = gru_cell(&xs[t], &h, p)?;
        hs[t] = next.clone();
        steps.push(step);
        h = next;
    }
    Ok((hs, steps))
}

/// Backward of [`gru_sequence`]; `dhs` are gradients w.r.t. each output
/// state (by time position). Returns input gradients by time position.
pub(crate) fn gru_sequence_backward(
    steps: &[GruStep],
    dhs: &[Vec<f64>],
    p: &mut GruParams,
    reverse: bool,
) -> Vec<Vec<f64>> {
    let n = steps.len();
    let mut dxs = vec![Vec::new(); n];
    let mut carry = vec![0.0; p.hidden_dim];
    for k in (0..n).rev() {
        let t = if reverse { n - 1 - k } else { k };
        let dh: Vec<f64> = dhs[t].iter().zip(&carry).map(|(a, b)| a + b).collect();
        let (dx, dprev) = gru_cell_backward(&steps[k], &dh, p);
        dxs[t] = dx;
        carry = dprev;
    }
    dxs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::grad_check_params;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_params_halve_state() {
        let p = GruParams::zeros("g", 3, 4);
        let v = [1.0, -2.0, 0.5, 4.0];
        let (h, _) = gru_cell(&[0.3, 0.1, -0.7], &v, &p).unwrap();
        for (a, b) in h.iter().zip(v) {
            assert!((a - 0.5 * b).abs() < 1e-15);
        }
        let (h0, _) = gru_cell(&[0.3, 0.1, -0.7], &[0.0; 4], &p).unwrap();
        assert!(h0.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn dimension_mismatch_is_shape_error() {
        let p = GruParams::zeros("g", 3, 4);
        assert!(gru_cell(&[0.0; 2], &[0.0; 4], &p).is_err());
        assert!(gru_cell(&[0.0; 3], &[0.0; 5], &p).is_err());
    }

    #[test]
    fn cell_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut p = GruParams::new("g", 3, 4, &mut rng);
        for v in p.b.value.data_mut() {
            *v = rng.gen_range(-0.5..0.5);
        }
        let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let h0: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let proj: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let err = grad_check_params(
            &mut p,
            |p| {
                let (h, step) = gru_cell(&x, &h0, p)?;
                let loss = h.iter().zip(&proj).map(|(a, b)| a * b).sum();
                gru_cell_backward(&step, &proj, p);
                Ok(loss)
            },
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-6, "max relative error {err}");
    }

    #[test]
    fn input_and_state_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = GruParams::new("g", 3, 4, &mut rng);
        let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let h0: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let proj: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let loss = |x: &[f64], h: &[f64]| -> f64 {
            let (o, _) = gru_cell(x, h, &p).unwrap();
            o.iter().zip(&proj).map(|(a, b)| a * b).sum()
        };
        let (_, step) = gru_cell(&x, &h0, &p).unwrap();
        let mut scratch = p.clone();
        let (dx, dh) = gru_cell_backward(&step, &proj, &mut scratch);
        let mut xv = x.clone();
        let ex = crate::numerics::grad_check(&mut xv, &dx, |v| Ok(loss(v, &h0)), 1e-5).unwrap();
        let mut hv = h0.clone();
        let eh = crate::numerics::grad_check(&mut hv, &dh, |v| Ok(loss(&x, v)), 1e-5).unwrap();
        assert!(ex < 1e-6 && eh < 1e-6, "{ex} {eh}");
    }

    #[test]
    fn sequence_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut p = GruParams::new("g", 2, 3, &mut rng);
        let xs: Vec<Vec<f64>> = (0..4).map(|_| (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        for reverse in [false, true] {
            let err = grad_check_params(
                &mut p,
                |p| {
                    let (hs, steps) = gru_sequence(&xs, p, reverse)?;
                    let loss = hs.iter().enumerate().map(|(t, h)| (t + 1) as f64 * h.iter().sum::<f64>()).sum();
                    let dhs: Vec<Vec<f64>> = (0..4).map(|t| vec![(t + 1) as f64; 3]).collect();
                    gru_sequence_backward(&steps, &dhs, p, reverse);
                    Ok(loss)
                },
                1e-5,
            )
            .unwrap();
            assert!(err < 1e-6, "reverse={reverse}: {err}");
        }
    }
}
