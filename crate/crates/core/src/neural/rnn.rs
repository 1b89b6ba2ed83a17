//! Elman network: `h_t = tanh(W_h h_{t-1} + W_x x_t + b)`, `ŷ = W_y·h_w + b_y`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use super::{Batch, Recurrent, INIT_SCALE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RnnModel {
    pub w_x: DVector<f64>,
    pub w_h: DMatrix<f64>,
    pub b: DVector<f64>,
    pub w_y: DVector<f64>,
    pub b_y: f64,
    pub window: usize,
    pub hidden: usize,
    /// Seed the weights were initialized from.
    pub seed: u64,
}

impl RnnModel {
    pub fn zeros(window: usize, hidden: usize) -> Self {
        Self {
            w_x: DVector::zeros(hidden),
            w_h: DMatrix::zeros(hidden, hidden),
            b: DVector::zeros(hidden),
            w_y: DVector::zeros(hidden),
            b_y: 0.0,
            window,
            hidden,
            seed: 0,
        }
    }

    /// Hidden states `h_0 = 0, h_1, .., h_w`, each `H × B`.
    fn states(&self, inputs: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
        let (w, batch) = inputs.shape();
        let mut states = Vec::with_capacity(w + 1);
        states.push(DMatrix::zeros(self.hidden, batch));
        for t in 0..w {
            let mut a = &self.w_h * &states[t];
            for j in 0..batch {
                let x = inputs[(t, j)];
                let mut col = a.column_mut(j);
                for i in 0..self.hidden {
                    col[i] = (col[i] + self.w_x[i] * x + self.b[i]).tanh();
                }
            }
            states.push(a);
        }
        states
    }
}

/// One recurrence step for a single sequence.
pub fn rnn_cell_forward(model: &RnnModel, h_prev: &DVector<f64>, x_t: f64) -> DVector<f64> {
    (&model.w_h * h_prev + &model.w_x * x_t + &model.b).map(f64::tanh)
}

impl Recurrent for RnnModel {
    fn window(&self) -> usize {
        self.window
    }

    fn hidden(&self) -> usize {
        self.hidden
    }

    fn init(window: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist = Uniform::new_inclusive(-INIT_SCALE, INIT_SCALE).expect("valid interval");
        let mut model = Self::zeros(window, hidden);
        let params: Vec<f64> = (0..model.n_params()).map(|_| dist.sample(&mut rng)).collect();
        model.set_params(&params);
        model.seed = seed;
        model
    }

    fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.hidden * (self.hidden + 3) + 1);
        p.extend_from_slice(self.w_x.as_slice());
        p.extend_from_slice(self.w_h.as_slice());
        p.extend_from_slice(self.b.as_slice());
        p.extend_from_slice(self.w_y.as_slice());
        p.push(self.b_y);
        p
    }

    fn set_params(&mut self, params: &[f64]) {
        let h = self.hidden;
        let mut rest = params;
        let mut take = |n: usize| {
            let (head, tail) = rest.split_at(n);
            rest = tail;
            head
        };
        self.w_x.copy_from_slice(take(h));
        self.w_h.copy_from_slice(take(h * h));
        self.b.copy_from_slice(take(h));
        self.w_y.copy_from_slice(take(h));
        self.b_y = take(1)[0];
    }

    fn n_params(&self) -> usize {
        self.hidden * (self.hidden + 3) + 1
    }

    fn forward_batch(&self, inputs: &DMatrix<f64>) -> DVector<f64> {
        let states = self.states(inputs);
        let last = states.last().expect("at least the initial state");
        last.tr_mul(&self.w_y).add_scalar(self.b_y)
    }

    fn bptt_gradients(&self, batch: &Batch) -> (f64, Self) {
        let n = batch.len() as f64;
        let states = self.states(&batch.inputs);
        let h_last = states.last().expect("at least the initial state");
        let err = h_last.tr_mul(&self.w_y).add_scalar(self.b_y) - &batch.targets;
        let loss = err.norm_squared() / n;
        let dy = err * (2.0 / n);

        let mut g = Self::zeros(self.window, self.hidden);
        g.seed = self.seed;
        g.w_y = h_last * &dy;
        g.b_y = dy.sum();
        let mut dh = &self.w_y * dy.transpose();
        for t in (0..batch.window()).rev() {
            let h = &states[t + 1];
            let da = dh.zip_map(h, |d, hv| d * (1.0 - hv * hv));
            g.w_h.gemm(1.0, &da, &states[t].transpose(), 1.0);
            g.w_x += &da * batch.inputs.row(t).transpose();
            g.b += da.column_sum();
            dh = self.w_h.tr_mul(&da);
        }
        (loss, g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{make_windows, Recurrent};

    /// Scalar evaluation of the recurrence, written independently of the
    /// batched matrix code.
    fn naive_forward(m: &RnnModel, window: &[f64]) -> f64 {
        let h = m.hidden;
        let mut state = vec![0.0; h];
        for &x in window {
            let mut next = vec![0.0; h];
            for i in 0..h {
                let mut a = m.b[i] + m.w_x[i] * x;
                for j in 0..h {
                    a += m.w_h[(i, j)] * state[j];
                }
                next[i] = a.tanh();
            }
            state = next;
        }
        m.b_y + (0..h).map(|i| m.w_y[i] * state[i]).sum::<f64>()
    }

    #[test]
    fn zero_weights_give_zero_state() {
        let m = RnnModel::zeros(3, 4);
        let h = rnn_cell_forward(&m, &DVector::zeros(4), 2.5);
        assert_eq!(h, DVector::zeros(4));
    }

    #[test]
    fn zero_input_gives_tanh_bias() {
        let mut m = RnnModel::zeros(1, 3);
        m.w_x = DVector::from_element(3, 0.1);
        m.b = DVector::from_vec(vec![0.3, -1.0, 2.0]);
        let h = rnn_cell_forward(&m, &DVector::zeros(3), 0.0);
        for i in 0..3 {
            assert_eq!(h[i], m.b[i].tanh());
        }
    }

    #[test]
    fn matches_naive_evaluator() {
        for seed in 0..10 {
            let mut m = RnnModel::init(6, 5, seed);
            let scaled: Vec<f64> = m.params().iter().map(|p| p * 8.0).collect();
            m.set_params(&scaled);
            let x: Vec<f64> = (0..20).map(|k| (k as f64 * 0.37 + seed as f64).sin()).collect();
            let windows = make_windows(&x, 6).unwrap();
            let batch = Batch::new(&windows).unwrap();
            let out = m.forward_batch(&batch.inputs);
            for (k, w) in windows.iter().enumerate() {
                assert!((out[k] - naive_forward(&m, &w.input)).abs() < 1e-12);
            }
            let mut h = DVector::zeros(5);
            for &v in &windows[0].input {
                h = rnn_cell_forward(&m, &h, v);
            }
            assert!((m.w_y.dot(&h) + m.b_y - out[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn params_round_trip() {
        let m = RnnModel::init(4, 3, 7);
        let mut other = RnnModel::zeros(4, 3);
        other.set_params(&m.params());
        other.seed = 7;
        assert_eq!(other, m);
        assert_eq!(m.params().len(), m.n_params());
        assert!(m.params().iter().all(|p| p.abs() <= INIT_SCALE));
    }

    #[test]
    fn zero_problem_has_zero_gradient() {
        let m = RnnModel::zeros(3, 4);
        let batch = Batch::new(&make_windows(&[0.5, -0.2, 0.9, 0.0, 0.3], 3).unwrap()).unwrap();
        let zero_targets = Batch { targets: DVector::zeros(batch.len()), ..batch };
        let (loss, g) = m.bptt_gradients(&zero_targets);
        assert_eq!(loss, 0.0);
        assert!(g.params().iter().all(|v| *v == 0.0));
    }
}
