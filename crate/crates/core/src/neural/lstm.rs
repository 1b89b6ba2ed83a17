//! Single-layer LSTM. Each gate matrix is `H × (H+1)` acting on the stacked
//! input `[h_{t-1}; x_t]`:
//!
//! ```text
//! f_t = σ(W_f z + b_f)    i_t = σ(W_i z + b_i)    o_t = σ(W_o z + b_o)
//! C̃_t = tanh(W_C z + b_C)
//! C_t = f_t ⊙ C_{t-1} + i_t ⊙ C̃_t
//! h_t = o_t ⊙ tanh(C_t)
//! ```

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use super::{sigmoid, Batch, Recurrent, INIT_SCALE};

/// Initial forget-gate bias.
pub const FORGET_BIAS: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmModel {
    pub w_f: DMatrix<f64>,
    pub w_i: DMatrix<f64>,
    pub w_c: DMatrix<f64>,
    pub w_o: DMatrix<f64>,
    pub b_f: DVector<f64>,
    pub b_i: DVector<f64>,
    pub b_c: DVector<f64>,
    pub b_o: DVector<f64>,
    pub w_y: DVector<f64>,
    pub b_y: f64,
    pub window: usize,
    pub hidden: usize,
    /// Seed the weights were initialized from.
    pub seed: u64,
}

/// Activations of one cell step.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmStep {
    pub h: DVector<f64>,
    pub c: DVector<f64>,
    pub f: DVector<f64>,
    pub i: DVector<f64>,
    pub c_tilde: DVector<f64>,
    pub o: DVector<f64>,
}

/// One cell step for a single sequence.
pub fn lstm_cell_forward(model: &LstmModel, h_prev: &DVector<f64>, c_prev: &DVector<f64>, x_t: f64) -> LstmStep {
    let h = model.hidden;
    let mut z = DVector::zeros(h + 1);
    z.rows_mut(0, h).copy_from(h_prev);
    z[h] = x_t;
    let f = (&model.w_f * &z + &model.b_f).map(sigmoid);
    let i = (&model.w_i * &z + &model.b_i).map(sigmoid);
    let c_tilde = (&model.w_c * &z + &model.b_c).map(f64::tanh);
    let o = (&model.w_o * &z + &model.b_o).map(sigmoid);
    let c = f.component_mul(c_prev) + i.component_mul(&c_tilde);
    let h_t = o.component_mul(&c.map(f64::tanh));
    LstmStep { h: h_t, c, f, i, c_tilde, o }
}

/// Batched activations of one time step.
struct StepCache {
    /// `[h_{t-1}; x_t]`, `(H+1) × B`.
    z: DMatrix<f64>,
    /// Activated gates stacked `[f; i; C̃; o]`, `4H × B`.
    gates: DMatrix<f64>,
    c: DMatrix<f64>,
    tanh_c: DMatrix<f64>,
    h: DMatrix<f64>,
}

impl LstmModel {
    pub fn zeros(window: usize, hidden: usize) -> Self {
        let m = || DMatrix::zeros(hidden, hidden + 1);
        let v = || DVector::zeros(hidden);
        Self {
            w_f: m(),
            w_i: m(),
            w_c: m(),
            w_o: m(),
            b_f: v(),
            b_i: v(),
            b_c: v(),
            b_o: v(),
            w_y: v(),
            b_y: 0.0,
            window,
            hidden,
            seed: 0,
        }
    }

    fn stacked(&self) -> (DMatrix<f64>, DVector<f64>) {
        let h = self.hidden;
        let mut w = DMatrix::zeros(4 * h, h + 1);
        let mut b = DVector::zeros(4 * h);
        for (k, (wm, bv)) in [(&self.w_f, &self.b_f), (&self.w_i, &self.b_i), (&self.w_c, &self.b_c), (&self.w_o, &self.b_o)]
            .into_iter()
            .enumerate()
        {
            w.rows_mut(k * h, h).copy_from(wm);
            b.rows_mut(k * h, h).copy_from(bv);
        }
        (w, b)
    }

    fn run(&self, inputs: &DMatrix<f64>, w: &DMatrix<f64>, b: &DVector<f64>) -> Vec<StepCache> {
        let h = self.hidden;
        let (steps, batch) = inputs.shape();
        let mut caches: Vec<StepCache> = Vec::with_capacity(steps);
        for t in 0..steps {
            let mut z = DMatrix::zeros(h + 1, batch);
            if let Some(prev) = caches.last() {
                z.rows_mut(0, h).copy_from(&prev.h);
            }
            z.row_mut(h).copy_from(&inputs.row(t));
            let mut gates = w * &z;
            let mut c = DMatrix::zeros(h, batch);
            let mut tanh_c = DMatrix::zeros(h, batch);
            let mut h_t = DMatrix::zeros(h, batch);
            for j in 0..batch {
                let mut col = gates.column_mut(j);
                for r in 0..4 * h {
                    let a = col[r] + b[r];
                    col[r] = if (2 * h..3 * h).contains(&r) { a.tanh() } else { sigmoid(a) };
                }
                for i in 0..h {
                    let c_prev = caches.last().map_or(0.0, |p| p.c[(i, j)]);
                    let cv = col[i] * c_prev + col[h + i] * col[2 * h + i];
                    let tc = cv.tanh();
                    c[(i, j)] = cv;
                    tanh_c[(i, j)] = tc;
                    h_t[(i, j)] = col[3 * h + i] * tc;
                }
            }
            caches.push(StepCache { z, gates, c, tanh_c, h: h_t });
        }
        caches
    }
}

impl Recurrent for LstmModel {
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
        model.b_f.fill(FORGET_BIAS);
        model.seed = seed;
        model
    }

    fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n_params());
        for m in [&self.w_f, &self.w_i, &self.w_c, &self.w_o] {
            p.extend_from_slice(m.as_slice());
        }
        for v in [&self.b_f, &self.b_i, &self.b_c, &self.b_o, &self.w_y] {
            p.extend_from_slice(v.as_slice());
        }
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
        for m in [&mut self.w_f, &mut self.w_i, &mut self.w_c, &mut self.w_o] {
            m.copy_from_slice(take(h * (h + 1)));
        }
        for v in [&mut self.b_f, &mut self.b_i, &mut self.b_c, &mut self.b_o, &mut self.w_y] {
            v.copy_from_slice(take(h));
        }
        self.b_y = take(1)[0];
    }

    fn n_params(&self) -> usize {
        let h = self.hidden;
        4 * h * (h + 1) + 5 * h + 1
    }

    fn forward_batch(&self, inputs: &DMatrix<f64>) -> DVector<f64> {
        let (w, b) = self.stacked();
        let caches = self.run(inputs, &w, &b);
        match caches.last() {
            Some(last) => last.h.tr_mul(&self.w_y).add_scalar(self.b_y),
            None => DVector::from_element(inputs.ncols(), self.b_y),
        }
    }

    fn bptt_gradients(&self, batch: &Batch) -> (f64, Self) {
        let h = self.hidden;
        let n = batch.len() as f64;
        let (w, b) = self.stacked();
        let caches = self.run(&batch.inputs, &w, &b);
        let mut g = Self::zeros(self.window, h);
        g.seed = self.seed;
        let Some(last) = caches.last() else {
            let err = DVector::from_element(batch.len(), self.b_y) - &batch.targets;
            g.b_y = 2.0 * err.sum() / n;
            return (err.norm_squared() / n, g);
        };
        let err = last.h.tr_mul(&self.w_y).add_scalar(self.b_y) - &batch.targets;
        let loss = err.norm_squared() / n;
        let dy = err * (2.0 / n);
        g.w_y = &last.h * &dy;
        g.b_y = dy.sum();

        let mut dw = DMatrix::<f64>::zeros(4 * h, h + 1);
        let mut db = DVector::<f64>::zeros(4 * h);
        let mut dh = &self.w_y * dy.transpose();
        let mut dc = DMatrix::<f64>::zeros(h, batch.len());
        let mut da = DMatrix::<f64>::zeros(4 * h, batch.len());
        for t in (0..caches.len()).rev() {
            let cache = &caches[t];
            for j in 0..batch.len() {
                for i in 0..h {
                    let f = cache.gates[(i, j)];
                    let ig = cache.gates[(h + i, j)];
                    let gt = cache.gates[(2 * h + i, j)];
                    let o = cache.gates[(3 * h + i, j)];
                    let tc = cache.tanh_c[(i, j)];
                    let c_prev = if t > 0 { caches[t - 1].c[(i, j)] } else { 0.0 };
                    let dht = dh[(i, j)];
                    let dct = dc[(i, j)] + dht * o * (1.0 - tc * tc);
                    da[(i, j)] = dct * c_prev * f * (1.0 - f);
                    da[(h + i, j)] = dct * gt * ig * (1.0 - ig);
                    da[(2 * h + i, j)] = dct * ig * (1.0 - gt * gt);
                    da[(3 * h + i, j)] = dht * tc * o * (1.0 - o);
                    dc[(i, j)] = dct * f;
                }
            }
            dw.gemm(1.0, &da, &cache.z.transpose(), 1.0);
            db += da.column_sum();
            if t > 0 {
                let dz = w.tr_mul(&da);
                dh = dz.rows(0, h).into_owned();
            }
        }
        for (k, (wm, bv)) in [(&mut g.w_f, &mut g.b_f), (&mut g.w_i, &mut g.b_i), (&mut g.w_c, &mut g.b_c), (&mut g.w_o, &mut g.b_o)]
            .into_iter()
            .enumerate()
        {
            wm.copy_from(&dw.rows(k * h, h));
            bv.copy_from(&db.rows(k * h, h));
        }
        (loss, g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::make_windows;

    /// Scalar evaluation of the gate equations, independent of the batched
    /// matrix code.
    fn naive_step(m: &LstmModel, h_prev: &[f64], c_prev: &[f64], x: f64) -> (Vec<f64>, Vec<f64>) {
        let hd = m.hidden;
        let affine = |w: &DMatrix<f64>, b: &DVector<f64>, r: usize| {
            let mut a = b[r] + w[(r, hd)] * x;
            for k in 0..hd {
                a += w[(r, k)] * h_prev[k];
            }
            a
        };
        let logistic = |a: f64| 1.0 / (1.0 + (-a).exp());
        let mut h = vec![0.0; hd];
        let mut c = vec![0.0; hd];
        for r in 0..hd {
            let f = logistic(affine(&m.w_f, &m.b_f, r));
            let i = logistic(affine(&m.w_i, &m.b_i, r));
            let g = affine(&m.w_c, &m.b_c, r).tanh();
            let o = logistic(affine(&m.w_o, &m.b_o, r));
            c[r] = f * c_prev[r] + i * g;
            h[r] = o * c[r].tanh();
        }
        (h, c)
    }

    fn scaled_init(window: usize, hidden: usize, seed: u64, factor: f64) -> LstmModel {
        let mut m = LstmModel::init(window, hidden, seed);
        let p: Vec<f64> = m.params().iter().map(|v| v * factor).collect();
        m.set_params(&p);
        m
    }

    #[test]
    fn zero_weights() {
        let m = LstmModel::zeros(1, 3);
        let s = lstm_cell_forward(&m, &DVector::zeros(3), &DVector::zeros(3), 0.7);
        assert!(s.f.iter().chain(s.i.iter()).chain(s.o.iter()).all(|&v| v == 0.5));
        assert!(s.c_tilde.iter().chain(s.c.iter()).chain(s.h.iter()).all(|&v| v == 0.0));
    }

    #[test]
    fn saturated_forget_gate_keeps_memory() {
        let mut m = LstmModel::zeros(1, 2);
        m.b_f.fill(20.0);
        let c_prev = DVector::from_vec(vec![3.5, -1.25]);
        let s = lstm_cell_forward(&m, &DVector::zeros(2), &c_prev, 0.4);
        assert!((&s.c - &c_prev).amax() < 1e-8);
    }

    #[test]
    fn cell_matches_naive_evaluator() {
        for seed in 0..10 {
            let m = scaled_init(1, 5, seed, 10.0);
            let h_prev: Vec<f64> = (0..5).map(|k| (k as f64 - 2.0) * 0.3).collect();
            let c_prev: Vec<f64> = (0..5).map(|k| k as f64 * 0.5 - 1.0).collect();
            let s = lstm_cell_forward(&m, &DVector::from_column_slice(&h_prev), &DVector::from_column_slice(&c_prev), 0.8);
            let (h, c) = naive_step(&m, &h_prev, &c_prev, 0.8);
            for r in 0..5 {
                assert!((s.h[r] - h[r]).abs() < 1e-12 && (s.c[r] - c[r]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn batch_matches_naive_evaluator() {
        for seed in 0..10 {
            let m = scaled_init(5, 4, seed, 10.0);
            let x: Vec<f64> = (0..15).map(|k| (k as f64 * 0.61 + seed as f64).cos()).collect();
            let windows = make_windows(&x, 5).unwrap();
            let out = m.forward_batch(&Batch::new(&windows).unwrap().inputs);
            for (k, win) in windows.iter().enumerate() {
                let (mut h, mut c) = (vec![0.0; 4], vec![0.0; 4]);
                for &v in &win.input {
                    (h, c) = naive_step(&m, &h, &c, v);
                }
                let y = m.b_y + (0..4).map(|r| m.w_y[r] * h[r]).sum::<f64>();
                assert!((out[k] - y).abs() < 1e-12);
                assert!(h.iter().all(|v| v.abs() <= 1.0));
            }
        }
    }

    #[test]
    fn init_sets_forget_bias() {
        let m = LstmModel::init(12, 32, 3);
        assert!(m.b_f.iter().all(|&b| b == FORGET_BIAS));
        assert!(m.w_f.iter().chain(m.w_o.iter()).all(|w| w.abs() <= INIT_SCALE));
        assert_eq!(m.params().len(), m.n_params());
        let mut copy = LstmModel::zeros(12, 32);
        copy.set_params(&m.params());
        copy.seed = 3;
        assert_eq!(copy, m);
    }

    #[test]
    fn zero_problem_has_zero_gradient() {
        let m = LstmModel::zeros(3, 4);
        let batch = Batch::new(&make_windows(&[0.5, -0.2, 0.9, 0.0, 0.3], 3).unwrap()).unwrap();
        let zero_targets = Batch { targets: DVector::zeros(batch.len()), ..batch };
        let (loss, g) = m.bptt_gradients(&zero_targets);
        assert_eq!(loss, 0.0);
        assert!(g.params().iter().all(|v| *v == 0.0));
    }
}
