//! Full-batch training with Adam and global gradient-norm clipping.

use serde::{Deserialize, Serialize};

use super::{Batch, NeuralError, Recurrent, Window};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Seed for weight initialization in [`fit`].
    pub seed: u64,
    pub clip_norm: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 200, learning_rate: 1e-3, seed: 0, clip_norm: 5.0, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NeuralError> {
        let bad = |msg: &str| Err(NeuralError::InvalidConfig(msg.into()));
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return bad("learning rate must be finite and non-negative");
        }
        if !(self.clip_norm > 0.0) {
            return bad("clip norm must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("moment decays must lie in [0, 1)");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        Ok(())
    }
}

/// First and second moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u32,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    /// Applies one bias-corrected update in place.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], cfg: &TrainConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t as i32);
        let c2 = 1.0 - cfg.beta2.powi(self.t as i32);
        for ((p, g), (m, v)) in params.iter_mut().zip(grad).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            *p -= cfg.learning_rate * (*m / c1) / ((*v / c2).sqrt() + cfg.epsilon);
        }
    }
}

/// Rescales `grad` so its Euclidean norm is at most `max_norm`. Returns the
/// norm before clipping.
pub fn clip_gradient(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= s);
    }
    norm
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome<M> {
    pub model: M,
    /// Loss at the start of each epoch, before that epoch's update.
    pub losses: Vec<f64>,
    /// Loss after the last update.
    pub final_loss: f64,
}

pub fn train<M: Recurrent>(mut model: M, windows: &[Window], cfg: &TrainConfig) -> Result<TrainOutcome<M>, NeuralError> {
    cfg.validate()?;
    let batch = Batch::new(windows)?;
    if batch.window() != model.window() {
        return Err(NeuralError::WindowMismatch { expected: model.window(), got: batch.window() });
    }
    let mut params = model.params();
    let mut adam = AdamState::new(params.len());
    let mut losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let (loss, grad) = model.bptt_gradients(&batch);
        let mut grad = grad.params();
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(NeuralError::DivergenceDetected { epoch });
        }
        losses.push(loss);
        clip_gradient(&mut grad, cfg.clip_norm);
        adam.step(&mut params, &grad, cfg);
        model.set_params(&params);
    }
    let final_loss = model.loss(&batch);
    if !final_loss.is_finite() {
        return Err(NeuralError::DivergenceDetected { epoch: cfg.epochs });
    }
    log::debug!("trained {} epochs, loss {:.3e} -> {final_loss:.3e}", cfg.epochs, losses[0]);
    Ok(TrainOutcome { model, losses, final_loss })
}

/// Initializes a network from `cfg.seed` and trains it.
pub fn fit<M: Recurrent>(windows: &[Window], hidden: usize, cfg: &TrainConfig) -> Result<TrainOutcome<M>, NeuralError> {
    let w = windows.first().ok_or(NeuralError::EmptyBatch)?.input.len();
    if hidden == 0 || w == 0 {
        return Err(NeuralError::InvalidConfig("window and hidden size must be at least 1".into()));
    }
    train(M::init(w, hidden, cfg.seed), windows, cfg)
}
