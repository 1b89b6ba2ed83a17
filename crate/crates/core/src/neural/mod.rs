//! Recurrent forecasters trained from scratch: an Elman RNN and a single
//! layer LSTM, each mapping a window of `w` lagged values to the next value
//! through a linear output head on the last hidden state.
//!
//! Forward and backward passes run on the whole batch at once (one column
//! per window), so every time step is a handful of matrix products.

mod lstm;
mod rnn;
mod train;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use lstm::{lstm_cell_forward, LstmModel, LstmStep};
pub use rnn::{rnn_cell_forward, RnnModel};
pub use train::{clip_gradient, fit, train, AdamState, TrainConfig, TrainOutcome};

/// Half-width of the uniform initialization interval.
pub const INIT_SCALE: f64 = 0.08;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NeuralError {
    #[error("need more than {needed} values, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("loss became non-finite at epoch {epoch}")]
    DivergenceDetected { epoch: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("window of length {got} does not match model window {expected}")]
    WindowMismatch { expected: usize, got: usize },
    #[error("empty batch")]
    EmptyBatch,
}

/// One supervised example: `w` consecutive values and the value after them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub input: Vec<f64>,
    pub target: f64,
}

/// All `n - w` windows of `x`, in order of their start index.
pub fn make_windows(x: &[f64], w: usize) -> Result<Vec<Window>, NeuralError> {
    if w == 0 {
        return Err(NeuralError::InvalidConfig("window must be at least 1".into()));
    }
    if x.len() <= w {
        return Err(NeuralError::TooShort { needed: w, got: x.len() });
    }
    Ok(x.windows(w + 1)
        .map(|s| Window { input: s[..w].to_vec(), target: s[w] })
        .collect())
}

/// Windows packed column-wise: `inputs` is `w × B`, `targets` has length `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub inputs: DMatrix<f64>,
    pub targets: DVector<f64>,
}

impl Batch {
    pub fn new(windows: &[Window]) -> Result<Self, NeuralError> {
        let first = windows.first().ok_or(NeuralError::EmptyBatch)?;
        let w = first.input.len();
        if let Some(bad) = windows.iter().find(|win| win.input.len() != w) {
            return Err(NeuralError::WindowMismatch { expected: w, got: bad.input.len() });
        }
        let inputs = DMatrix::from_fn(w, windows.len(), |t, b| windows[b].input[t]);
        let targets = DVector::from_iterator(windows.len(), windows.iter().map(|win| win.target));
        Ok(Self { inputs, targets })
    }

    pub fn window(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn len(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Behaviour shared by the two network types, used by the optimizer and the
/// predictor.
pub trait Recurrent: Clone {
    fn window(&self) -> usize;
    fn hidden(&self) -> usize;
    /// Randomly initialized network.
    fn init(window: usize, hidden: usize, seed: u64) -> Self;
    /// All weights and biases in a fixed order.
    fn params(&self) -> Vec<f64>;
    fn set_params(&mut self, params: &[f64]);
    /// One prediction per column of `inputs` (`w × B`).
    fn forward_batch(&self, inputs: &DMatrix<f64>) -> DVector<f64>;
    /// Mean squared error over the batch and its exact gradient, returned as
    /// a network of the same shape.
    fn bptt_gradients(&self, batch: &Batch) -> (f64, Self);

    fn n_params(&self) -> usize {
        self.params().len()
    }

    fn loss(&self, batch: &Batch) -> f64 {
        let pred = self.forward_batch(&batch.inputs);
        (pred - &batch.targets).norm_squared() / batch.len() as f64
    }

    fn predict_one(&self, window: &[f64]) -> f64 {
        let inputs = DMatrix::from_column_slice(window.len(), 1, window);
        self.forward_batch(&inputs)[0]
    }
}

/// How multi-step forecasts obtain their lagged inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HorizonMode {
    /// Each step sees the actual values up to the previous month.
    #[default]
    RollingOneStep,
    /// Each step feeds back the model's own earlier outputs.
    Recursive,
}

impl std::str::FromStr for HorizonMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "rolling_one_step" | "rolling" => Ok(Self::RollingOneStep),
            "recursive" => Ok(Self::Recursive),
            other => Err(format!("unknown horizon mode {other:?} (expected rolling_one_step or recursive)")),
        }
    }
}

impl std::fmt::Display for HorizonMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::RollingOneStep => "rolling_one_step",
            Self::Recursive => "recursive",
        })
    }
}

/// Forecasts the `horizon` values following `history`. Rolling mode reads
/// the realized values from `actuals`, which must cover all but the last
/// step; recursive mode ignores it.
pub fn predict<M: Recurrent>(
    model: &M,
    history: &[f64],
    actuals: &[f64],
    horizon: usize,
    mode: HorizonMode,
) -> Result<Vec<f64>, NeuralError> {
    let w = model.window();
    if history.len() < w {
        return Err(NeuralError::TooShort { needed: w - 1, got: history.len() });
    }
    if horizon == 0 {
        return Ok(Vec::new());
    }
    match mode {
        HorizonMode::RollingOneStep => {
            if actuals.len() + 1 < horizon {
                return Err(NeuralError::TooShort { needed: horizon - 2, got: actuals.len() });
            }
            let mut path = history[history.len() - w..].to_vec();
            path.extend_from_slice(&actuals[..horizon - 1]);
            let inputs = DMatrix::from_fn(w, horizon, |t, b| path[b + t]);
            Ok(model.forward_batch(&inputs).iter().copied().collect())
        }
        HorizonMode::Recursive => {
            let mut path = history[history.len() - w..].to_vec();
            let mut out = Vec::with_capacity(horizon);
            for step in 0..horizon {
                let next = model.predict_one(&path[step..step + w]);
                out.push(next);
                path.push(next);
            }
            Ok(out)
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Largest relative deviation between the analytic gradient and central
    /// differences of the loss; components below `floor` compare absolutely.
    fn max_rel_error<M: Recurrent>(model: &M, batch: &Batch) -> f64 {
        let step = 1e-5;
        let floor = 1e-6;
        let grad = model.bptt_gradients(batch).1.params();
        let base = model.params();
        let mut worst: f64 = 0.0;
        for k in 0..base.len() {
            let mut probe = model.clone();
            let mut p = base.clone();
            p[k] = base[k] + step;
            probe.set_params(&p);
            let up = probe.loss(batch);
            p[k] = base[k] - step;
            probe.set_params(&p);
            let down = probe.loss(batch);
            let numeric = (up - down) / (2.0 * step);
            let err = (grad[k] - numeric).abs() / grad[k].abs().max(numeric.abs()).max(floor);
            worst = worst.max(err);
        }
        worst
    }

    fn check_instance<M: Recurrent>(seed: u64) -> f64 {
        let mut model = M::init(5, 4, seed);
        let p: Vec<f64> = model.params().iter().map(|v| v * 6.0).collect();
        model.set_params(&p);
        let x: Vec<f64> = (0..14).map(|k| ((k as u64 * 2654435761 + seed * 97) % 1000) as f64 / 500.0 - 1.0).collect();
        max_rel_error(&model, &Batch::new(&make_windows(&x, 5).unwrap()).unwrap())
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..10 {
            let rnn = check_instance::<RnnModel>(seed);
            let lstm = check_instance::<LstmModel>(seed);
            assert!(rnn <= 1e-4 && lstm <= 1e-4, "seed {seed}: rnn {rnn:e}, lstm {lstm:e}");
        }
    }

    #[test]
    fn duplicated_batch_keeps_gradient() {
        let m = LstmModel::init(3, 3, 5);
        let windows = make_windows(&[0.2, 0.4, 0.1, 0.9, 0.3, 0.7], 3).unwrap();
        let (l1, g1) = m.bptt_gradients(&Batch::new(&windows).unwrap());
        let (l2, g2) = m.bptt_gradients(&Batch::new(&[windows.clone(), windows].concat()).unwrap());
        assert!((l1 - l2).abs() < 1e-15);
        for (a, b) in g1.params().iter().zip(g2.params()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn windows() {
        let w = make_windows(&[1.0, 2.0, 3.0, 4.0], 2).unwrap();
        assert_eq!(
            w,
            vec![
                Window { input: vec![1.0, 2.0], target: 3.0 },
                Window { input: vec![2.0, 3.0], target: 4.0 }
            ]
        );
        assert!(matches!(make_windows(&[0.0; 5], 5), Err(NeuralError::TooShort { .. })));
        let x: Vec<f64> = (0..288).map(f64::from).collect();
        assert_eq!(make_windows(&x, 12).unwrap().len(), 276);
    }

    #[test]
    fn batch_layout() {
        let b = Batch::new(&make_windows(&[1.0, 2.0, 3.0, 4.0, 5.0], 3).unwrap()).unwrap();
        assert_eq!(b.inputs.shape(), (3, 2));
        assert_eq!(b.inputs[(2, 1)], 4.0);
        assert_eq!(b.targets.as_slice(), &[4.0, 5.0]);
        assert_eq!(Batch::new(&[]), Err(NeuralError::EmptyBatch));
    }

    #[test]
    fn horizon_mode_parsing() {
        assert_eq!("rolling_one_step".parse::<HorizonMode>(), Ok(HorizonMode::RollingOneStep));
        assert_eq!("recursive".parse::<HorizonMode>(), Ok(HorizonMode::Recursive));
        assert!("direct".parse::<HorizonMode>().is_err());
        assert_eq!(HorizonMode::default().to_string(), "rolling_one_step");
    }

    #[test]
    fn predict_edge_cases() {
        let m = RnnModel::init(3, 2, 1);
        assert_eq!(predict(&m, &[1.0, 2.0, 3.0], &[], 0, HorizonMode::Recursive).unwrap(), Vec::<f64>::new());
        assert!(matches!(predict(&m, &[1.0, 2.0], &[], 1, HorizonMode::Recursive), Err(NeuralError::TooShort { .. })));
        assert!(predict(&m, &[1.0, 2.0, 3.0], &[4.0], 3, HorizonMode::RollingOneStep).is_err());
    }

    #[test]
    fn rolling_uses_actuals() {
        let m = LstmModel::init(3, 4, 9);
        let hist = [0.1, 0.2, 0.3];
        let actuals = [0.4, 0.5];
        let out = predict(&m, &hist, &actuals, 3, HorizonMode::RollingOneStep).unwrap();
        assert_eq!(out[0], m.predict_one(&[0.1, 0.2, 0.3]));
        assert_eq!(out[2], m.predict_one(&[0.3, 0.4, 0.5]));
        let rec = predict(&m, &hist, &[], 2, HorizonMode::Recursive).unwrap();
        assert_eq!(rec[0], out[0]);
        assert_eq!(rec[1], m.predict_one(&[0.2, 0.3, rec[0]]));
    }
}
