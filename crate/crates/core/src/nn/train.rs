use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::mlp::{grad_into, Workspace};
use super::{AdamState, MlpModel};
use crate::losses::LossKind;
use crate::math;
use crate::quasidata::WeightedDataset;
use crate::rng::Stream;
use crate::{Error, Result};

/// Mini-batch training settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Epochs without a new validation minimum before stopping.
    pub patience: usize,
    /// Maximum number of samples per epoch.
    pub epoch_cap: usize,
    pub seed: u64,
    pub max_epochs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            batch_size: 256,
            patience: 20,
            epoch_cap: 100_000,
            seed: 0,
            max_epochs: 10_000,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::Config(format!("learning rate {} must be finite and >= 0", self.learning_rate)));
        }
        if self.batch_size == 0 || self.patience == 0 || self.epoch_cap == 0 || self.max_epochs == 0 {
            return Err(Error::Config("batch_size, patience, epoch_cap and max_epochs must be positive".into()));
        }
        Ok(())
    }

    /// Samples drawn per epoch: `min(n, epoch_cap)`.
    pub fn epoch_len(&self, n: usize) -> usize {
        n.min(self.epoch_cap)
    }
}

/// Per-epoch losses of one training run. Epochs are numbered from 1, so the
/// loss of epoch `e` is at index `e - 1`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LossCurve {
    pub train: Vec<f64>,
    pub val: Vec<f64>,
    pub best_epoch: usize,
    pub stopped_epoch: usize,
}

impl LossCurve {
    pub fn best_val(&self) -> f64 {
        if self.best_epoch == 0 {
            f64::NAN
        } else {
            self.val[self.best_epoch - 1]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopVerdict {
    Improved,
    Continue,
    Stop,
}

/// Patience rule: stop once `patience` consecutive epochs fail to beat the
/// lowest validation loss seen so far.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    epoch: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping { patience, best: f64::INFINITY, best_epoch: 0, epoch: 0 }
    }

    /// Seed the rule with a baseline measured before the first epoch.
    pub fn with_baseline(patience: usize, baseline: f64) -> Self {
        EarlyStopping { patience, best: baseline, best_epoch: 0, epoch: 0 }
    }

    pub fn record(&mut self, val_loss: f64) -> StopVerdict {
        self.epoch += 1;
        if val_loss < self.best {
            self.best = val_loss;
            self.best_epoch = self.epoch;
            StopVerdict::Improved
        } else if self.epoch - self.best_epoch >= self.patience {
            StopVerdict::Stop
        } else {
            StopVerdict::Continue
        }
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn best(&self) -> f64 {
        self.best
    }
}

/// `(1/N) sum_i L(s(x_i), y_i, w_i)` over a whole dataset.
pub fn mean_loss(model: &MlpModel, data: &WeightedDataset, loss: &LossKind) -> f64 {
    let mut total = 0.0;
    let mut ws = Workspace::default();
    let chunk = 4096;
    let mut start = 0;
    while start < data.len() {
        let end = (start + chunk).min(data.len());
        let b = data.batch(start, end);
        let logits = model.forward_batch(b.x, end - start, &mut ws);
        for i in 0..end - start {
            total += loss.value(math::sigmoid(logits[i]), b.y[i], b.w[i]);
        }
        start = end;
    }
    total / data.len() as f64
}

/// Gathers shuffled rows into contiguous batch buffers.
#[derive(Default)]
pub(crate) struct BatchBuffer {
    pub x: Vec<f64>,
    pub y: Vec<u8>,
    pub w: Vec<f64>,
}

impl BatchBuffer {
    pub fn gather(&mut self, data: &WeightedDataset, rows: &[u32]) {
        self.x.clear();
        self.y.clear();
        self.w.clear();
        let (y, w) = (data.labels(), data.weights());
        for &r in rows {
            let r = r as usize;
            self.x.extend_from_slice(data.x(r));
            self.y.push(y[r]);
            self.w.push(w[r]);
        }
    }
}

pub(crate) fn check_data(model_dim: usize, train: &WeightedDataset, val: &WeightedDataset) -> Result<()> {
    if train.is_empty() || val.is_empty() {
        return Err(Error::Config("training and validation sets must be non-empty".into()));
    }
    if train.dim() != model_dim || val.dim() != model_dim {
        return Err(Error::Shape(format!(
            "model expects {model_dim} features, data has {} / {}",
            train.dim(),
            val.dim()
        )));
    }
    if train.len() > u32::MAX as usize {
        return Err(Error::Config("training set too large".into()));
    }
    Ok(())
}

/// Mini-batch Adam with validation early stopping.
///
/// Each epoch draws a fresh permutation of the training rows and uses its
/// first `min(n, epoch_cap)` entries. The returned model carries the
/// parameters of the epoch with the lowest validation loss.
pub fn train(
    mut model: MlpModel,
    train_set: &WeightedDataset,
    val_set: &WeightedDataset,
    config: &TrainConfig,
    loss: &LossKind,
) -> Result<(MlpModel, LossCurve)> {
    config.validate()?;
    check_data(model.input_dim(), train_set, val_set)?;
    let mut rng = Stream::new(config.seed);
    let mut order: Vec<u32> = (0..train_set.len() as u32).collect();
    let epoch_len = config.epoch_len(train_set.len());
    let mut adam = AdamState::new(model.n_params());
    let mut g = vec![0.0; model.n_params()];
    let mut ws = Workspace::default();
    let mut buf = BatchBuffer::default();
    let mut stopper = EarlyStopping::new(config.patience);
    let mut best = model.clone();
    let mut curve = LossCurve::default();

    for epoch in 1..=config.max_epochs {
        rng.shuffle(&mut order);
        let mut sum = 0.0;
        for (b, rows) in order[..epoch_len].chunks(config.batch_size).enumerate() {
            buf.gather(train_set, rows);
            g.iter_mut().for_each(|v| *v = 0.0);
            let batch = super::Batch { x: &buf.x, y: &buf.y, w: &buf.w };
            let value = grad_into(&model, batch, loss, &mut ws, &mut g)?;
            if !value.is_finite() || g.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!("non-finite loss at epoch {epoch}, batch {b}")));
            }
            adam.update(model.params_mut(), &g, config.learning_rate)?;
            sum += value * rows.len() as f64;
        }
        curve.train.push(sum / epoch_len as f64);
        let v = mean_loss(&model, val_set, loss);
        if !v.is_finite() {
            return Err(Error::Numeric(format!("non-finite validation loss at epoch {epoch}")));
        }
        curve.val.push(v);
        curve.stopped_epoch = epoch;
        match stopper.record(v) {
            StopVerdict::Improved => best.clone_from(&model),
            StopVerdict::Stop => break,
            StopVerdict::Continue => {}
        }
    }
    curve.best_epoch = stopper.best_epoch();
    Ok((best, curve))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quasidata::Source;

    #[test]
    fn early_stopping_on_increasing_losses() {
        let mut es = EarlyStopping::new(20);
        let mut stop = 0;
        for e in 1..=100 {
            if es.record(e as f64) == StopVerdict::Stop {
                stop = e;
                break;
            }
        }
        assert_eq!(stop, 21);
        assert_eq!(es.best_epoch(), 1);
    }

    #[test]
    fn early_stopping_resets_on_improvement() {
        let mut es = EarlyStopping::new(2);
        assert_eq!(es.record(5.0), StopVerdict::Improved);
        assert_eq!(es.record(6.0), StopVerdict::Continue);
        assert_eq!(es.record(4.0), StopVerdict::Improved);
        assert_eq!(es.record(4.0), StopVerdict::Continue);
        assert_eq!(es.record(4.5), StopVerdict::Stop);
        assert_eq!(es.best_epoch(), 3);
        let mut base = EarlyStopping::with_baseline(1, 1.0);
        assert_eq!(base.record(2.0), StopVerdict::Stop);
        assert_eq!(base.best_epoch(), 0);
    }

    /// Two unit-variance Gaussians at -1 and +1, labelled 0 and 1.
    fn gaussians(n: usize, seed: u64) -> WeightedDataset {
        let mut rng = Stream::new(seed);
        let mut d = WeightedDataset::new(1, Source::External, Some(seed));
        for i in 0..n {
            let y = (i % 2) as u8;
            let u1 = 1.0 - rng.uniform();
            let u2 = rng.uniform();
            let z = math::sqrt(-2.0 * math::ln(u1)) * math::cos(core::f64::consts::TAU * u2);
            d.push(&[z + if y == 1 { 1.0 } else { -1.0 }], 1.0, y).unwrap();
        }
        d
    }

    #[test]
    fn config_validation() {
        let mut c = TrainConfig::default();
        assert!(c.validate().is_ok());
        c.batch_size = 0;
        assert!(c.validate().is_err());
        assert_eq!(TrainConfig::default().epoch_len(50), 50);
        assert_eq!(TrainConfig::default().epoch_len(500_000), 100_000);
    }

    #[test]
    fn learns_the_analytic_optimal_classifier() {
        let tr = gaussians(20_000, 1);
        let va = gaussians(4_000, 2);
        let cfg = TrainConfig { learning_rate: 3e-3, patience: 5, max_epochs: 200, seed: 3, ..Default::default() };
        let (m, curve) = train(MlpModel::init(&[1, 16, 16, 1], 4).unwrap(), &tr, &va, &cfg, &LossKind::Bce).unwrap();
        assert!(curve.stopped_epoch - curve.best_epoch <= cfg.patience);
        assert_eq!(curve.best_val(), curve.val.iter().cloned().fold(f64::INFINITY, f64::min));
        assert!((mean_loss(&m, &va, &LossKind::Bce) - curve.best_val()).abs() < 1e-12);
        // p1/(p0+p1) = sigmoid(2x) for these Gaussians; central 90% mass is ~|x| < 2.64
        for k in 0..=20 {
            let x = -2.6 + 0.26 * k as f64;
            let s = m.forward(&[x]).unwrap();
            let opt = math::sigmoid(2.0 * x);
            assert!((s - opt).abs() < 0.05, "x={x} s={s} opt={opt}");
        }
    }

    #[test]
    fn training_is_deterministic() {
        let tr = gaussians(2_000, 5);
        let va = gaussians(500, 6);
        let cfg = TrainConfig { learning_rate: 1e-3, patience: 3, max_epochs: 15, seed: 9, ..Default::default() };
        let run = || train(MlpModel::init(&[1, 8, 1], 1).unwrap(), &tr, &va, &cfg, &LossKind::Bce).unwrap();
        let (a, ca) = run();
        let (b, cb) = run();
        assert_eq!(a, b);
        assert_eq!(ca, cb);
    }

    #[test]
    fn rejects_empty_or_mismatched_data() {
        let tr = gaussians(10, 1);
        let empty = WeightedDataset::new(1, Source::External, None);
        let m = MlpModel::init(&[1, 2, 1], 0).unwrap();
        assert!(train(m.clone(), &tr, &empty, &TrainConfig::default(), &LossKind::Bce).is_err());
        let m2 = MlpModel::init(&[2, 2, 1], 0).unwrap();
        assert!(matches!(train(m2, &tr, &tr, &TrainConfig::default(), &LossKind::Bce), Err(Error::Shape(_))));
    }
}
