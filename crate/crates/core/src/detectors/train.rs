//! Adam training loop with validation early stopping.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureTensor;
use crate::geometry::Hypothesis;

use super::cnn::{Network, Scalar};
use super::model::{CnnModel, InputNorm};

/// Samples per gradient work unit. Fixed so the floating-point reduction
/// order does not depend on the number of worker threads.
const GRAD_CHUNK: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a new best validation accuracy before stopping.
    pub patience: usize,
    pub shuffle_seed: u64,
    /// Fit an input normalization on the training inputs.
    #[serde(default = "yes")]
    pub standardize_inputs: bool,
}

fn yes() -> bool {
    true
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 32,
            max_epochs: 30,
            patience: 5,
            shuffle_seed: 0,
            standardize_inputs: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0
            && self.batch_size > 0
            && self.max_epochs > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid training configuration {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LabeledTensor<'a> {
    pub x: &'a FeatureTensor,
    pub label: Hypothesis,
}

impl LabeledTensor<'_> {
    fn target(&self) -> f32 {
        if self.label.is_h1() {
            1.0
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean of the per-batch losses seen during the epoch.
    pub train_loss: f64,
    pub validation_accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: CnnModel,
    /// Training-set loss of the initial weights.
    pub initial_loss: f64,
    pub history: Vec<EpochStats>,
    /// Epoch whose weights were kept (1-based; 0 means none improved).
    pub best_epoch: usize,
}

impl TrainOutcome {
    pub fn final_loss(&self) -> f64 {
        self.history.last().map_or(self.initial_loss, |s| s.train_loss)
    }
}

/// Sum of per-sample gradients and losses over `batch`.
pub fn batch_gradient<T: Scalar>(net: &Network<T>, batch: &[(&[T], T)]) -> (Vec<Vec<T>>, T) {
    let parts: Vec<_> = batch
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let mut g = net.zero_grads();
            let mut loss = T::zero();
            for (x, y) in chunk {
                loss = loss + net.accumulate_gradient(x, *y, &mut g);
            }
            (g, loss)
        })
        .collect();
    let mut it = parts.into_iter();
    let (mut grads, mut loss) = it.next().unwrap_or_else(|| (net.zero_grads(), T::zero()));
    for (g, l) in it {
        for (acc, part) in grads.iter_mut().zip(&g) {
            for (a, p) in acc.iter_mut().zip(part) {
                *a = *a + *p;
            }
        }
        loss = loss + l;
    }
    (grads, loss)
}

/// Adam state bound to one model.
pub struct Trainer {
    pub model: CnnModel,
    m: Vec<Vec<f32>>,
    v: Vec<Vec<f32>>,
    t: i32,
    epoch: usize,
    batch: usize,
}

impl Trainer {
    pub fn new(model: CnnModel) -> Result<Self> {
        model.config.validate()?;
        let m = model.net.zero_grads();
        let v = model.net.zero_grads();
        Ok(Self {
            model,
            m,
            v,
            t: 0,
            epoch: 0,
            batch: 0,
        })
    }

    /// One Adam step on the mean loss over `batch`. Returns that loss.
    pub fn step(&mut self, batch: &[LabeledTensor]) -> Result<f64> {
        let inputs = batch.iter().map(|s| self.model.prepare(s.x)).collect::<Result<Vec<_>>>()?;
        let pairs: Vec<(&[f32], f32)> = inputs.iter().zip(batch).map(|(x, s)| (x.as_ref(), s.target())).collect();
        self.step_prepared(&pairs)
    }

    /// As [`Trainer::step`] on inputs that are already normalized.
    fn step_prepared(&mut self, pairs: &[(&[f32], f32)]) -> Result<f64> {
        let (grads, loss) = batch_gradient(&self.model.net, pairs);
        let n = pairs.len().max(1) as f32;
        let loss = loss as f64 / n as f64;
        if !loss.is_finite() || grads.iter().flatten().any(|g| !g.is_finite()) {
            return Err(Error::Divergence {
                epoch: self.epoch,
                batch: self.batch,
                last_good: Box::new(self.model.clone()),
            });
        }
        let cfg = &self.model.config;
        self.t += 1;
        let (b1, b2) = (cfg.beta1 as f32, cfg.beta2 as f32);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        let step = cfg.learning_rate as f32 / c1;
        let eps = cfg.epsilon as f32;
        for (li, layer) in self.model.net.layers.iter_mut().enumerate() {
            let (m, v) = (&mut self.m[li], &mut self.v[li]);
            for (((p, g), mi), vi) in layer.params_mut().iter_mut().zip(&grads[li]).zip(m.iter_mut()).zip(v.iter_mut()) {
                let g = *g / n;
                *mi = b1 * *mi + (1.0 - b1) * g;
                *vi = b2 * *vi + (1.0 - b2) * g * g;
                *p -= step * *mi / ((*vi / c2).sqrt() + eps);
            }
        }
        self.batch += 1;
        Ok(loss)
    }
}

/// Mean cross-entropy of `model` over `samples`.
pub fn dataset_loss(model: &CnnModel, samples: &[LabeledTensor]) -> Result<f64> {
    let losses = samples
        .par_iter()
        .map(|s| Ok(super::cnn::bce_with_logit(model.logit(s.x)? as f64, s.target() as f64)))
        .collect::<Result<Vec<f64>>>()?;
    let total: f64 = losses.iter().sum();
    Ok(total / samples.len().max(1) as f64)
}

/// Fraction of `samples` whose decision matches the label.
pub fn accuracy(model: &CnnModel, samples: &[LabeledTensor]) -> Result<f64> {
    let hits = samples
        .par_iter()
        .map(|s| Ok((model.logit(s.x)? >= 0.0) == s.label.is_h1()))
        .collect::<Result<Vec<bool>>>()?;
    let correct = hits.iter().filter(|h| **h).count();
    Ok(correct as f64 / samples.len().max(1) as f64)
}

/// Trains with the model's own configuration. With a validation set the
/// weights of the best validation epoch are returned and training stops
/// after `patience` epochs without improvement; otherwise all epochs run.
pub fn cnn_train(model: CnnModel, train: &[LabeledTensor], validation: &[LabeledTensor]) -> Result<TrainOutcome> {
    if train.is_empty() {
        return Err(Error::Config("empty training set".into()));
    }
    let mut model = model;
    if model.config.standardize_inputs {
        for s in train {
            model.check_input(s.x)?;
        }
        model.input_norm = Some(InputNorm::fit(train.iter().map(|s| s.x.data.as_slice())));
    }
    let initial_loss = dataset_loss(&model, train)?;
    let cfg = model.config.clone();
    let prepared = train.iter().map(|s| model.prepare(s.x).map(|x| x.into_owned())).collect::<Result<Vec<_>>>()?;
    let mut trainer = Trainer::new(model)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.shuffle_seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::new();
    let mut best: Option<(f64, usize, CnnModel)> = None;
    let mut stale = 0;

    for epoch in 1..=cfg.max_epochs {
        trainer.epoch = epoch;
        trainer.batch = 0;
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0;
        for idx in order.chunks(cfg.batch_size) {
            let batch: Vec<(&[f32], f32)> = idx.iter().map(|&i| (prepared[i].as_slice(), train[i].target())).collect();
            loss_sum += trainer.step_prepared(&batch)?;
            batches += 1;
        }
        let validation_accuracy = if validation.is_empty() {
            None
        } else {
            Some(accuracy(&trainer.model, validation)?)
        };
        history.push(EpochStats {
            epoch,
            train_loss: loss_sum / batches as f64,
            validation_accuracy,
        });
        if let Some(acc) = validation_accuracy {
            if best.as_ref().is_none_or(|(b, _, _)| acc > *b) {
                best = Some((acc, epoch, trainer.model.clone()));
                stale = 0;
            } else {
                stale += 1;
                if stale >= cfg.patience {
                    break;
                }
            }
        }
    }

    let last_epoch = history.len();
    let (model, best_epoch) = match best {
        Some((_, e, m)) => (m, e),
        None => (trainer.model, last_epoch),
    };
    Ok(TrainOutcome {
        model,
        initial_loss,
        history,
        best_epoch,
    })
}
