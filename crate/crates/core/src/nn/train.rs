use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use super::model::{loss_and_grads, Example, Model};
use super::{NnError, Result};
use crate::rng::seeded;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub l2_lambda: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            l2_lambda: 1e-4,
            epochs: 50,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(NnError::InvalidConfig("learning_rate must be positive".into()));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(NnError::InvalidConfig(format!("{name} must lie in [0, 1)")));
            }
        }
        if !(self.epsilon > 0.0) || self.l2_lambda < 0.0 || !self.l2_lambda.is_finite() {
            return Err(NnError::InvalidConfig("epsilon must be positive and l2_lambda non-negative".into()));
        }
        if self.batch_size == 0 {
            return Err(NnError::InvalidConfig("batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Per-epoch summary. Accuracy is measured on the training passes
/// themselves, so dropout is active.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

/// Epoch-at-a-time trainer, for callers that want to stop early.
pub struct Trainer {
    model: Model,
    state: AdamState,
    cfg: TrainConfig,
    rng: ChaCha8Rng,
    history: Vec<EpochStats>,
}

impl Trainer {
    pub fn new(model: Model, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let state = AdamState::new(&model.params);
        let rng = seeded(cfg.seed);
        Ok(Self { model, state, cfg, rng, history: Vec::new() })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn history(&self) -> &[EpochStats] {
        &self.history
    }

    pub fn run_epoch(&mut self, data: &[Example]) -> Result<EpochStats> {
        if data.is_empty() {
            return Err(NnError::InvalidConfig("no training examples".into()));
        }
        let epoch = self.history.len();
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut self.rng);
        let (mut loss, mut correct) = (0.0, 0);
        for chunk in order.chunks(self.cfg.batch_size) {
            let batch: Vec<&Example> = chunk.iter().map(|&i| &data[i]).collect();
            let out = loss_and_grads(&self.model, &batch, self.cfg.l2_lambda, Some(&mut self.rng)).map_err(|e| match e {
                NnError::NonFiniteLoss { .. } => NnError::NonFiniteLoss { epoch },
                other => other,
            })?;
            loss += out.loss * batch.len() as f64;
            correct += out.correct;
            adam_step(&mut self.model.params, &out.grads, &mut self.state, &self.cfg)?;
        }
        if !self.model.params.all_finite() {
            return Err(NnError::NonFiniteLoss { epoch });
        }
        let stats = EpochStats { epoch, loss: loss / data.len() as f64, accuracy: correct as f64 / data.len() as f64 };
        self.history.push(stats);
        Ok(stats)
    }

    pub fn finish(self) -> (Model, Vec<EpochStats>) {
        (self.model, self.history)
    }
}

/// Runs `cfg.epochs` epochs of minibatch Adam.
pub fn train(model: Model, data: &[Example], cfg: &TrainConfig) -> Result<(Model, Vec<EpochStats>)> {
    let mut trainer = Trainer::new(model, cfg.clone())?;
    for _ in 0..cfg.epochs {
        let stats = trainer.run_epoch(data)?;
        log::debug!("epoch {} loss {:.5} acc {:.3}", stats.epoch, stats.loss, stats.accuracy);
    }
    Ok(trainer.finish())
}
