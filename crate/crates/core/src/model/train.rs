use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::encode::EncodedInstance;
use super::network::batch_loss_and_gradients;
use super::params::ModelParams;
use super::ModelConfig;

/// Parameter update rule.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    /// Plain mini-batch gradient descent.
    #[default]
    Sgd,
    /// Adam with beta1 0.9, beta2 0.999, eps 1e-8 and no weight decay.
    Adam,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossTrace {
    /// `(step, mean batch loss)` for every update, steps counted from 1.
    pub steps: Vec<(usize, f64)>,
    /// Mean loss over each epoch's batches.
    pub epochs: Vec<f64>,
}

impl LossTrace {
    /// One `step,loss` line per update.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (step, loss) in &self.steps {
            writeln!(out, "{step},{loss}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub params: ModelParams,
    pub trace: LossTrace,
}

struct AdamState {
    m: ModelParams,
    v: ModelParams,
    t: i32,
}

impl AdamState {
    fn step(&mut self, params: &mut ModelParams, grads: &ModelParams, lr: f64) {
        self.t += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.t);
        let c2 = 1.0 - ADAM_BETA2.powi(self.t);
        let tensors = params.tensors_mut().into_iter().zip(grads.tensors());
        let moments = self.m.tensors_mut().into_iter().zip(self.v.tensors_mut());
        for (((_, p), (_, g)), ((_, m), (_, v))) in tensors.zip(moments) {
            for i in 0..p.len() {
                m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g[i];
                v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g[i] * g[i];
                p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + ADAM_EPS);
            }
        }
    }
}

/// Trains from a seeded initialization for `config.epochs` passes over
/// `data`, reshuffled each epoch.
pub fn train(data: &[EncodedInstance], vocab_size: usize, config: &ModelConfig, seed: u64) -> Result<Trained> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = ModelParams::init(config, vocab_size, &mut rng);
    train_from(params, data, config, &mut rng)
}

/// Continues training `params`; `rng` drives the batch order.
pub fn train_from(
    mut params: ModelParams,
    data: &[EncodedInstance],
    config: &ModelConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Trained> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidConfig("training needs at least one instance".into()));
    }
    let mut adam = (config.optimizer == Optimizer::Adam)
        .then(|| AdamState { m: params.zeros_like(), v: params.zeros_like(), t: 0 });
    let mut trace = LossTrace::default();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut step = 0;
    for epoch in 0..config.epochs {
        order.shuffle(rng);
        let mut epoch_total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<EncodedInstance> = chunk.iter().map(|&i| data[i].clone()).collect();
            let (loss, grads) = batch_loss_and_gradients(&params, &batch, config)?;
            step += 1;
            trace.steps.push((step, loss));
            if !loss.is_finite() {
                return Err(Error::Diverged { step, loss, trace: trace.steps });
            }
            match &mut adam {
                Some(state) => state.step(&mut params, &grads, config.learn_rate),
                None => params.add_scaled(&grads, -config.learn_rate),
            }
            epoch_total += loss;
            batches += 1;
        }
        let mean = epoch_total / batches as f64;
        log::info!("epoch {} mean loss {mean:.4} over {batches} batches", epoch + 1);
        trace.epochs.push(mean);
    }
    if !params.all_finite() {
        return Err(Error::NonFinite("trained parameters".into()));
    }
    Ok(Trained { params, trace })
}
