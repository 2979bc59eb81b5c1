//! Toy transformer encoder with a start/end pointer head and an optional
//! answerability classifier.
//!
//! The encoder reads `[CLS] query [SEP] passage [SEP]` over a whole-word
//! vocabulary. For every token vector `v_i` the pointer head produces
//! `softmax(w_start . v + b_start)` and the analogous end distribution;
//! the answerability head, when enabled, predicts
//! `sigmoid(w_cls . v_cls + b_cls)`. Impossible instances target position 0.

mod checkpoint;
mod encode;
mod eval;
mod experiment;
mod network;
mod params;
mod train;
mod vocab;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use encode::{encode_instance, encode_all, EncodeStats, EncodedInstance};
pub use eval::{evaluate, predict_all, predict_span, score_prediction, score_predictions, token_f1, EvalMetrics, Prediction};
pub use experiment::{unrelated_passage_experiment, SwapReport};
pub use network::{backward, batch_loss, batch_loss_and_gradients, compute_loss, forward, ForwardOutput};
pub use params::{AnswerabilityHead, LayerParams, ModelParams};
pub use train::{train, train_from, LossTrace, Optimizer, Trained};
pub use vocab::{build_vocab, model_tokens, Vocabulary, BLANK_ID, CLS_ID, PAD_ID, SEP_ID, SPECIALS, UNK_ID};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub hidden_dim: usize,
    pub layers: usize,
    pub heads: usize,
    pub ffn_dim: usize,
    pub max_seq: usize,
    /// Upper bound on vocabulary size, specials included.
    pub vocab_size: usize,
    pub answerability: bool,
    pub learn_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub optimizer: Optimizer,
    pub init_std: f64,
    pub max_answer_tokens: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 64,
            layers: 2,
            heads: 2,
            ffn_dim: 128,
            max_seq: 128,
            vocab_size: 8192,
            answerability: false,
            learn_rate: 5e-5,
            batch_size: 8,
            epochs: 3,
            optimizer: Optimizer::Sgd,
            init_std: 0.02,
            max_answer_tokens: 30,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.hidden_dim == 0 || self.heads == 0 || !self.hidden_dim.is_multiple_of(self.heads) {
            return bad(format!("model.hidden_dim ({}) must be a positive multiple of model.heads ({})", self.hidden_dim, self.heads));
        }
        if self.max_seq < 8 {
            return bad(format!("model.max_seq must be at least 8, got {}", self.max_seq));
        }
        if self.ffn_dim == 0 || self.batch_size == 0 {
            return bad("model.ffn_dim and model.batch_size must be positive".into());
        }
        if self.vocab_size < SPECIALS.len() {
            return bad(format!("model.vocab_size must be at least {}", SPECIALS.len()));
        }
        if !(self.learn_rate >= 0.0 && self.learn_rate.is_finite()) || !(self.init_std >= 0.0 && self.init_std.is_finite()) {
            return bad("model.learn_rate and model.init_std must be finite and non-negative".into());
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.hidden_dim / self.heads
    }
}
