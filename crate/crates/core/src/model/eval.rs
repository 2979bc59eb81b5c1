use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::encode::EncodedInstance;
use super::network::{forward, ForwardOutput};
use super::params::ModelParams;
use super::ModelConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Prediction {
    /// Inclusive token positions.
    Span(usize, usize),
    NoAnswer,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub token_f1: f64,
    pub exact: f64,
    pub count: usize,
}

/// Highest `start_i * end_j` over passage positions with
/// `i <= j <= i + max_answer_tokens`, or no-answer when the classifier says
/// so (head enabled) or the `(0, 0)` product wins (head disabled).
pub fn predict_span(output: &ForwardOutput, encoded: &EncodedInstance, config: &ModelConfig) -> Prediction {
    if config.answerability {
        if let Some(p) = output.possible_prob {
            if p < 0.5 {
                return Prediction::NoAnswer;
            }
        }
    }
    let (lo, hi) = encoded.passage_region;
    let hi = hi.min(output.start_probs.len());
    let mut best: Option<(f64, usize, usize)> = None;
    for i in lo..hi {
        let ps = output.start_probs[i];
        for j in i..hi.min(i + config.max_answer_tokens + 1) {
            let score = ps * output.end_probs[j];
            if best.is_none_or(|(b, _, _)| score > b) {
                best = Some((score, i, j));
            }
        }
    }
    match best {
        None => Prediction::NoAnswer,
        Some((score, i, j)) => {
            let null = output.start_probs[0] * output.end_probs[0];
            if !config.answerability && score < null {
                Prediction::NoAnswer
            } else {
                Prediction::Span(i, j)
            }
        }
    }
}

/// F1 of the multiset overlap between two token lists.
pub fn token_f1<S: AsRef<str>>(predicted: &[S], gold: &[S]) -> f64 {
    match (predicted.is_empty(), gold.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for g in gold {
        *counts.entry(g.as_ref()).or_default() += 1;
    }
    let mut overlap = 0;
    for p in predicted {
        if let Some(c) = counts.get_mut(p.as_ref()) {
            if *c > 0 {
                *c -= 1;
                overlap += 1;
            }
        }
    }
    if overlap == 0 {
        return 0.0;
    }
    let precision = overlap as f64 / predicted.len() as f64;
    let recall = overlap as f64 / gold.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// `(token F1, exact match)` of one prediction against the encoded target.
pub fn score_prediction(prediction: Prediction, encoded: &EncodedInstance) -> (f64, bool) {
    match (prediction, encoded.possible_target) {
        (Prediction::NoAnswer, false) => (1.0, true),
        (Prediction::NoAnswer, true) | (Prediction::Span(..), false) => (0.0, false),
        (Prediction::Span(i, j), true) => {
            let pred = &encoded.tokens[i..=j];
            let gold = &encoded.tokens[encoded.start_target..=encoded.end_target];
            (token_f1(pred, gold), pred == gold)
        }
    }
}

/// Aggregates already-made predictions, paired with `instances` by position.
pub fn score_predictions(predictions: &[Prediction], instances: &[EncodedInstance]) -> Result<EvalMetrics> {
    if instances.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    let (mut f1, mut exact) = (0.0, 0usize);
    for (p, e) in predictions.iter().zip(instances) {
        let (f, x) = score_prediction(*p, e);
        f1 += f;
        exact += x as usize;
    }
    let n = instances.len();
    Ok(EvalMetrics { token_f1: f1 / n as f64, exact: exact as f64 / n as f64, count: n })
}

pub fn predict_all(params: &ModelParams, instances: &[EncodedInstance], config: &ModelConfig) -> Result<Vec<Prediction>> {
    instances.iter().map(|e| Ok(predict_span(&forward(params, e, config)?, e, config))).collect()
}

pub fn evaluate(params: &ModelParams, instances: &[EncodedInstance], config: &ModelConfig) -> Result<EvalMetrics> {
    if instances.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    score_predictions(&predict_all(params, instances, config)?, instances)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{Array1, Array2};
    use proptest::prelude::*;

    fn output(start: Vec<f64>, end: Vec<f64>, possible: Option<f64>) -> ForwardOutput {
        let n = start.len();
        ForwardOutput {
            vectors: Array2::zeros((n, 1)),
            start_logits: Array1::zeros(n),
            end_logits: Array1::zeros(n),
            start_probs: start,
            end_probs: end,
            possible_logit: None,
            possible_prob: possible,
        }
    }

    fn encoded(tokens: &[&str], region: (usize, usize), target: Option<(usize, usize)>) -> EncodedInstance {
        EncodedInstance {
            instance_id: 0,
            token_ids: vec![5; tokens.len()],
            tokens: tokens.iter().map(|t| t.to_string()).collect(),
            passage_region: region,
            start_target: target.map_or(0, |t| t.0),
            end_target: target.map_or(0, |t| t.1),
            possible_target: target.is_some(),
            answer_truncated: false,
        }
    }

    fn one_hot(n: usize, i: usize) -> Vec<f64> {
        (0..n).map(|k| if k == i { 1.0 } else { 0.0 }).collect()
    }

    #[test]
    fn f1_examples() {
        assert_eq!(token_f1(&["a", "b"], &["a", "b"]), 1.0);
        assert_eq!(token_f1(&["a"], &["b"]), 0.0);
        assert!((token_f1(&["x", "y"], &["w", "x", "y", "z"]) - 2.0 / 3.0).abs() < 1e-12);
        let empty: [&str; 0] = [];
        assert_eq!(token_f1(&empty, &empty), 1.0);
        assert_eq!(token_f1(&empty, &["a"]), 0.0);
        assert_eq!(token_f1(&["a"], &empty), 0.0);
        // multiset, not set
        assert!((token_f1(&["a", "a"], &["a"]) - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn mass_at_cls_means_no_answer() {
        let cfg = ModelConfig::default();
        let e = encoded(&["[CLS]", "q", "[SEP]", "p1", "p2", "[SEP]"], (3, 5), None);
        let out = output(one_hot(6, 0), one_hot(6, 0), None);
        assert_eq!(predict_span(&out, &e, &cfg), Prediction::NoAnswer);
    }

    #[test]
    fn one_hot_single_token_span() {
        let cfg = ModelConfig::default();
        let e = encoded(&["[CLS]", "q", "[SEP]", "p1", "p2", "[SEP]"], (3, 5), Some((4, 4)));
        let out = output(one_hot(6, 4), one_hot(6, 4), None);
        assert_eq!(predict_span(&out, &e, &cfg), Prediction::Span(4, 4));
    }

    #[test]
    fn classifier_overrides_pointers() {
        let cfg = ModelConfig { answerability: true, ..Default::default() };
        let e = encoded(&["[CLS]", "q", "[SEP]", "p1", "p2", "[SEP]"], (3, 5), Some((4, 4)));
        let mut out = output(one_hot(6, 0), one_hot(6, 0), Some(0.7));
        assert_eq!(predict_span(&out, &e, &cfg), Prediction::Span(3, 3));
        out.possible_prob = Some(0.3);
        out.start_probs = one_hot(6, 4);
        out.end_probs = one_hot(6, 4);
        assert_eq!(predict_span(&out, &e, &cfg), Prediction::NoAnswer);
    }

    #[test]
    fn oracle_predictions_score_one() {
        let data = [
            encoded(&["[CLS]", "q", "[SEP]", "a", "b", "c", "[SEP]"], (3, 6), Some((4, 5))),
            encoded(&["[CLS]", "q", "[SEP]", "a", "[SEP]"], (3, 4), None),
        ];
        let oracle: Vec<_> = data
            .iter()
            .map(|e| if e.possible_target { Prediction::Span(e.start_target, e.end_target) } else { Prediction::NoAnswer })
            .collect();
        let m = score_predictions(&oracle, &data).unwrap();
        assert_eq!((m.token_f1, m.exact, m.count), (1.0, 1.0, 2));
        let wrong = [Prediction::Span(3, 4), Prediction::Span(3, 3)];
        let m = score_predictions(&wrong, &data).unwrap();
        assert!((m.token_f1 - 0.25).abs() < 1e-12);
        assert_eq!(m.exact, 0.0);
    }

    #[test]
    fn empty_evaluation_set() {
        assert!(matches!(score_predictions(&[], &[]), Err(Error::EmptyEvaluation)));
        let cfg = ModelConfig { hidden_dim: 4, heads: 1, ffn_dim: 4, max_seq: 8, layers: 1, ..Default::default() };
        let p = ModelParams::new(&cfg, 6);
        assert!(matches!(evaluate(&p, &[], &cfg), Err(Error::EmptyEvaluation)));
    }

    fn brute_force(out: &ForwardOutput, e: &EncodedInstance, cfg: &ModelConfig) -> Prediction {
        let (lo, hi) = e.passage_region;
        let pairs = (0..out.start_probs.len()).flat_map(|i| (0..out.start_probs.len()).map(move |j| (i, j)));
        let best = pairs
            .filter(|&(i, j)| lo <= i && j < hi && i <= j && j <= i + cfg.max_answer_tokens)
            .map(|(i, j)| (out.start_probs[i] * out.end_probs[j], i, j))
            .fold(None, |acc: Option<(f64, usize, usize)>, c| match acc {
                Some(a) if a.0 >= c.0 => Some(a),
                _ => Some(c),
            });
        match best {
            Some((s, i, j)) if s >= out.start_probs[0] * out.end_probs[0] => Prediction::Span(i, j),
            _ => Prediction::NoAnswer,
        }
    }

    proptest! {
        #[test]
        fn matches_exhaustive_search(
            raw in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 4..=16),
            lo_frac in 0.0f64..1.0,
            max_answer in 0usize..6,
        ) {
            let n = raw.len();
            let lo = 1 + ((n - 2) as f64 * lo_frac) as usize;
            let norm = |v: Vec<f64>| { let s: f64 = v.iter().sum::<f64>() + 1e-9; v.into_iter().map(|x| x / s).collect::<Vec<_>>() };
            let out = output(norm(raw.iter().map(|r| r.0).collect()), norm(raw.iter().map(|r| r.1).collect()), None);
            let tokens = vec!["t"; n];
            let e = encoded(&tokens, (lo, n - 1), None);
            let cfg = ModelConfig { max_answer_tokens: max_answer, ..Default::default() };
            prop_assert_eq!(predict_span(&out, &e, &cfg), brute_force(&out, &e, &cfg));
        }
    }
}
