//! Related versus unrelated passage comparison: each possible instance is
//! re-posed with a random answer-bearing passage drawn from a third document,
//! and the trained reader is scored on both variants.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{find_token_sequence, tokenize};
use crate::corpus::Passage;
use crate::error::Result;
use crate::generator::{PassageTable, SpanSelectionInstance};
use crate::index::InvertedIndex;
use crate::text::char_slice;

use super::encode::{encode_instance, EncodedInstance};
use super::eval::{evaluate, EvalMetrics};
use super::params::ModelParams;
use super::vocab::Vocabulary;
use super::ModelConfig;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SwapReport {
    pub related: EvalMetrics,
    pub unrelated: EvalMetrics,
    pub pairs: usize,
    /// Possible instances whose answer was cut by truncation in the original pairing.
    pub skipped_truncated: usize,
    /// Possible instances with no usable passage from a third document.
    pub skipped_no_replacement: usize,
    /// Set when no pair could be formed; both metrics then cover 0 instances.
    pub insufficient: bool,
}

/// Replacement candidates for `answer` outside `exclude`, ascending by id.
fn candidates(answer: &[&str], exclude: [&str; 2], index: &InvertedIndex, table: &PassageTable<'_>) -> Vec<u32> {
    // Narrow by the rarest indexed word of the answer, then verify the full sequence.
    let Some(pivot) = answer
        .iter()
        .filter(|w| w.chars().any(char::is_alphanumeric))
        .min_by_key(|w| index.document_frequency(w))
    else {
        return Vec::new();
    };
    let mut ids: Vec<u32> = index
        .postings(pivot)
        .map(|(id, _)| id)
        .filter(|&id| index.doc_of(id).is_some_and(|d| !exclude.contains(&d)))
        .filter(|&id| table.get(id).is_some_and(|(_, toks)| find_token_sequence(toks, answer).is_some()))
        .collect();
    ids.sort_unstable();
    ids
}

fn repose(inst: &SpanSelectionInstance, passage: &Passage, span: (usize, usize), tokens: &[crate::analysis::Token]) -> SpanSelectionInstance {
    let start = tokens[span.0].char_start;
    let end = tokens[span.1].char_end;
    SpanSelectionInstance {
        passage: passage.text.clone(),
        answer_text: char_slice(&passage.text, start, end).unwrap_or_default().to_string(),
        answer_start: Some(start),
        answer_end: Some(end),
        passage_doc: passage.doc_id.clone(),
        passage_id: Some(passage.passage_id),
        score: 0.0,
        ..inst.clone()
    }
}

#[allow(clippy::too_many_arguments)]
pub fn unrelated_passage_experiment(
    params: &ModelParams,
    config: &ModelConfig,
    vocab: &Vocabulary,
    instances: &[SpanSelectionInstance],
    passages: &[Passage],
    index: &InvertedIndex,
    seed: u64,
) -> Result<SwapReport> {
    let table = PassageTable::new(passages);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SwapReport::default();
    let mut related: Vec<EncodedInstance> = Vec::new();
    let mut unrelated: Vec<EncodedInstance> = Vec::new();

    for inst in instances.iter().filter(|i| !i.is_impossible) {
        let original = encode_instance(inst, vocab, config)?;
        if !original.possible_target {
            report.skipped_truncated += 1;
            continue;
        }
        let answer_tokens = tokenize(&inst.answer_text);
        let answer: Vec<&str> = answer_tokens.iter().map(|t| t.normalized.as_str()).collect();
        let mut pool = candidates(&answer, [&inst.query_doc, &inst.passage_doc], index, &table);
        pool.shuffle(&mut rng);
        let replacement = pool.into_iter().find_map(|id| {
            let (passage, toks) = table.get(id)?;
            let span = find_token_sequence(toks, &answer)?;
            let swapped = repose(inst, passage, span, toks);
            match encode_instance(&swapped, vocab, config) {
                Ok(e) if e.possible_target => Some(Ok(e)),
                Ok(_) => None,
                Err(err) => Some(Err(err)),
            }
        });
        match replacement {
            Some(e) => {
                related.push(original);
                unrelated.push(e?);
            }
            None => report.skipped_no_replacement += 1,
        }
    }

    report.pairs = related.len();
    if related.is_empty() {
        report.insufficient = true;
        return Ok(report);
    }
    report.related = evaluate(params, &related, config)?;
    report.unrelated = evaluate(params, &unrelated, config)?;
    log::info!(
        "swap experiment: {} pairs, related f1 {:.4}, unrelated f1 {:.4}",
        report.pairs,
        report.related.token_f1,
        report.unrelated.token_f1
    );
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_vocab;

    fn passage(id: u32, doc: &str, text: &str) -> Passage {
        Passage { passage_id: id, doc_id: doc.into(), text: text.into(), char_offset: 0 }
    }

    fn instance(passage: &Passage, answer: &str) -> SpanSelectionInstance {
        let start = passage.text.find(answer).unwrap();
        SpanSelectionInstance {
            instance_id: 7,
            query: "the river [BLANK] floods".into(),
            passage: passage.text.clone(),
            answer_text: answer.into(),
            answer_start: Some(start),
            answer_end: Some(start + answer.len()),
            is_impossible: false,
            score: 30.0,
            query_doc: "q".into(),
            passage_doc: passage.doc_id.clone(),
            answer_term: answer.into(),
            passage_id: Some(passage.passage_id),
        }
    }

    fn config() -> ModelConfig {
        ModelConfig { hidden_dim: 8, layers: 1, heads: 2, ffn_dim: 8, max_seq: 32, ..Default::default() }
    }

    #[test]
    fn replacement_comes_from_a_third_document() {
        let ps = vec![
            passage(0, "q", "the Varo River floods each spring"),
            passage(1, "a", "boats on the Varo River carry grain"),
            passage(2, "a", "the Varo River is long"),
            passage(3, "b", "a bridge crosses the Varo River near town"),
            passage(4, "c", "nothing relevant lives here"),
        ];
        let index = InvertedIndex::build(&ps).unwrap();
        let table = PassageTable::new(&ps);
        let found = candidates(&["varo", "river"], ["q", "a"], &index, &table);
        assert_eq!(found, vec![3]);

        let inst = instance(&ps[1], "Varo River");
        let vocab = build_vocab(std::slice::from_ref(&inst), 100);
        let params = ModelParams::new(&config(), vocab.len());
        let r = unrelated_passage_experiment(&params, &config(), &vocab, &[inst], &ps, &index, 1).unwrap();
        assert_eq!((r.pairs, r.skipped_no_replacement, r.insufficient), (1, 0, false));
        assert_eq!(r.related.count, 1);
    }

    #[test]
    fn no_replacement_is_flagged() {
        let ps = vec![passage(0, "a", "the Varo River is long"), passage(1, "b", "a different text entirely")];
        let index = InvertedIndex::build(&ps).unwrap();
        let inst = instance(&ps[0], "Varo River");
        let vocab = build_vocab(std::slice::from_ref(&inst), 100);
        let params = ModelParams::new(&config(), vocab.len());
        let r = unrelated_passage_experiment(&params, &config(), &vocab, &[inst], &ps, &index, 1).unwrap();
        assert!(r.insufficient);
        assert_eq!((r.pairs, r.skipped_no_replacement, r.unrelated.count), (0, 1, 0));
    }
}
