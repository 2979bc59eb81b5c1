use crate::analysis::tokenize;
use crate::error::{Error, Result};
use crate::generator::SpanSelectionInstance;

use super::vocab::{model_tokens, Vocabulary, CLS_ID, PAD_ID, SEP_ID};
use super::ModelConfig;

/// Model input `[CLS] q [SEP] p [SEP]` padded to `max_seq`, with token-level
/// targets. Impossible instances target position 0 for start and end.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedInstance {
    pub instance_id: u64,
    pub token_ids: Vec<u32>,
    /// Normalized token strings of the non-pad positions.
    pub tokens: Vec<String>,
    /// Half-open range of passage positions.
    pub passage_region: (usize, usize),
    pub start_target: usize,
    pub end_target: usize,
    pub possible_target: bool,
    /// The instance had an answer but truncation cut it off.
    pub answer_truncated: bool,
}

impl EncodedInstance {
    /// Number of non-pad positions.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EncodeStats {
    pub encoded: usize,
    pub truncated_answers: usize,
}

pub fn encode_instance(inst: &SpanSelectionInstance, vocab: &Vocabulary, config: &ModelConfig) -> Result<EncodedInstance> {
    let s = config.max_seq;
    let mut query = model_tokens(&inst.query);
    query.truncate(s.saturating_sub(4));
    let passage = tokenize(&inst.passage);
    let keep = passage.len().min(s - query.len() - 3);

    let offset = query.len() + 2;
    let mut targets = (0, 0, false, false);
    if let (false, Some(a0), Some(a1)) = (inst.is_impossible, inst.answer_start, inst.answer_end) {
        let misaligned = Error::Misaligned { instance_id: inst.instance_id, start: a0, end: a1 };
        let i = passage.iter().position(|t| t.char_start == a0).ok_or(misaligned)?;
        let j = passage[i..]
            .iter()
            .position(|t| t.char_end == a1)
            .map(|k| i + k)
            .ok_or(Error::Misaligned { instance_id: inst.instance_id, start: a0, end: a1 })?;
        targets = if j < keep { (offset + i, offset + j, true, false) } else { (0, 0, false, true) };
    }

    let mut tokens = Vec::with_capacity(query.len() + keep + 3);
    tokens.push("[CLS]".to_string());
    tokens.extend(query);
    tokens.push("[SEP]".to_string());
    tokens.extend(passage.into_iter().take(keep).map(|t| t.normalized));
    tokens.push("[SEP]".to_string());

    let mut token_ids: Vec<u32> = tokens.iter().map(|t| vocab.id(t)).collect();
    token_ids[0] = CLS_ID;
    token_ids[offset - 1] = SEP_ID;
    *token_ids.last_mut().unwrap() = SEP_ID;
    token_ids.resize(s, PAD_ID);

    Ok(EncodedInstance {
        instance_id: inst.instance_id,
        token_ids,
        tokens,
        passage_region: (offset, offset + keep),
        start_target: targets.0,
        end_target: targets.1,
        possible_target: targets.2,
        answer_truncated: targets.3,
    })
}

pub fn encode_all(
    instances: &[SpanSelectionInstance],
    vocab: &Vocabulary,
    config: &ModelConfig,
) -> Result<(Vec<EncodedInstance>, EncodeStats)> {
    let mut stats = EncodeStats::default();
    let mut out = Vec::with_capacity(instances.len());
    for inst in instances {
        let e = encode_instance(inst, vocab, config)?;
        stats.encoded += 1;
        stats.truncated_answers += e.answer_truncated as usize;
        out.push(e);
    }
    Ok((out, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::vocab::{build_vocab, BLANK_ID};

    fn inst(query: &str, passage: &str, answer: Option<(usize, usize)>) -> SpanSelectionInstance {
        SpanSelectionInstance {
            instance_id: 42,
            query: query.into(),
            passage: passage.into(),
            answer_text: answer.map(|(a, b)| passage.chars().skip(a).take(b - a).collect()).unwrap_or_default(),
            answer_start: answer.map(|a| a.0),
            answer_end: answer.map(|a| a.1),
            is_impossible: answer.is_none(),
            score: 30.0,
            query_doc: "q".into(),
            passage_doc: "p".into(),
            answer_term: String::new(),
            passage_id: None,
        }
    }

    fn config(max_seq: usize) -> ModelConfig {
        ModelConfig { max_seq, ..Default::default() }
    }

    #[test]
    fn impossible_targets_cls() {
        let i = inst("a poem by [BLANK] .", "nothing here at all", None);
        let v = build_vocab(std::slice::from_ref(&i), 100);
        let e = encode_instance(&i, &v, &config(32)).unwrap();
        assert_eq!((e.start_target, e.end_target, e.possible_target), (0, 0, false));
        assert_eq!(e.token_ids.len(), 32);
        assert_eq!(e.token_ids[0], CLS_ID);
        assert_eq!(e.token_ids[4], BLANK_ID);
        assert_eq!(e.token_ids[6], SEP_ID);
        assert_eq!(e.passage_region, (7, 11));
        assert_eq!(e.token_ids[11], SEP_ID);
        assert!(e.token_ids[12..].iter().all(|&t| t == PAD_ID));
    }

    #[test]
    fn single_token_answer() {
        let i = inst("written by [BLANK]", "the poet Pound wrote it", Some((9, 14)));
        let v = build_vocab(std::slice::from_ref(&i), 100);
        let e = encode_instance(&i, &v, &config(32)).unwrap();
        assert!(e.possible_target);
        assert_eq!(e.start_target, e.end_target);
        assert!(e.passage_region.0 <= e.start_target && e.start_target < e.passage_region.1);
        assert_eq!(e.tokens[e.start_target], "pound");
    }

    #[test]
    fn truncated_answer_becomes_impossible() {
        let passage = format!("{} Pound", "word ".repeat(20).trim_end());
        let start = passage.chars().count() - 5;
        let i = inst("by [BLANK]", &passage, Some((start, start + 5)));
        let v = build_vocab(std::slice::from_ref(&i), 100);
        let (es, stats) = encode_all(std::slice::from_ref(&i), &v, &config(16)).unwrap();
        let e = &es[0];
        assert_eq!(e.len(), 16);
        assert!(!e.possible_target && e.answer_truncated);
        assert_eq!((e.start_target, e.end_target), (0, 0));
        assert_eq!(stats.truncated_answers, 1);
    }

    #[test]
    fn misaligned_offsets_rejected() {
        let i = inst("by [BLANK]", "the poet Pound wrote", Some((10, 14)));
        let v = build_vocab(std::slice::from_ref(&i), 100);
        let err = encode_instance(&i, &v, &config(32)).unwrap_err();
        assert!(matches!(err, Error::Misaligned { instance_id: 42, .. }));
    }
}
