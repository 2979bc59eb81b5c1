//! Span-selection instance assembly.
//!
//! For every corpus sentence: pick an answer term, blank it out, search the
//! passage index with the remaining words, and keep the first answer-bearing
//! result from another document. Queries without an answer-bearing result
//! become impossible instances (rank-1 passage) while the running impossible
//! fraction is below target, and are discarded otherwise.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    extend_answer_span, find_token_sequence, tokenize, Annotator, CandidateKind, CandidateSpan, HeuristicAnnotator, StopList,
    Token,
};
use crate::corpus::{extract_sentences_within, DocumentStore, Passage, SentenceCandidate};
use crate::error::{Error, Result};
use crate::index::{passages_digest, Bm25Params, InvertedIndex, ScoredPassage};

pub const BLANK: &str = "[BLANK]";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub top_k: usize,
    pub min_score: f64,
    pub impossible_target: f64,
    pub single_token_prob: f64,
    pub answer_len_bounds: (usize, usize),
    pub sentence_len_bounds: (usize, usize),
    pub passage_len_bounds: (usize, usize),
    pub rng_seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            top_k: 10,
            min_score: 25.0,
            impossible_target: 0.30,
            single_token_prob: 0.20,
            answer_len_bounds: (4, 30),
            sentence_len_bounds: (50, 250),
            passage_len_bounds: (300, 2000),
            rng_seed: 0,
        }
    }
}

impl GeneratorConfig {
    /// Heuristic annotator restricted to `answer_len_bounds`.
    pub fn annotator(&self, stop_list: StopList) -> HeuristicAnnotator {
        HeuristicAnnotator::new(stop_list).with_term_bounds(self.answer_len_bounds.0, self.answer_len_bounds.1)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.top_k == 0 {
            return bad("generator.top_k must be at least 1".into());
        }
        if !self.min_score.is_finite() {
            return bad("generator.min_score must be finite".into());
        }
        for (name, v) in [("impossible_target", self.impossible_target), ("single_token_prob", self.single_token_prob)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("generator.{name} must be in [0, 1], got {v}"));
            }
        }
        for (name, (lo, hi)) in [
            ("answer_len_bounds", self.answer_len_bounds),
            ("sentence_len_bounds", self.sentence_len_bounds),
            ("passage_len_bounds", self.passage_len_bounds),
        ] {
            if lo > hi {
                return bad(format!("generator.{name} must be ordered, got [{lo}, {hi}]"));
            }
        }
        if self.passage_len_bounds.0 == self.passage_len_bounds.1 {
            return bad("generator.passage_len_bounds must satisfy min < max".into());
        }
        Ok(())
    }
}

/// One query/passage pair. Offsets count chars of `passage`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanSelectionInstance {
    pub instance_id: u64,
    pub query: String,
    pub passage: String,
    pub answer_text: String,
    pub answer_start: Option<usize>,
    pub answer_end: Option<usize>,
    pub is_impossible: bool,
    pub score: f64,
    pub query_doc: String,
    pub passage_doc: String,
    /// The term originally blanked, before extension. Not serialized.
    #[serde(skip)]
    pub answer_term: String,
    #[serde(skip)]
    pub passage_id: Option<u32>,
}

/// A sentence with its tokens and answer-term candidates.
#[derive(Debug, Clone)]
pub struct AnnotatedSentence {
    pub sentence: SentenceCandidate,
    pub tokens: Vec<Token>,
    pub candidates: Vec<CandidateSpan>,
}

impl AnnotatedSentence {
    pub fn new(sentence: SentenceCandidate, annotator: &dyn Annotator) -> Self {
        let tokens = tokenize(&sentence.text);
        let candidates = annotator.annotate(&tokens);
        Self { sentence, tokens, candidates }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnswerTerm {
    pub kind: CandidateKind,
    /// Inclusive token range in the sentence.
    pub first: usize,
    pub last: usize,
    /// Char extent in the sentence.
    pub char_start: usize,
    pub char_end: usize,
    pub text: String,
}

impl AnswerTerm {
    pub fn normalized_tokens<'a>(&self, tokens: &'a [Token]) -> Vec<&'a str> {
        tokens[self.first..=self.last].iter().map(|t| t.normalized.as_str()).collect()
    }
}

/// Picks a single-token candidate with probability `single_token_prob`,
/// otherwise a phrase; falls back to the other pool when the chosen one is
/// empty.
pub fn select_answer_term<R: Rng + ?Sized>(
    sentence: &AnnotatedSentence,
    single_token_prob: f64,
    rng: &mut R,
) -> Option<AnswerTerm> {
    let (singles, phrases): (Vec<&CandidateSpan>, Vec<&CandidateSpan>) =
        sentence.candidates.iter().partition(|c| c.kind == CandidateKind::OpenClassToken);
    let want_single = rng.gen::<f64>() < single_token_prob;
    let pool = match (want_single, singles.is_empty(), phrases.is_empty()) {
        (_, true, true) => return None,
        (true, false, _) | (false, false, true) => &singles,
        _ => &phrases,
    };
    let c = pool[rng.gen_range(0..pool.len())];
    let (char_start, char_end) = c.char_range(&sentence.tokens);
    let text = sentence.sentence.text[sentence.tokens[c.first].byte_start..sentence.tokens[c.last].byte_end].to_string();
    Some(AnswerTerm { kind: c.kind, first: c.first, last: c.last, char_start, char_end, text })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedQuery {
    pub query: String,
    /// Normalized word terms of the sentence outside the blanked extent.
    pub bag: Vec<String>,
}

/// Replaces the char extent `[start, end)` of `text` with `[BLANK]`.
pub fn render_query(text: &str, tokens: &[Token], start: usize, end: usize) -> Result<RenderedQuery> {
    let len = text.chars().count();
    if start > end || end > len {
        return Err(Error::OutOfBounds { start, end, len });
    }
    let bounds = crate::text::char_boundaries(text);
    let (b0, b1) = (bounds[start], bounds[end]);
    let query = format!("{}{}{}", &text[..b0], BLANK, &text[b1..]);
    let bag = tokens
        .iter()
        .filter(|t| t.is_word() && (t.char_end <= start || t.char_start >= end))
        .map(|t| t.normalized.clone())
        .collect();
    Ok(RenderedQuery { query, bag })
}

/// Passage texts and tokens keyed by passage id.
pub struct PassageTable<'a> {
    passages: Vec<&'a Passage>,
    tokens: Vec<Vec<Token>>,
    by_id: HashMap<u32, usize>,
}

impl<'a> PassageTable<'a> {
    pub fn new(passages: &'a [Passage]) -> Self {
        let by_id = passages.iter().enumerate().map(|(i, p)| (p.passage_id, i)).collect();
        let tokens = passages.iter().map(|p| tokenize(&p.text)).collect();
        Self { passages: passages.iter().collect(), tokens, by_id }
    }

    pub fn get(&self, passage_id: u32) -> Option<(&'a Passage, &[Token])> {
        self.by_id.get(&passage_id).map(|&i| (self.passages[i], self.tokens[i].as_slice()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'a Passage, &[Token])> + '_ {
        self.passages.iter().copied().zip(self.tokens.iter().map(Vec::as_slice))
    }
}

/// First result, in rank order, whose tokens contain `term` contiguously,
/// with the inclusive token range of the first occurrence.
pub fn find_answer_bearing(
    results: &[ScoredPassage],
    term: &[&str],
    table: &PassageTable<'_>,
) -> Option<(ScoredPassage, (usize, usize))> {
    results.iter().find_map(|r| {
        let (_, tokens) = table.get(r.passage_id)?;
        find_token_sequence(tokens, term).map(|span| (*r, span))
    })
}

/// Running composition of emitted instances.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BalanceState {
    pub emitted: u64,
    pub impossible: u64,
}

impl BalanceState {
    pub fn impossible_fraction(&self) -> f64 {
        if self.emitted == 0 {
            0.0
        } else {
            self.impossible as f64 / self.emitted as f64
        }
    }

    fn record(&mut self, impossible: bool) {
        self.emitted += 1;
        self.impossible += impossible as u64;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiscardReason {
    NoCandidate,
    LowScore,
    Balance,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Assembled {
    Emit(Box<SpanSelectionInstance>),
    Discard(DiscardReason),
}

/// Builds a possible or impossible instance from search results, or decides
/// to discard the query. Updates `balance` when an instance is emitted.
#[allow(clippy::too_many_arguments)]
pub fn assemble_instance(
    sentence: &AnnotatedSentence,
    term: &AnswerTerm,
    results: &[ScoredPassage],
    table: &PassageTable<'_>,
    config: &GeneratorConfig,
    balance: &mut BalanceState,
    instance_id: u64,
) -> Result<Assembled> {
    let needle = term.normalized_tokens(&sentence.tokens);
    let text = &sentence.sentence.text;

    if let Some((hit, span)) = find_answer_bearing(results, &needle, table) {
        if hit.score >= config.min_score {
            let (passage, ptokens) = table.get(hit.passage_id).ok_or(Error::UnknownPassage(hit.passage_id))?;
            let ext = extend_answer_span(&sentence.tokens, (term.first, term.last), ptokens, span);
            let q_start = sentence.tokens[ext.query.0].char_start;
            let q_end = sentence.tokens[ext.query.1].char_end;
            let rendered = render_query(text, &sentence.tokens, q_start, q_end)?;
            let (a0, a1) = (&ptokens[ext.passage.0], &ptokens[ext.passage.1]);
            balance.record(false);
            return Ok(Assembled::Emit(Box::new(SpanSelectionInstance {
                instance_id,
                query: rendered.query,
                passage: passage.text.clone(),
                answer_text: passage.text[a0.byte_start..a1.byte_end].to_string(),
                answer_start: Some(a0.char_start),
                answer_end: Some(a1.char_end),
                is_impossible: false,
                score: hit.score,
                query_doc: sentence.sentence.doc_id.clone(),
                passage_doc: passage.doc_id.clone(),
                answer_term: term.text.clone(),
                passage_id: Some(passage.passage_id),
            })));
        }
    }

    let Some(top) = results.first().filter(|r| r.score >= config.min_score) else {
        return Ok(Assembled::Discard(DiscardReason::LowScore));
    };
    if balance.impossible_fraction() >= config.impossible_target {
        return Ok(Assembled::Discard(DiscardReason::Balance));
    }
    let (passage, ptokens) = table.get(top.passage_id).ok_or(Error::UnknownPassage(top.passage_id))?;
    debug_assert!(find_token_sequence(ptokens, &needle).is_none());
    let rendered = render_query(text, &sentence.tokens, term.char_start, term.char_end)?;
    balance.record(true);
    Ok(Assembled::Emit(Box::new(SpanSelectionInstance {
        instance_id,
        query: rendered.query,
        passage: passage.text.clone(),
        answer_text: String::new(),
        answer_start: None,
        answer_end: None,
        is_impossible: true,
        score: top.score,
        query_doc: sentence.sentence.doc_id.clone(),
        passage_doc: passage.doc_id.clone(),
        answer_term: term.text.clone(),
        passage_id: Some(passage.passage_id),
    })))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationReport {
    pub sentences: u64,
    pub emitted: u64,
    pub possible: u64,
    pub impossible: u64,
    pub discarded_no_candidate: u64,
    pub discarded_low_score: u64,
    pub discarded_balance: u64,
}

/// Runs the pipeline over every sentence of `store` in order, handing each
/// emitted instance to `sink`.
#[allow(clippy::too_many_arguments)]
pub fn generate_with<F>(
    store: &DocumentStore,
    passages: &[Passage],
    index: &InvertedIndex,
    config: &GeneratorConfig,
    bm25: &Bm25Params,
    annotator: &dyn Annotator,
    mut sink: F,
) -> Result<GenerationReport>
where
    F: FnMut(SpanSelectionInstance) -> Result<()>,
{
    config.validate()?;
    bm25.validate()?;
    if index.source_digest() != &passages_digest(passages) {
        return Err(Error::InvalidConfig("index was not built from these corpus passages".into()));
    }
    let table = PassageTable::new(passages);
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut balance = BalanceState::default();
    let mut report = GenerationReport::default();
    let (smin, smax) = config.sentence_len_bounds;

    for doc in store.iter() {
        for sentence in extract_sentences_within(doc, smin, smax) {
            report.sentences += 1;
            if sentence.text.contains(BLANK) {
                report.discarded_no_candidate += 1;
                continue;
            }
            let annotated = AnnotatedSentence::new(sentence, annotator);
            let Some(term) = select_answer_term(&annotated, config.single_token_prob, &mut rng) else {
                report.discarded_no_candidate += 1;
                continue;
            };
            let bag = render_query(&annotated.sentence.text, &annotated.tokens, term.char_start, term.char_end)?.bag;
            let results = index.search_top_k(&bag, config.top_k, Some(&doc.doc_id), bm25);
            match assemble_instance(&annotated, &term, &results, &table, config, &mut balance, report.emitted)? {
                Assembled::Emit(inst) => {
                    report.emitted += 1;
                    if inst.is_impossible {
                        report.impossible += 1;
                    } else {
                        report.possible += 1;
                    }
                    sink(*inst)?;
                }
                Assembled::Discard(DiscardReason::NoCandidate) => report.discarded_no_candidate += 1,
                Assembled::Discard(DiscardReason::LowScore) => report.discarded_low_score += 1,
                Assembled::Discard(DiscardReason::Balance) => report.discarded_balance += 1,
            }
        }
    }
    Ok(report)
}

pub fn generate(
    store: &DocumentStore,
    passages: &[Passage],
    index: &InvertedIndex,
    config: &GeneratorConfig,
    bm25: &Bm25Params,
    annotator: &dyn Annotator,
) -> Result<(Vec<SpanSelectionInstance>, GenerationReport)> {
    let mut out = Vec::new();
    let report = generate_with(store, passages, index, config, bm25, annotator, |i| {
        out.push(i);
        Ok(())
    })?;
    Ok((out, report))
}

pub fn write_instances<W: Write>(instances: &[SpanSelectionInstance], mut w: W) -> Result<()> {
    for inst in instances {
        serde_json::to_writer(&mut w, inst)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_instances<R: BufRead>(r: R) -> Result<Vec<SpanSelectionInstance>> {
    let mut out = Vec::new();
    for (index, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| Error::MalformedRecord { index, reason: e.to_string() })?,
        );
    }
    Ok(out)
}

/// Composition summary of a dataset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub instances: u64,
    pub possible: u64,
    pub impossible: u64,
    pub impossible_fraction: f64,
    pub mean_score: f64,
    pub mean_score_possible: f64,
    pub mean_score_impossible: f64,
    /// Answer length in chars, bucketed by powers of two ("4-7", "8-15", ...).
    pub answer_length_histogram: BTreeMap<String, u64>,
}

pub fn dataset_stats(instances: &[SpanSelectionInstance]) -> DatasetStats {
    let mean = |xs: &[f64]| if xs.is_empty() { 0.0 } else { xs.iter().sum::<f64>() / xs.len() as f64 };
    let scores: Vec<f64> = instances.iter().map(|i| i.score).collect();
    let pos: Vec<f64> = instances.iter().filter(|i| !i.is_impossible).map(|i| i.score).collect();
    let neg: Vec<f64> = instances.iter().filter(|i| i.is_impossible).map(|i| i.score).collect();
    let mut hist = BTreeMap::new();
    for inst in instances.iter().filter(|i| !i.is_impossible) {
        let len = inst.answer_text.chars().count().max(1);
        let lo = 1usize << (usize::BITS - 1 - len.leading_zeros());
        *hist.entry(format!("{:03}-{:03}", lo, 2 * lo - 1)).or_default() += 1;
    }
    DatasetStats {
        instances: instances.len() as u64,
        possible: pos.len() as u64,
        impossible: neg.len() as u64,
        impossible_fraction: if instances.is_empty() { 0.0 } else { neg.len() as f64 / instances.len() as f64 },
        mean_score: mean(&scores),
        mean_score_possible: mean(&pos),
        mean_score_impossible: mean(&neg),
        answer_length_histogram: hist,
    }
}
