//! Tokenization, sentence boundaries, answer-term candidates and answer
//! extension.
//!
//! Everything here is pure and deterministic. Offsets are in Unicode scalar
//! values; byte offsets are carried alongside for cheap slicing.

use std::collections::HashSet;
use std::path::Path;

use crate::corpus::SentenceCandidate;
use crate::error::{Error, Result};

/// Default closed-class stop list shipped with the crate.
pub const DEFAULT_STOP_LIST: &str = include_str!("../data/stopwords.txt");

/// Answer terms must be between these many characters (inclusive).
pub const MIN_TERM_CHARS: usize = 4;
pub const MAX_TERM_CHARS: usize = 30;

/// Lowercase words allowed inside a capitalized phrase ("Bay of Sorrel").
const PHRASE_CONNECTORS: [&str; 3] = ["of", "the", "de"];

/// Tokens before a period that do not end a sentence.
const ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "mt", "ft", "gen", "col", "capt", "lt",
    "gov", "rev", "hon", "vs", "etc", "e.g", "i.e", "approx", "no", "vol", "fig", "jan", "feb",
    "mar", "apr", "aug", "sept", "sep", "oct", "nov", "dec", "inc", "ltd", "co", "corp", "ca",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub normalized: String,
    pub char_start: usize,
    pub char_end: usize,
    pub byte_start: usize,
    pub byte_end: usize,
}

impl Token {
    /// True for alphanumeric runs; false for punctuation tokens.
    pub fn is_word(&self) -> bool {
        self.surface.chars().next().is_some_and(char::is_alphanumeric)
    }

    pub fn is_alphabetic(&self) -> bool {
        self.surface.chars().all(char::is_alphabetic)
    }

    pub fn is_numeric(&self) -> bool {
        self.surface.chars().all(char::is_numeric)
    }

    pub fn is_capitalized(&self) -> bool {
        self.surface.chars().next().is_some_and(char::is_uppercase)
    }

    pub fn char_len(&self) -> usize {
        self.char_end - self.char_start
    }
}

/// Splits text into maximal alphanumeric runs and single punctuation marks.
/// Whitespace separates tokens and is never part of one.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    // (byte_start, char_start) of the alphanumeric run in progress
    let mut run: Option<(usize, usize)> = None;
    let mut char_pos = 0;

    let close_run = |run: &mut Option<(usize, usize)>, byte_end: usize, char_end: usize, tokens: &mut Vec<Token>| {
        if let Some((b0, c0)) = run.take() {
            let surface = &text[b0..byte_end];
            tokens.push(Token {
                surface: surface.to_string(),
                normalized: surface.to_lowercase(),
                char_start: c0,
                char_end,
                byte_start: b0,
                byte_end,
            });
        }
    };

    for (b, c) in text.char_indices() {
        if c.is_alphanumeric() {
            if run.is_none() {
                run = Some((b, char_pos));
            }
        } else {
            close_run(&mut run, b, char_pos, &mut tokens);
            if !c.is_whitespace() {
                let surface = c.to_string();
                tokens.push(Token {
                    normalized: surface.to_lowercase(),
                    surface,
                    char_start: char_pos,
                    char_end: char_pos + 1,
                    byte_start: b,
                    byte_end: b + c.len_utf8(),
                });
            }
        }
        char_pos += 1;
    }
    close_run(&mut run, text.len(), char_pos, &mut tokens);
    tokens
}

/// Normalized forms of the word tokens in `text`, in order. These are the
/// terms the retrieval index sees.
pub fn index_terms(text: &str) -> Vec<String> {
    tokenize(text).into_iter().filter(Token::is_word).map(|t| t.normalized).collect()
}

/// A span of text in both char and byte coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TextSpan {
    pub char_start: usize,
    pub char_end: usize,
    pub byte_start: usize,
    pub byte_end: usize,
}

impl TextSpan {
    pub fn char_len(&self) -> usize {
        self.char_end - self.char_start
    }

    pub fn slice<'a>(&self, text: &'a str) -> &'a str {
        &text[self.byte_start..self.byte_end]
    }
}

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

fn is_closing(c: char) -> bool {
    matches!(c, '"' | '\'' | '”' | '’' | ')' | ']')
}

fn is_opening_quote(c: char) -> bool {
    matches!(c, '"' | '\'' | '“' | '‘' | '(')
}

/// Rule-based sentence splitter.
///
/// A sentence ends at a newline, or at `.`, `!` or `?` (plus any closing
/// quotes or brackets) followed by whitespace and then an uppercase letter or
/// an opening quote, or by the end of the text. A period after a known
/// abbreviation or a single capital initial is not a boundary.
pub fn split_sentences(text: &str) -> Vec<TextSpan> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let n = chars.len();
    let byte_at = |i: usize| if i < n { chars[i].0 } else { text.len() };

    let mut spans = Vec::new();
    let push = |start: usize, end: usize, spans: &mut Vec<TextSpan>| {
        let mut s = start;
        let mut e = end;
        while s < e && chars[s].1.is_whitespace() {
            s += 1;
        }
        while e > s && chars[e - 1].1.is_whitespace() {
            e -= 1;
        }
        if s < e {
            spans.push(TextSpan { char_start: s, char_end: e, byte_start: byte_at(s), byte_end: byte_at(e) });
        }
    };

    let mut start = 0;
    let mut i = 0;
    while i < n {
        let c = chars[i].1;
        if c == '\n' {
            push(start, i, &mut spans);
            start = i + 1;
            i += 1;
            continue;
        }
        if is_terminal(c) {
            let mut j = i + 1;
            while j < n && (is_terminal(chars[j].1) || is_closing(chars[j].1)) {
                j += 1;
            }
            let boundary = if j >= n {
                true
            } else if chars[j].1.is_whitespace() {
                let mut k = j;
                while k < n && chars[k].1.is_whitespace() && chars[k].1 != '\n' {
                    k += 1;
                }
                k >= n
                    || chars[k].1 == '\n'
                    || ((chars[k].1.is_uppercase() || is_opening_quote(chars[k].1))
                        && !(c == '.' && j == i + 1 && is_abbreviation(&chars[..i])))
            } else {
                false
            };
            if boundary {
                push(start, j, &mut spans);
                start = j;
            }
            i = j;
            continue;
        }
        i += 1;
    }
    push(start, n, &mut spans);
    spans
}

/// Whether the word ending right before a period is an abbreviation or an
/// initial.
fn is_abbreviation(before: &[(usize, char)]) -> bool {
    let mut k = before.len();
    while k > 0 && (before[k - 1].1.is_alphanumeric() || before[k - 1].1 == '.') {
        k -= 1;
    }
    let word: String = before[k..].iter().map(|&(_, c)| c).collect();
    if word.is_empty() {
        return false;
    }
    let mut cs = word.chars();
    if let (Some(first), None) = (cs.next(), cs.next()) {
        if first.is_uppercase() {
            return true;
        }
    }
    let lower = word.to_lowercase();
    ABBREVIATIONS.contains(&lower.as_str())
}

/// Closed-class terms that never become single-token answer candidates.
#[derive(Debug, Clone, Default)]
pub struct StopList {
    terms: HashSet<String>,
}

impl StopList {
    /// One term per line; blank lines and `#` comments ignored.
    pub fn parse(source: &str) -> Self {
        let terms = source
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        StopList { terms }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let source = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&source))
    }

    pub fn builtin() -> Self {
        Self::parse(DEFAULT_STOP_LIST)
    }

    pub fn contains(&self, normalized: &str) -> bool {
        self.terms.contains(normalized)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CandidateKind {
    /// A single open-class token.
    OpenClassToken,
    /// A capitalized or numeric run standing in for a noun phrase or entity.
    Phrase,
}

/// A possible answer term, as an inclusive token range into the tokens of
/// the sentence it came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CandidateSpan {
    pub first: usize,
    pub last: usize,
    pub kind: CandidateKind,
    pub char_len: usize,
}

impl CandidateSpan {
    /// Char range of the span relative to the tokenized text.
    pub fn char_range(&self, tokens: &[Token]) -> (usize, usize) {
        (tokens[self.first].char_start, tokens[self.last].char_end)
    }
}

/// Source of answer-term candidates for a tokenized sentence.
pub trait Annotator {
    fn annotate(&self, tokens: &[Token]) -> Vec<CandidateSpan>;
}

/// Stop-list and capitalization heuristics standing in for a POS tagger and
/// an entity recognizer.
#[derive(Debug, Clone)]
pub struct HeuristicAnnotator {
    pub stop_list: StopList,
    /// Inclusive char-length bounds for a candidate.
    pub term_chars: (usize, usize),
}

impl HeuristicAnnotator {
    pub fn new(stop_list: StopList) -> Self {
        Self { stop_list, term_chars: (MIN_TERM_CHARS, MAX_TERM_CHARS) }
    }

    pub fn with_term_bounds(mut self, min_chars: usize, max_chars: usize) -> Self {
        self.term_chars = (min_chars, max_chars);
        self
    }

    fn within_bounds(&self, len: usize) -> bool {
        (self.term_chars.0..=self.term_chars.1).contains(&len)
    }

    fn is_phrase_token(&self, t: &Token) -> bool {
        t.is_numeric() || (t.is_capitalized() && t.is_alphabetic() && !self.stop_list.contains(&t.normalized))
    }
}

impl Annotator for HeuristicAnnotator {
    fn annotate(&self, tokens: &[Token]) -> Vec<CandidateSpan> {
        let mut out = Vec::new();
        for (i, t) in tokens.iter().enumerate() {
            if (t.is_alphabetic() || t.is_numeric())
                && t.is_word()
                && !self.stop_list.contains(&t.normalized)
                && self.within_bounds(t.char_len())
            {
                out.push(CandidateSpan { first: i, last: i, kind: CandidateKind::OpenClassToken, char_len: t.char_len() });
            }
        }

        let mut i = 0;
        while i < tokens.len() {
            if !self.is_phrase_token(&tokens[i]) {
                i += 1;
                continue;
            }
            let first = i;
            let mut last = i;
            let mut j = i + 1;
            loop {
                let mut k = j;
                while k < tokens.len() && PHRASE_CONNECTORS.contains(&tokens[k].surface.as_str()) {
                    k += 1;
                }
                if k < tokens.len() && self.is_phrase_token(&tokens[k]) {
                    last = k;
                    j = k + 1;
                } else {
                    break;
                }
            }
            let len = tokens[last].char_end - tokens[first].char_start;
            if self.within_bounds(len) {
                out.push(CandidateSpan { first, last, kind: CandidateKind::Phrase, char_len: len });
            }
            i = last + 1;
        }
        out
    }
}

/// Candidates for a corpus sentence with the heuristic annotator.
pub fn annotate_candidates(sentence: &SentenceCandidate, stop_list: &StopList) -> Vec<CandidateSpan> {
    let tokens = tokenize(&sentence.text);
    HeuristicAnnotator::new(stop_list.clone()).annotate(&tokens)
}

/// Result of growing an answer over context shared by query and passage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Extension {
    /// Inclusive token range of the answer in the passage.
    pub passage: (usize, usize),
    /// Inclusive token range of the blank in the query.
    pub query: (usize, usize),
}

/// Grows the answer span while the tokens just outside it match the tokens
/// just outside the blank in the query (case-insensitive). Leftward first,
/// then rightward; each step consumes one token on both sides.
pub fn extend_answer_span(
    query_tokens: &[Token],
    blank: (usize, usize),
    passage_tokens: &[Token],
    answer: (usize, usize),
) -> Extension {
    let (mut q0, mut q1) = blank;
    let (mut p0, mut p1) = answer;
    while q0 > 0 && p0 > 0 && query_tokens[q0 - 1].normalized == passage_tokens[p0 - 1].normalized {
        q0 -= 1;
        p0 -= 1;
    }
    while q1 + 1 < query_tokens.len()
        && p1 + 1 < passage_tokens.len()
        && query_tokens[q1 + 1].normalized == passage_tokens[p1 + 1].normalized
    {
        q1 += 1;
        p1 += 1;
    }
    Extension { passage: (p0, p1), query: (q0, q1) }
}

/// Finds the first contiguous occurrence of `needle` (normalized forms) in
/// `hay`, returning its inclusive token range.
pub fn find_token_sequence(hay: &[Token], needle: &[&str]) -> Option<(usize, usize)> {
    if needle.is_empty() || needle.len() > hay.len() {
        return None;
    }
    (0..=hay.len() - needle.len())
        .find(|&s| needle.iter().enumerate().all(|(k, w)| hay[s + k].normalized == *w))
        .map(|s| (s, s + needle.len() - 1))
}
