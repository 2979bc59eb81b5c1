use std::collections::HashMap;

use crate::analysis::tokenize;
use crate::generator::{SpanSelectionInstance, BLANK};

pub const PAD_ID: u32 = 0;
pub const CLS_ID: u32 = 1;
pub const SEP_ID: u32 = 2;
pub const BLANK_ID: u32 = 3;
pub const UNK_ID: u32 = 4;
pub const SPECIALS: [&str; 5] = ["[PAD]", "[CLS]", "[SEP]", BLANK, "[UNK]"];

/// Whole-word vocabulary with reserved special ids 0 to 4.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Vocabulary {
    /// Specials followed by `words`, in order. Duplicates and specials among
    /// `words` are ignored.
    pub fn from_tokens<I: IntoIterator<Item = String>>(words: I) -> Self {
        let mut v = Vocabulary { tokens: Vec::new(), ids: HashMap::new() };
        for w in SPECIALS.iter().map(|s| s.to_string()).chain(words) {
            if !v.ids.contains_key(&w) {
                v.ids.insert(w.clone(), v.tokens.len() as u32);
                v.tokens.push(w);
            }
        }
        v
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> u32 {
        self.ids.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// Normalized model tokens of a query; the literal `[BLANK]` marker becomes
/// its own token.
pub fn model_tokens(query: &str) -> Vec<String> {
    let mut out = Vec::new();
    for (i, part) in query.split(BLANK).enumerate() {
        if i > 0 {
            out.push(BLANK.to_string());
        }
        out.extend(tokenize(part).into_iter().map(|t| t.normalized));
    }
    out
}

/// Most frequent tokens of the queries and passages, ties broken
/// lexicographically, capped at `max_size` entries including specials.
pub fn build_vocab(instances: &[SpanSelectionInstance], max_size: usize) -> Vocabulary {
    let mut counts: HashMap<String, u64> = HashMap::new();
    for inst in instances {
        for t in model_tokens(&inst.query).into_iter().filter(|t| t != BLANK) {
            *counts.entry(t).or_default() += 1;
        }
        for t in tokenize(&inst.passage) {
            *counts.entry(t.normalized).or_default() += 1;
        }
    }
    for s in SPECIALS {
        counts.remove(s);
    }
    let mut ranked: Vec<(String, u64)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let room = max_size.saturating_sub(SPECIALS.len());
    Vocabulary::from_tokens(ranked.into_iter().take(room).map(|(t, _)| t))
}
