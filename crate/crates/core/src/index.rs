//! Immutable inverted index with Okapi BM25 ranking.
//!
//! ```text
//! idf(t)      = ln(1 + (N - df + 0.5) / (df + 0.5))
//! score(q, p) = sum over t in q of idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len / avg_len))
//! ```
//!
//! Terms are the normalized word tokens of [`crate::analysis::index_terms`];
//! stop words are kept and punctuation is dropped. Passage length counts
//! those terms.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::index_terms;
use crate::corpus::Passage;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"SSPTIDX\0";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.k1 >= 0.0 && self.k1.is_finite()) {
            return Err(Error::InvalidConfig(format!("bm25.k1 must be >= 0, got {}", self.k1)));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(Error::InvalidConfig(format!("bm25.b must be in [0, 1], got {}", self.b)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Posting {
    /// Position of the passage in the index's id-sorted tables.
    slot: u32,
    tf: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredPassage {
    pub passage_id: u32,
    pub score: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvertedIndex {
    postings: BTreeMap<String, Vec<Posting>>,
    passage_ids: Vec<u32>,
    passage_lengths: Vec<u32>,
    doc_of: Vec<String>,
    avg_length: f64,
    source_digest: [u8; 32],
    slot_of: HashMap<u32, usize>,
}

/// SHA-256 over the ids, owning documents and texts of `passages`. Stored in
/// the index so a serialized index can be checked against a corpus.
pub fn passages_digest(passages: &[Passage]) -> [u8; 32] {
    let mut sorted: Vec<&Passage> = passages.iter().collect();
    sorted.sort_by_key(|p| p.passage_id);
    let mut h = Sha256::new();
    for p in sorted {
        h.update(p.passage_id.to_le_bytes());
        h.update((p.doc_id.len() as u64).to_le_bytes());
        h.update(p.doc_id.as_bytes());
        h.update((p.text.len() as u64).to_le_bytes());
        h.update(p.text.as_bytes());
    }
    h.finalize().into()
}

impl InvertedIndex {
    pub fn build(passages: &[Passage]) -> Result<Self> {
        let mut order: Vec<&Passage> = passages.iter().collect();
        order.sort_by_key(|p| p.passage_id);
        for w in order.windows(2) {
            if w[0].passage_id == w[1].passage_id {
                return Err(Error::DuplicatePassage(w[0].passage_id));
            }
        }

        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        let mut passage_lengths = Vec::with_capacity(order.len());
        for (slot, p) in order.iter().enumerate() {
            let terms = index_terms(&p.text);
            passage_lengths.push(terms.len() as u32);
            let mut counts: BTreeMap<String, u32> = BTreeMap::new();
            for t in terms {
                *counts.entry(t).or_default() += 1;
            }
            for (term, tf) in counts {
                postings.entry(term).or_default().push(Posting { slot: slot as u32, tf });
            }
        }

        let passage_ids: Vec<u32> = order.iter().map(|p| p.passage_id).collect();
        let doc_of = order.iter().map(|p| p.doc_id.clone()).collect();
        let avg_length = mean_length(&passage_lengths);
        let slot_of = slot_map(&passage_ids);
        Ok(Self { postings, passage_ids, passage_lengths, doc_of, avg_length, source_digest: passages_digest(passages), slot_of })
    }

    /// Number of indexed passages.
    pub fn passage_count(&self) -> usize {
        self.passage_ids.len()
    }

    pub fn avg_length(&self) -> f64 {
        self.avg_length
    }

    pub fn vocabulary_size(&self) -> usize {
        self.postings.len()
    }

    pub fn source_digest(&self) -> &[u8; 32] {
        &self.source_digest
    }

    pub fn doc_of(&self, passage_id: u32) -> Option<&str> {
        self.slot_of.get(&passage_id).map(|&s| self.doc_of[s].as_str())
    }

    pub fn passage_length(&self, passage_id: u32) -> Option<u32> {
        self.slot_of.get(&passage_id).map(|&s| self.passage_lengths[s])
    }

    /// Ids of the passages containing `term`, with term frequencies, sorted
    /// by id.
    pub fn postings(&self, term: &str) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.postings
            .get(term)
            .into_iter()
            .flatten()
            .map(|p| (self.passage_ids[p.slot as usize], p.tf))
    }

    pub fn document_frequency(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    pub fn idf(&self, term: &str) -> f64 {
        idf(self.passage_count(), self.document_frequency(term))
    }

    fn term_weight(&self, tf: u32, slot: usize, params: &Bm25Params) -> f64 {
        let tf = tf as f64;
        let len = self.passage_lengths[slot] as f64;
        let norm = if self.avg_length > 0.0 { len / self.avg_length } else { 0.0 };
        tf * (params.k1 + 1.0) / (tf + params.k1 * (1.0 - params.b + params.b * norm))
    }

    /// BM25 score of one passage. Duplicate query terms count once per
    /// occurrence.
    pub fn bm25_score(&self, query_terms: &[String], passage_id: u32, params: &Bm25Params) -> Result<f64> {
        let slot = *self.slot_of.get(&passage_id).ok_or(Error::UnknownPassage(passage_id))?;
        let mut score = 0.0;
        for term in query_terms {
            let Some(list) = self.postings.get(term) else { continue };
            if let Ok(i) = list.binary_search_by_key(&(slot as u32), |p| p.slot) {
                score += idf(self.passage_count(), list.len()) * self.term_weight(list[i].tf, slot, params);
            }
        }
        Ok(score)
    }

    /// Top `k` passages sharing at least one term with the query, excluding
    /// passages of `exclude_doc`. Sorted by descending score, ties by
    /// ascending passage id.
    pub fn search_top_k(
        &self,
        query_terms: &[String],
        k: usize,
        exclude_doc: Option<&str>,
        params: &Bm25Params,
    ) -> Vec<ScoredPassage> {
        let n = self.passage_count();
        let mut scores = vec![0.0f64; n];
        let mut touched = vec![false; n];
        for term in query_terms {
            let Some(list) = self.postings.get(term) else { continue };
            let w = idf(n, list.len());
            for p in list {
                let slot = p.slot as usize;
                scores[slot] += w * self.term_weight(p.tf, slot, params);
                touched[slot] = true;
            }
        }
        let mut hits: Vec<(u32, f64)> = (0..n)
            .filter(|&s| touched[s] && exclude_doc != Some(self.doc_of[s].as_str()))
            .map(|s| (self.passage_ids[s], scores[s]))
            .collect();
        hits.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        hits.truncate(k);
        hits.into_iter()
            .enumerate()
            .map(|(i, (passage_id, score))| ScoredPassage { passage_id, score, rank: i + 1 })
            .collect()
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(FORMAT_VERSION)?;
        w.write_all(&self.source_digest)?;
        w.write_u32::<LittleEndian>(self.passage_count() as u32)?;
        for slot in 0..self.passage_count() {
            w.write_u32::<LittleEndian>(self.passage_ids[slot])?;
            w.write_u32::<LittleEndian>(self.passage_lengths[slot])?;
            write_str(&mut w, &self.doc_of[slot])?;
        }
        w.write_u64::<LittleEndian>(self.avg_length.to_bits())?;
        w.write_u32::<LittleEndian>(self.postings.len() as u32)?;
        for (term, list) in &self.postings {
            write_str(&mut w, term)?;
            w.write_u32::<LittleEndian>(list.len() as u32)?;
            for p in list {
                w.write_u32::<LittleEndian>(self.passage_ids[p.slot as usize])?;
                w.write_u32::<LittleEndian>(p.tf)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let bad = |reason: String| Error::Format { what: "index", reason };
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(bad("bad magic".into()));
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != FORMAT_VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let mut source_digest = [0u8; 32];
        r.read_exact(&mut source_digest)?;
        let n = r.read_u32::<LittleEndian>()? as usize;
        let mut passage_ids = Vec::with_capacity(n);
        let mut passage_lengths = Vec::with_capacity(n);
        let mut doc_of = Vec::with_capacity(n);
        for _ in 0..n {
            passage_ids.push(r.read_u32::<LittleEndian>()?);
            passage_lengths.push(r.read_u32::<LittleEndian>()?);
            doc_of.push(read_str(&mut r)?);
        }
        if passage_ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(bad("passage ids not strictly increasing".into()));
        }
        let avg_length = f64::from_bits(r.read_u64::<LittleEndian>()?);
        let slot_of = slot_map(&passage_ids);
        let terms = r.read_u32::<LittleEndian>()? as usize;
        let mut postings = BTreeMap::new();
        for _ in 0..terms {
            let term = read_str(&mut r)?;
            let len = r.read_u32::<LittleEndian>()? as usize;
            let mut list = Vec::with_capacity(len);
            for _ in 0..len {
                let id = r.read_u32::<LittleEndian>()?;
                let tf = r.read_u32::<LittleEndian>()?;
                let slot = *slot_of.get(&id).ok_or_else(|| bad(format!("posting for unknown passage {id}")))?;
                list.push(Posting { slot: slot as u32, tf });
            }
            postings.insert(term, list);
        }
        Ok(Self { postings, passage_ids, passage_lengths, doc_of, avg_length, source_digest, slot_of })
    }
}

pub fn idf(passage_count: usize, df: usize) -> f64 {
    let n = passage_count as f64;
    let df = df as f64;
    (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
}

fn mean_length(lengths: &[u32]) -> f64 {
    if lengths.is_empty() {
        0.0
    } else {
        lengths.iter().map(|&l| l as f64).sum::<f64>() / lengths.len() as f64
    }
}

fn slot_map(ids: &[u32]) -> HashMap<u32, usize> {
    ids.iter().enumerate().map(|(s, &id)| (id, s)).collect()
}

fn write_str<W: Write>(w: &mut W, s: &str) -> std::io::Result<()> {
    w.write_u32::<LittleEndian>(s.len() as u32)?;
    w.write_all(s.as_bytes())
}

fn read_str<R: Read>(r: &mut R) -> Result<String> {
    let len = r.read_u32::<LittleEndian>()? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Format { what: "index", reason: e.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn passage(id: u32, doc: &str, text: &str) -> Passage {
        Passage { passage_id: id, doc_id: doc.into(), text: text.into(), char_offset: 0 }
    }

    fn terms(s: &str) -> Vec<String> {
        index_terms(s)
    }

    #[test]
    fn empty_index() {
        let idx = InvertedIndex::build(&[]).unwrap();
        assert_eq!(idx.passage_count(), 0);
        assert_eq!(idx.vocabulary_size(), 0);
        assert!(idx.search_top_k(&terms("anything"), 10, None, &Bm25Params::default()).is_empty());
    }

    #[test]
    fn shared_term_posting_is_sorted() {
        let idx = InvertedIndex::build(&[passage(7, "b", "river mill"), passage(3, "a", "old river")]).unwrap();
        let got: Vec<_> = idx.postings("river").collect();
        assert_eq!(got, [(3, 1), (7, 1)]);
        assert_eq!(idx.avg_length(), 2.0);
    }

    #[test]
    fn duplicate_passage_rejected() {
        let err = InvertedIndex::build(&[passage(1, "a", "x"), passage(1, "b", "y")]).unwrap_err();
        assert!(matches!(err, Error::DuplicatePassage(1)));
    }

    #[test]
    fn idf_values() {
        assert!((idf(1, 1) - (4.0f64 / 3.0).ln()).abs() < 1e-15);
        for n in [0usize, 1, 5, 1000] {
            assert_eq!(idf(n, 0), (1.0 + (n as f64 + 0.5) / 0.5).ln());
        }
        for n in 1..50 {
            for df in 0..n {
                assert!(idf(n, df) >= idf(n, df + 1));
            }
            assert!(idf(n, n) > 0.0);
        }
    }

    #[test]
    fn hand_computed_score() {
        // one passage, "alpha alpha": N=1, df=1, tf=2, len=avg=2
        let idx = InvertedIndex::build(&[passage(0, "a", "alpha alpha")]).unwrap();
        let p = Bm25Params::default();
        let expected = (4.0f64 / 3.0).ln() * 2.0 * 2.2 / (2.0 + 1.2);
        let got = idx.bm25_score(&terms("alpha"), 0, &p).unwrap();
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
        assert_eq!(idx.bm25_score(&terms("beta"), 0, &p).unwrap(), 0.0);
        assert!(matches!(idx.bm25_score(&terms("alpha"), 9, &p), Err(Error::UnknownPassage(9))));
    }

    #[test]
    fn score_increases_with_tf() {
        let idx = InvertedIndex::build(&[
            passage(0, "a", "alpha beta beta beta"),
            passage(1, "b", "alpha alpha beta beta"),
            passage(2, "c", "alpha alpha alpha beta"),
            passage(3, "d", "gamma gamma gamma gamma"),
        ])
        .unwrap();
        let p = Bm25Params::default();
        let q = terms("alpha");
        let s: Vec<f64> = (0..3).map(|id| idx.bm25_score(&q, id, &p).unwrap()).collect();
        assert!(s[0] < s[1] && s[1] < s[2]);
    }

    #[test]
    fn full_exclusion_gives_nothing() {
        let idx = InvertedIndex::build(&[passage(0, "a", "river"), passage(1, "a", "river mill")]).unwrap();
        assert!(idx.search_top_k(&terms("river"), 10, Some("a"), &Bm25Params::default()).is_empty());
    }

    #[test]
    fn k_larger_than_corpus() {
        let idx = InvertedIndex::build(&[
            passage(0, "a", "river"),
            passage(1, "b", "river river mill"),
            passage(2, "c", "mill"),
        ])
        .unwrap();
        let hits = idx.search_top_k(&terms("river"), 100, None, &Bm25Params::default());
        assert_eq!(hits.len(), 2);
        assert!(hits[0].score >= hits[1].score);
        assert_eq!(hits.iter().map(|h| h.rank).collect::<Vec<_>>(), [1, 2]);
    }

    #[test]
    fn ties_break_by_passage_id() {
        let idx = InvertedIndex::build(&[passage(5, "a", "same text"), passage(2, "b", "same text")]).unwrap();
        let hits = idx.search_top_k(&terms("same"), 10, None, &Bm25Params::default());
        assert_eq!(hits.iter().map(|h| h.passage_id).collect::<Vec<_>>(), [2, 5]);
    }

    #[test]
    fn serialization_round_trips_bit_exactly() {
        let idx = InvertedIndex::build(&[
            passage(0, "a", "The river Lerin flows east."),
            passage(4, "b", "Mills along the river, and more mills."),
        ])
        .unwrap();
        let mut buf = Vec::new();
        idx.write_to(&mut buf).unwrap();
        let back = InvertedIndex::read_from(buf.as_slice()).unwrap();
        assert_eq!(back, idx);
        let mut again = Vec::new();
        back.write_to(&mut again).unwrap();
        assert_eq!(again, buf);
    }

    #[test]
    fn rejects_foreign_file() {
        let err = InvertedIndex::read_from(&b"NOTANIDXxxxxxxxxxxxx"[..]).unwrap_err();
        assert!(matches!(err, Error::Format { .. }));
    }
}
