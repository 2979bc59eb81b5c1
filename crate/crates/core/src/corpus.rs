//! Document ingestion and segmentation into retrieval passages and
//! query-source sentences.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::split_sentences;
use crate::error::{Error, Result};
use crate::text::char_boundaries;

pub const DEFAULT_PASSAGE_BOUNDS: (usize, usize) = (300, 2000);
pub const DEFAULT_SENTENCE_BOUNDS: (usize, usize) = (50, 250);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub title: String,
    pub text: String,
}

/// Immutable, doc-id-ordered collection of documents.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DocumentStore {
    docs: Vec<Document>,
}

impl DocumentStore {
    /// Builds a store, rejecting duplicate ids and sorting by doc id.
    pub fn new(docs: Vec<Document>) -> Result<Self> {
        let mut by_id = BTreeMap::new();
        for doc in docs {
            if by_id.contains_key(&doc.doc_id) {
                return Err(Error::DuplicateDocument(doc.doc_id));
            }
            by_id.insert(doc.doc_id.clone(), doc);
        }
        Ok(Self { docs: by_id.into_values().collect() })
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Document> {
        self.docs.iter()
    }

    pub fn get(&self, doc_id: &str) -> Option<&Document> {
        self.docs.binary_search_by(|d| d.doc_id.as_str().cmp(doc_id)).ok().map(|i| &self.docs[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    /// One JSON object per line with `id`, `title` and `text`.
    #[default]
    Jsonl,
    /// A directory of plain-text files; the file name is the doc id.
    Dir,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IngestOptions {
    pub format: CorpusFormat,
}

#[derive(Deserialize)]
struct RawRecord {
    id: String,
    #[serde(default)]
    title: String,
    text: String,
}

/// Reads newline-delimited JSON records. Blank lines are skipped and do not
/// count towards record indices.
pub fn read_jsonl<R: BufRead>(reader: R) -> Result<DocumentStore> {
    let mut docs = Vec::new();
    let mut index = 0;
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(&line)
            .map_err(|e| Error::MalformedRecord { index, reason: e.to_string() })?;
        if raw.text.trim().is_empty() {
            return Err(Error::MalformedRecord { index, reason: "empty text".into() });
        }
        docs.push(Document { doc_id: raw.id, title: raw.title, text: raw.text });
        index += 1;
    }
    DocumentStore::new(docs)
}

/// Reads every non-hidden regular file of `dir` as one document.
pub fn read_dir(dir: &Path) -> Result<DocumentStore> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        let hidden = entry.file_name().to_string_lossy().starts_with('.');
        if path.is_file() && !hidden {
            paths.push(path);
        }
    }
    paths.sort();
    let mut docs = Vec::with_capacity(paths.len());
    for (index, path) in paths.iter().enumerate() {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        if text.trim().is_empty() {
            return Err(Error::MalformedRecord { index, reason: format!("{} is empty", path.display()) });
        }
        let doc_id = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        docs.push(Document { doc_id, title: String::new(), text });
    }
    DocumentStore::new(docs)
}

pub fn ingest_corpus(source: &Path, options: &IngestOptions) -> Result<DocumentStore> {
    match options.format {
        CorpusFormat::Jsonl => {
            let file = std::fs::File::open(source).map_err(|e| Error::io(source, e))?;
            read_jsonl(std::io::BufReader::new(file)).map_err(|e| match e {
                Error::Stream(err) => Error::io(source, err),
                other => other,
            })
        }
        CorpusFormat::Dir => read_dir(source),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    pub passage_id: u32,
    pub doc_id: String,
    pub text: String,
    /// Start of the passage in the document text, in chars.
    pub char_offset: usize,
}

impl Passage {
    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentenceCandidate {
    pub doc_id: String,
    pub text: String,
    pub char_range: Range<usize>,
}

/// Char ranges of paragraphs: text between runs of newlines, trimmed.
fn paragraphs(chars: &[char]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    let n = chars.len();
    let mut push = |s: usize, e: usize| {
        let mut s = s;
        let mut e = e;
        while s < e && chars[s].is_whitespace() {
            s += 1;
        }
        while e > s && chars[e - 1].is_whitespace() {
            e -= 1;
        }
        if s < e {
            out.push((s, e));
        }
    };
    for (i, &c) in chars.iter().enumerate() {
        if c == '\n' {
            push(start, i);
            start = i + 1;
        }
    }
    push(start, n);
    out
}

/// Breaks an overlong paragraph into pieces of at most `max_chars`, cutting
/// after the last sentence that fits. A sentence longer than `max_chars` on
/// its own is cut at the character limit.
fn split_long(doc_text: &str, para: (usize, usize), max_chars: usize, bounds: &[usize]) -> Vec<(usize, usize)> {
    let (p0, p1) = para;
    let para_text = &doc_text[bounds[p0]..bounds[p1]];
    let mut sentences = Vec::new();
    for s in split_sentences(para_text) {
        let (mut s0, s1) = (p0 + s.char_start, p0 + s.char_end);
        while s1 - s0 > max_chars {
            sentences.push((s0, s0 + max_chars));
            s0 += max_chars;
            while s0 < s1 && doc_text[bounds[s0]..].starts_with(char::is_whitespace) {
                s0 += 1;
            }
        }
        if s0 < s1 {
            sentences.push((s0, s1));
        }
    }
    let mut pieces: Vec<(usize, usize)> = Vec::new();
    for (s0, s1) in sentences {
        match pieces.last_mut() {
            Some(cur) if s1 - cur.0 <= max_chars => cur.1 = s1,
            _ => pieces.push((s0, s1)),
        }
    }
    pieces
}

/// Splits a document into passages on paragraph boundaries.
///
/// Paragraphs shorter than `min_chars` are merged forward with the following
/// paragraphs while the merged span stays within `max_chars`; a short run
/// that cannot reach `min_chars` is dropped. Passage ids are numbered from 0
/// within the document; [`segment_passages`] assigns corpus-wide ids.
pub fn split_passages(doc: &Document, min_chars: usize, max_chars: usize) -> Vec<Passage> {
    let chars: Vec<char> = doc.text.chars().collect();
    let bounds = char_boundaries(&doc.text);

    let mut units = Vec::new();
    for para in paragraphs(&chars) {
        if para.1 - para.0 > max_chars {
            units.extend(split_long(&doc.text, para, max_chars, &bounds));
        } else {
            units.push(para);
        }
    }

    let mut spans = Vec::new();
    let mut cur: Option<(usize, usize)> = None;
    for unit in units {
        cur = match cur {
            None => Some(unit),
            Some(c) if c.1 - c.0 >= min_chars => {
                spans.push(c);
                Some(unit)
            }
            Some(c) if unit.1 - c.0 <= max_chars => Some((c.0, unit.1)),
            Some(_) => Some(unit),
        };
    }
    if let Some(c) = cur {
        if c.1 - c.0 >= min_chars {
            spans.push(c);
        }
    }

    spans
        .into_iter()
        .enumerate()
        .map(|(i, (s, e))| Passage {
            passage_id: i as u32,
            doc_id: doc.doc_id.clone(),
            text: doc.text[bounds[s]..bounds[e]].to_string(),
            char_offset: s,
        })
        .collect()
}

/// Passages of every document in store order, with sequential ids.
pub fn segment_passages(store: &DocumentStore, min_chars: usize, max_chars: usize) -> Vec<Passage> {
    let mut out = Vec::new();
    for doc in store.iter() {
        for mut p in split_passages(doc, min_chars, max_chars) {
            p.passage_id = out.len() as u32;
            out.push(p);
        }
    }
    out
}

/// Sentences of 50 to 250 characters.
pub fn extract_sentences(doc: &Document) -> Vec<SentenceCandidate> {
    let (lo, hi) = DEFAULT_SENTENCE_BOUNDS;
    extract_sentences_within(doc, lo, hi)
}

pub fn extract_sentences_within(doc: &Document, min_chars: usize, max_chars: usize) -> Vec<SentenceCandidate> {
    split_sentences(&doc.text)
        .into_iter()
        .filter(|s| (min_chars..=max_chars).contains(&s.char_len()))
        .map(|s| SentenceCandidate {
            doc_id: doc.doc_id.clone(),
            text: s.slice(&doc.text).to_string(),
            char_range: s.char_start..s.char_end,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::char_slice;

    fn doc(text: &str) -> Document {
        Document { doc_id: "d".into(), title: String::new(), text: text.into() }
    }

    fn sentence_of(len: usize, seed: usize) -> String {
        // "Word word ... end." of exactly `len` chars
        let mut s = format!("Sentence{seed:03}");
        while s.len() < len - 1 {
            s.push_str(" ab");
        }
        s.truncate(len - 1);
        if s.ends_with(' ') {
            s.pop();
            s.push('x');
        }
        s.push('.');
        s
    }

    #[test]
    fn empty_source_gives_empty_store() {
        let store = read_jsonl("".as_bytes()).unwrap();
        assert!(store.is_empty());
    }

    #[test]
    fn records_sorted_by_doc_id() {
        let src = "{\"id\":\"b\",\"title\":\"B\",\"text\":\"beta\"}\n\n{\"id\":\"a\",\"title\":\"A\",\"text\":\"alpha\"}\n";
        let store = read_jsonl(src.as_bytes()).unwrap();
        let ids: Vec<_> = store.iter().map(|d| d.doc_id.as_str()).collect();
        assert_eq!(ids, ["a", "b"]);
        assert_eq!(store.get("b").unwrap().title, "B");
    }

    #[test]
    fn missing_text_names_record() {
        let err = read_jsonl("{\"id\":\"a\",\"title\":\"A\"}\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::MalformedRecord { index: 0, .. }), "{err}");
    }

    #[test]
    fn duplicate_id_rejected() {
        let src = "{\"id\":\"a\",\"text\":\"x\"}\n{\"id\":\"a\",\"text\":\"y\"}\n";
        let err = read_jsonl(src.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::DuplicateDocument(ref id) if id == "a"));
    }

    #[test]
    fn reads_directory_corpus() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("zeta.txt"), "Para one.\n\nPara two.").unwrap();
        std::fs::write(dir.path().join("alpha.txt"), "Only text.").unwrap();
        std::fs::write(dir.path().join(".hidden"), "skip").unwrap();
        let store = ingest_corpus(dir.path(), &IngestOptions { format: CorpusFormat::Dir }).unwrap();
        let ids: Vec<_> = store.iter().map(|d| d.doc_id.as_str()).collect();
        assert_eq!(ids, ["alpha.txt", "zeta.txt"]);
    }

    #[test]
    fn short_document_has_no_passages() {
        let text = sentence_of(100, 0);
        assert!(split_passages(&doc(&text), 300, 2000).is_empty());
    }

    #[test]
    fn three_paragraphs_three_passages() {
        let paras: Vec<String> = (0..3).map(|i| sentence_of(400, i)).collect();
        let text = paras.join("\n\n");
        let passages = split_passages(&doc(&text), 300, 2000);
        assert_eq!(passages.len(), 3);
        for (p, para) in passages.iter().zip(&paras) {
            assert_eq!(&p.text, para);
            assert_eq!(char_slice(&text, p.char_offset, p.char_offset + p.char_len()), Some(p.text.as_str()));
        }
        assert_eq!(passages[1].char_offset, 402);
        assert_eq!(passages[2].char_offset, 804);
    }

    #[test]
    fn long_paragraph_split_at_sentence_boundaries() {
        let sentences: Vec<String> = (0..50).map(|i| sentence_of(100, i)).collect();
        let text = sentences.join(" ");
        assert_eq!(text.chars().count(), 5049);
        let passages = split_passages(&doc(&text), 300, 2000);
        assert!(passages.len() >= 3);
        for p in &passages {
            assert!(p.char_len() <= 2000 && p.char_len() >= 300);
            assert_eq!(char_slice(&text, p.char_offset, p.char_offset + p.char_len()), Some(p.text.as_str()));
            assert!(p.text.ends_with('.'));
        }
        // every sentence lands in exactly one passage
        let rebuilt = passages.iter().map(|p| p.text.as_str()).collect::<Vec<_>>().join(" ");
        assert_eq!(rebuilt, text);
    }

    #[test]
    fn oversized_sentence_is_hard_split() {
        let text = "x".repeat(4500);
        let passages = split_passages(&doc(&text), 300, 2000);
        let lens: Vec<_> = passages.iter().map(Passage::char_len).collect();
        assert_eq!(lens, [2000, 2000, 500]);
    }

    #[test]
    fn short_paragraphs_merge_forward() {
        let text = format!("{}\n{}\n\n{}", sentence_of(120, 0), sentence_of(120, 1), sentence_of(150, 2));
        let passages = split_passages(&doc(&text), 300, 2000);
        assert_eq!(passages.len(), 1);
        assert_eq!(passages[0].text, text);
        assert_eq!(passages[0].char_offset, 0);
    }

    #[test]
    fn segment_assigns_global_ids() {
        let store = DocumentStore::new(vec![
            Document { doc_id: "b".into(), title: String::new(), text: sentence_of(400, 1) },
            Document { doc_id: "a".into(), title: String::new(), text: format!("{}\n{}", sentence_of(400, 2), sentence_of(400, 3)) },
        ])
        .unwrap();
        let ps = segment_passages(&store, 300, 2000);
        let got: Vec<_> = ps.iter().map(|p| (p.passage_id, p.doc_id.as_str())).collect();
        assert_eq!(got, [(0, "a"), (1, "a"), (2, "b")]);
    }

    #[test]
    fn sentence_length_filter() {
        assert!(extract_sentences(&doc("Hi.")).is_empty());

        let s120 = sentence_of(120, 7);
        let text = format!("Intro words here. {s120}");
        let got = extract_sentences(&doc(&text));
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].text, s120);
        assert_eq!(got[0].char_range, 18..138);
        assert_eq!(char_slice(&text, 18, 138), Some(s120.as_str()));

        let text = format!("{} {}", sentence_of(60, 1), sentence_of(400, 2));
        let got = extract_sentences(&doc(&text));
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].text.chars().count(), 60);
    }

    #[test]
    fn ingest_is_deterministic() {
        let src = "{\"id\":\"q\",\"text\":\"one\"}\n{\"id\":\"p\",\"text\":\"two\"}\n";
        assert_eq!(read_jsonl(src.as_bytes()).unwrap(), read_jsonl(src.as_bytes()).unwrap());
    }
}
