//! Index ranking against exhaustive scoring computed straight from passage
//! text.

use std::collections::HashMap;

use rand::{seq::SliceRandom, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sspt::analysis::index_terms;
use sspt::corpus::Passage;
use sspt::index::{Bm25Params, InvertedIndex, ScoredPassage};

const WORDS: &[&str] = &[
    "river", "bridge", "poet", "Pound", "metro", "station", "1913", "the", "of", "a", "north", "harbour", "city",
    "founded", "guild", "tower", "novel", "imagist", "magazine", "poetry", "born", "island", "kennedy", "space",
];

fn random_corpus(rng: &mut ChaCha8Rng) -> Vec<Passage> {
    let n = rng.gen_range(1..=50);
    (0..n)
        .map(|i| {
            let len = rng.gen_range(1..=40);
            let mut text: Vec<String> = (0..len).map(|_| WORDS.choose(rng).unwrap().to_string()).collect();
            if rng.gen_bool(0.3) {
                text.push(".".into());
            }
            Passage {
                passage_id: i as u32 * 3 + 1,
                doc_id: format!("d{}", rng.gen_range(0..8)),
                text: text.join(" "),
                char_offset: 0,
            }
        })
        .collect()
}

fn random_query(rng: &mut ChaCha8Rng) -> Vec<String> {
    let len = rng.gen_range(1..=8);
    (0..len)
        .map(|_| if rng.gen_bool(0.1) { "unseen".to_string() } else { WORDS.choose(rng).unwrap().to_lowercase() })
        .collect()
}

/// Scores every passage from scratch: no postings, no cached statistics.
/// Returns all hits, best first.
fn exhaustive(
    passages: &[Passage],
    query: &[String],
    exclude: Option<&str>,
    p: &Bm25Params,
) -> Vec<(u32, f64)> {
    let docs: Vec<Vec<String>> = passages.iter().map(|x| index_terms(&x.text)).collect();
    let n = docs.len() as f64;
    let avg = docs.iter().map(Vec::len).sum::<usize>() as f64 / n;
    let df = |t: &str| docs.iter().filter(|d| d.iter().any(|w| w == t)).count() as f64;
    let mut out = Vec::new();
    for (passage, terms) in passages.iter().zip(&docs) {
        if exclude == Some(passage.doc_id.as_str()) {
            continue;
        }
        let mut counts: HashMap<&str, f64> = HashMap::new();
        for t in terms {
            *counts.entry(t).or_default() += 1.0;
        }
        let mut score = 0.0;
        let mut hit = false;
        for q in query {
            let tf = counts.get(q.as_str()).copied().unwrap_or(0.0);
            if tf == 0.0 {
                continue;
            }
            hit = true;
            let d = df(q);
            let idf = (1.0 + (n - d + 0.5) / (d + 0.5)).ln();
            let len = terms.len() as f64;
            score += idf * tf * (p.k1 + 1.0) / (tf + p.k1 * (1.0 - p.b + p.b * len / avg));
        }
        if hit {
            out.push((passage.passage_id, score));
        }
    }
    out.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    out
}

/// Summation order can split mathematically equal scores by an ulp, so
/// ranks are compared by score and exact ties by id.
fn check(got: &[ScoredPassage], want: &[(u32, f64)], k: usize) {
    assert_eq!(got.len(), want.len().min(k));
    let oracle: HashMap<u32, f64> = want.iter().copied().collect();
    for (i, g) in got.iter().enumerate() {
        assert_eq!(g.rank, i + 1);
        assert!((g.score - want[i].1).abs() <= 1e-9, "rank {}: {} vs {}", i + 1, g.score, want[i].1);
        let own = oracle.get(&g.passage_id).expect("passage without a query term hit");
        assert!((g.score - own).abs() <= 1e-9);
        if i > 0 {
            let prev = &got[i - 1];
            assert!(prev.score > g.score || (prev.score == g.score && prev.passage_id < g.passage_id));
        }
    }
}

#[test]
fn search_matches_exhaustive_scoring() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xB125);
    let params = Bm25Params::default();
    for _ in 0..100 {
        let passages = random_corpus(&mut rng);
        let index = InvertedIndex::build(&passages).unwrap();
        for _ in 0..200 {
            let query = random_query(&mut rng);
            let k = rng.gen_range(1..=60);
            let exclude = rng.gen_bool(0.5).then(|| format!("d{}", rng.gen_range(0..8)));
            let got = index.search_top_k(&query, k, exclude.as_deref(), &params);
            let want = exhaustive(&passages, &query, exclude.as_deref(), &params);
            check(&got, &want, k);
        }
    }
}

#[test]
fn non_default_parameters() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (k1, b) in [(0.0, 0.0), (2.0, 1.0), (0.5, 0.3)] {
        let params = Bm25Params { k1, b };
        let passages = random_corpus(&mut rng);
        let index = InvertedIndex::build(&passages).unwrap();
        for _ in 0..50 {
            let query = random_query(&mut rng);
            let got = index.search_top_k(&query, 100, None, &params);
            check(&got, &exhaustive(&passages, &query, None, &params), 100);
        }
    }
}

#[test]
fn statistics_match_brute_force_counts() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let passages = random_corpus(&mut rng);
    let index = InvertedIndex::build(&passages).unwrap();
    let docs: Vec<Vec<String>> = passages.iter().map(|x| index_terms(&x.text)).collect();
    for w in WORDS {
        let t = w.to_lowercase();
        let df = docs.iter().filter(|d| d.contains(&t)).count();
        assert_eq!(index.document_frequency(&t), df);
        for (id, tf) in index.postings(&t) {
            let pos = passages.iter().position(|p| p.passage_id == id).unwrap();
            assert_eq!(tf as usize, docs[pos].iter().filter(|x| **x == t).count());
        }
    }
    let total: usize = docs.iter().map(Vec::len).sum();
    assert!((index.avg_length() - total as f64 / docs.len() as f64).abs() < 1e-12);
}
