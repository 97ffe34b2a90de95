use std::collections::HashMap;

use super::query::{term_counts, RetrievalQuery};
use super::{Hit, RetrievalError, ScoredChunkSet, SearchSource};
use crate::chunker::{ChunkStore, ChunkStoreEntry};

pub const BM25_K1: f64 = 1.2;
pub const BM25_B: f64 = 0.75;

/// Okapi BM25 of one document, with each query term weighted by how often
/// it occurs in the query.
pub fn bm25_score(
    query_tf: &HashMap<String, u32>,
    doc_tf: &HashMap<String, u32>,
    doc_len: usize,
    avg_len: f64,
    doc_freq: &HashMap<String, usize>,
    n_docs: usize,
) -> f64 {
    let n = n_docs as f64;
    let norm = 1.0 - BM25_B + BM25_B * doc_len as f64 / avg_len.max(f64::MIN_POSITIVE);
    let mut terms: Vec<(&String, &u32)> = query_tf.iter().collect();
    // Fixed summation order keeps scores bit-identical across runs.
    terms.sort();
    terms
        .into_iter()
        .filter_map(|(t, &qtf)| {
            let tf = f64::from(*doc_tf.get(t)?);
            let df = *doc_freq.get(t).unwrap_or(&0) as f64;
            let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
            Some(f64::from(qtf) * idf * tf * (BM25_K1 + 1.0) / (tf + BM25_K1 * norm))
        })
        .sum()
}

/// Ranks stored chunks by identifier overlap with the query. Chunks that
/// consist solely of lines the diff added are left out.
pub fn lexical_search(
    query: &RetrievalQuery,
    store: &dyn ChunkStore,
    repo_id: &str,
    top_k: usize,
) -> Result<ScoredChunkSet, RetrievalError> {
    let entries = store.scan(repo_id)?;
    Ok(lexical_rank(query, &entries, top_k))
}

pub(crate) fn lexical_rank(query: &RetrievalQuery, entries: &[ChunkStoreEntry], top_k: usize) -> ScoredChunkSet {
    let query_tf = query.term_counts();
    if query_tf.is_empty() || entries.is_empty() || top_k == 0 {
        return ScoredChunkSet::new(SearchSource::Lexical, Vec::new());
    }
    let docs: Vec<HashMap<String, u32>> = entries.iter().map(|e| term_counts(&e.chunk.content)).collect();
    let lens: Vec<usize> = docs.iter().map(|d| d.values().map(|&c| c as usize).sum()).collect();
    let avg_len = lens.iter().sum::<usize>() as f64 / docs.len() as f64;
    let mut doc_freq: HashMap<String, usize> = HashMap::new();
    for d in &docs {
        for t in d.keys() {
            *doc_freq.entry(t.clone()).or_insert(0) += 1;
        }
    }
    let hits = entries
        .iter()
        .zip(docs.iter().zip(&lens))
        .filter(|(e, _)| !query.is_changed_span(&e.chunk.file_path, e.chunk.span.start_line, e.chunk.span.end_line))
        .map(|(e, (d, &len))| Hit {
            chunk_id: e.chunk_id.clone(),
            score: bm25_score(&query_tf, d, len, avg_len, &doc_freq, docs.len()),
        })
        .filter(|h| h.score > 0.0)
        .collect();
    ScoredChunkSet::new(SearchSource::Lexical, hits).top(top_k)
}
