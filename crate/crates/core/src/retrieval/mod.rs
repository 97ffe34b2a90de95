//! Diff-driven lexical and semantic search over stored chunks and the union
//! of both result sets.

mod lexical;
mod query;
mod semantic;

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chunker::{ChunkStore, CodeChunk, StoreError};
use crate::tokens::{estimate_tokens, DEFAULT_CHARS_PER_TOKEN};

pub use lexical::{bm25_score, lexical_search, BM25_B, BM25_K1};
pub use query::{term_counts, terms, RetrievalQuery};
pub use semantic::{cosine, semantic_search, EmbedError, Embedder, HashingEmbedder};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RetrievalError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchSource {
    Lexical,
    Semantic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub chunk_id: String,
    pub score: f64,
}

fn by_score_then_id(a: &Hit, b: &Hit) -> Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.chunk_id.cmp(&b.chunk_id))
}

/// Hits from one search, best first, one per chunk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredChunkSet {
    pub source: SearchSource,
    pub hits: Vec<Hit>,
}

impl ScoredChunkSet {
    /// Sorts `hits`, keeping the best score for repeated ids and dropping
    /// non-finite scores.
    pub fn new(source: SearchSource, hits: Vec<Hit>) -> Self {
        let mut best: HashMap<String, f64> = HashMap::new();
        for h in hits.into_iter().filter(|h| h.score.is_finite()) {
            let slot = best.entry(h.chunk_id).or_insert(h.score);
            *slot = slot.max(h.score);
        }
        let mut hits: Vec<Hit> = best.into_iter().map(|(chunk_id, score)| Hit { chunk_id, score }).collect();
        hits.sort_by(by_score_then_id);
        Self { source, hits }
    }

    pub fn top(mut self, k: usize) -> Self {
        self.hits.truncate(k);
        self
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.hits.iter().map(|h| h.chunk_id.as_str())
    }

    pub fn is_empty(&self) -> bool {
        self.hits.is_empty()
    }

    /// Scores rescaled to [0, 1] by min-max; a set whose scores are all
    /// equal maps to 1.
    pub fn normalized(&self) -> Vec<Hit> {
        let (lo, hi) = self
            .hits
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), h| (lo.min(h.score), hi.max(h.score)));
        self.hits
            .iter()
            .map(|h| Hit {
                chunk_id: h.chunk_id.clone(),
                score: if hi > lo { (h.score - lo) / (hi - lo) } else { 1.0 },
            })
            .collect()
    }
}

/// Union of both sets by chunk id, each id keeping its larger normalized
/// score, ordered best first (ties by id).
pub fn merge_scores(a: &ScoredChunkSet, b: &ScoredChunkSet) -> Vec<Hit> {
    let mut best: HashMap<String, f64> = HashMap::new();
    for h in a.normalized().into_iter().chain(b.normalized()) {
        let slot = best.entry(h.chunk_id).or_insert(h.score);
        *slot = slot.max(h.score);
    }
    let mut out: Vec<Hit> = best.into_iter().map(|(chunk_id, score)| Hit { chunk_id, score }).collect();
    out.sort_by(by_score_then_id);
    out
}

/// Walks `ranked` in order and keeps every item that still fits in
/// `budget`; an item too large for the remaining budget is skipped, not a
/// stopping point.
pub fn truncate_to_budget<'a>(ranked: impl IntoIterator<Item = (&'a str, usize)>, budget: usize) -> Vec<&'a str> {
    let mut used = 0usize;
    let mut out = Vec::new();
    for (id, cost) in ranked {
        if used + cost <= budget {
            used += cost;
            out.push(id);
        }
    }
    out
}

/// Merges both result sets and resolves them to chunks that fit the token
/// budget, best first. Ids no longer in the store are skipped.
pub fn merge_relevant(
    lexical: &ScoredChunkSet,
    semantic: &ScoredChunkSet,
    store: &dyn ChunkStore,
    budget_tokens: usize,
    chars_per_token: usize,
) -> Result<Vec<CodeChunk>, RetrievalError> {
    let mut resolved: Vec<(CodeChunk, usize)> = Vec::new();
    for hit in merge_scores(lexical, semantic) {
        if let Some(entry) = store.get(&hit.chunk_id)? {
            let cost = estimate_tokens(&entry.chunk.content, chars_per_token);
            resolved.push((entry.chunk, cost));
        }
    }
    let keep = truncate_to_budget(resolved.iter().map(|(c, cost)| (c.chunk_id.as_str(), *cost)), budget_tokens);
    let keep: std::collections::HashSet<&str> = keep.into_iter().collect();
    Ok(resolved
        .iter()
        .filter(|(c, _)| keep.contains(c.chunk_id.as_str()))
        .map(|(c, _)| c.clone())
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RetrievalParams {
    /// Per source.
    pub top_k: usize,
    pub min_similarity: f64,
    pub budget_tokens: usize,
    pub chars_per_token: usize,
}

impl Default for RetrievalParams {
    fn default() -> Self {
        Self {
            top_k: 25,
            min_similarity: 0.35,
            budget_tokens: 24_000,
            chars_per_token: DEFAULT_CHARS_PER_TOKEN,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RetrievalOutcome {
    pub lexical: ScoredChunkSet,
    pub semantic: ScoredChunkSet,
    pub chunks: Vec<CodeChunk>,
    /// Set when semantic search failed and only lexical hits were used.
    pub degraded: Option<String>,
}

/// Runs both searches concurrently and merges them. A failing embedder
/// degrades to lexical-only results.
pub fn retrieve(
    query: &RetrievalQuery,
    store: &dyn ChunkStore,
    repo_id: &str,
    embedder: &dyn Embedder,
    params: &RetrievalParams,
) -> Result<RetrievalOutcome, RetrievalError> {
    let (lex, sem) = std::thread::scope(|s| {
        let sem = s.spawn(|| semantic_search(query, store, repo_id, embedder, params.top_k, params.min_similarity));
        let lex = lexical_search(query, store, repo_id, params.top_k);
        (lex, sem.join().expect("semantic search panicked"))
    });
    let lexical = lex?;
    let (semantic, degraded) = match sem {
        Ok(s) => (s, None),
        Err(e) => (
            ScoredChunkSet::new(SearchSource::Semantic, Vec::new()),
            Some(format!("semantic search unavailable: {e}")),
        ),
    };
    let chunks = merge_relevant(&lexical, &semantic, store, params.budget_tokens, params.chars_per_token)?;
    Ok(RetrievalOutcome {
        lexical,
        semantic,
        chunks,
        degraded,
    })
}
