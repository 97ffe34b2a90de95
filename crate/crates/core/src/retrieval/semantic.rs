use sha2::{Digest, Sha256};
use thiserror::Error;

use super::query::{terms, RetrievalQuery};
use super::{Hit, RetrievalError, ScoredChunkSet, SearchSource};
use crate::chunker::ChunkStore;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("embedding failed: {0}")]
pub struct EmbedError(pub String);

/// Text to fixed-length vector.
pub trait Embedder: Send + Sync {
    fn dimension(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Vec<f32>, EmbedError>;
}

/// Bag-of-identifiers vector: each identifier term increments one of
/// `dimension` buckets chosen by hash. Deterministic and offline.
#[derive(Debug, Clone, Copy)]
pub struct HashingEmbedder {
    dimension: usize,
}

impl HashingEmbedder {
    pub fn new(dimension: usize) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        Self { dimension }
    }

    pub fn bucket(&self, term: &str) -> usize {
        let d = Sha256::digest(term.as_bytes());
        (u64::from_le_bytes(d[..8].try_into().unwrap()) % self.dimension as u64) as usize
    }
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        Self::new(512)
    }
}

impl Embedder for HashingEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<Vec<f32>, EmbedError> {
        let mut v = vec![0f32; self.dimension];
        for t in terms(text) {
            v[self.bucket(&t)] += 1.0;
        }
        Ok(v)
    }
}

/// Cosine similarity accumulated in f64; zero for a zero vector.
pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let (mut dot, mut na, mut nb) = (0f64, 0f64, 0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (f64::from(x), f64::from(y));
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb).sqrt()).clamp(-1.0, 1.0)
}

/// Ranks stored chunks by embedding similarity to the query text. Missing
/// embeddings are computed and written back to the store.
pub fn semantic_search(
    query: &RetrievalQuery,
    store: &dyn ChunkStore,
    repo_id: &str,
    embedder: &dyn Embedder,
    top_k: usize,
    min_similarity: f64,
) -> Result<ScoredChunkSet, RetrievalError> {
    let q = embedder.embed(&query.query_text)?;
    if q.len() != embedder.dimension() {
        return Err(EmbedError(format!("expected {} dimensions, got {}", embedder.dimension(), q.len())).into());
    }
    let mut hits = Vec::new();
    for entry in store.scan(repo_id)? {
        let c = &entry.chunk;
        if query.is_changed_span(&c.file_path, c.span.start_line, c.span.end_line) {
            continue;
        }
        let v = match entry.embedding {
            Some(v) if v.len() == q.len() => v,
            _ => {
                let v = embedder.embed(&c.content)?;
                // The entry may have expired since the scan; the score is
                // still valid for this query.
                let _ = store.set_embedding(&entry.chunk_id, v.clone());
                v
            }
        };
        let score = cosine(&q, &v);
        if score >= min_similarity && score > 0.0 {
            hits.push(Hit {
                chunk_id: entry.chunk_id,
                score,
            });
        }
    }
    Ok(ScoredChunkSet::new(SearchSource::Semantic, hits).top(top_k))
}
