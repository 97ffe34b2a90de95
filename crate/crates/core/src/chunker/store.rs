use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use chrono::{DateTime, Duration, Utc};
use thiserror::Error;

use super::chunk::CodeChunk;
use crate::clock::{Clock, SystemClock};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StoreError {
    #[error("chunk-id collision with divergent content: {0}")]
    Collision(String),
    #[error("ttl must be positive")]
    InvalidTtl,
    #[error("chunk {0} not found")]
    NotFound(String),
    #[error("store backend unavailable: {0}")]
    Unavailable(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChunkStoreEntry {
    pub chunk_id: String,
    pub chunk: CodeChunk,
    pub embedding: Option<Vec<f32>>,
    pub expires_at: DateTime<Utc>,
}

/// Ephemeral chunk storage with per-entry expiry. Expired entries are
/// invisible to every read.
pub trait ChunkStore: Send + Sync {
    /// Inserts or refreshes `chunk` under `id`. An existing live entry with
    /// different content is a collision.
    fn put(&self, id: &str, chunk: CodeChunk, ttl: Duration) -> Result<(), StoreError>;
    fn get(&self, id: &str) -> Result<Option<ChunkStoreEntry>, StoreError>;
    /// Live entries for one repository, ordered by chunk id.
    fn scan(&self, repo_id: &str) -> Result<Vec<ChunkStoreEntry>, StoreError>;
    fn set_embedding(&self, id: &str, embedding: Vec<f32>) -> Result<(), StoreError>;
}

/// In-process store behind a read/write lock.
pub struct MemoryChunkStore {
    clock: Arc<dyn Clock>,
    entries: RwLock<HashMap<String, ChunkStoreEntry>>,
}

impl Default for MemoryChunkStore {
    fn default() -> Self {
        Self::new(Arc::new(SystemClock))
    }
}

impl MemoryChunkStore {
    pub fn new(clock: Arc<dyn Clock>) -> Self {
        Self {
            clock,
            entries: RwLock::new(HashMap::new()),
        }
    }

    /// Drops expired entries; returns how many were removed.
    pub fn purge_expired(&self) -> usize {
        let now = self.clock.now();
        let mut map = self.entries.write().expect("store poisoned");
        let before = map.len();
        map.retain(|_, e| e.expires_at > now);
        before - map.len()
    }

    pub fn live_count(&self) -> usize {
        let now = self.clock.now();
        self.entries
            .read()
            .expect("store poisoned")
            .values()
            .filter(|e| e.expires_at > now)
            .count()
    }
}

impl ChunkStore for MemoryChunkStore {
    fn put(&self, id: &str, chunk: CodeChunk, ttl: Duration) -> Result<(), StoreError> {
        if ttl <= Duration::zero() {
            return Err(StoreError::InvalidTtl);
        }
        let now = self.clock.now();
        let mut map = self.entries.write().expect("store poisoned");
        if let Some(existing) = map.get_mut(id) {
            if existing.expires_at > now {
                if existing.chunk.content != chunk.content {
                    return Err(StoreError::Collision(id.to_string()));
                }
                existing.chunk = chunk;
                existing.expires_at = existing.expires_at.max(now + ttl);
                return Ok(());
            }
        }
        map.insert(
            id.to_string(),
            ChunkStoreEntry {
                chunk_id: id.to_string(),
                chunk,
                embedding: None,
                expires_at: now + ttl,
            },
        );
        Ok(())
    }

    fn get(&self, id: &str) -> Result<Option<ChunkStoreEntry>, StoreError> {
        let now = self.clock.now();
        let map = self.entries.read().expect("store poisoned");
        Ok(map.get(id).filter(|e| e.expires_at > now).cloned())
    }

    fn scan(&self, repo_id: &str) -> Result<Vec<ChunkStoreEntry>, StoreError> {
        let now = self.clock.now();
        let map = self.entries.read().expect("store poisoned");
        let mut out: Vec<ChunkStoreEntry> = map
            .values()
            .filter(|e| e.expires_at > now && e.chunk.repo_id == repo_id)
            .cloned()
            .collect();
        out.sort_by(|a, b| a.chunk_id.cmp(&b.chunk_id));
        Ok(out)
    }

    fn set_embedding(&self, id: &str, embedding: Vec<f32>) -> Result<(), StoreError> {
        let now = self.clock.now();
        let mut map = self.entries.write().expect("store poisoned");
        match map.get_mut(id).filter(|e| e.expires_at > now) {
            Some(e) => {
                e.embedding = Some(embedding);
                Ok(())
            }
            None => Err(StoreError::NotFound(id.to_string())),
        }
    }
}

/// Stores every chunk under its own id. Returns the number stored.
pub fn store_chunks(chunks: &[CodeChunk], ttl: Duration, store: &dyn ChunkStore) -> Result<usize, StoreError> {
    if ttl <= Duration::zero() {
        return Err(StoreError::InvalidTtl);
    }
    for c in chunks {
        store.put(&c.chunk_id, c.clone(), ttl)?;
    }
    Ok(chunks.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chunker::chunk::{Span, SymbolKind};
    use crate::clock::ManualClock;

    fn chunk(id: &str, content: &str) -> CodeChunk {
        CodeChunk {
            chunk_id: id.into(),
            repo_id: "r".into(),
            file_path: "a.py".into(),
            span: Span::new(1, 1),
            symbol_kind: SymbolKind::Function,
            symbol_name: "f".into(),
            content: content.into(),
            enclosing_scope: None,
        }
    }

    fn setup() -> (Arc<ManualClock>, MemoryChunkStore) {
        let clock = Arc::new(ManualClock::new(DateTime::from_timestamp(1_700_000_000, 0).unwrap()));
        let store = MemoryChunkStore::new(clock.clone());
        (clock, store)
    }

    #[test]
    fn entries_expire() {
        let (clock, store) = setup();
        let chunks = [chunk("a", "1"), chunk("b", "2"), chunk("c", "3")];
        assert_eq!(store_chunks(&chunks, Duration::seconds(60), &store).unwrap(), 3);
        clock.advance(Duration::seconds(1));
        assert_eq!(store.scan("r").unwrap().len(), 3);
        clock.advance(Duration::seconds(60));
        assert_eq!(store.scan("r").unwrap().len(), 0);
        assert!(store.get("a").unwrap().is_none());
        assert_eq!(store.purge_expired(), 3);
    }

    #[test]
    fn restore_refreshes_expiry() {
        let (clock, store) = setup();
        store.put("a", chunk("a", "1"), Duration::seconds(10)).unwrap();
        clock.advance(Duration::seconds(8));
        store.put("a", chunk("a", "1"), Duration::seconds(10)).unwrap();
        clock.advance(Duration::seconds(8));
        assert!(store.get("a").unwrap().is_some());
    }

    #[test]
    fn divergent_content_collides() {
        let (_, store) = setup();
        store.put("x", chunk("x", "one"), Duration::seconds(10)).unwrap();
        let err = store.put("x", chunk("x", "two"), Duration::seconds(10)).unwrap_err();
        assert!(err.to_string().starts_with("chunk-id collision with divergent content"));
    }

    #[test]
    fn zero_ttl_rejected() {
        let (_, store) = setup();
        assert_eq!(
            store_chunks(&[chunk("a", "1")], Duration::zero(), &store),
            Err(StoreError::InvalidTtl)
        );
    }

    #[test]
    fn embeddings_survive_refresh() {
        let (_, store) = setup();
        store.put("a", chunk("a", "1"), Duration::seconds(10)).unwrap();
        store.set_embedding("a", vec![1.0, 0.0]).unwrap();
        store.put("a", chunk("a", "1"), Duration::seconds(10)).unwrap();
        assert_eq!(store.get("a").unwrap().unwrap().embedding, Some(vec![1.0, 0.0]));
    }
}
