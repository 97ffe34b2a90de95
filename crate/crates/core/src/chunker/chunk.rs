use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Inclusive, 1-based line range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start_line: u32,
    pub end_line: u32,
}

impl Span {
    pub fn new(start_line: u32, end_line: u32) -> Self {
        debug_assert!(start_line >= 1 && start_line <= end_line);
        Self { start_line, end_line }
    }

    pub fn len(&self) -> u32 {
        self.end_line - self.start_line + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains_line(&self, line: u32) -> bool {
        self.start_line <= line && line <= self.end_line
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start_line <= other.end_line && other.start_line <= self.end_line
    }

    /// Whether this span lies entirely inside `[start, end]`.
    pub fn within(&self, start: u32, end: u32) -> bool {
        start <= self.start_line && self.end_line <= end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SymbolKind {
    Function,
    Method,
    Class,
    ModuleTopLevel,
    Other,
}

impl fmt::Display for SymbolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SymbolKind::Function => "function",
            SymbolKind::Method => "method",
            SymbolKind::Class => "class",
            SymbolKind::ModuleTopLevel => "module-top-level",
            SymbolKind::Other => "other",
        })
    }
}

/// A contiguous, semantically coherent slice of one source file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeChunk {
    pub chunk_id: String,
    pub repo_id: String,
    pub file_path: String,
    pub span: Span,
    pub symbol_kind: SymbolKind,
    pub symbol_name: String,
    /// Exactly the file's bytes for `span`, line terminators included.
    pub content: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enclosing_scope: Option<String>,
}

impl CodeChunk {
    /// `Scope.name` for methods, plain name otherwise.
    pub fn qualified_name(&self) -> String {
        match &self.enclosing_scope {
            Some(scope) => format!("{scope}.{}", self.symbol_name),
            None => self.symbol_name.clone(),
        }
    }
}

/// Content-derived chunk id: hex of
/// `sha256(repo_id, file_path, symbol_name, sha256(content), salt)`.
/// `salt` disambiguates byte-identical definitions within one file and is
/// zero otherwise.
pub fn chunk_id(repo_id: &str, file_path: &str, symbol_name: &str, content: &str, salt: u32) -> String {
    let content_digest = Sha256::digest(content.as_bytes());
    let mut h = Sha256::new();
    for part in [repo_id.as_bytes(), file_path.as_bytes(), symbol_name.as_bytes()] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part);
    }
    h.update(content_digest);
    if salt > 0 {
        h.update(salt.to_le_bytes());
    }
    hex::encode(&h.finalize()[..16])
}
