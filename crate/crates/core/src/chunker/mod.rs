//! Ephemeral checkout, AST-based semantic chunking and the TTL chunk store.

mod chunk;
mod python;
mod segment;
mod store;
mod workspace;

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

pub use chunk::{chunk_id, CodeChunk, Span, SymbolKind};
pub use python::PythonChunker;
pub use segment::{Item, ItemRole, Segment, MODULE_NAME};
pub use store::{store_chunks, ChunkStore, ChunkStoreEntry, MemoryChunkStore, StoreError};
pub use workspace::{clone_ephemeral, WorkspaceError, WorkspaceHandle};

/// Splits one language's source into definition segments.
pub trait LanguageChunker: Send + Sync {
    fn language(&self) -> &'static str;
    /// `Err` means the source could not be parsed cleanly.
    fn segments(&self, source: &str) -> Result<Vec<Segment>, String>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChunkerConfig {
    pub max_chunk_lines: u32,
    /// Files larger than this are skipped.
    pub max_file_bytes: u64,
}

impl Default for ChunkerConfig {
    fn default() -> Self {
        Self {
            max_chunk_lines: 400,
            max_file_bytes: 1 << 20,
        }
    }
}

/// Language id for a path, from its extension.
pub fn detect_language(path: &str) -> Option<&'static str> {
    let ext = Path::new(path).extension()?.to_str()?.to_ascii_lowercase();
    Some(match ext.as_str() {
        "py" | "pyi" => "python",
        "rs" => "rust",
        "js" | "jsx" | "mjs" | "cjs" => "javascript",
        "ts" | "tsx" => "typescript",
        "go" => "go",
        "java" => "java",
        "kt" | "kts" => "kotlin",
        "rb" => "ruby",
        "php" => "php",
        "c" | "h" => "c",
        "cc" | "cpp" | "cxx" | "hpp" | "hh" => "cpp",
        "cs" => "csharp",
        "swift" => "swift",
        "scala" => "scala",
        "sh" | "bash" => "shell",
        "sql" => "sql",
        "md" | "markdown" => "markdown",
        "yaml" | "yml" => "yaml",
        "toml" => "toml",
        "json" => "json",
        "html" | "htm" => "html",
        "css" | "scss" => "css",
        _ => return None,
    })
}

#[derive(Debug, Default)]
pub struct ChunkingOutcome {
    pub chunks: Vec<CodeChunk>,
    pub warnings: Vec<String>,
}

/// Chunks files by language; languages without a registered grammar get
/// whole-file chunks.
pub struct SemanticChunker {
    grammars: HashMap<&'static str, Box<dyn LanguageChunker>>,
    config: ChunkerConfig,
}

impl SemanticChunker {
    /// Chunker with the built-in grammars.
    pub fn new(config: ChunkerConfig) -> Self {
        let mut s = Self {
            grammars: HashMap::new(),
            config,
        };
        s.register(Box::new(PythonChunker));
        s
    }

    pub fn register(&mut self, grammar: Box<dyn LanguageChunker>) {
        self.grammars.insert(grammar.language(), grammar);
    }

    pub fn config(&self) -> &ChunkerConfig {
        &self.config
    }

    /// Chunks one file's source. Returns the chunks and, when the grammar
    /// failed, a warning explaining the whole-file fallback.
    pub fn chunk_source(&self, repo_id: &str, file_path: &str, source: &str) -> (Vec<CodeChunk>, Option<String>) {
        let lines: Vec<&str> = source.split_inclusive('\n').collect();
        if lines.iter().all(|l| l.trim().is_empty()) {
            return (Vec::new(), None);
        }
        let whole = || {
            vec![Segment {
                start_line: 1,
                end_line: lines.len() as u32,
                kind: SymbolKind::Other,
                name: file_path.to_string(),
                scope: None,
            }]
        };
        let language = detect_language(file_path);
        let (segments, warning) = match language.and_then(|l| self.grammars.get(l)) {
            Some(g) => match g.segments(source) {
                Ok(segs) => (segs, None),
                Err(e) => (whole(), Some(format!("{file_path}: {e}; using whole-file chunk"))),
            },
            None => (whole(), None),
        };
        let max = self.config.max_chunk_lines.max(1);
        let mut chunks = Vec::new();
        let mut seen: HashMap<(String, String), u32> = HashMap::new();
        for seg in segments {
            for (start, end, name) in split_oversize(&seg, max) {
                let content: String = lines[(start - 1) as usize..end as usize].concat();
                let occurrence = seen.entry((name.clone(), content.clone())).or_insert(0);
                let salt = *occurrence;
                *occurrence += 1;
                chunks.push(CodeChunk {
                    chunk_id: chunk_id(repo_id, file_path, &name, &content, salt),
                    repo_id: repo_id.to_string(),
                    file_path: file_path.to_string(),
                    span: Span::new(start, end),
                    symbol_kind: seg.kind,
                    symbol_name: name,
                    content,
                    enclosing_scope: seg.scope.clone(),
                });
            }
        }
        (chunks, warning)
    }

    /// Chunks every file under `root` whose language is in `languages`
    /// (all detected languages when empty). Output order is by path, then
    /// line.
    pub fn chunk_tree(&self, repo_id: &str, root: &Path, languages: &BTreeSet<String>) -> ChunkingOutcome {
        let mut files: Vec<String> = WalkDir::new(root)
            .sort_by_file_name()
            .into_iter()
            .filter_entry(|e| e.depth() == 0 || !e.file_name().to_string_lossy().starts_with('.'))
            .filter_map(Result::ok)
            .filter(|e| e.file_type().is_file())
            .filter(|e| e.metadata().map(|m| m.len() <= self.config.max_file_bytes).unwrap_or(false))
            .filter_map(|e| {
                let rel = e.path().strip_prefix(root).ok()?;
                Some(
                    rel.components()
                        .map(|c| c.as_os_str().to_string_lossy())
                        .collect::<Vec<_>>()
                        .join("/"),
                )
            })
            .filter(|rel| match detect_language(rel) {
                Some(lang) => languages.is_empty() || languages.contains(lang),
                None => false,
            })
            .collect();
        files.sort();

        let per_file: Vec<(Vec<CodeChunk>, Option<String>)> = files
            .par_iter()
            .map(|rel| match std::fs::read(root.join(rel)) {
                Ok(bytes) if bytes.contains(&0) => (Vec::new(), None),
                Ok(bytes) => match String::from_utf8(bytes) {
                    Ok(text) => self.chunk_source(repo_id, rel, &text),
                    Err(_) => (Vec::new(), Some(format!("{rel}: not valid UTF-8; skipped"))),
                },
                Err(e) => (Vec::new(), Some(format!("{rel}: {e}"))),
            })
            .collect();

        let mut out = ChunkingOutcome::default();
        for (chunks, warning) in per_file {
            out.chunks.extend(chunks);
            out.warnings.extend(warning);
        }
        out
    }
}

fn split_oversize(seg: &Segment, max: u32) -> Vec<(u32, u32, String)> {
    let len = seg.end_line - seg.start_line + 1;
    if len <= max {
        return vec![(seg.start_line, seg.end_line, seg.name.clone())];
    }
    let parts = len.div_ceil(max);
    (0..parts)
        .map(|i| {
            let start = seg.start_line + i * max;
            let end = (start + max - 1).min(seg.end_line);
            (start, end, format!("{}#part{}", seg.name, i + 1))
        })
        .collect()
}

/// Chunks a live workspace.
pub fn semantic_chunk(
    workspace: &WorkspaceHandle,
    repo_id: &str,
    languages: &BTreeSet<String>,
    chunker: &SemanticChunker,
) -> Result<ChunkingOutcome, WorkspaceError> {
    let root = workspace.root()?;
    Ok(chunker.chunk_tree(repo_id, root, languages))
}

/// Rebuilds a file from its chunks plus the lines no chunk covers.
pub fn reconstruct(source: &str, chunks: &[CodeChunk]) -> String {
    let lines: Vec<&str> = source.split_inclusive('\n').collect();
    let mut sorted: Vec<&CodeChunk> = chunks.iter().collect();
    sorted.sort_by_key(|c| c.span.start_line);
    let mut out = String::with_capacity(source.len());
    let mut next = 1u32;
    for c in sorted {
        while next < c.span.start_line {
            out.push_str(lines[(next - 1) as usize]);
            next += 1;
        }
        out.push_str(&c.content);
        next = c.span.end_line + 1;
    }
    while (next as usize) <= lines.len() {
        out.push_str(lines[(next - 1) as usize]);
        next += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chunker(max: u32) -> SemanticChunker {
        SemanticChunker::new(ChunkerConfig {
            max_chunk_lines: max,
            ..Default::default()
        })
    }

    #[test]
    fn empty_file_has_no_chunks() {
        let (chunks, warn) = chunker(400).chunk_source("r", "a.py", "");
        assert!(chunks.is_empty() && warn.is_none());
    }

    #[test]
    fn three_functions_tile_their_lines() {
        // Lines: f 1-2, g 4-6, h 9-10.
        let src = "def f():\n    return 1\n\ndef g(x):\n    y = x\n    return y\n\n\ndef h():\n    pass\n";
        let (chunks, _) = chunker(400).chunk_source("r", "m.py", src);
        let spans: Vec<_> = chunks.iter().map(|c| (c.span.start_line, c.span.end_line)).collect();
        assert_eq!(spans, [(1, 2), (4, 6), (9, 10)]);
        assert!(chunks.iter().all(|c| c.symbol_kind == SymbolKind::Function));
        assert_eq!(reconstruct(src, &chunks), src);
    }

    #[test]
    fn unsupported_language_is_whole_file() {
        let src = "fn main() {}\n";
        let (chunks, warn) = chunker(400).chunk_source("r", "main.rs", src);
        assert!(warn.is_none());
        assert_eq!(chunks.len(), 1);
        assert_eq!(chunks[0].symbol_kind, SymbolKind::Other);
        assert_eq!(chunks[0].content, src);
    }

    #[test]
    fn parse_failure_degrades_with_warning() {
        let src = "def broken(:\n    pass\n";
        let (chunks, warn) = chunker(400).chunk_source("r", "b.py", src);
        assert!(warn.unwrap().contains("b.py"));
        assert_eq!(chunks.len(), 1);
        assert_eq!(chunks[0].symbol_kind, SymbolKind::Other);
    }

    #[test]
    fn oversize_definitions_split_with_part_suffix() {
        let body: String = (0..9).map(|i| format!("    x{i} = {i}\n")).collect();
        let src = format!("def big():\n{body}");
        let (chunks, _) = chunker(4).chunk_source("r", "big.py", &src);
        let names: Vec<_> = chunks.iter().map(|c| c.symbol_name.as_str()).collect();
        assert_eq!(names, ["big#part1", "big#part2", "big#part3"]);
        assert_eq!(chunks[2].span, Span::new(9, 10));
        assert_eq!(reconstruct(&src, &chunks), src);
    }

    #[test]
    fn duplicate_definitions_get_distinct_ids() {
        let src = "def f():\n    pass\n\ndef f():\n    pass\n";
        let (chunks, _) = chunker(400).chunk_source("r", "d.py", src);
        assert_eq!(chunks.len(), 2);
        assert_ne!(chunks[0].chunk_id, chunks[1].chunk_id);
    }

    #[test]
    fn language_detection() {
        assert_eq!(detect_language("src/a.py"), Some("python"));
        assert_eq!(detect_language("README.MD"), Some("markdown"));
        assert_eq!(detect_language("Makefile"), None);
    }
}
