mod common;

use std::collections::BTreeSet;
use std::path::PathBuf;

use revkit_core::chunker::{reconstruct, ChunkerConfig, CodeChunk, SemanticChunker, SymbolKind};

fn corpus() -> Vec<(String, String)> {
    let dir = common::fixtures().join("corpus");
    let mut files: Vec<PathBuf> = std::fs::read_dir(&dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    files
        .into_iter()
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read_to_string(&p).unwrap(),
            )
        })
        .collect()
}

fn chunk_all(chunker: &SemanticChunker) -> Vec<(String, Vec<CodeChunk>)> {
    corpus()
        .into_iter()
        .map(|(name, src)| {
            let (chunks, _) = chunker.chunk_source("corpus", &name, &src);
            (name, chunks)
        })
        .collect()
}

#[test]
fn corpus_has_thirty_files() {
    assert_eq!(corpus().len(), 30);
}

#[test]
fn spans_tile_without_overlap_and_reconstruct_exactly() {
    let chunker = SemanticChunker::new(ChunkerConfig::default());
    for (name, src) in corpus() {
        let (chunks, _) = chunker.chunk_source("corpus", &name, &src);
        let lines: Vec<&str> = src.split_inclusive('\n').collect();
        let mut owner = vec![0usize; lines.len()];
        for c in &chunks {
            assert!(
                c.span.start_line >= 1 && c.span.start_line <= c.span.end_line,
                "{name}: {:?}",
                c.span
            );
            assert!(c.span.end_line as usize <= lines.len(), "{name}: {:?}", c.span);
            assert_eq!(
                c.content,
                lines[c.span.start_line as usize - 1..c.span.end_line as usize].concat(),
                "{name}"
            );
            for l in c.span.start_line..=c.span.end_line {
                owner[l as usize - 1] += 1;
            }
        }
        for (i, (n, line)) in owner.iter().zip(&lines).enumerate() {
            assert!(*n <= 1, "{name}: line {} in {n} chunks", i + 1);
            if *n == 0 {
                assert!(line.trim().is_empty(), "{name}: non-blank line {} not covered: {line:?}", i + 1);
            }
        }
        assert_eq!(reconstruct(&src, &chunks), src, "{name}");
    }
}

#[test]
fn chunking_is_deterministic() {
    let chunker = SemanticChunker::new(ChunkerConfig::default());
    let a = chunk_all(&chunker);
    let b = chunk_all(&chunker);
    assert_eq!(a, b);

    let root = common::fixtures().join("corpus");
    let t1 = chunker.chunk_tree("corpus", &root, &BTreeSet::new());
    let t2 = chunker.chunk_tree("corpus", &root, &BTreeSet::new());
    assert_eq!(t1.chunks, t2.chunks);
    assert_eq!(t1.warnings, t2.warnings);
    let ids: BTreeSet<&str> = t1.chunks.iter().map(|c| c.chunk_id.as_str()).collect();
    assert_eq!(ids.len(), t1.chunks.len(), "chunk ids are unique");
}

#[test]
fn corpus_shapes() {
    let chunker = SemanticChunker::new(ChunkerConfig::default());
    let all: std::collections::BTreeMap<String, Vec<CodeChunk>> = chunk_all(&chunker).into_iter().collect();
    let names = |f: &str| all[f].iter().map(|c| c.qualified_name()).collect::<Vec<_>>();

    assert!(all["empty.py"].is_empty());
    // Only methods directly in a top-level class become child chunks;
    // a nested class stays inside its parent's chunk.
    assert_eq!(names("nested.py"), ["Outer", "Outer.method"]);
    assert!(all["nested.py"][0].content.contains("class Inner"));
    assert_eq!(
        names("async_code.py"),
        ["<module>", "fetch", "Client", "Client.get", "Client.close"]
    );
    assert!(names("oversize.py").contains(&"huge#part1".to_string()));
    assert!(all["oversize.py"].iter().all(|c| c.span.end_line - c.span.start_line < 400));
    assert_eq!(all["script.js"].len(), 1);
    assert_eq!(all["script.js"][0].symbol_kind, SymbolKind::Other);
    assert_eq!(all["syntax_error.py"][0].symbol_kind, SymbolKind::Other);

    let dup: BTreeSet<&str> = all["duplicate_names.py"].iter().map(|c| c.chunk_id.as_str()).collect();
    assert_eq!(dup.len(), all["duplicate_names.py"].len());

    // The leading comment belongs to the definition it precedes.
    let helped = all["leading_comments.py"].iter().find(|c| c.symbol_name == "helped").unwrap();
    assert!(helped.content.starts_with("# Helper for things."));
    let fib = all["decorators.py"].iter().find(|c| c.symbol_name == "fib").unwrap();
    assert!(fib.content.starts_with("@trace"));
}

#[test]
fn small_chunk_limit_still_tiles() {
    let chunker = SemanticChunker::new(ChunkerConfig {
        max_chunk_lines: 3,
        ..ChunkerConfig::default()
    });
    for (name, src) in corpus() {
        let (chunks, _) = chunker.chunk_source("corpus", &name, &src);
        assert!(chunks.iter().all(|c| c.span.end_line - c.span.start_line < 3), "{name}");
        assert_eq!(reconstruct(&src, &chunks), src, "{name}");
    }
}
