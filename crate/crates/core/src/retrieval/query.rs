use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::LazyLock;

use regex::Regex;

use crate::diff::{LineKind, UnifiedDiff};

static WORD_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[A-Za-z_][A-Za-z0-9_]*").unwrap());

/// Language keywords and filler words that carry no retrieval signal.
const STOPWORDS: &[&str] = &[
    "and", "as", "assert", "async", "await", "bool", "break", "case", "catch", "class", "cls", "const", "continue", "def", "del", "elif",
    "else", "enum", "except", "false", "finally", "fn", "for", "from", "func", "function", "global", "if", "impl", "import", "in", "int",
    "is", "lambda", "let", "mut", "new", "none", "nonlocal", "not", "null", "of", "or", "pass", "pub", "raise", "return", "self", "static",
    "str", "struct", "switch", "the", "this", "throw", "to", "true", "try", "use", "var", "void", "while", "with", "yield", "an", "at",
    "be", "by", "it", "on", "we",
];

static STOPSET: LazyLock<HashSet<&'static str>> = LazyLock::new(|| STOPWORDS.iter().copied().collect());

/// Splits one identifier on underscores and case changes:
/// `parseHTTPResponse_v2` → `parse http response v2`.
fn split_identifier(word: &str, out: &mut Vec<String>) {
    for part in word.split('_').filter(|p| !p.is_empty()) {
        let chars: Vec<char> = part.chars().collect();
        let mut start = 0;
        for i in 1..chars.len() {
            let (prev, cur) = (chars[i - 1], chars[i]);
            let next_lower = chars.get(i + 1).is_some_and(|c| c.is_ascii_lowercase());
            let boundary = (cur.is_ascii_uppercase() && (prev.is_ascii_lowercase() || prev.is_ascii_digit()))
                || (cur.is_ascii_uppercase() && prev.is_ascii_uppercase() && next_lower);
            if boundary {
                out.push(chars[start..i].iter().collect::<String>().to_ascii_lowercase());
                start = i;
            }
        }
        out.push(chars[start..].iter().collect::<String>().to_ascii_lowercase());
    }
}

/// Every identifier term in `text`, in order, with repetitions.
pub fn terms(text: &str) -> Vec<String> {
    let mut raw = Vec::new();
    for m in WORD_RE.find_iter(text) {
        split_identifier(m.as_str(), &mut raw);
    }
    raw.retain(|t| t.len() >= 2 && !t.bytes().all(|b| b.is_ascii_digit()) && !STOPSET.contains(t.as_str()));
    raw
}

/// Term frequencies of `text`.
pub fn term_counts(text: &str) -> HashMap<String, u32> {
    let mut m = HashMap::new();
    for t in terms(text) {
        *m.entry(t).or_insert(0) += 1;
    }
    m
}

/// Diff-derived search query.
#[derive(Debug, Clone, Default)]
pub struct RetrievalQuery {
    /// Deduplicated, in first-appearance order.
    pub extracted_identifiers: Vec<String>,
    /// Changed lines together with the hunk context around them.
    pub query_text: String,
    /// Lines added by the diff, per file, in new-file coordinates. Chunks made
    /// up entirely of these lines are the change itself.
    pub added_lines: BTreeMap<String, HashSet<u32>>,
}

impl RetrievalQuery {
    pub fn from_diff(diff: &UnifiedDiff) -> Self {
        let mut text = String::new();
        let mut added_lines: BTreeMap<String, HashSet<u32>> = BTreeMap::new();
        for file in &diff.files {
            for hunk in &file.hunks {
                for line in hunk.numbered_lines() {
                    text.push_str(line.text);
                    text.push('\n');
                    if let (LineKind::Added, Some(n)) = (line.kind, line.new_line) {
                        added_lines.entry(file.path.clone()).or_default().insert(n);
                    }
                }
            }
        }
        let mut q = Self::from_text(&text);
        q.added_lines = added_lines;
        q
    }

    /// Query over free text with no exclusions.
    pub fn from_text(text: &str) -> Self {
        let mut seen = HashSet::new();
        let extracted_identifiers = terms(text).into_iter().filter(|t| seen.insert(t.clone())).collect();
        Self {
            extracted_identifiers,
            query_text: text.to_string(),
            added_lines: BTreeMap::new(),
        }
    }

    pub fn term_counts(&self) -> HashMap<String, u32> {
        term_counts(&self.query_text)
    }

    /// Whether every line of `[start, end]` in `path` was added by the diff.
    pub fn is_changed_span(&self, path: &str, start: u32, end: u32) -> bool {
        self.added_lines
            .get(path)
            .is_some_and(|lines| (start..=end).all(|l| lines.contains(&l)))
    }
}
