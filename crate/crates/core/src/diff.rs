//! Unified diff model and a parser that round-trips `git diff` output
//! byte-for-byte.
//!
//! Everything that is not hunk content (the `diff --git` line, `index`,
//! mode and rename headers, `---`/`+++`) is kept verbatim in
//! [`FileDiff::header`], so [`UnifiedDiff::render`] reproduces the input.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("diff parse error at line {line}: {message}")]
pub struct DiffParseError {
    pub line: usize,
    pub message: String,
}

impl DiffParseError {
    fn new(line: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LineKind {
    Added,
    Removed,
    Context,
}

impl LineKind {
    fn prefix(self) -> char {
        match self {
            LineKind::Added => '+',
            LineKind::Removed => '-',
            LineKind::Context => ' ',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffLine {
    pub kind: LineKind,
    /// Line content without the one-character prefix and without the newline.
    pub text: String,
    /// Followed by a `\ No newline at end of file` marker.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub no_newline: bool,
}

impl DiffLine {
    pub fn new(kind: LineKind, text: impl Into<String>) -> Self {
        Self {
            kind,
            text: text.into(),
            no_newline: false,
        }
    }
}

/// A line of a hunk together with its position in the old and new file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NumberedLine<'a> {
    pub kind: LineKind,
    pub old_line: Option<u32>,
    pub new_line: Option<u32>,
    pub text: &'a str,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hunk {
    pub old_start: u32,
    pub old_count: u32,
    pub new_start: u32,
    pub new_count: u32,
    /// Text after the closing `@@`, including its leading space (git puts the
    /// enclosing function signature here).
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub section: String,
    pub lines: Vec<DiffLine>,
}

impl Hunk {
    /// Builds a hunk whose counts are derived from its lines.
    pub fn from_lines(old_start: u32, new_start: u32, lines: Vec<DiffLine>) -> Self {
        let old_count = lines.iter().filter(|l| l.kind != LineKind::Added).count() as u32;
        let new_count = lines.iter().filter(|l| l.kind != LineKind::Removed).count() as u32;
        Self {
            old_start,
            old_count,
            new_start,
            new_count,
            section: String::new(),
            lines,
        }
    }

    pub fn added(&self) -> usize {
        self.lines.iter().filter(|l| l.kind == LineKind::Added).count()
    }

    pub fn removed(&self) -> usize {
        self.lines.iter().filter(|l| l.kind == LineKind::Removed).count()
    }

    /// Whether the declared counts agree with the tagged lines.
    pub fn counts_consistent(&self) -> bool {
        let context = self.lines.len() - self.added() - self.removed();
        self.old_count as usize == context + self.removed() && self.new_count as usize == context + self.added()
    }

    /// Inclusive new-file line range covered by this hunk, if any.
    pub fn new_range(&self) -> Option<(u32, u32)> {
        (self.new_count > 0).then(|| (self.new_start, self.new_start + self.new_count - 1))
    }

    pub fn numbered_lines(&self) -> impl Iterator<Item = NumberedLine<'_>> {
        let mut old = self.old_start;
        let mut new = self.new_start;
        self.lines.iter().map(move |l| {
            let (o, n) = match l.kind {
                LineKind::Context => {
                    let r = (Some(old), Some(new));
                    old += 1;
                    new += 1;
                    r
                }
                LineKind::Removed => {
                    let r = (Some(old), None);
                    old += 1;
                    r
                }
                LineKind::Added => {
                    let r = (None, Some(new));
                    new += 1;
                    r
                }
            };
            NumberedLine {
                kind: l.kind,
                old_line: o,
                new_line: n,
                text: &l.text,
            }
        })
    }

    fn render_header(&self, out: &mut String) {
        let range = |start: u32, count: u32| {
            if count == 1 {
                start.to_string()
            } else {
                format!("{start},{count}")
            }
        };
        let _ = writeln!(
            out,
            "@@ -{} +{} @@{}",
            range(self.old_start, self.old_count),
            range(self.new_start, self.new_count),
            self.section
        );
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDiff {
    /// Repo-relative path in the new tree (old path for deletions).
    pub path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub old_path: Option<String>,
    /// Raw header lines preceding the first hunk.
    #[serde(default)]
    pub header: Vec<String>,
    pub hunks: Vec<Hunk>,
}

impl FileDiff {
    /// A file diff with a synthetic `---`/`+++` header.
    pub fn new(path: impl Into<String>, hunks: Vec<Hunk>) -> Self {
        let path = path.into();
        Self {
            header: vec![format!("--- a/{path}"), format!("+++ b/{path}")],
            path,
            old_path: None,
            hunks,
        }
    }

    pub fn added(&self) -> usize {
        self.hunks.iter().map(Hunk::added).sum()
    }

    pub fn removed(&self) -> usize {
        self.hunks.iter().map(Hunk::removed).sum()
    }

    pub fn is_deleted(&self) -> bool {
        self.header
            .iter()
            .any(|h| h.starts_with("deleted file mode") || h == "+++ /dev/null")
    }

    /// Whether `line` (new-file coordinates) is shown in the diff as an added
    /// or context line.
    pub fn shows_new_line(&self, line: u32) -> bool {
        self.hunks
            .iter()
            .filter(|h| h.new_range().is_some_and(|(s, e)| s <= line && line <= e))
            .flat_map(Hunk::numbered_lines)
            .any(|l| l.new_line == Some(line))
    }

    pub fn new_ranges(&self) -> Vec<(u32, u32)> {
        self.hunks.iter().filter_map(Hunk::new_range).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnifiedDiff {
    /// Lines before the first file (e.g. `git show` commit headers).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub preamble: Vec<String>,
    pub files: Vec<FileDiff>,
}

impl UnifiedDiff {
    pub fn parse(text: &str) -> Result<Self, DiffParseError> {
        Parser::default().run(text)
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }

    /// Total changed lines: added plus removed over all files.
    pub fn changed_loc(&self) -> usize {
        self.files.iter().map(|f| f.added() + f.removed()).sum()
    }

    pub fn added(&self) -> usize {
        self.files.iter().map(FileDiff::added).sum()
    }

    pub fn removed(&self) -> usize {
        self.files.iter().map(FileDiff::removed).sum()
    }

    pub fn file(&self, path: &str) -> Option<&FileDiff> {
        self.files.iter().find(|f| f.path == path)
    }

    pub fn paths(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|f| f.path.as_str())
    }

    /// Serializes back to unified diff text.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for line in &self.preamble {
            out.push_str(line);
            out.push('\n');
        }
        for file in &self.files {
            for line in &file.header {
                out.push_str(line);
                out.push('\n');
            }
            for hunk in &file.hunks {
                hunk.render_header(&mut out);
                for line in &hunk.lines {
                    out.push(line.kind.prefix());
                    out.push_str(&line.text);
                    out.push('\n');
                    if line.no_newline {
                        out.push_str("\\ No newline at end of file\n");
                    }
                }
            }
        }
        out
    }
}

#[derive(Default)]
struct Parser {
    diff: UnifiedDiff,
    current: Option<FileDiff>,
}

impl Parser {
    fn run(mut self, text: &str) -> Result<UnifiedDiff, DiffParseError> {
        let lines: Vec<&str> = text.split_inclusive('\n').map(|l| l.strip_suffix('\n').unwrap_or(l)).collect();
        let mut i = 0;
        while i < lines.len() {
            let line = lines[i];
            if line.starts_with("diff --git ") || line.starts_with("diff --cc ") {
                self.start_file(line);
                i += 1;
            } else if line.starts_with("@@ ") {
                let Some(file) = self.current.as_mut() else {
                    return Err(DiffParseError::new(i + 1, "hunk outside of a file"));
                };
                i = parse_hunk(&lines, i, file)?;
            } else if line.starts_with("--- ") && self.needs_new_file_for_minus() {
                self.start_file(line);
                i += 1;
            } else if let Some(file) = self.current.as_mut() {
                if !file.hunks.is_empty() {
                    return Err(DiffParseError::new(i + 1, format!("unexpected line after hunk: {line:?}")));
                }
                file.header.push(line.to_string());
                i += 1;
            } else {
                self.diff.preamble.push(line.to_string());
                i += 1;
            }
        }
        self.finish_file();
        Ok(self.diff)
    }

    fn needs_new_file_for_minus(&self) -> bool {
        match &self.current {
            None => true,
            Some(f) => !f.hunks.is_empty() || f.header.iter().any(|h| h.starts_with("--- ")),
        }
    }

    fn start_file(&mut self, first: &str) {
        self.finish_file();
        self.current = Some(FileDiff {
            path: String::new(),
            old_path: None,
            header: vec![first.to_string()],
            hunks: Vec::new(),
        });
    }

    fn finish_file(&mut self) {
        if let Some(mut file) = self.current.take() {
            resolve_paths(&mut file);
            self.diff.files.push(file);
        }
    }
}

fn parse_hunk(lines: &[&str], start: usize, file: &mut FileDiff) -> Result<usize, DiffParseError> {
    let header = lines[start];
    let (old_start, old_count, new_start, new_count, section) =
        parse_hunk_header(header).ok_or_else(|| DiffParseError::new(start + 1, format!("malformed hunk header {header:?}")))?;
    let mut hunk = Hunk {
        old_start,
        old_count,
        new_start,
        new_count,
        section,
        lines: Vec::new(),
    };
    let (mut old_left, mut new_left) = (old_count, new_count);
    let mut i = start + 1;
    while old_left > 0 || new_left > 0 {
        let Some(&line) = lines.get(i) else {
            return Err(DiffParseError::new(i, "hunk ended before its declared line counts"));
        };
        let (kind, rest) = match line.chars().next() {
            Some(' ') => (LineKind::Context, &line[1..]),
            // Some tools strip the trailing space of empty context lines.
            None => (LineKind::Context, ""),
            Some('-') => (LineKind::Removed, &line[1..]),
            Some('+') => (LineKind::Added, &line[1..]),
            Some('\\') => {
                mark_no_newline(&mut hunk, i)?;
                i += 1;
                continue;
            }
            _ => return Err(DiffParseError::new(i + 1, format!("unexpected line in hunk: {line:?}"))),
        };
        let budget = match kind {
            LineKind::Context => old_left.min(new_left),
            LineKind::Removed => old_left,
            LineKind::Added => new_left,
        };
        if budget == 0 {
            return Err(DiffParseError::new(i + 1, "hunk has more lines than its header declares"));
        }
        match kind {
            LineKind::Context => {
                old_left -= 1;
                new_left -= 1;
            }
            LineKind::Removed => old_left -= 1,
            LineKind::Added => new_left -= 1,
        }
        hunk.lines.push(DiffLine::new(kind, rest));
        i += 1;
    }
    if lines.get(i).is_some_and(|l| l.starts_with('\\')) {
        mark_no_newline(&mut hunk, i)?;
        i += 1;
    }
    file.hunks.push(hunk);
    Ok(i)
}

fn mark_no_newline(hunk: &mut Hunk, i: usize) -> Result<(), DiffParseError> {
    match hunk.lines.last_mut() {
        Some(last) => {
            last.no_newline = true;
            Ok(())
        }
        None => Err(DiffParseError::new(i + 1, "no-newline marker before any hunk line")),
    }
}

fn parse_hunk_header(line: &str) -> Option<(u32, u32, u32, u32, String)> {
    let rest = line.strip_prefix("@@ -")?;
    let (old, rest) = rest.split_once(" +")?;
    let (new, section) = rest.split_once(" @@")?;
    let range = |s: &str| -> Option<(u32, u32)> {
        match s.split_once(',') {
            Some((a, b)) => Some((a.parse().ok()?, b.parse().ok()?)),
            None => Some((s.parse().ok()?, 1)),
        }
    };
    let (os, oc) = range(old)?;
    let (ns, nc) = range(new)?;
    Some((os, oc, ns, nc, section.to_string()))
}

fn resolve_paths(file: &mut FileDiff) {
    let mut minus = None;
    let mut plus = None;
    let mut rename_from = None;
    let mut rename_to = None;
    let mut git_b = None;
    for h in &file.header {
        if let Some(p) = h.strip_prefix("--- ") {
            minus = strip_side(p, "a/");
        } else if let Some(p) = h.strip_prefix("+++ ") {
            plus = strip_side(p, "b/");
        } else if let Some(p) = h.strip_prefix("rename from ").or_else(|| h.strip_prefix("copy from ")) {
            rename_from = Some(unquote(p));
        } else if let Some(p) = h.strip_prefix("rename to ").or_else(|| h.strip_prefix("copy to ")) {
            rename_to = Some(unquote(p));
        } else if let Some(p) = h.strip_prefix("diff --git ") {
            git_b = git_header_new_path(p);
        }
    }
    let path = plus.clone().or(rename_to).or(git_b).or_else(|| minus.clone()).unwrap_or_default();
    let old = rename_from.or(minus);
    file.old_path = old.filter(|o| *o != path);
    file.path = path;
}

fn strip_side(p: &str, prefix: &str) -> Option<String> {
    // Drop a trailing tab-separated timestamp (plain `diff -u` output).
    let p = p.split('\t').next().unwrap_or(p);
    if p == "/dev/null" {
        return None;
    }
    let p = unquote(p);
    Some(p.strip_prefix(prefix).map(str::to_string).unwrap_or(p))
}

fn git_header_new_path(rest: &str) -> Option<String> {
    // `a/x b/x`; unambiguous when both sides are equal, which holds for
    // everything except renames (handled by `rename to`).
    let idx = rest.rfind(" b/")?;
    Some(unquote(&rest[idx + 1..]).trim_start_matches("b/").to_string())
}

/// Undoes git's C-style path quoting.
fn unquote(p: &str) -> String {
    let Some(inner) = p.strip_prefix('"').and_then(|s| s.strip_suffix('"')) else {
        return p.to_string();
    };
    let mut bytes = Vec::with_capacity(inner.len());
    let mut chars = inner.bytes().peekable();
    while let Some(b) = chars.next() {
        if b != b'\\' {
            bytes.push(b);
            continue;
        }
        match chars.next() {
            Some(b'n') => bytes.push(b'\n'),
            Some(b't') => bytes.push(b'\t'),
            Some(b'"') => bytes.push(b'"'),
            Some(b'\\') => bytes.push(b'\\'),
            Some(d @ b'0'..=b'7') => {
                let mut v = u32::from(d - b'0');
                for _ in 0..2 {
                    if let Some(&n @ b'0'..=b'7') = chars.peek() {
                        v = v * 8 + u32::from(n - b'0');
                        chars.next();
                    }
                }
                bytes.push(v as u8);
            }
            Some(other) => bytes.push(other),
            None => bytes.push(b'\\'),
        }
    }
    String::from_utf8_lossy(&bytes).into_owned()
}
