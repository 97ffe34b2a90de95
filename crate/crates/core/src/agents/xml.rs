//! Tolerant reader for the `<review>` document agents emit.
//!
//! Field contents are taken verbatim up to the matching close tag, so code
//! containing `<` or `&` survives even when the model forgets to escape it.
//! Entities and CDATA sections are decoded.

use thiserror::Error;

use super::comment::ReviewComment;
use super::kind::AgentKind;

const FIELDS: [&str; 6] = [
    "description",
    "corrective_code",
    "file_path",
    "line_number",
    "confidence_score",
    "bucket",
];

/// Document-level problems; nothing can be salvaged.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum XmlError {
    #[error("no <review> element found")]
    MissingRoot,
    #[error("<{0}> is never closed")]
    Unterminated(&'static str),
    #[error("<review> has no <comments> element")]
    MissingComments,
}

/// Per-comment problems. `comment` is the 1-based position of the
/// `<comment>` element in the document.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum XmlWarning {
    #[error("comment {comment}: missing <{field}>; comment skipped")]
    MissingField { comment: usize, field: &'static str },
    #[error("comment {comment}: <{field}> is empty; comment skipped")]
    EmptyField { comment: usize, field: &'static str },
    #[error("comment {comment}: <{field}> is never closed; comment skipped")]
    UnterminatedField { comment: usize, field: &'static str },
    #[error("comment {comment}: line_number {value:?} is not a positive integer; comment skipped")]
    InvalidLineNumber { comment: usize, value: String },
    #[error("comment {comment}: confidence_score {value:?} is not a number; comment skipped")]
    InvalidConfidence { comment: usize, value: String },
    #[error("comment {comment}: confidence_score {value} outside [0, 1]; clamped")]
    ConfidenceClamped { comment: usize, value: f64 },
    #[error("comment {comment}: <{field}> given more than once; first kept")]
    DuplicateField { comment: usize, field: &'static str },
    #[error("comment {comment}: unknown element <{name}> ignored")]
    UnknownElement { comment: usize, name: String },
    #[error("comment {comment}: text outside any field ignored")]
    StrayText { comment: usize },
    #[error("comment {comment}: <comment> is never closed; comment skipped")]
    UnterminatedComment { comment: usize },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParsedReview {
    pub comments: Vec<ReviewComment>,
    pub warnings: Vec<XmlWarning>,
}

/// An opening tag `<name ...>` at or after `from`, returning (start, end of
/// tag, self-closing).
fn find_open(s: &str, name: &str, from: usize) -> Option<(usize, usize, bool)> {
    let mut at = from;
    while let Some(rel) = s.get(at..)?.find('<') {
        let start = at + rel;
        let rest = &s[start + 1..];
        if let Some(after) = rest.strip_prefix(name) {
            let boundary = after.chars().next();
            if matches!(boundary, Some('>' | '/' | ' ' | '\t' | '\n' | '\r')) {
                let close = after.find('>')?;
                let self_closing = after[..close].trim_end().ends_with('/');
                return Some((start, start + 1 + name.len() + close + 1, self_closing));
            }
        }
        at = start + 1;
    }
    None
}

/// The close tag `</name>` at or after `from`, returning (start, end).
fn find_close(s: &str, name: &str, from: usize) -> Option<(usize, usize)> {
    let needle = format!("</{name}");
    let mut at = from;
    while let Some(rel) = s.get(at..)?.find(&needle) {
        let start = at + rel;
        let after = &s[start + needle.len()..];
        let ws = after.len() - after.trim_start().len();
        if after[ws..].starts_with('>') {
            return Some((start, start + needle.len() + ws + 1));
        }
        at = start + 1;
    }
    None
}

fn decode(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut rest = raw;
    while !rest.is_empty() {
        if let Some(body) = rest.strip_prefix("<![CDATA[") {
            match body.find("]]>") {
                Some(end) => {
                    out.push_str(&body[..end]);
                    rest = &body[end + 3..];
                }
                None => {
                    out.push_str(body);
                    rest = "";
                }
            }
            continue;
        }
        if rest.starts_with('&') {
            if let Some(semi) = rest.bytes().take(12).position(|b| b == b';') {
                let entity = &rest[1..semi];
                let decoded = match entity {
                    "lt" => Some('<'),
                    "gt" => Some('>'),
                    "amp" => Some('&'),
                    "quot" => Some('"'),
                    "apos" => Some('\''),
                    _ => entity
                        .strip_prefix("#x")
                        .and_then(|h| u32::from_str_radix(h, 16).ok())
                        .or_else(|| entity.strip_prefix('#').and_then(|d| d.parse().ok()))
                        .and_then(char::from_u32),
                };
                if let Some(c) = decoded {
                    out.push(c);
                    rest = &rest[semi + 1..];
                    continue;
                }
            }
        }
        let c = rest.chars().next().unwrap();
        out.push(c);
        rest = &rest[c.len_utf8()..];
    }
    out
}

fn field_name(name: &str) -> Option<&'static str> {
    FIELDS.iter().copied().find(|f| *f == name)
}

/// The next element tag name starting at `s[at..]` (which begins with '<').
fn tag_name(s: &str) -> &str {
    let body = &s[1..];
    let end = body
        .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == ':'))
        .unwrap_or(body.len());
    &body[..end]
}

fn parse_comment(body: &str, index: usize, agent: AgentKind, warnings: &mut Vec<XmlWarning>) -> Option<ReviewComment> {
    let mut values: [Option<String>; 6] = Default::default();
    let mut pos = 0;
    let mut stray = false;
    while pos < body.len() {
        let Some(rel) = body[pos..].find('<') else {
            stray |= !body[pos..].trim().is_empty();
            break;
        };
        stray |= !body[pos..pos + rel].trim().is_empty();
        let start = pos + rel;
        let name = tag_name(&body[start..]);
        if name.is_empty() {
            // Not an element ("<" in text or a close tag without an opener).
            stray = true;
            pos = start + 1;
            continue;
        }
        let Some((_, open_end, self_closing)) = find_open(body, name, start).filter(|(s, _, _)| *s == start) else {
            stray = true;
            pos = start + 1;
            continue;
        };
        let (content, next) = if self_closing {
            (String::new(), open_end)
        } else {
            match find_close(body, name, open_end) {
                Some((cs, ce)) => (body[open_end..cs].to_string(), ce),
                None => {
                    if let Some(field) = field_name(name) {
                        warnings.push(XmlWarning::UnterminatedField { comment: index, field });
                        return None;
                    }
                    warnings.push(XmlWarning::UnknownElement {
                        comment: index,
                        name: name.to_string(),
                    });
                    pos = open_end;
                    continue;
                }
            }
        };
        match FIELDS.iter().position(|f| *f == name) {
            Some(i) if values[i].is_some() => warnings.push(XmlWarning::DuplicateField {
                comment: index,
                field: FIELDS[i],
            }),
            Some(i) => values[i] = Some(decode(&content)),
            None => warnings.push(XmlWarning::UnknownElement {
                comment: index,
                name: name.to_string(),
            }),
        }
        pos = next;
    }
    if stray {
        warnings.push(XmlWarning::StrayText { comment: index });
    }

    let [description, corrective_code, file_path, line_number, confidence, bucket] = values;
    let mut required = |field: &'static str, v: Option<String>| -> Option<String> {
        match v.map(|s| s.trim().to_string()) {
            None => {
                warnings.push(XmlWarning::MissingField { comment: index, field });
                None
            }
            Some(s) if s.is_empty() => {
                warnings.push(XmlWarning::EmptyField { comment: index, field });
                None
            }
            Some(s) => Some(s),
        }
    };
    let description = required("description", description);
    let file_path = required("file_path", file_path);
    let line_raw = required("line_number", line_number);
    let conf_raw = required("confidence_score", confidence);
    let bucket = required("bucket", bucket);
    let (description, file_path, line_raw, conf_raw, bucket) = (description?, file_path?, line_raw?, conf_raw?, bucket?);

    let line_number = match line_raw.parse::<u32>() {
        Ok(n) if n > 0 => n,
        _ => {
            warnings.push(XmlWarning::InvalidLineNumber {
                comment: index,
                value: line_raw,
            });
            return None;
        }
    };
    let confidence_score = match conf_raw.parse::<f64>() {
        Ok(v) if v.is_finite() => {
            if (0.0..=1.0).contains(&v) {
                v
            } else {
                warnings.push(XmlWarning::ConfidenceClamped { comment: index, value: v });
                v.clamp(0.0, 1.0)
            }
        }
        _ => {
            warnings.push(XmlWarning::InvalidConfidence {
                comment: index,
                value: conf_raw,
            });
            return None;
        }
    };
    let corrective_code = corrective_code
        .map(|c| c.trim_matches(['\n', '\r']).trim_end().to_string())
        .filter(|c| !c.trim().is_empty());
    Some(ReviewComment {
        description,
        corrective_code,
        file_path: file_path.trim_start_matches("./").to_string(),
        line_number,
        confidence_score,
        bucket,
        agent,
        file_level: false,
        merged_from: Vec::new(),
    })
}

/// Extracts every comment of the first `<review>` document in `text`,
/// attributing each to `agent`. Prose around the document is ignored.
pub fn parse_agent_xml(text: &str, agent: AgentKind) -> Result<ParsedReview, XmlError> {
    let (_, root_start, root_empty) = find_open(text, "review", 0).ok_or(XmlError::MissingRoot)?;
    if root_empty {
        return Err(XmlError::MissingComments);
    }
    let (root_end, _) = find_close(text, "review", root_start).ok_or(XmlError::Unterminated("review"))?;
    let review = &text[root_start..root_end];

    let (_, list_start, list_empty) = find_open(review, "comments", 0).ok_or(XmlError::MissingComments)?;
    if list_empty {
        return Ok(ParsedReview::default());
    }
    let (list_end, _) = find_close(review, "comments", list_start).ok_or(XmlError::Unterminated("comments"))?;
    let list = &review[list_start..list_end];

    let mut out = ParsedReview::default();
    let mut pos = 0;
    let mut index = 0;
    while let Some((_, open_end, self_closing)) = find_open(list, "comment", pos) {
        index += 1;
        if self_closing {
            out.warnings.push(XmlWarning::MissingField {
                comment: index,
                field: "description",
            });
            pos = open_end;
            continue;
        }
        let next_open = find_open(list, "comment", open_end).map(|(s, _, _)| s);
        match find_close(list, "comment", open_end) {
            Some((cs, ce)) if next_open.is_none_or(|n| cs < n) => {
                if let Some(c) = parse_comment(&list[open_end..cs], index, agent, &mut out.warnings) {
                    out.comments.push(c);
                }
                pos = ce;
            }
            _ => {
                out.warnings.push(XmlWarning::UnterminatedComment { comment: index });
                match next_open {
                    Some(n) => pos = n,
                    None => break,
                }
            }
        }
    }
    Ok(out)
}

/// The document skeleton agents are asked to produce.
pub const REVIEW_SKELETON: &str = "<review>
  <comments>
    <comment>
      <description></description>
      <corrective_code></corrective_code>
      <file_path></file_path>
      <line_number></line_number>
      <confidence_score></confidence_score>
      <bucket></bucket>
    </comment>
  </comments>
</review>";
