//! Malformed review documents and what the parser must report for each.

use revkit_core::agents::{XmlError, XmlWarning};

pub enum Expect {
    Error(XmlError),
    /// The warning must be present and this many comments recovered.
    Warning(XmlWarning, usize),
}

fn comment(fields: &[(&str, &str)]) -> String {
    let mut s = String::from("<comment>");
    for (k, v) in fields {
        s.push_str(&format!("<{k}>{v}</{k}>"));
    }
    s.push_str("</comment>");
    s
}

fn good_with(over: &[(&str, &str)], drop: &[&str]) -> String {
    let base = [
        ("description", "Unchecked input"),
        ("corrective_code", "check(x)"),
        ("file_path", "a.py"),
        ("line_number", "3"),
        ("confidence_score", "0.9"),
        ("bucket", "error"),
    ];
    let fields: Vec<(&str, &str)> = base
        .iter()
        .filter(|(k, _)| !drop.contains(k))
        .map(|(k, v)| (*k, over.iter().find(|(o, _)| o == k).map_or(*v, |(_, ov)| *ov)))
        .collect();
    comment(&fields)
}

fn doc(comments: &str) -> String {
    format!("<review><comments>{comments}</comments></review>")
}

pub fn cases() -> Vec<(&'static str, String, Expect)> {
    use Expect::*;
    let good = good_with(&[], &[]);
    vec![
        ("prose only", "Looks fine to me.".into(), Error(XmlError::MissingRoot)),
        ("review never closed", "<review><comments>".into(), Error(XmlError::Unterminated("review"))),
        ("review without comments", "<review></review>".into(), Error(XmlError::MissingComments)),
        ("self-closing review", "<review/>".into(), Error(XmlError::MissingComments)),
        (
            "comments never closed",
            format!("<review><comments>{good}</review>"),
            Error(XmlError::Unterminated("comments")),
        ),
        (
            "missing description",
            doc(&good_with(&[], &["description"])),
            Warning(XmlWarning::MissingField { comment: 1, field: "description" }, 0),
        ),
        (
            "missing line number",
            doc(&good_with(&[], &["line_number"])),
            Warning(XmlWarning::MissingField { comment: 1, field: "line_number" }, 0),
        ),
        (
            "empty file path",
            doc(&good_with(&[("file_path", "  ")], &[])),
            Warning(XmlWarning::EmptyField { comment: 1, field: "file_path" }, 0),
        ),
        (
            "field never closed",
            doc("<comment><description>d</description><file_path>a.py</file_path><line_number>3</line_number><confidence_score>0.9</confidence_score><bucket>error</comment>"),
            Warning(XmlWarning::UnterminatedField { comment: 1, field: "bucket" }, 0),
        ),
        (
            "line number not numeric",
            doc(&good_with(&[("line_number", "abc")], &[])),
            Warning(XmlWarning::InvalidLineNumber { comment: 1, value: "abc".into() }, 0),
        ),
        (
            "line number zero",
            doc(&good_with(&[("line_number", "0")], &[])),
            Warning(XmlWarning::InvalidLineNumber { comment: 1, value: "0".into() }, 0),
        ),
        (
            "line number negative",
            doc(&good_with(&[("line_number", "-3")], &[])),
            Warning(XmlWarning::InvalidLineNumber { comment: 1, value: "-3".into() }, 0),
        ),
        (
            "confidence is a word",
            doc(&good_with(&[("confidence_score", "high")], &[])),
            Warning(XmlWarning::InvalidConfidence { comment: 1, value: "high".into() }, 0),
        ),
        (
            "confidence is NaN",
            doc(&good_with(&[("confidence_score", "NaN")], &[])),
            Warning(XmlWarning::InvalidConfidence { comment: 1, value: "NaN".into() }, 0),
        ),
        (
            "confidence above one",
            doc(&good_with(&[("confidence_score", "1.7")], &[])),
            Warning(XmlWarning::ConfidenceClamped { comment: 1, value: 1.7 }, 1),
        ),
        (
            "duplicate bucket",
            doc(&good.replace("</comment>", "<bucket>style</bucket></comment>")),
            Warning(XmlWarning::DuplicateField { comment: 1, field: "bucket" }, 1),
        ),
        (
            "unknown element",
            doc(&good.replace("</comment>", "<severity>high</severity></comment>")),
            Warning(XmlWarning::UnknownElement { comment: 1, name: "severity".into() }, 1),
        ),
        (
            "stray text between fields",
            doc(&good.replace("<bucket>", "note to self <bucket>")),
            Warning(XmlWarning::StrayText { comment: 1 }, 1),
        ),
        (
            "comment never closed before the next",
            doc(&format!("<comment><description>cut off{good}")),
            Warning(XmlWarning::UnterminatedComment { comment: 1 }, 1),
        ),
        (
            "self-closing comment",
            doc(&format!("<comment/>{good}")),
            Warning(XmlWarning::MissingField { comment: 1, field: "description" }, 1),
        ),
    ]
}
