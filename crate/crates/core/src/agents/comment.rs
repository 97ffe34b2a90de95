use serde::{Deserialize, Serialize};

use super::kind::AgentKind;

/// One review finding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewComment {
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corrective_code: Option<String>,
    pub file_path: String,
    /// New-file line number.
    pub line_number: u32,
    /// In [0, 1].
    pub confidence_score: f64,
    pub bucket: String,
    /// Set by the parser from the agent that produced the text.
    pub agent: AgentKind,
    /// The line is not visible in the diff; post against the file instead.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub file_level: bool,
    /// Agents whose comments were summarized into this one.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub merged_from: Vec<AgentKind>,
}

impl ReviewComment {
    pub fn location(&self) -> (&str, u32) {
        (&self.file_path, self.line_number)
    }
}
