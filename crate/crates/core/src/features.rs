//! PR summaries and `#dd` chat replies.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::chunker::CodeChunk;
use crate::context::{render_parts, OptimizedContext, PartKind};
use crate::diff::UnifiedDiff;
use crate::integrations::PrComment;
use crate::llm::{Gateway, ModelRequest};
use crate::tokens::DEFAULT_CHARS_PER_TOKEN;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SizeClass {
    S,
    M,
    L,
    XL,
    XXL,
}

impl SizeClass {
    pub const ALL: [SizeClass; 5] = [SizeClass::S, SizeClass::M, SizeClass::L, SizeClass::XL, SizeClass::XXL];

    /// S up to 50 changed lines, M up to 100, L up to 200, XL up to 500,
    /// XXL beyond.
    pub fn from_loc(loc: usize) -> Self {
        match loc {
            0..=50 => SizeClass::S,
            51..=100 => SizeClass::M,
            101..=200 => SizeClass::L,
            201..=500 => SizeClass::XL,
            _ => SizeClass::XXL,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SizeClass::S => "S",
            SizeClass::M => "M",
            SizeClass::L => "L",
            SizeClass::XL => "XL",
            SizeClass::XXL => "XXL",
        }
    }

    /// Bucket label with its LOC range, e.g. `0-50 (S)`.
    pub fn range_label(self) -> &'static str {
        match self {
            SizeClass::S => "0-50 (S)",
            SizeClass::M => "51-100 (M)",
            SizeClass::L => "101-200 (L)",
            SizeClass::XL => "201-500 (XL)",
            SizeClass::XXL => ">500 (XXL)",
        }
    }
}

impl fmt::Display for SizeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown size class {0:?}")]
pub struct UnknownSizeClass(pub String);

impl FromStr for SizeClass {
    type Err = UnknownSizeClass;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SizeClass::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| UnknownSizeClass(s.to_string()))
    }
}

/// Review-time estimate per size class, in minutes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimateTable {
    pub s: u32,
    pub m: u32,
    pub l: u32,
    pub xl: u32,
    pub xxl: u32,
}

impl Default for EstimateTable {
    fn default() -> Self {
        Self {
            s: 10,
            m: 20,
            l: 40,
            xl: 90,
            xxl: 180,
        }
    }
}

impl EstimateTable {
    pub fn minutes(&self, class: SizeClass) -> u32 {
        match class {
            SizeClass::S => self.s,
            SizeClass::M => self.m,
            SizeClass::L => self.l,
            SizeClass::XL => self.xl,
            SizeClass::XXL => self.xxl,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrSummary {
    pub summary_text: String,
    pub changed_loc: usize,
    pub size_class: SizeClass,
    pub estimated_review_minutes: u32,
    /// The text is diff statistics because the model call failed.
    #[serde(default)]
    pub degraded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureSettings {
    pub summary_model_id: String,
    pub chat_model_id: String,
    pub max_output_tokens: u32,
    pub prompt_budget_tokens: usize,
    pub chars_per_token: usize,
    pub estimates: EstimateTable,
}

impl Default for FeatureSettings {
    fn default() -> Self {
        Self {
            summary_model_id: "summary-model".into(),
            chat_model_id: "chat-model".into(),
            max_output_tokens: 1024,
            prompt_budget_tokens: 32_000,
            chars_per_token: DEFAULT_CHARS_PER_TOKEN,
            estimates: EstimateTable::default(),
        }
    }
}

/// Per-file change counts, used when no model summary is available.
pub fn diff_statistics(diff: &UnifiedDiff) -> String {
    let mut out = format!(
        "{} file(s) changed, {} insertion(s), {} deletion(s).",
        diff.files.len(),
        diff.added(),
        diff.removed()
    );
    for f in &diff.files {
        let _ = write!(out, "\n- `{}` (+{} -{})", f.path, f.added(), f.removed());
    }
    out
}

/// One model call over title, description and diff. On failure the text
/// falls back to [`diff_statistics`] and the summary is marked degraded;
/// the error is returned alongside.
pub fn summarize_pr(ctx: &OptimizedContext, gateway: &Gateway, settings: &FeatureSettings) -> (PrSummary, Option<String>) {
    let changed_loc = ctx.pr_diff.changed_loc();
    let size_class = SizeClass::from_loc(changed_loc);
    let parts = BTreeSet::from([PartKind::Title, PartKind::Description, PartKind::Diff]);
    let rendered = render_parts(
        ctx,
        &parts,
        None,
        "summary",
        settings.prompt_budget_tokens,
        settings.chars_per_token,
    );
    let req = ModelRequest {
        model_id: settings.summary_model_id.clone(),
        system_prompt: "You write concise pull request summaries for reviewers.".into(),
        user_prompt: format!(
            "task: pr.summary\n\n{}\nSummarize what this pull request changes and why, in a few sentences followed by a short bullet list of the notable changes.",
            rendered.text
        ),
        max_output_tokens: settings.max_output_tokens,
        temperature: 0.2,
        structured_mode: false,
    };
    let (summary_text, error) = match gateway.complete(&req) {
        Ok(c) if !c.response.text.trim().is_empty() => (c.response.text.trim().to_string(), None),
        Ok(_) => (diff_statistics(&ctx.pr_diff), Some("empty summary".to_string())),
        Err(e) => (diff_statistics(&ctx.pr_diff), Some(e.to_string())),
    };
    (
        PrSummary {
            summary_text,
            changed_loc,
            size_class,
            estimated_review_minutes: settings.estimates.minutes(size_class),
            degraded: error.is_some(),
        },
        error,
    )
}

/// Top-level PR comment for a summary.
pub fn render_summary_comment(s: &PrSummary) -> String {
    let mut out = format!(
        "## PR Summary\n\n**Size:** `{}` ({} LOC changed) | **Estimated review time:** ~{} min\n\n{}\n",
        s.size_class,
        s.changed_loc,
        s.estimated_review_minutes,
        s.summary_text.trim_end()
    );
    if s.degraded {
        out.push_str("\n_Summary generated from diff statistics; the model was unavailable._\n");
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChatTrigger {
    Dd,
    Deputydev,
}

impl ChatTrigger {
    pub fn tag(self) -> &'static str {
        match self {
            ChatTrigger::Dd => "#dd",
            ChatTrigger::Deputydev => "#deputydev",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatCommand {
    pub trigger: ChatTrigger,
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<(String, u32)>,
    pub author: String,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChatError {
    #[error("empty chat prompt")]
    EmptyPrompt,
}

/// `Some` iff the trimmed text starts with `#dd` or `#deputydev` followed
/// by whitespace or `-`. Leading dashes and whitespace after the trigger
/// are not part of the prompt.
pub fn parse_chat_command(text: &str) -> Result<Option<ChatCommand>, ChatError> {
    let t = text.trim();
    for trigger in [ChatTrigger::Deputydev, ChatTrigger::Dd] {
        let Some(rest) = t.strip_prefix(trigger.tag()) else {
            continue;
        };
        match rest.chars().next() {
            None => return Err(ChatError::EmptyPrompt),
            Some(c) if c.is_whitespace() || c == '-' => {}
            Some(_) => continue,
        }
        let prompt = rest.trim_start_matches(|c: char| c.is_whitespace() || c == '-').trim_end();
        if prompt.is_empty() {
            return Err(ChatError::EmptyPrompt);
        }
        return Ok(Some(ChatCommand {
            trigger,
            prompt: prompt.to_string(),
            anchor: None,
            author: String::new(),
        }));
    }
    Ok(None)
}

/// [`parse_chat_command`] over a posted comment, keeping its author and
/// inline position.
pub fn chat_command_from_comment(comment: &PrComment) -> Result<Option<ChatCommand>, ChatError> {
    Ok(parse_chat_command(&comment.body)?.map(|mut cmd| {
        cmd.author = comment.author.clone();
        cmd.anchor = comment.file_path.clone().zip(comment.line);
        cmd
    }))
}

/// The chunk containing `line` of `path`.
pub fn chunk_containing<'a>(chunks: &'a [CodeChunk], path: &str, line: u32) -> Option<&'a CodeChunk> {
    chunks.iter().find(|c| c.file_path == path && c.span.contains_line(line))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatReply {
    pub text: String,
    /// Set when the reply is the fixed apology.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_id: Option<String>,
}

/// Builds the chat prompt: PR title, description, related code, diff, the
/// anchored chunk (if any) and the question.
pub fn chat_prompt(cmd: &ChatCommand, ctx: &OptimizedContext, anchor_chunk: Option<&CodeChunk>, settings: &FeatureSettings) -> String {
    let parts = BTreeSet::from([PartKind::Title, PartKind::Description, PartKind::ContextCode, PartKind::Diff]);
    let rendered = render_parts(ctx, &parts, None, "chat", settings.prompt_budget_tokens, settings.chars_per_token);
    let mut user = format!("task: chat\n\n{}", rendered.text);
    if let Some(c) = anchor_chunk {
        let _ = write!(
            user,
            "\n## Code at the comment\n### {}:{}-{} ({})\n```\n{}",
            c.file_path,
            c.span.start_line,
            c.span.end_line,
            c.qualified_name(),
            c.content
        );
        if !c.content.ends_with('\n') {
            user.push('\n');
        }
        user.push_str("```\n");
    }
    if let Some((path, line)) = &cmd.anchor {
        let _ = write!(user, "\nThe question is attached to {path} line {line}.\n");
    }
    let _ = write!(
        user,
        "\n## Question from {}\n{}\n",
        if cmd.author.is_empty() { "the author" } else { &cmd.author },
        cmd.prompt
    );
    user
}

/// One direct model call; failures yield a fixed apology with an error id.
pub fn answer_chat(
    cmd: &ChatCommand,
    ctx: &OptimizedContext,
    anchor_chunk: Option<&CodeChunk>,
    gateway: &Gateway,
    settings: &FeatureSettings,
) -> ChatReply {
    let req = ModelRequest {
        model_id: settings.chat_model_id.clone(),
        system_prompt: "You answer questions about a pull request. You may write code, tests and documentation when asked.".into(),
        user_prompt: chat_prompt(cmd, ctx, anchor_chunk, settings),
        max_output_tokens: settings.max_output_tokens,
        temperature: 0.2,
        structured_mode: false,
    };
    match gateway.complete(&req) {
        Ok(c) => ChatReply {
            text: c.response.text,
            error_id: None,
        },
        Err(e) => {
            let digest = Sha256::digest(format!("{}\0{e}", cmd.prompt).as_bytes());
            let id = hex::encode(&digest[..4]);
            tracing::warn!(error_id = %id, "chat reply failed: {e}");
            ChatReply {
                text: format!("Sorry, I could not answer this right now. Please try again later (error id {id})."),
                error_id: Some(id),
            }
        }
    }
}
