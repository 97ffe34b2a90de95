//! The six review agents: a free-form first pass, a reflection pass that
//! emits the review document, and at most one re-ask when that document
//! cannot be read.

mod comment;
mod kind;
pub mod prompts;
mod xml;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::context::{bundle_for_agent, render_context, OptimizedContext, ReviewPass};
use crate::diff::UnifiedDiff;
use crate::llm::{Gateway, ModelRequest, ModelResponse, UsageLedger};
use crate::tokens::DEFAULT_CHARS_PER_TOKEN;

pub use comment::ReviewComment;
pub use kind::{AgentKind, AgentProfile, UnknownAgent};
pub use xml::{parse_agent_xml, ParsedReview, XmlError, XmlWarning, REVIEW_SKELETON};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentSettings {
    pub model_id: String,
    pub max_output_tokens: u32,
    pub temperature: f64,
    /// Upper bound on the rendered context of one prompt.
    pub prompt_budget_tokens: usize,
    pub chars_per_token: usize,
}

impl Default for AgentSettings {
    fn default() -> Self {
        Self {
            model_id: "review-model".into(),
            max_output_tokens: 2048,
            temperature: 0.2,
            prompt_budget_tokens: 32_000,
            chars_per_token: DEFAULT_CHARS_PER_TOKEN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentResult {
    pub agent: AgentKind,
    /// First-pass text, kept for audit.
    pub single_pass_text: String,
    /// The text the comments were read from: the reflection, or the
    /// re-ask answer when one was needed.
    pub reflection_text: String,
    pub comments: Vec<ReviewComment>,
    pub reasks: u32,
    /// Why no comments could be read, when that happened.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parse_failure: Option<String>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("{agent} failed during {pass}: {error}")]
pub struct AgentFailure {
    pub agent: AgentKind,
    pub pass: ReviewPass,
    pub error: String,
}

#[allow(clippy::too_many_arguments)]
fn call(
    gateway: &Gateway,
    settings: &AgentSettings,
    ledger: Option<&UsageLedger>,
    agent: AgentKind,
    pass: ReviewPass,
    system: String,
    user: String,
    structured_mode: bool,
) -> Result<ModelResponse, AgentFailure> {
    let req = ModelRequest {
        model_id: settings.model_id.clone(),
        system_prompt: system,
        user_prompt: user,
        max_output_tokens: settings.max_output_tokens,
        temperature: settings.temperature,
        structured_mode,
    };
    let resp = gateway
        .complete(&req)
        .map_err(|e| AgentFailure {
            agent,
            pass,
            error: e.to_string(),
        })?
        .response;
    if let Some(l) = ledger {
        l.record(&resp, agent, pass);
    }
    Ok(resp)
}

/// Keeps comments on files the diff touches; a comment whose line is not
/// shown in the diff is moved to file level.
pub fn anchor_comments(comments: Vec<ReviewComment>, diff: &UnifiedDiff, warnings: &mut Vec<String>) -> Vec<ReviewComment> {
    comments
        .into_iter()
        .filter_map(|mut c| {
            let Some(file) = diff.file(&c.file_path) else {
                warnings.push(format!("{}: comment on {} dropped, file is not in the diff", c.agent, c.file_path));
                return None;
            };
            if !file.shows_new_line(c.line_number) {
                warnings.push(format!(
                    "{}: line {} of {} is not in the diff; posting at file level",
                    c.agent, c.line_number, c.file_path
                ));
                c.file_level = true;
            }
            Some(c)
        })
        .collect()
}

/// Single pass, then reflection over the same context plus the first
/// answer. Comments come from the reflection only.
pub fn run_agent(
    agent: AgentKind,
    ctx: &OptimizedContext,
    gateway: &Gateway,
    settings: &AgentSettings,
    ledger: Option<&UsageLedger>,
) -> Result<AgentResult, AgentFailure> {
    let mut warnings = Vec::new();
    let system = prompts::system_prompt(agent);

    let bundle = bundle_for_agent(agent, ReviewPass::SinglePass, None).expect("single pass needs no initial review");
    let rendered = render_context(ctx, &bundle, settings.prompt_budget_tokens, settings.chars_per_token);
    warnings.extend(rendered.warnings);
    let first = call(
        gateway,
        settings,
        ledger,
        agent,
        ReviewPass::SinglePass,
        system.clone(),
        prompts::single_pass_prompt(agent, &rendered.text),
        false,
    )?;

    let bundle = bundle_for_agent(agent, ReviewPass::Reflection, Some(&first.text)).expect("initial review present");
    let rendered = render_context(ctx, &bundle, settings.prompt_budget_tokens, settings.chars_per_token);
    warnings.extend(rendered.warnings);
    let reflection = call(
        gateway,
        settings,
        ledger,
        agent,
        ReviewPass::Reflection,
        system,
        prompts::reflection_prompt(agent, &rendered.text),
        false,
    )?;

    let mut result = AgentResult {
        agent,
        single_pass_text: first.text,
        reflection_text: reflection.text,
        comments: Vec::new(),
        reasks: 0,
        parse_failure: None,
        warnings,
    };

    let parsed = match parse_agent_xml(&result.reflection_text, agent) {
        Ok(p) => Some(p),
        Err(problem) => {
            result.reasks = 1;
            let reask = call(
                gateway,
                settings,
                ledger,
                agent,
                ReviewPass::Reflection,
                prompts::FORMAT_SYSTEM_PROMPT.to_string(),
                prompts::reformat_prompt(agent, &result.reflection_text, &problem.to_string()),
                true,
            );
            match reask {
                Ok(resp) => {
                    result.reflection_text = resp.text;
                    match parse_agent_xml(&result.reflection_text, agent) {
                        Ok(p) => Some(p),
                        Err(e) => {
                            result.parse_failure = Some(format!("unreadable review after re-ask: {e}"));
                            None
                        }
                    }
                }
                Err(e) => {
                    result.parse_failure = Some(format!("re-ask failed: {}", e.error));
                    None
                }
            }
        }
    };
    if let Some(p) = parsed {
        result.warnings.extend(p.warnings.iter().map(|w| format!("{agent}: {w}")));
        result.comments = anchor_comments(p.comments, &ctx.pr_diff, &mut result.warnings);
    }
    if let Some(f) = &result.parse_failure {
        result.warnings.push(format!("{agent}: {f}"));
    }
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentsOutcome {
    /// In canonical agent order.
    pub results: Vec<AgentResult>,
    pub failures: Vec<AgentFailure>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AgentsError {
    #[error("no agents enabled")]
    NoAgentsEnabled,
    #[error("no agent results: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    NoAgentResults(Vec<AgentFailure>),
}

/// Runs the given agents concurrently. Results come back in canonical
/// order whatever the completion order; a failing agent does not affect
/// the others.
pub fn run_all_agents(
    ctx: &OptimizedContext,
    agents: &[AgentKind],
    gateway: &Gateway,
    settings: &AgentSettings,
    ledger: Option<&UsageLedger>,
) -> Result<AgentsOutcome, AgentsError> {
    let mut kinds = agents.to_vec();
    kinds.sort();
    kinds.dedup();
    if kinds.is_empty() {
        return Err(AgentsError::NoAgentsEnabled);
    }
    let outcomes: Vec<Result<AgentResult, AgentFailure>> = std::thread::scope(|s| {
        let handles: Vec<_> = kinds
            .iter()
            .map(|&k| (k, s.spawn(move || run_agent(k, ctx, gateway, settings, ledger))))
            .collect();
        handles
            .into_iter()
            .map(|(k, h)| {
                h.join().unwrap_or_else(|_| {
                    Err(AgentFailure {
                        agent: k,
                        pass: ReviewPass::SinglePass,
                        error: "agent panicked".into(),
                    })
                })
            })
            .collect()
    });
    let mut out = AgentsOutcome {
        results: Vec::new(),
        failures: Vec::new(),
    };
    for o in outcomes {
        match o {
            Ok(r) => out.results.push(r),
            Err(f) => out.failures.push(f),
        }
    }
    if out.results.is_empty() {
        return Err(AgentsError::NoAgentResults(out.failures));
    }
    Ok(out)
}
