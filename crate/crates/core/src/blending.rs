//! Post-processing of the union of all agents' comments through ordered
//! dimensions.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::agents::{AgentKind, AgentResult, ReviewComment};
use crate::integrations::PrRef;
use crate::llm::{Gateway, ModelRequest};
use crate::report::ReviewReport;

pub const CONFIDENCE_FILTER: &str = "confidence-filter";
pub const OVERLAP_SUMMARIZE: &str = "overlap-summarize";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DimensionKind {
    Filter,
    Transform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DimensionRule {
    ConfidenceFilter,
    OverlapSummarize,
}

impl DimensionRule {
    pub fn name(self) -> &'static str {
        match self {
            DimensionRule::ConfidenceFilter => CONFIDENCE_FILTER,
            DimensionRule::OverlapSummarize => OVERLAP_SUMMARIZE,
        }
    }

    pub fn kind(self) -> DimensionKind {
        match self {
            DimensionRule::ConfidenceFilter => DimensionKind::Filter,
            DimensionRule::OverlapSummarize => DimensionKind::Transform,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlendingDimension {
    pub name: String,
    pub kind: DimensionKind,
    pub order: i32,
    pub rule: DimensionRule,
}

impl BlendingDimension {
    pub fn new(rule: DimensionRule, order: i32) -> Self {
        Self {
            name: rule.name().to_string(),
            kind: rule.kind(),
            order,
            rule,
        }
    }
}

/// Confidence filter at 10, overlap summarization at 20.
pub fn default_dimensions() -> Vec<BlendingDimension> {
    vec![
        BlendingDimension::new(DimensionRule::ConfidenceFilter, 10),
        BlendingDimension::new(DimensionRule::OverlapSummarize, 20),
    ]
}

/// Per-agent confidence thresholds with a fallback for unlisted agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub per_agent: BTreeMap<AgentKind, f64>,
    pub default: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            per_agent: AgentKind::ALL.iter().map(|&k| (k, k.default_threshold())).collect(),
            default: 0.6,
        }
    }
}

/// Keeps a comment iff its confidence reaches its agent's threshold.
/// Order is preserved.
pub fn confidence_filter(comments: Vec<ReviewComment>, thresholds: &Thresholds, warnings: &mut Vec<String>) -> Vec<ReviewComment> {
    let mut warned = BTreeSet::new();
    comments
        .into_iter()
        .filter(|c| {
            let t = match thresholds.per_agent.get(&c.agent) {
                Some(&t) => t,
                None => {
                    if warned.insert(c.agent) {
                        warnings.push(format!("no threshold for {}; using default {}", c.agent, thresholds.default));
                    }
                    thresholds.default
                }
            };
            c.confidence_score >= t
        })
        .collect()
}

/// Writes one description for a group of comments on the same line.
pub trait Summarizer: Sync {
    fn summarize(&self, group: &[ReviewComment]) -> Result<String, String>;
}

/// Summarizes through a model call.
pub struct GatewaySummarizer<'a> {
    pub gateway: &'a Gateway,
    pub model_id: String,
    pub max_output_tokens: u32,
}

impl Summarizer for GatewaySummarizer<'_> {
    fn summarize(&self, group: &[ReviewComment]) -> Result<String, String> {
        let (path, line) = group[0].location();
        let mut user = format!(
            "task: blend.summarize\n\nSeveral reviewers commented on {path} line {line}. Merge their points into one \
             short review comment without losing any distinct concern.\n\n"
        );
        for c in group {
            let _ = writeln!(user, "- ({}) {}", c.agent, c.description.trim());
        }
        let req = ModelRequest {
            model_id: self.model_id.clone(),
            system_prompt: "You merge overlapping code review comments.".into(),
            user_prompt: user,
            max_output_tokens: self.max_output_tokens,
            temperature: 0.0,
            structured_mode: false,
        };
        let text = self.gateway.complete(&req).map_err(|e| e.to_string())?.response.text;
        let text = text.trim();
        if text.is_empty() {
            return Err("empty summary".into());
        }
        Ok(text.to_string())
    }
}

/// Text used when no model summary is available.
pub fn fallback_summary(group: &[ReviewComment]) -> String {
    let mut out = format!("{} reviewers flagged this line:", group.len());
    for c in group {
        let _ = write!(out, "\n- **{}**: {}", c.agent.title(), c.description.trim());
    }
    out
}

/// The member whose bucket and fix a merged comment inherits: highest
/// confidence, then lowest canonical agent, then first seen.
fn representative(group: &[ReviewComment]) -> &ReviewComment {
    group
        .iter()
        .reduce(|best, c| {
            let better =
                c.confidence_score > best.confidence_score || (c.confidence_score == best.confidence_score && c.agent < best.agent);
            if better {
                c
            } else {
                best
            }
        })
        .expect("non-empty group")
}

/// Collapses comments sharing (file, line) into one. Groups keep the
/// position of their first member.
pub fn overlap_summarize(
    comments: Vec<ReviewComment>,
    summarizer: Option<&dyn Summarizer>,
    warnings: &mut Vec<String>,
) -> Vec<ReviewComment> {
    let mut order: Vec<(String, u32)> = Vec::new();
    let mut groups: HashMap<(String, u32), Vec<ReviewComment>> = HashMap::new();
    for c in comments {
        let key = (c.file_path.clone(), c.line_number);
        groups
            .entry(key.clone())
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(c);
    }
    order
        .into_iter()
        .map(|key| {
            let group = groups.remove(&key).expect("grouped");
            if group.len() == 1 {
                return group.into_iter().next().unwrap();
            }
            let description = match summarizer.map(|s| s.summarize(&group)) {
                Some(Ok(text)) => text,
                Some(Err(e)) => {
                    warnings.push(format!("summary of {}:{} failed ({e}); listing comments instead", key.0, key.1));
                    fallback_summary(&group)
                }
                None => fallback_summary(&group),
            };
            let rep = representative(&group);
            let mut merged_from: Vec<AgentKind> = group
                .iter()
                .flat_map(|c| {
                    if c.merged_from.is_empty() {
                        vec![c.agent]
                    } else {
                        c.merged_from.clone()
                    }
                })
                .collect();
            merged_from.sort();
            merged_from.dedup();
            ReviewComment {
                description,
                corrective_code: rep.corrective_code.clone(),
                file_path: rep.file_path.clone(),
                line_number: rep.line_number,
                confidence_score: rep.confidence_score,
                bucket: rep.bucket.clone(),
                agent: rep.agent,
                file_level: rep.file_level,
                merged_from,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlendOutcome {
    pub comments: Vec<ReviewComment>,
    /// Comments removed by each dimension.
    pub dropped: BTreeMap<String, usize>,
    pub warnings: Vec<String>,
}

/// Applies `dims` in ascending order to `comments`.
pub fn blend_comments(
    comments: Vec<ReviewComment>,
    dims: &[BlendingDimension],
    thresholds: &Thresholds,
    summarizer: Option<&dyn Summarizer>,
) -> BlendOutcome {
    let mut dims: Vec<&BlendingDimension> = dims.iter().collect();
    dims.sort_by_key(|d| d.order);
    let mut warnings = Vec::new();
    let mut dropped = BTreeMap::new();
    let mut current = comments;
    for d in dims {
        let before = current.len();
        current = match d.rule {
            DimensionRule::ConfidenceFilter => confidence_filter(current, thresholds, &mut warnings),
            DimensionRule::OverlapSummarize => overlap_summarize(current, summarizer, &mut warnings),
        };
        *dropped.entry(d.name.clone()).or_insert(0) += before - current.len();
    }
    BlendOutcome {
        comments: current,
        dropped,
        warnings,
    }
}

/// Unions every agent's comments (in result order) and blends them into a
/// report. The summary and retrieved context are filled in by the caller.
pub fn blend(
    pr_ref: PrRef,
    results: &[AgentResult],
    dims: &[BlendingDimension],
    thresholds: &Thresholds,
    summarizer: Option<&dyn Summarizer>,
) -> (ReviewReport, Vec<String>) {
    let all: Vec<ReviewComment> = results.iter().flat_map(|r| r.comments.iter().cloned()).collect();
    let outcome = blend_comments(all, dims, thresholds, summarizer);
    let mut report = ReviewReport::empty(pr_ref);
    report.comments = outcome.comments;
    report.dropped_count_by_dimension = outcome.dropped;
    (report, outcome.warnings)
}
