//! One review job end to end: diff, docs, chunks, retrieval, agents,
//! blending, summary, posting. Also the offline local mode and `#dd` chat
//! replies.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{run_all_agents, AgentFailure, AgentKind};
use crate::blending::{blend, GatewaySummarizer, Summarizer};
use crate::chunker::{clone_ephemeral, store_chunks, ChunkStore, MemoryChunkStore, SemanticChunker};
use crate::config::{EngineConfig, ProviderKind};
use crate::context::{build_optimized_context, OptimizedContext};
use crate::diff::UnifiedDiff;
use crate::features::{answer_chat, chat_command_from_comment, chunk_containing, render_summary_comment, summarize_pr, ChatReply};
use crate::integrations::http::{BitbucketClient, ConfluenceClient, GithubClient, GitlabClient, JiraClient};
use crate::integrations::{
    fetch_diff, post_notice, post_review, resolve_knowledge_docs, EventKind, LocalGitVcs, MemoryTracker, MemoryWiki, PostReceipt, PrRef,
    Provider, PullRequestEvent, TrackerClient, VcsClient, VcsError, WikiClient,
};
use crate::llm::{AnthropicProvider, Gateway, ModelProvider, OpenAiProvider, ScriptedProvider, UsageLedger, UsageLedgerEntry};
use crate::report::{ContextChunkRef, ReviewReport};
use crate::retrieval::{retrieve, Embedder, HashingEmbedder, RetrievalQuery};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("cannot build model provider: {0}")]
    Provider(String),
    #[error(transparent)]
    Vcs(#[from] VcsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    /// Reviewed and posted without problems.
    Posted,
    /// Reviewed without problems; posting was not requested.
    Reviewed,
    /// Finished, but some stage fell back or partly failed.
    Degraded,
    SkippedOversize,
    NothingToReview,
    Failed,
}

impl Outcome {
    pub fn is_error(self) -> bool {
        matches!(self, Outcome::Degraded | Outcome::Failed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Fetch,
    Knowledge,
    Chunk,
    Retrieve,
    Agents,
    Blend,
    Summarize,
    Post,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: Stage,
    pub millis: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub pr_ref: PrRef,
    pub outcome: Outcome,
    /// In execution order.
    pub stages: Vec<StageTiming>,
    pub usage: Vec<UsageLedgerEntry>,
    pub warnings: Vec<String>,
    /// Why the run is degraded or failed, outermost cause first.
    pub errors: Vec<String>,
    pub agent_failures: Vec<AgentFailure>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<ReviewReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub receipt: Option<PostReceipt>,
}

impl RunReport {
    fn new(pr_ref: PrRef) -> Self {
        Self {
            pr_ref,
            outcome: Outcome::Failed,
            stages: Vec::new(),
            usage: Vec::new(),
            warnings: Vec::new(),
            errors: Vec::new(),
            agent_failures: Vec::new(),
            report: None,
            receipt: None,
        }
    }

    fn timed<T>(&mut self, stage: Stage, f: impl FnOnce(&mut Self) -> T) -> T {
        let start = Instant::now();
        let out = f(self);
        self.stages.push(StageTiming {
            stage,
            millis: start.elapsed().as_millis() as u64,
        });
        out
    }

    pub fn stage_order(&self) -> Vec<Stage> {
        self.stages.iter().map(|s| s.stage).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRun {
    pub pr_ref: PrRef,
    /// `None` when the comment was not a chat command.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reply: Option<ChatReply>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub posted_id: Option<String>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum JobResult {
    Review(Box<RunReport>),
    Chat(ChatRun),
}

/// Builds the model provider named by the configuration.
pub fn provider_from_config(cfg: &EngineConfig) -> Result<Arc<dyn ModelProvider>, EngineError> {
    let llm = &cfg.llm;
    let timeout = Duration::from_secs(llm.request_timeout_secs);
    let key = llm.api_key.clone().unwrap_or_default();
    Ok(match llm.provider {
        ProviderKind::Mock => {
            let path = llm
                .mock_script
                .as_ref()
                .ok_or_else(|| EngineError::Provider("llm.mock_script is not set".into()))?;
            Arc::new(
                ScriptedProvider::from_file(path)
                    .map_err(|e| EngineError::Provider(e.to_string()))?
                    .with_context_limit(llm.context_limit),
            )
        }
        ProviderKind::Openai => Arc::new(OpenAiProvider::new(
            llm.base_url.as_deref().unwrap_or("https://api.openai.com/v1"),
            &key,
            llm.context_limit,
            timeout,
        )),
        ProviderKind::Anthropic => Arc::new(AnthropicProvider::new(
            llm.base_url.as_deref().unwrap_or("https://api.anthropic.com"),
            &key,
            llm.context_limit,
            timeout,
        )),
    })
}

/// Live VCS client for `provider`, using the configured API base and token.
pub fn vcs_from_config(cfg: &EngineConfig, provider: Provider) -> Arc<dyn VcsClient> {
    let i = &cfg.integrations;
    let (access, default_base) = match provider {
        Provider::Github => (&i.github, "https://api.github.com"),
        Provider::Gitlab => (&i.gitlab, "https://gitlab.com/api/v4"),
        Provider::Bitbucket => (&i.bitbucket, "https://api.bitbucket.org/2.0"),
    };
    let base = access.api_base.as_deref().unwrap_or(default_base);
    let token = access.token.as_deref().unwrap_or("");
    match provider {
        Provider::Github => Arc::new(GithubClient::new(base, token)),
        Provider::Gitlab => Arc::new(GitlabClient::new(base, token)),
        Provider::Bitbucket => Arc::new(BitbucketClient::new(base, token)),
    }
}

/// Shared, concurrency-safe parts of the engine. One value serves any
/// number of concurrent jobs.
pub struct Engine {
    cfg: EngineConfig,
    gateway: Arc<Gateway>,
    store: Arc<dyn ChunkStore>,
    embedder: Arc<dyn Embedder>,
    chunker: SemanticChunker,
    tracker: Arc<dyn TrackerClient>,
    wiki: Arc<dyn WikiClient>,
}

impl Engine {
    pub fn new(cfg: EngineConfig, provider: Arc<dyn ModelProvider>) -> Self {
        let gateway = Arc::new(Gateway::new(provider, cfg.llm.gateway));
        let tracker: Arc<dyn TrackerClient> = match &cfg.integrations.tracker {
            t if t.base_url.is_some() => Arc::new(JiraClient::new(
                t.base_url.as_deref().unwrap_or_default(),
                t.user.as_deref().unwrap_or_default(),
                t.token.as_deref().unwrap_or_default(),
            )),
            _ => Arc::new(MemoryTracker::new()),
        };
        let wiki: Arc<dyn WikiClient> = match &cfg.integrations.wiki {
            w if w.base_url.is_some() => Arc::new(ConfluenceClient::new(
                w.base_url.as_deref().unwrap_or_default(),
                w.user.as_deref().unwrap_or_default(),
                w.token.as_deref().unwrap_or_default(),
            )),
            _ => Arc::new(MemoryWiki::new()),
        };
        Self {
            chunker: SemanticChunker::new(cfg.chunking.chunker.clone()),
            gateway,
            store: Arc::new(MemoryChunkStore::default()),
            embedder: Arc::new(HashingEmbedder::default()),
            tracker,
            wiki,
            cfg,
        }
    }

    /// Engine with the provider the configuration names.
    pub fn from_config(cfg: EngineConfig) -> Result<Self, EngineError> {
        let provider = provider_from_config(&cfg)?;
        Ok(Self::new(cfg, provider))
    }

    pub fn with_store(mut self, store: Arc<dyn ChunkStore>) -> Self {
        self.store = store;
        self
    }

    pub fn with_embedder(mut self, embedder: Arc<dyn Embedder>) -> Self {
        self.embedder = embedder;
        self
    }

    pub fn with_knowledge(mut self, tracker: Arc<dyn TrackerClient>, wiki: Arc<dyn WikiClient>) -> Self {
        self.tracker = tracker;
        self.wiki = wiki;
        self
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }

    /// Routes an event: opened and updated PRs are reviewed, added comments
    /// may be chat commands.
    pub fn handle_event(&self, event: &PullRequestEvent, vcs: &dyn VcsClient) -> JobResult {
        match event.kind {
            EventKind::Opened | EventKind::Updated => JobResult::Review(Box::new(self.review_pull_request(event, vcs, true))),
            EventKind::CommentAdded => JobResult::Chat(self.handle_comment(event, vcs)),
        }
    }

    /// Clones the source branch and stores its chunks under a namespace
    /// tied to the checked-out commit, so chunks from other revisions of
    /// the same repository never show up in this job's retrieval.
    fn chunk_source(&self, event: &PullRequestEvent, run: &mut RunReport) -> Option<String> {
        let ws = match clone_ephemeral(&event.repo_url, &event.source_branch) {
            Ok(ws) => ws,
            Err(e) => {
                run.errors.push(format!("chunking skipped: {e}"));
                return None;
            }
        };
        let namespace = format!("{}@{}", event.repo_id, ws.commit());
        let languages: BTreeSet<String> = self.cfg.chunking.languages.iter().cloned().collect();
        let root = match ws.root() {
            Ok(r) => r,
            Err(e) => {
                run.errors.push(format!("chunking skipped: {e}"));
                return None;
            }
        };
        let outcome = self.chunker.chunk_tree(&namespace, root, &languages);
        run.warnings.extend(outcome.warnings);
        match store_chunks(&outcome.chunks, self.cfg.chunk_ttl(), self.store.as_ref()) {
            Ok(_) => Some(namespace),
            Err(e) => {
                run.errors.push(format!("chunk store unavailable: {e}"));
                None
            }
        }
    }

    fn build_context(&self, event: &PullRequestEvent, diff: UnifiedDiff, run: &mut RunReport) -> OptimizedContext {
        let docs = run.timed(Stage::Knowledge, |_| {
            resolve_knowledge_docs(&event.description, self.tracker.as_ref(), self.wiki.as_ref())
        });
        run.warnings.extend(docs.warnings);
        let namespace = run.timed(Stage::Chunk, |run| self.chunk_source(event, run));
        let chunks = run.timed(Stage::Retrieve, |run| {
            let ns = namespace.as_deref()?;
            let query = RetrievalQuery::from_diff(&diff);
            match retrieve(&query, self.store.as_ref(), ns, self.embedder.as_ref(), &self.cfg.retrieval) {
                Ok(out) => {
                    if let Some(d) = out.degraded {
                        run.errors.push(d);
                    }
                    Some(out.chunks)
                }
                Err(e) => {
                    run.errors.push(format!("retrieval failed: {e}"));
                    None
                }
            }
        });
        build_optimized_context(event, diff, &docs.docs, chunks.unwrap_or_default())
    }

    /// Full review of one pull request. With `post` false nothing is sent
    /// to the VCS and a clean run ends as [`Outcome::Reviewed`].
    pub fn review_pull_request(&self, event: &PullRequestEvent, vcs: &dyn VcsClient, post: bool) -> RunReport {
        let pr = event.pr_ref();
        let mut run = RunReport::new(pr.clone());
        let retry = self.cfg.llm.gateway.retry;

        let diff = run.timed(Stage::Fetch, |_| fetch_diff(event, vcs, self.cfg.max_changed_loc));
        let diff = match diff {
            Ok(d) => d,
            Err(VcsError::Oversized { loc, limit }) => {
                let notice = format!(
                    "This pull request changes {loc} lines, above the automated review limit of {limit}. Automated review was skipped."
                );
                run.warnings.push(notice.clone());
                if post {
                    if let Err(e) = post_notice(&pr, &notice, vcs, &retry) {
                        run.errors.push(format!("notice not posted: {e}"));
                    }
                }
                run.outcome = Outcome::SkippedOversize;
                return run;
            }
            Err(e) => {
                run.errors.push(format!("cannot fetch diff: {e}"));
                return run;
            }
        };
        if diff.is_empty() {
            run.outcome = Outcome::NothingToReview;
            return run;
        }

        let ctx = self.build_context(event, diff, &mut run);

        let ledger = UsageLedger::new();
        let enabled: Vec<AgentKind> = self.cfg.agents.enabled.clone();
        let agents = run.timed(Stage::Agents, |_| {
            run_all_agents(&ctx, &enabled, &self.gateway, &self.cfg.agents.settings, Some(&ledger))
        });
        let outcome = match agents {
            Ok(o) => o,
            Err(e) => {
                run.errors.push(e.to_string());
                run.usage = ledger.rows();
                return run;
            }
        };
        for f in &outcome.failures {
            run.errors.push(f.to_string());
        }
        run.agent_failures = outcome.failures.clone();
        for r in &outcome.results {
            run.warnings.extend(r.warnings.iter().cloned());
            if let Some(p) = &r.parse_failure {
                run.errors.push(format!("{}: {p}", r.agent));
            }
        }

        let summarizer = GatewaySummarizer {
            gateway: &self.gateway,
            model_id: self.cfg.features.summary_model_id.clone(),
            max_output_tokens: self.cfg.features.max_output_tokens,
        };
        let summarizer: Option<&dyn Summarizer> = self.cfg.blending.summarize_with_model.then_some(&summarizer as &dyn Summarizer);
        let (mut report, blend_warnings) = run.timed(Stage::Blend, |_| {
            blend(
                pr.clone(),
                &outcome.results,
                &self.cfg.blending.dimensions(),
                &self.cfg.agents.thresholds(),
                summarizer,
            )
        });
        run.warnings.extend(blend_warnings);

        let (summary, summary_err) = run.timed(Stage::Summarize, |_| summarize_pr(&ctx, &self.gateway, &self.cfg.features));
        if let Some(e) = summary_err {
            run.errors.push(format!("summary degraded: {e}"));
        }
        if self.cfg.post_summary {
            report.summary = Some(summary);
        }
        report.retrieved_context = ctx.relevant_chunks.iter().map(ContextChunkRef::from).collect();

        if post {
            let receipt = run.timed(Stage::Post, |_| post_review(&pr, &report, vcs, &retry));
            for f in &receipt.failures {
                run.errors.push(format!("post failed for {}: {}", f.target, f.error));
            }
            run.receipt = Some(receipt);
        } else {
            run.timed(Stage::Post, |_| ());
        }

        run.usage = ledger.rows();
        run.report = Some(report);
        run.outcome = match (run.errors.is_empty(), post) {
            (false, _) => Outcome::Degraded,
            (true, true) => Outcome::Posted,
            (true, false) => Outcome::Reviewed,
        };
        run
    }

    /// Answers a `#dd` / `#deputydev` comment with a threaded reply. Other
    /// comments are ignored.
    pub fn handle_comment(&self, event: &PullRequestEvent, vcs: &dyn VcsClient) -> ChatRun {
        let pr = event.pr_ref();
        let mut out = ChatRun {
            pr_ref: pr.clone(),
            reply: None,
            posted_id: None,
            warnings: Vec::new(),
        };
        let Some(comment) = &event.comment else {
            out.warnings.push("comment event without a comment".into());
            return out;
        };
        let cmd = match chat_command_from_comment(comment) {
            Ok(Some(c)) => c,
            Ok(None) => return out,
            Err(e) => {
                out.warnings.push(e.to_string());
                return out;
            }
        };
        let mut run = RunReport::new(pr.clone());
        let diff = match fetch_diff(event, vcs, self.cfg.max_changed_loc) {
            Ok(d) => d,
            Err(e) => {
                out.warnings.push(format!("chat context without diff: {e}"));
                UnifiedDiff::default()
            }
        };
        let ctx = self.build_context(event, diff, &mut run);
        out.warnings.extend(run.warnings);
        out.warnings.extend(run.errors);
        let anchor = cmd.anchor.as_ref().and_then(|(p, l)| chunk_containing(&ctx.relevant_chunks, p, *l));
        let reply = answer_chat(&cmd, &ctx, anchor, &self.gateway, &self.cfg.features);
        match vcs.post_reply(&pr, &comment.id, &reply.text) {
            Ok(id) => out.posted_id = Some(id),
            Err(e) => out.warnings.push(format!("reply not posted: {e}")),
        }
        out.reply = Some(reply);
        out
    }

    /// Reviews `head` against `base` in a local working tree. Nothing is
    /// posted.
    pub fn review_local(&self, repo: &Path, base: &str, head: &str, opts: &LocalReview) -> Result<RunReport, EngineError> {
        let repo = repo
            .canonicalize()
            .map_err(|e| VcsError::PullRequestNotFound(format!("{}: {e}", repo.display())))?;
        let vcs = LocalGitVcs::open(&repo)?;
        let base_sha = vcs.resolve(base)?;
        let head_sha = vcs.resolve(head)?;
        let repo_id = repo
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "local".into());
        let event = PullRequestEvent {
            provider: Provider::Github,
            repo_url: repo.display().to_string(),
            repo_id,
            pr_number: opts.pr_number,
            source_branch: head_sha.clone(),
            target_branch: base_sha.clone(),
            title: opts.title.clone().unwrap_or_else(|| format!("Local review {base}..{head}")),
            description: opts.description.clone().unwrap_or_default(),
            author: String::new(),
            kind: EventKind::Opened,
            received_at: chrono::DateTime::UNIX_EPOCH,
            comment: None,
        };
        if base_sha == head_sha {
            let mut run = RunReport::new(event.pr_ref());
            run.outcome = Outcome::NothingToReview;
            return Ok(run);
        }
        Ok(self.review_pull_request(&event, &vcs, false))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalReview {
    pub title: Option<String>,
    pub description: Option<String>,
    pub pr_number: u64,
}

impl Default for LocalReview {
    fn default() -> Self {
        Self {
            title: None,
            description: None,
            pr_number: 1,
        }
    }
}

/// Summary comment text for a finished run, if it has one.
pub fn summary_comment(run: &RunReport) -> Option<String> {
    run.report.as_ref()?.summary.as_ref().map(render_summary_comment)
}
