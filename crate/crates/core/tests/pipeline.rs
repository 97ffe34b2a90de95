mod common;

use std::sync::Arc;

use revkit_core::agents::AgentKind;
use revkit_core::integrations::{EventKind, MemoryTracker, MemoryVcs, MemoryWiki, PrComment, Provider, PullRequestEvent};
use revkit_core::pipeline::{summary_comment, JobResult, LocalReview, Outcome, Stage};

fn shop_event(repo: &std::path::Path, pr_number: u64) -> PullRequestEvent {
    let mut ev = PullRequestEvent::opened(Provider::Github, "shop", pr_number, "feature", "main", "Cap discounts at 50%");
    ev.repo_url = repo.display().to_string();
    ev.received_at = chrono::DateTime::UNIX_EPOCH;
    ev
}

#[test]
fn process_order_change_retrieves_its_callers_and_callees() {
    let tmp = tempfile::tempdir().unwrap();
    let repo = common::shop_repo(tmp.path());
    let (engine, _) = common::shop_engine(common::shop_config());
    let run = engine.review_local(&repo, "main", "feature", &LocalReview::default()).unwrap();
    assert_eq!(run.outcome, Outcome::Reviewed, "{:?}", run.errors);

    let report = run.report.as_ref().unwrap();
    let symbols: Vec<&str> = report.retrieved_context.iter().map(|c| c.symbol.as_str()).collect();
    for want in ["calculate_total", "apply_discount", "OrderService.create_order"] {
        assert!(symbols.contains(&want), "{want} missing from {symbols:?}");
    }
    let create = report
        .retrieved_context
        .iter()
        .find(|c| c.symbol == "OrderService.create_order")
        .unwrap();
    assert_eq!(create.file_path, "shop/services.py");
}

#[test]
fn shop_review_blends_the_scripted_findings() {
    let tmp = tempfile::tempdir().unwrap();
    let repo = common::shop_repo(tmp.path());
    let (engine, _) = common::shop_engine(common::shop_config());
    let run = engine.review_local(&repo, "main", "feature", &LocalReview::default()).unwrap();
    let report = run.report.as_ref().unwrap();

    let lines: Vec<u32> = report.comments.iter().map(|c| c.line_number).collect();
    assert_eq!(lines, [12, 14, 15]);
    // The 0.3 performance finding is under its threshold.
    assert!(report.comments.iter().all(|c| c.agent != AgentKind::PerformanceOptimization));
    let merged = &report.comments[2];
    assert_eq!(merged.merged_from, [AgentKind::Error, AgentKind::BusinessLogicValidation]);
    assert_eq!(merged.confidence_score, 0.9);
    assert!(merged.description.starts_with("Raising ValueError here breaks"));
    assert_eq!(report.dropped_count_by_dimension["confidence-filter"], 1);
    assert_eq!(report.dropped_count_by_dimension["overlap-summarize"], 1);

    let summary = report.summary.as_ref().unwrap();
    assert_eq!(summary.changed_loc, 2);
    assert!(!summary.degraded);
    assert!(summary_comment(&run).unwrap().contains("~10 min"));
    assert_eq!(
        run.stage_order(),
        [
            Stage::Fetch,
            Stage::Knowledge,
            Stage::Chunk,
            Stage::Retrieve,
            Stage::Agents,
            Stage::Blend,
            Stage::Summarize,
            Stage::Post
        ]
    );
}

#[test]
fn identical_refs_have_nothing_to_review() {
    let tmp = tempfile::tempdir().unwrap();
    let repo = common::shop_repo(tmp.path());
    let (engine, provider) = common::shop_engine(common::shop_config());
    let run = engine.review_local(&repo, "main", "main", &LocalReview::default()).unwrap();
    assert_eq!(run.outcome, Outcome::NothingToReview);
    assert!(run.report.is_none());
    assert!(provider.requests().is_empty());
}

#[test]
fn unknown_ref_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let repo = common::shop_repo(tmp.path());
    let (engine, _) = common::shop_engine(common::shop_config());
    assert!(engine
        .review_local(&repo, "main", "no-such-branch", &LocalReview::default())
        .is_err());
}

#[test]
fn oversized_pull_request_gets_a_notice_and_no_review() {
    let tmp = tempfile::tempdir().unwrap();
    let repo = common::shop_repo(tmp.path());
    let mut cfg = common::shop_config();
    cfg.max_changed_loc = 1;
    let (engine, provider) = common::shop_engine(cfg);
    let vcs = MemoryVcs::new();
    let ev = shop_event(&repo, 7);
    vcs.add_pull_request(ev.pr_ref(), "feature", "main", common::shop_diff(&repo));

    let run = engine.review_pull_request(&ev, &vcs, true);
    assert_eq!(run.outcome, Outcome::SkippedOversize);
    assert!(provider.requests().is_empty());
    let posted = vcs.comments(&ev.pr_ref());
    assert_eq!(posted.len(), 1);
    assert!(posted[0].body.contains("above the automated review limit of 1"));
    assert!(posted[0].file_path.is_none());
}

#[test]
fn posting_run_lands_every_comment_and_the_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let repo = common::shop_repo(tmp.path());
    let (engine, _) = common::shop_engine(common::shop_config());
    let vcs = MemoryVcs::new();
    let ev = shop_event(&repo, 8);
    vcs.add_pull_request(ev.pr_ref(), "feature", "main", common::shop_diff(&repo));

    let JobResult::Review(run) = engine.handle_event(&ev, &vcs) else {
        panic!("opened PR is reviewed")
    };
    assert_eq!(run.outcome, Outcome::Posted, "{:?}", run.errors);
    let posted = vcs.comments(&ev.pr_ref());
    let inline: Vec<u32> = posted.iter().filter_map(|c| c.line).collect();
    assert_eq!(inline, [12, 14, 15]);
    assert!(posted.iter().any(|c| c.line.is_none() && c.body.starts_with("## PR Summary")));
}

#[test]
fn single_agent_still_gets_a_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let repo = common::shop_repo(tmp.path());
    let mut cfg = common::shop_config();
    cfg.agents.enabled = vec![AgentKind::Error];
    let (engine, provider) = common::shop_engine(cfg);
    let run = engine.review_local(&repo, "main", "feature", &LocalReview::default()).unwrap();
    assert_eq!(run.outcome, Outcome::Reviewed);
    let report = run.report.unwrap();
    assert_eq!(report.comments.len(), 1);
    assert_eq!(report.comments[0].agent, AgentKind::Error);
    assert!(report.summary.is_some());
    let reasoning = provider
        .requests()
        .iter()
        .filter(|r| r.user_prompt.starts_with("task: error."))
        .count();
    assert_eq!(reasoning, 2);
    assert_eq!(provider.requests().len(), 3, "two error passes plus the PR summary");
}

#[test]
fn chat_command_gets_a_threaded_reply() {
    let tmp = tempfile::tempdir().unwrap();
    let repo = common::shop_repo(tmp.path());
    let (engine, provider) = common::shop_engine(common::shop_config());
    let vcs = MemoryVcs::new();
    let mut ev = shop_event(&repo, 9);
    vcs.add_pull_request(ev.pr_ref(), "feature", "main", common::shop_diff(&repo));
    ev.kind = EventKind::CommentAdded;
    ev.comment = Some(PrComment {
        id: "c-41".into(),
        body: "#dd what does process_order raise now?".into(),
        author: "alice".into(),
        file_path: Some("shop/pricing.py".into()),
        line: Some(15),
    });

    let JobResult::Chat(chat) = engine.handle_event(&ev, &vcs) else {
        panic!("comment event is a chat")
    };
    let reply = chat.reply.unwrap();
    assert!(reply.error_id.is_none());
    assert!(reply.text.starts_with("process_order now raises ValueError"));
    let posted = vcs.comments(&ev.pr_ref());
    assert_eq!(posted.len(), 1);
    assert_eq!(posted[0].reply_to.as_deref(), Some("c-41"));

    let chat_prompt = provider
        .requests()
        .into_iter()
        .find(|r| r.user_prompt.starts_with("task: chat"))
        .unwrap();
    assert!(chat_prompt.user_prompt.contains("what does process_order raise now?"));
    assert!(chat_prompt.user_prompt.contains("def process_order"));

    // Ordinary comments are not answered.
    ev.comment.as_mut().unwrap().body = "looks good".into();
    let JobResult::Chat(chat) = engine.handle_event(&ev, &vcs) else {
        unreachable!()
    };
    assert!(chat.reply.is_none());
    assert_eq!(vcs.comments(&ev.pr_ref()).len(), 1);
}

#[test]
fn only_business_validation_sees_the_story() {
    let tmp = tempfile::tempdir().unwrap();
    let repo = common::shop_repo(tmp.path());
    let (engine, provider) = common::shop_engine(common::shop_config());
    let engine = engine.with_knowledge(
        Arc::new(MemoryTracker::new().with_issue("SHOP-7", "Cap discounts", "Discounts above fifty percent must be rejected.")),
        Arc::new(MemoryWiki::new()),
    );
    let opts = LocalReview {
        description: Some("Implements SHOP-7.".into()),
        ..LocalReview::default()
    };
    let run = engine.review_local(&repo, "main", "feature", &opts).unwrap();
    assert_eq!(run.outcome, Outcome::Reviewed, "{:?}", run.errors);

    for r in provider.requests() {
        let sees_story = r.user_prompt.contains("Discounts above fifty percent must be rejected.");
        let business = r.user_prompt.starts_with("task: business-logic-validation.");
        if r.user_prompt.starts_with("task: pr.summary") || r.user_prompt.starts_with("task: blend.") {
            continue;
        }
        assert_eq!(sees_story, business, "{}", r.user_prompt.lines().next().unwrap());
    }
}

#[test]
fn local_review_is_deterministic() {
    let runs: Vec<String> = (0..3)
        .map(|_| {
            let tmp = tempfile::tempdir().unwrap();
            let repo = common::shop_repo(tmp.path());
            let (engine, _) = common::shop_engine(common::shop_config());
            let run = engine.review_local(&repo, "main", "feature", &LocalReview::default()).unwrap();
            serde_json::to_string(&(run.outcome, &run.report, &run.warnings, &run.errors, &run.usage)).unwrap()
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[1], runs[2]);
}
