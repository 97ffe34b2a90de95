mod common;

use revkit_core::agents::{AgentKind, ReviewComment};
use revkit_core::features::{PrSummary, SizeClass};
use revkit_core::integrations::{
    extract_references, parse_request, post_review, sign, EventKind, MemoryVcs, PostedKind, PrRef, Provider, PullRequestEvent, Reference,
    WebhookError, WebhookRequest,
};
use revkit_core::report::ReviewReport;
use revkit_core::retry::RetryPolicy;

fn payload(name: &str) -> Vec<u8> {
    std::fs::read(common::fixtures().join("webhooks").join(name)).unwrap()
}

fn parse(provider: Provider, name: &str, header: &str) -> Result<PullRequestEvent, WebhookError> {
    let body = payload(name);
    let req = WebhookRequest {
        provider,
        body: &body,
        event_header: Some(header),
        signature: None,
    };
    parse_request(&req, None, chrono::DateTime::UNIX_EPOCH)
}

#[test]
fn provider_payloads_normalize_to_one_shape() {
    let gh = parse(Provider::Github, "github_opened.json", "pull_request").unwrap();
    assert_eq!((gh.repo_id.as_str(), gh.pr_number, gh.kind), ("acme/shop", 42, EventKind::Opened));
    assert_eq!(
        (gh.source_branch.as_str(), gh.target_branch.as_str()),
        ("feature/cap-discounts", "main")
    );
    assert_eq!(gh.repo_url, "https://github.com/acme/shop.git");
    assert_eq!(gh.author, "octocat");
    let refs = extract_references(&gh.description, |u| u.contains("/wiki/"));
    assert_eq!(refs[0], Reference::Ticket("SHOP-7".into()));
    assert!(matches!(&refs[1], Reference::Wiki(u) if u.ends_with("Discount+caps")));

    let gl = parse(Provider::Gitlab, "gitlab_merge_request.json", "Merge Request Hook").unwrap();
    assert_eq!((gl.repo_id.as_str(), gl.pr_number, gl.kind), ("acme/shop", 17, EventKind::Updated));
    assert_eq!(gl.source_branch, "cap-discounts");

    let bb = parse(Provider::Bitbucket, "bitbucket_created.json", "pullrequest:created").unwrap();
    assert_eq!((bb.repo_id.as_str(), bb.pr_number, bb.kind), ("acme/shop", 5, EventKind::Opened));
    assert_eq!(bb.description, "See SHOP-7");
}

#[test]
fn comment_payloads_carry_the_anchor() {
    let gh = parse(Provider::Github, "github_review_comment.json", "pull_request_review_comment").unwrap();
    assert_eq!(gh.kind, EventKind::CommentAdded);
    let c = gh.comment.unwrap();
    assert_eq!(
        (c.id.as_str(), c.file_path.as_deref(), c.line),
        ("9001", Some("shop/pricing.py"), Some(15))
    );
    assert!(gh.description.is_empty());

    let gl = parse(Provider::Gitlab, "gitlab_note.json", "Note Hook").unwrap();
    let c = gl.comment.unwrap();
    assert_eq!((c.id.as_str(), c.line, c.author.as_str()), ("555", Some(14), "reviewer"));

    let bb = parse(Provider::Bitbucket, "bitbucket_comment.json", "pullrequest:comment_created").unwrap();
    let c = bb.comment.unwrap();
    assert_eq!(
        (c.body.as_str(), c.author.as_str(), c.line),
        ("#dd why raise instead of clamping?", "Review Er", Some(15))
    );
}

#[test]
fn closed_pull_requests_are_ignored() {
    assert!(matches!(
        parse(Provider::Github, "github_closed.json", "pull_request"),
        Err(WebhookError::Ignored(_))
    ));
    assert!(matches!(
        parse(Provider::Github, "github_opened.json", "push"),
        Err(WebhookError::Ignored(_))
    ));
}

#[test]
fn signatures_per_provider() {
    let body = payload("github_opened.json");
    let secret = "s3cret";
    let good = sign(secret, &body);
    for provider in [Provider::Github, Provider::Bitbucket] {
        let header = if provider == Provider::Github {
            "pull_request"
        } else {
            "pullrequest:created"
        };
        let body = if provider == Provider::Github {
            body.clone()
        } else {
            payload("bitbucket_created.json")
        };
        let sig = sign(secret, &body);
        let ok = WebhookRequest {
            provider,
            body: &body,
            event_header: Some(header),
            signature: Some(&sig),
        };
        assert!(parse_request(&ok, Some(secret), chrono::Utc::now()).is_ok(), "{provider}");
        let missing = WebhookRequest { signature: None, ..ok };
        assert_eq!(
            parse_request(&missing, Some(secret), chrono::Utc::now()),
            Err(WebhookError::MissingSignature)
        );
        let wrong = sign("other", &body);
        let bad = WebhookRequest {
            signature: Some(&wrong),
            ..ok
        };
        assert_eq!(
            parse_request(&bad, Some(secret), chrono::Utc::now()),
            Err(WebhookError::BadSignature)
        );
    }

    // A tampered body fails even with a signature that was valid for the original.
    let mut tampered = body.clone();
    tampered[0] = b' ';
    let req = WebhookRequest {
        provider: Provider::Github,
        body: &tampered,
        event_header: Some("pull_request"),
        signature: Some(&good),
    };
    assert_eq!(
        parse_request(&req, Some(secret), chrono::Utc::now()),
        Err(WebhookError::BadSignature)
    );

    let gl = payload("gitlab_merge_request.json");
    let req = WebhookRequest {
        provider: Provider::Gitlab,
        body: &gl,
        event_header: Some("Merge Request Hook"),
        signature: Some(secret),
    };
    assert!(parse_request(&req, Some(secret), chrono::Utc::now()).is_ok());
    let req = WebhookRequest {
        signature: Some("guess"),
        ..req
    };
    assert_eq!(
        parse_request(&req, Some(secret), chrono::Utc::now()),
        Err(WebhookError::BadSignature)
    );
}

const DIFF: &str = "\
diff --git a/shop/pricing.py b/shop/pricing.py
--- a/shop/pricing.py
+++ b/shop/pricing.py
@@ -12,4 +12,6 @@ def process_order(items, discount_percent):
 def process_order(items, discount_percent):
     total = calculate_total(items)
+    if discount_percent > 50:
+        raise ValueError(\"Discount cannot exceed 50%\")
     return apply_discount(total, discount_percent)

";

fn comment(line: u32, agent: AgentKind) -> ReviewComment {
    ReviewComment {
        description: format!("finding on line {line}"),
        corrective_code: Some("MAX_DISCOUNT_PERCENT = 50".into()),
        file_path: "shop/pricing.py".into(),
        line_number: line,
        confidence_score: 0.8,
        bucket: "readability".into(),
        agent,
        file_level: false,
        merged_from: Vec::new(),
    }
}

fn report(pr: &PrRef) -> ReviewReport {
    let mut r = ReviewReport::empty(pr.clone());
    r.comments = vec![comment(14, AgentKind::CodeMaintainability), comment(15, AgentKind::Error)];
    r.summary = Some(PrSummary {
        summary_text: "Rejects large discounts.".into(),
        changed_loc: 2,
        size_class: SizeClass::S,
        estimated_review_minutes: 10,
        degraded: false,
    });
    r
}

fn setup() -> (MemoryVcs, PrRef) {
    let vcs = MemoryVcs::new();
    let pr = PrRef {
        repo_id: "acme/shop".into(),
        pr_number: 42,
    };
    vcs.add_pull_request(pr.clone(), "feature", "main", DIFF);
    (vcs, pr)
}

#[test]
fn reposting_the_same_review_adds_nothing() {
    let (vcs, pr) = setup();
    let retry = RetryPolicy::immediate(3);
    let first = post_review(&pr, &report(&pr), &vcs, &retry);
    assert_eq!(first.posted.len(), 3);
    assert!(first.failures.is_empty());
    let kinds: Vec<PostedKind> = first.posted.iter().map(|p| p.kind).collect();
    assert_eq!(kinds, [PostedKind::Inline, PostedKind::Inline, PostedKind::Summary]);

    let second = post_review(&pr, &report(&pr), &vcs, &retry);
    assert!(second.posted.is_empty());
    assert_eq!(second.duplicates_skipped, 3);
    assert_eq!(vcs.comments(&pr).len(), 3);

    // A changed finding is new content and is posted.
    let mut changed = report(&pr);
    changed.comments[0].description = "different wording".into();
    let third = post_review(&pr, &changed, &vcs, &retry);
    assert_eq!(third.posted.len(), 1);
    assert_eq!(third.duplicates_skipped, 2);
}

#[test]
fn force_push_moves_stale_lines_to_file_level() {
    let (vcs, pr) = setup();
    // The new head no longer shows lines 14-15.
    vcs.replace_diff(
        &pr,
        "diff --git a/shop/pricing.py b/shop/pricing.py\n--- a/shop/pricing.py\n+++ b/shop/pricing.py\n@@ -1,1 +1,2 @@\n+import math\n def calculate_total(items):\n",
    );
    let receipt = post_review(&pr, &report(&pr), &vcs, &RetryPolicy::immediate(2));
    assert!(receipt.failures.is_empty(), "{:?}", receipt.failures);
    let fell: Vec<bool> = receipt.posted.iter().map(|p| p.fell_back).collect();
    assert_eq!(fell, [true, true, false]);
    assert!(vcs.comments(&pr).iter().filter(|c| c.file_path.is_some()).all(|c| c.line.is_none()));
}

#[test]
fn transient_post_failures_are_retried_and_outages_reported() {
    let (vcs, pr) = setup();
    vcs.fail_next_posts(2);
    let receipt = post_review(&pr, &report(&pr), &vcs, &RetryPolicy::immediate(3));
    assert!(receipt.failures.is_empty());
    assert_eq!(receipt.posted.len(), 3);

    let (vcs, pr) = setup();
    vcs.reject_all_posts(true);
    let receipt = post_review(&pr, &report(&pr), &vcs, &RetryPolicy::immediate(2));
    assert!(receipt.is_partial());
    assert_eq!(receipt.failures.len(), 3);
    assert!(vcs.comments(&pr).is_empty());
}
