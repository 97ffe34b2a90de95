//! Accept-then-process webhook service. The HTTP handler only verifies,
//! normalizes and enqueues; a fixed pool of worker threads runs the
//! reviews.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc::{sync_channel, Receiver, SyncSender, TrySendError};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{HeaderMap, StatusCode};
use axum::routing::{get, post};
use axum::{Json, Router};
use revkit_core::integrations::{event_header, parse_request, signature_header, Provider, PullRequestEvent, WebhookError, WebhookRequest};
use revkit_core::pipeline::{vcs_from_config, Engine, JobResult};
use serde_json::{json, Value};

/// Runs one queued event to completion.
pub type JobHandler = dyn Fn(PullRequestEvent) + Send + Sync;

/// Bounded queue drained by `workers` threads.
pub struct WorkerPool {
    tx: Mutex<Option<SyncSender<PullRequestEvent>>>,
    workers: Vec<JoinHandle<()>>,
    queued: Arc<AtomicUsize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueueError {
    Full,
    Closed,
}

impl WorkerPool {
    pub fn start(workers: usize, capacity: usize, handler: Arc<JobHandler>) -> Self {
        let (tx, rx) = sync_channel::<PullRequestEvent>(capacity);
        let rx = Arc::new(Mutex::new(rx));
        let queued = Arc::new(AtomicUsize::new(0));
        let workers = (0..workers.max(1))
            .map(|i| {
                let rx: Arc<Mutex<Receiver<PullRequestEvent>>> = Arc::clone(&rx);
                let handler = Arc::clone(&handler);
                let queued = Arc::clone(&queued);
                std::thread::Builder::new()
                    .name(format!("review-worker-{i}"))
                    .spawn(move || loop {
                        let next = rx.lock().expect("queue lock").recv();
                        let Ok(event) = next else { break };
                        queued.fetch_sub(1, Ordering::SeqCst);
                        let pr = event.pr_ref();
                        if std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| handler(event))).is_err() {
                            tracing::error!(%pr, "review job panicked");
                        }
                    })
                    .expect("spawn worker")
            })
            .collect();
        Self {
            tx: Mutex::new(Some(tx)),
            workers,
            queued,
        }
    }

    /// Never blocks.
    pub fn submit(&self, event: PullRequestEvent) -> Result<(), QueueError> {
        let guard = self.tx.lock().expect("sender lock");
        let tx = guard.as_ref().ok_or(QueueError::Closed)?;
        self.queued.fetch_add(1, Ordering::SeqCst);
        tx.try_send(event).map_err(|e| {
            self.queued.fetch_sub(1, Ordering::SeqCst);
            match e {
                TrySendError::Full(_) => QueueError::Full,
                TrySendError::Disconnected(_) => QueueError::Closed,
            }
        })
    }

    /// Events accepted but not yet picked up by a worker.
    pub fn queued(&self) -> usize {
        self.queued.load(Ordering::SeqCst)
    }

    /// Stops accepting work and waits for queued jobs to finish.
    pub fn shutdown(mut self) {
        self.tx.lock().expect("sender lock").take();
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

#[derive(Clone)]
pub struct AppState {
    pub pool: Arc<WorkerPool>,
    pub webhook_secret: Option<String>,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/webhook/:provider", post(webhook))
        .route("/healthz", get(|| async { "ok" }))
        .with_state(state)
}

fn reply(code: StatusCode, body: Value) -> (StatusCode, Json<Value>) {
    (code, Json(body))
}

async fn webhook(
    State(state): State<AppState>,
    Path(provider): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> (StatusCode, Json<Value>) {
    let provider: Provider = match provider.parse() {
        Ok(p) => p,
        Err(e) => return reply(StatusCode::NOT_FOUND, json!({ "error": format!("{e}") })),
    };
    let header = |name: &str| headers.get(name).and_then(|v| v.to_str().ok());
    let req = WebhookRequest {
        provider,
        body: &body,
        event_header: header(event_header(provider)),
        signature: header(signature_header(provider)),
    };
    let event = match parse_request(&req, state.webhook_secret.as_deref(), chrono::Utc::now()) {
        Ok(e) => e,
        Err(WebhookError::Ignored(why)) => return reply(StatusCode::OK, json!({ "status": "ignored", "reason": why })),
        Err(e @ (WebhookError::MissingSignature | WebhookError::BadSignature)) => {
            return reply(StatusCode::UNAUTHORIZED, json!({ "error": e.to_string() }))
        }
        Err(e) => return reply(StatusCode::BAD_REQUEST, json!({ "error": e.to_string() })),
    };
    let pr = event.pr_ref().to_string();
    match state.pool.submit(event) {
        Ok(()) => reply(StatusCode::ACCEPTED, json!({ "status": "accepted", "pr": pr })),
        Err(QueueError::Full) => reply(StatusCode::SERVICE_UNAVAILABLE, json!({ "error": "review queue is full" })),
        Err(QueueError::Closed) => reply(StatusCode::SERVICE_UNAVAILABLE, json!({ "error": "service is shutting down" })),
    }
}

/// Handler that reviews with `engine` against the live VCS of each event's
/// provider, logging the outcome.
pub fn engine_handler(engine: Arc<Engine>) -> Arc<JobHandler> {
    Arc::new(move |event: PullRequestEvent| {
        let vcs = vcs_from_config(engine.config(), event.provider);
        match engine.handle_event(&event, vcs.as_ref()) {
            JobResult::Review(run) => {
                tracing::info!(pr = %run.pr_ref, outcome = ?run.outcome, errors = run.errors.len(), "review finished")
            }
            JobResult::Chat(chat) => tracing::info!(pr = %chat.pr_ref, replied = chat.posted_id.is_some(), "chat handled"),
        }
    })
}

#[cfg(test)]
mod tests {
    use std::sync::atomic::AtomicBool;
    use std::time::Duration;

    use revkit_core::integrations::sign;

    use super::*;

    const OPENED: &str = r#"{"action":"opened","pull_request":{"number":3,"title":"t","user":{"login":"u"},
        "head":{"ref":"f"},"base":{"ref":"main"}},"repository":{"full_name":"acme/shop","clone_url":"x"}}"#;

    fn event(n: u64) -> PullRequestEvent {
        PullRequestEvent::opened(Provider::Github, "acme/shop", n, "f", "main", "t")
    }

    /// Handler that blocks until `gate` opens.
    fn gated(gate: Arc<AtomicBool>, done: Arc<AtomicUsize>) -> Arc<JobHandler> {
        Arc::new(move |_| {
            while !gate.load(Ordering::SeqCst) {
                std::thread::sleep(Duration::from_millis(5));
            }
            done.fetch_add(1, Ordering::SeqCst);
        })
    }

    async fn post(app: Router, path: &str, headers: &[(&str, &str)], body: &str) -> (u16, Value) {
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        tokio::spawn(async move { axum::serve(listener, app).await });
        let mut req = reqwest::Client::new().post(format!("http://{addr}{path}")).body(body.to_string());
        for (k, v) in headers {
            req = req.header(*k, *v);
        }
        let resp = req.send().await.unwrap();
        (resp.status().as_u16(), resp.json().await.unwrap())
    }

    #[test]
    fn full_queue_rejects_without_blocking() {
        let gate = Arc::new(AtomicBool::new(false));
        let done = Arc::new(AtomicUsize::new(0));
        let pool = WorkerPool::start(1, 2, gated(gate.clone(), done.clone()));
        pool.submit(event(1)).unwrap();
        // Wait for the worker to take the first job so the queue is empty.
        while pool.queued() > 0 {
            std::thread::sleep(Duration::from_millis(1));
        }
        pool.submit(event(2)).unwrap();
        pool.submit(event(3)).unwrap();
        assert_eq!(pool.submit(event(4)), Err(QueueError::Full));
        gate.store(true, Ordering::SeqCst);
        pool.shutdown();
        assert_eq!(done.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn panicking_job_does_not_kill_the_worker() {
        let done = Arc::new(AtomicUsize::new(0));
        let seen = done.clone();
        let pool = WorkerPool::start(
            1,
            4,
            Arc::new(move |ev: PullRequestEvent| {
                if ev.pr_number == 1 {
                    panic!("boom");
                }
                seen.fetch_add(1, Ordering::SeqCst);
            }),
        );
        pool.submit(event(1)).unwrap();
        pool.submit(event(2)).unwrap();
        pool.shutdown();
        assert_eq!(done.load(Ordering::SeqCst), 1);
    }

    #[tokio::test]
    async fn http_contract() {
        let gate = Arc::new(AtomicBool::new(true));
        let done = Arc::new(AtomicUsize::new(0));
        let pool = Arc::new(WorkerPool::start(1, 4, gated(gate, done)));
        let app = || {
            router(AppState {
                pool: Arc::clone(&pool),
                webhook_secret: Some("s".into()),
            })
        };
        let sig = sign("s", OPENED.as_bytes());
        let ok = [("x-github-event", "pull_request"), ("x-hub-signature-256", sig.as_str())];

        let (code, body) = post(app(), "/webhook/github", &ok, OPENED).await;
        assert_eq!((code, body["status"].as_str()), (202, Some("accepted")));
        assert_eq!(body["pr"], "acme/shop#3");

        let (code, _) = post(app(), "/webhook/github", &ok[..1], OPENED).await;
        assert_eq!(code, 401);
        let (code, _) = post(app(), "/webhook/sourceforge", &ok, OPENED).await;
        assert_eq!(code, 404);

        let closed = OPENED.replace("opened", "closed");
        let sig = sign("s", closed.as_bytes());
        let (code, body) = post(
            app(),
            "/webhook/github",
            &[("x-github-event", "pull_request"), ("x-hub-signature-256", &sig)],
            &closed,
        )
        .await;
        assert_eq!((code, body["status"].as_str()), (200, Some("ignored")));

        let broken = "{\"action\":\"opened\"}";
        let sig = sign("s", broken.as_bytes());
        let (code, body) = post(
            app(),
            "/webhook/github",
            &[("x-github-event", "pull_request"), ("x-hub-signature-256", &sig)],
            broken,
        )
        .await;
        assert_eq!(code, 400);
        assert!(body["error"].as_str().unwrap().contains("missing mandatory field"));
    }

    #[tokio::test]
    async fn full_queue_is_503() {
        let gate = Arc::new(AtomicBool::new(false));
        let done = Arc::new(AtomicUsize::new(0));
        let pool = Arc::new(WorkerPool::start(1, 1, gated(gate.clone(), done)));
        pool.submit(event(1)).unwrap();
        while pool.queued() > 0 {
            tokio::time::sleep(Duration::from_millis(1)).await;
        }
        pool.submit(event(2)).unwrap();
        let app = router(AppState {
            pool: Arc::clone(&pool),
            webhook_secret: None,
        });
        let (code, _) = post(app, "/webhook/github", &[("x-github-event", "pull_request")], OPENED).await;
        assert_eq!(code, 503);
        gate.store(true, Ordering::SeqCst);
    }
}
