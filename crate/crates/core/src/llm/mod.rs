//! Provider-neutral model calls: a gateway that enforces context limits,
//! bounded concurrency and retries, plus a scripted provider for tests.

mod live;
mod scripted;
mod usage;

use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::retry::RetryPolicy;
use crate::tokens::{estimate_tokens, DEFAULT_CHARS_PER_TOKEN};

pub use live::{AnthropicProvider, OpenAiProvider};
pub use scripted::{prompt_digest, ScriptError, ScriptStep, ScriptedProvider};
pub use usage::{record_usage, UsageLedger, UsageLedgerEntry};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRequest {
    pub model_id: String,
    pub system_prompt: String,
    pub user_prompt: String,
    pub max_output_tokens: u32,
    pub temperature: f64,
    /// Only format-conversion calls constrain the output shape; reasoning
    /// calls run unconstrained.
    pub structured_mode: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResponse {
    pub text: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
    #[serde(with = "duration_ms")]
    pub latency: Duration,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LlmError {
    #[error("prompt needs {needed} tokens but the model allows {limit}")]
    ContextLimit { needed: usize, limit: usize },
    #[error("transient provider failure: {0}")]
    Transient(String),
    #[error("provider unavailable after {attempts} attempts: {last}")]
    Outage { attempts: u32, last: String },
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("provider error: {0}")]
    Provider(String),
}

impl LlmError {
    pub fn is_transient(&self) -> bool {
        matches!(self, LlmError::Transient(_))
    }
}

pub trait ModelProvider: Send + Sync {
    fn name(&self) -> &str;
    /// Total tokens (prompt plus output) the model accepts.
    fn context_limit(&self, model_id: &str) -> usize;
    fn complete(&self, req: &ModelRequest) -> Result<ModelResponse, LlmError>;
}

/// One gateway call as seen by telemetry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallRecord {
    pub model_id: String,
    pub structured_mode: bool,
    pub retries: u32,
    pub ok: bool,
    pub input_tokens: u64,
    pub output_tokens: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub response: ModelResponse,
    pub retries: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GatewayOptions {
    /// Maximum in-flight provider calls.
    pub concurrency: usize,
    pub retry: RetryPolicy,
    pub chars_per_token: usize,
}

impl Default for GatewayOptions {
    fn default() -> Self {
        Self {
            concurrency: 6,
            retry: RetryPolicy::default(),
            chars_per_token: DEFAULT_CHARS_PER_TOKEN,
        }
    }
}

struct Semaphore {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Semaphore);

impl Semaphore {
    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().expect("semaphore poisoned");
        while *free == 0 {
            free = self.cv.wait(free).expect("semaphore poisoned");
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("semaphore poisoned") += 1;
        self.0.cv.notify_one();
    }
}

/// Shared entry point for all model calls.
pub struct Gateway {
    provider: Arc<dyn ModelProvider>,
    options: GatewayOptions,
    permits: Semaphore,
    calls: Mutex<Vec<CallRecord>>,
}

impl Gateway {
    pub fn new(provider: Arc<dyn ModelProvider>, options: GatewayOptions) -> Self {
        Self {
            provider,
            permits: Semaphore {
                free: Mutex::new(options.concurrency.max(1)),
                cv: Condvar::new(),
            },
            options,
            calls: Mutex::new(Vec::new()),
        }
    }

    pub fn provider_name(&self) -> &str {
        self.provider.name()
    }

    pub fn options(&self) -> &GatewayOptions {
        &self.options
    }

    /// Estimated prompt tokens plus the output allowance.
    pub fn required_tokens(&self, req: &ModelRequest) -> usize {
        let cpt = self.options.chars_per_token;
        estimate_tokens(&req.system_prompt, cpt) + estimate_tokens(&req.user_prompt, cpt) + req.max_output_tokens as usize
    }

    /// Sends `req`, retrying transient failures. Requests that cannot fit
    /// the model's context are refused before reaching the provider.
    pub fn complete(&self, req: &ModelRequest) -> Result<Completion, LlmError> {
        let needed = self.required_tokens(req);
        let limit = self.provider.context_limit(&req.model_id);
        if needed > limit {
            return Err(LlmError::ContextLimit { needed, limit });
        }
        let (result, retries) = {
            let _permit = self.permits.acquire();
            self.options.retry.run(|| self.provider.complete(req), LlmError::is_transient)
        };
        let result = result.map_err(|e| match e {
            LlmError::Transient(last) => LlmError::Outage {
                attempts: retries + 1,
                last,
            },
            other => other,
        });
        let (input_tokens, output_tokens) = result.as_ref().map(|r| (r.input_tokens, r.output_tokens)).unwrap_or((0, 0));
        self.calls.lock().expect("telemetry poisoned").push(CallRecord {
            model_id: req.model_id.clone(),
            structured_mode: req.structured_mode,
            retries,
            ok: result.is_ok(),
            input_tokens,
            output_tokens,
        });
        result.map(|response| Completion { response, retries })
    }

    /// Telemetry of every call so far, in completion order.
    pub fn calls(&self) -> Vec<CallRecord> {
        self.calls.lock().expect("telemetry poisoned").clone()
    }

    pub fn total_tokens(&self) -> (u64, u64) {
        self.calls
            .lock()
            .expect("telemetry poisoned")
            .iter()
            .fold((0, 0), |(i, o), c| (i + c.input_tokens, o + c.output_tokens))
    }
}

/// Times a provider call; used by the live adapters.
pub(crate) fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let v = f();
    (v, start.elapsed())
}

mod duration_ms {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}
