//! HTTP adapters for hosted chat-completion APIs.

use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde_json::{json, Value};

use super::{timed, LlmError, ModelProvider, ModelRequest, ModelResponse};

fn http_client(timeout: Duration) -> Client {
    Client::builder().timeout(timeout).build().expect("http client")
}

fn classify(status: StatusCode, body: &str) -> LlmError {
    let detail = format!("{status}: {}", body.chars().take(300).collect::<String>());
    match status.as_u16() {
        401 | 403 => LlmError::Auth(detail),
        408 | 409 | 429 | 500..=599 => LlmError::Transient(detail),
        _ => LlmError::Provider(detail),
    }
}

fn send(builder: reqwest::blocking::RequestBuilder) -> Result<(Value, Duration), LlmError> {
    let (result, latency) = timed(|| builder.send());
    let resp = result.map_err(|e| LlmError::Transient(e.to_string()))?;
    let status = resp.status();
    let text = resp.text().map_err(|e| LlmError::Transient(e.to_string()))?;
    if !status.is_success() {
        return Err(classify(status, &text));
    }
    let body = serde_json::from_str(&text).map_err(|e| LlmError::Provider(format!("invalid response JSON: {e}")))?;
    Ok((body, latency))
}

fn tokens(v: &Value, key: &str) -> u64 {
    v.get(key).and_then(Value::as_u64).unwrap_or(0)
}

/// Chat-completions style API.
pub struct OpenAiProvider {
    base_url: String,
    api_key: String,
    context_limit: usize,
    client: Client,
}

impl OpenAiProvider {
    pub fn new(base_url: &str, api_key: &str, context_limit: usize, timeout: Duration) -> Self {
        Self {
            base_url: base_url.trim_end_matches('/').to_string(),
            api_key: api_key.to_string(),
            context_limit,
            client: http_client(timeout),
        }
    }
}

impl ModelProvider for OpenAiProvider {
    fn name(&self) -> &str {
        "openai"
    }

    fn context_limit(&self, _model_id: &str) -> usize {
        self.context_limit
    }

    fn complete(&self, req: &ModelRequest) -> Result<ModelResponse, LlmError> {
        let body = json!({
            "model": req.model_id,
            "max_tokens": req.max_output_tokens,
            // Format conversion asks for the most literal output.
            "temperature": if req.structured_mode { 0.0 } else { req.temperature },
            "messages": [
                {"role": "system", "content": req.system_prompt},
                {"role": "user", "content": req.user_prompt},
            ],
        });
        let (v, latency) = send(
            self.client
                .post(format!("{}/chat/completions", self.base_url))
                .bearer_auth(&self.api_key)
                .json(&body),
        )?;
        let text = v["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| LlmError::Provider("response has no message content".into()))?
            .to_string();
        Ok(ModelResponse {
            text,
            input_tokens: tokens(&v["usage"], "prompt_tokens"),
            output_tokens: tokens(&v["usage"], "completion_tokens"),
            latency,
        })
    }
}

/// Messages style API.
pub struct AnthropicProvider {
    base_url: String,
    api_key: String,
    context_limit: usize,
    client: Client,
}

impl AnthropicProvider {
    pub fn new(base_url: &str, api_key: &str, context_limit: usize, timeout: Duration) -> Self {
        Self {
            base_url: base_url.trim_end_matches('/').to_string(),
            api_key: api_key.to_string(),
            context_limit,
            client: http_client(timeout),
        }
    }
}

const XML_PREFILL: &str = "<review>";

impl ModelProvider for AnthropicProvider {
    fn name(&self) -> &str {
        "anthropic"
    }

    fn context_limit(&self, _model_id: &str) -> usize {
        self.context_limit
    }

    fn complete(&self, req: &ModelRequest) -> Result<ModelResponse, LlmError> {
        let mut messages = vec![json!({"role": "user", "content": req.user_prompt})];
        if req.structured_mode {
            // Pin the reply to the review document by starting it ourselves.
            messages.push(json!({"role": "assistant", "content": XML_PREFILL}));
        }
        let body = json!({
            "model": req.model_id,
            "max_tokens": req.max_output_tokens,
            "temperature": if req.structured_mode { 0.0 } else { req.temperature },
            "system": req.system_prompt,
            "messages": messages,
        });
        let (v, latency) = send(
            self.client
                .post(format!("{}/v1/messages", self.base_url))
                .header("x-api-key", &self.api_key)
                .header("anthropic-version", "2023-06-01")
                .json(&body),
        )?;
        let mut text: String = v["content"]
            .as_array()
            .ok_or_else(|| LlmError::Provider("response has no content blocks".into()))?
            .iter()
            .filter_map(|b| b["text"].as_str())
            .collect();
        if req.structured_mode {
            text.insert_str(0, XML_PREFILL);
        }
        Ok(ModelResponse {
            text,
            input_tokens: tokens(&v["usage"], "input_tokens"),
            output_tokens: tokens(&v["usage"], "output_tokens"),
            latency,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_classification() {
        assert!(matches!(classify(StatusCode::UNAUTHORIZED, ""), LlmError::Auth(_)));
        assert!(classify(StatusCode::TOO_MANY_REQUESTS, "").is_transient());
        assert!(classify(StatusCode::BAD_GATEWAY, "").is_transient());
        assert!(matches!(classify(StatusCode::BAD_REQUEST, "x"), LlmError::Provider(_)));
    }
}
