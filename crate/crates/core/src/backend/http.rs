//! OpenAI-compatible `POST {base_url}/chat/completions` client.

use std::thread;
use std::time::{Duration, Instant};

use serde::Deserialize;
use serde_json::json;

use super::{BackendConfig, BackendError, ChatBackend, ChatRequest, Completion, Usage};

pub struct HttpBackend {
    client: reqwest::blocking::Client,
    url: String,
    model: String,
    api_key: Option<String>,
    max_retries: u32,
    backoff: Duration,
}

#[derive(Deserialize)]
struct ResponseBody {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<ResponseUsage>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct ResponseUsage {
    #[serde(default)]
    prompt_tokens: u32,
    #[serde(default)]
    completion_tokens: u32,
}

enum Attempt {
    Done(Completion),
    /// Worth another try (network error, 5xx, 408, 429).
    Transient(BackendError),
    Fatal(BackendError),
}

impl HttpBackend {
    pub fn new(config: &BackendConfig) -> Result<Self, BackendError> {
        let base = config
            .base_url
            .as_deref()
            .ok_or_else(|| BackendError::Config("HTTP backend requires base_url".into()))?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_s))
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        let api_key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        Ok(HttpBackend {
            client,
            url: format!("{}/chat/completions", base.trim_end_matches('/')),
            model: config.model_name.clone(),
            api_key,
            max_retries: config.max_retries,
            backoff: Duration::from_millis(config.retry_backoff_ms),
        })
    }

    fn body(&self, request: &ChatRequest) -> serde_json::Value {
        let mut body = json!({
            "model": self.model,
            "messages": [
                {"role": "system", "content": request.system_prompt},
                {"role": "user", "content": request.user_prompt},
            ],
            "temperature": request.params.temperature(),
            "max_tokens": request.params.max_new_tokens(),
        });
        if let Some(seed) = request.params.seed() {
            body["seed"] = json!(seed);
        }
        body
    }

    fn attempt(&self, body: &serde_json::Value) -> Attempt {
        let started = Instant::now();
        let mut req = self
            .client
            .post(&self.url)
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(body.to_string());
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = match req.send() {
            Ok(r) => r,
            Err(e) => {
                return Attempt::Transient(BackendError::EndpointUnreachable {
                    attempts: 1,
                    message: e.to_string(),
                })
            }
        };
        let status = resp.status();
        let text = match resp.text() {
            Ok(t) => t,
            Err(e) => {
                return Attempt::Transient(BackendError::EndpointUnreachable {
                    attempts: 1,
                    message: e.to_string(),
                })
            }
        };
        if !status.is_success() {
            let err = BackendError::BadResponse(format!("HTTP {status}: {}", truncate(&text, 300)));
            let transient = status.is_server_error() || status.as_u16() == 408 || status.as_u16() == 429;
            return if transient { Attempt::Transient(err) } else { Attempt::Fatal(err) };
        }
        match parse_body(&text) {
            Ok((content, usage)) => Attempt::Done(Completion {
                text: content,
                usage,
                latency_ms: started.elapsed().as_millis() as u64,
            }),
            Err(e) => Attempt::Fatal(e),
        }
    }
}

impl ChatBackend for HttpBackend {
    fn complete(&self, request: &ChatRequest) -> Result<Completion, BackendError> {
        let body = self.body(request);
        let mut delay = self.backoff;
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.attempt(&body) {
                Attempt::Done(c) => return Ok(c),
                Attempt::Fatal(e) => return Err(e),
                Attempt::Transient(e) if attempts > self.max_retries => {
                    return Err(match e {
                        BackendError::EndpointUnreachable { message, .. } => {
                            BackendError::EndpointUnreachable { attempts, message }
                        }
                        other => other,
                    })
                }
                Attempt::Transient(_) => {
                    thread::sleep(delay);
                    delay = delay.saturating_mul(2);
                }
            }
        }
    }
}

fn parse_body(text: &str) -> Result<(String, Usage), BackendError> {
    let body: ResponseBody = serde_json::from_str(text)
        .map_err(|e| BackendError::BadResponse(format!("malformed completion payload: {e}")))?;
    let content = body
        .choices
        .into_iter()
        .next()
        .and_then(|c| c.message.content)
        .ok_or_else(|| BackendError::BadResponse("payload has no choices[0].message.content".into()))?;
    let usage = body
        .usage
        .map(|u| Usage { prompt_tokens: u.prompt_tokens, completion_tokens: u.completion_tokens })
        .unwrap_or_default();
    Ok((content, usage))
}

fn truncate(s: &str, n: usize) -> &str {
    match s.char_indices().nth(n) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extracts_first_choice_content() {
        let (c, u) = parse_body(
            r#"{"id":"x","choices":[{"index":0,"message":{"role":"assistant","content":"ANSWER: B"}}],
                "usage":{"prompt_tokens":10,"completion_tokens":3,"total_tokens":13}}"#,
        )
        .unwrap();
        assert_eq!(c, "ANSWER: B");
        assert_eq!(u, Usage { prompt_tokens: 10, completion_tokens: 3 });
    }

    #[test]
    fn missing_content_is_bad_response() {
        assert!(matches!(parse_body(r#"{"choices":[]}"#), Err(BackendError::BadResponse(_))));
        assert!(matches!(parse_body("not json"), Err(BackendError::BadResponse(_))));
    }
}
