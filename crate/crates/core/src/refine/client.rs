use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::plan::{seed_excerpt, RefinementRequest, TaskKind};
use crate::error::{Error, Result};

/// Environment variable holding the bearer token for the wire client.
pub const TOKEN_ENV: &str = "UDT_GEN_TOKEN";

pub trait GenerationClient: Send + Sync {
    /// One generation attempt; `attempt` counts from 0.
    fn generate(&self, req: &RefinementRequest, attempt: u32) -> std::result::Result<String, String>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 2,
            base_delay_ms: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub text: String,
    /// Set when the endpoint returned more than `max_output_chars`.
    pub truncated: bool,
    pub attempts: u32,
}

/// Calls the client with exponential backoff between failed attempts and
/// clips the result to the request's character budget.
pub fn apply_transformer(req: &RefinementRequest, client: &dyn GenerationClient, retry: &RetryPolicy) -> Result<Candidate> {
    let mut last = String::new();
    for attempt in 0..=retry.max_retries {
        if attempt > 0 && retry.base_delay_ms > 0 {
            let shift = (attempt - 1).min(16);
            thread::sleep(Duration::from_millis(retry.base_delay_ms.saturating_mul(1 << shift)));
        }
        match client.generate(req, attempt) {
            Ok(text) => {
                let max = req.params.max_output_chars;
                let truncated = text.chars().count() > max;
                let text = if truncated { text.chars().take(max).collect() } else { text };
                return Ok(Candidate {
                    text,
                    truncated,
                    attempts: attempt + 1,
                });
            }
            Err(e) => last = e,
        }
    }
    Err(Error::Generation(format!(
        "{} attempts failed for {} {}: {last}",
        retry.max_retries + 1,
        req.kind,
        req.seed_id
    )))
}

/// JSON-over-HTTP endpoint client.
pub struct WireClient {
    url: String,
    token: Option<String>,
    agent: ureq::Agent,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    prompt: &'a str,
    max_chars: usize,
    kind: &'a str,
}

#[derive(Deserialize)]
struct WireResponse {
    text: Option<String>,
    error: Option<String>,
}

impl WireClient {
    pub fn new(url: impl Into<String>, token: Option<String>, timeout: Duration) -> Self {
        WireClient {
            url: url.into(),
            token,
            agent: ureq::AgentBuilder::new().timeout(timeout).build(),
        }
    }

    /// Reads the token from [`TOKEN_ENV`] when set.
    pub fn from_env(url: impl Into<String>, timeout: Duration) -> Self {
        Self::new(url, std::env::var(TOKEN_ENV).ok(), timeout)
    }
}

impl GenerationClient for WireClient {
    fn generate(&self, req: &RefinementRequest, _attempt: u32) -> std::result::Result<String, String> {
        let mut call = self.agent.post(&self.url);
        if let Some(t) = &self.token {
            call = call.set("Authorization", &format!("Bearer {t}"));
        }
        let body = WireRequest {
            prompt: &req.prompt,
            max_chars: req.params.max_output_chars,
            kind: req.kind.as_str(),
        };
        let resp: WireResponse = call
            .send_json(&body)
            .map_err(|e| e.to_string())?
            .into_json()
            .map_err(|e| e.to_string())?;
        match (resp.text, resp.error) {
            (_, Some(e)) => Err(e),
            (Some(t), None) => Ok(t),
            (None, None) => Err("response has neither text nor error".into()),
        }
    }
}

/// One scripted behaviour. A rule applies when every set selector matches;
/// the first applicable rule wins.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MockRule {
    pub kind: Option<TaskKind>,
    pub seed_id: Option<String>,
    /// Canned output; `{seed}` expands to the prompt's seed excerpt.
    /// Without `text` or `error` the rule echoes the excerpt.
    pub text: Option<String>,
    pub error: Option<String>,
    /// Attempts that fail before the rule's response is returned.
    pub fail_times: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MockScript {
    pub rules: Vec<MockRule>,
}

/// Deterministic client driven by a [`MockScript`]. Unmatched requests get
/// the seed excerpt back unchanged.
#[derive(Debug, Clone, Default)]
pub struct MockClient {
    script: MockScript,
}

impl MockClient {
    pub fn identity() -> Self {
        MockClient::default()
    }

    pub fn new(script: MockScript) -> Self {
        MockClient { script }
    }

    pub fn from_json(json: &str) -> Result<Self> {
        Ok(MockClient::new(serde_json::from_str(json)?))
    }
}

impl GenerationClient for MockClient {
    fn generate(&self, req: &RefinementRequest, attempt: u32) -> std::result::Result<String, String> {
        let excerpt = seed_excerpt(&req.prompt).unwrap_or("");
        let rule = self.script.rules.iter().find(|r| {
            r.kind.is_none_or(|k| k == req.kind) && r.seed_id.as_ref().is_none_or(|s| *s == req.seed_id)
        });
        let Some(rule) = rule else {
            return Ok(excerpt.to_string());
        };
        if attempt < rule.fail_times {
            return Err(format!("scripted failure {}", attempt + 1));
        }
        match (&rule.text, &rule.error) {
            (_, Some(e)) => Err(e.clone()),
            (Some(t), None) => Ok(t.replace("{seed}", excerpt)),
            (None, None) => Ok(excerpt.to_string()),
        }
    }
}
