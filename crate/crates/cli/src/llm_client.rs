//! Blocking HTTP chat-completion client.
//!
//! Sends `{"model", "messages", "temperature": 0}` as JSON and accepts any of
//! the common reply shapes: `choices[0].message.content`, `content`, `text`
//! or `response`.

use std::path::Path;
use std::time::Duration;

use anyhow::Context;
use serde::{Deserialize, Serialize};

use cogstyle_core::eval::{ChatClient, ChatMessage};
use cogstyle_core::Error;

use crate::CliError;

pub const ENV_ENDPOINT: &str = "COGSTYLE_LLM_ENDPOINT";
pub const ENV_MODEL: &str = "COGSTYLE_LLM_MODEL";
pub const ENV_API_KEY: &str = "COGSTYLE_LLM_API_KEY";

#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatConfig {
    pub endpoint: String,
    pub model: String,
    #[serde(default)]
    pub api_key: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_timeout() -> u64 {
    120
}

impl std::fmt::Debug for ChatConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ChatConfig")
            .field("endpoint", &self.endpoint)
            .field("model", &self.model)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .field("timeout_secs", &self.timeout_secs)
            .finish()
    }
}

impl ChatConfig {
    /// Reads a TOML file when given, otherwise the environment. Environment
    /// values fill in anything the file leaves out.
    pub fn resolve(path: Option<&Path>) -> anyhow::Result<Self> {
        let env = |k: &str| std::env::var(k).ok().filter(|v| !v.trim().is_empty());
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                let mut value: toml::Table = toml::from_str(&text)
                    .map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
                for (key, var) in [("endpoint", ENV_ENDPOINT), ("model", ENV_MODEL)] {
                    if !value.contains_key(key) {
                        if let Some(v) = env(var) {
                            value.insert(key.into(), toml::Value::String(v));
                        }
                    }
                }
                toml::Value::Table(value)
                    .try_into::<ChatConfig>()
                    .map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?
            }
            None => ChatConfig {
                endpoint: env(ENV_ENDPOINT).ok_or_else(|| {
                    CliError::Usage(format!("no chat endpoint: pass --llm-config or set {ENV_ENDPOINT}"))
                })?,
                model: env(ENV_MODEL)
                    .ok_or_else(|| CliError::Usage(format!("no model: set {ENV_MODEL}")))?,
                api_key: None,
                timeout_secs: default_timeout(),
            },
        };
        if cfg.api_key.is_none() {
            cfg.api_key = env(ENV_API_KEY);
        }
        Ok(cfg)
    }
}

pub struct HttpChatClient {
    config: ChatConfig,
    http: reqwest::blocking::Client,
}

impl HttpChatClient {
    pub fn new(config: ChatConfig) -> anyhow::Result<Self> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()?;
        Ok(HttpChatClient { config, http })
    }

    pub fn config(&self) -> &ChatConfig {
        &self.config
    }
}

fn extract_text(v: &serde_json::Value) -> Option<String> {
    v.pointer("/choices/0/message/content")
        .or_else(|| v.get("content"))
        .or_else(|| v.get("text"))
        .or_else(|| v.get("response"))
        .and_then(|t| t.as_str())
        .map(str::to_string)
}

impl ChatClient for HttpChatClient {
    fn complete(&self, messages: &[ChatMessage]) -> cogstyle_core::Result<String> {
        let body = serde_json::json!({
            "model": self.config.model,
            "messages": messages,
            "temperature": 0,
        });
        let mut req = self.http.post(&self.config.endpoint).json(&body);
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req
            .send()
            .map_err(|e| Error::Transport(format!("{}: {e}", self.config.endpoint)))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(Error::Transport(format!("{}: HTTP {status}", self.config.endpoint)));
        }
        let value: serde_json::Value = resp
            .json()
            .map_err(|e| Error::Transport(format!("{}: invalid JSON reply: {e}", self.config.endpoint)))?;
        extract_text(&value).ok_or_else(|| {
            Error::Transport(format!("{}: reply carries no message text", self.config.endpoint))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reply_shapes() {
        let openai = serde_json::json!({"choices": [{"message": {"role": "assistant", "content": "hi"}}]});
        assert_eq!(extract_text(&openai).as_deref(), Some("hi"));
        assert_eq!(extract_text(&serde_json::json!({"text": "a"})).as_deref(), Some("a"));
        assert_eq!(extract_text(&serde_json::json!({"other": 1})), None);
    }

    #[test]
    fn config_file_and_redaction() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("llm.toml");
        std::fs::write(&p, "endpoint = \"http://127.0.0.1:9/v1\"\nmodel = \"m\"\napi_key = \"secret\"\n").unwrap();
        let cfg = ChatConfig::resolve(Some(&p)).unwrap();
        assert_eq!(cfg.model, "m");
        assert_eq!(cfg.timeout_secs, 120);
        assert!(!format!("{cfg:?}").contains("secret"));
    }
}
