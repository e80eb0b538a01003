use serde::{Deserialize, Serialize};

use super::AgentError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn user(content: impl Into<String>) -> Self {
        Message { role: Role::User, content: content.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeParams {
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for DecodeParams {
    fn default() -> Self {
        DecodeParams { temperature: 0.0, max_tokens: 2048 }
    }
}

/// Chat-completion contract: system text plus messages in, text out.
pub trait ChatBackend: Send + Sync {
    fn id(&self) -> &str;

    /// Whether equal inputs and seed always give equal output.
    fn deterministic(&self) -> bool;

    fn complete(&self, system: &str, messages: &[Message], params: &DecodeParams, seed: u64) -> Result<String, AgentError>;
}

pub const ENV_BASE_URL: &str = "MATHPREP_BASE_URL";
pub const ENV_API_KEY: &str = "MATHPREP_API_KEY";
pub const ENV_MODEL: &str = "MATHPREP_MODEL";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HttpBackendConfig {
    pub base_url: String,
    pub model: String,
    #[serde(skip_serializing, default)]
    pub api_key: Option<String>,
    pub timeout_secs: u64,
}

impl HttpBackendConfig {
    /// Reads the base URL, key and model id from the environment.
    pub fn from_env() -> Result<Self, AgentError> {
        let base_url = std::env::var(ENV_BASE_URL).map_err(|_| AgentError::Backend(format!("{ENV_BASE_URL} is not set")))?;
        let model = std::env::var(ENV_MODEL).map_err(|_| AgentError::Backend(format!("{ENV_MODEL} is not set")))?;
        Ok(HttpBackendConfig { base_url, model, api_key: std::env::var(ENV_API_KEY).ok(), timeout_secs: 120 })
    }
}

/// OpenAI-style `POST {base_url}/chat/completions` client.
#[cfg(feature = "http")]
pub struct HttpBackend {
    config: HttpBackendConfig,
    agent: ureq::Agent,
    id: String,
}

#[cfg(feature = "http")]
impl HttpBackend {
    pub fn new(config: HttpBackendConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(std::time::Duration::from_secs(config.timeout_secs)))
            .build()
            .into();
        let id = format!("http:{}", config.model);
        HttpBackend { config, agent, id }
    }
}

#[cfg(feature = "http")]
impl ChatBackend for HttpBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn deterministic(&self) -> bool {
        false
    }

    fn complete(&self, system: &str, messages: &[Message], params: &DecodeParams, seed: u64) -> Result<String, AgentError> {
        let mut wire = vec![serde_json::json!({ "role": "system", "content": system })];
        wire.extend(messages.iter().map(|m| serde_json::json!({ "role": m.role, "content": m.content })));
        let body = serde_json::json!({
            "model": self.config.model,
            "messages": wire,
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
            "seed": seed,
        });
        let url = format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'));
        let mut req = self.agent.post(&url);
        if let Some(key) = &self.config.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(&body).map_err(|e| AgentError::Backend(e.to_string()))?;
        let value: serde_json::Value = resp.body_mut().read_json().map_err(|e| AgentError::Backend(e.to_string()))?;
        value
            .pointer("/choices/0/message/content")
            .and_then(|c| c.as_str())
            .map(str::to_string)
            .ok_or_else(|| AgentError::Backend("response has no choices[0].message.content".into()))
    }
}

#[cfg(all(test, feature = "http"))]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    /// Serves one canned HTTP response and returns the request body it saw.
    fn serve_once(status: &str, body: &'static str) -> (String, std::thread::JoinHandle<String>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let status = status.to_string();
        let handle = std::thread::spawn(move || {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
            }
            let mut buf = vec![0; len];
            reader.read_exact(&mut buf).unwrap();
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
            String::from_utf8(buf).unwrap()
        });
        (format!("http://{addr}/v1"), handle)
    }

    fn backend(base_url: String) -> HttpBackend {
        HttpBackend::new(HttpBackendConfig { base_url, model: "m".into(), api_key: Some("k".into()), timeout_secs: 10 })
    }

    #[test]
    fn posts_chat_completion_and_reads_content() {
        let (url, handle) = serve_once("200 OK", r#"{"choices":[{"message":{"role":"assistant","content":"ANSWER: B"}}]}"#);
        let out = backend(url).complete("sys", &[Message::user("hi")], &DecodeParams::default(), 5).unwrap();
        assert_eq!(out, "ANSWER: B");
        let sent: serde_json::Value = serde_json::from_str(&handle.join().unwrap()).unwrap();
        assert_eq!(sent["messages"][0]["role"], "system");
        assert_eq!(sent["messages"][1]["content"], "hi");
        assert_eq!(sent["seed"], 5);
    }

    #[test]
    fn server_error_is_backend_error() {
        let (url, handle) = serve_once("500 Internal Server Error", "{}");
        let err = backend(url).complete("s", &[], &DecodeParams::default(), 0).unwrap_err();
        handle.join().unwrap();
        assert!(matches!(err, AgentError::Backend(_)));
    }
}
