//! Blocking HTTP chat-completion client.
//!
//! One POST per request; the wire shape from the provider profile decides
//! the path, auth header, and JSON field names. Responses are normalized to
//! (text, token usage). Failures map onto typed transport errors so the
//! pipeline can retry timeouts and rate limits but fail fast on
//! misconfiguration.

use std::time::{Duration, Instant};

use serde_json::{json, Value};

use crate::error::{Error, ProviderError, Result};
use crate::providers::{ChatRequest, ChatResponse, ProviderProfile, Transport, WireShape};

const ANTHROPIC_VERSION: &str = "2023-06-01";
// The messages dialect requires an output cap even when the caller sets none.
const DEFAULT_MAX_OUTPUT_TOKENS: u32 = 4096;

pub struct HttpProvider {
    profile: ProviderProfile,
    wire: WireShape,
    endpoint: String,
    api_key: String,
    client: reqwest::blocking::Client,
}

impl HttpProvider {
    pub fn new(profile: ProviderProfile, timeout: Duration) -> Result<HttpProvider> {
        profile.validate()?;
        let wire = profile
            .wire
            .ok_or_else(|| Error::Config("live runs need a wire shape in the profile".into()))?;
        let endpoint = profile
            .endpoint
            .clone()
            .ok_or_else(|| Error::Config("live runs need an endpoint in the profile".into()))?;
        let key_var = profile
            .api_key_env
            .clone()
            .ok_or_else(|| Error::Config("live runs need api_key_env in the profile".into()))?;
        let api_key = std::env::var(&key_var)
            .map_err(|_| Error::Config(format!("API key variable {key_var} is not set")))?;
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| Error::Config(format!("HTTP client construction failed: {e}")))?;
        let endpoint = endpoint.trim_end_matches('/').to_string();
        Ok(HttpProvider { profile, wire, endpoint, api_key, client })
    }

    fn body(&self, request: &ChatRequest) -> Value {
        match self.wire {
            WireShape::OpenRouter => {
                let mut body = json!({
                    "model": self.profile.api_string,
                    "messages": [
                        {"role": "system", "content": request.system},
                        {"role": "user", "content": request.user},
                    ],
                    "temperature": request.temperature,
                });
                if let Some(cap) = request.max_output_tokens {
                    body["max_tokens"] = json!(cap);
                }
                body
            }
            WireShape::Anthropic => json!({
                "model": self.profile.api_string,
                "system": request.system,
                "messages": [{"role": "user", "content": request.user}],
                "temperature": request.temperature,
                "max_tokens": request.max_output_tokens.unwrap_or(DEFAULT_MAX_OUTPUT_TOKENS),
            }),
            WireShape::AiStudio => {
                let mut config = json!({"temperature": request.temperature});
                if let Some(cap) = request.max_output_tokens {
                    config["maxOutputTokens"] = json!(cap);
                }
                json!({
                    "systemInstruction": {"parts": [{"text": request.system}]},
                    "contents": [{"role": "user", "parts": [{"text": request.user}]}],
                    "generationConfig": config,
                })
            }
        }
    }

    fn extract(&self, v: &Value) -> std::result::Result<(String, Option<u64>, Option<u64>), ProviderError> {
        let (text, input, output) = match self.wire {
            WireShape::OpenRouter => (
                v["choices"][0]["message"]["content"].as_str(),
                v["usage"]["prompt_tokens"].as_u64(),
                v["usage"]["completion_tokens"].as_u64(),
            ),
            WireShape::Anthropic => (
                v["content"][0]["text"].as_str(),
                v["usage"]["input_tokens"].as_u64(),
                v["usage"]["output_tokens"].as_u64(),
            ),
            WireShape::AiStudio => (
                v["candidates"][0]["content"]["parts"][0]["text"].as_str(),
                v["usageMetadata"]["promptTokenCount"].as_u64(),
                v["usageMetadata"]["candidatesTokenCount"].as_u64(),
            ),
        };
        let text = text
            .ok_or_else(|| ProviderError::Protocol("response carries no completion text".into()))?;
        Ok((text.to_string(), input, output))
    }
}

fn map_send_error(e: reqwest::Error) -> ProviderError {
    if e.is_timeout() {
        ProviderError::Timeout
    } else if e.is_connect() {
        ProviderError::ConnectionRefused
    } else {
        ProviderError::Protocol(e.to_string())
    }
}

impl Transport for HttpProvider {
    fn complete_chat(
        &self,
        request: &ChatRequest,
    ) -> std::result::Result<ChatResponse, ProviderError> {
        let start = Instant::now();
        let builder = match self.wire {
            WireShape::OpenRouter => self
                .client
                .post(format!("{}/chat/completions", self.endpoint))
                .header("authorization", format!("Bearer {}", self.api_key)),
            WireShape::Anthropic => self
                .client
                .post(format!("{}/v1/messages", self.endpoint))
                .header("x-api-key", self.api_key.clone())
                .header("anthropic-version", ANTHROPIC_VERSION),
            WireShape::AiStudio => self.client.post(format!(
                "{}/v1beta/models/{}:generateContent?key={}",
                self.endpoint, self.profile.api_string, self.api_key
            )),
        };
        let response = builder.json(&self.body(request)).send().map_err(map_send_error)?;

        let status = response.status().as_u16();
        if status == 429 {
            return Err(ProviderError::RateLimited);
        }
        let raw = response.text().map_err(map_send_error)?;
        if !(200..300).contains(&status) {
            let message = raw.chars().take(200).collect();
            return Err(ProviderError::Http { status, message });
        }
        let v: Value = serde_json::from_str(&raw)
            .map_err(|e| ProviderError::Protocol(format!("bad response JSON: {e}")))?;
        let (text, input_tokens, output_tokens) = self.extract(&v)?;
        Ok(ChatResponse { text, input_tokens, output_tokens, latency: start.elapsed().as_secs_f64() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{Read, Write};
    use std::net::TcpListener;
    use std::thread::JoinHandle;

    const KEY_VAR: &str = "IMPUTE_BENCH_TEST_KEY";

    fn profile(wire: WireShape, endpoint: String) -> ProviderProfile {
        std::env::set_var(KEY_VAR, "sekrit");
        ProviderProfile {
            model_id: "m".into(),
            api_string: "maker/model-1".into(),
            price_in: 1.0,
            price_out: 2.0,
            temperature: 0.1,
            tools_enabled: false,
            endpoint: Some(endpoint),
            api_key_env: Some(KEY_VAR.into()),
            wire: Some(wire),
        }
    }

    /// Answers one HTTP request with a canned status/body after an optional
    /// delay; hands back the raw request text.
    fn one_shot_server(status: &str, body: &str, delay: Duration) -> (String, JoinHandle<String>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let endpoint = format!("http://{}", listener.local_addr().unwrap());
        let status = status.to_string();
        let body = body.to_string();
        let handle = std::thread::spawn(move || {
            let (mut stream, _) = listener.accept().unwrap();
            let mut buf = Vec::new();
            let mut tmp = [0u8; 4096];
            loop {
                let n = stream.read(&mut tmp).unwrap();
                buf.extend_from_slice(&tmp[..n]);
                let text = String::from_utf8_lossy(&buf);
                if let Some(head_end) = text.find("\r\n\r\n") {
                    let need: usize = text
                        .lines()
                        .find_map(|l| l.to_ascii_lowercase().strip_prefix("content-length:").map(|v| v.trim().parse().unwrap()))
                        .unwrap_or(0);
                    if buf.len() >= head_end + 4 + need {
                        break;
                    }
                }
                if n == 0 {
                    break;
                }
            }
            std::thread::sleep(delay);
            let reply = format!(
                "HTTP/1.1 {status}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            );
            stream.write_all(reply.as_bytes()).unwrap();
            String::from_utf8_lossy(&buf).to_string()
        });
        (endpoint, handle)
    }

    fn request() -> ChatRequest {
        ChatRequest::new("sys persona", "user prompt", 0.1)
    }

    #[test]
    fn openrouter_dialect_round_trips() {
        let body = r#"{"choices":[{"message":{"content":"a,b\n1,2"}}],"usage":{"prompt_tokens":12,"completion_tokens":7}}"#;
        let (endpoint, server) = one_shot_server("200 OK", body, Duration::ZERO);
        let provider =
            HttpProvider::new(profile(WireShape::OpenRouter, endpoint), Duration::from_secs(5))
                .unwrap();
        let resp = provider.complete_chat(&request()).unwrap();
        assert_eq!(resp.text, "a,b\n1,2");
        assert_eq!((resp.input_tokens, resp.output_tokens), (Some(12), Some(7)));
        let seen = server.join().unwrap();
        assert!(seen.starts_with("POST /chat/completions"));
        assert!(seen.contains("authorization: Bearer sekrit"));
        assert!(seen.contains(r#""model":"maker/model-1""#));
        assert!(seen.contains(r#""role":"system""#));
    }

    #[test]
    fn anthropic_dialect_round_trips() {
        let body = r#"{"content":[{"type":"text","text":"done"}],"usage":{"input_tokens":3,"output_tokens":4}}"#;
        let (endpoint, server) = one_shot_server("200 OK", body, Duration::ZERO);
        let provider =
            HttpProvider::new(profile(WireShape::Anthropic, endpoint), Duration::from_secs(5))
                .unwrap();
        let resp = provider.complete_chat(&request()).unwrap();
        assert_eq!(resp.text, "done");
        assert_eq!((resp.input_tokens, resp.output_tokens), (Some(3), Some(4)));
        let seen = server.join().unwrap();
        assert!(seen.starts_with("POST /v1/messages"));
        assert!(seen.contains("x-api-key: sekrit"));
        assert!(seen.contains(r#""system":"sys persona""#));
        assert!(seen.contains(r#""max_tokens":4096"#));
    }

    #[test]
    fn ai_studio_dialect_round_trips() {
        let body = r#"{"candidates":[{"content":{"parts":[{"text":"hi"}]}}],"usageMetadata":{"promptTokenCount":9,"candidatesTokenCount":2}}"#;
        let (endpoint, server) = one_shot_server("200 OK", body, Duration::ZERO);
        let provider =
            HttpProvider::new(profile(WireShape::AiStudio, endpoint), Duration::from_secs(5))
                .unwrap();
        let resp = provider.complete_chat(&request()).unwrap();
        assert_eq!(resp.text, "hi");
        assert_eq!((resp.input_tokens, resp.output_tokens), (Some(9), Some(2)));
        let seen = server.join().unwrap();
        assert!(seen.starts_with("POST /v1beta/models/maker/model-1:generateContent?key=sekrit"));
        assert!(seen.contains("systemInstruction"));
    }

    #[test]
    fn status_429_maps_to_rate_limited() {
        let (endpoint, server) = one_shot_server("429 Too Many Requests", "{}", Duration::ZERO);
        let provider =
            HttpProvider::new(profile(WireShape::OpenRouter, endpoint), Duration::from_secs(5))
                .unwrap();
        assert!(matches!(provider.complete_chat(&request()), Err(ProviderError::RateLimited)));
        server.join().unwrap();
    }

    #[test]
    fn other_http_failures_keep_status_and_body() {
        let (endpoint, server) = one_shot_server("500 Oops", r#"{"error":"boom"}"#, Duration::ZERO);
        let provider =
            HttpProvider::new(profile(WireShape::OpenRouter, endpoint), Duration::from_secs(5))
                .unwrap();
        match provider.complete_chat(&request()) {
            Err(ProviderError::Http { status, message }) => {
                assert_eq!(status, 500);
                assert!(message.contains("boom"));
            }
            other => panic!("expected Http error, got {other:?}"),
        }
        server.join().unwrap();
    }

    #[test]
    fn slow_server_maps_to_timeout() {
        let body = r#"{"choices":[{"message":{"content":"late"}}]}"#;
        let (endpoint, _server) = one_shot_server("200 OK", body, Duration::from_secs(2));
        let provider =
            HttpProvider::new(profile(WireShape::OpenRouter, endpoint), Duration::from_millis(200))
                .unwrap();
        assert!(matches!(provider.complete_chat(&request()), Err(ProviderError::Timeout)));
    }

    #[test]
    fn dead_port_maps_to_connection_refused() {
        let endpoint = {
            let listener = TcpListener::bind("127.0.0.1:0").unwrap();
            format!("http://{}", listener.local_addr().unwrap())
        };
        let provider =
            HttpProvider::new(profile(WireShape::OpenRouter, endpoint), Duration::from_secs(1))
                .unwrap();
        assert!(matches!(
            provider.complete_chat(&request()),
            Err(ProviderError::ConnectionRefused)
        ));
    }

    #[test]
    fn malformed_success_body_is_a_protocol_error() {
        let (endpoint, server) = one_shot_server("200 OK", r#"{"weird": true}"#, Duration::ZERO);
        let provider =
            HttpProvider::new(profile(WireShape::OpenRouter, endpoint), Duration::from_secs(5))
                .unwrap();
        assert!(matches!(provider.complete_chat(&request()), Err(ProviderError::Protocol(_))));
        server.join().unwrap();
    }

    #[test]
    fn missing_key_variable_is_a_config_error() {
        let mut p = profile(WireShape::OpenRouter, "http://127.0.0.1:1".into());
        p.api_key_env = Some("IMPUTE_BENCH_NO_SUCH_VAR".into());
        assert!(matches!(
            HttpProvider::new(p, Duration::from_secs(1)),
            Err(Error::Config(_))
        ));
    }
}
