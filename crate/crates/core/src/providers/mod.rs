//! Chat-completion transport layer.
//!
//! A provider takes one request (system persona, user prompt, temperature,
//! tools disabled) and returns plain text plus optional token usage. Two
//! implementations exist: an HTTP client speaking the common wire dialects,
//! and an in-process mock scripted per request for offline runs. Transport
//! failures are typed so the retry loop can tell them apart from
//! content-level validation failures.

mod http;
mod mock;

pub use http::HttpProvider;
pub use mock::{MockBehavior, MockProvider, MockScript};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, ProviderError, Result};

/// One chat-completion call. `tools_enabled` stays false in benchmark mode;
/// the wire adapters never serialize tool definitions.
#[derive(Clone, Debug, PartialEq)]
pub struct ChatRequest {
    pub system: String,
    pub user: String,
    pub temperature: f64,
    pub max_output_tokens: Option<u32>,
    pub tools_enabled: bool,
}

impl ChatRequest {
    pub fn new(system: impl Into<String>, user: impl Into<String>, temperature: f64) -> Self {
        ChatRequest {
            system: system.into(),
            user: user.into(),
            temperature,
            max_output_tokens: None,
            tools_enabled: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChatResponse {
    pub text: String,
    /// Transport-reported usage; `None` means the caller must approximate.
    pub input_tokens: Option<u64>,
    pub output_tokens: Option<u64>,
    pub latency: f64,
}

/// Anything that can answer a chat request. Shared across concurrent window
/// dispatches, so implementations handle their own interior mutability.
pub trait Transport: Send + Sync {
    fn complete_chat(&self, request: &ChatRequest) -> std::result::Result<ChatResponse, ProviderError>;
}

/// Wire dialect for the HTTP client. The three shapes differ only in field
/// names and auth headers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WireShape {
    OpenRouter,
    AiStudio,
    Anthropic,
}

fn default_temperature() -> f64 {
    0.1
}

/// Model identity plus pricing, loaded from a JSON or TOML profile file.
/// Prices are dollars per million tokens.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProviderProfile {
    pub model_id: String,
    pub api_string: String,
    pub price_in: f64,
    pub price_out: f64,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default)]
    pub tools_enabled: bool,
    #[serde(default)]
    pub endpoint: Option<String>,
    /// Name of the environment variable holding the API key.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default)]
    pub wire: Option<WireShape>,
}

impl ProviderProfile {
    /// Profiles for the models the benchmark was priced against.
    pub fn builtin(api_string: &str) -> Option<ProviderProfile> {
        let (model_id, price_in, price_out, wire) = match api_string {
            "xiaomi/mimo-v2-flash" => ("MiMo-V2-Flash", 0.09, 0.29, WireShape::OpenRouter),
            "mistralai/devstral-2512" => ("Devstral 2 2512", 0.40, 2.00, WireShape::OpenRouter),
            "gemini-3-flash" => ("Gemini 3.0 Flash", 0.00, 0.00, WireShape::AiStudio),
            "openai/gpt-4.1-nano" => ("GPT-4.1-Nano", 0.10, 0.40, WireShape::OpenRouter),
            "claude-sonnet-4.5" => ("Claude 4.5 Sonnet", 3.00, 6.00, WireShape::Anthropic),
            _ => return None,
        };
        Some(ProviderProfile {
            model_id: model_id.to_string(),
            api_string: api_string.to_string(),
            price_in,
            price_out,
            temperature: default_temperature(),
            tools_enabled: false,
            endpoint: None,
            api_key_env: None,
            wire: Some(wire),
        })
    }

    pub fn load(path: &Path) -> Result<ProviderProfile> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::from(e).with_path(path))?;
        let profile: ProviderProfile = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&raw)?,
            Some("toml") => toml::from_str(&raw)?,
            other => {
                return Err(Error::Config(format!(
                    "provider profile {} must be .json or .toml, got {:?}",
                    path.display(),
                    other
                )))
            }
        };
        profile.validate()?;
        Ok(profile)
    }

    pub fn validate(&self) -> Result<()> {
        if self.model_id.is_empty() || self.api_string.is_empty() {
            return Err(Error::Config("provider profile needs model_id and api_string".into()));
        }
        if !(self.price_in >= 0.0 && self.price_out >= 0.0) {
            return Err(Error::Config("provider prices must be nonnegative".into()));
        }
        if self.tools_enabled {
            return Err(Error::Config("tools must stay disabled in benchmark mode".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_profiles_carry_expected_prices() {
        let mimo = ProviderProfile::builtin("xiaomi/mimo-v2-flash").unwrap();
        assert_eq!((mimo.price_in, mimo.price_out), (0.09, 0.29));
        let claude = ProviderProfile::builtin("claude-sonnet-4.5").unwrap();
        assert_eq!((claude.price_in, claude.price_out), (3.00, 6.00));
        assert_eq!(claude.temperature, 0.1);
        assert!(!claude.tools_enabled);
        assert!(ProviderProfile::builtin("nonexistent").is_none());
    }

    #[test]
    fn profile_round_trips_through_json_and_toml() {
        let dir = tempfile::tempdir().unwrap();
        let profile = ProviderProfile::builtin("openai/gpt-4.1-nano").unwrap();

        let json_path = dir.path().join("p.json");
        std::fs::write(&json_path, serde_json::to_string(&profile).unwrap()).unwrap();
        assert_eq!(ProviderProfile::load(&json_path).unwrap(), profile);

        let toml_path = dir.path().join("p.toml");
        std::fs::write(&toml_path, toml::to_string(&profile).unwrap()).unwrap();
        assert_eq!(ProviderProfile::load(&toml_path).unwrap(), profile);
    }

    #[test]
    fn defaults_fill_in_when_profile_is_minimal() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("min.toml");
        std::fs::write(
            &path,
            "model_id = \"m\"\napi_string = \"a/m\"\nprice_in = 1.0\nprice_out = 2.0\n",
        )
        .unwrap();
        let p = ProviderProfile::load(&path).unwrap();
        assert_eq!(p.temperature, 0.1);
        assert!(!p.tools_enabled);
        assert!(p.wire.is_none());
    }

    #[test]
    fn tools_enabled_profile_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(
            &path,
            r#"{"model_id":"m","api_string":"a/m","price_in":0,"price_out":0,"tools_enabled":true}"#,
        )
        .unwrap();
        assert!(matches!(ProviderProfile::load(&path), Err(Error::Config(_))));
    }
}
