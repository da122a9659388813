use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Generator, GeneratorError};

#[derive(Debug, Serialize)]
struct GenerateRequest<'a> {
    inputs: &'a [String],
    deterministic: bool,
}

#[derive(Debug, Deserialize)]
struct GenerateResponse {
    outputs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct Health {
    #[serde(default)]
    pub status: Option<String>,
    #[serde(default)]
    pub checkpoint_digest: Option<String>,
}

/// Client for a generation service: `POST {endpoint}/generate` with
/// `{inputs, deterministic}` answered by `{outputs}` in request order.
pub struct RemoteGenerator {
    endpoint: String,
    agent: ureq::Agent,
}

impl RemoteGenerator {
    pub fn new(endpoint: &str) -> Self {
        Self::with_timeout(endpoint, Duration::from_secs(120))
    }

    pub fn with_timeout(endpoint: &str, timeout: Duration) -> Self {
        let agent = ureq::AgentBuilder::new().timeout_connect(Duration::from_secs(5)).timeout(timeout).build();
        RemoteGenerator { endpoint: endpoint.trim_end_matches('/').to_string(), agent }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    pub fn health(&self) -> Result<Health, GeneratorError> {
        let resp = self.agent.get(&format!("{}/health", self.endpoint)).call().map_err(transport)?;
        resp.into_json().map_err(|e| GeneratorError::Protocol(format!("health response: {}", e)))
    }
}

fn transport(e: ureq::Error) -> GeneratorError {
    match e {
        ureq::Error::Status(code, resp) => {
            let body = resp.into_string().unwrap_or_default();
            GeneratorError::Transport(format!("status {}: {}", code, body.trim()))
        }
        ureq::Error::Transport(t) => GeneratorError::Transport(t.to_string()),
    }
}

impl Generator for RemoteGenerator {
    fn generate(&self, input: &str) -> Result<String, GeneratorError> {
        let mut out = self.generate_batch(&[input.to_string()])?;
        Ok(out.pop().expect("batch length checked"))
    }

    fn generate_batch(&self, inputs: &[String]) -> Result<Vec<String>, GeneratorError> {
        let body = GenerateRequest { inputs, deterministic: true };
        let resp = self.agent.post(&format!("{}/generate", self.endpoint)).send_json(&body).map_err(transport)?;
        let parsed: GenerateResponse =
            resp.into_json().map_err(|e| GeneratorError::Protocol(format!("generate response: {}", e)))?;
        if parsed.outputs.len() != inputs.len() {
            return Err(GeneratorError::Protocol(format!(
                "sent {} inputs, received {} outputs",
                inputs.len(),
                parsed.outputs.len()
            )));
        }
        Ok(parsed.outputs)
    }
}
