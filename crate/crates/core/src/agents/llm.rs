//! The LLM client contract: render a prompt, send it over a pluggable
//! transport, parse the reply into decisions.

use std::collections::VecDeque;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::router::ModelEntry;
use super::{AgentContext, AgentDecision, AgentSpec, Evaluation};
use crate::ledger::Params;
use crate::telemetry::TelemetrySnapshot;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmRequest {
    pub model_name: String,
    pub system_prompt: String,
    pub user_prompt: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmReply {
    pub text: String,
    pub prompt_tokens: u64,
    pub response_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransportError {
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("backend returned HTTP {0}")]
    Status(u16),
    #[error("unreadable backend reply: {0}")]
    BadReply(String),
}

pub trait LlmTransport: Send + Sync {
    fn complete(&self, request: &LlmRequest) -> Result<LlmReply, TransportError>;
}

fn word_count(s: &str) -> u64 {
    s.split_whitespace().count() as u64
}

/// Replays scripted replies in order; once the script runs out every call
/// fails as unavailable. Token counts are whitespace word counts.
#[derive(Debug, Default)]
pub struct CannedTransport {
    replies: Mutex<VecDeque<Result<String, TransportError>>>,
    requests: Mutex<Vec<LlmRequest>>,
}

impl CannedTransport {
    pub fn new<I: IntoIterator<Item = Result<String, TransportError>>>(replies: I) -> Self {
        Self {
            replies: Mutex::new(replies.into_iter().collect()),
            requests: Mutex::new(Vec::new()),
        }
    }

    pub fn replying<S: Into<String>>(texts: impl IntoIterator<Item = S>) -> Self {
        Self::new(texts.into_iter().map(|t| Ok(t.into())))
    }

    pub fn requests(&self) -> Vec<LlmRequest> {
        self.requests.lock().expect("canned transport lock").clone()
    }
}

impl LlmTransport for CannedTransport {
    fn complete(&self, request: &LlmRequest) -> Result<LlmReply, TransportError> {
        self.requests
            .lock()
            .expect("canned transport lock")
            .push(request.clone());
        let next = self.replies.lock().expect("canned transport lock").pop_front();
        let text = next.unwrap_or_else(|| Err(TransportError::Unavailable("no scripted reply left".into())))?;
        Ok(LlmReply {
            prompt_tokens: word_count(&request.system_prompt) + word_count(&request.user_prompt),
            response_tokens: word_count(&text),
            text,
        })
    }
}

/// Generic chat-completion transport (OpenAI-style `/chat/completions`).
#[cfg(feature = "http")]
#[derive(Debug, Clone)]
pub struct HttpChatTransport {
    pub endpoint: String,
    /// Name of the environment variable with the bearer token, if any.
    pub api_key_env: Option<String>,
    pub timeout: std::time::Duration,
}

#[cfg(feature = "http")]
impl LlmTransport for HttpChatTransport {
    fn complete(&self, request: &LlmRequest) -> Result<LlmReply, TransportError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(self.timeout))
            .build()
            .into();
        let body = serde_json::json!({
            "model": request.model_name,
            "messages": [
                {"role": "system", "content": request.system_prompt},
                {"role": "user", "content": request.user_prompt},
            ],
        });
        let mut req = agent.post(&self.endpoint);
        if let Some(key) = self.api_key_env.as_deref().and_then(|k| std::env::var(k).ok()) {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = req.send_json(&body).map_err(|e| match e {
            ureq::Error::StatusCode(code) => TransportError::Status(code),
            other => TransportError::Unavailable(other.to_string()),
        })?;
        let v: serde_json::Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| TransportError::BadReply(e.to_string()))?;
        let text = v["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| TransportError::BadReply("missing choices[0].message.content".into()))?
            .to_owned();
        Ok(LlmReply {
            prompt_tokens: v["usage"]["prompt_tokens"].as_u64().unwrap_or(0),
            response_tokens: v["usage"]["completion_tokens"].as_u64().unwrap_or(0),
            text,
        })
    }
}

/// System prompt, then the telemetry and governance constraints as JSON,
/// then the reply format.
pub fn render_request(spec: &AgentSpec, ctx: AgentContext<'_>, model: &ModelEntry) -> LlmRequest {
    let telemetry = serde_json::to_string(ctx.telemetry).expect("telemetry serializes");
    let constraints = serde_json::to_string(&ctx.constraints.values).expect("constraints serialize");
    LlmRequest {
        model_name: model.model_name.clone(),
        system_prompt: spec.system_prompt.clone(),
        user_prompt: format!(
            "agent: {}\ncycle: {}\ntelemetry: {telemetry}\nconstraints: {constraints}\n\
             Reply with a JSON array of {{\"device_id\", \"action\", \"params\", \"confidence\", \"rationale\"}}; \
             an empty array when nothing needs doing.",
            spec.agent_id, ctx.telemetry.cycle
        ),
    }
}

#[derive(Deserialize)]
struct RawDecision {
    device_id: String,
    action: String,
    #[serde(default)]
    params: Params,
    confidence: f64,
    #[serde(default)]
    rationale: String,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawReply {
    List(Vec<RawDecision>),
    Wrapped { decisions: Vec<RawDecision> },
}

/// Extracts decisions from a reply. Accepts a bare array or
/// `{"decisions": [...]}`, optionally inside a fenced block. Entries naming
/// unknown devices or out-of-range confidences are dropped.
pub fn parse_decisions(
    text: &str,
    spec: &AgentSpec,
    telemetry: &TelemetrySnapshot,
) -> Result<Vec<AgentDecision>, String> {
    let start = text.find(['[', '{']).ok_or("reply holds no JSON")?;
    let end = text.rfind([']', '}']).ok_or("reply holds no JSON")?;
    if end < start {
        return Err("reply holds no JSON".into());
    }
    let raw: RawReply = serde_json::from_str(&text[start..=end]).map_err(|e| e.to_string())?;
    let list = match raw {
        RawReply::List(l) | RawReply::Wrapped { decisions: l } => l,
    };
    Ok(list
        .into_iter()
        .filter(|d| telemetry.get(&d.device_id).is_some() && (0.0..=1.0).contains(&d.confidence))
        .map(|d| AgentDecision {
            agent_id: spec.agent_id.clone(),
            device_id: d.device_id,
            action: d.action,
            params: d.params,
            confidence: d.confidence,
            cycle: telemetry.cycle,
            rationale: d.rationale,
        })
        .collect())
}

pub fn evaluate_llm(
    spec: &AgentSpec,
    ctx: AgentContext<'_>,
    transport: &dyn LlmTransport,
    model: &ModelEntry,
) -> Evaluation {
    let request = render_request(spec, ctx, model);
    match transport.complete(&request) {
        Ok(reply) => match parse_decisions(&reply.text, spec, ctx.telemetry) {
            Ok(decisions) => Evaluation {
                decisions,
                backend_unavailable: false,
                prompt_tokens: reply.prompt_tokens,
                response_tokens: reply.response_tokens,
            },
            Err(_) => Evaluation {
                backend_unavailable: true,
                prompt_tokens: reply.prompt_tokens,
                response_tokens: reply.response_tokens,
                ..Evaluation::default()
            },
        },
        Err(_) => Evaluation {
            backend_unavailable: true,
            ..Evaluation::default()
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::router::default_catalog;
    use crate::agents::{evaluate_agent, Backend};
    use crate::governance::GovernanceSnapshot;
    use crate::roles::AgentRole;
    use crate::telemetry::{DeviceType, Reading, TelemetryHistory};

    fn snap() -> TelemetrySnapshot {
        let mut s = TelemetrySnapshot {
            cycle: 4,
            ..Default::default()
        };
        let mut r = Reading::new("hvac-bedroom", "bedroom", DeviceType::Hvac);
        r.temperature_c = Some(31.0);
        s.readings.insert(r.device_id.clone(), r);
        s
    }

    #[test]
    fn canned_reply_becomes_decisions() {
        let t = snap();
        let g = GovernanceSnapshot::defaults();
        let h = TelemetryHistory::new(4);
        let spec = AgentSpec::for_role(AgentRole::Climate);
        let model = default_catalog().remove(0);
        let transport = CannedTransport::replying([
            "Sure:\n```json\n[{\"device_id\":\"hvac-bedroom\",\"action\":\"set_cooling\",\"params\":{\"target_c\":22},\"confidence\":0.8},\
             {\"device_id\":\"ghost\",\"action\":\"x\",\"confidence\":0.5}]\n```",
        ]);
        let ctx = AgentContext {
            telemetry: &t,
            constraints: &g,
            history: &h,
        };
        let eval = evaluate_agent(
            &spec,
            ctx,
            &Backend::Llm {
                transport: &transport,
                model: &model,
            },
        );
        assert!(!eval.backend_unavailable);
        assert_eq!(eval.decisions.len(), 1);
        assert_eq!(eval.decisions[0].action, "set_cooling");
        assert_eq!(eval.decisions[0].cycle, 4);
        assert!(eval.prompt_tokens > 0);

        let sent = transport.requests();
        assert_eq!(sent[0].model_name, "gemini-flash");
        assert!(sent[0].user_prompt.contains("hvac-bedroom"));
        assert!(sent[0].user_prompt.contains("target_temperature_c"));
    }

    #[test]
    fn transport_failure_marks_unavailable() {
        let t = snap();
        let g = GovernanceSnapshot::defaults();
        let h = TelemetryHistory::new(4);
        let spec = AgentSpec::for_role(AgentRole::Climate);
        let model = default_catalog().remove(0);
        let transport = CannedTransport::new([Err(TransportError::Unavailable("down".into()))]);
        let ctx = AgentContext {
            telemetry: &t,
            constraints: &g,
            history: &h,
        };
        let eval = evaluate_llm(&spec, ctx, &transport, &model);
        assert!(eval.backend_unavailable);
        assert!(eval.decisions.is_empty());
    }

    #[test]
    fn wrapped_and_garbage_replies() {
        let t = snap();
        let spec = AgentSpec::for_role(AgentRole::Climate);
        let ok = parse_decisions(
            r#"{"decisions":[{"device_id":"hvac-bedroom","action":"set_cooling","confidence":1.0}]}"#,
            &spec,
            &t,
        )
        .unwrap();
        assert_eq!(ok.len(), 1);
        assert!(parse_decisions("no idea", &spec, &t).is_err());
    }
}
