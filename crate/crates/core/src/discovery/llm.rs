//! Language-model hypothesis generator over one-shot JSON HTTP.
//!
//! The request carries the grammar, the current library, held candidates and
//! recent outcomes. The reply must contain a JSON array of
//! `{"expr": ..., "rationale": ...}` objects, either as the whole body, under a
//! `proposals` key, or inside a chat-completion message. Every exchange is
//! logged verbatim (without credentials) so that a campaign can be replayed
//! from its log. Any transport or format failure falls back to the baseline
//! generator for that round.

use std::time::Duration;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::generator::{BaselineGenerator, GeneratorEvent, GeneratorOutput, HypothesisGenerator, Proposal, Source};
use super::AgentState;
use crate::grammar::{Budget, Operator, Primitive};

/// Environment variable holding the bearer token for the endpoint.
pub const API_KEY_ENV: &str = "ALPHALOOP_LLM_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmConfig {
    pub endpoint: String,
    /// When set, the request is wrapped as a chat-completion call for this model.
    pub model: Option<String>,
    pub timeout_secs: u64,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self {
            endpoint: String::new(),
            model: None,
            timeout_secs: 60,
        }
    }
}

pub struct LlmGenerator {
    cfg: LlmConfig,
    budget: Budget,
    fallback: BaselineGenerator,
    agent: ureq::Agent,
}

const INSTRUCTIONS: &str = "You propose cross-sectional equity factor expressions in the grammar \
described by the user message. Reply with only a JSON array of objects with keys \"expr\" and \
\"rationale\". Each rationale is one sentence of economic reasoning.";

impl LlmGenerator {
    pub fn new(cfg: LlmConfig, budget: Budget, fallback: BaselineGenerator) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(cfg.timeout_secs)))
            .build()
            .into();
        Self {
            cfg,
            budget,
            fallback,
            agent,
        }
    }

    /// The state summary sent to the model.
    pub fn summary(&self, state: &AgentState, n: usize) -> Value {
        let operators: Vec<Value> = Operator::ALL
            .iter()
            .map(|o| {
                json!({
                    "name": o.name(),
                    "args": o.arity(),
                    "window": matches!(o, Operator::Window(_)),
                })
            })
            .collect();
        let primitives: Vec<&str> = Primitive::ALL.iter().map(|p| p.name()).collect();
        let library: Vec<Value> = state
            .library
            .iter()
            .map(|e| json!({"expr": e.expr.canonical(), "t_ic": e.metrics.ic_tstat, "sharpe": e.metrics.sharpe}))
            .collect();
        let held: Vec<Value> = state
            .held
            .iter()
            .map(|e| json!({"expr": e.expr.canonical(), "t_ic": e.metrics.ic_tstat, "sharpe": e.metrics.sharpe}))
            .collect();
        let recent: Vec<Value> = state
            .recent
            .iter()
            .map(|r| json!({"expr": r.expr, "verdict": r.verdict, "t_ic": r.ic_tstat, "sharpe": r.sharpe}))
            .collect();
        json!({
            "round": state.round + 1,
            "n": n,
            "grammar": {
                "syntax": "prefix calls, e.g. cs_rank(div(volume, rolling_mean(volume, 20))); windowed operators take an integer window as their last argument",
                "operators": operators,
                "primitives": primitives,
                "max_depth": self.budget.max_depth,
                "max_nodes": self.budget.max_nodes,
            },
            "library": library,
            "held": held,
            "recent": recent,
        })
    }

    fn request_body(&self, summary: &Value) -> Value {
        match &self.cfg.model {
            Some(model) => json!({
                "model": model,
                "messages": [
                    {"role": "system", "content": INSTRUCTIONS},
                    {"role": "user", "content": summary.to_string()},
                ],
            }),
            None => summary.clone(),
        }
    }

    fn call(&self, body: &Value) -> Result<String, String> {
        let mut req = self
            .agent
            .post(&self.cfg.endpoint)
            .header("Content-Type", "application/json");
        if let Ok(key) = std::env::var(API_KEY_ENV) {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send(body.to_string()).map_err(|e| e.to_string())?;
        resp.body_mut().read_to_string().map_err(|e| e.to_string())
    }
}

fn extract_array(text: &str) -> Option<Vec<Value>> {
    let (start, end) = (text.find('[')?, text.rfind(']')?);
    if end < start {
        return None;
    }
    serde_json::from_str::<Vec<Value>>(&text[start..=end]).ok()
}

/// `(expr, rationale)` pairs from a model reply. Entries without a string
/// `expr` are passed through as their raw JSON so that they are rejected and
/// logged downstream rather than silently dropped.
pub fn parse_reply(text: &str) -> Result<Vec<(String, String)>, String> {
    let items: Vec<Value> = match serde_json::from_str::<Value>(text) {
        Ok(Value::Array(items)) => items,
        Ok(Value::Object(obj)) => {
            if let Some(Value::Array(items)) = obj.get("proposals") {
                items.clone()
            } else if let Some(content) = obj
                .get("choices")
                .and_then(|c| c.get(0))
                .and_then(|c| c.get("message"))
                .and_then(|m| m.get("content"))
                .and_then(Value::as_str)
            {
                extract_array(content).ok_or("chat reply content holds no JSON array")?
            } else {
                return Err("reply object has neither `proposals` nor `choices`".into());
            }
        }
        Ok(_) => return Err("reply is not an array or object".into()),
        Err(_) => extract_array(text).ok_or("reply holds no JSON array")?,
    };
    Ok(items
        .into_iter()
        .map(|item| match item.get("expr").and_then(Value::as_str) {
            Some(e) => (
                e.to_string(),
                item.get("rationale").and_then(Value::as_str).unwrap_or("").to_string(),
            ),
            None => (item.to_string(), String::new()),
        })
        .collect())
}

impl HypothesisGenerator for LlmGenerator {
    fn propose(&mut self, state: &AgentState, n: usize, rng: &mut ChaCha8Rng) -> GeneratorOutput {
        if n == 0 {
            return GeneratorOutput::default();
        }
        let body = self.request_body(&self.summary(state, n));
        let reply = self.call(&body);
        let parsed = reply.as_ref().map_err(Clone::clone).and_then(|t| parse_reply(t));
        let mut events = vec![GeneratorEvent::LlmExchange {
            endpoint: self.cfg.endpoint.clone(),
            request: body,
            response: reply.as_ref().ok().cloned(),
            error: parsed.as_ref().err().cloned(),
        }];
        match parsed {
            Ok(pairs) => GeneratorOutput {
                proposals: pairs
                    .into_iter()
                    .take(n)
                    .map(|(text, rationale)| Proposal {
                        text,
                        rationale,
                        source: Source::Llm,
                        parent: None,
                    })
                    .collect(),
                events,
            },
            Err(reason) => {
                events.push(GeneratorEvent::Downgrade { reason });
                let mut out = self.fallback.propose(state, n, rng);
                events.append(&mut out.events);
                out.events = events;
                out
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bare_array() {
        let r = parse_reply(r#"[{"expr": "cs_rank(volume)", "rationale": "liquidity"}]"#).unwrap();
        assert_eq!(r, vec![("cs_rank(volume)".to_string(), "liquidity".to_string())]);
    }

    #[test]
    fn chat_completion_wrapper() {
        let text = r#"{"choices":[{"message":{"content":"Here:\n[{\"expr\":\"neg(ret)\",\"rationale\":\"reversal\"}]"}}]}"#;
        let r = parse_reply(text).unwrap();
        assert_eq!(r[0].0, "neg(ret)");
    }

    #[test]
    fn empty_and_malformed() {
        assert!(parse_reply("[]").unwrap().is_empty());
        assert!(parse_reply("no json here").is_err());
        let r = parse_reply(r#"[{"formula": "x"}]"#).unwrap();
        assert_eq!(r[0].0, r#"{"formula":"x"}"#);
    }
}
