//! Remote multimodal planner over HTTP.
//!
//! Request: `{model, messages: [{role: "system", content}, {role: "user",
//! parts: [{type: "text"}, {type: "audio", format: "wav"}, {type: "image",
//! format: "png"}]}]}`. Response: `{text}` holding the model's reply.

use super::prompts::PromptSet;
use super::{parse_plan_document, Backend, PlannerError, PlannerObservation, PlannerVerdict};
use crate::acoustics::write_wav_stereo;
use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::fs::OpenOptions;
use std::io::{Cursor, Write};
use std::path::PathBuf;
use std::time::Duration;

pub const SCAN_IMAGE_SIZE: usize = 128;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub model: String,
    pub timeout_s: f64,
    /// Extra attempts after an unparseable reply.
    pub retries: usize,
    /// JSON-lines transcript of every request and reply.
    pub transcript: Option<PathBuf>,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self {
            endpoint: "http://127.0.0.1:8000/v1/plan".into(),
            model: "qwen2.5-omni-7b".into(),
            timeout_s: 30.0,
            retries: 2,
            transcript: None,
        }
    }
}

/// Builds the request body. Only the planner observation reaches the wire.
pub fn build_request(obs: &PlannerObservation, prompts: &PromptSet, model: &str) -> Result<Value, PlannerError> {
    let mut wav = Cursor::new(Vec::new());
    write_wav_stereo(&obs.audio, &mut wav).map_err(|e| PlannerError::Transport(e.to_string()))?;
    let png = obs.scan.to_png(SCAN_IMAGE_SIZE);
    Ok(json!({
        "model": model,
        "messages": [
            {"role": "system", "content": prompts.system(obs.known_first_source)},
            {"role": "user", "parts": [
                {"type": "image", "format": "png", "data": STANDARD.encode(png)},
                {"type": "audio", "format": "wav", "data": STANDARD.encode(wav.into_inner())},
                {"type": "text", "text": prompts.user},
            ]},
        ],
    }))
}

/// Removes a surrounding markdown code fence, with or without a language tag.
pub fn strip_fences(text: &str) -> &str {
    let t = text.trim();
    let Some(rest) = t.strip_prefix("```") else { return t };
    let body = rest.split_once('\n').map_or("", |(_, b)| b);
    body.trim_end().strip_suffix("```").unwrap_or(body).trim()
}

fn log_transcript(cfg: &RemoteConfig, attempt: usize, reply: &Result<String, String>) {
    let Some(path) = &cfg.transcript else { return };
    let line = json!({
        "endpoint": cfg.endpoint,
        "model": cfg.model,
        "attempt": attempt,
        "reply": reply.as_ref().ok(),
        "error": reply.as_ref().err(),
    });
    let written = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .and_then(|mut f| writeln!(f, "{line}"));
    if let Err(e) = written {
        log::warn!("transcript write failed: {e}");
    }
}

fn call(agent: &ureq::Agent, cfg: &RemoteConfig, body: &Value) -> Result<String, String> {
    let resp = agent.post(&cfg.endpoint).send_json(body.clone()).map_err(|e| e.to_string())?;
    let v: Value = resp.into_json().map_err(|e| e.to_string())?;
    v.get("text")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| format!("response without text field: {v}"))
}

/// Asks the remote model for a plan. Unparseable replies are retried; replies
/// that parse but break the vocabulary or structure are rejected at once.
pub fn plan_remote(
    obs: &PlannerObservation,
    cfg: &RemoteConfig,
    prompts: &PromptSet,
) -> Result<PlannerVerdict, PlannerError> {
    let body = build_request(obs, prompts, &cfg.model)?;
    let agent = ureq::AgentBuilder::new()
        .timeout(Duration::from_secs_f64(cfg.timeout_s))
        .build();
    let mut last = String::new();
    for attempt in 0..=cfg.retries {
        let reply = call(&agent, cfg, &body);
        log_transcript(cfg, attempt, &reply);
        let text = reply.map_err(PlannerError::Transport)?;
        match serde_json::from_str::<Value>(strip_fences(&text)) {
            Ok(doc) => {
                let chain = parse_plan_document(&doc)?;
                return Ok(PlannerVerdict {
                    chain,
                    backend: Backend::Remote,
                    raw_response: Some(text),
                    planning_correct: None,
                    low_confidence: false,
                });
            }
            Err(e) => {
                log::debug!("attempt {attempt}: unparseable reply: {e}");
                last = text;
            }
        }
    }
    Err(PlannerError::PlanParse(last))
}
