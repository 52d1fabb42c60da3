//! High-level planning: prompt construction, strict action parsing, the
//! deterministic scripted planner and an adapter for a chat-style inference
//! service.

use std::fmt;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::skills::{RequestError, SceneSummary, Side, Skill, SkillResult, SKILL_NAMES};

/// One planner decision.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanAction {
    pub skill: Skill,
    pub reason: String,
}

impl PlanAction {
    pub fn new(skill: Skill, reason: impl Into<String>) -> Self {
        Self {
            skill,
            reason: reason.into(),
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "action": self.skill.name(),
            "args": Value::Object(self.skill.args()),
            "reason": self.reason,
        })
    }

    pub fn serialize(&self) -> String {
        self.to_json().to_string()
    }
}

impl Serialize for PlanAction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for PlanAction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        action_from_value(&v).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlanError {
    NoJson,
    Validation(String),
}

impl fmt::Display for PlanError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlanError::NoJson => f.write_str("no JSON object found in the reply"),
            PlanError::Validation(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for PlanError {}

/// The first complete top-level JSON object embedded in `text`.
pub fn first_json_object(text: &str) -> Option<Map<String, Value>> {
    for (i, _) in text.match_indices('{') {
        let mut stream = serde_json::Deserializer::from_str(&text[i..]).into_iter::<Value>();
        if let Some(Ok(Value::Object(m))) = stream.next() {
            return Some(m);
        }
    }
    None
}

fn action_from_value(v: &Value) -> Result<PlanAction, PlanError> {
    let Value::Object(m) = v else {
        return Err(PlanError::Validation("plan must be a JSON object".into()));
    };
    let name = match m.get("action") {
        Some(Value::String(s)) => s.as_str(),
        Some(_) => return Err(PlanError::Validation("`action` must be a string".into())),
        None => return Err(PlanError::Validation("missing `action`".into())),
    };
    let reason = match m.get("reason") {
        None | Some(Value::Null) => String::new(),
        Some(Value::String(s)) => s.clone(),
        Some(_) => return Err(PlanError::Validation("`reason` must be a string".into())),
    };
    let skill = Skill::from_call(name, m.get("args")).map_err(|e| match e {
        RequestError::UnknownTool(n) => PlanError::Validation(format!(
            "unknown action `{n}`; registered actions: {}",
            SKILL_NAMES.join(", ")
        )),
        RequestError::InvalidArguments(msg) => PlanError::Validation(format!("`{name}`: {msg}")),
    })?;
    Ok(PlanAction { skill, reason })
}

/// Extracts and validates the first JSON object in a reply.
pub fn parse_plan_action(text: &str) -> Result<PlanAction, PlanError> {
    let m = first_json_object(text).ok_or(PlanError::NoJson)?;
    action_from_value(&Value::Object(m))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerContext {
    pub target: String,
    pub scene: SceneSummary,
    /// Result of the previous step, if any and if still within the replanning budget.
    pub last_feedback: Option<SkillResult>,
    pub last_action: Option<PlanAction>,
    /// 1-based index of the step being planned.
    pub step: usize,
    pub max_steps: usize,
    /// Optional rendered scene (SVG bytes).
    pub render: Option<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prompt {
    pub system: String,
    pub task: String,
    pub dynamic: String,
}

impl Prompt {
    pub fn user_text(&self) -> String {
        format!("{}\n\n{}", self.task, self.dynamic)
    }
}

fn tool_lines() -> String {
    let mut s = String::new();
    for t in crate::skills::manifest() {
        let args: Vec<String> = t
            .params
            .iter()
            .map(|p| {
                let opt = if p.required { "" } else { "?" };
                format!("{}{opt}", p.name)
            })
            .collect();
        s.push_str(&format!(
            "- {}({}): {}\n",
            t.name,
            args.join(", "),
            t.description
        ));
    }
    s
}

pub fn build_prompt(ctx: &PlannerContext) -> Prompt {
    let system = format!(
        "You control a robot arm with a four-finger hand above a cluttered table. \
         Decide one action at a time; each action runs to completion before you are asked again.\n\n\
         Tools:\n{}\n\
         Output format: return a strictly valid JSON object and nothing else, shaped as \
         {{\"action\": \"<tool name>\", \"args\": {{...}}, \"reason\": \"<short justification>\"}}.",
        tool_lines()
    );

    let mut task = format!(
        "Objective: grasp the target and lift it clear of the table within {} steps.\n\
         The target object is a {}.\n\nObjects (id, x, y, yaw in meters/radians):\n",
        ctx.max_steps, ctx.target
    );
    for o in &ctx.scene.objects {
        let role = if o.is_target { " [target]" } else { "" };
        task.push_str(&format!(
            "- {}{role}: x={:.3}, y={:.3}, yaw={:.3}\n",
            o.id, o.x, o.y, o.theta
        ));
    }

    let sc = &ctx.scene;
    let mut dynamic = format!(
        "Step {} of {}.\nObservation: hand at x={:.3}, y={:.3}, z={:.3}, yaw={:.3}; {}.\n\
         Blocking the approach: {}.\n",
        ctx.step,
        ctx.max_steps,
        sc.tcp.x,
        sc.tcp.y,
        sc.tcp.z,
        sc.tcp.yaw,
        if sc.hovering {
            "hovering above the target"
        } else {
            "not above the target"
        },
        if sc.blocking.is_empty() {
            "nothing".to_string()
        } else {
            sc.blocking.join(", ")
        },
    );
    if ctx.render.is_some() {
        dynamic.push_str("A top-down rendering of the scene is attached.\n");
    }
    if let Some(fb) = &ctx.last_feedback {
        let body = serde_json::to_string(fb).expect("skill results serialize");
        dynamic.push_str(&format!(
            "\nExecution feedback (from step {}):\n{body}\n",
            ctx.step.saturating_sub(1)
        ));
        if !fb.success {
            dynamic.push_str("The previous action failed; propose a different strategy.\n");
        }
    }
    Prompt {
        system,
        task,
        dynamic,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlannerError {
    Failed(String),
}

impl fmt::Display for PlannerError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlannerError::Failed(m) => write!(f, "planner failed: {m}"),
        }
    }
}

impl std::error::Error for PlannerError {}

pub trait Planner {
    fn plan(&mut self, ctx: &PlannerContext) -> Result<PlanAction, PlannerError>;

    /// Episode flags raised since the last call.
    fn take_flags(&mut self) -> Vec<String> {
        Vec::new()
    }
}

/// Lateral band inside which a blocker is approached head-on (m).
pub const CENTER_BAND: f64 = 0.01;

pub fn side_for_offset(dx: f64) -> Side {
    if dx < -CENTER_BAND {
        Side::Left
    } else if dx > CENTER_BAND {
        Side::Right
    } else {
        Side::Center
    }
}

/// Deterministic rule-based planner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScriptedPlanner {
    /// When false the planner never clears and only moves and grasps.
    pub clearing: bool,
}

impl Default for ScriptedPlanner {
    fn default() -> Self {
        Self { clearing: true }
    }
}

fn failed_on(ctx: &PlannerContext, skill: &str, object: &str) -> bool {
    ctx.last_feedback
        .as_ref()
        .is_some_and(|fb| !fb.success && fb.action == skill && fb.object.as_deref() == Some(object))
}

impl ScriptedPlanner {
    pub fn decide(&self, ctx: &PlannerContext) -> PlanAction {
        let sc = &ctx.scene;
        if !sc.hovering {
            return PlanAction::new(
                Skill::MoveTo {
                    target: ctx.target.clone(),
                },
                "hover above the target",
            );
        }
        if self.clearing {
            if let Some(b) = sc.blocking.first() {
                let target = sc.objects.iter().find(|o| o.id == ctx.target);
                let blocker = sc.objects.iter().find(|o| &o.id == b);
                let dx = match (target, blocker) {
                    (Some(t), Some(o)) => o.x - t.x,
                    _ => 0.0,
                };
                let side = side_for_offset(dx);
                let dist = crate::skills::DEFAULT_PUSH_DIST;
                if failed_on(ctx, "pull", b) {
                    return PlanAction::new(Skill::InitArm, format!("push and pull on {b} failed"));
                }
                if failed_on(ctx, "push", b) {
                    return PlanAction::new(
                        Skill::Pull { side, dist },
                        format!("push on {b} failed; pull it instead"),
                    );
                }
                return PlanAction::new(
                    Skill::Push { side, dist },
                    format!("{b} blocks the approach"),
                );
            }
        }
        PlanAction::new(Skill::Grasp, "approach is clear")
    }
}

impl Planner for ScriptedPlanner {
    fn plan(&mut self, ctx: &PlannerContext) -> Result<PlanAction, PlannerError> {
        Ok(self.decide(ctx))
    }
}

/// Minimum spacing between service requests, shared across episodes.
#[derive(Debug)]
pub struct RateLimiter {
    interval: Duration,
    next: Mutex<Option<Instant>>,
}

impl RateLimiter {
    pub fn per_minute(requests: u32) -> Self {
        let interval = if requests == 0 {
            Duration::ZERO
        } else {
            Duration::from_secs_f64(60.0 / requests as f64)
        };
        Self {
            interval,
            next: Mutex::new(None),
        }
    }

    pub fn wait(&self) {
        let sleep_until = {
            let mut next = self.next.lock().unwrap_or_else(|e| e.into_inner());
            let now = Instant::now();
            let slot = next.map_or(now, |t| t.max(now));
            *next = Some(slot + self.interval);
            slot
        };
        let now = Instant::now();
        if sleep_until > now {
            std::thread::sleep(sleep_until - now);
        }
    }
}

/// Sends one chat request body and returns the assistant's text.
pub trait ChatTransport {
    fn complete(&self, body: &Value) -> Result<String, String>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmConfig {
    pub url: String,
    pub model: String,
    #[serde(skip_serializing)]
    pub api_key: Option<String>,
    pub timeout_secs: f64,
    pub requests_per_minute: u32,
    /// Attach the rendered scene as an image.
    pub send_image: bool,
    pub temperature: f64,
}

pub const ENV_URL: &str = "CLUTTERGRASP_LLM_URL";
pub const ENV_MODEL: &str = "CLUTTERGRASP_LLM_MODEL";
pub const ENV_API_KEY: &str = "CLUTTERGRASP_LLM_API_KEY";

impl Default for LlmConfig {
    fn default() -> Self {
        Self {
            url: "http://127.0.0.1:8000/v1/chat/completions".into(),
            model: "default".into(),
            api_key: None,
            timeout_secs: 60.0,
            requests_per_minute: 0,
            send_image: false,
            temperature: 0.0,
        }
    }
}

impl LlmConfig {
    /// Overrides the endpoint, model and credential from the environment.
    pub fn with_env(mut self) -> Self {
        if let Ok(v) = std::env::var(ENV_URL) {
            self.url = v;
        }
        if let Ok(v) = std::env::var(ENV_MODEL) {
            self.model = v;
        }
        if let Ok(v) = std::env::var(ENV_API_KEY) {
            self.api_key = Some(v);
        }
        self
    }
}

/// Extracts `choices[0].message.content` from a chat-completion response.
pub fn reply_text(response: &Value) -> Result<String, String> {
    match &response["choices"][0]["message"]["content"] {
        Value::String(s) => Ok(s.clone()),
        Value::Array(parts) => Ok(parts
            .iter()
            .filter_map(|p| p["text"].as_str())
            .collect::<Vec<_>>()
            .join("")),
        _ => Err("response has no choices[0].message.content".into()),
    }
}

#[cfg(feature = "llm")]
mod http {
    use super::*;
    use base64::Engine as _;

    /// Blocking HTTP transport with a per-request timeout.
    pub struct HttpTransport {
        agent: ureq::Agent,
        url: String,
        api_key: Option<String>,
    }

    impl HttpTransport {
        pub fn new(config: &LlmConfig) -> Self {
            let agent = ureq::Agent::config_builder()
                .timeout_global(Some(Duration::from_secs_f64(
                    config.timeout_secs.max(0.001),
                )))
                .http_status_as_error(false)
                .build()
                .into();
            Self {
                agent,
                url: config.url.clone(),
                api_key: config.api_key.clone(),
            }
        }
    }

    impl ChatTransport for HttpTransport {
        fn complete(&self, body: &Value) -> Result<String, String> {
            let mut req = self
                .agent
                .post(&self.url)
                .header("Content-Type", "application/json");
            if let Some(k) = &self.api_key {
                req = req.header("Authorization", &format!("Bearer {k}"));
            }
            let mut resp = req.send(body.to_string()).map_err(|e| e.to_string())?;
            let status = resp.status();
            let text = resp
                .body_mut()
                .read_to_string()
                .map_err(|e| e.to_string())?;
            if !status.is_success() {
                return Err(format!("service returned {status}: {text}"));
            }
            let v: Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
            reply_text(&v)
        }
    }

    pub fn image_data_url(svg: &[u8]) -> String {
        format!(
            "data:image/svg+xml;base64,{}",
            base64::engine::general_purpose::STANDARD.encode(svg)
        )
    }
}

#[cfg(feature = "llm")]
pub use http::{image_data_url, HttpTransport};

/// Planner backed by an inference service; falls back to the scripted
/// planner after a transport failure or two unusable replies.
pub struct LlmPlanner<T: ChatTransport> {
    pub config: LlmConfig,
    pub transport: T,
    pub fallback: ScriptedPlanner,
    pub limiter: Option<Arc<RateLimiter>>,
    flags: Vec<String>,
}

pub const FALLBACK_FLAG: &str = "planner_fallback";

impl<T: ChatTransport> LlmPlanner<T> {
    pub fn new(config: LlmConfig, transport: T) -> Self {
        Self {
            config,
            transport,
            fallback: ScriptedPlanner::default(),
            limiter: None,
            flags: Vec::new(),
        }
    }

    pub fn with_limiter(mut self, limiter: Arc<RateLimiter>) -> Self {
        self.limiter = Some(limiter);
        self
    }

    pub fn request_body(&self, prompt: &Prompt, render: Option<&[u8]>, extra: &[Value]) -> Value {
        let user = match render {
            #[cfg(feature = "llm")]
            Some(svg) if self.config.send_image => json!([
                {"type": "text", "text": prompt.user_text()},
                {"type": "image_url", "image_url": {"url": image_data_url(svg)}},
            ]),
            _ => {
                let _ = render;
                json!(prompt.user_text())
            }
        };
        let mut messages = vec![
            json!({"role": "system", "content": prompt.system}),
            json!({"role": "user", "content": user}),
        ];
        messages.extend(extra.iter().cloned());
        json!({
            "model": self.config.model,
            "temperature": self.config.temperature,
            "messages": messages,
        })
    }

    fn ask(&self, body: &Value) -> Result<String, String> {
        if let Some(l) = &self.limiter {
            l.wait();
        }
        self.transport.complete(body)
    }

    fn fall_back(&mut self, ctx: &PlannerContext, why: &str) -> PlanAction {
        log::warn!("language planner fell back to scripted rules: {why}");
        if !self.flags.iter().any(|f| f == FALLBACK_FLAG) {
            self.flags.push(FALLBACK_FLAG.to_string());
        }
        self.fallback.decide(ctx)
    }
}

impl<T: ChatTransport> Planner for LlmPlanner<T> {
    fn plan(&mut self, ctx: &PlannerContext) -> Result<PlanAction, PlannerError> {
        let prompt = build_prompt(ctx);
        let body = self.request_body(&prompt, ctx.render.as_deref(), &[]);
        let first = match self.ask(&body) {
            Ok(t) => t,
            Err(e) => return Ok(self.fall_back(ctx, &e)),
        };
        let err = match parse_plan_action(&first) {
            Ok(a) => return Ok(a),
            Err(e) => e,
        };
        let retry = [
            json!({"role": "assistant", "content": first}),
            json!({"role": "user", "content": format!(
                "Your reply could not be used: {err}. Return only a strictly valid JSON object \
                 with keys \"action\", \"args\" and \"reason\", using one of: {}.",
                SKILL_NAMES.join(", ")
            )}),
        ];
        let body = self.request_body(&prompt, ctx.render.as_deref(), &retry);
        match self.ask(&body) {
            Ok(t) => match parse_plan_action(&t) {
                Ok(a) => Ok(a),
                Err(e) => Ok(self.fall_back(ctx, &e.to_string())),
            },
            Err(e) => Ok(self.fall_back(ctx, &e)),
        }
    }

    fn take_flags(&mut self) -> Vec<String> {
        std::mem::take(&mut self.flags)
    }
}
