//! Planner abstraction: a deterministic scripted planner for tests and
//! simulation, and a client for an OpenAI-compatible chat-completions
//! endpoint, plus prompt construction and plan-text parsing.
//!
//! Planners are stateless per query; any planner failure (transport, HTTP,
//! parse, timeout) is an outcome the control loop handles by falling back to
//! its backup plan, never an exception.

use std::time::Duration;

use nalgebra::DVector;
use regex::Regex;
use serde::Deserialize;

use crate::adjust::Plan;
use crate::setops::Interval;

/// Everything a planner sees at one control step.
#[derive(Debug, Clone)]
pub struct PlannerQuery {
    /// Pose `(p_x, p_y, psi)` in meters and radians.
    pub pose: (f64, f64, f64),
    /// Goal position, meters.
    pub goal: DVector<f64>,
    /// Goal region radius, meters.
    pub reaching_radius: f64,
    /// Bearing error to the goal, radians.
    pub los_angle: f64,
    /// LiDAR ranges, meters.
    pub lidar: DVector<f64>,
    /// No-obstacle sentinel value for the LiDAR ranges.
    pub lidar_max_range: f64,
    /// Admissible input box (linear, angular).
    pub input_bounds: Interval,
    pub horizon: usize,
}

/// Chat endpoint configuration.
#[derive(Debug, Clone)]
pub struct PlannerConfig {
    pub endpoint_url: String,
    pub model_name: String,
    pub temperature: f64,
    pub timeout: Duration,
    pub max_retries: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            endpoint_url: "https://api.openai.com/v1".into(),
            model_name: "gpt-4o".into(),
            temperature: 0.1,
            timeout: Duration::from_secs(10),
            max_retries: 1,
        }
    }
}

/// Why a planner produced no plan. The control loop maps every variant to
/// the backup-plan branch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlannerFailure {
    Timeout,
    Transport(String),
    Http(u16),
    Parse(String),
    MissingCredential(String),
}

impl std::fmt::Display for PlannerFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PlannerFailure::Timeout => write!(f, "planner timed out"),
            PlannerFailure::Transport(e) => write!(f, "transport error: {e}"),
            PlannerFailure::Http(code) => write!(f, "http status {code}"),
            PlannerFailure::Parse(e) => write!(f, "plan parse error: {e}"),
            PlannerFailure::MissingCredential(var) => {
                write!(f, "missing credential: set the {var} environment variable")
            }
        }
    }
}

pub trait Planner: Sync + Send {
    fn name(&self) -> &str;
    fn plan(&self, query: &PlannerQuery) -> std::result::Result<Plan, PlannerFailure>;
}

fn fmt3(x: f64) -> String {
    format!("{x:.3}")
}

/// Deterministic prompt for the chat planner. Identical queries produce
/// byte-identical prompts.
///
/// The advertised linear-velocity lower bound is raised to 0.1 m/s so the
/// model does not emit all-zero plans; the safety layer re-verifies whatever
/// comes back, so the prompt bound is advisory.
pub fn build_prompt(q: &PlannerQuery) -> String {
    let v_lo = q.input_bounds.lower()[0].max(0.1);
    let v_hi = q.input_bounds.upper()[0];
    let w_lo = q.input_bounds.lower()[1];
    let w_hi = q.input_bounds.upper()[1];
    let lidar: Vec<String> = q.lidar.iter().map(|r| fmt3(*r)).collect();
    let h = q.horizon;
    format!(
        concat!(
            "You are the controller of a 2D differential drive robot. ",
            "The robot state is 3-dimensional: x (m), y (m), and the orientation theta (rad) about the z-axis. ",
            "You control it with a linear velocity (m/s) to move forward and an angular velocity (rad/s) to rotate. ",
            "The linear velocity must stay in [{v_lo}, {v_hi}] and the angular velocity in [{w_lo}, {w_hi}]. ",
            "Generate a sequence of control inputs over a {h}-step horizon; only the first is applied. ",
            "Your output must be one line of exactly {h} linear and {h} angular velocities in the form ",
            "LVel:[v1,...,v{h}] and AVel:[w1,...,w{h}] ",
            "with no other words. ",
            "A LiDAR looks forward; a range of {max_range} means no obstacle in that beam direction. ",
            "Ranges: [{lidar}]. ",
            "Move the robot to the target x={gx}, y={gy} while avoiding obstacles, reducing the distance R below {r_goal}. ",
            "Current position: x={px}, y={py}, theta={psi}. ",
            "The line-of-sight angle to the target is {los}; try to keep it zero. ",
            "Just write the output and nothing else."
        ),
        v_lo = fmt3(v_lo),
        v_hi = fmt3(v_hi),
        w_lo = fmt3(w_lo),
        w_hi = fmt3(w_hi),
        h = h,
        max_range = fmt3(q.lidar_max_range),
        lidar = lidar.join(","),
        gx = fmt3(q.goal[0]),
        gy = fmt3(q.goal[1]),
        r_goal = fmt3(q.reaching_radius),
        px = fmt3(q.pose.0),
        py = fmt3(q.pose.1),
        psi = fmt3(q.pose.2),
        los = fmt3(q.los_angle),
    )
}

/// Crude token count for budget checks: four characters per token.
pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

/// Render a plan in the wire grammar (the inverse of [`parse_plan`]).
pub fn format_plan(plan: &Plan) -> String {
    let lv: Vec<String> = plan.actions().iter().map(|a| a[0].to_string()).collect();
    let av: Vec<String> = plan.actions().iter().map(|a| a[1].to_string()).collect();
    format!("LVel:[{}] and AVel:[{}]", lv.join(","), av.join(","))
}

/// Parse the plan grammar `LVel:[f(,f)*] … AVel:[f(,f)*]`: markers are
/// case-insensitive, whitespace is free, floats may carry signs and
/// exponents. Both lists must have exactly `horizon` entries. Parsed
/// velocities are clamped into the admissible box.
pub fn parse_plan(
    text: &str,
    horizon: usize,
    bounds: &Interval,
) -> std::result::Result<Plan, PlannerFailure> {
    fn extract(marker: &str, text: &str) -> std::result::Result<Vec<f64>, String> {
        let re = Regex::new(&format!(r"(?i){marker}\s*:\s*\[([^\]]*)\]")).expect("static regex");
        let cap = re
            .captures(text)
            .ok_or_else(|| format!("missing {marker} list"))?;
        cap[1]
            .split(',')
            .map(|tok| {
                let tok = tok.trim();
                tok.parse::<f64>()
                    .map_err(|_| format!("non-numeric entry {tok:?} in {marker} list"))
            })
            .collect()
    }
    let lv = extract("LVel", text).map_err(PlannerFailure::Parse)?;
    let av = extract("AVel", text).map_err(PlannerFailure::Parse)?;
    if lv.len() != horizon || av.len() != horizon {
        return Err(PlannerFailure::Parse(format!(
            "expected {horizon} entries, got {} linear and {} angular",
            lv.len(),
            av.len()
        )));
    }
    let actions: Vec<DVector<f64>> = lv
        .into_iter()
        .zip(av)
        .map(|(v, w)| bounds.clamp(&DVector::from_row_slice(&[v, w])))
        .collect();
    Plan::new(actions).map_err(|e| PlannerFailure::Parse(e.to_string()))
}

/// Which scripted behavior to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScriptedKind {
    /// Pure-pursuit toward the goal, slowing on approach.
    GoalSeeking,
    /// Full speed toward the goal, ignoring everything else. Exists to
    /// stress the safety layer.
    Adversarial,
}

/// Deterministic planner: linear velocity proportional to the goal distance
/// (or saturated for the adversarial variant), angular velocity proportional
/// to the line-of-sight error, replicated over the horizon.
#[derive(Debug, Clone)]
pub struct ScriptedPlanner {
    pub kind: ScriptedKind,
    pub k_v: f64,
    pub k_omega: f64,
    pub first_step_box: Interval,
}

impl ScriptedPlanner {
    pub fn new(kind: ScriptedKind, first_step_box: Interval) -> Self {
        Self {
            kind,
            k_v: 1.0,
            k_omega: 1.5,
            first_step_box,
        }
    }
}

impl Planner for ScriptedPlanner {
    fn name(&self) -> &str {
        match self.kind {
            ScriptedKind::GoalSeeking => "scripted",
            ScriptedKind::Adversarial => "adversarial",
        }
    }

    fn plan(&self, q: &PlannerQuery) -> std::result::Result<Plan, PlannerFailure> {
        let dx = q.goal[0] - q.pose.0;
        let dy = q.goal[1] - q.pose.1;
        let dist = (dx * dx + dy * dy).sqrt();
        let v_raw = match self.kind {
            ScriptedKind::GoalSeeking => self.k_v * dist,
            ScriptedKind::Adversarial => f64::INFINITY,
        };
        let raw = DVector::from_row_slice(&[v_raw, self.k_omega * q.los_angle]);
        let action = q.input_bounds.clamp(&raw);
        let first = self.first_step_box.clamp(&raw);
        let mut actions = vec![action; q.horizon.max(1)];
        actions[0] = first;
        Plan::new(actions).map_err(|e| PlannerFailure::Parse(e.to_string()))
    }
}

/// Environment variable holding the chat endpoint credential.
pub const API_KEY_ENV: &str = "LLM_API_KEY";

/// Client for an OpenAI-compatible `POST {endpoint}/chat/completions`.
pub struct LlmPlanner {
    config: PlannerConfig,
    api_key: String,
    client: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: String,
}

impl LlmPlanner {
    /// Build a client reading the bearer credential from [`API_KEY_ENV`].
    pub fn from_env(config: PlannerConfig) -> std::result::Result<Self, PlannerFailure> {
        let api_key = std::env::var(API_KEY_ENV)
            .map_err(|_| PlannerFailure::MissingCredential(API_KEY_ENV.into()))?;
        Self::with_key(config, api_key)
    }

    pub fn with_key(
        config: PlannerConfig,
        api_key: String,
    ) -> std::result::Result<Self, PlannerFailure> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| PlannerFailure::Transport(e.to_string()))?;
        Ok(Self {
            config,
            api_key,
            client,
        })
    }

    fn request_once(&self, prompt: &str) -> std::result::Result<String, PlannerFailure> {
        let url = format!(
            "{}/chat/completions",
            self.config.endpoint_url.trim_end_matches('/')
        );
        let body = serde_json::json!({
            "model": self.config.model_name,
            "temperature": self.config.temperature,
            "messages": [{"role": "user", "content": prompt}],
        });
        let response = self
            .client
            .post(&url)
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| {
                if e.is_timeout() {
                    PlannerFailure::Timeout
                } else {
                    PlannerFailure::Transport(e.to_string())
                }
            })?;
        let status = response.status();
        if !status.is_success() {
            return Err(PlannerFailure::Http(status.as_u16()));
        }
        let parsed: ChatResponse = response
            .json()
            .map_err(|e| PlannerFailure::Parse(e.to_string()))?;
        parsed
            .choices
            .first()
            .map(|c| c.message.content.clone())
            .ok_or_else(|| PlannerFailure::Parse("response has no choices".into()))
    }
}

impl Planner for LlmPlanner {
    fn name(&self) -> &str {
        "llm"
    }

    fn plan(&self, q: &PlannerQuery) -> std::result::Result<Plan, PlannerFailure> {
        let prompt = build_prompt(q);
        let mut last_err = PlannerFailure::Transport("no attempt made".into());
        for _ in 0..=self.config.max_retries {
            match self.request_once(&prompt) {
                Ok(text) => return parse_plan(&text, q.horizon, &q.input_bounds),
                Err(e @ (PlannerFailure::Timeout | PlannerFailure::Transport(_))) => {
                    last_err = e;
                }
                Err(e) => return Err(e),
            }
        }
        Err(last_err)
    }
}
