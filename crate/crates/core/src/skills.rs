//! The atomic skill library.
//!
//! Every skill is a value-in, value-out transformation of a [`SceneState`]
//! that always produces a [`SkillResult`]. Argument schemas are declared once
//! in [`manifest`]; the same table drives validation and the published tool
//! list.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_6};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::geograsp::{
    run_grasp_episode, EpisodeSetup, GeoController, GeoControllerConfig, GraspOutcome, GraspParams,
    RewardWeights,
};
use crate::geometry::{wrap_angle, Pose, Vec3};
use crate::handrig::{HandRig, HandState};
use crate::simworld::{
    approach_clearance, displace_guarded, escaped_objects, Halt, SceneState,
    DEFAULT_CORRIDOR_HALFWIDTH,
};

pub const DEFAULT_PUSH_DIST: f64 = 0.08;
pub const MAX_PUSH_DIST: f64 = 0.15;
pub const DEFAULT_LIFT: f64 = 0.20;
pub const MAX_LIFT_ARG: f64 = 1.0;
pub const MAX_TCP_Z: f64 = 0.5;
pub const MAX_NAME_LEN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Center,
    Right,
}

impl Side {
    pub const ALL: [Side; 3] = [Side::Left, Side::Center, Side::Right];

    pub fn yaw_offset(self) -> f64 {
        match self {
            Side::Left => FRAC_PI_6,
            Side::Center => 0.0,
            Side::Right => -FRAC_PI_6,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Center => "center",
            Side::Right => "right",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.as_str() == s)
    }
}

/// A validated skill invocation.
#[derive(Debug, Clone, PartialEq)]
pub enum Skill {
    Push { side: Side, dist: f64 },
    Pull { side: Side, dist: f64 },
    MoveTo { target: String },
    Lift { height: f64 },
    Lower,
    Grasp,
    InitArm,
    InitHand,
}

pub const SKILL_NAMES: [&str; 8] = [
    "push", "pull", "move_to", "lift", "lower", "grasp", "initarm", "inithand",
];

#[derive(Debug, Clone, PartialEq)]
pub enum ParamKind {
    Choice(&'static [&'static str]),
    /// A number in `(min_exclusive, max]`.
    Number {
        min_exclusive: f64,
        max: f64,
    },
    Name,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: &'static str,
    pub kind: ParamKind,
    pub required: bool,
    pub default: Option<f64>,
    pub description: &'static str,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToolSpec {
    pub name: &'static str,
    pub description: &'static str,
    pub params: Vec<ParamSpec>,
}

const SIDES: &[&str] = &["left", "center", "right"];

fn side_param() -> ParamSpec {
    ParamSpec {
        name: "side",
        kind: ParamKind::Choice(SIDES),
        required: true,
        default: None,
        description: "Approach side; rotates the approach yaw by +30, 0 or -30 degrees.",
    }
}

fn dist_param() -> ParamSpec {
    ParamSpec {
        name: "dist",
        kind: ParamKind::Number {
            min_exclusive: 0.0,
            max: MAX_PUSH_DIST,
        },
        required: false,
        default: Some(DEFAULT_PUSH_DIST),
        description: "Displacement in meters.",
    }
}

/// The tool registry.
pub fn manifest() -> Vec<ToolSpec> {
    vec![
        ToolSpec {
            name: "push",
            description: "Approaches the nearest obstacle from the given side and pushes it away from the target.",
            params: vec![side_param(), dist_param()],
        },
        ToolSpec {
            name: "pull",
            description: "Hooks the nearest obstacle from its far side and pulls it towards the robot base.",
            params: vec![side_param(), dist_param()],
        },
        ToolSpec {
            name: "move_to",
            description: "Moves the hand to the pre-grasp hover pose above the named object.",
            params: vec![ParamSpec {
                name: "target",
                kind: ParamKind::Name,
                required: true,
                default: None,
                description: "Object id.",
            }],
        },
        ToolSpec {
            name: "lift",
            description: "Raises the hand, and anything it holds, by a height in meters.",
            params: vec![ParamSpec {
                name: "height",
                kind: ParamKind::Number {
                    min_exclusive: 0.0,
                    max: MAX_LIFT_ARG,
                },
                required: false,
                default: Some(DEFAULT_LIFT),
                description: "Relative height in meters; the hand never rises above 0.5 m.",
            }],
        },
        ToolSpec {
            name: "lower",
            description: "Undoes previous lifts.",
            params: vec![],
        },
        ToolSpec {
            name: "grasp",
            description: "Runs the learned grasp controller on the target from the current hover pose.",
            params: vec![],
        },
        ToolSpec {
            name: "initarm",
            description: "Returns the arm to its home pose, releasing anything held.",
            params: vec![],
        },
        ToolSpec {
            name: "inithand",
            description: "Opens the hand fully.",
            params: vec![],
        },
    ]
}

impl ToolSpec {
    pub fn input_schema(&self) -> Value {
        let mut props = Map::new();
        for p in &self.params {
            let mut s = match &p.kind {
                ParamKind::Choice(opts) => json!({"type": "string", "enum": opts}),
                ParamKind::Number { min_exclusive, max } => {
                    json!({"type": "number", "exclusiveMinimum": min_exclusive, "maximum": max})
                }
                ParamKind::Name => {
                    json!({"type": "string", "minLength": 1, "maxLength": MAX_NAME_LEN})
                }
            };
            s["description"] = json!(p.description);
            if let Some(d) = p.default {
                s["default"] = json!(d);
            }
            props.insert(p.name.to_string(), s);
        }
        let required: Vec<&str> = self
            .params
            .iter()
            .filter(|p| p.required)
            .map(|p| p.name)
            .collect();
        json!({
            "type": "object",
            "properties": props,
            "required": required,
            "additionalProperties": false,
        })
    }

    pub fn to_json(&self) -> Value {
        json!({
            "name": self.name,
            "description": self.description,
            "inputSchema": self.input_schema(),
        })
    }
}

pub fn manifest_json() -> Value {
    Value::Array(manifest().iter().map(ToolSpec::to_json).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub enum RequestError {
    UnknownTool(String),
    InvalidArguments(String),
}

impl fmt::Display for RequestError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RequestError::UnknownTool(n) => write!(
                f,
                "unknown tool `{n}`; registered tools: {}",
                SKILL_NAMES.join(", ")
            ),
            RequestError::InvalidArguments(m) => write!(f, "invalid arguments: {m}"),
        }
    }
}

impl std::error::Error for RequestError {}

enum Arg {
    Text(String),
    Number(f64),
}

fn validate_args(spec: &ToolSpec, args: Option<&Value>) -> Result<Vec<Option<Arg>>, RequestError> {
    let bad = |m: String| Err(RequestError::InvalidArguments(m));
    let empty = Map::new();
    let map = match args {
        None | Some(Value::Null) => &empty,
        Some(Value::Object(m)) => m,
        Some(_) => return bad("arguments must be an object".into()),
    };
    if let Some(k) = map
        .keys()
        .find(|k| !spec.params.iter().any(|p| p.name == k.as_str()))
    {
        return bad(format!("`{}` does not take an argument `{k}`", spec.name));
    }
    let mut out = Vec::with_capacity(spec.params.len());
    for p in &spec.params {
        let Some(v) = map.get(p.name) else {
            if p.required {
                return bad(format!("missing required argument `{}`", p.name));
            }
            out.push(p.default.map(Arg::Number));
            continue;
        };
        let arg = match &p.kind {
            ParamKind::Choice(opts) => match v.as_str() {
                Some(s) if opts.contains(&s) => Arg::Text(s.to_string()),
                _ => {
                    return bad(format!(
                        "`{}` must be one of {}, got {v}",
                        p.name,
                        opts.join("|")
                    ))
                }
            },
            ParamKind::Number { min_exclusive, max } => match v.as_f64() {
                Some(x) if x.is_finite() && x > *min_exclusive && x <= *max => Arg::Number(x),
                _ => {
                    return bad(format!(
                        "`{}` must be a number in ({min_exclusive}, {max}], got {v}",
                        p.name
                    ))
                }
            },
            ParamKind::Name => match v.as_str() {
                Some(s) if !s.is_empty() && s.len() <= MAX_NAME_LEN => Arg::Text(s.to_string()),
                _ => {
                    return bad(format!(
                        "`{}` must be a non-empty string of at most {MAX_NAME_LEN} bytes",
                        p.name
                    ))
                }
            },
        };
        out.push(Some(arg));
    }
    Ok(out)
}

impl Skill {
    /// Validates a named call against the manifest.
    pub fn from_call(name: &str, args: Option<&Value>) -> Result<Self, RequestError> {
        let specs = manifest();
        let spec = specs
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| RequestError::UnknownTool(name.to_string()))?;
        let vals = validate_args(spec, args)?;
        let text = |i: usize| match &vals[i] {
            Some(Arg::Text(s)) => s.clone(),
            _ => unreachable!("validated text argument"),
        };
        let num = |i: usize| match &vals[i] {
            Some(Arg::Number(x)) => *x,
            _ => unreachable!("validated numeric argument"),
        };
        let side = |i: usize| Side::parse(&text(i)).expect("validated side");
        Ok(match name {
            "push" => Skill::Push {
                side: side(0),
                dist: num(1),
            },
            "pull" => Skill::Pull {
                side: side(0),
                dist: num(1),
            },
            "move_to" => Skill::MoveTo { target: text(0) },
            "lift" => Skill::Lift { height: num(0) },
            "lower" => Skill::Lower,
            "grasp" => Skill::Grasp,
            "initarm" => Skill::InitArm,
            "inithand" => Skill::InitHand,
            _ => unreachable!("manifest and skill names agree"),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Skill::Push { .. } => "push",
            Skill::Pull { .. } => "pull",
            Skill::MoveTo { .. } => "move_to",
            Skill::Lift { .. } => "lift",
            Skill::Lower => "lower",
            Skill::Grasp => "grasp",
            Skill::InitArm => "initarm",
            Skill::InitHand => "inithand",
        }
    }

    /// Explicit arguments, defaults included.
    pub fn args(&self) -> Map<String, Value> {
        let mut m = Map::new();
        match self {
            Skill::Push { side, dist } | Skill::Pull { side, dist } => {
                m.insert("side".into(), json!(side.as_str()));
                m.insert("dist".into(), json!(dist));
            }
            Skill::MoveTo { target } => {
                m.insert("target".into(), json!(target));
            }
            Skill::Lift { height } => {
                m.insert("height".into(), json!(height));
            }
            _ => {}
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Failure {
    Collision,
    TargetNotFound,
    TargetNotReached,
    ObjectEscaped,
    NoObstacle,
    Stuck,
}

impl Failure {
    pub const ALL: [Failure; 6] = [
        Failure::Collision,
        Failure::TargetNotFound,
        Failure::TargetNotReached,
        Failure::ObjectEscaped,
        Failure::NoObstacle,
        Failure::Stuck,
    ];

    pub fn message(self) -> &'static str {
        match self {
            Failure::Collision => "collision detected",
            Failure::TargetNotFound => "target not found",
            Failure::TargetNotReached => "target not reached",
            Failure::ObjectEscaped => "object escaped",
            Failure::NoObstacle => "no obstacle",
            Failure::Stuck => "stuck detected",
        }
    }

    pub fn from_message(m: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.message() == m)
    }
}

pub const SUCCESS_MESSAGE: &str = "ok";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSummary {
    pub id: String,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub theta: f64,
    pub is_target: bool,
    pub attached: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TcpSummary {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub yaw: f64,
}

/// What the planner sees of the scene after a skill.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSummary {
    pub target: String,
    pub objects: Vec<ObjectSummary>,
    pub blocking: Vec<String>,
    pub escaped: Vec<String>,
    pub tcp: TcpSummary,
    /// The hand is at the pre-grasp hover pose above the target.
    pub hovering: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillResult {
    pub success: bool,
    pub message: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
    pub action: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub approach_yaw: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub contacts: Vec<String>,
    pub observation: SceneSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grasp: Option<GraspOutcome>,
}

impl SkillResult {
    pub fn failure(&self) -> Option<Failure> {
        if self.success {
            None
        } else {
            Failure::from_message(&self.message)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SkillConfig {
    pub rig: HandRig,
    pub grasp: GraspParams,
    pub reward: RewardWeights,
    pub controller: GeoControllerConfig,
    pub home: Pose,
    pub hover_height: f64,
    /// Tolerance on the hover pose used by [`SceneSummary::hovering`] (m).
    pub hover_tolerance: f64,
    pub corridor_halfwidth: f64,
    /// Largest TCP distance from the target centroid at which grasping starts.
    pub grasp_reach: f64,
    pub grasp_max_ticks: usize,
    /// Below this fraction of the commanded distance a jammed push is stuck.
    pub stuck_fraction: f64,
}

impl Default for SkillConfig {
    fn default() -> Self {
        Self {
            rig: HandRig::default(),
            grasp: GraspParams::default(),
            reward: RewardWeights::default(),
            controller: GeoControllerConfig::default(),
            home: Pose::planar(0.0, -0.30, 0.40, FRAC_PI_2),
            hover_height: 0.15,
            hover_tolerance: 0.01,
            corridor_halfwidth: DEFAULT_CORRIDOR_HALFWIDTH,
            grasp_reach: 0.25,
            grasp_max_ticks: 600,
            stuck_fraction: 0.1,
        }
    }
}

pub fn summarize(scene: &SceneState, config: &SkillConfig) -> SceneSummary {
    let target = scene.target();
    let blocking = target
        .and_then(|t| approach_clearance(scene, &t.id, config.corridor_halfwidth).ok())
        .unwrap_or_default();
    let t = &scene.hand.tcp;
    let hovering = target.is_some_and(|o| {
        let goal = o.pose.position + Vec3::new(0.0, 0.0, config.hover_height);
        (t.position - goal).norm() <= config.hover_tolerance
    });
    SceneSummary {
        target: target.map(|o| o.id.clone()).unwrap_or_default(),
        objects: scene
            .objects
            .iter()
            .map(|o| ObjectSummary {
                id: o.id.clone(),
                x: o.pose.position.x,
                y: o.pose.position.y,
                z: o.pose.position.z,
                theta: o.pose.yaw,
                is_target: o.is_target,
                attached: o.attached,
            })
            .collect(),
        blocking,
        escaped: escaped_objects(scene),
        tcp: TcpSummary {
            x: t.position.x,
            y: t.position.y,
            z: t.position.z,
            yaw: t.yaw,
        },
        hovering,
    }
}

struct Outcome {
    scene: SceneState,
    failure: Option<Failure>,
    detail: String,
    object: Option<String>,
    approach_yaw: Option<f64>,
    contacts: Vec<String>,
    grasp: Option<GraspOutcome>,
}

impl Outcome {
    fn new(scene: SceneState) -> Self {
        Self {
            scene,
            failure: None,
            detail: String::new(),
            object: None,
            approach_yaw: None,
            contacts: Vec::new(),
            grasp: None,
        }
    }

    fn fail(scene: SceneState, f: Failure, detail: impl Into<String>) -> Self {
        Self {
            failure: Some(f),
            detail: detail.into(),
            ..Self::new(scene)
        }
    }
}

/// Runs one skill. The input scene is never modified.
pub fn execute(
    scene: &SceneState,
    skill: &Skill,
    config: &SkillConfig,
) -> (SceneState, SkillResult) {
    let out = match skill {
        Skill::Push { side, dist } => displace_skill(scene, *side, *dist, false, config),
        Skill::Pull { side, dist } => displace_skill(scene, *side, *dist, true, config),
        Skill::MoveTo { target } => move_to(scene, target, config),
        Skill::Lift { height } => lift(scene, *height),
        Skill::Lower => lower(scene),
        Skill::Grasp => grasp(scene, config),
        Skill::InitArm => {
            let mut s = scene.clone();
            s.release_all();
            s.set_tcp(config.home);
            s.lift_offset = 0.0;
            Outcome::new(s)
        }
        Skill::InitHand => {
            let mut s = scene.clone();
            s.release_all();
            s.hand = HandState {
                tcp: s.hand.tcp,
                ..HandState::open(&config.rig, s.hand.tcp)
            };
            Outcome::new(s)
        }
    };
    let result = SkillResult {
        success: out.failure.is_none(),
        message: out
            .failure
            .map_or(SUCCESS_MESSAGE, Failure::message)
            .to_string(),
        detail: out.detail,
        action: skill.name().to_string(),
        object: out.object,
        approach_yaw: out.approach_yaw,
        contacts: out.contacts,
        observation: summarize(&out.scene, config),
        grasp: out.grasp,
    };
    (out.scene, result)
}

/// Obstacle a clearing skill acts on: nearest blocker, else nearest overall.
pub fn select_obstacle(scene: &SceneState, config: &SkillConfig) -> Option<String> {
    let target = scene.target()?;
    if let Some(b) = approach_clearance(scene, &target.id, config.corridor_halfwidth)
        .ok()?
        .into_iter()
        .next()
    {
        return Some(b);
    }
    scene
        .objects
        .iter()
        .filter(|o| !o.is_target && !o.attached)
        .min_by(|a, b| {
            let da = (a.xy() - target.xy()).norm();
            let db = (b.xy() - target.xy()).norm();
            da.total_cmp(&db)
        })
        .map(|o| o.id.clone())
}

fn displace_skill(
    scene: &SceneState,
    side: Side,
    dist: f64,
    pull: bool,
    config: &SkillConfig,
) -> Outcome {
    let Some(target) = scene.target() else {
        return Outcome::fail(
            scene.clone(),
            Failure::TargetNotFound,
            "scene has no target",
        );
    };
    let Some(obstacle) = select_obstacle(scene, config) else {
        return Outcome::fail(scene.clone(), Failure::NoObstacle, "nothing to clear");
    };
    let o = scene.object(&obstacle).expect("selected obstacle exists");
    let base_yaw = if pull {
        -FRAC_PI_2
    } else {
        let d = o.xy() - target.xy();
        if d.norm() > 1e-12 {
            d.y.atan2(d.x)
        } else {
            0.0
        }
    };
    let yaw = wrap_angle(base_yaw + side.yaw_offset());
    let dir = [yaw.cos(), yaw.sin()];
    let moved = displace_guarded(scene, &obstacle, dir, dist, Some(&target.id))
        .expect("obstacle and target exist and are free");

    let mut out = Outcome::new(scene.clone());
    out.object = Some(obstacle.clone());
    out.approach_yaw = Some(yaw);
    match &moved.halted {
        Some(Halt::MoverContact) => {
            out.failure = Some(Failure::Collision);
            out.detail = format!("moving `{obstacle}` would hit the target");
            return out;
        }
        Some(Halt::Jammed(by)) if moved.moved < config.stuck_fraction * dist => {
            out.failure = Some(Failure::Stuck);
            out.detail = format!(
                "`{obstacle}` moved {:.3} of {dist:.3} m; `{by}` is wedged against the target",
                moved.moved
            );
        }
        Some(Halt::Jammed(by)) => {
            out.detail = format!(
                "stopped after {:.3} of {dist:.3} m; `{by}` reached the target",
                moved.moved
            );
        }
        None => {}
    }
    out.contacts = moved.contacts;
    out.scene = moved.scene;
    // the hand retracts to where it started
    out.scene.hand = scene.hand.clone();
    let escaped = escaped_objects(&out.scene);
    if !escaped.is_empty() {
        out.failure = Some(Failure::ObjectEscaped);
        out.detail = format!("left the workspace: {}", escaped.join(", "));
    }
    out
}

fn move_to(scene: &SceneState, name: &str, config: &SkillConfig) -> Outcome {
    let Ok(o) = scene.object(name) else {
        return Outcome::fail(
            scene.clone(),
            Failure::TargetNotFound,
            format!("no object named `{name}`"),
        );
    };
    let goal = Pose::new(
        o.pose.position + Vec3::new(0.0, 0.0, config.hover_height),
        0.0,
        0.0,
        o.pose.yaw,
    );
    let mut s = scene.clone();
    s.set_tcp(goal);
    s.lift_offset = 0.0;
    let mut out = Outcome::new(s);
    out.object = Some(name.to_string());
    out
}

fn lift(scene: &SceneState, height: f64) -> Outcome {
    let mut s = scene.clone();
    let mut tcp = s.hand.tcp;
    let z0 = tcp.position.z;
    tcp.position.z = (z0 + height).min(MAX_TCP_Z.max(z0));
    let gained = tcp.position.z - z0;
    s.set_tcp(tcp);
    s.lift_offset += gained;
    let mut out = Outcome::new(s);
    if gained < height {
        out.detail = format!("clamped at {MAX_TCP_Z} m; rose {gained:.3} m");
    }
    out
}

fn lower(scene: &SceneState) -> Outcome {
    let mut s = scene.clone();
    let mut tcp = s.hand.tcp;
    tcp.position.z -= s.lift_offset;
    s.set_tcp(tcp);
    let mut out = Outcome::new(s);
    if scene.lift_offset == 0.0 {
        out.detail = "nothing to lower".into();
    }
    out.scene.lift_offset = 0.0;
    out
}

fn grasp(scene: &SceneState, config: &SkillConfig) -> Outcome {
    let Some(target) = scene.target() else {
        return Outcome::fail(
            scene.clone(),
            Failure::TargetNotFound,
            "scene has no target",
        );
    };
    let reach = (scene.hand.tcp.position - target.pose.position).norm();
    if reach > config.grasp_reach {
        return Outcome::fail(
            scene.clone(),
            Failure::TargetNotReached,
            format!(
                "hand is {reach:.3} m from `{}` (limit {})",
                target.id, config.grasp_reach
            ),
        );
    }
    let setup = EpisodeSetup {
        rig: &config.rig,
        params: &config.grasp,
        weights: &config.reward,
    };
    let mut controller = GeoController::new(config.controller.clone(), config.rig.clone());
    let (after, outcome) = match run_grasp_episode(
        scene,
        &target.id,
        &mut controller,
        config.grasp_max_ticks,
        None,
        &setup,
    ) {
        Ok(v) => v,
        Err(e) => return Outcome::fail(scene.clone(), Failure::Stuck, e.to_string()),
    };
    let mut out = if let Some(hit) = &outcome.collision {
        Outcome::fail(
            scene.clone(),
            Failure::Collision,
            format!("the hand ran into `{hit}`"),
        )
    } else if outcome.success {
        Outcome::new(after)
    } else {
        let mut dropped = after;
        dropped.release_all();
        dropped.set_tcp(scene.hand.tcp);
        dropped.hand = scene.hand.clone();
        Outcome::fail(
            dropped,
            Failure::Stuck,
            format!(
                "no stable lift after {} ticks (object at {:.3} m)",
                outcome.ticks, outcome.final_height
            ),
        )
    };
    out.object = Some(target.id.clone());
    out.grasp = Some(outcome);
    out
}
