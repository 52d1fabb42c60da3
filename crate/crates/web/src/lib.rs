//! Browser bindings: scene rendering, an episode player and grasp traces.
//! Every export returns a string (SVG or JSON) so the page needs no glue
//! beyond the generated bindings.

use cluttergrasp::executor::{run_episode, EpisodeEnv};
use cluttergrasp::geograsp::{run_grasp_episode_traced, EpisodeSetup, GeoController, TickRecord};
use cluttergrasp::geometry::Pose;
use cluttergrasp::planner::ScriptedPlanner;
use cluttergrasp::render::{render_scene, RenderOptions};
use cluttergrasp::scenegen::{
    derive_seed, generate_scenario, load_scene, ObjectRoster, PlacedObject, ScenarioConfig,
    SCHEMA_VERSION,
};
use cluttergrasp::skills::{execute, SkillConfig};
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn scenario(target: &str, level: u8, seed: u32) -> Result<ScenarioConfig, String> {
    let roster = ObjectRoster::default();
    let s = derive_seed(seed as u64, target, level, 0);
    generate_scenario(target, level, s, &roster).map_err(|e| e.to_string())
}

pub fn targets_json() -> String {
    let roster = ObjectRoster::default();
    let names: Vec<&str> = roster.entries.iter().map(|e| e.target.as_str()).collect();
    serde_json::to_string(&names).expect("names serialize")
}

pub fn scene_svg_for(target: &str, level: u8, seed: u32) -> Result<String, String> {
    let c = scenario(target, level, seed)?;
    let cfg = SkillConfig::default();
    let scene =
        load_scene(&c, &ObjectRoster::default(), &cfg.rig, cfg.home).map_err(|e| e.to_string())?;
    Ok(render_scene(&scene, &RenderOptions::default()))
}

#[derive(Serialize)]
struct Frame {
    step: usize,
    action: String,
    args: serde_json::Value,
    reason: String,
    success: bool,
    message: String,
    svg: String,
}

#[derive(Serialize)]
struct Episode {
    scenario: String,
    outcome: &'static str,
    steps_used: usize,
    replans_used: usize,
    initial: String,
    frames: Vec<Frame>,
}

/// Runs the scripted planner and replays the trace to produce one SVG per step.
pub fn episode_json(target: &str, level: u8, seed: u32, clearing: bool) -> Result<String, String> {
    let c = scenario(target, level, seed)?;
    let env = EpisodeEnv::default();
    let id = format!("{target}_L{level}_{seed}");
    let report = run_episode(&id, &c, &mut ScriptedPlanner { clearing }, &env);
    let cfg = &env.skills;
    let opts = RenderOptions::default();
    let mut scene = load_scene(&c, &env.roster, &cfg.rig, cfg.home).map_err(|e| e.to_string())?;
    let initial = render_scene(&scene, &opts);
    let mut frames = Vec::with_capacity(report.trace.len());
    for t in &report.trace {
        let (next, _) = execute(&scene, &t.action.skill, cfg);
        scene = next;
        frames.push(Frame {
            step: t.step,
            action: t.action.skill.name().to_string(),
            args: serde_json::Value::Object(t.action.skill.args()),
            reason: t.action.reason.clone(),
            success: t.result.success,
            message: t.result.message.clone(),
            svg: render_scene(&scene, &opts),
        });
    }
    serde_json::to_string(&Episode {
        scenario: id,
        outcome: report.outcome.as_str(),
        steps_used: report.steps_used,
        replans_used: report.replans_used,
        initial,
        frames,
    })
    .map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct GraspTrace {
    target: String,
    success: bool,
    ticks: Vec<TickRecord>,
}

/// Runs the grasp controller on the target alone and returns per-tick values.
pub fn grasp_trace_json(target: &str, yaw: f64) -> Result<String, String> {
    let roster = ObjectRoster::default();
    let c = ScenarioConfig {
        schema_version: SCHEMA_VERSION.into(),
        seed: 0,
        level: 1,
        target: PlacedObject {
            name: target.into(),
            x: 0.0,
            y: 0.0,
            theta: yaw,
        },
        obstacles: vec![],
    };
    let cfg = SkillConfig::default();
    let mut scene =
        load_scene(&c, &roster, &cfg.rig, Pose::identity()).map_err(|e| e.to_string())?;
    scene.hand.tcp.yaw = yaw;
    let setup = EpisodeSetup {
        rig: &cfg.rig,
        params: &cfg.grasp,
        weights: &cfg.reward,
    };
    let mut ctl = GeoController::new(cfg.controller.clone(), cfg.rig.clone());
    let mut ticks = Vec::new();
    let (_, out) = run_grasp_episode_traced(
        &scene,
        target,
        &mut ctl,
        cfg.grasp_max_ticks,
        None,
        &setup,
        Some(&mut ticks),
    )
    .map_err(|e| e.to_string())?;
    serde_json::to_string(&GraspTrace {
        target: target.into(),
        success: out.success,
        ticks,
    })
    .map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn targets() -> String {
    targets_json()
}

#[wasm_bindgen]
pub fn scene_svg(target: &str, level: u8, seed: u32) -> Result<String, JsValue> {
    scene_svg_for(target, level, seed).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn episode(target: &str, level: u8, seed: u32, clearing: bool) -> Result<String, JsValue> {
    episode_json(target, level, seed, clearing).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn grasp_trace(target: &str, yaw: f64) -> Result<String, JsValue> {
    grasp_trace_json(target, yaw).map_err(|e| JsValue::from_str(&e))
}
