//! Acceptance suite. Each test checks one criterion and prints a single
//! `criterion N: PASS|FAIL ...` line (visible with `--nocapture`).

use std::time::Instant;

use cluttergrasp::executor::{
    reports_csv, run_benchmark, run_episode, BenchmarkTable, EpisodeEnv, EpisodeReport,
};
use cluttergrasp::geograsp::{
    encode_observation, run_grasp_episode_traced, sample_domain_randomization, step_reward,
    EpisodeSetup, GraspParams, RewardState, RewardWeights, DR_CLOUD_SIGMA, OBSERVATION_DIM,
};
use cluttergrasp::geometry::{nearest_vector, PointCloud, Pose, Vec3};
use cluttergrasp::handrig::{ActionVector, HandRig, HandState, ACTION_DIM, KEYPOINTS};
use cluttergrasp::planner::{
    parse_plan_action, PlanAction, Planner, PlannerContext, PlannerError, ScriptedPlanner,
};
use cluttergrasp::scenegen::{
    generate_benchmark, generate_scenario, load_scene, place_scene, serialize, ObjectRoster,
    ScenarioConfig, ScenarioId,
};
use cluttergrasp::simworld::settle;
use cluttergrasp::skills::{execute, summarize, Side, Skill, SkillConfig, SkillResult};
use cluttergrasp::toolserver::{Session, INVALID_PARAMS, METHOD_NOT_FOUND, PARSE_ERROR};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

const MASTER_SEED: u64 = 42;

fn report(n: u32, ok: bool, detail: impl AsRef<str>) {
    println!(
        "criterion {n}: {} {}",
        if ok { "PASS" } else { "FAIL" },
        detail.as_ref()
    );
    assert!(ok, "criterion {n} failed: {}", detail.as_ref());
}

fn benchmark() -> Vec<(ScenarioId, ScenarioConfig)> {
    generate_benchmark(MASTER_SEED, &ObjectRoster::default()).expect("benchmark generates")
}

fn workers() -> usize {
    std::thread::available_parallelism().map_or(2, |n| n.get())
}

#[test]
fn criterion_01_benchmark_matrix() {
    let roster = ObjectRoster::default();
    let t = Instant::now();
    let sc = generate_benchmark(MASTER_SEED, &roster).unwrap();
    let cfg = SkillConfig::default();
    let mut problems = Vec::new();
    let mut worst_settle: f64 = 0.0;
    let mut worst_repeat: f64 = 0.0;
    let mut worst_gap = f64::INFINITY;
    for (id, c) in &sc {
        if c.obstacles.len() != 2 * c.level as usize {
            problems.push(format!("{id}: {} obstacles", c.obstacles.len()));
        }
        let pts: Vec<(f64, f64)> = c.placements().map(|p| (p.x, p.y)).collect();
        for (i, a) in pts.iter().enumerate() {
            if a.0.abs() > 0.10 || a.1.abs() > 0.10 {
                problems.push(format!("{id}: pose {a:?} outside region"));
            }
            for b in &pts[i + 1..] {
                let d = ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
                worst_gap = worst_gap.min(d);
                if d < 0.06 {
                    problems.push(format!("{id}: spacing {d}"));
                }
            }
        }
        let placed = place_scene(c, &roster, &cfg.rig, cfg.home).unwrap();
        let (settled, disp) = settle(&placed).unwrap();
        worst_settle = worst_settle.max(disp);
        let (_, again) = settle(&settled).unwrap();
        worst_repeat = worst_repeat.max(again);
    }
    if worst_settle >= 0.01 {
        problems.push(format!("settle displacement {worst_settle}"));
    }
    if worst_repeat >= 1e-9 {
        problems.push(format!("second settle moved {worst_repeat}"));
    }
    let mut ids: Vec<String> = sc.iter().map(|(id, _)| id.to_string()).collect();
    ids.sort();
    ids.dedup();
    let per_level: Vec<usize> = (1..=3)
        .map(|l| sc.iter().filter(|(_, c)| c.level == l).count())
        .collect();
    let elapsed = t.elapsed().as_secs_f64();
    let ok = sc.len() == 210
        && ids.len() == 210
        && per_level == [70, 70, 70]
        && problems.is_empty()
        && elapsed < 60.0;
    report(
        1,
        ok,
        format!(
            "{} scenarios, per level {per_level:?}, min spacing {worst_gap:.4} m, max re-settle {worst_settle:.2e} m, max second settle {worst_repeat:.2e} m, {elapsed:.2} s; problems: {problems:?}",
            sc.len()
        ),
    );
}

fn benchmark_outputs() -> (Vec<u8>, Vec<u8>, Vec<u8>) {
    let sc = benchmark();
    let mut configs = Vec::new();
    for (_, c) in &sc {
        configs.extend(serialize(c));
    }
    let env = EpisodeEnv::default();
    let reports = run_benchmark(
        &sc,
        || Box::new(ScriptedPlanner::default()),
        &env,
        workers(),
    );
    let json = serde_json::to_vec(&reports).unwrap();
    (configs, json, reports_csv(&reports).unwrap())
}

#[test]
fn criterion_02_determinism() {
    let a = benchmark_outputs();
    let b = benchmark_outputs();
    let ok = a == b && !a.0.is_empty() && !a.1.is_empty() && !a.2.is_empty();
    report(
        2,
        ok,
        format!(
            "scenario JSON {} bytes, report JSON {} bytes, CSV {} bytes; identical: {}/{}/{}",
            a.0.len(),
            a.1.len(),
            a.2.len(),
            a.0 == b.0,
            a.1 == b.1,
            a.2 == b.2
        ),
    );
}

/// Direct transcription of the shaped reward, computed from scratch.
#[allow(clippy::manual_clamp)]
fn reward_oracle(h0: f64, h: f64, contacts: usize, d_prev: f64, d_cur: f64, a: &[f64]) -> f64 {
    let mut r = 50.0 * (h - h0);
    if h > 0.15 {
        r += 200.0;
    }
    r += 10.0 * contacts as f64;
    r += 10.0 * (d_prev - d_cur);
    let mut sq = 0.0;
    for x in a {
        sq += x * x;
    }
    r -= 0.03 * sq.sqrt();
    if r < -100.0 {
        -100.0
    } else if r > 100.0 {
        100.0
    } else {
        r
    }
}

#[test]
fn criterion_03_reward_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let w = RewardWeights::default();
    let mut worst: f64 = 0.0;
    let mut out_of_range = 0;
    for _ in 0..10_000 {
        let h0 = rng.random_range(0.0..0.1);
        let prev = RewardState {
            object_height: rng.random_range(0.0..0.4),
            initial_height: h0,
            contact_count: rng.random_range(0..=12),
            nn_distance: rng.random_range(0.0..3.0),
        };
        let cur = RewardState {
            object_height: if rng.random_bool(0.1) {
                0.15
            } else {
                rng.random_range(-0.05..0.5)
            },
            initial_height: h0,
            contact_count: rng.random_range(0..=12),
            nn_distance: rng.random_range(0.0..3.0),
        };
        let mut a = [0.0; ACTION_DIM];
        for v in a.iter_mut() {
            *v = rng.random_range(-1.0..=1.0);
        }
        let got = step_reward(&prev, &cur, &ActionVector(a), &w);
        let want = reward_oracle(
            h0,
            cur.object_height,
            cur.contact_count,
            prev.nn_distance,
            cur.nn_distance,
            &a,
        );
        worst = worst.max((got - want).abs());
        if !(-100.0..=100.0).contains(&got) {
            out_of_range += 1;
        }
    }
    report(
        3,
        worst <= 1e-9 && out_of_range == 0,
        format!("10000 triples, max |diff| {worst:.3e}, out of range {out_of_range}"),
    );
}

fn random_hand(rng: &mut ChaCha8Rng, rig: &HandRig) -> HandState {
    let tcp = Pose::new(
        Vec3::new(
            rng.random_range(-0.3..0.3),
            rng.random_range(-0.3..0.3),
            rng.random_range(0.0..0.5),
        ),
        rng.random_range(-0.5..0.5),
        rng.random_range(-0.5..0.5),
        rng.random_range(-3.1..3.1),
    );
    let mut h = HandState::open(rig, tcp);
    for (j, v) in h.fingers.iter_mut().enumerate() {
        let (lo, hi) = h.joint_limits[j];
        *v = rng.random_range(lo..=hi);
    }
    h
}

#[test]
fn criterion_04_observation_invariants() {
    let rig = HandRig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut bad_len = 0;
    let mut worst_norm: f64 = 0.0;
    let mut zero_blocks = 0;
    for i in 0..10_000 {
        let hand = random_hand(&mut rng, &rig);
        let kp = rig.forward_keypoints(&hand);
        let n = rng.random_range(1..=256);
        let mut pts: Vec<Vec3> = (0..n)
            .map(|_| {
                Vec3::new(
                    rng.random_range(-0.3..0.3),
                    rng.random_range(-0.3..0.3),
                    rng.random_range(0.0..0.5),
                )
            })
            .collect();
        if i % 10 == 0 {
            // put some cloud points exactly on keypoints to exercise zero blocks
            pts.extend(kp.iter().take(rng.random_range(1..=KEYPOINTS)));
        }
        let obs = encode_observation(&rig, &hand, &PointCloud::from_points(pts), 0.05).unwrap();
        if obs.to_vec().len() != OBSERVATION_DIM {
            bad_len += 1;
        }
        for k in 0..KEYPOINTS {
            let b = obs.block(k);
            if b == Vec3::zeros() {
                zero_blocks += 1;
            } else {
                worst_norm = worst_norm.max((b.norm() - 1.0).abs());
            }
        }
    }

    let roster = ObjectRoster::default();
    let cfg = SkillConfig::default();
    let params = GraspParams::default();
    let w = RewardWeights::default();
    let setup = EpisodeSetup {
        rig: &rig,
        params: &params,
        weights: &w,
    };
    let targets: Vec<String> = roster.entries.iter().map(|e| e.target.clone()).collect();
    let mut worst_tel: f64 = 0.0;
    let mut checked = 0;
    for ep in 0..100u64 {
        let t = &targets[ep as usize % targets.len()];
        let c = generate_scenario(t, 1 + (ep % 3) as u8, ep, &roster).unwrap();
        let scene = load_scene(&c, &roster, &cfg.rig, cfg.home).unwrap();
        let mut arng = ChaCha8Rng::seed_from_u64(1000 + ep);
        let mut ctl = move |_: &cluttergrasp::geograsp::GraspObservation| {
            let mut a = [0.0; ACTION_DIM];
            for v in a.iter_mut() {
                *v = arng.random_range(-1.0..=1.0);
            }
            ActionVector(a)
        };
        let dr = (ep % 2 == 0).then(|| sample_domain_randomization(ep));
        let mut trace = Vec::new();
        let (_, out) = run_grasp_episode_traced(
            &scene,
            t,
            &mut ctl,
            rng.random_range(10..120),
            dr.as_ref(),
            &setup,
            Some(&mut trace),
        )
        .unwrap();
        let sum: f64 = trace.iter().map(|r| r.nn_term).sum();
        let d_t = trace
            .last()
            .map_or(out.initial_nn_distance, |r| r.nn_distance);
        let ident = 10.0 * (out.initial_nn_distance - d_t);
        worst_tel = worst_tel
            .max((sum - ident).abs())
            .max((out.nn_reward_sum - ident).abs());
        checked += 1;
    }
    report(
        4,
        bad_len == 0 && worst_norm <= 1e-6 && worst_tel <= 1e-8 && checked == 100,
        format!(
            "10000 states, bad lengths {bad_len}, max |norm-1| {worst_norm:.2e}, zero blocks {zero_blocks}; {checked} episodes, max telescoping error {worst_tel:.2e}"
        ),
    );
}

#[test]
fn criterion_05_nearest_neighbour_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut mismatches = 0;
    let mut queries = 0;
    while queries < 10_000 {
        let n = rng.random_range(1..=2048);
        let mut pts: Vec<Vec3> = (0..n)
            .map(|_| {
                Vec3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                )
            })
            .collect();
        if rng.random_bool(0.2) {
            // duplicates: ties resolve to the lowest index
            let dup = pts[rng.random_range(0..n)];
            pts.push(dup);
        }
        let cloud = PointCloud::from_points(pts.clone());
        for _ in 0..50 {
            let q = Vec3::new(
                rng.random_range(-1.2..1.2),
                rng.random_range(-1.2..1.2),
                rng.random_range(-1.2..1.2),
            );
            let mut best_i = 0;
            let mut best_d2 = f64::INFINITY;
            for (i, p) in pts.iter().enumerate() {
                let dx = p.x - q.x;
                let dy = p.y - q.y;
                let dz = p.z - q.z;
                let d2 = dx * dx + dy * dy + dz * dz;
                if d2 < best_d2 {
                    best_d2 = d2;
                    best_i = i;
                }
            }
            let got = nearest_vector(&q, &cloud).unwrap();
            let want_d = (pts[best_i] - q).norm();
            if got.index != best_i || got.distance != want_d {
                mismatches += 1;
            }
            queries += 1;
        }
    }
    report(
        5,
        mismatches == 0,
        format!("{queries} queries, {mismatches} mismatches"),
    );
}

/// Only ever asks for things that cannot succeed.
struct AlwaysFails {
    n: usize,
}

impl Planner for AlwaysFails {
    fn plan(&mut self, _: &PlannerContext) -> Result<PlanAction, PlannerError> {
        self.n += 1;
        let skill = if self.n.is_multiple_of(2) {
            Skill::MoveTo {
                target: "no_such_object".into(),
            }
        } else {
            Skill::Grasp
        };
        Ok(PlanAction::new(skill, "adversarial"))
    }
}

#[test]
fn criterion_06_executor_bounds() {
    let sc = benchmark();
    let env = EpisodeEnv::default();
    let reports: Vec<EpisodeReport> =
        run_benchmark(&sc, || Box::new(AlwaysFails { n: 0 }), &env, workers());
    let bad: Vec<_> = reports
        .iter()
        .filter(|r| r.steps_used != 40 || r.replans_used > 5)
        .map(|r| (r.scenario.clone(), r.steps_used, r.replans_used))
        .collect();
    let all_failed = reports
        .iter()
        .all(|r| r.trace.iter().all(|t| !t.result.success));
    let max_replans = reports.iter().map(|r| r.replans_used).max().unwrap_or(0);
    report(
        6,
        reports.len() == 210 && bad.is_empty() && all_failed,
        format!(
            "{} episodes, every step failed: {all_failed}, max replans {max_replans}, violations {bad:?}",
            reports.len()
        ),
    );
}

#[test]
fn criterion_07_ablation_trend() {
    let sc = benchmark();
    let env = EpisodeEnv::default();
    let rates = |clearing: bool| {
        let r = run_benchmark(
            &sc,
            || Box::new(ScriptedPlanner { clearing }),
            &env,
            workers(),
        );
        let t = BenchmarkTable::from_reports(&r);
        [1u8, 2, 3].map(|l| t.level_rate(l).unwrap())
    };
    let full = rates(true);
    let grasp_only = rates(false);
    let margin_ok = (1..3).all(|i| full[i] - grasp_only[i] >= 0.10);
    let trend_ok = grasp_only[0] > grasp_only[1] && grasp_only[1] > grasp_only[2];
    report(
        7,
        margin_ok && trend_ok,
        format!("clearing {full:.3?}, grasp-only {grasp_only:.3?} (L1, L2, L3)"),
    );
}

fn session() -> Session {
    let roster = ObjectRoster::default();
    let c = generate_scenario("mug", 2, 8, &roster).unwrap();
    let cfg = SkillConfig::default();
    let scene = load_scene(&c, &roster, &cfg.rig, cfg.home).unwrap();
    Session::new(scene, cfg, c.seed, c.level)
}

fn random_valid_call(rng: &mut ChaCha8Rng, names: &[String]) -> (String, Value) {
    let side = ["left", "center", "right"][rng.random_range(0..3)];
    let dist = rng.random_range(0.001..=0.15);
    match rng.random_range(0..8) {
        0 => ("push".into(), json!({"side": side, "dist": dist})),
        1 => ("pull".into(), json!({"side": side})),
        2 => {
            let t = if rng.random_bool(0.8) {
                names[rng.random_range(0..names.len())].clone()
            } else {
                "ghost".into()
            };
            ("move_to".into(), json!({"target": t}))
        }
        3 => (
            "lift".into(),
            json!({"height": rng.random_range(0.01..=1.0)}),
        ),
        4 => ("lower".into(), json!({})),
        5 => ("grasp".into(), Value::Null),
        6 => ("initarm".into(), json!({})),
        _ => ("inithand".into(), json!({})),
    }
}

fn random_invalid(rng: &mut ChaCha8Rng, id: i64) -> (String, i64) {
    match rng.random_range(0..5) {
        0 => {
            let full = format!(r#"{{"id": {id}, "method": "tools/list"}}"#);
            let cut = rng.random_range(1..full.len() - 1);
            (full[..cut].to_string(), PARSE_ERROR)
        }
        1 => {
            let junk: String = (0..rng.random_range(1..20))
                .map(|_| ['@', '#', ',', ':', 'x', '"', '['][rng.random_range(0..7)])
                .collect();
            (format!("{{{junk}"), PARSE_ERROR)
        }
        2 => {
            let m = ["tools/run", "list", "", "tools/CALL"][rng.random_range(0..4)];
            (
                format!(r#"{{"id": {id}, "method": "{m}"}}"#),
                METHOD_NOT_FOUND,
            )
        }
        3 => {
            let t = ["fly", "Push", "grasp2", ""][rng.random_range(0..4)];
            (
                format!(r#"{{"id": {id}, "method": "tools/call", "params": {{"name": "{t}"}}}}"#),
                METHOD_NOT_FOUND,
            )
        }
        _ => {
            let args = [
                json!({"side": "up"}),
                json!({"dist": 0.05}),
                json!({"side": "left", "dist": -1.0}),
                json!({"side": "left", "dist": 0.5}),
                json!({"side": "left", "speed": 1}),
                json!([1, 2]),
                json!("left"),
            ];
            let tool = if rng.random_bool(0.5) { "push" } else { "pull" };
            let a = &args[rng.random_range(0..args.len())];
            if rng.random_bool(0.25) {
                let bad = [
                    json!({"height": 1.5}),
                    json!({"height": 0.0}),
                    json!({"height": "high"}),
                ];
                let b = &bad[rng.random_range(0..bad.len())];
                return (
                    json!({"id": id, "method": "tools/call", "params": {"name": "lift", "arguments": b}})
                        .to_string(),
                    INVALID_PARAMS,
                );
            }
            (
                json!({"id": id, "method": "tools/call", "params": {"name": tool, "arguments": a}})
                    .to_string(),
                INVALID_PARAMS,
            )
        }
    }
}

#[test]
fn criterion_08_tool_server_fuzz() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut s = session();
    let names: Vec<String> = s.scene.objects.iter().map(|o| o.id.clone()).collect();
    let mut id = 0i64;
    let mut valid_ok = 0;
    let mut valid_bad = Vec::new();
    for _ in 0..1000 {
        id += rng.random_range(1..4);
        let (name, args) = random_valid_call(&mut rng, &names);
        let mut params = json!({"name": name});
        if !args.is_null() {
            params["arguments"] = args;
        }
        let req = json!({"jsonrpc": "2.0", "id": id, "method": "tools/call", "params": params});
        let resp = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
            s.handle_message(req.to_string().as_bytes())
        }));
        let Ok(resp) = resp else {
            valid_bad.push(format!("panic on {req}"));
            continue;
        };
        let v: Value = match serde_json::from_slice(&resp) {
            Ok(v) => v,
            Err(e) => {
                valid_bad.push(format!("unparseable response: {e}"));
                continue;
            }
        };
        let well_formed = v["jsonrpc"] == "2.0"
            && v["id"] == id
            && v.get("error").is_none()
            && v["result"]["success"].is_boolean()
            && v["result"]["message"].is_string()
            && serde_json::from_value::<SkillResult>(v["result"].clone()).is_ok();
        if well_formed {
            valid_ok += 1;
        } else {
            valid_bad.push(v.to_string());
        }
    }

    let mut invalid_ok = 0;
    let mut invalid_bad = Vec::new();
    for _ in 0..1000 {
        id += 1;
        let (msg, code) = random_invalid(&mut rng, id);
        let resp = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
            s.handle_message(msg.as_bytes())
        }));
        let Ok(resp) = resp else {
            invalid_bad.push(format!("panic on {msg}"));
            continue;
        };
        let v: Value = serde_json::from_slice(&resp).unwrap_or(Value::Null);
        let id_ok = if code == PARSE_ERROR {
            v["id"].is_null()
        } else {
            v["id"] == id
        };
        if v["error"]["code"] == code && v["error"]["message"].is_string() && id_ok {
            invalid_ok += 1;
        } else {
            invalid_bad.push(format!("{msg} -> {v}"));
        }
    }
    valid_bad.truncate(3);
    invalid_bad.truncate(3);
    report(
        8,
        valid_ok == 1000 && invalid_ok == 1000,
        format!(
            "valid {valid_ok}/1000, invalid {invalid_ok}/1000; examples {valid_bad:?} {invalid_bad:?}"
        ),
    );
}

fn random_action(rng: &mut ChaCha8Rng) -> PlanAction {
    let side = Side::ALL[rng.random_range(0..3)];
    let dist = rng.random_range(1e-6..=0.15);
    let skill = match rng.random_range(0..8) {
        0 => Skill::Push { side, dist },
        1 => Skill::Pull { side, dist },
        2 => {
            let pool = ['a', 'z', '_', '9', 'é', ' ', '"', '\\', '{', '}', '漢'];
            let n = rng.random_range(1..12);
            Skill::MoveTo {
                target: (0..n)
                    .map(|_| pool[rng.random_range(0..pool.len())])
                    .collect(),
            }
        }
        3 => Skill::Lift {
            height: rng.random_range(1e-9..=1.0),
        },
        4 => Skill::Lower,
        5 => Skill::Grasp,
        6 => Skill::InitArm,
        _ => Skill::InitHand,
    };
    let pool = ['a', ' ', '"', '\n', '{', '}', 'ß', '\\', '\u{1F600}'];
    let reason: String = (0..rng.random_range(0..30))
        .map(|_| pool[rng.random_range(0..pool.len())])
        .collect();
    PlanAction::new(skill, reason)
}

fn blocked_context() -> PlannerContext {
    let roster = ObjectRoster::default();
    let cfg = SkillConfig::default();
    for seed in 0.. {
        let c = generate_scenario("can", 3, seed, &roster).unwrap();
        let scene = load_scene(&c, &roster, &cfg.rig, cfg.home).unwrap();
        let (scene, _) = execute(
            &scene,
            &Skill::MoveTo {
                target: "can".into(),
            },
            &cfg,
        );
        let summary = summarize(&scene, &cfg);
        if summary.hovering && !summary.blocking.is_empty() {
            return PlannerContext {
                target: "can".into(),
                scene: summary,
                last_feedback: None,
                last_action: None,
                step: 2,
                max_steps: 40,
                render: None,
            };
        }
    }
    unreachable!()
}

fn feedback(ctx: &PlannerContext, action: &str, object: &str, success: bool) -> SkillResult {
    SkillResult {
        success,
        message: if success { "ok" } else { "stuck detected" }.into(),
        detail: String::new(),
        action: action.into(),
        object: Some(object.into()),
        approach_yaw: None,
        contacts: Vec::new(),
        observation: ctx.scene.clone(),
        grasp: None,
    }
}

#[test]
fn criterion_09_plan_round_trip_and_fallback() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let a = random_action(&mut rng);
        match parse_plan_action(&a.serialize()) {
            Ok(b) if b == a => {}
            _ => mismatches += 1,
        }
    }

    let planner = ScriptedPlanner::default();
    let base = blocked_context();
    let blocker = base.scene.blocking[0].clone();
    let other = base
        .scene
        .objects
        .iter()
        .find(|o| o.id != blocker && !o.is_target)
        .unwrap()
        .id
        .clone();
    let with = |fb: Option<SkillResult>| {
        let mut c = base.clone();
        c.last_feedback = fb;
        planner.decide(&c).skill
    };
    let is_push = |s: &Skill| matches!(s, Skill::Push { .. });
    let is_pull = |s: &Skill| matches!(s, Skill::Pull { .. });
    let cases = [
        ("no feedback", is_push(&with(None))),
        (
            "push failed on blocker",
            is_pull(&with(Some(feedback(&base, "push", &blocker, false)))),
        ),
        (
            "push succeeded on blocker",
            is_push(&with(Some(feedback(&base, "push", &blocker, true)))),
        ),
        (
            "push failed on another object",
            is_push(&with(Some(feedback(&base, "push", &other, false)))),
        ),
        (
            "grasp failed",
            is_push(&with(Some(feedback(&base, "grasp", &blocker, false)))),
        ),
        (
            "pull failed on blocker",
            with(Some(feedback(&base, "pull", &blocker, false))) == Skill::InitArm,
        ),
        (
            "pull succeeded on blocker",
            is_push(&with(Some(feedback(&base, "pull", &blocker, true)))),
        ),
    ];
    let failing: Vec<&str> = cases.iter().filter(|c| !c.1).map(|c| c.0).collect();
    report(
        9,
        mismatches == 0 && failing.is_empty(),
        format!(
            "1000 actions, {mismatches} round-trip mismatches; fallback cases {} checked, failing {failing:?}",
            cases.len()
        ),
    );
}

#[test]
fn criterion_10_domain_randomization() {
    let mut out = 0;
    let mut sum = 0.0;
    let n = 100_000u64;
    for seed in 0..n {
        let s = sample_domain_randomization(seed);
        let ok = (0.5..=2.0).contains(&s.friction_scale)
            && (0.8..=1.2).contains(&s.mass_scale)
            && s.cloud_noise_sigma == DR_CLOUD_SIGMA
            && (s.cloud_noise_sigma - 0.005).abs() < 1e-12
            && s.init_joint_offset
                .iter()
                .all(|v| (-0.05..=0.05).contains(v));
        if !ok {
            out += 1;
        }
        sum += s.friction_scale;
    }
    let mean = sum / n as f64;
    report(
        10,
        out == 0 && (mean - 1.25).abs() <= 0.01,
        format!("{n} samples, {out} out of range, friction mean {mean:.5}"),
    );
}

#[test]
fn scripted_episode_reports_are_self_consistent() {
    let sc = benchmark();
    let env = EpisodeEnv::default();
    let (id, c) = &sc[sc.len() - 1];
    let r = run_episode(&id.to_string(), c, &mut ScriptedPlanner::default(), &env);
    assert_eq!(r.trace.len(), r.steps_used);
    assert!(r.replans_used <= 5);
}
