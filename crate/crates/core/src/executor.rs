//! Closed-loop episode execution and the benchmark harness.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::planner::{PlanAction, Planner, PlannerContext};
use crate::render::{render_scene, RenderOptions};
use crate::scenegen::{load_scene, parse, ObjectRoster, ScenarioConfig, ScenarioId};
use crate::skills::{execute, summarize, Skill, SkillConfig, SkillResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Limits {
    pub max_steps: usize,
    pub replan_limit: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            max_steps: 40,
            replan_limit: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    FailSteps,
    FailEscape,
    FailGrasp,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Success => "success",
            Outcome::FailSteps => "fail_steps",
            Outcome::FailEscape => "fail_escape",
            Outcome::FailGrasp => "fail_grasp",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub step: usize,
    pub action: PlanAction,
    pub result: SkillResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeReport {
    pub scenario: String,
    pub target: String,
    pub level: u8,
    pub scenario_seed: u64,
    pub outcome: Outcome,
    pub steps_used: usize,
    pub replans_used: usize,
    pub trace: Vec<TraceEntry>,
    pub flags: Vec<String>,
}

pub const FLAG_PLANNER_ERROR: &str = "planner_error";
pub const FLAG_BUDGET_EXHAUSTED: &str = "replan_budget_exhausted";
pub const FLAG_SCENARIO_ERROR: &str = "scenario_error";

/// Everything an episode needs besides the scenario and the planner.
#[derive(Debug, Clone, Default)]
pub struct EpisodeEnv {
    pub roster: ObjectRoster,
    pub skills: SkillConfig,
    pub limits: Limits,
    /// Attach a rendered scene to every planner context.
    pub render_for_planner: bool,
}

fn push_flag(flags: &mut Vec<String>, f: &str) {
    if !flags.iter().any(|x| x == f) {
        flags.push(f.to_string());
    }
}

/// Plans, executes and feeds back until the target is lifted, an object
/// leaves the workspace or the step limit is reached.
pub fn run_episode(
    id: &str,
    scenario: &ScenarioConfig,
    planner: &mut dyn Planner,
    env: &EpisodeEnv,
) -> EpisodeReport {
    let mut report = EpisodeReport {
        scenario: id.to_string(),
        target: scenario.target.name.clone(),
        level: scenario.level,
        scenario_seed: scenario.seed,
        outcome: Outcome::FailSteps,
        steps_used: 0,
        replans_used: 0,
        trace: Vec::new(),
        flags: Vec::new(),
    };
    let cfg = &env.skills;
    let mut scene = match load_scene(scenario, &env.roster, &cfg.rig, cfg.home) {
        Ok(s) => s,
        Err(e) => {
            log::warn!("{id}: {e}");
            push_flag(&mut report.flags, FLAG_SCENARIO_ERROR);
            return report;
        }
    };
    let target = scenario.target.name.clone();
    let mut feedback: Option<SkillResult> = None;
    let mut last_action: Option<PlanAction> = None;
    let mut attempted_grasp = false;

    for step in 1..=env.limits.max_steps {
        let ctx = PlannerContext {
            target: target.clone(),
            scene: summarize(&scene, cfg),
            last_feedback: feedback.take(),
            last_action: last_action.clone(),
            step,
            max_steps: env.limits.max_steps,
            render: env
                .render_for_planner
                .then(|| render_scene(&scene, &RenderOptions::default()).into_bytes()),
        };
        let action = planner.plan(&ctx);
        for f in planner.take_flags() {
            push_flag(&mut report.flags, &f);
        }
        let action = match action {
            Ok(a) => a,
            Err(e) => {
                log::warn!("{id}: {e}");
                push_flag(&mut report.flags, FLAG_PLANNER_ERROR);
                break;
            }
        };
        let (next, result) = execute(&scene, &action.skill, cfg);
        scene = next;
        report.steps_used = step;
        if action.skill == Skill::Grasp && result.grasp.is_some() {
            attempted_grasp = true;
        }
        let lifted =
            action.skill == Skill::Grasp && result.grasp.as_ref().is_some_and(|g| g.success);
        let escaped = !result.observation.escaped.is_empty();

        if result.success {
            feedback = Some(result.clone());
        } else if report.replans_used < env.limits.replan_limit {
            report.replans_used += 1;
            feedback = Some(result.clone());
        } else {
            push_flag(&mut report.flags, FLAG_BUDGET_EXHAUSTED);
        }
        report.trace.push(TraceEntry {
            step,
            action: action.clone(),
            result,
        });
        last_action = Some(action);

        if escaped {
            report.outcome = Outcome::FailEscape;
            return report;
        }
        if lifted {
            report.outcome = Outcome::Success;
            return report;
        }
    }
    report.outcome = if attempted_grasp {
        Outcome::FailGrasp
    } else {
        Outcome::FailSteps
    };
    report
}

/// Runs every scenario, fanning out over `parallelism` worker threads.
/// Reports come back in input order.
pub fn run_benchmark<F>(
    scenarios: &[(ScenarioId, ScenarioConfig)],
    make_planner: F,
    env: &EpisodeEnv,
    parallelism: usize,
) -> Vec<EpisodeReport>
where
    F: Fn() -> Box<dyn Planner> + Sync,
{
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<EpisodeReport>>> = Mutex::new(vec![None; scenarios.len()]);
    let workers = parallelism.clamp(1, scenarios.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some((id, cfg)) = scenarios.get(i) else {
                    break;
                };
                let mut planner = make_planner();
                let r = run_episode(&id.to_string(), cfg, planner.as_mut(), env);
                slots.lock().unwrap_or_else(|e| e.into_inner())[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .unwrap_or_else(|e| e.into_inner())
        .into_iter()
        .map(|r| r.expect("every scenario ran"))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub target: String,
    pub level: u8,
    pub episodes: usize,
    pub successes: usize,
}

impl Cell {
    pub fn rate(&self) -> f64 {
        if self.episodes == 0 {
            0.0
        } else {
            self.successes as f64 / self.episodes as f64
        }
    }
}

/// Success rates per (target, level), with per-level and overall averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkTable {
    /// Targets in order of first appearance.
    pub targets: Vec<String>,
    pub cells: Vec<Cell>,
}

impl BenchmarkTable {
    pub fn from_reports(reports: &[EpisodeReport]) -> Self {
        let mut targets: Vec<String> = Vec::new();
        let mut counts: BTreeMap<(usize, u8), (usize, usize)> = BTreeMap::new();
        for r in reports {
            let ti = match targets.iter().position(|t| *t == r.target) {
                Some(i) => i,
                None => {
                    targets.push(r.target.clone());
                    targets.len() - 1
                }
            };
            let c = counts.entry((ti, r.level)).or_default();
            c.0 += 1;
            c.1 += usize::from(r.outcome == Outcome::Success);
        }
        let cells = counts
            .into_iter()
            .map(|((ti, level), (episodes, successes))| Cell {
                target: targets[ti].clone(),
                level,
                episodes,
                successes,
            })
            .collect();
        Self { targets, cells }
    }

    pub fn cell(&self, target: &str, level: u8) -> Option<&Cell> {
        self.cells
            .iter()
            .find(|c| c.target == target && c.level == level)
    }

    /// Pooled success rate over all episodes of a level.
    pub fn level_rate(&self, level: u8) -> Option<f64> {
        let (n, k) = self
            .cells
            .iter()
            .filter(|c| c.level == level)
            .fold((0, 0), |(n, k), c| (n + c.episodes, k + c.successes));
        (n > 0).then(|| k as f64 / n as f64)
    }

    pub fn overall_rate(&self) -> Option<f64> {
        let (n, k) = self
            .cells
            .iter()
            .fold((0, 0), |(n, k), c| (n + c.episodes, k + c.successes));
        (n > 0).then(|| k as f64 / n as f64)
    }

    pub fn levels(&self) -> Vec<u8> {
        let mut l: Vec<u8> = self.cells.iter().map(|c| c.level).collect();
        l.sort_unstable();
        l.dedup();
        l
    }

    /// Plain-text grid: one row per target, one column per level.
    pub fn format(&self) -> String {
        let levels = self.levels();
        let width = self
            .targets
            .iter()
            .map(|t| t.len())
            .max()
            .unwrap_or(0)
            .max(7);
        let rate = |r: Option<f64>| r.map_or_else(|| "   -".to_string(), |v| format!("{v:.2}"));
        let mut s = format!("{:width$}", "target");
        for l in &levels {
            let _ = write!(s, "  {:>5}", format!("L{l}"));
        }
        s.push_str("    avg\n");
        for t in &self.targets {
            let _ = write!(s, "{t:width$}");
            let (mut n, mut k) = (0, 0);
            for l in &levels {
                let c = self.cell(t, *l);
                if let Some(c) = c {
                    n += c.episodes;
                    k += c.successes;
                }
                let _ = write!(s, "  {:>5}", rate(c.map(Cell::rate)));
            }
            let avg = (n > 0).then(|| k as f64 / n as f64);
            let _ = writeln!(s, "  {:>5}", rate(avg));
        }
        let _ = write!(s, "{:width$}", "average");
        for l in &levels {
            let _ = write!(s, "  {:>5}", rate(self.level_rate(*l)));
        }
        let _ = writeln!(s, "  {:>5}", rate(self.overall_rate()));
        s
    }
}

pub const CSV_HEADER: [&str; 6] = [
    "target",
    "level",
    "scenario_seed",
    "outcome",
    "steps",
    "replans",
];

pub fn reports_csv(reports: &[EpisodeReport]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in reports {
        w.write_record([
            r.target.clone(),
            r.level.to_string(),
            r.scenario_seed.to_string(),
            r.outcome.as_str().to_string(),
            r.steps_used.to_string(),
            r.replans_used.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

/// Parses a `{target}_L{level}_{index}` file stem.
pub fn parse_scenario_id(stem: &str) -> Option<ScenarioId> {
    let (rest, index) = stem.rsplit_once('_')?;
    let (target, level) = rest.rsplit_once("_L")?;
    Some(ScenarioId {
        target: target.to_string(),
        level: level.parse().ok()?,
        index: index.parse().ok()?,
    })
}

/// A file that could not be loaded, with the reason.
pub type Rejected = (PathBuf, String);

/// A scenario together with its benchmark id.
pub type Named = (ScenarioId, ScenarioConfig);

/// Loads every `*.json` scenario in `dir`, sorted by id. Files that cannot be
/// read or validated are returned separately.
pub fn load_scenario_dir(dir: &Path) -> Result<(Vec<Named>, Vec<Rejected>)> {
    let mut ok = Vec::new();
    let mut bad = Vec::new();
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    for p in paths {
        let loaded = std::fs::read(&p)
            .map_err(Error::from)
            .and_then(|b| parse(&b));
        match loaded {
            Ok(cfg) => {
                let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
                let id = parse_scenario_id(stem)
                    .filter(|id| id.target == cfg.target.name && id.level == cfg.level)
                    .unwrap_or_else(|| ScenarioId {
                        target: cfg.target.name.clone(),
                        level: cfg.level,
                        index: usize::MAX,
                    });
                ok.push((id, cfg, p));
            }
            Err(e) => bad.push((p, e.to_string())),
        }
    }
    ok.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.2.cmp(&b.2)));
    Ok((ok.into_iter().map(|(i, c, _)| (i, c)).collect(), bad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::{PlannerError, ScriptedPlanner};
    use crate::scenegen::{generate_scenario, PlacedObject, SCHEMA_VERSION};

    struct Always(Skill);

    impl Planner for Always {
        fn plan(&mut self, _ctx: &PlannerContext) -> std::result::Result<PlanAction, PlannerError> {
            Ok(PlanAction::new(self.0.clone(), ""))
        }
    }

    struct Broken;

    impl Planner for Broken {
        fn plan(&mut self, _ctx: &PlannerContext) -> std::result::Result<PlanAction, PlannerError> {
            Err(PlannerError::Failed("boom".into()))
        }
    }

    fn scenario() -> ScenarioConfig {
        generate_scenario("cube", 2, 3, &ObjectRoster::default()).unwrap()
    }

    #[test]
    fn grasp_from_home_exhausts_steps() {
        let env = EpisodeEnv::default();
        let r = run_episode("x", &scenario(), &mut Always(Skill::Grasp), &env);
        assert_eq!(r.outcome, Outcome::FailSteps);
        assert_eq!(r.steps_used, 40);
        assert_eq!(r.replans_used, 5);
        assert_eq!(r.trace.len(), 40);
        assert!(r
            .trace
            .iter()
            .all(|t| t.result.message == "target not reached"));
        assert!(r.flags.contains(&FLAG_BUDGET_EXHAUSTED.to_string()));
    }

    #[test]
    fn planner_error_is_recorded() {
        let env = EpisodeEnv::default();
        let r = run_episode("x", &scenario(), &mut Broken, &env);
        assert_eq!(r.outcome, Outcome::FailSteps);
        assert_eq!(r.steps_used, 0);
        assert_eq!(r.flags, [FLAG_PLANNER_ERROR]);
    }

    #[test]
    fn clear_scene_is_move_then_grasp() {
        let cfg = ScenarioConfig {
            schema_version: SCHEMA_VERSION.into(),
            seed: 0,
            level: 1,
            target: PlacedObject {
                name: "cube".into(),
                x: 0.0,
                y: 0.0,
                theta: 0.2,
            },
            obstacles: vec![
                PlacedObject {
                    name: "can".into(),
                    x: -0.1,
                    y: 0.1,
                    theta: 0.0,
                },
                PlacedObject {
                    name: "foam_brick".into(),
                    x: 0.1,
                    y: -0.1,
                    theta: 0.0,
                },
            ],
        };
        let env = EpisodeEnv::default();
        let r = run_episode("x", &cfg, &mut ScriptedPlanner::default(), &env);
        let names: Vec<_> = r.trace.iter().map(|t| t.action.skill.name()).collect();
        assert_eq!(names, ["move_to", "grasp"]);
        assert_eq!(r.outcome, Outcome::Success);
        assert_eq!(r.steps_used, 2);
    }

    #[test]
    fn table_layout_and_csv() {
        let mk = |t: &str, level, outcome| EpisodeReport {
            scenario: String::new(),
            target: t.into(),
            level,
            scenario_seed: 7,
            outcome,
            steps_used: 3,
            replans_used: 1,
            trace: vec![],
            flags: vec![],
        };
        let reports = vec![
            mk("cube", 1, Outcome::Success),
            mk("cube", 1, Outcome::FailSteps),
            mk("can", 2, Outcome::Success),
        ];
        let t = BenchmarkTable::from_reports(&reports);
        assert_eq!(t.targets, ["cube", "can"]);
        assert_eq!(t.cell("cube", 1).unwrap().rate(), 0.5);
        assert_eq!(t.level_rate(2), Some(1.0));
        assert!((t.overall_rate().unwrap() - 2.0 / 3.0).abs() < 1e-12);
        let text = t.format();
        assert!(text.lines().next().unwrap().contains("L1"));
        assert!(text.contains("average"));

        let csv = String::from_utf8(reports_csv(&reports).unwrap()).unwrap();
        assert_eq!(
            csv.lines().next().unwrap(),
            "target,level,scenario_seed,outcome,steps,replans"
        );
        assert_eq!(csv.lines().nth(2).unwrap(), "cube,1,7,fail_steps,3,1");

        let empty = BenchmarkTable::from_reports(&[]);
        assert!(empty.cells.is_empty());
        assert_eq!(empty.overall_rate(), None);
    }

    #[test]
    fn scenario_ids_parse() {
        assert_eq!(
            parse_scenario_id("foam_brick_L3_07"),
            Some(ScenarioId {
                target: "foam_brick".into(),
                level: 3,
                index: 7
            })
        );
        assert_eq!(parse_scenario_id("cube"), None);
    }
}
