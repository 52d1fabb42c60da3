//! Benchmark scenario generation and the canonical scenario document.
//!
//! Each scenario places a target and `2 * level` obstacles (taken in pool
//! order) uniformly in a 20 x 20 cm square, redrawing the whole layout until
//! no two centers are closer than 6 cm. The layout is then settled and
//! rejected if anything travels more than 1 cm during the measurement phase. The serialized poses
//! are the sampled ones; loading a scenario re-runs the settle.

use std::collections::{BTreeMap, HashSet};
use std::f64::consts::PI;
use std::fmt;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Body, Pose, Shape, Vec3};
use crate::handrig::{HandRig, HandState};
use crate::simworld::{settle, SceneObject, SceneState, DEFAULT_WORKSPACE_HALFWIDTH};

pub const SCHEMA_VERSION: &str = "1.0";
pub const REGION_HALFWIDTH: f64 = 0.10;
pub const MIN_CENTER_DISTANCE: f64 = 0.06;
pub const MAX_SETTLE_DISPLACEMENT: f64 = 0.01;
/// Consecutive settle rejections before a configuration is declared infeasible.
pub const MAX_REJECTIONS: usize = 1000;
/// Cap on layout draws that violate the spacing constraint, so that generation
/// always terminates.
pub const MAX_DRAWS: usize = 1_000_000;
pub const SCENES_PER_CELL: usize = 10;
pub const POOL_SIZE: usize = 6;
pub const TARGET_FRICTION: f64 = 2.0;
pub const CLUTTER_FRICTION: f64 = 1.0;

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Seed of scenario `index` in the `(target, level)` cell.
pub fn derive_seed(master_seed: u64, target: &str, level: u8, index: usize) -> u64 {
    fnv1a64(format!("{master_seed}/{target}/{level}/{index}").as_bytes())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub body: Body,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RosterEntry {
    pub target: String,
    pub pool: Vec<String>,
}

/// Targets with their ordered obstacle pools, plus the shape of every object
/// that can appear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectRoster {
    pub entries: Vec<RosterEntry>,
    pub catalog: BTreeMap<String, ObjectSpec>,
}

fn boxed(x: f64, y: f64, z: f64) -> Shape {
    Shape::Box { x, y, z }
}

fn cyl(radius: f64, height: f64) -> Shape {
    Shape::Cylinder { radius, height }
}

fn sphere(radius: f64) -> Shape {
    Shape::Sphere { radius }
}

impl Default for ObjectRoster {
    fn default() -> Self {
        let spec = |body, mass| ObjectSpec { body, mass };
        let catalog: BTreeMap<String, ObjectSpec> = [
            ("cube", spec(Body::single(boxed(0.056, 0.056, 0.056)), 0.10)),
            ("can", spec(Body::single(cyl(0.03, 0.08)), 0.30)),
            (
                "pear",
                spec(
                    Body::pair(
                        sphere(0.032),
                        Vec3::zeros(),
                        sphere(0.022),
                        Vec3::new(0.0, 0.0, 0.035),
                    ),
                    0.15,
                ),
            ),
            ("apple", spec(Body::single(sphere(0.037)), 0.15)),
            (
                "mug",
                spec(
                    Body::pair(
                        cyl(0.035, 0.08),
                        Vec3::zeros(),
                        boxed(0.016, 0.01, 0.04),
                        Vec3::new(0.041, 0.0, 0.0),
                    ),
                    0.12,
                ),
            ),
            (
                "lego",
                spec(
                    Body::pair(
                        boxed(0.064, 0.032, 0.024),
                        Vec3::zeros(),
                        boxed(0.032, 0.032, 0.018),
                        Vec3::new(0.016, 0.0, 0.021),
                    ),
                    0.05,
                ),
            ),
            ("ball", spec(Body::single(sphere(0.032)), 0.08)),
            ("orange", spec(Body::single(sphere(0.035)), 0.14)),
            (
                "foam_brick",
                spec(Body::single(boxed(0.05, 0.075, 0.05)), 0.03),
            ),
            ("fish_can", spec(Body::single(cyl(0.04, 0.035)), 0.17)),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();

        let entry = |target: &str, pool: [&str; POOL_SIZE]| RosterEntry {
            target: target.into(),
            pool: pool.iter().map(|s| s.to_string()).collect(),
        };
        let entries = vec![
            entry(
                "cube",
                ["can", "foam_brick", "mug", "apple", "ball", "orange"],
            ),
            entry(
                "can",
                ["foam_brick", "mug", "apple", "ball", "orange", "pear"],
            ),
            entry(
                "pear",
                ["can", "foam_brick", "mug", "apple", "ball", "cube"],
            ),
            entry(
                "apple",
                ["orange", "foam_brick", "mug", "pear", "ball", "cube"],
            ),
            entry(
                "mug",
                ["can", "foam_brick", "apple", "ball", "orange", "cube"],
            ),
            entry(
                "lego",
                ["fish_can", "foam_brick", "mug", "apple", "ball", "orange"],
            ),
            entry(
                "ball",
                ["can", "foam_brick", "mug", "apple", "pear", "cube"],
            ),
        ];
        Self { entries, catalog }
    }
}

impl ObjectRoster {
    pub fn entry(&self, target: &str) -> Result<&RosterEntry> {
        self.entries
            .iter()
            .find(|e| e.target == target)
            .ok_or_else(|| Error::UnknownObject(target.to_string()))
    }

    pub fn spec(&self, name: &str) -> Result<&ObjectSpec> {
        self.catalog
            .get(name)
            .ok_or_else(|| Error::UnknownObject(name.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        for e in &self.entries {
            if e.pool.len() != POOL_SIZE {
                return Err(Error::InvalidArgument(format!(
                    "pool of `{}` has {} entries, expected {POOL_SIZE}",
                    e.target,
                    e.pool.len()
                )));
            }
            let unique: HashSet<_> = e.pool.iter().collect();
            if unique.len() != e.pool.len() || e.pool.contains(&e.target) {
                return Err(Error::InvalidArgument(format!(
                    "pool of `{}` repeats a name",
                    e.target
                )));
            }
            for name in std::iter::once(&e.target).chain(&e.pool) {
                self.spec(name)?.body.validate()?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacedObject {
    pub name: String,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: String,
    pub seed: u64,
    pub level: u8,
    pub target: PlacedObject,
    pub obstacles: Vec<PlacedObject>,
}

impl ScenarioConfig {
    pub fn placements(&self) -> impl Iterator<Item = &PlacedObject> {
        std::iter::once(&self.target).chain(&self.obstacles)
    }

    /// Enforces the document invariants.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Scenario(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!(
                "unknown schema version `{}` (expected `{SCHEMA_VERSION}`)",
                self.schema_version
            ));
        }
        if !(1..=3).contains(&self.level) {
            return bad(format!("level must be 1, 2 or 3, got {}", self.level));
        }
        let want = 2 * self.level as usize;
        if self.obstacles.len() != want {
            return bad(format!(
                "level {} requires {want} obstacles, found {}",
                self.level,
                self.obstacles.len()
            ));
        }
        let mut names = HashSet::new();
        for p in self.placements() {
            if !(p.x.is_finite() && p.y.is_finite() && p.theta.is_finite()) {
                return bad(format!("`{}` has a non-finite pose", p.name));
            }
            if p.x.abs() > REGION_HALFWIDTH || p.y.abs() > REGION_HALFWIDTH {
                return bad(format!(
                    "`{}` at ({}, {}) lies outside the +/-{REGION_HALFWIDTH} m region",
                    p.name, p.x, p.y
                ));
            }
            if p.theta.abs() > PI {
                return bad(format!("`{}` yaw {} outside [-pi, pi]", p.name, p.theta));
            }
            if !names.insert(p.name.as_str()) {
                return bad(format!("object name `{}` appears twice", p.name));
            }
        }
        let all: Vec<_> = self.placements().collect();
        for i in 0..all.len() {
            for j in i + 1..all.len() {
                let d = (all[i].x - all[j].x).hypot(all[i].y - all[j].y);
                if d < MIN_CENTER_DISTANCE {
                    return bad(format!(
                        "`{}` and `{}` are {d:.6} m apart (minimum {MIN_CENTER_DISTANCE})",
                        all[i].name, all[j].name
                    ));
                }
            }
        }
        Ok(())
    }
}

fn fmt6(v: f64) -> String {
    let s = format!("{v:.6}");
    if s == "-0.000000" {
        "0.000000".into()
    } else {
        s
    }
}

fn quantize(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}

fn write_placed(out: &mut String, p: &PlacedObject) {
    let name = serde_json::to_string(&p.name).expect("string serializes");
    let _ = write!(
        out,
        "{{\"name\": {name}, \"x\": {}, \"y\": {}, \"theta\": {}}}",
        fmt6(p.x),
        fmt6(p.y),
        fmt6(p.theta)
    );
}

/// Canonical text: fixed key order, six decimals, two-space indent.
pub fn serialize(config: &ScenarioConfig) -> Vec<u8> {
    let mut out = String::new();
    out.push_str("{\n");
    let version = serde_json::to_string(&config.schema_version).expect("string serializes");
    let _ = writeln!(out, "  \"schema_version\": {version},");
    let _ = writeln!(out, "  \"seed\": {},", config.seed);
    let _ = writeln!(out, "  \"level\": {},", config.level);
    out.push_str("  \"target\": ");
    write_placed(&mut out, &config.target);
    out.push_str(",\n  \"obstacles\": [");
    for (i, o) in config.obstacles.iter().enumerate() {
        out.push_str(if i == 0 { "\n    " } else { ",\n    " });
        write_placed(&mut out, o);
    }
    if !config.obstacles.is_empty() {
        out.push_str("\n  ");
    }
    out.push_str("]\n}\n");
    out.into_bytes()
}

pub fn parse(bytes: &[u8]) -> Result<ScenarioConfig> {
    let config: ScenarioConfig = serde_json::from_slice(bytes)
        .map_err(|e| Error::Scenario(format!("malformed document: {e}")))?;
    config.validate()?;
    Ok(config)
}

/// Places the scenario's objects on the table without settling.
pub fn place_scene(
    config: &ScenarioConfig,
    roster: &ObjectRoster,
    rig: &HandRig,
    home: Pose,
) -> Result<SceneState> {
    let mut objects = Vec::new();
    for (i, p) in config.placements().enumerate() {
        let spec = roster.spec(&p.name)?;
        let is_target = i == 0;
        let friction = if is_target {
            TARGET_FRICTION
        } else {
            CLUTTER_FRICTION
        };
        objects.push(SceneObject {
            id: p.name.clone(),
            body: spec.body.clone(),
            pose: Pose::planar(p.x, p.y, -spec.body.min_z(), p.theta),
            footprint_radius: spec.body.footprint_radius(),
            mass: spec.mass,
            friction_static: friction,
            friction_dynamic: friction,
            is_target,
            attached: false,
            grip: None,
        });
    }
    Ok(SceneState {
        objects,
        hand: HandState::open(rig, home),
        workspace_halfwidth: DEFAULT_WORKSPACE_HALFWIDTH,
        tick: 0,
        lift_offset: 0.0,
    })
}

/// Places and settles the scenario: the live starting state of an episode.
pub fn load_scene(
    config: &ScenarioConfig,
    roster: &ObjectRoster,
    rig: &HandRig,
    home: Pose,
) -> Result<SceneState> {
    let placed = place_scene(config, roster, rig, home)?;
    settle(&placed).map(|(s, _)| s)
}

pub fn generate_scenario(
    target_name: &str,
    level: u8,
    seed: u64,
    roster: &ObjectRoster,
) -> Result<ScenarioConfig> {
    if !(1..=3).contains(&level) {
        return Err(Error::InvalidArgument(format!(
            "level must be 1, 2 or 3, got {level}"
        )));
    }
    let entry = roster.entry(target_name)?;
    let count = 2 * level as usize;
    if entry.pool.len() < count {
        return Err(Error::InvalidArgument(format!(
            "pool of `{target_name}` is too small for level {level}"
        )));
    }
    let names: Vec<&str> = std::iter::once(entry.target.as_str())
        .chain(entry.pool[..count].iter().map(String::as_str))
        .collect();
    let rig = HandRig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut draws = 0;
    let mut draw_layout = |rng: &mut ChaCha8Rng| -> Option<Vec<PlacedObject>> {
        while draws < MAX_DRAWS {
            draws += 1;
            let placed: Vec<PlacedObject> = names
                .iter()
                .map(|n| {
                    let x = quantize(rng.random_range(-REGION_HALFWIDTH..=REGION_HALFWIDTH));
                    let y = quantize(rng.random_range(-REGION_HALFWIDTH..=REGION_HALFWIDTH));
                    let mut theta = quantize(rng.random_range(-PI..PI));
                    if theta > PI {
                        theta -= 1e-6;
                    }
                    PlacedObject {
                        name: n.to_string(),
                        x,
                        y,
                        theta,
                    }
                })
                .collect();
            let too_close = placed.iter().enumerate().any(|(i, a)| {
                placed[i + 1..]
                    .iter()
                    .any(|b| (a.x - b.x).hypot(a.y - b.y) < MIN_CENTER_DISTANCE)
            });
            if !too_close {
                return Some(placed);
            }
        }
        None
    };

    for _ in 0..MAX_REJECTIONS {
        let Some(placed) = draw_layout(&mut rng) else {
            return Err(Error::Infeasible {
                attempts: MAX_DRAWS,
            });
        };
        let mut it = placed.into_iter();
        let config = ScenarioConfig {
            schema_version: SCHEMA_VERSION.into(),
            seed,
            level,
            target: it.next().expect("target placed"),
            obstacles: it.collect(),
        };
        let scene = place_scene(&config, roster, &rig, Pose::identity())?;
        match settle(&scene) {
            Ok((_, disp)) if disp <= MAX_SETTLE_DISPLACEMENT => return Ok(config),
            _ => continue,
        }
    }
    Err(Error::Infeasible {
        attempts: MAX_REJECTIONS,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotObject {
    pub name: String,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub z: f64,
    pub attached: bool,
}

/// A live scene in the scenario layout, plus heights, hand state and clock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSnapshot {
    pub schema_version: String,
    pub seed: u64,
    pub level: u8,
    pub target: SnapshotObject,
    pub obstacles: Vec<SnapshotObject>,
    pub hand: HandState,
    pub tick: u64,
    #[serde(default)]
    pub lift_offset: f64,
}

impl SceneSnapshot {
    pub fn capture(scene: &SceneState, seed: u64, level: u8) -> Result<Self> {
        let entry = |o: &SceneObject| SnapshotObject {
            name: o.id.clone(),
            x: o.pose.position.x,
            y: o.pose.position.y,
            theta: o.pose.yaw,
            z: o.pose.position.z,
            attached: o.attached,
        };
        let target = scene
            .target()
            .ok_or_else(|| Error::Scenario("scene has no target".into()))?;
        Ok(Self {
            schema_version: SCHEMA_VERSION.into(),
            seed,
            level,
            target: entry(target),
            obstacles: scene
                .objects
                .iter()
                .filter(|o| !o.is_target)
                .map(entry)
                .collect(),
            hand: scene.hand.clone(),
            tick: scene.tick,
            lift_offset: scene.lift_offset,
        })
    }

    /// Rebuilds the scene; attached objects are re-bound to the hand where
    /// they hang.
    pub fn restore(&self, roster: &ObjectRoster, rig: &HandRig) -> Result<SceneState> {
        let layout = ScenarioConfig {
            schema_version: self.schema_version.clone(),
            seed: self.seed,
            level: self.level,
            target: PlacedObject {
                name: self.target.name.clone(),
                x: self.target.x,
                y: self.target.y,
                theta: self.target.theta,
            },
            obstacles: self
                .obstacles
                .iter()
                .map(|o| PlacedObject {
                    name: o.name.clone(),
                    x: o.x,
                    y: o.y,
                    theta: o.theta,
                })
                .collect(),
        };
        let mut scene = place_scene(&layout, roster, rig, self.hand.tcp)?;
        scene.hand = self.hand.clone();
        scene.tick = self.tick;
        scene.lift_offset = self.lift_offset;
        let entries: Vec<&SnapshotObject> = std::iter::once(&self.target)
            .chain(&self.obstacles)
            .collect();
        for (i, e) in entries.iter().enumerate() {
            scene.objects[i].pose.position.z = e.z;
            if e.attached {
                scene.attach(i);
            }
        }
        Ok(scene)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ScenarioId {
    pub target: String,
    pub level: u8,
    pub index: usize,
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_L{}_{:02}", self.target, self.level, self.index)
    }
}

impl ScenarioId {
    pub fn file_name(&self) -> String {
        format!("{self}.json")
    }
}

/// Targets x levels x [`SCENES_PER_CELL`], in roster order.
pub fn generate_benchmark(
    master_seed: u64,
    roster: &ObjectRoster,
) -> Result<Vec<(ScenarioId, ScenarioConfig)>> {
    let mut out = Vec::new();
    for e in &roster.entries {
        for level in 1..=3u8 {
            out.extend(generate_cell(
                master_seed,
                &e.target,
                level,
                SCENES_PER_CELL,
                roster,
            )?);
        }
    }
    Ok(out)
}

pub fn generate_cell(
    master_seed: u64,
    target: &str,
    level: u8,
    count: usize,
    roster: &ObjectRoster,
) -> Result<Vec<(ScenarioId, ScenarioConfig)>> {
    (0..count)
        .map(|index| {
            let seed = derive_seed(master_seed, target, level, index);
            let id = ScenarioId {
                target: target.to_string(),
                level,
                index,
            };
            generate_scenario(target, level, seed, roster).map(|c| (id, c))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_reference_values() {
        // published FNV-1a test vectors
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn default_roster_is_valid() {
        let r = ObjectRoster::default();
        r.validate().unwrap();
        let targets: Vec<_> = r.entries.iter().map(|e| e.target.as_str()).collect();
        assert_eq!(
            targets,
            ["cube", "can", "pear", "apple", "mug", "lego", "ball"]
        );
    }

    #[test]
    fn level_two_uses_pool_order() {
        let r = ObjectRoster::default();
        let c = generate_scenario("cube", 2, 99, &r).unwrap();
        let names: Vec<_> = c.obstacles.iter().map(|o| o.name.as_str()).collect();
        assert_eq!(names, ["can", "foam_brick", "mug", "apple"]);
        c.validate().unwrap();
    }

    #[test]
    fn generation_is_deterministic() {
        let r = ObjectRoster::default();
        let a = serialize(&generate_scenario("mug", 3, 5, &r).unwrap());
        let b = serialize(&generate_scenario("mug", 3, 5, &r).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn round_trip() {
        let r = ObjectRoster::default();
        for seed in 0..20 {
            let c = generate_scenario("lego", 1 + (seed % 3) as u8, seed, &r).unwrap();
            assert_eq!(parse(&serialize(&c)).unwrap(), c);
        }
    }

    #[test]
    fn rejects_bad_documents() {
        let r = ObjectRoster::default();
        let mut c = generate_scenario("apple", 2, 1, &r).unwrap();
        c.obstacles.pop();
        let err = parse(&serialize(&c)).unwrap_err().to_string();
        assert!(err.contains("requires 4 obstacles"), "{err}");

        let good = serialize(&generate_scenario("apple", 2, 1, &r).unwrap());
        for cut in [0, 1, good.len() / 2, good.len() - 3] {
            assert!(parse(&good[..cut]).is_err());
        }

        let text = String::from_utf8(good)
            .unwrap()
            .replace("\"1.0\"", "\"9.9\"");
        assert!(parse(text.as_bytes())
            .unwrap_err()
            .to_string()
            .contains("schema version"));
    }

    #[test]
    fn unknown_target_and_level() {
        let r = ObjectRoster::default();
        assert!(generate_scenario("teapot", 1, 0, &r).is_err());
        assert!(generate_scenario("cube", 4, 0, &r).is_err());
    }

    #[test]
    fn snapshot_round_trip() {
        let r = ObjectRoster::default();
        let rig = HandRig::default();
        let c = generate_scenario("pear", 2, 4, &r).unwrap();
        let mut scene = load_scene(&c, &r, &rig, Pose::planar(0.0, -0.3, 0.4, 0.0)).unwrap();
        scene.objects[0].pose.position.z += 0.1;
        scene.attach(0);
        scene.tick = 77;
        let snap = SceneSnapshot::capture(&scene, c.seed, c.level).unwrap();
        let text = serde_json::to_string(&snap).unwrap();
        let back: SceneSnapshot = serde_json::from_str(&text).unwrap();
        let restored = back.restore(&r, &rig).unwrap();
        assert_eq!(restored.objects.len(), scene.objects.len());
        for (a, b) in restored.objects.iter().zip(&scene.objects) {
            assert_eq!(a.id, b.id);
            assert!((a.pose.position - b.pose.position).norm() < 1e-12);
            assert_eq!(a.attached, b.attached);
        }
        assert_eq!(restored.tick, 77);
    }

    #[test]
    fn negative_zero_is_canonical() {
        assert_eq!(fmt6(-0.0), "0.000000");
        assert_eq!(fmt6(-1e-9), "0.000000");
        assert_eq!(fmt6(0.1), "0.100000");
    }
}
