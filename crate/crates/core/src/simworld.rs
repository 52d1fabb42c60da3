//! Quasi-static tabletop world.
//!
//! Objects are rigid bodies resting on the table plane. Contact between
//! objects is reduced to their circular footprints; motion is instantaneous
//! displacement followed by minimum-translation overlap resolution, so there
//! is never residual velocity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Body, Pose};
use crate::handrig::HandState;

/// Allowed residual footprint penetration after settling (m).
pub const PENETRATION_TOLERANCE: f64 = 1e-4;
/// Increment used when sliding an object (m).
pub const DISPLACE_STEP: f64 = 0.005;
pub const SETTLE_ITERATIONS: usize = 30;
pub const MEASURE_ITERATIONS: usize = 60;
pub const DEFAULT_WORKSPACE_HALFWIDTH: f64 = 0.30;
pub const DEFAULT_CORRIDOR_HALFWIDTH: f64 = 0.04;

const OVERLAP_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: String,
    pub body: Body,
    pub pose: Pose,
    pub footprint_radius: f64,
    pub mass: f64,
    pub friction_static: f64,
    pub friction_dynamic: f64,
    pub is_target: bool,
    pub attached: bool,
    /// Object pose in the TCP frame while attached.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grip: Option<Pose>,
}

impl SceneObject {
    /// Height of the body frame when resting on the table.
    pub fn rest_height(&self) -> f64 {
        -self.body.min_z()
    }

    pub fn xy(&self) -> nalgebra::Vector2<f64> {
        self.pose.position.xy()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneState {
    pub objects: Vec<SceneObject>,
    pub hand: HandState,
    pub workspace_halfwidth: f64,
    pub tick: u64,
    /// Height gained by `lift` calls not yet undone by `lower` (m).
    #[serde(default)]
    pub lift_offset: f64,
}

fn overlap(a: &SceneObject, b: &SceneObject) -> f64 {
    a.footprint_radius + b.footprint_radius - (a.xy() - b.xy()).norm()
}

/// Unit vector from `a` to `b` in the plane; a fixed fallback for coincident
/// centers keeps resolution deterministic.
fn separation_dir(a: &SceneObject, b: &SceneObject, salt: usize) -> nalgebra::Vector2<f64> {
    let d = b.xy() - a.xy();
    let n = d.norm();
    if n > 1e-12 {
        d / n
    } else {
        let ang = salt as f64 * 2.399_963_229_728_653; // golden angle
        nalgebra::Vector2::new(ang.cos(), ang.sin())
    }
}

fn shift(obj: &mut SceneObject, d: nalgebra::Vector2<f64>) {
    obj.pose.position.x += d.x;
    obj.pose.position.y += d.y;
}

impl SceneState {
    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.objects
            .iter()
            .position(|o| o.id == id)
            .ok_or_else(|| Error::UnknownObject(id.to_string()))
    }

    pub fn object(&self, id: &str) -> Result<&SceneObject> {
        self.index_of(id).map(|i| &self.objects[i])
    }

    pub fn target(&self) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.is_target)
    }

    pub fn target_id(&self) -> Option<&str> {
        self.target().map(|o| o.id.as_str())
    }

    /// Largest footprint penetration between resting objects.
    pub fn max_overlap(&self) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for i in 0..self.objects.len() {
            for j in i + 1..self.objects.len() {
                let (a, b) = (&self.objects[i], &self.objects[j]);
                if a.attached || b.attached {
                    continue;
                }
                worst = worst.max(overlap(a, b));
            }
        }
        worst
    }

    /// One Gauss-Seidel sweep of mass-weighted pairwise separation.
    fn resolve_sweep(&mut self) -> bool {
        let mut moved = false;
        let n = self.objects.len();
        for i in 0..n {
            for j in i + 1..n {
                let (a, b) = (&self.objects[i], &self.objects[j]);
                if a.attached || b.attached {
                    continue;
                }
                let ov = overlap(a, b);
                if ov <= OVERLAP_EPS {
                    continue;
                }
                let dir = separation_dir(a, b, i * n + j);
                let total = a.mass + b.mass;
                let (wa, wb) = (b.mass / total, a.mass / total);
                shift(&mut self.objects[i], -dir * (ov * wa));
                shift(&mut self.objects[j], dir * (ov * wb));
                moved = true;
            }
        }
        moved
    }
}

/// Resolves footprint overlaps, then keeps iterating while measuring how far
/// each object travels. Returns the settled scene and the largest cumulative
/// per-object displacement over the measurement phase.
pub fn settle(scene: &SceneState) -> Result<(SceneState, f64)> {
    if let Some(o) = scene.objects.iter().find(|o| !o.pose.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "object `{}` has a non-finite pose",
            o.id
        )));
    }
    let mut s = scene.clone();
    for _ in 0..SETTLE_ITERATIONS {
        if !s.resolve_sweep() {
            break;
        }
    }
    let mut travelled = vec![0.0; s.objects.len()];
    for _ in 0..MEASURE_ITERATIONS {
        let before: Vec<_> = s.objects.iter().map(|o| o.xy()).collect();
        if !s.resolve_sweep() {
            break;
        }
        for (t, (o, b)) in travelled.iter_mut().zip(s.objects.iter().zip(before)) {
            *t += (o.xy() - b).norm();
        }
    }
    let n = s.objects.len();
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (&s.objects[i], &s.objects[j]);
            if a.attached || b.attached {
                continue;
            }
            let ov = overlap(a, b);
            if ov > PENETRATION_TOLERANCE {
                return Err(Error::UnresolvedOverlap {
                    a: a.id.clone(),
                    b: b.id.clone(),
                    overlap: ov,
                });
            }
        }
    }
    let max = travelled.into_iter().fold(0.0, f64::max);
    Ok((s, max))
}

/// Why a guarded displacement stopped early.
#[derive(Debug, Clone, PartialEq)]
pub enum Halt {
    /// The moving object itself would have touched the guarded object.
    MoverContact,
    /// A pushed neighbour would have been driven into the guarded object.
    Jammed(String),
}

#[derive(Debug, Clone)]
pub struct Displacement {
    pub scene: SceneState,
    /// Ids of objects pushed along the way, in order of first contact.
    pub contacts: Vec<String>,
    /// Distance the moving object actually travelled.
    pub moved: f64,
    pub halted: Option<Halt>,
}

/// Slides object `id` by `dist` along the planar unit `direction`.
pub fn displace_object(
    scene: &SceneState,
    id: &str,
    direction: [f64; 2],
    dist: f64,
) -> Result<(SceneState, Vec<String>)> {
    let d = displace_guarded(scene, id, direction, dist, None)?;
    Ok((d.scene, d.contacts))
}

/// As [`displace_object`], but stops before the mover or any object it pushes
/// would overlap `guard`.
pub fn displace_guarded(
    scene: &SceneState,
    id: &str,
    direction: [f64; 2],
    dist: f64,
    guard: Option<&str>,
) -> Result<Displacement> {
    let mover = scene.index_of(id)?;
    if scene.objects[mover].attached {
        return Err(Error::ObjectAttached(id.to_string()));
    }
    if !(dist.is_finite() && dist >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "displacement distance must be finite and >= 0, got {dist}"
        )));
    }
    let dir = nalgebra::Vector2::new(direction[0], direction[1]);
    let norm = dir.norm();
    if !(norm.is_finite() && norm > 1e-9) {
        return Err(Error::InvalidArgument(
            "displacement direction must be a non-zero finite vector".into(),
        ));
    }
    let dir = dir / norm;
    let guard = guard.map(|g| scene.index_of(g)).transpose()?;

    let mut s = scene.clone();
    let mut contacts: Vec<String> = Vec::new();
    let mut moved = 0.0;
    let mut halted = None;
    while dist - moved > 1e-12 {
        let step = DISPLACE_STEP.min(dist - moved);
        let mut trial = s.clone();
        shift(&mut trial.objects[mover], dir * step);
        let mut pushed = Vec::new();
        for k in 0..trial.objects.len() {
            if k == mover || trial.objects[k].attached {
                continue;
            }
            let ov = overlap(&trial.objects[mover], &trial.objects[k]);
            if ov <= OVERLAP_EPS {
                continue;
            }
            if Some(k) == guard {
                halted = Some(Halt::MoverContact);
                break;
            }
            let d = separation_dir(&trial.objects[mover], &trial.objects[k], k);
            shift(&mut trial.objects[k], d * ov);
            pushed.push(k);
        }
        if halted.is_none() {
            if let Some(g) = guard {
                if let Some(&k) = pushed
                    .iter()
                    .find(|&&k| overlap(&trial.objects[k], &trial.objects[g]) > OVERLAP_EPS)
                {
                    halted = Some(Halt::Jammed(trial.objects[k].id.clone()));
                }
            }
        }
        if halted.is_some() {
            break;
        }
        for k in pushed {
            let kid = &trial.objects[k].id;
            if !contacts.contains(kid) {
                contacts.push(kid.clone());
            }
        }
        s = trial;
        moved += step;
    }
    Ok(Displacement {
        scene: s,
        contacts,
        moved,
        halted,
    })
}

/// Obstacles whose footprint intersects the vertical approach cylinder of
/// radius `target footprint + corridor_halfwidth`, nearest first.
pub fn approach_clearance(
    scene: &SceneState,
    target_id: &str,
    corridor_halfwidth: f64,
) -> Result<Vec<String>> {
    let target = scene.object(target_id)?;
    let radius = target.footprint_radius + corridor_halfwidth;
    let mut hits: Vec<(f64, usize)> = scene
        .objects
        .iter()
        .enumerate()
        .filter(|(_, o)| o.id != target.id && !o.attached)
        .filter_map(|(i, o)| {
            let d = (o.xy() - target.xy()).norm();
            (d < radius + o.footprint_radius).then_some((d, i))
        })
        .collect();
    hits.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(hits
        .into_iter()
        .map(|(_, i)| scene.objects[i].id.clone())
        .collect())
}

/// Objects whose center left the square workspace (strict inequality).
pub fn escaped_objects(scene: &SceneState) -> Vec<String> {
    let hw = scene.workspace_halfwidth;
    scene
        .objects
        .iter()
        .filter(|o| o.pose.position.x.abs() > hw || o.pose.position.y.abs() > hw)
        .map(|o| o.id.clone())
        .collect()
}

/// Carries every attached object along with the TCP.
pub fn tick_attached(scene: &SceneState) -> SceneState {
    let mut s = scene.clone();
    let tcp = s.hand.tcp;
    for o in s.objects.iter_mut() {
        if let (true, Some(grip)) = (o.attached, o.grip) {
            o.pose = tcp.compose(&grip);
        }
    }
    s
}

impl SceneState {
    /// Rigidly binds object `index` to the current TCP frame.
    pub fn attach(&mut self, index: usize) {
        let grip = self.hand.tcp.inverse().compose(&self.objects[index].pose);
        let o = &mut self.objects[index];
        o.attached = true;
        o.grip = Some(grip);
    }

    /// Releases every attached object back onto the table where it hangs.
    pub fn release_all(&mut self) {
        for o in self.objects.iter_mut().filter(|o| o.attached) {
            o.attached = false;
            o.grip = None;
            let z = o.rest_height();
            o.pose = Pose::planar(o.pose.position.x, o.pose.position.y, z, o.pose.yaw);
        }
    }

    pub fn set_tcp(&mut self, tcp: Pose) {
        self.hand.tcp = tcp;
        *self = tick_attached(self);
    }
}

/// Convenience constructor for tests and tools: a planar disc-like object.
pub fn resting_object(id: &str, body: Body, x: f64, y: f64, theta: f64, mass: f64) -> SceneObject {
    let footprint_radius = body.footprint_radius();
    let z = -body.min_z();
    SceneObject {
        id: id.to_string(),
        body,
        pose: Pose::planar(x, y, z, theta),
        footprint_radius,
        mass,
        friction_static: 1.0,
        friction_dynamic: 1.0,
        is_target: false,
        attached: false,
        grip: None,
    }
}
