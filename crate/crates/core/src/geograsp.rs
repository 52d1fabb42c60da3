//! Geometry-aware grasping: the 59-value observation, the shaped step reward,
//! contact counting, domain randomization and a deterministic controller that
//! closes the hand around whatever the keypoint vectors point at.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    jitter_cloud, nearest_vector, sample_body_cloud, transform_cloud, Body, Nearest, PointCloud,
    Pose, Vec3,
};
use crate::handrig::{
    tcp_observation, ActionVector, HandRig, HandState, ACTION_DIM, FINGERS, FINGER_ACTION_OFFSET,
    JOINTS_PER_FINGER, KEYPOINTS, PALM_KEYPOINTS,
};
use crate::scenegen::fnv1a64;
use crate::simworld::{tick_attached, SceneState};

pub const OBSERVATION_DIM: usize = 59;
pub const GEOM_DIM: usize = 3 * KEYPOINTS;
/// Below this distance a keypoint counts as touching and its block is zero.
pub const TOUCH_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspObservation {
    /// Unit keypoint-to-surface vectors, keypoint-major.
    pub geom: Vec<f64>,
    pub target_height: f64,
    /// `(tcp z, roll, pitch, yaw)`
    pub tcp: [f64; 4],
}

impl GraspObservation {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(OBSERVATION_DIM);
        v.extend_from_slice(&self.geom);
        v.push(self.target_height);
        v.extend_from_slice(&self.tcp);
        v
    }

    pub fn block(&self, k: usize) -> Vec3 {
        Vec3::new(self.geom[3 * k], self.geom[3 * k + 1], self.geom[3 * k + 2])
    }
}

fn nearest_all(keypoints: &[Vec3], cloud: &PointCloud) -> Result<Vec<Nearest>> {
    keypoints.iter().map(|k| nearest_vector(k, cloud)).collect()
}

fn observation_from(nearest: &[Nearest], hand: &HandState, target_height: f64) -> GraspObservation {
    let mut geom = Vec::with_capacity(GEOM_DIM);
    for n in nearest {
        if n.distance < TOUCH_EPSILON {
            geom.extend_from_slice(&[0.0; 3]);
        } else {
            let u = n.vector / n.distance;
            geom.extend_from_slice(&[u.x, u.y, u.z]);
        }
    }
    GraspObservation {
        geom,
        target_height,
        tcp: tcp_observation(hand),
    }
}

pub fn encode_observation(
    rig: &HandRig,
    hand: &HandState,
    target_cloud: &PointCloud,
    target_height: f64,
) -> Result<GraspObservation> {
    let kp = rig.forward_keypoints(hand);
    let nearest = nearest_all(&kp, target_cloud)?;
    Ok(observation_from(&nearest, hand, target_height))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardWeights {
    pub w_lift: f64,
    pub w_success: f64,
    pub w_contact: f64,
    pub w_nn: f64,
    pub w_action: f64,
    pub success_height: f64,
    pub clip: (f64, f64),
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            w_lift: 50.0,
            w_success: 200.0,
            w_contact: 10.0,
            w_nn: 10.0,
            w_action: 0.03,
            success_height: 0.15,
            clip: (-100.0, 100.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardState {
    pub object_height: f64,
    pub initial_height: f64,
    pub contact_count: usize,
    pub nn_distance: f64,
}

/// Individual reward terms before clipping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardTerms {
    pub lift: f64,
    pub success: f64,
    pub contact: f64,
    pub nn: f64,
    pub action_cost: f64,
}

impl RewardTerms {
    pub fn raw(&self) -> f64 {
        self.lift + self.success + self.contact + self.nn - self.action_cost
    }
}

pub fn reward_terms(
    prev: &RewardState,
    cur: &RewardState,
    action: &ActionVector,
    w: &RewardWeights,
) -> RewardTerms {
    RewardTerms {
        lift: w.w_lift * (cur.object_height - cur.initial_height),
        success: if cur.object_height > w.success_height {
            w.w_success
        } else {
            0.0
        },
        contact: w.w_contact * cur.contact_count as f64,
        nn: w.w_nn * (prev.nn_distance - cur.nn_distance),
        action_cost: w.w_action * action.norm(),
    }
}

pub fn step_reward(
    prev: &RewardState,
    cur: &RewardState,
    action: &ActionVector,
    w: &RewardWeights,
) -> f64 {
    reward_terms(prev, cur, action, w)
        .raw()
        .clamp(w.clip.0, w.clip.1)
}

fn contacts_from(nearest: &[Nearest], threshold: f64) -> usize {
    nearest[PALM_KEYPOINTS..]
        .iter()
        .filter(|n| n.distance <= threshold)
        .count()
}

/// Number of finger keypoints within `threshold` of the cloud. Palm
/// keypoints never count.
pub fn count_contacts(
    rig: &HandRig,
    hand: &HandState,
    cloud: &PointCloud,
    threshold: f64,
) -> Result<usize> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let kp = rig.forward_keypoints(hand);
    let nearest = nearest_all(&kp[PALM_KEYPOINTS..], cloud)?;
    Ok(nearest.iter().filter(|n| n.distance <= threshold).count())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DRSample {
    pub friction_scale: f64,
    pub mass_scale: f64,
    pub cloud_noise_sigma: f64,
    pub init_joint_offset: [f64; ACTION_DIM],
    pub seed: u64,
}

pub const DR_FRICTION: (f64, f64) = (0.5, 2.0);
pub const DR_MASS: (f64, f64) = (0.8, 1.2);
pub const DR_CLOUD_SIGMA: f64 = 0.005;
pub const DR_JOINT_OFFSET: f64 = 0.05;

pub fn sample_domain_randomization(seed: u64) -> DRSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let friction_scale = rng.random_range(DR_FRICTION.0..=DR_FRICTION.1);
    let mass_scale = rng.random_range(DR_MASS.0..=DR_MASS.1);
    let mut init_joint_offset = [0.0; ACTION_DIM];
    for v in init_joint_offset.iter_mut() {
        *v = rng.random_range(-DR_JOINT_OFFSET..=DR_JOINT_OFFSET);
    }
    DRSample {
        friction_scale,
        mass_scale,
        cloud_noise_sigma: DR_CLOUD_SIGMA,
        init_joint_offset,
        seed,
    }
}

/// Anything that maps an observation to an action.
pub trait GraspController {
    fn act(&mut self, obs: &GraspObservation) -> ActionVector;
}

impl<F: FnMut(&GraspObservation) -> ActionVector> GraspController for F {
    fn act(&mut self, obs: &GraspObservation) -> ActionVector {
        self(obs)
    }
}

/// Controller that never moves.
pub struct ZeroController;

impl GraspController for ZeroController {
    fn act(&mut self, _obs: &GraspObservation) -> ActionVector {
        ActionVector::zeros()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeoControllerConfig {
    /// Gain on the vertical keypoint direction while descending.
    pub descend_rate: f64,
    /// Gain on the palm keypoint directions for lateral centering.
    pub center_gain: f64,
    /// Descent stops once the mean finger direction is this close to horizontal.
    pub level_tolerance: f64,
    /// Fraction of the maximum finger action used while closing.
    pub squeeze_rate: f64,
    pub close_ticks: usize,
    pub lift_rate: f64,
    /// Object height held during the lift (m).
    pub hold_height: f64,
    /// Ticks without the object rising before the grasp is retried.
    pub lift_patience: usize,
    pub release_ticks: usize,
}

impl Default for GeoControllerConfig {
    fn default() -> Self {
        Self {
            descend_rate: 0.6,
            center_gain: 0.3,
            level_tolerance: 0.15,
            squeeze_rate: 0.5,
            close_ticks: 30,
            lift_rate: 0.6,
            hold_height: 0.22,
            lift_patience: 30,
            release_ticks: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GraspPhase {
    Approach,
    Close,
    Lift,
    Release,
}

/// Geometry-driven grasp controller. It descends until the finger keypoints
/// see the object sideways, curls each finger towards its nearest surface,
/// then lifts; if the object does not follow it opens and starts over.
#[derive(Debug, Clone)]
pub struct GeoController {
    pub config: GeoControllerConfig,
    pub rig: HandRig,
    phase: GraspPhase,
    phase_ticks: usize,
    last_tcp_z: Option<f64>,
    lift_start: f64,
}

impl Default for GeoController {
    fn default() -> Self {
        Self::new(GeoControllerConfig::default(), HandRig::default())
    }
}

impl GeoController {
    pub fn new(config: GeoControllerConfig, rig: HandRig) -> Self {
        Self {
            config,
            rig,
            phase: GraspPhase::Approach,
            phase_ticks: 0,
            last_tcp_z: None,
            lift_start: 0.0,
        }
    }

    pub fn phase(&self) -> GraspPhase {
        self.phase
    }

    fn enter(&mut self, phase: GraspPhase, obs: &GraspObservation) {
        self.phase = phase;
        self.phase_ticks = 0;
        self.lift_start = obs.target_height;
    }

    /// Per finger: mean alignment of its keypoint directions with the
    /// inward direction. Positive while the surface is still further in.
    fn squeeze(&self, blocks: &[Vec3], obs: &GraspObservation) -> [f64; FINGERS] {
        let rot = Pose::new(Vec3::zeros(), obs.tcp[1], obs.tcp[2], obs.tcp[3]).rotation();
        std::array::from_fn(|i| {
            let inward = -(rot * self.rig.finger_outward_local(i));
            (0..JOINTS_PER_FINGER)
                .map(|j| blocks[PALM_KEYPOINTS + i * JOINTS_PER_FINGER + j].dot(&inward))
                .sum::<f64>()
                / JOINTS_PER_FINGER as f64
        })
    }

    pub fn action(&mut self, obs: &GraspObservation) -> ActionVector {
        let c = self.config.clone();
        let blocks: Vec<Vec3> = (0..KEYPOINTS).map(|k| obs.block(k)).collect();
        let mut raw = [0.0; ACTION_DIM];
        let stalled = self
            .last_tcp_z
            .is_some_and(|z| (obs.tcp[0] - z).abs() < 1e-4);
        self.last_tcp_z = Some(obs.tcp[0]);
        self.phase_ticks += 1;

        let set_fingers = |raw: &mut [f64; ACTION_DIM], per_finger: [f64; FINGERS]| {
            for (i, v) in per_finger.iter().enumerate() {
                for j in 0..JOINTS_PER_FINGER {
                    raw[FINGER_ACTION_OFFSET + i * JOINTS_PER_FINGER + j] = *v;
                }
            }
        };

        match self.phase {
            GraspPhase::Approach => {
                let lower: Vec<&Vec3> = (0..FINGERS)
                    .flat_map(|i| {
                        let base = PALM_KEYPOINTS + i * JOINTS_PER_FINGER;
                        [&blocks[base + 1], &blocks[base + 2]]
                    })
                    .collect();
                let tilt = lower.iter().map(|b| b.z).sum::<f64>() / lower.len() as f64;
                let palm = blocks[..PALM_KEYPOINTS].iter().sum::<Vec3>() / PALM_KEYPOINTS as f64;
                raw[0] = c.center_gain * palm.x;
                raw[1] = c.center_gain * palm.y;
                raw[2] = c.descend_rate * tilt;
                if tilt.abs() < c.level_tolerance || (stalled && self.phase_ticks > 1) {
                    self.enter(GraspPhase::Close, obs);
                }
            }
            GraspPhase::Close => {
                let s = self.squeeze(&blocks, obs);
                set_fingers(&mut raw, s.map(|v| c.squeeze_rate * v));
                if self.phase_ticks >= c.close_ticks {
                    self.enter(GraspPhase::Lift, obs);
                }
            }
            GraspPhase::Lift => {
                let s = self.squeeze(&blocks, obs);
                set_fingers(&mut raw, s.map(|v| c.squeeze_rate * v));
                let hold = ((c.hold_height - obs.target_height) / 0.02).clamp(-1.0, 1.0);
                raw[2] = c.lift_rate * hold;
                if self.phase_ticks >= c.lift_patience && obs.target_height - self.lift_start < 0.01
                {
                    self.enter(GraspPhase::Release, obs);
                }
            }
            GraspPhase::Release => {
                set_fingers(&mut raw, [-1.0; FINGERS]);
                raw[2] = if self.phase_ticks <= c.release_ticks / 2 {
                    c.lift_rate
                } else {
                    0.0
                };
                if self.phase_ticks >= c.release_ticks {
                    self.enter(GraspPhase::Approach, obs);
                }
            }
        }
        ActionVector::saturate(raw)
    }
}

impl GraspController for GeoController {
    fn act(&mut self, obs: &GraspObservation) -> ActionVector {
        self.action(obs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraspParams {
    pub cloud_points: usize,
    pub contact_threshold: f64,
    /// TCP offset above the target centroid at the start of an episode.
    pub pregrasp_height: f64,
    pub hold_ticks: usize,
    pub tick_rate_hz: f64,
    pub min_closure_contacts: usize,
    /// Radius of the finger links when testing keypoints against obstacles.
    pub finger_radius: f64,
}

impl Default for GraspParams {
    fn default() -> Self {
        Self {
            cloud_points: 1024,
            contact_threshold: 0.005,
            pregrasp_height: 0.15,
            hold_ticks: 120,
            tick_rate_hz: 60.0,
            min_closure_contacts: 3,
            finger_radius: 0.008,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspOutcome {
    pub success: bool,
    pub ticks: usize,
    pub cumulative_reward: f64,
    pub attached: bool,
    pub initial_height: f64,
    pub final_height: f64,
    pub initial_nn_distance: f64,
    pub final_nn_distance: f64,
    /// Sum of the unclipped nearest-neighbour shaping terms.
    pub nn_reward_sum: f64,
    /// Consecutive ticks above the success height at the end of the episode.
    pub hold_ticks: usize,
    /// Obstacle a hand keypoint ran into; the episode stops on first contact.
    pub collision: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick: usize,
    pub object_height: f64,
    pub tcp_z: f64,
    pub contacts: usize,
    pub nn_distance: f64,
    pub reward: f64,
    pub nn_term: f64,
    pub attached: bool,
}

/// Surface cloud of a body in its own frame, seeded by the object id.
pub fn canonical_cloud(id: &str, body: &Body, n: usize) -> Result<PointCloud> {
    sample_body_cloud(body, n, fnv1a64(format!("cloud:{id}").as_bytes()))
}

/// Finger contacts on at least two opposing sides of the object center.
fn closure_holds(
    keypoints: &[Vec3],
    nearest: &[Nearest],
    threshold: f64,
    center: &Vec3,
    min_contacts: usize,
) -> bool {
    let dirs: Vec<nalgebra::Vector2<f64>> = (PALM_KEYPOINTS..KEYPOINTS)
        .filter(|&k| nearest[k].distance <= threshold)
        .map(|k| (keypoints[k] - center).xy())
        .collect();
    if dirs.len() < min_contacts {
        return false;
    }
    dirs.iter()
        .enumerate()
        .any(|(i, a)| dirs[i + 1..].iter().any(|b| a.dot(b) < 0.0))
}

/// Upward correction keeping the keypoints and any held object on or above
/// the table plane.
fn table_deficit(rig: &HandRig, scene: &SceneState) -> f64 {
    let kp = rig.forward_keypoints(&scene.hand);
    let mut deficit = kp.iter().map(|p| -p.z).fold(0.0, f64::max);
    for o in scene.objects.iter().filter(|o| o.attached) {
        if let Some(grip) = o.grip {
            let z = scene.hand.tcp.compose(&grip).position.z;
            deficit = deficit.max(o.rest_height() - z);
        }
    }
    deficit
}

/// First free object (other than the target) that any keypoint penetrates.
fn first_collision(
    scene: &SceneState,
    target: usize,
    keypoints: &[Vec3],
    margin: f64,
) -> Option<String> {
    scene
        .objects
        .iter()
        .enumerate()
        .filter(|(i, o)| *i != target && !o.attached)
        .find(|(_, o)| {
            let inv = o.pose.inverse();
            keypoints
                .iter()
                .any(|p| o.body.contains(&inv.transform_point(p), margin))
        })
        .map(|(_, o)| o.id.clone())
}

pub struct EpisodeSetup<'a> {
    pub rig: &'a HandRig,
    pub params: &'a GraspParams,
    pub weights: &'a RewardWeights,
}

/// Places the hand above the target and ticks the controller until the
/// object has been held above the success height for `hold_ticks` ticks or
/// `max_ticks` elapse.
pub fn run_grasp_episode(
    world: &SceneState,
    target_id: &str,
    controller: &mut dyn GraspController,
    max_ticks: usize,
    dr: Option<&DRSample>,
    setup: &EpisodeSetup,
) -> Result<(SceneState, GraspOutcome)> {
    run_grasp_episode_traced(world, target_id, controller, max_ticks, dr, setup, None)
}

pub fn run_grasp_episode_traced(
    world: &SceneState,
    target_id: &str,
    controller: &mut dyn GraspController,
    max_ticks: usize,
    dr: Option<&DRSample>,
    setup: &EpisodeSetup,
    mut trace: Option<&mut Vec<TickRecord>>,
) -> Result<(SceneState, GraspOutcome)> {
    let EpisodeSetup {
        rig,
        params,
        weights,
    } = *setup;
    let ti = world.index_of(target_id)?;
    let mut scene = world.clone();
    scene.release_all();

    if let Some(dr) = dr {
        let t = &mut scene.objects[ti];
        t.friction_static *= dr.friction_scale;
        t.friction_dynamic *= dr.friction_scale;
        t.mass *= dr.mass_scale;
    }

    let target = &scene.objects[ti];
    let local_cloud = canonical_cloud(&target.id, &target.body, params.cloud_points)?;
    let mut cloud = transform_cloud(&local_cloud, &target.pose);

    let centroid = target.pose.position;
    let mut hand = HandState::open(
        rig,
        Pose::new(
            centroid + Vec3::new(0.0, 0.0, params.pregrasp_height),
            0.0,
            0.0,
            scene.hand.tcp.yaw,
        ),
    );
    if let Some(dr) = dr {
        let offset = dr.init_joint_offset.map(|v| v / rig.action_scale);
        hand = rig.apply_action(&hand, &ActionVector(offset));
    }
    scene.set_tcp(hand.tcp);
    scene.hand = hand;

    let observed = |cloud: &PointCloud, tick: usize| -> PointCloud {
        match dr {
            Some(dr) => jitter_cloud(
                cloud,
                dr.cloud_noise_sigma,
                dr.seed ^ fnv1a64(&tick.to_le_bytes()),
            ),
            None => cloud.clone(),
        }
    };

    let kp = rig.forward_keypoints(&scene.hand);
    let mut nearest = nearest_all(&kp, &cloud)?;
    let h0 = scene.objects[ti].pose.position.z;
    let d0: f64 = nearest.iter().map(|n| n.distance).sum();
    let mut prev = RewardState {
        object_height: h0,
        initial_height: h0,
        contact_count: contacts_from(&nearest, params.contact_threshold),
        nn_distance: d0,
    };

    let mut cumulative = 0.0;
    let mut nn_sum = 0.0;
    let mut hold = 0;
    let mut ticks = 0;
    let mut success = false;
    let mut collision = None;
    for tick in 1..=max_ticks {
        ticks = tick;
        let obs = if dr.is_some() {
            encode_observation(
                rig,
                &scene.hand,
                &observed(&cloud, tick),
                prev.object_height,
            )?
        } else {
            observation_from(&nearest, &scene.hand, prev.object_height)
        };
        let action = ActionVector::saturate(controller.act(&obs).0);
        scene.hand = rig.apply_action(&scene.hand, &action);
        scene.hand.tcp.position.z += table_deficit(rig, &scene);
        scene = tick_attached(&scene);
        scene.tick += 1;
        if scene.objects[ti].attached {
            cloud = transform_cloud(&local_cloud, &scene.objects[ti].pose);
        }

        let kp = rig.forward_keypoints(&scene.hand);
        collision = first_collision(&scene, ti, &kp, params.finger_radius);
        nearest = nearest_all(&kp, &cloud)?;
        if !scene.objects[ti].attached
            && closure_holds(
                &kp,
                &nearest,
                params.contact_threshold,
                &scene.objects[ti].pose.position,
                params.min_closure_contacts,
            )
        {
            scene.attach(ti);
        }

        let cur = RewardState {
            object_height: scene.objects[ti].pose.position.z,
            initial_height: h0,
            contact_count: contacts_from(&nearest, params.contact_threshold),
            nn_distance: nearest.iter().map(|n| n.distance).sum(),
        };
        let terms = reward_terms(&prev, &cur, &action, weights);
        let r = terms.raw().clamp(weights.clip.0, weights.clip.1);
        cumulative += r;
        nn_sum += terms.nn;
        if let Some(t) = trace.as_deref_mut() {
            t.push(TickRecord {
                tick,
                object_height: cur.object_height,
                tcp_z: scene.hand.tcp.position.z,
                contacts: cur.contact_count,
                nn_distance: cur.nn_distance,
                reward: r,
                nn_term: terms.nn,
                attached: scene.objects[ti].attached,
            });
        }
        hold = if cur.object_height > weights.success_height {
            hold + 1
        } else {
            0
        };
        prev = cur;
        if collision.is_some() {
            break;
        }
        if hold >= params.hold_ticks {
            success = true;
            break;
        }
    }

    let outcome = GraspOutcome {
        success,
        ticks,
        cumulative_reward: cumulative,
        attached: scene.objects[ti].attached,
        initial_height: h0,
        final_height: prev.object_height,
        initial_nn_distance: d0,
        final_nn_distance: prev.nn_distance,
        nn_reward_sum: nn_sum,
        hold_ticks: hold,
        collision,
    };
    Ok((scene, outcome))
}
