//! Kinematic surrogate of the arm and four-finger hand.
//!
//! The arm is a direct TCP twist: action dims 0..6 translate/rotate the TCP,
//! dim 6 is unused, dims 7..19 drive the twelve finger joints. Every finger is
//! a planar three-link chain hanging below the palm and curling towards the
//! palm axis as its joints flex.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Pose, Vec3};

pub const ACTION_DIM: usize = 19;
pub const FINGERS: usize = 4;
pub const JOINTS_PER_FINGER: usize = 3;
pub const FINGER_JOINTS: usize = FINGERS * JOINTS_PER_FINGER;
pub const PALM_KEYPOINTS: usize = 6;
pub const KEYPOINTS: usize = PALM_KEYPOINTS + FINGER_JOINTS;
/// Index of the first finger dimension in an action vector.
pub const FINGER_ACTION_OFFSET: usize = 7;

/// Hand geometry and control scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HandRig {
    /// Proximal, medial and distal link lengths (m).
    pub link_lengths: [f64; 3],
    /// Spacing of the 2x3 palm keypoint grid (m).
    pub palm_pitch: f64,
    /// Distance of each finger base from the palm center (m).
    pub finger_base_radius: f64,
    /// Angular position of each finger base around the palm, in the TCP frame.
    pub finger_angles: [f64; FINGERS],
    pub joint_limits: (f64, f64),
    /// Per-step scale applied to every action component.
    pub action_scale: f64,
}

impl Default for HandRig {
    fn default() -> Self {
        Self {
            link_lengths: [0.04, 0.03, 0.02],
            palm_pitch: 0.02,
            finger_base_radius: 0.05,
            finger_angles: [0.0, FRAC_PI_2, PI, -FRAC_PI_2],
            joint_limits: (0.0, FRAC_PI_2),
            action_scale: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandState {
    pub tcp: Pose,
    pub fingers: [f64; FINGER_JOINTS],
    pub joint_limits: [(f64, f64); FINGER_JOINTS],
}

impl HandState {
    /// Open hand at `tcp` with the rig's joint limits.
    pub fn open(rig: &HandRig, tcp: Pose) -> Self {
        let (lo, _) = rig.joint_limits;
        Self {
            tcp,
            fingers: [lo; FINGER_JOINTS],
            joint_limits: [rig.joint_limits; FINGER_JOINTS],
        }
    }

    pub fn within_limits(&self) -> bool {
        self.fingers
            .iter()
            .zip(&self.joint_limits)
            .all(|(q, (lo, hi))| q >= lo && q <= hi)
    }
}

/// An action with every component in `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionVector(pub [f64; ACTION_DIM]);

impl ActionVector {
    pub fn zeros() -> Self {
        Self([0.0; ACTION_DIM])
    }

    pub fn values(&self) -> &[f64; ACTION_DIM] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Clamps already-finite values; used by controllers.
    pub fn saturate(raw: [f64; ACTION_DIM]) -> Self {
        Self(raw.map(|v| if v.is_nan() { 0.0 } else { v.clamp(-1.0, 1.0) }))
    }
}

pub fn clamp_action(raw: &[f64; ACTION_DIM]) -> Result<ActionVector> {
    if let Some((index, &value)) = raw.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFiniteAction { index, value });
    }
    Ok(ActionVector(raw.map(|v| v.clamp(-1.0, 1.0))))
}

impl HandRig {
    pub fn apply_action(&self, state: &HandState, a: &ActionVector) -> HandState {
        let s = self.action_scale;
        let v = &a.0;
        let tcp = &state.tcp;
        let position = tcp.position + Vec3::new(v[0], v[1], v[2]) * s;
        let mut next = state.clone();
        next.tcp = Pose {
            position,
            roll: wrap_angle(tcp.roll + s * v[3]),
            pitch: wrap_angle(tcp.pitch + s * v[4]),
            yaw: wrap_angle(tcp.yaw + s * v[5]),
        };
        for (k, q) in next.fingers.iter_mut().enumerate() {
            let (lo, hi) = state.joint_limits[k];
            *q = (*q + s * v[FINGER_ACTION_OFFSET + k]).clamp(lo, hi);
        }
        next
    }

    /// Palm keypoints in the TCP frame: a 2x3 grid on the `z = 0` plane.
    pub fn palm_points_local(&self) -> [Vec3; PALM_KEYPOINTS] {
        let p = self.palm_pitch;
        let mut out = [Vec3::zeros(); PALM_KEYPOINTS];
        for (i, slot) in out.iter_mut().enumerate() {
            let (row, col) = (i / 3, i % 3);
            *slot = Vec3::new((row as f64 - 0.5) * p, (col as f64 - 1.0) * p, 0.0);
        }
        out
    }

    /// Outward unit direction of finger `i` in the TCP frame.
    pub fn finger_outward_local(&self, i: usize) -> Vec3 {
        let a = self.finger_angles[i];
        Vec3::new(a.cos(), a.sin(), 0.0)
    }

    /// Link-center keypoints of one finger in the TCP frame.
    pub fn finger_points_local(&self, i: usize, joints: &[f64]) -> [Vec3; JOINTS_PER_FINGER] {
        let out_dir = self.finger_outward_local(i);
        let down = Vec3::new(0.0, 0.0, -1.0);
        let mut start = out_dir * self.finger_base_radius;
        let mut angle = 0.0;
        let mut pts = [Vec3::zeros(); JOINTS_PER_FINGER];
        for j in 0..JOINTS_PER_FINGER {
            angle += joints[j];
            let dir = down * angle.cos() - out_dir * angle.sin();
            let len = self.link_lengths[j];
            pts[j] = start + dir * (0.5 * len);
            start += dir * len;
        }
        pts
    }

    /// All 18 keypoints in the world frame: palm first, then fingers
    /// (proximal, medial, distal) in finger order.
    pub fn forward_keypoints(&self, state: &HandState) -> [Vec3; KEYPOINTS] {
        let rot = state.tcp.rotation();
        let origin = state.tcp.position;
        let mut out = [Vec3::zeros(); KEYPOINTS];
        for (slot, p) in out.iter_mut().zip(self.palm_points_local()) {
            *slot = rot * p + origin;
        }
        for i in 0..FINGERS {
            let joints = &state.fingers[i * JOINTS_PER_FINGER..(i + 1) * JOINTS_PER_FINGER];
            for (j, p) in self.finger_points_local(i, joints).into_iter().enumerate() {
                out[PALM_KEYPOINTS + i * JOINTS_PER_FINGER + j] = rot * p + origin;
            }
        }
        out
    }
}

/// `(tcp z, roll, pitch, yaw)`
pub fn tcp_observation(state: &HandState) -> [f64; 4] {
    let t = &state.tcp;
    [t.position.z, t.roll, t.pitch, t.yaw]
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_6;

    fn rig() -> HandRig {
        HandRig::default()
    }

    #[test]
    fn clamp_bounds() {
        let mut raw = [0.0; ACTION_DIM];
        assert_eq!(clamp_action(&raw).unwrap(), ActionVector::zeros());
        raw[3] = 1.7;
        raw[4] = -1.0;
        raw[5] = -3.0;
        let a = clamp_action(&raw).unwrap();
        assert_eq!(a.0[3], 1.0);
        assert_eq!(a.0[4], -1.0);
        assert_eq!(a.0[5], -1.0);
        raw[9] = f64::INFINITY;
        assert!(matches!(
            clamp_action(&raw),
            Err(Error::NonFiniteAction { index: 9, .. })
        ));
    }

    #[test]
    fn zero_action_is_identity() {
        let r = rig();
        let s = HandState::open(&r, Pose::new(Vec3::new(0.1, 0.0, 0.3), 0.0, 0.0, 0.5));
        assert_eq!(r.apply_action(&s, &ActionVector::zeros()), s);
    }

    #[test]
    fn finger_step_and_limit() {
        let r = rig();
        let mut s = HandState::open(&r, Pose::identity());
        s.fingers[4] = 0.3;
        let mut a = ActionVector::zeros();
        a.0[FINGER_ACTION_OFFSET + 4] = 1.0;
        let next = r.apply_action(&s, &a);
        assert!((next.fingers[4] - 0.35).abs() < 1e-15);

        s.fingers[4] = FRAC_PI_2;
        let next = r.apply_action(&s, &a);
        assert_eq!(next.fingers[4], FRAC_PI_2);
    }

    #[test]
    fn arm_dims_move_tcp_and_dim_seven_is_ignored() {
        let r = rig();
        let s = HandState::open(&r, Pose::identity());
        let mut a = ActionVector::zeros();
        a.0[2] = -1.0;
        a.0[5] = 0.5;
        a.0[6] = 1.0;
        let next = r.apply_action(&s, &a);
        assert!((next.tcp.position.z + 0.05).abs() < 1e-15);
        assert!((next.tcp.yaw - 0.025).abs() < 1e-15);
        assert_eq!(next.fingers, s.fingers);
    }

    #[test]
    fn palm_on_plane_at_zero_pose() {
        let r = rig();
        let s = HandState::open(&r, Pose::new(Vec3::new(0.0, 0.0, 0.2), 0.0, 0.0, 0.0));
        let kp = r.forward_keypoints(&s);
        assert_eq!(kp.len(), KEYPOINTS);
        for p in &kp[..PALM_KEYPOINTS] {
            assert!((p.z - 0.2).abs() < 1e-15);
        }
        // straight fingers hang below the palm
        for p in &kp[PALM_KEYPOINTS..] {
            assert!(p.z < 0.2);
        }
    }

    #[test]
    fn flexing_curls_inward() {
        let r = rig();
        let mut s = HandState::open(&r, Pose::identity());
        let open = r.forward_keypoints(&s);
        s.fingers[..3].copy_from_slice(&[0.5, 0.5, 0.5]);
        let closed = r.forward_keypoints(&s);
        let distal = PALM_KEYPOINTS + 2;
        assert!(closed[distal].xy().norm() < open[distal].xy().norm());
    }

    #[test]
    fn tcp_observation_components() {
        let r = rig();
        let s = HandState::open(&r, Pose::identity());
        assert_eq!(tcp_observation(&s), [0.0; 4]);
        let s = HandState::open(
            &r,
            Pose::new(Vec3::new(0.0, 0.0, 0.30), 0.0, 0.0, FRAC_PI_6),
        );
        let o = tcp_observation(&s);
        assert_eq!(o[0], 0.30);
        assert!((o[3] - FRAC_PI_6).abs() < 1e-12);
    }
}
