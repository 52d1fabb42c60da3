use std::f64::consts::PI;

use cluttergrasp::geometry::{wrap_angle, Pose, Vec3};
use cluttergrasp::handrig::{ActionVector, HandRig, HandState, ACTION_DIM};
use cluttergrasp::scenegen::{generate_scenario, parse, serialize, ObjectRoster};
use cluttergrasp::simworld::{resting_object, settle, SceneState, DEFAULT_WORKSPACE_HALFWIDTH};
use cluttergrasp::skills::{Side, Skill, SkillConfig};
use cluttergrasp::toolserver::Session;
use proptest::prelude::*;
use serde_json::Value;

const TARGETS: [&str; 7] = ["cube", "can", "pear", "apple", "mug", "lego", "ball"];

fn side() -> impl Strategy<Value = Side> {
    prop_oneof![Just(Side::Left), Just(Side::Center), Just(Side::Right)]
}

fn skill() -> impl Strategy<Value = Skill> {
    prop_oneof![
        (side(), 1e-6..=0.15f64).prop_map(|(side, dist)| Skill::Push { side, dist }),
        (side(), 1e-6..=0.15f64).prop_map(|(side, dist)| Skill::Pull { side, dist }),
        "[a-z_]{1,20}".prop_map(|target| Skill::MoveTo { target }),
        (1e-6..=1.0f64).prop_map(|height| Skill::Lift { height }),
        Just(Skill::Lower),
        Just(Skill::Grasp),
        Just(Skill::InitArm),
        Just(Skill::InitHand),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scenario_text_round_trips(t in 0usize..7, level in 1u8..=3, seed in any::<u64>()) {
        let roster = ObjectRoster::default();
        let c = generate_scenario(TARGETS[t], level, seed, &roster).unwrap();
        prop_assert!(c.validate().is_ok());
        let text = serialize(&c);
        let back = parse(&text).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(serialize(&back), text);
    }

    #[test]
    fn settle_separates_and_is_idempotent(
        poses in prop::collection::vec((-0.12..0.12f64, -0.12..0.12f64, -PI..PI), 2..7)
    ) {
        let roster = ObjectRoster::default();
        let names: Vec<&String> = roster.catalog.keys().collect();
        let objects = poses
            .iter()
            .zip(names)
            .map(|(&(x, y, th), n)| {
                let s = roster.spec(n).unwrap();
                resting_object(n, s.body.clone(), x, y, th, s.mass)
            })
            .collect();
        let rig = HandRig::default();
        let scene = SceneState {
            objects,
            hand: HandState::open(&rig, Pose::identity()),
            workspace_halfwidth: DEFAULT_WORKSPACE_HALFWIDTH,
            tick: 0,
            lift_offset: 0.0,
        };
        if let Ok((settled, _)) = settle(&scene) {
            prop_assert!(settled.max_overlap() <= 1e-4);
            let (_, again) = settle(&settled).unwrap();
            prop_assert!(again < 1e-9);
        }
    }

    #[test]
    fn actions_keep_joints_in_limits(
        steps in prop::collection::vec(prop::array::uniform19(-3.0..3.0f64), 1..40)
    ) {
        let rig = HandRig::default();
        let mut h = HandState::open(&rig, Pose::planar(0.0, 0.0, 0.2, 0.0));
        for raw in steps {
            h = rig.apply_action(&h, &ActionVector::saturate(raw));
            prop_assert!(h.within_limits());
            prop_assert!(h.tcp.is_finite());
        }
        prop_assert_eq!(ACTION_DIM, 19);
    }

    #[test]
    fn wrapped_angles_are_half_open(a in -1e4..1e4f64) {
        let w = wrap_angle(a);
        prop_assert!(w > -PI && w <= PI);
        prop_assert!(((a - w) / (2.0 * PI)).round() * 2.0 * PI - (a - w) < 1e-6);
    }

    #[test]
    fn pose_inverse_composes_to_identity(
        x in -1.0..1.0f64, y in -1.0..1.0f64, z in -1.0..1.0f64,
        r in -3.0..3.0f64, p in -1.5..1.5f64, yaw in -3.0..3.0f64,
        q in prop::array::uniform3(-1.0..1.0f64),
    ) {
        let pose = Pose::new(Vec3::new(x, y, z), r, p, yaw);
        let pt = Vec3::new(q[0], q[1], q[2]);
        let back = pose.inverse().transform_point(&pose.transform_point(&pt));
        prop_assert!((back - pt).norm() < 1e-9);
    }

    #[test]
    fn skill_arguments_round_trip(s in skill()) {
        let args = Value::Object(s.args());
        prop_assert_eq!(Skill::from_call(s.name(), Some(&args)).unwrap(), s);
    }

    #[test]
    fn tool_server_answers_any_bytes(bytes in prop::collection::vec(any::<u8>(), 0..200)) {
        let roster = ObjectRoster::default();
        let c = generate_scenario("cube", 1, 1, &roster).unwrap();
        let cfg = SkillConfig::default();
        let scene = cluttergrasp::scenegen::load_scene(&c, &roster, &cfg.rig, cfg.home).unwrap();
        let mut s = Session::new(scene, cfg, c.seed, c.level);
        let out: Value = serde_json::from_slice(&s.handle_message(&bytes)).unwrap();
        prop_assert_eq!(&out["jsonrpc"], "2.0");
        prop_assert!(out.get("result").is_some() != out.get("error").is_some());
    }
}
