use choice_control::loco::LocoCommand;
use choice_control::teleop::{
    anchored_ee_target, gaze_from_hand, mode_transition, parse_event_log, replay, write_event_log, AngleLimit, Arm,
    ControlMode, GazeLimits, Pose, Quaternion, TeleopEvent, TeleopMode, TimedEvent,
};
use proptest::prelude::*;

type Mat4 = [[f64; 4]; 4];

/// Homogeneous matrix built from the quaternion's rotation matrix.
fn to_mat(p: &Pose) -> Mat4 {
    let r = p.orientation.to_matrix();
    let mut m = [[0.0; 4]; 4];
    for i in 0..3 {
        m[i][..3].copy_from_slice(&r[i]);
        m[i][3] = p.position[i];
    }
    m[3][3] = 1.0;
    m
}

fn mat_mul(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

/// Rigid inverse: `[Rᵀ, -Rᵀt]`.
fn mat_inv(m: &Mat4) -> Mat4 {
    let mut out = [[0.0; 4]; 4];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = m[j][i];
        }
        out[i][3] = -(0..3).map(|k| m[k][i] * m[k][3]).sum::<f64>();
    }
    out[3][3] = 1.0;
    out
}

fn engaged(ctrl: Pose, ee: Pose) -> TeleopMode {
    mode_transition(
        &TeleopMode::default(),
        &TeleopEvent::TriggerPress {
            arm: Arm::Right,
            controller: ctrl,
            end_effector: ee,
        },
    )
    .state
}

fn pose_strategy() -> impl Strategy<Value = Pose> {
    (
        prop::array::uniform3(-2.0f64..2.0),
        prop::array::uniform3(-1.0f64..1.0),
        -3.0f64..3.0,
    )
        .prop_filter_map("degenerate axis", |(p, axis, angle)| {
            let q = Quaternion::from_axis_angle(axis, angle).ok()?;
            Pose::new(p, q).ok()
        })
}

#[test]
fn anchor_pose_maps_to_anchor_target() {
    let ctrl = Pose::new([0.3, 0.1, 1.2], Quaternion::from_axis_angle([1.0, 1.0, 0.0], 0.4).unwrap()).unwrap();
    let ee = Pose::new([0.5, -0.2, 0.9], Quaternion::from_axis_angle([0.0, 0.0, 1.0], -1.1).unwrap()).unwrap();
    let s = engaged(ctrl, ee);
    let t = anchored_ee_target(&s, Arm::Right, &ctrl).unwrap();
    for i in 0..3 {
        assert!((t.position[i] - ee.position[i]).abs() < 1e-12);
    }
    let dq = t.orientation * ee.orientation.conjugate();
    assert!((dq.w.abs() - 1.0).abs() < 1e-12);
}

#[test]
fn pure_translation_moves_target() {
    let ctrl = Pose::from_translation([0.1, 0.2, 0.3]);
    let ee = Pose::from_translation([1.0, 1.0, 1.0]);
    let s = engaged(ctrl, ee);
    let now = Pose::from_translation([0.15, 0.1, 0.3]);
    let t = anchored_ee_target(&s, Arm::Right, &now).unwrap();
    let expected = [1.05, 0.9, 1.0];
    for i in 0..3 {
        assert!((t.position[i] - expected[i]).abs() < 1e-12);
    }
}

#[test]
fn toggle_then_stand_replays_from_log() {
    let events = vec![
        TimedEvent { t: 0.0, event: TeleopEvent::JoystickPress },
        TimedEvent {
            t: 0.5,
            event: TeleopEvent::JoystickMove { v_x: 0.4, v_y: 0.0, yaw_rate: 0.1 },
        },
        TimedEvent { t: 1.0, event: TeleopEvent::JoystickRelease },
        TimedEvent { t: 1.5, event: TeleopEvent::TrackLeft },
    ];
    let text = write_event_log(&events).unwrap();
    let parsed = parse_event_log(&text).unwrap();
    assert_eq!(parsed, events);
    let r = replay(&TeleopMode::default(), &parsed);
    assert_eq!(r.state.mode, ControlMode::Locomotion);
    assert_eq!(
        r.commands,
        vec![(0.5, LocoCommand::walk(0.4, 0.0, 0.1)), (1.0, LocoCommand::stand())]
    );
}

fn event_strategy() -> impl Strategy<Value = TeleopEvent> {
    let arm = prop_oneof![Just(Arm::Left), Just(Arm::Right)];
    prop_oneof![
        Just(TeleopEvent::JoystickPress),
        Just(TeleopEvent::JoystickRelease),
        (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
            .prop_map(|(v_x, v_y, yaw_rate)| TeleopEvent::JoystickMove { v_x, v_y, yaw_rate }),
        (arm.clone(), pose_strategy(), pose_strategy()).prop_map(|(arm, controller, end_effector)| {
            TeleopEvent::TriggerPress { arm, controller, end_effector }
        }),
        arm.prop_map(|arm| TeleopEvent::TriggerRelease { arm }),
        Just(TeleopEvent::TrackLeft),
        Just(TeleopEvent::TrackRight),
        Just(TeleopEvent::TrackOff),
    ]
}

proptest! {
    #[test]
    fn gaze_ignores_distance(
        r in prop::array::uniform3(-5.0f64..5.0),
        head in prop::array::uniform3(-1.0f64..1.0),
        scale in 0.01f64..100.0,
    ) {
        prop_assume!(r.iter().map(|v| v * v).sum::<f64>() > 1e-6);
        let a = gaze_from_hand([head[0] + r[0], head[1] + r[1], head[2] + r[2]], head, GazeLimits::default()).unwrap();
        let b = gaze_from_hand(
            [head[0] + scale * r[0], head[1] + scale * r[1], head[2] + scale * r[2]],
            head,
            GazeLimits::default(),
        ).unwrap();
        prop_assert!((a.yaw - b.yaw).abs() < 1e-9);
        prop_assert!((a.pitch - b.pitch).abs() < 1e-9);
    }

    #[test]
    fn gaze_stays_within_limits(
        r in prop::array::uniform3(-5.0f64..5.0),
        yaw in (-3.0f64..3.0, 0.0f64..3.0),
        pitch in (-1.5f64..1.5, 0.0f64..1.5),
    ) {
        prop_assume!(r != [0.0; 3]);
        let limits = GazeLimits {
            yaw: AngleLimit::new(yaw.0, yaw.0 + yaw.1).unwrap(),
            pitch: AngleLimit::new(pitch.0, pitch.0 + pitch.1).unwrap(),
        };
        let g = gaze_from_hand(r, [0.0; 3], limits).unwrap();
        prop_assert!(limits.yaw.contains(g.yaw));
        prop_assert!(limits.pitch.contains(g.pitch));
        prop_assert_eq!(g.roll, 0.0);
    }

    #[test]
    fn anchoring_matches_matrix_composition(ctrl in pose_strategy(), ee in pose_strategy(), now in pose_strategy()) {
        let s = engaged(ctrl, ee);
        let t = anchored_ee_target(&s, Arm::Right, &now).unwrap();
        let oracle = mat_mul(&to_mat(&ee), &mat_mul(&mat_inv(&to_mat(&ctrl)), &to_mat(&now)));
        let got = to_mat(&t);
        for i in 0..4 {
            for j in 0..4 {
                prop_assert!((got[i][j] - oracle[i][j]).abs() < 1e-9, "({}, {}): {} vs {}", i, j, got[i][j], oracle[i][j]);
            }
        }
    }

    #[test]
    fn anchoring_is_continuous(ctrl in pose_strategy(), ee in pose_strategy(), d in prop::array::uniform3(-1.0f64..1.0)) {
        let s = engaged(ctrl, ee);
        let eps = 1e-7;
        let nudged = Pose { position: [ctrl.position[0] + eps * d[0], ctrl.position[1] + eps * d[1], ctrl.position[2] + eps * d[2]], ..ctrl };
        let t = anchored_ee_target(&s, Arm::Right, &nudged).unwrap();
        for i in 0..3 {
            prop_assert!((t.position[i] - ee.position[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn replay_is_deterministic(events in prop::collection::vec(event_strategy(), 0..40)) {
        let timed: Vec<TimedEvent> = events.iter().enumerate().map(|(i, e)| TimedEvent { t: i as f64 * 0.01, event: *e }).collect();
        let text = write_event_log(&timed).unwrap();
        let a = replay(&TeleopMode::default(), &parse_event_log(&text).unwrap());
        let b = replay(&TeleopMode::default(), &timed);
        prop_assert_eq!(&a, &b);
        for arm in [Arm::Left, Arm::Right] {
            prop_assert_eq!(a.state.engaged(arm), a.state.anchor(arm).is_some());
        }
    }
}
