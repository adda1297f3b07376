//! Turn to find an eraser behind the robot, pick it up, walk to a board and
//! wipe it. The hand is commanded in the base frame; the base takes velocity
//! commands with a stand flag.

use std::f64::consts::PI;

use choice_control::loco::LocoCommand;
use choice_control::teleop::{gaze_from_hand, AngleLimit, GazeLimits};
use choice_core::numerics::SeededRng;
use serde::{Deserialize, Serialize};

use crate::env::{check_action, check_mode, jitter, EnvState, Environment, Expert, TaskSpec};
use crate::error::{EnvError, Result};
use crate::geometry::{add, clip_norm, dist, norm, step_toward, sub, Bounds, Point};

pub const PHASES: [&str; 4] = ["look", "pickup", "walk", "wipe"];

/// Action layout: hand delta (2), grasp, base v_x, v_y, yaw rate, move flag.
pub const ACTION_DIM: usize = 7;
pub const OBS_DIM: usize = 11;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WipeSpec {
    pub base_start: Point,
    pub heading_start: f64,
    pub start_jitter: f64,
    /// Hand rest position in the base frame.
    pub hand_rest: Point,
    pub reach_radius: f64,
    pub eraser: Point,
    pub eraser_height: f64,
    pub head_height: f64,
    pub gaze_limits: GazeLimits,
    pub board_x: f64,
    pub board_span: [f64; 2],
    /// Where the base stops in front of the board.
    pub stand_spot: Point,
    pub hand_step: f64,
    pub dt: f64,
    pub max_speed: f64,
    pub max_yaw_rate: f64,
    pub grasp_radius: f64,
    pub board_tolerance: f64,
    pub coverage_required: f64,
    pub stand_prob: f64,
    pub noise_frac: f64,
    pub horizon_cap: usize,
    pub bounds: Bounds,
}

impl Default for WipeSpec {
    fn default() -> Self {
        Self {
            base_start: [0.0, 0.0],
            heading_start: 0.0,
            start_jitter: 0.0,
            hand_rest: [0.25, 0.0],
            reach_radius: 0.6,
            eraser: [-0.45, 0.0],
            eraser_height: 0.8,
            head_height: 1.4,
            gaze_limits: GazeLimits {
                yaw: AngleLimit { min: -0.6, max: 0.6 },
                pitch: AngleLimit { min: -0.3, max: 1.2 },
            },
            board_x: -1.6,
            board_span: [-0.3, 0.3],
            stand_spot: [-1.2, 0.0],
            hand_step: 0.1,
            dt: 0.2,
            max_speed: 0.5,
            max_yaw_rate: 1.0,
            grasp_radius: 0.04,
            board_tolerance: 0.03,
            coverage_required: 0.9,
            stand_prob: 0.1,
            noise_frac: 0.02,
            horizon_cap: 120,
            bounds: Bounds {
                min: [-2.5, -1.5],
                max: [1.0, 1.5],
            },
        }
    }
}

impl WipeSpec {
    fn validate(&self) -> Result<()> {
        let positive = [
            self.reach_radius,
            self.hand_step,
            self.dt,
            self.max_speed,
            self.max_yaw_rate,
            self.grasp_radius,
            self.board_tolerance,
        ];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(EnvError::InvalidTask("wipe sizes must be positive".into()));
        }
        if !(self.board_span[0] < self.board_span[1]) {
            return Err(EnvError::InvalidTask("board span is empty".into()));
        }
        if !(0.0..=1.0).contains(&self.stand_prob) || !(0.0..=1.0).contains(&self.coverage_required) {
            return Err(EnvError::InvalidTask("wipe probabilities out of range".into()));
        }
        if self.start_jitter < 0.0 || !(0.0..0.5).contains(&self.noise_frac) {
            return Err(EnvError::InvalidTask("wipe noise settings out of range".into()));
        }
        if norm(self.hand_rest) > self.reach_radius {
            return Err(EnvError::InvalidTask("hand rest lies outside the reach radius".into()));
        }
        // Both board ends must be reachable from the stand spot.
        for y in self.board_span {
            if dist(self.stand_spot, [self.board_x, y]) > self.reach_radius {
                return Err(EnvError::InvalidTask("board is out of reach from the stand spot".into()));
            }
        }
        if dist(self.base_start, self.eraser) > self.reach_radius {
            return Err(EnvError::InvalidTask("eraser is out of reach from the start".into()));
        }
        Ok(())
    }
}

fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

fn rotate(v: Point, angle: f64) -> Point {
    let (s, c) = angle.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1]]
}

#[derive(Debug, Clone)]
pub struct WipeWorld {
    spec: WipeSpec,
}

impl WipeWorld {
    pub fn new(spec: WipeSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self { spec })
    }

    pub fn wipe_spec(&self) -> &WipeSpec {
        &self.spec
    }

    pub fn hand_world(&self, s: &EnvState) -> Point {
        add(s.base, rotate(s.agent, s.heading))
    }

    fn to_base(&self, s: &EnvState, p: Point) -> Point {
        rotate(sub(p, s.base), -s.heading)
    }

    /// Whether the eraser falls inside the head's joint range when gazing at it.
    pub fn eraser_visible(&self, s: &EnvState) -> bool {
        let head = [s.base[0], s.base[1], self.spec.head_height];
        let target = [s.object[0], s.object[1], self.spec.eraser_height];
        let wide = GazeLimits {
            yaw: AngleLimit { min: -PI, max: PI },
            pitch: AngleLimit {
                min: -PI / 2.0,
                max: PI / 2.0,
            },
        };
        match gaze_from_hand(target, head, wide) {
            Ok(g) => {
                self.spec.gaze_limits.yaw.contains(wrap_angle(g.yaw - s.heading))
                    && self.spec.gaze_limits.pitch.contains(g.pitch)
            }
            Err(_) => true,
        }
    }

    fn on_board(&self, hand: Point) -> bool {
        let [lo, hi] = self.spec.board_span;
        (hand[0] - self.spec.board_x).abs() <= self.spec.board_tolerance && hand[1] >= lo - 1e-9 && hand[1] <= hi + 1e-9
    }

    fn phase_of(&self, s: &EnvState) -> usize {
        if s.grasped {
            if dist(s.base, self.spec.stand_spot) <= 0.05 {
                3
            } else {
                2
            }
        } else if self.eraser_visible(s) {
            1
        } else {
            0
        }
    }

    pub fn base_command(action: &[f64]) -> LocoCommand {
        if action[6] > 0.5 {
            LocoCommand::walk(action[3], action[4], action[5])
        } else {
            LocoCommand::stand()
        }
    }
}

impl Environment for WipeWorld {
    fn spec(&self) -> TaskSpec {
        TaskSpec::Wipe(self.spec.clone())
    }

    fn phase_names(&self) -> &'static [&'static str] {
        &PHASES
    }

    fn obs_dim(&self) -> usize {
        OBS_DIM
    }

    fn action_dim(&self) -> usize {
        ACTION_DIM
    }

    fn num_modes(&self) -> usize {
        4
    }

    fn mode_separation(&self) -> f64 {
        // turning the other way round, measured as arc at the hand rest radius
        norm(self.spec.hand_rest) * PI
    }

    fn horizon_cap(&self) -> usize {
        self.spec.horizon_cap
    }

    fn initial_state(&self, rng: &mut SeededRng) -> EnvState {
        let j = self.spec.start_jitter;
        EnvState {
            agent: self.spec.hand_rest,
            object: self.spec.eraser,
            base: [self.spec.base_start[0] + jitter(rng, j), self.spec.base_start[1] + jitter(rng, j)],
            heading: self.spec.heading_start,
            ..EnvState::default()
        }
    }

    fn observe(&self, s: &EnvState) -> Vec<f64> {
        let eraser = self.to_base(s, s.object);
        let mid = (self.spec.board_span[0] + self.spec.board_span[1]) / 2.0;
        let [lo, hi] = s.coverage.unwrap_or([mid, mid]);
        vec![
            s.base[0],
            s.base[1],
            s.heading.cos(),
            s.heading.sin(),
            s.agent[0],
            s.agent[1],
            eraser[0],
            eraser[1],
            if s.grasped { 1.0 } else { 0.0 },
            lo - mid,
            hi - mid,
        ]
    }

    fn step(&self, state: &EnvState, action: &[f64]) -> Result<EnvState> {
        check_action(action, ACTION_DIM)?;
        if state.is_terminal() {
            return Ok(state.clone());
        }
        let sp = &self.spec;
        let mut next = state.clone();
        next.steps += 1;

        let cmd = Self::base_command(action);
        if cmd.moving {
            let v = [
                cmd.v_x.clamp(-sp.max_speed, sp.max_speed) * sp.dt,
                cmd.v_y.clamp(-sp.max_speed, sp.max_speed) * sp.dt,
            ];
            next.base = sp.bounds.clamp(add(state.base, rotate(v, state.heading)));
            next.heading = wrap_angle(state.heading + cmd.yaw_rate.clamp(-sp.max_yaw_rate, sp.max_yaw_rate) * sp.dt);
        }
        let hand = add(state.agent, clip_norm([action[0], action[1]], sp.hand_step));
        next.agent = clip_norm(hand, sp.reach_radius);

        let toggle = action[2] > 0.5;
        let hand_world = self.hand_world(&next);
        if next.grasped {
            if toggle {
                next.grasped = false;
                next.failure = Some("eraser dropped".into());
            } else {
                next.object = hand_world;
            }
        } else if toggle && dist(hand_world, next.object) <= sp.grasp_radius {
            next.grasped = true;
            next.object = hand_world;
        }

        if next.grasped && self.on_board(hand_world) {
            let y = hand_world[1].clamp(sp.board_span[0], sp.board_span[1]);
            next.coverage = Some(match next.coverage {
                Some([lo, hi]) => [lo.min(y), hi.max(y)],
                None => [y, y],
            });
        }
        let required = sp.coverage_required * (sp.board_span[1] - sp.board_span[0]);
        if let Some([lo, hi]) = next.coverage {
            if next.grasped && hi - lo >= required - 1e-12 {
                next.success = true;
            }
        }
        next.phase = if next.success {
            PHASES.len() - 1
        } else {
            next.phase.max(self.phase_of(&next))
        };
        Ok(next)
    }

    fn idle_action(&self) -> Vec<f64> {
        vec![0.0; 7]
    }

    fn expert(&self, mode: usize, noise_frac: f64) -> Result<Box<dyn Expert>> {
        check_mode(mode, 4)?;
        Ok(Box::new(WipeExpert {
            turn: if mode.is_multiple_of(2) { 1.0 } else { -1.0 },
            sweep_down: (mode / 2).is_multiple_of(2),
            world: self.clone(),
            noise_frac,
        }))
    }

    fn demo_noise(&self) -> f64 {
        self.spec.noise_frac
    }
}

struct WipeExpert {
    /// +1 turns left (counter-clockwise) to find the eraser, -1 turns right.
    turn: f64,
    /// Start at the top of the board and wipe downward.
    sweep_down: bool,
    world: WipeWorld,
    noise_frac: f64,
}

impl WipeExpert {
    fn hand_move(&self, s: &EnvState, target_world: Point, rng: &mut SeededRng) -> Point {
        let sp = &self.world.spec;
        let target = self.world.to_base(s, target_world);
        let ideal = step_toward(s.agent, target, sp.hand_step);
        let n = self.noise_frac * sp.hand_step;
        clip_norm([ideal[0] + jitter(rng, n), ideal[1] + jitter(rng, n)], sp.hand_step)
    }

    fn base_move(&self, v_x: f64, v_y: f64, yaw: f64, rng: &mut SeededRng) -> [f64; 4] {
        let sp = &self.world.spec;
        if rng.bernoulli(sp.stand_prob) {
            let c = LocoCommand::stand();
            return [c.v_x, c.v_y, c.yaw_rate, 0.0];
        }
        let nv = self.noise_frac * sp.max_speed;
        let ny = self.noise_frac * sp.max_yaw_rate;
        [
            (v_x + jitter(rng, nv)).clamp(-sp.max_speed, sp.max_speed),
            (v_y + jitter(rng, nv)).clamp(-sp.max_speed, sp.max_speed),
            (yaw + jitter(rng, ny)).clamp(-sp.max_yaw_rate, sp.max_yaw_rate),
            1.0,
        ]
    }
}

impl Expert for WipeExpert {
    fn act(&mut self, s: &EnvState, rng: &mut SeededRng) -> Vec<f64> {
        let sp = self.world.spec.clone();
        let stand = [0.0, 0.0, 0.0, 0.0];
        let pack = |hand: Point, grip: f64, base: [f64; 4]| {
            vec![hand[0], hand[1], grip, base[0], base[1], base[2], base[3]]
        };
        if !s.grasped {
            let to_eraser = sub(s.object, s.base);
            let bearing = wrap_angle(to_eraser[1].atan2(to_eraser[0]) - s.heading);
            if bearing.abs() > 0.02 {
                // keep turning the chosen way until facing the eraser
                let remaining = if bearing * self.turn >= 0.0 {
                    bearing.abs()
                } else {
                    2.0 * PI - bearing.abs()
                };
                let rate = (remaining / sp.dt).min(sp.max_yaw_rate) * self.turn;
                return pack([0.0, 0.0], 0.0, self.base_move(0.0, 0.0, rate, rng));
            }
            if dist(self.world.hand_world(s), s.object) <= sp.grasp_radius / 2.0 {
                return pack([0.0, 0.0], 1.0, stand);
            }
            let h = self.hand_move(s, s.object, rng);
            return pack(h, 0.0, stand);
        }
        let to_spot = sub(sp.stand_spot, s.base);
        if s.coverage.is_none() && norm(to_spot) > 0.01 && s.phase < 3 {
            let local = clip_norm(rotate(to_spot, -s.heading), sp.max_speed * sp.dt);
            let n = self.noise_frac * sp.hand_step;
            let ideal = step_toward(s.agent, sp.hand_rest, sp.hand_step);
            let retract = clip_norm([ideal[0] + jitter(rng, n), ideal[1] + jitter(rng, n)], sp.hand_step);
            return pack(retract, 0.0, self.base_move(local[0] / sp.dt, local[1] / sp.dt, 0.0, rng));
        }
        let [lo, hi] = sp.board_span;
        let (first, last) = if self.sweep_down { (hi, lo) } else { (lo, hi) };
        let target = match s.coverage {
            Some(_) => [sp.board_x, last],
            None => [sp.board_x, first],
        };
        let h = self.hand_move(s, target, rng);
        pack(h, 0.0, stand)
    }
}
