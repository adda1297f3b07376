//! Pick an object, carry it around a second obstacle and insert it into a slot.
//! Both the reach and the transfer can go around either side of an obstacle.

use choice_core::numerics::SeededRng;
use serde::{Deserialize, Serialize};

use crate::env::{check_action, check_mode, jitter, EnvState, Environment, Expert, TaskSpec};
use crate::error::{EnvError, Result};
use crate::geometry::{add, clip_norm, dist, segment_point_distance, step_toward, Bounds, Disk, Point};

pub const PHASES: [&str; 4] = ["reach", "grasp", "transfer", "insert"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasedSpec {
    pub start: Point,
    pub start_jitter: f64,
    pub object: Point,
    /// Blocks the straight reach from the start to the object.
    pub reach_obstacle: Disk,
    /// Blocks the straight carry from the object to the slot.
    pub transfer_obstacle: Disk,
    /// Lateral offset of the reach waypoints from the reach obstacle centre (along y).
    pub reach_offset: f64,
    /// Lateral offset of the transfer waypoints from the transfer obstacle centre (along x).
    pub transfer_offset: f64,
    pub pre_insert: Point,
    pub slot: Point,
    pub step_bound: f64,
    /// Per-step bound the demonstrator uses for the final insertion.
    pub insert_step: f64,
    pub grasp_radius: f64,
    pub slot_tolerance: f64,
    /// Distance to the object at which the grasp phase begins.
    pub grasp_zone: f64,
    pub noise_frac: f64,
    pub horizon_cap: usize,
    pub bounds: Bounds,
}

impl Default for PhasedSpec {
    fn default() -> Self {
        Self {
            start: [0.0, 0.0],
            start_jitter: 0.0,
            object: [0.6, 0.0],
            reach_obstacle: Disk::new([0.3, 0.0], 0.1),
            transfer_obstacle: Disk::new([0.6, 0.4], 0.1),
            reach_offset: 0.2,
            transfer_offset: 0.2,
            pre_insert: [0.6, 0.8],
            slot: [0.6, 1.0],
            step_bound: 0.1,
            insert_step: 0.05,
            grasp_radius: 0.03,
            slot_tolerance: 0.03,
            grasp_zone: 0.15,
            noise_frac: 0.02,
            horizon_cap: 60,
            bounds: Bounds {
                min: [-0.5, -0.5],
                max: [1.5, 1.5],
            },
        }
    }
}

impl PhasedSpec {
    /// Mode `m` takes reach side `m % 2` and transfer side `m / 2`.
    pub fn reach_waypoint(&self, mode: usize) -> Point {
        let side = if mode.is_multiple_of(2) { 1.0 } else { -1.0 };
        let c = self.reach_obstacle.center;
        [c[0], c[1] + side * self.reach_offset]
    }

    pub fn transfer_waypoint(&self, mode: usize) -> Point {
        let side = if (mode / 2).is_multiple_of(2) { -1.0 } else { 1.0 };
        let c = self.transfer_obstacle.center;
        [c[0] + side * self.transfer_offset, c[1]]
    }

    fn obstacles(&self) -> [Disk; 2] {
        [self.reach_obstacle, self.transfer_obstacle]
    }

    fn validate(&self) -> Result<()> {
        let positive = [
            self.step_bound,
            self.insert_step,
            self.grasp_radius,
            self.slot_tolerance,
            self.reach_offset,
            self.transfer_offset,
            self.grasp_zone,
        ];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(EnvError::InvalidTask("phased sizes must be positive".into()));
        }
        if self.start_jitter < 0.0 || !(0.0..0.5).contains(&self.noise_frac) {
            return Err(EnvError::InvalidTask("phased noise settings out of range".into()));
        }
        let slack = self.start_jitter * std::f64::consts::SQRT_2 + self.step_bound * 0.1;
        for mode in 0..4 {
            let wp = self.reach_waypoint(mode);
            let tw = self.transfer_waypoint(mode);
            let legs = [
                (self.start, wp),
                (wp, self.object),
                (self.object, tw),
                (tw, self.pre_insert),
                (self.pre_insert, self.slot),
            ];
            for (a, b) in legs {
                for o in self.obstacles() {
                    if segment_point_distance(a, b, o.center) <= o.radius + slack {
                        return Err(EnvError::InvalidTask(format!(
                            "route of mode {mode} passes too close to an obstacle"
                        )));
                    }
                }
            }
        }
        for p in [self.start, self.object, self.pre_insert, self.slot] {
            if !self.bounds.contains(p) {
                return Err(EnvError::InvalidTask("task points must lie inside the workspace".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PhasedWorld {
    spec: PhasedSpec,
}

impl PhasedWorld {
    pub fn new(spec: PhasedSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self { spec })
    }

    pub fn phased_spec(&self) -> &PhasedSpec {
        &self.spec
    }

    fn phase_of(&self, s: &EnvState) -> usize {
        if s.grasped {
            if dist(s.object, self.spec.pre_insert) <= self.spec.step_bound / 2.0 || s.object[1] > self.spec.pre_insert[1] {
                3
            } else {
                2
            }
        } else if dist(s.agent, s.object) <= self.spec.grasp_zone {
            1
        } else {
            0
        }
    }
}

impl Environment for PhasedWorld {
    fn spec(&self) -> TaskSpec {
        TaskSpec::Phased(self.spec.clone())
    }

    fn phase_names(&self) -> &'static [&'static str] {
        &PHASES
    }

    fn obs_dim(&self) -> usize {
        5
    }

    fn action_dim(&self) -> usize {
        3
    }

    fn num_modes(&self) -> usize {
        4
    }

    fn mode_separation(&self) -> f64 {
        (2.0 * self.spec.reach_offset).min(2.0 * self.spec.transfer_offset)
    }

    fn horizon_cap(&self) -> usize {
        self.spec.horizon_cap
    }

    fn initial_state(&self, rng: &mut SeededRng) -> EnvState {
        let j = self.spec.start_jitter;
        EnvState {
            agent: [self.spec.start[0] + jitter(rng, j), self.spec.start[1] + jitter(rng, j)],
            object: self.spec.object,
            ..EnvState::default()
        }
    }

    fn observe(&self, s: &EnvState) -> Vec<f64> {
        vec![s.agent[0], s.agent[1], s.object[0], s.object[1], if s.grasped { 1.0 } else { 0.0 }]
    }

    fn step(&self, state: &EnvState, action: &[f64]) -> Result<EnvState> {
        check_action(action, 3)?;
        if state.is_terminal() {
            return Ok(state.clone());
        }
        let mut next = state.clone();
        next.steps += 1;
        let delta = clip_norm([action[0], action[1]], self.spec.step_bound);
        let target = self.spec.bounds.clamp(add(state.agent, delta));
        if self.spec.obstacles().iter().any(|o| o.blocks(state.agent, target)) {
            next.failure = Some("collision with obstacle".into());
        }
        next.agent = target;
        let toggle = action[2] > 0.5;
        if next.grasped {
            next.object = target;
            if toggle {
                next.grasped = false;
                if dist(next.object, self.spec.slot) <= self.spec.slot_tolerance {
                    next.success = true;
                } else if next.failure.is_none() {
                    next.failure = Some("object released outside the slot".into());
                }
            }
        } else if toggle && dist(target, next.object) <= self.spec.grasp_radius {
            next.grasped = true;
            next.object = target;
        }
        next.phase = if next.success {
            PHASES.len() - 1
        } else {
            next.phase.max(self.phase_of(&next))
        };
        Ok(next)
    }

    fn idle_action(&self) -> Vec<f64> {
        vec![0.0, 0.0, 0.0]
    }

    fn expert(&self, mode: usize, noise_frac: f64) -> Result<Box<dyn Expert>> {
        check_mode(mode, 4)?;
        let s = &self.spec;
        Ok(Box::new(PhasedExpert {
            reach: [s.reach_waypoint(mode), s.object],
            carry: [s.transfer_waypoint(mode), s.pre_insert, s.slot],
            reach_next: 0,
            carry_next: 0,
            spec: s.clone(),
            noise: noise_frac * s.step_bound,
        }))
    }

    fn demo_noise(&self) -> f64 {
        self.spec.noise_frac
    }
}

struct PhasedExpert {
    reach: [Point; 2],
    carry: [Point; 3],
    reach_next: usize,
    carry_next: usize,
    spec: PhasedSpec,
    noise: f64,
}

impl PhasedExpert {
    fn noisy_move(&self, from: Point, to: Point, bound: f64, rng: &mut SeededRng) -> Point {
        let ideal = step_toward(from, to, bound);
        let noisy = [ideal[0] + jitter(rng, self.noise), ideal[1] + jitter(rng, self.noise)];
        clip_norm(noisy, bound)
    }
}

impl Expert for PhasedExpert {
    fn act(&mut self, s: &EnvState, rng: &mut SeededRng) -> Vec<f64> {
        let tol = 0.2 * self.spec.step_bound;
        if !s.grasped {
            if self.reach_next == 0 && dist(s.agent, self.reach[0]) < tol {
                self.reach_next = 1;
            }
            if self.reach_next == 1 && dist(s.agent, s.object) <= self.spec.grasp_radius / 2.0 {
                return vec![0.0, 0.0, 1.0];
            }
            let m = self.noisy_move(s.agent, self.reach[self.reach_next], self.spec.step_bound, rng);
            return vec![m[0], m[1], 0.0];
        }
        while self.carry_next < 2 && dist(s.agent, self.carry[self.carry_next]) < tol {
            self.carry_next += 1;
        }
        if self.carry_next == 2 && dist(s.agent, self.spec.slot) <= self.spec.slot_tolerance / 2.0 {
            return vec![0.0, 0.0, 1.0];
        }
        let bound = if self.carry_next == 2 { self.spec.insert_step } else { self.spec.step_bound };
        let m = self.noisy_move(s.agent, self.carry[self.carry_next], bound, rng);
        vec![m[0], m[1], 0.0]
    }
}
