//! Reach a goal past a central obstacle, going around either side.

use choice_core::numerics::SeededRng;
use serde::{Deserialize, Serialize};

use crate::env::{check_action, check_mode, jitter, EnvState, Environment, Expert, TaskSpec};
use crate::error::{EnvError, Result};
use crate::geometry::{add, clip_norm, dist, step_toward, Bounds, Disk, Point};

pub const PHASES: [&str; 3] = ["approach", "commit", "arrive"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForkSpec {
    pub start: Point,
    /// Half-width of the square the start position is drawn from.
    pub start_jitter: f64,
    pub goal: Disk,
    pub obstacle: Disk,
    /// Distance between the two side waypoints beside the obstacle.
    pub separation: f64,
    pub step_bound: f64,
    pub noise_frac: f64,
    pub horizon_cap: usize,
    pub bounds: Bounds,
}

impl Default for ForkSpec {
    fn default() -> Self {
        Self {
            start: [0.0, 0.0],
            start_jitter: 0.0,
            goal: Disk::new([1.0, 0.0], 0.05),
            obstacle: Disk::new([0.5, 0.0], 0.15),
            separation: 0.6,
            step_bound: 0.1,
            noise_frac: 0.02,
            horizon_cap: 40,
            bounds: Bounds {
                min: [-0.5, -1.0],
                max: [1.5, 1.0],
            },
        }
    }
}

impl ForkSpec {
    /// Waypoint beside the obstacle for `mode` (0 passes on the +y side).
    pub fn waypoint(&self, mode: usize) -> Point {
        let side = if mode == 0 { 1.0 } else { -1.0 };
        [self.obstacle.center[0], self.obstacle.center[1] + side * self.separation / 2.0]
    }

    pub fn route(&self, mode: usize) -> [Point; 2] {
        [self.waypoint(mode), self.goal.center]
    }

    fn validate(&self) -> Result<()> {
        let positive = [self.separation, self.step_bound, self.goal.radius, self.obstacle.radius];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(EnvError::InvalidTask("fork sizes must be positive".into()));
        }
        if self.start_jitter < 0.0 || !(0.0..0.5).contains(&self.noise_frac) {
            return Err(EnvError::InvalidTask("fork noise settings out of range".into()));
        }
        // Each route must clear the obstacle even from a jittered start.
        let margin = self.obstacle.radius + self.start_jitter * std::f64::consts::SQRT_2 + self.step_bound * 0.1;
        for mode in 0..2 {
            let [wp, goal] = self.route(mode);
            for (a, b) in [(self.start, wp), (wp, goal)] {
                if crate::geometry::segment_point_distance(a, b, self.obstacle.center) <= margin {
                    return Err(EnvError::InvalidTask(format!(
                        "route of mode {mode} passes too close to the obstacle"
                    )));
                }
            }
        }
        if !self.bounds.contains(self.start) || !self.bounds.contains(self.goal.center) {
            return Err(EnvError::InvalidTask("start and goal must lie inside the workspace".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ForkWorld {
    spec: ForkSpec,
}

impl ForkWorld {
    pub fn new(spec: ForkSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self { spec })
    }

    pub fn fork_spec(&self) -> &ForkSpec {
        &self.spec
    }

    /// Position-based phase: committed once clearly off the centre line,
    /// arriving once past the obstacle.
    fn phase_of(&self, p: Point) -> usize {
        let o = &self.spec.obstacle;
        if p[0] >= o.center[0] + o.radius {
            2
        } else if (p[1] - o.center[1]).abs() >= self.spec.separation / 4.0 {
            1
        } else {
            0
        }
    }
}

impl Environment for ForkWorld {
    fn spec(&self) -> TaskSpec {
        TaskSpec::Fork(self.spec.clone())
    }

    fn phase_names(&self) -> &'static [&'static str] {
        &PHASES
    }

    fn obs_dim(&self) -> usize {
        2
    }

    fn action_dim(&self) -> usize {
        2
    }

    fn num_modes(&self) -> usize {
        2
    }

    fn mode_separation(&self) -> f64 {
        self.spec.separation
    }

    fn horizon_cap(&self) -> usize {
        self.spec.horizon_cap
    }

    fn initial_state(&self, rng: &mut SeededRng) -> EnvState {
        let j = self.spec.start_jitter;
        let agent = [self.spec.start[0] + jitter(rng, j), self.spec.start[1] + jitter(rng, j)];
        EnvState {
            agent,
            ..EnvState::default()
        }
    }

    fn observe(&self, state: &EnvState) -> Vec<f64> {
        state.agent.to_vec()
    }

    fn step(&self, state: &EnvState, action: &[f64]) -> Result<EnvState> {
        check_action(action, 2)?;
        if state.is_terminal() {
            return Ok(state.clone());
        }
        let mut next = state.clone();
        next.steps += 1;
        let delta = clip_norm([action[0], action[1]], self.spec.step_bound);
        let target = self.spec.bounds.clamp(add(state.agent, delta));
        if self.spec.obstacle.blocks(state.agent, target) {
            next.failure = Some("collision with obstacle".into());
        }
        next.agent = target;
        next.phase = next.phase.max(self.phase_of(target));
        if next.failure.is_none() && self.spec.goal.contains(target) {
            next.success = true;
            next.phase = PHASES.len() - 1;
        }
        Ok(next)
    }

    fn idle_action(&self) -> Vec<f64> {
        vec![0.0, 0.0]
    }

    fn expert(&self, mode: usize, noise_frac: f64) -> Result<Box<dyn Expert>> {
        check_mode(mode, 2)?;
        Ok(Box::new(ForkExpert {
            route: self.spec.route(mode),
            next: 0,
            bound: self.spec.step_bound,
            noise: noise_frac * self.spec.step_bound,
        }))
    }

    fn demo_noise(&self) -> f64 {
        self.spec.noise_frac
    }
}

struct ForkExpert {
    route: [Point; 2],
    next: usize,
    bound: f64,
    noise: f64,
}

impl Expert for ForkExpert {
    fn act(&mut self, state: &EnvState, rng: &mut SeededRng) -> Vec<f64> {
        if self.next == 0 && dist(state.agent, self.route[0]) < 0.2 * self.bound {
            self.next = 1;
        }
        let ideal = step_toward(state.agent, self.route[self.next], self.bound);
        let noisy = [ideal[0] + jitter(rng, self.noise), ideal[1] + jitter(rng, self.noise)];
        clip_norm(noisy, self.bound).to_vec()
    }
}
