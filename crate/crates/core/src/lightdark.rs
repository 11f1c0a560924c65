//! 2D Light Dark: navigate to a goal while observation noise grows with the
//! distance to the nearest beacon.
//!
//! The reward trades distance to the goal against belief uncertainty:
//! `r = −w_dist · mean‖s' − goal‖ − w_entropy · Ĥ(b')`, with `Ĥ` the particle
//! entropy estimate from [`crate::entropy`].

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::entropy::boers_entropy_weighted;
use crate::numeric::{distance, isotropic_normal_logpdf};
use crate::pomdp::{ActionSpace, BeliefStep, GenerativeModel, ParticleBelief, PomdpError};

pub type Point = [f64; 2];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LightDarkError {
    #[error("{0} must be positive")]
    NonPositive(&'static str),
    #[error("{0} must be nonnegative")]
    Negative(&'static str),
    #[error("beacon {0:?} lies outside the arena")]
    BeaconOutside(Point),
    #[error("arena is empty")]
    EmptyArena,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LightDarkConfig {
    pub arena_min: Point,
    pub arena_max: Point,
    pub start: Point,
    pub goal: Point,
    pub beacons: Vec<Point>,
    pub process_std: f64,
    pub obs_std_min: f64,
    pub obs_std_slope: f64,
    pub w_dist: f64,
    pub w_entropy: f64,
    pub goal_radius: f64,
    /// Spread of the initial belief (and of the true start state) around `start`.
    pub initial_std: f64,
    pub max_steps: u32,
}

impl Default for LightDarkConfig {
    fn default() -> Self {
        Self {
            arena_min: [0.0, 0.0],
            arena_max: [10.0, 10.0],
            start: [0.5, 5.0],
            goal: [9.0, 5.0],
            beacons: vec![[3.0, 2.0], [3.0, 8.0]],
            process_std: 0.1,
            obs_std_min: 0.05,
            obs_std_slope: 0.3,
            w_dist: 1.0,
            w_entropy: 0.5,
            goal_radius: 0.5,
            initial_std: 0.5,
            max_steps: 40,
        }
    }
}

impl LightDarkConfig {
    pub fn validate(&self) -> Result<(), LightDarkError> {
        for (name, v) in [
            ("process_std", self.process_std),
            ("obs_std_min", self.obs_std_min),
            ("goal_radius", self.goal_radius),
        ] {
            if !(v > 0.0) {
                return Err(LightDarkError::NonPositive(name));
            }
        }
        for (name, v) in [
            ("obs_std_slope", self.obs_std_slope),
            ("w_dist", self.w_dist),
            ("w_entropy", self.w_entropy),
            ("initial_std", self.initial_std),
        ] {
            if !(v >= 0.0) {
                return Err(LightDarkError::Negative(name));
            }
        }
        if self.max_steps == 0 {
            return Err(LightDarkError::NonPositive("max_steps"));
        }
        if (0..2).any(|i| !(self.arena_max[i] > self.arena_min[i])) {
            return Err(LightDarkError::EmptyArena);
        }
        for b in &self.beacons {
            if !self.inside(b) {
                return Err(LightDarkError::BeaconOutside(*b));
            }
        }
        Ok(())
    }

    fn inside(&self, p: &Point) -> bool {
        (0..2).all(|i| p[i] >= self.arena_min[i] && p[i] <= self.arena_max[i])
    }
}

/// Unit compass moves (E, NE, N, NW, W, SW, S, SE) followed by "stay".
pub fn compass_actions() -> Vec<Point> {
    let d = std::f64::consts::FRAC_1_SQRT_2;
    vec![
        [1.0, 0.0],
        [d, d],
        [0.0, 1.0],
        [-d, d],
        [-1.0, 0.0],
        [-d, -d],
        [0.0, -1.0],
        [d, -d],
        [0.0, 0.0],
    ]
}

#[derive(Debug, Clone)]
pub struct LightDark {
    cfg: LightDarkConfig,
    actions: Vec<Point>,
}

impl LightDark {
    pub fn new(cfg: LightDarkConfig) -> Result<Self, LightDarkError> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            actions: compass_actions(),
        })
    }

    pub fn config(&self) -> &LightDarkConfig {
        &self.cfg
    }

    fn clamp(&self, p: Point) -> Point {
        std::array::from_fn(|i| p[i].clamp(self.cfg.arena_min[i], self.cfg.arena_max[i]))
    }

    /// Observation noise standard deviation at `s`.
    pub fn obs_std(&self, s: &Point) -> f64 {
        let nearest = self
            .cfg
            .beacons
            .iter()
            .map(|b| distance(s, b))
            .fold(f64::INFINITY, f64::min);
        let nearest = if nearest.is_finite() { nearest } else { 0.0 };
        self.cfg.obs_std_min + self.cfg.obs_std_slope * nearest
    }

    /// Draw `m` particles around the start position.
    pub fn initial_belief<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> ParticleBelief<Point> {
        let particles = (0..m).map(|_| self.sample_start(rng)).collect();
        ParticleBelief::new(particles).expect("m > 0")
    }

    /// A start state drawn from the same distribution as the initial belief.
    pub fn sample_start<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let noise = gaussian2(self.cfg.initial_std, rng);
        self.clamp([self.cfg.start[0] + noise[0], self.cfg.start[1] + noise[1]])
    }

    /// Belief entropy term of the reward.
    pub fn entropy(
        &self,
        step: &BeliefStep<'_, Point, Point, Point>,
    ) -> Result<f64, PomdpError> {
        boers_entropy_weighted(
            self,
            step.prior,
            step.action,
            step.propagated.particles(),
            step.obs_loglik,
        )
    }
}

fn gaussian2<R: Rng + ?Sized>(std: f64, rng: &mut R) -> Point {
    if std == 0.0 {
        return [0.0, 0.0];
    }
    let x: f64 = StandardNormal.sample(rng);
    let y: f64 = StandardNormal.sample(rng);
    [std * x, std * y]
}

impl GenerativeModel for LightDark {
    type State = Point;
    type Action = Point;
    type Observation = Point;

    fn sample_transition<R: Rng + ?Sized>(&self, s: &Point, a: &Point, rng: &mut R) -> Point {
        let e = gaussian2(self.cfg.process_std, rng);
        self.clamp([s[0] + a[0] + e[0], s[1] + a[1] + e[1]])
    }

    // Gaussian around the clamped mode; mass piled onto the walls by the
    // clamp is not represented.
    fn transition_logdensity(&self, s: &Point, a: &Point, next: &Point) -> f64 {
        isotropic_normal_logpdf(next, &self.transition_mode(s, a), self.cfg.process_std)
    }

    fn transition_mode(&self, s: &Point, a: &Point) -> Point {
        self.clamp([s[0] + a[0], s[1] + a[1]])
    }

    fn sample_observation<R: Rng + ?Sized>(&self, s: &Point, rng: &mut R) -> Point {
        let v = gaussian2(self.obs_std(s), rng);
        [s[0] + v[0], s[1] + v[1]]
    }

    fn observation_logdensity(&self, s: &Point, o: &Point) -> f64 {
        isotropic_normal_logpdf(o, s, self.obs_std(s))
    }

    fn reward(&self, step: &BeliefStep<'_, Point, Point, Point>) -> f64 {
        let particles = step.posterior.particles();
        let mean_dist = particles
            .iter()
            .map(|p| distance(p, &self.cfg.goal))
            .sum::<f64>()
            / particles.len() as f64;
        let mut r = -self.cfg.w_dist * mean_dist;
        if self.cfg.w_entropy != 0.0 {
            // The filter only reaches the reward after a successful reweighting,
            // so the estimate cannot fail here.
            let h = self.entropy(step).unwrap_or(0.0);
            r -= self.cfg.w_entropy * h;
        }
        r
    }

    fn action_space(&self) -> ActionSpace<'_, Point> {
        ActionSpace::Discrete(&self.actions)
    }

    /// Compass move best aligned with the direction from the belief mean to
    /// the goal; "stay" once the mean is inside the goal region.
    fn default_action<R: Rng + ?Sized>(&self, b: &ParticleBelief<Point>, _rng: &mut R) -> Point {
        let mean = b.mean();
        let dir = [self.cfg.goal[0] - mean[0], self.cfg.goal[1] - mean[1]];
        if distance(&mean, &self.cfg.goal) <= self.cfg.goal_radius {
            return [0.0, 0.0];
        }
        let mut best = self.actions[0];
        let mut best_dot = f64::NEG_INFINITY;
        for a in &self.actions {
            let dot = a[0] * dir[0] + a[1] * dir[1];
            if dot > best_dot {
                best_dot = dot;
                best = *a;
            }
        }
        best
    }

    fn is_terminal(&self, b: &ParticleBelief<Point>) -> bool {
        distance(&b.mean(), &self.cfg.goal) <= self.cfg.goal_radius
    }
}
