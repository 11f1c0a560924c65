//! Small linear-Gaussian POMDP used as a test bed: `s' = s + a + ε`,
//! `o = s' + ν`, isotropic Gaussian noise in `D` dimensions.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::numeric::{isotropic_normal_logpdf, squared_distance};
use crate::pomdp::{ActionSpace, BeliefStep, GenerativeModel, ParticleBelief};

#[derive(Debug, Clone)]
enum Actions<const D: usize> {
    Discrete(Vec<[f64; D]>),
    Box { lo: f64, hi: f64 },
}

/// Reward is `offset − scale · mean‖s' − target‖²` over posterior particles.
#[derive(Debug, Clone)]
pub struct LinearGaussian<const D: usize> {
    pub process_std: f64,
    pub obs_std: f64,
    pub target: [f64; D],
    pub reward_scale: f64,
    pub reward_offset: f64,
    pub terminal_radius: Option<f64>,
    actions: Actions<D>,
}

impl<const D: usize> LinearGaussian<D> {
    pub fn new(process_std: f64, obs_std: f64) -> Self {
        Self {
            process_std,
            obs_std,
            target: [0.0; D],
            reward_scale: 1.0,
            reward_offset: 0.0,
            terminal_radius: None,
            actions: Actions::Discrete(vec![[0.0; D]]),
        }
    }

    pub fn with_actions(mut self, actions: Vec<[f64; D]>) -> Self {
        assert!(!actions.is_empty());
        self.actions = Actions::Discrete(actions);
        self
    }

    /// Continuous actions drawn uniformly from `[lo, hi]^D`.
    pub fn with_continuous_actions(mut self, lo: f64, hi: f64) -> Self {
        self.actions = Actions::Box { lo, hi };
        self
    }

    pub fn with_target(mut self, target: [f64; D]) -> Self {
        self.target = target;
        self
    }

    pub fn with_reward(mut self, scale: f64, offset: f64) -> Self {
        self.reward_scale = scale;
        self.reward_offset = offset;
        self
    }

    pub fn with_terminal_radius(mut self, radius: f64) -> Self {
        self.terminal_radius = Some(radius);
        self
    }

    fn gaussian<R: Rng + ?Sized>(std: f64, rng: &mut R) -> [f64; D] {
        let mut out = [0.0; D];
        if std > 0.0 && std.is_finite() {
            for v in &mut out {
                let z: f64 = StandardNormal.sample(rng);
                *v = std * z;
            }
        }
        out
    }
}

impl<const D: usize> GenerativeModel for LinearGaussian<D> {
    type State = [f64; D];
    type Action = [f64; D];
    type Observation = [f64; D];

    fn sample_transition<R: Rng + ?Sized>(&self, s: &[f64; D], a: &[f64; D], rng: &mut R) -> [f64; D] {
        let noise = Self::gaussian(self.process_std, rng);
        std::array::from_fn(|i| s[i] + a[i] + noise[i])
    }

    fn transition_logdensity(&self, s: &[f64; D], a: &[f64; D], next: &[f64; D]) -> f64 {
        isotropic_normal_logpdf(next, &self.transition_mode(s, a), self.process_std)
    }

    fn transition_mode(&self, s: &[f64; D], a: &[f64; D]) -> [f64; D] {
        std::array::from_fn(|i| s[i] + a[i])
    }

    fn sample_observation<R: Rng + ?Sized>(&self, s: &[f64; D], rng: &mut R) -> [f64; D] {
        let noise = Self::gaussian(self.obs_std, rng);
        std::array::from_fn(|i| s[i] + noise[i])
    }

    fn observation_logdensity(&self, s: &[f64; D], o: &[f64; D]) -> f64 {
        isotropic_normal_logpdf(o, s, self.obs_std)
    }

    fn reward(&self, step: &BeliefStep<'_, [f64; D], [f64; D], [f64; D]>) -> f64 {
        if self.reward_scale == 0.0 {
            return self.reward_offset;
        }
        let particles = step.posterior.particles();
        let mean_sq = particles
            .iter()
            .map(|p| squared_distance(p, &self.target))
            .sum::<f64>()
            / particles.len() as f64;
        self.reward_offset - self.reward_scale * mean_sq
    }

    fn action_space(&self) -> ActionSpace<'_, [f64; D]> {
        match &self.actions {
            Actions::Discrete(a) => ActionSpace::Discrete(a),
            Actions::Box { .. } => ActionSpace::Continuous,
        }
    }

    fn sample_action<R: Rng + ?Sized>(&self, _b: &ParticleBelief<[f64; D]>, rng: &mut R) -> [f64; D] {
        match &self.actions {
            Actions::Discrete(a) => a[rng.random_range(0..a.len())],
            Actions::Box { lo, hi } => std::array::from_fn(|_| rng.random_range(*lo..=*hi)),
        }
    }

    fn is_terminal(&self, b: &ParticleBelief<[f64; D]>) -> bool {
        match self.terminal_radius {
            Some(r) => squared_distance(&b.mean(), &self.target) <= r * r,
            None => false,
        }
    }
}
