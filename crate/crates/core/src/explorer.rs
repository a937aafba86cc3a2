//! Joint exploration of `(theta, j)` over the mixture of constrained
//! distributions.
//!
//! The target is `p(theta, j) ∝ (w_j / X_j) π(theta) 1[L(theta) > L*_j]`.
//! Each step moves one particle in `theta` (prior-invariant proposal under the
//! hard constraint of its level) and in `j` (Metropolis on the mixture
//! weights, biased toward under-visited levels), records the visit, refreshes
//! the level mass estimates, and creates a new level once enough likelihoods
//! have been gathered above the current top.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::levels::{LevelSet, LikelihoodBuffer};
use crate::model::{evaluate, LikelihoodValue, Model, ParamVector};
use crate::rng::{seeded, SamplerRng};

/// Sampler settings. The defaults are the standard single-particle settings
/// with a budget of 10^7 likelihood evaluations.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub particle_count: usize,
    /// Likelihoods above the top level needed to create a new level.
    pub new_level_interval: usize,
    /// Steps between saved samples.
    pub save_interval: u64,
    /// Maximum number of levels, counting the prior level.
    pub max_levels: usize,
    /// Regularisation count `C` for the mass estimates and the enforcement
    /// factor.
    pub regularisation: f64,
    /// Backtracking scale `Λ` of the exponential weights.
    pub lambda: f64,
    /// Strength `β` of the push toward the target level weights.
    pub beta: f64,
    pub likelihood_budget: u64,
    pub seed: u64,
    /// A particle is stuck while `j < J - prune_distance * Λ`.
    pub prune_distance: f64,
    /// Consecutive stuck checkpoints before a particle is deleted.
    pub prune_window: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            particle_count: 1,
            new_level_interval: 10_000,
            save_interval: 10_000,
            max_levels: 100,
            regularisation: 1_000.0,
            lambda: 10.0,
            beta: 10.0,
            likelihood_budget: 10_000_000,
            seed: 0,
            prune_distance: 5.0,
            prune_window: 10,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.particle_count == 0 {
            return fail("particle_count must be positive");
        }
        if self.new_level_interval == 0 {
            return fail("new_level_interval must be positive");
        }
        if self.save_interval == 0 {
            return fail("save_interval must be positive");
        }
        if self.max_levels == 0 {
            return fail("max_levels must be positive");
        }
        if self.likelihood_budget == 0 {
            return fail("likelihood_budget must be positive");
        }
        if !(self.regularisation > 0.0 && self.regularisation.is_finite()) {
            return fail("C must be positive");
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return fail("lambda must be positive");
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return fail("beta must be non-negative");
        }
        if !(self.prune_distance > 0.0) || self.prune_window == 0 {
            return fail("pruning distance and window must be positive");
        }
        Ok(())
    }
}

/// Mixture weights over the levels, summing to one.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    /// Normalises `weights`, which must be non-negative with a positive sum.
    pub fn from_vec(mut weights: Vec<f64>) -> Self {
        let total: f64 = weights.iter().sum();
        assert!(total > 0.0 && weights.iter().all(|w| *w >= 0.0));
        weights.iter_mut().for_each(|w| *w /= total);
        Self(weights)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl std::ops::Index<usize> for WeightVector {
    type Output = f64;

    fn index(&self, j: usize) -> &f64 {
        &self.0[j]
    }
}

/// Weights over levels `0..=top`: `w_j ∝ exp((j - top) / Λ)` while levels
/// are still being created, uniform once the maximum has been reached.
pub fn level_weights(top: usize, lambda: f64, max_reached: bool) -> WeightVector {
    let weights = (0..=top)
        .map(|j| {
            if max_reached {
                1.0
            } else {
                ((j as f64 - top as f64) / lambda).exp()
            }
        })
        .collect();
    WeightVector::from_vec(weights)
}

/// Log of the enforcement factor for a move from level `j` to level `k`:
/// `β [ln((n_j + C)/(⟨n_j⟩ + C)) - ln((n_k + C)/(⟨n_k⟩ + C))]`.
pub fn log_enforcement(
    visits_j: f64,
    expected_j: f64,
    visits_k: f64,
    expected_k: f64,
    c: f64,
    beta: f64,
) -> f64 {
    if beta == 0.0 {
        return 0.0;
    }
    let from = ((visits_j + c) / (expected_j + c)).ln();
    let to = ((visits_k + c) / (expected_k + c)).ln();
    beta * (from - to)
}

/// The multiplicative enforcement factor `α_enforce`.
pub fn enforcement_factor(
    visits_j: f64,
    expected_j: f64,
    visits_k: f64,
    expected_k: f64,
    c: f64,
    beta: f64,
) -> f64 {
    log_enforcement(visits_j, expected_j, visits_k, expected_k, c, beta).exp()
}

#[derive(Clone, Debug)]
pub struct Particle {
    pub id: usize,
    pub theta: ParamVector,
    pub level: usize,
    pub likelihood: LikelihoodValue,
    /// Consecutive checkpoints spent far below the top level.
    pub stuck_checkpoints: usize,
}

/// A thinned sample saved during the run.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleRecord {
    pub particle: usize,
    pub theta: ParamVector,
    pub likelihood: LikelihoodValue,
    pub level: usize,
}

impl SampleRecord {
    pub fn log_l(&self) -> f64 {
        self.likelihood.log_l
    }
}

/// Update the stuck counters at a checkpoint and delete particles that have
/// stayed below `top - distance * Λ` for `window` consecutive checkpoints.
/// The last particle is never deleted. Returns the number removed.
pub fn prune_stuck(
    particles: &mut Vec<Particle>,
    top: usize,
    lambda: f64,
    distance: f64,
    window: usize,
) -> usize {
    if particles.len() <= 1 {
        return 0;
    }
    let threshold = top as f64 - distance * lambda;
    for p in particles.iter_mut() {
        if (p.level as f64) < threshold {
            p.stuck_checkpoints += 1;
        } else {
            p.stuck_checkpoints = 0;
        }
    }
    let mut removed = 0;
    let mut i = 0;
    while i < particles.len() {
        if particles.len() > 1 && particles[i].stuck_checkpoints >= window {
            particles.remove(i);
            removed += 1;
        } else {
            i += 1;
        }
    }
    removed
}

/// Counters describing a finished (or in-progress) run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunSummary {
    pub steps: u64,
    /// Proposals charged against the likelihood budget.
    pub evaluations: u64,
    /// Calls actually made to the model's likelihood, including the
    /// initial draws.
    pub likelihood_calls: u64,
    pub levels: usize,
    pub counter_resets: usize,
    pub pruned: usize,
    pub samples: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepOutcome {
    /// The likelihood budget is spent; nothing happened.
    Complete,
    Advanced,
    /// The step saved a sample, now last in [`Engine::samples`].
    Saved,
}

/// One diffusive nested sampling run.
pub struct Engine<'m, M: Model> {
    model: &'m M,
    config: RunConfig,
    levels: LevelSet,
    buffer: LikelihoodBuffer,
    particles: Vec<Particle>,
    weights: WeightVector,
    log_weights: Vec<f64>,
    rng: SamplerRng,
    scratch: ParamVector,
    next_particle: usize,
    max_reached: bool,
    frozen: bool,
    summary: RunSummary,
    samples: Vec<SampleRecord>,
}

impl<'m, M: Model> Engine<'m, M> {
    /// Start a run: draw every particle from the prior at level 0.
    pub fn new(model: &'m M, config: RunConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = seeded(config.seed);
        let mut particles = Vec::with_capacity(config.particle_count);
        for id in 0..config.particle_count {
            let theta = model.from_prior(&mut rng);
            let likelihood = evaluate(model, &theta, &mut rng)?;
            particles.push(Particle {
                id,
                theta,
                level: 0,
                likelihood,
                stuck_checkpoints: 0,
            });
        }
        let max_reached = config.max_levels <= 1;
        let levels = LevelSet::new();
        let weights = level_weights(0, config.lambda, max_reached);
        let mut engine = Self {
            model,
            buffer: LikelihoodBuffer::new(config.new_level_interval),
            scratch: ParamVector::new(vec![0.0; model.dimension()]),
            summary: RunSummary {
                likelihood_calls: config.particle_count as u64,
                levels: 1,
                ..RunSummary::default()
            },
            config,
            levels,
            particles,
            log_weights: Vec::new(),
            weights,
            rng,
            next_particle: 0,
            max_reached,
            frozen: false,
            samples: Vec::new(),
        };
        engine.install_weights();
        Ok(engine)
    }

    /// Explore a fixed ladder with fixed weights: no level creation and no
    /// revision of the mass estimates. Particles start from the prior at
    /// level 0.
    pub fn with_frozen_levels(
        model: &'m M,
        config: RunConfig,
        levels: LevelSet,
        weights: WeightVector,
    ) -> Result<Self> {
        if weights.len() != levels.len() {
            return Err(Error::Config("one weight per level required".into()));
        }
        let mut engine = Self::new(model, config)?;
        engine.levels = levels;
        engine.summary.levels = engine.levels.len();
        engine.weights = weights;
        engine.max_reached = true;
        engine.frozen = true;
        engine.install_weights();
        Ok(engine)
    }

    fn install_weights(&mut self) {
        self.log_weights = self.weights.as_slice().iter().map(|w| w.ln()).collect();
        self.levels.set_weights(&self.weights);
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn levels(&self) -> &LevelSet {
        &self.levels
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    pub fn samples(&self) -> &[SampleRecord] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<SampleRecord> {
        self.samples
    }

    pub fn summary(&self) -> &RunSummary {
        &self.summary
    }

    pub fn max_levels_reached(&self) -> bool {
        self.max_reached
    }

    pub fn budget_exhausted(&self) -> bool {
        self.summary.evaluations >= self.config.likelihood_budget
    }

    /// Advance one step.
    pub fn step(&mut self) -> Result<StepOutcome> {
        if self.budget_exhausted() {
            return Ok(StepOutcome::Complete);
        }
        let idx = self.next_particle % self.particles.len();
        self.next_particle = idx + 1;

        if self.rng.random::<bool>() {
            self.update_theta(idx)?;
            self.update_index(idx);
        } else {
            self.update_index(idx);
            self.update_theta(idx)?;
        }

        let (level, likelihood) = {
            let p = &self.particles[idx];
            (p.level, p.likelihood)
        };
        debug_assert!(
            likelihood > self.levels.cutoff(level),
            "particle below its level cutoff"
        );
        self.levels.record_visit(level, likelihood);
        if !self.frozen {
            self.levels
                .revise_after_visit(level, self.config.regularisation);
            self.maybe_create_level();
        }

        self.summary.steps += 1;
        if self.summary.steps.is_multiple_of(self.config.save_interval) {
            self.checkpoint(idx);
            return Ok(StepOutcome::Saved);
        }
        Ok(StepOutcome::Advanced)
    }

    /// Run until the budget is spent, handing each saved sample to
    /// `on_sample` as it is produced.
    pub fn run_with<F>(&mut self, mut on_sample: F) -> Result<RunSummary>
    where
        F: FnMut(&SampleRecord) -> Result<()>,
    {
        while !self.budget_exhausted() {
            if self.step()? == StepOutcome::Saved {
                on_sample(self.samples.last().expect("sample just saved"))?;
            }
        }
        Ok(self.summary.clone())
    }

    pub fn run(&mut self) -> Result<RunSummary> {
        self.run_with(|_| Ok(()))
    }

    fn update_theta(&mut self, idx: usize) -> Result<()> {
        let particle = &mut self.particles[idx];
        self.scratch.copy_from_slice(&particle.theta);
        let log_correction = self.model.perturb(&mut self.scratch, &mut self.rng);
        self.summary.evaluations += 1;

        let prior_ok = if log_correction >= 0.0 {
            true
        } else if log_correction == f64::NEG_INFINITY {
            false
        } else {
            self.rng.random::<f64>() < log_correction.exp()
        };
        if prior_ok {
            let proposed = evaluate(self.model, &self.scratch, &mut self.rng)?;
            self.summary.likelihood_calls += 1;
            if proposed > self.levels.cutoff(particle.level) {
                std::mem::swap(&mut particle.theta, &mut self.scratch);
                particle.likelihood = proposed;
            }
        }

        if !self.frozen && !self.max_reached && particle.likelihood > self.levels.top_cutoff() {
            self.buffer.record(particle.likelihood);
        }
        Ok(())
    }

    fn update_index(&mut self, idx: usize) {
        let top = self.levels.top();
        if top == 0 {
            return;
        }
        let particle = &self.particles[idx];
        let j = particle.level;

        let scale = (self.rng.random::<f64>() * 100f64.ln()).exp();
        let z: f64 = self.rng.sample(StandardNormal);
        let proposal = (j as f64 + scale * z).round();
        if proposal < 0.0 || proposal > top as f64 {
            return;
        }
        let k = proposal as usize;
        if k == j || particle.likelihood <= self.levels.cutoff(k) {
            return;
        }

        let mut log_accept =
            self.log_weights[k] - self.log_weights[j] + self.levels.log_x(j) - self.levels.log_x(k);
        log_accept += log_enforcement(
            self.levels.get(j).occupancy as f64,
            self.levels.expected_occupancy(j),
            self.levels.get(k).occupancy as f64,
            self.levels.expected_occupancy(k),
            self.config.regularisation,
            self.config.beta,
        );
        if log_accept >= 0.0 || self.rng.random::<f64>() < log_accept.exp() {
            self.particles[idx].level = k;
        }
    }

    fn maybe_create_level(&mut self) {
        if self.max_reached || !self.buffer.is_full() {
            return;
        }
        if self.levels.create_level(&mut self.buffer).is_none() {
            return;
        }
        self.summary.levels = self.levels.len();
        if self.levels.len() >= self.config.max_levels {
            self.max_reached = true;
            self.buffer.clear();
            self.levels.reset_counters();
            self.summary.counter_resets += 1;
        }
        self.weights = level_weights(self.levels.top(), self.config.lambda, self.max_reached);
        self.install_weights();
    }

    fn checkpoint(&mut self, idx: usize) {
        let p = &self.particles[idx];
        self.samples.push(SampleRecord {
            particle: p.id,
            theta: p.theta.clone(),
            likelihood: p.likelihood,
            level: p.level,
        });
        self.summary.samples = self.samples.len();
        if !self.max_reached && !self.frozen {
            let removed = prune_stuck(
                &mut self.particles,
                self.levels.top(),
                self.config.lambda,
                self.config.prune_distance,
                self.config.prune_window,
            );
            self.summary.pruned += removed;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levels::Level;
    use crate::problems::{AnalyticGaussian, TwinGaussian};
    use proptest::prelude::*;

    fn small_config(seed: u64) -> RunConfig {
        RunConfig {
            new_level_interval: 1_000,
            save_interval: 1_000,
            max_levels: 30,
            likelihood_budget: 200_000,
            seed,
            ..RunConfig::default()
        }
    }

    #[test]
    fn exponential_weights_example() {
        let w = level_weights(2, 10.0, false);
        let expected = [0.30061, 0.33223, 0.36716];
        for (a, b) in w.as_slice().iter().zip(expected) {
            assert!((a - b).abs() < 1e-5, "{a} vs {b}");
        }
        let sum: f64 = w.as_slice().iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_weights_once_max_reached() {
        let w = level_weights(99, 10.0, true);
        assert_eq!(w.len(), 100);
        assert!(w.as_slice().iter().all(|x| (x - 0.01).abs() < 1e-15));
    }

    #[test]
    fn consecutive_weight_ratio() {
        for lambda in [0.5, 3.0, 10.0, 40.0] {
            let w = level_weights(60, lambda, false);
            let target = (-1.0 / lambda).exp();
            for j in 0..60 {
                assert!((w[j] / w[j + 1] - target).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn enforcement_examples() {
        let a = enforcement_factor(100.0, 200.0, 300.0, 200.0, 0.0, 1.0);
        assert!((a - 1.0 / 3.0).abs() < 1e-12);
        let a10 = enforcement_factor(100.0, 200.0, 300.0, 200.0, 0.0, 10.0);
        assert!((a10 - 1.6935e-5).abs() < 1e-9);
        assert!((a10 - (1.0f64 / 3.0).powi(10)).abs() < 1e-15);
        assert_eq!(enforcement_factor(5.0, 1e6, 1e6, 5.0, 1000.0, 0.0), 1.0);
    }

    proptest! {
        #[test]
        fn enforcement_is_self_inverse(
            nj in 0f64..1e7, ej in 0f64..1e7, nk in 0f64..1e7, ek in 0f64..1e7,
            c in 1f64..1e4, beta in 0f64..20.0,
        ) {
            let forward = log_enforcement(nj, ej, nk, ek, c, beta);
            let back = log_enforcement(nk, ek, nj, ej, c, beta);
            prop_assert!((forward + back).abs() < 1e-12);
            let product = enforcement_factor(nj, ej, nk, ek, c, beta)
                * enforcement_factor(nk, ek, nj, ej, c, beta);
            prop_assert!((product - 1.0).abs() < 1e-12);
        }
    }

    fn particle(id: usize, level: usize) -> Particle {
        Particle {
            id,
            theta: ParamVector::new(vec![0.0]),
            level,
            likelihood: LikelihoodValue::new(0.0, 0.5),
            stuck_checkpoints: 0,
        }
    }

    #[test]
    fn particle_far_below_top_is_pruned() {
        let mut particles = vec![particle(0, 0), particle(1, 78)];
        for _ in 0..9 {
            assert_eq!(prune_stuck(&mut particles, 80, 10.0, 5.0, 10), 0);
        }
        assert_eq!(prune_stuck(&mut particles, 80, 10.0, 5.0, 10), 1);
        assert_eq!(particles.len(), 1);
        assert_eq!(particles[0].id, 1);
    }

    #[test]
    fn particle_near_top_is_kept() {
        let mut particles = vec![particle(0, 70), particle(1, 80)];
        for i in 0..200 {
            particles[0].level = 70 + (i % 11);
            assert_eq!(prune_stuck(&mut particles, 80, 10.0, 5.0, 10), 0);
        }
        assert_eq!(particles.len(), 2);
    }

    #[test]
    fn returning_particle_restarts_its_count() {
        let mut particles = vec![particle(0, 0), particle(1, 80)];
        for _ in 0..9 {
            prune_stuck(&mut particles, 80, 10.0, 5.0, 10);
        }
        particles[0].level = 75;
        prune_stuck(&mut particles, 80, 10.0, 5.0, 10);
        particles[0].level = 0;
        assert_eq!(prune_stuck(&mut particles, 80, 10.0, 5.0, 10), 0);
    }

    #[test]
    fn last_particle_is_never_pruned() {
        let mut single = vec![particle(0, 0)];
        for _ in 0..100 {
            assert_eq!(prune_stuck(&mut single, 80, 10.0, 5.0, 10), 0);
        }
        let mut both_stuck = vec![particle(0, 0), particle(1, 1)];
        let mut removed = 0;
        for _ in 0..100 {
            removed += prune_stuck(&mut both_stuck, 80, 10.0, 5.0, 10);
        }
        assert_eq!(removed, 1);
        assert_eq!(both_stuck.len(), 1);
    }

    #[test]
    fn prior_level_samples_the_prior() {
        // With a single level the particle only makes prior moves.
        let model = AnalyticGaussian::new(5, 0.1);
        let config = RunConfig {
            max_levels: 1,
            likelihood_budget: 1_000_000,
            save_interval: 1,
            ..RunConfig::default()
        };
        let mut engine = Engine::new(&model, config).unwrap();
        let (mut sum, mut sum_sq, mut n) = (0.0, 0.0, 0.0);
        while engine.step().unwrap() != StepOutcome::Complete {
            let x = engine.particles()[0].theta[0];
            sum += x;
            sum_sq += x * x;
            n += 1.0;
        }
        assert_eq!(engine.levels().len(), 1);
        let mean = sum / n;
        let var = sum_sq / n - mean * mean;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0 / 12.0).abs() < 0.003, "variance {var}");
    }

    #[test]
    fn one_level_per_interval_of_records() {
        let model = AnalyticGaussian::default();
        let config = small_config(3);
        let target = config.new_level_interval;
        let mut engine = Engine::new(&model, config).unwrap();
        let mut previous = 0;
        while engine.levels().len() == 1 {
            previous = engine.buffer.len();
            assert!(previous < target);
            engine.step().unwrap();
        }
        assert_eq!(previous, target - 1);
        assert_eq!(engine.levels().len(), 2);
        assert!((engine.levels().log_x(1) + 1.0).abs() < 0.1);
    }

    #[test]
    fn level_count_is_capped_and_counters_reset_once() {
        let model = AnalyticGaussian::default();
        let mut config = small_config(4);
        config.max_levels = 12;
        let mut engine = Engine::new(&model, config).unwrap();
        let mut reset_seen = false;
        while engine.step().unwrap() != StepOutcome::Complete {
            if engine.max_levels_reached() && !reset_seen {
                reset_seen = true;
                assert_eq!(engine.summary().counter_resets, 1);
                let levels = engine.levels();
                let top = levels.top();
                assert!(levels.levels().iter().map(|l| l.occupancy).sum::<u64>() <= 1);
                // Right after the reset every pair of untouched levels is balanced.
                let a = enforcement_factor(
                    levels.get(0).occupancy as f64,
                    levels.expected_occupancy(0),
                    levels.get(top).occupancy as f64,
                    levels.expected_occupancy(top),
                    1000.0,
                    10.0,
                );
                assert!((a - 1.0).abs() < 0.05);
                assert!(engine
                    .weights()
                    .as_slice()
                    .iter()
                    .all(|w| (w - 1.0 / 12.0).abs() < 1e-15));
            }
        }
        assert!(reset_seen);
        assert_eq!(engine.levels().len(), 12);
        assert_eq!(engine.summary().counter_resets, 1);
    }

    #[test]
    fn reset_leaves_estimates_alone() {
        let levels: Vec<Level> = (0..4)
            .map(|j| {
                let cutoff = if j == 0 {
                    LikelihoodValue::FLOOR
                } else {
                    LikelihoodValue::new(j as f64, 0.5)
                };
                Level::with_counters(cutoff, -(j as f64), 500 * (j as u64 + 1), 200, 77, 12.0)
            })
            .collect();
        let mut set = LevelSet::from_levels(levels).unwrap();
        set.revise_log_x(1000.0);
        let before: Vec<f64> = (0..4).map(|j| set.log_x(j)).collect();
        set.reset_counters();
        set.revise_log_x(1000.0);
        let after: Vec<f64> = (0..4).map(|j| set.log_x(j)).collect();
        assert_eq!(before, after);
        assert!(set.levels().iter().all(|l| l.occupancy == 0));
    }

    #[test]
    fn budget_and_sample_accounting() {
        let model = TwinGaussian::default();
        let config = RunConfig {
            likelihood_budget: 300_000,
            save_interval: 1_000,
            new_level_interval: 1_000,
            particle_count: 3,
            ..RunConfig::default()
        };
        let mut engine = Engine::new(&model, config.clone()).unwrap();
        let summary = engine.run().unwrap();
        assert_eq!(summary.evaluations, config.likelihood_budget);
        assert!(summary.likelihood_calls <= config.likelihood_budget + 3);
        assert_eq!(summary.steps, config.likelihood_budget);
        assert_eq!(summary.samples, 300);
        assert!(engine.levels().is_consistent());
        assert!(engine.step().unwrap() == StepOutcome::Complete);
    }

    #[test]
    fn every_particle_respects_its_level() {
        let model = TwinGaussian::default();
        let config = RunConfig {
            particle_count: 2,
            ..small_config(9)
        };
        let mut engine = Engine::new(&model, config).unwrap();
        while engine.step().unwrap() != StepOutcome::Complete {
            for p in engine.particles() {
                assert!(p.likelihood > engine.levels().cutoff(p.level));
                assert!(p.level <= engine.levels().top());
            }
        }
    }

    #[test]
    fn seeded_runs_repeat_exactly() {
        let model = TwinGaussian::default();
        let run = |seed| {
            let mut engine = Engine::new(&model, small_config(seed)).unwrap();
            engine.run().unwrap();
            (engine.levels().snapshot(), engine.into_samples())
        };
        let (levels_a, samples_a) = run(11);
        let (levels_b, samples_b) = run(11);
        let (levels_c, _) = run(12);
        assert_eq!(samples_a, samples_b);
        assert_eq!(levels_a.len(), levels_b.len());
        for (a, b) in levels_a.iter().zip(&levels_b) {
            assert_eq!(a.log_x.to_bits(), b.log_x.to_bits());
            assert_eq!(a.cutoff.log_l.to_bits(), b.cutoff.log_l.to_bits());
            assert_eq!((a.visits, a.exceeds), (b.visits, b.exceeds));
        }
        assert_ne!(
            levels_a.last().unwrap().cutoff.log_l,
            levels_c.last().unwrap().cutoff.log_l
        );
    }

    #[test]
    fn invalid_config_is_rejected() {
        let model = TwinGaussian::default();
        for bad in [
            RunConfig {
                particle_count: 0,
                ..RunConfig::default()
            },
            RunConfig {
                lambda: 0.0,
                ..RunConfig::default()
            },
            RunConfig {
                beta: -1.0,
                ..RunConfig::default()
            },
            RunConfig {
                regularisation: 0.0,
                ..RunConfig::default()
            },
        ] {
            assert!(matches!(Engine::new(&model, bad), Err(Error::Config(_))));
        }
    }
}
