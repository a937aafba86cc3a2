//! Classic nested sampling driven by MCMC: the worst of `N` live particles
//! dies, and a copy of a random survivor is evolved under the new likelihood
//! constraint to replace it.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{evaluate, LikelihoodValue, Model, ParamVector};
use crate::postprocess::{log_add_exp, log_sub_exp, log_sum_exp};
use crate::rng::seeded;

/// Iterations per particle, so a run ends at `ln X = -100`.
pub const ITERATIONS_PER_PARTICLE: usize = 100;

#[derive(Clone, Debug, PartialEq)]
pub struct ClassicConfig {
    pub particle_count: usize,
    /// Metropolis steps per replacement.
    pub mcmc_steps: usize,
    pub iteration_count: usize,
    pub seed: u64,
    /// Draw each shrinkage from `Beta(N, 1)` instead of using `ln X_k = -k/N`.
    pub stochastic_x: bool,
}

impl ClassicConfig {
    /// Settings that reach `ln X = -100` and spend about `budget`
    /// likelihood evaluations after initialisation.
    pub fn for_budget(particle_count: usize, budget: u64, seed: u64) -> Self {
        let iteration_count = ITERATIONS_PER_PARTICLE * particle_count.max(1);
        let mcmc_steps = (budget / iteration_count as u64).max(1) as usize;
        Self {
            particle_count,
            mcmc_steps,
            iteration_count,
            seed,
            stochastic_x: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.particle_count == 0 || self.mcmc_steps == 0 || self.iteration_count == 0 {
            return Err(Error::Config(
                "particle_count, mcmc_steps and iteration_count must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Likelihood evaluations a run makes.
    pub fn cost(&self) -> u64 {
        self.particle_count as u64 + self.iteration_count as u64 * self.mcmc_steps as u64
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeadPoint {
    pub log_x: f64,
    pub likelihood: LikelihoodValue,
}

impl DeadPoint {
    pub fn log_l(&self) -> f64 {
        self.likelihood.log_l
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassicResult {
    pub dead: Vec<DeadPoint>,
    /// Likelihoods of the particles still alive at the end.
    pub live: Vec<LikelihoodValue>,
    pub log_z: f64,
    pub information: f64,
    pub likelihood_calls: u64,
}

struct Live {
    theta: ParamVector,
    likelihood: LikelihoodValue,
}

/// Run classic nested sampling on `model`.
pub fn run_classic<M: Model>(model: &M, config: &ClassicConfig) -> Result<ClassicResult> {
    config.validate()?;
    let mut rng = seeded(config.seed);
    let mut live = Vec::with_capacity(config.particle_count);
    for _ in 0..config.particle_count {
        let theta = model.from_prior(&mut rng);
        let likelihood = evaluate(model, &theta, &mut rng)?;
        live.push(Live { theta, likelihood });
    }
    let mut calls = config.particle_count as u64;
    let mut scratch = ParamVector::new(vec![0.0; model.dimension()]);
    let n = live.len();

    let mut log_x = 0.0;
    let mut dead = Vec::with_capacity(config.iteration_count);
    for k in 1..=config.iteration_count {
        let worst = worst_index(live.iter().map(|p| p.likelihood));
        let threshold = live[worst].likelihood;
        log_x = if config.stochastic_x {
            log_x + rng.random::<f64>().ln() / n as f64
        } else {
            -(k as f64) / n as f64
        };
        dead.push(DeadPoint {
            log_x,
            likelihood: threshold,
        });

        if n > 1 {
            let mut source = rng.random_range(0..n - 1);
            if source >= worst {
                source += 1;
            }
            let (theta, likelihood) = (live[source].theta.clone(), live[source].likelihood);
            live[worst].theta = theta;
            live[worst].likelihood = likelihood;
        }
        let particle = &mut live[worst];
        for _ in 0..config.mcmc_steps {
            calls += 1;
            scratch.copy_from_slice(&particle.theta);
            let log_correction = model.perturb(&mut scratch, &mut rng);
            if log_correction == f64::NEG_INFINITY
                || (log_correction < 0.0 && rng.random::<f64>() >= log_correction.exp())
            {
                continue;
            }
            let proposed = evaluate(model, &scratch, &mut rng)?;
            if proposed > threshold {
                std::mem::swap(&mut particle.theta, &mut scratch);
                particle.likelihood = proposed;
            }
        }
    }

    let live: Vec<LikelihoodValue> = live.into_iter().map(|p| p.likelihood).collect();
    let (log_z, information) = integrate(&dead, &live);
    Ok(ClassicResult {
        dead,
        live,
        log_z,
        information,
        likelihood_calls: calls,
    })
}

fn worst_index(values: impl Iterator<Item = LikelihoodValue>) -> usize {
    values
        .enumerate()
        .min_by(|a, b| a.1.cmp(&b.1))
        .map(|(i, _)| i)
        .expect("at least one live particle")
}

/// Log prior-mass widths of the dead points under the trapezoid rule,
/// followed by the width given to each live particle. The widths partition
/// `[0, 1]`.
pub fn log_widths(dead: &[DeadPoint], live_count: usize) -> Vec<f64> {
    let k = dead.len();
    let x = |i: usize| if i == 0 { 0.0 } else { dead[i - 1].log_x };
    let mut widths = Vec::with_capacity(k + live_count);
    for i in 1..=k {
        let w = if k == 1 {
            log_sub_exp(0.0, x(1))
        } else if i == 1 {
            // the whole first interval plus half the next
            log_add_exp(
                log_sub_exp(0.0, x(1)),
                log_sub_exp(x(1), x(2)) - std::f64::consts::LN_2,
            )
        } else if i == k {
            log_sub_exp(x(k - 1), x(k)) - std::f64::consts::LN_2
        } else {
            log_sub_exp(x(i - 1), x(i + 1)) - std::f64::consts::LN_2
        };
        widths.push(w);
    }
    let remainder = x(k) - (live_count.max(1) as f64).ln();
    widths.extend(std::iter::repeat_n(remainder, live_count));
    widths
}

/// ln Z and H from the dead points and the final live particles.
pub fn integrate(dead: &[DeadPoint], live: &[LikelihoodValue]) -> (f64, f64) {
    let widths = log_widths(dead, live.len());
    let log_l: Vec<f64> = dead
        .iter()
        .map(DeadPoint::log_l)
        .chain(live.iter().map(|l| l.log_l))
        .collect();
    let terms: Vec<f64> = log_l.iter().zip(&widths).map(|(l, w)| l + w).collect();
    let log_z = log_sum_exp(terms.iter().copied());
    let information = terms
        .iter()
        .zip(&log_l)
        .map(|(t, l)| {
            let w = (t - log_z).exp();
            if w > 0.0 {
                w * (l - log_z)
            } else {
                0.0
            }
        })
        .sum();
    (log_z, information)
}
