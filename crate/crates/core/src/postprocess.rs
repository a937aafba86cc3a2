//! Turning saved samples and a finished ladder into evidence, posterior
//! weights and information.
//!
//! Each sample is bracketed by the two levels whose cutoffs sandwich its
//! likelihood and given an `X` drawn uniformly between their masses. Sorted
//! by `X`, the samples partition `[0, 1]` into cells with boundaries at the
//! midpoints between neighbours, and `Z = Σ L_i ΔX_i`. Repeating the random
//! assignment gives a spread for ln Z.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::explorer::SampleRecord;
use crate::levels::LevelSet;
use crate::rng::{derive_seed, seeded};

/// `ln(e^a + e^b)`.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `ln(e^a - e^b)` for `a >= b`.
pub fn log_sub_exp(a: f64, b: f64) -> f64 {
    if b == f64::NEG_INFINITY {
        return a;
    }
    if b >= a {
        return f64::NEG_INFINITY;
    }
    a + (-(b - a).exp()).ln_1p()
}

/// `ln Σ e^{x_i}`.
pub fn log_sum_exp(values: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values
        .into_iter()
        .map(|v| (v - max).exp())
        .sum::<f64>()
        .ln()
}

/// Prior-mass coordinates for a set of samples, in sample order.
#[derive(Clone, Debug, PartialEq)]
pub struct XAssignment {
    /// ln x for each sample.
    pub log_x: Vec<f64>,
    /// ln of the sandwiching interval `(lower, upper)` for each sample.
    pub intervals: Vec<(f64, f64)>,
}

impl XAssignment {
    pub fn len(&self) -> usize {
        self.log_x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_x.is_empty()
    }
}

/// Draw each sample's x uniformly between the masses of the levels that
/// sandwich its likelihood. Samples above the top level get `(0, X_J)`.
pub fn assign_x<R: Rng + ?Sized>(
    samples: &[SampleRecord],
    levels: &LevelSet,
    rng: &mut R,
) -> XAssignment {
    let mut log_x = Vec::with_capacity(samples.len());
    let mut intervals = Vec::with_capacity(samples.len());
    for sample in samples {
        let i = levels.containing_level(sample.likelihood);
        let upper = levels.log_x(i);
        let lower = if i == levels.top() {
            f64::NEG_INFINITY
        } else {
            levels.log_x(i + 1)
        };
        let u: f64 = rng.random();
        // x = X_lo + u (X_hi - X_lo), in logs relative to X_hi
        let x = upper + (u + (1.0 - u) * (lower - upper).exp()).ln();
        log_x.push(x.clamp(lower, upper));
        intervals.push((lower, upper));
    }
    XAssignment { log_x, intervals }
}

/// Sample indices ordered by decreasing x.
fn order_by_x(assignment: &XAssignment) -> Vec<usize> {
    let mut order: Vec<usize> = (0..assignment.len()).collect();
    order.sort_by(|&a, &b| assignment.log_x[b].total_cmp(&assignment.log_x[a]));
    order
}

/// ln of each sample's cell width, in sample order. Cells are bounded by the
/// midpoints between neighbours in x, with the outermost cells extended to
/// 1 and 0, so the widths sum to one.
pub fn log_widths(assignment: &XAssignment) -> Vec<f64> {
    let order = order_by_x(assignment);
    let n = order.len();
    let mut widths = vec![f64::NEG_INFINITY; n];
    let boundary = |i: usize| -> f64 {
        match i {
            0 => 0.0,
            i if i == n => f64::NEG_INFINITY,
            i => {
                log_add_exp(assignment.log_x[order[i - 1]], assignment.log_x[order[i]])
                    - std::f64::consts::LN_2
            }
        }
    };
    let mut upper = boundary(0);
    for i in 0..n {
        let lower = boundary(i + 1);
        widths[order[i]] = log_sub_exp(upper, lower);
        upper = lower;
    }
    widths
}

/// ln Z by summing likelihood times cell width.
pub fn log_evidence(assignment: &XAssignment, samples: &[SampleRecord]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::NoSamples);
    }
    debug_assert_eq!(assignment.len(), samples.len());
    let widths = log_widths(assignment);
    Ok(log_sum_exp(
        samples.iter().zip(&widths).map(|(s, w)| s.log_l() + w),
    ))
}

/// Normalised posterior weights, proportional to width times likelihood.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorWeights {
    pub weights: Vec<f64>,
    pub log_z: f64,
}

impl PosteriorWeights {
    /// Effective sample size `1 / Σ w_i²`.
    pub fn ess(&self) -> f64 {
        1.0 / self.weights.iter().map(|w| w * w).sum::<f64>()
    }
}

pub fn posterior_weights(
    assignment: &XAssignment,
    samples: &[SampleRecord],
) -> Result<PosteriorWeights> {
    let log_z = log_evidence(assignment, samples)?;
    let widths = log_widths(assignment);
    let mut weights: Vec<f64> = samples
        .iter()
        .zip(&widths)
        .map(|(s, w)| (s.log_l() + w - log_z).exp())
        .collect();
    // renormalise away rounding
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(PosteriorWeights { weights, log_z })
}

/// `H = Σ w_i (ln L_i - ln Z)`.
pub fn information(weights: &[f64], samples: &[SampleRecord], log_z: f64) -> f64 {
    weights
        .iter()
        .zip(samples)
        .filter(|(w, _)| **w > 0.0)
        .map(|(w, s)| w * (s.log_l() - log_z))
        .sum()
}

/// Spread of the evidence over repeated random X assignments.
#[derive(Clone, Debug, PartialEq)]
pub struct EvidenceSummary {
    pub log_z: f64,
    pub log_z_std: f64,
    pub information: f64,
    pub ess: f64,
    pub repetitions: usize,
    pub samples: usize,
}

/// Repeat the X assignment `repetitions` times with independent streams and
/// report the mean and standard deviation of ln Z, along with the mean
/// information and effective sample size.
///
/// The spread ignores the uncertainty in the level masses themselves, so it
/// understates the true run-to-run error.
pub fn evidence_error_bar<R: Rng + ?Sized>(
    samples: &[SampleRecord],
    levels: &LevelSet,
    repetitions: usize,
    rng: &mut R,
) -> Result<EvidenceSummary> {
    if repetitions < 2 {
        return Err(Error::TooFew {
            needed: 2,
            got: repetitions,
        });
    }
    if samples.is_empty() {
        return Err(Error::NoSamples);
    }
    let base: u64 = rng.random();
    let runs: Vec<(f64, f64, f64)> = (0..repetitions)
        .into_par_iter()
        .map(|rep| {
            let mut rng = seeded(derive_seed(base, rep as u64));
            let assignment = assign_x(samples, levels, &mut rng);
            let posterior = posterior_weights(&assignment, samples)?;
            let h = information(&posterior.weights, samples, posterior.log_z);
            Ok((posterior.log_z, h, posterior.ess()))
        })
        .collect::<Result<_>>()?;
    let m = repetitions as f64;
    let mean = runs.iter().map(|r| r.0).sum::<f64>() / m;
    let var = runs.iter().map(|r| (r.0 - mean).powi(2)).sum::<f64>() / (m - 1.0);
    Ok(EvidenceSummary {
        log_z: mean,
        log_z_std: var.sqrt(),
        information: runs.iter().map(|r| r.1).sum::<f64>() / m,
        ess: runs.iter().map(|r| r.2).sum::<f64>() / m,
        repetitions,
        samples: samples.len(),
    })
}

/// Draw `count` equally weighted samples by multinomial resampling.
pub fn resample_posterior<R: Rng + ?Sized>(
    samples: &[SampleRecord],
    weights: &[f64],
    count: usize,
    rng: &mut R,
) -> Result<Vec<SampleRecord>> {
    if samples.is_empty() {
        return Err(Error::NoSamples);
    }
    let index = WeightedIndex::new(weights)
        .map_err(|e| Error::Config(format!("invalid posterior weights: {e}")))?;
    Ok((0..count)
        .map(|_| samples[index.sample(rng)].clone())
        .collect())
}

/// Estimated ln X difference between each level and the one below it.
pub fn level_compressions(levels: &LevelSet) -> Vec<f64> {
    levels
        .levels()
        .windows(2)
        .map(|w| w[1].log_x - w[0].log_x)
        .collect()
}
