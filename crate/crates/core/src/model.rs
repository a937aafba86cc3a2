//! The contract a sampleable problem satisfies: exact prior draws, a
//! prior-invariant perturbation, and a log-likelihood.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Deref, DerefMut};

use rand::Rng;

use crate::error::Error;

/// A point in parameter space.
///
/// The dimension is fixed by the problem and shared by every particle and
/// saved sample of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Self(values)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Deref for ParamVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ParamVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(values: Vec<f64>) -> Self {
        Self::new(values)
    }
}

/// A log-likelihood paired with a uniform tiebreak.
///
/// Values compare by `log_l` first and by `tiebreak` second, so likelihood
/// plateaus still have well-defined quantiles.
#[derive(Clone, Copy, Debug)]
pub struct LikelihoodValue {
    pub log_l: f64,
    pub tiebreak: f64,
}

impl LikelihoodValue {
    /// The cutoff of the prior level. Every finite likelihood exceeds it.
    pub const FLOOR: LikelihoodValue = LikelihoodValue {
        log_l: f64::NEG_INFINITY,
        tiebreak: 0.0,
    };

    pub fn new(log_l: f64, tiebreak: f64) -> Self {
        Self { log_l, tiebreak }
    }

    /// Attach a fresh uniform tiebreak to `log_l`.
    pub fn with_random_tiebreak<R: Rng + ?Sized>(log_l: f64, rng: &mut R) -> Self {
        Self {
            log_l,
            tiebreak: rng.random::<f64>(),
        }
    }
}

impl PartialEq for LikelihoodValue {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for LikelihoodValue {}

impl PartialOrd for LikelihoodValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for LikelihoodValue {
    fn cmp(&self, other: &Self) -> Ordering {
        self.log_l
            .total_cmp(&other.log_l)
            .then_with(|| self.tiebreak.total_cmp(&other.tiebreak))
    }
}

impl fmt::Display for LikelihoodValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (tiebreak {})", self.log_l, self.tiebreak)
    }
}

/// A problem the samplers can explore.
///
/// Implementations must be immutable after construction: engines running on
/// separate threads share one model, while each engine owns its own random
/// stream.
pub trait Model: Send + Sync {
    fn dimension(&self) -> usize;

    /// An exact draw from the prior.
    fn from_prior<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamVector;

    /// Perturb `theta` in place and return the log of the Metropolis
    /// correction. Accepting with probability `min(1, exp(correction))`
    /// leaves the prior invariant; proposals outside the prior support
    /// return `f64::NEG_INFINITY`.
    fn perturb<R: Rng + ?Sized>(&self, theta: &mut ParamVector, rng: &mut R) -> f64;

    /// Natural-log likelihood at a point inside the prior support.
    fn log_likelihood(&self, theta: &[f64]) -> f64;
}

/// Evaluate the likelihood and attach a tiebreak, rejecting non-finite
/// results.
pub fn evaluate<M, R>(model: &M, theta: &ParamVector, rng: &mut R) -> Result<LikelihoodValue, Error>
where
    M: Model + ?Sized,
    R: Rng + ?Sized,
{
    let log_l = model.log_likelihood(theta);
    if !log_l.is_finite() {
        return Err(Error::NonFiniteLikelihood {
            log_l,
            theta: theta.to_vec(),
        });
    }
    Ok(LikelihoodValue::with_random_tiebreak(log_l, rng))
}
