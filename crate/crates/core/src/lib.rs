//! Diffusive Nested Sampling.
//!
//! A particle (or several) explores a mixture of nested constrained
//! distributions, each enclosing about `e^-1` of the prior mass of the one
//! below it. The levels are built on the fly from the likelihoods the
//! particle visits, their masses are refined from exceedance counts, and the
//! saved samples are mapped onto prior mass to estimate the evidence and
//! posterior. A classic MCMC-driven nested sampler is included as a
//! baseline, along with a harness comparing the two.

pub mod bench;
pub mod classic;
pub mod cli;
pub mod error;
pub mod explorer;
pub mod levels;
pub mod model;
pub mod postprocess;
pub mod problems;
pub mod rng;

pub use classic::{run_classic, ClassicConfig, ClassicResult};
pub use error::{Error, Result};
pub use explorer::{Engine, RunConfig, SampleRecord};
pub use levels::{Level, LevelSet};
pub use model::{LikelihoodValue, Model, ParamVector};
pub use problems::{AnalyticGaussian, Problem, TwinGaussian};
