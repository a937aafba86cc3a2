//! Concrete problems: the bimodal twin-Gaussian test problem and a
//! single-Gaussian problem with an analytic evidence.
//!
//! Both use a uniform prior on `[-0.5, 0.5]^d` and a random-walk proposal
//! that moves one coordinate by `S z`, `z ~ N(0, 1)`, with `S` drawn
//! log-uniformly on `[1e-6, 1]`.

use std::f64::consts::{PI, SQRT_2};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{Model, ParamVector};

pub const PRIOR_HALF_WIDTH: f64 = 0.5;

fn ln_sqrt_2pi() -> f64 {
    0.5 * (2.0 * PI).ln()
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Log-uniform step sizes for the coordinate random walk.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepSizeScheme {
    pub min: f64,
    pub max: f64,
}

impl Default for StepSizeScheme {
    fn default() -> Self {
        Self {
            min: 1e-6,
            max: 1.0,
        }
    }
}

impl StepSizeScheme {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let (lo, hi) = (self.min.ln(), self.max.ln());
        (lo + (hi - lo) * rng.random::<f64>()).exp()
    }
}

fn box_prior_draw<R: Rng + ?Sized>(dimension: usize, rng: &mut R) -> ParamVector {
    ParamVector::new(
        (0..dimension)
            .map(|_| rng.random::<f64>() - PRIOR_HALF_WIDTH)
            .collect(),
    )
}

fn box_random_walk<R: Rng + ?Sized>(
    theta: &mut ParamVector,
    steps: &StepSizeScheme,
    rng: &mut R,
) -> f64 {
    let i = rng.random_range(0..theta.len());
    let z: f64 = rng.sample(StandardNormal);
    theta[i] += steps.draw(rng) * z;
    if theta[i].abs() > PRIOR_HALF_WIDTH {
        f64::NEG_INFINITY
    } else {
        0.0
    }
}

/// Sum of two isotropic Gaussians: a broad one at the origin and a narrow
/// one, weighted to hold most of the posterior mass, at `(shift, ..., shift)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TwinGaussian {
    pub dimension: usize,
    pub broad_width: f64,
    pub narrow_width: f64,
    pub shift: f64,
    pub narrow_weight: f64,
    pub steps: StepSizeScheme,
}

impl Default for TwinGaussian {
    fn default() -> Self {
        Self {
            dimension: 20,
            broad_width: 0.1,
            narrow_width: 0.01,
            shift: 0.031,
            narrow_weight: 100.0,
            steps: StepSizeScheme::default(),
        }
    }
}

impl TwinGaussian {
    /// Log of each weighted Gaussian term at `theta`: (broad, narrow).
    pub fn log_terms(&self, theta: &[f64]) -> (f64, f64) {
        let (v, u) = (self.broad_width, self.narrow_width);
        let (mut broad, mut narrow) = (0.0, 0.0);
        for &x in theta {
            broad += x * x;
            let d = x - self.shift;
            narrow += d * d;
        }
        let d = self.dimension as f64;
        let broad = -0.5 * broad / (v * v) - d * (v.ln() + ln_sqrt_2pi());
        let narrow =
            self.narrow_weight.ln() - 0.5 * narrow / (u * u) - d * (u.ln() + ln_sqrt_2pi());
        (broad, narrow)
    }

    /// ln(1 + narrow weight), ignoring the mass both Gaussians lose outside
    /// the prior box.
    pub fn log_evidence(&self) -> f64 {
        self.narrow_weight.ln_1p()
    }

    /// Whether every coordinate lies within `radius_in_widths` narrow widths
    /// of the narrow mode's centre.
    pub fn in_narrow_mode(&self, theta: &[f64], radius_in_widths: f64) -> bool {
        let r = radius_in_widths * self.narrow_width;
        theta.iter().all(|x| (x - self.shift).abs() <= r)
    }
}

impl Model for TwinGaussian {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn from_prior<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamVector {
        box_prior_draw(self.dimension, rng)
    }

    fn perturb<R: Rng + ?Sized>(&self, theta: &mut ParamVector, rng: &mut R) -> f64 {
        box_random_walk(theta, &self.steps, rng)
    }

    fn log_likelihood(&self, theta: &[f64]) -> f64 {
        let (broad, narrow) = self.log_terms(theta);
        log_add_exp(broad, narrow)
    }
}

/// A single isotropic Gaussian at the origin, whose evidence and
/// information over the prior box are known in closed form.
#[derive(Clone, Debug, PartialEq)]
pub struct AnalyticGaussian {
    pub dimension: usize,
    pub width: f64,
    pub steps: StepSizeScheme,
}

impl Default for AnalyticGaussian {
    fn default() -> Self {
        Self {
            dimension: 20,
            width: 0.1,
            steps: StepSizeScheme::default(),
        }
    }
}

impl AnalyticGaussian {
    pub fn new(dimension: usize, width: f64) -> Self {
        Self {
            dimension,
            width,
            steps: StepSizeScheme::default(),
        }
    }

    fn half_box_in_widths(&self) -> f64 {
        PRIOR_HALF_WIDTH / self.width
    }

    /// Log-likelihood at the origin.
    pub fn peak_log_l(&self) -> f64 {
        -(self.dimension as f64) * (self.width.ln() + ln_sqrt_2pi())
    }

    /// `d ln erf(0.5 / (v sqrt 2))`: the Gaussian mass inside the box.
    pub fn log_evidence(&self) -> f64 {
        self.dimension as f64 * libm::erf(self.half_box_in_widths() / SQRT_2).ln()
    }

    /// Posterior-to-prior information `H = E_post[ln L] - ln Z`, using the
    /// second moment of a normal truncated to the box.
    pub fn information(&self) -> f64 {
        let a = self.half_box_in_widths();
        let mass = libm::erf(a / SQRT_2);
        let density = (-0.5 * a * a).exp() / (2.0 * PI).sqrt();
        let second_moment = 1.0 - 2.0 * a * density / mass;
        let per_coordinate = -(self.width.ln() + ln_sqrt_2pi()) - 0.5 * second_moment - mass.ln();
        self.dimension as f64 * per_coordinate
    }

    /// Exact ln X above a likelihood cutoff, valid while the enclosing ball
    /// lies inside the prior box (radius ≤ 0.5).
    pub fn log_x_above(&self, log_l: f64) -> Option<f64> {
        let excess = self.peak_log_l() - log_l;
        if excess < 0.0 {
            return Some(f64::NEG_INFINITY);
        }
        let r2 = 2.0 * self.width * self.width * excess;
        if r2 > PRIOR_HALF_WIDTH * PRIOR_HALF_WIDTH {
            return None;
        }
        let d = self.dimension as f64;
        // volume of the d-ball: pi^(d/2) r^d / Gamma(d/2 + 1)
        let log_unit_ball = 0.5 * d * PI.ln() - libm::lgamma(0.5 * d + 1.0);
        Some(log_unit_ball + 0.5 * d * r2.ln())
    }

    /// Inverse of [`log_x_above`](Self::log_x_above).
    pub fn log_l_enclosing(&self, log_x: f64) -> f64 {
        let d = self.dimension as f64;
        let log_unit_ball = 0.5 * d * PI.ln() - libm::lgamma(0.5 * d + 1.0);
        let r2 = ((log_x - log_unit_ball) * 2.0 / d).exp();
        self.peak_log_l() - r2 / (2.0 * self.width * self.width)
    }
}

impl Model for AnalyticGaussian {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn from_prior<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamVector {
        box_prior_draw(self.dimension, rng)
    }

    fn perturb<R: Rng + ?Sized>(&self, theta: &mut ParamVector, rng: &mut R) -> f64 {
        box_random_walk(theta, &self.steps, rng)
    }

    fn log_likelihood(&self, theta: &[f64]) -> f64 {
        let r2: f64 = theta.iter().map(|x| x * x).sum();
        self.peak_log_l() - 0.5 * r2 / (self.width * self.width)
    }
}

/// Problems selectable by name from a configuration file.
#[derive(Clone, Debug, PartialEq)]
pub enum Problem {
    TwinGaussian(TwinGaussian),
    AnalyticGaussian(AnalyticGaussian),
}

impl Problem {
    pub const NAMES: [&'static str; 2] = ["twin_gaussian", "analytic_gaussian"];

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "twin_gaussian" => Ok(Problem::TwinGaussian(TwinGaussian::default())),
            "analytic_gaussian" => Ok(Problem::AnalyticGaussian(AnalyticGaussian::default())),
            other => Err(Error::UnknownProblem(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Problem::TwinGaussian(_) => Self::NAMES[0],
            Problem::AnalyticGaussian(_) => Self::NAMES[1],
        }
    }

    /// The reference ln Z used to score runs.
    pub fn true_log_evidence(&self) -> f64 {
        match self {
            Problem::TwinGaussian(p) => p.log_evidence(),
            Problem::AnalyticGaussian(p) => p.log_evidence(),
        }
    }
}

impl Model for Problem {
    fn dimension(&self) -> usize {
        match self {
            Problem::TwinGaussian(p) => p.dimension(),
            Problem::AnalyticGaussian(p) => p.dimension(),
        }
    }

    fn from_prior<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamVector {
        match self {
            Problem::TwinGaussian(p) => p.from_prior(rng),
            Problem::AnalyticGaussian(p) => p.from_prior(rng),
        }
    }

    fn perturb<R: Rng + ?Sized>(&self, theta: &mut ParamVector, rng: &mut R) -> f64 {
        match self {
            Problem::TwinGaussian(p) => p.perturb(theta, rng),
            Problem::AnalyticGaussian(p) => p.perturb(theta, rng),
        }
    }

    fn log_likelihood(&self, theta: &[f64]) -> f64 {
        match self {
            Problem::TwinGaussian(p) => p.log_likelihood(theta),
            Problem::AnalyticGaussian(p) => p.log_likelihood(theta),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use proptest::prelude::*;

    fn naive_twin(p: &TwinGaussian, theta: &[f64]) -> f64 {
        let (v, u) = (p.broad_width, p.narrow_width);
        let mut broad = 1.0;
        let mut narrow = 1.0;
        for &x in theta {
            broad *= (-0.5 * (x / v).powi(2)).exp() / (v * (2.0 * PI).sqrt());
            narrow *= (-0.5 * ((x - p.shift) / u).powi(2)).exp() / (u * (2.0 * PI).sqrt());
        }
        (broad + p.narrow_weight * narrow).ln()
    }

    #[test]
    fn twin_log_l_at_reference_points() {
        let p = TwinGaussian::default();
        let origin = vec![0.0; 20];
        let (broad, narrow) = p.log_terms(&origin);
        assert!((broad - 27.6729).abs() < 1e-4, "{broad}");
        assert!((narrow + 17.77).abs() < 0.01, "{narrow}");
        assert!((p.log_likelihood(&origin) - 27.673).abs() < 1e-3);

        let centre = vec![0.031; 20];
        let expected = 100f64.ln() + 20.0 * (1.0 / (0.01 * (2.0 * PI).sqrt())).ln();
        assert!((p.log_likelihood(&centre) - expected).abs() < 1e-9);
        assert!((p.log_likelihood(&centre) - 78.33).abs() < 0.01);
        assert!((p.log_evidence() - 4.6151).abs() < 1e-4);
    }

    #[test]
    fn analytic_reference_values() {
        let p = AnalyticGaussian::default();
        let peak = 20.0 * (1.0 / (0.1 * (2.0 * PI).sqrt())).ln();
        assert!((p.log_likelihood(&[0.0; 20]) - peak).abs() < 1e-12);
        let z = p.log_evidence();
        assert!(z < 0.0 && z > -2e-5, "{z}");
        assert!((z + 1.15e-5).abs() < 0.05e-5, "{z}");
    }

    /// Simpson's rule on [-0.5, 0.5].
    fn simpson(f: impl Fn(f64) -> f64, n: usize) -> f64 {
        let h = 1.0 / n as f64;
        let mut s = f(-0.5) + f(0.5);
        for i in 1..n {
            let x = -0.5 + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        s * h / 3.0
    }

    #[test]
    fn analytic_evidence_and_information_match_quadrature() {
        for (d, v) in [(20, 0.1), (3, 0.3), (1, 0.5)] {
            let p = AnalyticGaussian::new(d, v);
            let g = |x: f64| (-0.5 * (x / v).powi(2)).exp() / (v * (2.0 * PI).sqrt());
            let z1 = simpson(g, 20_000);
            let log_z = d as f64 * z1.ln();
            assert!((p.log_evidence() - log_z).abs() < 1e-9, "d={d} v={v}");
            // H = d * ∫ (g/z1) ln(g/z1) dx for a product posterior
            let h1 = simpson(|x| g(x) / z1 * (g(x) / z1).ln(), 20_000);
            assert!(
                (p.information() - d as f64 * h1).abs() < 1e-8,
                "d={d} v={v}"
            );
        }
    }

    #[test]
    fn ball_mass_round_trip() {
        let p = AnalyticGaussian::new(2, 0.1);
        let log_l = p.log_l_enclosing(-3.0);
        assert!((p.log_x_above(log_l).unwrap() + 3.0).abs() < 1e-12);
        // radius beyond the box
        assert!(p.log_x_above(p.peak_log_l() - 100.0).is_none());
    }

    #[test]
    fn prior_draws_fill_the_box() {
        let p = TwinGaussian::default();
        let mut rng = seeded(12);
        let n = 100_000;
        let mut sum = [0.0; 20];
        let mut sum2 = [0.0; 20];
        for _ in 0..n {
            let theta = p.from_prior(&mut rng);
            for (i, x) in theta.iter().enumerate() {
                assert!(x.abs() <= 0.5);
                sum[i] += x;
                sum2[i] += x * x;
            }
        }
        for i in 0..20 {
            let mean = sum[i] / n as f64;
            let var = sum2[i] / n as f64 - mean * mean;
            assert!(mean.abs() < 0.005, "coordinate {i}: mean {mean}");
            assert!((var * 12.0 - 1.0).abs() < 0.03, "coordinate {i}: var {var}");
        }
    }

    #[test]
    fn prior_draws_pass_ks() {
        let p = AnalyticGaussian::new(3, 0.1);
        let mut rng = seeded(77);
        let n = 100_000;
        let draws: Vec<ParamVector> = (0..n).map(|_| p.from_prior(&mut rng)).collect();
        // critical value of the one-sample KS statistic at the 0.1% level
        let critical = 1.9495 / (n as f64).sqrt();
        for i in 0..3 {
            let mut xs: Vec<f64> = draws.iter().map(|t| t[i] + 0.5).collect();
            xs.sort_by(f64::total_cmp);
            let d = xs
                .iter()
                .enumerate()
                .map(|(k, &x)| {
                    let lo = x - k as f64 / n as f64;
                    let hi = (k + 1) as f64 / n as f64 - x;
                    lo.max(hi)
                })
                .fold(0.0, f64::max);
            assert!(d < critical, "coordinate {i}: D = {d}");
        }
    }

    #[test]
    fn perturb_moves_exactly_one_coordinate() {
        let p = TwinGaussian::default();
        let mut rng = seeded(3);
        for _ in 0..1_000 {
            let theta = p.from_prior(&mut rng);
            let mut proposal = theta.clone();
            let lc = p.perturb(&mut proposal, &mut rng);
            let changed = theta
                .iter()
                .zip(proposal.iter())
                .filter(|(a, b)| a != b)
                .count();
            assert_eq!(changed, 1);
            let in_box = proposal.iter().all(|x| x.abs() <= 0.5);
            assert_eq!(lc == 0.0, in_box);
            assert!(lc == 0.0 || lc == f64::NEG_INFINITY);
        }
    }

    #[test]
    fn edge_proposals_are_often_rejected() {
        let p = TwinGaussian::default();
        let mut rng = seeded(8);
        let mut rejected = 0;
        for _ in 0..10_000 {
            let mut theta = ParamVector::new(vec![0.499; 20]);
            if p.perturb(&mut theta, &mut rng) == f64::NEG_INFINITY {
                rejected += 1;
            }
        }
        // half of all moves head outward and about half of those exceed 0.001
        assert!(rejected > 2_000 && rejected < 5_000, "{rejected}");
    }

    #[test]
    fn step_sizes_are_log_uniform() {
        let scheme = StepSizeScheme::default();
        let mut rng = seeded(31);
        let n = 100_000;
        let (lo, hi) = (1e-6f64.ln(), 0.0);
        let mut us: Vec<f64> = (0..n)
            .map(|_| (scheme.draw(&mut rng).ln() - lo) / (hi - lo))
            .collect();
        us.sort_by(f64::total_cmp);
        let d = us
            .iter()
            .enumerate()
            .map(|(k, &u)| (u - k as f64 / n as f64).max((k + 1) as f64 / n as f64 - u))
            .fold(0.0, f64::max);
        assert!(d < 1.9495 / (n as f64).sqrt(), "D = {d}");
        assert!(us[0] > 0.0 && us[n - 1] < 1.0);
    }

    #[test]
    fn log_l_decreases_away_from_narrow_centre() {
        let p = TwinGaussian::default();
        let mut last = f64::INFINITY;
        for step in 0..=20 {
            // towards the origin, within one narrow width of the centre
            let t = step as f64 / 20.0 * 0.01 / (20f64).sqrt();
            let theta = vec![0.031 - t; 20];
            let l = p.log_likelihood(&theta);
            assert!(l < last);
            last = l;
        }
    }

    #[test]
    fn registry_selects_by_name() {
        assert_eq!(
            Problem::from_name("twin_gaussian").unwrap().name(),
            "twin_gaussian"
        );
        assert_eq!(
            Problem::from_name("analytic_gaussian").unwrap().dimension(),
            20
        );
        assert!(matches!(
            Problem::from_name("rosenbrock"),
            Err(Error::UnknownProblem(_))
        ));
    }

    proptest! {
        #[test]
        fn stable_matches_naive_evaluation(
            theta in prop::collection::vec(-0.3f64..0.3, 20)
        ) {
            let p = TwinGaussian::default();
            let naive = naive_twin(&p, &theta);
            prop_assume!(naive.is_finite());
            let stable = p.log_likelihood(&theta);
            prop_assert!(((stable - naive) / naive).abs() < 1e-10 || (stable - naive).abs() < 1e-10);
        }

        #[test]
        fn permutation_invariant(
            theta in prop::collection::vec(-0.5f64..0.5, 20),
            seed in 0u64..1000,
        ) {
            use rand::seq::SliceRandom;
            let p = TwinGaussian::default();
            let mut shuffled = theta.clone();
            shuffled.shuffle(&mut seeded(seed));
            let a = p.log_likelihood(&theta);
            let b = p.log_likelihood(&shuffled);
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }
}
