//! Repeated runs of the diffusive and classic samplers under a common
//! likelihood budget, scored by the RMS error of ln Z.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::classic::{run_classic, ClassicConfig};
use crate::error::{Error, Result};
use crate::explorer::{Engine, RunConfig};
use crate::postprocess::evidence_error_bar;
use crate::problems::Problem;
use crate::rng::{derive_seed, seeded};

/// Budget the standard settings are tuned for.
pub const REFERENCE_BUDGET: u64 = 10_000_000;

/// X-assignment repetitions behind each diffusive ln Z.
pub const ASSIGNMENT_REPETITIONS: usize = 100;

/// A run is a failure if more than this fraction of a method's runs fail.
pub const MAX_FAILURE_FRACTION: f64 = 0.2;

#[derive(Clone, Debug, PartialEq)]
pub enum Method {
    Diffusive,
    Classic { particle_count: usize },
}

impl Method {
    /// The diffusive sampler and the four classic baselines.
    pub fn standard() -> Vec<Method> {
        let mut methods = vec![Method::Diffusive];
        methods.extend(
            [1, 10, 100, 300]
                .into_iter()
                .map(|particle_count| Method::Classic { particle_count }),
        );
        methods
    }

    pub fn label(&self) -> String {
        match self {
            Method::Diffusive => "diffusive".to_string(),
            Method::Classic { particle_count } => format!("classic N={particle_count}"),
        }
    }
}

/// Diffusive settings for `budget`: the standard settings with the level and
/// save intervals shrunk in proportion when the budget is below the
/// reference, so a short run still builds its full ladder.
pub fn diffusive_config(budget: u64, seed: u64) -> RunConfig {
    let defaults = RunConfig::default();
    let scale = (budget as f64 / REFERENCE_BUDGET as f64).min(1.0);
    let interval = ((defaults.new_level_interval as f64 * scale).round() as usize).max(100);
    RunConfig {
        new_level_interval: interval,
        save_interval: interval as u64,
        likelihood_budget: budget,
        seed,
        ..defaults
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchPlan {
    pub problem: Problem,
    pub methods: Vec<Method>,
    pub runs: usize,
    pub budget: u64,
    pub seed: u64,
}

impl BenchPlan {
    /// Eight runs per method at 10^6 evaluations each.
    pub fn desk(seed: u64) -> Self {
        Self {
            problem: Problem::from_name("twin_gaussian").expect("registered"),
            methods: Method::standard(),
            runs: 8,
            budget: 1_000_000,
            seed,
        }
    }

    /// Twenty-four runs per method at 10^7 evaluations each.
    pub fn full(seed: u64) -> Self {
        Self {
            runs: 24,
            budget: REFERENCE_BUDGET,
            ..Self::desk(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs < 2 {
            return Err(Error::Config(
                "a bench needs at least 2 runs per method".into(),
            ));
        }
        if self.budget < 100_000 {
            return Err(Error::Config(
                "a bench needs a budget of at least 10^5".into(),
            ));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("a bench needs at least one method".into()));
        }
        Ok(())
    }

    /// Seed of replica `replica`, shared by every method.
    pub fn replica_seed(&self, replica: usize) -> u64 {
        derive_seed(self.seed, replica as u64)
    }
}

/// The outcome of one replica.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub replica: usize,
    pub seed: u64,
    pub log_z: f64,
    pub information: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MethodRow {
    pub method: Method,
    pub params: String,
    pub outcomes: Vec<RunOutcome>,
    pub failures: Vec<(usize, String)>,
    pub rms: f64,
    /// Minimum, lower quartile, median, upper quartile and maximum of ln Z.
    pub quartiles: [f64; 5],
    pub mean_information: f64,
    /// `sqrt(H / N)` from the measured H, classic methods only.
    pub theoretical: Option<f64>,
    pub failed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchTable {
    pub truth: f64,
    pub budget: u64,
    pub rows: Vec<MethodRow>,
}

/// `sqrt(mean((estimate - truth)^2))`.
pub fn rms_error(estimates: &[f64], truth: f64) -> Result<f64> {
    if estimates.is_empty() {
        return Err(Error::TooFew { needed: 1, got: 0 });
    }
    let mean_sq =
        estimates.iter().map(|e| (e - truth).powi(2)).sum::<f64>() / estimates.len() as f64;
    Ok(mean_sq.sqrt())
}

/// Linear-interpolation quantiles of `values` at 0, 1/4, 1/2, 3/4 and 1.
pub fn quartiles(values: &[f64]) -> [f64; 5] {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let at = |q: f64| {
        if sorted.is_empty() {
            return f64::NAN;
        }
        let pos = q * (sorted.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
    };
    [at(0.0), at(0.25), at(0.5), at(0.75), at(1.0)]
}

fn method_params(method: &Method, budget: u64) -> String {
    match method {
        Method::Diffusive => {
            let c = diffusive_config(budget, 0);
            format!(
                "particles {}, level interval {}, save interval {}, max levels {}, C {}, lambda {}, beta {}",
                c.particle_count,
                c.new_level_interval,
                c.save_interval,
                c.max_levels,
                c.regularisation,
                c.lambda,
                c.beta
            )
        }
        Method::Classic { particle_count } => {
            let c = ClassicConfig::for_budget(*particle_count, budget, 0);
            format!(
                "N {}, {} MCMC steps per iteration, {} iterations",
                c.particle_count, c.mcmc_steps, c.iteration_count
            )
        }
    }
}

/// One replica of one method.
pub fn run_once(problem: &Problem, method: &Method, budget: u64, seed: u64) -> Result<(f64, f64)> {
    let (log_z, information) = match method {
        Method::Diffusive => {
            let mut engine = Engine::new(problem, diffusive_config(budget, seed))?;
            engine.run()?;
            let mut rng = seeded(derive_seed(seed, u64::MAX));
            let summary = evidence_error_bar(
                engine.samples(),
                engine.levels(),
                ASSIGNMENT_REPETITIONS,
                &mut rng,
            )?;
            (summary.log_z, summary.information)
        }
        Method::Classic { particle_count } => {
            let config = ClassicConfig::for_budget(*particle_count, budget, seed);
            let result = run_classic(problem, &config)?;
            (result.log_z, result.information)
        }
    };
    if !log_z.is_finite() {
        return Err(Error::Config(format!("non-finite ln Z {log_z}")));
    }
    Ok((log_z, information))
}

/// Run every method `plan.runs` times. Replicas run on the rayon pool when
/// `parallel` is set; the table is identical either way.
pub fn run_bench(plan: &BenchPlan, parallel: bool) -> Result<BenchTable> {
    plan.validate()?;
    let jobs: Vec<(usize, usize)> = (0..plan.methods.len())
        .flat_map(|m| (0..plan.runs).map(move |r| (m, r)))
        .collect();
    let job = |&(m, r): &(usize, usize)| {
        let seed = plan.replica_seed(r);
        (
            m,
            r,
            seed,
            run_once(&plan.problem, &plan.methods[m], plan.budget, seed),
        )
    };
    let mut results: Vec<_> = if parallel {
        jobs.par_iter().map(job).collect()
    } else {
        jobs.iter().map(job).collect()
    };
    results.sort_by_key(|(m, r, _, _)| (*m, *r));

    let truth = plan.problem.true_log_evidence();
    let mut rows = Vec::with_capacity(plan.methods.len());
    for (m, method) in plan.methods.iter().enumerate() {
        let mut outcomes = Vec::new();
        let mut failures = Vec::new();
        for (_, replica, seed, result) in results.iter().filter(|(rm, ..)| *rm == m) {
            match result {
                Ok((log_z, information)) => outcomes.push(RunOutcome {
                    replica: *replica,
                    seed: *seed,
                    log_z: *log_z,
                    information: *information,
                }),
                Err(e) => failures.push((*replica, e.to_string())),
            }
        }
        let estimates: Vec<f64> = outcomes.iter().map(|o| o.log_z).collect();
        let rms = rms_error(&estimates, truth).unwrap_or(f64::NAN);
        let mean_information = if outcomes.is_empty() {
            f64::NAN
        } else {
            outcomes.iter().map(|o| o.information).sum::<f64>() / outcomes.len() as f64
        };
        let theoretical = match method {
            Method::Classic { particle_count } => {
                Some((mean_information.max(0.0) / *particle_count as f64).sqrt())
            }
            Method::Diffusive => None,
        };
        let failed = failures.len() as f64 > MAX_FAILURE_FRACTION * plan.runs as f64;
        rows.push(MethodRow {
            method: method.clone(),
            params: method_params(method, plan.budget),
            quartiles: quartiles(&estimates),
            outcomes,
            failures,
            rms,
            mean_information,
            theoretical,
            failed,
        });
    }
    Ok(BenchTable {
        truth,
        budget: plan.budget,
        rows,
    })
}

impl BenchTable {
    pub fn row(&self, method: &Method) -> Option<&MethodRow> {
        self.rows.iter().find(|r| &r.method == method)
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "Budget {} likelihood evaluations per run; true ln Z = {:.4}.\n",
            self.budget, self.truth
        );
        out.push_str(
            "| method | params | runs | failures | RMS ln Z error | sqrt(H/N) | min | Q1 | median | Q3 | max |\n",
        );
        out.push_str("|---|---|---|---|---|---|---|---|---|---|---|\n");
        for row in &self.rows {
            let theory = row
                .theoretical
                .map_or_else(|| "-".to_string(), |t| format!("{t:.3}"));
            let q = row.quartiles;
            let _ = writeln!(
                out,
                "| {} | {} | {} | {}{} | {:.3} | {} | {:.3} | {:.3} | {:.3} | {:.3} | {:.3} |",
                row.method.label(),
                row.params,
                row.outcomes.len() + row.failures.len(),
                row.failures.len(),
                if row.failed { " (method failed)" } else { "" },
                row.rms,
                theory,
                q[0],
                q[1],
                q[2],
                q[3],
                q[4]
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        writer.write_record([
            "method",
            "params",
            "runs",
            "failures",
            "rms",
            "theoretical_sqrt_h_over_n",
            "min",
            "q1",
            "median",
            "q3",
            "max",
        ])?;
        for row in &self.rows {
            let mut record = vec![
                row.method.label(),
                row.params.clone(),
                (row.outcomes.len() + row.failures.len()).to_string(),
                row.failures.len().to_string(),
                format!("{:.16e}", row.rms),
                row.theoretical
                    .map_or_else(String::new, |t| format!("{t:.16e}")),
            ];
            record.extend(row.quartiles.iter().map(|q| format!("{q:.16e}")));
            writer.write_record(&record)?;
        }
        writer.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.write_csv(&dir.join("bench_table.csv"))?;
        let md = dir.join("bench_table.md");
        std::fs::write(&md, self.to_markdown()).map_err(|e| Error::io(&md, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rms_examples() {
        let truth = 101f64.ln();
        assert_eq!(rms_error(&[truth, truth], truth).unwrap(), 0.0);
        assert!((rms_error(&[truth + 1.0, truth - 1.0], truth).unwrap() - 1.0).abs() < 1e-12);
        assert!((rms_error(&[4.0, 5.0, 6.0], 4.6151).unwrap() - 0.9027).abs() < 1e-4);
        assert!(rms_error(&[], truth).is_err());
        let a = rms_error(&[1.0, 7.0, 3.5, -2.0], 2.0).unwrap();
        let b = rms_error(&[3.5, -2.0, 7.0, 1.0], 2.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn quartiles_of_small_sets() {
        assert_eq!(
            quartiles(&[3.0, 1.0, 2.0, 5.0, 4.0]),
            [1.0, 2.0, 3.0, 4.0, 5.0]
        );
        assert_eq!(quartiles(&[2.0]), [2.0; 5]);
    }

    #[test]
    fn theoretical_error_for_one_particle() {
        assert!(((63.2f64 / 1.0).sqrt() - 7.95).abs() < 0.005);
    }

    #[test]
    fn classic_rows_match_the_standard_table() {
        let steps: Vec<usize> = [1, 10, 100, 300]
            .iter()
            .map(|&n| ClassicConfig::for_budget(n, REFERENCE_BUDGET, 0).mcmc_steps)
            .collect();
        assert_eq!(steps, [100_000, 10_000, 1_000, 333]);
    }

    #[test]
    fn diffusive_settings_scale_with_budget() {
        let full = diffusive_config(REFERENCE_BUDGET, 3);
        assert_eq!(
            full,
            RunConfig {
                seed: 3,
                ..RunConfig::default()
            }
        );
        let desk = diffusive_config(1_000_000, 3);
        assert_eq!(
            (desk.new_level_interval, desk.save_interval),
            (1_000, 1_000)
        );
        assert_eq!(desk.regularisation, 1_000.0);
    }

    #[test]
    fn serial_and_parallel_tables_agree() {
        let plan = BenchPlan {
            methods: vec![
                Method::Classic { particle_count: 3 },
                Method::Classic { particle_count: 3 },
                Method::Diffusive,
            ],
            runs: 2,
            budget: 100_000,
            ..BenchPlan::desk(5)
        };
        let serial = run_bench(&plan, false).unwrap();
        let parallel = run_bench(&plan, true).unwrap();
        assert_eq!(serial, parallel);
        assert_eq!(serial.rows[0].outcomes, serial.rows[1].outcomes);
        assert!(serial
            .rows
            .iter()
            .all(|r| r.failures.is_empty() && !r.failed));

        let dir = tempfile::tempdir().unwrap();
        serial.write(dir.path()).unwrap();
        let mut reader = csv::Reader::from_path(dir.path().join("bench_table.csv")).unwrap();
        let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), 3);
        let rms: f64 = rows[2][4].parse().unwrap();
        assert_eq!(rms, serial.rows[2].rms);
        let md = std::fs::read_to_string(dir.path().join("bench_table.md")).unwrap();
        assert_eq!(md.lines().filter(|l| l.starts_with("| classic")).count(), 2);
    }

    #[test]
    fn invalid_plans_are_rejected() {
        let plan = BenchPlan {
            runs: 1,
            ..BenchPlan::desk(0)
        };
        assert!(run_bench(&plan, false).is_err());
        let plan = BenchPlan {
            budget: 10,
            ..BenchPlan::desk(0)
        };
        assert!(run_bench(&plan, false).is_err());
    }
}
