//! Flat `key = value` run files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::classic::{ClassicConfig, ITERATIONS_PER_PARTICLE};
use crate::error::{Error, Result};
use crate::explorer::RunConfig;
use crate::problems::{AnalyticGaussian, Problem};

pub const KEYS: [&str; 16] = [
    "problem",
    "seed",
    "particle_count",
    "new_level_interval",
    "save_interval",
    "max_levels",
    "C",
    "lambda",
    "beta",
    "likelihood_budget",
    "output_dir",
    "mcmc_steps",
    "dimension",
    "v",
    "prune_distance",
    "prune_window",
];

/// Everything a run file can set. Missing keys keep their defaults.
#[derive(Clone, Debug, PartialEq)]
pub struct FileConfig {
    pub problem: Problem,
    pub run: RunConfig,
    /// Metropolis steps per classic iteration. Derived from the budget when
    /// unset.
    pub mcmc_steps: Option<usize>,
    pub output_dir: PathBuf,
}

impl Default for FileConfig {
    fn default() -> Self {
        Self {
            problem: Problem::from_name("twin_gaussian").expect("registered"),
            run: RunConfig::default(),
            mcmc_steps: None,
            output_dir: PathBuf::from("output"),
        }
    }
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Parse run-file text. `origin` only labels error messages.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut config = FileConfig::default();
        let mut problem_name = None;
        let mut dimension = None;
        let mut width = None;
        for (index, raw) in text.lines().enumerate() {
            let line_no = index + 1;
            let fail = |message: String| Error::ConfigLine {
                path: origin.to_path_buf(),
                line: line_no,
                message,
            };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| fail(format!("expected `key = value`, found `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let int = |v: &str| {
                v.replace('_', "")
                    .parse::<u64>()
                    .map_err(|_| fail(format!("`{key}` needs a non-negative integer, got `{v}`")))
            };
            let real = |v: &str| {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| fail(format!("`{key}` needs a number, got `{v}`")))
            };
            let run = &mut config.run;
            match key {
                "problem" => {
                    Problem::from_name(value).map_err(|e| fail(e.to_string()))?;
                    problem_name = Some(value.to_string());
                }
                "seed" => run.seed = int(value)?,
                "particle_count" => run.particle_count = int(value)? as usize,
                "new_level_interval" => run.new_level_interval = int(value)? as usize,
                "save_interval" => run.save_interval = int(value)?,
                "max_levels" => run.max_levels = int(value)? as usize,
                "C" => run.regularisation = real(value)?,
                "lambda" => run.lambda = real(value)?,
                "beta" => run.beta = real(value)?,
                "likelihood_budget" => run.likelihood_budget = int(value)?,
                "output_dir" => config.output_dir = PathBuf::from(value),
                "mcmc_steps" => config.mcmc_steps = Some(int(value)? as usize),
                "dimension" => dimension = Some((line_no, int(value)? as usize)),
                "v" => width = Some((line_no, real(value)?)),
                "u" => {
                    return Err(fail(
                        "the narrow width of twin_gaussian is fixed; only `dimension` and `v` of analytic_gaussian can be changed".into(),
                    ))
                }
                "prune_distance" => run.prune_distance = real(value)?,
                "prune_window" => run.prune_window = int(value)? as usize,
                other => {
                    return Err(fail(format!(
                        "unknown key `{other}` (expected one of {})",
                        KEYS.join(", ")
                    )))
                }
            }
        }

        if let Some(name) = problem_name {
            config.problem = Problem::from_name(&name)?;
        }
        match &mut config.problem {
            Problem::AnalyticGaussian(p) => {
                if let Some((line, d)) = dimension {
                    if d == 0 {
                        return Err(Error::ConfigLine {
                            path: origin.to_path_buf(),
                            line,
                            message: "`dimension` must be positive".into(),
                        });
                    }
                    *p = AnalyticGaussian::new(d, p.width);
                }
                if let Some((line, v)) = width {
                    if v <= 0.0 {
                        return Err(Error::ConfigLine {
                            path: origin.to_path_buf(),
                            line,
                            message: "`v` must be positive".into(),
                        });
                    }
                    *p = AnalyticGaussian::new(p.dimension, v);
                }
            }
            Problem::TwinGaussian(_) => {
                if let Some((line, _)) = dimension.or(width.map(|(l, _)| (l, 0))) {
                    return Err(Error::ConfigLine {
                        path: origin.to_path_buf(),
                        line,
                        message: "`dimension` and `v` apply to analytic_gaussian only".into(),
                    });
                }
            }
        }
        config.run.validate()?;
        if config.mcmc_steps == Some(0) {
            return Err(Error::Config("mcmc_steps must be positive".into()));
        }
        Ok(config)
    }

    /// The file text that parses back to this configuration.
    pub fn to_text(&self) -> String {
        let r = &self.run;
        let mut out = String::new();
        let mut line = |key: &str, value: String| {
            let _ = writeln!(out, "{key} = {value}");
        };
        line("problem", self.problem.name().to_string());
        if let Problem::AnalyticGaussian(p) = &self.problem {
            line("dimension", p.dimension.to_string());
            line("v", format!("{:?}", p.width));
        }
        line("seed", r.seed.to_string());
        line("particle_count", r.particle_count.to_string());
        line("new_level_interval", r.new_level_interval.to_string());
        line("save_interval", r.save_interval.to_string());
        line("max_levels", r.max_levels.to_string());
        line("C", format!("{:?}", r.regularisation));
        line("lambda", format!("{:?}", r.lambda));
        line("beta", format!("{:?}", r.beta));
        line("likelihood_budget", r.likelihood_budget.to_string());
        line("prune_distance", format!("{:?}", r.prune_distance));
        line("prune_window", r.prune_window.to_string());
        if let Some(steps) = self.mcmc_steps {
            line("mcmc_steps", steps.to_string());
        }
        line("output_dir", self.output_dir.display().to_string());
        out
    }

    /// Classic settings: `100 N` iterations and, unless set, enough steps
    /// per iteration to spend the likelihood budget.
    pub fn classic(&self) -> ClassicConfig {
        let n = self.run.particle_count;
        let mut config = ClassicConfig::for_budget(n, self.run.likelihood_budget, self.run.seed);
        config.iteration_count = ITERATIONS_PER_PARTICLE * n;
        if let Some(steps) = self.mcmc_steps {
            config.mcmc_steps = steps;
        }
        config
    }
}
