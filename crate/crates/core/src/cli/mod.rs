//! The `dnest` command line: `run`, `post`, `classic` and `bench`.

pub mod config;
pub mod output;
pub mod plot;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::bench::{run_bench, BenchPlan, BenchTable};
use crate::classic::{run_classic, ClassicResult};
use crate::error::{Error, Result};
use crate::explorer::{Engine, RunSummary};
use crate::model::Model;
use crate::postprocess::{
    assign_x, evidence_error_bar, level_compressions, posterior_weights, resample_posterior,
    EvidenceSummary,
};
use crate::problems::Problem;
use crate::rng::{derive_seed, seeded};

pub use config::FileConfig;
use output::*;
use plot::{thin, Chart, Series, Style};

/// Version stamp written into run manifests.
pub const VERSION: &str = concat!("dnest ", env!("CARGO_PKG_VERSION"));

/// Samples drawn for the logL-vs-lnX overlay.
const OVERLAY_POINTS: usize = 1000;

#[derive(Debug, Parser)]
#[command(name = "dnest", version, about = "Diffusive nested sampling")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// Run file of `key = value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override the seed from the run file.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the output directory from the run file.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the diffusive sampler and save levels and samples.
    Run(Common),
    /// Estimate the evidence and posterior from a finished run.
    Post {
        #[command(flatten)]
        common: Common,
        /// Random X assignments behind the error bar.
        #[arg(short = 'm', long, default_value_t = 100)]
        repetitions: usize,
    },
    /// Run classic nested sampling.
    Classic(Common),
    /// Compare the samplers over repeated runs.
    Bench {
        #[command(flatten)]
        common: Common,
        /// Runs per method.
        #[arg(long)]
        runs: Option<usize>,
        /// Likelihood evaluations per run.
        #[arg(long)]
        budget: Option<u64>,
        /// 24 runs of 10^7 evaluations per method.
        #[arg(long)]
        full: bool,
    },
}

impl Common {
    /// The run file with command-line overrides applied.
    pub fn resolve(&self) -> Result<FileConfig> {
        let mut config = match &self.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.run.seed = seed;
        }
        if let Some(dir) = &self.output_dir {
            config.output_dir = dir.clone();
        }
        Ok(config)
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(common) => {
            let config = common.resolve()?;
            let summary = cmd_run(&config)?;
            println!(
                "{} steps, {} levels, {} samples written to {}",
                summary.steps,
                summary.levels,
                summary.samples,
                config.output_dir.display()
            );
        }
        Command::Post {
            common,
            repetitions,
        } => {
            let dir = match (&common.output_dir, &common.config) {
                (Some(dir), _) => dir.clone(),
                (None, Some(_)) => common.resolve()?.output_dir,
                (None, None) => FileConfig::default().output_dir,
            };
            let report = cmd_post(&dir, repetitions, common.seed)?;
            println!(
                "ln Z = {:.4} +- {:.4}, H = {:.3} nats, ESS = {:.1}",
                report.summary.log_z,
                report.summary.log_z_std,
                report.summary.information,
                report.summary.ess
            );
        }
        Command::Classic(common) => {
            let config = common.resolve()?;
            let result = cmd_classic(&config)?;
            println!(
                "ln Z = {:.4}, H = {:.3} nats, {} likelihood calls",
                result.log_z, result.information, result.likelihood_calls
            );
        }
        Command::Bench {
            common,
            runs,
            budget,
            full,
        } => {
            let config = common.resolve()?;
            let table = cmd_bench(&config, runs, budget, full)?;
            print!("{}", table.to_markdown());
        }
    }
    Ok(())
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_manifest(config: &FileConfig, command: &str) -> Result<()> {
    let path = config.output_dir.join(MANIFEST);
    let text = format!(
        "# {VERSION}\n# command {command}\n# seed {}\n{}",
        config.run.seed,
        config.to_text()
    );
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// Diffusive run: streams samples to disk, then writes the final levels.
pub fn cmd_run(config: &FileConfig) -> Result<RunSummary> {
    let dir = &config.output_dir;
    create_dir(dir)?;
    write_manifest(config, "run")?;
    let mut engine = Engine::new(&config.problem, config.run.clone())?;
    let mut writer = SampleWriter::create(dir)?;
    let summary = engine.run_with(|sample| writer.append(sample))?;
    writer.finish()?;
    write_levels(&dir.join(LEVELS), &engine.levels().snapshot())?;
    Ok(summary)
}

#[derive(Clone, Debug)]
pub struct PostReport {
    pub summary: EvidenceSummary,
    /// Posterior weight inside the narrow mode, for the twin problem.
    pub narrow_weight: Option<f64>,
    pub true_log_z: f64,
}

/// Post-process the run in `dir`.
pub fn cmd_post(dir: &Path, repetitions: usize, seed: Option<u64>) -> Result<PostReport> {
    if !dir.is_dir() {
        return Err(Error::Config(format!(
            "{} is not a directory",
            dir.display()
        )));
    }
    let manifest = dir.join(MANIFEST);
    let config = if manifest.exists() {
        FileConfig::load(&manifest)?
    } else {
        FileConfig::default()
    };
    let levels = read_levels(&dir.join(LEVELS))?;
    let samples = read_samples(dir)?;
    if samples.is_empty() {
        return Err(Error::NoSamples);
    }
    let seed = seed.unwrap_or(config.run.seed);
    let mut rng = seeded(derive_seed(seed, 0x706f_7374));
    let summary = evidence_error_bar(&samples, &levels, repetitions, &mut rng)?;

    let assignment = assign_x(&samples, &levels, &mut rng);
    let posterior = posterior_weights(&assignment, &samples)?;
    let narrow_weight = match &config.problem {
        Problem::TwinGaussian(p) => Some(
            samples
                .iter()
                .zip(&posterior.weights)
                .filter(|(s, _)| p.in_narrow_mode(&s.theta, 5.0))
                .map(|(_, w)| w)
                .sum(),
        ),
        Problem::AnalyticGaussian(_) => None,
    };

    let resample_count = posterior.ess().round().max(1.0) as usize;
    let resampled = resample_posterior(&samples, &posterior.weights, resample_count, &mut rng)?;
    let rows: Vec<Vec<f64>> = resampled.iter().map(|s| s.theta.to_vec()).collect();
    let header: Vec<String> = (0..config.problem.dimension())
        .map(|i| format!("x{i}"))
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_table(&dir.join(POSTERIOR), &header, &rows)?;

    let mut curve: Vec<Vec<f64>> = samples
        .iter()
        .zip(&assignment.log_x)
        .zip(&posterior.weights)
        .map(|((s, x), w)| vec![*x, s.log_l(), *w])
        .collect();
    curve.sort_by(|a, b| b[0].total_cmp(&a[0]));
    write_table(
        &dir.join(LOGL_VS_LOGX),
        &["log_x", "log_l", "weight"],
        &curve,
    )?;

    let compressions = level_compressions(&levels);
    let compression_rows: Vec<Vec<f64>> = compressions
        .iter()
        .enumerate()
        .map(|(j, d)| vec![(j + 1) as f64, *d])
        .collect();
    write_table(
        &dir.join(COMPRESSION),
        &["level", "log_x_difference"],
        &compression_rows,
    )?;

    let true_log_z = config.problem.true_log_evidence();
    let mut results = vec![
        ("log_z", real(summary.log_z)),
        ("log_z_std", real(summary.log_z_std)),
        ("information", real(summary.information)),
        ("ess", real(summary.ess)),
        ("repetitions", summary.repetitions.to_string()),
        ("samples", summary.samples.to_string()),
        ("levels", levels.len().to_string()),
        ("true_log_z", real(true_log_z)),
    ];
    if let Some(w) = narrow_weight {
        results.push(("narrow_mode_weight", real(w)));
    }
    write_key_values(&dir.join(RESULTS), &results)?;

    let save_interval = config.run.save_interval as f64;
    let trajectory = Chart {
        title: "Level of the saved particle".into(),
        x_label: "step".into(),
        y_label: "level j".into(),
        series: vec![Series {
            points: samples
                .iter()
                .enumerate()
                .map(|(i, s)| ((i + 1) as f64 * save_interval, s.level as f64))
                .collect(),
            style: Style::Steps,
            colour: "navy",
        }],
        reference_y: None,
    };
    write_svg(&dir.join(TRAJECTORY_SVG), &trajectory)?;

    let compression_chart = Chart {
        title: "Estimated compression between consecutive levels".into(),
        x_label: "level".into(),
        y_label: "ln X difference".into(),
        series: vec![Series {
            points: compression_rows.iter().map(|r| (r[0], r[1])).collect(),
            style: Style::Line,
            colour: "navy",
        }],
        reference_y: Some(-1.0),
    };
    write_svg(&dir.join(COMPRESSION_SVG), &compression_chart)?;

    let level_points: Vec<(f64, f64)> = levels
        .levels()
        .iter()
        .skip(1)
        .map(|l| (l.log_x, l.cutoff.log_l))
        .collect();
    let overlay: Vec<(f64, f64)> = thin(&curve, OVERLAY_POINTS)
        .iter()
        .map(|r| (r[0], r[1]))
        .collect();
    let curve_chart = Chart {
        title: "Log likelihood against enclosed prior mass".into(),
        x_label: "ln X".into(),
        y_label: "ln L".into(),
        series: vec![
            Series {
                points: level_points,
                style: Style::Line,
                colour: "grey",
            },
            Series {
                points: overlay,
                style: Style::Points,
                colour: "crimson",
            },
        ],
        reference_y: None,
    };
    write_svg(&dir.join(LOGL_SVG), &curve_chart)?;

    Ok(PostReport {
        summary,
        narrow_weight,
        true_log_z,
    })
}

fn write_svg(path: &Path, chart: &Chart) -> Result<()> {
    std::fs::write(path, chart.to_svg()).map_err(|e| Error::io(path, e))
}

/// Classic run: writes the dead points and a results file.
pub fn cmd_classic(config: &FileConfig) -> Result<ClassicResult> {
    let dir = &config.output_dir;
    create_dir(dir)?;
    write_manifest(config, "classic")?;
    let classic = config.classic();
    let result = run_classic(&config.problem, &classic)?;
    write_dead(&dir.join(CLASSIC_DEAD), &result.dead)?;
    write_key_values(
        &dir.join(RESULTS),
        &[
            ("log_z", real(result.log_z)),
            ("information", real(result.information)),
            ("particle_count", classic.particle_count.to_string()),
            ("mcmc_steps", classic.mcmc_steps.to_string()),
            ("iterations", classic.iteration_count.to_string()),
            ("likelihood_calls", result.likelihood_calls.to_string()),
            ("true_log_z", real(config.problem.true_log_evidence())),
        ],
    )?;
    Ok(result)
}

/// Sampler comparison on the configured problem.
pub fn cmd_bench(
    config: &FileConfig,
    runs: Option<usize>,
    budget: Option<u64>,
    full: bool,
) -> Result<BenchTable> {
    let seed = config.run.seed;
    let mut plan = if full {
        BenchPlan::full(seed)
    } else {
        BenchPlan::desk(seed)
    };
    plan.problem = config.problem.clone();
    if let Some(runs) = runs {
        plan.runs = runs;
    }
    if let Some(budget) = budget {
        plan.budget = budget;
    }
    let table = run_bench(&plan, true)?;
    table.write(&config.output_dir)?;
    Ok(table)
}
