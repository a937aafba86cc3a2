//! Run artifacts on disk. Reals are written with 17 significant digits so
//! they read back bit for bit.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::classic::DeadPoint;
use crate::error::{Error, Result};
use crate::explorer::SampleRecord;
use crate::levels::{Level, LevelSet};
use crate::model::{LikelihoodValue, ParamVector};

pub const LEVELS: &str = "levels.csv";
pub const SAMPLES: &str = "sample.csv";
pub const SAMPLE_INFO: &str = "sample_info.csv";
pub const MANIFEST: &str = "manifest.txt";
pub const RESULTS: &str = "results.txt";
pub const POSTERIOR: &str = "posterior_sample.csv";
pub const LOGL_VS_LOGX: &str = "logl_vs_logx.csv";
pub const COMPRESSION: &str = "level_compression.csv";
pub const CLASSIC_DEAD: &str = "classic_dead.csv";
pub const TRAJECTORY_SVG: &str = "trajectory.svg";
pub const COMPRESSION_SVG: &str = "level_compression.svg";
pub const LOGL_SVG: &str = "logl_vs_logx.svg";

const LEVEL_HEADER: [&str; 8] = [
    "index",
    "log_x",
    "cutoff_log_l",
    "cutoff_tiebreak",
    "visits",
    "exceeds",
    "occupancy",
    "expected_occupancy",
];
const INFO_HEADER: [&str; 4] = ["particle_id", "level_index_j", "log_l", "tiebreak"];

pub fn real(x: f64) -> String {
    format!("{x:.16e}")
}

fn format_error(path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn parse_field<T: std::str::FromStr>(
    path: &Path,
    record: &csv::StringRecord,
    index: usize,
) -> Result<T> {
    let row = record.position().map_or(0, |p| p.line());
    record
        .get(index)
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| format_error(path, format!("line {row}: bad field {}", index + 1)))
}

pub fn write_levels(path: &Path, levels: &[Level]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(LEVEL_HEADER)?;
    for (j, l) in levels.iter().enumerate() {
        w.write_record([
            j.to_string(),
            real(l.log_x),
            real(l.cutoff.log_l),
            real(l.cutoff.tiebreak),
            l.visits.to_string(),
            l.exceeds.to_string(),
            l.occupancy.to_string(),
            real(l.expected_occupancy),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_levels(path: &Path) -> Result<LevelSet> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut levels = Vec::new();
    for (j, record) in reader.records().enumerate() {
        let record = record?;
        let index: usize = parse_field(path, &record, 0)?;
        if index != j {
            return Err(format_error(path, format!("level {index} out of order")));
        }
        levels.push(Level::with_counters(
            LikelihoodValue::new(
                parse_field(path, &record, 2)?,
                parse_field(path, &record, 3)?,
            ),
            parse_field(path, &record, 1)?,
            parse_field(path, &record, 4)?,
            parse_field(path, &record, 5)?,
            parse_field(path, &record, 6)?,
            parse_field(path, &record, 7)?,
        ));
    }
    LevelSet::from_levels(levels).ok_or_else(|| format_error(path, "inconsistent level ladder"))
}

/// Appends saved samples to `sample.csv` and `sample_info.csv` as a run
/// produces them.
pub struct SampleWriter {
    theta: BufWriter<File>,
    info: csv::Writer<File>,
    theta_path: PathBuf,
}

impl SampleWriter {
    pub fn create(dir: &Path) -> Result<Self> {
        let theta_path = dir.join(SAMPLES);
        let theta = File::create(&theta_path).map_err(|e| Error::io(&theta_path, e))?;
        let mut info = csv::Writer::from_path(dir.join(SAMPLE_INFO))?;
        info.write_record(INFO_HEADER)?;
        Ok(Self {
            theta: BufWriter::new(theta),
            info,
            theta_path,
        })
    }

    pub fn append(&mut self, sample: &SampleRecord) -> Result<()> {
        let row: Vec<String> = sample.theta.iter().map(|x| real(*x)).collect();
        writeln!(self.theta, "{}", row.join(",")).map_err(|e| Error::io(&self.theta_path, e))?;
        self.info.write_record([
            sample.particle.to_string(),
            sample.level.to_string(),
            real(sample.likelihood.log_l),
            real(sample.likelihood.tiebreak),
        ])?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.theta
            .flush()
            .map_err(|e| Error::io(&self.theta_path, e))?;
        self.info
            .flush()
            .map_err(|e| Error::io(&self.theta_path, e))
    }
}

pub fn read_samples(dir: &Path) -> Result<Vec<SampleRecord>> {
    let theta_path = dir.join(SAMPLES);
    let info_path = dir.join(SAMPLE_INFO);
    let mut thetas = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(&theta_path)?;
    let mut info = csv::Reader::from_path(&info_path)?;
    let mut samples = Vec::new();
    let mut theta_rows = thetas.records();
    for record in info.records() {
        let record = record?;
        let theta_record = theta_rows
            .next()
            .ok_or_else(|| format_error(&theta_path, "fewer rows than sample_info.csv"))??;
        let theta = (0..theta_record.len())
            .map(|i| parse_field(&theta_path, &theta_record, i))
            .collect::<Result<Vec<f64>>>()?;
        samples.push(SampleRecord {
            particle: parse_field(&info_path, &record, 0)?,
            level: parse_field(&info_path, &record, 1)?,
            likelihood: LikelihoodValue::new(
                parse_field(&info_path, &record, 2)?,
                parse_field(&info_path, &record, 3)?,
            ),
            theta: ParamVector::new(theta),
        });
    }
    if theta_rows.next().is_some() {
        return Err(format_error(&theta_path, "more rows than sample_info.csv"));
    }
    Ok(samples)
}

pub fn write_dead(path: &Path, dead: &[DeadPoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["log_x", "log_l", "tiebreak"])?;
    for d in dead {
        w.write_record([real(d.log_x), real(d.log_l()), real(d.likelihood.tiebreak)])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_dead(path: &Path) -> Result<Vec<DeadPoint>> {
    let mut reader = csv::Reader::from_path(path)?;
    reader
        .records()
        .map(|record| {
            let record = record?;
            Ok(DeadPoint {
                log_x: parse_field(path, &record, 0)?,
                likelihood: LikelihoodValue::new(
                    parse_field(path, &record, 1)?,
                    parse_field(path, &record, 2)?,
                ),
            })
        })
        .collect()
}

/// A CSV of real columns.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|x| real(*x)))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `key = value` lines, the same shape as run files.
pub fn write_key_values(path: &Path, pairs: &[(&str, String)]) -> Result<()> {
    let text: String = pairs.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_key_values(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explorer::{Engine, RunConfig};
    use crate::problems::TwinGaussian;

    #[test]
    fn reals_survive_text() {
        for x in [
            0.1,
            -1.0 / 3.0,
            1e-300,
            6.02214076e23,
            f64::NEG_INFINITY,
            0.0,
        ] {
            assert_eq!(real(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn levels_and_samples_round_trip() {
        let model = TwinGaussian::default();
        let config = RunConfig {
            new_level_interval: 500,
            save_interval: 500,
            likelihood_budget: 60_000,
            particle_count: 2,
            ..RunConfig::default()
        };
        let mut engine = Engine::new(&model, config).unwrap();
        engine.run().unwrap();
        let dir = tempfile::tempdir().unwrap();

        let levels = engine.levels().snapshot();
        write_levels(&dir.path().join(LEVELS), &levels).unwrap();
        let back = read_levels(&dir.path().join(LEVELS)).unwrap();
        assert_eq!(back.len(), levels.len());
        for (a, b) in back.snapshot().iter().zip(&levels) {
            assert_eq!(a.log_x.to_bits(), b.log_x.to_bits());
            assert_eq!(a.cutoff, b.cutoff);
            assert_eq!(a.cutoff.log_l.to_bits(), b.cutoff.log_l.to_bits());
            assert_eq!(
                (a.visits, a.exceeds, a.occupancy),
                (b.visits, b.exceeds, b.occupancy)
            );
            assert_eq!(
                a.expected_occupancy.to_bits(),
                b.expected_occupancy.to_bits()
            );
        }

        let mut writer = SampleWriter::create(dir.path()).unwrap();
        for s in engine.samples() {
            writer.append(s).unwrap();
        }
        writer.finish().unwrap();
        let samples = read_samples(dir.path()).unwrap();
        assert_eq!(samples, engine.samples());
    }

    #[test]
    fn dead_points_round_trip() {
        let dead = vec![
            DeadPoint {
                log_x: -0.01,
                likelihood: LikelihoodValue::new(-3.25, 0.125),
            },
            DeadPoint {
                log_x: -0.02,
                likelihood: LikelihoodValue::new(1.0 / 7.0, 0.9),
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(CLASSIC_DEAD);
        write_dead(&path, &dead).unwrap();
        assert_eq!(read_dead(&path).unwrap(), dead);
    }

    #[test]
    fn malformed_files_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(LEVELS);
        std::fs::write(&path, "index,log_x\n0,zero\n").unwrap();
        assert!(read_levels(&path).is_err());
        std::fs::write(dir.path().join(SAMPLES), "0.1,0.2\n").unwrap();
        std::fs::write(
            dir.path().join(SAMPLE_INFO),
            "particle_id,level_index_j,log_l,tiebreak\n",
        )
        .unwrap();
        assert!(matches!(
            read_samples(dir.path()),
            Err(Error::Format { .. })
        ));
    }
}
