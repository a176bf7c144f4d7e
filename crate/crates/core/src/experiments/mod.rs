//! Experiment drivers and their reports.
//!
//! Every report carries a [`ReportMeta`] with the resolved configuration, the
//! seeds and the numerical settings, so any row can be regenerated exactly.
//! CSV output puts the metadata in a `<name>.meta.json` file next to the CSV;
//! JSON output embeds it.

pub mod curve;
pub mod heatmap;
pub mod overshoot;
pub mod presets;
pub mod sweep;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ContinualConfig, T1Mode, ValidatedConfig};
use crate::error::{Error, Result};
use crate::simulator::{fmt_f64, run_continual, Schedule, Trajectory};

pub use curve::{learning_curve_experiment, CurveOptions, CurveReport};
pub use heatmap::{default_heatmap_sweep, forgetting_heatmap, HeatmapOptions, HeatmapReport};
pub use overshoot::{default_overshoot_sweep, overshoot_phase_diagram, OvershootOptions, OvershootReport};
pub use presets::{preset, PRESETS};
pub use sweep::{Axis, SweepSpec};

/// Output format of a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Format> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::InvalidArgument(format!("unknown format {other:?}; expected csv or json"))),
        }
    }
}

/// Everything needed to regenerate a report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportMeta {
    pub kind: &'static str,
    pub version: &'static str,
    /// Configuration after validation (`r` quantized). For sweeps, the base.
    pub config: ContinualConfig,
    pub r_requested: f64,
    pub seeds: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Schedule>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

impl ReportMeta {
    pub fn new(kind: &'static str, config: ContinualConfig, r_requested: f64, seeds: Vec<u64>) -> ReportMeta {
        ReportMeta {
            kind,
            version: env!("CARGO_PKG_VERSION"),
            config,
            r_requested,
            seeds,
            dt: None,
            schedule: None,
            sweep: None,
        }
    }
}

/// `count` consecutive seeds starting at `base`.
pub fn seed_list(base: u64, count: usize) -> Vec<u64> {
    (0..count as u64).map(|i| base.wrapping_add(i)).collect()
}

/// Sample mean and standard error; the error is 0 for fewer than two values.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Run one trajectory per seed in parallel, returned in seed order.
pub fn run_seeds(cfg: &ValidatedConfig, schedule: &Schedule, seeds: &[u64]) -> Result<Vec<Trajectory>> {
    seeds
        .par_iter()
        .map(|&seed| run_continual(&cfg.with_seed(seed), schedule))
        .collect()
}

/// Seed-averaged task-1 error over task 2 started from an exact copy of teacher 1.
///
/// Returns `(t, mean, standard error)` per recorded point.
pub fn simulate_forgetting(
    cfg: &ValidatedConfig,
    seeds: &[u64],
    t2: f64,
    record_dt: f64,
) -> Result<Vec<(f64, f64, f64)>> {
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("need at least one seed".into()));
    }
    let mut copy = cfg.config().clone();
    copy.t1_mode = T1Mode::ExactCopy;
    let cfg = crate::config::validate(&copy)?;
    let schedule = Schedule::from_times(&cfg, 0.0, t2, record_dt)?;
    let runs: Vec<Vec<(f64, f64)>> = seeds
        .iter()
        .map(|&seed| {
            run_continual(&cfg.with_seed(seed), &schedule)
                .map(|traj| traj.phase(2).map(|r| (r.t, r.eg1)).collect())
        })
        .collect::<Result<_>>()?;
    Ok((0..runs[0].len())
        .map(|i| {
            let values: Vec<f64> = runs.iter().map(|run| run[i].1).collect();
            let (m, se) = mean_se(&values);
            (runs[0][i].0, m, se)
        })
        .collect())
}

pub(crate) fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Write a CSV with a fixed header; each row must have as many fields.
pub fn write_csv(path: &Path, header: &str, rows: &[Vec<String>]) -> Result<()> {
    let width = header.split(',').count();
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{header}")?;
    for row in rows {
        debug_assert_eq!(row.len(), width);
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// A report that can be written in either format under `dir`.
pub trait Report: Serialize {
    /// File stem, e.g. `curve`.
    fn name(&self) -> &'static str;
    fn meta(&self) -> &ReportMeta;
    /// CSV header and rows of the main table.
    fn table(&self) -> (&'static str, Vec<Vec<String>>);
    /// Extra files written next to the main CSV table.
    fn write_extra_csv(&self, _dir: &Path) -> Result<Vec<PathBuf>> {
        Ok(Vec::new())
    }

    /// Write the report and return the paths created.
    fn write(&self, dir: &Path, format: Format) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        match format {
            Format::Json => {
                let path = dir.join(format!("{}.json", self.name()));
                write_json(&path, self)?;
                written.push(path);
            }
            Format::Csv => {
                let (header, rows) = self.table();
                let path = dir.join(format!("{}.csv", self.name()));
                write_csv(&path, header, &rows)?;
                written.push(path);
                written.extend(self.write_extra_csv(dir)?);
                let path = dir.join(format!("{}.meta.json", self.name()));
                write_json(&path, self.meta())?;
                written.push(path);
            }
        }
        Ok(written)
    }
}
