//! Forgetting value over the `(r, q)` plane.

use rayon::prelude::*;
use serde::Serialize;

use super::sweep::{Axis, SweepSpec};
use super::{fmt_opt, seed_list, simulate_forgetting, Report, ReportMeta};
use crate::config::{validate, ContinualConfig};
use crate::error::{Error, Result};
use crate::simulator::fmt_f64;
use crate::theory::Theory;

pub const HEATMAP_HEADER: &str = "r,q,r_effective,gamma2,status,forgetting_value,sim_eg1_end,sim_eg1_end_se";

/// Default mesh size along each axis.
pub const HEATMAP_POINTS: usize = 26;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatmapOptions {
    /// Also simulate each cell and report the seed-averaged final task-1 error.
    pub simulate: bool,
    /// Task-2 length of each simulation.
    pub t2: f64,
}

impl Default for HeatmapOptions {
    fn default() -> Self {
        HeatmapOptions {
            simulate: false,
            t2: super::presets::DEFAULT_T2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CellStatus {
    Ok,
    Diverged,
}

impl CellStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            CellStatus::Ok => "OK",
            CellStatus::Diverged => "DIVERGED",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeatmapCell {
    pub r: f64,
    pub q: f64,
    pub r_effective: f64,
    pub gamma2: f64,
    pub status: CellStatus,
    pub forgetting_value: Option<f64>,
    pub sim_eg1_end: Option<f64>,
    pub sim_eg1_end_se: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct HeatmapReport {
    pub meta: ReportMeta,
    /// Row-major in the sweep's axis order.
    pub cells: Vec<HeatmapCell>,
}

/// The 26 x 26 grid over `r` in `[0.5, 1]` and `q` in `[0, 1]`.
pub fn default_heatmap_sweep(base: ContinualConfig, replicates: usize) -> Result<SweepSpec> {
    SweepSpec::new(
        base,
        vec![
            Axis::new("r", 0.5, 1.0, HEATMAP_POINTS)?,
            Axis::new("q", 0.0, 1.0, HEATMAP_POINTS)?,
        ],
        replicates,
    )
}

fn evaluate(config: &ContinualConfig, seeds: &[u64], opts: &HeatmapOptions) -> Result<HeatmapCell> {
    let cell = |r_effective, gamma2, status, fv, sim: Option<(f64, f64)>| HeatmapCell {
        r: config.r,
        q: config.q,
        r_effective,
        gamma2,
        status,
        forgetting_value: fv,
        sim_eg1_end: sim.map(|s| s.0),
        sim_eg1_end_se: sim.map(|s| s.1),
    };
    match validate(config) {
        Ok(v) => {
            let fv = Theory::new(&v).forgetting_value()?;
            let sim = if opts.simulate {
                simulate_forgetting(&v, seeds, opts.t2, opts.t2.max(f64::MIN_POSITIVE))?
                    .last()
                    .map(|&(_, m, se)| (m, se))
            } else {
                None
            };
            Ok(cell(v.r(), v.gamma2(), CellStatus::Ok, Some(fv), sim))
        }
        Err(Error::Divergent { .. }) => {
            let mut flagged = config.clone();
            flagged.divergence_study = true;
            let v = validate(&flagged)?;
            Ok(cell(v.r(), v.gamma2(), CellStatus::Diverged, None, None))
        }
        Err(e) => Err(e),
    }
}

/// Forgetting value on every cell of an `(r, q)` sweep.
///
/// The sweep must have exactly the axes `r` and `q`. Cells whose stability
/// products reach 2 are kept and marked DIVERGED.
pub fn forgetting_heatmap(spec: &SweepSpec, opts: &HeatmapOptions) -> Result<HeatmapReport> {
    let mut names: Vec<&str> = spec.axes.iter().map(|a| a.param.as_str()).collect();
    names.sort_unstable();
    if names != ["q", "r"] {
        return Err(Error::InvalidArgument(format!(
            "heatmap sweeps need exactly the axes r and q, got {names:?}"
        )));
    }
    let seeds = seed_list(spec.base.seed, spec.replicates);
    let cells = spec
        .cells()?
        .par_iter()
        .map(|c| evaluate(&c.config, &seeds, opts))
        .collect::<Result<Vec<_>>>()?;

    let mut meta = ReportMeta::new("heatmap", spec.base.clone(), spec.base.r, if opts.simulate { seeds } else { Vec::new() });
    meta.sweep = Some(spec.clone());
    Ok(HeatmapReport { meta, cells })
}

impl Report for HeatmapReport {
    fn name(&self) -> &'static str {
        "heatmap"
    }

    fn meta(&self) -> &ReportMeta {
        &self.meta
    }

    fn table(&self) -> (&'static str, Vec<Vec<String>>) {
        let rows = self
            .cells
            .iter()
            .map(|c| {
                vec![
                    fmt_f64(c.r),
                    fmt_f64(c.q),
                    fmt_f64(c.r_effective),
                    fmt_f64(c.gamma2),
                    c.status.as_str().to_string(),
                    fmt_opt(c.forgetting_value),
                    fmt_opt(c.sim_eg1_end),
                    fmt_opt(c.sim_eg1_end_se),
                ]
            })
            .collect();
        (HEATMAP_HEADER, rows)
    }
}
