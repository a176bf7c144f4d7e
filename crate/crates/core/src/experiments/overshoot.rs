//! Overshoot classes over a parameter sweep, checked against the curves themselves.
//!
//! Each cell gets the closed-form class and a closed-form numerical verdict:
//! the task-1 error during task 2 is evaluated on a uniform grid over
//! `[0, T]` with `T = 20 / gamma_2`, and overshoot is declared when it exceeds
//! the forgetting value by more than [`CLOSED_FORM_MARGIN`]. Optionally the
//! simulated seed average is checked the same way with a margin of three
//! standard errors. Simulations always start task 2 from an exact copy of
//! teacher 1.

use rayon::prelude::*;
use serde::Serialize;

use super::sweep::{Axis, SweepSpec};
use super::{fmt_opt, seed_list, simulate_forgetting, Report, ReportMeta};
use crate::config::{validate, ContinualConfig, Time, GAMMA_LIMIT};
use crate::error::Result;
use crate::simulator::fmt_f64;
use crate::theory::{OvershootVariant, Theory};

pub const CLOSED_FORM_MARGIN: f64 = 1e-9;
pub const HORIZON_FACTOR: f64 = 20.0;
pub const DEFAULT_GRID_POINTS: usize = 4001;

pub const OVERSHOOT_HEADER: &str = "eta,r,sigma2_sq,r_effective,gamma2,c1,c2,forgetting_value,class,horizon,closed_form_max_excess,closed_form_verdict,sim_max_excess,sim_se,sim_verdict";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OvershootOptions {
    pub simulate: bool,
    /// Points of the closed-form grid over `[0, T]`.
    pub grid_points: usize,
    /// Simulated points over `[0, T]`, endpoints included.
    pub sim_points: usize,
}

impl Default for OvershootOptions {
    fn default() -> Self {
        OvershootOptions {
            simulate: false,
            grid_points: DEFAULT_GRID_POINTS,
            sim_points: 101,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Overshoot,
    NoOvershoot,
    /// Not evaluated: divergent cell, or simulation not requested.
    Skipped,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Overshoot => "OVERSHOOT",
            Verdict::NoOvershoot => "NO_OVERSHOOT",
            Verdict::Skipped => "SKIPPED",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OvershootCell {
    pub eta: f64,
    pub r: f64,
    pub sigma2_sq: f64,
    pub r_effective: f64,
    pub gamma2: f64,
    pub c1: f64,
    pub c2: f64,
    pub forgetting_value: Option<f64>,
    pub class: OvershootVariant,
    pub horizon: Option<f64>,
    pub closed_form_max_excess: Option<f64>,
    pub closed_form_verdict: Verdict,
    pub sim_max_excess: Option<f64>,
    pub sim_se: Option<f64>,
    pub sim_verdict: Verdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct OvershootReport {
    pub meta: ReportMeta,
    pub cells: Vec<OvershootCell>,
}

/// `eta` in `[0.25, 2.5]`, `r` in `[0.5, 1]` and `sigma2_sq` in `[0.2, 2.4]`.
pub fn default_overshoot_sweep(base: ContinualConfig, replicates: usize) -> Result<SweepSpec> {
    SweepSpec::new(
        base,
        vec![
            Axis::new("eta", 0.25, 2.5, 10)?,
            Axis::new("r", 0.5, 1.0, 11)?,
            Axis::new("sigma2_sq", 0.2, 2.4, 12)?,
        ],
        replicates,
    )
}

/// Largest `eg1 - forgetting value` on a uniform grid over `[0, horizon]`.
pub fn closed_form_max_excess(theory: &Theory, horizon: f64, points: usize) -> f64 {
    let last = (points.max(2) - 1) as f64;
    (0..points.max(2))
        .map(|i| theory.eg1_phase2_excess(Time::new(horizon * i as f64 / last)))
        .fold(f64::NEG_INFINITY, f64::max)
}

fn evaluate(config: &ContinualConfig, seeds: &[u64], opts: &OvershootOptions) -> Result<OvershootCell> {
    // the verdict only concerns task 2, so task 1's stability is not required
    let mut flagged = config.clone();
    flagged.divergence_study = true;
    let v = validate(&flagged)?;
    let theory = Theory::new(&v);
    let class = theory.classify_overshoot();
    let mut cell = OvershootCell {
        eta: config.eta,
        r: config.r,
        sigma2_sq: config.sigma2_sq,
        r_effective: v.r(),
        gamma2: v.gamma2(),
        c1: class.c1,
        c2: class.c2,
        forgetting_value: None,
        class: class.variant,
        horizon: None,
        closed_form_max_excess: None,
        closed_form_verdict: Verdict::Skipped,
        sim_max_excess: None,
        sim_se: None,
        sim_verdict: Verdict::Skipped,
    };
    if v.gamma2() >= GAMMA_LIMIT {
        return Ok(cell);
    }
    let fv = theory.forgetting_value()?;
    let horizon = HORIZON_FACTOR / v.gamma2();
    let excess = closed_form_max_excess(&theory, horizon, opts.grid_points);
    cell.forgetting_value = Some(fv);
    cell.horizon = Some(horizon);
    cell.closed_form_max_excess = Some(excess);
    cell.closed_form_verdict = if excess > CLOSED_FORM_MARGIN {
        Verdict::Overshoot
    } else {
        Verdict::NoOvershoot
    };

    if opts.simulate && !seeds.is_empty() {
        let record_dt = horizon / (opts.sim_points.max(2) - 1) as f64;
        let curve = simulate_forgetting(&v, seeds, horizon, record_dt)?;
        let (excess, se) = curve
            .iter()
            .map(|&(_, m, se)| (m - fv, se))
            .fold((f64::NEG_INFINITY, 0.0), |best, p| if p.0 > best.0 { p } else { best });
        cell.sim_max_excess = Some(excess);
        cell.sim_se = Some(se);
        cell.sim_verdict = if excess > 3.0 * se {
            Verdict::Overshoot
        } else {
            Verdict::NoOvershoot
        };
    }
    Ok(cell)
}

/// Overshoot class and verdicts on every cell of a sweep.
pub fn overshoot_phase_diagram(spec: &SweepSpec, opts: &OvershootOptions) -> Result<OvershootReport> {
    let seeds = seed_list(spec.base.seed, spec.replicates);
    let cells = spec
        .cells()?
        .par_iter()
        .map(|c| evaluate(&c.config, &seeds, opts))
        .collect::<Result<Vec<_>>>()?;
    let mut meta = ReportMeta::new("overshoot", spec.base.clone(), spec.base.r, if opts.simulate { seeds } else { Vec::new() });
    meta.sweep = Some(spec.clone());
    Ok(OvershootReport { meta, cells })
}

impl Report for OvershootReport {
    fn name(&self) -> &'static str {
        "overshoot"
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
                    fmt_f64(c.eta),
                    fmt_f64(c.r),
                    fmt_f64(c.sigma2_sq),
                    fmt_f64(c.r_effective),
                    fmt_f64(c.gamma2),
                    fmt_f64(c.c1),
                    fmt_f64(c.c2),
                    fmt_opt(c.forgetting_value),
                    c.class.to_string(),
                    fmt_opt(c.horizon),
                    fmt_opt(c.closed_form_max_excess),
                    c.closed_form_verdict.as_str().to_string(),
                    fmt_opt(c.sim_max_excess),
                    fmt_opt(c.sim_se),
                    c.sim_verdict.as_str().to_string(),
                ]
            })
            .collect();
        (OVERSHOOT_HEADER, rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::presets::preset;

    fn single(name: &str) -> OvershootCell {
        let base = preset(name).unwrap();
        let spec = SweepSpec::new(base, vec![], 1).unwrap();
        let rep = overshoot_phase_diagram(&spec, &OvershootOptions::default()).unwrap();
        assert_eq!(rep.cells.len(), 1);
        rep.cells[0]
    }

    #[test]
    fn fig3b_text_cell_overshoots() {
        let c = single("fig3b-text");
        assert_eq!(c.class, OvershootVariant::Occurs);
        assert_eq!(c.closed_form_verdict, Verdict::Overshoot);
        assert!((c.gamma2 - 1.36).abs() < 1e-12);
    }

    #[test]
    fn fig3a_cell_approaches_from_below() {
        let c = single("fig3a");
        assert_eq!(c.class, OvershootVariant::MayNotOccur);
        assert_eq!(c.closed_form_verdict, Verdict::NoOvershoot);
        assert!(c.closed_form_max_excess.unwrap() <= 0.0);
    }

    #[test]
    fn divergent_cells_are_not_evaluated() {
        let mut base = preset("fig3a").unwrap();
        base.sigma2_sq = 2.5;
        let spec = SweepSpec::new(base, vec![], 2).unwrap();
        let rep = overshoot_phase_diagram(&spec, &OvershootOptions { simulate: true, ..Default::default() }).unwrap();
        let c = rep.cells[0];
        assert_eq!(c.class, OvershootVariant::Diverges);
        assert_eq!(c.closed_form_verdict, Verdict::Skipped);
        assert_eq!(c.sim_verdict, Verdict::Skipped);
        assert_eq!(c.horizon, None);
    }

    #[test]
    fn simulated_verdict() {
        let mut base = preset("fig3b-text").unwrap();
        base.n = 500;
        let spec = SweepSpec::new(base, vec![], 4).unwrap();
        let rep = overshoot_phase_diagram(&spec, &OvershootOptions { simulate: true, sim_points: 41, ..Default::default() }).unwrap();
        let c = rep.cells[0];
        assert_eq!(c.sim_verdict, Verdict::Overshoot, "{c:?}");
    }

    /// Just above `gamma_2 = 1` the curve crosses the forgetting value only at
    /// `t* = ln(2 C1 / C2) / (gamma (gamma - 1))`, which can lie past the horizon.
    /// Such OCCURS cells get a no-overshoot verdict; everywhere else the class
    /// and the verdict agree.
    #[test]
    fn default_grid_is_consistent() {
        let spec = default_overshoot_sweep(preset("fig3a").unwrap(), 1).unwrap();
        let rep = overshoot_phase_diagram(&spec, &OvershootOptions::default()).unwrap();
        assert_eq!(rep.cells.len(), 10 * 11 * 12);
        let mut unresolved = 0;
        for c in &rep.cells {
            match (c.class, c.closed_form_verdict) {
                (OvershootVariant::Occurs, Verdict::Overshoot) => {}
                (OvershootVariant::Occurs, Verdict::NoOvershoot) => {
                    let g = c.gamma2;
                    let crossing = (2.0 * c.c1 / c.c2).ln() / (g * (g - 1.0));
                    assert!(g > 1.0 && g < 1.05, "{c:?}");
                    assert!(crossing > c.horizon.unwrap(), "{c:?}");
                    unresolved += 1;
                }
                (OvershootVariant::DoesNotOccur, v) => assert_eq!(v, Verdict::NoOvershoot, "{c:?}"),
                (OvershootVariant::Diverges, v) => assert_eq!(v, Verdict::Skipped, "{c:?}"),
                (OvershootVariant::MayNotOccur, v) => assert_ne!(v, Verdict::Skipped, "{c:?}"),
                (_, v) => panic!("unexpected verdict {v:?} for {c:?}"),
            }
        }
        assert_eq!(unresolved, 7);
        assert!(rep.cells.iter().any(|c| c.class == OvershootVariant::Occurs));
        assert!(rep.cells.iter().any(|c| c.class == OvershootVariant::Diverges));
    }
}
