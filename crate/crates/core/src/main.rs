use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use forgetting_dynamics::experiments::{
    default_heatmap_sweep, default_overshoot_sweep, forgetting_heatmap, learning_curve_experiment,
    overshoot_phase_diagram, preset, write_csv, write_json, CurveOptions, Format, HeatmapOptions,
    OvershootOptions, Report, SweepSpec,
};
use forgetting_dynamics::simulator::fmt_f64;
use forgetting_dynamics::{validate, ContinualConfig, Error, Result, Theory};

/// Catastrophic forgetting in two-task teacher-student online SGD.
#[derive(Parser)]
#[command(name = "forgetting", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learning curves: seed-averaged simulation vs closed form vs ODE.
    Curve {
        #[command(flatten)]
        common: Common,
        /// Task-1 length in time units (a TRAINED endpoint in the config wins).
        #[arg(long, default_value_t = 8.0)]
        t1: f64,
        /// Task-2 length in time units.
        #[arg(long, default_value_t = 8.0)]
        t2: f64,
        /// Recording interval in time units.
        #[arg(long, default_value_t = 0.1)]
        record_dt: f64,
        /// Upper bound on the RK4 step.
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
    },
    /// Forgetting value over the (r, q) plane.
    Heatmap {
        #[command(flatten)]
        common: Common,
        /// Sweep definition (JSON); defaults to 26 x 26 over r in [0.5, 1], q in [0, 1].
        #[arg(long)]
        sweep: Option<PathBuf>,
        /// Also simulate every cell.
        #[arg(long)]
        simulate: bool,
        /// Task-2 length of each simulation.
        #[arg(long, default_value_t = 8.0)]
        t2: f64,
    },
    /// Overshoot classes and verdicts over (eta, r, sigma2_sq).
    Overshoot {
        #[command(flatten)]
        common: Common,
        /// Sweep definition (JSON); defaults to a 10 x 11 x 12 grid.
        #[arg(long)]
        sweep: Option<PathBuf>,
        /// Also simulate every cell.
        #[arg(long)]
        simulate: bool,
    },
    /// Validate a configuration and print its derived quantities.
    Validate {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Configuration file (JSON).
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Named configuration: fig3a, fig3b-caption, fig3b-text, fig4.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Number of seeds per curve or cell.
    #[arg(long, default_value_t = 10)]
    seeds: usize,
    /// csv or json.
    #[arg(long, default_value = "csv")]
    format: String,
}

impl Common {
    fn config(&self, default_preset: &str) -> Result<ContinualConfig> {
        match (&self.config, &self.preset) {
            (Some(path), _) => ContinualConfig::from_json(&std::fs::read_to_string(path)?),
            (None, Some(name)) => preset(name),
            (None, None) => preset(default_preset),
        }
    }

    fn format(&self) -> Result<Format> {
        self.format.parse()
    }
}

/// A sweep file if given, otherwise the default grid around the selected config.
fn load_sweep(
    path: Option<&Path>,
    common: &Common,
    default_preset: &str,
    default_grid: fn(ContinualConfig, usize) -> Result<SweepSpec>,
) -> Result<SweepSpec> {
    let mut spec = match path {
        Some(p) => serde_json::from_str::<SweepSpec>(&std::fs::read_to_string(p)?)?,
        None => default_grid(common.config(default_preset)?, 1)?,
    };
    spec.replicates = common.seeds;
    spec.check()?;
    Ok(spec)
}

#[derive(Serialize)]
struct Validation {
    config: ContinualConfig,
    r_requested: f64,
    task_dim: usize,
    common_dim: usize,
    gamma1: f64,
    gamma2: f64,
    ill_conditioned: bool,
    c1: f64,
    c2: f64,
    forgetting_value: Option<f64>,
    overshoot_class: String,
}

const VALIDATION_HEADER: &str =
    "n,r,r_requested,task_dim,common_dim,gamma1,gamma2,ill_conditioned,c1,c2,forgetting_value,overshoot_class";

fn run_validate(common: &Common) -> Result<()> {
    let cfg = validate(&common.config("fig3a")?)?;
    let theory = Theory::new(&cfg);
    let class = theory.classify_overshoot();
    let report = Validation {
        config: cfg.config().clone(),
        r_requested: cfg.r_requested(),
        task_dim: cfg.task_dim(),
        common_dim: cfg.common_dim(),
        gamma1: cfg.gamma1(),
        gamma2: cfg.gamma2(),
        ill_conditioned: cfg.ill_conditioned(),
        c1: class.c1,
        c2: class.c2,
        forgetting_value: theory.forgetting_value().ok(),
        overshoot_class: class.variant.to_string(),
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    std::fs::create_dir_all(&common.out)?;
    let path = match common.format()? {
        Format::Json => {
            let path = common.out.join("validate.json");
            write_json(&path, &report)?;
            path
        }
        Format::Csv => {
            let path = common.out.join("validate.csv");
            let row = vec![
                cfg.n().to_string(),
                fmt_f64(cfg.r()),
                fmt_f64(cfg.r_requested()),
                cfg.task_dim().to_string(),
                cfg.common_dim().to_string(),
                fmt_f64(cfg.gamma1()),
                fmt_f64(cfg.gamma2()),
                cfg.ill_conditioned().to_string(),
                fmt_f64(class.c1),
                fmt_f64(class.c2),
                report.forgetting_value.map(fmt_f64).unwrap_or_default(),
                report.overshoot_class.clone(),
            ];
            write_csv(&path, VALIDATION_HEADER, &[row])?;
            path
        }
    };
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn emit(report: &impl Report, common: &Common) -> Result<()> {
    for path in report.write(&common.out, common.format()?)? {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Curve {
            common,
            t1,
            t2,
            record_dt,
            dt,
        } => {
            common.format()?;
            let cfg = validate(&common.config("fig3a")?)?;
            let opts = CurveOptions {
                seeds: common.seeds,
                t1,
                t2,
                record_dt,
                dt,
            };
            let report = learning_curve_experiment(&cfg, &opts)?;
            let s = &report.summary;
            eprintln!(
                "theory-ode {:.3e}  theory-sim eg1 {:.3e} eg2 {:.3e}  forgetting value {:.6}  overshoot {} ({})",
                s.sup_theory_ode,
                s.sup_theory_sim_eg1,
                s.sup_theory_sim_eg2,
                s.forgetting_value,
                s.overshoot_detected,
                s.overshoot_class
            );
            emit(&report, &common)
        }
        Command::Heatmap {
            common,
            sweep,
            simulate,
            t2,
        } => {
            common.format()?;
            let spec = load_sweep(sweep.as_deref(), &common, "fig4", default_heatmap_sweep)?;
            let report = forgetting_heatmap(&spec, &HeatmapOptions { simulate, t2 })?;
            emit(&report, &common)
        }
        Command::Overshoot {
            common,
            sweep,
            simulate,
        } => {
            common.format()?;
            let spec = load_sweep(sweep.as_deref(), &common, "fig3a", default_overshoot_sweep)?;
            let opts = OvershootOptions {
                simulate,
                ..Default::default()
            };
            emit(&overshoot_phase_diagram(&spec, &opts)?, &common)
        }
        Command::Validate { common } => run_validate(&common),
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        e if e.is_validation() => 2,
        Error::HardGate(_) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
