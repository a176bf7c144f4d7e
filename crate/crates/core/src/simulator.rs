//! Finite-`n` online SGD on the two-task problem.
//!
//! Randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng`), seeded from the
//! config seed, with one independent stream per purpose so that teachers,
//! student initialization and each task's data never share draws:
//!
//! | stream | use                     |
//! |--------|-------------------------|
//! | 0      | teachers                |
//! | 1      | student initialization  |
//! | 2      | task-1 inputs           |
//! | 3      | task-2 inputs           |
//!
//! Gaussians are drawn with the ziggurat sampler of `rand_distr::StandardNormal`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::config::{T1Mode, Time, ValidatedConfig};
use crate::error::{Error, Result};
use crate::order::OrderParamState;

pub const TEACHER_STREAM: u64 = 0;
pub const STUDENT_STREAM: u64 = 1;
pub const TASK1_STREAM: u64 = 2;
pub const TASK2_STREAM: u64 = 3;

/// Generator for one purpose of one run.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Task {
    One,
    Two,
}

impl Task {
    pub fn number(self) -> u8 {
        match self {
            Task::One => 1,
            Task::Two => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightTriple {
    pub b1: Vec<f64>,
    pub b2: Vec<f64>,
    pub j: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn gaussian_vec<R: Rng + ?Sized>(rng: &mut R, len: usize, std: f64) -> Vec<f64> {
    (0..len)
        .map(|_| std * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Teacher pair with target norms `sigma_B1`, `sigma_B2` and cosine `q`.
///
/// `b1 = sigma_B1 z1 / sqrt(n)` and `b2 = sigma_B2 (q z1 + sqrt(1 - q^2) z2) / sqrt(n)`
/// for independent standard normal `z1`, `z2`, so every component pair has the
/// same correlation. With `exact_similarity`, `z1` is normalized and `z2` is
/// orthonormalized against it first, which makes `|b1|^2`, `|b2|^2` and the
/// cosine exact.
pub fn gen_teachers<R: Rng + ?Sized>(cfg: &ValidatedConfig, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    let n = cfg.n();
    let q = cfg.q();
    let orth = (1.0 - q * q).max(0.0).sqrt();
    let mut z1 = gaussian_vec(rng, n, 1.0);
    let mut z2 = gaussian_vec(rng, n, 1.0);
    let scale = if cfg.config().exact_similarity {
        let norm1 = dot(&z1, &z1).sqrt();
        z1.iter_mut().for_each(|v| *v /= norm1);
        let along = dot(&z2, &z1);
        z2.iter_mut().zip(&z1).for_each(|(v, u)| *v -= along * u);
        let norm2 = dot(&z2, &z2).sqrt();
        z2.iter_mut().for_each(|v| *v /= norm2);
        1.0
    } else {
        1.0 / (n as f64).sqrt()
    };
    let b1 = z1.iter().map(|z| cfg.sigma_b1() * scale * z).collect();
    let b2 = z1
        .iter()
        .zip(&z2)
        .map(|(u, w)| cfg.sigma_b2() * scale * (q * u + orth * w))
        .collect();
    (b1, b2)
}

/// Student initialization `J_i ~ N(0, sigma_J^2 / n)`.
pub fn gen_student<R: Rng + ?Sized>(cfg: &ValidatedConfig, rng: &mut R) -> Vec<f64> {
    gaussian_vec(rng, cfg.n(), cfg.sigma_j() / (cfg.n() as f64).sqrt())
}

fn support(cfg: &ValidatedConfig, task: Task) -> std::ops::Range<usize> {
    match task {
        Task::One => cfg.support1(),
        Task::Two => cfg.support2(),
    }
}

fn input_std(cfg: &ValidatedConfig, task: Task) -> f64 {
    match task {
        Task::One => cfg.sigma1_sq().sqrt(),
        Task::Two => cfg.sigma2_sq().sqrt(),
    }
}

/// A full-length input for `task`: Gaussian on the task's support, exactly zero elsewhere.
pub fn sample_input<R: Rng + ?Sized>(task: Task, cfg: &ValidatedConfig, rng: &mut R) -> Vec<f64> {
    let mut x = vec![0.0; cfg.n()];
    let std = input_std(cfg, task);
    for v in &mut x[support(cfg, task)] {
        *v = std * rng.sample::<f64, _>(StandardNormal);
    }
    x
}

/// `j += eta/n * x (b.x - j.x)` restricted to the index range where `x` lives.
///
/// `x` holds only the support components, starting at `offset`. Returns the
/// residual `b.x - j.x`.
pub fn apply_update(j: &mut [f64], teacher: &[f64], x: &[f64], offset: usize, eta_over_n: f64) -> f64 {
    let range = offset..offset + x.len();
    let residual: f64 = x
        .iter()
        .zip(&teacher[range.clone()])
        .zip(&j[range.clone()])
        .map(|((xi, bi), ji)| (bi - ji) * xi)
        .sum();
    let step = eta_over_n * residual;
    for (ji, xi) in j[range].iter_mut().zip(x) {
        *ji += step * xi;
    }
    residual
}

/// One online SGD step on `task` with a fresh input. `scratch` is resized as needed.
pub fn sgd_step<R: Rng + ?Sized>(
    j: &mut [f64],
    teacher: &[f64],
    task: Task,
    cfg: &ValidatedConfig,
    rng: &mut R,
    scratch: &mut Vec<f64>,
) -> Result<()> {
    let range = support(cfg, task);
    let std = input_std(cfg, task);
    scratch.clear();
    scratch.extend((0..range.len()).map(|_| std * rng.sample::<f64, _>(StandardNormal)));
    let residual = apply_update(j, teacher, scratch, range.start, cfg.eta() / cfg.n() as f64);
    // the squared residual overflows long before the weights do
    if (residual * residual).is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite {
            phase: task.number(),
            step: 0,
        })
    }
}

#[derive(Default)]
struct BlockSums {
    jj: f64,
    b1j: f64,
    b2j: f64,
    b1b1: f64,
    b2b2: f64,
    b1b2: f64,
}

impl BlockSums {
    fn over(t: &WeightTriple, range: std::ops::Range<usize>) -> BlockSums {
        let mut s = BlockSums::default();
        for i in range {
            let (b1, b2, j) = (t.b1[i], t.b2[i], t.j[i]);
            s.jj += j * j;
            s.b1j += b1 * j;
            s.b2j += b2 * j;
            s.b1b1 += b1 * b1;
            s.b2b2 += b2 * b2;
            s.b1b2 += b1 * b2;
        }
        s
    }
}

/// Exact masked overlaps of the current weights.
pub fn measure_order_params(triple: &WeightTriple, cfg: &ValidatedConfig) -> OrderParamState {
    let only1 = BlockSums::over(triple, 0..cfg.private_dim());
    let both = BlockSums::over(triple, cfg.common());
    let only2 = BlockSums::over(triple, cfg.task_dim()..cfg.n());
    OrderParamState {
        q1: only1.jj + both.jj,
        q2: both.jj + only2.jj,
        q12: both.jj,
        r1_1: only1.b1j + both.b1j,
        r2_1: both.b1j + only2.b1j,
        r1_2: only1.b2j + both.b2j,
        r2_2: both.b2j + only2.b2j,
        r12_1: both.b1j,
        r12_2: both.b2j,
        t1_1: only1.b1b1 + both.b1b1,
        t2_2: both.b2b2 + only2.b2b2,
        t12_1: both.b1b1,
        t12_2: both.b2b2,
        q_prime: both.b1b2,
    }
}

/// Step counts for the two phases and the recording cadence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Schedule {
    pub steps_task1: u64,
    pub steps_task2: u64,
    pub record_every: u64,
}

impl Schedule {
    /// Phase lengths in time units; records every `record_dt` time units (at least every step).
    pub fn from_times(cfg: &ValidatedConfig, t1: f64, t2: f64, record_dt: f64) -> Result<Schedule> {
        for (name, v) in [("t1", t1), ("t2", t2)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !(record_dt.is_finite() && record_dt > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "recording interval must be > 0, got {record_dt}"
            )));
        }
        Ok(Schedule {
            steps_task1: Time::new(t1).to_steps(cfg),
            steps_task2: Time::new(t2).to_steps(cfg),
            record_every: Time::new(record_dt).to_steps(cfg).max(1),
        })
    }

    /// Phase-1 length taken from a TRAINED endpoint, `default_t1` otherwise.
    pub fn for_config(cfg: &ValidatedConfig, default_t1: f64, t2: f64) -> Result<Schedule> {
        let t1 = match cfg.t1_mode() {
            T1Mode::Trained { t_end } => t_end,
            T1Mode::ExactCopy => default_t1,
        };
        Schedule::from_times(cfg, t1, t2, DEFAULT_RECORD_DT)
    }
}

/// Default recording cadence: every `r n / 10` steps.
pub const DEFAULT_RECORD_DT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    pub phase: u8,
    /// Steps since the start of this phase.
    pub step: u64,
    pub t: f64,
    pub eg1: f64,
    pub eg2: f64,
    pub order: OrderParamState,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub seed: u64,
    pub records: Vec<TrajectoryRecord>,
}

impl Trajectory {
    pub fn phase(&self, phase: u8) -> impl Iterator<Item = &TrajectoryRecord> {
        self.records.iter().filter(move |r| r.phase == phase)
    }
}

fn record(cfg: &ValidatedConfig, triple: &WeightTriple, phase: u8, step: u64) -> TrajectoryRecord {
    let order = measure_order_params(triple, cfg);
    TrajectoryRecord {
        phase,
        step,
        t: Time::from_steps(step, cfg).value(),
        eg1: order.eg1(cfg.sigma1_sq()),
        eg2: order.eg2(cfg.sigma2_sq()),
        order,
    }
}

/// Sample the teachers and the initial student for this config's seed.
pub fn initial_weights(cfg: &ValidatedConfig) -> WeightTriple {
    let (b1, b2) = gen_teachers(cfg, &mut stream_rng(cfg.seed(), TEACHER_STREAM));
    let j = gen_student(cfg, &mut stream_rng(cfg.seed(), STUDENT_STREAM));
    WeightTriple { b1, b2, j }
}

/// Overwrite the student with teacher 1 on task 1's support.
pub fn exact_copy(triple: &mut WeightTriple, cfg: &ValidatedConfig) {
    let s = cfg.support1();
    triple.j[s.clone()].copy_from_slice(&triple.b1[s]);
}

fn run_phase(
    cfg: &ValidatedConfig,
    triple: &mut WeightTriple,
    task: Task,
    steps: u64,
    record_every: u64,
    out: &mut Vec<TrajectoryRecord>,
) -> Result<()> {
    let phase = task.number();
    let stream = match task {
        Task::One => TASK1_STREAM,
        Task::Two => TASK2_STREAM,
    };
    let mut rng = stream_rng(cfg.seed(), stream);
    let mut scratch = Vec::with_capacity(cfg.task_dim());
    let teacher = match task {
        Task::One => std::mem::take(&mut triple.b1),
        Task::Two => std::mem::take(&mut triple.b2),
    };
    let restore = |triple: &mut WeightTriple, teacher: Vec<f64>| match task {
        Task::One => triple.b1 = teacher,
        Task::Two => triple.b2 = teacher,
    };

    for m in 1..=steps {
        if let Err(e) = sgd_step(&mut triple.j, &teacher, task, cfg, &mut rng, &mut scratch) {
            restore(triple, teacher);
            return Err(match e {
                Error::NonFinite { .. } => Error::NonFinite { phase, step: m },
                other => other,
            });
        }
        if m % record_every == 0 || m == steps {
            restore(triple, teacher.clone());
            out.push(record(cfg, triple, phase, m));
        }
    }
    restore(triple, teacher);
    Ok(())
}

/// Train task 1 then task 2, recording every `record_every` steps and at each
/// phase's first and last step. Phase-2 steps and times restart at zero; a
/// phase 2 of zero steps records nothing.
///
/// Under [`T1Mode::ExactCopy`] the student is overwritten with teacher 1 on
/// task 1's support after `steps_task1` steps of training (possibly zero).
pub fn run_continual(cfg: &ValidatedConfig, schedule: &Schedule) -> Result<Trajectory> {
    if schedule.record_every == 0 {
        return Err(Error::InvalidArgument("record_every must be >= 1".into()));
    }
    let mut triple = initial_weights(cfg);
    let mut records = Vec::new();

    records.push(record(cfg, &triple, 1, 0));
    run_phase(cfg, &mut triple, Task::One, schedule.steps_task1, schedule.record_every, &mut records)?;
    if cfg.t1_mode() == T1Mode::ExactCopy {
        exact_copy(&mut triple, cfg);
    }
    if schedule.steps_task2 == 0 {
        return Ok(Trajectory {
            seed: cfg.seed(),
            records,
        });
    }
    records.push(record(cfg, &triple, 2, 0));
    run_phase(cfg, &mut triple, Task::Two, schedule.steps_task2, schedule.record_every, &mut records)?;
    Ok(Trajectory {
        seed: cfg.seed(),
        records,
    })
}

/// Header of the trajectory CSV.
pub const TRAJECTORY_HEADER: &str =
    "phase,step,t,eg1,eg2,Q1,Q2,Q12,R1_1,R2_1,R1_2,R2_2,R12_1,R12_2,q_prime,seed";

/// Scientific notation with 17 significant digits, which reads back bit-identically.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

/// Write trajectories as CSV rows, one per record, grouped by trajectory.
pub fn write_trajectory_csv<W: std::io::Write>(mut w: W, trajectories: &[Trajectory]) -> Result<()> {
    writeln!(w, "{TRAJECTORY_HEADER}")?;
    for traj in trajectories {
        for rec in &traj.records {
            let o = &rec.order;
            let floats = [
                rec.t, rec.eg1, rec.eg2, o.q1, o.q2, o.q12, o.r1_1, o.r2_1, o.r1_2, o.r2_2, o.r12_1,
                o.r12_2, o.q_prime,
            ];
            write!(w, "{},{}", rec.phase, rec.step)?;
            for v in floats {
                write!(w, ",{}", fmt_f64(v))?;
            }
            writeln!(w, ",{}", traj.seed)?;
        }
    }
    Ok(())
}
