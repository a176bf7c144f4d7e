//! Problem configuration, validation and the step/time convention.
//!
//! A [`ContinualConfig`] is the raw, user-facing description of the two-task
//! problem. [`validate`] turns it into a [`ValidatedConfig`]: `r` is snapped so
//! that the task supports `r n` and `(1 - r) n` are whole numbers of input
//! components, and the stability products `gamma_v = eta r sigma_v^2` are
//! checked against the divergence threshold of 2.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the student reaches the start of task 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum T1Mode {
    /// Train task 1 with SGD for `t_end` time units and start task 2 from there.
    Trained { t_end: f64 },
    /// After any task-1 training, overwrite the student on task 1's support with
    /// the task-1 teacher, i.e. task 1 is learned exactly.
    ExactCopy,
}

impl fmt::Display for T1Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            T1Mode::Trained { t_end } => write!(f, "TRAINED({t_end})"),
            T1Mode::ExactCopy => f.write_str("EXACT_COPY"),
        }
    }
}

impl FromStr for T1Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("EXACT_COPY") {
            return Ok(T1Mode::ExactCopy);
        }
        let inner = s
            .strip_prefix("TRAINED(")
            .or_else(|| s.strip_prefix("trained("))
            .and_then(|rest| rest.strip_suffix(')'))
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "t1_mode must be EXACT_COPY or TRAINED(<t_end>), got {s:?}"
                ))
            })?;
        let t_end: f64 = inner
            .trim()
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad TRAINED time {inner:?}")))?;
        Ok(T1Mode::Trained { t_end })
    }
}

impl TryFrom<String> for T1Mode {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<T1Mode> for String {
    fn from(m: T1Mode) -> String {
        m.to_string()
    }
}

/// All hyperparameters of the two-task problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinualConfig {
    /// Input dimension.
    pub n: usize,
    /// Input space similarity: fraction of components each task's inputs occupy.
    pub r: f64,
    /// Weight space similarity: cosine between the two teachers.
    pub q: f64,
    pub eta: f64,
    pub sigma1_sq: f64,
    pub sigma2_sq: f64,
    pub sigma_b1: f64,
    pub sigma_b2: f64,
    pub sigma_j: f64,
    pub seed: u64,
    pub t1_mode: T1Mode,
    /// Allow `gamma >= 2`. Only meant for exercising divergence handling.
    #[serde(default)]
    pub divergence_study: bool,
    /// Orthogonalize the generated teachers so norms and cosine are exact.
    #[serde(default)]
    pub exact_similarity: bool,
}

/// Names accepted by [`ContinualConfig::set_param`].
pub const SWEEPABLE: &[&str] = &[
    "n", "r", "q", "eta", "sigma1_sq", "sigma2_sq", "sigma_b1", "sigma_b2", "sigma_j", "seed",
];

impl ContinualConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Set a numeric field by name, as used by parameter sweeps.
    pub fn set_param(&mut self, name: &str, value: f64) -> Result<()> {
        match name {
            "n" | "seed" => {
                if !(value.is_finite() && value >= 0.0 && value.fract() == 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "{name} must be a non-negative integer, got {value}"
                    )));
                }
                if name == "n" {
                    self.n = value as usize;
                } else {
                    self.seed = value as u64;
                }
            }
            "r" => self.r = value,
            "q" => self.q = value,
            "eta" => self.eta = value,
            "sigma1_sq" => self.sigma1_sq = value,
            "sigma2_sq" => self.sigma2_sq = value,
            "sigma_b1" => self.sigma_b1 = value,
            "sigma_b2" => self.sigma_b2 = value,
            "sigma_j" => self.sigma_j = value,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown sweep parameter {other:?}; expected one of {SWEEPABLE:?}"
                )))
            }
        }
        Ok(())
    }

    pub fn get_param(&self, name: &str) -> Option<f64> {
        Some(match name {
            "n" => self.n as f64,
            "seed" => self.seed as f64,
            "r" => self.r,
            "q" => self.q,
            "eta" => self.eta,
            "sigma1_sq" => self.sigma1_sq,
            "sigma2_sq" => self.sigma2_sq,
            "sigma_b1" => self.sigma_b1,
            "sigma_b2" => self.sigma_b2,
            "sigma_j" => self.sigma_j,
            _ => return None,
        })
    }
}

/// Stability products above this are divergent.
pub const GAMMA_LIMIT: f64 = 2.0;

/// Distance from `gamma_2 = 2` below which closed forms are flagged as ill-conditioned.
pub const CONDITIONING_BAND: f64 = 1e-6;

/// A configuration whose `r` has been quantized and whose ranges are checked.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidatedConfig {
    config: ContinualConfig,
    r_requested: f64,
    task_dim: usize,
    gamma1: f64,
    gamma2: f64,
}

fn check(field: &'static str, value: f64, ok: bool, reason: &'static str) -> Result<()> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            field,
            value,
            reason,
        })
    }
}

/// Check ranges, quantize `r` and classify stability.
pub fn validate(config: &ContinualConfig) -> Result<ValidatedConfig> {
    let c = config;
    check("n", c.n as f64, c.n >= 2, "need n >= 2")?;
    check("r", c.r, (0.5..=1.0).contains(&c.r), "need 0.5 <= r <= 1")?;
    check("q", c.q, (-1.0..=1.0).contains(&c.q), "need -1 <= q <= 1")?;
    check("eta", c.eta, c.eta > 0.0, "need eta > 0")?;
    check("sigma1_sq", c.sigma1_sq, c.sigma1_sq > 0.0, "need sigma1_sq > 0")?;
    check("sigma2_sq", c.sigma2_sq, c.sigma2_sq > 0.0, "need sigma2_sq > 0")?;
    check("sigma_b1", c.sigma_b1, c.sigma_b1 >= 0.0, "need sigma_b1 >= 0")?;
    check("sigma_b2", c.sigma_b2, c.sigma_b2 >= 0.0, "need sigma_b2 >= 0")?;
    check("sigma_j", c.sigma_j, c.sigma_j >= 0.0, "need sigma_j >= 0")?;
    if let T1Mode::Trained { t_end } = c.t1_mode {
        check("t_end", t_end, t_end >= 0.0, "need t_end >= 0")?;
    }

    let n = c.n as f64;
    let task_dim = (c.r * n).round();
    let r = task_dim / n;
    if (r - c.r).abs() > 0.5 / n + 1e-12 || 2.0 * task_dim < n || task_dim > n {
        return Err(Error::Unquantizable { r: c.r, n: c.n });
    }
    let task_dim = task_dim as usize;

    let gamma1 = c.eta * r * c.sigma1_sq;
    let gamma2 = c.eta * r * c.sigma2_sq;
    if !c.divergence_study {
        if gamma1 >= GAMMA_LIMIT {
            return Err(Error::Divergent {
                which: "gamma1",
                gamma: gamma1,
            });
        }
        if gamma2 >= GAMMA_LIMIT {
            return Err(Error::Divergent {
                which: "gamma2",
                gamma: gamma2,
            });
        }
    }

    let mut config = c.clone();
    config.r = r;
    Ok(ValidatedConfig {
        config,
        r_requested: c.r,
        task_dim,
        gamma1,
        gamma2,
    })
}

impl ValidatedConfig {
    /// The resolved configuration (quantized `r`). Validating it again is a no-op.
    pub fn config(&self) -> &ContinualConfig {
        &self.config
    }

    pub fn r_requested(&self) -> f64 {
        self.r_requested
    }

    pub fn n(&self) -> usize {
        self.config.n
    }
    pub fn r(&self) -> f64 {
        self.config.r
    }
    pub fn q(&self) -> f64 {
        self.config.q
    }
    pub fn eta(&self) -> f64 {
        self.config.eta
    }
    pub fn sigma1_sq(&self) -> f64 {
        self.config.sigma1_sq
    }
    pub fn sigma2_sq(&self) -> f64 {
        self.config.sigma2_sq
    }
    pub fn sigma_b1(&self) -> f64 {
        self.config.sigma_b1
    }
    pub fn sigma_b2(&self) -> f64 {
        self.config.sigma_b2
    }
    pub fn sigma_j(&self) -> f64 {
        self.config.sigma_j
    }
    pub fn seed(&self) -> u64 {
        self.config.seed
    }
    pub fn t1_mode(&self) -> T1Mode {
        self.config.t1_mode
    }

    /// `r n`: number of nonzero input components per task.
    pub fn task_dim(&self) -> usize {
        self.task_dim
    }

    /// `(2r - 1) n`: size of the shared input block.
    pub fn common_dim(&self) -> usize {
        2 * self.task_dim - self.config.n
    }

    /// `(1 - r) n`: number of components private to each task.
    pub fn private_dim(&self) -> usize {
        self.config.n - self.task_dim
    }

    /// Half-open index range of task 1's support, `0..r n`.
    pub fn support1(&self) -> std::ops::Range<usize> {
        0..self.task_dim
    }

    /// Half-open index range of task 2's support, `(1 - r) n..n`.
    pub fn support2(&self) -> std::ops::Range<usize> {
        self.private_dim()..self.config.n
    }

    /// Shared block `(1 - r) n..r n`.
    pub fn common(&self) -> std::ops::Range<usize> {
        self.private_dim()..self.task_dim
    }

    /// `eta r sigma_1^2`.
    pub fn gamma1(&self) -> f64 {
        self.gamma1
    }

    /// `eta r sigma_2^2`.
    pub fn gamma2(&self) -> f64 {
        self.gamma2
    }

    pub fn task1_stable(&self) -> bool {
        self.gamma1 < GAMMA_LIMIT
    }

    pub fn task2_stable(&self) -> bool {
        self.gamma2 < GAMMA_LIMIT
    }

    /// True when `gamma_2` sits within [`CONDITIONING_BAND`] of 2, where the
    /// slowest mode `gamma_2 (2 - gamma_2)` is nearly marginal.
    pub fn ill_conditioned(&self) -> bool {
        (GAMMA_LIMIT - self.gamma2).abs() < CONDITIONING_BAND
    }

    /// Copy of this config with a different seed. Seeds never affect validity.
    pub fn with_seed(&self, seed: u64) -> ValidatedConfig {
        let mut v = self.clone();
        v.config.seed = seed;
        v
    }
}

/// Normalized time `t = m / (r n)`, with `m` the number of SGD steps.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Time(f64);

impl Time {
    pub const ZERO: Time = Time(0.0);

    /// Panics on negative or non-finite input.
    pub fn new(t: f64) -> Time {
        assert!(t.is_finite() && t >= 0.0, "time must be finite and >= 0, got {t}");
        Time(t)
    }

    pub fn from_steps(steps: u64, cfg: &ValidatedConfig) -> Time {
        Time(steps as f64 / cfg.task_dim() as f64)
    }

    /// Nearest step count to this time.
    pub fn to_steps(self, cfg: &ValidatedConfig) -> u64 {
        (self.0 * cfg.task_dim() as f64).round() as u64
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl From<Time> for f64 {
    fn from(t: Time) -> f64 {
        t.0
    }
}
