//! Closed-form learning dynamics in the large-`n` limit.
//!
//! Phase 1 is SGD on task 1 from a random student; phase 2 is SGD on task 2
//! starting from a student that reproduces teacher 1 exactly on task 1's
//! support. Every quantity is a sum of at most three decaying exponentials with
//! rates `gamma`, `2 gamma` and `gamma (2 - gamma)`, where `gamma = eta r
//! sigma^2` is the stability product of the task being trained.
//!
//! The phase-2 expressions below are the exact solutions of the ODE system in
//! [`crate::ode`]; the coefficient of `exp(-gamma_2 t)` in `Q12` and `Q1`
//! involves `sigma_B2^2`, and `Q2` decays at rate `gamma_2` (not `eta
//! sigma_2^2`). The tests in this module and in `ode` hold the two in lockstep.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::config::{Time, ValidatedConfig, GAMMA_LIMIT};
use crate::error::{Error, Result};
use crate::order::OrderParamState;

/// `gamma_2 = 1` is detected with this absolute tolerance.
pub const GAMMA_UNIT_TOL: f64 = 1e-12;

/// The constants `C1`, `C2` of the task-1 error while training task 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OvershootConstants {
    /// `(2r - 1)(sigma_B1^2 + sigma_B2^2 - 2 q sigma_B1 sigma_B2)`, never negative.
    pub c1: f64,
    /// `(2r - 1)/r` times the unnormalized task-2 error at the start of phase 2.
    pub c2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OvershootVariant {
    MayNotOccur,
    DoesNotOccur,
    Occurs,
    Diverges,
}

impl OvershootVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            OvershootVariant::MayNotOccur => "MAY_NOT_OCCUR",
            OvershootVariant::DoesNotOccur => "DOES_NOT_OCCUR",
            OvershootVariant::Occurs => "OCCURS",
            OvershootVariant::Diverges => "DIVERGES",
        }
    }
}

impl fmt::Display for OvershootVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OvershootClass {
    pub variant: OvershootVariant,
    /// `eta r sigma_2^2`
    pub gamma: f64,
    pub c1: f64,
    pub c2: f64,
}

impl OvershootClass {
    /// Classify from the slowest-mode analysis of the task-1 error curve.
    ///
    /// | gamma          | condition        | result         |
    /// |----------------|------------------|----------------|
    /// | (0, 1)         |                  | MAY_NOT_OCCUR  |
    /// | 1              | C2 - 2 C1 <= 0   | DOES_NOT_OCCUR |
    /// | 1              | C2 - 2 C1 > 0    | OCCURS         |
    /// | (1, 2)         |                  | OCCURS         |
    /// | >= 2           |                  | DIVERGES       |
    ///
    /// When `C1 = C2 = 0` the task-1 error is identically zero during task 2
    /// and the result is DOES_NOT_OCCUR for any stable `gamma`.
    pub fn from_constants(gamma: f64, c1: f64, c2: f64) -> OvershootClass {
        use OvershootVariant::*;
        let scale = c1.abs().max(c2.abs());
        let variant = if gamma >= GAMMA_LIMIT {
            Diverges
        } else if scale == 0.0 {
            DoesNotOccur
        } else if (gamma - 1.0).abs() <= GAMMA_UNIT_TOL {
            if c2 - 2.0 * c1 > 0.0 {
                Occurs
            } else {
                DoesNotOccur
            }
        } else if gamma < 1.0 {
            MayNotOccur
        } else {
            Occurs
        };
        OvershootClass {
            variant,
            gamma,
            c1,
            c2,
        }
    }
}

/// Closed-form dynamics for one validated configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Theory {
    r: f64,
    /// `2r - 1`
    k: f64,
    q: f64,
    sigma1_sq: f64,
    sigma2_sq: f64,
    b1_sq: f64,
    b2_sq: f64,
    b12: f64,
    j_sq: f64,
    gamma1: f64,
    gamma2: f64,
    ill_conditioned: bool,
}

impl Theory {
    pub fn new(cfg: &ValidatedConfig) -> Theory {
        let r = cfg.r();
        Theory {
            r,
            k: 2.0 * r - 1.0,
            q: cfg.q(),
            sigma1_sq: cfg.sigma1_sq(),
            sigma2_sq: cfg.sigma2_sq(),
            b1_sq: cfg.sigma_b1() * cfg.sigma_b1(),
            b2_sq: cfg.sigma_b2() * cfg.sigma_b2(),
            b12: cfg.sigma_b1() * cfg.sigma_b2(),
            j_sq: cfg.sigma_j() * cfg.sigma_j(),
            gamma1: cfg.gamma1(),
            gamma2: cfg.gamma2(),
            ill_conditioned: cfg.ill_conditioned(),
        }
    }

    pub fn gamma1(&self) -> f64 {
        self.gamma1
    }

    pub fn gamma2(&self) -> f64 {
        self.gamma2
    }

    /// True when `gamma_2` is within `1e-6` of 2 and the slowest mode is nearly marginal.
    pub fn ill_conditioned(&self) -> bool {
        self.ill_conditioned
    }

    /// Shared-block teacher overlap `q' = (2r - 1) q sigma_B1 sigma_B2`.
    pub fn q_prime(&self) -> f64 {
        self.k * self.q * self.b12
    }

    /// Unnormalized task-2 error at the start of phase 2.
    fn task2_initial_gap(&self) -> f64 {
        self.r * self.b2_sq + self.k * self.b1_sq + (1.0 - self.r) * self.j_sq
            - 2.0 * self.q_prime()
    }

    pub fn constants(&self) -> OvershootConstants {
        OvershootConstants {
            c1: self.k * (self.b1_sq + self.b2_sq - 2.0 * self.q * self.b12),
            c2: self.k / self.r * self.task2_initial_gap(),
        }
    }

    fn teachers(&self) -> OrderParamState {
        OrderParamState {
            t1_1: self.r * self.b1_sq,
            t2_2: self.r * self.b2_sq,
            t12_1: self.k * self.b1_sq,
            t12_2: self.k * self.b2_sq,
            q_prime: self.q_prime(),
            ..Default::default()
        }
    }

    /// `(R1_1(t), Q1(t))` while training task 1 from `R1_1 = 0`, `Q1 = r sigma_J^2`.
    pub fn phase1_order_params(&self, t: Time) -> (f64, f64) {
        let s = self.phase1_state(t);
        (s.r1_1, s.q1)
    }

    /// Every order parameter while training task 1.
    pub fn phase1_state(&self, t: Time) -> OrderParamState {
        let t = t.value();
        let g = self.gamma1;
        let fast = (-g * t).exp();
        let slow = (-g * (2.0 - g) * t).exp();
        let (r, k) = (self.r, self.k);
        let cross = r * self.q * self.b12;

        let q12 = k * self.b1_sq - 2.0 * k * self.b1_sq * fast + k * (self.b1_sq + self.j_sq) * slow;
        OrderParamState {
            q1: r * (self.j_sq + self.b1_sq) * slow - 2.0 * r * self.b1_sq * fast + r * self.b1_sq,
            q2: q12 + (1.0 - r) * self.j_sq,
            q12,
            r1_1: r * self.b1_sq * (1.0 - fast),
            r2_1: k * self.b1_sq * (1.0 - fast),
            r1_2: cross * (1.0 - fast),
            r2_2: self.q_prime() * (1.0 - fast),
            r12_1: k * self.b1_sq * (1.0 - fast),
            r12_2: self.q_prime() * (1.0 - fast),
            ..self.teachers()
        }
    }

    pub fn eg1_phase1(&self, t: Time) -> f64 {
        let g = self.gamma1;
        0.5 * self.sigma1_sq
            * self.r
            * (self.b1_sq + self.j_sq)
            * (-t.value() * g * (2.0 - g)).exp()
    }

    /// Task-2 error while task 1 is being trained.
    pub fn eg2_phase1(&self, t: Time) -> f64 {
        self.phase1_state(t).eg2(self.sigma2_sq)
    }

    /// Initial state of phase 2: the student equals teacher 1 on task 1's
    /// support and is still at its random initialization elsewhere.
    pub fn phase2_initial_state(&self) -> OrderParamState {
        self.phase2_order_params(Time::ZERO)
    }

    /// Every order parameter while training task 2, `t` counted from the task switch.
    pub fn phase2_order_params(&self, t: Time) -> OrderParamState {
        let t = t.value();
        let g = self.gamma2;
        let e = (-g * t).exp();
        let slow = (-g * (2.0 - g) * t).exp();
        let e2 = (-2.0 * g * t).exp();
        let (r, k) = (self.r, self.k);
        let qp = self.q_prime();
        let OvershootConstants { c1, c2 } = self.constants();
        let cross = r * self.q * self.b12;

        let q12 = 2.0 * (qp - k * self.b2_sq) * e + c2 * slow + (c1 - c2) * e2 + k * self.b2_sq;
        let r12_2 = k * self.b2_sq + (qp - k * self.b2_sq) * e;
        OrderParamState {
            q1: q12 + r * self.b1_sq - k * self.b1_sq,
            q2: self.task2_initial_gap() * slow
                + 2.0 * (qp - r * self.b2_sq) * e
                + r * self.b2_sq,
            q12,
            r1_1: r * self.b1_sq - (k * self.b1_sq - qp) * (1.0 - e),
            r2_1: cross + (k * self.b1_sq - cross) * e,
            r1_2: cross + (r12_2 - qp),
            r2_2: r * self.b2_sq + (qp - r * self.b2_sq) * e,
            r12_1: qp + (k * self.b1_sq - qp) * e,
            r12_2,
            ..self.teachers()
        }
    }

    pub fn eg2_phase2(&self, t: Time) -> f64 {
        let g = self.gamma2;
        0.5 * self.sigma2_sq * self.task2_initial_gap() * (-t.value() * g * (2.0 - g)).exp()
    }

    /// Task-1 error while training task 2.
    pub fn eg1_phase2(&self, t: Time) -> f64 {
        let OvershootConstants { c1, .. } = self.constants();
        0.5 * self.sigma1_sq * c1 + self.eg1_phase2_excess(t)
    }

    /// `eg1_phase2(t) - forgetting value`, evaluated without cancellation so the
    /// sign stays meaningful where the transient is far below the asymptote.
    pub fn eg1_phase2_excess(&self, t: Time) -> f64 {
        let t = t.value();
        let g = self.gamma2;
        let OvershootConstants { c1, c2 } = self.constants();
        0.5 * self.sigma1_sq
            * ((c1 - c2) * (-2.0 * g * t).exp() + c2 * (-g * (2.0 - g) * t).exp()
                - 2.0 * c1 * (-g * t).exp())
    }

    pub fn eg1_phase2_derivative(&self, t: Time) -> f64 {
        let t = t.value();
        let g = self.gamma2;
        let OvershootConstants { c1, c2 } = self.constants();
        0.5 * self.sigma1_sq
            * g
            * (-2.0 * (c1 - c2) * (-2.0 * g * t).exp()
                - (2.0 - g) * c2 * (-g * (2.0 - g) * t).exp()
                + 2.0 * c1 * (-g * t).exp())
    }

    /// Long-time limit of the task-1 error while training task 2.
    pub fn forgetting_value(&self) -> Result<f64> {
        if self.gamma2 >= GAMMA_LIMIT {
            return Err(Error::Divergent {
                which: "gamma2",
                gamma: self.gamma2,
            });
        }
        Ok(self.forgetting_value_unchecked())
    }

    pub(crate) fn forgetting_value_unchecked(&self) -> f64 {
        0.5 * self.sigma1_sq * self.constants().c1
    }

    pub fn classify_overshoot(&self) -> OvershootClass {
        let OvershootConstants { c1, c2 } = self.constants();
        OvershootClass::from_constants(self.gamma2, c1, c2)
    }
}
