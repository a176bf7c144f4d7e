//! Macroscopic order parameters of the two-task linear teacher-student problem.
//!
//! With masks `I1` (task 1 support), `I2` (task 2 support) and the shared block
//! `I1 I2`, every quantity is a masked inner product of the teachers `B1`, `B2`
//! and the student `J`. Naming follows `R_v^u = B_u' I_v J`: `r2_1` is
//! `B1' I2 J` and `r1_2` is `B2' I1 J`.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OrderParamState {
    /// `J' I1 J`
    pub q1: f64,
    /// `J' I2 J`
    pub q2: f64,
    /// `J' I1 I2 J`
    pub q12: f64,
    /// `B1' I1 J`
    pub r1_1: f64,
    /// `B1' I2 J`
    pub r2_1: f64,
    /// `B2' I1 J`
    pub r1_2: f64,
    /// `B2' I2 J`
    pub r2_2: f64,
    /// `B1' I1 I2 J`
    pub r12_1: f64,
    /// `B2' I1 I2 J`
    pub r12_2: f64,
    /// `B1' I1 B1`
    pub t1_1: f64,
    /// `B2' I2 B2`
    pub t2_2: f64,
    /// `B1' I1 I2 B1`
    pub t12_1: f64,
    /// `B2' I1 I2 B2`
    pub t12_2: f64,
    /// `B1' I1 I2 B2`
    pub q_prime: f64,
}

impl OrderParamState {
    /// Task-1 generalization error `sigma_1^2 / 2 (T1_1 - 2 R1_1 + Q1)`.
    pub fn eg1(&self, sigma1_sq: f64) -> f64 {
        0.5 * sigma1_sq * (self.t1_1 - 2.0 * self.r1_1 + self.q1)
    }

    /// Task-2 generalization error `sigma_2^2 / 2 (T2_2 - 2 R2_2 + Q2)`.
    pub fn eg2(&self, sigma2_sq: f64) -> f64 {
        0.5 * sigma2_sq * (self.t2_2 - 2.0 * self.r2_2 + self.q2)
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// Fields in declaration order, `q_prime` last.
    pub fn to_array(&self) -> [f64; 14] {
        [
            self.q1,
            self.q2,
            self.q12,
            self.r1_1,
            self.r2_1,
            self.r1_2,
            self.r2_2,
            self.r12_1,
            self.r12_2,
            self.t1_1,
            self.t2_2,
            self.t12_1,
            self.t12_2,
            self.q_prime,
        ]
    }

    pub const NAMES: [&'static str; 14] = [
        "q1", "q2", "q12", "r1_1", "r2_1", "r1_2", "r2_2", "r12_1", "r12_2", "t1_1", "t2_2",
        "t12_1", "t12_2", "q_prime",
    ];

    /// Largest absolute componentwise difference.
    pub fn max_abs_diff(&self, other: &OrderParamState) -> f64 {
        self.to_array()
            .iter()
            .zip(other.to_array())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}
