//! Two-task continual learning in the linear teacher-student setting.
//!
//! - [`config`]: problem parameters, validation and the step/time convention.
//! - [`order`]: the macroscopic order parameters.
//! - [`theory`]: closed-form dynamics, forgetting value, overshoot classes.
//! - [`ode`]: RK4 integration of the order-parameter ODEs.
//! - [`simulator`]: finite-`n` online SGD on sampled teachers and inputs.
//! - [`experiments`]: learning curves, heatmaps, phase diagrams and reports.

pub mod config;
pub mod error;
pub mod experiments;
pub mod ode;
pub mod order;
pub mod simulator;
pub mod theory;

pub use config::{validate, ContinualConfig, T1Mode, Time, ValidatedConfig};
pub use error::{Error, Result};
pub use order::OrderParamState;
pub use theory::{OvershootClass, OvershootConstants, OvershootVariant, Theory};
