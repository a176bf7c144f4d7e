//! Named parameter sets for the standard experiments.
//!
//! | name            | n    | r   | q   | sigma_1^2 | sigma_2^2 | sigma_J |
//! |-----------------|------|-----|-----|-----------|-----------|---------|
//! | `fig3a`         | 3000 | 0.8 | 0.3 | 0.8       | 0.8       | 1       |
//! | `fig3b-caption` | 3000 | 0.8 | 0.9 | 1.7       | 1.7       | 11      |
//! | `fig3b-text`    | 3000 | 0.8 | 0.7 | 1.7       | 1.7       | 2       |
//! | `fig4`          | 1500 | 0.8 | 0.3 | 0.8       | 0.8       | 1       |
//!
//! All use `eta = 1`, unit teacher scales, seed 0 and the EXACT_COPY task-1
//! endpoint. `fig4` is the base of the `(r, q)` heatmap, whose axes override
//! `r` and `q`.

use crate::config::{ContinualConfig, T1Mode};
use crate::error::{Error, Result};

pub const PRESETS: &[&str] = &["fig3a", "fig3b-caption", "fig3b-text", "fig4"];

/// Default phase lengths in time units.
pub const DEFAULT_T1: f64 = 8.0;
pub const DEFAULT_T2: f64 = 8.0;

/// Default number of seeds averaged per curve or cell.
pub const DEFAULT_SEEDS: usize = 10;

fn base(n: usize, q: f64, sigma_sq: f64, sigma_j: f64) -> ContinualConfig {
    ContinualConfig {
        n,
        r: 0.8,
        q,
        eta: 1.0,
        sigma1_sq: sigma_sq,
        sigma2_sq: sigma_sq,
        sigma_b1: 1.0,
        sigma_b2: 1.0,
        sigma_j,
        seed: 0,
        t1_mode: T1Mode::ExactCopy,
        divergence_study: false,
        exact_similarity: false,
    }
}

pub fn preset(name: &str) -> Result<ContinualConfig> {
    Ok(match name {
        "fig3a" => base(3000, 0.3, 0.8, 1.0),
        "fig3b-caption" => base(3000, 0.9, 1.7, 11.0),
        "fig3b-text" => base(3000, 0.7, 1.7, 2.0),
        "fig4" => base(1500, 0.3, 0.8, 1.0),
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown preset {other:?}; expected one of {PRESETS:?}"
            )))
        }
    })
}
