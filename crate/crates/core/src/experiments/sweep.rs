//! Parameter grids over [`ContinualConfig`] fields.

use serde::{Deserialize, Serialize};

use crate::config::{ContinualConfig, SWEEPABLE};
use crate::error::{Error, Result};

/// One swept parameter on an inclusive uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub param: String,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(param: &str, min: f64, max: f64, count: usize) -> Result<Axis> {
        let axis = Axis {
            param: param.to_string(),
            min,
            max,
            count,
        };
        axis.check()?;
        Ok(axis)
    }

    fn check(&self) -> Result<()> {
        if !SWEEPABLE.contains(&self.param.as_str()) {
            return Err(Error::InvalidArgument(format!(
                "cannot sweep {:?}; sweepable fields are {SWEEPABLE:?}",
                self.param
            )));
        }
        if !(self.min.is_finite() && self.max.is_finite() && self.min <= self.max) {
            return Err(Error::InvalidArgument(format!(
                "axis {}: need finite min <= max, got [{}, {}]",
                self.param, self.min, self.max
            )));
        }
        if self.count == 0 || (self.count == 1 && self.min != self.max) {
            return Err(Error::InvalidArgument(format!(
                "axis {}: a range needs at least 2 points, got {}",
                self.param, self.count
            )));
        }
        Ok(())
    }

    /// Grid points, endpoints included exactly.
    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        let last = (self.count - 1) as f64;
        (0..self.count)
            .map(|i| {
                if i + 1 == self.count {
                    self.max
                } else {
                    self.min + (self.max - self.min) * (i as f64 / last)
                }
            })
            .collect()
    }
}

/// A full-factorial sweep around a base configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axes: Vec<Axis>,
    pub base: ContinualConfig,
    /// Seeds per cell for any simulation.
    pub replicates: usize,
    #[serde(default)]
    pub output: Option<std::path::PathBuf>,
}

/// One grid point: its multi-index, the swept values and the resulting config.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub index: Vec<usize>,
    pub values: Vec<f64>,
    pub config: ContinualConfig,
}

impl SweepSpec {
    pub fn new(base: ContinualConfig, axes: Vec<Axis>, replicates: usize) -> Result<SweepSpec> {
        let spec = SweepSpec {
            axes,
            base,
            replicates,
            output: None,
        };
        spec.check()?;
        Ok(spec)
    }

    pub fn check(&self) -> Result<()> {
        for (i, axis) in self.axes.iter().enumerate() {
            axis.check()?;
            if self.axes[..i].iter().any(|a| a.param == axis.param) {
                return Err(Error::InvalidArgument(format!("axis {} given twice", axis.param)));
            }
        }
        if self.replicates == 0 {
            return Err(Error::InvalidArgument("replicates must be >= 1".into()));
        }
        Ok(())
    }

    pub fn axis(&self, param: &str) -> Option<&Axis> {
        self.axes.iter().find(|a| a.param == param)
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.count).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All cells in row-major order, the last axis varying fastest.
    pub fn cells(&self) -> Result<Vec<Cell>> {
        self.check()?;
        let grids: Vec<Vec<f64>> = self.axes.iter().map(Axis::values).collect();
        let mut cells = Vec::with_capacity(self.len());
        for flat in 0..self.len() {
            let mut rest = flat;
            let mut index = vec![0; grids.len()];
            for k in (0..grids.len()).rev() {
                index[k] = rest % grids[k].len();
                rest /= grids[k].len();
            }
            let values: Vec<f64> = index.iter().zip(&grids).map(|(&i, g)| g[i]).collect();
            let mut config = self.base.clone();
            for (axis, v) in self.axes.iter().zip(&values) {
                config.set_param(&axis.param, *v)?;
            }
            cells.push(Cell {
                index,
                values,
                config,
            });
        }
        Ok(cells)
    }
}
