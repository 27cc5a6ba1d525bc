use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sampling times on `[0, T]`.
///
/// `times` holds the strictly positive points only; the origin is always a
/// deterministic zero and lives outside every covariance matrix. When
/// `includes_origin` is false the origin column is stored in path batches but
/// ignored by path functionals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: f64,
    times: Vec<f64>,
    includes_origin: bool,
    uniform: bool,
}

impl TimeGrid {
    /// `t_j = j T / n` for `j = 1..=n`, plus the origin.
    pub fn uniform(horizon: f64, n: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidParameter {
                field: "horizon",
                value: horizon,
                reason: "must be finite and > 0",
            });
        }
        if n == 0 {
            return Err(Error::InvalidGrid("uniform grid needs n >= 1".into()));
        }
        let times = (1..=n)
            .map(|j| horizon * (j as f64 / n as f64))
            .collect();
        Ok(TimeGrid {
            horizon,
            times,
            includes_origin: true,
            uniform: true,
        })
    }

    /// Arbitrary strictly increasing positive times; the horizon is the last one.
    pub fn from_times(times: Vec<f64>, includes_origin: bool) -> Result<Self> {
        validate_times(&times)?;
        let horizon = *times.last().unwrap();
        Ok(TimeGrid {
            horizon,
            times,
            includes_origin,
            uniform: false,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Number of strictly positive grid points.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn includes_origin(&self) -> bool {
        self.includes_origin
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    /// Columns of a path row: the origin followed by every grid point.
    pub fn columns(&self) -> usize {
        self.times.len() + 1
    }

    /// Time of path column `j` (column 0 is the origin).
    pub fn column_time(&self, j: usize) -> f64 {
        if j == 0 {
            0.0
        } else {
            self.times[j - 1]
        }
    }

    /// First column that path functionals look at.
    pub fn first_active_column(&self) -> usize {
        if self.includes_origin {
            0
        } else {
            1
        }
    }

    /// Same grid with every time multiplied by `factor`.
    pub fn rescaled(&self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::InvalidParameter {
                field: "factor",
                value: factor,
                reason: "must be finite and > 0",
            });
        }
        Ok(TimeGrid {
            horizon: self.horizon * factor,
            times: self.times.iter().map(|t| t * factor).collect(),
            includes_origin: self.includes_origin,
            uniform: self.uniform,
        })
    }
}

pub(crate) fn validate_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::InvalidGrid("grid is empty".into()));
    }
    for (i, &t) in times.iter().enumerate() {
        if !t.is_finite() {
            return Err(Error::InvalidGrid(format!("time {i} is not finite")));
        }
        if t <= 0.0 {
            return Err(Error::InvalidGrid(format!(
                "time {i} = {t} is not strictly positive (the origin is implicit)"
            )));
        }
        if i > 0 && t <= times[i - 1] {
            return Err(Error::InvalidGrid(format!(
                "times must be strictly increasing (t[{}] = {} >= t[{i}] = {t})",
                i - 1,
                times[i - 1]
            )));
        }
    }
    Ok(())
}
