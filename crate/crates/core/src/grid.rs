use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform time grid `t_i = i * T / n`, `i = 0..=n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::invalid(format!("grid horizon must be positive, got {horizon}")));
        }
        if steps == 0 {
            return Err(Error::invalid("grid needs at least one step"));
        }
        Ok(Self { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        if i == self.steps {
            self.horizon
        } else {
            i as f64 * self.dt()
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..=self.steps).map(|i| self.point(i)).collect()
    }

    /// Index of the grid point equal to `t` (up to a relative 1e-9 slack).
    pub fn index_of(&self, t: f64) -> Option<usize> {
        if !(t.is_finite() && t >= 0.0) {
            return None;
        }
        let x = t / self.dt();
        let i = x.round();
        if (x - i).abs() <= 1e-9 * x.max(1.0) && i <= self.steps as f64 {
            Some(i as usize)
        } else {
            None
        }
    }

    pub(crate) fn check_index(&self, t_index: usize) -> Result<()> {
        if t_index == 0 || t_index > self.steps {
            return Err(Error::invalid(format!(
                "time index {t_index} outside 1..={}",
                self.steps
            )));
        }
        Ok(())
    }
}
