use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Uniform grid `t_n = nτ`, `n = 0..=N`, on `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t_final: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(t_final: f64, steps: usize) -> Result<Self> {
        if !(t_final.is_finite() && t_final > 0.0) {
            return Err(Error::invalid("T", format!("must be finite and > 0, got {t_final}")));
        }
        if steps == 0 {
            return Err(Error::invalid("N", "must be at least 1"));
        }
        Ok(Self { t_final, steps })
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn tau(&self) -> f64 {
        self.t_final / self.steps as f64
    }

    /// Node `t_n`; the last node is `T` exactly.
    pub fn node(&self, n: usize) -> f64 {
        if n >= self.steps {
            self.t_final
        } else {
            n as f64 * self.tau()
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.steps).map(move |n| self.node(n))
    }

    /// The same interval with twice as many steps.
    pub fn refined(&self) -> Self {
        Self {
            t_final: self.t_final,
            steps: 2 * self.steps,
        }
    }
}
