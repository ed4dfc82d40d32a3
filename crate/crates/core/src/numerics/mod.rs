//! Shared numerical kernels.

pub mod fit;
pub mod quadrature;
pub mod series;
pub mod special;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use fit::{fit_exp_rate, ExpFit};
pub use quadrature::{integrate, integrate_checked, QuadratureResult};
pub use series::{sum_prefix, sum_series, sum_series_with, DivergenceRule, SeriesOptions, SeriesResult};
pub use special::gamma_fn;

/// Accuracy targets and work caps shared by series and quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
    pub max_terms: usize,
    pub max_evals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            rel: 1e-10,
            abs: 1e-14,
            max_terms: 10_000_000,
            max_evals: 1_000_000,
        }
    }
}

impl Tolerance {
    pub fn new(rel: f64, abs: f64) -> Result<Self> {
        let t = Tolerance {
            rel,
            abs,
            ..Default::default()
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel >= 0.0 && self.abs >= 0.0) || !self.rel.is_finite() || !self.abs.is_finite() {
            return Err(Error::invalid(format!(
                "tolerances must be finite and >= 0 (rel={}, abs={})",
                self.rel, self.abs
            )));
        }
        if self.rel == 0.0 && self.abs == 0.0 {
            return Err(Error::invalid("rel and abs tolerances cannot both be zero"));
        }
        if self.max_terms == 0 || self.max_evals == 0 {
            return Err(Error::invalid("work caps must be positive"));
        }
        Ok(())
    }

    /// The acceptance threshold for a value of magnitude `v`.
    #[inline]
    pub fn target(&self, v: f64) -> f64 {
        self.abs.max(self.rel * v.abs())
    }

    /// Same caps, tolerances multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Tolerance {
            rel: self.rel * factor,
            abs: self.abs * factor,
            ..*self
        }
    }
}

/// Neumaier's compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    #[inline]
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}
