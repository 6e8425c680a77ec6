//! Prior densities used by both models: inverse gamma for the variance,
//! uniform for decay/range and τ, beta for the space-time interaction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inverse gamma with shape `a` and scale `b`: density ∝ x^{−a−1} e^{−b/x}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InverseGamma {
    pub shape: f64,
    pub scale: f64,
}

impl InverseGamma {
    pub fn validate(&self) -> Result<()> {
        if !(self.shape > 0.0 && self.scale > 0.0) {
            return Err(Error::Config(format!(
                "inverse gamma prior needs shape > 0 and scale > 0, got ({}, {})",
                self.shape, self.scale
            )));
        }
        Ok(())
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let (a, b) = (self.shape, self.scale);
        a * b.ln() - libm::lgamma(a) - (a + 1.0) * x.ln() - b / x
    }

    /// Prior mean when it exists (shape > 1), otherwise the mode — used
    /// only to pick a starting value.
    pub fn init_value(&self) -> f64 {
        if self.shape > 1.0 {
            self.scale / (self.shape - 1.0)
        } else {
            self.scale / (self.shape + 1.0)
        }
    }
}

/// Uniform on `(lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformPrior {
    pub lo: f64,
    pub hi: f64,
}

impl UniformPrior {
    pub fn validate(&self, what: &str) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi) {
            return Err(Error::Config(format!(
                "uniform prior for {what} needs lo < hi, got ({}, {})",
                self.lo, self.hi
            )));
        }
        Ok(())
    }

    pub fn contains(&self, x: f64) -> bool {
        x > self.lo && x < self.hi
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        if self.contains(x) {
            -(self.hi - self.lo).ln()
        } else {
            f64::NEG_INFINITY
        }
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// Beta on `(0, 1)` with parameters `a`, `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaPrior {
    pub a: f64,
    pub b: f64,
}

impl BetaPrior {
    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.b > 0.0) {
            return Err(Error::Config(format!(
                "beta prior needs a > 0 and b > 0, got ({}, {})",
                self.a, self.b
            )));
        }
        Ok(())
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        if !(0.0..=1.0).contains(&x) || (x == 0.0 && self.a < 1.0) || (x == 1.0 && self.b < 1.0) {
            return f64::NEG_INFINITY;
        }
        let norm = libm::lgamma(self.a + self.b) - libm::lgamma(self.a) - libm::lgamma(self.b);
        norm + (self.a - 1.0) * x.ln() + (self.b - 1.0) * (1.0 - x).ln()
    }

    pub fn mean(&self) -> f64 {
        self.a / (self.a + self.b)
    }
}
