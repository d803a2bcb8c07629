use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Numerical thresholds, all in normalized units (utilities and money sum to 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Flow-conservation residual accepted by the equilibrium solver.
    pub eq: f64,
    /// Relative slack of the tight-edge rule.
    pub tight: f64,
    /// Prices below this are reported as a collapse.
    pub price: f64,
    /// Payoff comparisons (conflict-freeness, Frank-Wolfe gap).
    pub pay: f64,
    /// Polyhedron membership for floating-point two-buyer inputs.
    pub poly: f64,
    /// Largest best-response gain still counted as "no deviation".
    pub dev: f64,
    /// Pivot threshold of the simplex.
    pub lp: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            eq: 1e-9,
            tight: 1e-6,
            price: 1e-12,
            pay: 1e-8,
            poly: 1e-9,
            dev: 1e-6,
            lp: 1e-11,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("eq", self.eq),
            ("tight", self.tight),
            ("price", self.price),
            ("pay", self.pay),
            ("poly", self.poly),
            ("dev", self.dev),
            ("lp", self.lp),
        ];
        for (name, v) in all {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Tolerance(format!("{name} = {v} must lie in (0, 1)")));
            }
        }
        if self.eq >= self.tight {
            return Err(Error::Tolerance(format!(
                "eq ({}) must be below tight ({})",
                self.eq, self.tight
            )));
        }
        if self.lp >= self.eq {
            return Err(Error::Tolerance(format!(
                "lp ({}) must be below eq ({})",
                self.lp, self.eq
            )));
        }
        Ok(())
    }

    /// Applies a `KEY=VALUE` override.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Tolerance(format!("expected KEY=VALUE, got {assignment:?}")))?;
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::Tolerance(format!("bad value in {assignment:?}")))?;
        let slot = match key.trim() {
            "eq" => &mut self.eq,
            "tight" => &mut self.tight,
            "price" => &mut self.price,
            "pay" => &mut self.pay,
            "poly" => &mut self.poly,
            "dev" => &mut self.dev,
            "lp" => &mut self.lp,
            other => return Err(Error::Tolerance(format!("unknown tolerance {other:?}"))),
        };
        *slot = v;
        Ok(())
    }
}
