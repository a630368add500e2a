//! Model parameters for the two-type Moran model with selection strength
//! a * phi, where phi in (0, 1] sets the selection regime through
//! b = -log_N(phi).

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Parameters of one population instance.
///
/// Invariants: N >= 2, phi in (0, 1], a >= 0. `a == 0` (neutral drift) is
/// admitted only as a test oracle for the plain Moran simulator; every other
/// operation requires `a > 0` and reports an error otherwise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    n: u64,
    a: f64,
    phi: f64,
}

impl ModelParams {
    pub fn new(n: u64, a: f64, phi: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid(format!("population size {n} < 2")));
        }
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::invalid(format!("selection strength a = {a} must be > 0")));
        }
        if !(phi > 0.0 && phi <= 1.0) {
            return Err(Error::invalid(format!("scaling factor phi = {phi} outside (0, 1]")));
        }
        Ok(ModelParams { n, a, phi })
    }

    /// Neutral parameters (a = 0). Only `simulate_moran` accepts these; the
    /// resulting fixation probability has the closed form m/N used as an
    /// oracle.
    pub fn neutral(n: u64) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid(format!("population size {n} < 2")));
        }
        Ok(ModelParams { n, a: 0.0, phi: 1.0 })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// Selective advantage a * phi of the mutant type.
    pub fn s(&self) -> f64 {
        self.a * self.phi
    }

    /// Derived exponent b = -log_N(phi), in [0, 1) when phi > 1/N.
    pub fn b(&self) -> f64 {
        -self.phi.ln() / (self.n as f64).ln()
    }

    /// Natural logarithm of N; the sweep time scale is ln(N) / phi.
    pub fn log_n(&self) -> f64 {
        (self.n as f64).ln()
    }

    /// Conversion factor from model time to sweep time: t = u * phi / ln N.
    pub fn time_rescale(&self) -> f64 {
        self.phi / self.log_n()
    }

    pub fn require_selection(&self) -> Result<()> {
        if self.a > 0.0 {
            Ok(())
        } else {
            Err(Error::invalid("operation requires a > 0"))
        }
    }

    /// log_N^+(x) = max(ln x / ln N, 0), with the convention log_N^+(0) = 0.
    pub fn log_n_plus(&self, x: f64) -> f64 {
        if x <= 1.0 {
            0.0
        } else {
            x.ln() / self.log_n()
        }
    }
}

/// Rule assigning phi to each population size along a grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum ScalingRule {
    /// phi = N^(-b); moderate selection with fixed exponent b in (0, 1).
    Power { b: f64 },
    /// phi = 1 / ln N; quasi-strong selection (b -> 0, phi -> 0).
    InvLog,
    /// phi constant in N; phi = 1 is strong selection.
    Const { phi: f64 },
}

/// Selection regime classification of a rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Moderate,
    QuasiStrong,
    Strong,
}

impl ScalingRule {
    pub fn phi(&self, n: u64) -> f64 {
        match *self {
            ScalingRule::Power { b } => (n as f64).powf(-b),
            ScalingRule::InvLog => 1.0 / (n as f64).ln(),
            ScalingRule::Const { phi } => phi,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ScalingRule::Power { b } => {
                if !(0.0..1.0).contains(&b) {
                    return Err(Error::invalid(format!("exponent b = {b} outside [0, 1)")));
                }
            }
            ScalingRule::Const { phi } => {
                if !(phi > 0.0 && phi <= 1.0) {
                    return Err(Error::invalid(format!("phi = {phi} outside (0, 1]")));
                }
            }
            ScalingRule::InvLog => {}
        }
        Ok(())
    }

    /// Limiting regime: b > 0 is moderate; b = 0 with phi -> 0 is
    /// quasi-strong; phi = 1 is strong.
    pub fn regime(&self) -> Regime {
        match *self {
            ScalingRule::Power { b } if b > 0.0 => Regime::Moderate,
            ScalingRule::Power { .. } => Regime::Strong, // b = 0 means phi = 1
            ScalingRule::InvLog => Regime::QuasiStrong,
            ScalingRule::Const { phi } if phi < 1.0 => Regime::QuasiStrong,
            ScalingRule::Const { .. } => Regime::Strong,
        }
    }

    pub fn params(&self, n: u64, a: f64) -> Result<ModelParams> {
        self.validate()?;
        ModelParams::new(n, a, self.phi(n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_populations_and_selection() {
        assert!(ModelParams::new(1, 1.0, 0.5).is_err());
        assert!(ModelParams::new(10, 0.0, 0.5).is_err());
        assert!(ModelParams::new(10, -1.0, 0.5).is_err());
        assert!(ModelParams::new(10, 1.0, 0.0).is_err());
        assert!(ModelParams::new(10, 1.0, 1.5).is_err());
    }

    #[test]
    fn b_inverts_the_power_rule() {
        let p = ScalingRule::Power { b: 0.2 }.params(100_000, 1.0).unwrap();
        assert!((p.b() - 0.2).abs() < 1e-12);
        assert!((p.phi() - 1e-1).abs() < 1e-12);
    }

    #[test]
    fn strong_selection_has_b_zero() {
        let p = ModelParams::new(1000, 0.7, 1.0).unwrap();
        assert_eq!(p.b(), 0.0);
        assert_eq!(p.s(), 0.7);
    }

    #[test]
    fn regimes_classify() {
        assert_eq!(ScalingRule::Power { b: 0.3 }.regime(), Regime::Moderate);
        assert_eq!(ScalingRule::InvLog.regime(), Regime::QuasiStrong);
        assert_eq!(ScalingRule::Const { phi: 1.0 }.regime(), Regime::Strong);
        assert_eq!(ScalingRule::Const { phi: 0.1 }.regime(), Regime::QuasiStrong);
    }

    #[test]
    fn log_n_plus_conventions() {
        let p = ModelParams::new(100, 1.0, 0.5).unwrap();
        assert_eq!(p.log_n_plus(0.0), 0.0);
        assert_eq!(p.log_n_plus(1.0), 0.0);
        assert!((p.log_n_plus(100.0) - 1.0).abs() < 1e-12);
        assert!((p.log_n_plus(10.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn neutral_params_refuse_selective_ops() {
        let p = ModelParams::neutral(50).unwrap();
        assert!(p.require_selection().is_err());
        assert_eq!(p.s(), 0.0);
    }
}
