//! The disease-free periodic solution `(S*(t), 0, 0, 0)`.
//!
//! `S*` is the unique periodic solution of `S' = Λ(t) − μ(t) S`:
//!
//! ```text
//! y0    = ∫₀^ω Λ(u) e^{−∫_u^ω μ} du / (1 − e^{−∫₀^ω μ})
//! S*(t) = y0 e^{−∫₀^t μ} + ∫₀^t Λ(u) e^{−∫_u^t μ} du
//! ```
//!
//! The inner integrals of `μ` are exact; the outer ones use adaptive quadrature.

use serde::Serialize;
use thiserror::Error;

use crate::periodic::PeriodicCoefficient;
use crate::quadrature;

const QUADRATURE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DfeError {
    #[error("death rate must have positive mean, got {0}")]
    NoDeath(f64),
    #[error("birth and death rates have different periods")]
    PeriodMismatch,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DfeSolution {
    #[serde(skip)]
    birth: PeriodicCoefficient,
    #[serde(skip)]
    death: PeriodicCoefficient,
    y0: f64,
    period: f64,
}

impl DfeSolution {
    pub fn new(birth: &PeriodicCoefficient, death: &PeriodicCoefficient) -> Result<Self, DfeError> {
        let period = birth.period();
        if (death.period() - period).abs() > 1e-15 * period {
            return Err(DfeError::PeriodMismatch);
        }
        let decay = death.integral(0.0, period);
        if !(decay > 0.0) {
            return Err(DfeError::NoDeath(death.mean()));
        }
        let y0 = if birth.is_constant() && death.is_constant() {
            birth.base() / death.base()
        } else {
            let inflow = quadrature::integrate(|u| birth.eval(u) * (-death.integral(u, period)).exp(), 0.0, period, QUADRATURE_TOL);
            inflow / -(-decay).exp_m1()
        };
        Ok(Self { birth: birth.clone(), death: death.clone(), y0, period })
    }

    pub fn y0(&self) -> f64 {
        self.y0
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// `S*(t)`, periodic in `t`.
    pub fn eval(&self, t: f64) -> f64 {
        if self.birth.is_constant() && self.death.is_constant() {
            return self.y0;
        }
        let t = t.rem_euclid(self.period);
        let inflow = quadrature::integrate(
            |u| self.birth.eval(u) * (-self.death.integral(u, t)).exp(),
            0.0,
            t,
            QUADRATURE_TOL,
        );
        self.y0 * (-self.death.integral(0.0, t)).exp() + inflow
    }
}
