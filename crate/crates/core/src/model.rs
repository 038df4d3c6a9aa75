//! The periodic SEIRS model: parameters, state, vector field and its Jacobian.
//!
//! ```text
//! S' = Λ − β φ(S,N,I) − μ S + η R
//! E' = β φ(S,N,I) − (μ + ε) E
//! I' = ε E − (μ + γ) I
//! R' = γ I − (μ + η) R
//! ```

use serde::Serialize;
use thiserror::Error;

use crate::incidence::IncidenceSpec;
use crate::linalg::{Mat4, Matrix};
use crate::periodic::{PeriodicCoefficient, PeriodicError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Periodic(#[from] PeriodicError),
    #[error("coefficient {name} must be strictly positive, minimum is {min}")]
    NotPositive { name: &'static str, min: f64 },
    #[error("coefficient {name} must be nonnegative, minimum is {min}")]
    Negative { name: &'static str, min: f64 },
    #[error("coefficient {name} has period {found}, expected {expected}")]
    PeriodMismatch { name: &'static str, found: f64, expected: f64 },
    #[error("state has a non-finite component: {0:?}")]
    NonFiniteState([f64; 4]),
    #[error("population box is degenerate: [{lower}, {upper}]")]
    DegenerateBox { lower: f64, upper: f64 },
}

/// A point `(S, E, I, R)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StateVec {
    #[serde(rename = "S")]
    pub s: f64,
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "I")]
    pub i: f64,
    #[serde(rename = "R")]
    pub r: f64,
}

impl StateVec {
    pub const fn new(s: f64, e: f64, i: f64, r: f64) -> Self {
        Self { s, e, i, r }
    }

    pub fn n(&self) -> f64 {
        self.s + self.e + self.i + self.r
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.s, self.e, self.i, self.r]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    pub fn is_nonnegative(&self) -> bool {
        self.to_array().iter().all(|&v| v >= 0.0)
    }

    pub fn distance(&self, other: &StateVec) -> f64 {
        let a = self.to_array();
        let b = other.to_array();
        a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
    }
}

impl From<[f64; 4]> for StateVec {
    fn from(x: [f64; 4]) -> Self {
        Self::new(x[0], x[1], x[2], x[3])
    }
}

/// Period averages of the six coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Averages {
    pub birth: f64,
    pub death: f64,
    pub transmission: f64,
    pub immunity_loss: f64,
    pub progression: f64,
    pub recovery: f64,
}

/// Population interval `[Λ^ℓ/μ^u, Λ^u/μ^ℓ]` that attracts and keeps `N(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PopulationBox {
    pub lower: f64,
    pub upper: f64,
}

impl PopulationBox {
    pub fn is_degenerate(&self) -> bool {
        self.lower >= self.upper
    }

    /// Box scaled to `[c(1 − rel), c(1 + rel)]` around its centre `c` when degenerate.
    pub fn widened(&self, rel: f64) -> Self {
        if !self.is_degenerate() {
            return *self;
        }
        let c = 0.5 * (self.lower + self.upper);
        Self { lower: c * (1.0 - rel), upper: c * (1.0 + rel) }
    }

    pub fn contains(&self, n: f64, slack: f64) -> bool {
        n >= self.lower - slack && n <= self.upper + slack
    }

    /// `density` evenly spaced population levels, or the single level of a degenerate box.
    pub fn n_grid(&self, density: usize) -> Vec<f64> {
        if self.is_degenerate() || density < 2 {
            return vec![self.upper];
        }
        let step = (self.upper - self.lower) / (density - 1) as f64;
        (0..density).map(|k| self.lower + k as f64 * step).collect()
    }
}

/// The six ω-periodic rates `Λ, μ, β, η, ε, γ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelParams {
    birth: PeriodicCoefficient,
    death: PeriodicCoefficient,
    transmission: PeriodicCoefficient,
    immunity_loss: PeriodicCoefficient,
    progression: PeriodicCoefficient,
    recovery: PeriodicCoefficient,
    period: f64,
}

impl ModelParams {
    /// Validates positivity of `Λ, μ, β, ε`, nonnegativity of `η, γ` and a shared period.
    pub fn new(
        birth: PeriodicCoefficient,
        death: PeriodicCoefficient,
        transmission: PeriodicCoefficient,
        immunity_loss: PeriodicCoefficient,
        progression: PeriodicCoefficient,
        recovery: PeriodicCoefficient,
    ) -> Result<Self, ModelError> {
        let period = birth.period();
        let named = [
            ("lambda", &birth, true),
            ("mu", &death, true),
            ("beta", &transmission, true),
            ("eta", &immunity_loss, false),
            ("epsilon", &progression, true),
            ("gamma", &recovery, false),
        ];
        for (name, coef, strict) in named {
            if (coef.period() - period).abs() > 1e-15 * period {
                return Err(ModelError::PeriodMismatch { name, found: coef.period(), expected: period });
            }
            let (min, _) = coef.extrema();
            if strict && min <= 0.0 {
                return Err(ModelError::NotPositive { name, min });
            }
            if !strict && min < 0.0 {
                return Err(ModelError::Negative { name, min });
            }
        }
        Ok(Self { birth, death, transmission, immunity_loss, progression, recovery, period })
    }

    /// Constant `Λ = μ = 2`, `ε = 1`, `γ = 0.02`, `η = 0`, period 1, and
    /// `β(t) = beta · (1 + amplitude · cos 2πt)`.
    pub fn seasonal_example(beta: f64, amplitude: f64) -> Result<Self, ModelError> {
        let c = |v| PeriodicCoefficient::constant(v, 1.0);
        Self::new(
            c(2.0)?,
            c(2.0)?,
            PeriodicCoefficient::seasonal(beta, amplitude, 0.0, 1.0)?,
            c(0.0)?,
            c(1.0)?,
            c(0.02)?,
        )
    }

    pub fn period(&self) -> f64 {
        self.period
    }
    pub fn birth(&self) -> &PeriodicCoefficient {
        &self.birth
    }
    pub fn death(&self) -> &PeriodicCoefficient {
        &self.death
    }
    pub fn transmission(&self) -> &PeriodicCoefficient {
        &self.transmission
    }
    pub fn immunity_loss(&self) -> &PeriodicCoefficient {
        &self.immunity_loss
    }
    pub fn progression(&self) -> &PeriodicCoefficient {
        &self.progression
    }
    pub fn recovery(&self) -> &PeriodicCoefficient {
        &self.recovery
    }

    /// Copy with a different `β`.
    pub fn with_transmission(&self, transmission: PeriodicCoefficient) -> Result<Self, ModelError> {
        Self::new(
            self.birth.clone(),
            self.death.clone(),
            transmission,
            self.immunity_loss.clone(),
            self.progression.clone(),
            self.recovery.clone(),
        )
    }

    pub fn averages(&self) -> Averages {
        Averages {
            birth: self.birth.mean(),
            death: self.death.mean(),
            transmission: self.transmission.mean(),
            immunity_loss: self.immunity_loss.mean(),
            progression: self.progression.mean(),
            recovery: self.recovery.mean(),
        }
    }

    pub fn population_box(&self) -> PopulationBox {
        let (l_lo, l_hi) = self.birth.extrema();
        let (m_lo, m_hi) = self.death.extrema();
        PopulationBox { lower: l_lo / m_hi, upper: l_hi / m_lo }
    }
}

/// Parameters and incidence together.
#[derive(Debug, Clone)]
pub struct SeirsModel {
    pub params: ModelParams,
    pub incidence: IncidenceSpec,
}

impl SeirsModel {
    pub fn new(params: ModelParams, incidence: IncidenceSpec) -> Self {
        Self { params, incidence }
    }

    pub fn period(&self) -> f64 {
        self.params.period
    }

    /// Right-hand side on a raw array, with no input checks.
    pub fn rhs(&self, t: f64, x: &[f64; 4]) -> [f64; 4] {
        let p = &self.params;
        let (lambda, mu, beta) = (p.birth.eval(t), p.death.eval(t), p.transmission.eval(t));
        let (eta, eps, gamma) = (p.immunity_loss.eval(t), p.progression.eval(t), p.recovery.eval(t));
        let [s, e, i, r] = *x;
        let force = beta * self.incidence.eval(s, s + e + i + r, i);
        [
            lambda - force - mu * s + eta * r,
            force - (mu + eps) * e,
            eps * e - (mu + gamma) * i,
            gamma * i - (mu + eta) * r,
        ]
    }

    pub fn vector_field(&self, t: f64, x: &StateVec) -> Result<StateVec, ModelError> {
        if !x.is_finite() {
            return Err(ModelError::NonFiniteState(x.to_array()));
        }
        Ok(self.rhs(t, &x.to_array()).into())
    }

    /// Derivative of the right-hand side with respect to `(S, E, I, R)`.
    pub fn jacobian(&self, t: f64, x: &[f64; 4]) -> Mat4 {
        let p = &self.params;
        let (mu, beta) = (p.death.eval(t), p.transmission.eval(t));
        let (eta, eps, gamma) = (p.immunity_loss.eval(t), p.progression.eval(t), p.recovery.eval(t));
        let [s, e, i, r] = *x;
        let d = self.incidence.partials(s, s + e + i + r, i);
        // N depends on every compartment
        let grad = [d.ds + d.dn, d.dn, d.di + d.dn, d.dn].map(|g| beta * g);
        Matrix([
            [-grad[0] - mu, -grad[1], -grad[2], -grad[3] + eta],
            [grad[0], grad[1] - (mu + eps), grad[2], grad[3]],
            [0.0, eps, -(mu + gamma), 0.0],
            [0.0, 0.0, gamma, -(mu + eta)],
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::incidence::{IncidenceFamily, RationalContact};
    use proptest::prelude::*;

    fn example(b: f64) -> SeirsModel {
        SeirsModel::new(ModelParams::seasonal_example(6.9, b).unwrap(), IncidenceSpec::mass_action())
    }

    #[test]
    fn vector_field_examples() {
        let m = example(0.1);
        let dfe = m.vector_field(0.0, &StateVec::new(1.0, 0.0, 0.0, 0.0)).unwrap();
        assert_eq!(dfe.to_array(), [0.0; 4]);
        let d = m.vector_field(0.0, &StateVec::new(0.1, 0.1, 0.1, 0.1)).unwrap();
        // hand evaluation: β(0) = 7.59, φ = 0.01
        let expected = [2.0 - 0.0759 - 0.2, 0.0759 - 0.3, 0.1 - 0.202, 0.002 - 0.2];
        for (a, b) in d.to_array().iter().zip(expected) {
            assert!((a - b).abs() < 1e-14, "{a} vs {b}");
        }
        assert!((expected[0] - 1.7241).abs() < 1e-12);
    }

    #[test]
    fn disease_free_states_stay_disease_free() {
        let lam = PeriodicCoefficient::seasonal(2.0, 0.5, 0.3, 1.0).unwrap();
        let c = |v| PeriodicCoefficient::constant(v, 1.0).unwrap();
        let params = ModelParams::new(lam, c(2.0), c(6.9), c(0.3), c(1.0), c(0.02)).unwrap();
        let m = SeirsModel::new(params, IncidenceFamily::Standard.into());
        for t in [0.0, 0.21, 0.77] {
            let s = m.params.birth().eval(t) / m.params.death().eval(t);
            let d = m.vector_field(t, &StateVec::new(s, 0.0, 0.0, 0.0)).unwrap();
            assert_eq!([d.e, d.i, d.r], [0.0; 3]);
        }
    }

    #[test]
    fn rejects_invalid_inputs() {
        let m = example(0.1);
        assert!(m.vector_field(0.0, &StateVec::new(f64::NAN, 0.0, 0.0, 0.0)).is_err());
        let c = |v| PeriodicCoefficient::constant(v, 1.0).unwrap();
        // β dips below zero
        let beta = PeriodicCoefficient::seasonal(1.0, 1.5, 0.0, 1.0).unwrap();
        assert!(matches!(
            ModelParams::new(c(2.0), c(2.0), beta, c(0.0), c(1.0), c(0.02)),
            Err(ModelError::NotPositive { name: "beta", .. })
        ));
        assert!(ModelParams::new(c(2.0), c(2.0), c(1.0), c(-0.1), c(1.0), c(0.02)).is_err());
        let other = PeriodicCoefficient::constant(1.0, 2.0).unwrap();
        assert!(ModelParams::new(c(2.0), c(2.0), c(1.0), c(0.0), other, c(0.02)).is_err());
    }

    #[test]
    fn population_box_and_averages() {
        let p = ModelParams::seasonal_example(6.9, 0.6).unwrap();
        let bx = p.population_box();
        assert_eq!((bx.lower, bx.upper), (1.0, 1.0));
        assert!(bx.is_degenerate());
        let w = bx.widened(0.5);
        assert_eq!((w.lower, w.upper), (0.5, 1.5));
        assert_eq!(p.averages().transmission, 6.9);
    }

    fn random_model(which: usize) -> SeirsModel {
        let lam = PeriodicCoefficient::seasonal(2.0, 0.3, 0.4, 1.0).unwrap();
        let mu = PeriodicCoefficient::seasonal(1.5, 0.2, 1.1, 1.0).unwrap();
        let c = |v| PeriodicCoefficient::constant(v, 1.0).unwrap();
        let params = ModelParams::new(
            lam,
            mu,
            PeriodicCoefficient::seasonal(5.0, 0.6, 0.0, 1.0).unwrap(),
            c(0.4),
            c(1.0),
            c(0.3),
        )
        .unwrap();
        let inc: IncidenceSpec = match which {
            0 => IncidenceSpec::mass_action(),
            1 => IncidenceFamily::Standard.into(),
            2 => IncidenceFamily::MichaelisMenten(RationalContact { a: 0.2, b: 1.0, c: 1.0, d: 0.5 }).into(),
            _ => IncidenceFamily::HollingII { alpha: 2.0 }.into(),
        };
        SeirsModel::new(params, inc)
    }

    proptest! {
        #[test]
        fn components_sum_to_population_balance(
            t in 0.0f64..3.0, s in 0.0f64..2.0, e in 0.0f64..2.0, i in 0.0f64..2.0, r in 0.0f64..2.0, which in 0usize..4
        ) {
            prop_assume!(s + e + i + r > 1e-3);
            let m = random_model(which);
            let x = StateVec::new(s, e, i, r);
            let d = m.vector_field(t, &x).unwrap();
            let balance = m.params.birth().eval(t) - m.params.death().eval(t) * x.n();
            prop_assert!((d.s + d.e + d.i + d.r - balance).abs() < 1e-12);
        }

        #[test]
        fn jacobian_matches_finite_differences(
            t in 0.0f64..1.0, s in 0.1f64..2.0, e in 0.1f64..2.0, i in 0.1f64..2.0, r in 0.1f64..2.0, which in 0usize..4
        ) {
            let m = random_model(which);
            let x = [s, e, i, r];
            let jac = m.jacobian(t, &x);
            for col in 0..4 {
                let h = 1e-6;
                let mut xp = x;
                let mut xm = x;
                xp[col] += h;
                xm[col] -= h;
                let (fp, fm) = (m.rhs(t, &xp), m.rhs(t, &xm));
                for row in 0..4 {
                    let fd = (fp[row] - fm[row]) / (2.0 * h);
                    prop_assert!((jac[(row, col)] - fd).abs() < 1e-6 * (1.0 + fd.abs()));
                }
            }
        }
    }
}
