//! Basic reproduction ratio of the periodic model and its threshold tests.
//!
//! Linearising at the disease-free solution, the infected compartments
//! `(E, I)` evolve by `x' = (F(t) − V(t)) x` with
//!
//! ```text
//! F(t) = | 0  β(t) ∂φ/∂I(S*, S*, 0) |     V(t) = | μ + ε     0    |
//!        | 0            0           |            |  −ε     μ + γ  |
//! ```
//!
//! `R₀` is the unique `λ > 0` with `ρ(Φ_{F/λ−V}(ω)) = 1`, found by bisection.

use std::f64::consts::PI;

use serde::Serialize;
use thiserror::Error;

use crate::dfe::{DfeError, DfeSolution};
use crate::linalg::Mat2;
use crate::model::{SeirsModel, StateVec};
use crate::ode::{OdeError, Tolerances};
use crate::rng::Lcg;
use crate::simulation::{model_flow, SimulationError};
use crate::variational::fundamental_matrix;

/// Values within this distance of 1 are classified as critical.
pub const CRITICAL_BAND: f64 = 1e-6;
/// Largest bracket factor tried before giving up.
const MAX_BRACKET: f64 = 65536.0;
/// Samples per period used to detect `F ≡ 0`.
const ZERO_PROBE: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum R0Error {
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error(transparent)]
    Dfe(#[from] DfeError),
    #[error(transparent)]
    Simulation(#[from] SimulationError),
    #[error("no sign change of rho - 1 within [{lo}, {hi}]; the model is degenerate")]
    BracketOverflow { lo: f64, hi: f64 },
    #[error("non-finite transmission slope at the disease-free solution (t={t})")]
    NonFiniteSlope { t: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Classification {
    Extinction,
    Endemic,
    Critical,
}

impl Classification {
    pub fn of(value: f64) -> Self {
        if (value - 1.0).abs() <= CRITICAL_BAND {
            Self::Critical
        } else if value < 1.0 {
            Self::Extinction
        } else {
            Self::Endemic
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct R0Options {
    /// Width of the final bisection interval on `λ`.
    pub bisection_tol: f64,
    pub integration: ToleranceSpec,
}

/// Serializable mirror of [`Tolerances`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ToleranceSpec {
    pub rel: f64,
    pub abs: f64,
}

impl From<ToleranceSpec> for Tolerances {
    fn from(t: ToleranceSpec) -> Self {
        Tolerances { rel: t.rel, abs: t.abs }
    }
}

impl Default for R0Options {
    fn default() -> Self {
        Self { bisection_tol: 1e-8, integration: ToleranceSpec { rel: 1e-10, abs: 1e-12 } }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct R0Report {
    /// `ρ(Φ_{F−V}(ω))`
    pub rho_fv: f64,
    pub r0: f64,
    pub classification: Classification,
    /// `ρ(Φ_{F/R₀−V}(ω)) − 1` at the returned `R₀`.
    pub residual: f64,
    pub bracket: (f64, f64),
    pub iterations: usize,
}

/// `F(t)` and `V(t)` along the disease-free solution.
pub struct FvMatrices<'a> {
    model: &'a SeirsModel,
    dfe: DfeSolution,
}

impl<'a> FvMatrices<'a> {
    pub fn new(model: &'a SeirsModel) -> Result<Self, DfeError> {
        let dfe = DfeSolution::new(model.params.birth(), model.params.death())?;
        Ok(Self { model, dfe })
    }

    pub fn dfe(&self) -> &DfeSolution {
        &self.dfe
    }

    pub fn f(&self, t: f64) -> Mat2 {
        let s = self.dfe.eval(t);
        let slope = self.model.incidence.partials(s, s, 0.0).di;
        let mut m = Mat2::zeros();
        m[(0, 1)] = self.model.params.transmission().eval(t) * slope;
        m
    }

    pub fn v(&self, t: f64) -> Mat2 {
        let p = &self.model.params;
        let (mu, eps, gamma) = (p.death().eval(t), p.progression().eval(t), p.recovery().eval(t));
        let mut m = Mat2::zeros();
        m[(0, 0)] = mu + eps;
        m[(1, 0)] = -eps;
        m[(1, 1)] = mu + gamma;
        m
    }

    /// `ρ(Φ_{F/λ − V}(ω))`
    pub fn scaled_rho(&self, lambda: f64, tol: Tolerances) -> Result<f64, OdeError> {
        let inv = 1.0 / lambda;
        let phi = fundamental_matrix(|t| self.f(t).scale(inv) - self.v(t), 0.0, self.model.period(), tol)?;
        Ok(phi.spectral_radius())
    }

    fn check_slope(&self) -> Result<bool, R0Error> {
        let mut all_zero = true;
        for k in 0..ZERO_PROBE {
            let t = self.model.period() * k as f64 / ZERO_PROBE as f64;
            let v = self.f(t)[(0, 1)];
            if !v.is_finite() {
                return Err(R0Error::NonFiniteSlope { t });
            }
            all_zero &= v == 0.0;
        }
        Ok(all_zero)
    }
}

pub fn threshold_rho(model: &SeirsModel, tol: Tolerances) -> Result<f64, R0Error> {
    let fv = FvMatrices::new(model)?;
    fv.check_slope()?;
    Ok(fv.scaled_rho(1.0, tol)?)
}

/// `R₀` by bisection on `λ ↦ ρ(Φ_{F/λ−V}(ω)) − 1`, which decreases in `λ`.
///
/// When `F ≡ 0` there is no such `λ`; the report then carries `R₀ = 0`.
pub fn r0_wang_zhao(model: &SeirsModel, opts: R0Options) -> Result<R0Report, R0Error> {
    let tol: Tolerances = opts.integration.into();
    let fv = FvMatrices::new(model)?;
    let no_transmission = fv.check_slope()?;
    let rho_fv = fv.scaled_rho(1.0, tol)?;
    if no_transmission {
        return Ok(R0Report {
            rho_fv,
            r0: 0.0,
            classification: Classification::Extinction,
            residual: rho_fv - 1.0,
            bracket: (0.0, 0.0),
            iterations: 0,
        });
    }

    let g = |lambda: f64| fv.scaled_rho(lambda, tol).map(|r| r - 1.0);
    let (mut lo, mut hi) = (1.0, 1.0);
    if rho_fv > 1.0 {
        loop {
            hi *= 2.0;
            if hi > MAX_BRACKET {
                return Err(R0Error::BracketOverflow { lo: 1.0, hi: MAX_BRACKET });
            }
            if g(hi)? <= 0.0 {
                break;
            }
            lo = hi;
        }
    } else {
        loop {
            lo /= 2.0;
            if lo < 1.0 / MAX_BRACKET {
                return Err(R0Error::BracketOverflow { lo: 1.0 / MAX_BRACKET, hi: 1.0 });
            }
            if g(lo)? >= 0.0 {
                break;
            }
            hi = lo;
        }
    }
    let bracket = (lo, hi);
    let mut iterations = 0;
    while hi - lo >= opts.bisection_tol {
        let mid = 0.5 * (lo + hi);
        if g(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let r0 = 0.5 * (lo + hi);
    Ok(R0Report {
        rho_fv,
        r0,
        classification: Classification::of(r0),
        residual: g(r0)?,
        bracket,
        iterations,
    })
}

/// Small-amplitude approximation of `R₀` for constant rates and
/// `β(t) = β (1 + b cos(2πt))` with period 1.
pub fn r0_bacaer_approx(beta: f64, eps: f64, mu: f64, gamma: f64, b: f64) -> f64 {
    let base = beta * eps / ((mu + eps) * (mu + gamma));
    let correction = beta * eps * b * b / 2.0 / (4.0 * PI * PI + (2.0 * mu + eps + gamma).powi(2));
    base + correction
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttractivityReport {
    pub horizon: f64,
    pub threshold: f64,
    /// Euclidean distance to `(S*(horizon), 0, 0, 0)` for each run.
    pub deviations: Vec<f64>,
    pub max_deviation: f64,
    /// Largest terminal `I` over runs.
    pub max_terminal_infective: f64,
    pub converged: bool,
}

/// Integrate from seeded random positive states in the population box and
/// measure the terminal distance to the disease-free solution.
pub fn dfe_attractivity_check(
    model: &SeirsModel,
    initial_states: &[StateVec],
    horizon: f64,
    threshold: f64,
    tol: Tolerances,
) -> Result<AttractivityReport, R0Error> {
    let dfe = DfeSolution::new(model.params.birth(), model.params.death())?;
    let target = StateVec::new(dfe.eval(horizon), 0.0, 0.0, 0.0);
    let mut deviations = Vec::with_capacity(initial_states.len());
    let mut max_terminal_infective: f64 = 0.0;
    for &x0 in initial_states {
        let end = model_flow(model, x0, 0.0, horizon, tol)?;
        deviations.push(end.distance(&target));
        max_terminal_infective = max_terminal_infective.max(end.i);
    }
    let max_deviation = deviations.iter().copied().fold(0.0, f64::max);
    Ok(AttractivityReport {
        horizon,
        threshold,
        deviations,
        max_deviation,
        max_terminal_infective,
        converged: max_deviation < threshold,
    })
}

/// `n` seeded random initial states in the model's population box.
pub fn random_initial_states(model: &SeirsModel, n: usize, seed: u64) -> Vec<StateVec> {
    let bx = model.params.population_box();
    let mut rng = Lcg::new(seed);
    (0..n).map(|_| rng.initial_state(&bx)).collect()
}
