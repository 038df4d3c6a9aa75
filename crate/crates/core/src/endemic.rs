//! Endemic threshold machinery at the period-averaged parameters.
//!
//! With bars denoting period means and `n̄ = Λ̄/μ̄`, the endemic algebraic
//! point `(p, q, r, s)` solves the averaged system, where `r` is the unique
//! root on `(0, d₀)` of
//!
//! ```text
//! ψ(v) = ε̄β̄/(μ̄+γ̄) · φ(n̄ − d v, n̄, v)/v − (μ̄+ε̄)
//! d    = ((μ̄+γ̄)(μ̄+ε̄)(μ̄+η̄) − ε̄γ̄η̄) / (ε̄μ̄(μ̄+η̄)),   d₀ = n̄/d
//! p = n̄ − d r,   q = (μ̄+γ̄) r/ε̄,   s = γ̄ r/(μ̄+η̄)
//! ```

use serde::Serialize;
use thiserror::Error;

use crate::incidence::{IncidenceFamily, IncidenceSpec, SaturationConstants};
use crate::linalg::{Mat4, Matrix};
use crate::model::{Averages, ModelParams, SeirsModel, StateVec};
use crate::ode::{OdeError, Tolerances};
use crate::periodic::PeriodicError;
use crate::r0::R0Error;
use crate::simulation::{simulate, Sampling, SimulationError};

const ROOT_TOL: f64 = 1e-12;
/// Persistence floors below this indicate extinction.
pub const DEGENERATE_FLOOR: f64 = 1e-10;
/// Fraction of the simulated floor reported as `K^ℓ`.
const FLOOR_MARGIN: f64 = 0.9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EndemicError {
    #[error("no endemic root: psi(0+) = {psi0} <= 0, the averaged reproduction number is at most 1")]
    NoEndemicRoot { psi0: f64 },
    #[error("persistence floor {min_infective:e} is below {DEGENERATE_FLOOR:e}; the infection dies out")]
    Degenerate { min_infective: f64 },
    #[error("Newton iteration stalled after {iterations} steps with residual {residual:e}")]
    NewtonStalled { iterations: usize, residual: f64 },
    #[error("singular shooting Jacobian: |det| = {det:e}")]
    SingularJacobian { det: f64 },
    #[error("invalid input for a priori bounds: {0}")]
    InvalidBoundInput(String),
    #[error(transparent)]
    R0(#[from] R0Error),
    #[error(transparent)]
    Simulation(#[from] SimulationError),
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error(transparent)]
    Periodic(#[from] PeriodicError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EndemicAlgebraicPoint {
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub s: f64,
    pub d: f64,
    pub d0: f64,
    pub averages: Averages,
}

impl EndemicAlgebraicPoint {
    pub fn as_state(&self) -> StateVec {
        StateVec::new(self.p, self.q, self.r, self.s)
    }

    /// `n̄ = Λ̄/μ̄`
    pub fn population(&self) -> f64 {
        self.averages.birth / self.averages.death
    }
}

fn combination_constant(a: &Averages) -> f64 {
    let (mu, eta, eps, gamma) = (a.death, a.immunity_loss, a.progression, a.recovery);
    ((mu + gamma) * (mu + eps) * (mu + eta) - eps * gamma * eta) / (eps * mu * (mu + eta))
}

/// `ψ(v)`, with `ψ(0)` taken as the limit `v → 0⁺`.
pub fn psi(a: &Averages, inc: &IncidenceSpec, v: f64) -> f64 {
    let n = a.birth / a.death;
    let gain = a.progression * a.transmission / (a.death + a.recovery);
    let slope = if v == 0.0 {
        inc.partials(n, n, 0.0).di
    } else {
        inc.eval(n - combination_constant(a) * v, n, v) / v
    };
    gain * slope - (a.death + a.progression)
}

pub fn solve_r(params: &ModelParams, inc: &IncidenceSpec) -> Result<EndemicAlgebraicPoint, EndemicError> {
    let a = params.averages();
    let n = a.birth / a.death;
    let d = combination_constant(&a);
    let d0 = n / d;
    let psi0 = psi(&a, inc, 0.0);
    if !(psi0 > 0.0) {
        return Err(EndemicError::NoEndemicRoot { psi0 });
    }
    let (mut lo, mut hi) = (0.0, d0);
    while hi - lo >= ROOT_TOL {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if psi(&a, inc, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let r = 0.5 * (lo + hi);
    Ok(EndemicAlgebraicPoint {
        p: n - d * r,
        q: (a.death + a.recovery) * r / a.progression,
        r,
        s: a.recovery * r / (a.death + a.immunity_loss),
        d,
        d0,
        averages: a,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdMatrix {
    pub m: Mat4,
    pub det: f64,
    pub k110: f64,
    pub k010: f64,
    pub k011: f64,
}

impl ThresholdMatrix {
    /// `|det 𝓜| > 10⁻¹⁰ ‖𝓜‖_F⁴`
    pub fn det_is_nonzero(&self) -> bool {
        self.det.abs() > 1e-10 * self.m.frobenius_norm().powi(4)
    }
}

pub fn threshold_matrix(point: &EndemicAlgebraicPoint, inc: &IncidenceSpec) -> ThresholdMatrix {
    let a = &point.averages;
    let (p, q, r, s) = (point.p, point.q, point.r, point.s);
    let d = inc.partials(p, point.population(), r);
    let k = |x: f64, y: f64, z: f64| a.transmission * (x * d.ds + y * d.dn + z * d.di);
    let (k110, k010, k011) = (k(1.0, 1.0, 0.0), k(0.0, 1.0, 0.0), k(0.0, 1.0, 1.0));
    let (mu, eta, gamma) = (a.death, a.immunity_loss, a.recovery);
    let m = Matrix([
        [-mu - k110, -k010 * q / p, -k011 * r / p, (-k010 + eta) * s / p],
        [k110 * p / q, k010, k011 * r / q, k010 * s / q],
        [0.0, mu + gamma, -(mu + gamma), 0.0],
        [0.0, 0.0, mu + eta, -(mu + eta)],
    ]);
    ThresholdMatrix { det: m.determinant(), m, k110, k010, k011 }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ClosedForm {
    /// `φ` does not depend on `N`.
    PopulationIndependent,
    /// `φ = C(N) S I / N`.
    MichaelisMenten,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedFormDet {
    pub kind: ClosedForm,
    pub value: f64,
}

/// Closed-form `det 𝓜` where one exists:
///
/// ```text
/// det 𝓜 = −β̄(η̄+μ̄)(γ̄+μ̄)/q · (φ_N (μ̄r + η̄s + μ̄q + μ̄s) + η̄ s φ_S + μ̄ r φ_I)
/// ```
///
/// with partials at `(p, n̄, r)`; the `φ_N` term vanishes for population-independent `φ`.
pub fn det_m_closed_form(point: &EndemicAlgebraicPoint, inc: &IncidenceSpec) -> Option<ClosedFormDet> {
    let kind = match inc.family() {
        IncidenceFamily::MichaelisMenten(_) | IncidenceFamily::Standard => ClosedForm::MichaelisMenten,
        _ if inc.is_population_independent() => ClosedForm::PopulationIndependent,
        _ => return None,
    };
    let a = &point.averages;
    let (p, q, r, s) = (point.p, point.q, point.r, point.s);
    let (mu, eta, gamma) = (a.death, a.immunity_loss, a.recovery);
    let d = inc.partials(p, point.population(), r);
    let n_term = match kind {
        ClosedForm::PopulationIndependent => 0.0,
        ClosedForm::MichaelisMenten => d.dn * (mu * r + eta * s + mu * q + mu * s),
    };
    let value = -a.transmission * (eta + mu) * (gamma + mu) / q * (n_term + eta * s * d.ds + mu * r * d.di);
    Some(ClosedFormDet { kind, value })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AprioriBounds {
    pub a1_xi: f64,
    pub a1_chi: f64,
    pub a2_xi: f64,
    pub a2_chi: f64,
    pub a3_xi: f64,
    pub a3_chi: f64,
    pub a4_xi: f64,
    pub a4_chi: f64,
    pub m0: f64,
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub m4: f64,
    pub radius: f64,
    pub k_lower: f64,
    pub c1: f64,
    pub c2: f64,
}

/// Bounds on the logarithms of a periodic orbit, and the radius of the ball containing them.
pub fn apriori_bounds(
    params: &ModelParams,
    constants: SaturationConstants,
    k_lower: f64,
    point: &EndemicAlgebraicPoint,
) -> Result<AprioriBounds, EndemicError> {
    let (c1, c2) = (constants.c1, constants.c2);
    if !(c1 > 0.0 && c2.is_finite() && c2 > 0.0) {
        return Err(EndemicError::InvalidBoundInput(format!("saturation constants c1={c1}, c2={c2}")));
    }
    if !(k_lower > 0.0) {
        return Err(EndemicError::InvalidBoundInput(format!("K_lower={k_lower}")));
    }
    let (_, lam_u) = params.birth().extrema();
    let (mu_l, _) = params.death().extrema();
    let (beta_l, beta_u) = params.transmission().extrema();
    let (_, eta_u) = params.immunity_loss().extrema();
    let (eps_l, eps_u) = params.progression().extrema();
    let (gamma_l, gamma_u) = params.recovery().extrema();
    let (me_l, me_u) = (params.death() + params.progression())?.extrema();
    let (mg_l, mg_u) = (params.death() + params.recovery())?.extrema();
    let (mh_l, mh_u) = (params.death() + params.immunity_loss())?.extrema();

    let a1_xi = me_u * mg_u / (c1 * beta_l * eps_l);
    let a1_chi = me_l * mg_l / (c2 * beta_u * eps_u);
    let a3_xi = c2 * (1.0 + eta_u / mu_l) * lam_u * beta_u * eps_u / (c1 * beta_l * me_l * mg_l);
    let a3_chi = k_lower;
    let a4_xi = gamma_u / mh_l * lam_u / mu_l;
    let a4_chi = gamma_l / mh_u * k_lower;
    let a2_xi = mg_u / eps_l * a3_xi;
    let a2_chi = mg_l / eps_u * k_lower;

    let a = params.averages();
    let omega = params.period();
    let spread = |xi: f64, chi: f64, width: f64| (xi.ln() + width).abs().max((chi.ln() - width).abs());
    let m1 = spread(a1_xi, a1_chi, 2.0 * (a.transmission * c2 * a3_xi * (-2.0 * (a.death + a.recovery) * omega).exp() + a.death) * omega);
    let m2 = spread(a2_xi, a2_chi, 2.0 * (a.death + a.progression) * omega);
    let m3 = spread(a3_xi, a3_chi, 2.0 * (a.death + a.recovery) * omega);
    let m4 = spread(a4_xi, a4_chi, 2.0 * (a.death + a.immunity_loss) * omega);
    let m0 = [point.p, point.q, point.r, point.s].iter().map(|v| v.ln().abs()).sum::<f64>() + 1.0;
    Ok(AprioriBounds {
        a1_xi,
        a1_chi,
        a2_xi,
        a2_chi,
        a3_xi,
        a3_chi,
        a4_xi,
        a4_chi,
        m0,
        m1,
        m2,
        m3,
        m4,
        radius: m0 + m1 + m2 + m3 + m4,
        k_lower,
        c1,
        c2,
    })
}

/// `β^ℓ ε^ℓ Λ^ℓ / ((μ+ε)^u (μ+γ)^u μ^u)`, a crude lower estimate of the reproduction number.
pub fn comparison_quantity(params: &ModelParams) -> Result<f64, EndemicError> {
    let (beta_l, _) = params.transmission().extrema();
    let (eps_l, _) = params.progression().extrema();
    let (lam_l, _) = params.birth().extrema();
    let (_, mu_u) = params.death().extrema();
    let (_, me_u) = (params.death() + params.progression())?.extrema();
    let (_, mg_u) = (params.death() + params.recovery())?.extrema();
    Ok(beta_l * eps_l * lam_l / (me_u * mg_u * mu_u))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PersistenceEstimate {
    pub min_infective: f64,
    pub k_lower: f64,
    pub runs: usize,
}

/// `0.9 ×` the smallest `I(t)` over `t ∈ [burn_in, horizon]` and all runs.
pub fn persistence_estimate(
    model: &SeirsModel,
    initial_states: &[StateVec],
    burn_in: f64,
    horizon: f64,
    tol: Tolerances,
) -> Result<PersistenceEstimate, EndemicError> {
    let mut min_infective = f64::INFINITY;
    for &x0 in initial_states {
        let traj = simulate(model, x0, 0.0, horizon, tol, Sampling::Steps)?;
        for (t, x) in traj.times().iter().zip(traj.states()) {
            if *t >= burn_in {
                min_infective = min_infective.min(x.i);
            }
        }
    }
    if !(min_infective >= DEGENERATE_FLOOR) {
        return Err(EndemicError::Degenerate { min_infective });
    }
    Ok(PersistenceEstimate { min_infective, k_lower: FLOOR_MARGIN * min_infective, runs: initial_states.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::incidence::RationalContact;
    use crate::r0::random_initial_states;

    fn params(beta: f64, b: f64) -> ModelParams {
        ModelParams::seasonal_example(beta, b).unwrap()
    }

    #[test]
    fn mass_action_point() {
        let pt = solve_r(&params(6.9, 0.6), &IncidenceSpec::mass_action()).unwrap();
        assert!((pt.d - 3.03).abs() < 1e-14);
        let closed = (1.0 - 6.06 / 6.9) / 3.03;
        assert!((pt.r - closed).abs() < 1e-10);
        assert!((pt.r - 0.0401779).abs() < 1e-7);
        assert!((pt.p - 0.8782609).abs() < 1e-7);
        assert!((pt.q - 0.0811594).abs() < 1e-7);
        assert!((pt.s - 0.0004018).abs() < 1e-7);
        assert!((pt.p + pt.q + pt.r + pt.s - 1.0).abs() < 1e-10);
        assert!(pt.r > 0.0 && pt.r < pt.d0);
    }

    #[test]
    fn subthreshold_average_has_no_root() {
        assert!(matches!(solve_r(&params(5.9, 0.1), &IncidenceSpec::mass_action()), Err(EndemicError::NoEndemicRoot { .. })));
    }

    #[test]
    fn psi_is_non_increasing() {
        let c = |v| crate::periodic::PeriodicCoefficient::constant(v, 1.0).unwrap();
        let p = ModelParams::new(c(2.0), c(1.5), c(9.0), c(0.4), c(1.0), c(0.3)).unwrap();
        let families: Vec<IncidenceSpec> = vec![
            IncidenceSpec::mass_action(),
            IncidenceFamily::Standard.into(),
            IncidenceFamily::HollingII { alpha: 2.0 }.into(),
            IncidenceFamily::MichaelisMenten(RationalContact { a: 0.0, b: 1.0, c: 1.0, d: 1.0 }).into(),
        ];
        let a = p.averages();
        for inc in families {
            let pt = solve_r(&p, &inc).unwrap();
            let values: Vec<f64> = (1..=100).map(|k| psi(&a, &inc, pt.d0 * k as f64 / 101.0)).collect();
            assert!(values.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{}", inc.name());
            assert!((pt.p + pt.q + pt.r + pt.s - pt.population()).abs() < 1e-10);
        }
    }

    #[test]
    fn threshold_matrix_and_closed_forms_agree() {
        let c = |v| crate::periodic::PeriodicCoefficient::constant(v, 1.0).unwrap();
        let p = ModelParams::new(c(2.0), c(1.5), c(9.0), c(0.4), c(1.0), c(0.3)).unwrap();
        let families: Vec<IncidenceSpec> = vec![
            IncidenceSpec::mass_action(),
            IncidenceFamily::HollingII { alpha: 2.0 }.into(),
            IncidenceFamily::Standard.into(),
            IncidenceFamily::MichaelisMenten(RationalContact { a: 0.0, b: 1.0, c: 1.0, d: 1.0 }).into(),
            IncidenceFamily::MichaelisMenten(RationalContact { a: 0.3, b: 2.0, c: 1.0, d: 0.5 }).into(),
        ];
        for inc in families {
            let pt = solve_r(&p, &inc).unwrap();
            let tm = threshold_matrix(&pt, &inc);
            let cf = det_m_closed_form(&pt, &inc).unwrap();
            assert!(tm.det < 0.0 && cf.value < 0.0, "{}", inc.name());
            assert!((tm.det - cf.value).abs() < 1e-10 * tm.det.abs(), "{}: {} vs {}", inc.name(), tm.det, cf.value);
            assert!(tm.det_is_nonzero());
        }
    }

    #[test]
    fn mass_action_matrix_entries() {
        let pt = solve_r(&params(6.9, 0.1), &IncidenceSpec::mass_action()).unwrap();
        let tm = threshold_matrix(&pt, &IncidenceSpec::mass_action());
        assert_eq!(tm.k010, 0.0);
        assert_eq!(tm.m[(0, 3)], 0.0);
        assert!((tm.k110 - 6.9 * pt.r).abs() < 1e-14);
        assert!((tm.k011 - 6.9 * pt.p).abs() < 1e-14);
        // cofactor expansion oracle: det = −μ̄²(μ̄+γ̄) β̄ p r / q when η̄ = 0
        let expected = -4.0 * 2.02 * 6.9 * pt.p * pt.r / pt.q;
        assert!((tm.det - expected).abs() < 1e-10 * expected.abs());
        // the population-independent display omits β̄
        let displayed = -(2.0 * 2.02 / pt.q) * (2.0 * pt.r * pt.p);
        assert!((det_m_closed_form(&pt, &IncidenceSpec::mass_action()).unwrap().value - 6.9 * displayed).abs() < 1e-10);
    }

    #[test]
    fn no_closed_form_for_power_law() {
        let inc: IncidenceSpec = IncidenceFamily::PowerLaw { p: 2.0, q: 1.0 }.into();
        let pt = solve_r(&params(6.9, 0.0), &IncidenceSpec::mass_action()).unwrap();
        // power law is population independent, so the closed form applies
        assert!(det_m_closed_form(&pt, &inc).is_some());
        let custom = IncidenceSpec::custom("c", |s, n, i| s * i / n, None::<fn(f64, f64, f64) -> crate::incidence::Partials>);
        assert!(det_m_closed_form(&pt, &custom).is_none());
    }

    #[test]
    fn apriori_examples() {
        let p = params(6.9, 0.6);
        let pt = solve_r(&p, &IncidenceSpec::mass_action()).unwrap();
        let unit = SaturationConstants { c1: 1.0, c2: 1.0, empirical: false };
        let b = apriori_bounds(&p, unit, 0.01, &pt).unwrap();
        assert!((b.a1_xi - 6.06 / 2.76).abs() < 1e-12);
        assert!((b.a1_xi - 2.1956522).abs() < 1e-7);
        assert!((b.a4_xi - 0.01).abs() < 1e-15);
        assert!((b.radius - (b.m0 + b.m1 + b.m2 + b.m3 + b.m4)).abs() < 1e-12);
        for (chi, xi) in [(b.a1_chi, b.a1_xi), (b.a2_chi, b.a2_xi), (b.a3_chi, b.a3_xi), (b.a4_chi, b.a4_xi)] {
            assert!(chi <= xi);
        }
        let flat = apriori_bounds(&params(6.9, 0.0), unit, 0.01, &pt).unwrap();
        assert!((flat.a1_xi - flat.a1_chi).abs() < 1e-12);
        assert!((flat.a1_xi - 6.06 / 6.9).abs() < 1e-12);
        assert!(apriori_bounds(&p, SaturationConstants { c1: 0.0, c2: 1.0, empirical: false }, 0.01, &pt).is_err());
        assert!(apriori_bounds(&p, unit, 0.0, &pt).is_err());
    }

    #[test]
    fn comparison_quantity_values() {
        assert!((comparison_quantity(&params(6.9, 0.1)).unwrap() - 1.02475).abs() < 5e-6);
        assert!((comparison_quantity(&params(6.9, 0.6)).unwrap() - 0.455446).abs() < 5e-7);
    }

    #[test]
    fn persistence_floor_signals() {
        let tol = Tolerances::default();
        let endemic = SeirsModel::new(params(6.9, 0.6), IncidenceSpec::mass_action());
        let starts = random_initial_states(&endemic, 3, 11);
        let est = persistence_estimate(&endemic, &starts, 100.0, 200.0, tol).unwrap();
        assert!(est.k_lower > 0.0 && est.k_lower < est.min_infective);

        // decay rate is only about 0.03 per unit time, so the window has to be long
        let extinct = SeirsModel::new(params(5.9, 0.1), IncidenceSpec::mass_action());
        assert!(matches!(persistence_estimate(&extinct, &starts, 500.0, 1000.0, tol), Err(EndemicError::Degenerate { .. })));

        let free = [StateVec::new(0.7, 0.0, 0.0, 0.3)];
        assert!(matches!(persistence_estimate(&endemic, &free, 0.0, 10.0, tol), Err(EndemicError::Degenerate { min_infective }) if min_infective == 0.0));
    }
}
