//! Periodic orbits as fixed points of the period map, by Newton shooting.

use serde::Serialize;

use crate::endemic::EndemicError;
use crate::linalg::Mat4;
use crate::model::{SeirsModel, StateVec};
use crate::ode::Tolerances;
use crate::simulation::{model_flow, simulate, Sampling, Trajectory};
use crate::variational::flow_jacobian;

/// Components below this at the anchor mark the orbit as disease-free.
pub const ENDEMIC_FLOOR: f64 = 1e-10;
const SINGULAR_DET: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitOptions {
    pub max_newton: usize,
    /// Newton stops once `‖flow(x, ω) − x‖` falls below this.
    pub target_residual: f64,
    /// Periods integrated to refresh the guess when Newton stalls.
    pub fallback_periods: usize,
    pub samples: usize,
    pub tol: Tolerances,
}

impl Default for OrbitOptions {
    fn default() -> Self {
        Self {
            max_newton: 30,
            target_residual: 1e-11,
            fallback_periods: 200,
            samples: 256,
            tol: Tolerances { rel: 1e-11, abs: 1e-13 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodicOrbit {
    pub anchor: StateVec,
    pub period: f64,
    pub residual: f64,
    /// Moduli of the monodromy eigenvalues, largest first.
    pub floquet_moduli: [f64; 4],
    pub newton_iterations: usize,
    pub used_fallback: bool,
    pub endemic: bool,
    #[serde(skip)]
    pub monodromy: Mat4,
    #[serde(skip)]
    pub samples: Trajectory,
}

/// State at `t = periods · ω` starting from `x0` at `t = 0`.
pub fn attractor_guess(model: &SeirsModel, x0: StateVec, periods: usize, tol: Tolerances) -> Result<StateVec, EndemicError> {
    Ok(model_flow(model, x0, 0.0, periods as f64 * model.period(), tol)?)
}

enum Newton {
    Converged { x: StateVec, iterations: usize },
    Stalled { residual: f64 },
}

fn newton(model: &SeirsModel, guess: StateVec, opts: &OrbitOptions) -> Result<Newton, EndemicError> {
    let omega = model.period();
    let mut x = guess;
    let mut residual = f64::INFINITY;
    for k in 0..opts.max_newton {
        let (fx, jac) = flow_jacobian(model, x, 0.0, omega, opts.tol)?;
        let g = [fx.s - x.s, fx.e - x.e, fx.i - x.i, fx.r - x.r];
        residual = fx.distance(&x);
        if residual < opts.target_residual {
            return Ok(Newton::Converged { x, iterations: k });
        }
        let a = jac - Mat4::identity();
        let det = a.determinant();
        if det.abs() < SINGULAR_DET {
            return Err(EndemicError::SingularJacobian { det });
        }
        let dx = a.solve(&g.map(|v| -v)).ok_or(EndemicError::SingularJacobian { det })?;
        let next = [x.s + dx[0], x.e + dx[1], x.i + dx[2], x.r + dx[3]].map(|v| v.max(0.0));
        x = next.into();
    }
    Ok(Newton::Stalled { residual })
}

/// Newton on `G(x) = flow(x, ω) − x` with Jacobian `Dflow − I`, projecting
/// iterates onto the nonnegative orthant. A stalled iteration is retried once
/// from the state reached after `fallback_periods` further periods.
pub fn find_periodic_orbit(model: &SeirsModel, guess: StateVec, opts: &OrbitOptions) -> Result<PeriodicOrbit, EndemicError> {
    let mut used_fallback = false;
    let (x, iterations) = match newton(model, guess, opts)? {
        Newton::Converged { x, iterations } => (x, iterations),
        Newton::Stalled { .. } => {
            used_fallback = true;
            let refreshed = attractor_guess(model, guess, opts.fallback_periods, opts.tol)?;
            match newton(model, refreshed, opts)? {
                Newton::Converged { x, iterations } => (x, iterations + opts.max_newton),
                Newton::Stalled { residual, .. } => {
                    return Err(EndemicError::NewtonStalled { iterations: 2 * opts.max_newton, residual })
                }
            }
        }
    };
    let omega = model.period();
    let (fx, monodromy) = flow_jacobian(model, x, 0.0, omega, opts.tol)?;
    let mut moduli: Vec<f64> = monodromy.eigenvalues().iter().map(|z| z.norm()).collect();
    moduli.sort_by(|a, b| b.total_cmp(a));
    let samples = simulate(model, x, 0.0, omega, opts.tol, Sampling::Uniform(opts.samples))?;
    let (lo, _) = samples.component_range();
    Ok(PeriodicOrbit {
        anchor: x,
        period: omega,
        residual: fx.distance(&x),
        floquet_moduli: [moduli[0], moduli[1], moduli[2], moduli[3]],
        newton_iterations: iterations,
        used_fallback,
        endemic: lo.iter().all(|&v| v > ENDEMIC_FLOOR),
        monodromy,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::endemic::solve_r;
    use crate::incidence::IncidenceSpec;
    use crate::model::ModelParams;

    fn example(beta: f64, b: f64) -> SeirsModel {
        SeirsModel::new(ModelParams::seasonal_example(beta, b).unwrap(), IncidenceSpec::mass_action())
    }

    const START: StateVec = StateVec::new(0.1, 0.1, 0.1, 0.1);

    #[test]
    fn autonomous_orbit_is_the_algebraic_point() {
        let m = example(6.9, 0.0);
        let opts = OrbitOptions::default();
        let guess = attractor_guess(&m, START, 200, opts.tol).unwrap();
        let orbit = find_periodic_orbit(&m, guess, &opts).unwrap();
        let pt = solve_r(&m.params, &m.incidence).unwrap();
        assert!(orbit.anchor.distance(&pt.as_state()) < 1e-6, "{:?} vs {:?}", orbit.anchor, pt);
        assert!(orbit.endemic);
        assert!(orbit.residual < 1e-8);
    }

    #[test]
    fn seasonal_orbit_has_population_multiplier() {
        let m = example(6.9, 0.6);
        let opts = OrbitOptions::default();
        let guess = attractor_guess(&m, START, 200, opts.tol).unwrap();
        let orbit = find_periodic_orbit(&m, guess, &opts).unwrap();
        assert!(orbit.residual < 1e-8);
        assert!(orbit.endemic);
        let n_multiplier = (-2f64).exp();
        assert!(orbit.floquet_moduli.iter().any(|m| (m - n_multiplier).abs() < 1e-6), "{:?}", orbit.floquet_moduli);
        for x in orbit.samples.states() {
            assert!((x.n() - 1.0).abs() < 1e-6);
        }
        assert_eq!(orbit.samples.len(), 256);
        // perturbed start returns to the same anchor
        let nudged = StateVec::new(orbit.anchor.s + 1e-3, orbit.anchor.e, orbit.anchor.i - 1e-3, orbit.anchor.r);
        let again = find_periodic_orbit(&m, nudged, &opts).unwrap();
        assert!(again.anchor.distance(&orbit.anchor) < 1e-8);
    }

    #[test]
    fn subthreshold_orbit_is_disease_free() {
        let m = example(5.9, 0.1);
        let opts = OrbitOptions::default();
        let guess = attractor_guess(&m, START, 200, opts.tol).unwrap();
        let orbit = find_periodic_orbit(&m, guess, &opts).unwrap();
        assert!(!orbit.endemic);
        assert!(orbit.anchor.i < ENDEMIC_FLOOR);
        assert!((orbit.anchor.s - 1.0).abs() < 1e-8);
    }
}
