//! Trajectories of the nonlinear model.

use std::io::{self, Write};

use thiserror::Error;

use crate::model::{ModelError, SeirsModel, StateVec};
use crate::ode::{self, OdeError, Tolerances};

/// Negative values above this are rounding noise and are clamped to zero.
pub const CLAMP_SLACK: f64 = 1e-12;

/// Clamping slack for a run: never below [`CLAMP_SLACK`], and wide enough
/// for the local error accepted under `tol`.
pub fn clamp_slack(tol: Tolerances) -> f64 {
    CLAMP_SLACK.max(10.0 * tol.abs)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulationError {
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("initial state must be nonnegative, got {0:?}")]
    NegativeInitialState([f64; 4]),
    #[error("component {component} reached {value:e} at t={t}")]
    NegativeState { t: f64, component: usize, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampling {
    /// One sample per accepted integrator step.
    Steps,
    /// `n ≥ 2` equally spaced samples including both endpoints, from dense output.
    Uniform(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<StateVec>,
    dense: bool,
}

impl Trajectory {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[StateVec] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Whether the samples came from interpolation rather than integrator steps.
    pub fn is_dense(&self) -> bool {
        self.dense
    }

    pub fn last(&self) -> StateVec {
        *self.states.last().expect("trajectory has at least one sample")
    }

    /// Componentwise `(min, max)` over all samples.
    pub fn component_range(&self) -> ([f64; 4], [f64; 4]) {
        let mut lo = [f64::INFINITY; 4];
        let mut hi = [f64::NEG_INFINITY; 4];
        for x in &self.states {
            for (k, v) in x.to_array().into_iter().enumerate() {
                lo[k] = lo[k].min(v);
                hi[k] = hi[k].max(v);
            }
        }
        (lo, hi)
    }

    /// CSV with header `t,S,E,I,R,N` and 17 significant digits per value.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,S,E,I,R,N")?;
        for (t, x) in self.times.iter().zip(&self.states) {
            writeln!(out, "{t:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}", x.s, x.e, x.i, x.r, x.n())?;
        }
        Ok(())
    }
}

fn clamp(t: f64, x: [f64; 4], slack: f64) -> Result<StateVec, SimulationError> {
    let mut out = x;
    for (component, v) in out.iter_mut().enumerate() {
        if *v <= -slack {
            return Err(SimulationError::NegativeState { t, component, value: *v });
        }
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    Ok(out.into())
}

/// Right-hand side with negatives within `slack` zeroed before evaluation.
pub(crate) fn guarded_rhs(model: &SeirsModel, slack: f64) -> impl Fn(f64, &[f64; 4]) -> [f64; 4] + '_ {
    move |t, x| {
        let y = x.map(|v| if v < 0.0 && v > -slack { 0.0 } else { v });
        model.rhs(t, &y)
    }
}

pub fn simulate(
    model: &SeirsModel,
    x0: StateVec,
    t0: f64,
    t1: f64,
    tol: Tolerances,
    sampling: Sampling,
) -> Result<Trajectory, SimulationError> {
    if !x0.is_finite() {
        return Err(ModelError::NonFiniteState(x0.to_array()).into());
    }
    if !x0.is_nonnegative() {
        return Err(SimulationError::NegativeInitialState(x0.to_array()));
    }
    let slack = clamp_slack(tol);
    let sol = ode::integrate_nonnegative(guarded_rhs(model, slack), t0, x0.to_array(), t1, tol, slack)?;
    let (times, raw): (Vec<f64>, Vec<[f64; 4]>) = match sampling {
        Sampling::Steps => (sol.times().to_vec(), sol.states().to_vec()),
        Sampling::Uniform(n) if t1 > t0 && n >= 2 => {
            let step = (t1 - t0) / (n - 1) as f64;
            let times: Vec<f64> = (0..n).map(|k| if k == n - 1 { t1 } else { t0 + k as f64 * step }).collect();
            let states = times.iter().map(|&t| sol.eval(t)).collect();
            (times, states)
        }
        Sampling::Uniform(_) => (vec![t0], vec![x0.to_array()]),
    };
    let states = times.iter().zip(raw).map(|(&t, x)| clamp(t, x, slack)).collect::<Result<_, _>>()?;
    Ok(Trajectory { times, states, dense: matches!(sampling, Sampling::Uniform(_)) })
}

/// End state of the model flow from `(t0, x0)` to `t1`.
pub fn model_flow(model: &SeirsModel, x0: StateVec, t0: f64, t1: f64, tol: Tolerances) -> Result<StateVec, SimulationError> {
    let slack = clamp_slack(tol);
    let end = ode::integrate_nonnegative_with(guarded_rhs(model, slack), t0, x0.to_array(), t1, tol, slack, |_, _, _| {})?;
    clamp(t1, end, slack)
}
