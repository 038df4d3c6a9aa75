//! Adaptive explicit Runge–Kutta integration.
//!
//! Dormand–Prince 5(4) with the PI step-size controller of Hairer & Wanner
//! (`beta = 0.04`) and the fourth-order continuous extension of Dormand and
//! Prince for dense output between accepted steps. The
//! state is a fixed-size array so that the four-compartment model, its
//! 20-dimensional variational companion and the columns of fundamental
//! matrices all integrate without allocation.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("invalid time interval [{t0}, {t1}]")]
    InvalidInterval { t0: f64, t1: f64 },
    #[error("tolerances must lie in (0, 1e-2], got rel={rel}, abs={abs}")]
    InvalidTolerance { rel: f64, abs: f64 },
    #[error("non-finite initial state")]
    NonFiniteState,
    #[error("non-finite derivative at t={t}")]
    NonFiniteDerivative { t: f64 },
    #[error("step size underflow at t={t} (h={h}); the problem may be stiff")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("maximum number of steps exceeded at t={t}")]
    MaxSteps { t: f64 },
    #[error("component {component} reached {value:e} at t={t}")]
    Negative { t: f64, component: usize, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rel: f64,
    pub abs: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rel: 1e-9, abs: 1e-12 }
    }
}

impl Tolerances {
    pub fn new(rel: f64, abs: f64) -> Result<Self, OdeError> {
        let ok = |v: f64| v > 0.0 && v <= 1e-2;
        if ok(rel) && ok(abs) {
            Ok(Self { rel, abs })
        } else {
            Err(OdeError::InvalidTolerance { rel, abs })
        }
    }

    /// Same relative and absolute tolerance, as used by the threshold computations.
    pub fn uniform(tol: f64) -> Result<Self, OdeError> {
        Self::new(tol, tol)
    }
}

const MAX_STEPS: usize = 1_000_000;
const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const PI_BETA: f64 = 0.04;

// Dormand–Prince tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// difference between the 5th- and 4th-order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Continuous extension weights.
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Accepted steps of an integration, with what the dense output needs.
#[derive(Debug, Clone)]
pub struct OdeSolution<const N: usize> {
    times: Vec<f64>,
    states: Vec<[f64; N]>,
    derivatives: Vec<[f64; N]>,
    /// Quartic correction to the Hermite cubic on the step ending at each index.
    corrections: Vec<[f64; N]>,
}

impl<const N: usize> OdeSolution<N> {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[[f64; N]] {
        &self.states
    }

    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("solution is never empty")
    }

    pub fn last(&self) -> [f64; N] {
        *self.states.last().expect("solution is never empty")
    }

    /// Dense output of fourth order. `t` is clamped to the integration interval.
    pub fn eval(&self, t: f64) -> [f64; N] {
        let t = t.clamp(self.t_start(), self.t_end());
        let k = match self.times.binary_search_by(|s| s.total_cmp(&t)) {
            Ok(i) => return self.states[i],
            Err(i) => i.clamp(1, self.times.len() - 1) - 1,
        };
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let (y0, y1) = (&self.states[k], &self.states[k + 1]);
        let (f0, f1) = (&self.derivatives[k], &self.derivatives[k + 1]);
        let c = &self.corrections[k + 1];
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        let q = s * s * (1.0 - s) * (1.0 - s);
        std::array::from_fn(|i| h00 * y0[i] + h10 * h * f0[i] + h01 * y1[i] + h11 * h * f1[i] + q * c[i])
    }
}

fn check_finite<const N: usize>(t: f64, v: &[f64; N]) -> Result<(), OdeError> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(OdeError::NonFiniteDerivative { t })
    }
}

fn error_norm<const N: usize>(err: &[f64; N], y0: &[f64; N], y1: &[f64; N], tol: Tolerances) -> f64 {
    if N == 0 {
        return 0.0;
    }
    let sum: f64 = (0..N)
        .map(|i| {
            let sk = tol.abs + tol.rel * y0[i].abs().max(y1[i].abs());
            (err[i] / sk).powi(2)
        })
        .sum();
    (sum / N as f64).sqrt()
}

fn initial_step<const N: usize, F>(f: &mut F, t0: f64, y0: &[f64; N], f0: &[f64; N], span: f64, tol: Tolerances) -> Result<f64, OdeError>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let d0 = error_norm(y0, y0, y0, tol);
    let d1 = error_norm(f0, y0, y0, tol);
    let h0 = if d0 < 1e-10 || d1 < 1e-10 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span);
    let y1: [f64; N] = std::array::from_fn(|i| y0[i] + h0 * f0[i]);
    let f1 = f(t0 + h0, &y1);
    check_finite(t0 + h0, &f1)?;
    let diff: [f64; N] = std::array::from_fn(|i| f1[i] - f0[i]);
    let d2 = error_norm(&diff, y0, y0, tol) / h0;
    let dmax = d1.max(d2);
    let h1 = if dmax <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / dmax).powf(0.2) };
    Ok((100.0 * h0).min(h1).min(span))
}

/// Integrate `x' = f(t, x)` from `t0` to `t1`, calling `on_step` at the initial
/// point and after every accepted step with `(t, x, f(t, x))`.
pub fn integrate_with<const N: usize, F, S>(
    f: F,
    t0: f64,
    x0: [f64; N],
    t1: f64,
    tol: Tolerances,
    mut on_step: S,
) -> Result<[f64; N], OdeError>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
    S: FnMut(f64, &[f64; N], &[f64; N]),
{
    drive(f, t0, x0, t1, tol, None, |t, y, dy, _| on_step(t, y, dy))
}

/// As [`integrate_with`], but after every accepted step components in
/// `(−slack, 0)` are set to zero and anything lower is an error.
pub fn integrate_nonnegative_with<const N: usize, F, S>(
    f: F,
    t0: f64,
    x0: [f64; N],
    t1: f64,
    tol: Tolerances,
    slack: f64,
    mut on_step: S,
) -> Result<[f64; N], OdeError>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
    S: FnMut(f64, &[f64; N], &[f64; N]),
{
    drive(f, t0, x0, t1, tol, Some(slack), |t, y, dy, _| on_step(t, y, dy))
}

/// Returns whether any component changed.
fn project<const N: usize>(t: f64, y: &mut [f64; N], slack: f64) -> Result<bool, OdeError> {
    let mut changed = false;
    for (component, v) in y.iter_mut().enumerate() {
        if *v < 0.0 {
            if *v <= -slack {
                return Err(OdeError::Negative { t, component, value: *v });
            }
            *v = 0.0;
            changed = true;
        }
    }
    Ok(changed)
}

fn drive<const N: usize, F, S>(
    mut f: F,
    t0: f64,
    x0: [f64; N],
    t1: f64,
    tol: Tolerances,
    floor: Option<f64>,
    mut on_step: S,
) -> Result<[f64; N], OdeError>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
    S: FnMut(f64, &[f64; N], &[f64; N], &[f64; N]),
{
    if !(t0.is_finite() && t1.is_finite()) || t1 < t0 {
        return Err(OdeError::InvalidInterval { t0, t1 });
    }
    if !x0.iter().all(|v| v.is_finite()) {
        return Err(OdeError::NonFiniteState);
    }
    let mut k: [[f64; N]; 7] = [[0.0; N]; 7];
    k[0] = f(t0, &x0);
    check_finite(t0, &k[0])?;
    on_step(t0, &x0, &k[0], &[0.0; N]);
    if t1 == t0 {
        return Ok(x0);
    }

    let expo = 0.2 - PI_BETA * 0.75;
    let mut fac_old: f64 = 1e-4;
    let mut t = t0;
    let mut y = x0;
    let mut h = initial_step(&mut f, t0, &x0, &k[0], t1 - t0, tol)?;
    let mut rejected_last = false;

    for _ in 0..MAX_STEPS {
        if t + 1.01 * h >= t1 {
            h = t1 - t;
        }
        if h <= 16.0 * f64::EPSILON * t.abs().max(1.0) {
            return Err(OdeError::StepSizeUnderflow { t, h });
        }

        let mut stage = [0.0; N];
        for s in 1..7 {
            for i in 0..N {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += A[s][j] * kj[i];
                }
                stage[i] = y[i] + h * acc;
            }
            k[s] = f(t + C[s] * h, &stage);
            check_finite(t + C[s] * h, &k[s])?;
        }
        // k[6] was evaluated at the 5th-order solution (FSAL)
        let y_new = stage;
        let err: [f64; N] = std::array::from_fn(|i| h * (0..7).map(|s| E[s] * k[s][i]).sum::<f64>());
        let e = error_norm(&err, &y, &y_new, tol);

        let fac11 = e.powf(expo);
        if e <= 1.0 {
            let mut fac = fac11 / fac_old.powf(PI_BETA);
            fac = (fac / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_new = h / fac;
            fac_old = e.max(1e-4);
            let correction: [f64; N] = std::array::from_fn(|i| h * (0..7).map(|s| D[s] * k[s][i]).sum::<f64>());
            t = if t1 - (t + h) <= 16.0 * f64::EPSILON * t1.abs().max(1.0) { t1 } else { t + h };
            y = y_new;
            k[0] = k[6];
            if let Some(slack) = floor {
                if project(t, &mut y, slack)? {
                    k[0] = f(t, &y);
                    check_finite(t, &k[0])?;
                }
            }
            on_step(t, &y, &k[0], &correction);
            if t >= t1 {
                return Ok(y);
            }
            if rejected_last {
                h_new = h_new.min(h);
            }
            rejected_last = false;
            h = h_new;
        } else {
            h /= (fac11 / SAFETY).min(1.0 / FAC_MIN);
            rejected_last = true;
        }
    }
    Err(OdeError::MaxSteps { t })
}

/// Integrate and keep every accepted step for dense output.
pub fn integrate<const N: usize, F>(f: F, t0: f64, x0: [f64; N], t1: f64, tol: Tolerances) -> Result<OdeSolution<N>, OdeError>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    record(f, t0, x0, t1, tol, None)
}

/// [`integrate`] with the nonnegativity floor of [`integrate_nonnegative_with`].
pub fn integrate_nonnegative<const N: usize, F>(
    f: F,
    t0: f64,
    x0: [f64; N],
    t1: f64,
    tol: Tolerances,
    slack: f64,
) -> Result<OdeSolution<N>, OdeError>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    record(f, t0, x0, t1, tol, Some(slack))
}

fn record<const N: usize, F>(
    f: F,
    t0: f64,
    x0: [f64; N],
    t1: f64,
    tol: Tolerances,
    floor: Option<f64>,
) -> Result<OdeSolution<N>, OdeError>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let mut sol = OdeSolution { times: Vec::new(), states: Vec::new(), derivatives: Vec::new(), corrections: Vec::new() };
    drive(f, t0, x0, t1, tol, floor, |t, y, dy, c| {
        sol.times.push(t);
        sol.states.push(*y);
        sol.derivatives.push(*dy);
        sol.corrections.push(*c);
    })?;
    Ok(sol)
}

/// End point of the flow from `(t0, x0)` to `t1`.
pub fn flow<const N: usize, F>(f: F, t0: f64, x0: [f64; N], t1: f64, tol: Tolerances) -> Result<[f64; N], OdeError>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    integrate_with(f, t0, x0, t1, tol, |_, _, _| {})
}
