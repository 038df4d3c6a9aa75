//! Periodic scalar coefficients: a constant plus a finite cosine series.
//!
//! Every rate in the model is an ω-periodic function of time. They are
//! represented as
//!
//! ```text
//! f(t) = c + Σ a_j cos(2π k_j t / ω + φ_j)
//! ```
//!
//! which is periodic by construction, has an exact mean (`c`) and an exact
//! antiderivative.

use std::f64::consts::PI;
use std::ops::Add;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Grid resolution used to bracket extrema of multi-harmonic coefficients.
const EXTREMA_GRID: usize = 4096;
/// Termination width for the golden-section refinement.
const EXTREMA_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PeriodicError {
    #[error("period must be positive and finite, got {0}")]
    BadPeriod(f64),
    #[error("harmonic frequency multiple must be >= 1")]
    ZeroFrequency,
    #[error("non-finite coefficient value")]
    NonFinite,
    #[error("cannot combine coefficients with periods {0} and {1}")]
    PeriodMismatch(f64, f64),
}

/// One cosine term `amplitude * cos(2π k t / ω + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    pub amplitude: f64,
    pub k: u32,
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicCoefficient {
    constant: f64,
    harmonics: Vec<Harmonic>,
    period: f64,
}

impl PeriodicCoefficient {
    pub fn new(constant: f64, harmonics: Vec<Harmonic>, period: f64) -> Result<Self, PeriodicError> {
        if !(period.is_finite() && period > 0.0) {
            return Err(PeriodicError::BadPeriod(period));
        }
        if !constant.is_finite() {
            return Err(PeriodicError::NonFinite);
        }
        for h in &harmonics {
            if h.k == 0 {
                return Err(PeriodicError::ZeroFrequency);
            }
            if !(h.amplitude.is_finite() && h.phase.is_finite()) {
                return Err(PeriodicError::NonFinite);
            }
        }
        Ok(Self { constant, harmonics, period })
    }

    pub fn constant(value: f64, period: f64) -> Result<Self, PeriodicError> {
        Self::new(value, Vec::new(), period)
    }

    /// `base * (1 + relative * cos(2π t / ω + phase))`, the seasonal forcing shape.
    pub fn seasonal(base: f64, relative: f64, phase: f64, period: f64) -> Result<Self, PeriodicError> {
        let harmonics = if relative == 0.0 {
            Vec::new()
        } else {
            vec![Harmonic { amplitude: base * relative, k: 1, phase }]
        };
        Self::new(base, harmonics, period)
    }

    pub fn base(&self) -> f64 {
        self.constant
    }

    pub fn harmonics(&self) -> &[Harmonic] {
        &self.harmonics
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn is_constant(&self) -> bool {
        self.harmonics.iter().all(|h| h.amplitude == 0.0)
    }

    fn angular(&self, k: u32) -> f64 {
        2.0 * PI * f64::from(k) / self.period
    }

    pub fn eval(&self, t: f64) -> f64 {
        // fmod is exact, so reducing first keeps the phase accurate on long horizons
        let t = t.rem_euclid(self.period);
        self.harmonics
            .iter()
            .fold(self.constant, |acc, h| acc + h.amplitude * (self.angular(h.k) * t + h.phase).cos())
    }

    /// Period average `(1/ω) ∫₀^ω f`. Exact: the cosine terms integrate to zero.
    pub fn mean(&self) -> f64 {
        self.constant
    }

    /// Exact `∫_a^b f(t) dt`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        let mut acc = self.constant * (b - a);
        for h in &self.harmonics {
            let w = self.angular(h.k);
            acc += h.amplitude * ((w * b + h.phase).sin() - (w * a + h.phase).sin()) / w;
        }
        acc
    }

    /// `(f^ℓ, f^u)`: minimum and maximum over one period.
    pub fn extrema(&self) -> (f64, f64) {
        let active: Vec<&Harmonic> = self.harmonics.iter().filter(|h| h.amplitude != 0.0).collect();
        match active.as_slice() {
            [] => (self.constant, self.constant),
            [h] => (self.constant - h.amplitude.abs(), self.constant + h.amplitude.abs()),
            _ => self.scan_extrema(),
        }
    }

    fn scan_extrema(&self) -> (f64, f64) {
        let step = self.period / EXTREMA_GRID as f64;
        let values: Vec<f64> = (0..EXTREMA_GRID).map(|i| self.eval(i as f64 * step)).collect();
        let (mut imin, mut imax) = (0, 0);
        for (i, &v) in values.iter().enumerate() {
            if v < values[imin] {
                imin = i;
            }
            if v > values[imax] {
                imax = i;
            }
        }
        let centre = |i: usize| i as f64 * step;
        let lo = golden_section(|t| self.eval(t), centre(imin) - step, centre(imin) + step)
            .min(values[imin]);
        let hi = -golden_section(|t| -self.eval(t), centre(imax) - step, centre(imax) + step)
            .min(-values[imax]);
        (lo, hi)
    }
}

/// Minimum value of a unimodal function on `[a, b]`.
fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > EXTREMA_TOL {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    fc.min(fd).min(f(0.5 * (a + b)))
}

impl Add for &PeriodicCoefficient {
    type Output = Result<PeriodicCoefficient, PeriodicError>;

    fn add(self, rhs: &PeriodicCoefficient) -> Self::Output {
        if (self.period - rhs.period).abs() > 1e-15 * self.period.max(rhs.period) {
            return Err(PeriodicError::PeriodMismatch(self.period, rhs.period));
        }
        let mut harmonics = self.harmonics.clone();
        harmonics.extend_from_slice(&rhs.harmonics);
        PeriodicCoefficient::new(self.constant + rhs.constant, harmonics, self.period)
    }
}
