//! Run configuration read from TOML.
//!
//! Every section except `[model]` is optional, and every optional key has the
//! default shown on its field. Unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use seirs_core::incidence::{IncidenceFamily, IncidenceSpec, RationalContact};
use seirs_core::model::{ModelParams, SeirsModel, StateVec};
use seirs_core::ode::Tolerances;
use seirs_core::periodic::{Harmonic, PeriodicCoefficient};
use seirs_core::r0::{R0Options, ToleranceSpec};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    /// Default: mass action.
    #[serde(default)]
    pub incidence: IncidenceSection,
    #[serde(default)]
    pub tolerances: TolSection,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub endemic: EndemicSection,
    #[serde(default)]
    pub orbit: OrbitSection,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub hypotheses: HypothesesSection,
    /// Output directory. Default: `out`.
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Seed for random initial states. Default: 0.
    #[serde(default)]
    pub seed: u64,
}

/// A periodic coefficient: a number, a seasonal form
/// `base·(1 + amplitude·cos(2πt/ω + phase))`, or an explicit cosine series.
#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum CoefficientSpec {
    Constant(f64),
    Seasonal(SeasonalSpec),
    Series(SeriesSpec),
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SeasonalSpec {
    pub base: f64,
    pub amplitude: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesSpec {
    pub constant: f64,
    #[serde(default)]
    pub harmonics: Vec<HarmonicSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct HarmonicSpec {
    pub amplitude: f64,
    /// Default: 1.
    #[serde(default = "one")]
    pub k: u32,
    #[serde(default)]
    pub phase: f64,
}

fn one() -> u32 {
    1
}

impl CoefficientSpec {
    pub fn build(&self, period: f64) -> Result<PeriodicCoefficient, CliError> {
        let built = match self {
            Self::Constant(v) => PeriodicCoefficient::constant(*v, period),
            Self::Seasonal(s) => PeriodicCoefficient::seasonal(s.base, s.amplitude, s.phase, period),
            Self::Series(s) => PeriodicCoefficient::new(
                s.constant,
                s.harmonics.iter().map(|h| Harmonic { amplitude: h.amplitude, k: h.k, phase: h.phase }).collect(),
                period,
            ),
        };
        built.map_err(|e| CliError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    /// Default: 1.
    #[serde(default = "unit")]
    pub period: f64,
    pub birth: CoefficientSpec,
    pub death: CoefficientSpec,
    pub transmission: CoefficientSpec,
    pub immunity_loss: CoefficientSpec,
    pub progression: CoefficientSpec,
    pub recovery: CoefficientSpec,
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize, Serialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum IncidenceSection {
    #[default]
    MassAction,
    Standard,
    /// `C(N) = (a + bN)/(c + dN)`.
    MichaelisMenten { a: f64, b: f64, c: f64, d: f64 },
    HollingIi { alpha: f64 },
    PowerLaw { p: f64, q: f64 },
    SaturatedPower { p: f64, q: f64, alpha: f64 },
    /// `φ ≡ 0`.
    Zero,
}

impl IncidenceSection {
    pub fn build(&self) -> IncidenceSpec {
        match *self {
            Self::MassAction => IncidenceSpec::mass_action(),
            Self::Standard => IncidenceFamily::Standard.into(),
            Self::MichaelisMenten { a, b, c, d } => IncidenceFamily::MichaelisMenten(RationalContact { a, b, c, d }).into(),
            Self::HollingIi { alpha } => IncidenceFamily::HollingII { alpha }.into(),
            Self::PowerLaw { p, q } => IncidenceFamily::PowerLaw { p, q }.into(),
            Self::SaturatedPower { p, q, alpha } => IncidenceFamily::SaturatedPower { p, q, alpha }.into(),
            Self::Zero => IncidenceSpec::zero(),
        }
    }
}

/// Trajectory tolerances. Default: `rel = 1e-9`, `abs = 1e-12`.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct TolSection {
    pub rel: f64,
    pub abs: f64,
}

impl Default for TolSection {
    fn default() -> Self {
        Self { rel: 1e-9, abs: 1e-12 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    /// Default: 20.
    pub horizon: f64,
    /// Uniform output rows per trajectory; 0 writes the accepted steps. Default: 2001.
    pub samples: usize,
    /// Default: `[[0.1, 0.1, 0.1, 0.1]]`.
    pub initial: Vec<[f64; 4]>,
    /// Extra seeded random initial states in the population box. Default: 0.
    pub random: usize,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self { horizon: 20.0, samples: 2001, initial: vec![[0.1; 4]], random: 0 }
    }
}

/// Default: `bisection_tol = 1e-8`, `rel = 1e-10`, `abs = 1e-12`.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSection {
    pub bisection_tol: f64,
    pub rel: f64,
    pub abs: f64,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self { bisection_tol: 1e-8, rel: 1e-10, abs: 1e-12 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct EndemicSection {
    /// Start of the window over which the smallest `I` is taken. Default: 500.
    pub burn_in: f64,
    /// Default: 1000.
    pub horizon: f64,
    /// Seeded random runs added to `initial`. Default: 10.
    pub runs: usize,
    /// Default: `[[0.1, 0.1, 0.1, 0.1]]`.
    pub initial: Vec<[f64; 4]>,
    /// Replaces the simulated lower bound on `I`. Default: none.
    pub k_lower: Option<f64>,
}

impl Default for EndemicSection {
    fn default() -> Self {
        Self { burn_in: 500.0, horizon: 1000.0, runs: 10, initial: vec![[0.1; 4]], k_lower: None }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct OrbitSection {
    /// Default: `[0.1, 0.1, 0.1, 0.1]`.
    pub guess: [f64; 4],
    /// Periods integrated from `guess` before shooting. Default: 200.
    pub pre_periods: usize,
    /// Default: 30.
    pub max_newton: usize,
    /// Default: 256.
    pub samples: usize,
    /// Shooting tolerances, tighter than the trajectory ones. Default: 1e-11.
    pub rel: f64,
    /// Default: 1e-13.
    pub abs: f64,
}

impl Default for OrbitSection {
    fn default() -> Self {
        Self { guess: [0.1; 4], pre_periods: 200, max_newton: 30, samples: 256, rel: 1e-11, abs: 1e-13 }
    }
}

/// Grid over the mean transmission rate and its relative seasonal amplitude.
#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub beta: Vec<f64>,
    pub amplitude: Vec<f64>,
    /// Phase of the seasonal term. Default: 0.
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct HypothesesSection {
    /// Grid points per axis. Default: 64.
    pub density: usize,
    /// Relative widening applied when the population box is a single point. Default: 0.5.
    pub widen: f64,
}

impl Default for HypothesesSection {
    fn default() -> Self {
        Self { density: 64, widen: 0.5 }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn params(&self) -> Result<ModelParams, CliError> {
        let m = &self.model;
        let w = m.period;
        ModelParams::new(
            m.birth.build(w)?,
            m.death.build(w)?,
            m.transmission.build(w)?,
            m.immunity_loss.build(w)?,
            m.progression.build(w)?,
            m.recovery.build(w)?,
        )
        .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn model(&self) -> Result<SeirsModel, CliError> {
        Ok(SeirsModel::new(self.params()?, self.incidence.build()))
    }

    pub fn tolerances(&self) -> Result<Tolerances, CliError> {
        Tolerances::new(self.tolerances.rel, self.tolerances.abs).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn r0_options(&self) -> Result<R0Options, CliError> {
        let a = self.analysis;
        Tolerances::new(a.rel, a.abs).map_err(|e| CliError::Config(e.to_string()))?;
        if !(a.bisection_tol > 0.0) {
            return Err(CliError::Config(format!("analysis.bisection_tol must be positive, got {}", a.bisection_tol)));
        }
        Ok(R0Options { bisection_tol: a.bisection_tol, integration: ToleranceSpec { rel: a.rel, abs: a.abs } })
    }

    pub fn orbit_tolerances(&self) -> Result<Tolerances, CliError> {
        Tolerances::new(self.orbit.rel, self.orbit.abs).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Apply `--tol`: relative tolerance `tol`, absolute `tol · 1e-3`, for
    /// trajectories, the threshold computation and shooting.
    pub fn override_tolerance(&mut self, tol: f64) {
        self.tolerances = TolSection { rel: tol, abs: tol * 1e-3 };
        self.analysis.rel = tol;
        self.analysis.abs = tol * 1e-3;
        self.orbit.rel = tol;
        self.orbit.abs = tol * 1e-3;
    }
}

pub fn states(rows: &[[f64; 4]]) -> Vec<StateVec> {
    rows.iter().map(|&r| r.into()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
        [model]
        birth = 2.0
        death = 2.0
        transmission = { base = 6.9, amplitude = 0.6 }
        immunity_loss = 0.0
        progression = 1.0
        recovery = 0.02
    "#;

    #[test]
    fn defaults_fill_optional_sections() {
        let cfg = RunConfig::parse(BASE).unwrap();
        assert_eq!(cfg.incidence, IncidenceSection::MassAction);
        assert_eq!(cfg.simulate.initial, vec![[0.1; 4]]);
        assert_eq!(cfg.orbit.samples, 256);
        let p = cfg.params().unwrap();
        assert_eq!(p, ModelParams::seasonal_example(6.9, 0.6).unwrap());
    }

    #[test]
    fn coefficient_forms_agree() {
        let series = BASE.replace(
            "transmission = { base = 6.9, amplitude = 0.6 }",
            "transmission = { constant = 6.9, harmonics = [{ amplitude = 4.14 }] }",
        );
        let a = RunConfig::parse(BASE).unwrap().params().unwrap();
        let b = RunConfig::parse(&series).unwrap().params().unwrap();
        for t in [0.0, 0.3, 0.77] {
            assert!((a.transmission().eval(t) - b.transmission().eval(t)).abs() < 1e-12);
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::parse(&format!("{BASE}\nbogus = 1\n")).is_err());
        assert!(RunConfig::parse(&format!("{BASE}\n[orbit]\nguesses = [1.0]\n")).is_err());
        assert!(RunConfig::parse(&format!("{BASE}\n[incidence]\nfamily = \"holling_ii\"\nalpha = 1.0\nbeta = 2.0\n")).is_err());
        let bad_coefficient = BASE.replace("amplitude = 0.6", "amplitude = 0.6, shift = 1.0");
        assert!(RunConfig::parse(&bad_coefficient).is_err());
    }

    #[test]
    fn incidence_families_parse() {
        let cfg = RunConfig::parse(&format!("{BASE}\n[incidence]\nfamily = \"michaelis_menten\"\na = 0.0\nb = 1.0\nc = 1.0\nd = 1.0\n")).unwrap();
        assert_eq!(cfg.incidence, IncidenceSection::MichaelisMenten { a: 0.0, b: 1.0, c: 1.0, d: 1.0 });
        let cfg = RunConfig::parse(&format!("{BASE}\n[incidence]\nfamily = \"zero\"\n")).unwrap();
        assert_eq!(cfg.incidence.build().eval(1.0, 1.0, 1.0), 0.0);
    }

    #[test]
    fn invalid_model_is_a_config_error() {
        let cfg = RunConfig::parse(&BASE.replace("death = 2.0", "death = -1.0")).unwrap();
        assert!(matches!(cfg.params(), Err(CliError::Config(_))));
    }

    #[test]
    fn round_trips() {
        let cfg = RunConfig::parse(BASE).unwrap();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(RunConfig::parse(&text).unwrap(), cfg);
    }
}
