//! Grid audit of an incidence function against the model's standing assumptions.
//!
//! Every check scans `S, I ∈ [0, N_max]` and `N ∈ [lower, upper]` with
//! `S, I ≤ N`. A failure is certified by a witness point; a pass is only
//! evidence.

use serde::Serialize;

use crate::incidence::{IncidenceSpec, SaturationConstants};
use crate::model::{ModelError, PopulationBox};

pub const DEFAULT_DENSITY: usize = 64;

/// Slack for monotonicity comparisons, relative to the values compared.
const MONOTONE_SLACK: f64 = 1e-12;
/// Step scale for the smoothness check.
const SMOOTHNESS_STEP: f64 = 1e-5;
/// Accepted disagreement between partials and finite differences.
const SMOOTHNESS_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    #[serde(rename = "S")]
    pub s: f64,
    #[serde(rename = "N")]
    pub n: f64,
    #[serde(rename = "I")]
    pub i: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisCheck {
    pub name: &'static str,
    pub passed: bool,
    pub witness: Option<Witness>,
}

impl HypothesisCheck {
    fn from_witness(name: &'static str, witness: Option<Witness>) -> Self {
        Self { name, passed: witness.is_none(), witness }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub incidence: String,
    pub population_box: PopulationBox,
    pub density: usize,
    /// Smallest and largest `φ/(SI)` seen on the grid.
    pub grid_c1: f64,
    pub grid_c2: f64,
    pub constants: SaturationConstants,
    pub checks: Vec<HypothesisCheck>,
}

impl HypothesisReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&HypothesisCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

struct Grid {
    axis: Vec<f64>,
    levels: Vec<f64>,
}

impl Grid {
    fn new(bx: &PopulationBox, density: usize) -> Self {
        let step = bx.upper / (density - 1) as f64;
        Self { axis: (0..density).map(|k| k as f64 * step).collect(), levels: bx.n_grid(density) }
    }

    /// Grid points `(S, N, I)` with `S, I ≤ N`, ordered by `N`, then `S`, then `I`.
    fn points(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.levels.iter().flat_map(move |&n| {
            self.within(n).flat_map(move |s| self.within(n).map(move |i| (s, n, i)))
        })
    }

    fn within(&self, n: f64) -> impl Iterator<Item = f64> + '_ {
        self.axis.iter().copied().take_while(move |&x| x <= n * (1.0 + 1e-15))
    }
}

fn witness(s: f64, n: f64, i: f64, detail: String) -> Option<Witness> {
    Some(Witness { s, n, i, detail })
}

fn worse(a: f64, b: f64) -> bool {
    a > b + MONOTONE_SLACK * a.abs().max(b.abs()).max(1.0)
}

pub fn check_hypotheses(
    inc: &IncidenceSpec,
    bx: &PopulationBox,
    density: usize,
) -> Result<HypothesisReport, ModelError> {
    if bx.is_degenerate() || !(bx.lower > 0.0) {
        return Err(ModelError::DegenerateBox { lower: bx.lower, upper: bx.upper });
    }
    let density = density.max(3);
    let grid = Grid::new(bx, density);
    let phi = |s, n, i| inc.eval(s, n, i);

    let mut boundary = None;
    for (s, n, i) in grid.points().filter(|&(s, _, i)| s == 0.0 || i == 0.0) {
        let v = phi(s, n, i);
        if v != 0.0 {
            boundary = witness(s, n, i, format!("phi = {v:e} on the boundary"));
            break;
        }
    }

    let (mut grid_c1, mut grid_c2) = (f64::INFINITY, f64::NEG_INFINITY);
    for (s, n, i) in grid.points().filter(|&(s, _, i)| s > 0.0 && i > 0.0) {
        let ratio = phi(s, n, i) / (s * i);
        grid_c1 = grid_c1.min(ratio);
        grid_c2 = grid_c2.max(ratio);
    }
    let constants = inc.saturation_constants(bx);
    let saturation = if !(constants.c1 > 0.0) {
        witness(f64::NAN, bx.upper, 0.0, format!("phi/(SI) has infimum {} on the box", constants.c1))
    } else if !constants.c2.is_finite() {
        witness(f64::NAN, bx.upper, 0.0, "phi/(SI) is unbounded on the box".to_owned())
    } else {
        None
    };

    let monotone = monotonicity(&grid, &phi);
    let ratio = ratio_monotonicity(&grid, &phi);
    let smooth = smoothness(&grid, inc);

    Ok(HypothesisReport {
        incidence: inc.name(),
        population_box: *bx,
        density,
        grid_c1,
        grid_c2,
        constants,
        checks: vec![
            HypothesisCheck::from_witness("boundary_vanishing", boundary),
            HypothesisCheck::from_witness("saturation_bounds", saturation),
            HypothesisCheck::from_witness("monotonicity", monotone),
            HypothesisCheck::from_witness("ratio_non_increasing", ratio),
            HypothesisCheck::from_witness("smoothness", smooth),
        ],
    })
}

/// Non-decreasing in `S` and `I`, non-increasing in `N`.
fn monotonicity(grid: &Grid, phi: &impl Fn(f64, f64, f64) -> f64) -> Option<Witness> {
    for &n in &grid.levels {
        let pts: Vec<f64> = grid.within(n).collect();
        for &fixed in &pts {
            for w in pts.windows(2) {
                let (a, b) = (phi(w[0], n, fixed), phi(w[1], n, fixed));
                if worse(a, b) {
                    return witness(w[1], n, fixed, format!("decreases in S: {a:e} -> {b:e}"));
                }
                let (a, b) = (phi(fixed, n, w[0]), phi(fixed, n, w[1]));
                if worse(a, b) {
                    return witness(fixed, n, w[1], format!("decreases in I: {a:e} -> {b:e}"));
                }
            }
        }
    }
    for w in grid.levels.windows(2) {
        for s in grid.within(w[0]) {
            for i in grid.within(w[0]) {
                let (a, b) = (phi(s, w[0], i), phi(s, w[1], i));
                if worse(b, a) {
                    return witness(s, w[1], i, format!("increases in N: {a:e} -> {b:e}"));
                }
            }
        }
    }
    None
}

/// `φ/I` non-increasing in `I > 0`.
fn ratio_monotonicity(grid: &Grid, phi: &impl Fn(f64, f64, f64) -> f64) -> Option<Witness> {
    for &n in &grid.levels {
        let is: Vec<f64> = grid.within(n).filter(|&i| i > 0.0).collect();
        for s in grid.within(n).filter(|&s| s > 0.0) {
            for w in is.windows(2) {
                let (a, b) = (phi(s, n, w[0]) / w[0], phi(s, n, w[1]) / w[1]);
                if worse(b, a) {
                    return witness(s, n, w[1], format!("phi/I increases in I: {a:e} -> {b:e}"));
                }
            }
        }
    }
    None
}

/// Partials agree with centred differences at interior grid points.
fn smoothness(grid: &Grid, inc: &IncidenceSpec) -> Option<Witness> {
    let interior = |x: f64, n: f64| x > 0.0 && x < n;
    for (s, n, i) in grid.points().filter(|&(s, n, i)| interior(s, n) && interior(i, n)) {
        let exact = inc.partials(s, n, i);
        let fd = central_differences(inc, s, n, i);
        for (label, a, b) in [("S", exact.ds, fd.0), ("N", exact.dn, fd.1), ("I", exact.di, fd.2)] {
            if !a.is_finite() || (a - b).abs() > SMOOTHNESS_TOL * (1.0 + a.abs()) {
                return witness(s, n, i, format!("d/d{label}: partial {a:e} vs difference {b:e}"));
            }
        }
    }
    None
}

fn central_differences(inc: &IncidenceSpec, s: f64, n: f64, i: f64) -> (f64, f64, f64) {
    let h = |x: f64| SMOOTHNESS_STEP * x.abs().max(1.0);
    let (hs, hn, hi) = (h(s), h(n), h(i));
    (
        (inc.eval(s + hs, n, i) - inc.eval(s - hs, n, i)) / (2.0 * hs),
        (inc.eval(s, n + hn, i) - inc.eval(s, n - hn, i)) / (2.0 * hn),
        (inc.eval(s, n, i + hi) - inc.eval(s, n, i - hi)) / (2.0 * hi),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::incidence::{IncidenceFamily, Partials, RationalContact};

    const BOX: PopulationBox = PopulationBox { lower: 0.5, upper: 1.5 };

    #[test]
    fn mass_action_passes_with_unit_constants() {
        let r = check_hypotheses(&IncidenceSpec::mass_action(), &BOX, 32).unwrap();
        assert!(r.all_passed(), "{r:?}");
        assert!((r.grid_c1 - 1.0).abs() < 1e-15 && (r.grid_c2 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn holling_passes_with_expected_constants() {
        let inc: IncidenceSpec = IncidenceFamily::HollingII { alpha: 1.0 }.into();
        let r = check_hypotheses(&inc, &BOX, 64).unwrap();
        assert!(r.all_passed(), "{r:?}");
        // φ/(SI) = 1/(1+I), extremes at I = 1.5 and the smallest grid I
        assert!((r.grid_c1 - 0.4).abs() < 1e-12);
        assert!(r.grid_c2 <= 1.0 && r.grid_c2 > 0.97);
        assert_eq!(r.constants.c1, 0.4);
    }

    #[test]
    fn saturating_families_pass() {
        let families: Vec<IncidenceSpec> = vec![
            IncidenceFamily::Standard.into(),
            IncidenceFamily::MichaelisMenten(RationalContact { a: 0.0, b: 1.0, c: 1.0, d: 1.0 }).into(),
            // peak of S I/(1 + α I²) sits at I = α^{-1/2}, outside the box
            IncidenceFamily::SaturatedPower { p: 1.0, q: 2.0, alpha: 0.2 }.into(),
        ];
        for inc in families {
            let r = check_hypotheses(&inc, &BOX, 24).unwrap();
            assert!(r.all_passed(), "{}: {:?}", inc.name(), r.checks);
        }
    }

    #[test]
    fn saturation_peak_inside_box_breaks_monotonicity() {
        let inc: IncidenceSpec = IncidenceFamily::SaturatedPower { p: 1.0, q: 2.0, alpha: 0.5 }.into();
        let r = check_hypotheses(&inc, &BOX, 24).unwrap();
        let w = r.check("monotonicity").unwrap().witness.clone().unwrap();
        assert!(w.i > 2f64.sqrt());
    }

    #[test]
    fn quadratic_power_law_fails_ratio_check_with_witness() {
        let inc: IncidenceSpec = IncidenceFamily::PowerLaw { p: 2.0, q: 1.0 }.into();
        let r = check_hypotheses(&inc, &BOX, 32).unwrap();
        let ratio = r.check("ratio_non_increasing").unwrap();
        assert!(!ratio.passed);
        let w = ratio.witness.as_ref().unwrap();
        assert!(w.i > 0.0 && w.i <= w.n && w.s > 0.0);
        assert!(!r.check("saturation_bounds").unwrap().passed);
    }

    #[test]
    fn detects_planted_violations() {
        let leaky = IncidenceSpec::custom("leaky", |s, _, i| s * i + 1e-3 * s, None::<fn(f64, f64, f64) -> Partials>);
        let r = check_hypotheses(&leaky, &BOX, 16).unwrap();
        assert!(!r.check("boundary_vanishing").unwrap().passed);

        let growing_in_n = IncidenceSpec::custom("growing", |s, n, i| s * i * n, None::<fn(f64, f64, f64) -> Partials>);
        let r = check_hypotheses(&growing_in_n, &BOX, 16).unwrap();
        assert!(!r.check("monotonicity").unwrap().passed);

        let wrong = IncidenceSpec::custom("wrong_partials", |s, _, i| s * i, Some(|s: f64, _: f64, _: f64| Partials { ds: 0.0, dn: 0.0, di: s }));
        let r = check_hypotheses(&wrong, &BOX, 16).unwrap();
        assert!(!r.check("smoothness").unwrap().passed);
    }

    #[test]
    fn degenerate_box_is_rejected() {
        let bx = PopulationBox { lower: 1.0, upper: 1.0 };
        assert!(matches!(check_hypotheses(&IncidenceSpec::mass_action(), &bx, 8), Err(ModelError::DegenerateBox { .. })));
    }
}
