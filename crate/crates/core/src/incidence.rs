//! Incidence functions `φ(S, N, I)` and their partial derivatives.
//!
//! The infection term of the model is `β(t) φ(S, N, I)`. Built-in families
//! carry closed-form partials and closed-form saturation constants
//! `c₁ ≤ φ/(SI) ≤ c₂` on a population box; [`IncidenceFamily::Custom`]
//! falls back to centred finite differences and a grid scan.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::model::PopulationBox;

/// Grid density per axis for the empirical saturation scan of custom incidences.
const CUSTOM_SCAN_DENSITY: usize = 64;

pub type IncidenceFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;
pub type PartialsFn = Arc<dyn Fn(f64, f64, f64) -> Partials + Send + Sync>;

/// `(∂φ/∂S, ∂φ/∂N, ∂φ/∂I)` at a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Partials {
    pub ds: f64,
    pub dn: f64,
    pub di: f64,
}

/// Contact function `C(N) = (a + b N) / (c + d N)` of Michaelis–Menten incidence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RationalContact {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl RationalContact {
    /// `C(N) = N`, which turns Michaelis–Menten into mass action.
    pub const LINEAR: Self = Self { a: 0.0, b: 1.0, c: 1.0, d: 0.0 };
    /// `C(N) = 1`, standard incidence.
    pub const CONSTANT: Self = Self { a: 1.0, b: 0.0, c: 1.0, d: 0.0 };

    pub fn eval(&self, n: f64) -> f64 {
        (self.a + self.b * n) / (self.c + self.d * n)
    }

    pub fn derivative(&self, n: f64) -> f64 {
        let den = self.c + self.d * n;
        (self.b * self.c - self.a * self.d) / (den * den)
    }

    /// Extrema of `C(N)/N` on `[lo, hi]`, using the stationary points of
    /// `(a + bN) / (cN + dN²)`.
    fn ratio_extrema(&self, lo: f64, hi: f64) -> (f64, f64) {
        let g = |n: f64| self.eval(n) / n;
        let mut candidates = vec![lo, hi];
        // derivative numerator: -(bd N² + 2ad N + ac)
        let (qa, qb, qc) = (self.b * self.d, 2.0 * self.a * self.d, self.a * self.c);
        if qa != 0.0 {
            let disc = qb * qb - 4.0 * qa * qc;
            if disc >= 0.0 {
                candidates.push((-qb + disc.sqrt()) / (2.0 * qa));
                candidates.push((-qb - disc.sqrt()) / (2.0 * qa));
            }
        } else if qb != 0.0 {
            candidates.push(-qc / qb);
        }
        candidates
            .into_iter()
            .filter(|n| (lo..=hi).contains(n))
            .map(g)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(mn, mx), v| (mn.min(v), mx.max(v)))
    }
}

#[derive(Clone)]
pub struct CustomIncidence {
    pub name: String,
    pub phi: IncidenceFn,
    pub partials: Option<PartialsFn>,
}

impl fmt::Debug for CustomIncidence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomIncidence")
            .field("name", &self.name)
            .field("closed_form_partials", &self.partials.is_some())
            .finish()
    }
}

#[derive(Debug, Clone)]
pub enum IncidenceFamily {
    /// `S I`
    MassAction,
    /// `S I / N`
    Standard,
    /// `C(N) S I / N`
    MichaelisMenten(RationalContact),
    /// `S I / (1 + α I)`
    HollingII { alpha: f64 },
    /// `I^p S^q`
    PowerLaw { p: f64, q: f64 },
    /// `S I^p / (1 + α I^q)`
    SaturatedPower { p: f64, q: f64, alpha: f64 },
    Custom(CustomIncidence),
}

/// Saturation constants `c₁ ≤ φ(S,N,I)/(SI) ≤ c₂` on a population box.
/// `c₁ = 0` or `c₂ = ∞` means the bound does not exist there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SaturationConstants {
    pub c1: f64,
    pub c2: f64,
    /// `true` when estimated by a grid scan rather than derived in closed form.
    pub empirical: bool,
}

#[derive(Debug, Clone)]
pub struct IncidenceSpec {
    family: IncidenceFamily,
}

impl From<IncidenceFamily> for IncidenceSpec {
    fn from(family: IncidenceFamily) -> Self {
        Self { family }
    }
}

impl IncidenceSpec {
    pub fn new(family: IncidenceFamily) -> Self {
        Self { family }
    }

    pub fn mass_action() -> Self {
        Self::new(IncidenceFamily::MassAction)
    }

    /// `φ ≡ 0`: no transmission at all.
    pub fn zero() -> Self {
        Self::custom("zero", |_, _, _| 0.0, Some(|_, _, _| Partials { ds: 0.0, dn: 0.0, di: 0.0 }))
    }

    pub fn custom<F, P>(name: &str, phi: F, partials: Option<P>) -> Self
    where
        F: Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
        P: Fn(f64, f64, f64) -> Partials + Send + Sync + 'static,
    {
        Self::new(IncidenceFamily::Custom(CustomIncidence {
            name: name.to_owned(),
            phi: Arc::new(phi),
            partials: partials.map(|p| Arc::new(p) as PartialsFn),
        }))
    }

    pub fn family(&self) -> &IncidenceFamily {
        &self.family
    }

    pub fn name(&self) -> String {
        match &self.family {
            IncidenceFamily::MassAction => "mass_action".into(),
            IncidenceFamily::Standard => "standard".into(),
            IncidenceFamily::MichaelisMenten(_) => "michaelis_menten".into(),
            IncidenceFamily::HollingII { .. } => "holling_ii".into(),
            IncidenceFamily::PowerLaw { .. } => "power_law".into(),
            IncidenceFamily::SaturatedPower { .. } => "saturated_power".into(),
            IncidenceFamily::Custom(c) => c.name.clone(),
        }
    }

    /// Whether `φ` does not depend on `N`.
    pub fn is_population_independent(&self) -> bool {
        matches!(
            self.family,
            IncidenceFamily::MassAction
                | IncidenceFamily::HollingII { .. }
                | IncidenceFamily::PowerLaw { .. }
                | IncidenceFamily::SaturatedPower { .. }
        )
    }

    pub fn eval(&self, s: f64, n: f64, i: f64) -> f64 {
        match &self.family {
            IncidenceFamily::MassAction => s * i,
            IncidenceFamily::Standard => s * i / n,
            IncidenceFamily::MichaelisMenten(c) => c.eval(n) * s * i / n,
            IncidenceFamily::HollingII { alpha } => s * i / (1.0 + alpha * i),
            IncidenceFamily::PowerLaw { p, q } => i.powf(*p) * s.powf(*q),
            IncidenceFamily::SaturatedPower { p, q, alpha } => s * i.powf(*p) / (1.0 + alpha * i.powf(*q)),
            IncidenceFamily::Custom(c) => (c.phi)(s, n, i),
        }
    }

    pub fn partials(&self, s: f64, n: f64, i: f64) -> Partials {
        match &self.family {
            IncidenceFamily::MassAction => Partials { ds: i, dn: 0.0, di: s },
            IncidenceFamily::Standard => Partials { ds: i / n, dn: -s * i / (n * n), di: s / n },
            IncidenceFamily::MichaelisMenten(c) => {
                let k = c.eval(n) / n;
                let dk = c.derivative(n) / n - c.eval(n) / (n * n);
                Partials { ds: k * i, dn: dk * s * i, di: k * s }
            }
            IncidenceFamily::HollingII { alpha } => {
                let den = 1.0 + alpha * i;
                Partials { ds: i / den, dn: 0.0, di: s / (den * den) }
            }
            IncidenceFamily::PowerLaw { p, q } => Partials {
                ds: q * i.powf(*p) * s.powf(q - 1.0),
                dn: 0.0,
                di: p * i.powf(p - 1.0) * s.powf(*q),
            },
            IncidenceFamily::SaturatedPower { p, q, alpha } => {
                let den = 1.0 + alpha * i.powf(*q);
                let di = s * (p * i.powf(p - 1.0) * den - i.powf(*p) * alpha * q * i.powf(q - 1.0)) / (den * den);
                Partials { ds: i.powf(*p) / den, dn: 0.0, di }
            }
            IncidenceFamily::Custom(c) => match &c.partials {
                Some(p) => p(s, n, i),
                None => finite_difference_partials(|s, n, i| (c.phi)(s, n, i), s, n, i),
            },
        }
    }

    /// Closed-form `c₁, c₂` for built-in families on the box
    /// `0 < S, I ≤ N`, `N ∈ [lower, upper]`; a `64³` grid scan for custom ones.
    pub fn saturation_constants(&self, bx: &PopulationBox) -> SaturationConstants {
        let (lo, hi) = (bx.lower, bx.upper);
        let exact = |c1: f64, c2: f64| SaturationConstants { c1, c2, empirical: false };
        match &self.family {
            IncidenceFamily::MassAction => exact(1.0, 1.0),
            IncidenceFamily::Standard => exact(1.0 / hi, 1.0 / lo),
            IncidenceFamily::MichaelisMenten(c) => {
                let (mn, mx) = c.ratio_extrema(lo, hi);
                exact(mn, mx)
            }
            IncidenceFamily::HollingII { alpha } => exact(1.0 / (1.0 + alpha * hi), 1.0),
            IncidenceFamily::PowerLaw { p, q } => {
                let (a1, a2) = power_range(p - 1.0, hi);
                let (b1, b2) = power_range(q - 1.0, hi);
                exact(a1 * b1, a2 * b2)
            }
            IncidenceFamily::SaturatedPower { p, q, alpha } => {
                let (mn, mx) = saturated_ratio_range(*p, *q, *alpha, hi);
                exact(mn, mx)
            }
            IncidenceFamily::Custom(_) => {
                let (mn, mx) = scan_ratio(self, bx, CUSTOM_SCAN_DENSITY);
                SaturationConstants { c1: mn, c2: mx, empirical: true }
            }
        }
    }
}

/// Range of `x^e` for `x ∈ (0, hi]`.
fn power_range(e: f64, hi: f64) -> (f64, f64) {
    if e > 0.0 {
        (0.0, hi.powf(e))
    } else if e < 0.0 {
        (hi.powf(e), f64::INFINITY)
    } else {
        (1.0, 1.0)
    }
}

/// Range of `h(I) = I^{p−1} / (1 + α I^q)` on `(0, hi]`.
fn saturated_ratio_range(p: f64, q: f64, alpha: f64, hi: f64) -> (f64, f64) {
    let h = |x: f64| x.powf(p - 1.0) / (1.0 + alpha * x.powf(q));
    let at_zero = if p > 1.0 {
        0.0
    } else if p < 1.0 {
        f64::INFINITY
    } else {
        1.0
    };
    let mut values = vec![at_zero, h(hi)];
    // stationary point: (p−1)(1 + α x^q) = α q x^q
    let denom = alpha * (q - p + 1.0);
    if denom != 0.0 {
        let xq = (p - 1.0) / denom;
        if xq > 0.0 {
            let x = xq.powf(1.0 / q);
            if x > 0.0 && x <= hi {
                values.push(h(x));
            }
        }
    }
    values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(mn, mx), &v| (mn.min(v), mx.max(v)))
}

fn scan_ratio(inc: &IncidenceSpec, bx: &PopulationBox, density: usize) -> (f64, f64) {
    let mut mn = f64::INFINITY;
    let mut mx = f64::NEG_INFINITY;
    for n in bx.n_grid(density) {
        for a in 1..=density {
            let s = n * a as f64 / density as f64;
            for b in 1..=density {
                let i = n * b as f64 / density as f64;
                let r = inc.eval(s, n, i) / (s * i);
                mn = mn.min(r);
                mx = mx.max(r);
            }
        }
    }
    (mn, mx)
}

/// Centred differences with step `1e-6 · max(1, |x|)` in each coordinate.
pub fn finite_difference_partials(phi: impl Fn(f64, f64, f64) -> f64, s: f64, n: f64, i: f64) -> Partials {
    let step = |x: f64| 1e-6 * x.abs().max(1.0);
    let (hs, hn, hi) = (step(s), step(n), step(i));
    Partials {
        ds: (phi(s + hs, n, i) - phi(s - hs, n, i)) / (2.0 * hs),
        dn: (phi(s, n + hn, i) - phi(s, n - hn, i)) / (2.0 * hn),
        di: (phi(s, n, i + hi) - phi(s, n, i - hi)) / (2.0 * hi),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn builtins() -> Vec<IncidenceSpec> {
        vec![
            IncidenceSpec::mass_action(),
            IncidenceFamily::Standard.into(),
            IncidenceFamily::MichaelisMenten(RationalContact { a: 0.0, b: 1.0, c: 1.0, d: 1.0 }).into(),
            IncidenceFamily::MichaelisMenten(RationalContact { a: 0.5, b: 2.0, c: 1.0, d: 0.3 }).into(),
            IncidenceFamily::HollingII { alpha: 1.0 }.into(),
            IncidenceFamily::PowerLaw { p: 2.0, q: 1.0 }.into(),
            IncidenceFamily::PowerLaw { p: 0.7, q: 1.3 }.into(),
            IncidenceFamily::SaturatedPower { p: 1.0, q: 2.0, alpha: 0.5 }.into(),
            IncidenceFamily::SaturatedPower { p: 1.5, q: 2.0, alpha: 2.0 }.into(),
        ]
    }

    #[test]
    fn boundary_vanishing() {
        for inc in builtins() {
            assert_eq!(inc.eval(0.0, 1.0, 0.4), 0.0, "{}", inc.name());
            assert_eq!(inc.eval(0.7, 1.0, 0.0), 0.0, "{}", inc.name());
        }
    }

    #[test]
    fn standard_incidence_slope_at_disease_free_point_is_one() {
        let inc: IncidenceSpec = IncidenceFamily::Standard.into();
        for s in [0.3, 1.0, 7.5] {
            assert!((inc.partials(s, s, 0.0).di - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn saturation_examples() {
        let bx = PopulationBox { lower: 0.5, upper: 1.5 };
        assert_eq!(IncidenceSpec::mass_action().saturation_constants(&bx), SaturationConstants { c1: 1.0, c2: 1.0, empirical: false });
        let holling: IncidenceSpec = IncidenceFamily::HollingII { alpha: 1.0 }.into();
        let c = holling.saturation_constants(&bx);
        assert!((c.c1 - 0.4).abs() < 1e-15 && c.c2 == 1.0);
        let power: IncidenceSpec = IncidenceFamily::PowerLaw { p: 2.0, q: 1.0 }.into();
        let c = power.saturation_constants(&bx);
        assert_eq!(c.c1, 0.0);
        assert!((c.c2 - 1.5).abs() < 1e-15);
        let std: IncidenceSpec = IncidenceFamily::Standard.into();
        let c = std.saturation_constants(&bx);
        assert!((c.c1 - 1.0 / 1.5).abs() < 1e-15 && (c.c2 - 2.0).abs() < 1e-15);
    }

    #[test]
    fn closed_form_saturation_matches_grid_scan() {
        let bx = PopulationBox { lower: 0.5, upper: 1.5 };
        for inc in builtins() {
            let exact = inc.saturation_constants(&bx);
            let (mn, mx) = scan_ratio(&inc, &bx, 48);
            // the grid sees a subset of the box, so its extremes lie inside the exact range
            assert!(exact.c1 <= mn + 1e-12 && mx <= exact.c2 + 1e-12, "{}: {exact:?} vs ({mn}, {mx})", inc.name());
        }
        let custom = IncidenceSpec::custom("holling", |s, _, i| s * i / (1.0 + i), None::<fn(f64, f64, f64) -> Partials>);
        let c = custom.saturation_constants(&bx);
        assert!(c.empirical);
        assert!((c.c1 - 0.4).abs() < 1e-12);
    }

    #[test]
    fn custom_without_partials_uses_finite_differences() {
        let custom = IncidenceSpec::custom("mm", |s, n, i| s * i / (1.0 + n), None::<fn(f64, f64, f64) -> Partials>);
        let p = custom.partials(0.6, 1.2, 0.3);
        assert!((p.ds - 0.3 / 2.2).abs() < 1e-9);
        assert!((p.dn + 0.18 / (2.2 * 2.2)).abs() < 1e-9);
        assert!((p.di - 0.6 / 2.2).abs() < 1e-9);
    }

    fn rel_close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-5 * a.abs().max(b.abs()).max(1e-3)
    }

    proptest! {
        #[test]
        fn closed_form_partials_match_finite_differences(
            s in 0.05f64..2.0, n in 0.5f64..2.0, i in 0.05f64..2.0, which in 0usize..9
        ) {
            let inc = &builtins()[which];
            let p = inc.partials(s, n, i);
            let fd = finite_difference_partials(|s, n, i| inc.eval(s, n, i), s, n, i);
            prop_assert!(rel_close(p.ds, fd.ds), "{} dS {} vs {}", inc.name(), p.ds, fd.ds);
            prop_assert!(rel_close(p.dn, fd.dn), "{} dN {} vs {}", inc.name(), p.dn, fd.dn);
            prop_assert!(rel_close(p.di, fd.di), "{} dI {} vs {}", inc.name(), p.di, fd.di);
        }
    }
}
