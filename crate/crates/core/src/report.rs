//! Combined threshold verdict for a model.

use serde::Serialize;

use crate::endemic::{
    comparison_quantity, det_m_closed_form, solve_r, threshold_matrix, ClosedFormDet, EndemicAlgebraicPoint, EndemicError,
    ThresholdMatrix,
};
use crate::model::SeirsModel;
use crate::r0::{r0_wang_zhao, Classification, R0Options, R0Report};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    /// `R₀ > 1` and `det 𝓜 ≠ 0`: an endemic periodic orbit exists.
    EndemicGuaranteed,
    /// `R₀ < 1`: the disease-free solution attracts every solution.
    ExtinctionGuaranteed,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdReport {
    pub r0: R0Report,
    pub point: Option<EndemicAlgebraicPoint>,
    /// Why `point` is missing, if it is.
    pub point_error: Option<String>,
    pub matrix: Option<ThresholdMatrix>,
    pub det_nonzero: Option<bool>,
    /// Closed-form determinant, whose sign alone settles `det 𝓜 ≠ 0` for these families.
    pub closed_form: Option<ClosedFormDet>,
    pub comparison_quantity: f64,
    pub verdict: Verdict,
}

pub fn existence_report(model: &SeirsModel, opts: R0Options) -> Result<ThresholdReport, EndemicError> {
    let r0 = r0_wang_zhao(model, opts)?;
    let (point, point_error) = match solve_r(&model.params, &model.incidence) {
        Ok(p) => (Some(p), None),
        Err(EndemicError::NoEndemicRoot { psi0 }) => (None, Some(EndemicError::NoEndemicRoot { psi0 }.to_string())),
        Err(e) => return Err(e),
    };
    let matrix = point.map(|p| threshold_matrix(&p, &model.incidence));
    let closed_form = point.and_then(|p| det_m_closed_form(&p, &model.incidence));
    let det_nonzero = matrix.map(|m| m.det_is_nonzero());
    let verdict = match r0.classification {
        Classification::Extinction => Verdict::ExtinctionGuaranteed,
        Classification::Endemic if det_nonzero == Some(true) => Verdict::EndemicGuaranteed,
        _ => Verdict::Inconclusive,
    };
    Ok(ThresholdReport {
        r0,
        point,
        point_error,
        matrix,
        det_nonzero,
        closed_form,
        comparison_quantity: comparison_quantity(&model.params)?,
        verdict,
    })
}
