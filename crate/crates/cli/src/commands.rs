use rayon::prelude::*;
use serde::Serialize;

use seirs_core::endemic::{apriori_bounds, persistence_estimate, AprioriBounds, EndemicError, PersistenceEstimate};
use seirs_core::hypotheses::{check_hypotheses, HypothesisReport};
use seirs_core::model::{Averages, ModelParams, PopulationBox, SeirsModel, StateVec};
use seirs_core::orbit::{attractor_guess, find_periodic_orbit, OrbitOptions, PeriodicOrbit};
use seirs_core::periodic::PeriodicCoefficient;
use seirs_core::r0::{r0_bacaer_approx, random_initial_states};
use seirs_core::report::{existence_report, ThresholdReport};
use seirs_core::simulation::{simulate, Sampling};

use crate::config::{states, RunConfig};
use crate::error::CliError;
use crate::output::{fmt_f64, gnuplot_series, OutDir};

/// Writes one CSV per initial state plus a gnuplot script.
pub fn simulate_cmd(cfg: &RunConfig, out: &OutDir) -> Result<String, CliError> {
    let model = cfg.model()?;
    let tol = cfg.tolerances()?;
    let sc = &cfg.simulate;
    if !(sc.horizon >= 0.0 && sc.horizon.is_finite()) {
        return Err(CliError::Config(format!("simulate.horizon must be a nonnegative number, got {}", sc.horizon)));
    }
    let mut ics = states(&sc.initial);
    ics.extend(random_initial_states(&model, sc.random, cfg.seed));
    if ics.is_empty() {
        return Err(CliError::Config("simulate needs at least one initial state".into()));
    }
    let sampling = if sc.samples == 0 { Sampling::Steps } else { Sampling::Uniform(sc.samples) };
    let trajectories: Vec<_> = ics
        .par_iter()
        .map(|&x0| simulate(&model, x0, 0.0, sc.horizon, tol, sampling))
        .collect::<Result<_, _>>()?;
    let mut files = Vec::new();
    for (k, traj) in trajectories.iter().enumerate() {
        let name = format!("trajectory_{}.csv", k + 1);
        let mut w = out.writer(&name)?;
        traj.write_csv(&mut w)?;
        std::io::Write::flush(&mut w)?;
        files.push(name);
    }
    let script = gnuplot_series("Infectives", &files, &[(4, "I")]);
    std::fs::write(out.file("simulate.gp"), script)?;
    Ok(format!("simulate: wrote {} trajectories to {}", files.len(), out.path().display()))
}

#[derive(Serialize)]
struct AnalysisOutput<'a> {
    incidence: String,
    period: f64,
    averages: Averages,
    population_box: PopulationBox,
    /// Small-amplitude approximation, for constant rates and one annual cosine in `β`.
    r0_approximation: Option<f64>,
    #[serde(flatten)]
    threshold: &'a ThresholdReport,
}

pub fn analyze_cmd(cfg: &RunConfig, out: &OutDir) -> Result<String, CliError> {
    let model = cfg.model()?;
    let report = existence_report(&model, cfg.r0_options()?)?;
    out.report("analysis", &analysis_output(&model, &report))?;
    Ok(format!(
        "analyze: R0 = {:.6} ({:?}), verdict {:?}",
        report.r0.r0, report.r0.classification, report.verdict
    ))
}

fn analysis_output<'a>(model: &SeirsModel, report: &'a ThresholdReport) -> AnalysisOutput<'a> {
    AnalysisOutput {
        incidence: model.incidence.name(),
        period: model.period(),
        averages: model.params.averages(),
        population_box: model.params.population_box(),
        r0_approximation: r0_approximation(model),
        threshold: report,
    }
}

fn r0_approximation(model: &SeirsModel) -> Option<f64> {
    let p = &model.params;
    let fixed = [p.birth(), p.death(), p.progression(), p.recovery()];
    if model.period() != 1.0 || !fixed.iter().all(|c| c.is_constant()) {
        return None;
    }
    let beta = p.transmission();
    let b = match beta.harmonics() {
        [] => 0.0,
        [h] if h.k == 1 && beta.base() > 0.0 => h.amplitude.abs() / beta.base(),
        _ => return None,
    };
    let s_star = p.birth().base() / p.death().base();
    let slope = model.incidence.partials(s_star, s_star, 0.0).di;
    let v = r0_bacaer_approx(beta.base() * slope, p.progression().base(), p.death().base(), p.recovery().base(), b);
    v.is_finite().then_some(v)
}

#[derive(Serialize)]
struct EndemicOutput<'a> {
    #[serde(flatten)]
    analysis: AnalysisOutput<'a>,
    persistence: Option<PersistenceEstimate>,
    persistence_note: Option<String>,
    k_lower: Option<f64>,
    apriori: Option<AprioriBounds>,
    apriori_note: Option<String>,
}

/// Threshold report with the persistence floor and the a priori bounds.
pub fn endemic_cmd(cfg: &RunConfig, out: &OutDir) -> Result<String, CliError> {
    let model = cfg.model()?;
    let tol = cfg.tolerances()?;
    let ec = &cfg.endemic;
    let report = existence_report(&model, cfg.r0_options()?)?;

    let mut ics = states(&ec.initial);
    ics.extend(random_initial_states(&model, ec.runs, cfg.seed));
    let (persistence, persistence_note) = match persistence_estimate(&model, &ics, ec.burn_in, ec.horizon, tol) {
        Ok(p) => (Some(p), None),
        Err(e @ EndemicError::Degenerate { .. }) => (None, Some(e.to_string())),
        Err(e) => return Err(e.into()),
    };
    let k_lower = ec.k_lower.or(persistence.map(|p| p.k_lower));

    let (apriori, apriori_note) = match (report.point, k_lower) {
        (Some(point), Some(k)) => {
            let constants = model.incidence.saturation_constants(&model.params.population_box());
            match apriori_bounds(&model.params, constants, k, &point) {
                Ok(b) => (Some(b), None),
                Err(e) => (None, Some(e.to_string())),
            }
        }
        (None, _) => (None, Some("no endemic algebraic point".into())),
        (_, None) => (None, Some("no positive lower bound on I".into())),
    };

    let summary = format!(
        "endemic: R0 = {:.6}, verdict {:?}, K_lower = {}",
        report.r0.r0,
        report.verdict,
        k_lower.map_or("none".to_string(), |k| format!("{k:.6e}"))
    );
    let output = EndemicOutput {
        analysis: analysis_output(&model, &report),
        persistence,
        persistence_note,
        k_lower,
        apriori,
        apriori_note,
    };
    out.report("endemic", &output)?;
    Ok(summary)
}

#[derive(Serialize)]
struct OrbitOutput<'a> {
    guess: StateVec,
    pre_periods: usize,
    #[serde(flatten)]
    orbit: &'a PeriodicOrbit,
}

/// Orbit samples over one period as CSV, with a JSON sidecar.
pub fn orbit_cmd(cfg: &RunConfig, out: &OutDir) -> Result<String, CliError> {
    let model = cfg.model()?;
    let oc = &cfg.orbit;
    if oc.samples < 2 {
        return Err(CliError::Config(format!("orbit.samples must be at least 2, got {}", oc.samples)));
    }
    let guess: StateVec = oc.guess.into();
    if !guess.to_array().iter().all(|&v| v > 0.0) {
        return Err(CliError::Config(format!("orbit.guess must be componentwise positive, got {:?}", oc.guess)));
    }
    let tol = cfg.orbit_tolerances()?;
    let opts = OrbitOptions { max_newton: oc.max_newton, samples: oc.samples, tol, ..OrbitOptions::default() };
    let start = attractor_guess(&model, guess, oc.pre_periods, tol)?;
    let orbit = find_periodic_orbit(&model, start, &opts)?;

    let mut w = out.writer("orbit.csv")?;
    orbit.samples.write_csv(&mut w)?;
    std::io::Write::flush(&mut w)?;
    out.report("orbit", &OrbitOutput { guess, pre_periods: oc.pre_periods, orbit: &orbit })?;
    let script = gnuplot_series("Periodic orbit", &["orbit.csv".to_string()], &[(2, "S"), (3, "E"), (4, "I"), (5, "R")]);
    std::fs::write(out.file("orbit.gp"), script)?;
    Ok(format!(
        "orbit: {} orbit, residual {:.3e}, leading Floquet modulus {:.6}",
        if orbit.endemic { "endemic" } else { "disease-free" },
        orbit.residual,
        orbit.floquet_moduli[0]
    ))
}

struct Cell {
    beta: f64,
    amplitude: f64,
    outcome: Result<ThresholdReport, CliError>,
}

fn sweep_params(base: &ModelParams, beta: f64, amplitude: f64, phase: f64) -> Result<ModelParams, CliError> {
    let transmission = PeriodicCoefficient::seasonal(beta, amplitude, phase, base.period())
        .map_err(|e| CliError::Config(e.to_string()))?;
    Ok(base.with_transmission(transmission)?)
}

/// One CSV row per `(β, b)` cell in grid order; failures go to the status column.
pub fn sweep_cmd(cfg: &RunConfig, out: &OutDir) -> Result<String, CliError> {
    let grid = cfg.sweep.as_ref().ok_or_else(|| CliError::Config("sweep needs a [sweep] section".into()))?;
    if grid.beta.is_empty() || grid.amplitude.is_empty() {
        return Err(CliError::Config("sweep grid is empty".into()));
    }
    let base = cfg.params()?;
    let incidence = cfg.incidence.build();
    let opts = cfg.r0_options()?;
    let cells: Vec<(f64, f64)> = grid.beta.iter().flat_map(|&b| grid.amplitude.iter().map(move |&a| (b, a))).collect();
    let results: Vec<Cell> = cells
        .par_iter()
        .map(|&(beta, amplitude)| {
            let outcome = sweep_params(&base, beta, amplitude, grid.phase).and_then(|p| {
                let model = SeirsModel::new(p, incidence.clone());
                existence_report(&model, opts).map_err(CliError::from)
            });
            Cell { beta, amplitude, outcome }
        })
        .collect();

    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out.writer("sweep.csv")?);
    w.write_record(["beta", "b", "r0", "rho_fv", "det_m", "verdict", "status"])?;
    let mut failed = 0;
    for cell in &results {
        let (beta, b) = (fmt_f64(cell.beta), fmt_f64(cell.amplitude));
        match &cell.outcome {
            Ok(r) => {
                let det = r.matrix.map_or(String::new(), |m| fmt_f64(m.det));
                let verdict = format!("{:?}", r.verdict);
                w.write_record([beta, b, fmt_f64(r.r0.r0), fmt_f64(r.r0.rho_fv), det, verdict, "ok".into()])?;
            }
            Err(e) => {
                failed += 1;
                eprintln!("sweep cell beta={} b={}: {e}", cell.beta, cell.amplitude);
                w.write_record([beta, b, String::new(), String::new(), String::new(), String::new(), e.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(format!("sweep: {} cells, {failed} failed, written to {}", results.len(), out.file("sweep.csv").display()))
}

#[derive(Serialize)]
struct HypothesesOutput<'a> {
    /// `true` when the model's population box was a single point and was widened.
    widened: bool,
    #[serde(flatten)]
    report: &'a HypothesisReport,
}

pub fn check_hypotheses_cmd(cfg: &RunConfig, out: &OutDir) -> Result<String, CliError> {
    let params = cfg.params()?;
    let incidence = cfg.incidence.build();
    let widen = cfg.hypotheses.widen;
    if !(widen > 0.0 && widen < 1.0) {
        return Err(CliError::Config(format!("hypotheses.widen must lie in (0, 1), got {widen}")));
    }
    let natural = params.population_box();
    let bx = natural.widened(widen);
    let report = check_hypotheses(&incidence, &bx, cfg.hypotheses.density)?;
    out.report("hypotheses", &HypothesesOutput { widened: bx != natural, report: &report })?;
    let passed = report.checks.iter().filter(|c| c.passed).count();
    let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    Ok(if failed.is_empty() {
        format!("check-hypotheses: {}: all {passed} checks passed", report.incidence)
    } else {
        format!("check-hypotheses: {}: {passed}/{} passed, failed {}", report.incidence, report.checks.len(), failed.join(", "))
    })
}
