use log::info;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, Mode};
use super::output::{csv_artifact, json_artifact, Artifact};
use super::rate::{fit_rate, RateFit};
use crate::asymptotics::{
    assemble_quasimode, correctors_nonresonant, correctors_resonant, quasimode_accuracy, AccuracyRow, CorrectorCase,
    CorrectorChecks, CorrectorSet,
};
use crate::error::{Error, Result};
use crate::limit::{build_interface, limit_spectrum_nonresonant, limit_spectrum_resonant, InterfaceConditions};
use crate::perturbed::{divergent_branch_probe, perturbed_spectrum, Eigenpair, ProbeRow, SpectrumOptions};
use crate::problem::Problem;
use crate::resonance::{normalized_determinant, resonance_at, resonant_set, ResonanceData, ResonanceOptions};

const DEFAULT_SAMPLES: usize = 201;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    /// the mode has no pass/fail criterion
    None,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub mode: Mode,
    pub verdict: Verdict,
    pub summary: String,
    pub artifacts: Vec<Artifact>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        match self.verdict {
            Verdict::Fail => 1,
            _ => 0,
        }
    }
}

/// How α relates to the resonant set of Ψ.
#[derive(Debug, Clone)]
pub enum Dispatch {
    Nonresonant {
        determinant: f64,
    },
    Resonant {
        determinant: f64,
        resonance: ResonanceData,
        interface: InterfaceConditions,
    },
}

impl Dispatch {
    pub fn determinant(&self) -> f64 {
        match self {
            Dispatch::Nonresonant { determinant } | Dispatch::Resonant { determinant, .. } => *determinant,
        }
    }
}

/// Decides the limit regime from the normalized D(α). The interface operator is
/// only built when |D(α)| is within `tol`.
pub fn dispatch(p: &Problem, tol: f64, opts: SpectrumOptions) -> Result<Dispatch> {
    if p.alpha == 0.0 || p.psi.is_zero() {
        return Err(Error::Refused(
            "alpha = 0 (or a zero shape) is the degenerate resonance shared by every shape; no limit operator is defined"
                .into(),
        ));
    }
    let d = normalized_determinant(&p.psi, p.alpha, opts.tol)?;
    if d.abs() > tol {
        return Ok(Dispatch::Nonresonant { determinant: d });
    }
    let r = resonance_at(&p.psi, p.alpha, opts.tol)?;
    let ic = build_interface(&r, p.beta, &p.phi)?;
    Ok(Dispatch::Resonant {
        determinant: d,
        resonance: r,
        interface: ic,
    })
}

fn limit_pairs(p: &Problem, d: &Dispatch, window: [f64; 2], opts: SpectrumOptions) -> Result<Vec<Eigenpair>> {
    match d {
        Dispatch::Nonresonant { .. } => limit_spectrum_nonresonant(p, window, opts.tol),
        Dispatch::Resonant { interface, .. } => limit_spectrum_resonant(p, interface, window, opts.tol),
    }
}

fn correctors_for(p: &Problem, d: &Dispatch, pair: &Eigenpair) -> Result<CorrectorSet> {
    match d {
        Dispatch::Nonresonant { .. } => correctors_nonresonant(p, pair),
        Dispatch::Resonant {
            resonance, interface, ..
        } => correctors_resonant(p, resonance, interface, pair),
    }
}

fn target_pair(cfg: &ExperimentConfig, pairs: Vec<Eigenpair>) -> Result<Eigenpair> {
    let n = pairs.len();
    pairs.into_iter().nth(cfg.target - 1).ok_or_else(|| {
        Error::NotFound(format!(
            "target {} but only {n} limit eigenvalues in window {:?}",
            cfg.target, cfg.window
        ))
    })
}

/// Runs one experiment and returns its artifacts without touching the file system.
pub fn run_experiment(cfg: &ExperimentConfig, mode: Mode) -> Result<Outcome> {
    let p = cfg.validate(mode)?;
    let opts = SpectrumOptions {
        tol: cfg.tolerances.ode(),
        ..SpectrumOptions::default()
    };
    info!("running {} on ({}, {})", mode.name(), p.a, p.b);
    match mode {
        Mode::ResonantSet => run_resonant_set(cfg, &p, opts),
        Mode::Perturbed => run_perturbed(cfg, &p, opts),
        Mode::Limit => run_limit(cfg, &p, opts),
        Mode::Correctors => run_correctors(cfg, &p, opts),
        Mode::Converge => run_converge(cfg, &p, opts),
        Mode::DivergenceProbe => run_divergence(cfg, &p, opts),
    }
}

#[derive(Serialize)]
struct ResonanceRow {
    k: usize,
    alpha: f64,
    theta: Option<f64>,
    multiplicity: usize,
    nondegenerate: bool,
    residual: f64,
}

fn run_resonant_set(cfg: &ExperimentConfig, p: &Problem, opts: SpectrumOptions) -> Result<Outcome> {
    let ro = ResonanceOptions {
        step: cfg.resonance.step,
        tol: opts.tol,
    };
    let set = resonant_set(&p.psi, cfg.resonance.window, cfg.max_count, ro).map_err(|e| e.at_stage("resonant-set"))?;
    let rows: Vec<ResonanceRow> = set
        .iter()
        .enumerate()
        .map(|(i, r)| ResonanceRow {
            k: i + 1,
            alpha: r.alpha,
            theta: r.theta,
            multiplicity: r.multiplicity,
            nondegenerate: r.nondegenerate,
            residual: r.residual,
        })
        .collect();
    Ok(Outcome {
        mode: Mode::ResonantSet,
        verdict: Verdict::None,
        summary: format!("{} resonances in {:?}", rows.len(), cfg.resonance.window),
        artifacts: vec![csv_artifact("resonant_set.csv", &rows)?],
    })
}

#[derive(Serialize)]
struct SpectrumRow {
    eps: f64,
    k: usize,
    lambda: f64,
    multiplicity: usize,
    residual: f64,
    matching_defect: f64,
    y_minus: f64,
    dy_minus: f64,
    y_plus: f64,
    dy_plus: f64,
}

#[derive(Serialize)]
struct SampleRow {
    eps: f64,
    k: usize,
    x: f64,
    y: f64,
}

fn spectrum_rows(eps: f64, pairs: &[Eigenpair]) -> Vec<SpectrumRow> {
    pairs
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let (l, r) = match (e.traces.first(), e.traces.last()) {
                (Some(f), Some(t)) => (f.1, t.2),
                _ => ([f64::NAN; 4], [f64::NAN; 4]),
            };
            SpectrumRow {
                eps,
                k: i + 1,
                lambda: e.lambda,
                multiplicity: e.multiplicity,
                residual: e.residual,
                matching_defect: e.matching_defect(),
                y_minus: l[0],
                dy_minus: l[1],
                y_plus: r[0],
                dy_plus: r[1],
            }
        })
        .collect()
}

fn sample_rows(cfg: &ExperimentConfig, eps: f64, pairs: &[Eigenpair]) -> Vec<SampleRow> {
    let n = cfg.output.samples.unwrap_or(DEFAULT_SAMPLES);
    pairs
        .iter()
        .enumerate()
        .flat_map(|(i, e)| {
            e.y.sample(n)
                .into_iter()
                .map(move |(x, y)| SampleRow { eps, k: i + 1, x, y })
        })
        .collect()
}

fn run_perturbed(cfg: &ExperimentConfig, p: &Problem, opts: SpectrumOptions) -> Result<Outcome> {
    let spectra = cfg
        .eps
        .par_iter()
        .map(|&eps| {
            perturbed_spectrum(p, eps, cfg.window, cfg.max_count, opts)
                .map_err(|e| e.at_stage(format!("perturbed eps={eps}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut samples = Vec::new();
    for (&eps, pairs) in cfg.eps.iter().zip(&spectra) {
        rows.extend(spectrum_rows(eps, pairs));
        if cfg.output.eigenfunctions {
            samples.extend(sample_rows(cfg, eps, pairs));
        }
    }
    let mut artifacts = vec![csv_artifact("perturbed_spectrum.csv", &rows)?];
    if cfg.output.eigenfunctions {
        artifacts.push(csv_artifact("perturbed_eigenfunctions.csv", &samples)?);
    }
    Ok(Outcome {
        mode: Mode::Perturbed,
        verdict: Verdict::None,
        summary: format!("{} eigenvalues over {} values of eps", rows.len(), cfg.eps.len()),
        artifacts,
    })
}

#[derive(Serialize)]
struct LimitRow {
    k: usize,
    lambda: f64,
    multiplicity: usize,
    mode: &'static str,
    theta: Option<f64>,
    kappa: Option<f64>,
    residual: f64,
}

fn run_limit(cfg: &ExperimentConfig, p: &Problem, opts: SpectrumOptions) -> Result<Outcome> {
    let d = dispatch(p, cfg.tolerances.dispatch, opts).map_err(|e| e.at_stage("dispatch"))?;
    let pairs = limit_pairs(p, &d, cfg.window, opts).map_err(|e| e.at_stage("limit"))?;
    let (mode, theta, kappa) = match &d {
        Dispatch::Nonresonant { .. } => ("nonresonant", None, None),
        Dispatch::Resonant { interface, .. } => ("resonant", interface.theta, Some(interface.kappa)),
    };
    let rows: Vec<LimitRow> = pairs
        .iter()
        .take(cfg.max_count)
        .enumerate()
        .map(|(i, e)| LimitRow {
            k: i + 1,
            lambda: e.lambda,
            multiplicity: e.multiplicity,
            mode,
            theta,
            kappa,
            residual: e.residual,
        })
        .collect();
    let mut artifacts = vec![csv_artifact("limit_spectrum.csv", &rows)?];
    if cfg.output.eigenfunctions {
        let n = rows.len();
        artifacts.push(csv_artifact(
            "limit_eigenfunctions.csv",
            &sample_rows(cfg, 0.0, &pairs[..n]),
        )?);
    }
    Ok(Outcome {
        mode: Mode::Limit,
        verdict: Verdict::None,
        summary: format!(
            "{mode} limit, {} eigenvalues, |D(alpha)| = {:.3e}",
            rows.len(),
            d.determinant().abs()
        ),
        artifacts,
    })
}

#[derive(Serialize)]
struct QuasimodeRow {
    eps: f64,
    lambda_eps: f64,
    /// jumps of (Y, Y', Y'', Y''') at -ε and +ε
    jumps: [[f64; 4]; 2],
    residual_outer: f64,
    residual_inner: f64,
}

#[derive(Serialize)]
struct CorrectorReport<'a> {
    mode: &'static str,
    alpha: f64,
    determinant: f64,
    theta: Option<f64>,
    kappa: f64,
    lambda0: f64,
    lambda1: f64,
    lambda2: f64,
    c1: f64,
    c2: f64,
    checks: &'a CorrectorChecks,
    quasimodes: Vec<QuasimodeRow>,
    /// fitted orders of |jump| per side (-ε, +ε) and derivative
    jump_rates: [[Option<RateFit>; 4]; 2],
}

#[derive(Serialize)]
struct CorrectorSample {
    x: f64,
    v: f64,
    v1: f64,
    v2: f64,
}

fn case_name(c: CorrectorCase) -> &'static str {
    match c {
        CorrectorCase::Nonresonant => "nonresonant",
        CorrectorCase::Resonant => "resonant",
    }
}

/// Jump orders of the assembled quasimode over the ε-sequence.
pub fn jump_rates(rows: &[(f64, [[f64; 4]; 2])]) -> [[Option<RateFit>; 4]; 2] {
    std::array::from_fn(|s| {
        std::array::from_fn(|j| {
            let pts: Vec<(f64, f64)> = rows.iter().map(|(e, jm)| (*e, jm[s][j].abs())).collect();
            fit_rate(&pts).ok()
        })
    })
}

fn build_correctors(cfg: &ExperimentConfig, p: &Problem, opts: SpectrumOptions) -> Result<(Dispatch, CorrectorSet)> {
    let d = dispatch(p, cfg.tolerances.dispatch, opts).map_err(|e| e.at_stage("dispatch"))?;
    let pairs = limit_pairs(p, &d, cfg.window, opts).map_err(|e| e.at_stage("limit"))?;
    let pair = target_pair(cfg, pairs).map_err(|e| e.at_stage("limit"))?;
    let cs = correctors_for(p, &d, &pair).map_err(|e| e.at_stage("correctors"))?;
    Ok((d, cs))
}

fn run_correctors(cfg: &ExperimentConfig, p: &Problem, opts: SpectrumOptions) -> Result<Outcome> {
    let (d, cs) = build_correctors(cfg, p, opts)?;
    let quasimodes = cfg
        .eps
        .par_iter()
        .map(|&eps| {
            let q = assemble_quasimode(p, &cs, eps).map_err(|e| e.at_stage(format!("quasimode eps={eps}")))?;
            Ok(QuasimodeRow {
                eps,
                lambda_eps: q.lambda_eps,
                jumps: q.jumps,
                residual_outer: q.residual_outer,
                residual_inner: q.residual_inner,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let jr: Vec<(f64, [[f64; 4]; 2])> = quasimodes.iter().map(|q| (q.eps, q.jumps)).collect();
    let report = CorrectorReport {
        mode: case_name(cs.case),
        alpha: p.alpha,
        determinant: d.determinant(),
        theta: cs.theta,
        kappa: cs.kappa,
        lambda0: cs.lambda0,
        lambda1: cs.lambda1,
        lambda2: cs.lambda2,
        c1: cs.c1,
        c2: cs.c2,
        checks: &cs.checks,
        jump_rates: jump_rates(&jr),
        quasimodes,
    };
    let n = cfg.output.samples.unwrap_or(DEFAULT_SAMPLES).max(2);
    let (lo, hi) = (p.a, p.b);
    let samples: Vec<CorrectorSample> = (0..n)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            CorrectorSample {
                x,
                v: cs.v.value(x),
                v1: cs.v1.value(x),
                v2: cs.v2.value(x),
            }
        })
        .collect();
    Ok(Outcome {
        mode: Mode::Correctors,
        verdict: Verdict::None,
        summary: format!(
            "{} correctors: lambda0 = {}, lambda1 = {}, lambda2 = {}",
            report.mode, cs.lambda0, cs.lambda1, cs.lambda2
        ),
        artifacts: vec![
            json_artifact("correctors.json", &report)?,
            csv_artifact("correctors.csv", &samples)?,
        ],
    })
}

/// Per-ε rows with the fitted rates and the verdict on the λ-rate.
#[derive(Debug, Clone, Serialize)]
pub struct RateReport {
    pub mode: &'static str,
    pub lambda0: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub rows: Vec<AccuracyRow>,
    pub lambda_rate: Option<RateFit>,
    pub first_order_rate: Option<RateFit>,
    pub quasi_rate: Option<RateFit>,
    pub eigenfunction_rate: Option<RateFit>,
    pub slope_band: [Option<f64>; 2],
    pub verdict: Verdict,
}

fn run_converge(cfg: &ExperimentConfig, p: &Problem, opts: SpectrumOptions) -> Result<Outcome> {
    let (_, cs) = build_correctors(cfg, p, opts)?;
    let acc = quasimode_accuracy(p, &cs, &cfg.eps, opts).map_err(|e| e.at_stage("converge"))?;
    let (lo, hi) = (cfg.verdict.slope_min, cfg.verdict.slope_max);
    let verdict = match &acc.lambda_rate {
        Some(f) if f.slope >= lo && hi.is_none_or(|h| f.slope <= h) => Verdict::Pass,
        _ => Verdict::Fail,
    };
    let report = RateReport {
        mode: case_name(cs.case),
        lambda0: acc.lambda0,
        lambda1: acc.lambda1,
        lambda2: acc.lambda2,
        lambda_rate: acc.lambda_rate,
        first_order_rate: acc.first_order_rate,
        quasi_rate: acc.quasi_rate,
        eigenfunction_rate: acc.eigenfunction_rate,
        slope_band: [Some(lo), hi],
        verdict,
        rows: acc.rows,
    };
    let slope = report.lambda_rate.map(|f| f.slope).unwrap_or(f64::NAN);
    Ok(Outcome {
        mode: Mode::Converge,
        verdict,
        summary: format!(
            "{} convergence to lambda0 = {}: slope {slope:.3}",
            report.mode, report.lambda0
        ),
        artifacts: vec![
            json_artifact("converge.json", &report)?,
            csv_artifact("converge.csv", &report.rows)?,
        ],
    })
}

#[derive(Serialize)]
struct ProbeReport<'a> {
    rows: &'a [ProbeRow],
    /// ε⁴λ₁^ε at the two smallest ε and their relative difference
    scaled_pair: Option<[f64; 2]>,
    relative_drift: Option<f64>,
    count_constant: bool,
    verdict: Verdict,
}

/// Divergent branch verdict: a negative eigenvalue at every ε, ε⁴λ₁^ε bounded
/// away from 0 and stable between the two smallest ε, negative count constant.
pub fn divergence_verdict(rows: &[ProbeRow], drift: f64) -> (Verdict, Option<[f64; 2]>, Option<f64>, bool) {
    let count_constant = rows.windows(2).all(|w| w[0].negative_count == w[1].negative_count);
    let all_negative = !rows.is_empty() && rows.iter().all(|r| r.scaled_lowest.is_some_and(|s| s < 0.0));
    let mut by_eps: Vec<&ProbeRow> = rows.iter().collect();
    by_eps.sort_by(|a, b| a.eps.total_cmp(&b.eps));
    let pair = match (
        by_eps.first().and_then(|r| r.scaled_lowest),
        by_eps.get(1).and_then(|r| r.scaled_lowest),
    ) {
        (Some(a), Some(b)) => Some([a, b]),
        _ => None,
    };
    let rel = pair.map(|[a, b]| (a - b).abs() / a.abs().max(b.abs()));
    let pass = all_negative && count_constant && rel.is_some_and(|r| r <= drift);
    (
        if pass { Verdict::Pass } else { Verdict::Fail },
        pair,
        rel,
        count_constant,
    )
}

fn run_divergence(cfg: &ExperimentConfig, p: &Problem, opts: SpectrumOptions) -> Result<Outcome> {
    let rows = divergent_branch_probe(p, &cfg.eps, cfg.mu_points, opts).map_err(|e| e.at_stage("divergence-probe"))?;
    let (verdict, scaled_pair, relative_drift, count_constant) = divergence_verdict(&rows, cfg.verdict.scaled_drift);
    let report = ProbeReport {
        rows: &rows,
        scaled_pair,
        relative_drift,
        count_constant,
        verdict,
    };
    Ok(Outcome {
        mode: Mode::DivergenceProbe,
        verdict,
        summary: format!(
            "negative counts {:?}, eps^4 lambda_1 at the two smallest eps {}, relative drift {}",
            rows.iter().map(|r| r.negative_count).collect::<Vec<_>>(),
            scaled_pair.map_or("n/a".into(), |[a, b]| format!("{a:.4} / {b:.4}")),
            relative_drift.map_or("n/a".into(), |d| format!("{d:.1e}"))
        ),
        artifacts: vec![
            json_artifact("divergence.json", &report)?,
            csv_artifact("divergence.csv", &rows)?,
        ],
    })
}
