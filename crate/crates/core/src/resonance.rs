//! Resonant set of a shape: real α for which `w'''' + αΨw = 0` on (-1, 1)
//! has a nontrivial solution with free ends (w'' = w''' = 0 at ±1).

use log::warn;
use nalgebra::{Matrix2, Matrix4x2};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::odecore::engine::{run, Options, Run};
use crate::odecore::{Curve, StateVector, Tolerance};
use crate::roots::{scan, ScanOptions};
use crate::shapes::ShapeFunction;

/// Relative size of |w'(±1)| against max |w'| below which a resonance is degenerate.
pub const NONDEGENERACY_TOL: f64 = 1e-6;
/// Endpoint-matrix size (relative) below which a root has a two-dimensional kernel.
pub const MULTIPLICITY_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy)]
pub struct ResonanceOptions {
    /// Scan step in s = sign(α)|α|^(1/4); resonances are roughly equidistant in s.
    pub step: f64,
    pub tol: Tolerance,
}

impl Default for ResonanceOptions {
    fn default() -> Self {
        ResonanceOptions {
            step: 0.05,
            tol: Tolerance::shooting(),
        }
    }
}

/// One point of the resonant set.
#[derive(Debug, Clone, Serialize)]
pub struct ResonanceData {
    pub alpha: f64,
    /// Eigenfunction normalized by w'(-1) = 1; absent when that is impossible
    /// or the kernel is two-dimensional.
    #[serde(skip)]
    pub w_alpha: Option<Curve>,
    /// θ_Ψ(α) = w'(1)/w'(-1), present for nondegenerate resonances.
    pub theta: Option<f64>,
    pub multiplicity: usize,
    pub nondegenerate: bool,
    /// Traces of the (normalized when possible) eigenfunction at ξ = -1 and ξ = 1.
    pub left: StateVector,
    pub right: StateVector,
    /// |D(α)| / (|g₁(1)| |g₂(1)|) at the reported α.
    pub residual: f64,
}

fn to_alpha(s: f64) -> f64 {
    s.signum() * s.powi(4)
}

fn to_s(alpha: f64) -> f64 {
    alpha.signum() * alpha.abs().powf(0.25)
}

/// The Cauchy pair g₁, g₂: g_k(-1) = δ₁ₖ, g_k'(-1) = δ₂ₖ, g_k''(-1) = g_k'''(-1) = 0.
pub(crate) fn cauchy_pair(psi: &ShapeFunction, alpha: f64, tol: Tolerance, record: bool) -> Result<Run<2>> {
    let opts = Options {
        tol,
        record,
        growth_limit: None,
    };
    run(
        &|xi| alpha * psi.eval(xi),
        &|_| 0.0,
        -1.0,
        1.0,
        [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]],
        &opts,
    )
}

fn endpoint_matrix(r: &Run<2>) -> Matrix2<f64> {
    let y = r.last();
    Matrix2::new(y[0][2], y[1][2], y[0][3], y[1][3])
}

/// D(α) = det [[g₁''(1), g₂''(1)], [g₁'''(1), g₂'''(1)]].
pub fn resonance_determinant(psi: &ShapeFunction, alpha: f64) -> Result<f64> {
    if !alpha.is_finite() {
        return Err(Error::Domain("alpha must be finite".into()));
    }
    let r = cauchy_pair(psi, alpha, Tolerance::shooting(), false)?;
    Ok(endpoint_matrix(&r).determinant())
}

/// D(α) divided by the norms of the end states of g₁ and g₂; same zeros, bounded by 1.
pub fn normalized_determinant(psi: &ShapeFunction, alpha: f64, tol: Tolerance) -> Result<f64> {
    let r = cauchy_pair(psi, alpha, tol, false)?;
    let y = r.last();
    let n1 = y[0].iter().map(|v| v * v).sum::<f64>().sqrt();
    let n2 = y[1].iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(endpoint_matrix(&r).determinant() / (n1 * n2))
}

/// Builds the resonance record at a root α of D.
pub fn resonance_at(psi: &ShapeFunction, alpha: f64, tol: Tolerance) -> Result<ResonanceData> {
    let r = cauchy_pair(psi, alpha, tol, true)?;
    let y = r.last();
    let m = endpoint_matrix(&r);
    let full = Matrix4x2::from_fn(|i, k| y[k][i]);
    let full_norm = full.singular_values().max();
    let residual = m.determinant() / (full.column(0).norm() * full.column(1).norm());
    let sv = m.singular_values();
    let multiplicity = if sv.max() < MULTIPLICITY_TOL * full_norm { 2 } else { 1 };
    if multiplicity == 2 {
        return Ok(ResonanceData {
            alpha,
            w_alpha: None,
            theta: None,
            multiplicity,
            nondegenerate: false,
            left: [0.0; 4],
            right: [0.0; 4],
            residual: residual.abs(),
        });
    }
    // null vector of the 2×2 endpoint matrix
    let svd = m.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let k = if svd.singular_values[0] < svd.singular_values[1] {
        0
    } else {
        1
    };
    let c = [vt[(k, 0)], vt[(k, 1)]];
    let w = Curve::from_run(&r, &c);
    let max_slope = w.jets().iter().fold(0.0_f64, |a, j| a.max(j[1].abs()));
    let (l, rt) = (w.first(), w.last());
    let nondegenerate = l[1].abs() > NONDEGENERACY_TOL * max_slope && rt[1].abs() > NONDEGENERACY_TOL * max_slope;
    let (w_alpha, theta, left, right) = if l[1].abs() > NONDEGENERACY_TOL * max_slope {
        let wn = w.scaled(1.0 / l[1]);
        let (a, b) = (wn.first(), wn.last());
        let theta = nondegenerate.then_some(b[1]);
        (Some(wn), theta, [a[0], a[1], a[2], a[3]], [b[0], b[1], b[2], b[3]])
    } else {
        (None, None, [l[0], l[1], l[2], l[3]], [rt[0], rt[1], rt[2], rt[3]])
    };
    Ok(ResonanceData {
        alpha,
        w_alpha,
        theta,
        multiplicity,
        nondegenerate,
        left,
        right,
        residual: residual.abs(),
    })
}

fn scan_once(psi: &ShapeFunction, s_lo: f64, s_hi: f64, step: f64, tol: Tolerance) -> Result<Vec<f64>> {
    // keep clear of the flat double zero at α = 0
    const S_GAP: f64 = 0.25;
    let mut segments = Vec::new();
    if s_lo < -S_GAP {
        segments.push((s_lo, s_hi.min(-S_GAP)));
    }
    if s_hi > S_GAP {
        segments.push((s_lo.max(S_GAP), s_hi));
    }
    let f = |s: f64| normalized_determinant(psi, to_alpha(s), tol);
    let mut out = Vec::new();
    for (lo, hi) in segments {
        if hi <= lo {
            continue;
        }
        let n = ((hi - lo) / step).ceil().max(1.0) as usize;
        let grid: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
        let roots = scan(
            &f,
            &grid,
            ScanOptions {
                xtol: 1e-15 * hi.abs().max(lo.abs()),
                touch_ratio: 1e-9,
            },
        )?;
        out.extend(roots.into_iter().map(|r| r.x));
    }
    Ok(out)
}

/// All points of the resonant set in `[alpha_lo, alpha_hi]`, ordered by |α| then α,
/// at most `max_count` of them. α = 0 is always included when in the window.
pub fn resonant_set(
    psi: &ShapeFunction,
    window: [f64; 2],
    max_count: usize,
    opts: ResonanceOptions,
) -> Result<Vec<ResonanceData>> {
    let [lo, hi] = window;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::Domain(format!("invalid window [{lo}, {hi}]")));
    }
    if psi.is_zero() {
        return Err(Error::InvalidShape("zero shape has no resonant set".into()));
    }
    let (s_lo, s_hi) = (to_s(lo), to_s(hi));
    let coarse = scan_once(psi, s_lo, s_hi, opts.step, opts.tol)?;
    let fine = scan_once(psi, s_lo, s_hi, 0.5 * opts.step, opts.tol)?;
    let roots = if fine.len() != coarse.len() {
        warn!(
            "resonance scan step {} found {} roots, half step found {}; using the finer scan",
            opts.step,
            coarse.len(),
            fine.len()
        );
        fine
    } else {
        coarse
    };
    let mut alphas: Vec<f64> = roots.into_iter().map(to_alpha).collect();
    if lo <= 0.0 && 0.0 <= hi {
        alphas.push(0.0);
    }
    // ±α pairs of odd shapes agree in |α| only to rounding; order them by sign
    alphas.sort_by(|a, b| {
        if (a.abs() - b.abs()).abs() <= 1e-9 * a.abs().max(b.abs()) {
            a.total_cmp(b)
        } else {
            a.abs().total_cmp(&b.abs())
        }
    });
    alphas.truncate(max_count);
    alphas
        .iter()
        .map(|&a| {
            if a == 0.0 {
                Ok(ResonanceData {
                    alpha: 0.0,
                    w_alpha: None,
                    theta: None,
                    multiplicity: 2,
                    nondegenerate: false,
                    left: [0.0; 4],
                    right: [0.0; 4],
                    residual: 0.0,
                })
            } else {
                resonance_at(psi, a, opts.tol)
            }
        })
        .collect()
}

/// θ_Ψ(α), defined for nondegenerate resonances only.
pub fn theta(r: &ResonanceData) -> Result<f64> {
    match (r.nondegenerate, r.theta) {
        (true, Some(t)) => Ok(t),
        _ => Err(Error::NotApplicable(format!(
            "resonance at alpha = {} is degenerate",
            r.alpha
        ))),
    }
}

/// Which shape functional a value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FunctionalKind {
    QuadraticPhi,
    LinearUpsilon1,
    LinearUpsilon2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShapeFunctional {
    pub kind: FunctionalKind,
    pub value: f64,
}

/// ∫ Φ f² dξ over the range of `f`.
pub fn functional_quadratic_phi(phi: &ShapeFunction, f: &Curve) -> ShapeFunctional {
    ShapeFunctional {
        kind: FunctionalKind::QuadraticPhi,
        value: f.integrate(|x, j| phi.eval(x) * j[0] * j[0]),
    }
}

/// ∫ Υ f dξ over the range of `f`; `second` selects the Υ₂ label.
pub fn functional_linear_upsilon(upsilon: &ShapeFunction, f: &Curve, second: bool) -> ShapeFunctional {
    ShapeFunctional {
        kind: if second {
            FunctionalKind::LinearUpsilon2
        } else {
            FunctionalKind::LinearUpsilon1
        },
        value: f.integrate(|x, j| upsilon.eval(x) * j[0]),
    }
}
