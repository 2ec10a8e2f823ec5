//! Spectrum of the limit operator: decoupled clamped halves when α is not
//! resonant, or the interface problem at x = 0 when it is.

use nalgebra::Matrix4;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::odecore::family::Family;
use crate::odecore::{Curve, Piecewise, Side, StateVector, Tolerance};
use crate::perturbed::{balance, lambda_grid, null_vector, scan_options, start_states, Eigenpair};
use crate::problem::Problem;
use crate::resonance::{functional_quadratic_phi, ResonanceData};
use crate::roots::scan;
use crate::shapes::ShapeFunction;

/// Eigenvalues closer than this (relative) are treated as one double eigenvalue.
const COINCIDENCE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InterfaceMode {
    Nonresonant,
    Resonant,
}

/// Conditions at x = 0. In resonant mode:
/// f(0) = 0, f'(+0) = θ f'(-0), θ f''(+0) - f''(-0) = κ f'(-0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InterfaceConditions {
    pub theta: Option<f64>,
    pub kappa: f64,
    pub mode: InterfaceMode,
}

impl InterfaceConditions {
    pub fn nonresonant() -> Self {
        InterfaceConditions {
            theta: None,
            kappa: 0.0,
            mode: InterfaceMode::Nonresonant,
        }
    }

    pub fn resonant(theta: f64, kappa: f64) -> Result<Self> {
        if !(theta.is_finite() && theta != 0.0 && kappa.is_finite()) {
            return Err(Error::Domain(format!(
                "invalid interface: theta = {theta}, kappa = {kappa}"
            )));
        }
        Ok(InterfaceConditions {
            theta: Some(theta),
            kappa,
            mode: InterfaceMode::Resonant,
        })
    }

    /// Residuals of the three interface conditions for traces at 0∓.
    pub fn defects(&self, left: &StateVector, right: &StateVector) -> Vec<f64> {
        match self.theta {
            None => vec![left[0], left[1], right[0], right[1]],
            Some(t) => vec![
                left[0],
                right[0],
                right[1] - t * left[1],
                t * right[2] - left[2] - self.kappa * left[1],
            ],
        }
    }
}

/// κ = β ∫Φ (w_α / w_α'(-1))² from a nondegenerate resonance.
pub fn build_interface(r: &ResonanceData, beta: f64, phi: &ShapeFunction) -> Result<InterfaceConditions> {
    if !r.nondegenerate {
        return Err(Error::Refused(format!(
            "the limit operator is not defined at the degenerate resonance alpha = {}",
            r.alpha
        )));
    }
    let w = r
        .w_alpha
        .as_ref()
        .ok_or_else(|| Error::NotApplicable("resonance data carries no eigenfunction".into()))?;
    let slope = w.first()[1];
    let kappa = if beta == 0.0 {
        0.0
    } else {
        beta * functional_quadratic_phi(phi, &w.scaled(1.0 / slope)).value
    };
    let theta = r.theta.ok_or_else(|| Error::NotApplicable("theta undefined".into()))?;
    InterfaceConditions::resonant(theta, kappa)
}

struct HalfShot {
    left: Family,
    right: Family,
}

fn shoot_halves(p: &Problem, lambda: f64, tol: Tolerance, record: bool) -> Result<HalfShot> {
    let outer = |x: f64| p.u(x) - lambda;
    let mut left = Family::new(start_states(p.bc_left), p.a, 1.0, tol, record);
    left.advance(&outer, 0.0)?;
    let mut right = Family::new(start_states(p.bc_right), p.b, 1.0, tol, record);
    right.advance(&outer, 0.0)?;
    let s = balance(lambda);
    left.convert(s, 0.0, 1.0);
    right.convert(s, 0.0, 1.0);
    Ok(HalfShot { left, right })
}

fn clamped_det(q: &[[f64; 4]; 2]) -> f64 {
    q[0][0] * q[1][1] - q[1][0] * q[0][1]
}

/// Determinant of the clamped problem on (a, 0) (`Side::Left`) or (0, b).
pub fn half_determinant(p: &Problem, lambda: f64, side: Side, tol: Tolerance) -> Result<f64> {
    let s = shoot_halves(p, lambda, tol, false)?;
    Ok(match side {
        Side::Left => clamped_det(s.left.state()),
        Side::Right => clamped_det(s.right.state()),
    })
}

fn interface_matrix(ic: &InterfaceConditions, lambda: f64, l: &[[f64; 4]; 2], r: &[[f64; 4]; 2]) -> Matrix4<f64> {
    // states are balanced: component j carries a factor k^-j
    let k = lambda.abs().max(1.0).powf(0.25);
    let theta = ic.theta.unwrap_or(1.0);
    let mut m = Matrix4::zeros();
    for c in 0..2 {
        let (u, w) = (l[c], r[c]);
        m[(0, c)] = u[0];
        m[(2, c)] = -theta * u[1];
        m[(3, c)] = -u[2] - ic.kappa / k * u[1];
        m[(1, c + 2)] = w[0];
        m[(2, c + 2)] = w[1];
        m[(3, c + 2)] = theta * w[2];
    }
    m
}

/// Determinant of the resonant interface problem; zero exactly at its eigenvalues.
pub fn interface_determinant(p: &Problem, ic: &InterfaceConditions, lambda: f64, tol: Tolerance) -> Result<f64> {
    let s = shoot_halves(p, lambda, tol, false)?;
    Ok(interface_matrix(ic, lambda, s.left.state(), s.right.state()).determinant())
}

fn zero_curve(t0: f64, t1: f64) -> Curve {
    Curve::new(vec![t0, t1], vec![[0.0; 5]; 2])
}

fn assemble(p: &Problem, lambda: f64, left: Vec<Curve>, right: Vec<Curve>, multiplicity: usize) -> Result<Eigenpair> {
    let lc = if left.is_empty() {
        zero_curve(p.a, 0.0)
    } else {
        Curve::concat(left)
    };
    let rc = if right.is_empty() {
        zero_curve(0.0, p.b)
    } else {
        Curve::concat(right)
    };
    let y = Piecewise::new(vec![lc, rc]);
    let norm = y.norm();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::Multiplicity(format!(
            "limit eigenfunction at lambda = {lambda} could not be normalized"
        )));
    }
    let peak = y
        .sample(401)
        .into_iter()
        .fold(0.0_f64, |a, (_, v)| if v.abs() > a.abs() { v } else { a });
    let y = y.scaled(peak.signum() / norm);
    let mut res2 = 0.0;
    for piece in &y.pieces {
        res2 += piece.integrate(|x, j| (j[4] + (p.u(x) - lambda) * j[0]).powi(2));
    }
    let jet4 = |j: [f64; 5]| [j[0], j[1], j[2], j[3]];
    let traces = vec![(
        0.0,
        jet4(y.eval_side(0.0, Side::Left)),
        jet4(y.eval_side(0.0, Side::Right)),
    )];
    let l2norm = y.norm();
    Ok(Eigenpair {
        lambda,
        multiplicity,
        residual: res2.sqrt() / l2norm,
        l2norm,
        y,
        traces,
    })
}

fn half_pair(p: &Problem, lambda: f64, side: Side, multiplicity: usize, tol: Tolerance) -> Result<Eigenpair> {
    let s = shoot_halves(p, lambda, tol, true)?;
    let fam = match side {
        Side::Left => &s.left,
        Side::Right => &s.right,
    };
    let q = fam.state();
    // null vector of the 2×2 block [u(0); u'(0)]
    let (a, b) = if q[0][0].hypot(q[1][0]) >= q[0][1].hypot(q[1][1]) {
        (q[1][0], -q[0][0])
    } else {
        (q[1][1], -q[0][1])
    };
    let curves = fam.solution([a, b]);
    match side {
        Side::Left => assemble(p, lambda, curves, vec![], multiplicity),
        Side::Right => assemble(p, lambda, vec![], curves, multiplicity),
    }
}

/// Spectrum of S₋ ⊕ S₊: the clamped problems on (a, 0) and (0, b).
/// A coincident eigenvalue is reported once per half, each with multiplicity 2.
pub fn limit_spectrum_nonresonant(p: &Problem, window: [f64; 2], tol: Tolerance) -> Result<Vec<Eigenpair>> {
    let [lo, hi] = check_window(window)?;
    let mut roots: Vec<(f64, Side)> = Vec::new();
    for (side, len) in [(Side::Left, -p.a), (Side::Right, p.b)] {
        let grid = lambda_grid(lo, hi, len, 0.125);
        let f = |l: f64| half_determinant(p, l, side, tol);
        roots.extend(scan(&f, &grid, scan_options(hi, lo))?.into_iter().map(|r| (r.x, side)));
    }
    roots.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mult: Vec<usize> = roots
        .iter()
        .map(|&(x, s)| {
            let twin = roots
                .iter()
                .any(|&(y, t)| t != s && (x - y).abs() <= COINCIDENCE_TOL * x.abs().max(1.0));
            if twin {
                2
            } else {
                1
            }
        })
        .collect();
    roots
        .par_iter()
        .zip(mult.par_iter())
        .map(|(&(x, side), &m)| half_pair(p, x, side, m, tol))
        .collect()
}

/// Spectrum of the interface operator in `window`.
pub fn limit_spectrum_resonant(
    p: &Problem,
    ic: &InterfaceConditions,
    window: [f64; 2],
    tol: Tolerance,
) -> Result<Vec<Eigenpair>> {
    if ic.mode != InterfaceMode::Resonant {
        return Err(Error::Domain("interface conditions are not resonant".into()));
    }
    let [lo, hi] = check_window(window)?;
    let grid = lambda_grid(lo, hi, p.b - p.a, 0.125);
    let f = |l: f64| interface_determinant(p, ic, l, tol);
    let roots = scan(&f, &grid, scan_options(hi, lo))?;
    roots
        .par_iter()
        .map(|r| {
            let s = shoot_halves(p, r.x, tol, true)?;
            let m = interface_matrix(ic, r.x, s.left.state(), s.right.state());
            let (v, mult) = null_vector(&m);
            let left = s.left.solution([v[0], v[1]]);
            let right = s.right.solution([v[2], v[3]]);
            assemble(p, r.x, left, right, mult.max(r.multiplicity))
        })
        .collect()
}

/// Dispatches on the interface mode.
pub fn limit_spectrum(
    p: &Problem,
    ic: &InterfaceConditions,
    window: [f64; 2],
    tol: Tolerance,
) -> Result<Vec<Eigenpair>> {
    match ic.mode {
        InterfaceMode::Nonresonant => limit_spectrum_nonresonant(p, window, tol),
        InterfaceMode::Resonant => limit_spectrum_resonant(p, ic, window, tol),
    }
}

fn check_window(window: [f64; 2]) -> Result<[f64; 2]> {
    let [lo, hi] = window;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::Domain(format!("invalid window [{lo}, {hi}]")));
    }
    Ok(window)
}
