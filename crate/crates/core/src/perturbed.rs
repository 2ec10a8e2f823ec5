//! Eigenvalues of `y'''' + (U + Ψ_ε) y = λ y` on (a, b) by two-sided shooting.
//!
//! The left family of solutions runs from a through the inner region (integrated
//! in ξ = x/ε) up to x = +ε; the right family runs from b down to +ε. The
//! determinant of the two orthonormalized 4×2 blocks vanishes exactly at
//! eigenvalues.

use log::warn;
use nalgebra::Matrix4;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::odecore::family::{det4, Family};
use crate::odecore::{Curve, Piecewise, Side, StateVector, Tolerance};
use crate::problem::{BoundaryCondition, Problem};
use crate::roots::{scan, ScanOptions};

/// Ratio of singular values below which an eigenvalue counts as double.
pub const MULTIPLICITY_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy)]
pub struct SpectrumOptions {
    pub tol: Tolerance,
    /// Scan step as a fraction of the local eigenvalue gap of the unperturbed beam.
    pub gap_fraction: f64,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        SpectrumOptions {
            tol: Tolerance::shooting(),
            gap_fraction: 0.125,
        }
    }
}

/// A computed eigenvalue with its L₂-normalized eigenfunction.
#[derive(Debug, Clone, Serialize)]
pub struct Eigenpair {
    pub lambda: f64,
    pub multiplicity: usize,
    #[serde(skip)]
    pub y: Piecewise,
    pub l2norm: f64,
    /// Jets (without the fourth derivative) at the break points, from the left and right.
    pub traces: Vec<(f64, StateVector, StateVector)>,
    /// Plug-back residual ‖Ly - λy‖/‖y‖, each region in its own coordinates.
    pub residual: f64,
}

impl Eigenpair {
    /// Relative mismatch of y, y', y'', y''' across the break points.
    pub fn matching_defect(&self) -> f64 {
        self.traces
            .iter()
            .map(|(_, l, r)| {
                let scale = l.iter().chain(r.iter()).fold(1e-300_f64, |a, v| a.max(v.abs()));
                (0..4).map(|i| (l[i] - r[i]).abs()).fold(0.0, f64::max) / scale
            })
            .fold(0.0, f64::max)
    }
}

pub(crate) fn start_states(bc: BoundaryCondition) -> [[f64; 4]; 2] {
    let [i, j] = bc.unconstrained();
    let mut a = [0.0; 4];
    let mut b = [0.0; 4];
    a[i] = 1.0;
    b[j] = 1.0;
    [a, b]
}

/// Scale for the derivative components at the matching point.
pub(crate) fn balance(lambda: f64) -> [f64; 4] {
    let k = lambda.abs().max(1.0).powf(0.25);
    [1.0, 1.0 / k, 1.0 / (k * k), 1.0 / (k * k * k)]
}

struct Shot {
    left: Family,
    right: Family,
    d: f64,
}

fn shoot(p: &Problem, eps: f64, lambda: f64, tol: Tolerance, record: bool) -> Result<Shot> {
    p.check_epsilon(eps)?;
    let outer = |x: f64| p.u(x) - lambda;
    let inner = |xi: f64| p.inner_coefficient(eps, lambda, xi);
    let e2 = eps * eps;
    let mut left = Family::new(start_states(p.bc_left), p.a, 1.0, tol, record);
    left.advance(&outer, -eps)?;
    left.convert([1.0, eps, e2, e2 * eps], -1.0, eps);
    left.advance(&inner, 1.0)?;
    left.convert([1.0, 1.0 / eps, 1.0 / e2, 1.0 / (e2 * eps)], eps, 1.0);
    let mut right = Family::new(start_states(p.bc_right), p.b, 1.0, tol, record);
    right.advance(&outer, eps)?;
    let s = balance(lambda);
    left.convert(s, eps, 1.0);
    right.convert(s, eps, 1.0);
    let d = det4(left.state(), right.state());
    Ok(Shot { left, right, d })
}

/// Shooting determinant; zero exactly at eigenvalues, bounded by 1 in modulus.
pub fn perturbed_determinant(p: &Problem, eps: f64, lambda: f64) -> Result<f64> {
    Ok(shoot(p, eps, lambda, Tolerance::shooting(), false)?.d)
}

pub fn perturbed_determinant_with(p: &Problem, eps: f64, lambda: f64, tol: Tolerance) -> Result<f64> {
    Ok(shoot(p, eps, lambda, tol, false)?.d)
}

fn block_matrix(a: &[[f64; 4]; 2], b: &[[f64; 4]; 2]) -> Matrix4<f64> {
    Matrix4::from_fn(|i, j| if j < 2 { a[j][i] } else { b[j - 2][i] })
}

/// Null vector of [A | B] and the number of (relatively) vanishing singular values.
pub(crate) fn null_vector(m: &Matrix4<f64>) -> ([f64; 4], usize) {
    let svd = m.svd(false, true);
    let sv = svd.singular_values;
    let vt = svd.v_t.expect("requested V^T");
    let (mut kmin, mut smax) = (0, 0.0_f64);
    for k in 0..4 {
        smax = smax.max(sv[k]);
        if sv[k] < sv[kmin] {
            kmin = k;
        }
    }
    let mult = sv.iter().filter(|&&s| s < MULTIPLICITY_TOL * smax).count().max(1);
    (std::array::from_fn(|i| vt[(kmin, i)]), mult)
}

fn jet4(j: &[f64; 5]) -> StateVector {
    [j[0], j[1], j[2], j[3]]
}

/// Builds the eigenfunction at an eigenvalue `lambda` found by a scan.
pub fn eigenpair_at(p: &Problem, eps: f64, lambda: f64, tol: Tolerance) -> Result<Eigenpair> {
    let shot = shoot(p, eps, lambda, tol, true)?;
    let m = block_matrix(shot.left.state(), shot.right.state());
    let (v, multiplicity) = null_vector(&m);
    if multiplicity > 1 {
        warn!("eigenvalue {lambda} at eps {eps} has a numerically two-dimensional kernel");
    }
    let lcurves = shot.left.solution([v[0], v[1]]);
    let rcurves = shot.right.solution([-v[2], -v[3]]);
    let cut = -eps * (1.0 - 1e-12);
    let (outer_l, inner): (Vec<Curve>, Vec<Curve>) = lcurves.into_iter().partition(|c| c.t_max() <= cut);
    let y = Piecewise::new(vec![
        Curve::concat(outer_l),
        Curve::concat(inner),
        Curve::concat(rcurves),
    ]);
    let norm = y.norm();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::Multiplicity(format!(
            "eigenfunction at lambda = {lambda} could not be normalized"
        )));
    }
    // sign: largest sample positive
    let peak = y
        .sample(401)
        .into_iter()
        .fold(0.0_f64, |a, (_, v)| if v.abs() > a.abs() { v } else { a });
    let y = y.scaled(peak.signum() / norm);
    Ok(finish(p, eps, lambda, y, multiplicity))
}

fn finish(p: &Problem, eps: f64, lambda: f64, y: Piecewise, multiplicity: usize) -> Eigenpair {
    let traces = [-eps, eps]
        .iter()
        .map(|&x| (x, jet4(&y.eval_side(x, Side::Left)), jet4(&y.eval_side(x, Side::Right))))
        .collect();
    let e4 = eps.powi(4);
    let mut res2 = 0.0;
    for (k, piece) in y.pieces.iter().enumerate() {
        res2 += if k == 1 {
            piece.integrate(|x, j| (e4 * j[4] + p.inner_coefficient(eps, lambda, x / eps) * j[0]).powi(2))
        } else {
            piece.integrate(|x, j| (j[4] + (p.u(x) - lambda) * j[0]).powi(2))
        };
    }
    let l2norm = y.norm();
    Eigenpair {
        lambda,
        multiplicity,
        residual: res2.sqrt() / l2norm,
        l2norm,
        y,
        traces,
    }
}

/// Scan grid on `[lo, hi]` with steps following the λ^(3/4) gap growth of a beam of length `len`.
pub(crate) fn lambda_grid(lo: f64, hi: f64, len: f64, fraction: f64) -> Vec<f64> {
    let base = (std::f64::consts::PI / len).powi(4);
    let mut grid = vec![lo];
    let mut x = lo;
    while x < hi {
        let scale = x.abs().max(base);
        let gap = 4.0 * std::f64::consts::PI / len * scale.powf(0.75);
        x = (x + fraction * gap).min(hi);
        grid.push(x);
    }
    grid
}

pub(crate) fn scan_options(hi: f64, lo: f64) -> ScanOptions {
    ScanOptions {
        xtol: 1e-14 * hi.abs().max(lo.abs()).max(1.0),
        touch_ratio: 1e-6,
    }
}

/// All eigenvalues of S_ε in `window`, lowest first, at most `max_count`.
pub fn perturbed_spectrum(
    p: &Problem,
    eps: f64,
    window: [f64; 2],
    max_count: usize,
    opts: SpectrumOptions,
) -> Result<Vec<Eigenpair>> {
    p.check_epsilon(eps)?;
    let [lo, hi] = window;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::Domain(format!("invalid window [{lo}, {hi}]")));
    }
    let grid = lambda_grid(lo, hi, p.b - p.a, opts.gap_fraction);
    let f = |l: f64| perturbed_determinant_with(p, eps, l, opts.tol);
    let roots = scan(&f, &grid, scan_options(hi, lo))?;
    let mut pairs = roots
        .par_iter()
        .take(max_count)
        .map(|r| {
            let mut e = eigenpair_at(p, eps, r.x, opts.tol)?;
            e.multiplicity = e.multiplicity.max(r.multiplicity);
            Ok(e)
        })
        .collect::<Result<Vec<_>>>()?;
    pairs.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    Ok(pairs)
}

/// Eigenvalues only (no eigenfunctions), lowest first.
pub fn perturbed_eigenvalues(
    p: &Problem,
    eps: f64,
    window: [f64; 2],
    opts: SpectrumOptions,
) -> Result<Vec<(f64, usize)>> {
    p.check_epsilon(eps)?;
    let [lo, hi] = window;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::Domain(format!("invalid window [{lo}, {hi}]")));
    }
    let grid = lambda_grid(lo, hi, p.b - p.a, opts.gap_fraction);
    let f = |l: f64| perturbed_determinant_with(p, eps, l, opts.tol);
    Ok(scan(&f, &grid, scan_options(hi, lo))?
        .into_iter()
        .map(|r| (r.x, r.multiplicity))
        .collect())
}

/// One row of the divergent-branch probe.
#[derive(Debug, Clone, Serialize)]
pub struct ProbeRow {
    pub eps: f64,
    /// ε⁴λ₁^ε, or `None` when no negative eigenvalue exists.
    pub scaled_lowest: Option<f64>,
    pub lowest: Option<f64>,
    pub negative_count: usize,
}

/// Lower bound for ε⁴·inf(U + Ψ_ε): no eigenvalue lies below it.
pub fn scaled_lower_bound(p: &Problem, eps: f64) -> f64 {
    let n = 4000;
    let mut m = f64::INFINITY;
    for i in 0..=n {
        let xi = -1.0 + 2.0 * i as f64 / n as f64;
        let c = p.alpha * p.psi.eval(xi);
        m = m.min(c);
    }
    let rest = eps * p.beta.abs() * p.phi.sup_norm()
        + eps * eps * p.gamma1.abs() * p.upsilon1.sup_norm()
        + eps.powi(3) * p.gamma2.abs() * p.upsilon2.sup_norm();
    let umin = (0..=n)
        .map(|i| p.u(p.a + (p.b - p.a) * i as f64 / n as f64))
        .fold(f64::INFINITY, f64::min);
    let lb = m.min(0.0) - rest + eps.powi(4) * umin.min(0.0);
    // sampled minima are not exact; widen by 5 %
    1.05 * lb - 1e-9
}

/// Negative eigenvalues of S_ε for each ε: in μ = ε⁴λ the search window
/// `[μ_min, 0)` is O(1), where μ_min comes from [`scaled_lower_bound`].
pub fn divergent_branch_probe(
    p: &Problem,
    eps_seq: &[f64],
    mu_points: usize,
    opts: SpectrumOptions,
) -> Result<Vec<ProbeRow>> {
    eps_seq
        .par_iter()
        .map(|&eps| -> Result<ProbeRow> {
            p.check_epsilon(eps)?;
            let e4 = eps.powi(4);
            let mu_min = scaled_lower_bound(p, eps);
            let mut found: Vec<(f64, usize)> = Vec::new();
            // near λ = 0 the beam gap law is the right scale
            let lam_split = -((std::f64::consts::PI / (p.b - p.a)).powi(4)).max(1e4);
            if mu_min < 0.0 {
                let mu_split = lam_split * e4;
                if mu_min < mu_split {
                    let n = mu_points.max(8);
                    let grid: Vec<f64> = (0..=n)
                        .map(|i| (mu_min + (mu_split - mu_min) * i as f64 / n as f64) / e4)
                        .collect();
                    let f = |l: f64| perturbed_determinant_with(p, eps, l, opts.tol);
                    let roots = scan(&f, &grid, scan_options(grid[0], 0.0))?;
                    found.extend(roots.into_iter().map(|r| (r.x, r.multiplicity)));
                }
                let lo = lam_split.max(mu_min / e4);
                found.extend(
                    perturbed_eigenvalues(p, eps, [lo, 0.0], opts)?
                        .into_iter()
                        .filter(|(l, _)| *l < 0.0),
                );
            }
            found.sort_by(|a, b| a.0.total_cmp(&b.0));
            found.dedup_by(|a, b| (a.0 - b.0).abs() <= 1e-10 * a.0.abs());
            let count = found.iter().map(|f| f.1).sum();
            let lowest = found.first().map(|f| f.0);
            Ok(ProbeRow {
                eps,
                scaled_lowest: lowest.map(|l| l * e4),
                lowest,
                negative_count: count,
            })
        })
        .collect()
}
