//! Correctors of the two-scale expansion
//!
//! λ^ε ~ λ + ελ₁ + ε²λ₂, y_ε ~ v + εv₁ + ε²v₂ outside (-ε, ε) and
//! εw + ε²w₁ + ε³w₂ + ε⁴w₃ (in ξ = x/ε) inside,
//!
//! and the quasimode assembled from them.
//!
//! Every order is solved the same way. The inner corrector w_n comes from a
//! free-end problem on (-1, 1) whose end data are Taylor traces of the outer
//! terms. The outer corrector v_n solves the shifted equation on both halves,
//! with four interface rows at x = 0 and the gauge ⟨v, v_n⟩ = 0; λ_n is the
//! fifth unknown of that square system.

use log::warn;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::{fit_rate, RateFit};
use crate::limit::InterfaceConditions;
use crate::odecore::{particular_solution, Curve, Jet, Piecewise, Side, StateVector, Tolerance};
use crate::perturbed::{perturbed_spectrum, start_states, Eigenpair, SpectrumOptions};
use crate::problem::Problem;
use crate::resonance::{cauchy_pair, normalized_determinant, ResonanceData};

/// Relative size of a Fredholm obstruction that still counts as zero.
pub const OBSTRUCTION_TOL: f64 = 1e-6;
/// |D(α)| (normalized) below which a nonresonant construction is ill-conditioned.
const NEAR_RESONANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrectorCase {
    Nonresonant,
    Resonant,
}

/// Diagnostics collected while building the correctors.
#[derive(Debug, Clone, Default, Serialize)]
pub struct CorrectorChecks {
    /// Relative Fredholm obstruction of each inner problem (resonant case).
    pub obstructions: Vec<f64>,
    /// λ₁, λ₂ recomputed from the Lagrange concomitant of v with v₁, v₂.
    pub lambda_projection: [f64; 2],
    /// λ₁, λ₂ from the closed forms as printed (literal reading).
    pub lambda_printed: [f64; 2],
    /// ⟨v, v₁⟩ and ⟨v, v₂⟩.
    pub gauge: [f64; 2],
    /// Relative plug-back residuals of v₁, v₂ and w₁, w₂, w₃.
    pub residual_v: [f64; 2],
    pub residual_w: [f64; 3],
    /// v₁'(+0) + v''(+0) - w₁'(1).
    pub slope_matching: f64,
}

/// The corrector hierarchy for one simple limit eigenvalue.
#[derive(Debug, Clone, Serialize)]
pub struct CorrectorSet {
    pub case: CorrectorCase,
    pub lambda0: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    #[serde(skip)]
    pub v: Piecewise,
    #[serde(skip)]
    pub v1: Piecewise,
    #[serde(skip)]
    pub v2: Piecewise,
    #[serde(skip)]
    pub w: Curve,
    #[serde(skip)]
    pub w1: Curve,
    #[serde(skip)]
    pub w2: Curve,
    #[serde(skip)]
    pub w3: Curve,
    pub c1: f64,
    pub c2: f64,
    pub theta: Option<f64>,
    pub kappa: f64,
    pub checks: CorrectorChecks,
}

impl CorrectorSet {
    pub fn lambda_eps(&self, eps: f64) -> f64 {
        self.lambda0 + eps * self.lambda1 + eps * eps * self.lambda2
    }

    fn reflected(self) -> Self {
        let r = |p: &Piecewise| Piecewise::new(p.pieces.iter().map(Curve::reflected).collect());
        CorrectorSet {
            v: r(&self.v),
            v1: r(&self.v1),
            v2: r(&self.v2),
            w: self.w.reflected(),
            w1: self.w1.reflected(),
            w2: self.w2.reflected(),
            w3: self.w3.reflected(),
            ..self
        }
    }
}

/// Fredholm obstruction of `w'''' + αΨw = F`, `w''(∓1) = d2`, `w'''(∓1) = d3`
/// against the resonant eigenfunction: ∫F w_α minus the boundary terms of the
/// integration by parts. The problem is solvable iff this vanishes.
pub fn solvability_project<F: Fn(f64) -> f64>(forcing: F, w_alpha: &Curve, d2: [f64; 2], d3: [f64; 2]) -> f64 {
    obstruction(&forcing, w_alpha, d2, d3).0
}

/// (obstruction, size of the largest term)
fn obstruction(forcing: &dyn Fn(f64) -> f64, w_alpha: &Curve, d2: [f64; 2], d3: [f64; 2]) -> (f64, f64) {
    let (l, r) = (w_alpha.first(), w_alpha.last());
    let bulk = w_alpha.integrate(|x, j| forcing(x) * j[0]);
    let bulk_abs = w_alpha.integrate(|x, j| (forcing(x) * j[0]).abs());
    let terms = [d3[1] * r[0], d2[1] * r[1], d3[0] * l[0], d2[0] * l[1]];
    let o = bulk - (terms[0] - terms[1]) + (terms[2] - terms[3]);
    let scale = terms.iter().fold(bulk_abs, |a, t| a.max(t.abs()));
    (o, scale)
}

/// One linear condition Σ left·v_n(-0) + right·v_n(+0) = rhs on the traces at 0.
#[derive(Debug, Clone, Copy)]
struct Row {
    left: StateVector,
    right: StateVector,
    rhs: f64,
}

fn dot(a: &StateVector, j: &Jet) -> f64 {
    (0..4).map(|i| a[i] * j[i]).sum()
}

fn unit(i: usize, s: f64) -> StateVector {
    let mut e = [0.0; 4];
    e[i] = s;
    e
}

fn factorial(m: usize) -> f64 {
    (1..=m).map(|k| k as f64).product()
}

struct Resonant {
    w_alpha: Curve,
    theta: f64,
    kappa: f64,
}

struct Ctx<'a> {
    p: &'a Problem,
    lambda: f64,
    tol: Tolerance,
    /// end state at ξ = 1 of the Cauchy pair g₁, g₂
    g_end: [[f64; 4]; 2],
    res: Option<Resonant>,
}

/// One-sided trace at 0 of a two-piece outer function.
fn trace(v: &Piecewise, side: Side) -> Jet {
    v.eval_side(0.0, side)
}

impl Ctx<'_> {
    /// Σ_{m ≥ m0} (±1)^m/m! v_{n-m}^{(j+m)}(±0), the Taylor sum behind the
    /// matching conditions; m0 = 0 includes v_n itself.
    fn taylor(&self, vs: &[Piecewise], n: isize, j: usize, side: Side, m0: usize) -> f64 {
        let sgn: f64 = if side == Side::Left { -1.0 } else { 1.0 };
        let mut s = 0.0;
        for m in m0..=(n.max(-1) + 1) as usize {
            let k = n - m as isize;
            if k < 0 || k as usize >= vs.len() {
                continue;
            }
            debug_assert!(j + m <= 4);
            s += sgn.powi(m as i32) / factorial(m) * trace(&vs[k as usize], side)[j + m];
        }
        s
    }

    fn inner_coeff(&self) -> impl Fn(f64) -> f64 + '_ {
        move |xi| self.p.alpha * self.p.psi.eval(xi)
    }

    /// -βΦw_{n-1} - γ₁Υ₁w_{n-2} - γ₂Υ₂w_{n-3}
    fn inner_forcing(&self, ws: &[Curve], n: usize) -> impl Fn(f64) -> f64 + '_ {
        let own: Vec<Option<Curve>> = (1..=3).map(|d| n.checked_sub(d).map(|k| ws[k].clone())).collect();
        move |xi: f64| {
            let p = self.p;
            let w = |k: isize| own[(n as isize - k - 1) as usize].as_ref().map_or(0.0, |c| c.value(xi));
            let n = n as isize;
            -p.beta * p.phi.eval(xi) * w(n - 1)
                - p.gamma1 * p.upsilon1.eval(xi) * w(n - 2)
                - p.gamma2 * p.upsilon2.eval(xi) * w(n - 3)
        }
    }

    /// Solves the inner problem with free-end data. In the resonant case the
    /// solution with w'(-1) = 0 is returned with its relative obstruction.
    fn solve_inner(&self, forcing: &dyn Fn(f64) -> f64, d2: [f64; 2], d3: [f64; 2]) -> Result<(Curve, f64)> {
        let coeff = self.inner_coeff();
        let p0 = particular_solution(&coeff, forcing, -1.0, 1.0, [0.0, 0.0, d2[0], d3[0]], self.tol)?;
        let r = [d2[1] - p0.end[2], d3[1] - p0.end[3]];
        let g = &self.g_end;
        let (s0, s1, rel) = match &self.res {
            None => {
                let det = g[0][2] * g[1][3] - g[1][2] * g[0][3];
                let s0 = (r[0] * g[1][3] - g[1][2] * r[1]) / det;
                let s1 = (g[0][2] * r[1] - r[0] * g[0][3]) / det;
                (s0, s1, 0.0)
            }
            Some(res) => {
                let n2 = g[0][2] * g[0][2] + g[0][3] * g[0][3];
                let s0 = (g[0][2] * r[0] + g[0][3] * r[1]) / n2;
                let (o, scale) = obstruction(forcing, &res.w_alpha, d2, d3);
                (s0, 0.0, o.abs() / scale.max(f64::MIN_POSITIVE))
            }
        };
        let w = particular_solution(&coeff, forcing, -1.0, 1.0, [s0, s1, d2[0], d3[0]], self.tol)?;
        Ok((w.curve, rel))
    }

    fn inner_residual(&self, w: &Curve, forcing: &dyn Fn(f64) -> f64) -> f64 {
        let r = w.integrate(|x, j| (j[4] + self.p.alpha * self.p.psi.eval(x) * j[0] - forcing(x)).powi(2));
        let s = w.integrate(|_, j| j[4] * j[4]) + w.integrate(|x, _| forcing(x).powi(2));
        (r / s.max(f64::MIN_POSITIVE)).sqrt()
    }

    /// Solves (L - λ)v_n = known + λ_n v on both halves with the four interface
    /// rows and ⟨v, v_n⟩ = 0. Returns (v_n, λ_n, relative residual).
    fn solve_outer(
        &self,
        v: &Piecewise,
        known: &(dyn Fn(f64, Side) -> f64 + Sync),
        rows: &[Row; 4],
    ) -> Result<(Piecewise, f64, f64)> {
        let p = self.p;
        let coeff = |x: f64| p.u(x) - self.lambda;
        let zero = |_: f64| 0.0;
        let halves = [(Side::Left, p.a, p.bc_left), (Side::Right, p.b, p.bc_right)];
        // basis on each half: two homogeneous solutions, the known particular
        // solution and the response to v; forcings are one-sided at x = 0
        let mut basis: Vec<[Curve; 4]> = Vec::with_capacity(2);
        for &(side, end, bc) in &halves {
            let st = start_states(bc);
            let vval = |x: f64| v.eval_side(x, side)[0];
            let kn = |x: f64| known(x, side);
            let h1 = particular_solution(coeff, zero, end, 0.0, st[0], self.tol)?.curve;
            let h2 = particular_solution(coeff, zero, end, 0.0, st[1], self.tol)?.curve;
            let pk = particular_solution(coeff, kn, end, 0.0, [0.0; 4], self.tol)?.curve;
            let pv = particular_solution(coeff, vval, end, 0.0, [0.0; 4], self.tol)?.curve;
            basis.push([h1, h2, pk, pv]);
        }
        let at0 = |c: &Curve| c.eval(0.0);
        let proj = |c: &Curve| Piecewise::new(vec![c.clone()]).inner(v);
        let mut a = DMatrix::<f64>::zeros(5, 5);
        let mut b = DVector::<f64>::zeros(5);
        for (r, row) in rows.iter().enumerate() {
            let [l, rt] = [&basis[0], &basis[1]];
            a[(r, 0)] = dot(&row.left, &at0(&l[0]));
            a[(r, 1)] = dot(&row.left, &at0(&l[1]));
            a[(r, 2)] = dot(&row.right, &at0(&rt[0]));
            a[(r, 3)] = dot(&row.right, &at0(&rt[1]));
            a[(r, 4)] = dot(&row.left, &at0(&l[3])) + dot(&row.right, &at0(&rt[3]));
            b[r] = row.rhs - dot(&row.left, &at0(&l[2])) - dot(&row.right, &at0(&rt[2]));
        }
        a[(4, 0)] = proj(&basis[0][0]);
        a[(4, 1)] = proj(&basis[0][1]);
        a[(4, 2)] = proj(&basis[1][0]);
        a[(4, 3)] = proj(&basis[1][1]);
        a[(4, 4)] = proj(&basis[0][3]) + proj(&basis[1][3]);
        b[4] = -proj(&basis[0][2]) - proj(&basis[1][2]);
        // equilibrate rows and columns before the solve
        for r in 0..5 {
            let s = a.row(r).amax().max(f64::MIN_POSITIVE);
            a.row_mut(r).scale_mut(1.0 / s);
            b[r] /= s;
        }
        let cs: Vec<f64> = (0..5).map(|c| a.column(c).amax().max(f64::MIN_POSITIVE)).collect();
        for (c, s) in cs.iter().enumerate() {
            a.column_mut(c).scale_mut(1.0 / s);
        }
        let x = a
            .full_piv_lu()
            .solve(&b)
            .ok_or_else(|| Error::Multiplicity("singular corrector system".into()).at_stage("outer corrector"))?;
        let x: Vec<f64> = x.iter().zip(&cs).map(|(x, s)| x / s).collect();
        let lambda_n = x[4];
        let mut pieces = Vec::with_capacity(2);
        let mut res2 = 0.0;
        let mut size2 = 0.0;
        for (h, &(side, end, bc)) in halves.iter().enumerate() {
            let full = |y: f64| known(y, side) + lambda_n * v.eval_side(y, side)[0];
            let st = start_states(bc);
            let (c1, c2) = (x[2 * h], x[2 * h + 1]);
            let y0: StateVector = std::array::from_fn(|i| c1 * st[0][i] + c2 * st[1][i]);
            let c = particular_solution(coeff, full, end, 0.0, y0, self.tol)?.curve;
            res2 += c.integrate(|t, j| (j[4] + coeff(t) * j[0] - full(t)).powi(2));
            size2 += c.integrate(|t, j| j[4] * j[4] + full(t).powi(2));
            pieces.push(c);
        }
        let rel = (res2 / size2.max(f64::MIN_POSITIVE)).sqrt();
        Ok((Piecewise::new(pieces), lambda_n, rel))
    }

    /// Interface rows for v_n.
    fn rows(&self, vs: &[Piecewise], ws: &[Curve], wstar: &Curve, n: usize) -> Result<[Row; 4]> {
        let ni = n as isize;
        let (l, r) = (Side::Left, Side::Right);
        let s = |j: usize, side: Side| self.taylor(vs, ni, j, side, 1);
        match &self.res {
            None => {
                let w_prev = &ws[n - 1];
                Ok([
                    Row {
                        left: unit(0, 1.0),
                        right: [0.0; 4],
                        rhs: w_prev.first()[0] - s(0, l),
                    },
                    Row {
                        left: unit(1, 1.0),
                        right: [0.0; 4],
                        rhs: wstar.first()[1] - s(1, l),
                    },
                    Row {
                        left: [0.0; 4],
                        right: unit(0, 1.0),
                        rhs: w_prev.last()[0] - s(0, r),
                    },
                    Row {
                        left: [0.0; 4],
                        right: unit(1, 1.0),
                        rhs: wstar.last()[1] - s(1, r),
                    },
                ])
            }
            Some(res) => {
                let p = self.p;
                let (th, ka) = (res.theta, res.kappa);
                let wa = &res.w_alpha;
                let (wl, wr) = (wa.first()[0], wa.last()[0]);
                let w_prev = &ws[n - 1];
                let d3 = |side| self.taylor(vs, ni - 1, 3, side, 0);
                let integral = |shape: &crate::shapes::ShapeFunction, f: &Curve| {
                    wa.integrate(|x, j| shape.eval(x) * f.value(x) * j[0])
                };
                let mut k = -p.beta * integral(&p.phi, wstar);
                if n >= 1 {
                    k -= p.gamma1 * integral(&p.upsilon1, &ws[n - 1]);
                }
                if n >= 2 {
                    k -= p.gamma2 * integral(&p.upsilon2, &ws[n - 2]);
                }
                let g = wstar.last()[1] - s(1, r) + th * s(1, l);
                let h = ka * s(1, l) - k + d3(r) * wr - th * s(2, r) - d3(l) * wl + s(2, l);
                Ok([
                    Row {
                        left: unit(0, 1.0),
                        right: [0.0; 4],
                        rhs: w_prev.first()[0] - s(0, l),
                    },
                    Row {
                        left: [0.0; 4],
                        right: unit(0, 1.0),
                        rhs: w_prev.last()[0] - s(0, r),
                    },
                    Row {
                        left: unit(1, -th),
                        right: unit(1, 1.0),
                        rhs: g,
                    },
                    Row {
                        left: [0.0, -ka, -1.0, 0.0],
                        right: unit(2, th),
                        rhs: h,
                    },
                ])
            }
        }
    }
}

/// λ_n from the Lagrange concomitant: C(0-) - C(0+) - Σ_{j<n} λ_j⟨v_{n-j}, v⟩.
fn projected_lambda(vs: &[Piecewise], lams: &[f64], n: usize) -> f64 {
    let v = &vs[0];
    let c = |side| crate::odecore::concomitant(&trace(&vs[n], side), &trace(v, side));
    let mut out = c(Side::Left) - c(Side::Right);
    for j in 1..n {
        out -= lams[j] * vs[n - j].inner(v);
    }
    out / v.inner(v)
}

fn build(ctx: Ctx<'_>, v: Piecewise) -> Result<CorrectorSet> {
    let lambda = ctx.lambda;
    let mut checks = CorrectorChecks::default();
    let w0 = match &ctx.res {
        Some(res) => res.w_alpha.scaled(trace(&v, Side::Left)[1]),
        None => Curve::new(vec![-1.0, 1.0], vec![[0.0; 5]; 2]),
    };
    let mut vs = vec![v];
    let mut ws = vec![w0];
    let mut wstars: Vec<Curve> = vec![ws[0].clone()];
    let mut lams = vec![lambda];
    let mut cs = vec![trace(&vs[0], Side::Left)[1]];
    let check = |rel: f64, stage: &str| -> Result<()> {
        if rel > OBSTRUCTION_TOL {
            return Err(Error::InternalInconsistency {
                stage: stage.into(),
                obstruction: rel,
            });
        }
        Ok(())
    };
    for n in 1..=3usize {
        let ni = n as isize;
        let d2 = [Side::Left, Side::Right].map(|s| ctx.taylor(&vs, ni - 1, 2, s, 0));
        let d3 = [Side::Left, Side::Right].map(|s| ctx.taylor(&vs, ni - 2, 3, s, 0));
        let forcing = ctx.inner_forcing(&ws, n);
        let (wstar, rel) = ctx.solve_inner(&forcing, d2, d3)?;
        checks.residual_w[n - 1] = ctx.inner_residual(&wstar, &forcing);
        if ctx.res.is_some() {
            checks.obstructions.push(rel);
            check(rel, &format!("inner corrector w{n}"))?;
        }
        wstars.push(wstar.clone());
        if n == 3 {
            // the multiple of w_α in w₃ is not fixed by the expansion; take 0
            ws.push(wstar);
            break;
        }
        let rows = ctx.rows(&vs, &ws, &wstar, n)?;
        let known = {
            let vs = &vs;
            let lams = &lams;
            move |x: f64, side: Side| -> f64 { (1..n).map(|j| lams[j] * vs[n - j].eval_side(x, side)[0]).sum() }
        };
        let (vn, ln, rel) = ctx.solve_outer(&vs[0], &known, &rows)?;
        checks.residual_v[n - 1] = rel;
        vs.push(vn);
        lams.push(ln);
        let wn = match &ctx.res {
            Some(res) => {
                let c = ctx.taylor(&vs, ni, 1, Side::Left, 0);
                cs.push(c);
                let start = wstar.first();
                let wa = res.w_alpha.first();
                let y0 = std::array::from_fn(|i| start[i] + c * wa[i]);
                let coeff = ctx.inner_coeff();
                particular_solution(&coeff, &forcing, -1.0, 1.0, y0, ctx.tol)?.curve
            }
            None => {
                cs.push(0.0);
                wstar
            }
        };
        ws.push(wn);
        checks.lambda_projection[n - 1] = projected_lambda(&vs, &lams, n);
        checks.gauge[n - 1] = vs[n].inner(&vs[0]);
    }
    let tr = |k: usize, side| trace(&vs[k], side);
    checks.slope_matching = tr(1, Side::Right)[1] + tr(0, Side::Right)[2] - ws[1].last()[1];
    checks.lambda_printed = printed(&ctx, &vs, &ws, &wstars);
    let (theta, kappa) = match &ctx.res {
        Some(r) => (Some(r.theta), r.kappa),
        None => (None, 0.0),
    };
    let mut ws = ws.into_iter();
    let mut vs = vs.into_iter();
    Ok(CorrectorSet {
        case: if ctx.res.is_some() {
            CorrectorCase::Resonant
        } else {
            CorrectorCase::Nonresonant
        },
        lambda0: lams[0],
        lambda1: lams[1],
        lambda2: lams[2],
        v: vs.next().unwrap(),
        v1: vs.next().unwrap(),
        v2: vs.next().unwrap(),
        w: ws.next().unwrap(),
        w1: ws.next().unwrap(),
        w2: ws.next().unwrap(),
        w3: ws.next().unwrap(),
        c1: cs[1],
        c2: cs[2],
        theta,
        kappa,
        checks,
    })
}

/// The closed forms for λ₁, λ₂ read literally (including ϑ_Ψ and the square
/// roots in the resonant case); reported for comparison only.
fn printed(ctx: &Ctx<'_>, vs: &[Piecewise], ws: &[Curve], wstars: &[Curve]) -> [f64; 2] {
    let m = |k: usize| trace(&vs[k], Side::Left);
    let pl = |k: usize| trace(&vs[k], Side::Right);
    match &ctx.res {
        None => {
            let (v, v1) = (pl(0), pl(1));
            let (w1, w2) = (&ws[1], &ws[2]);
            let l1 = v[2] * (v[2] - w1.last()[1]) - v[1] * v[3];
            let l2 = v[3] * (w1.last()[0] - v1[1] - 0.5 * v[2]) - v[2] * (w2.last()[1] - v1[2] - 0.5 * v[3]);
            [l1, l2]
        }
        Some(res) => {
            let p = ctx.p;
            let th = res.theta;
            let wa = &res.w_alpha;
            let (wl, wr) = (wa.first()[0], wa.last()[0]);
            let with = |shape: &crate::shapes::ShapeFunction, f: &dyn Fn(f64) -> f64| {
                wa.integrate(|x, _| shape.eval(x) * f(x))
            };
            let waf = |x: f64| wa.value(x);
            let psi_wa = with(&p.psi, &|x| waf(x) * waf(x));
            let (vm, vp, v1m, v1p) = (m(0), pl(0), m(1), pl(1));
            let w1s = &wstars[1];
            let w2s = &wstars[2];
            let g1 = w1s.last()[1] - vp[2] - th * vm[2];
            let w1sv = |x: f64| w1s.value(x);
            let h1 = (wr - th) * vp[3] - (wl + 1.0) * vm[3]
                + p.beta * (with(&p.psi, &|x| w1sv(x) * waf(x)) - psi_wa * vm[2])
                + p.gamma1 * with(&p.upsilon1, &|x| waf(x) * waf(x)) * vm[1];
            let l1 = h1 * vm[1] - g1 * vp[2] - (vm[1] * wl + vm[1]) * vm[3] + (vm[1] * wr - vp[1]) * vp[3];
            let g2 = w2s.last()[1] - th * (v1m[2] - 0.5 * vm[3]) - v1p[2] - 0.5 * vp[3];
            let w2sv = |x: f64| w2s.value(x);
            let w1v = |x: f64| ws[1].value(x);
            let w0v = |x: f64| ws[0].value(x);
            let h2 = v1p[3] * (wr - th) - v1m[3] * (wl + 1.0)
                + vp[4] * (wr - 0.5 * th)
                + vm[4] * (wl + 0.5)
                + p.beta * (with(&p.psi, &|x| w2sv(x) * waf(x)) - (v1m[2] - 0.5 * vm[3]) * psi_wa)
                + p.gamma1 * with(&p.upsilon1, &|x| w1v(x) * waf(x))
                + p.gamma2 * with(&p.upsilon2, &|x| w0v(x) * waf(x));
            let c1 = v1m[1] - vm[2];
            let f2m = w1s.first()[0] + c1 * wl + v1m[1] - 0.5 * vm[2];
            let f2p = w1s.last()[0] + c1 * wr - v1p[1] - 0.5 * vp[2];
            let l2 = h2 * vm[1] - g2 * vp[2] - f2m * vm[3] + f2p * vp[3];
            [l1, l2]
        }
    }
}

fn cauchy_end(p: &Problem, tol: Tolerance) -> Result<[[f64; 4]; 2]> {
    Ok(*cauchy_pair(&p.psi, p.alpha, tol, false)?.last())
}

fn check_simple(pair: &Eigenpair) -> Result<()> {
    if pair.multiplicity != 1 {
        return Err(Error::Refused(format!(
            "correctors are built for simple eigenvalues only; lambda = {} has multiplicity {}",
            pair.lambda, pair.multiplicity
        )));
    }
    Ok(())
}

/// Correctors when α is not resonant. The limit eigenfunction lives on one
/// half; an eigenvalue of S₋ is handled through the mirror image.
pub fn correctors_nonresonant(p: &Problem, pair: &Eigenpair) -> Result<CorrectorSet> {
    check_simple(pair)?;
    if p.alpha == 0.0 || p.psi.is_zero() {
        return Err(Error::Refused(
            "alpha = 0 is a degenerate resonance of every shape; the nonresonant construction does not apply".into(),
        ));
    }
    let tol = Tolerance::shooting();
    let d = normalized_determinant(&p.psi, p.alpha, tol)?;
    if d.abs() < NEAR_RESONANCE {
        warn!(
            "alpha = {} is close to the resonant set (|D| = {d:.2e}); correctors are ill-conditioned",
            p.alpha
        );
    }
    if pair.y.pieces.len() != 2 {
        return Err(Error::Domain(
            "expected a limit eigenfunction on (a,0) and (0,b)".into(),
        ));
    }
    let left = pair.y.pieces[0].integrate(|_, j| j[0] * j[0]);
    let right = pair.y.pieces[1].integrate(|_, j| j[0] * j[0]);
    if left > right {
        let q = p.mirrored();
        let y = Piecewise::new(pair.y.pieces.iter().map(Curve::reflected).collect());
        let ctx = Ctx {
            p: &q,
            lambda: pair.lambda,
            tol,
            g_end: cauchy_end(&q, tol)?,
            res: None,
        };
        return Ok(build(ctx, y)?.reflected());
    }
    let ctx = Ctx {
        p,
        lambda: pair.lambda,
        tol,
        g_end: cauchy_end(p, tol)?,
        res: None,
    };
    build(ctx, pair.y.clone())
}

/// Correctors at a nondegenerate resonance α = r.alpha.
pub fn correctors_resonant(
    p: &Problem,
    r: &ResonanceData,
    ic: &InterfaceConditions,
    pair: &Eigenpair,
) -> Result<CorrectorSet> {
    check_simple(pair)?;
    if !r.nondegenerate {
        return Err(Error::Refused(format!("resonance alpha = {} is degenerate", r.alpha)));
    }
    if (p.alpha - r.alpha).abs() > 1e-9 * r.alpha.abs().max(1.0) {
        return Err(Error::Domain(format!(
            "problem alpha {} differs from the resonance {}",
            p.alpha, r.alpha
        )));
    }
    let theta = ic
        .theta
        .ok_or_else(|| Error::Domain("interface conditions are not resonant".into()))?;
    let w_alpha = r
        .w_alpha
        .clone()
        .ok_or_else(|| Error::NotApplicable("resonance data carries no eigenfunction".into()))?;
    let tol = Tolerance::shooting();
    let ctx = Ctx {
        p,
        lambda: pair.lambda,
        tol,
        g_end: cauchy_end(p, tol)?,
        res: Some(Resonant {
            w_alpha,
            theta,
            kappa: ic.kappa,
        }),
    };
    build(ctx, pair.y.clone())
}

/// Approximate eigenpair (Λ_ε, Y_ε) of S_ε.
#[derive(Debug, Clone, Serialize)]
pub struct Quasimode {
    pub eps: f64,
    pub lambda_eps: f64,
    #[serde(skip)]
    pub y: Piecewise,
    /// Y^(j)(x+0) - Y^(j)(x-0) at x = -ε and x = +ε.
    pub jumps: [[f64; 4]; 2],
    /// ‖(L - Λ_ε)Y_ε‖ over (a,-ε)∪(ε,b) and ‖(L + Ψ_ε - Λ_ε)Y_ε‖ over (-ε, ε).
    pub residual_outer: f64,
    pub residual_inner: f64,
}

fn combine_jets(jets: &[Jet], weights: &[f64]) -> Jet {
    std::array::from_fn(|i| jets.iter().zip(weights).map(|(j, w)| j[i] * w).sum())
}

fn union_nodes(lo: f64, hi: f64, sets: &[Vec<f64>]) -> Vec<f64> {
    let mut t: Vec<f64> = sets.iter().flatten().copied().filter(|&x| x > lo && x < hi).collect();
    t.push(lo);
    t.push(hi);
    t.sort_by(f64::total_cmp);
    t.dedup();
    t
}

fn outer_nodes(v: &Piecewise) -> Vec<f64> {
    v.pieces.iter().flat_map(|c| c.nodes().iter().copied()).collect()
}

/// Y_ε and Λ_ε; ε = 0 returns (λ, v).
pub fn assemble_quasimode(p: &Problem, cs: &CorrectorSet, eps: f64) -> Result<Quasimode> {
    if eps == 0.0 {
        return Ok(Quasimode {
            eps,
            lambda_eps: cs.lambda0,
            y: cs.v.clone(),
            jumps: [[0.0; 4]; 2],
            residual_outer: 0.0,
            residual_inner: 0.0,
        });
    }
    p.check_epsilon(eps)?;
    let lam = cs.lambda_eps(eps);
    let vs = [&cs.v, &cs.v1, &cs.v2];
    let vw = [1.0, eps, eps * eps];
    let outer = |x: f64, side: Side| combine_jets(&vs.map(|v| v.eval_side(x, side)), &vw);
    let ws = [&cs.w, &cs.w1, &cs.w2, &cs.w3];
    let inner = |x: f64| -> Jet {
        let mut out = [0.0; 5];
        for (i, w) in ws.iter().enumerate() {
            let j = w.eval(x / eps);
            let mut f = eps.powi(i as i32 + 1);
            for k in 0..5 {
                out[k] += f * j[k];
                f /= eps;
            }
        }
        out
    };
    let onodes: Vec<Vec<f64>> = vs.iter().map(|v| outer_nodes(v)).collect();
    let left_t = union_nodes(p.a, -eps, &onodes);
    let right_t = union_nodes(eps, p.b, &onodes);
    let inodes: Vec<Vec<f64>> = ws.iter().map(|w| w.nodes().iter().map(|t| t * eps).collect()).collect();
    let inner_t = union_nodes(-eps, eps, &inodes);
    let left = Curve::new(left_t.clone(), left_t.iter().map(|&x| outer(x, Side::Left)).collect());
    let right = Curve::new(
        right_t.clone(),
        right_t.iter().map(|&x| outer(x, Side::Right)).collect(),
    );
    let mid = Curve::new(inner_t.clone(), inner_t.iter().map(|&x| inner(x)).collect());
    let jumps = [
        {
            let (o, i) = (outer(-eps, Side::Left), inner(-eps));
            std::array::from_fn(|k| i[k] - o[k])
        },
        {
            let (o, i) = (outer(eps, Side::Right), inner(eps));
            std::array::from_fn(|k| o[k] - i[k])
        },
    ];
    let ro = |x: f64, j: &Jet| (j[4] + (p.u(x) - lam) * j[0]).powi(2);
    let residual_outer = (left.integrate(ro) + right.integrate(ro)).sqrt();
    // Inside, each w_i solves its own equation (see the corrector checks), so
    // what is left of (L + Ψ_ε - Λ_ε)Y_ε is the truncation remainder. Evaluating
    // the full operator directly would cancel terms of size ε⁻³α.
    let (b, g1, g2) = (p.beta, p.gamma1, p.gamma2);
    let remainder = |xi: f64| {
        let w: [f64; 4] = std::array::from_fn(|i| ws[i].value(xi));
        let (f, u1, u2) = (p.phi.eval(xi), p.upsilon1.eval(xi), p.upsilon2.eval(xi));
        let tail = eps * (b * f * w[3] + g1 * u1 * w[2] + g2 * u2 * w[1])
            + eps * eps * (g1 * u1 * w[3] + g2 * u2 * w[2])
            + eps.powi(3) * g2 * u2 * w[3];
        let y: f64 = (0..4).map(|i| eps.powi(i as i32) * w[i]).sum();
        tail + eps * (p.u(eps * xi) - lam) * y
    };
    let residual_inner = (eps * cs.w1.integrate(|xi, _| remainder(xi).powi(2))).sqrt();
    Ok(Quasimode {
        eps,
        lambda_eps: lam,
        y: Piecewise::new(vec![left, mid, right]),
        jumps,
        residual_outer,
        residual_inner,
    })
}

/// One ε of a convergence study.
#[derive(Debug, Clone, Serialize)]
pub struct AccuracyRow {
    pub eps: f64,
    /// Perturbed eigenvalue matched to the limit eigenvalue.
    pub lambda_eps: f64,
    pub quasi_lambda: f64,
    pub err_lambda: f64,
    pub err_first_order: f64,
    pub err_quasi: f64,
    /// ‖y^ε - v‖ with the sign of y^ε aligned to v.
    pub eigenfunction_distance: f64,
    pub residual: f64,
    /// Two perturbed eigenvalues were nearly equally close.
    pub ambiguous: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct AccuracyReport {
    pub lambda0: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub rows: Vec<AccuracyRow>,
    pub lambda_rate: Option<RateFit>,
    pub first_order_rate: Option<RateFit>,
    pub quasi_rate: Option<RateFit>,
    pub eigenfunction_rate: Option<RateFit>,
}

/// Signed-aligned L₂ distance between two functions on (a, b).
pub fn aligned_distance(y: &Piecewise, v: &Piecewise) -> f64 {
    let s = y.inner(v).signum();
    y.integrate_with(v, |_, a, b| (a[0] - s * b[0]).powi(2)).sqrt()
}

/// Search half-width around Λ_ε when matching perturbed eigenvalues.
fn match_width(p: &Problem, cs: &CorrectorSet, eps: f64) -> f64 {
    let gap = 4.0 * std::f64::consts::PI / (p.b - p.a) * cs.lambda0.abs().max(1.0).powf(0.75);
    (0.5 * gap).max(4.0 * (eps * cs.lambda1).abs() + 4.0 * (eps * eps * cs.lambda2).abs())
}

pub fn quasimode_accuracy(
    p: &Problem,
    cs: &CorrectorSet,
    eps_seq: &[f64],
    opts: SpectrumOptions,
) -> Result<AccuracyReport> {
    let rows = eps_seq
        .par_iter()
        .map(|&eps| -> Result<AccuracyRow> {
            let quasi = cs.lambda_eps(eps);
            let width = match_width(p, cs, eps);
            let window = [quasi - width, quasi + width];
            let found = perturbed_spectrum(p, eps, window, usize::MAX, opts)?;
            let mut by_dist: Vec<&Eigenpair> = found.iter().collect();
            by_dist.sort_by(|a, b| (a.lambda - quasi).abs().total_cmp(&(b.lambda - quasi).abs()));
            let best = by_dist.first().ok_or_else(|| {
                Error::NotFound(format!(
                    "no perturbed eigenvalue within {width} of {quasi} at eps = {eps}"
                ))
            })?;
            let d0 = (best.lambda - quasi).abs();
            let ambiguous = by_dist
                .get(1)
                .is_some_and(|e| (e.lambda - quasi).abs() - d0 <= 1e-3 * d0.max(1e-12));
            Ok(AccuracyRow {
                eps,
                lambda_eps: best.lambda,
                quasi_lambda: quasi,
                err_lambda: (best.lambda - cs.lambda0).abs(),
                err_first_order: (best.lambda - cs.lambda0 - eps * cs.lambda1).abs(),
                err_quasi: d0,
                eigenfunction_distance: aligned_distance(&best.y, &cs.v),
                residual: best.residual,
                ambiguous,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let fit = |f: fn(&AccuracyRow) -> f64| {
        let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.eps, f(r))).collect();
        fit_rate(&pts).ok()
    };
    Ok(AccuracyReport {
        lambda0: cs.lambda0,
        lambda1: cs.lambda1,
        lambda2: cs.lambda2,
        lambda_rate: fit(|r| r.err_lambda),
        first_order_rate: fit(|r| r.err_first_order),
        quasi_rate: fit(|r| r.err_quasi),
        eigenfunction_rate: fit(|r| r.eigenfunction_distance),
        rows,
    })
}
