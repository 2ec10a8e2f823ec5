//! Property checks shared by the proptest suites and the acceptance runner.
//! Each check returns `Err(message)` on violation.

#![allow(dead_code)]

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use sbspec_core::limit::{limit_spectrum_resonant, InterfaceConditions};
use sbspec_core::odecore::{concomitant, fundamental_matrix, integrate_ivp, particular_solution, Tolerance};
use sbspec_core::shapes::moment_with_tol;
use sbspec_core::{is_delta_like, moment, Problem, ShapeFunction};

pub type Check = Result<(), String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Check {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

pub fn runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(
        Config {
            cases,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    )
}

/// Runs `check` on `cases` deterministic samples of `strategy`.
pub fn run_suite<S: Strategy>(cases: u32, strategy: S, check: impl Fn(S::Value) -> Check) -> Check
where
    S::Value: std::fmt::Debug,
{
    runner(cases)
        .run(&strategy, |v| check(v).map_err(TestCaseError::fail))
        .map_err(|e| e.to_string())
}

fn state() -> impl Strategy<Value = [f64; 4]> {
    prop::array::uniform4(-2.0..2.0f64)
}

// ---- odecore ----

#[derive(Debug, Clone)]
pub struct LinearCase {
    pub c: [f64; 2],
    pub ya: [f64; 4],
    pub yb: [f64; 4],
    pub fa: [f64; 2],
    pub fb: [f64; 2],
    pub s: f64,
}

pub fn linear_case() -> impl Strategy<Value = LinearCase> {
    (
        prop::array::uniform2(-20.0..20.0f64),
        state(),
        state(),
        prop::array::uniform2(-3.0..3.0f64),
        prop::array::uniform2(-3.0..3.0f64),
        -3.0..3.0f64,
    )
        .prop_map(|(c, ya, yb, fa, fb, s)| LinearCase { c, ya, yb, fa, fb, s })
}

/// Solution map is additive in (y0, rhs) and homogeneous.
pub fn check_linearity(k: LinearCase) -> Check {
    let tol = Tolerance::default();
    let coeff = |t: f64| k.c[0] + k.c[1] * t;
    let f = |r: [f64; 2]| move |t: f64| r[0] + r[1] * t * t;
    let solve = |y: [f64; 4], r: [f64; 2]| particular_solution(coeff, f(r), 0.0, 1.5, y, tol).map(|s| s.end);
    let a = solve(k.ya, k.fa).map_err(|e| e.to_string())?;
    let b = solve(k.yb, k.fb).map_err(|e| e.to_string())?;
    let y: [f64; 4] = std::array::from_fn(|i| k.ya[i] + k.s * k.yb[i]);
    let r = [k.fa[0] + k.s * k.fb[0], k.fa[1] + k.s * k.fb[1]];
    let c = solve(y, r).map_err(|e| e.to_string())?;
    let scale = a.iter().chain(&b).fold(1.0f64, |m, v| m.max(v.abs())) * (1.0 + k.s.abs());
    for i in 0..4 {
        let d = (c[i] - a[i] - k.s * b[i]).abs();
        ensure(d <= 1e-8 * scale, || {
            format!("component {i}: defect {d:e} (scale {scale:e})")
        })?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct PairCase {
    pub c: [f64; 3],
    pub yu: [f64; 4],
    pub yw: [f64; 4],
}

pub fn pair_case() -> impl Strategy<Value = PairCase> {
    (prop::array::uniform3(-30.0..30.0f64), state(), state()).prop_map(|(c, yu, yw)| PairCase { c, yu, yw })
}

/// u'''w - u''w' + u'w'' - uw''' is constant for two homogeneous solutions.
pub fn check_lagrange(k: PairCase) -> Check {
    let tol = Tolerance::default();
    let coeff = |t: f64| k.c[0] + k.c[1] * t + k.c[2] * (3.0 * t).sin();
    let u = integrate_ivp(coeff, 0.0, 2.0, k.yu, tol).map_err(|e| e.to_string())?;
    let w = integrate_ivp(coeff, 0.0, 2.0, k.yw, tol).map_err(|e| e.to_string())?;
    let c0 = concomitant(&k.yu, &k.yw);
    let mut scale = 1.0f64;
    let mut worst = 0.0f64;
    for i in 0..=64 {
        let t = 2.0 * i as f64 / 64.0;
        let (ju, jw) = (u.curve.eval(t), w.curve.eval(t));
        let nu = ju[..4].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let nw = jw[..4].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        scale = scale.max(nu * nw);
        worst = worst.max((concomitant(&ju[..4], &jw[..4]) - c0).abs());
    }
    ensure(worst <= 1e-7 * scale, || {
        format!("concomitant drift {worst:e} (scale {scale:e})")
    })
}

#[derive(Debug, Clone)]
pub struct SplitCase {
    pub c: [f64; 2],
    pub t1: f64,
}

pub fn split_case() -> impl Strategy<Value = SplitCase> {
    (prop::array::uniform2(-40.0..40.0f64), 0.1..1.9f64).prop_map(|(c, t1)| SplitCase { c, t1 })
}

/// M(0→2) = M(t₁→2)·M(0→t₁) and det M = 1 (zero-trace companion system).
pub fn check_composition(k: SplitCase) -> Check {
    let tol = Tolerance::default();
    let coeff = |t: f64| k.c[0] + k.c[1] * t;
    let e = |r: sbspec_core::Result<_>| r.map_err(|e: sbspec_core::Error| e.to_string());
    let a = e(fundamental_matrix(coeff, 0.0, k.t1, tol))?;
    let b = e(fundamental_matrix(coeff, k.t1, 2.0, tol))?;
    let full = e(fundamental_matrix(coeff, 0.0, 2.0, tol))?;
    let comp = e(a.then(&b))?;
    let scale = full.m.abs().max().max(1.0);
    let d = (comp.m - full.m).abs().max();
    ensure(d <= 1e-8 * scale, || {
        format!("composition defect {d:e} (scale {scale:e})")
    })?;
    let det = full.det();
    ensure((det - 1.0).abs() <= 1e-6, || format!("det = {det}"))
}

// ---- shapes ----

pub fn coefficients() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0f64, 1..5).prop_filter("nonzero", |c| c.iter().any(|v| v.abs() > 0.1))
}

/// moment of ξ ↦ f(-ξ) at order k is (-1)^k times that of f.
pub fn check_moment_symmetry((c, k): (Vec<f64>, u32)) -> Check {
    let f = ShapeFunction::bump_poly(&c, 0, 1.0).map_err(|e| e.to_string())?;
    let g = f.reflected();
    let (mf, mg) = (
        moment(&f, k).map_err(|e| e.to_string())?,
        moment(&g, k).map_err(|e| e.to_string())?,
    );
    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
    ensure((mg - sign * mf).abs() <= 1e-9, || {
        format!("order {k}: {mg} vs {}", sign * mf)
    })
}

/// n-th derivative of p·b scaled by 1/∫p·b is δ⁽ⁿ⁾-like; twice that is not.
/// Verdicts agree at two quadrature tolerances.
pub fn check_delta_like((c, n): (Vec<f64>, u32)) -> Check {
    let base = ShapeFunction::bump_poly(&c, 0, 1.0).map_err(|e| e.to_string())?;
    let mass = moment(&base, 0).map_err(|e| e.to_string())?;
    if mass.abs() < 0.05 {
        return Ok(());
    }
    for (scale, expect) in [(1.0 / mass, true), (2.0 / mass, false)] {
        let f = ShapeFunction::bump_poly(&c, n, scale).map_err(|e| e.to_string())?;
        let (v, _) = is_delta_like(&f, n, 1e-8).map_err(|e| e.to_string())?;
        let verdict_at = |tol: f64| -> Result<bool, String> {
            let m: Vec<f64> = (0..=n)
                .map(|j| moment_with_tol(&f, j, tol).map_err(|e| e.to_string()))
                .collect::<Result<_, _>>()?;
            let target = if n % 2 == 0 { 1.0 } else { -1.0 };
            Ok(m[..n as usize].iter().all(|x| x.abs() <= 1e-8) && (m[n as usize] - target).abs() <= 1e-8)
        };
        let (coarse, fine) = (verdict_at(1e-10)?, verdict_at(1e-13)?);
        ensure(v == expect && coarse == expect && fine == expect, || {
            format!("n = {n}, scale {scale}: verdict {v}, coarse {coarse}, fine {fine}, expected {expect}")
        })?;
    }
    Ok(())
}

// ---- limit ----

pub fn interface_case() -> impl Strategy<Value = (f64, f64)> {
    ((0.25..4.0f64), any::<bool>(), -5.0..5.0f64).prop_map(|(t, neg, k)| (if neg { -t } else { t }, k))
}

/// Distinct eigenfunctions of the resonant limit operator are L₂-orthogonal and
/// satisfy the interface conditions.
pub fn check_limit_orthogonality((theta, kappa): (f64, f64)) -> Check {
    let p = Problem::new(-1.0, 1.5)
        .map_err(|e| e.to_string())?
        .with_potential(&[0.0, 2.0]);
    let ic = InterfaceConditions::resonant(theta, kappa).map_err(|e| e.to_string())?;
    let s = limit_spectrum_resonant(&p, &ic, [-50.0, 1500.0], Tolerance::shooting()).map_err(|e| e.to_string())?;
    ensure(s.len() >= 3, || format!("only {} eigenvalues", s.len()))?;
    for (i, a) in s.iter().enumerate() {
        let (_, l, r) = a.traces[0];
        for d in ic.defects(&l, &r) {
            ensure(d.abs() <= 1e-6, || {
                format!("lambda {}: interface defect {d:e}", a.lambda)
            })?;
        }
        for b in &s[i + 1..] {
            let ip = a.y.inner(&b.y);
            ensure(ip.abs() <= 1e-5, || {
                format!("<y({}), y({})> = {ip:e}", a.lambda, b.lambda)
            })?;
        }
    }
    Ok(())
}
