mod common;

use common::simpson_richardson;
use sbspec_core::asymptotics::*;
use sbspec_core::limit::{build_interface, limit_spectrum_nonresonant, limit_spectrum_resonant};
use sbspec_core::odecore::{Side, Tolerance};
use sbspec_core::perturbed::{perturbed_eigenvalues, SpectrumOptions};
use sbspec_core::resonance::{resonance_at, ResonanceData};
use sbspec_core::{make_bump_shape, Error, Problem, ShapeFunction};

const ALPHA_RES: f64 = -2275.324902669087;

fn b() -> ShapeFunction {
    make_bump_shape(&[1.0]).unwrap()
}

fn nonresonant() -> Problem {
    Problem::new(-1.0, 2.0)
        .unwrap()
        .with_alpha(100.0, b())
        .with_beta(1.0, b())
}

fn resonant(g1: f64, g2: f64) -> (Problem, ResonanceData) {
    let psi = make_bump_shape(&[0.0, 1.0]).unwrap();
    let r = resonance_at(&psi, ALPHA_RES, Tolerance::shooting()).unwrap();
    let p = Problem::new(-1.0, 1.0)
        .unwrap()
        .with_alpha(ALPHA_RES, psi)
        .with_beta(1.0, b())
        .with_gamma1(g1, b())
        .with_gamma2(g2, b());
    (p, r)
}

fn resonant_set(g1: f64, g2: f64) -> CorrectorSet {
    let (p, r) = resonant(g1, g2);
    let ic = build_interface(&r, p.beta, &p.phi).unwrap();
    let lim = limit_spectrum_resonant(&p, &ic, [1.0, 300.0], Tolerance::shooting()).unwrap();
    correctors_resonant(&p, &r, &ic, &lim[0]).unwrap()
}

fn common_checks(cs: &CorrectorSet) {
    let c = &cs.checks;
    for g in c.gauge {
        assert!(g.abs() <= 1e-7, "gauge {g:e}");
    }
    for r in c.residual_v.iter().chain(&c.residual_w) {
        assert!(*r <= 1e-6, "residual {r:e}");
    }
    for o in &c.obstructions {
        assert!(o.abs() <= 1e-6, "obstruction {o:e}");
    }
    for (l, proj) in [cs.lambda1, cs.lambda2].iter().zip(c.lambda_projection) {
        assert!((l - proj).abs() <= 1e-6 * l.abs().max(1.0), "{l} vs projection {proj}");
    }
}

#[test]
fn nonresonant_correctors_agree_with_printed_formulas() {
    let p = nonresonant();
    let lim = limit_spectrum_nonresonant(&p, [1.0, 600.0], Tolerance::shooting()).unwrap();
    for pair in [&lim[0], &lim[2]] {
        let cs = correctors_nonresonant(&p, pair).unwrap();
        assert_eq!(cs.case, CorrectorCase::Nonresonant);
        common_checks(&cs);
        for (l, printed) in [cs.lambda1, cs.lambda2].iter().zip(cs.checks.lambda_printed) {
            assert!((l - printed).abs() <= 1e-6 * l.abs(), "{l} vs printed {printed}");
        }
        // the inner correctors vanish at leading order
        assert!(cs.w.jets().iter().all(|j| j[0] == 0.0));
    }
}

#[test]
fn nonresonant_lambda1_matches_difference_quotient() {
    let p = nonresonant();
    let lim = limit_spectrum_nonresonant(&p, [1.0, 600.0], Tolerance::shooting()).unwrap();
    let cs = correctors_nonresonant(&p, &lim[0]).unwrap();
    let eps = 1e-2;
    let ev = perturbed_eigenvalues(
        &p,
        eps,
        [cs.lambda0 - 5.0, cs.lambda0 + 5.0],
        SpectrumOptions::default(),
    )
    .unwrap();
    let q = (ev[0].0 - cs.lambda0) / eps;
    assert!(
        (q - cs.lambda1).abs() <= 0.1 * cs.lambda1.abs(),
        "{q} vs {}",
        cs.lambda1
    );
}

#[test]
fn resonant_correctors_are_consistent() {
    let cs = resonant_set(2.0, 1.0);
    assert_eq!(cs.case, CorrectorCase::Resonant);
    common_checks(&cs);
    assert!(!cs.checks.obstructions.is_empty());
    // second adjoint condition: v₁'(-0) - v''(-0) = c₁
    let (v1m, vm) = (cs.v1.eval_side(0.0, Side::Left), cs.v.eval_side(0.0, Side::Left));
    assert!(
        (v1m[1] - vm[2] - cs.c1).abs() <= 1e-6 * cs.c1.abs().max(1.0),
        "{} vs {}",
        v1m[1] - vm[2],
        cs.c1
    );
}

#[test]
fn gamma2_does_not_enter_lambda1() {
    let a = resonant_set(2.0, 0.0);
    let c = resonant_set(2.0, 5.0);
    assert!((a.lambda0 - c.lambda0).abs() <= 1e-10 * a.lambda0);
    assert!(
        (a.lambda1 - c.lambda1).abs() <= 1e-8 * a.lambda1.abs(),
        "{} vs {}",
        a.lambda1,
        c.lambda1
    );
}

#[test]
fn lambda1_slope_in_gamma1_is_the_upsilon_functional() {
    let sets: Vec<CorrectorSet> = [-5.0, 0.0, 5.0].iter().map(|&g| resonant_set(g, 0.0)).collect();
    for s in &sets[1..] {
        assert!((s.lambda0 - sets[0].lambda0).abs() <= 1e-10 * s.lambda0);
    }
    let (_, r) = resonant(0.0, 0.0);
    let w = r.w_alpha.unwrap();
    let ups = b();
    let theta_w2 = simpson_richardson(|x| ups.eval(x) * w.value(x).powi(2), -1.0, 1.0, 4000);
    let dv = sets[1].v.eval_side(0.0, Side::Left)[1];
    let want = theta_w2 * dv * dv;
    let slope = (sets[2].lambda1 - sets[0].lambda1) / 10.0;
    let mid = sets[1].lambda1 - 0.5 * (sets[2].lambda1 + sets[0].lambda1);
    assert!((slope - want).abs() <= 1e-6 * want.abs(), "{slope} vs {want}");
    assert!(mid.abs() <= 1e-8 * sets[1].lambda1.abs(), "not affine: {mid:e}");
}

#[test]
fn obstruction_detects_inconsistent_data() {
    let (_, r) = resonant(0.0, 0.0);
    let w = r.w_alpha.unwrap();
    assert_eq!(solvability_project(|_| 0.0, &w, [0.0; 2], [0.0; 2]), 0.0);
    for d in [[0.3, 0.0], [0.0, -1.1], [0.2, 0.7]] {
        let o = solvability_project(|_| 0.0, &w, d, [0.0; 2]);
        assert!(o.abs() > 1e-3, "{d:?}: {o:e}");
    }
    let o = solvability_project(|x| x, &w, [0.0; 2], [0.0; 2]);
    let want = simpson_richardson(|x| x * w.value(x), -1.0, 1.0, 4000);
    assert!((o - want).abs() <= 1e-9 * want.abs().max(1.0));
}

#[test]
fn refusals() {
    // double limit eigenvalue
    let p = Problem::new(-1.0, 1.0).unwrap().with_alpha(100.0, b());
    let lim = limit_spectrum_nonresonant(&p, [1.0, 600.0], Tolerance::shooting()).unwrap();
    assert!(matches!(correctors_nonresonant(&p, &lim[0]), Err(Error::Refused(_))));
    // α = 0 is the degenerate resonance of every shape
    let z = Problem::new(-1.0, 2.0).unwrap();
    let lim = limit_spectrum_nonresonant(&z, [1.0, 100.0], Tolerance::shooting()).unwrap();
    assert!(matches!(correctors_nonresonant(&z, &lim[0]), Err(Error::Refused(_))));
    // degenerate resonance
    let (p, mut r) = resonant(0.0, 0.0);
    r.nondegenerate = false;
    assert!(matches!(build_interface(&r, 1.0, &p.phi), Err(Error::Refused(_))));
}

#[test]
fn quasimode_at_zero_is_the_limit_pair() {
    let p = nonresonant();
    let lim = limit_spectrum_nonresonant(&p, [1.0, 600.0], Tolerance::shooting()).unwrap();
    let cs = correctors_nonresonant(&p, &lim[0]).unwrap();
    let q = assemble_quasimode(&p, &cs, 0.0).unwrap();
    assert_eq!(q.lambda_eps, cs.lambda0);
    for x in [-0.5, 0.3, 1.7] {
        assert_eq!(q.y.value(x), cs.v.value(x));
    }
}

#[test]
fn quasimode_residuals_shrink() {
    let p = nonresonant();
    let lim = limit_spectrum_nonresonant(&p, [1.0, 600.0], Tolerance::shooting()).unwrap();
    let cs = correctors_nonresonant(&p, &lim[0]).unwrap();
    let q: Vec<Quasimode> = [0.1, 0.05, 0.025]
        .iter()
        .map(|&e| assemble_quasimode(&p, &cs, e).unwrap())
        .collect();
    for w in q.windows(2) {
        assert!(w[1].residual_inner < w[0].residual_inner);
        assert!(w[1].residual_outer <= w[0].residual_outer * 1.01 + 1e-9);
    }
}
