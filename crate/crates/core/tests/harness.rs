mod common;

use common::clamped_beam_eigenvalue;
use sbspec_core::harness::*;
use sbspec_core::perturbed::SpectrumOptions;
use sbspec_core::Error;

const NONRES: &str = r#"
eps = [0.1, 0.05, 0.025, 0.0125, 0.00625]
window = [1.0, 600.0]

[problem]
interval = [-1.0, 2.0]
alpha = 100.0
beta = 1.0
psi = { family = "bump-poly", coefficients = [1.0] }
phi = { family = "bump-poly", coefficients = [1.0] }
"#;

const RES: &str = r#"
eps = [0.1, 0.05, 0.025]
window = [1.0, 300.0]

[problem]
interval = [-1.0, 1.0]
alpha = -2275.324902669087
beta = 1.0
psi = { family = "bump-poly", coefficients = [0.0, 1.0] }
phi = { family = "bump-poly", coefficients = [1.0] }
"#;

fn cfg(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml(text).unwrap()
}

fn config_path(e: Error) -> String {
    match e {
        Error::Config { path, .. } => path,
        other => panic!("expected a config error, got {other}"),
    }
}

#[test]
fn validation_names_the_field() {
    let bad = NONRES.replace("0.025, 0.0125", "0.0125, 0.025");
    let e = cfg(&bad).validate(Mode::Converge).unwrap_err();
    assert_eq!(config_path(e), "eps[3]");

    let short = NONRES.replace("eps = [0.1, 0.05, 0.025, 0.0125, 0.00625]", "eps = [0.1, 0.05]");
    assert!(cfg(&short).validate(Mode::Limit).is_ok());
    assert!(cfg(&short).validate(Mode::Converge).is_err());

    let e = ExperimentConfig::from_toml(&NONRES.replace("beta = 1.0", "beta = 1.0\nbetta = 2.0")).unwrap_err();
    assert!(config_path(e).starts_with("problem"));

    let e = ExperimentConfig::from_toml(&NONRES.replace("alpha = 100.0", "alpha = \"big\"")).unwrap_err();
    assert_eq!(config_path(e), "problem.alpha");

    let e = cfg(&NONRES.replace("window = [1.0, 600.0]", "window = [600.0, 1.0]"))
        .validate(Mode::Limit)
        .unwrap_err();
    assert_eq!(config_path(e), "window");
}

#[test]
fn zero_alpha_is_refused_before_any_solve() {
    let c = cfg(&NONRES.replace("alpha = 100.0", "alpha = 0.0"));
    for mode in [Mode::Limit, Mode::Correctors, Mode::Converge] {
        let r = run_experiment(&c, mode);
        assert!(
            matches!(r.as_ref().map_err(Error::root), Err(Error::Refused(_))),
            "{}: {:?}",
            mode.name(),
            r.map(|o| o.summary)
        );
    }
}

#[test]
fn dispatch_follows_the_determinant() {
    let p = cfg(NONRES).validate(Mode::Limit).unwrap();
    let d = dispatch(&p, 1e-8, SpectrumOptions::default()).unwrap();
    assert!(matches!(d, Dispatch::Nonresonant { .. }));
    assert!(d.determinant().abs() > 1e-8);

    let p = cfg(RES).validate(Mode::Limit).unwrap();
    let d = dispatch(&p, 1e-8, SpectrumOptions::default()).unwrap();
    match d {
        Dispatch::Resonant {
            determinant, interface, ..
        } => {
            assert!(determinant.abs() <= 1e-8);
            assert!(interface.theta.is_some_and(f64::is_finite));
        }
        _ => panic!("expected the resonant regime"),
    }

    // just off the resonance the interface is never built
    let mut p = p;
    p.alpha *= 1.0 + 1e-4;
    assert!(matches!(
        dispatch(&p, 1e-8, SpectrumOptions::default()).unwrap(),
        Dispatch::Nonresonant { .. }
    ));
}

#[test]
fn runs_are_deterministic() {
    let c = cfg(NONRES);
    for mode in [Mode::Limit, Mode::Correctors] {
        let a = run_experiment(&c, mode).unwrap();
        let b = run_experiment(&c, mode).unwrap();
        assert_eq!(a.artifacts.len(), b.artifacts.len());
        for (x, y) in a.artifacts.iter().zip(&b.artifacts) {
            assert_eq!(x.name, y.name);
            assert_eq!(x.contents, y.contents, "{}", x.name);
        }
    }
}

#[test]
fn uncoupled_perturbed_mode_is_the_clamped_beam() {
    let c = cfg(r#"
eps = [0.1]
window = [1.0, 3000.0]
[problem]
interval = [-1.0, 1.0]
"#);
    let out = run_experiment(&c, Mode::Perturbed).unwrap();
    let csv = &out.artifacts[0];
    assert_eq!(csv.name, "perturbed_spectrum.csv");
    let mut rd = csv::Reader::from_reader(csv.contents.as_bytes());
    let head = rd.headers().unwrap().clone();
    assert_eq!(&head[0], "schema_version");
    let col = head.iter().position(|h| h == "lambda").unwrap();
    let got: Vec<f64> = rd.records().map(|r| r.unwrap()[col].parse().unwrap()).collect();
    assert_eq!(got.len(), 4);
    for (n, l) in got.iter().enumerate() {
        let want = clamped_beam_eigenvalue(n + 1, 2.0);
        assert!((l - want).abs() <= 1e-7 * want, "{l} vs {want}");
    }
}

#[test]
fn limit_and_converge_reports() {
    let c = cfg(NONRES);
    let out = run_experiment(&c, Mode::Converge).unwrap();
    assert_eq!(out.verdict, Verdict::Pass);
    let json = out.artifacts.iter().find(|a| a.name == "converge.json").unwrap();
    assert!(json.contents.trim_start().starts_with("{\n  \"schema_version\": 1"));
    let v: serde_json::Value = serde_json::from_str(&json.contents).unwrap();
    assert!(v["lambda_rate"]["slope"].as_f64().unwrap() > 0.8);

    let strict = cfg(&format!("{NONRES}\n[verdict]\nslope_min = 5.0\n"));
    assert_eq!(run_experiment(&strict, Mode::Converge).unwrap().exit_code(), 1);
}

#[test]
fn artifacts_land_in_the_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment(&cfg(NONRES), Mode::Limit).unwrap();
    let paths = write_artifacts(dir.path(), &out.artifacts).unwrap();
    assert_eq!(paths.len(), out.artifacts.len());
    for (p, a) in paths.iter().zip(&out.artifacts) {
        assert_eq!(std::fs::read_to_string(p).unwrap(), a.contents);
    }
    let stray: Vec<_> = std::fs::read_dir(dir.path()).unwrap().filter_map(|e| e.ok()).collect();
    assert_eq!(stray.len(), paths.len());
}

#[test]
fn shipped_configs_validate() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    for (name, modes) in [
        ("nonresonant.toml", &[Mode::Perturbed, Mode::Limit, Mode::Correctors, Mode::Converge][..]),
        ("resonant.toml", &[Mode::ResonantSet, Mode::Limit, Mode::Correctors, Mode::Converge][..]),
        ("divergence.toml", &[Mode::DivergenceProbe, Mode::ResonantSet][..]),
    ] {
        let c = ExperimentConfig::load(&dir.join(name)).unwrap();
        for &m in modes {
            c.validate(m).unwrap_or_else(|e| panic!("{name} / {}: {e}", m.name()));
        }
    }
}
