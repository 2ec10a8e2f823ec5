use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::odecore::Tolerance;
use crate::problem::{Problem, ProblemSpec};

pub const DEFAULT_EPS: [f64; 5] = [0.1, 0.05, 0.025, 0.0125, 0.00625];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    ResonantSet,
    Perturbed,
    Limit,
    Correctors,
    Converge,
    DivergenceProbe,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::ResonantSet => "resonant-set",
            Mode::Perturbed => "perturbed",
            Mode::Limit => "limit",
            Mode::Correctors => "correctors",
            Mode::Converge => "converge",
            Mode::DivergenceProbe => "divergence-probe",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    /// |D(α)| (normalized) at or below which α counts as resonant.
    pub dispatch: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let t = Tolerance::shooting();
        Tolerances {
            rtol: t.rtol,
            atol: t.atol,
            dispatch: 1e-8,
        }
    }
}

impl Tolerances {
    pub fn ode(&self) -> Tolerance {
        Tolerance::new(self.rtol, self.atol)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResonanceSection {
    /// α-window for the resonant-set scan.
    pub window: [f64; 2],
    /// scan step in sign(α)|α|^(1/4)
    pub step: f64,
}

impl Default for ResonanceSection {
    fn default() -> Self {
        ResonanceSection {
            window: [-1e4, 1e4],
            step: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerdictSection {
    pub slope_min: f64,
    pub slope_max: Option<f64>,
    /// allowed relative drift of ε⁴λ₁^ε between the two smallest ε (divergence probe)
    pub scaled_drift: f64,
}

impl Default for VerdictSection {
    fn default() -> Self {
        VerdictSection {
            slope_min: 0.8,
            slope_max: None,
            scaled_drift: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    /// also write sampled eigenfunctions
    pub eigenfunctions: bool,
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub mode: Option<Mode>,
    pub problem: ProblemSpec,
    #[serde(default = "default_eps")]
    pub eps: Vec<f64>,
    /// λ-window for spectra
    #[serde(default = "default_window")]
    pub window: [f64; 2],
    /// 1-based index of the limit eigenvalue followed by correctors/converge
    #[serde(default = "one")]
    pub target: usize,
    #[serde(default = "ten")]
    pub max_count: usize,
    /// grid points in ε⁴λ for the divergence probe
    #[serde(default = "mu_points")]
    pub mu_points: usize,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub resonance: ResonanceSection,
    #[serde(default)]
    pub verdict: VerdictSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn default_eps() -> Vec<f64> {
    DEFAULT_EPS.to_vec()
}

fn default_window() -> [f64; 2] {
    [0.0, 2000.0]
}

fn one() -> usize {
    1
}

fn ten() -> usize {
    10
}

fn mu_points() -> usize {
    64
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::config("<syntax>", e.message()))?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(if path == "." { "<root>".into() } else { path }, e.inner().message())
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
        Self::from_toml(&text)
    }

    /// Mode from the config, checked against the one requested on the command line.
    pub fn resolve_mode(&self, requested: Option<Mode>) -> Result<Mode> {
        match (self.mode, requested) {
            (Some(a), Some(b)) if a != b => Err(Error::config(
                "mode",
                format!("config says {} but {} was requested", a.name(), b.name()),
            )),
            (Some(m), _) | (None, Some(m)) => Ok(m),
            (None, None) => Err(Error::config("mode", "no mode given")),
        }
    }

    /// Validates the fields and builds the problem.
    pub fn validate(&self, mode: Mode) -> Result<Problem> {
        let p = Problem::from_spec(&self.problem)?;
        let needs_eps = matches!(
            mode,
            Mode::Perturbed | Mode::Converge | Mode::Correctors | Mode::DivergenceProbe
        );
        if needs_eps {
            if self.eps.is_empty() {
                return Err(Error::config("eps", "sequence is empty"));
            }
            for (i, &e) in self.eps.iter().enumerate() {
                if !(e > 0.0 && e.is_finite()) {
                    return Err(Error::config(format!("eps[{i}]"), format!("{e} is not positive")));
                }
                if e >= p.max_epsilon() {
                    return Err(Error::config(
                        format!("eps[{i}]"),
                        format!("{e} is not below min(|a|, b) = {}", p.max_epsilon()),
                    ));
                }
                if i > 0 && e >= self.eps[i - 1] {
                    return Err(Error::config(
                        format!("eps[{i}]"),
                        "sequence is not strictly decreasing",
                    ));
                }
            }
        }
        if mode == Mode::Converge && self.eps.len() < 3 {
            return Err(Error::config("eps", "a rate fit needs at least 3 values"));
        }
        let [lo, hi] = self.window;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::config("window", format!("[{lo}, {hi}] is not an interval")));
        }
        let [alo, ahi] = self.resonance.window;
        if !(alo.is_finite() && ahi.is_finite() && alo < ahi) {
            return Err(Error::config(
                "resonance.window",
                format!("[{alo}, {ahi}] is not an interval"),
            ));
        }
        if self.resonance.step.is_nan() || self.resonance.step <= 0.0 {
            return Err(Error::config("resonance.step", "must be positive"));
        }
        if self.target == 0 {
            return Err(Error::config("target", "indices start at 1"));
        }
        if self.max_count == 0 {
            return Err(Error::config("max_count", "must be positive"));
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("tolerances.rtol", t.rtol),
            ("tolerances.atol", t.atol),
            ("tolerances.dispatch", t.dispatch),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::config(name, format!("{v} outside (0, 1)")));
            }
        }
        if mode == Mode::ResonantSet && p.psi.is_zero() {
            return Err(Error::config("problem.psi", "resonant-set needs a nonzero shape"));
        }
        Ok(p)
    }
}
