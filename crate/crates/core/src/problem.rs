//! Problem description: interval, background potential, couplings and shapes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::Poly;
use crate::shapes::{ShapeFunction, ShapeSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    /// y = y' = 0
    #[default]
    Clamped,
    /// y = y'' = 0
    Pinned,
    /// y'' = y''' = 0
    Free,
}

impl BoundaryCondition {
    /// State components that vanish.
    pub fn constrained(self) -> [usize; 2] {
        match self {
            BoundaryCondition::Clamped => [0, 1],
            BoundaryCondition::Pinned => [0, 2],
            BoundaryCondition::Free => [2, 3],
        }
    }

    /// State components left free; unit vectors along them span the admissible states.
    pub fn unconstrained(self) -> [usize; 2] {
        match self {
            BoundaryCondition::Clamped => [2, 3],
            BoundaryCondition::Pinned => [1, 3],
            BoundaryCondition::Free => [0, 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub a: f64,
    pub b: f64,
    pub potential: Poly,
    pub alpha: f64,
    pub beta: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub psi: ShapeFunction,
    pub phi: ShapeFunction,
    pub upsilon1: ShapeFunction,
    pub upsilon2: ShapeFunction,
    pub bc_left: BoundaryCondition,
    pub bc_right: BoundaryCondition,
}

impl Problem {
    /// Clamped problem on (a, b) with no potential and no perturbation.
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < 0.0 && 0.0 < b) {
            return Err(Error::Domain(format!("interval ({a}, {b}) must satisfy a < 0 < b")));
        }
        Ok(Problem {
            a,
            b,
            potential: Poly::zero(),
            alpha: 0.0,
            beta: 0.0,
            gamma1: 0.0,
            gamma2: 0.0,
            psi: ShapeFunction::zero(),
            phi: ShapeFunction::zero(),
            upsilon1: ShapeFunction::zero(),
            upsilon2: ShapeFunction::zero(),
            bc_left: BoundaryCondition::Clamped,
            bc_right: BoundaryCondition::Clamped,
        })
    }

    pub fn with_potential(mut self, coefficients: &[f64]) -> Self {
        self.potential = Poly::new(coefficients);
        self
    }

    pub fn with_alpha(mut self, alpha: f64, psi: ShapeFunction) -> Self {
        self.alpha = alpha;
        self.psi = psi;
        self
    }

    pub fn with_beta(mut self, beta: f64, phi: ShapeFunction) -> Self {
        self.beta = beta;
        self.phi = phi;
        self
    }

    pub fn with_gamma1(mut self, gamma1: f64, upsilon1: ShapeFunction) -> Self {
        self.gamma1 = gamma1;
        self.upsilon1 = upsilon1;
        self
    }

    pub fn with_gamma2(mut self, gamma2: f64, upsilon2: ShapeFunction) -> Self {
        self.gamma2 = gamma2;
        self.upsilon2 = upsilon2;
        self
    }

    pub fn with_boundary(mut self, left: BoundaryCondition, right: BoundaryCondition) -> Self {
        self.bc_left = left;
        self.bc_right = right;
        self
    }

    pub fn max_epsilon(&self) -> f64 {
        self.a.abs().min(self.b)
    }

    pub fn check_epsilon(&self, eps: f64) -> Result<()> {
        if !(eps > 0.0 && eps < self.max_epsilon()) {
            return Err(Error::Domain(format!(
                "epsilon {eps} outside (0, {})",
                self.max_epsilon()
            )));
        }
        Ok(())
    }

    pub fn u(&self, x: f64) -> f64 {
        self.potential.eval(x)
    }

    /// Coefficient of the inner equation in ξ = x/ε after multiplying by ε⁴:
    /// `αΨ + εβΦ + ε²γ₁Υ₁ + ε³γ₂Υ₂ + ε⁴(U(εξ) - λ)`.
    pub fn inner_coefficient(&self, eps: f64, lambda: f64, xi: f64) -> f64 {
        let e2 = eps * eps;
        self.alpha * self.psi.eval(xi)
            + eps * self.beta * self.phi.eval(xi)
            + e2 * self.gamma1 * self.upsilon1.eval(xi)
            + e2 * eps * self.gamma2 * self.upsilon2.eval(xi)
            + e2 * e2 * (self.u(eps * xi) - lambda)
    }

    /// The squeezed potential Ψ_ε at `x`.
    pub fn scaled_potential(&self, eps: f64, x: f64) -> Result<f64> {
        self.check_epsilon(eps)?;
        if x.abs() >= eps {
            return Ok(0.0);
        }
        let xi = x / eps;
        let e2 = eps * eps;
        Ok(self.alpha * self.psi.eval(xi) / (e2 * e2)
            + self.beta * self.phi.eval(xi) / (e2 * eps)
            + self.gamma1 * self.upsilon1.eval(xi) / e2
            + self.gamma2 * self.upsilon2.eval(xi) / eps)
    }

    /// True when no coupling acts, i.e. Ψ_ε ≡ 0.
    pub fn is_uncoupled(&self) -> bool {
        (self.alpha == 0.0 || self.psi.is_zero())
            && (self.beta == 0.0 || self.phi.is_zero())
            && (self.gamma1 == 0.0 || self.upsilon1.is_zero())
            && (self.gamma2 == 0.0 || self.upsilon2.is_zero())
    }

    /// Mirror image under x ↦ -x.
    pub fn mirrored(&self) -> Self {
        Problem {
            a: -self.b,
            b: -self.a,
            potential: self.potential.reflect(),
            psi: self.psi.reflected(),
            phi: self.phi.reflected(),
            upsilon1: self.upsilon1.reflected(),
            upsilon2: self.upsilon2.reflected(),
            bc_left: self.bc_right,
            bc_right: self.bc_left,
            ..self.clone()
        }
    }

    pub fn from_spec(spec: &ProblemSpec) -> Result<Self> {
        let [a, b] = spec.interval;
        let shape = |s: &Option<ShapeSpec>, name: &str| -> Result<ShapeFunction> {
            match s {
                None => Ok(ShapeFunction::zero()),
                Some(s) => {
                    ShapeFunction::from_spec(s).map_err(|e| Error::config(format!("problem.{name}"), e.to_string()))
                }
            }
        };
        let p = Problem::new(a, b).map_err(|e| Error::config("problem.interval", e.to_string()))?;
        Ok(Problem {
            potential: Poly::new(&spec.potential),
            alpha: spec.alpha,
            beta: spec.beta,
            gamma1: spec.gamma1,
            gamma2: spec.gamma2,
            psi: shape(&spec.psi, "psi")?,
            phi: shape(&spec.phi, "phi")?,
            upsilon1: shape(&spec.upsilon1, "upsilon1")?,
            upsilon2: shape(&spec.upsilon2, "upsilon2")?,
            bc_left: spec.bc_left,
            bc_right: spec.bc_right,
            ..p
        })
    }
}

/// Config-file form of a [`Problem`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub interval: [f64; 2],
    #[serde(default)]
    pub potential: Vec<f64>,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub beta: f64,
    #[serde(default)]
    pub gamma1: f64,
    #[serde(default)]
    pub gamma2: f64,
    #[serde(default)]
    pub psi: Option<ShapeSpec>,
    #[serde(default)]
    pub phi: Option<ShapeSpec>,
    #[serde(default)]
    pub upsilon1: Option<ShapeSpec>,
    #[serde(default)]
    pub upsilon2: Option<ShapeSpec>,
    #[serde(default)]
    pub bc_left: BoundaryCondition,
    #[serde(default)]
    pub bc_right: BoundaryCondition,
}
