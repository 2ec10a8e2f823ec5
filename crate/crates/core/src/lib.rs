//! Spectra of fourth-order operators `d⁴/dx⁴ + U(x)` with squeezed perturbations
//! `αε⁻⁴Ψ(x/ε) + βε⁻³Φ(x/ε) + γ₁ε⁻²Υ₁(x/ε) + γ₂ε⁻¹Υ₂(x/ε)`.

pub mod asymptotics;
pub mod error;
pub mod harness;
pub mod limit;
pub mod odecore;
pub mod perturbed;
pub mod poly;
pub mod problem;
pub mod quadrature;
pub mod resonance;
pub mod roots;
pub mod shapes;

pub use error::{Error, Result};
pub use problem::{BoundaryCondition, Problem, ProblemSpec};
pub use shapes::{is_delta_like, make_bump_shape, moment, MomentVector, ShapeFunction};
