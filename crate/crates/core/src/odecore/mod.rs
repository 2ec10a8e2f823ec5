//! Linear fourth-order ODE kernel: `u'''' + c(t) u = f(t)` as a first-order system.

pub mod curve;
pub mod engine;
pub(crate) mod family;

use nalgebra::Matrix4;

pub use curve::{Curve, Jet, Piecewise, Side};
pub use engine::Tolerance;
use engine::{run, Options};

use crate::error::{Error, Result};

/// (u, u', u'', u''')
pub type StateVector = [f64; 4];

/// Result of an initial-value integration.
#[derive(Debug, Clone)]
pub struct IvpSolution {
    pub end: StateVector,
    pub curve: Curve,
}

/// Solves `u'''' + coeff·u = 0` from state `y0` at `t0` to `t1`.
pub fn integrate_ivp<C: Fn(f64) -> f64>(
    coeff: C,
    t0: f64,
    t1: f64,
    y0: StateVector,
    tol: Tolerance,
) -> Result<IvpSolution> {
    particular_solution(coeff, |_| 0.0, t0, t1, y0, tol)
}

/// Solves `u'''' + coeff·u = rhs` from state `y0` at `t0` to `t1`.
pub fn particular_solution<C, F>(
    coeff: C,
    rhs: F,
    t0: f64,
    t1: f64,
    y0: StateVector,
    tol: Tolerance,
) -> Result<IvpSolution>
where
    C: Fn(f64) -> f64,
    F: Fn(f64) -> f64,
{
    let opts = Options {
        tol,
        record: true,
        growth_limit: None,
    };
    let r = run(&coeff, &rhs, t0, t1, [y0], &opts)?;
    let end = r.last()[0];
    Ok(IvpSolution {
        end,
        curve: Curve::from_run(&r, &[1.0]),
    })
}

/// Propagator of the homogeneous system between two points.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferMatrix {
    pub m: Matrix4<f64>,
    pub t0: f64,
    pub t1: f64,
}

impl TransferMatrix {
    pub fn apply(&self, y: &StateVector) -> StateVector {
        let v = self.m * nalgebra::Vector4::from_column_slice(y);
        [v[0], v[1], v[2], v[3]]
    }

    /// `later ∘ self`, requiring `later` to start where `self` ends.
    pub fn then(&self, later: &TransferMatrix) -> Result<TransferMatrix> {
        if (later.t0 - self.t1).abs() > 1e-12 * (1.0 + self.t1.abs()) {
            return Err(Error::Domain(format!(
                "cannot compose propagators ending at {} and starting at {}",
                self.t1, later.t0
            )));
        }
        Ok(TransferMatrix {
            m: later.m * self.m,
            t0: self.t0,
            t1: later.t1,
        })
    }

    pub fn det(&self) -> f64 {
        self.m.determinant()
    }
}

/// Column j is the final state of the solution starting from the j-th unit state.
pub fn fundamental_matrix<C: Fn(f64) -> f64>(coeff: C, t0: f64, t1: f64, tol: Tolerance) -> Result<TransferMatrix> {
    let opts = Options {
        tol,
        record: false,
        growth_limit: None,
    };
    let id: [[f64; 4]; 4] = std::array::from_fn(|j| std::array::from_fn(|i| f64::from(i == j)));
    let r = run(&coeff, &|_| 0.0, t0, t1, id, &opts)?;
    let y = r.last();
    Ok(TransferMatrix {
        m: Matrix4::from_fn(|i, j| y[j][i]),
        t0,
        t1,
    })
}

/// Lagrange concomitant `u'''w - u''w' + u'w'' - uw'''`; constant in t when
/// u and w solve the same homogeneous equation.
pub fn concomitant(u: &[f64], w: &[f64]) -> f64 {
    u[3] * w[0] - u[2] * w[1] + u[1] * w[2] - u[0] * w[3]
}
