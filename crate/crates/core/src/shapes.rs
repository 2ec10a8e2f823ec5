//! Compactly supported regularization profiles on (-1, 1).
//!
//! Every profile is `d^m/dξ^m [p(ξ) b(ξ)]` with `p` a polynomial and
//! `b(ξ) = exp(-1/(1-ξ²))` the standard bump. Derivatives of any order stay in
//! closed form: `f^(n) = P_n(ξ) (1-ξ²)^(-2n) b(ξ)` with
//! `P_{n+1} = (1-ξ²)² P_n' + (4nξ(1-ξ²) - 2ξ) P_n`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::Poly;
use crate::quadrature;

/// Absolute tolerance requested from the quadrature for moments.
pub const MOMENT_TOL: f64 = 1e-12;
/// Default tolerance for delta-like classification.
pub const DELTA_LIKE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShapeFamily {
    #[serde(rename = "bump-poly")]
    BumpPoly,
}

/// Config-file form of a shape: `{family = "bump-poly", coefficients = [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeSpec {
    pub family: ShapeFamily,
    pub coefficients: Vec<f64>,
    /// Number of ξ-derivatives applied to `p·b` (0 for the plain family).
    #[serde(default)]
    pub derivative: u32,
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeFunction {
    family: ShapeFamily,
    coefficients: Vec<f64>,
    derivative: u32,
    scale: f64,
    // numerators P_m, P_{m+1}, P_{m+2}
    numerators: [Poly; 3],
}

/// The standard bump `exp(-1/(1-ξ²))`, zero for `|ξ| >= 1`.
pub fn bump(xi: f64) -> f64 {
    let q = 1.0 - xi * xi;
    if q <= 0.0 {
        0.0
    } else {
        (-1.0 / q).exp()
    }
}

fn next_numerator(p: &Poly, n: u32) -> Poly {
    let q = Poly::new(&[1.0, 0.0, -1.0]);
    let q2 = q.mul(&q);
    let n = n as f64;
    // 4nξ(1-ξ²) - 2ξ
    let lin = Poly::new(&[0.0, 4.0 * n - 2.0, 0.0, -4.0 * n]);
    q2.mul(&p.derivative()).add(&lin.mul(p))
}

/// Builds `p(ξ)·b(ξ)` from the polynomial coefficients of `p`.
pub fn make_bump_shape(coefficients: &[f64]) -> Result<ShapeFunction> {
    ShapeFunction::bump_poly(coefficients, 0, 1.0)
}

impl ShapeFunction {
    pub fn bump_poly(coefficients: &[f64], derivative: u32, scale: f64) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::InvalidShape("empty coefficient list".into()));
        }
        if coefficients.iter().any(|c| !c.is_finite()) || !scale.is_finite() {
            return Err(Error::InvalidShape("non-finite coefficient".into()));
        }
        let p = Poly::new(coefficients);
        if p.is_zero() || scale == 0.0 {
            return Err(Error::InvalidShape("zero polynomial has empty support".into()));
        }
        Ok(Self::build(coefficients.to_vec(), derivative, scale))
    }

    /// The identically zero profile, used for absent coupling shapes.
    pub fn zero() -> Self {
        Self::build(vec![0.0], 0, 0.0)
    }

    fn build(coefficients: Vec<f64>, derivative: u32, scale: f64) -> Self {
        let mut p = Poly::new(&coefficients);
        for n in 0..derivative {
            p = next_numerator(&p, n);
        }
        let p1 = next_numerator(&p, derivative);
        let p2 = next_numerator(&p1, derivative + 1);
        ShapeFunction {
            family: ShapeFamily::BumpPoly,
            coefficients,
            derivative,
            scale,
            numerators: [p, p1, p2],
        }
    }

    pub fn from_spec(spec: &ShapeSpec) -> Result<Self> {
        match spec.family {
            ShapeFamily::BumpPoly => Self::bump_poly(&spec.coefficients, spec.derivative, spec.scale),
        }
    }

    pub fn spec(&self) -> ShapeSpec {
        ShapeSpec {
            family: self.family,
            coefficients: self.coefficients.clone(),
            derivative: self.derivative,
            scale: self.scale,
        }
    }

    pub fn family(&self) -> ShapeFamily {
        self.family
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn is_zero(&self) -> bool {
        self.scale == 0.0 || self.numerators[0].is_zero()
    }

    /// Derivative of order `order` (0, 1 or 2) at `xi`.
    pub fn eval_deriv(&self, xi: f64, order: usize) -> f64 {
        assert!(order <= 2, "derivative evaluator supports orders 0..=2");
        if self.scale == 0.0 {
            return 0.0;
        }
        let q = 1.0 - xi * xi;
        if q <= 0.0 {
            return 0.0;
        }
        let b = (-1.0 / q).exp();
        if b == 0.0 {
            return 0.0;
        }
        let n = self.derivative as i32 + order as i32;
        self.scale * self.numerators[order].eval(xi) * b / q.powi(2 * n)
    }

    pub fn eval(&self, xi: f64) -> f64 {
        self.eval_deriv(xi, 0)
    }

    /// `d/dξ` of this profile, still in the family.
    pub fn differentiate(&self) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        Self::build(self.coefficients.clone(), self.derivative + 1, self.scale)
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.scale *= s;
        out
    }

    /// `ξ ↦ f(-ξ)`.
    pub fn reflected(&self) -> Self {
        // (D^m g)(-ξ) = (-1)^m D^m[g(-·)](ξ)
        let c = Poly::new(&self.coefficients).reflect().0;
        let sign = if self.derivative.is_multiple_of(2) { 1.0 } else { -1.0 };
        let c = if c.is_empty() { vec![0.0] } else { c };
        Self::build(c, self.derivative, self.scale * sign)
    }

    /// `(1-s)·self + s·other` for profiles with the same derivative order.
    pub fn blend(&self, other: &Self, s: f64) -> Result<Self> {
        if self.derivative != other.derivative {
            return Err(Error::InvalidShape(
                "cannot blend profiles with different derivative orders".into(),
            ));
        }
        let a = Poly::new(&self.coefficients).scale((1.0 - s) * self.scale);
        let b = Poly::new(&other.coefficients).scale(s * other.scale);
        let c = a.add(&b);
        if c.is_zero() {
            return Ok(Self::zero());
        }
        Ok(Self::build(c.0, self.derivative, 1.0))
    }

    /// Grid estimate of `max |f|` on [-1, 1].
    pub fn sup_norm(&self) -> f64 {
        (0..=4000)
            .map(|i| self.eval(-1.0 + i as f64 * 5e-4).abs())
            .fold(0.0, f64::max)
    }

    /// Grid estimate of `(min f, max f)` on [-1, 1].
    pub fn range(&self) -> (f64, f64) {
        (0..=4000)
            .map(|i| self.eval(-1.0 + i as f64 * 5e-4))
            .fold((0.0_f64, 0.0_f64), |(lo, hi), v| (lo.min(v), hi.max(v)))
    }

    pub fn changes_sign(&self) -> bool {
        let (lo, hi) = self.range();
        let s = self.sup_norm();
        lo < -1e-12 * s && hi > 1e-12 * s
    }

    /// Integral of `g(ξ)·f(ξ)` over the support.
    pub fn integrate_against<G: Fn(f64) -> f64>(&self, g: G, abs_tol: f64) -> Result<f64> {
        if self.is_zero() {
            return Ok(0.0);
        }
        quadrature::integrate_with_breaks(|x| g(x) * self.eval(x), &[-1.0, 0.0, 1.0], abs_tol).map(|r| r.value)
    }
}

/// Moments `⟨f⟩_0 … ⟨f⟩_K`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentVector {
    pub values: Vec<f64>,
}

impl MomentVector {
    pub fn max_order(&self) -> usize {
        self.values.len().saturating_sub(1)
    }
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

/// `⟨f⟩_k = (k!)⁻¹ ∫ ξ^k f(ξ) dξ`.
pub fn moment(f: &ShapeFunction, k: u32) -> Result<f64> {
    moment_with_tol(f, k, MOMENT_TOL)
}

pub fn moment_with_tol(f: &ShapeFunction, k: u32, abs_tol: f64) -> Result<f64> {
    Ok(f.integrate_against(|x| x.powi(k as i32), abs_tol)? / factorial(k))
}

pub fn moments(f: &ShapeFunction, max_order: u32) -> Result<MomentVector> {
    let values = (0..=max_order).map(|k| moment(f, k)).collect::<Result<Vec<_>>>()?;
    Ok(MomentVector { values })
}

/// δ⁽ⁿ⁾-like test: `⟨f⟩_j ≈ 0` for `j < n` and `⟨f⟩_n ≈ (-1)^n`.
pub fn is_delta_like(f: &ShapeFunction, n: u32, tol: f64) -> Result<(bool, MomentVector)> {
    let mv = moments(f, n)?;
    let target = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    let ok = mv.values[..n as usize].iter().all(|m| m.abs() <= tol) && (mv.values[n as usize] - target).abs() <= tol;
    Ok((ok, mv))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_bump_values() {
        let b = make_bump_shape(&[1.0]).unwrap();
        assert!((b.eval(0.0) - (-1.0_f64).exp()).abs() < 1e-15);
        assert_eq!(b.eval(1.0), 0.0);
        assert_eq!(b.eval(-1.0), 0.0);
        assert_eq!(b.eval(1.5), 0.0);
        let odd = make_bump_shape(&[0.0, 1.0]).unwrap();
        assert_eq!(odd.eval(0.0), 0.0);
        let s = make_bump_shape(&[1.0, 1.0]).unwrap();
        assert!((s.eval(0.5) - 1.5 * (-4.0_f64 / 3.0).exp()).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_coefficients() {
        assert!(matches!(make_bump_shape(&[]), Err(Error::InvalidShape(_))));
        assert!(matches!(make_bump_shape(&[0.0, 0.0]), Err(Error::InvalidShape(_))));
        assert!(matches!(make_bump_shape(&[1.0, f64::NAN]), Err(Error::InvalidShape(_))));
        assert!(matches!(make_bump_shape(&[f64::INFINITY]), Err(Error::InvalidShape(_))));
    }

    #[test]
    fn derivative_evaluators_match_finite_differences() {
        let f = make_bump_shape(&[0.3, -1.0, 2.0]).unwrap();
        let g = f.differentiate();
        let h = 1e-5;
        for &x in &[-0.9, -0.5, -0.1, 0.0, 0.2, 0.7, 0.95] {
            for (shape, name) in [(&f, "f"), (&g, "f'")] {
                let d1 = (shape.eval(x + h) - shape.eval(x - h)) / (2.0 * h);
                let d2 = (shape.eval(x + h) - 2.0 * shape.eval(x) + shape.eval(x - h)) / (h * h);
                assert!((d1 - shape.eval_deriv(x, 1)).abs() < 1e-6, "{name} d1 at {x}");
                assert!((d2 - shape.eval_deriv(x, 2)).abs() < 1e-4, "{name} d2 at {x}");
            }
            assert!((g.eval(x) - f.eval_deriv(x, 1)).abs() < 1e-14);
        }
    }

    #[test]
    fn reflection_flips_odd_part() {
        let f = make_bump_shape(&[0.3, -1.0, 2.0]).unwrap().differentiate();
        let r = f.reflected();
        for &x in &[-0.8, -0.3, 0.1, 0.6] {
            assert!((r.eval(x) - f.eval(-x)).abs() < 1e-14);
        }
    }

    #[test]
    fn parity_moments_vanish() {
        let odd = make_bump_shape(&[0.0, 1.0]).unwrap();
        let even = make_bump_shape(&[1.0]).unwrap();
        assert!(moment(&odd, 0).unwrap().abs() < 1e-10);
        assert!(moment(&even, 1).unwrap().abs() < 1e-10);
    }

    #[test]
    fn zero_shape_is_inert() {
        let z = ShapeFunction::zero();
        assert!(z.is_zero());
        assert_eq!(z.eval(0.3), 0.0);
        assert_eq!(moment(&z, 2).unwrap(), 0.0);
        assert!(!z.changes_sign());
    }

    #[test]
    fn sign_change_detection() {
        assert!(make_bump_shape(&[0.0, 1.0]).unwrap().changes_sign());
        assert!(!make_bump_shape(&[1.0]).unwrap().changes_sign());
    }

    #[test]
    fn spec_round_trip() {
        let f = ShapeFunction::bump_poly(&[1.0, 2.0], 1, 0.5).unwrap();
        let g = ShapeFunction::from_spec(&f.spec()).unwrap();
        assert_eq!(f, g);
        let parsed: ShapeSpec = toml::from_str("family = \"bump-poly\"\ncoefficients = [1.0]").unwrap();
        assert_eq!(parsed.derivative, 0);
        assert_eq!(parsed.scale, 1.0);
    }
}
