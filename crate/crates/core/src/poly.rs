use serde::{Deserialize, Serialize};

/// Dense real polynomial, coefficients in increasing degree.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Poly(pub Vec<f64>);

impl Poly {
    pub fn new(coeffs: &[f64]) -> Self {
        let mut p = Poly(coeffs.to_vec());
        p.trim();
        p
    }

    pub fn zero() -> Self {
        Poly(Vec::new())
    }

    fn trim(&mut self) {
        while matches!(self.0.last(), Some(&c) if c == 0.0) {
            self.0.pop();
        }
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    /// Value and first `n` derivatives at `x`.
    pub fn eval_derivs<const N: usize>(&self, x: f64) -> [f64; N] {
        let mut out = [0.0; N];
        let mut p = self.clone();
        for o in out.iter_mut() {
            *o = p.eval(x);
            p = p.derivative();
        }
        out
    }

    pub fn derivative(&self) -> Poly {
        if self.0.len() <= 1 {
            return Poly::zero();
        }
        Poly(self.0.iter().enumerate().skip(1).map(|(k, &c)| k as f64 * c).collect())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        if self.0.is_empty() || other.0.is_empty() {
            return Poly::zero();
        }
        let mut out = vec![0.0; self.0.len() + other.0.len() - 1];
        for (i, &a) in self.0.iter().enumerate() {
            for (j, &b) in other.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        let mut p = Poly(out);
        p.trim();
        p
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.0.len().max(other.0.len());
        let mut out = vec![0.0; n];
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.0.get(k).copied().unwrap_or(0.0) + other.0.get(k).copied().unwrap_or(0.0);
        }
        let mut p = Poly(out);
        p.trim();
        p
    }

    pub fn scale(&self, s: f64) -> Poly {
        let mut p = Poly(self.0.iter().map(|c| c * s).collect());
        p.trim();
        p
    }

    /// p(-x)
    pub fn reflect(&self) -> Poly {
        Poly(
            self.0
                .iter()
                .enumerate()
                .map(|(k, &c)| if k % 2 == 1 { -c } else { c })
                .collect(),
        )
    }
}
