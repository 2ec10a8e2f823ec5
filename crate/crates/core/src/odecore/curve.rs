//! Sampled solutions with dense output.
//!
//! Every accepted node carries u, u', u'', u''' and u''''; between nodes each
//! derivative is a two-point Hermite interpolant of the node data.

use std::sync::OnceLock;

use super::engine::Run;
use crate::quadrature::gk15;

/// u, u', u'', u''', u'''' at one point.
pub type Jet = [f64; 5];

const FACT: [f64; 10] = [1.0, 1.0, 2.0, 6.0, 24.0, 120.0, 720.0, 5040.0, 40320.0, 362880.0];

fn hermite_inverse(m: usize) -> &'static nalgebra::DMatrix<f64> {
    static INV: OnceLock<Vec<nalgebra::DMatrix<f64>>> = OnceLock::new();
    &INV.get_or_init(|| {
        (1..=5)
            .map(|m| {
                // row q: d^q/ds^q of s^j at s = 1, j = m..2m-1
                let a = nalgebra::DMatrix::<f64>::from_fn(m, m, |q, c| {
                    let j = c + m;
                    FACT[j] / FACT[j - q]
                });
                a.try_inverse().expect("Hermite matrix is invertible")
            })
            .collect()
    })[m - 1]
}

/// Two-point Hermite interpolation of one derivative order: `left`/`right`
/// hold u^(r), ..., u^(4) at the step ends. Returns the `diff`-th t-derivative
/// of the interpolant at fraction `s`.
fn hermite_part(left: &[f64], right: &[f64], h: f64, s: f64, diff: usize) -> f64 {
    let m = left.len();
    let mut a = [0.0; 5];
    let mut rhs = nalgebra::DVector::<f64>::zeros(m);
    let mut hp = 1.0;
    for k in 0..m {
        a[k] = left[k] * hp;
        hp *= h;
    }
    let mut hp = 1.0;
    for q in 0..m {
        let taylor: f64 = (q..m).map(|k| a[k] / FACT[k - q]).sum();
        rhs[q] = right[q] * hp - taylor;
        hp *= h;
    }
    let c = hermite_inverse(m) * rhs;
    let mut v: f64 = (diff..m)
        .map(|k| a[k] * s.powi((k - diff) as i32) / FACT[k - diff])
        .sum();
    for j in m..2 * m {
        if j >= diff {
            v += c[j - m] * FACT[j] / FACT[j - diff] * s.powi((j - diff) as i32);
        }
    }
    v / h.powi(diff as i32)
}

/// Jet at fraction `s` of a step of length `h` from `left` to `right`. Each
/// order r <= 3 interpolates the data of orders r..4 directly, so roundoff is
/// not amplified by powers of 1/h; the fourth derivative is the second
/// derivative of the quintic interpolant of u''.
fn hermite(left: &Jet, right: &Jet, h: f64, s: f64) -> Jet {
    let mut out = [0.0; 5];
    for r in 0..4 {
        out[r] = hermite_part(&left[r..], &right[r..], h, s, 0);
    }
    out[4] = hermite_part(&left[2..], &right[2..], h, s, 2);
    out
}

/// One smooth piece of a solution on `[t_min, t_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    t: Vec<f64>,
    d: Vec<Jet>,
}

impl Curve {
    pub fn new(t: Vec<f64>, d: Vec<Jet>) -> Self {
        assert_eq!(t.len(), d.len());
        assert!(t.len() >= 2, "a curve needs at least two nodes");
        let mut c = Curve { t, d };
        if c.t[0] > c.t[c.t.len() - 1] {
            c.t.reverse();
            c.d.reverse();
        }
        c
    }

    /// Combination `Σ coef[k] · column k` of a recorded run.
    pub fn from_run<const K: usize>(run: &Run<K>, coef: &[f64; K]) -> Self {
        let d = run
            .y
            .iter()
            .zip(&run.d4)
            .map(|(y, d4)| {
                let mut j = [0.0; 5];
                for k in 0..K {
                    for i in 0..4 {
                        j[i] += coef[k] * y[k][i];
                    }
                    j[4] += coef[k] * d4[k];
                }
                j
            })
            .collect();
        Curve::new(run.t.clone(), d)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.t
    }

    pub fn jets(&self) -> &[Jet] {
        &self.d
    }

    pub fn t_min(&self) -> f64 {
        self.t[0]
    }

    pub fn t_max(&self) -> f64 {
        self.t[self.t.len() - 1]
    }

    pub fn first(&self) -> Jet {
        self.d[0]
    }

    pub fn last(&self) -> Jet {
        self.d[self.d.len() - 1]
    }

    fn interval(&self, t: f64) -> usize {
        let n = self.t.len();
        match self.t.binary_search_by(|p| p.total_cmp(&t)) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.clamp(1, n - 1) - 1,
        }
    }

    /// Jet at `t`; points slightly outside the range use the edge step.
    pub fn eval(&self, t: f64) -> Jet {
        let i = self.interval(t);
        if t == self.t[i] {
            return self.d[i];
        }
        if t == self.t[i + 1] {
            return self.d[i + 1];
        }
        let h = self.t[i + 1] - self.t[i];
        hermite(&self.d[i], &self.d[i + 1], h, (t - self.t[i]) / h)
    }

    pub fn value(&self, t: f64) -> f64 {
        self.eval(t)[0]
    }

    /// Change of variables `x = t_scale · t`, values multiplied by `value_scale`.
    pub fn rescaled(&self, t_scale: f64, value_scale: f64) -> Self {
        assert!(t_scale > 0.0);
        let t = self.t.iter().map(|t| t * t_scale).collect();
        let d = self
            .d
            .iter()
            .map(|j| {
                let mut out = [0.0; 5];
                let mut f = value_scale;
                for k in 0..5 {
                    out[k] = j[k] * f;
                    f /= t_scale;
                }
                out
            })
            .collect();
        Curve { t, d }
    }

    /// The reflected curve `t ↦ u(-t)`.
    pub fn reflected(&self) -> Self {
        let t = self.t.iter().rev().map(|t| -t).collect();
        let d = self.d.iter().rev().map(|j| [j[0], -j[1], j[2], -j[3], j[4]]).collect();
        Curve { t, d }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Curve {
            t: self.t.clone(),
            d: self.d.iter().map(|j| j.map(|v| v * s)).collect(),
        }
    }

    /// `self + s·other`, evaluating `other` at this curve's nodes.
    pub fn add_scaled(&self, other: &Curve, s: f64) -> Self {
        let d = self
            .t
            .iter()
            .zip(&self.d)
            .map(|(&t, j)| {
                let o = other.eval(t);
                std::array::from_fn(|k| j[k] + s * o[k])
            })
            .collect();
        Curve { t: self.t.clone(), d }
    }

    /// Joins curves that share end points, in increasing order.
    pub fn concat(pieces: Vec<Curve>) -> Self {
        let mut pieces = pieces;
        pieces.sort_by(|a, b| a.t_min().total_cmp(&b.t_min()));
        let mut t = Vec::new();
        let mut d = Vec::new();
        for p in pieces {
            let skip = usize::from(t.last() == Some(&p.t[0]));
            t.extend_from_slice(&p.t[skip..]);
            d.extend_from_slice(&p.d[skip..]);
        }
        Curve::new(t, d)
    }

    /// ∫ g(t, jet(t)) dt over the curve's range, one 15-point panel per step.
    pub fn integrate<G: Fn(f64, &Jet) -> f64>(&self, g: G) -> f64 {
        let mut total = 0.0;
        for i in 0..self.t.len() - 1 {
            let (l, r) = (self.t[i], self.t[i + 1]);
            let h = r - l;
            let f = |x: f64| g(x, &hermite(&self.d[i], &self.d[i + 1], h, (x - l) / h));
            total += gk15(&f, l, r).0;
        }
        total
    }
}

/// Which one-sided limit to take at a break point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// A function made of contiguous curves, possibly discontinuous at the joins.
#[derive(Debug, Clone, PartialEq)]
pub struct Piecewise {
    pub pieces: Vec<Curve>,
}

impl Piecewise {
    pub fn new(mut pieces: Vec<Curve>) -> Self {
        pieces.sort_by(|a, b| a.t_min().total_cmp(&b.t_min()));
        Piecewise { pieces }
    }

    pub fn t_min(&self) -> f64 {
        self.pieces[0].t_min()
    }

    pub fn t_max(&self) -> f64 {
        self.pieces[self.pieces.len() - 1].t_max()
    }

    pub fn breaks(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.pieces.iter().map(|p| p.t_min()).collect();
        b.push(self.t_max());
        b
    }

    fn piece_index(&self, x: f64, side: Side) -> usize {
        let n = self.pieces.len();
        for (i, p) in self.pieces.iter().enumerate() {
            let inside = match side {
                Side::Left => x <= p.t_max(),
                Side::Right => x < p.t_max(),
            };
            if inside {
                return i;
            }
        }
        n - 1
    }

    pub fn eval_side(&self, x: f64, side: Side) -> Jet {
        self.pieces[self.piece_index(x, side)].eval(x)
    }

    pub fn eval(&self, x: f64) -> Jet {
        self.eval_side(x, Side::Left)
    }

    pub fn value(&self, x: f64) -> f64 {
        self.eval(x)[0]
    }

    pub fn scaled(&self, s: f64) -> Self {
        Piecewise {
            pieces: self.pieces.iter().map(|p| p.scaled(s)).collect(),
        }
    }

    /// ∫ g(x, self(x), other(x)) over the common support; panels follow the
    /// union of both node sets so the integrand is polynomial on each.
    pub fn integrate_with<G: Fn(f64, &Jet, &Jet) -> f64>(&self, other: &Piecewise, g: G) -> f64 {
        let lo = self.t_min().max(other.t_min());
        let hi = self.t_max().min(other.t_max());
        if hi <= lo {
            return 0.0;
        }
        let mut nodes: Vec<f64> = self
            .pieces
            .iter()
            .chain(other.pieces.iter())
            .flat_map(|p| p.nodes().iter().copied())
            .filter(|&t| t >= lo && t <= hi)
            .collect();
        nodes.push(lo);
        nodes.push(hi);
        nodes.sort_by(f64::total_cmp);
        nodes.dedup();
        let mut total = 0.0;
        for w in nodes.windows(2) {
            let (l, r) = (w[0], w[1]);
            if r - l <= 0.0 {
                continue;
            }
            let mid = 0.5 * (l + r);
            let ia = self.piece_index(mid, Side::Right);
            let ib = other.piece_index(mid, Side::Right);
            let f = |x: f64| g(x, &self.pieces[ia].eval(x), &other.pieces[ib].eval(x));
            total += gk15(&f, l, r).0;
        }
        total
    }

    pub fn inner(&self, other: &Piecewise) -> f64 {
        self.integrate_with(other, |_, a, b| a[0] * b[0])
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    /// ∫ g(x, self(x)) over the support.
    pub fn integrate<G: Fn(f64, &Jet) -> f64>(&self, g: G) -> f64 {
        self.pieces.iter().map(|p| p.integrate(&g)).sum()
    }

    /// `self + s·other` on this function's nodes.
    pub fn add_scaled(&self, other: &Piecewise, s: f64) -> Self {
        let pieces = self
            .pieces
            .iter()
            .map(|p| {
                let d = p
                    .nodes()
                    .iter()
                    .zip(p.jets())
                    .enumerate()
                    .map(|(k, (&t, j))| {
                        // one-sided at piece ends so jumps are preserved
                        let side = if k == 0 { Side::Right } else { Side::Left };
                        let o = other.eval_side(t, side);
                        std::array::from_fn(|i| j[i] + s * o[i])
                    })
                    .collect();
                Curve::new(p.nodes().to_vec(), d)
            })
            .collect();
        Piecewise { pieces }
    }

    /// Uniform samples `(x, u(x))` for output.
    pub fn sample(&self, n: usize) -> Vec<(f64, f64)> {
        let (lo, hi) = (self.t_min(), self.t_max());
        (0..n)
            .map(|i| {
                let x = lo + (hi - lo) * i as f64 / (n.max(2) - 1) as f64;
                (x, self.value(x))
            })
            .collect()
    }
}
