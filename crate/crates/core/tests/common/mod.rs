//! Independent oracles shared by the integration tests. The oracles never call
//! the library's solvers; only shapes are evaluated through it.

#![allow(dead_code)]

pub mod props;

use nalgebra::DMatrix;
use sbspec_core::ShapeFunction;

/// n-th positive root of cos k · cosh k = 1 (clamped-clamped beam), by bisection.
pub fn clamped_beam_root(n: usize) -> f64 {
    // f = cos k - 1/cosh k has one root in each ((n+½)π - π/2, (n+½)π + π/2)
    let f = |k: f64| k.cos() - 1.0 / k.cosh();
    let c = (n as f64 + 0.5) * std::f64::consts::PI;
    let (mut lo, mut hi) = (c - 1.0, c + 1.0);
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Clamped-clamped eigenvalues (k_n / L)^4 on an interval of length `len`.
pub fn clamped_beam_eigenvalue(n: usize, len: f64) -> f64 {
    (clamped_beam_root(n) / len).powi(4)
}

/// Composite Simpson with `n` panels, Richardson-extrapolated against `2n`.
pub fn simpson_richardson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let simpson = |m: usize| {
        let h = (b - a) / m as f64;
        let mut s = f(a) + f(b);
        for i in 1..m {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
        }
        s * h / 3.0
    };
    let (s1, s2) = (simpson(n), simpson(2 * n));
    (16.0 * s2 - s1) / 15.0
}

/// Classical RK4 on u'''' = -c(t) u with a fixed step; returns the propagator.
pub fn rk4_propagator<C: Fn(f64) -> f64>(c: C, t0: f64, t1: f64, steps: usize) -> DMatrix<f64> {
    let h = (t1 - t0) / steps as f64;
    let mut m = DMatrix::<f64>::identity(4, 4);
    let rhs = |t: f64, y: &[f64; 4]| [y[1], y[2], y[3], -c(t) * y[0]];
    for col in 0..4 {
        let mut y = [0.0; 4];
        y[col] = 1.0;
        let mut t = t0;
        for _ in 0..steps {
            let k1 = rhs(t, &y);
            let y2: [f64; 4] = std::array::from_fn(|i| y[i] + 0.5 * h * k1[i]);
            let k2 = rhs(t + 0.5 * h, &y2);
            let y3: [f64; 4] = std::array::from_fn(|i| y[i] + 0.5 * h * k2[i]);
            let k3 = rhs(t + 0.5 * h, &y3);
            let y4: [f64; 4] = std::array::from_fn(|i| y[i] + h * k3[i]);
            let k4 = rhs(t + h, &y4);
            for i in 0..4 {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            t += h;
        }
        for i in 0..4 {
            m[(i, col)] = y[i];
        }
    }
    m
}

/// Free-free beam on [-1, 1] with N panels: K = h D₂ᵀD₂ (second differences at
/// interior nodes, which yields the free-end stencils), M = trapezoid-weighted Ψ.
/// Resonances are α = -μ for K w = μ M w.
pub struct FreeBeam {
    pub n: usize,
    pub h: f64,
    /// pentadiagonal K, row i holds K[i][i-2..=i+2]
    pub k: Vec<[f64; 5]>,
    pub m: Vec<f64>,
    pub psi_nodes: Vec<f64>,
}

impl FreeBeam {
    pub fn new(psi: &ShapeFunction, n: usize) -> Self {
        let h = 2.0 / n as f64;
        let mut k = vec![[0.0; 5]; n + 1];
        // each interior node j contributes (w_{j-1} - 2w_j + w_{j+1})² / h³
        let c = 1.0 / h.powi(3);
        let stencil = [1.0, -2.0, 1.0];
        for j in 1..n {
            for a in 0..3 {
                for b in 0..3 {
                    let (r, s) = (j + a - 1, j + b - 1);
                    k[r][(s + 2) - r] += c * stencil[a] * stencil[b];
                }
            }
        }
        let m = (0..=n)
            .map(|i| {
                let w = if i == 0 || i == n { 0.5 * h } else { h };
                w * psi.eval(-1.0 + i as f64 * h)
            })
            .collect();
        let psi_nodes = (0..=n).map(|i| psi.eval(-1.0 + i as f64 * h)).collect();
        FreeBeam { n, h, k, m, psi_nodes }
    }

    /// Sign of the determinant of the mixed system w'' = m, m'' = -αΨw with
    /// m(±1) = m'(±1) = 0, unknowns interleaved (w_i, m_i), rows scaled by h².
    /// The mixed form keeps the conditioning at O(N²) instead of O(N⁴).
    pub fn det_sign(&self, alpha: f64) -> f64 {
        let n = self.n;
        let h2 = self.h * self.h;
        let size = 2 * n + 2;
        let mut a = Banded::new(size, 4, 4);
        for i in 0..=n {
            let (rw, rm) = (2 * i, 2 * i + 1);
            if i == 0 || i == n {
                a.set(rw, 2 * i + 1, 1.0);
                let (s, d) = if i == 0 { (0, 1isize) } else { (n, -1) };
                for (t, c) in [(0isize, -3.0), (1, 4.0), (2, -1.0)] {
                    a.set(rm, 2 * (s as isize + d * t) as usize + 1, c);
                }
                continue;
            }
            for (t, c) in [(i - 1, 1.0), (i, -2.0), (i + 1, 1.0)] {
                a.set(rw, 2 * t, c);
                a.set(rm, 2 * t + 1, c);
            }
            a.set(rw, 2 * i + 1, -h2);
            a.set(rm, 2 * i, h2 * alpha * self.psi_nodes[i]);
        }
        a.det_sign()
    }

    /// Sign changes of det(K + αM) on a grid in s = sign(α)|α|^(1/4), refined by bisection.
    pub fn resonances(&self, s_lo: f64, s_hi: f64, step: f64) -> Vec<f64> {
        let to_alpha = |s: f64| s.signum() * s.powi(4);
        let mut roots = Vec::new();
        let segs = [(s_lo, s_hi.min(-0.25)), (s_lo.max(0.25), s_hi)];
        for (lo, hi) in segs {
            if hi <= lo {
                continue;
            }
            let n = ((hi - lo) / step).ceil() as usize;
            let grid: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
            let signs: Vec<f64> = grid.iter().map(|&s| self.det_sign(to_alpha(s))).collect();
            for i in 0..n {
                if signs[i] != signs[i + 1] {
                    roots.push(to_alpha(self.bisect(grid[i], grid[i + 1], signs[i])));
                }
            }
        }
        roots
    }

    /// Root near `alpha` found on a coarser grid; `ds` is the half-width of the
    /// bracket in s = sgn(α)|α|^{1/4}.
    pub fn refine(&self, alpha: f64, ds: f64) -> Option<f64> {
        let s = alpha.signum() * alpha.abs().powf(0.25);
        let to_alpha = |s: f64| s.signum() * s.powi(4);
        let (lo, hi) = (s - ds, s + ds);
        let (sl, sh) = (self.det_sign(to_alpha(lo)), self.det_sign(to_alpha(hi)));
        (sl != sh).then(|| to_alpha(self.bisect(lo, hi, sl)))
    }

    fn bisect(&self, mut a: f64, mut b: f64, sa: f64) -> f64 {
        let to_alpha = |s: f64| s.signum() * s.powi(4);
        while (b - a).abs() > 1e-14 * a.abs().max(b.abs()) {
            let m = 0.5 * (a + b);
            if m == a || m == b {
                break;
            }
            if self.det_sign(to_alpha(m)) == sa {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }

    /// Dense pencil eigenvalues α (complex), through the shift-invert form
    /// (K + σM)⁻¹ M w = ν w, α = 1/ν - σ... with μ = -α.
    pub fn dense_alphas(&self, sigma: f64) -> Vec<(f64, f64)> {
        let n = self.n + 1;
        let mut k = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for d in 0..5 {
                let j = i as isize + d as isize - 2;
                if j >= 0 && (j as usize) < n {
                    k[(i, j as usize)] = self.k[i][d];
                }
            }
        }
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.m.clone()));
        // K w = μ M w  ⇔  (K - σM)⁻¹ M w = (μ - σ)⁻¹ w
        let shifted = &k - &m * sigma;
        let c = shifted.lu().solve(&m).expect("shift is not an eigenvalue");
        c.complex_eigenvalues()
            .iter()
            .filter(|z| z.norm() > 1e-12)
            .map(|z| {
                let mu = sigma + 1.0 / *z;
                (-mu.re, -mu.im)
            })
            .collect()
    }
}

/// Clamped-clamped problem y'''' + U y = λ y on (a, b), mixed (y, m = y'')
/// second-order differences with one-sided clamped slopes.
pub struct ClampedFd {
    pub n: usize,
    pub h: f64,
    pub u: Vec<f64>,
}

impl ClampedFd {
    pub fn new<U: Fn(f64) -> f64>(u: U, a: f64, b: f64, n: usize) -> Self {
        let h = (b - a) / n as f64;
        ClampedFd {
            n,
            h,
            u: (0..=n).map(|i| u(a + i as f64 * h)).collect(),
        }
    }

    pub fn det_sign(&self, lambda: f64) -> f64 {
        let n = self.n;
        let h2 = self.h * self.h;
        let mut a = Banded::new(2 * n + 2, 5, 4);
        // y(a) = 0, y'(a) = 0
        a.set(0, 0, 1.0);
        for (t, c) in [(0, -3.0), (1, 4.0), (2, -1.0)] {
            a.set(1, 2 * t, c);
        }
        for i in 1..n {
            for (t, c) in [(i - 1, 1.0), (i, -2.0), (i + 1, 1.0)] {
                a.set(2 * i, 2 * t, c);
                a.set(2 * i + 1, 2 * t + 1, c);
            }
            a.set(2 * i, 2 * i + 1, -h2);
            a.set(2 * i + 1, 2 * i, -h2 * (lambda - self.u[i]));
        }
        a.set(2 * n, 2 * n, 1.0);
        for (t, c) in [(n, 3.0), (n - 1, -4.0), (n - 2, 1.0)] {
            a.set(2 * n + 1, 2 * t, c);
        }
        a.det_sign()
    }

    /// Sign changes on a grid in k = λ^(1/4) over (0, k_hi], bisected.
    pub fn eigenvalues(&self, k_hi: f64, step: f64) -> Vec<f64> {
        let n = (k_hi / step).ceil() as usize;
        let lam = |k: f64| k.powi(4);
        let grid: Vec<f64> = (1..=n).map(|i| i as f64 * k_hi / n as f64).collect();
        let signs: Vec<f64> = grid.iter().map(|&k| self.det_sign(lam(k))).collect();
        let mut out = Vec::new();
        for i in 0..grid.len() - 1 {
            if signs[i] != signs[i + 1] {
                let (mut lo, mut hi) = (grid[i], grid[i + 1]);
                for _ in 0..80 {
                    let m = 0.5 * (lo + hi);
                    if self.det_sign(lam(m)) == signs[i] {
                        lo = m;
                    } else {
                        hi = m;
                    }
                }
                out.push(lam(0.5 * (lo + hi)));
            }
        }
        out
    }
}

/// Richardson extrapolation of an O(h²) sequence at N, 2N, 4N (last two used,
/// the first one gives the error estimate).
pub fn richardson(v: [f64; 3]) -> (f64, f64) {
    let r1 = (4.0 * v[1] - v[0]) / 3.0;
    let r2 = (4.0 * v[2] - v[1]) / 3.0;
    let r = (16.0 * r2 - r1) / 15.0;
    (r, (r - r2).abs())
}

/// Banded matrix with partial-pivoting LU, only the determinant sign is kept.
pub struct Banded {
    n: usize,
    kl: usize,
    ku: usize,
    rows: Vec<Vec<f64>>,
}

impl Banded {
    pub fn new(n: usize, kl: usize, ku: usize) -> Self {
        Banded {
            n,
            kl,
            ku,
            rows: vec![vec![0.0; 2 * kl + ku + 1]; n],
        }
    }

    fn off(&self, i: usize, j: usize) -> usize {
        j + self.kl - i
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let o = self.off(i, j);
        self.rows[i][o] = v;
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j > i + self.kl + self.ku {
            return 0.0;
        }
        self.rows[i][self.off(i, j)]
    }

    pub fn det_sign(mut self) -> f64 {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let mut sign = 1.0;
        for col in 0..n {
            let last = (col + kl).min(n - 1);
            let p = (col..=last)
                .max_by(|&x, &y| self.get(x, col).abs().total_cmp(&self.get(y, col).abs()))
                .unwrap();
            let piv = self.get(p, col);
            if piv == 0.0 {
                return 0.0;
            }
            let hi = (col + kl + ku).min(n - 1);
            if p != col {
                sign = -sign;
                for j in col..=hi {
                    let (x, y) = (self.get(col, j), self.get(p, j));
                    self.set(col, j, y);
                    self.set(p, j, x);
                }
            }
            if piv < 0.0 {
                sign = -sign;
            }
            for r in (col + 1)..=last {
                let f = self.get(r, col) / piv;
                if f == 0.0 {
                    continue;
                }
                for j in col..=hi {
                    let v = self.get(r, j) - f * self.get(col, j);
                    self.set(r, j, v);
                }
            }
        }
        sign
    }
}
