//! Dormand–Prince 5(4) for `u'''' = f(t) - c(t) u`, integrated on K state columns at once.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth minus fourth order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const MAX_STEPS: usize = 2_000_000;

/// Error tolerances: each state column is controlled relative to its own size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            rtol: 1e-10,
            atol: 1e-12,
        }
    }
}

impl Tolerance {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Tolerance { rtol, atol }
    }

    /// The tighter setting used by the shooting solvers.
    pub fn shooting() -> Self {
        Tolerance {
            rtol: 1e-12,
            atol: 1e-15,
        }
    }
}

pub type Cols<const K: usize> = [[f64; 4]; K];

/// Accepted nodes of one integration. `d4[i][k]` is u'''' of column k at `t[i]`.
#[derive(Debug, Clone)]
pub struct Run<const K: usize> {
    pub t: Vec<f64>,
    pub y: Vec<Cols<K>>,
    pub d4: Vec<[f64; K]>,
}

impl<const K: usize> Run<K> {
    pub fn last(&self) -> &Cols<K> {
        self.y.last().expect("run has at least one node")
    }

    pub fn t_end(&self) -> f64 {
        *self.t.last().expect("run has at least one node")
    }
}

pub struct Options {
    pub tol: Tolerance,
    /// Keep every accepted node (needed for dense output).
    pub record: bool,
    /// Stop early once the largest column norm has grown by this factor.
    pub growth_limit: Option<f64>,
}

#[inline]
fn deriv<const K: usize>(y: &Cols<K>, c: f64, f: f64) -> Cols<K> {
    let mut d = [[0.0; 4]; K];
    for k in 0..K {
        d[k] = [y[k][1], y[k][2], y[k][3], f - c * y[k][0]];
    }
    d
}

#[inline]
fn axpy<const K: usize>(y: &Cols<K>, h: f64, terms: &[(f64, &Cols<K>)]) -> Cols<K> {
    let mut out = *y;
    for (w, d) in terms {
        let hw = h * w;
        for k in 0..K {
            for i in 0..4 {
                out[k][i] += hw * d[k][i];
            }
        }
    }
    out
}

fn col_max<const K: usize>(y: &Cols<K>) -> [f64; K] {
    let mut m = [0.0; K];
    for k in 0..K {
        m[k] = y[k].iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    }
    m
}

/// Integrates from `t0` towards `t1` (either direction).
pub fn run<const K: usize, C, F>(coeff: &C, rhs: &F, t0: f64, t1: f64, y0: Cols<K>, opts: &Options) -> Result<Run<K>>
where
    C: Fn(f64) -> f64,
    F: Fn(f64) -> f64,
{
    if !(t0.is_finite() && t1.is_finite()) || t0 == t1 {
        return Err(Error::Domain(format!("integration interval [{t0}, {t1}] is empty")));
    }
    let dir = (t1 - t0).signum();
    let span = (t1 - t0).abs();
    let Tolerance { rtol, atol } = opts.tol;

    let c0 = coeff(t0);
    let f0 = rhs(t0);
    if !(c0.is_finite() && f0.is_finite()) {
        return Err(Error::IntegrationFailure {
            at: t0,
            reason: "non-finite coefficient".into(),
        });
    }
    // initial step from the local oscillation scale |c|^(1/4)
    let mut h = (0.05 / (1.0 + c0.abs()).powf(0.25)).min(span) * dir;
    let start_norm = col_max(&y0)
        .iter()
        .fold(0.0_f64, |a, &v| a.max(v))
        .max(f64::MIN_POSITIVE);

    let mut t = t0;
    let mut y = y0;
    let mut k1 = deriv(&y, c0, f0);
    let mut out = Run {
        t: vec![t0],
        y: vec![y0],
        d4: vec![std::array::from_fn(|k| k1[k][3])],
    };
    let mut steps = 0usize;
    loop {
        if (t1 - t) * dir <= 0.0 {
            break;
        }
        steps += 1;
        if steps > MAX_STEPS {
            return Err(Error::IntegrationFailure {
                at: t,
                reason: "step budget exhausted".into(),
            });
        }
        let mut last = false;
        let rem = (t1 - t) * dir;
        if h.abs() >= rem {
            h = t1 - t;
            last = true;
        } else if h.abs() > 0.5 * rem {
            // two equal steps instead of a sliver at the end
            h = 0.5 * (t1 - t);
        }
        let ev = |s: f64| {
            let ts = t + s * h;
            (coeff(ts), rhs(ts))
        };
        let (c2, f2) = ev(C2);
        let k2 = deriv(&axpy(&y, h, &[(A21, &k1)]), c2, f2);
        let (c3, f3) = ev(C3);
        let k3 = deriv(&axpy(&y, h, &[(A31, &k1), (A32, &k2)]), c3, f3);
        let (c4, f4) = ev(C4);
        let k4 = deriv(&axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]), c4, f4);
        let (c5, f5) = ev(C5);
        let k5 = deriv(&axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]), c5, f5);
        let (c6, f6) = ev(1.0);
        let k6 = deriv(
            &axpy(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
            c6,
            f6,
        );
        let ynew = axpy(&y, h, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
        let tnew = if last { t1 } else { t + h };
        let (c7, f7) = (coeff(tnew), rhs(tnew));
        if !(c7.is_finite() && f7.is_finite()) {
            return Err(Error::IntegrationFailure {
                at: tnew,
                reason: "non-finite coefficient".into(),
            });
        }
        let k7 = deriv(&ynew, c7, f7);

        let m_old = col_max(&y);
        let m_new = col_max(&ynew);
        let mut acc = 0.0;
        for k in 0..K {
            let sc = atol + rtol * m_old[k].max(m_new[k]);
            for i in 0..4 {
                let e =
                    h * (E1 * k1[k][i] + E3 * k3[k][i] + E4 * k4[k][i] + E5 * k5[k][i] + E6 * k6[k][i] + E7 * k7[k][i]);
                acc += (e / sc).powi(2);
            }
        }
        let err = (acc / (4 * K) as f64).sqrt();
        if !err.is_finite() {
            h *= 0.2;
            if h.abs() <= 1e-14 * (1.0 + t.abs()) {
                return Err(Error::IntegrationFailure {
                    at: t,
                    reason: "non-finite state".into(),
                });
            }
            continue;
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        if err <= 1.0 {
            t = tnew;
            y = ynew;
            k1 = k7;
            if opts.record {
                out.t.push(t);
                out.y.push(y);
                out.d4.push(std::array::from_fn(|k| k1[k][3]));
            }
            h *= factor.min(if last { 1.0 } else { 5.0 });
            if let Some(g) = opts.growth_limit {
                let n = col_max(&y).iter().fold(0.0_f64, |a, &v| a.max(v));
                if n > g * start_norm {
                    break;
                }
            }
        } else {
            h *= factor.min(1.0);
            if h.abs() <= 1e-14 * (1.0 + t.abs()) {
                return Err(Error::IntegrationFailure {
                    at: t,
                    reason: "step size underflow".into(),
                });
            }
        }
    }
    if !opts.record {
        out.t.push(t);
        out.y.push(y);
        out.d4.push(std::array::from_fn(|k| k1[k][3]));
    }
    Ok(out)
}
