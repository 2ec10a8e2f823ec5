//! Bracketing, Brent refinement and grid scans for real functions that may fail.

use rayon::prelude::*;

use crate::error::{Error, Result};

const MAX_ITER: usize = 200;

/// Brent's method on a bracket with `fa·fb <= 0`.
pub fn brent<F>(f: &F, mut a: f64, mut b: f64, mut fa: f64, mut fb: f64, xtol: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::NotFound(format!("[{a}, {b}] is not a bracket")));
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..MAX_ITER {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol * m.signum() };
        fb = f(b)?;
    }
    Ok(b)
}

/// Golden-section search for a local minimum of `|f|` inside `[a, b]`.
/// Returns the last two probes `(x, f(x))`; stops early when their signs differ.
pub fn golden_min_abs<F>(f: &F, mut a: f64, mut b: f64, xtol: f64) -> Result<[(f64, f64); 2]>
where
    F: Fn(f64) -> Result<f64>,
{
    let g = 0.5 * (5.0_f64.sqrt() - 1.0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    for _ in 0..MAX_ITER {
        if f1.signum() != f2.signum() || b - a <= xtol {
            break;
        }
        if f1.abs() < f2.abs() {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2)?;
        }
    }
    Ok(if f1.abs() < f2.abs() {
        [(x1, f1), (x2, f2)]
    } else {
        [(x2, f2), (x1, f1)]
    })
}

/// A root located by [`scan`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRoot {
    pub x: f64,
    /// 1 for a sign change, 2 for a touching zero of `f`.
    pub multiplicity: usize,
    /// `|f|` at the reported point relative to the neighbouring grid values.
    pub relative_residual: f64,
}

/// Scan settings.
#[derive(Debug, Clone, Copy)]
pub struct ScanOptions {
    pub xtol: f64,
    /// A local minimum of `|f|` below this fraction of its neighbours counts as a double zero.
    pub touch_ratio: f64,
}

/// Finds roots of `f` on a sorted grid: sign changes refined by Brent, and
/// local minima of `|f|` examined for hidden pairs or touching zeros.
pub fn scan<F>(f: &F, grid: &[f64], opts: ScanOptions) -> Result<Vec<ScanRoot>>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let vals: Vec<f64> = grid.par_iter().map(|&x| f(x)).collect::<Result<Vec<_>>>()?;
    let n = grid.len();
    let mut roots = Vec::new();
    for i in 0..n.saturating_sub(1) {
        let (a, b, fa, fb) = (grid[i], grid[i + 1], vals[i], vals[i + 1]);
        if fa == 0.0 {
            roots.push(ScanRoot {
                x: a,
                multiplicity: 1,
                relative_residual: 0.0,
            });
            continue;
        }
        if fa.signum() != fb.signum() && fb != 0.0 {
            let x = brent(f, a, b, fa, fb, opts.xtol)?;
            roots.push(ScanRoot {
                x,
                multiplicity: 1,
                relative_residual: 0.0,
            });
        }
    }
    if n > 0 && vals[n - 1] == 0.0 {
        roots.push(ScanRoot {
            x: grid[n - 1],
            multiplicity: 1,
            relative_residual: 0.0,
        });
    }
    // interior minima of |f| without a sign change on either side
    let candidates: Vec<usize> = (1..n.saturating_sub(1))
        .filter(|&i| {
            vals[i].abs() < vals[i - 1].abs()
                && vals[i].abs() < vals[i + 1].abs()
                && vals[i].signum() == vals[i - 1].signum()
                && vals[i].signum() == vals[i + 1].signum()
        })
        .collect();
    let extra: Vec<Vec<ScanRoot>> = candidates
        .par_iter()
        .map(|&i| -> Result<Vec<ScanRoot>> {
            let (l, r) = (grid[i - 1], grid[i + 1]);
            let scale = vals[i - 1].abs().max(vals[i + 1].abs());
            let probes = golden_min_abs(f, l, r, opts.xtol)?;
            let (xm, fm) = probes
                .iter()
                .copied()
                .find(|p| p.1.signum() != vals[i].signum())
                .unwrap_or(probes[0]);
            if fm.signum() != vals[i].signum() || fm == 0.0 {
                if fm == 0.0 {
                    return Ok(vec![ScanRoot {
                        x: xm,
                        multiplicity: 2,
                        relative_residual: 0.0,
                    }]);
                }
                let fl = f(l)?;
                let fr = f(r)?;
                let x1 = brent(f, l, xm, fl, fm, opts.xtol)?;
                let x2 = brent(f, xm, r, fm, fr, opts.xtol)?;
                return Ok(vec![
                    ScanRoot {
                        x: x1,
                        multiplicity: 1,
                        relative_residual: 0.0,
                    },
                    ScanRoot {
                        x: x2,
                        multiplicity: 1,
                        relative_residual: 0.0,
                    },
                ]);
            }
            let rel = fm.abs() / scale;
            if rel <= opts.touch_ratio {
                Ok(vec![ScanRoot {
                    x: xm,
                    multiplicity: 2,
                    relative_residual: rel,
                }])
            } else {
                Ok(vec![])
            }
        })
        .collect::<Result<Vec<_>>>()?;
    roots.extend(extra.into_iter().flatten());
    roots.sort_by(|a, b| a.x.total_cmp(&b.x));
    Ok(roots)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> ScanOptions {
        ScanOptions {
            xtol: 1e-13,
            touch_ratio: 1e-6,
        }
    }

    #[test]
    fn brent_finds_cos_root() {
        let f = |x: f64| Ok(x.cos());
        let r = brent(&f, 1.0, 2.0, 1f64.cos(), 2f64.cos(), 1e-14).unwrap();
        assert!((r - std::f64::consts::FRAC_PI_2).abs() < 1e-13);
    }

    #[test]
    fn scan_resolves_close_pair_and_touch() {
        // close pair at 1.0 and 1.001, double root at 3
        let f = |x: f64| Ok((x - 1.0) * (x - 1.001) * (x - 3.0).powi(2) + 0.0);
        let grid: Vec<f64> = (0..=40).map(|i| 0.1 * i as f64 + 0.0513).collect();
        let roots = scan(&f, &grid, opts()).unwrap();
        assert_eq!(roots.len(), 3, "{roots:?}");
        assert!((roots[0].x - 1.0).abs() < 1e-10);
        assert!((roots[1].x - 1.001).abs() < 1e-10);
        assert_eq!(roots[2].multiplicity, 2);
        assert!((roots[2].x - 3.0).abs() < 1e-6);
    }

    #[test]
    fn scan_ignores_shallow_minimum() {
        let f = |x: f64| Ok(1.0 + x * x);
        let grid: Vec<f64> = (0..=10).map(|i| -1.0 + 0.2 * i as f64 + 0.01).collect();
        assert!(scan(&f, &grid, opts()).unwrap().is_empty());
    }
}
