//! Two-dimensional solution spaces shot across several regions with
//! re-orthonormalization, plus recovery of individual solutions afterwards.

use nalgebra::{Matrix2, Matrix4x2};

use super::curve::Curve;
use super::engine::{run, Cols, Options, Run, Tolerance};
use crate::error::Result;

/// Growth factor that triggers a re-orthonormalization.
const GROWTH_LIMIT: f64 = 1e2;

struct Chunk {
    run: Option<Run<2>>,
    t_scale: f64,
    /// end state of this chunk (in the next chunk's coordinates) = q_next · r_after
    r_after: Matrix2<f64>,
}

pub(crate) struct Family {
    chunks: Vec<Chunk>,
    q: Cols<2>,
    t: f64,
    t_scale: f64,
    record: bool,
    tol: Tolerance,
}

fn to_mat(y: &Cols<2>) -> Matrix4x2<f64> {
    Matrix4x2::from_fn(|i, k| y[k][i])
}

fn from_mat(m: &Matrix4x2<f64>) -> Cols<2> {
    std::array::from_fn(|k| std::array::from_fn(|i| m[(i, k)]))
}

/// QR with positive diagonal in R, so the factorization is unique.
fn qr(y: &Cols<2>) -> (Cols<2>, Matrix2<f64>) {
    let m = to_mat(y);
    let f = m.qr();
    let mut q = f.q();
    let mut r = f.r();
    for k in 0..2 {
        if r[(k, k)] < 0.0 {
            for i in 0..4 {
                q[(i, k)] = -q[(i, k)];
            }
            for j in 0..2 {
                r[(k, j)] = -r[(k, j)];
            }
        }
    }
    (from_mat(&q), r)
}

impl Family {
    /// Starts from an orthonormal pair of states at `t` (coordinates `x = t_scale·t`).
    pub fn new(start: Cols<2>, t: f64, t_scale: f64, tol: Tolerance, record: bool) -> Self {
        let (q, r) = qr(&start);
        Family {
            chunks: vec![Chunk {
                run: None,
                t_scale,
                r_after: r,
            }],
            q,
            t,
            t_scale,
            record,
            tol,
        }
    }

    pub fn state(&self) -> &Cols<2> {
        &self.q
    }

    /// Integrates `u'''' + c(t)u = 0` up to `t1`.
    pub fn advance<C: Fn(f64) -> f64>(&mut self, coeff: &C, t1: f64) -> Result<()> {
        let opts = Options {
            tol: self.tol,
            record: self.record,
            growth_limit: Some(GROWTH_LIMIT),
        };
        while self.t != t1 {
            let r = run(coeff, &|_| 0.0, self.t, t1, self.q, &opts)?;
            let (q, rr) = qr(r.last());
            self.t = r.t_end();
            self.q = q;
            self.chunks.push(Chunk {
                run: self.record.then_some(r),
                t_scale: self.t_scale,
                r_after: rr,
            });
        }
        Ok(())
    }

    /// Applies the diagonal state map `s` (a change of independent variable)
    /// and continues in the new coordinates at time `t`.
    pub fn convert(&mut self, s: [f64; 4], t: f64, t_scale: f64) {
        let y: Cols<2> = std::array::from_fn(|k| std::array::from_fn(|i| s[i] * self.q[k][i]));
        let (q, r) = qr(&y);
        let last = self.chunks.last_mut().expect("family has a chunk");
        last.r_after = r * last.r_after;
        self.q = q;
        self.t = t;
        self.t_scale = t_scale;
    }

    /// Recorded pieces of the solution whose current state is `q · c`, in
    /// x-coordinates, one curve per chunk.
    pub fn solution(&self, c: [f64; 2]) -> Vec<Curve> {
        let mut d = nalgebra::Vector2::new(c[0], c[1]);
        let mut out = Vec::new();
        for ch in self.chunks.iter().rev() {
            d = ch
                .r_after
                .solve_upper_triangular(&d)
                .unwrap_or_else(nalgebra::Vector2::zeros);
            if let Some(run) = &ch.run {
                if run.t.len() >= 2 {
                    out.push(Curve::from_run(run, &[d[0], d[1]]).rescaled(ch.t_scale, 1.0));
                }
            }
        }
        out.reverse();
        out
    }
}

/// det [a | b] for two 4×2 blocks.
pub(crate) fn det4(a: &Cols<2>, b: &Cols<2>) -> f64 {
    let m = nalgebra::Matrix4::from_fn(|i, j| if j < 2 { a[j][i] } else { b[j - 2][i] });
    m.determinant()
}
