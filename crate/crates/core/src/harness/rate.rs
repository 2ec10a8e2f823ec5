use log::warn;
use serde::Serialize;

use crate::error::{Error, Result};

/// Least-squares line through (log ε, log value).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Fits log value = intercept + slope·log ε. Nonpositive values are dropped
/// with a warning; fewer than three usable rows is an error.
pub fn fit_rate(rows: &[(f64, f64)]) -> Result<RateFit> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|&&(e, v)| {
            let ok = e > 0.0 && v > 0.0 && e.is_finite() && v.is_finite();
            if !ok {
                warn!("rate fit: dropping row ({e}, {v})");
            }
            ok
        })
        .map(|&(e, v)| (e.ln(), v.ln()))
        .collect();
    let n = pts.len();
    if n < 3 {
        return Err(Error::Domain(format!(
            "rate fit needs at least 3 positive rows, got {n}"
        )));
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("rate fit needs at least two distinct eps".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        points: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_powers() {
        let e = [0.1, 0.05, 0.025, 0.0125];
        let f = fit_rate(&e.map(|e| (e, e))).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-12);
        let f = fit_rate(&e.map(|e| (e, 7.0 * e * e))).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.intercept - 7f64.ln()).abs() < 1e-10);
        assert!(fit_rate(&[(0.1, 1.0), (0.05, -1.0), (0.02, 0.3)]).is_err());
    }
}
