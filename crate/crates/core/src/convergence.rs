//! Log-log slope fits for refinement studies.

use crate::error::{Error, Result};

/// Fitted and pairwise slopes of `log r` against `log h`.
#[derive(Clone, Debug, PartialEq)]
pub struct SlopeFit {
    /// Least-squares slope over all sizes.
    pub slope: f64,
    /// Slopes between consecutive sizes.
    pub pairwise: Vec<f64>,
}

impl SlopeFit {
    pub fn passes(&self, min_slope: f64) -> bool {
        self.slope >= min_slope
    }
}

/// Slope between two refinement levels.
pub fn pair_slope(h0: f64, r0: f64, h1: f64, r1: f64) -> f64 {
    (r1.ln() - r0.ln()) / (h1.ln() - h0.ln())
}

/// Least-squares fit of `log r = p log h + c`; needs at least three sizes.
pub fn fit_slope(hs: &[f64], residuals: &[f64]) -> Result<SlopeFit> {
    if hs.len() != residuals.len() {
        return Err(Error::SizeMismatch { expected: hs.len(), got: residuals.len() });
    }
    if hs.len() < 3 {
        return Err(Error::TooFewSizes(hs.len()));
    }
    if hs.iter().chain(residuals).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidParameter("slope fit needs positive finite data".into()));
    }
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = residuals.iter().map(|r| r.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let pairwise = hs
        .windows(2)
        .zip(residuals.windows(2))
        .map(|(h, r)| pair_slope(h[0], r[0], h[1], r[1]))
        .collect();
    Ok(SlopeFit { slope: sxy / sxx, pairwise })
}
