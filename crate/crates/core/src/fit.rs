//! Least-squares line fits used by the scaling reports.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fitted values.
    pub rms_residual: f64,
    /// Largest absolute residual.
    pub max_residual: f64,
}

impl LineFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

/// Ordinary least squares `y ≈ intercept + slope·x`.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if xs.len() != ys.len() {
        return Err(Error::Fit("length mismatch".into()));
    }
    if xs.len() < 2 {
        return Err(Error::Fit(format!("need at least 2 points, got {}", xs.len())));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::Fit("non-finite data".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx <= 0.0 {
        return Err(Error::Fit("abscissae are all equal".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let res: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| y - (intercept + slope * x)).collect();
    let rms_residual = (res.iter().map(|r| r * r).sum::<f64>() / n).sqrt();
    let max_residual = res.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    Ok(LineFit {
        slope,
        intercept,
        rms_residual,
        max_residual,
    })
}

/// Power law `y ≈ C·x^α` fitted in log10-log10 space. Residuals are in
/// decades.
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if xs.iter().chain(ys).any(|v| *v <= 0.0) {
        return Err(Error::Fit("power-law fit needs positive data".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.log10()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.log10()).collect();
    fit_line(&lx, &ly)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_synthetic_exponent() {
        let h = [0.2, 0.1, 0.05, 0.025];
        let y: Vec<f64> = h.iter().map(|x: &f64| x.powf(1.5)).collect();
        let f = fit_power_law(&h, &y).unwrap();
        assert!((f.slope - 1.5).abs() < 1e-10);
        let y7: Vec<f64> = y.iter().map(|v| 7.0 * v).collect();
        let f7 = fit_power_law(&h, &y7).unwrap();
        assert!((f7.slope - f.slope).abs() < 1e-12);
        assert!((f7.intercept - f.intercept - 7f64.log10()).abs() < 1e-12);
    }

    #[test]
    fn rejects_degenerate_input() {
        assert!(fit_line(&[1.0], &[2.0]).is_err());
        assert!(fit_line(&[1.0, 1.0], &[2.0, 3.0]).is_err());
        assert!(fit_power_law(&[1.0, 2.0], &[0.0, 1.0]).is_err());
    }
}
