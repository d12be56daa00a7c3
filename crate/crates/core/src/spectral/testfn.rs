use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestKind {
    Bump,
    GaussianTruncated,
    IndicatorMollified,
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TestKind::Bump => "bump",
            TestKind::GaussianTruncated => "gaussian-truncated",
            TestKind::IndicatorMollified => "indicator-mollified",
        })
    }
}

impl FromStr for TestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bump" => Ok(TestKind::Bump),
            "gaussian-truncated" => Ok(TestKind::GaussianTruncated),
            "indicator-mollified" => Ok(TestKind::IndicatorMollified),
            _ => Err(Error::InvalidArgument(format!("unknown test function kind `{s}`"))),
        }
    }
}

/// Smooth compactly supported function of the rescaled energy `λ = E/ħ`.
///
/// * `bump`: `e·exp(−1/(1−s²))`, `s` the affine coordinate mapping the support
///   onto `[−1, 1]`; peak 1 at the center.
/// * `gaussian-truncated`: `exp(−(x−c)²/(2w²))` times a smooth cutoff that is
///   1 on the middle 80% of the support.
/// * `indicator-mollified`: 1 on `[lo+w, hi−w]` with smooth ramps of width `w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub kind: TestKind,
    pub center: f64,
    pub width: f64,
    pub support: (f64, f64),
}

/// `exp(−1/t)` for `t > 0`, else 0.
fn psi(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

/// Smooth step: 0 for `t ≤ 0`, 1 for `t ≥ 1`.
fn smooth_step(t: f64) -> f64 {
    let a = psi(t);
    let b = psi(1.0 - t);
    if a + b == 0.0 {
        return if t >= 1.0 { 1.0 } else { 0.0 };
    }
    a / (a + b)
}

impl TestFunction {
    pub fn bump(lo: f64, hi: f64) -> Result<Self> {
        Self::new(TestKind::Bump, 0.5 * (lo + hi), hi - lo, (lo, hi))
    }

    pub fn gaussian(center: f64, sigma: f64, lo: f64, hi: f64) -> Result<Self> {
        Self::new(TestKind::GaussianTruncated, center, sigma, (lo, hi))
    }

    pub fn indicator(lo: f64, hi: f64, ramp: f64) -> Result<Self> {
        Self::new(TestKind::IndicatorMollified, 0.5 * (lo + hi), ramp, (lo, hi))
    }

    pub fn new(kind: TestKind, center: f64, width: f64, support: (f64, f64)) -> Result<Self> {
        let (lo, hi) = support;
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(Error::NoCompactSupport);
        }
        if !(lo < hi) || !(width > 0.0) || !center.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "bad test function: {kind} center {center} width {width} support [{lo}, {hi}]"
            )));
        }
        match kind {
            TestKind::Bump => {}
            TestKind::GaussianTruncated => {
                if center < lo || center > hi {
                    return Err(Error::InvalidArgument("gaussian center outside support".into()));
                }
            }
            TestKind::IndicatorMollified => {
                if 2.0 * width > hi - lo {
                    return Err(Error::InvalidArgument("mollifier ramps overlap".into()));
                }
            }
        }
        Ok(Self {
            kind,
            center,
            width,
            support,
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let (lo, hi) = self.support;
        if x <= lo || x >= hi {
            return 0.0;
        }
        match self.kind {
            TestKind::Bump => {
                let s = (2.0 * x - lo - hi) / (hi - lo);
                (1.0 - 1.0 / (1.0 - s * s)).exp()
            }
            TestKind::GaussianTruncated => {
                let ramp = 0.1 * (hi - lo);
                let cut = smooth_step((x - lo) / ramp) * smooth_step((hi - x) / ramp);
                (-(x - self.center).powi(2) / (2.0 * self.width * self.width)).exp() * cut
            }
            TestKind::IndicatorMollified => smooth_step((x - lo) / self.width) * smooth_step((hi - x) / self.width),
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        x > self.support.0 && x < self.support.1
    }
}
