//! Exponential localization of eigenfunctions near `K_[a,b]`: exterior masses
//! beyond distance `r` and the weighted integral `∫ e^{2c·d(x,K)/√ħ}|u|²`.

use serde::Serialize;

use super::{distance_transform, Rung};
use crate::fit::{fit_line, LineFit};
use crate::landau::kset;
use crate::{Error, Result};

/// Masses at or below this are dropped from the fit as numerically zero.
pub const MASS_FLOOR: f64 = 1e-20;
/// Largest accepted fit residual, in decades.
pub const MAX_RESIDUAL: f64 = 0.5;
/// Largest accepted spread `max/min` of the weighted-integral constant.
pub const STABILITY_RATIO: f64 = 10.0;

#[derive(Debug, Clone, Serialize)]
pub struct LocalizationRung {
    pub hbar: f64,
    /// Eigenvalues of `H/ħ` in the inner window.
    pub lambdas: Vec<f64>,
    /// `masses[i][k]`: exterior mass of eigenfunction `i` beyond `radii[k]·√ħ`.
    pub masses: Vec<Vec<f64>>,
    /// Largest mass over the eigenfunctions at each radius.
    pub envelope: Vec<f64>,
    pub monotone: bool,
    /// `max_i ∫ e^{2c·d/√ħ}|u_i|²` with the fitted `c`; empty without a fit.
    pub weighted: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LocalizationReport {
    pub interval: (f64, f64),
    pub inner: (f64, f64),
    /// Radii in units of `√ħ`.
    pub radii: Vec<f64>,
    pub rungs: Vec<LocalizationRung>,
    pub skipped: Vec<f64>,
    /// `log10 envelope ≈ intercept + slope·r/√ħ`, pooled over the ladder.
    pub fit: Option<LineFit>,
    /// Residual of the same fit over every eigenfunction, not just the envelope.
    pub pooled_rms: Option<f64>,
    /// Decay rate `c` with `m(r) ≤ C·e^{−2c·r/√ħ}`.
    pub c: Option<f64>,
    /// Smallest `C` bounding every sample under the fitted `c`.
    pub prefactor: Option<f64>,
    pub weighted_ratio: Option<f64>,
    pub monotone: bool,
    pub pass: bool,
    pub notes: Vec<String>,
}

/// Exterior masses of the inner-window eigenfunctions of every rung.
///
/// `radii` are multiples of `√ħ`. With `radii == [0]` only the mass outside
/// the mask is reported and no law is fitted.
pub fn check_localization(
    rungs: &[Rung],
    field: &crate::FieldSpec,
    interval: (f64, f64),
    inner: (f64, f64),
    radii: &[f64],
) -> Result<LocalizationReport> {
    let (a, b) = interval;
    if !(inner.0 > a && inner.1 < b && inner.0 < inner.1) {
        return Err(Error::InvalidArgument(format!(
            "inner window {inner:?} must lie strictly inside {interval:?}"
        )));
    }
    if radii.is_empty() || radii.iter().any(|r| !(*r >= 0.0)) || radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "radii must be nonnegative and increasing".into(),
        ));
    }
    let mass_only = radii.len() == 1;
    let mut out = Vec::new();
    let mut skipped = Vec::new();
    let mut dists = Vec::new();
    for rung in rungs {
        let ew = &rung.ew;
        if ew.window.0 > inner.0 || ew.window.1 < inner.1 {
            return Err(Error::SupportOutsideWindow {
                lo: inner.0,
                hi: inner.1,
                wlo: ew.window.0,
                whi: ew.window.1,
            });
        }
        if !ew.complete_flag {
            return Err(Error::Incomplete(format!("found {} of {}", ew.len(), ew.expected)));
        }
        let mask = kset(field, interval, &ew.grid, 0.0)?;
        if !mask.compact_flag {
            return Err(Error::NotCompact(a, b));
        }
        let dist = distance_transform(&mask)?.values;
        let sel: Vec<usize> = (0..ew.len())
            .filter(|&i| ew.lambdas[i] >= inner.0 && ew.lambdas[i] <= inner.1)
            .collect();
        if sel.is_empty() {
            skipped.push(rung.hbar);
            continue;
        }
        let w = ew.grid.cell_volume();
        let sq = rung.hbar.sqrt();
        let masses: Vec<Vec<f64>> = sel
            .iter()
            .map(|&i| {
                let col = ew.vectors.column(i);
                radii
                    .iter()
                    .map(|t| {
                        let r = t * sq;
                        col.iter()
                            .zip(&dist)
                            .filter(|(_, &d)| d > r)
                            .map(|(z, _)| z.norm_sqr())
                            .sum::<f64>()
                            * w
                    })
                    .collect()
            })
            .collect();
        let envelope: Vec<f64> = (0..radii.len())
            .map(|k| masses.iter().map(|m| m[k]).fold(0.0, f64::max))
            .collect();
        let monotone = masses.iter().all(|m| m.windows(2).all(|p| p[1] <= p[0]));
        out.push(LocalizationRung {
            hbar: rung.hbar,
            lambdas: sel.iter().map(|&i| ew.lambdas[i]).collect(),
            masses,
            envelope,
            monotone,
            weighted: None,
        });
        dists.push((sel, dist));
    }
    let monotone = out.iter().all(|r| r.monotone);
    let mut notes = Vec::new();
    for h in &skipped {
        notes.push(format!("no eigenvalues in the inner window at ħ = {h}; rung skipped"));
    }
    if mass_only {
        let bounded = out.iter().all(|r| r.envelope[0] <= 1.0 + 1e-10);
        return Ok(LocalizationReport {
            interval,
            inner,
            radii: radii.to_vec(),
            rungs: out,
            skipped,
            fit: None,
            pooled_rms: None,
            c: None,
            prefactor: None,
            weighted_ratio: None,
            monotone,
            pass: monotone && bounded,
            notes,
        });
    }
    if out.len() < 3 {
        return Err(Error::Fit(format!("{} usable rungs, need at least 3", out.len())));
    }
    // the bound must hold for every eigenfunction, so the envelope is fitted
    let (mut xs, mut ys, mut xa, mut ya) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for r in &out {
        for (k, &t) in radii.iter().enumerate() {
            if r.envelope[k] > MASS_FLOOR {
                xs.push(t);
                ys.push(r.envelope[k].log10());
            }
            for m in &r.masses {
                if m[k] > MASS_FLOOR {
                    xa.push(t);
                    ya.push(m[k].log10());
                }
            }
        }
    }
    let fit = fit_line(&xs, &ys)?;
    let pooled = fit_line(&xa, &ya)?;
    let c = -fit.slope * std::f64::consts::LN_10 / 2.0;
    let lift = xa
        .iter()
        .zip(&ya)
        .map(|(x, y)| y - fit.slope * x)
        .fold(f64::NEG_INFINITY, f64::max);
    let prefactor = 10f64.powf(lift);
    for (r, (sel, dist)) in out.iter_mut().zip(&dists) {
        let ew = &rungs.iter().find(|g| g.hbar == r.hbar).expect("rung present").ew;
        let w = ew.grid.cell_volume();
        let sq = r.hbar.sqrt();
        let weights: Vec<f64> = dist.iter().map(|d| (2.0 * c * d / sq).exp()).collect();
        let worst = sel
            .iter()
            .map(|&i| {
                ew.vectors
                    .column(i)
                    .iter()
                    .zip(&weights)
                    .map(|(z, g)| g * z.norm_sqr())
                    .sum::<f64>()
                    * w
            })
            .fold(0.0, f64::max);
        r.weighted = Some(worst);
    }
    let ws: Vec<f64> = out.iter().filter_map(|r| r.weighted).collect();
    let finite = ws.iter().all(|v| v.is_finite());
    let ratio = ws.iter().copied().fold(0.0, f64::max) / ws.iter().copied().fold(f64::INFINITY, f64::min);
    if c <= 0.0 {
        notes.push("fitted decay rate is not positive".into());
    }
    let pass = c > 0.0 && fit.rms_residual <= MAX_RESIDUAL && monotone && finite && ratio <= STABILITY_RATIO;
    Ok(LocalizationReport {
        interval,
        inner,
        radii: radii.to_vec(),
        rungs: out,
        skipped,
        fit: Some(fit),
        pooled_rms: Some(pooled.rms_residual),
        c: Some(c),
        prefactor: Some(prefactor),
        weighted_ratio: Some(ratio),
        monotone,
        pass,
        notes,
    })
}
