//! Local density of states against its leading coefficient `f₀`, the LDOS of
//! test functions supported in a spectral gap, and decay of the off-diagonal
//! kernel.

use serde::Serialize;

use super::{Rung, ScalingReport};
use crate::field::skew_spectrum;
use crate::fit::{fit_line, fit_power_law, LineFit};
use crate::landau::{find_gaps, model_f0, SigmaApprox, DEFAULT_QUAD_TOL};
use crate::spectral::{kernel_offdiag, ldos, TestFunction};
use crate::{Error, FieldSpec, Result};

/// `f₀` values below this count as zero.
pub const F0_FLOOR: f64 = 1e-12;
/// Points must keep this fraction of the box size from every face.
pub const INTERIOR_FRACTION: f64 = 0.25;
/// Largest accepted relative error at the finest rung.
pub const MAX_RELATIVE_ERROR: f64 = 0.1;
/// Smallest accepted error-decay exponent.
pub const MIN_BETA: f64 = 0.4;
/// Bound on `ħ^{d/2}·ldos` for a test function supported in a gap.
pub const GAP_LDOS_TOL: f64 = 1e-8;
/// Largest accepted fit residual of the off-diagonal decay, in decades.
pub const OFFDIAG_MAX_RESIDUAL: f64 = 0.5;

#[derive(Debug, Clone, Serialize)]
pub struct LdosPoint {
    pub requested: Vec<f64>,
    /// Coordinates of the lattice node used.
    pub node: Vec<f64>,
    pub ldos: f64,
    /// `ħ^{d/2}·ldos`.
    pub scaled: f64,
    pub f0: f64,
    pub error: f64,
    pub inconclusive: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct LdosRung {
    pub hbar: f64,
    pub points: Vec<LdosPoint>,
    /// Largest relative error over the points.
    pub error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LdosReport {
    pub phi: TestFunction,
    pub rungs: Vec<LdosRung>,
    pub scaling: ScalingReport,
    pub finest_error: f64,
    pub pass: bool,
    pub notes: Vec<String>,
}

fn check_rung(r: &Rung, phi: &TestFunction) -> Result<()> {
    let (lo, hi) = phi.support;
    let (wlo, whi) = r.ew.window;
    if lo < wlo || hi > whi {
        return Err(Error::SupportOutsideWindow { lo, hi, wlo, whi });
    }
    if !r.ew.complete_flag {
        return Err(Error::Incomplete(format!(
            "ħ = {}: found {} of {}",
            r.hbar,
            r.ew.len(),
            r.ew.expected
        )));
    }
    Ok(())
}

fn check_interior(r: &Rung, p: &[f64]) -> Result<()> {
    let g = &r.ew.grid;
    if p.len() != g.dim() {
        return Err(Error::InvalidArgument(format!("point {p:?} has the wrong dimension")));
    }
    for a in 0..g.dim() {
        let keep = INTERIOR_FRACTION * (g.hi[a] - g.lo[a]);
        if p[a] - g.lo[a] < keep || g.hi[a] - p[a] < keep {
            return Err(Error::InvalidArgument(format!(
                "point {p:?} is closer than {INTERIOR_FRACTION} of the box to a face"
            )));
        }
    }
    Ok(())
}

/// Relative error of `ħ^{d/2}·ldos` against `f₀` at `points` on every rung,
/// and the exponent of its decay along the ladder.
pub fn check_ldos_leading(
    rungs: &[Rung],
    field: &FieldSpec,
    phi: &TestFunction,
    points: &[Vec<f64>],
) -> Result<LdosReport> {
    if rungs.len() < 3 {
        return Err(Error::Fit(format!("ladder has {} rungs, need at least 3", rungs.len())));
    }
    if points.is_empty() {
        return Err(Error::InvalidArgument("no sample points".into()));
    }
    let mut out = Vec::with_capacity(rungs.len());
    let mut notes = Vec::new();
    for r in rungs {
        check_rung(r, phi)?;
        let g = &r.ew.grid;
        let scale = r.hbar.powf(g.dim() as f64 / 2.0);
        let mut pts = Vec::with_capacity(points.len());
        for p in points {
            check_interior(r, p)?;
            let node = g.nearest_node(p);
            let x = g.coord(node);
            let value = ldos(&r.ew, phi, node)?;
            let f0 = model_f0(&skew_spectrum(field, &x, None)?, phi, DEFAULT_QUAD_TOL)?;
            let scaled = scale * value;
            let error = (scaled - f0).abs() / f0.abs().max(F0_FLOOR);
            let inconclusive = f0.abs() < F0_FLOOR && (scaled - f0).abs() > F0_FLOOR;
            if inconclusive {
                notes.push(format!("ħ = {}: f₀ vanishes at {x:?} but the LDOS does not", r.hbar));
            }
            pts.push(LdosPoint {
                requested: p.clone(),
                node: x,
                ldos: value,
                scaled,
                f0,
                error,
                inconclusive,
            });
        }
        let error = pts.iter().map(|p| p.error).fold(0.0, f64::max);
        out.push(LdosRung {
            hbar: r.hbar,
            points: pts,
            error,
        });
    }
    let hb: Vec<f64> = out.iter().map(|r| r.hbar).collect();
    let errs: Vec<f64> = out.iter().map(|r| r.error).collect();
    let fit = fit_power_law(&hb, &errs)?;
    let finest = out
        .iter()
        .min_by(|a, b| a.hbar.total_cmp(&b.hbar))
        .map(|r| r.error)
        .unwrap_or(f64::INFINITY);
    let inconclusive = out.iter().any(|r| r.points.iter().any(|p| p.inconclusive));
    let pass = fit.slope >= MIN_BETA && finest <= MAX_RELATIVE_ERROR && !inconclusive;
    Ok(LdosReport {
        phi: *phi,
        scaling: ScalingReport::new(
            "ldos-leading-order",
            hb,
            "max relative error",
            errs,
            fit,
            format!("beta >= {MIN_BETA}, error at the finest rung <= {MAX_RELATIVE_ERROR}"),
            pass,
        ),
        rungs: out,
        finest_error: finest,
        pass,
        notes,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct GapLdosReport {
    pub phi: TestFunction,
    pub gap: (f64, f64),
    pub hbar_ladder: Vec<f64>,
    /// `max_x ħ^{d/2}·|ldos(x)|` per rung.
    pub scaled_ldos: Vec<f64>,
    pub tolerance: f64,
    pub pass: bool,
}

/// LDOS of a test function supported inside a certified gap of `sa`.
pub fn check_gap_ldos(
    rungs: &[Rung],
    sa: &SigmaApprox,
    phi: &TestFunction,
    points: &[Vec<f64>],
) -> Result<GapLdosReport> {
    let (lo, hi) = phi.support;
    let gap = find_gaps(sa, 0.0)
        .into_iter()
        .find(|(a, b)| *a < lo && hi < *b)
        .ok_or_else(|| Error::InvalidArgument(format!("support [{lo}, {hi}] is not inside a gap of Σ")))?;
    let mut scaled = Vec::with_capacity(rungs.len());
    for r in rungs {
        check_rung(r, phi)?;
        let g = &r.ew.grid;
        let scale = r.hbar.powf(g.dim() as f64 / 2.0);
        let mut worst: f64 = 0.0;
        for p in points {
            check_interior(r, p)?;
            worst = worst.max(scale * ldos(&r.ew, phi, g.nearest_node(p))?.abs());
        }
        scaled.push(worst);
    }
    let pass = scaled.iter().all(|&v| v <= GAP_LDOS_TOL);
    Ok(GapLdosReport {
        phi: *phi,
        gap,
        hbar_ladder: rungs.iter().map(|r| r.hbar).collect(),
        scaled_ldos: scaled,
        tolerance: GAP_LDOS_TOL,
        pass,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct OffdiagReport {
    pub phi: TestFunction,
    pub separation: f64,
    pub hbar_ladder: Vec<f64>,
    /// `max ħ^{d/2}·|K(x, x')|` over the point pairs, per rung.
    pub kernel: Vec<f64>,
    /// Fit of `log10 kernel` against `1/√ħ`.
    pub fit: LineFit,
    /// `−slope·ln 10`, the rate in `e^{−rate/√ħ}`.
    pub rate: f64,
    pub pass: bool,
}

/// Decay of the kernel of `φ(H/ħ)` between points `separation` apart along
/// the first axis, fitted against `1/√ħ`.
pub fn check_offdiag_decay(
    rungs: &[Rung],
    phi: &TestFunction,
    points: &[Vec<f64>],
    separation: f64,
) -> Result<OffdiagReport> {
    if rungs.len() < 3 {
        return Err(Error::Fit(format!("ladder has {} rungs, need at least 3", rungs.len())));
    }
    if !(separation > 0.0) || points.is_empty() {
        return Err(Error::InvalidArgument(
            "need a positive separation and at least one point".into(),
        ));
    }
    let mut kernel = Vec::with_capacity(rungs.len());
    for r in rungs {
        check_rung(r, phi)?;
        let g = &r.ew.grid;
        let scale = r.hbar.powf(g.dim() as f64 / 2.0);
        let mut worst: f64 = 0.0;
        for p in points {
            let mut q = p.clone();
            q[0] += separation;
            check_interior(r, p)?;
            check_interior(r, &q)?;
            let k = kernel_offdiag(&r.ew, phi, g.nearest_node(p), g.nearest_node(&q))?;
            worst = worst.max(scale * k.norm());
        }
        kernel.push(worst);
    }
    if kernel.iter().any(|&k| k <= 0.0) {
        return Err(Error::Fit("kernel vanishes on some rung".into()));
    }
    let xs: Vec<f64> = rungs.iter().map(|r| 1.0 / r.hbar.sqrt()).collect();
    let ys: Vec<f64> = kernel.iter().map(|k| k.log10()).collect();
    let fit = fit_line(&xs, &ys)?;
    let rate = -fit.slope * std::f64::consts::LN_10;
    Ok(OffdiagReport {
        phi: *phi,
        separation,
        hbar_ladder: rungs.iter().map(|r| r.hbar).collect(),
        kernel,
        pass: rate > 0.0 && fit.rms_residual <= OFFDIAG_MAX_RESIDUAL,
        fit,
        rate,
    })
}
