//! Pointwise Landau levels, the sampled spectral set `Σ`, gaps, the
//! localization set `K_[a,b]` and the leading density-of-states coefficient.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::field::{skew_spectrum, Domain, FieldSpec, ModelSpectrum};
use crate::lattice::GridSpec;
use crate::par;
use crate::quad::adaptive_simpson;
use crate::spectral::TestFunction;
use crate::{Error, Result};

/// Adjacent sampled intervals closer than this are merged.
pub const MERGE_TOL: f64 = 1e-12;
pub const DEFAULT_QUAD_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LevelIndex(pub Vec<u32>);

impl LevelIndex {
    pub fn order(&self) -> u64 {
        self.0.iter().map(|&k| k as u64).sum()
    }
}

/// `Λ_k = Σ(2k_j+1)a_j + V(x₀)`.
pub fn level_value(ms: &ModelSpectrum, k: &LevelIndex) -> f64 {
    ms.a.iter()
        .zip(&k.0)
        .map(|(a, &kj)| (2.0 * kj as f64 + 1.0) * a)
        .sum::<f64>()
        + ms.v0
}

/// All levels `Λ_k ≤ emax`, ascending (ties broken by index order).
pub fn enumerate_levels(ms: &ModelSpectrum, emax: f64) -> Result<Vec<(LevelIndex, f64)>> {
    if ms.a.is_empty() {
        return Err(Error::NoMagneticLevels);
    }
    if !emax.is_finite() {
        return Err(Error::InvalidArgument("emax must be finite".into()));
    }
    let base = model_spectrum_min(ms);
    let mut k = vec![0u32; ms.a.len()];
    // depth-first over k with the remaining energy budget above Λ₀
    fn rec(a: &[f64], j: usize, budget: f64, k: &mut Vec<u32>, out: &mut Vec<LevelIndex>) {
        if j == a.len() {
            out.push(LevelIndex(k.clone()));
            return;
        }
        let mut kj = 0u32;
        while 2.0 * kj as f64 * a[j] <= budget {
            k[j] = kj;
            rec(a, j + 1, budget - 2.0 * kj as f64 * a[j], k, out);
            kj += 1;
        }
        k[j] = 0;
    }
    let mut idx = Vec::new();
    if base <= emax {
        rec(&ms.a, 0, emax - base, &mut k, &mut idx);
    }
    let mut out: Vec<(LevelIndex, f64)> = idx
        .into_iter()
        .map(|k| {
            let v = level_value(ms, &k);
            (k, v)
        })
        .collect();
    out.retain(|(_, v)| *v <= emax);
    out.sort_by(|x, y| x.1.total_cmp(&y.1).then_with(|| x.0 .0.cmp(&y.0 .0)));
    Ok(out)
}

/// `Λ₀ = Σa_j + V(x₀)`; for fields with zero modes this is the bottom of the
/// semiaxis spectrum.
pub fn model_spectrum_min(ms: &ModelSpectrum) -> f64 {
    ms.a.iter().sum::<f64>() + ms.v0
}

/// Sorted, disjoint union of closed intervals covering `Σ ∩ [0, lmax]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaApprox {
    pub intervals: Vec<(f64, f64)>,
    pub covering_radius: f64,
    pub domain: Domain,
    pub sample_step: f64,
    pub lmax: f64,
    /// Lipschitz bound `L_Σ` used for the covering radius.
    pub lipschitz: f64,
    /// True if some node had zero modes (semiaxis contribution).
    pub semiaxis: bool,
}

fn merge(mut iv: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    iv.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(iv.len());
    for (lo, hi) in iv {
        match out.last_mut() {
            Some(last) if lo <= last.1 + MERGE_TOL => last.1 = last.1.max(hi),
            _ => out.push((lo, hi)),
        }
    }
    out
}

/// Raw levels (or semiaxis bottoms) at one point below `lmax`.
fn point_levels(ms: &ModelSpectrum, lmax: f64) -> Result<(Vec<f64>, Option<f64>, u64)> {
    if ms.zero_modes > 0 {
        return Ok((Vec::new(), Some(model_spectrum_min(ms)), 0));
    }
    let lv = enumerate_levels(ms, lmax)?;
    let kmax = lv.iter().map(|(k, _)| k.order()).max().unwrap_or(0);
    Ok((lv.into_iter().map(|(_, v)| v).collect(), None, kmax))
}

/// Samples `Σ_x ∩ [0, lmax]` on a grid of spacing `≤ step`, inflates every
/// level by the covering radius `ρ = L_Σ·step·√d/2 + MERGE_TOL` and merges.
pub fn sample_sigma(fs: &FieldSpec, domain: &Domain, lmax: f64, step: f64) -> Result<SigmaApprox> {
    if !(step > 0.0) || !lmax.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "bad sampling step {step} or lmax {lmax}"
        )));
    }
    let pts = domain.sample_grid(step);
    let sample = |emax: f64| -> Result<(Vec<(Vec<f64>, Option<f64>)>, u64, usize)> {
        let per_node: Vec<Result<(Vec<f64>, Option<f64>, u64, usize)>> = par::map_slice(&pts, |p| {
            let ms = skew_spectrum(fs, p, None)?;
            let (lv, semi, k) = point_levels(&ms, emax)?;
            Ok((lv, semi, k, ms.n()))
        });
        let mut out = Vec::with_capacity(per_node.len());
        let (mut kmax, mut nmax) = (0u64, 0usize);
        for r in per_node {
            let (lv, semi, k, n) = r?;
            kmax = kmax.max(k);
            nmax = nmax.max(n);
            out.push((lv, semi));
        }
        Ok((out, kmax, nmax))
    };
    // Levels slightly above lmax at a node can dip below it between nodes, so
    // enumerate up to lmax + ρ; ρ depends on the largest |k| involved.
    let (_, mut kmax, nmax) = sample(lmax)?;
    let (samples, lipschitz, rho) = loop {
        let lipschitz = fs.level_lipschitz(kmax, nmax.max(1));
        let rho = lipschitz * step * (domain.dim() as f64).sqrt() / 2.0 + MERGE_TOL;
        let (samples, k, _) = sample(lmax + rho)?;
        if k <= kmax {
            break (samples, lipschitz, rho);
        }
        kmax = k;
    };
    let mut raw = Vec::new();
    let mut semiaxis = false;
    for (lv, semi) in samples {
        for v in lv {
            raw.push((v - rho, v + rho));
        }
        if let Some(b) = semi {
            semiaxis = true;
            raw.push((b - rho, lmax));
        }
    }
    let intervals = merge(
        raw.into_iter()
            .filter_map(|(lo, hi)| {
                let (lo, hi) = (lo.max(0.0), hi.min(lmax));
                (lo <= hi).then_some((lo, hi))
            })
            .collect(),
    );
    Ok(SigmaApprox {
        intervals,
        covering_radius: rho,
        domain: domain.clone(),
        sample_step: step,
        lmax,
        lipschitz,
        semiaxis,
    })
}

/// Distance from `lambda` to the union of intervals; 0 inside.
pub fn sigma_distance(lambda: f64, sa: &SigmaApprox) -> f64 {
    interval_distance(lambda, &sa.intervals)
}

pub fn interval_distance(lambda: f64, intervals: &[(f64, f64)]) -> f64 {
    intervals
        .iter()
        .map(|&(lo, hi)| {
            if lambda < lo {
                lo - lambda
            } else if lambda > hi {
                lambda - hi
            } else {
                0.0
            }
        })
        .fold(f64::INFINITY, f64::min)
}

/// Maximal open intervals of `[0, lmax]` missing the reported set, at least
/// `min_width` wide. The reported intervals already carry the `ρ` inflation,
/// so their complement is the sampled-level complement shrunk by `ρ`.
pub fn find_gaps(sa: &SigmaApprox, min_width: f64) -> Vec<(f64, f64)> {
    let mut gaps = Vec::new();
    let mut cursor = 0.0;
    for &(lo, hi) in &sa.intervals {
        if lo > cursor {
            gaps.push((cursor, lo));
        }
        cursor = cursor.max(hi);
    }
    if cursor < sa.lmax {
        gaps.push((cursor, sa.lmax));
    }
    gaps.retain(|(a, b)| b - a >= min_width);
    gaps
}

/// Boolean node mask approximating `K_[a,b]` on a lattice grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSetMask {
    pub grid: GridSpec,
    pub mask: Vec<bool>,
    pub interval: (f64, f64),
    pub margin: f64,
    pub compact_flag: bool,
}

impl KSetMask {
    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

/// `true` iff the model spectrum at `ms` meets `[a, b]`.
pub fn spectrum_meets(ms: &ModelSpectrum, a: f64, b: f64) -> Result<bool> {
    if ms.zero_modes > 0 {
        return Ok(model_spectrum_min(ms) <= b);
    }
    Ok(enumerate_levels(ms, b)?.iter().any(|(_, v)| *v >= a))
}

/// Nodes whose model spectrum meets `interval`. The set counts as compact
/// when no member lies on the outermost node layer or within `margin` of a
/// face.
pub fn kset(fs: &FieldSpec, interval: (f64, f64), grid: &GridSpec, margin: f64) -> Result<KSetMask> {
    let (a, b) = interval;
    if !(a < b) {
        return Err(Error::InvalidArgument(format!("empty interval [{a}, {b}]")));
    }
    let flags: Vec<Result<bool>> = par::map_range(grid.len(), |i| {
        let x = grid.coord(i);
        spectrum_meets(&skew_spectrum(fs, &x, None)?, a, b)
    });
    let mask = flags.into_iter().collect::<Result<Vec<bool>>>()?;
    let compact_flag = mask
        .iter()
        .enumerate()
        .all(|(i, &m)| !m || (!on_outer_layer(grid, i) && grid.boundary_distance(i) > margin));
    Ok(KSetMask {
        grid: grid.clone(),
        mask,
        interval,
        margin,
        compact_flag,
    })
}

fn on_outer_layer(grid: &GridSpec, i: usize) -> bool {
    grid.multi_index(i)
        .iter()
        .zip(&grid.n)
        .any(|(&k, &n)| k == 0 || k + 1 == n)
}

/// `Γ(m/2)` for positive integers `m`.
fn gamma_half(m: usize) -> f64 {
    let mut g = if m.is_multiple_of(2) { 1.0 } else { PI.sqrt() };
    let mut x = if m.is_multiple_of(2) { 1.0 } else { 0.5 };
    while x < m as f64 / 2.0 - 1e-9 {
        g *= x;
        x += 1.0;
    }
    g
}

/// Area of the unit sphere `S^{m−1}` in `ℝ^m`: `2π^{m/2}/Γ(m/2)`.
pub fn sphere_area(m: usize) -> f64 {
    2.0 * PI.powf(m as f64 / 2.0) / gamma_half(m)
}

/// Leading density-of-states coefficient `f₀(x₀)` for `φ = phi`.
pub fn model_f0(ms: &ModelSpectrum, phi: &TestFunction, quad_tol: f64) -> Result<f64> {
    model_f0_with(ms, |x| phi.eval(x), phi.support, quad_tol)
}

/// [`model_f0`] for an arbitrary function supported in `support`.
///
/// Full rank: `(2π)^{−n} Πa_j Σ_k φ(Λ_k)`. With `m = d − 2n` zero modes:
/// `(2π)^{n−d} Πa_j Σ_k ω_{m−1} ∫₀^∞ φ(r² + Λ_k) r^{m−1} dr`, the radial
/// integral taken over `r² ∈ supp φ − Λ_k`.
pub fn model_f0_with<F>(ms: &ModelSpectrum, phi: F, support: (f64, f64), quad_tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let (lo, hi) = support;
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::NoCompactSupport);
    }
    let n = ms.n();
    let prod_a: f64 = ms.a.iter().product();
    let levels: Vec<f64> = if n == 0 {
        vec![ms.v0]
    } else {
        enumerate_levels(ms, hi)?.into_iter().map(|(_, v)| v).collect()
    };
    let m = ms.zero_modes;
    if m == 0 {
        let s: f64 = levels.iter().map(|&l| phi(l)).sum();
        return Ok((2.0 * PI).powi(-(n as i32)) * prod_a * s);
    }
    let d = ms.dim();
    let omega = sphere_area(m);
    let mut total = 0.0;
    for &l in &levels {
        if l >= hi {
            continue;
        }
        let r0 = (lo - l).max(0.0).sqrt();
        let r1 = (hi - l).sqrt();
        let f = |r: f64| phi(r * r + l) * r.powi(m as i32 - 1);
        total += omega * adaptive_simpson(f, r0, r1, quad_tol);
    }
    Ok((2.0 * PI).powi(n as i32 - d as i32) * prod_a * total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{MagneticFamily, PotentialFamily};
    use crate::lattice::DEFAULT_NODE_CAP;
    use nalgebra::DMatrix;

    fn ms(a: Vec<f64>, v0: f64, zero_modes: usize) -> ModelSpectrum {
        ModelSpectrum {
            x0: vec![],
            rank: 2 * a.len(),
            a,
            v0,
            zero_modes,
        }
    }

    fn radial(v: f64, half: f64) -> FieldSpec {
        FieldSpec::new(
            MagneticFamily::RadialWell {
                b0: 1.0,
                b2: 1.0,
                center: vec![0.0, 0.0],
            },
            if v == 0.0 {
                PotentialFamily::Zero
            } else {
                PotentialFamily::Constant(v)
            },
            None,
            Domain::centered(2, half),
            None,
        )
        .unwrap()
    }

    fn constant() -> FieldSpec {
        FieldSpec::new(
            MagneticFamily::Constant(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])),
            PotentialFamily::Zero,
            None,
            Domain::centered(2, 1.5),
            None,
        )
        .unwrap()
    }

    #[test]
    fn ladder_examples() {
        let l = enumerate_levels(&ms(vec![1.0], 0.0, 0), 6.0).unwrap();
        let v: Vec<f64> = l.iter().map(|x| x.1).collect();
        assert_eq!(v, vec![1.0, 3.0, 5.0]);
        assert_eq!(l[2].0, LevelIndex(vec![2]));
        let l = enumerate_levels(&ms(vec![3.0, 2.0], 0.5, 0), 8.0).unwrap();
        // brute force over k₁, k₂ ≤ 3
        let mut bf = Vec::new();
        for k1 in 0..=3u32 {
            for k2 in 0..=3u32 {
                let v = (2 * k1 + 1) as f64 * 3.0 + (2 * k2 + 1) as f64 * 2.0 + 0.5;
                if v <= 8.0 {
                    bf.push((LevelIndex(vec![k1, k2]), v));
                }
            }
        }
        bf.sort_by(|a, b| a.1.total_cmp(&b.1));
        assert_eq!(l, bf);
        // (0,1) sits at 3 + 3·2 + 0.5 = 9.5, above emax
        assert_eq!(l, vec![(LevelIndex(vec![0, 0]), 5.5)]);
        let l = enumerate_levels(&ms(vec![1.0], -2.0, 0), 0.0).unwrap();
        assert_eq!(l, vec![(LevelIndex(vec![0]), -1.0)]);
        assert!(matches!(
            enumerate_levels(&ms(vec![], 0.0, 2), 1.0),
            Err(Error::NoMagneticLevels)
        ));
    }

    #[test]
    fn spectrum_min() {
        assert_eq!(model_spectrum_min(&ms(vec![1.0], 0.0, 0)), 1.0);
        assert_eq!(model_spectrum_min(&ms(vec![3.0, 2.0], 0.5, 0)), 5.5);
        assert_eq!(model_spectrum_min(&ms(vec![], 0.7, 2)), 0.7);
    }

    #[test]
    fn constant_sigma_is_inflated_ladder() {
        let fs = constant();
        let sa = sample_sigma(&fs, &fs.domain, 6.0, 0.1).unwrap();
        let rho = sa.covering_radius;
        assert!(rho < 1e-9);
        assert_eq!(sa.intervals.len(), 3);
        for (iv, c) in sa.intervals.iter().zip([1.0, 3.0, 5.0]) {
            assert!((iv.0 - (c - rho)).abs() < 1e-12 && (iv.1 - (c + rho)).abs() < 1e-12);
        }
    }

    #[test]
    fn radial_sigma_and_gaps() {
        let h = 0.5f64.sqrt();
        let fs = radial(0.0, 2.0);
        let dom = Domain::centered(2, h);
        let sa = sample_sigma(&fs, &dom, 4.0, 0.02).unwrap();
        let rho = sa.covering_radius;
        assert_eq!(sa.intervals.len(), 2, "{:?}", sa.intervals);
        // the sample grid misses the centre, so the lower ends sit within ρ of the true minima
        let within = |v: f64, c: f64| v <= c && v >= c - rho;
        assert!(within(sa.intervals[0].0, 1.0));
        assert!((sa.intervals[0].1 - (2.0 + rho)).abs() < 1e-9);
        assert!(within(sa.intervals[1].0, 3.0));
        assert_eq!(sa.intervals[1].1, 4.0);
        let shifted = sample_sigma(&radial(10.0, 2.0), &dom, 4.0, 0.02).unwrap();
        assert!(shifted.intervals.is_empty());
        let gaps = find_gaps(&sa, 0.5);
        assert_eq!(gaps.len(), 2);
        assert!((gaps[1].0 - (2.0 + rho)).abs() < 1e-9 && gaps[1].1 == sa.intervals[1].0);
        let low = sample_sigma(&fs, &dom, 2.0, 0.02).unwrap();
        let g = find_gaps(&low, 0.1);
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].0, 0.0);
    }

    #[test]
    fn distances_and_gaps() {
        let mk = |iv: Vec<(f64, f64)>, rho: f64, lmax: f64| SigmaApprox {
            intervals: iv,
            covering_radius: rho,
            domain: Domain::centered(2, 1.0),
            sample_step: 0.1,
            lmax,
            lipschitz: 0.0,
            semiaxis: false,
        };
        let sa = mk(vec![(1.0, 1.0), (3.0, 3.0)], 0.0, 6.0);
        assert_eq!(sigma_distance(2.0, &sa), 1.0);
        assert_eq!(sigma_distance(1.5, &mk(vec![(0.95, 2.05)], 0.05, 6.0)), 0.0);
        let sa = mk(vec![(1.0, 2.0), (3.0, 4.0)], 0.0, 6.0);
        assert!((sigma_distance(2.6, &sa) - 0.4).abs() < 1e-15);
        assert_eq!(find_gaps(&sa, 0.5), vec![(0.0, 1.0), (2.0, 3.0), (4.0, 6.0)]);
        let ladder = mk(vec![(0.9, 1.1), (2.9, 3.1), (4.9, 5.1)], 0.1, 6.0);
        let g = find_gaps(&ladder, 0.5);
        assert_eq!(g[1], (1.1, 2.9));
        assert_eq!(g[2], (3.1, 4.9));
        assert_eq!(find_gaps(&mk(vec![(1.0, 2.0)], 0.0, 2.0), 0.1), vec![(0.0, 1.0)]);
    }

    #[test]
    fn kset_examples() {
        let fs = radial(0.0, 2.0);
        let g = GridSpec::uniform(&fs.domain, 81, DEFAULT_NODE_CAP).unwrap();
        let k = kset(&fs, (1.5, 2.5), &g, 0.5).unwrap();
        assert!(k.compact_flag);
        for i in 0..g.len() {
            let x = g.coord(i);
            let r2 = x[0] * x[0] + x[1] * x[1];
            assert_eq!(k.mask[i], (0.5..=1.5).contains(&r2), "{x:?}");
        }
        let fs = constant();
        let g = GridSpec::uniform(&fs.domain, 16, DEFAULT_NODE_CAP).unwrap();
        let full = kset(&fs, (0.5, 1.5), &g, 0.2).unwrap();
        assert_eq!(full.count(), g.len());
        assert!(!full.compact_flag);
        assert!(!kset(&fs, (0.5, 1.5), &g, 0.0).unwrap().compact_flag);
        let empty = kset(&fs, (1.5, 2.5), &g, 0.2).unwrap();
        assert_eq!(empty.count(), 0);
        assert!(empty.compact_flag);
        assert!(kset(&fs, (2.0, 1.0), &g, 0.2).is_err());
    }

    #[test]
    fn f0_examples() {
        let bump = TestFunction::bump(0.5, 1.5).unwrap();
        let v = model_f0(&ms(vec![1.0], 0.0, 0), &bump, 1e-9).unwrap();
        assert!((v - 1.0 / (2.0 * PI)).abs() < 1e-15);
        let zero = model_f0_with(&ms(vec![1.0], 0.0, 0), |_| 0.0, (0.5, 1.5), 1e-9).unwrap();
        assert_eq!(zero, 0.0);
        // d = 3, one zero mode; oracle: trapezoid over ξ ∈ ℝ
        let wide = TestFunction::bump(0.5, 2.5).unwrap();
        let got = model_f0(&ms(vec![1.0], 0.0, 1), &wide, 1e-10).unwrap();
        let n = 200_000;
        let xi_max = 1.5f64.sqrt();
        let dx = 2.0 * xi_max / n as f64;
        let trap: f64 = (0..=n)
            .map(|i| {
                let xi = -xi_max + i as f64 * dx;
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                w * wide.eval(xi * xi + 1.0)
            })
            .sum::<f64>()
            * dx;
        let want = trap / (2.0 * PI).powi(2);
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        assert!(model_f0(
            &ms(vec![1.0], 0.0, 0),
            &TestFunction {
                support: (0.0, f64::INFINITY),
                ..bump
            },
            1e-9
        )
        .is_err());
    }

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(1) - 2.0).abs() < 1e-15);
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-14);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-14);
        assert!((sphere_area(4) - 2.0 * PI * PI).abs() < 1e-13);
    }
}
