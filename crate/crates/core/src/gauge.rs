//! Transverse (Poincaré / Fock-Schwinger) gauge around a base point.
//!
//! For a base point `x₀` and displacement `Z`:
//! `Φ(x₀+Z) = −Σ_j ∫₀¹ A_j(x₀+τZ) Z_j dτ` and
//! `A^(x₀)_j(x₀+Z) = Σ_k (∫₀¹ B_kj(x₀+τZ) τ dτ) Z_k`.
//! The second one needs only `B` and satisfies `⟨Z, A^(x₀)(x₀+Z)⟩ = 0`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::field::FieldSpec;
use crate::fit::{fit_power_law, LineFit};
use crate::quad::GaussLegendre;
use crate::{Error, Result};

pub const DEFAULT_QUAD_ORDER: usize = 16;

/// Residuals below this are treated as exact in [`verify_taylor_order`].
pub const EXACT_RESIDUAL: f64 = 1e-13;

/// `A^(x₀)(x₀+Z)` for an arbitrary field evaluator.
pub fn transverse_potential_with<F>(b: F, x0: &[f64], z: &[f64], gl: &GaussLegendre) -> Vec<f64>
where
    F: Fn(&[f64]) -> DMatrix<f64>,
{
    let d = x0.len();
    let mut out = vec![0.0; d];
    if z.iter().all(|&v| v == 0.0) {
        return out;
    }
    let mut p = vec![0.0; d];
    for (&t, &w) in gl.nodes.iter().zip(&gl.weights) {
        for i in 0..d {
            p[i] = x0[i] + t * z[i];
        }
        let bm = b(&p);
        for (j, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for (k, &zk) in z.iter().enumerate() {
                s += bm[(k, j)] * zk;
            }
            *o += w * t * s;
        }
    }
    out
}

/// Transverse potential at `x₀ + Z` using the field's own quadrature order.
pub fn transverse_potential(fs: &FieldSpec, x0: &[f64], z: &[f64]) -> Vec<f64> {
    transverse_potential_with(|p| fs.b(p), x0, z, fs.quadrature())
}

/// Gauge phase `Φ^(x₀)(x₀+Z)`; needs the field's vector potential.
pub fn transverse_phase(fs: &FieldSpec, x0: &[f64], z: &[f64]) -> Result<f64> {
    phase_with(fs, x0, z, fs.quadrature())
}

fn phase_with(fs: &FieldSpec, x0: &[f64], z: &[f64], gl: &GaussLegendre) -> Result<f64> {
    if !fs.has_vector_potential() {
        return Err(Error::MissingVectorPotential);
    }
    if z.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let mut p = vec![0.0; x0.len()];
    let mut acc = 0.0;
    for (&t, &w) in gl.nodes.iter().zip(&gl.weights) {
        for i in 0..p.len() {
            p[i] = x0[i] + t * z[i];
        }
        let a = fs.a(&p)?;
        acc += w * a.iter().zip(z).map(|(a, z)| a * z).sum::<f64>();
    }
    Ok(-acc)
}

/// Linear model potential `A_{j,x₀}(Z) = ½ Σ_k B_kj(x₀) Z_k`.
pub fn model_potential(b0: &DMatrix<f64>, z: &[f64]) -> Vec<f64> {
    (0..z.len())
        .map(|j| 0.5 * z.iter().enumerate().map(|(k, zk)| b0[(k, j)] * zk).sum::<f64>())
        .collect()
}

/// Gauge data at a fixed base point with its own quadrature order.
pub struct GaugeData<'a> {
    pub field: &'a FieldSpec,
    pub x0: Vec<f64>,
    pub quad_order: usize,
    gl: GaussLegendre,
}

impl<'a> GaugeData<'a> {
    pub fn new(field: &'a FieldSpec, x0: &[f64], quad_order: usize) -> Self {
        Self {
            field,
            x0: x0.to_vec(),
            quad_order,
            gl: GaussLegendre::new(quad_order),
        }
    }

    pub fn phi(&self, z: &[f64]) -> Result<f64> {
        phase_with(self.field, &self.x0, z, &self.gl)
    }

    pub fn a_trans(&self, z: &[f64]) -> Vec<f64> {
        transverse_potential_with(|p| self.field.b(p), &self.x0, z, &self.gl)
    }

    /// `⟨Z, A^(x₀)(x₀+Z)⟩`, zero up to rounding.
    pub fn radial_residual(&self, z: &[f64]) -> f64 {
        self.a_trans(z).iter().zip(z).map(|(a, z)| a * z).sum()
    }
}

/// Outcome of the Taylor-order check.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaylorOrder {
    /// Every residual is below [`EXACT_RESIDUAL`].
    Exact,
    Slope {
        fit: LineFit,
        residuals: Vec<(f64, f64)>,
    },
}

impl TaylorOrder {
    pub fn slope(&self) -> Option<f64> {
        match self {
            TaylorOrder::Exact => None,
            TaylorOrder::Slope { fit, .. } => Some(fit.slope),
        }
    }
}

/// Fits `log |A^(x₀)(x₀+Z) − A_{x₀}(Z)|` against `log |Z|` along the given
/// directions and radii.
pub fn verify_taylor_order(fs: &FieldSpec, x0: &[f64], directions: &[Vec<f64>], radii: &[f64]) -> Result<TaylorOrder> {
    if radii.len() < 4 {
        return Err(Error::InvalidArgument("need at least 4 radii".into()));
    }
    if radii.windows(2).any(|w| !(w[1] < w[0])) || radii.iter().any(|&r| r <= 0.0) {
        return Err(Error::InvalidArgument("radii must be positive and decreasing".into()));
    }
    let b0 = fs.b(x0);
    let mut pairs = Vec::new();
    for dir in directions {
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 || dir.len() != x0.len() {
            return Err(Error::InvalidArgument(format!("bad direction {dir:?}")));
        }
        for &r in radii {
            let z: Vec<f64> = dir.iter().map(|v| v / norm * r).collect();
            let at = transverse_potential(fs, x0, &z);
            let am = model_potential(&b0, &z);
            let res = at.iter().zip(&am).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            pairs.push((r, res));
        }
    }
    if pairs.iter().all(|&(_, res)| res < EXACT_RESIDUAL) {
        return Ok(TaylorOrder::Exact);
    }
    let kept: Vec<(f64, f64)> = pairs.iter().copied().filter(|&(_, r)| r > 0.0).collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = kept.iter().copied().unzip();
    let fit = fit_power_law(&xs, &ys)?;
    Ok(TaylorOrder::Slope { fit, residuals: pairs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Domain, MagneticFamily, Polynomial, PotentialFamily, VectorPotential};

    fn constant(gauge: Option<VectorPotential>) -> FieldSpec {
        FieldSpec::new(
            MagneticFamily::Constant(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])),
            PotentialFamily::Zero,
            gauge,
            Domain::centered(2, 2.0),
            None,
        )
        .unwrap()
    }

    fn quadratic() -> FieldSpec {
        FieldSpec::new(
            MagneticFamily::Polynomial(vec![((0, 1), Polynomial::parse(2, "1 + x1^2").unwrap())]),
            PotentialFamily::Zero,
            None,
            Domain::centered(2, 2.0),
            None,
        )
        .unwrap()
    }

    #[test]
    fn symmetric_gauge_has_zero_phase() {
        let fs = constant(None);
        let v = transverse_phase(&fs, &[0.0, 0.0], &[0.7, -1.1]).unwrap();
        assert!(v.abs() < 1e-15);
    }

    #[test]
    fn landau_gauge_phase() {
        let fs = constant(Some(VectorPotential::Landau { center: vec![0.0, 0.0] }));
        let v = transverse_phase(&fs, &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((v + 0.5).abs() < 1e-14);
        assert_eq!(transverse_phase(&fs, &[0.0, 0.0], &[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn transverse_potential_examples() {
        let fs = constant(None);
        let a = transverse_potential(&fs, &[0.0, 0.0], &[0.4, 0.6]);
        assert!((a[0] + 0.3).abs() < 1e-15 && (a[1] - 0.2).abs() < 1e-15);
        let fs = quadratic();
        let a = transverse_potential(&fs, &[0.0, 0.0], &[1.0, 0.0]);
        assert!(a[0].abs() < 1e-15 && (a[1] - 0.75).abs() < 1e-14);
        assert_eq!(transverse_potential(&fs, &[0.1, 0.2], &[0.0, 0.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn taylor_order() {
        let dirs = vec![vec![1.0, 0.0], vec![0.6, 0.8]];
        let radii: Vec<f64> = (0..5).map(|i| 0.5 / 2f64.powi(i)).collect();
        assert!(matches!(
            verify_taylor_order(&constant(None), &[0.0, 0.0], &dirs, &radii).unwrap(),
            TaylorOrder::Exact
        ));
        let t = verify_taylor_order(&quadratic(), &[0.0, 0.0], &dirs[..1], &radii).unwrap();
        let s = t.slope().unwrap();
        assert!(s >= 1.9, "slope {s}");
        if let TaylorOrder::Slope { residuals, .. } = t {
            assert!(residuals.windows(2).all(|w| w[1].1 < w[0].1));
        }
        assert!(verify_taylor_order(&quadratic(), &[0.0, 0.0], &dirs, &radii[..3]).is_err());
    }

    #[test]
    fn gauge_data_is_consistent_with_phase() {
        // A^(x₀) = A + ∇Φ, checked by central differences
        let fs = FieldSpec::new(
            MagneticFamily::RadialWell {
                b0: 1.0,
                b2: 1.0,
                center: vec![0.0, 0.0],
            },
            PotentialFamily::Zero,
            None,
            Domain::centered(2, 2.0),
            None,
        )
        .unwrap();
        let x0 = [0.3, -0.2];
        let g = GaugeData::new(&fs, &x0, 16);
        let z = [0.5, 0.4];
        let h = 1e-4;
        let at = g.a_trans(&z);
        let p: Vec<f64> = x0.iter().zip(&z).map(|(a, b)| a + b).collect();
        let a = fs.a(&p).unwrap();
        for j in 0..2 {
            let mut zp = z;
            let mut zm = z;
            zp[j] += h;
            zm[j] -= h;
            let grad = (g.phi(&zp).unwrap() - g.phi(&zm).unwrap()) / (2.0 * h);
            assert!((a[j] + grad - at[j]).abs() < 1e-7, "{j}: {} vs {}", a[j] + grad, at[j]);
        }
        assert!(g.radial_residual(&z).abs() < 1e-14);
    }
}
