//! Window eigenpairs of the lattice operator and spectral functions
//! `φ(H/ħ)` built from them.

mod eigs;
mod io;
mod testfn;

pub use eigs::{count_below, eigs_window, eigs_window_with, pair_residual, EigenWindowResult, EigsOptions};
pub use io::{read_eigvecs, write_eigenvalues_csv, write_eigvecs, EIGVEC_MAGIC};
pub use testfn::{TestFunction, TestKind};

use num_complex::Complex64;

use crate::landau::{sigma_distance, SigmaApprox};
use crate::{Error, Result};

fn check_support(ew: &EigenWindowResult, phi: &TestFunction) -> Result<()> {
    let (lo, hi) = phi.support;
    let (wlo, whi) = ew.window;
    if lo < wlo || hi > whi {
        return Err(Error::SupportOutsideWindow { lo, hi, wlo, whi });
    }
    if !ew.complete_flag {
        return Err(Error::Incomplete(format!(
            "found {} of {} eigenvalues",
            ew.len(),
            ew.expected
        )));
    }
    Ok(())
}

/// `Σ_i φ(λ_i)|u_i(x₀)|²`, the diagonal of the kernel of `φ(H/ħ)`.
pub fn ldos(ew: &EigenWindowResult, phi: &TestFunction, x0: usize) -> Result<f64> {
    check_support(ew, phi)?;
    Ok(ew
        .lambdas
        .iter()
        .enumerate()
        .map(|(i, &l)| phi.eval(l) * ew.vectors[(x0, i)].norm_sqr())
        .sum())
}

/// `Σ_i φ(λ_i)·u_i(x₀)·conj(u_i(x₁))`.
pub fn kernel_offdiag(ew: &EigenWindowResult, phi: &TestFunction, x0: usize, x1: usize) -> Result<Complex64> {
    check_support(ew, phi)?;
    Ok(ew
        .lambdas
        .iter()
        .enumerate()
        .map(|(i, &l)| phi.eval(l) * ew.vectors[(x0, i)] * ew.vectors[(x1, i)].conj())
        .sum())
}

/// Kernel of the spectral projector onto `[a, b]` (units of `H/ħ`) at `(x₀, x₁)`.
pub fn projector_kernel(ew: &EigenWindowResult, interval: (f64, f64), x0: usize, x1: usize) -> Complex64 {
    ew.lambdas
        .iter()
        .enumerate()
        .filter(|(_, &l)| l >= interval.0 && l <= interval.1)
        .map(|(i, _)| ew.vectors[(x0, i)] * ew.vectors[(x1, i)].conj())
        .sum()
}

/// `Σ_{λ_i ∈ [a,b]} |u_i(x₀)|²`. Endpoints must lie in gaps of `sa` when given.
pub fn projector_diag(
    ew: &EigenWindowResult,
    interval: (f64, f64),
    x0: usize,
    sa: Option<&SigmaApprox>,
) -> Result<f64> {
    let (a, b) = interval;
    if !(a <= b) || a < ew.window.0 || b > ew.window.1 {
        return Err(Error::InvalidArgument(format!(
            "interval [{a}, {b}] is not inside the window [{}, {}]",
            ew.window.0, ew.window.1
        )));
    }
    if let Some(sa) = sa {
        for e in [a, b] {
            if sigma_distance(e, sa) == 0.0 {
                return Err(Error::EndpointInSigma(e));
            }
        }
    }
    if !ew.complete_flag {
        return Err(Error::Incomplete(format!("found {} of {}", ew.len(), ew.expected)));
    }
    Ok(projector_kernel(ew, interval, x0, x0).re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Domain, FieldSpec, MagneticFamily, PotentialFamily};
    use crate::lattice::{GridSpec, LatticeOperator, DEFAULT_NODE_CAP};
    use nalgebra::DMatrix;
    use std::f64::consts::PI;

    fn op(b: f64, hbar: f64, n: usize, half: f64) -> LatticeOperator {
        let fs = FieldSpec::new(
            MagneticFamily::Constant(DMatrix::from_row_slice(2, 2, &[0.0, b, -b, 0.0])),
            PotentialFamily::Zero,
            None,
            Domain::centered(2, half),
            None,
        )
        .unwrap();
        let g = GridSpec::uniform(&fs.domain, n, DEFAULT_NODE_CAP).unwrap();
        LatticeOperator::assemble(&fs, &g, hbar).unwrap()
    }

    #[test]
    fn free_laplacian_window() {
        let o = op(0.0, 1.0, 20, 0.5);
        let h = 1.0 / 21.0;
        let mut exact = Vec::new();
        for m in 1..=20 {
            for l in 1..=20 {
                let s = |k: usize| (PI * k as f64 * h / 2.0).sin().powi(2);
                exact.push(4.0 / (h * h) * (s(m) + s(l)));
            }
        }
        exact.sort_by(f64::total_cmp);
        // stay below the 0.5·ħ/h² validity ceiling
        let k = exact.iter().filter(|&&e| e < 0.45 / (h * h)).count();
        assert!(k > 10);
        let window = (0.0, 0.5 * (exact[k - 1] + exact[k]));
        let ew = eigs_window(&o, window, &EigsOptions::default()).unwrap();
        assert!(ew.complete_flag);
        assert_eq!(ew.len(), k);
        for (a, b) in ew.lambdas.iter().zip(&exact) {
            assert!((a - b).abs() < 1e-8 * b, "{a} vs {b}");
        }
        assert!(ew.orthogonality_error() < 1e-8);
        assert!(ew.residuals.iter().all(|&r| r <= ew.tol));
    }

    #[test]
    fn landau_window_and_kernels() {
        let o = op(1.0, 0.1, 30, 1.5);
        let ew = eigs_window(&o, (0.0, 4.0), &EigsOptions::default()).unwrap();
        assert!(ew.complete_flag, "{} of {}", ew.len(), ew.expected);
        let mut dense: Vec<f64> = o
            .to_dense()
            .symmetric_eigenvalues()
            .iter()
            .map(|v| v / 0.1)
            .filter(|&v| v <= 4.0)
            .collect();
        dense.sort_by(f64::total_cmp);
        assert_eq!(dense.len(), ew.len());
        for (a, b) in ew.lambdas.iter().zip(&dense) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
        // the two lowest states sit in the bulk Landau level
        assert!((ew.lambdas[0] - 1.0).abs() < 0.02);
        let first_gap = ew.lambdas.windows(2).position(|w| w[0] < 1.5 && w[1] > 1.5);
        let gap = (
            ew.lambdas[first_gap.unwrap()] + 1e-3,
            ew.lambdas[first_gap.unwrap() + 1] - 1e-3,
        );
        let empty = eigs_window(&o, gap, &EigsOptions::default()).unwrap();
        assert!(empty.is_empty() && empty.complete_flag);
        let phi = TestFunction::bump(0.5, 1.5).unwrap();
        let x0 = o.grid.nearest_node(&[0.0, 0.0]);
        let d = ldos(&ew, &phi, x0).unwrap();
        let k = kernel_offdiag(&ew, &phi, x0, x0).unwrap();
        assert!((k.re - d).abs() < 1e-12 && k.im.abs() < 1e-12);
        // trace identity
        let w = o.grid.cell_volume();
        let trace: f64 = (0..o.dim()).map(|i| ldos(&ew, &phi, i).unwrap()).sum::<f64>() * w;
        let direct: f64 = ew.lambdas.iter().map(|&l| phi.eval(l)).sum();
        assert!((trace - direct).abs() <= 1e-10 * direct);
        assert!(ldos(&ew, &TestFunction::bump(3.5, 4.5).unwrap(), x0).is_err());
        assert_eq!(projector_diag(&ew, (0.0, 0.5), x0, None).unwrap(), 0.0);
    }
}
