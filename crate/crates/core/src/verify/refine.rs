//! Eigenvalues of small lattice operators refined by a Rayleigh quotient
//! evaluated in compensated (twice-working-precision) arithmetic.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::lattice::LatticeOperator;

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let z = s - a;
    (s, (a - (s - z)) + (b - z))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Running sum of products with the rounding errors carried separately.
#[derive(Clone, Copy, Default)]
struct Dot2 {
    s: f64,
    c: f64,
}

impl Dot2 {
    fn add_prod(&mut self, a: f64, b: f64) {
        let (p, ep) = two_prod(a, b);
        let (s, es) = two_sum(self.s, p);
        self.s = s;
        self.c += ep + es;
    }

    fn hi_lo(self) -> (f64, f64) {
        two_sum(self.s, self.c)
    }
}

/// `Re(xᴴHx) / xᴴx` in compensated arithmetic.
pub fn rayleigh_quotient(op: &LatticeOperator, x: &[Complex64]) -> f64 {
    let mut num = Dot2::default();
    let mut den = Dot2::default();
    for (i, xi) in x.iter().enumerate() {
        let (cols, vals) = op.row(i);
        let mut yr = Dot2::default();
        let mut yi = Dot2::default();
        for (&j, h) in cols.iter().zip(vals) {
            let xj = x[j];
            yr.add_prod(h.re, xj.re);
            yr.add_prod(-h.im, xj.im);
            yi.add_prod(h.re, xj.im);
            yi.add_prod(h.im, xj.re);
        }
        let (yr_hi, yr_lo) = yr.hi_lo();
        let (yi_hi, yi_lo) = yi.hi_lo();
        num.add_prod(xi.re, yr_hi);
        num.add_prod(xi.im, yi_hi);
        num.c += xi.re * yr_lo + xi.im * yi_lo;
        den.add_prod(xi.re, xi.re);
        den.add_prod(xi.im, xi.im);
    }
    let (n_hi, n_lo) = num.hi_lo();
    let (d_hi, d_lo) = den.hi_lo();
    let q = n_hi / d_hi;
    // one correction step of the double-word quotient
    let (p, ep) = two_prod(q, d_hi);
    q + ((n_hi - p - ep) + n_lo - q * d_lo) / d_hi
}

/// Full spectrum of `op` (units of `H`), ascending. Dense, so only for small grids.
pub fn refined_eigenvalues(op: &LatticeOperator) -> Vec<f64> {
    let eig = op.to_dense().symmetric_eigen();
    let v: &DMatrix<Complex64> = &eig.eigenvectors;
    let mut out: Vec<f64> = (0..v.ncols())
        .map(|k| {
            let x: Vec<Complex64> = v.column(k).iter().copied().collect();
            rayleigh_quotient(op, &x)
        })
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

/// Largest eigenvalue difference between `op` and its gauge transform, in
/// units of `ε_machine·‖H‖` with `‖H‖` the Gershgorin bound.
pub fn gauge_eigen_deviation(op: &LatticeOperator, transformed: &LatticeOperator) -> f64 {
    let a = refined_eigenvalues(op);
    let b = refined_eigenvalues(transformed);
    let worst = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    worst / (f64::EPSILON * op.norm_bound())
}
