use nalgebra::DMatrix;
use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, ArrayView2, Axis, ShapeBuilder};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::lattice::{GridSpec, LatticeOperator};
use crate::sparse::{Factorization, Symbolic};
use crate::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigsOptions {
    /// Residual tolerance relative to the Gershgorin bound of `‖H‖`.
    pub tol: f64,
    /// Restart budget per slice.
    pub max_restarts: usize,
    /// Largest eigenvalue count handled by one shift.
    pub slice_max: usize,
    /// Largest block size of the block Krylov iteration.
    pub block: usize,
    /// Blocks added per expansion between restarts.
    pub depth: usize,
    pub seed: u64,
}

impl Default for EigsOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_restarts: 60,
            slice_max: 48,
            block: 12,
            depth: 6,
            seed: 0x5eed,
        }
    }
}

/// Eigenpairs of `H/ħ` in a window.
#[derive(Debug, Clone)]
pub struct EigenWindowResult {
    /// `[E_lo, E_hi]` in units of `H/ħ`.
    pub window: (f64, f64),
    pub hbar: f64,
    pub grid: GridSpec,
    /// Eigenvalues of `H/ħ`, ascending.
    pub lambdas: Vec<f64>,
    /// Column `i` is the eigenvector of `lambdas[i]`, normalized so that
    /// `Σ|u|²·Πh = 1`.
    pub vectors: Array2<Complex64>,
    /// `‖Hu − ħλu‖ / ‖u‖` in units of `H`.
    pub residuals: Vec<f64>,
    /// Absolute residual tolerance in units of `H`.
    pub tol: f64,
    /// Eigenvalue count in the window from inertia.
    pub expected: usize,
    pub complete_flag: bool,
}

impl EigenWindowResult {
    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    /// Largest deviation of the discrete-L² Gram matrix from the identity.
    pub fn orthogonality_error(&self) -> f64 {
        let w = self.grid.cell_volume();
        let g = self.vectors.t().mapv(|z| z.conj()).dot(&self.vectors);
        let mut worst: f64 = 0.0;
        for ((i, j), v) in g.indexed_iter() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((v * w - target).norm());
        }
        worst
    }
}

/// Shifted factorization, jittering the shift away from tiny pivots.
fn factor_near(op: &LatticeOperator, sym: &Symbolic, shift: f64, spread: f64, keep: bool) -> Result<Factorization> {
    let mut last = None;
    for attempt in 0..8 {
        let s = shift + spread * 1.37e-3 * attempt as f64 * if attempt % 2 == 0 { 1.0 } else { -1.0 };
        match Factorization::new(op, sym, s, keep) {
            Ok(f) => return Ok(f),
            Err(e @ Error::Breakdown { .. }) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

/// Number of eigenvalues of `op` (in units of `H`) below `e`.
pub fn count_below(op: &LatticeOperator, sym: &Symbolic, e: f64) -> Result<usize> {
    let scale = op.norm_bound();
    factor_near(op, sym, e, 1e-9 * scale, false).map(|f| f.negative)
}

fn random_block(rng: &mut ChaCha8Rng, n: usize, b: usize) -> Array2<Complex64> {
    Array2::from_shape_fn((n, b).f(), |_| {
        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    })
}

/// `aᴴb` for column-major blocks without forming `aᴴ`.
fn ct_dot(a: ArrayView2<Complex64>, b: ArrayView2<Complex64>) -> Array2<Complex64> {
    let bc = b.mapv(|z| z.conj());
    let mut c = Array2::zeros((a.ncols(), b.ncols()));
    general_mat_mul(ONE, &a.t(), &bc, ZERO, &mut c);
    c.mapv_inplace(|z| z.conj());
    c
}

/// Orthonormalizes the columns of `w` against `v` and among themselves;
/// returns a basis of what survives. Projection against `v` runs twice
/// (classical Gram-Schmidt), the block itself is orthogonalized through the
/// eigen-decomposition of its Gram matrix, dropping directions whose singular
/// value falls below `1e-6` of the block's own scale.
fn orthonormalize(v: ArrayView2<Complex64>, w: Array2<Complex64>) -> Array2<Complex64> {
    let mut w = w;
    let project = |w: &mut Array2<Complex64>| {
        if v.ncols() > 0 && w.ncols() > 0 {
            let c = ct_dot(v, w.view());
            general_mat_mul(-ONE, &v, &c, ONE, w);
        }
    };
    let norm0: Vec<f64> = w.columns().into_iter().map(col_norm).collect();
    project(&mut w);
    project(&mut w);
    // drop columns that lived in span(v), normalize the rest
    let live: Vec<usize> = (0..w.ncols())
        .filter(|&j| norm0[j] > 0.0 && col_norm(w.column(j)) > 1e-8 * norm0[j])
        .collect();
    let mut w = w.select(Axis(1), &live);
    for mut c in w.columns_mut() {
        let nrm = col_norm(c.view());
        c.mapv_inplace(|z| z / nrm);
    }
    let (mut w, spread) = gram_orth(w, 1e-12);
    if spread > 1e-4 {
        return w;
    }
    // an ill-conditioned block mix amplifies rounding along v; sweep again
    project(&mut w);
    gram_orth(w, 1e-12).0
}

/// `W·U·S^{-1/2}` from `WᴴW = U S Uᴴ`, keeping eigenvalues above `rel·max`.
/// Also returns `min/max` of the kept eigenvalues.
fn gram_orth(w: Array2<Complex64>, rel: f64) -> (Array2<Complex64>, f64) {
    if w.ncols() == 0 {
        return (w, 1.0);
    }
    let g = ct_dot(w.view(), w.view());
    let (s, u) = hermitian_eig(&g);
    let smax = s.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..s.len()).rev().filter(|&i| s[i] > rel * smax).collect();
    let mut t = u.select(Axis(1), &keep);
    for (c, &i) in keep.iter().enumerate() {
        let f = 1.0 / s[i].sqrt();
        t.column_mut(c).mapv_inplace(|z| z * f);
    }
    let mut out = Array2::zeros((w.nrows(), keep.len()).f());
    general_mat_mul(ONE, &w, &t, ZERO, &mut out);
    let smin = keep.last().map_or(smax, |&i| s[i]);
    (out, smin / smax)
}

/// Hermitian eigen-decomposition of a small dense matrix, ascending.
fn hermitian_eig(g: &Array2<Complex64>) -> (Vec<f64>, Array2<Complex64>) {
    let m = g.nrows();
    if m == 0 {
        return (Vec::new(), Array2::zeros((0, 0).f()));
    }
    let mut dm = DMatrix::<Complex64>::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            // symmetrize to kill rounding asymmetry
            dm[(i, j)] = 0.5 * (g[(i, j)] + g[(j, i)].conj());
        }
    }
    let eig = dm.symmetric_eigen();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = Array2::zeros((m, m).f());
    for (c, &i) in order.iter().enumerate() {
        for r in 0..m {
            vecs[(r, c)] = eig.eigenvectors[(r, i)];
        }
    }
    (vals, vecs)
}

/// Solves `(H − σ)X = W` for a column-major block.
fn apply_inverse(fac: &Factorization, w: &Array2<Complex64>) -> Array2<Complex64> {
    let (n, b) = w.dim();
    let mut rm = w.as_standard_layout().into_owned();
    fac.solve_in_place(rm.as_slice_mut().expect("standard layout"), b);
    let mut out = Array2::zeros((n, b).f());
    out.assign(&rm);
    out
}

fn col_norm(c: ndarray::ArrayView1<Complex64>) -> f64 {
    c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

struct SliceOut {
    vectors: Array2<Complex64>,
}

/// Finds `count` eigenpairs of `op` in `[a, b]` (units of `H`).
fn solve_slice(
    op: &LatticeOperator,
    sym: &Symbolic,
    a: f64,
    b: f64,
    count: usize,
    tol_abs: f64,
    opts: &EigsOptions,
    rng: &mut ChaCha8Rng,
) -> Result<SliceOut> {
    let n = op.dim();
    let sigma = 0.5 * (a + b);
    let fac = factor_near(op, sym, sigma, 0.5 * (b - a), true)?;
    let bs = (count + 4).min(opts.block).min(n);
    let extra = count.max(6);
    let keep_max = (count + extra).min(n);
    let m_max = (keep_max + opts.depth * bs).min(n);
    let slack = 10.0 * tol_abs;

    let mut v = Array2::<Complex64>::zeros((n, 0).f());
    let mut hv = Array2::<Complex64>::zeros((n, 0).f());
    let mut next = apply_inverse(&fac, &random_block(rng, n, bs));
    let mut best = 0usize;
    let mut stale = 0usize;
    let mut restarts = 0usize;
    loop {
        // expand to m_max
        while v.ncols() < m_max {
            let room = m_max - v.ncols();
            let mut w = orthonormalize(v.view(), next);
            if w.ncols() == 0 {
                w = orthonormalize(v.view(), apply_inverse(&fac, &random_block(rng, n, bs.min(room))));
                if w.ncols() == 0 {
                    break;
                }
            }
            if w.ncols() > room {
                w = w.slice(s![.., ..room]).to_owned();
            }
            let hw = op.apply_block(w.view());
            next = apply_inverse(&fac, &w);
            v = ndarray::concatenate(Axis(1), &[v.view(), w.view()]).expect("shape");
            hv = ndarray::concatenate(Axis(1), &[hv.view(), hw.view()]).expect("shape");
        }
        let g = ct_dot(v.view(), hv.view());
        let (mu, y) = hermitian_eig(&g);
        // Ritz vectors only for the candidates nearest the shift
        let mut order: Vec<usize> = (0..mu.len()).collect();
        order.sort_by(|&i, &j| (mu[i] - sigma).abs().total_cmp(&(mu[j] - sigma).abs()));
        let inside = order
            .iter()
            .filter(|&&i| mu[i] >= a - slack && mu[i] <= b + slack)
            .count();
        order.truncate(keep_max.max(inside).min(mu.len()));
        order.sort_unstable();
        let ysel = y.select(Axis(1), &order);
        let mu: Vec<f64> = order.iter().map(|&i| mu[i]).collect();
        let x = v.dot(&ysel);
        let hx = hv.dot(&ysel);
        let m = mu.len();
        let resid: Vec<f64> = (0..m)
            .map(|i| {
                let (xc, hc) = (x.column(i), hx.column(i));
                hc.iter()
                    .zip(xc)
                    .map(|(h, x)| (h - x * mu[i]).norm_sqr())
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        let converged: Vec<usize> = (0..m)
            .filter(|&i| mu[i] >= a - slack && mu[i] <= b + slack && resid[i] <= tol_abs)
            .collect();
        if converged.len() >= count {
            return Ok(SliceOut {
                vectors: x.select(Axis(1), &converged),
            });
        }
        restarts += 1;
        if restarts > opts.max_restarts {
            return Err(Error::NoConvergence {
                found: converged.len(),
                expected: count,
                restarts,
            });
        }
        if converged.len() > best {
            best = converged.len();
            stale = 0;
        } else {
            stale += 1;
        }
        // thick restart keeps every selected Ritz vector; the unconverged ones
        // nearest the shift seed the next block
        let mut near: Vec<usize> = (0..m).collect();
        near.sort_by(|&i, &j| (mu[i] - sigma).abs().total_cmp(&(mu[j] - sigma).abs()));
        let unconverged: Vec<usize> = near.into_iter().filter(|&i| resid[i] > tol_abs).take(bs).collect();
        let nv = x.clone();
        let nhv = hx.clone();
        v = nv;
        hv = nhv;
        let mut seed_block = Array2::zeros((n, bs).f());
        for (c, &i) in unconverged.iter().enumerate() {
            seed_block.column_mut(c).assign(&x.column(i));
        }
        // fresh random directions when few candidates remain or progress stalls:
        // near-degenerate clusters need more starting directions than the block holds
        let fill_from = if stale >= 2 { 0 } else { unconverged.len() };
        if fill_from < bs {
            let r = random_block(rng, n, bs - fill_from);
            seed_block.slice_mut(s![.., fill_from..]).assign(&r);
            if stale >= 2 {
                stale = 0;
            }
        }
        next = apply_inverse(&fac, &seed_block);
    }
}

/// All eigenpairs of `op/ħ` in `window`, certified by inertia counts at the
/// window ends.
pub fn eigs_window(op: &LatticeOperator, window: (f64, f64), opts: &EigsOptions) -> Result<EigenWindowResult> {
    let sym = Symbolic::new(&op.grid);
    eigs_window_with(op, &sym, window, opts)
}

pub fn eigs_window_with(
    op: &LatticeOperator,
    sym: &Symbolic,
    window: (f64, f64),
    opts: &EigsOptions,
) -> Result<EigenWindowResult> {
    let (lo, hi) = window;
    let hbar = op.hbar;
    if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidArgument(format!("bad window [{lo}, {hi}]")));
    }
    let hmin = op.grid.h.iter().copied().fold(f64::INFINITY, f64::min);
    let ceiling = 0.5 * hbar / (hmin * hmin);
    if hi > ceiling {
        return Err(Error::InvalidArgument(format!(
            "window top {hi} exceeds the discretization ceiling 0.5·ħ/h² = {ceiling:.3}"
        )));
    }
    let scale = op.norm_bound();
    let tol_abs = opts.tol * scale;
    let (elo, ehi) = (lo * hbar, hi * hbar);
    let n_lo = count_below(op, sym, elo)?;
    let n_hi = count_below(op, sym, ehi)?;
    let expected = n_hi.saturating_sub(n_lo);
    let n = op.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut found: Vec<Array2<Complex64>> = Vec::new();
    if expected > 0 {
        let mut stack = vec![(elo, ehi, n_lo, n_hi)];
        let min_width = 1e-9 * scale;
        while let Some((a, b, na, nb)) = stack.pop() {
            let c = nb - na;
            if c == 0 {
                continue;
            }
            if c > opts.slice_max && b - a > min_width {
                let mid = 0.5 * (a + b);
                let nm = count_below(op, sym, mid)?;
                // upper half first so slices are solved bottom-up
                stack.push((mid, b, nm, nb));
                stack.push((a, mid, na, nm));
                continue;
            }
            found.push(solve_slice(op, sym, a, b, c, tol_abs, opts, &mut rng)?.vectors);
        }
    }
    // global Rayleigh-Ritz over everything found: removes duplicates at slice
    // edges and restores orthogonality between slices
    let views: Vec<_> = found.iter().map(|f| f.view()).collect();
    let all = if views.is_empty() {
        Array2::zeros((n, 0).f())
    } else {
        ndarray::concatenate(Axis(1), &views).expect("shape")
    };
    let q = orthonormalize(Array2::<Complex64>::zeros((n, 0).f()).view(), all);
    let hq = op.apply_block(q.view());
    let g = q.t().mapv(|z| z.conj()).dot(&hq);
    let (mu, y) = hermitian_eig(&g);
    let x = q.dot(&y);
    let hx = hq.dot(&y);
    let mut lambdas = Vec::new();
    let mut residuals = Vec::new();
    let mut cols = Vec::new();
    for i in 0..mu.len() {
        if mu[i] < elo || mu[i] > ehi {
            continue;
        }
        let r = &hx.column(i) - &x.column(i).mapv(|z| z * mu[i]);
        let res = col_norm(r.view());
        if res > tol_abs {
            continue;
        }
        lambdas.push(mu[i] / hbar);
        residuals.push(res);
        cols.push(i);
    }
    let w = 1.0 / op.grid.cell_volume().sqrt();
    let mut vectors = Array2::zeros((n, cols.len()).f());
    for (c, &i) in cols.iter().enumerate() {
        vectors.column_mut(c).assign(&x.column(i).mapv(|z| z * w));
    }
    let complete_flag = lambdas.len() == expected;
    Ok(EigenWindowResult {
        window,
        hbar,
        grid: op.grid.clone(),
        lambdas,
        vectors,
        residuals,
        tol: tol_abs,
        expected,
        complete_flag,
    })
}

/// Residual `‖Hu − ħλu‖/‖u‖` of one pair; used to audit reported pairs.
pub fn pair_residual(op: &LatticeOperator, lambda: f64, u: ndarray::ArrayView1<Complex64>) -> f64 {
    let x = u.to_vec();
    let mut y = vec![ZERO; x.len()];
    op.matvec(&x, &mut y);
    let e = lambda * op.hbar;
    let num: f64 = y
        .iter()
        .zip(&x)
        .map(|(a, b)| (a - b * e).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let den: f64 = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    num / den
}
