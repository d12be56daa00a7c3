//! Peierls-phase finite-difference discretization of `H_ħ` on a box with
//! Dirichlet boundary.

use std::io::Write;
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::field::{Domain, FieldSpec};
use crate::par;
use crate::{Error, Result};

pub const DEFAULT_NODE_CAP: usize = 2_000_000;
pub const MIN_NODES_PER_AXIS: usize = 8;
pub const STENCIL: &str = "link-phase-2nd-order";

/// Uniform tensor grid of interior nodes. Node `i` on axis `a` sits at
/// `lo[a] + (i+1)·h[a]`; the linear index runs fastest along axis 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub n: Vec<usize>,
    pub h: Vec<f64>,
}

impl GridSpec {
    pub fn new(domain: &Domain, n: Vec<usize>, cap: usize) -> Result<Self> {
        if n.len() != domain.dim() {
            return Err(Error::InvalidArgument(format!(
                "grid has {} axes, domain has {}",
                n.len(),
                domain.dim()
            )));
        }
        if let Some(&bad) = n.iter().find(|&&k| k < MIN_NODES_PER_AXIS) {
            return Err(Error::InvalidArgument(format!(
                "need at least {MIN_NODES_PER_AXIS} nodes per axis, got {bad}"
            )));
        }
        let total = n.iter().try_fold(1usize, |acc, &k| acc.checked_mul(k));
        match total {
            Some(t) if t <= cap => {}
            _ => {
                return Err(Error::NodeCap {
                    nodes: total.unwrap_or(usize::MAX),
                    cap,
                })
            }
        }
        let h = domain
            .lo
            .iter()
            .zip(&domain.hi)
            .zip(&n)
            .map(|((l, u), &k)| (u - l) / (k + 1) as f64)
            .collect();
        Ok(Self {
            lo: domain.lo.clone(),
            hi: domain.hi.clone(),
            n,
            h,
        })
    }

    /// Same node count on every axis.
    pub fn uniform(domain: &Domain, n: usize, cap: usize) -> Result<Self> {
        Self::new(domain, vec![n; domain.dim()], cap)
    }

    /// Spacing as close as possible to `h` (never coarser) on every axis.
    pub fn with_spacing(domain: &Domain, h: f64, cap: usize) -> Result<Self> {
        let n = domain
            .lo
            .iter()
            .zip(&domain.hi)
            .map(|(l, u)| (((u - l) / h).ceil() as usize).saturating_sub(1).max(1))
            .collect();
        Self::new(domain, n, cap)
    }

    pub fn domain(&self) -> Domain {
        Domain {
            lo: self.lo.clone(),
            hi: self.hi.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n.len()
    }

    pub fn len(&self) -> usize {
        self.n.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `Π h_j`, the discrete L² weight.
    pub fn cell_volume(&self) -> f64 {
        self.h.iter().product()
    }

    pub fn strides(&self) -> Vec<usize> {
        let mut s = Vec::with_capacity(self.dim());
        let mut acc = 1;
        for &k in &self.n {
            s.push(acc);
            acc *= k;
        }
        s
    }

    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        self.n
            .iter()
            .map(|&k| {
                let i = idx % k;
                idx /= k;
                i
            })
            .collect()
    }

    pub fn linear(&self, mi: &[usize]) -> usize {
        mi.iter().zip(&self.n).rev().fold(0, |acc, (&i, &k)| acc * k + i)
    }

    pub fn axis_coord(&self, axis: usize, i: usize) -> f64 {
        self.lo[axis] + (i + 1) as f64 * self.h[axis]
    }

    pub fn coord(&self, idx: usize) -> Vec<f64> {
        self.multi_index(idx)
            .iter()
            .enumerate()
            .map(|(a, &i)| self.axis_coord(a, i))
            .collect()
    }

    /// Node closest to `x` (clamped to the interior).
    pub fn nearest_node(&self, x: &[f64]) -> usize {
        let mi: Vec<usize> = x
            .iter()
            .enumerate()
            .map(|(a, &v)| {
                let t = ((v - self.lo[a]) / self.h[a]).round() - 1.0;
                t.clamp(0.0, (self.n[a] - 1) as f64) as usize
            })
            .collect();
        self.linear(&mi)
    }

    /// Distance from a node to the box boundary.
    pub fn boundary_distance(&self, idx: usize) -> f64 {
        self.coord(idx)
            .iter()
            .enumerate()
            .map(|(a, &v)| (v - self.lo[a]).min(self.hi[a] - v))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Sparse Hermitian lattice operator in CSR layout.
#[derive(Debug, Clone)]
pub struct LatticeOperator {
    pub grid: GridSpec,
    pub hbar: f64,
    pub row_ptr: Vec<usize>,
    pub col: Vec<usize>,
    pub val: Vec<Complex64>,
    pub stencil: &'static str,
}

/// `exp(−(i/ħ)·A_j(midpoint)·h_j)` for the edge from `node` along `axis`.
pub fn link_phase(fs: &FieldSpec, hbar: f64, grid: &GridSpec, node: usize, axis: usize) -> Result<Complex64> {
    let mut mid = grid.coord(node);
    mid[axis] += 0.5 * grid.h[axis];
    edge_phase(fs, hbar, &mid, axis, grid.h[axis])
}

fn edge_phase(fs: &FieldSpec, hbar: f64, mid: &[f64], axis: usize, h: f64) -> Result<Complex64> {
    let a = fs.a(mid)?;
    let theta = a[axis] * h / hbar;
    if !theta.is_finite() {
        return Err(Error::NonFinite(mid.to_vec()));
    }
    Ok(Complex64::new(theta.cos(), -theta.sin()))
}

const ASSEMBLY_BLOCK: usize = 2048;

impl LatticeOperator {
    /// Assembles the lattice operator. Off-diagonal entries are
    /// `−(ħ²/h_j²)·U`, the diagonal `ħ²Σ2/h_j² + ħV(x)`; exterior couplings are
    /// dropped (Dirichlet).
    pub fn assemble(fs: &FieldSpec, grid: &GridSpec, hbar: f64) -> Result<Self> {
        if !(hbar > 0.0) {
            return Err(Error::InvalidArgument(format!("hbar must be positive, got {hbar}")));
        }
        if grid.dim() != fs.dim {
            return Err(Error::InvalidArgument("grid and field dimension differ".into()));
        }
        let n = grid.len();
        let d = grid.dim();
        let strides = grid.strides();
        let kin: Vec<f64> = grid.h.iter().map(|h| hbar * hbar / (h * h)).collect();
        let diag_kin: f64 = kin.iter().map(|k| 2.0 * k).sum();
        let blocks = n.div_ceil(ASSEMBLY_BLOCK);
        type Block = Result<(Vec<usize>, Vec<Complex64>, Vec<usize>)>;
        let parts: Vec<Block> = par::map_range(blocks, |b| {
            let start = b * ASSEMBLY_BLOCK;
            let end = (start + ASSEMBLY_BLOCK).min(n);
            let mut cols = Vec::with_capacity((end - start) * (2 * d + 1));
            let mut vals = Vec::with_capacity((end - start) * (2 * d + 1));
            let mut counts = Vec::with_capacity(end - start);
            for row in start..end {
                let mi = grid.multi_index(row);
                let x = grid.coord(row);
                let before = cols.len();
                // lower neighbours, highest axis first so columns ascend
                for a in (0..d).rev() {
                    if mi[a] > 0 {
                        let mut mid = x.clone();
                        mid[a] = grid.axis_coord(a, mi[a] - 1) + 0.5 * grid.h[a];
                        // phase of the edge from the lower node, conjugated
                        let u = edge_phase(fs, hbar, &mid, a, grid.h[a])?.conj();
                        cols.push(row - strides[a]);
                        vals.push(-kin[a] * u);
                    }
                }
                let v = fs.v(&x);
                if !v.is_finite() {
                    return Err(Error::NonFinite(x));
                }
                cols.push(row);
                vals.push(Complex64::new(diag_kin + hbar * v, 0.0));
                for a in 0..d {
                    if mi[a] + 1 < grid.n[a] {
                        let mut mid = x.clone();
                        mid[a] = grid.axis_coord(a, mi[a]) + 0.5 * grid.h[a];
                        let u = edge_phase(fs, hbar, &mid, a, grid.h[a])?;
                        cols.push(row + strides[a]);
                        vals.push(-kin[a] * u);
                    }
                }
                counts.push(cols.len() - before);
            }
            Ok((cols, vals, counts))
        });
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut col = Vec::with_capacity(n * (2 * d + 1));
        let mut val = Vec::with_capacity(n * (2 * d + 1));
        for part in parts {
            let (c, v, counts) = part?;
            for k in counts {
                row_ptr.push(row_ptr.last().unwrap() + k);
            }
            col.extend(c);
            val.extend(v);
        }
        Ok(Self {
            grid: grid.clone(),
            hbar,
            row_ptr,
            col,
            val,
            stencil: STENCIL,
        })
    }

    pub fn dim(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.val.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[Complex64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col[r.clone()], &self.val[r])
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        let (c, v) = self.row(i);
        match c.binary_search(&j) {
            Ok(k) => v[k],
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.get(i, i).re).collect()
    }

    /// Gershgorin bound on the spectral norm.
    pub fn norm_bound(&self) -> f64 {
        (0..self.dim())
            .map(|i| self.row(i).1.iter().map(|v| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Number of stored pairs `(i,j)` with `H_ij ≠ conj(H_ji)`; zero by construction.
    pub fn hermiticity_violations(&self) -> usize {
        let mut bad = 0;
        for i in 0..self.dim() {
            let (c, v) = self.row(i);
            for (&j, &x) in c.iter().zip(v) {
                if x != self.get(j, i).conj() {
                    bad += 1;
                }
            }
        }
        bad
    }

    pub fn matvec(&self, x: &[Complex64], y: &mut [Complex64]) {
        par::for_each_chunk_mut(y, 4096, |start, out| {
            for (k, yi) in out.iter_mut().enumerate() {
                let (c, v) = self.row(start + k);
                let mut s = Complex64::new(0.0, 0.0);
                for (&j, &a) in c.iter().zip(v) {
                    s += a * x[j];
                }
                *yi = s;
            }
        });
    }

    /// `H·X` for a block of column vectors stored as an `(N, b)` array.
    pub fn apply_block(&self, x: ArrayView2<Complex64>) -> Array2<Complex64> {
        let b = x.ncols();
        let xs = x.as_standard_layout();
        let xs = xs.as_slice().expect("standard layout");
        let mut out = vec![Complex64::new(0.0, 0.0); self.dim() * b];
        par::for_each_chunk_mut(&mut out, 1024 * b.max(1), |start, chunk| {
            let r0 = start / b.max(1);
            for (k, yrow) in chunk.chunks_mut(b).enumerate() {
                let (c, v) = self.row(r0 + k);
                for (&j, &a) in c.iter().zip(v) {
                    let xr = &xs[j * b..(j + 1) * b];
                    for (y, &xv) in yrow.iter_mut().zip(xr) {
                        *y += a * xv;
                    }
                }
            }
        });
        Array2::from_shape_vec((self.dim(), b), out).expect("shape")
    }

    /// `G·H·G⁻¹` with `G = diag(exp(iχ(x)/ħ))`.
    pub fn gauge_transform<F>(&self, chi: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let hbar = self.hbar;
        let phase: Vec<Complex64> = par::map_range(self.dim(), |i| {
            let t = chi(&self.grid.coord(i)) / hbar;
            Complex64::new(t.cos(), t.sin())
        });
        let mut val = self.val.clone();
        par::for_each_chunk_mut(&mut val, 1 << 14, |start, chunk| {
            // locate the row of the first entry in this chunk
            let mut row = self.row_ptr.partition_point(|&p| p <= start) - 1;
            for (k, v) in chunk.iter_mut().enumerate() {
                let e = start + k;
                while self.row_ptr[row + 1] <= e {
                    row += 1;
                }
                let j = self.col[e];
                if j != row {
                    // phase[row]·conj(phase[j]) is formed first so that the
                    // mirrored entry gets the exact conjugate factor
                    let p = phase[row] * phase[j].conj();
                    *v = p * *v;
                }
            }
        });
        Self { val, ..self.clone() }
    }

    /// Dense copy; for tests on small grids.
    pub fn to_dense(&self) -> nalgebra::DMatrix<Complex64> {
        let n = self.dim();
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for i in 0..n {
            let (c, v) = self.row(i);
            for (&j, &x) in c.iter().zip(v) {
                m[(i, j)] = x;
            }
        }
        m
    }

    /// Coordinate-format text dump: one `row col re im` line per stored entry.
    pub fn dump_coo(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "# {} {} {}", self.dim(), self.dim(), self.nnz())?;
        for i in 0..self.dim() {
            let (c, v) = self.row(i);
            for (&j, x) in c.iter().zip(v) {
                writeln!(w, "{i} {j} {:e} {:e}", x.re, x.im)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
