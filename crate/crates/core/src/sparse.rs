//! Sparse `LDLᴴ` factorization of shifted lattice operators `H − σI`.
//!
//! Geometric nested dissection on the tensor grid gives an elimination tree
//! whose nodes are boxes (leaves) or separator planes. Factorization is
//! multifrontal: each tree node assembles a dense front over its own
//! variables plus the outside neighbours of its region, eliminates its own
//! variables and passes the Schur complement to its parent. No pivoting is
//! done; a pivot that is tiny relative to `‖H‖` is reported as
//! [`Error::Breakdown`] so the caller can move the shift. The number of
//! negative pivots is the number of eigenvalues below `σ`.

use ndarray::linalg::general_mat_mul;
use ndarray::{ArrayView2, ArrayViewMut2, ShapeBuilder};
use num_complex::Complex64;

use crate::lattice::{GridSpec, LatticeOperator};
use crate::par;
use crate::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Regions with at most this many nodes are not split further.
pub const LEAF_SIZE: usize = 32;
/// Panel width of the blocked partial factorization.
const PANEL: usize = 32;
/// Relative pivot size below which the factorization gives up.
pub const PIVOT_TOL: f64 = 1e-13;
/// Subtrees smaller than this are factored on the calling thread.
const PAR_THRESHOLD: usize = 4096;

#[derive(Debug, Clone)]
struct TreeNode {
    /// Variables eliminated here, sorted.
    elim: Vec<usize>,
    /// Outside neighbours of the region, sorted.
    boundary: Vec<usize>,
    children: Vec<usize>,
    /// Number of grid nodes in the region.
    size: usize,
}

/// Elimination tree for a grid; independent of the operator values.
#[derive(Debug, Clone)]
pub struct Symbolic {
    nodes: Vec<TreeNode>,
    root: usize,
    n: usize,
}

type Region = Vec<(usize, usize)>;

fn region_nodes(grid: &GridSpec, region: &Region) -> Vec<usize> {
    let d = grid.dim();
    let total: usize = region.iter().map(|(a, b)| b - a).product();
    let mut out = Vec::with_capacity(total);
    if total == 0 {
        return out;
    }
    let mut mi: Vec<usize> = region.iter().map(|r| r.0).collect();
    for _ in 0..total {
        out.push(grid.linear(&mi));
        for a in 0..d {
            mi[a] += 1;
            if mi[a] < region[a].1 {
                break;
            }
            mi[a] = region[a].0;
        }
    }
    out.sort_unstable();
    out
}

fn region_boundary(grid: &GridSpec, region: &Region) -> Vec<usize> {
    let mut out = Vec::new();
    for a in 0..grid.dim() {
        let (lo, hi) = region[a];
        let mut faces = Vec::new();
        if lo > 0 {
            faces.push(lo - 1);
        }
        if hi < grid.n[a] {
            faces.push(hi);
        }
        for f in faces {
            let mut face = region.clone();
            face[a] = (f, f + 1);
            out.extend(region_nodes(grid, &face));
        }
    }
    out.sort_unstable();
    out
}

impl Symbolic {
    pub fn new(grid: &GridSpec) -> Self {
        let mut nodes = Vec::new();
        let full: Region = grid.n.iter().map(|&k| (0, k)).collect();
        let root = Self::build(grid, full, &mut nodes);
        Self {
            nodes,
            root,
            n: grid.len(),
        }
    }

    fn build(grid: &GridSpec, region: Region, nodes: &mut Vec<TreeNode>) -> usize {
        let size: usize = region.iter().map(|(a, b)| b - a).product();
        let (axis, len) = region
            .iter()
            .enumerate()
            .map(|(a, (l, h))| (a, h - l))
            .max_by_key(|&(a, l)| (l, std::cmp::Reverse(a)))
            .expect("non-empty region");
        let boundary = region_boundary(grid, &region);
        if size <= LEAF_SIZE || len < 3 {
            nodes.push(TreeNode {
                elim: region_nodes(grid, &region),
                boundary,
                children: Vec::new(),
                size,
            });
            return nodes.len() - 1;
        }
        let (lo, hi) = region[axis];
        let mid = lo + (hi - lo) / 2;
        let mut left = region.clone();
        left[axis] = (lo, mid);
        let mut right = region.clone();
        right[axis] = (mid + 1, hi);
        let mut sep = region.clone();
        sep[axis] = (mid, mid + 1);
        let c1 = Self::build(grid, left, nodes);
        let c2 = Self::build(grid, right, nodes);
        nodes.push(TreeNode {
            elim: region_nodes(grid, &sep),
            boundary,
            children: vec![c1, c2],
            size,
        });
        nodes.len() - 1
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Largest front dimension.
    pub fn max_front(&self) -> usize {
        self.nodes
            .iter()
            .map(|t| t.elim.len() + t.boundary.len())
            .max()
            .unwrap_or(0)
    }

    /// Entries stored in the factor.
    pub fn factor_entries(&self) -> usize {
        self.nodes
            .iter()
            .map(|t| t.elim.len() * (t.elim.len() + t.boundary.len()))
            .sum()
    }
}

/// Dense factor of one front: `idx = elim ++ boundary`, `l` is the `f × k`
/// column-major block of unit-lower `L` columns, `d` the pivots.
#[derive(Debug, Clone)]
struct Front {
    idx: Vec<usize>,
    k: usize,
    l: Vec<Complex64>,
    d: Vec<f64>,
}

/// `LDLᴴ` factorization of `H − σI`.
#[derive(Debug, Clone)]
pub struct Factorization {
    pub shift: f64,
    /// Number of negative pivots = eigenvalues of `H` below `shift`.
    pub negative: usize,
    /// Fronts in postorder; empty for inertia-only factorizations.
    fronts: Vec<Front>,
    n: usize,
}

struct SubtreeOut {
    fronts: Vec<(usize, Front)>,
    update: Vec<Complex64>,
    negative: usize,
}

fn local_pos(front_idx_elim: &[usize], front_idx_bnd: &[usize], g: usize) -> Option<usize> {
    if let Ok(p) = front_idx_elim.binary_search(&g) {
        return Some(p);
    }
    front_idx_bnd.binary_search(&g).ok().map(|p| p + front_idx_elim.len())
}

/// `c ← c − a·bᴴ` on column-major blocks via gemm.
fn gemm_sub_abh(c: ArrayViewMut2<Complex64>, a: ArrayView2<Complex64>, b: ArrayView2<Complex64>) {
    let bh = b.t().mapv(|z| z.conj());
    let mut c = c;
    general_mat_mul(-ONE, &a, &bh, ONE, &mut c);
}

/// Eliminates the first `k` variables of the `f × f` column-major front
/// (lower triangle significant). Returns the pivots; the trailing block
/// then holds the Schur complement.
fn partial_ldl(buf: &mut [Complex64], f: usize, k: usize, tiny: f64, offset: usize) -> Result<Vec<f64>> {
    let mut d = vec![0.0; k];
    let mut p = 0;
    let mut col_j = vec![ZERO; f];
    while p < k {
        let pe = (p + PANEL).min(k);
        for j in p..pe {
            let dj = buf[j * f + j].re;
            if !(dj.abs() > tiny) || !dj.is_finite() {
                return Err(Error::Breakdown {
                    step: offset + j,
                    pivot: dj,
                });
            }
            d[j] = dj;
            let inv = 1.0 / dj;
            for i in j + 1..f {
                col_j[i] = buf[j * f + i];
                buf[j * f + i] *= inv;
            }
            for c in j + 1..pe {
                let lc = buf[j * f + c].conj();
                let colc = &mut buf[c * f..(c + 1) * f];
                for i in c..f {
                    colc[i] -= col_j[i] * lc;
                }
            }
        }
        if pe < f {
            let m = f - pe;
            let w = pe - p;
            // W = L[pe.., p..pe]·D, Lp = L[pe.., p..pe]
            let mut wbuf = vec![ZERO; m * w];
            let mut lbuf = vec![ZERO; m * w];
            for (jj, j) in (p..pe).enumerate() {
                for i in 0..m {
                    let l = buf[j * f + pe + i];
                    lbuf[jj * m + i] = l;
                    wbuf[jj * m + i] = l * d[j];
                }
            }
            let wv = ArrayView2::from_shape((m, w).f(), &wbuf).expect("shape");
            let lv = ArrayView2::from_shape((m, w).f(), &lbuf).expect("shape");
            let trailing = &mut buf[pe * f..];
            let cv = ArrayViewMut2::from_shape((m, f - pe).strides((1, f)), &mut trailing[pe..]).expect("shape");
            gemm_sub_abh(cv, wv, lv);
        }
        p = pe;
    }
    Ok(d)
}

impl Factorization {
    /// Factors `op − shift·I`. With `keep_factor = false` only the inertia
    /// is retained.
    pub fn new(op: &LatticeOperator, sym: &Symbolic, shift: f64, keep_factor: bool) -> Result<Self> {
        if sym.n != op.dim() {
            return Err(Error::InvalidArgument("symbolic analysis is for another grid".into()));
        }
        let tiny = PIVOT_TOL * op.norm_bound().max(shift.abs()).max(1e-300);
        let out = factor_subtree(op, sym, sym.root, shift, tiny, keep_factor)?;
        let mut fronts = out.fronts;
        fronts.sort_by_key(|(id, _)| *id);
        Ok(Self {
            shift,
            negative: out.negative,
            fronts: fronts.into_iter().map(|(_, f)| f).collect(),
            n: op.dim(),
        })
    }

    pub fn has_factor(&self) -> bool {
        !self.fronts.is_empty() || self.n == 0
    }

    /// Solves `(H − σI)X = B` in place; `x` is row-major `N × nrhs`.
    pub fn solve_in_place(&self, x: &mut [Complex64], nrhs: usize) {
        assert!(self.has_factor(), "inertia-only factorization cannot solve");
        assert_eq!(x.len(), self.n * nrhs);
        let b = nrhs;
        // forward: L y = x (postorder)
        for fr in &self.fronts {
            let f = fr.idx.len();
            let k = fr.k;
            let mut w1 = vec![ZERO; k * b];
            for (r, &g) in fr.idx[..k].iter().enumerate() {
                w1[r * b..(r + 1) * b].copy_from_slice(&x[g * b..(g + 1) * b]);
            }
            for j in 0..k {
                let (done, rest) = w1.split_at_mut((j + 1) * b);
                let wj = &done[j * b..];
                for i in j + 1..k {
                    let l = fr.l[j * f + i];
                    if l != ZERO {
                        let row = &mut rest[(i - j - 1) * b..(i - j) * b];
                        for (y, &v) in row.iter_mut().zip(wj) {
                            *y -= l * v;
                        }
                    }
                }
            }
            for (r, &g) in fr.idx[..k].iter().enumerate() {
                x[g * b..(g + 1) * b].copy_from_slice(&w1[r * b..(r + 1) * b]);
            }
            let m = f - k;
            if m > 0 {
                let l21 = ArrayView2::from_shape((m, k).strides((1, f)), &fr.l[k..]).expect("shape");
                let w1v = ArrayView2::from_shape((k, b), &w1).expect("shape");
                let mut w2 = ndarray::Array2::<Complex64>::zeros((m, b));
                general_mat_mul(ONE, &l21, &w1v, ZERO, &mut w2);
                for (r, &g) in fr.idx[k..].iter().enumerate() {
                    for c in 0..b {
                        x[g * b + c] -= w2[(r, c)];
                    }
                }
            }
        }
        // diagonal
        for fr in &self.fronts {
            for (r, &g) in fr.idx[..fr.k].iter().enumerate() {
                let inv = 1.0 / fr.d[r];
                for v in &mut x[g * b..(g + 1) * b] {
                    *v *= inv;
                }
            }
        }
        // backward: Lᴴ z = y (reverse postorder)
        for fr in self.fronts.iter().rev() {
            let f = fr.idx.len();
            let k = fr.k;
            let m = f - k;
            let mut w1 = vec![ZERO; k * b];
            for (r, &g) in fr.idx[..k].iter().enumerate() {
                w1[r * b..(r + 1) * b].copy_from_slice(&x[g * b..(g + 1) * b]);
            }
            if m > 0 {
                let mut xb = vec![ZERO; m * b];
                for (r, &g) in fr.idx[k..].iter().enumerate() {
                    xb[r * b..(r + 1) * b].copy_from_slice(&x[g * b..(g + 1) * b]);
                }
                let l21 = ArrayView2::from_shape((m, k).strides((1, f)), &fr.l[k..]).expect("shape");
                let l21h = l21.t().mapv(|z| z.conj());
                let xbv = ArrayView2::from_shape((m, b), &xb).expect("shape");
                let mut w1v = ArrayViewMut2::from_shape((k, b), &mut w1).expect("shape");
                general_mat_mul(-ONE, &l21h, &xbv, ONE, &mut w1v);
            }
            for j in (0..k).rev() {
                let (head, tail) = w1.split_at_mut((j + 1) * b);
                let wj = &mut head[j * b..];
                for i in j + 1..k {
                    let l = fr.l[j * f + i].conj();
                    if l != ZERO {
                        let row = &tail[(i - j - 1) * b..(i - j) * b];
                        for (y, &v) in wj.iter_mut().zip(row) {
                            *y -= l * v;
                        }
                    }
                }
            }
            for (r, &g) in fr.idx[..k].iter().enumerate() {
                x[g * b..(g + 1) * b].copy_from_slice(&w1[r * b..(r + 1) * b]);
            }
        }
    }
}

fn factor_subtree(
    op: &LatticeOperator,
    sym: &Symbolic,
    id: usize,
    shift: f64,
    tiny: f64,
    keep: bool,
) -> Result<SubtreeOut> {
    let node = &sym.nodes[id];
    let child_outs: Vec<SubtreeOut> = match node.children.as_slice() {
        [] => Vec::new(),
        [a, b] if node.size >= PAR_THRESHOLD => {
            let (ra, rb) = par::join(
                || factor_subtree(op, sym, *a, shift, tiny, keep),
                || factor_subtree(op, sym, *b, shift, tiny, keep),
            );
            vec![ra?, rb?]
        }
        cs => cs
            .iter()
            .map(|&c| factor_subtree(op, sym, c, shift, tiny, keep))
            .collect::<Result<_>>()?,
    };
    let k = node.elim.len();
    let f = k + node.boundary.len();
    let mut buf = vec![ZERO; f * f];
    // original entries: column e of H − σI restricted to rows in the front
    for (pe, &e) in node.elim.iter().enumerate() {
        let (cols, vals) = op.row(e);
        for (&j, &v) in cols.iter().zip(vals) {
            if let Some(pj) = local_pos(&node.elim, &node.boundary, j) {
                if pj >= pe {
                    buf[pe * f + pj] += v.conj();
                }
            }
        }
        buf[pe * f + pe] -= Complex64::new(shift, 0.0);
    }
    let mut negative = 0;
    let mut fronts = Vec::new();
    for (c, out) in node.children.iter().zip(child_outs) {
        let cb = &sym.nodes[*c].boundary;
        let map: Vec<usize> = cb
            .iter()
            .map(|&g| local_pos(&node.elim, &node.boundary, g).expect("child boundary inside parent front"))
            .collect();
        let m = cb.len();
        for cc in 0..m {
            for rr in cc..m {
                let v = out.update[cc * m + rr];
                let (pr, pc) = (map[rr], map[cc]);
                if pr >= pc {
                    buf[pc * f + pr] += v;
                } else {
                    buf[pr * f + pc] += v.conj();
                }
            }
        }
        negative += out.negative;
        fronts.extend(out.fronts);
    }
    let d = partial_ldl(&mut buf, f, k, tiny, node.elim.first().copied().unwrap_or(0))?;
    negative += d.iter().filter(|&&v| v < 0.0).count();
    let m = f - k;
    let mut update = vec![ZERO; m * m];
    for c in 0..m {
        update[c * m..(c + 1) * m].copy_from_slice(&buf[(k + c) * f + k..(k + c + 1) * f]);
    }
    if keep {
        buf.truncate(f * k);
        buf.shrink_to_fit();
        let mut idx = node.elim.clone();
        idx.extend_from_slice(&node.boundary);
        fronts.push((id, Front { idx, k, l: buf, d }));
    }
    Ok(SubtreeOut {
        fronts,
        update,
        negative,
    })
}

/// Number of eigenvalues of `op` strictly below `shift`.
pub fn inertia(op: &LatticeOperator, sym: &Symbolic, shift: f64) -> Result<usize> {
    Factorization::new(op, sym, shift, false).map(|f| f.negative)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Domain, FieldSpec, MagneticFamily, PotentialFamily};
    use crate::lattice::DEFAULT_NODE_CAP;
    use nalgebra::DMatrix;

    fn operator(n: Vec<usize>, b: f64, hbar: f64) -> LatticeOperator {
        let d = n.len();
        let mut m = DMatrix::zeros(d, d);
        m[(0, 1)] = b;
        m[(1, 0)] = -b;
        let fs = FieldSpec::new(
            MagneticFamily::Constant(m),
            PotentialFamily::Harmonic {
                v0: 0.0,
                v2: 0.3,
                center: vec![0.1; d],
            },
            None,
            Domain::centered(d, 1.0),
            None,
        )
        .unwrap();
        let g = GridSpec::new(&fs.domain, n, DEFAULT_NODE_CAP).unwrap();
        LatticeOperator::assemble(&fs, &g, hbar).unwrap()
    }

    fn residual(op: &LatticeOperator, shift: f64, x: &[Complex64], rhs: &[Complex64]) -> f64 {
        let mut y = vec![ZERO; op.dim()];
        op.matvec(x, &mut y);
        y.iter()
            .zip(x)
            .zip(rhs)
            .map(|((y, x), r)| (y - x * shift - r).norm_sqr())
            .sum::<f64>()
            .sqrt()
            / rhs.iter().map(|r| r.norm_sqr()).sum::<f64>().sqrt()
    }

    #[test]
    fn tree_partitions_the_grid() {
        let g = GridSpec::new(&Domain::centered(2, 1.0), vec![37, 23], DEFAULT_NODE_CAP).unwrap();
        let sym = Symbolic::new(&g);
        let mut seen = vec![0u8; g.len()];
        for t in &sym.nodes {
            for &e in &t.elim {
                seen[e] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
        assert_eq!(sym.nodes[sym.root].boundary.len(), 0);
    }

    #[test]
    fn solve_and_inertia_match_dense() {
        for n in [vec![12, 9], vec![8, 8, 8]] {
            let op = operator(n, 1.0, 0.2);
            let dense = op.to_dense();
            let mut ev: Vec<f64> = dense.symmetric_eigenvalues().iter().copied().collect();
            ev.sort_by(f64::total_cmp);
            let sym = Symbolic::new(&op.grid);
            let shift = 0.5 * (ev[20] + ev[21]);
            let fac = Factorization::new(&op, &sym, shift, true).unwrap();
            assert_eq!(fac.negative, 21);
            let nrhs = 3;
            let rhs: Vec<Complex64> = (0..op.dim() * nrhs)
                .map(|i| Complex64::new(((i * 37) % 11) as f64 - 5.0, ((i * 13) % 7) as f64))
                .collect();
            let mut x = rhs.clone();
            fac.solve_in_place(&mut x, nrhs);
            for c in 0..nrhs {
                let xc: Vec<Complex64> = (0..op.dim()).map(|i| x[i * nrhs + c]).collect();
                let rc: Vec<Complex64> = (0..op.dim()).map(|i| rhs[i * nrhs + c]).collect();
                assert!(residual(&op, shift, &xc, &rc) < 1e-10);
            }
            assert_eq!(inertia(&op, &sym, ev[0] - 1.0).unwrap(), 0);
            assert_eq!(inertia(&op, &sym, ev[ev.len() - 1] + 1.0).unwrap(), op.dim());
        }
    }
}
