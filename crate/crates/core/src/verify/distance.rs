//! Exact Euclidean distance transform of a node mask (separable
//! lower-envelope-of-parabolas sweep, one pass per axis).

use serde::Serialize;

use crate::landau::KSetMask;
use crate::lattice::GridSpec;
use crate::{Error, Result};

/// Distance from every node to the nearest masked node, in physical units.
#[derive(Debug, Clone, Serialize)]
pub struct DistanceField {
    #[serde(skip)]
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

/// Squared distance transform of `f` along one line with spacing `h`:
/// `out[p] = min_q ((p−q)h)² + f[q]`.
fn envelope_1d(f: &[f64], h: f64, out: &mut [f64], v: &mut Vec<usize>, z: &mut Vec<f64>) {
    let n = f.len();
    v.clear();
    z.clear();
    let key = |q: usize| f[q] + (q as f64 * h).powi(2);
    for q in 0..n {
        if !f[q].is_finite() {
            continue;
        }
        loop {
            match v.last() {
                None => {
                    v.push(q);
                    z.push(f64::NEG_INFINITY);
                    break;
                }
                Some(&p) => {
                    let s = (key(q) - key(p)) / (2.0 * h * h * (q - p) as f64);
                    if s <= *z.last().expect("paired with v") {
                        v.pop();
                        z.pop();
                    } else {
                        v.push(q);
                        z.push(s);
                        break;
                    }
                }
            }
        }
    }
    if v.is_empty() {
        out.fill(f64::INFINITY);
        return;
    }
    let mut k = 0;
    for (p, o) in out.iter_mut().enumerate() {
        // z holds breakpoints in index units
        while k + 1 < v.len() && z[k + 1] < p as f64 {
            k += 1;
        }
        let d = (p as f64 - v[k] as f64) * h;
        *o = d * d + f[v[k]];
    }
}

/// Exact Euclidean distance from each node of `grid` to the nearest node with
/// `mask` set.
pub fn distance_transform_grid(grid: &GridSpec, mask: &[bool]) -> Result<DistanceField> {
    if mask.len() != grid.len() {
        return Err(Error::InvalidArgument("mask length does not match the grid".into()));
    }
    if !mask.iter().any(|&m| m) {
        return Err(Error::EmptyMask);
    }
    let mut d2: Vec<f64> = mask.iter().map(|&m| if m { 0.0 } else { f64::INFINITY }).collect();
    let strides = grid.strides();
    let mut line = Vec::new();
    let mut out = Vec::new();
    let (mut v, mut z) = (Vec::new(), Vec::new());
    for axis in 0..grid.dim() {
        let n = grid.n[axis];
        let st = strides[axis];
        line.resize(n, 0.0);
        out.resize(n, 0.0);
        for start in 0..grid.len() {
            // visit each line once, from its first node
            if !(start / st).is_multiple_of(n) {
                continue;
            }
            for (i, l) in line.iter_mut().enumerate() {
                *l = d2[start + i * st];
            }
            envelope_1d(&line, grid.h[axis], &mut out, &mut v, &mut z);
            for (i, o) in out.iter().enumerate() {
                d2[start + i * st] = *o;
            }
        }
    }
    Ok(DistanceField {
        grid: grid.clone(),
        values: d2.into_iter().map(f64::sqrt).collect(),
    })
}

pub fn distance_transform(mask: &KSetMask) -> Result<DistanceField> {
    distance_transform_grid(&mask.grid, &mask.mask)
}
