//! Eigenvalue CSV and the binary eigenvector layout.
//!
//! Binary layout, all little-endian:
//!
//! | field        | type              |
//! |--------------|-------------------|
//! | magic        | 8 bytes `MSPEVEC1`|
//! | d            | u32               |
//! | n_1 … n_d    | u64 each          |
//! | count        | u64               |
//! | eigenvalues  | count × f64       |
//! | payload      | N·count × (re f64, im f64), node-major |
//!
//! Node-major means all `count` values of node 0 come first, then node 1, and
//! so on; nodes follow the grid's linear order (axis 0 fastest).

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array2, ShapeBuilder};
use num_complex::Complex64;
use serde::Serialize;

use super::EigenWindowResult;
use crate::{Error, Result};

pub const EIGVEC_MAGIC: &[u8; 8] = b"MSPEVEC1";

#[derive(Serialize)]
struct EigRow {
    index: usize,
    lambda: f64,
    residual: f64,
}

pub fn write_eigenvalues_csv(ew: &EigenWindowResult, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for (i, (&l, &r)) in ew.lambdas.iter().zip(&ew.residuals).enumerate() {
        w.serialize(EigRow {
            index: i,
            lambda: l,
            residual: r,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_eigvecs(ew: &EigenWindowResult, path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(EIGVEC_MAGIC)?;
    w.write_all(&(ew.grid.dim() as u32).to_le_bytes())?;
    for &k in &ew.grid.n {
        w.write_all(&(k as u64).to_le_bytes())?;
    }
    w.write_all(&(ew.len() as u64).to_le_bytes())?;
    for &l in &ew.lambdas {
        w.write_all(&l.to_le_bytes())?;
    }
    for row in ew.vectors.rows() {
        for z in row {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a dump back: `(dims, eigenvalues, vectors as N × count)`.
pub fn read_eigvecs(path: &Path) -> Result<(Vec<usize>, Vec<f64>, Array2<Complex64>)> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != EIGVEC_MAGIC {
        return Err(Error::InvalidArgument("not an eigenvector dump".into()));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b4)?;
    let d = u32::from_le_bytes(b4) as usize;
    let mut dims = Vec::with_capacity(d);
    for _ in 0..d {
        r.read_exact(&mut b8)?;
        dims.push(u64::from_le_bytes(b8) as usize);
    }
    r.read_exact(&mut b8)?;
    let count = u64::from_le_bytes(b8) as usize;
    let mut f64s = |k: usize| -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(k);
        for _ in 0..k {
            r.read_exact(&mut b8)?;
            out.push(f64::from_le_bytes(b8));
        }
        Ok(out)
    };
    let lambdas = f64s(count)?;
    let n: usize = dims.iter().product();
    let raw = f64s(2 * n * count)?;
    let mut v = Array2::zeros((n, count).f());
    for i in 0..n {
        for j in 0..count {
            let o = 2 * (i * count + j);
            v[(i, j)] = Complex64::new(raw[o], raw[o + 1]);
        }
    }
    Ok((dims, lambdas, v))
}
