//! Continuous problem data: magnetic field `B`, electric potential `V`, and a
//! vector potential `A` with `B_jk = ∂_j A_k − ∂_k A_j`.
//!
//! Every family is a closed-form evaluator. The pointwise classification of
//! `B(x₀)` (its skew-eigenvalues `a_j`) lives in [`skew_spectrum`].

use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::gauge;
use crate::quad::GaussLegendre;
use crate::{Error, Result};

/// Tolerance for flagging non-antisymmetric user input.
pub const ANTISYMMETRY_TOL: f64 = 1e-12;
/// Largest number of points in a construction-time probe grid.
pub const PROBE_BUDGET: usize = 1 << 16;

/// Axis-aligned box `[lo_i, hi_i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Domain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::InvalidArgument("domain bounds have mismatched dimension".into()));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l < h)) {
            return Err(Error::InvalidArgument(format!("empty domain {lo:?}..{hi:?}")));
        }
        Ok(Self { lo, hi })
    }

    /// Cube `[-half, half]^dim`.
    pub fn centered(dim: usize, half: f64) -> Self {
        Self {
            lo: vec![-half; dim],
            hi: vec![half; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (l, h))| *v >= *l - 1e-12 && *v <= *h + 1e-12)
    }

    /// Largest distance from `p` to a corner of the box.
    pub fn max_distance_from(&self, p: &[f64]) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .zip(p)
            .map(|((l, h), c)| (c - l).abs().max((h - c).abs()).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Uniform sample grid including the box faces, spacing at most `step`.
    pub fn sample_grid(&self, step: f64) -> Vec<Vec<f64>> {
        let counts: Vec<usize> = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| ((h - l) / step).ceil().max(1.0) as usize + 1)
            .collect();
        self.grid_with_counts(&counts)
    }

    /// Grid with `per_axis` points per axis, thinned so that the total stays
    /// within [`PROBE_BUDGET`] in high dimension.
    pub fn probe_grid(&self, per_axis: usize) -> Vec<Vec<f64>> {
        let cap = (PROBE_BUDGET as f64).powf(1.0 / self.dim() as f64).floor() as usize;
        let n = per_axis.min(cap).max(2);
        self.grid_with_counts(&vec![n; self.dim()])
    }

    fn grid_with_counts(&self, counts: &[usize]) -> Vec<Vec<f64>> {
        let total: usize = counts.iter().product();
        let mut pts = Vec::with_capacity(total);
        let mut idx = vec![0usize; self.dim()];
        for _ in 0..total {
            pts.push(
                idx.iter()
                    .enumerate()
                    .map(|(a, &i)| {
                        let t = i as f64 / (counts[a] - 1) as f64;
                        self.lo[a] + t * (self.hi[a] - self.lo[a])
                    })
                    .collect(),
            );
            for a in 0..idx.len() {
                idx[a] += 1;
                if idx[a] < counts[a] {
                    break;
                }
                idx[a] = 0;
            }
        }
        pts
    }
}

/// Multivariate polynomial `Σ c·Π x_i^{p_i}` over `dim` variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    pub dim: usize,
    pub terms: Vec<(f64, Vec<u32>)>,
}

impl Polynomial {
    pub fn constant(dim: usize, c: f64) -> Self {
        Self {
            dim,
            terms: vec![(c, vec![0; dim])],
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(c, p)| c * p.iter().zip(x).map(|(&e, &v)| v.powi(e as i32)).product::<f64>())
            .sum()
    }

    pub fn derivative(&self, axis: usize) -> Self {
        let terms = self
            .terms
            .iter()
            .filter(|(_, p)| p[axis] > 0)
            .map(|(c, p)| {
                let mut q = p.clone();
                q[axis] -= 1;
                (c * p[axis] as f64, q)
            })
            .collect();
        Self { dim: self.dim, terms }
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|(_, p)| p.iter().sum::<u32>()).max().unwrap_or(0)
    }

    /// Parses `"1 + 0.5*x1^2*x2 - 3*x2"`. Variables are `x1..x{dim}`.
    pub fn parse(dim: usize, s: &str) -> Result<Self> {
        let err = |m: &str| Error::InvalidArgument(format!("polynomial `{s}`: {m}"));
        let chars: Vec<char> = s.chars().filter(|c| !c.is_whitespace()).collect();
        if chars.is_empty() {
            return Err(err("empty"));
        }
        let mut terms = Vec::new();
        let mut i = 0;
        while i < chars.len() {
            let mut sign = 1.0;
            while i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
                if chars[i] == '-' {
                    sign = -sign;
                }
                i += 1;
            }
            let start = i;
            while i < chars.len() {
                let c = chars[i];
                let exp_sign = (c == '-' || c == '+') && i > start && (chars[i - 1] == 'e' || chars[i - 1] == 'E');
                if c.is_ascii_digit() || c == '.' || c == 'e' || c == 'E' || exp_sign {
                    i += 1;
                } else {
                    break;
                }
            }
            let mut coef = if i > start {
                let txt: String = chars[start..i].iter().collect();
                txt.parse::<f64>().map_err(|_| err(&format!("bad number `{txt}`")))?
            } else {
                1.0
            };
            coef *= sign;
            let mut pow = vec![0u32; dim];
            let mut first = i == start;
            loop {
                if i < chars.len() && chars[i] == '*' {
                    i += 1;
                } else if !first {
                    break;
                }
                first = false;
                if i >= chars.len() || chars[i] != 'x' {
                    if i == start {
                        return Err(err("expected a number or variable"));
                    }
                    break;
                }
                i += 1;
                let vs = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let var: usize = chars[vs..i]
                    .iter()
                    .collect::<String>()
                    .parse()
                    .map_err(|_| err("variable index"))?;
                if var == 0 || var > dim {
                    return Err(err(&format!("variable x{var} outside 1..={dim}")));
                }
                let mut e = 1u32;
                if i < chars.len() && chars[i] == '^' {
                    i += 1;
                    let es = i;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                    e = chars[es..i]
                        .iter()
                        .collect::<String>()
                        .parse()
                        .map_err(|_| err("exponent"))?;
                }
                pow[var - 1] += e;
            }
            terms.push((coef, pow));
            if i < chars.len() && chars[i] != '+' && chars[i] != '-' {
                return Err(err(&format!("unexpected `{}`", chars[i])));
            }
        }
        Ok(Self { dim, terms })
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (c, p)) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{c}")?;
            for (i, &e) in p.iter().enumerate() {
                match e {
                    0 => {}
                    1 => write!(f, "*x{}", i + 1)?,
                    _ => write!(f, "*x{}^{e}", i + 1)?,
                }
            }
        }
        Ok(())
    }
}

/// Closed-form magnetic field families.
#[derive(Debug, Clone, PartialEq)]
pub enum MagneticFamily {
    /// Constant antisymmetric matrix.
    Constant(DMatrix<f64>),
    /// `B₁₂ = b0 + b2·|x − c|²` in two dimensions.
    RadialWell { b0: f64, b2: f64, center: Vec<f64> },
    /// `B₁₂ = b_lo + (b_hi − b_lo)(1 + tanh((x₁ − c)/w))/2` in two dimensions.
    Iwatsuka {
        b_lo: f64,
        b_hi: f64,
        width: f64,
        offset: f64,
    },
    /// Upper-triangle components `B_jk`, `j < k`, as polynomials.
    Polynomial(Vec<((usize, usize), Polynomial)>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialFamily {
    Zero,
    Constant(f64),
    /// `v0 + v2·|x − c|²`.
    Harmonic {
        v0: f64,
        v2: f64,
        center: Vec<f64>,
    },
    Polynomial(Polynomial),
}

/// Gauge used for the vector potential `A`.
#[derive(Debug, Clone, PartialEq)]
pub enum VectorPotential {
    /// `A_j = ½ Σ_k B_kj (x − c)_k` (constant fields only).
    Symmetric { center: Vec<f64> },
    /// `A = (0, B₁₂·(x₁ − c₁))` (constant two-dimensional fields only).
    Landau { center: Vec<f64> },
    /// Closed-form rotational potential of the radial well.
    RadialWell,
    /// `A = (0, ∫ B₁₂ dx₁)` for the Iwatsuka profile.
    Iwatsuka,
    /// Transverse gauge from `center`, integrated by Gauss-Legendre.
    Transverse { center: Vec<f64>, quad_order: usize },
}

/// Sup-norm bounds over the computational domain. `grad_b` bounds the
/// spectral norm of every directional derivative `∂_u B`, `|u| = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessBounds {
    pub b: f64,
    pub grad_b: f64,
    pub v: f64,
    pub grad_v: f64,
    pub declared: bool,
}

/// Immutable field description; evaluations are pure.
#[derive(Debug, Clone)]
pub struct FieldSpec {
    pub dim: usize,
    pub magnetic: MagneticFamily,
    pub potential: PotentialFamily,
    pub vector_potential: Option<VectorPotential>,
    pub domain: Domain,
    pub bounds: SmoothnessBounds,
    /// Sampled values that exceeded the declared bounds.
    pub bound_warnings: Vec<String>,
    /// Smallest sampled spectral norm of `B` over the domain.
    pub inf_b_norm: f64,
    gl: GaussLegendre,
}

impl FieldSpec {
    /// Builds a field, antisymmetrizing constant input and checking `curl A = B`
    /// on a probe grid. Bounds default to analytic or sampled estimates.
    pub fn new(
        magnetic: MagneticFamily,
        potential: PotentialFamily,
        gauge_choice: Option<VectorPotential>,
        domain: Domain,
        declared: Option<SmoothnessBounds>,
    ) -> Result<Self> {
        let dim = domain.dim();
        if dim < 2 {
            return Err(Error::Dimension(dim));
        }
        let magnetic = match magnetic {
            MagneticFamily::Constant(m) => {
                if m.nrows() != dim || m.ncols() != dim {
                    return Err(Error::InvalidArgument(format!(
                        "constant field is {}x{}, domain is {dim}-dimensional",
                        m.nrows(),
                        m.ncols()
                    )));
                }
                let dev = (&m + m.transpose()).amax();
                if dev > ANTISYMMETRY_TOL * m.amax().max(1.0) {
                    return Err(Error::NotAntisymmetric(dev));
                }
                MagneticFamily::Constant((&m - m.transpose()) * 0.5)
            }
            MagneticFamily::RadialWell { .. } | MagneticFamily::Iwatsuka { .. } if dim != 2 => {
                return Err(Error::InvalidArgument(
                    "radial-well and iwatsuka families are two-dimensional".into(),
                ))
            }
            MagneticFamily::Polynomial(comps) => {
                for ((j, k), p) in &comps {
                    if j >= k || *k >= dim || p.dim != dim {
                        return Err(Error::InvalidArgument(format!(
                            "polynomial component B{}{} invalid for dimension {dim}",
                            j + 1,
                            k + 1
                        )));
                    }
                }
                MagneticFamily::Polynomial(comps)
            }
            other => other,
        };
        let vector_potential = match gauge_choice {
            Some(VectorPotential::Landau { center }) => {
                if !matches!(magnetic, MagneticFamily::Constant(_)) || dim != 2 {
                    return Err(Error::InvalidArgument(
                        "Landau gauge needs a constant two-dimensional field".into(),
                    ));
                }
                Some(VectorPotential::Landau { center })
            }
            Some(VectorPotential::Symmetric { center }) => {
                if !matches!(magnetic, MagneticFamily::Constant(_)) {
                    return Err(Error::InvalidArgument("symmetric gauge needs a constant field".into()));
                }
                Some(VectorPotential::Symmetric { center })
            }
            Some(other) => Some(other),
            None => Some(match &magnetic {
                MagneticFamily::Constant(_) => VectorPotential::Symmetric {
                    center: domain.center(),
                },
                MagneticFamily::RadialWell { .. } => VectorPotential::RadialWell,
                MagneticFamily::Iwatsuka { .. } => VectorPotential::Iwatsuka,
                MagneticFamily::Polynomial(_) => VectorPotential::Transverse {
                    center: domain.center(),
                    quad_order: gauge::DEFAULT_QUAD_ORDER,
                },
            }),
        };
        let quad_order = match &vector_potential {
            Some(VectorPotential::Transverse { quad_order, .. }) => *quad_order,
            _ => gauge::DEFAULT_QUAD_ORDER,
        };
        let mut fs = FieldSpec {
            dim,
            magnetic,
            potential,
            vector_potential,
            domain,
            bounds: SmoothnessBounds {
                b: 0.0,
                grad_b: 0.0,
                v: 0.0,
                grad_v: 0.0,
                declared: false,
            },
            bound_warnings: Vec::new(),
            inf_b_norm: 0.0,
            gl: GaussLegendre::new(quad_order),
        };
        fs.check_curl()?;
        let (estimated, inf_b) = fs.estimate_bounds();
        fs.inf_b_norm = inf_b;
        match declared {
            Some(d) => {
                let mut warn = Vec::new();
                let sampled = fs.sampled_bounds();
                for (name, dv, sv) in [
                    ("b", d.b, sampled.b),
                    ("grad_b", d.grad_b, sampled.grad_b),
                    ("v", d.v, sampled.v),
                    ("grad_v", d.grad_v, sampled.grad_v),
                ] {
                    if sv > dv * (1.0 + 1e-9) + 1e-12 {
                        warn.push(format!("declared {name} = {dv} but sampled {sv}"));
                    }
                }
                fs.bound_warnings = warn;
                fs.bounds = SmoothnessBounds { declared: true, ..d };
            }
            None => fs.bounds = estimated,
        }
        Ok(fs)
    }

    pub fn quadrature(&self) -> &GaussLegendre {
        &self.gl
    }

    /// Same field and gauge over another domain (declared bounds carry over).
    pub fn with_domain(&self, domain: Domain) -> Result<Self> {
        let declared = self.bounds.declared.then_some(self.bounds);
        Self::new(
            self.magnetic.clone(),
            self.potential.clone(),
            self.vector_potential.clone(),
            domain,
            declared,
        )
    }

    /// `B(x)` as a dense antisymmetric matrix.
    pub fn b(&self, x: &[f64]) -> DMatrix<f64> {
        let d = self.dim;
        match &self.magnetic {
            MagneticFamily::Constant(m) => m.clone(),
            MagneticFamily::RadialWell { b0, b2, center } => {
                let r2: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                planar(b0 + b2 * r2)
            }
            MagneticFamily::Iwatsuka {
                b_lo,
                b_hi,
                width,
                offset,
            } => {
                let t = ((x[0] - offset) / width).tanh();
                planar(b_lo + (b_hi - b_lo) * 0.5 * (1.0 + t))
            }
            MagneticFamily::Polynomial(comps) => {
                let mut m = DMatrix::zeros(d, d);
                for ((j, k), p) in comps {
                    let v = p.eval(x);
                    m[(*j, *k)] += v;
                    m[(*k, *j)] -= v;
                }
                m
            }
        }
    }

    pub fn v(&self, x: &[f64]) -> f64 {
        match &self.potential {
            PotentialFamily::Zero => 0.0,
            PotentialFamily::Constant(c) => *c,
            PotentialFamily::Harmonic { v0, v2, center } => {
                v0 + v2 * x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>()
            }
            PotentialFamily::Polynomial(p) => p.eval(x),
        }
    }

    pub fn has_vector_potential(&self) -> bool {
        self.vector_potential.is_some()
    }

    /// Vector potential `A(x)`.
    pub fn a(&self, x: &[f64]) -> Result<Vec<f64>> {
        let vp = self.vector_potential.as_ref().ok_or(Error::MissingVectorPotential)?;
        Ok(match vp {
            VectorPotential::Symmetric { center } => {
                let b = self.b(x);
                (0..self.dim)
                    .map(|j| 0.5 * (0..self.dim).map(|k| b[(k, j)] * (x[k] - center[k])).sum::<f64>())
                    .collect()
            }
            VectorPotential::Landau { center } => {
                let b = self.b(x)[(0, 1)];
                vec![0.0, b * (x[0] - center[0])]
            }
            VectorPotential::RadialWell => match &self.magnetic {
                MagneticFamily::RadialWell { b0, b2, center } => {
                    let (x1, x2) = (x[0] - center[0], x[1] - center[1]);
                    let g = 0.5 * b0 + 0.25 * b2 * (x1 * x1 + x2 * x2);
                    vec![-g * x2, g * x1]
                }
                _ => return Err(Error::MissingVectorPotential),
            },
            VectorPotential::Iwatsuka => match &self.magnetic {
                MagneticFamily::Iwatsuka {
                    b_lo,
                    b_hi,
                    width,
                    offset,
                } => {
                    let s = x[0] - offset;
                    let t = s / width;
                    let lncosh = t.abs() + (-2.0 * t.abs()).exp().ln_1p() - std::f64::consts::LN_2;
                    vec![0.0, b_lo * s + 0.5 * (b_hi - b_lo) * (s + width * lncosh)]
                }
                _ => return Err(Error::MissingVectorPotential),
            },
            VectorPotential::Transverse { center, .. } => {
                let z: Vec<f64> = x.iter().zip(center).map(|(a, c)| a - c).collect();
                gauge::transverse_potential_with(|p| self.b(p), center, &z, &self.gl)
            }
        })
    }

    /// Checks `curl A = B` by central differences on a coarse probe grid.
    fn check_curl(&self) -> Result<()> {
        if self.vector_potential.is_none() {
            return Ok(());
        }
        let h = 1e-3 * self.domain_scale();
        let c1 = self.c1_norm_estimate();
        let tol = 10.0 * h * h * c1.max(1.0) + 1e-9;
        for p in self.domain.probe_grid(5) {
            let b = self.b(&p);
            let curl = self.fd_curl(&p, h)?;
            let dev = (&curl - &b).amax();
            if !dev.is_finite() || dev > tol {
                return Err(Error::CurlMismatch {
                    point: p,
                    deviation: dev,
                    tolerance: tol,
                });
            }
        }
        Ok(())
    }

    fn domain_scale(&self) -> f64 {
        self.domain
            .lo
            .iter()
            .zip(&self.domain.hi)
            .map(|(l, h)| h - l)
            .fold(0.0, f64::max)
    }

    fn fd_curl(&self, p: &[f64], h: f64) -> Result<DMatrix<f64>> {
        let d = self.dim;
        // jac[(j,k)] = ∂_j A_k
        let mut jac = DMatrix::zeros(d, d);
        let mut q = p.to_vec();
        for j in 0..d {
            q[j] = p[j] + h;
            let ap = self.a(&q)?;
            q[j] = p[j] - h;
            let am = self.a(&q)?;
            q[j] = p[j];
            for k in 0..d {
                jac[(j, k)] = (ap[k] - am[k]) / (2.0 * h);
            }
        }
        Ok(&jac - jac.transpose())
    }

    fn c1_norm_estimate(&self) -> f64 {
        let pts = self.domain.probe_grid(9);
        let h = 1e-4 * self.domain_scale();
        pts.iter()
            .map(|p| spectral_norm(&self.b(p)) + self.grad_b_norm_fd(p, h))
            .fold(0.0, f64::max)
    }

    fn grad_b_norm_fd(&self, p: &[f64], h: f64) -> f64 {
        let mut q = p.to_vec();
        let mut s = 0.0;
        for j in 0..self.dim {
            q[j] = p[j] + h;
            let bp = self.b(&q);
            q[j] = p[j] - h;
            let bm = self.b(&q);
            q[j] = p[j];
            s += spectral_norm(&((bp - bm) / (2.0 * h))).powi(2);
        }
        s.sqrt()
    }

    fn grad_v_norm_fd(&self, p: &[f64], h: f64) -> f64 {
        let mut q = p.to_vec();
        let mut s = 0.0;
        for j in 0..self.dim {
            q[j] = p[j] + h;
            let vp = self.v(&q);
            q[j] = p[j] - h;
            let vm = self.v(&q);
            q[j] = p[j];
            s += ((vp - vm) / (2.0 * h)).powi(2);
        }
        s.sqrt()
    }

    /// Plain sampled maxima on a grid (no safety factor).
    pub fn sampled_bounds(&self) -> SmoothnessBounds {
        let scale = self.domain_scale();
        let pts = self.domain.probe_grid(33);
        let h = 1e-5 * scale;
        let mut out = SmoothnessBounds {
            b: 0.0,
            grad_b: 0.0,
            v: 0.0,
            grad_v: 0.0,
            declared: false,
        };
        for p in &pts {
            out.b = out.b.max(spectral_norm(&self.b(p)));
            out.grad_b = out.grad_b.max(self.grad_b_norm_fd(p, h));
            out.v = out.v.max(self.v(p).abs());
            out.grad_v = out.grad_v.max(self.grad_v_norm_fd(p, h));
        }
        out
    }

    /// Analytic bounds where the family admits them, sampled ×1.25 otherwise.
    /// Also returns the sampled infimum of `‖B‖`.
    fn estimate_bounds(&self) -> (SmoothnessBounds, f64) {
        let sampled = self.sampled_bounds();
        let center_dist = |c: &[f64]| self.domain.max_distance_from(c);
        let (b, grad_b) = match &self.magnetic {
            MagneticFamily::Constant(m) => (spectral_norm(m), 0.0),
            MagneticFamily::RadialWell { b0, b2, center } => {
                let r = center_dist(center);
                (b0.abs() + b2.abs() * r * r, 2.0 * b2.abs() * r)
            }
            MagneticFamily::Iwatsuka { b_lo, b_hi, width, .. } => {
                (b_lo.abs().max(b_hi.abs()), (b_hi - b_lo).abs() / (2.0 * width))
            }
            MagneticFamily::Polynomial(_) => (1.25 * sampled.b, 1.25 * sampled.grad_b),
        };
        let (v, grad_v) = match &self.potential {
            PotentialFamily::Zero => (0.0, 0.0),
            PotentialFamily::Constant(c) => (c.abs(), 0.0),
            PotentialFamily::Harmonic { v0, v2, center } => {
                let r = center_dist(center);
                (v0.abs() + v2.abs() * r * r, 2.0 * v2.abs() * r)
            }
            PotentialFamily::Polynomial(_) => (1.25 * sampled.v, 1.25 * sampled.grad_v),
        };
        let inf_b = self
            .domain
            .probe_grid(33)
            .iter()
            .map(|p| spectral_norm(&self.b(p)))
            .fold(f64::INFINITY, f64::min);
        (
            SmoothnessBounds {
                b,
                grad_b,
                v,
                grad_v,
                declared: false,
            },
            inf_b,
        )
    }

    /// Lipschitz constant of `x ↦ Λ_k(x)` for a level with `|k| = k_sum` and
    /// `n` magnetic pairs.
    pub fn level_lipschitz(&self, k_sum: u64, n: usize) -> f64 {
        (2.0 * k_sum as f64 + n as f64) * self.bounds.grad_b + self.bounds.grad_v
    }
}

fn planar(b12: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[0.0, b12, -b12, 0.0])
}

/// Spectral norm of a real matrix.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 2 && m.ncols() == 2 && m[(0, 0)] == 0.0 && m[(1, 1)] == 0.0 {
        return m[(0, 1)].abs().max(m[(1, 0)].abs());
    }
    let g = m.transpose() * m;
    SymmetricEigen::new(g)
        .eigenvalues
        .iter()
        .fold(0.0f64, |a, &v| a.max(v))
        .sqrt()
}

/// Model spectrum data at a base point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpectrum {
    pub x0: Vec<f64>,
    /// Skew-eigenvalues, positive, sorted descending.
    pub a: Vec<f64>,
    pub rank: usize,
    pub v0: f64,
    pub zero_modes: usize,
}

impl ModelSpectrum {
    pub fn n(&self) -> usize {
        self.a.len()
    }

    pub fn dim(&self) -> usize {
        self.rank + self.zero_modes
    }

    pub fn is_full_rank(&self) -> bool {
        self.zero_modes == 0
    }

    /// Classifies an antisymmetric matrix via the eigenvalues of `BᵀB`, which
    /// are `a_j²` (each twice) and `0` with multiplicity `d − 2n`.
    /// `rank_tol` defaults to `1e-8·‖B‖`.
    pub fn from_matrix(x0: &[f64], b: &DMatrix<f64>, v0: f64, rank_tol: Option<f64>) -> Result<Self> {
        let d = b.nrows();
        let g = b.transpose() * b;
        let mut mu: Vec<f64> = SymmetricEigen::new(g).eigenvalues.iter().copied().collect();
        mu.sort_by(|a, b| b.total_cmp(a));
        let norm = mu.first().copied().unwrap_or(0.0).max(0.0).sqrt();
        let tol = rank_tol.unwrap_or(1e-8 * norm);
        if norm == 0.0 {
            return Ok(Self {
                x0: x0.to_vec(),
                a: Vec::new(),
                rank: 0,
                v0,
                zero_modes: d,
            });
        }
        let tol2 = tol * tol;
        let in_band = mu.iter().filter(|&&m| m >= 0.25 * tol2 && m <= 4.0 * tol2).count();
        if in_band % 2 == 1 {
            return Err(Error::AmbiguousRank {
                point: x0.to_vec(),
                count: in_band,
            });
        }
        let above: Vec<f64> = mu.iter().copied().filter(|&m| m > tol2).collect();
        if above.len() % 2 == 1 {
            return Err(Error::AmbiguousRank {
                point: x0.to_vec(),
                count: above.len(),
            });
        }
        let a: Vec<f64> = above.chunks(2).map(|p| (0.5 * (p[0] + p[1])).sqrt()).collect();
        let rank = 2 * a.len();
        Ok(Self {
            x0: x0.to_vec(),
            a,
            rank,
            v0,
            zero_modes: d - rank,
        })
    }
}

/// Skew-eigenvalues of `B(x₀)` together with `V(x₀)`.
pub fn skew_spectrum(fs: &FieldSpec, x0: &[f64], rank_tol: Option<f64>) -> Result<ModelSpectrum> {
    if x0.len() != fs.dim {
        return Err(Error::InvalidArgument(format!(
            "point has dimension {}, field has {}",
            x0.len(),
            fs.dim
        )));
    }
    if !fs.domain.contains(x0) {
        return Err(Error::InvalidArgument(format!("point {x0:?} outside the domain")));
    }
    let b = fs.b(x0);
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(x0.to_vec()));
    }
    ModelSpectrum::from_matrix(x0, &b, fs.v(x0), rank_tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_2d(b: f64) -> FieldSpec {
        FieldSpec::new(
            MagneticFamily::Constant(planar(b)),
            PotentialFamily::Zero,
            None,
            Domain::centered(2, 1.0),
            None,
        )
        .unwrap()
    }

    #[test]
    fn constant_field_is_exact() {
        let fs = constant_2d(1.0);
        let b = fs.b(&[0.3, -0.7]);
        assert_eq!(b, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]));
        let ms = skew_spectrum(&fs, &[0.0, 0.0], None).unwrap();
        assert_eq!(ms.a, vec![1.0]);
        assert_eq!(ms.rank, 2);
        assert_eq!(ms.v0, 0.0);
    }

    #[test]
    fn radial_well_point_value() {
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
        assert_eq!(fs.b(&[1.0, 0.0]), planar(2.0));
        // analytic bounds on [-2,2]²: r_max = 2√2
        assert!((fs.bounds.grad_b - 4.0 * 2f64.sqrt()).abs() < 1e-12);
        assert!(fs.bounds.b >= fs.sampled_bounds().b);
    }

    #[test]
    fn rank_two_field_in_three_dimensions() {
        let mut m = DMatrix::zeros(3, 3);
        m[(0, 1)] = 1.0;
        m[(1, 0)] = -1.0;
        let fs = FieldSpec::new(
            MagneticFamily::Constant(m),
            PotentialFamily::Zero,
            None,
            Domain::centered(3, 1.0),
            None,
        )
        .unwrap();
        let ms = skew_spectrum(&fs, &[0.0; 3], None).unwrap();
        assert_eq!(ms.a, vec![1.0]);
        assert_eq!((ms.rank, ms.zero_modes), (2, 1));
    }

    #[test]
    fn block_diagonal_four_dimensional() {
        let mut m = DMatrix::zeros(4, 4);
        m[(0, 1)] = 2.0;
        m[(1, 0)] = -2.0;
        m[(2, 3)] = 3.0;
        m[(3, 2)] = -3.0;
        let ms = ModelSpectrum::from_matrix(&[0.0; 4], &m, 0.0, None).unwrap();
        assert!((ms.a[0] - 3.0).abs() < 1e-14 && (ms.a[1] - 2.0).abs() < 1e-14);
        assert_eq!(ms.rank, 4);
    }

    #[test]
    fn zero_field_has_no_levels() {
        let ms = ModelSpectrum::from_matrix(&[0.0, 0.0], &DMatrix::zeros(2, 2), 0.3, None).unwrap();
        assert!(ms.a.is_empty());
        assert_eq!((ms.rank, ms.zero_modes), (0, 2));
    }

    #[test]
    fn ambiguous_rank_is_reported() {
        let mut m = DMatrix::zeros(3, 3);
        m[(0, 1)] = 1.0;
        m[(1, 0)] = -1.0;
        // an exact pair inside the band is an even count and is accepted
        let ms = ModelSpectrum::from_matrix(&[0.0; 3], &m, 0.0, Some(1.0)).unwrap();
        assert_eq!(ms.rank, 0);
        // a pair split by noise puts a single value of BᵀB in the band
        let split = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1e-4, 0.0]);
        let r = ModelSpectrum::from_matrix(&[0.0; 2], &split, 0.0, Some(1e-4));
        assert!(matches!(r, Err(Error::AmbiguousRank { count: 1, .. })), "{r:?}");
    }

    #[test]
    fn rejects_bad_input() {
        let r = FieldSpec::new(
            MagneticFamily::Constant(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])),
            PotentialFamily::Zero,
            None,
            Domain::centered(2, 1.0),
            None,
        );
        assert!(matches!(r, Err(Error::NotAntisymmetric(_))));
        let r = Domain::new(vec![0.0], vec![1.0]).and_then(|d| {
            FieldSpec::new(
                MagneticFamily::Constant(DMatrix::zeros(1, 1)),
                PotentialFamily::Zero,
                None,
                d,
                None,
            )
        });
        assert!(matches!(r, Err(Error::Dimension(1))));
    }

    #[test]
    fn bad_vector_potential_is_caught() {
        // Landau gauge with non-constant field is refused up front
        let r = FieldSpec::new(
            MagneticFamily::RadialWell {
                b0: 1.0,
                b2: 1.0,
                center: vec![0.0, 0.0],
            },
            PotentialFamily::Zero,
            Some(VectorPotential::Landau { center: vec![0.0, 0.0] }),
            Domain::centered(2, 1.0),
            None,
        );
        assert!(r.is_err());
    }

    #[test]
    fn iwatsuka_and_polynomial_potentials_have_matching_curl() {
        for fam in [
            MagneticFamily::Iwatsuka {
                b_lo: 1.0,
                b_hi: 2.0,
                width: 0.3,
                offset: 0.1,
            },
            MagneticFamily::Polynomial(vec![((0, 1), Polynomial::parse(2, "1 + x1^2 - 0.5*x1*x2").unwrap())]),
        ] {
            let fs = FieldSpec::new(fam, PotentialFamily::Zero, None, Domain::centered(2, 1.0), None).unwrap();
            let p = [0.37, -0.21];
            let curl = fs.fd_curl(&p, 1e-4).unwrap();
            assert!((curl - fs.b(&p)).amax() < 1e-6);
        }
    }

    #[test]
    fn polynomial_round_trip() {
        let p = Polynomial::parse(3, "1 + 0.5*x1^2*x3 - 2.5e-3*x2 + x3").unwrap();
        assert_eq!(p.terms.len(), 4);
        assert_eq!(p.terms[2].0, -2.5e-3);
        let q = Polynomial::parse(3, &p.to_string()).unwrap();
        assert_eq!(p, q);
        assert!((p.eval(&[2.0, 1.0, 3.0]) - (1.0 + 6.0 - 2.5e-3 + 3.0)).abs() < 1e-14);
        assert!(Polynomial::parse(2, "x3").is_err());
        assert!(Polynomial::parse(2, "1 + ?").is_err());
    }

    #[test]
    fn declared_bounds_are_sanity_checked() {
        let fs = FieldSpec::new(
            MagneticFamily::RadialWell {
                b0: 1.0,
                b2: 1.0,
                center: vec![0.0, 0.0],
            },
            PotentialFamily::Zero,
            None,
            Domain::centered(2, 1.0),
            Some(SmoothnessBounds {
                b: 1.0,
                grad_b: 10.0,
                v: 0.0,
                grad_v: 0.0,
                declared: true,
            }),
        )
        .unwrap();
        assert_eq!(fs.bound_warnings.len(), 1, "{:?}", fs.bound_warnings);
    }
}
