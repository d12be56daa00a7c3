//! Scenario files: sectioned `key = value` text.
//!
//! ```text
//! # comment
//! [field]
//! family = radial-well
//! b0 = 1
//! b2 = 1
//! center = 0, 0
//!
//! [domain]
//! lo = -2, -2
//! hi = 2, 2
//! ```
//!
//! Sections: `field`, `domain`, `semiclassical`, `solver`, `output`. Lists are
//! comma separated, lists of points are separated by `;`. Numbers are decimal
//! doubles. Unknown sections or keys, repeated keys, malformed values and
//! violated preconditions are all errors; parsing reports every one of them.
//! [`ScenarioConfig`]'s `Display` writes the canonical form, which parses back
//! to an identical value.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::field::{Domain, FieldSpec, MagneticFamily, Polynomial, PotentialFamily, SmoothnessBounds, VectorPotential};
use crate::gauge::DEFAULT_QUAD_ORDER;
use crate::lattice::DEFAULT_NODE_CAP;
use crate::spectral::{EigsOptions, TestFunction, TestKind};
use crate::verify::{GridRule, Scenario};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum FieldFamily {
    /// Rows of the antisymmetric matrix.
    Constant {
        b: Vec<Vec<f64>>,
    },
    RadialWell {
        b0: f64,
        b2: f64,
        center: Vec<f64>,
    },
    Iwatsuka {
        b_lo: f64,
        b_hi: f64,
        width: f64,
        offset: f64,
    },
    /// `B_jk` for `j < k`, zero-based.
    Polynomial {
        components: Vec<((usize, usize), Polynomial)>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialConfig {
    Zero,
    Constant(f64),
    Harmonic { v0: f64, v2: f64, center: Vec<f64> },
    Polynomial(Polynomial),
}

#[derive(Debug, Clone, PartialEq)]
pub enum GaugeConfig {
    /// The family's own closed-form gauge.
    Default,
    Symmetric {
        center: Vec<f64>,
    },
    Landau {
        center: Vec<f64>,
    },
    Transverse {
        center: Vec<f64>,
        quad_order: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldConfig {
    pub dim: usize,
    pub family: FieldFamily,
    pub potential: PotentialConfig,
    pub gauge: GaugeConfig,
    pub bounds: Option<SmoothnessBounds>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainConfig {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub grid: GridRule,
    pub margin: f64,
    pub node_cap: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemiclassicalConfig {
    pub ladder: Vec<f64>,
    pub window: (f64, f64),
    pub sigma_step: f64,
    /// Top of the sampled `Σ`; at least the window top.
    pub sigma_max: f64,
    pub interval: Option<(f64, f64)>,
    pub inner: Option<(f64, f64)>,
    pub phi: Option<TestFunction>,
    pub gap_phi: Option<TestFunction>,
    pub gap_window: Option<(f64, f64)>,
    pub points: Vec<Vec<f64>>,
    /// Multiples of `√ħ`.
    pub radii: Vec<f64>,
    pub separation: Option<f64>,
    pub probes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub eigs: EigsOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Eigvecs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub formats: Vec<Format>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub field: FieldConfig,
    pub domain: DomainConfig,
    pub semiclassical: SemiclassicalConfig,
    pub solver: SolverConfig,
    pub output: OutputConfig,
}

pub const DEFAULT_GRID: GridRule = GridRule { h0: 0.25, power: 1.0 };
pub const DEFAULT_SIGMA_STEP: f64 = 0.02;
pub const DEFAULT_PROBES: usize = 100;
pub const DEFAULT_RADII: [f64; 9] = [0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0];
/// Margin added on each side of the gap test function's support when no
/// `gap_window` is given.
pub const GAP_WINDOW_PAD: f64 = 0.1;

const SECTIONS: [&str; 5] = ["field", "domain", "semiclassical", "solver", "output"];

fn allowed(section: &str) -> &'static [&'static str] {
    match section {
        "field" => &[
            "family",
            "dim",
            "b",
            "b0",
            "b2",
            "center",
            "b_lo",
            "b_hi",
            "width",
            "offset",
            "potential",
            "v0",
            "v2",
            "v_center",
            "v_poly",
            "gauge",
            "gauge_center",
            "quad_order",
            "bound_b",
            "bound_grad_b",
            "bound_v",
            "bound_grad_v",
        ],
        "domain" => &["lo", "hi", "h0", "h_power", "margin", "node_cap"],
        "semiclassical" => &[
            "ladder",
            "window",
            "sigma_step",
            "sigma_max",
            "interval",
            "inner",
            "phi",
            "gap_phi",
            "gap_window",
            "points",
            "radii",
            "separation",
            "probes",
        ],
        "solver" => &["tol", "max_restarts", "slice_max", "block", "depth", "seed"],
        "output" => &["dir", "formats"],
        _ => &[],
    }
}

/// Raw `(section, key) → (line, value)` table.
struct Raw {
    entries: BTreeMap<(String, String), (usize, String)>,
}

fn tokenize(text: &str, errors: &mut Vec<String>) -> Raw {
    let mut entries = BTreeMap::new();
    let mut section: Option<String> = None;
    for (i, line) in text.lines().enumerate() {
        let ln = i + 1;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            match rest.strip_suffix(']') {
                Some(name) if SECTIONS.contains(&name.trim()) => section = Some(name.trim().to_string()),
                Some(name) => {
                    errors.push(format!("line {ln}: unknown section [{}]", name.trim()));
                    section = None;
                }
                None => errors.push(format!("line {ln}: malformed section header")),
            }
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            errors.push(format!("line {ln}: expected `key = value`"));
            continue;
        };
        let (k, v) = (k.trim().to_string(), v.trim().to_string());
        let Some(s) = &section else {
            errors.push(format!("line {ln}: `{k}` outside any known section"));
            continue;
        };
        if !allowed(s).contains(&k.as_str()) {
            errors.push(format!("line {ln}: unknown key `{k}` in [{s}]"));
            continue;
        }
        if entries.insert((s.clone(), k.clone()), (ln, v)).is_some() {
            errors.push(format!("line {ln}: repeated key `{k}` in [{s}]"));
        }
    }
    Raw { entries }
}

/// Typed access that records errors instead of failing fast.
struct Reader<'a> {
    raw: &'a Raw,
    errors: Vec<String>,
}

impl<'a> Reader<'a> {
    fn get(&self, s: &str, k: &str) -> Option<&'a str> {
        self.raw
            .entries
            .get(&(s.to_string(), k.to_string()))
            .map(|(_, v)| v.as_str())
    }

    fn err(&mut self, s: &str, k: &str, msg: impl fmt::Display) {
        let line = self
            .raw
            .entries
            .get(&(s.to_string(), k.to_string()))
            .map(|(l, _)| format!("line {l}: "))
            .unwrap_or_default();
        self.errors.push(format!("{line}[{s}] {k}: {msg}"));
    }

    fn parse<T>(&mut self, s: &str, k: &str, f: impl FnOnce(&str) -> std::result::Result<T, String>) -> Option<T> {
        let v = self.get(s, k)?;
        match f(v) {
            Ok(t) => Some(t),
            Err(m) => {
                self.err(s, k, m);
                None
            }
        }
    }

    fn f64(&mut self, s: &str, k: &str) -> Option<f64> {
        self.parse(s, k, parse_f64)
    }

    fn usize(&mut self, s: &str, k: &str) -> Option<usize> {
        self.parse(s, k, |v| {
            v.parse::<usize>()
                .map_err(|_| format!("`{v}` is not a nonnegative integer"))
        })
    }

    fn u64(&mut self, s: &str, k: &str) -> Option<u64> {
        self.parse(s, k, |v| {
            v.parse::<u64>()
                .map_err(|_| format!("`{v}` is not a nonnegative integer"))
        })
    }

    fn list(&mut self, s: &str, k: &str) -> Option<Vec<f64>> {
        self.parse(s, k, parse_list)
    }

    fn pair(&mut self, s: &str, k: &str) -> Option<(f64, f64)> {
        self.parse(s, k, |v| match parse_list(v)?.as_slice() {
            [a, b] => Ok((*a, *b)),
            other => Err(format!("expected two numbers, got {}", other.len())),
        })
    }

    fn require<T>(&mut self, s: &str, k: &str, v: Option<T>) -> Option<T> {
        if v.is_none() && self.get(s, k).is_none() {
            self.err(s, k, "missing");
        }
        v
    }
}

fn parse_f64(v: &str) -> std::result::Result<f64, String> {
    match v.trim().parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(format!("`{}` is not a finite number", v.trim())),
    }
}

fn parse_list(v: &str) -> std::result::Result<Vec<f64>, String> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(parse_f64).collect()
}

fn parse_points(v: &str) -> std::result::Result<Vec<Vec<f64>>, String> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(';').map(parse_list).collect()
}

fn parse_phi(v: &str) -> std::result::Result<TestFunction, String> {
    let (kind, args) = v
        .split_once(':')
        .ok_or_else(|| format!("expected `kind:args`, got `{v}`"))?;
    let kind: TestKind = kind.trim().parse().map_err(|e: Error| e.to_string())?;
    let a = parse_list(args)?;
    let r = match (kind, a.as_slice()) {
        (TestKind::Bump, [lo, hi]) => TestFunction::bump(*lo, *hi),
        (TestKind::GaussianTruncated, [c, w, lo, hi]) => TestFunction::gaussian(*c, *w, *lo, *hi),
        (TestKind::IndicatorMollified, [lo, hi, ramp]) => TestFunction::indicator(*lo, *hi, *ramp),
        (TestKind::Bump, _) => return Err("bump takes `lo,hi`".into()),
        (TestKind::GaussianTruncated, _) => return Err("gaussian-truncated takes `center,width,lo,hi`".into()),
        (TestKind::IndicatorMollified, _) => return Err("indicator-mollified takes `lo,hi,ramp`".into()),
    };
    r.map_err(|e| e.to_string())
}

fn phi_text(p: &TestFunction) -> String {
    let (lo, hi) = p.support;
    match p.kind {
        TestKind::Bump => format!("bump:{lo},{hi}"),
        TestKind::GaussianTruncated => format!("gaussian-truncated:{},{},{lo},{hi}", p.center, p.width),
        TestKind::IndicatorMollified => format!("indicator-mollified:{lo},{hi},{}", p.width),
    }
}

fn list_text(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

fn points_text(v: &[Vec<f64>]) -> String {
    v.iter().map(|p| list_text(p)).collect::<Vec<_>>().join("; ")
}

/// Polynomial components read `b = 1:2 = <poly>; 1:3 = <poly>`, indices
/// one-based.
fn parse_components(dim: usize, v: &str) -> std::result::Result<Vec<((usize, usize), Polynomial)>, String> {
    let mut out = Vec::new();
    for part in v.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (idx, poly) = part
            .split_once('=')
            .ok_or_else(|| format!("component `{part}` should read `j:k = polynomial`"))?;
        let (j, k) = idx
            .trim()
            .split_once(':')
            .ok_or_else(|| format!("component index `{}` should read `j:k`", idx.trim()))?;
        let j: usize = j.trim().parse().map_err(|_| format!("bad index `{j}`"))?;
        let k: usize = k.trim().parse().map_err(|_| format!("bad index `{k}`"))?;
        if j == 0 || k == 0 || j >= k || k > dim {
            return Err(format!("component {j}:{k} needs 1 ≤ j < k ≤ {dim}"));
        }
        let p = Polynomial::parse(dim, poly.trim()).map_err(|e| e.to_string())?;
        out.push(((j - 1, k - 1), p));
    }
    if out.is_empty() {
        return Err("no components".into());
    }
    Ok(out)
}

fn parse_matrix(dim: usize, v: &str) -> std::result::Result<Vec<Vec<f64>>, String> {
    if !v.contains(';') && !v.contains(',') {
        if dim != 2 {
            return Err(format!("a scalar field strength needs dim = 2, got {dim}"));
        }
        let b = parse_f64(v)?;
        return Ok(vec![vec![0.0, b], vec![-b, 0.0]]);
    }
    let rows = parse_points(v)?;
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        return Err(format!("expected a {dim}x{dim} matrix"));
    }
    Ok(rows)
}

fn check_dim(r: &mut Reader, s: &str, k: &str, v: &[f64], dim: usize) {
    if v.len() != dim {
        r.err(s, k, format!("has {} entries, dimension is {dim}", v.len()));
    }
}

fn ordered(r: &mut Reader, s: &str, k: &str, p: Option<(f64, f64)>) -> Option<(f64, f64)> {
    match p {
        Some((a, b)) if !(a < b) => {
            r.err(s, k, format!("needs lo < hi, got [{a}, {b}]"));
            None
        }
        other => other,
    }
}

fn read_field(r: &mut Reader) -> Option<FieldConfig> {
    const S: &str = "field";
    let dim = r.usize(S, "dim").unwrap_or(2);
    if dim < 2 {
        r.err(S, "dim", "must be at least 2");
    }
    let family = r.get(S, "family").map(str::to_string);
    let family = match family.as_deref() {
        None => {
            r.err(S, "family", "missing");
            None
        }
        Some("constant") => {
            let b = r.parse(S, "b", |v| parse_matrix(dim, v));
            let b = r.require(S, "b", b);
            b.map(|b| FieldFamily::Constant { b })
        }
        Some("radial-well") => {
            let b0 = r.f64(S, "b0");
            let b0 = r.require(S, "b0", b0);
            let b2 = r.f64(S, "b2");
            let b2 = r.require(S, "b2", b2);
            let center = r.list(S, "center").unwrap_or_else(|| vec![0.0; dim]);
            check_dim(r, S, "center", &center, dim);
            Some(FieldFamily::RadialWell {
                b0: b0?,
                b2: b2?,
                center,
            })
        }
        Some("iwatsuka") => {
            let vals: Vec<Option<f64>> = ["b_lo", "b_hi", "width"]
                .iter()
                .map(|k| {
                    let v = r.f64(S, k);
                    r.require(S, k, v)
                })
                .collect();
            let offset = r.f64(S, "offset").unwrap_or(0.0);
            match vals.as_slice() {
                [Some(b_lo), Some(b_hi), Some(width)] => Some(FieldFamily::Iwatsuka {
                    b_lo: *b_lo,
                    b_hi: *b_hi,
                    width: *width,
                    offset,
                }),
                _ => None,
            }
        }
        Some("polynomial") => {
            let c = r.parse(S, "b", |v| parse_components(dim, v));
            let c = r.require(S, "b", c);
            c.map(|components| FieldFamily::Polynomial { components })
        }
        Some(other) => {
            r.err(S, "family", format!("unknown family `{other}`"));
            None
        }
    };
    let potential = match r.get(S, "potential").unwrap_or("zero") {
        "zero" => Some(PotentialConfig::Zero),
        "constant" => {
            let v = r.f64(S, "v0");
            r.require(S, "v0", v).map(PotentialConfig::Constant)
        }
        "harmonic" => {
            let v0 = r.f64(S, "v0").unwrap_or(0.0);
            let v2 = r.f64(S, "v2");
            let v2 = r.require(S, "v2", v2);
            let center = r.list(S, "v_center").unwrap_or_else(|| vec![0.0; dim]);
            check_dim(r, S, "v_center", &center, dim);
            v2.map(|v2| PotentialConfig::Harmonic { v0, v2, center })
        }
        "polynomial" => {
            let p = r.parse(S, "v_poly", |v| Polynomial::parse(dim, v).map_err(|e| e.to_string()));
            r.require(S, "v_poly", p).map(PotentialConfig::Polynomial)
        }
        other => {
            let other = other.to_string();
            r.err(S, "potential", format!("unknown potential `{other}`"));
            None
        }
    };
    let gauge_center = r.list(S, "gauge_center");
    if let Some(c) = &gauge_center {
        check_dim(r, S, "gauge_center", c, dim);
    }
    let quad_order = r.usize(S, "quad_order");
    let gauge = match r.get(S, "gauge").unwrap_or("default") {
        "default" => Some(GaugeConfig::Default),
        g @ ("symmetric" | "landau" | "transverse") => {
            let g = g.to_string();
            match gauge_center {
                None => {
                    r.err(S, "gauge_center", format!("required by gauge = {g}"));
                    None
                }
                Some(center) => Some(match g.as_str() {
                    "symmetric" => GaugeConfig::Symmetric { center },
                    "landau" => GaugeConfig::Landau { center },
                    _ => GaugeConfig::Transverse {
                        center,
                        quad_order: quad_order.unwrap_or(DEFAULT_QUAD_ORDER),
                    },
                }),
            }
        }
        other => {
            let other = other.to_string();
            r.err(S, "gauge", format!("unknown gauge `{other}`"));
            None
        }
    };
    let keys = ["bound_b", "bound_grad_b", "bound_v", "bound_grad_v"];
    let given: Vec<Option<f64>> = keys.iter().map(|k| r.f64(S, k)).collect();
    let present = keys.iter().filter(|k| r.get(S, k).is_some()).count();
    let bounds = if present == 0 {
        None
    } else if present < keys.len() {
        r.err(
            S,
            "bound_b",
            "declare all four of bound_b, bound_grad_b, bound_v, bound_grad_v or none",
        );
        None
    } else {
        match given.as_slice() {
            [Some(b), Some(gb), Some(v), Some(gv)] => Some(SmoothnessBounds {
                b: *b,
                grad_b: *gb,
                v: *v,
                grad_v: *gv,
                declared: true,
            }),
            _ => None,
        }
    };
    Some(FieldConfig {
        dim,
        family: family?,
        potential: potential?,
        gauge: gauge?,
        bounds,
    })
}

fn read_domain(r: &mut Reader, dim: usize) -> Option<DomainConfig> {
    const S: &str = "domain";
    let lo = r.list(S, "lo");
    let lo = r.require(S, "lo", lo);
    let hi = r.list(S, "hi");
    let hi = r.require(S, "hi", hi);
    let h0 = r.f64(S, "h0").unwrap_or(DEFAULT_GRID.h0);
    let power = r.f64(S, "h_power").unwrap_or(DEFAULT_GRID.power);
    if !(h0 > 0.0) {
        r.err(S, "h0", "must be positive");
    }
    let margin = r.f64(S, "margin").unwrap_or(0.0);
    if margin < 0.0 {
        r.err(S, "margin", "must be nonnegative");
    }
    let node_cap = r.usize(S, "node_cap").unwrap_or(DEFAULT_NODE_CAP);
    let (lo, hi) = (lo?, hi?);
    check_dim(r, S, "lo", &lo, dim);
    check_dim(r, S, "hi", &hi, dim);
    if lo.iter().zip(&hi).any(|(l, h)| !(l < h)) {
        r.err(S, "hi", "every upper bound must exceed the lower bound");
    }
    Some(DomainConfig {
        lo,
        hi,
        grid: GridRule { h0, power },
        margin,
        node_cap,
    })
}

fn read_semiclassical(r: &mut Reader, domain: Option<&DomainConfig>) -> Option<SemiclassicalConfig> {
    const S: &str = "semiclassical";
    let ladder = r.list(S, "ladder");
    let ladder = r.require(S, "ladder", ladder);
    if let Some(l) = &ladder {
        if l.len() < 3 {
            r.err(S, "ladder", format!("needs at least 3 rungs, got {}", l.len()));
        }
        if l.iter().any(|h| !(*h > 0.0)) {
            r.err(S, "ladder", "every ħ must be positive");
        }
        if l.windows(2).any(|w| w[1] >= w[0]) {
            r.err(S, "ladder", "must be strictly decreasing");
        }
    }
    let window = r.pair(S, "window");
    let window = r.require(S, "window", window);
    let window = ordered(r, S, "window", window);
    if let Some((lo, _)) = window {
        if lo < 0.0 {
            r.err(S, "window", "must start at or above 0");
        }
    }
    let sigma_step = r.f64(S, "sigma_step").unwrap_or(DEFAULT_SIGMA_STEP);
    if !(sigma_step > 0.0) {
        r.err(S, "sigma_step", "must be positive");
    }
    let sigma_max = r.f64(S, "sigma_max").or(window.map(|w| w.1)).unwrap_or(f64::NAN);
    if let Some((_, whi)) = window {
        if !(sigma_max >= whi) {
            r.err(S, "sigma_max", format!("must be at least the window top {whi}"));
        }
    }
    let interval = r.pair(S, "interval");
    let interval = ordered(r, S, "interval", interval);
    let inner = r.pair(S, "inner");
    let inner = ordered(r, S, "inner", inner);
    match (interval, inner) {
        (Some((a, b)), Some((a1, b1))) if !(a1 > a && b1 < b) => {
            r.err(
                S,
                "inner",
                format!("[{a1}, {b1}] must lie strictly inside interval [{a}, {b}]"),
            );
        }
        (None, Some(_)) => r.err(S, "inner", "needs `interval`"),
        _ => {}
    }
    if let (Some((wlo, whi)), Some((a1, b1))) = (window, inner) {
        if a1 < wlo || b1 > whi {
            r.err(
                S,
                "inner",
                format!("[{a1}, {b1}] is not inside the window [{wlo}, {whi}]"),
            );
        }
    }
    let phi = r.parse(S, "phi", parse_phi);
    if let (Some(p), Some((wlo, whi))) = (&phi, window) {
        if p.support.0 < wlo || p.support.1 > whi {
            r.err(
                S,
                "phi",
                format!("support {:?} is not inside the window [{wlo}, {whi}]", p.support),
            );
        }
    }
    let gap_phi = r.parse(S, "gap_phi", parse_phi);
    let gap_window = r.pair(S, "gap_window");
    let gap_window = ordered(r, S, "gap_window", gap_window);
    if let (Some(p), Some((lo, hi))) = (&gap_phi, gap_window) {
        if p.support.0 < lo || p.support.1 > hi {
            r.err(
                S,
                "gap_phi",
                format!("support {:?} is not inside gap_window [{lo}, {hi}]", p.support),
            );
        }
    }
    if gap_window.is_some() && gap_phi.is_none() && r.get(S, "gap_phi").is_none() {
        r.err(S, "gap_window", "needs `gap_phi`");
    }
    let points = r.parse(S, "points", parse_points).unwrap_or_default();
    if let Some(d) = domain {
        for p in &points {
            if p.len() != d.lo.len() {
                r.err(S, "points", format!("point {p:?} has the wrong dimension"));
                continue;
            }
            let inside = (0..p.len()).all(|a| {
                let keep = 0.25 * (d.hi[a] - d.lo[a]);
                p[a] - d.lo[a] >= keep && d.hi[a] - p[a] >= keep
            });
            if !inside {
                r.err(
                    S,
                    "points",
                    format!("point {p:?} is closer than a quarter of the box to a face"),
                );
            }
        }
    }
    if (phi.is_some() || gap_phi.is_some()) && points.is_empty() && r.get(S, "points").is_none() {
        r.err(S, "points", "required by `phi` or `gap_phi`");
    }
    let radii = r.list(S, "radii").unwrap_or_else(|| DEFAULT_RADII.to_vec());
    if radii.is_empty() || radii.iter().any(|x| *x < 0.0) || radii.windows(2).any(|w| w[1] <= w[0]) {
        r.err(S, "radii", "must be nonempty, nonnegative and increasing");
    }
    let separation = r.f64(S, "separation");
    if let Some(s) = separation {
        if !(s > 0.0) {
            r.err(S, "separation", "must be positive");
        }
        if phi.is_none() && r.get(S, "phi").is_none() {
            r.err(S, "separation", "needs `phi`");
        }
    }
    let probes = r.usize(S, "probes").unwrap_or(DEFAULT_PROBES);
    Some(SemiclassicalConfig {
        ladder: ladder?,
        window: window?,
        sigma_step,
        sigma_max,
        interval,
        inner,
        phi,
        gap_phi,
        gap_window,
        points,
        radii,
        separation,
        probes,
    })
}

fn read_solver(r: &mut Reader) -> SolverConfig {
    const S: &str = "solver";
    let d = EigsOptions::default();
    let eigs = EigsOptions {
        tol: r.f64(S, "tol").unwrap_or(d.tol),
        max_restarts: r.usize(S, "max_restarts").unwrap_or(d.max_restarts),
        slice_max: r.usize(S, "slice_max").unwrap_or(d.slice_max),
        block: r.usize(S, "block").unwrap_or(d.block),
        depth: r.usize(S, "depth").unwrap_or(d.depth),
        seed: r.u64(S, "seed").unwrap_or(d.seed),
    };
    if !(eigs.tol > 0.0 && eigs.tol < 1.0) {
        r.err(S, "tol", "must lie in (0, 1)");
    }
    for (k, v) in [
        ("slice_max", eigs.slice_max),
        ("block", eigs.block),
        ("depth", eigs.depth),
    ] {
        if v == 0 {
            r.err(S, k, "must be positive");
        }
    }
    SolverConfig { eigs }
}

fn read_output(r: &mut Reader) -> OutputConfig {
    const S: &str = "output";
    let dir = PathBuf::from(r.get(S, "dir").unwrap_or("out"));
    let formats = r
        .parse(S, "formats", |v| {
            v.split(',')
                .map(|f| match f.trim() {
                    "json" => Ok(Format::Json),
                    "csv" => Ok(Format::Csv),
                    "eigvecs" => Ok(Format::Eigvecs),
                    other => Err(format!("unknown format `{other}`")),
                })
                .collect::<std::result::Result<Vec<_>, _>>()
        })
        .unwrap_or_else(|| vec![Format::Json, Format::Csv]);
    OutputConfig { dir, formats }
}

impl ScenarioConfig {
    /// Parses a scenario, collecting every error.
    pub fn parse(text: &str) -> Result<Self> {
        let mut errors = Vec::new();
        let raw = tokenize(text, &mut errors);
        let mut r = Reader { raw: &raw, errors };
        let field = read_field(&mut r);
        let dim = field.as_ref().map_or(2, |f| f.dim);
        let domain = read_domain(&mut r, dim);
        let semiclassical = read_semiclassical(&mut r, domain.as_ref());
        let solver = read_solver(&mut r);
        let output = read_output(&mut r);
        let cfg = match (field, domain, semiclassical) {
            (Some(field), Some(domain), Some(semiclassical)) if r.errors.is_empty() => Some(Self {
                field,
                domain,
                semiclassical,
                solver,
                output,
            }),
            _ => None,
        };
        let mut errors = r.errors;
        if let Some(c) = &cfg {
            // field-level checks need the assembled field
            if let Err(e) = c.field_spec() {
                errors.push(format!("[field] {e}"));
            }
        }
        match cfg {
            Some(c) if errors.is_empty() => Ok(c),
            _ => {
                if errors.is_empty() {
                    errors.push("incomplete configuration".into());
                }
                Err(Error::Config(errors))
            }
        }
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn domain(&self) -> Result<Domain> {
        Domain::new(self.domain.lo.clone(), self.domain.hi.clone())
    }

    pub fn field_spec(&self) -> Result<FieldSpec> {
        let f = &self.field;
        let magnetic = match &f.family {
            FieldFamily::Constant { b } => {
                let d = b.len();
                MagneticFamily::Constant(DMatrix::from_fn(d, d, |i, j| b[i][j]))
            }
            FieldFamily::RadialWell { b0, b2, center } => MagneticFamily::RadialWell {
                b0: *b0,
                b2: *b2,
                center: center.clone(),
            },
            FieldFamily::Iwatsuka {
                b_lo,
                b_hi,
                width,
                offset,
            } => MagneticFamily::Iwatsuka {
                b_lo: *b_lo,
                b_hi: *b_hi,
                width: *width,
                offset: *offset,
            },
            FieldFamily::Polynomial { components } => MagneticFamily::Polynomial(components.clone()),
        };
        let potential = match &f.potential {
            PotentialConfig::Zero => PotentialFamily::Zero,
            PotentialConfig::Constant(v) => PotentialFamily::Constant(*v),
            PotentialConfig::Harmonic { v0, v2, center } => PotentialFamily::Harmonic {
                v0: *v0,
                v2: *v2,
                center: center.clone(),
            },
            PotentialConfig::Polynomial(p) => PotentialFamily::Polynomial(p.clone()),
        };
        let gauge = match &f.gauge {
            GaugeConfig::Default => None,
            GaugeConfig::Symmetric { center } => Some(VectorPotential::Symmetric { center: center.clone() }),
            GaugeConfig::Landau { center } => Some(VectorPotential::Landau { center: center.clone() }),
            GaugeConfig::Transverse { center, quad_order } => Some(VectorPotential::Transverse {
                center: center.clone(),
                quad_order: *quad_order,
            }),
        };
        FieldSpec::new(magnetic, potential, gauge, self.domain()?, f.bounds)
    }

    pub fn scenario(&self) -> Result<Scenario> {
        Scenario::new(
            self.field_spec()?,
            self.domain.grid,
            self.domain.node_cap,
            self.solver.eigs,
        )
    }

    /// Window for the gap test function: `gap_window`, or its support padded
    /// by [`GAP_WINDOW_PAD`].
    pub fn gap_window(&self) -> Option<(f64, f64)> {
        let s = &self.semiclassical;
        s.gap_window.or_else(|| {
            s.gap_phi
                .map(|p| (p.support.0 - GAP_WINDOW_PAD, p.support.1 + GAP_WINDOW_PAD))
        })
    }
}

impl fmt::Display for ScenarioConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let fc = &self.field;
        writeln!(f, "[field]")?;
        writeln!(f, "dim = {}", fc.dim)?;
        match &fc.family {
            FieldFamily::Constant { b } => {
                writeln!(f, "family = constant")?;
                writeln!(f, "b = {}", points_text(b))?;
            }
            FieldFamily::RadialWell { b0, b2, center } => {
                writeln!(f, "family = radial-well")?;
                writeln!(f, "b0 = {b0}")?;
                writeln!(f, "b2 = {b2}")?;
                writeln!(f, "center = {}", list_text(center))?;
            }
            FieldFamily::Iwatsuka {
                b_lo,
                b_hi,
                width,
                offset,
            } => {
                writeln!(f, "family = iwatsuka")?;
                writeln!(f, "b_lo = {b_lo}")?;
                writeln!(f, "b_hi = {b_hi}")?;
                writeln!(f, "width = {width}")?;
                writeln!(f, "offset = {offset}")?;
            }
            FieldFamily::Polynomial { components } => {
                writeln!(f, "family = polynomial")?;
                let parts: Vec<String> = components
                    .iter()
                    .map(|((j, k), p)| format!("{}:{} = {p}", j + 1, k + 1))
                    .collect();
                writeln!(f, "b = {}", parts.join("; "))?;
            }
        }
        match &fc.potential {
            PotentialConfig::Zero => writeln!(f, "potential = zero")?,
            PotentialConfig::Constant(v) => writeln!(f, "potential = constant\nv0 = {v}")?,
            PotentialConfig::Harmonic { v0, v2, center } => writeln!(
                f,
                "potential = harmonic\nv0 = {v0}\nv2 = {v2}\nv_center = {}",
                list_text(center)
            )?,
            PotentialConfig::Polynomial(p) => writeln!(f, "potential = polynomial\nv_poly = {p}")?,
        }
        match &fc.gauge {
            GaugeConfig::Default => writeln!(f, "gauge = default")?,
            GaugeConfig::Symmetric { center } => {
                writeln!(f, "gauge = symmetric\ngauge_center = {}", list_text(center))?
            }
            GaugeConfig::Landau { center } => writeln!(f, "gauge = landau\ngauge_center = {}", list_text(center))?,
            GaugeConfig::Transverse { center, quad_order } => writeln!(
                f,
                "gauge = transverse\ngauge_center = {}\nquad_order = {quad_order}",
                list_text(center)
            )?,
        }
        if let Some(b) = &fc.bounds {
            writeln!(
                f,
                "bound_b = {}\nbound_grad_b = {}\nbound_v = {}\nbound_grad_v = {}",
                b.b, b.grad_b, b.v, b.grad_v
            )?;
        }
        let d = &self.domain;
        writeln!(f, "\n[domain]")?;
        writeln!(f, "lo = {}", list_text(&d.lo))?;
        writeln!(f, "hi = {}", list_text(&d.hi))?;
        writeln!(f, "h0 = {}", d.grid.h0)?;
        writeln!(f, "h_power = {}", d.grid.power)?;
        writeln!(f, "margin = {}", d.margin)?;
        writeln!(f, "node_cap = {}", d.node_cap)?;
        let s = &self.semiclassical;
        writeln!(f, "\n[semiclassical]")?;
        writeln!(f, "ladder = {}", list_text(&s.ladder))?;
        writeln!(f, "window = {}, {}", s.window.0, s.window.1)?;
        writeln!(f, "sigma_step = {}", s.sigma_step)?;
        writeln!(f, "sigma_max = {}", s.sigma_max)?;
        if let Some((a, b)) = s.interval {
            writeln!(f, "interval = {a}, {b}")?;
        }
        if let Some((a, b)) = s.inner {
            writeln!(f, "inner = {a}, {b}")?;
        }
        if let Some(p) = &s.phi {
            writeln!(f, "phi = {}", phi_text(p))?;
        }
        if let Some(p) = &s.gap_phi {
            writeln!(f, "gap_phi = {}", phi_text(p))?;
        }
        if let Some((a, b)) = s.gap_window {
            writeln!(f, "gap_window = {a}, {b}")?;
        }
        if !s.points.is_empty() {
            writeln!(f, "points = {}", points_text(&s.points))?;
        }
        writeln!(f, "radii = {}", list_text(&s.radii))?;
        if let Some(sep) = s.separation {
            writeln!(f, "separation = {sep}")?;
        }
        writeln!(f, "probes = {}", s.probes)?;
        let e = &self.solver.eigs;
        writeln!(f, "\n[solver]")?;
        writeln!(f, "tol = {}", e.tol)?;
        writeln!(f, "max_restarts = {}", e.max_restarts)?;
        writeln!(f, "slice_max = {}", e.slice_max)?;
        writeln!(f, "block = {}", e.block)?;
        writeln!(f, "depth = {}", e.depth)?;
        writeln!(f, "seed = {}", e.seed)?;
        let o = &self.output;
        writeln!(f, "\n[output]")?;
        writeln!(f, "dir = {}", o.dir.display())?;
        let fm: Vec<&str> = o
            .formats
            .iter()
            .map(|x| match x {
                Format::Json => "json",
                Format::Csv => "csv",
                Format::Eigvecs => "eigvecs",
            })
            .collect();
        writeln!(f, "formats = {}", fm.join(", "))
    }
}
