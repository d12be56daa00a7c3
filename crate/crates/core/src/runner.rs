//! Subcommand dispatch: runs checks for a scenario and writes their reports.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::config::{Format, ScenarioConfig};
use crate::landau::{find_gaps, kset, sample_sigma, SigmaApprox};
use crate::report::{
    self, coord_header, header, num, nums, write_json, write_scaling_csv, write_table, Envelope, Failure, OutputDir,
};
use crate::spectral::write_eigvecs;
use crate::verify::{
    check_gap_discreteness, check_gap_ldos, check_ldos_leading, check_localization, check_offdiag_decay,
    check_spectrum_inclusion, distance_transform, Rung, Scenario,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Sigma,
    Kset,
    Gaps,
    Assemble,
    Eigs,
    Ldos,
    Localize,
    SpectrumCheck,
    GapCheck,
    All,
}

impl Command {
    pub const ALL: [Command; 10] = [
        Command::Sigma,
        Command::Kset,
        Command::Gaps,
        Command::Assemble,
        Command::Eigs,
        Command::Ldos,
        Command::Localize,
        Command::SpectrumCheck,
        Command::GapCheck,
        Command::All,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Sigma => "sigma",
            Command::Kset => "kset",
            Command::Gaps => "gaps",
            Command::Assemble => "assemble",
            Command::Eigs => "eigs",
            Command::Ldos => "ldos",
            Command::Localize => "localize",
            Command::SpectrumCheck => "spectrum-check",
            Command::GapCheck => "gap-check",
            Command::All => "all",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown subcommand `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    /// Artifact without a contract.
    Info,
    /// Not applicable to this scenario.
    Skip,
    Error,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Info => "INFO",
            Status::Skip => "SKIP",
            Status::Error => "ERROR",
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckLine {
    pub check: String,
    pub status: Status,
    pub detail: String,
}

impl fmt::Display for CheckLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:<5} {}: {}", self.status, self.check, self.detail)
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct RunOutcome {
    pub lines: Vec<CheckLine>,
}

impl RunOutcome {
    /// True iff no check failed or errored.
    pub fn success(&self) -> bool {
        self.lines
            .iter()
            .all(|l| !matches!(l.status, Status::Fail | Status::Error))
    }
}

/// Lazily computed data shared between checks of one run.
struct Ctx<'a> {
    cfg: &'a ScenarioConfig,
    text: String,
    sc: Scenario,
    out: OutputDir,
    sigma: Option<SigmaApprox>,
    rungs: Option<Vec<Rung>>,
    lines: Vec<CheckLine>,
}

impl<'a> Ctx<'a> {
    fn sigma(&mut self) -> Result<&SigmaApprox> {
        if self.sigma.is_none() {
            let s = &self.cfg.semiclassical;
            self.sigma = Some(sample_sigma(
                &self.sc.field,
                &self.cfg.domain()?,
                s.sigma_max,
                s.sigma_step,
            )?);
        }
        Ok(self.sigma.as_ref().expect("just set"))
    }

    fn rungs(&mut self) -> Result<&[Rung]> {
        if self.rungs.is_none() {
            let s = &self.cfg.semiclassical;
            self.rungs = Some(self.sc.solve_ladder(&s.ladder, s.window)?);
        }
        Ok(self.rungs.as_deref().expect("just set"))
    }

    fn csv(&self) -> bool {
        self.cfg.output.formats.contains(&Format::Csv)
    }

    fn json(&self) -> bool {
        self.cfg.output.formats.contains(&Format::Json)
    }

    fn emit<T: Serialize>(&mut self, check: &str, pass: Option<bool>, detail: String, body: &T) -> Result<()> {
        let status = match pass {
            Some(true) => Status::Pass,
            Some(false) => Status::Fail,
            None => Status::Info,
        };
        let line = CheckLine {
            check: check.into(),
            status,
            detail,
        };
        if self.json() {
            let summary = line.to_string();
            let env = Envelope {
                check,
                pass,
                summary: &summary,
                generated_unix: report::timestamp(),
                seed: self.cfg.solver.eigs.seed,
                config: &self.text,
                body,
            };
            write_json(&self.out.path(&format!("{check}.json")), &env)?;
        }
        self.lines.push(line);
        Ok(())
    }

    fn skip(&mut self, check: &str, why: &str) {
        self.lines.push(CheckLine {
            check: check.into(),
            status: Status::Skip,
            detail: why.into(),
        });
    }

    fn fail(&mut self, check: &str, e: &Error) -> Result<()> {
        let f = Failure {
            check,
            error: e.to_string(),
        };
        write_json(&self.out.path(&format!("{check}.error.json")), &f)?;
        self.lines.push(CheckLine {
            check: check.into(),
            status: Status::Error,
            detail: serde_json::to_string(&f)?,
        });
        Ok(())
    }
}

/// Runs `cmd`, writing reports under the configured output directory.
///
/// Check errors become `ERROR` lines and `<check>.error.json` files; only
/// configuration and I/O problems abort the run.
pub fn run(cmd: Command, cfg: &ScenarioConfig) -> Result<RunOutcome> {
    let mut ctx = Ctx {
        cfg,
        text: cfg.to_string(),
        sc: cfg.scenario()?,
        out: OutputDir::create(&cfg.output.dir)?,
        sigma: None,
        rungs: None,
        lines: Vec::new(),
    };
    let steps: Vec<Command> = match cmd {
        Command::All => Command::ALL[..9].to_vec(),
        c => vec![c],
    };
    let explicit = cmd != Command::All;
    for step in steps {
        let r = match step {
            Command::Sigma => sigma(&mut ctx),
            Command::Kset => kset_step(&mut ctx, explicit),
            Command::Gaps => gaps(&mut ctx),
            Command::Assemble => assemble(&mut ctx),
            Command::Eigs => eigs(&mut ctx),
            Command::Ldos => ldos_steps(&mut ctx, explicit),
            Command::Localize => localize(&mut ctx, explicit),
            Command::SpectrumCheck => inclusion(&mut ctx),
            Command::GapCheck => gap_check(&mut ctx, explicit),
            Command::All => unreachable!("expanded above"),
        };
        if let Err((check, e)) = r {
            if matches!(e, Error::Io(_) | Error::Config(_)) {
                return Err(e);
            }
            ctx.fail(check, &e)?;
        }
    }
    Ok(RunOutcome { lines: ctx.lines })
}

type Step = std::result::Result<(), (&'static str, Error)>;

fn tag<T>(check: &'static str, r: Result<T>) -> std::result::Result<T, (&'static str, Error)> {
    r.map_err(|e| (check, e))
}

fn missing(ctx: &mut Ctx, check: &'static str, explicit: bool, what: &str) -> Step {
    if explicit {
        return Err((
            check,
            Error::Config(vec![format!("[semiclassical] {what}: required by `{check}`")]),
        ));
    }
    ctx.skip(check, &format!("needs {what}"));
    Ok(())
}

fn sigma(ctx: &mut Ctx) -> Step {
    const C: &str = "sigma";
    let sa = tag(C, ctx.sigma())?.clone();
    if ctx.csv() {
        let rows: Vec<Vec<String>> = sa.intervals.iter().map(|&(a, b)| nums(&[a, b])).collect();
        tag(
            C,
            write_table(&ctx.out.path("sigma.csv"), &header(&["lo", "hi"]), &rows),
        )?;
    }
    let shown: Vec<String> = sa.intervals.iter().map(|(a, b)| format!("[{a:.4}, {b:.4}]")).collect();
    let detail = format!("{} with rho = {:.4}", shown.join(" u "), sa.covering_radius);
    tag(C, ctx.emit(C, None, detail, &sa))
}

fn gaps(ctx: &mut Ctx) -> Step {
    const C: &str = "gaps";
    let sa = tag(C, ctx.sigma())?.clone();
    let g = find_gaps(&sa, 0.0);
    if ctx.csv() {
        let rows: Vec<Vec<String>> = g.iter().map(|&(a, b)| nums(&[a, b])).collect();
        tag(C, write_table(&ctx.out.path("gaps.csv"), &header(&["lo", "hi"]), &rows))?;
    }
    #[derive(Serialize)]
    struct Body<'b> {
        gaps: &'b [(f64, f64)],
        sigma_max: f64,
    }
    let detail = format!("{} certified gap(s) below {}", g.len(), sa.lmax);
    tag(
        C,
        ctx.emit(
            C,
            None,
            detail,
            &Body {
                gaps: &g,
                sigma_max: sa.lmax,
            },
        ),
    )
}

fn kset_step(ctx: &mut Ctx, explicit: bool) -> Step {
    const C: &str = "kset";
    let Some(interval) = ctx.cfg.semiclassical.interval else {
        return missing(ctx, C, explicit, "interval");
    };
    let hbar = *ctx.cfg.semiclassical.ladder.last().expect("validated ladder");
    let grid = tag(C, ctx.sc.grid(hbar))?;
    let mask = tag(C, kset(&ctx.sc.field, interval, &grid, ctx.cfg.domain.margin))?;
    let dist = if mask.count() > 0 {
        Some(tag(C, distance_transform(&mask))?.values)
    } else {
        None
    };
    if ctx.csv() {
        let mut h = coord_header("", grid.dim());
        h.extend(header(&["member", "distance"]));
        let rows: Vec<Vec<String>> = (0..grid.len())
            .map(|i| {
                let mut r = nums(&grid.coord(i));
                r.push(u8::from(mask.mask[i]).to_string());
                r.push(dist.as_ref().map_or(String::new(), |d| num(d[i])));
                r
            })
            .collect();
        tag(C, write_table(&ctx.out.path("kset.csv"), &h, &rows))?;
    }
    #[derive(Serialize)]
    struct Body {
        interval: (f64, f64),
        margin: f64,
        hbar: f64,
        grid_n: Vec<usize>,
        members: usize,
        compact_flag: bool,
    }
    let body = Body {
        interval,
        margin: mask.margin,
        hbar,
        grid_n: grid.n.clone(),
        members: mask.count(),
        compact_flag: mask.compact_flag,
    };
    let detail = format!(
        "{} of {} nodes, compact = {}",
        body.members,
        grid.len(),
        body.compact_flag
    );
    tag(C, ctx.emit(C, None, detail, &body))
}

fn assemble(ctx: &mut Ctx) -> Step {
    const C: &str = "hermitian-assembly";
    #[derive(Serialize)]
    struct Row {
        hbar: f64,
        grid_n: Vec<usize>,
        nodes: usize,
        nnz: usize,
        norm_bound: f64,
        hermiticity_violations: usize,
    }
    let mut rows = Vec::new();
    for &hbar in &ctx.cfg.semiclassical.ladder {
        let op = tag(C, ctx.sc.operator(hbar))?;
        rows.push(Row {
            hbar,
            grid_n: op.grid.n.clone(),
            nodes: op.dim(),
            nnz: op.nnz(),
            norm_bound: op.norm_bound(),
            hermiticity_violations: op.hermiticity_violations(),
        });
    }
    if ctx.csv() {
        let t: Vec<Vec<String>> = rows
            .iter()
            .map(|r| {
                vec![
                    num(r.hbar),
                    r.nodes.to_string(),
                    r.nnz.to_string(),
                    num(r.norm_bound),
                    r.hermiticity_violations.to_string(),
                ]
            })
            .collect();
        let h = header(&["hbar", "nodes", "nnz", "norm_bound", "hermiticity_violations"]);
        tag(C, write_table(&ctx.out.path("assemble.csv"), &h, &t))?;
    }
    let pass = rows.iter().all(|r| r.hermiticity_violations == 0);
    let sizes: Vec<String> = rows.iter().map(|r| r.nodes.to_string()).collect();
    let detail = format!("nodes {} per rung, hermitian = {pass}", sizes.join("/"));
    tag(C, ctx.emit(C, Some(pass), detail, &rows))
}

fn eigs(ctx: &mut Ctx) -> Step {
    const C: &str = "eigs-complete";
    let vecs = ctx.cfg.output.formats.contains(&Format::Eigvecs);
    let csv = ctx.csv();
    let out = ctx.out.clone();
    let rungs = tag(C, ctx.rungs())?;
    #[derive(Serialize)]
    struct Row {
        hbar: f64,
        window: (f64, f64),
        grid_n: Vec<usize>,
        found: usize,
        expected: usize,
        complete: bool,
        max_residual: f64,
        tol: f64,
        lambdas: Vec<f64>,
    }
    let mut table = Vec::new();
    let mut rows = Vec::new();
    for (k, r) in rungs.iter().enumerate() {
        let ew = &r.ew;
        for (i, (&l, &res)) in ew.lambdas.iter().zip(&ew.residuals).enumerate() {
            table.push(vec![num(r.hbar), i.to_string(), num(l), num(res)]);
        }
        if vecs {
            tag(C, write_eigvecs(ew, &out.path(&format!("eigvecs_{k}.bin"))))?;
        }
        rows.push(Row {
            hbar: r.hbar,
            window: ew.window,
            grid_n: ew.grid.n.clone(),
            found: ew.len(),
            expected: ew.expected,
            complete: ew.complete_flag,
            max_residual: ew.residuals.iter().copied().fold(0.0, f64::max),
            tol: ew.tol,
            lambdas: ew.lambdas.clone(),
        });
    }
    if csv {
        let h = header(&["hbar", "index", "lambda", "residual"]);
        tag(C, write_table(&out.path("eigs.csv"), &h, &table))?;
    }
    let pass = rows.iter().all(|r| r.complete && r.max_residual <= r.tol);
    let counts: Vec<String> = rows.iter().map(|r| format!("{}/{}", r.found, r.expected)).collect();
    let detail = format!("found/expected {} per rung", counts.join(", "));
    tag(C, ctx.emit(C, Some(pass), detail, &rows))
}

fn ldos_steps(ctx: &mut Ctx, explicit: bool) -> Step {
    let s = ctx.cfg.semiclassical.clone();
    if s.phi.is_none() && s.gap_phi.is_none() {
        return missing(ctx, "ldos-leading-order", explicit, "phi or gap_phi");
    }
    if let Some(phi) = s.phi {
        const C: &str = "ldos-leading-order";
        let field = ctx.sc.field.clone();
        let rungs = tag(C, ctx.rungs())?;
        let rep = tag(C, check_ldos_leading(rungs, &field, &phi, &s.points))?;
        if ctx.csv() {
            let d = field.dim;
            let mut h = vec!["hbar".to_string()];
            h.extend(coord_header("", d));
            h.extend(header(&["scaled_ldos", "f0", "relative_error"]));
            let rows: Vec<Vec<String>> = rep
                .rungs
                .iter()
                .flat_map(|r| {
                    r.points.iter().map(move |p| {
                        let mut row = vec![num(r.hbar)];
                        row.extend(nums(&p.node));
                        row.extend(nums(&[p.scaled, p.f0, p.error]));
                        row
                    })
                })
                .collect();
            tag(C, write_table(&ctx.out.path("ldos.csv"), &h, &rows))?;
            tag(
                C,
                write_scaling_csv(&ctx.out.path("ldos-leading-order_scaling.csv"), &rep.scaling),
            )?;
        }
        let detail = format!(
            "relative error at finest rung {:.3e} (max {}), beta = {:.3} (min {})",
            rep.finest_error,
            crate::verify::ldos::MAX_RELATIVE_ERROR,
            rep.scaling.exponent,
            crate::verify::ldos::MIN_BETA
        );
        tag(C, ctx.emit(C, Some(rep.pass), detail, &rep))?;
        if let Some(sep) = s.separation {
            const O: &str = "offdiag-decay";
            let rungs = tag(O, ctx.rungs())?;
            let rep = tag(O, check_offdiag_decay(rungs, &phi, &s.points, sep))?;
            if ctx.csv() {
                let xs: Vec<f64> = rep.hbar_ladder.iter().map(|h| 1.0 / h.sqrt()).collect();
                let rows: Vec<Vec<String>> = rep
                    .hbar_ladder
                    .iter()
                    .zip(&xs)
                    .zip(&rep.kernel)
                    .map(|((&h, &x), &k)| nums(&[h, x, k, 10f64.powf(rep.fit.eval(x))]))
                    .collect();
                let hd = header(&["hbar", "inv_sqrt_hbar", "kernel", "fitted"]);
                tag(O, write_table(&ctx.out.path("offdiag-decay.csv"), &hd, &rows))?;
            }
            let detail = format!(
                "rate {:.3} in 1/sqrt(hbar), rms {:.3} decades",
                rep.rate, rep.fit.rms_residual
            );
            tag(O, ctx.emit(O, Some(rep.pass), detail, &rep))?;
        }
    } else if !explicit {
        ctx.skip("ldos-leading-order", "needs phi");
    }
    if let Some(gphi) = s.gap_phi {
        const G: &str = "gap-ldos";
        let window = ctx.cfg.gap_window().expect("gap_phi present");
        // the doubled box keeps boundary states out of the bulk gap
        let sa = tag(
            G,
            sample_sigma(
                &ctx.sc.doubled,
                &ctx.sc.doubled.domain,
                s.sigma_max.max(window.1),
                s.sigma_step,
            ),
        )?;
        let sc = &ctx.sc;
        let rungs: Vec<Rung> = tag(
            G,
            crate::par::map_slice(&s.ladder, |&h| sc.solve_doubled(h, window))
                .into_iter()
                .collect::<Result<Vec<_>>>(),
        )?;
        let rep = tag(G, check_gap_ldos(&rungs, &sa, &gphi, &s.points))?;
        if ctx.csv() {
            let rows: Vec<Vec<String>> = rep
                .hbar_ladder
                .iter()
                .zip(&rep.scaled_ldos)
                .map(|(&h, &v)| nums(&[h, v]))
                .collect();
            tag(
                G,
                write_table(&ctx.out.path("gap-ldos.csv"), &header(&["hbar", "scaled_ldos"]), &rows),
            )?;
        }
        let worst = rep.scaled_ldos.iter().copied().fold(0.0, f64::max);
        let detail = format!(
            "max scaled |ldos| {worst:.3e} in gap [{:.4}, {:.4}] (tol {:e})",
            rep.gap.0, rep.gap.1, rep.tolerance
        );
        tag(G, ctx.emit(G, Some(rep.pass), detail, &rep))?;
    }
    Ok(())
}

fn localize(ctx: &mut Ctx, explicit: bool) -> Step {
    const C: &str = "localization";
    let s = ctx.cfg.semiclassical.clone();
    let (Some(interval), Some(inner)) = (s.interval, s.inner) else {
        return missing(ctx, C, explicit, "interval and inner");
    };
    let field = ctx.sc.field.clone();
    let rungs = tag(C, ctx.rungs())?;
    let rep = tag(C, check_localization(rungs, &field, interval, inner, &s.radii))?;
    if ctx.csv() {
        let mut rows = Vec::new();
        for r in &rep.rungs {
            for (l, m) in r.lambdas.iter().zip(&r.masses) {
                for (t, v) in rep.radii.iter().zip(m) {
                    rows.push(nums(&[r.hbar, *l, *t, *v]));
                }
            }
        }
        let h = header(&["hbar", "lambda", "radius", "exterior_mass"]);
        tag(C, write_table(&ctx.out.path("localization.csv"), &h, &rows))?;
    }
    let detail = match (rep.c, rep.fit, rep.weighted_ratio) {
        (Some(c), Some(f), Some(w)) => format!(
            "c = {c:.3}, rms {:.3} decades (max {}), weighted ratio {w:.2}, monotone = {}",
            f.rms_residual,
            crate::verify::localize::MAX_RESIDUAL,
            rep.monotone
        ),
        _ => {
            let m: Vec<String> = rep.rungs.iter().map(|r| format!("{:.3e}", r.envelope[0])).collect();
            format!("exterior mass {} per rung, monotone = {}", m.join("/"), rep.monotone)
        }
    };
    tag(C, ctx.emit(C, Some(rep.pass), detail, &rep))
}

fn inclusion(ctx: &mut Ctx) -> Step {
    const C: &str = "spectrum-inclusion";
    let sa = tag(C, ctx.sigma())?.clone();
    let rungs = tag(C, ctx.rungs())?;
    let rep = tag(C, check_spectrum_inclusion(rungs, &sa))?;
    if ctx.csv() {
        if let Some(s) = &rep.scaling {
            tag(C, write_scaling_csv(&ctx.out.path("spectrum-inclusion_scaling.csv"), s))?;
        }
    }
    let covered: usize = rep.rungs.iter().map(|r| r.covered).sum();
    let detail = match &rep.scaling {
        Some(s) => format!(
            "alpha = {:.3} (proven {}, conjectured {}), rms {:.3} decades, fitted {}",
            s.exponent, rep.proven_exponent, rep.conjectured_exponent, s.fit.rms_residual, rep.fitted_quantity
        ),
        None if rep.exact_sigma => {
            let d: Vec<String> = rep.rungs.iter().map(|r| format!("{:.2e}", r.distance)).collect();
            let b: Vec<String> = rep
                .rungs
                .iter()
                .map(|r| format!("{:.2e}", r.budget.unwrap_or(f64::NAN)))
                .collect();
            format!("exact-Σ scenario, D = {} against budget {}", d.join("/"), b.join("/"))
        }
        None => rep.notes.join("; "),
    };
    let detail = if covered > 0 {
        format!("{detail}; {covered} eigenvalue(s) off Σ covered by their quasimode residual")
    } else {
        detail
    };
    tag(C, ctx.emit(C, Some(rep.pass), detail, &rep))
}

fn gap_check(ctx: &mut Ctx, explicit: bool) -> Step {
    const C: &str = "gap-discreteness";
    let s = ctx.cfg.semiclassical.clone();
    let (Some(interval), Some(inner)) = (s.interval, s.inner) else {
        return missing(ctx, C, explicit, "interval and inner");
    };
    let rep = tag(
        C,
        check_gap_discreteness(&ctx.sc, interval, inner, &s.ladder, s.probes, ctx.cfg.solver.eigs.seed),
    )?;
    if ctx.csv() {
        let d = ctx.sc.field.dim;
        let mut h = vec!["hbar".to_string()];
        h.extend(coord_header("center_", d));
        h.extend(header(&["half_width", "residual", "sigma_distance", "deficit"]));
        let mut rows = Vec::new();
        for r in &rep.rungs {
            for p in &r.probes {
                let mut row = vec![num(r.hbar)];
                row.extend(nums(&p.center));
                row.extend(nums(&[p.half_width, p.residual, p.sigma_distance, p.deficit()]));
                rows.push(row);
            }
        }
        tag(C, write_table(&ctx.out.path("gap_probes.csv"), &h, &rows))?;
    }
    let counts: Vec<String> = rep
        .rungs
        .iter()
        .map(|r| format!("{}/{}", r.count, r.doubled_count))
        .collect();
    let detail = format!(
        "counts box/doubled {}, C = {:.3e}, ratio {:.2}",
        counts.join(", "),
        rep.c_fitted,
        rep.c_ratio
    );
    tag(C, ctx.emit(C, Some(rep.pass), detail, &rep))
}
