//! The four commands. Each builds a [`RunReport`] plus a set of output
//! files, which are written together at the end of the run.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context};
use lmce_core::geometry::modified_slope;
use lmce_core::identities::{
    check_complex_factorization, check_coordinate_laplacian, check_cutoff_volume_identity,
    check_form_equivalence, check_slope_volume, check_volume_formula,
};
use lmce_core::inequalities::{
    check_hessian_estimate, check_jacobi_integral, check_jacobi_pointwise,
    check_subharmonic_modified_slope, check_super_iso, check_volume_bound, check_weak_max_principle,
    fit_modified_slope_weight,
};
use lmce_core::io::{read_field, write_field, write_pgm, HeatmapRange};
use lmce_core::solver::{certify_residual, BoundaryTrace};
use lmce_core::{
    build_grid, bundle, make_cutoff, manufacture, newton_solve, sample, GeometryBundle, Grid2,
    IdentityReport, InequalityReport, LabError, ManufacturedProblem, NewtonConfig, Regime,
    ScalarField2, SlopeConstants, SolveState,
};
use serde::Serialize;
use walkdir::WalkDir;

use crate::config::{FieldKind, RunConfig, SweepParam, Weight};

pub const EXIT_PASS: u8 = 0;
pub const EXIT_CHECK_FAILED: u8 = 1;
pub const EXIT_NO_CONVERGENCE: u8 = 2;
pub const EXIT_INVALID: u8 = 3;

/// A run that could not produce a report.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn invalid(error: impl Into<anyhow::Error>) -> Self {
        Self { code: EXIT_INVALID, error: error.into() }
    }
}

impl From<LabError> for Failure {
    fn from(e: LabError) -> Self {
        let code = match e {
            LabError::LinearSolve { .. } | LabError::NotConverged { .. } | LabError::LostEllipticity { .. } => {
                EXIT_NO_CONVERGENCE
            }
            _ => EXIT_INVALID,
        };
        Self { code, error: e.into() }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Self::invalid(error)
    }
}

type Run<T> = std::result::Result<T, Failure>;

#[derive(Debug, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CheckEntry {
    Identity(IdentityReport),
    Inequality(InequalityReport),
    Error { name: String, message: String },
}

impl CheckEntry {
    pub fn pass(&self) -> bool {
        match self {
            CheckEntry::Identity(r) => r.pass,
            CheckEntry::Inequality(r) => r.pass,
            CheckEntry::Error { .. } => false,
        }
    }
}

/// One line of `checks.csv`.
#[derive(Debug, Serialize)]
struct CheckRow {
    check: String,
    kind: &'static str,
    pass: bool,
    lhs: Option<f64>,
    rhs: Option<f64>,
    margin: Option<f64>,
    slack: Option<f64>,
    excluded_nodes: Option<usize>,
    fitted: String,
    notes: String,
}

fn pairs(v: &[(String, f64)]) -> String {
    v.iter().map(|(k, x)| format!("{k}={x:e}")).collect::<Vec<_>>().join(";")
}

impl CheckRow {
    fn new(name: &str, e: &CheckEntry) -> Self {
        match e {
            CheckEntry::Identity(r) => Self {
                check: name.into(),
                kind: "identity",
                pass: r.pass,
                lhs: Some(r.max_residual),
                rhs: Some(r.tolerance),
                margin: Some(r.tolerance - r.max_residual),
                slack: Some(0.0),
                excluded_nodes: None,
                fitted: pairs(&r.extras),
                notes: r.location.map(|(i, j)| format!("worst node ({i}, {j})")).unwrap_or_default(),
            },
            CheckEntry::Inequality(r) => Self {
                check: name.into(),
                kind: "inequality",
                pass: r.pass,
                lhs: Some(r.lhs),
                rhs: Some(r.rhs),
                margin: Some(r.margin),
                slack: Some(r.slack),
                excluded_nodes: Some(r.excluded_nodes),
                fitted: pairs(&r.fitted),
                notes: r.notes.join("; "),
            },
            CheckEntry::Error { message, .. } => Self {
                check: name.into(),
                kind: "error",
                pass: false,
                lhs: None,
                rhs: None,
                margin: None,
                slack: None,
                excluded_nodes: None,
                fitted: String::new(),
                notes: message.clone(),
            },
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SolveSummary {
    pub problem: String,
    pub n: usize,
    #[serde(flatten)]
    pub state: SolveState,
    pub iterations: usize,
    pub certified_residual: f64,
    /// Sup-norm error against the manufactured solution.
    pub error_u: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct HeatmapEntry {
    pub file: String,
    #[serde(flatten)]
    pub range: HeatmapRange,
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub command: String,
    pub config: RunConfig,
    pub exit_code: u8,
    pub timings: BTreeMap<String, f64>,
    pub checks: Vec<(String, CheckEntry)>,
    pub solve: Option<SolveSummary>,
    pub heatmaps: BTreeMap<String, HeatmapEntry>,
    pub files: Vec<String>,
}

/// Report under construction plus the files it will write.
struct Session {
    report: RunReport,
    files: BTreeMap<String, Vec<u8>>,
    clock: Instant,
}

impl Session {
    fn new(command: &str, config: &RunConfig) -> Self {
        Self {
            report: RunReport {
                command: command.into(),
                config: config.clone(),
                exit_code: EXIT_PASS,
                timings: BTreeMap::new(),
                checks: Vec::new(),
                solve: None,
                heatmaps: BTreeMap::new(),
                files: Vec::new(),
            },
            files: BTreeMap::new(),
            clock: Instant::now(),
        }
    }

    /// Records the time since the previous lap under `phase`.
    fn lap(&mut self, phase: &str) {
        *self.report.timings.entry(phase.into()).or_default() += self.clock.elapsed().as_secs_f64();
        self.clock = Instant::now();
    }

    fn worsen(&mut self, code: u8) {
        self.report.exit_code = self.report.exit_code.max(code);
    }

    fn csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Run<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r).context("serializing CSV")?;
        }
        let bytes = w.into_inner().map_err(|e| anyhow!("flushing CSV: {e}"))?;
        self.files.insert(name.into(), bytes);
        Ok(())
    }

    fn heatmap(&mut self, name: &str, field: &ScalarField2) -> Run<()> {
        let mut buf = Vec::new();
        let range = write_pgm(field, &mut buf)?;
        let file = format!("{name}.pgm");
        self.files.insert(file.clone(), buf);
        self.report.heatmaps.insert(name.into(), HeatmapEntry { file, range });
        Ok(())
    }

    fn finish(mut self, out: &Path) -> Run<RunReport> {
        std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
        self.lap("output");
        self.report.files = self.files.keys().cloned().collect();
        self.report.files.push("summary.json".into());
        for (name, bytes) in &self.files {
            let path = out.join(name);
            std::fs::write(&path, bytes).with_context(|| format!("cannot write {}", path.display()))?;
        }
        let json = serde_json::to_vec_pretty(&self.report).context("serializing summary")?;
        std::fs::write(out.join("summary.json"), json).context("cannot write summary.json")?;
        Ok(self.report)
    }
}

fn newton_config(cfg: &RunConfig) -> NewtonConfig {
    NewtonConfig {
        tolerance: cfg.newton_tolerance,
        max_iterations: cfg.max_iterations,
        ..NewtonConfig::default()
    }
}

fn slope_constants(cfg: &RunConfig) -> SlopeConstants {
    SlopeConstants {
        delta: cfg.delta,
        weight: 0.0,
        jacobi_c: cfg.c,
        jacobi_budget: cfg.jacobi_budget,
        eps_gap: cfg.eps_gap,
    }
}

/// The field a command works on.
struct Subject {
    grid: Grid2,
    u: ScalarField2,
    psi: ScalarField2,
    boundary: BoundaryTrace,
    problem: Option<ManufacturedProblem>,
}

fn load_subject(cfg: &RunConfig) -> Run<Subject> {
    if let Some(src) = &cfg.field_source {
        let file = std::fs::File::open(src).with_context(|| format!("cannot open field {}", src.display()))?;
        let u = read_field(file)?;
        let psi = bundle(&u)?.psi;
        return Ok(Subject {
            grid: *u.grid(),
            boundary: BoundaryTrace::from_field(&u),
            u,
            psi,
            problem: None,
        });
    }
    let grid = build_grid(cfg.half_width, cfg.n)?;
    let p = manufacture(cfg.family()?.into_potential(), &grid, cfg.delta)?;
    Ok(Subject {
        grid,
        u: p.u_exact.clone(),
        psi: p.psi.clone(),
        boundary: p.boundary.clone(),
        problem: Some(p),
    })
}

fn sup_error(a: &ScalarField2, b: &ScalarField2) -> f64 {
    a.values().iter().zip(b.values()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Solves for the subject's phase and boundary data, replacing `u` by the
/// iterate. Returns false if the solve did not converge.
fn solve_subject(cfg: &RunConfig, s: &mut Subject, session: &mut Session) -> Run<bool> {
    let state = newton_solve(&s.psi, &s.boundary, &newton_config(cfg))?;
    session.lap("solve");
    let certified = certify_residual(&state.iterate, &s.psi)?;
    let error_u = s.problem.as_ref().map(|p| sup_error(&state.iterate, &p.u_exact));
    s.u = state.iterate.clone();
    let converged = state.converged;
    session.report.solve = Some(SolveSummary {
        problem: match &cfg.field_source {
            Some(p) => p.display().to_string(),
            None => cfg.problem.clone(),
        },
        n: s.grid.nodes_per_axis(),
        iterations: state.iterations(),
        certified_residual: certified,
        error_u,
        state,
    });
    if !converged {
        session.worsen(EXIT_NO_CONVERGENCE);
    }
    Ok(converged)
}

#[derive(Serialize)]
struct SolveRow {
    iteration: usize,
    residual: f64,
    damping: Option<f64>,
    linear_iterations: Option<usize>,
}

fn resolve_weight(cfg: &RunConfig, b: &GeometryBundle) -> lmce_core::Result<f64> {
    match cfg.weight {
        Weight::Fixed(a) => Ok(a),
        Weight::Fit(_) => Ok(fit_modified_slope_weight(b, cfg.rho)?.a_hat),
    }
}

fn write_heatmaps(cfg: &RunConfig, s: &Subject, b: &GeometryBundle, session: &mut Session) -> Run<()> {
    for name in &cfg.heatmaps {
        let field = match name.as_str() {
            "u" => s.u.clone(),
            "psi" => b.psi.clone(),
            "volume" => b.volume.clone(),
            "slope" => b.slope.clone(),
            "btilde" => {
                let a = resolve_weight(cfg, b)?;
                modified_slope(b, &slope_constants(cfg).with_weight(a))
            }
            "error" => {
                let p = s
                    .problem
                    .as_ref()
                    .ok_or_else(|| Failure::invalid(anyhow!("the error heatmap needs a built-in problem")))?;
                s.u.zip_map(&p.u_exact, |a, b| a - b)?
            }
            other => return Err(Failure::invalid(anyhow!("unknown heatmap {other:?}"))),
        };
        session.heatmap(name, &field)?;
    }
    session.lap("heatmaps");
    Ok(())
}

pub fn cmd_solve(cfg: &RunConfig) -> Run<RunReport> {
    let mut session = Session::new("solve", cfg);
    let mut s = load_subject(cfg)?;
    session.lap("setup");
    solve_subject(cfg, &mut s, &mut session)?;
    let solve = session.report.solve.as_ref().expect("solve summary recorded");
    let rows: Vec<SolveRow> = solve
        .state
        .residual_history
        .iter()
        .enumerate()
        .map(|(i, &r)| SolveRow {
            iteration: i,
            residual: r,
            damping: i.checked_sub(1).and_then(|k| solve.state.damping.get(k).copied()),
            linear_iterations: i.checked_sub(1).and_then(|k| solve.state.linear_iterations.get(k).copied()),
        })
        .collect();
    session.csv("solve.csv", &rows)?;
    let mut buf = Vec::new();
    write_field(&s.u, &mut buf)?;
    session.files.insert("u.csv".into(), buf);
    let b = bundle(&s.u)?;
    write_heatmaps(cfg, &s, &b, &mut session)?;
    session.finish(&cfg.out)
}

struct CheckContext<'a> {
    cfg: &'a RunConfig,
    u: &'a ScalarField2,
    psi: &'a ScalarField2,
    b: &'a GeometryBundle,
    k: SlopeConstants,
}

impl CheckContext<'_> {
    fn btilde(&self) -> lmce_core::Result<ScalarField2> {
        let a = resolve_weight(self.cfg, self.b)?;
        Ok(modified_slope(self.b, &self.k.with_weight(a)))
    }

    fn run(&self, name: &str) -> lmce_core::Result<CheckEntry> {
        let cfg = self.cfg;
        let b = self.b;
        let grid = *b.grid();
        let cutoff = || make_cutoff(cfg.cutoff[0], cfg.cutoff[1], &grid);
        let id = CheckEntry::Identity;
        let ineq = CheckEntry::Inequality;
        Ok(match name {
            "complex_factorization" => id(check_complex_factorization(b)),
            "volume_formula" => id(check_volume_formula(b, cfg.delta)?),
            "form_equivalence" => id(check_form_equivalence(self.u, self.psi)?),
            "cutoff_volume" => id(check_cutoff_volume_identity(b, &cutoff()?)?),
            "slope_volume" => id(check_slope_volume(b)),
            "coordinate_laplacian" => id(check_coordinate_laplacian(b)?),
            "weak_max_principle" => ineq(check_weak_max_principle(&self.btilde()?, cfg.wmp_trials, cfg.seed)?),
            "super_iso" => ineq(check_super_iso(&self.btilde()?, cfg.wmp_trials, cfg.seed)?),
            "jacobi_pointwise" => ineq(check_jacobi_pointwise(b, &self.k)?),
            "subharmonic_modified_slope" => {
                let a = resolve_weight(cfg, b)?;
                ineq(check_subharmonic_modified_slope(
                    b,
                    &self.k.with_weight(a),
                    cfg.rho,
                    cfg.wmp_trials,
                    cfg.seed,
                )?)
            }
            "jacobi_integral" => ineq(check_jacobi_integral(b, &cutoff()?, &self.k)?),
            "volume_bound" => {
                let regime = Regime::on_disk(&b.psi, grid.half_width().min(4.0), cfg.delta)?;
                ineq(check_volume_bound(b, regime, cfg.delta)?)
            }
            "hessian_estimate" => {
                let regime = Regime::on_disk(&b.psi, cfg.radius, cfg.delta)?;
                ineq(check_hessian_estimate(self.u, cfg.radius, regime, cfg.delta, cfg.hessian_budget)?)
            }
            other => return Err(LabError::Parse(format!("unknown check {other:?}"))),
        })
    }
}

pub fn cmd_verify(cfg: &RunConfig) -> Run<RunReport> {
    let mut session = Session::new("verify", cfg);
    let checks = cfg.expanded_checks()?;
    let mut s = load_subject(cfg)?;
    session.lap("setup");
    if cfg.field == FieldKind::Solved && !solve_subject(cfg, &mut s, &mut session)? {
        return session.finish(&cfg.out);
    }
    let b = bundle(&s.u)?;
    session.lap("geometry");
    let ctx = CheckContext {
        cfg,
        u: &s.u,
        psi: &s.psi,
        b: &b,
        k: slope_constants(cfg),
    };
    let mut rows = Vec::new();
    for name in checks {
        let entry = ctx.run(name).unwrap_or_else(|e| CheckEntry::Error {
            name: name.into(),
            message: e.to_string(),
        });
        session.lap(&format!("check:{name}"));
        if !entry.pass() {
            session.worsen(EXIT_CHECK_FAILED);
        }
        rows.push(CheckRow::new(name, &entry));
        session.report.checks.push((name.into(), entry));
    }
    session.csv("checks.csv", &rows)?;
    write_heatmaps(cfg, &s, &b, &mut session)?;
    session.finish(&cfg.out)
}

#[derive(Serialize)]
struct QuadraticRow {
    a: f64,
    regime: Regime,
    #[serde(rename = "L")]
    l: f64,
    #[serde(rename = "G")]
    g: f64,
    #[serde(rename = "C_star")]
    c_star: f64,
}

#[derive(Serialize)]
struct WeightRow {
    #[serde(rename = "A")]
    a: f64,
    min_laplacian_btilde: f64,
    min_laplacian_b: f64,
    wmp_pass: bool,
    pass: bool,
}

#[derive(Serialize)]
struct NodesRow {
    n: usize,
    h: f64,
    converged: bool,
    iterations: usize,
    final_residual: f64,
    error_u: f64,
}

fn sweep_quadratic(cfg: &RunConfig, session: &mut Session) -> Run<()> {
    let grid = build_grid(cfg.half_width, cfg.n)?;
    let mut rows = Vec::new();
    for &a in &cfg.sweep_values {
        if !(a > 0.0) {
            return Err(Failure::invalid(anyhow!("sweep over a needs positive values, got {a}")));
        }
        let phase = 2.0 * a.atan();
        let regime = Regime::classify(phase, phase, cfg.delta);
        let u = sample(|x, y| 0.5 * a * (x * x + y * y), &grid)?;
        let r = check_hessian_estimate(&u, cfg.radius, regime, cfg.delta, cfg.hessian_budget)?;
        if !r.pass {
            session.worsen(EXIT_CHECK_FAILED);
        }
        let get = |k: &str| r.fitted(k).unwrap_or(f64::NAN);
        rows.push(QuadraticRow { a, regime, l: get("L"), g: get("G"), c_star: get("C_star") });
        session.report.checks.push((format!("hessian_estimate[a={a}]"), CheckEntry::Inequality(r)));
    }
    session.csv("sweep.csv", &rows)
}

fn sweep_weight(cfg: &RunConfig, session: &mut Session) -> Run<()> {
    let mut s = load_subject(cfg)?;
    if cfg.field == FieldKind::Solved && !solve_subject(cfg, &mut s, session)? {
        return Ok(());
    }
    let b = bundle(&s.u)?;
    let values = if cfg.sweep_values.is_empty() {
        let a_hat = fit_modified_slope_weight(&b, cfg.rho)?.a_hat;
        vec![0.0, 0.5 * a_hat, a_hat, 2.0 * a_hat]
    } else {
        cfg.sweep_values.clone()
    };
    let mut rows = Vec::new();
    for a in values {
        let k = slope_constants(cfg).with_weight(a);
        let r = check_subharmonic_modified_slope(&b, &k, cfg.rho, cfg.wmp_trials, cfg.seed)?;
        let get = |key: &str| r.fitted(key).unwrap_or(f64::NAN);
        rows.push(WeightRow {
            a,
            min_laplacian_btilde: get("min_laplacian_btilde"),
            min_laplacian_b: get("min_laplacian_b"),
            wmp_pass: get("wmp_pass") == 1.0,
            pass: r.pass,
        });
        session.report.checks.push((format!("subharmonic_modified_slope[A={a}]"), CheckEntry::Inequality(r)));
    }
    session.csv("sweep.csv", &rows)
}

fn sweep_nodes(cfg: &RunConfig, session: &mut Session) -> Run<()> {
    let family = cfg.family()?;
    let mut rows = Vec::new();
    for &v in &cfg.sweep_values {
        if v.fract() != 0.0 || v < 0.0 {
            return Err(Failure::invalid(anyhow!("node counts must be whole numbers, got {v}")));
        }
        let grid = build_grid(cfg.half_width, v as usize)?;
        let p = manufacture(family.into_potential(), &grid, cfg.delta)?;
        let state = newton_solve(&p.psi, &p.boundary, &newton_config(cfg))?;
        if !state.converged {
            session.worsen(EXIT_NO_CONVERGENCE);
        }
        rows.push(NodesRow {
            n: grid.nodes_per_axis(),
            h: grid.spacing(),
            converged: state.converged,
            iterations: state.iterations(),
            final_residual: state.final_residual(),
            error_u: sup_error(&state.iterate, &p.u_exact),
        });
    }
    session.csv("sweep.csv", &rows)
}

pub fn cmd_sweep(cfg: &RunConfig) -> Run<RunReport> {
    let mut session = Session::new("sweep", cfg);
    let param = cfg
        .sweep_param
        .ok_or_else(|| Failure::invalid(anyhow!("sweep needs sweep_param (a, A or n)")))?;
    if param != SweepParam::Weight && cfg.sweep_values.is_empty() {
        return Err(Failure::invalid(anyhow!("sweep_values is empty")));
    }
    match param {
        SweepParam::QuadraticA => sweep_quadratic(cfg, &mut session)?,
        SweepParam::Weight => sweep_weight(cfg, &mut session)?,
        SweepParam::Nodes => {
            if cfg.field_source.is_some() {
                return Err(Failure::invalid(anyhow!("a node sweep needs a built-in problem")));
            }
            sweep_nodes(cfg, &mut session)?
        }
    }
    session.lap("sweep");
    session.finish(&cfg.out)
}

/// One cell of a merged table.
#[derive(Debug, Serialize)]
struct Cell {
    file: String,
    row: usize,
    column: String,
    value: String,
}

pub const REPORT_FILE: &str = "report.csv";

/// Merges every CSV under `dir` (except a previous merge) into
/// `dir/report.csv` in long form, and prints a per-file digest. Fails with
/// [`EXIT_CHECK_FAILED`] if any `pass` column holds `false`.
pub fn cmd_report(dir: &Path) -> Run<u8> {
    if !dir.is_dir() {
        return Err(Failure::invalid(anyhow!("{} is not a directory", dir.display())));
    }
    let mut files: Vec<PathBuf> = WalkDir::new(dir)
        .sort_by_file_name()
        .into_iter()
        .filter_map(|e| e.ok())
        .map(|e| e.into_path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv") && p.file_name().is_some_and(|n| n != REPORT_FILE))
        .collect();
    files.sort();
    let mut cells = Vec::new();
    let mut code = EXIT_PASS;
    for path in &files {
        let rel = path.strip_prefix(dir).unwrap_or(path).display().to_string();
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {rel}"))?;
        // field files carry a comment line ahead of the header
        let body: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
        let mut rdr = csv::Reader::from_reader(body.as_bytes());
        let header = rdr.headers().with_context(|| format!("bad CSV header in {rel}"))?.clone();
        let (mut rows, mut failed) = (0usize, 0usize);
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.with_context(|| format!("bad CSV row in {rel}"))?;
            rows += 1;
            for (col, value) in header.iter().zip(rec.iter()) {
                if col == "pass" && value == "false" {
                    failed += 1;
                }
                cells.push(Cell { file: rel.clone(), row: i, column: col.into(), value: value.into() });
            }
        }
        if failed > 0 {
            code = EXIT_CHECK_FAILED;
        }
        println!("{rel}: {rows} rows, columns [{}], {failed} failing", header.iter().collect::<Vec<_>>().join(", "));
    }
    let mut w = csv::Writer::from_path(dir.join(REPORT_FILE)).context("cannot write report.csv")?;
    for c in &cells {
        w.serialize(c).context("writing report.csv")?;
    }
    w.flush().context("writing report.csv")?;
    Ok(code)
}
