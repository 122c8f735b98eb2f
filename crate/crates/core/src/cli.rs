//! Command-line front end.
//!
//! Exit codes: 0 when the check passes, 1 when a residual exceeds its
//! tolerance, 2 for unreadable input or failed validation.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::expr::Expression;
use crate::quadrature::{ChartMap, QuadratureSpec};
use crate::scenario::{self, ScenarioFile};
use crate::stokes::{self, IbpProblem, Scenario, Smoothness};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "stokes-forms", version, about = "Quadrature checks of the Stokes identity on normal and regular sets")]
pub struct Cli {
    /// Emit one JSON document instead of a table.
    #[arg(long, global = true)]
    pub json: bool,
    /// Worker threads for the cubature (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute both sides of the identity for a scenario.
    Verify {
        /// Scenario file, or the name of a built-in.
        scenario: String,
        #[command(flatten)]
        quad: QuadArgs,
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Residuals and observed order over successively refined rules.
    Convergence {
        scenario: String,
        /// A level count (cells double from --cells) or a list such as `4x1,4x2,8x2`.
        #[arg(long, default_value = "4")]
        levels: String,
        #[command(flatten)]
        quad: QuadArgs,
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Check that d(dw) vanishes for random smooth forms.
    Ddzero {
        /// Number of random forms.
        #[arg(long, default_value_t = 50)]
        count: usize,
        /// Evaluation points per form.
        #[arg(long, default_value_t = 100)]
        points: usize,
        #[arg(long, default_value_t = 4)]
        max_n: usize,
        #[arg(long, default_value_t = 2)]
        max_degree: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Bound on |coefficient| / (1 + scale).
        #[arg(long, default_value_t = 1e-9)]
        tolerance: f64,
    },
    /// Finite-difference residual of det B as the step halves.
    Detb {
        scenario: String,
        /// Largest step.
        #[arg(long, default_value_t = 1e-3)]
        h: f64,
        #[arg(long, default_value_t = 3)]
        halvings: usize,
        /// Random interior points.
        #[arg(long, default_value_t = 20)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Minimum observed order.
        #[arg(long, default_value_t = 1.8)]
        min_order: f64,
    },
    /// Integration by parts residual |∫f'g - [fg] + ∫fg'| on a box.
    Ibp {
        #[arg(long)]
        f: String,
        #[arg(long)]
        g: String,
        /// Differentiation axis, 1-based.
        #[arg(long, default_value_t = 1)]
        axis: usize,
        /// One `a,b` interval per axis (default: a single unit interval).
        #[arg(long = "interval", value_name = "A,B")]
        intervals: Vec<String>,
        #[command(flatten)]
        quad: QuadArgs,
        #[arg(long, default_value_t = 1e-12)]
        tolerance: f64,
    },
    /// Compare integrals through Φ∘c and Φ∘c∘ρ for a cube map ρ.
    Reparam {
        scenario: String,
        /// Components of ρ in x1..xk, one flag per component (default: xi^2).
        #[arg(long)]
        rho: Vec<String>,
        #[command(flatten)]
        quad: QuadArgs,
        #[arg(long, default_value_t = 1e-8)]
        tolerance: f64,
    },
    /// The shipped scenarios.
    Builtin {
        #[command(subcommand)]
        action: BuiltinAction,
    },
}

#[derive(Debug, Subcommand)]
pub enum BuiltinAction {
    /// Names of the shipped scenarios.
    List,
    /// Print a scenario file.
    Show { name: String },
    /// Write a scenario file to disk.
    Write {
        name: String,
        /// Target file or directory (default: `<name>.json`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, Args)]
pub struct QuadArgs {
    /// Gauss points per axis in each cell.
    #[arg(long)]
    pub points: Option<usize>,
    /// Cells per axis.
    #[arg(long)]
    pub cells: Option<usize>,
}

impl QuadArgs {
    fn apply(&self, base: QuadratureSpec) -> QuadratureSpec {
        QuadratureSpec { points: self.points.unwrap_or(base.points), cells: self.cells.unwrap_or(base.cells) }
    }
}

/// Failure that maps to exit code 2.
#[derive(Debug)]
struct InputError(String);

impl<E: std::fmt::Display> From<E> for InputError {
    fn from(e: E) -> Self {
        InputError(e.to_string())
    }
}

struct Io<'a> {
    out: &'a mut dyn Write,
    json: bool,
}

impl Io<'_> {
    fn json<T: Serialize>(&mut self, value: &T) -> Result<(), InputError> {
        let text = serde_json::to_string_pretty(value)?;
        writeln!(self.out, "{text}")?;
        Ok(())
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code.
pub fn run<I, T>(args: I, out: &mut (dyn Write + Send), err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_PASS };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return code;
        }
    };
    match with_threads(cli.threads, || dispatch(&cli, out)) {
        Ok(code) => code,
        Err(InputError(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_INPUT
        }
    }
}

#[cfg(feature = "parallel")]
fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<R, InputError> + Send) -> Result<R, InputError> {
    match threads {
        None => f(),
        Some(0) => Err(InputError("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build()?.install(f),
    }
}

#[cfg(not(feature = "parallel"))]
fn with_threads<R>(threads: Option<usize>, f: impl FnOnce() -> Result<R, InputError>) -> Result<R, InputError> {
    match threads {
        Some(0) => Err(InputError("--threads must be at least 1".into())),
        _ => f(),
    }
}

fn dispatch(cli: &Cli, out: &mut (dyn Write + Send)) -> Result<i32, InputError> {
    let mut io = Io { out, json: cli.json };
    match &cli.command {
        Command::Verify { scenario, quad, tolerance } => verify(&mut io, &load(scenario, quad, *tolerance)?),
        Command::Convergence { scenario, levels, quad, tolerance } => {
            let s = load(scenario, &QuadArgs { points: None, cells: None }, *tolerance)?;
            let levels = parse_levels(levels, quad.apply(QuadratureSpec { points: s.quadrature.points, cells: 1 }))?;
            convergence(&mut io, &s, &levels)
        }
        Command::Ddzero { count, points, max_n, max_degree, seed, tolerance } => {
            ddzero(&mut io, *count, *points, *max_n, *max_degree, *seed, *tolerance)
        }
        Command::Detb { scenario, h, halvings, samples, seed, min_order } => {
            let s = load(scenario, &QuadArgs { points: None, cells: None }, None)?;
            detb(&mut io, &s, *h, *halvings, *samples, *seed, *min_order)
        }
        Command::Ibp { f, g, axis, intervals, quad, tolerance } => {
            let segment = if intervals.is_empty() {
                vec![(0.0, 1.0)]
            } else {
                intervals.iter().map(|s| parse_interval(s)).collect::<Result<_, _>>()?
            };
            let problem = IbpProblem { f: parse_expr("--f", f)?, g: parse_expr("--g", g)?, axis: *axis, segment };
            ibp(&mut io, &problem, &quad.apply(QuadratureSpec::default()), *tolerance)
        }
        Command::Reparam { scenario, rho, quad, tolerance } => {
            let s = load(scenario, quad, None)?;
            let k = s.dim();
            let components: Vec<String> =
                if rho.is_empty() { (1..=k).map(|i| format!("x{i}^2")).collect() } else { rho.clone() };
            let refs: Vec<&str> = components.iter().map(String::as_str).collect();
            let rho = ChartMap::parse(k, &refs).map_err(|e| InputError(format!("--rho: {e}")))?;
            reparam(&mut io, &s, &rho, *tolerance)
        }
        Command::Builtin { action } => builtin(&mut io, action),
    }
}

fn load(spec: &str, quad: &QuadArgs, tolerance: Option<f64>) -> Result<Scenario, InputError> {
    let mut s = scenario::resolve(spec)?;
    let q = quad.apply(s.quadrature);
    q.validate()?;
    s = s.with_quadrature(q);
    if let Some(t) = tolerance {
        s = s.with_tolerance(t)?;
    }
    Ok(s)
}

fn parse_expr(flag: &str, text: &str) -> Result<Expression, InputError> {
    Expression::parse(text).map_err(|e| InputError(format!("{flag}: {e} in \"{text}\"")))
}

fn parse_interval(text: &str) -> Result<(f64, f64), InputError> {
    let bad = || InputError(format!("--interval: expected `a,b`, got \"{text}\""));
    let (a, b) = text.split_once(',').ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

/// `N` gives `N` levels with cells `c, 2c, 4c, ...`; otherwise a comma list
/// of `PxM` (points x cells).
fn parse_levels(text: &str, base: QuadratureSpec) -> Result<Vec<QuadratureSpec>, InputError> {
    let levels: Vec<QuadratureSpec> = if let Ok(count) = text.trim().parse::<usize>() {
        (0..count).map(|i| QuadratureSpec { points: base.points, cells: base.cells << i }).collect()
    } else {
        text.split(',')
            .map(|item| {
                let bad = || InputError(format!("--levels: expected a count or `PxM` items, got \"{item}\""));
                let (p, m) = item.trim().split_once('x').ok_or_else(bad)?;
                Ok(QuadratureSpec { points: p.parse().map_err(|_| bad())?, cells: m.parse().map_err(|_| bad())? })
            })
            .collect::<Result<_, InputError>>()?
    };
    for l in &levels {
        l.validate()?;
    }
    Ok(levels)
}

fn verify(io: &mut Io, s: &Scenario) -> Result<i32, InputError> {
    let report = stokes::verify(s);
    if io.json {
        io.json(&report)?;
    } else {
        let w = &mut io.out;
        writeln!(w, "scenario   {} ({})", report.scenario, report.smoothness)?;
        writeln!(w, "quadrature {} points x {} cells per axis", report.quadrature.points, report.quadrature.cells)?;
        for p in &report.pieces {
            writeln!(w, "piece {}    volume {:.12e}  boundary {:.12e}", p.piece, p.volume, p.boundary)?;
            for f in &p.faces {
                writeln!(w, "  t{}={}     {:+.12e}", f.axis, if f.side == crate::Side::Top { 1 } else { 0 }, f.value)?;
            }
        }
        writeln!(w, "lhs={:.6}, rhs={:.6}", report.lhs, report.rhs)?;
        writeln!(w, "abs residual {:.3e}, rel residual {:.3e}, tolerance {:.1e}", report.abs_residual, report.rel_residual, report.tolerance)?;
        if let Some(e) = report.exact {
            writeln!(w, "exact {e:.12}")?;
        }
        if let Some(d) = &report.diagnostic {
            writeln!(w, "diagnostic: {d}")?;
        }
        writeln!(w, "{}", if report.pass { "PASS" } else { "FAIL" })?;
    }
    Ok(if report.pass { EXIT_PASS } else { EXIT_FAIL })
}

fn convergence(io: &mut Io, s: &Scenario, levels: &[QuadratureSpec]) -> Result<i32, InputError> {
    let table = stokes::convergence_study(s, levels)?;
    let last = table.rows.last().expect("at least three levels");
    // Limited-smoothness scenarios are reported only.
    let pass = s.smoothness == Smoothness::Limited || last.rel_residual <= s.tolerance;
    if io.json {
        #[derive(Serialize)]
        struct Out<'a> {
            #[serde(flatten)]
            table: &'a stokes::ConvergenceTable,
            smoothness: Smoothness,
            tolerance: f64,
            monotone: bool,
            pass: bool,
        }
        io.json(&Out { table: &table, smoothness: s.smoothness, tolerance: s.tolerance, monotone: table.monotone(), pass })?;
    } else {
        let w = &mut io.out;
        writeln!(w, "scenario {} ({})", table.scenario, s.smoothness)?;
        writeln!(w, "{:>6} {:>6} {:>22} {:>22} {:>11} {:>7}", "points", "cells", "lhs", "rhs", "rel resid", "order")?;
        for r in &table.rows {
            let order = r.order.map_or("-".to_string(), |p| format!("{p:.2}"));
            writeln!(
                w,
                "{:>6} {:>6} {:>22.15e} {:>22.15e} {:>11.3e} {:>7}",
                r.quadrature.points, r.quadrature.cells, r.lhs, r.rhs, r.rel_residual, order
            )?;
        }
        if s.smoothness == Smoothness::Limited {
            writeln!(w, "limited smoothness: no pass/fail applied")?;
        } else {
            writeln!(w, "{}", if pass { "PASS" } else { "FAIL" })?;
        }
    }
    Ok(if pass { EXIT_PASS } else { EXIT_FAIL })
}

fn ddzero(
    io: &mut Io,
    count: usize,
    points: usize,
    max_n: usize,
    max_degree: usize,
    seed: u64,
    tolerance: f64,
) -> Result<i32, InputError> {
    if max_n == 0 {
        return Err(InputError("--max-n must be at least 1".into()));
    }
    let mut rng = StdRng::seed_from_u64(seed);
    let mut results = Vec::with_capacity(count);
    for _ in 0..count {
        let n = rng.random_range(1..=max_n);
        let degree = rng.random_range(0..=max_degree.min(n));
        let form = stokes::random_form(&mut rng, n, degree, 3);
        let ys: Vec<Vec<f64>> = (0..points).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        results.push(stokes::dd_residual(&form, &ys)?);
    }
    let worst = results.iter().map(|r| r.max_ratio).fold(0.0, f64::max);
    let pass = worst <= tolerance;
    if io.json {
        #[derive(Serialize)]
        struct Out<'a> {
            forms: &'a [stokes::DdResidual],
            worst_ratio: f64,
            tolerance: f64,
            pass: bool,
        }
        io.json(&Out { forms: &results, worst_ratio: worst, tolerance, pass })?;
    } else {
        let w = &mut io.out;
        let trivial = results.iter().filter(|r| r.trivial).count();
        writeln!(w, "{count} forms, {points} points each ({trivial} of degree > n - 2, zero by degree)")?;
        writeln!(w, "worst |ddw| / (1 + scale) = {worst:.3e}, tolerance {tolerance:.1e}")?;
        writeln!(w, "{}", if pass { "PASS" } else { "FAIL" })?;
    }
    Ok(if pass { EXIT_PASS } else { EXIT_FAIL })
}

/// Residuals at or below this are treated as already exact.
const DETB_FLOOR: f64 = 1e-11;

fn detb(io: &mut Io, s: &Scenario, h: f64, halvings: usize, samples: usize, seed: u64, min_order: f64) -> Result<i32, InputError> {
    let steps: Vec<f64> = (0..=halvings).map(|i| h / f64::from(1u32 << i)).collect();
    let study = stokes::det_b_study(s, samples, &steps, seed)?;
    let exact = study.rms.iter().all(|&r| r <= DETB_FLOOR);
    let pass = exact || study.order.is_some_and(|p| p >= min_order);
    if io.json {
        #[derive(Serialize)]
        struct Out<'a> {
            scenario: &'a str,
            #[serde(flatten)]
            study: &'a stokes::DetBStudy,
            min_order: f64,
            pass: bool,
        }
        io.json(&Out { scenario: &s.name, study: &study, min_order, pass })?;
    } else {
        let w = &mut io.out;
        writeln!(w, "scenario {}: {} residuals per step", s.name, study.points.len())?;
        writeln!(w, "{:>12} {:>12}", "h", "rms")?;
        for (h, r) in study.steps.iter().zip(&study.rms) {
            writeln!(w, "{h:>12.4e} {r:>12.4e}")?;
        }
        match study.order {
            Some(p) => writeln!(w, "observed order {p:.3} (minimum {min_order})")?,
            None => writeln!(w, "observed order undefined (zero residuals)")?,
        }
        writeln!(w, "{}", if pass { "PASS" } else { "FAIL" })?;
    }
    Ok(if pass { EXIT_PASS } else { EXIT_FAIL })
}

fn ibp(io: &mut Io, problem: &IbpProblem, quad: &QuadratureSpec, tolerance: f64) -> Result<i32, InputError> {
    quad.validate()?;
    let report = stokes::ibp_residual(problem, quad)?;
    let pass = report.residual <= tolerance;
    if io.json {
        #[derive(Serialize)]
        struct Out<'a> {
            #[serde(flatten)]
            report: &'a stokes::IbpReport,
            quadrature: &'a QuadratureSpec,
            tolerance: f64,
            pass: bool,
        }
        io.json(&Out { report: &report, quadrature: quad, tolerance, pass })?;
    } else {
        let w = &mut io.out;
        writeln!(w, "int f' g   {:.15e}", report.derivative_term)?;
        writeln!(w, "[f g]      {:.15e}", report.boundary_term)?;
        writeln!(w, "int f g'   {:.15e}", report.counter_term)?;
        writeln!(w, "residual   {:.3e}, tolerance {tolerance:.1e}", report.residual)?;
        writeln!(w, "{}", if pass { "PASS" } else { "FAIL" })?;
    }
    Ok(if pass { EXIT_PASS } else { EXIT_FAIL })
}

fn reparam(io: &mut Io, s: &Scenario, rho: &ChartMap, tolerance: f64) -> Result<i32, InputError> {
    let report = stokes::reparam_residual(s, rho)?;
    let pass = report.residual <= tolerance;
    if io.json {
        #[derive(Serialize)]
        struct Out<'a> {
            scenario: &'a str,
            rho: Vec<String>,
            #[serde(flatten)]
            report: &'a stokes::ReparamReport,
            quadrature: QuadratureSpec,
            tolerance: f64,
            pass: bool,
        }
        let rho = rho.components().iter().map(|c| c.to_string()).collect();
        io.json(&Out { scenario: &s.name, rho, report: &report, quadrature: s.quadrature, tolerance, pass })?;
    } else {
        let w = &mut io.out;
        writeln!(w, "volume    {:.15e}  reparametrized {:.15e}", report.volume, report.volume_reparam)?;
        writeln!(w, "boundary  {:.15e}  reparametrized {:.15e}", report.boundary, report.boundary_reparam)?;
        writeln!(w, "residual  {:.3e}, tolerance {tolerance:.1e}", report.residual)?;
        writeln!(w, "{}", if pass { "PASS" } else { "FAIL" })?;
    }
    Ok(if pass { EXIT_PASS } else { EXIT_FAIL })
}

fn builtin(io: &mut Io, action: &BuiltinAction) -> Result<i32, InputError> {
    match action {
        BuiltinAction::List => {
            if io.json {
                io.json(&scenario::builtin_names().collect::<Vec<_>>())?;
            } else {
                for name in scenario::builtin_names() {
                    writeln!(io.out, "{name}")?;
                }
            }
        }
        BuiltinAction::Show { name } => {
            write!(io.out, "{}", scenario::builtin_json(name)?)?;
        }
        BuiltinAction::Write { name, out } => {
            let text = scenario::builtin_json(name)?;
            let file = format!("{name}.json");
            let path = match out {
                Some(p) if p.is_dir() => p.join(file),
                Some(p) => p.clone(),
                None => PathBuf::from(file),
            };
            // validate before writing so a broken catalog never reaches disk
            ScenarioFile::from_json(text)?.to_scenario()?;
            fs::write(&path, text)?;
            if !io.json {
                writeln!(io.out, "wrote {}", path.display())?;
            }
        }
    }
    Ok(EXIT_PASS)
}
