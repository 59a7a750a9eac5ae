//! `renorm`: solve, sweep, extrapolate and render from the command line.
//!
//! Exit codes: 0 ok, 2 numeric failure, 3 invalid input, 4 structure check failed.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use renorm_core::complexdyn::{self, Classifier, FlatExpMap, Viewport};
use renorm_core::limit::{diagnostics_csv, extrapolate_limit_default};
use renorm_core::renorm::{self, SolverOptions, SweepTable, DEFAULT_FIT_WINDOW};
use renorm_core::verify::{verify_solution, Bounds};
use renorm_core::{decimal, Error, FixedPointSolution, OrderType};
use serde_json::json;

use config::{check_dir_writable, check_ells, check_tol, check_writable, parse_ells, resolve_precision, FileConfig};

pub struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn validation(message: impl Into<String>) -> Self {
        Failure { code: 3, message: message.into() }
    }

    fn numeric(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e.root() {
            Error::Validation(_)
            | Error::Domain(_)
            | Error::Arity { .. }
            | Error::Value(_)
            | Error::Combinatorics(_)
            | Error::Unsupported(_)
            | Error::Monotonicity(_) => 3,
            Error::Structure(_) | Error::Geometry(_) => 4,
            _ => 2,
        };
        Failure { code, message: e.to_string() }
    }
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|e| Failure::validation(format!("cannot write {}: {e}", path.display())))
}

#[derive(Parser)]
#[command(name = "renorm", version, about = "Renormalization fixed points of unimodal maps and flat-exponential dynamics")]
struct Cli {
    /// Flat JSON file with defaults for any flag (flags win).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the fixed-point equation at one criticality.
    Solve(SolveArgs),
    /// Continue a fixed point through increasing criticalities.
    Sweep(SweepArgs),
    /// Sweep, fit the singular expansion and extrapolate to ℓ = ∞.
    Limit(LimitArgs),
    /// Render the Julia set of a flat-exponential map to PGM.
    Julia(JuliaArgs),
    /// Check the invariants of a stored solution.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct SolverFlags {
    /// Order type: "pd" or a permutation such as [2,3,1].
    #[arg(long = "type")]
    order_type: Option<String>,
    #[arg(long)]
    degree: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    /// double, dd or auto (default auto, or RENORM_PRECISION).
    #[arg(long)]
    precision: Option<String>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    solver: SolverFlags,
    #[arg(long)]
    ell: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    solver: SolverFlags,
    /// Comma-separated, strictly increasing.
    #[arg(long)]
    ells: Option<String>,
    /// Number of largest-ℓ rows in the τ∞ fit.
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write each solution as JSON into this directory.
    #[arg(long)]
    solutions_dir: Option<PathBuf>,
}

#[derive(Args)]
struct LimitArgs {
    #[command(flatten)]
    solver: SolverFlags,
    #[arg(long)]
    ells: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-ℓ fit diagnostics CSV.
    #[arg(long)]
    diagnostics: Option<PathBuf>,
}

#[derive(Args)]
struct JuliaArgs {
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    re_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    re_max: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    im_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    im_max: Option<f64>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long)]
    budget: Option<u32>,
    /// Depth of the stored preimage tree of a used to detect Julia hits.
    #[arg(long)]
    preimage_depth: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON statistics sidecar (default: the PGM path with a .json extension).
    #[arg(long)]
    stats: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Solution JSON written by `solve` or `sweep --solutions-dir`.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Bound on residual_sup.
    #[arg(long)]
    tol: Option<f64>,
}

fn solver_options(f: &SolverFlags, file: &FileConfig, degree: usize, tol: f64) -> Result<(OrderType, SolverOptions), Failure> {
    let t = match (&f.order_type, &file.order_type) {
        (Some(s), _) => s.parse::<OrderType>()?,
        (None, Some(t)) => t.clone(),
        (None, None) => OrderType::pd(),
    };
    let tol = check_tol(f.tol.or(file.tol).unwrap_or(tol))?;
    let precision = resolve_precision(f.precision.as_deref(), file.precision.as_deref())?;
    let opts = SolverOptions::new(f.degree.or(file.degree).unwrap_or(degree), tol).with_precision(precision);
    opts.validate()?;
    Ok((t, opts))
}

fn ells_from(flag: &Option<String>, file: &FileConfig, default: &[f64]) -> Result<Vec<f64>, Failure> {
    let ells = match (flag, &file.ells) {
        (Some(s), _) => parse_ells(s)?,
        (None, Some(v)) => v.clone(),
        (None, None) => default.to_vec(),
    };
    check_ells(&ells)?;
    Ok(ells)
}

fn run_solve(args: SolveArgs, file: FileConfig) -> Result<(), Failure> {
    let (t, opts) = solver_options(&args.solver, &file, 40, 1e-11)?;
    let ell = args.ell.or(file.ell).unwrap_or(2.0);
    check_ells(&[ell])?;
    let out = args.out.or(file.out).unwrap_or_else(|| "solution.json".into());
    check_writable(&out)?;
    match renorm::solve_fixed_point_with(ell, &t, &opts, None) {
        Ok(sol) => {
            write(&out, sol.to_json())?;
            println!(
                "ell={} tau={} alpha={} residual={:.3e} iters={}",
                decimal::format_f64(ell),
                sol.tau,
                sol.alpha,
                sol.residual,
                sol.iterations
            );
            Ok(())
        }
        Err(e) => {
            let f = Failure::from(e.clone());
            if f.code == 2 {
                let residual = match e.root() {
                    Error::NoConvergence { residual } => Some(*residual),
                    _ => None,
                };
                let diag = json!({
                    "status": "failed",
                    "error": e.to_string(),
                    "last_residual": residual,
                    "ell": ell,
                    "type": t,
                    "degree": opts.degree,
                    "tol": opts.tol,
                });
                write(&out, serde_json::to_string_pretty(&diag).expect("json"))?;
            }
            Err(f)
        }
    }
}

const DEFAULT_ELLS: [f64; 7] = [2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0];

fn run_sweep(args: SweepArgs, file: FileConfig) -> Result<(), Failure> {
    let (t, opts) = solver_options(&args.solver, &file, 80, 1e-12)?;
    let ells = ells_from(&args.ells, &file, &DEFAULT_ELLS)?;
    let window = args.window.or(file.window).unwrap_or(DEFAULT_FIT_WINDOW);
    if window == 0 {
        return Err(Failure::validation("window must be positive"));
    }
    let out = args.out.or(file.out).unwrap_or_else(|| "sweep.csv".into());
    check_writable(&out)?;
    let dir = args.solutions_dir.or(file.solutions_dir);
    if let Some(d) = &dir {
        check_dir_writable(d)?;
    }
    let (sols, err) = renorm::sweep_partial(&t, &ells, &opts);
    if let Some(d) = &dir {
        for s in &sols {
            write(&d.join(format!("solution_ell_{}.json", decimal::format_f64(s.ell))), s.to_json())?;
        }
    }
    let table = SweepTable::from_solutions(&t, sols, window);
    let mut csv = table.to_csv();
    if !table.rows.is_empty() {
        csv.push_str(&format!("tau_inf={}\n", decimal::format_f64(table.extrapolated_tau_inf)));
    }
    write(&out, &csv)?;
    print!("{csv}");
    match err {
        None => Ok(()),
        Some(e) => {
            let mut f = Failure::from(e);
            f.message = format!("{} ({} of {} criticalities completed)", f.message, table.rows.len(), ells.len());
            Err(f)
        }
    }
}

fn run_limit(args: LimitArgs, file: FileConfig) -> Result<(), Failure> {
    let (t, opts) = solver_options(&args.solver, &file, 96, 1e-12)?;
    let default: Vec<f64> = DEFAULT_ELLS.iter().copied().chain([256.0]).collect();
    let ells = ells_from(&args.ells, &file, &default)?;
    let out = args.out.or(file.out).unwrap_or_else(|| "limit.json".into());
    let diag = args.diagnostics.or(file.diagnostics).unwrap_or_else(|| "limit_diagnostics.csv".into());
    check_writable(&out)?;
    check_writable(&diag)?;
    let table = renorm::sweep_with(&t, &ells, &opts, DEFAULT_FIT_WINDOW)?;
    let (est, fits) = extrapolate_limit_default(&table)?;
    write(&diag, diagnostics_csv(&fits))?;
    let text = serde_json::to_string_pretty(&est).expect("json");
    write(&out, &text)?;
    println!("{text}");
    Ok(())
}

fn run_julia(args: JuliaArgs, file: FileConfig) -> Result<(), Failure> {
    let m = FlatExpMap::new(
        args.a.or(file.a).unwrap_or(complexdyn::DEFAULT_A),
        args.c.or(file.c).unwrap_or(complexdyn::DEFAULT_C),
    )?;
    let d = Viewport::default_for(&m);
    let vp = Viewport {
        re_min: args.re_min.or(file.re_min).unwrap_or(d.re_min),
        re_max: args.re_max.or(file.re_max).unwrap_or(d.re_max),
        im_min: args.im_min.or(file.im_min).unwrap_or(d.im_min),
        im_max: args.im_max.or(file.im_max).unwrap_or(d.im_max),
    };
    vp.validate()?;
    let width = args.width.or(file.width).unwrap_or(500);
    let height = args.height.or(file.height).unwrap_or(400);
    let budget = args.budget.or(file.budget).unwrap_or(complexdyn::DEFAULT_BUDGET);
    let depth = args.preimage_depth.or(file.preimage_depth).unwrap_or(1);
    if depth > 4 {
        return Err(Failure::validation(format!("preimage depth {depth} > 4")));
    }
    let out = args.out.or(file.out).unwrap_or_else(|| "julia.pgm".into());
    let stats = args.stats.or(file.stats).unwrap_or_else(|| out.with_extension("json"));
    check_writable(&out)?;
    check_writable(&stats)?;
    let cls = Classifier::new(m, depth, 4)?;
    let raster = complexdyn::render_julia(&cls, vp, width, height, budget)?;
    write(&out, raster.to_pgm())?;
    let st = raster.stats(&cls)?;
    let text = serde_json::to_string_pretty(&json!({ "viewport": vp, "stats": st })).expect("json");
    write(&stats, &text)?;
    println!(
        "b_f={} z0={} mult_b={:.6} mult_z0={:.6} unknown_fraction={:.4}",
        st.b_f, st.z0, st.mult_b, st.mult_z0, st.unknown_fraction
    );
    Ok(())
}

fn run_verify(args: VerifyArgs, file: FileConfig) -> Result<(), Failure> {
    let input = args.input.or(file.input).ok_or_else(|| Failure::validation("verify needs --input"))?;
    let text = fs::read_to_string(&input).map_err(|e| Failure::validation(format!("cannot read {}: {e}", input.display())))?;
    let sol = FixedPointSolution::from_json(&text)?;
    let mut bounds = Bounds::default();
    if let Some(t) = args.tol.or(file.tol) {
        bounds.residual = t;
    }
    let checks = verify_solution(&sol, &bounds);
    let mut failed = 0;
    for c in &checks {
        println!("{:<4} {:<24} {}", if c.passed { "ok" } else { "FAIL" }, c.name, c.detail);
        failed += usize::from(!c.passed);
    }
    if failed > 0 {
        return Err(Failure::numeric(format!("{failed} of {} checks failed", checks.len())));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let file = FileConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Solve(a) => run_solve(a, file),
        Command::Sweep(a) => run_sweep(a, file),
        Command::Limit(a) => run_limit(a, file),
        Command::Julia(a) => run_julia(a, file),
        Command::Verify(a) => run_verify(a, file),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 3 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
