//! Batch entry point: configure a run from JSON (or a named preset), execute
//! it, and write reproducible artifacts. Exit codes: 0 pass, 1 hard-check or
//! runtime failure, 2 usage/config error.

use clap::{Args, Parser, Subcommand};
use fraclinf::config::RunConfig;
use fraclinf::fraclap::kelvin::{kelvin_point, kelvin_transform, reflection_factor};
use fraclinf::fraclap::operator::{FracLapOperator, OperatorMode};
use fraclinf::fraclap::oracle::oracle_slap;
use fraclinf::fraclap::AnalyticFn;
use fraclinf::grid::Grid;
use fraclinf::presets;
use fraclinf::report::{self, build_report};
use fraclinf::solver::{solve_continuation, ContinuationResult, Problem};
use fraclinf::verify;
use serde::Serialize;
use serde_json::Value;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "fraclinf",
    version,
    about = "Supremal fractional-Laplacian minimisation via p-continuation"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the continuation problem and write fields + trajectory.
    Solve(RunArgs),
    /// Solve, run every check (including the uniqueness experiment), and
    /// write the full report; the exit code reflects the hard checks.
    Verify(RunArgs),
    /// Solve and write per-stage diagnostics (p, e_p, mass, duality gap,
    /// saturation) as sweep.csv.
    SweepP(RunArgs),
    /// Run the two-path uniqueness experiment and write uniqueness.json.
    Uniqueness(RunArgs),
    /// Cross-check the discrete operator against the quadrature oracle and
    /// the Kelvin reflection identity.
    OperatorCheck(OperatorArgs),
    /// Convert a report.json into checks.csv and stages.csv.
    Export(ExportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Path to a JSON run configuration.
    #[arg(long, conflicts_with = "preset", value_name = "PATH")]
    config: Option<PathBuf>,
    /// Built-in scenario instead of a config file.
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    /// Output directory; overrides the config's output_dir.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Seed override for randomized starts.
    #[arg(long)]
    seed: Option<u64>,
    /// p-schedule override, comma-separated (e.g. 2,4,8,16).
    #[arg(long, value_name = "LIST")]
    schedule: Option<String>,
}

#[derive(Args)]
struct OperatorArgs {
    /// Coarse grid spacing; the suite also runs at half this value.
    #[arg(long, default_value_t = 1.0 / 64.0)]
    spacing: f64,
    /// Number of probe points per test function.
    #[arg(long, default_value_t = 20)]
    probes: usize,
}

#[derive(Args)]
struct ExportArgs {
    /// Path to a report.json produced by `solve` or `verify`.
    report: PathBuf,
    /// Output directory for the CSV tables (default: alongside the report).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

/// Usage failures exit 2, runtime failures exit 1.
enum Failure {
    Usage(String),
    Run(String),
}

type CmdResult = Result<ExitCode, Failure>;

fn usage(err: fraclinf::Error) -> Failure {
    Failure::Usage(err.to_string())
}

fn run_err(err: fraclinf::Error) -> Failure {
    Failure::Run(err.to_string())
}

fn io_err(what: &str, err: std::io::Error) -> Failure {
    Failure::Run(format!("{what}: {err}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Cmd::Solve(a) => cmd_solve(a),
        Cmd::Verify(a) => cmd_verify(a),
        Cmd::SweepP(a) => cmd_sweep_p(a),
        Cmd::Uniqueness(a) => cmd_uniqueness(a),
        Cmd::OperatorCheck(a) => cmd_operator_check(a),
        Cmd::Export(a) => cmd_export(a),
    };
    match res {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

/// Loads the config from --config or --preset, applies flag overrides, and
/// re-validates so an override can never smuggle in an invalid schedule.
fn load_config(args: &RunArgs) -> Result<RunConfig, Failure> {
    let mut cfg = match (&args.config, &args.preset) {
        (Some(path), None) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
            RunConfig::from_json(&text).map_err(usage)?
        }
        (None, Some(name)) => presets::named(name).ok_or_else(|| {
            Failure::Usage(format!(
                "unknown preset `{name}` (available: {})",
                presets::NAMES.join(", ")
            ))
        })?,
        (None, None) => {
            return Err(Failure::Usage(
                "either --config <PATH> or --preset <NAME> is required".into(),
            ))
        }
        (Some(_), Some(_)) => unreachable!("clap rejects the combination"),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(list) = &args.schedule {
        cfg.p_schedule = parse_schedule(list)?;
    }
    if let Some(dir) = &args.out {
        cfg.output_dir = Some(dir.display().to_string());
    }
    cfg.validate().map_err(usage)?;
    Ok(cfg)
}

fn parse_schedule(list: &str) -> Result<Vec<f64>, Failure> {
    list.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|_| Failure::Usage(format!("invalid p-schedule entry `{}`", tok.trim())))
        })
        .collect()
}

/// The run directory: the config's output_dir, else runs/<hash prefix>.
fn out_dir(cfg: &RunConfig) -> PathBuf {
    match &cfg.output_dir {
        Some(dir) => PathBuf::from(dir),
        None => PathBuf::from("runs").join(&cfg.config_hash()[..12]),
    }
}

fn run_continuation(cfg: &RunConfig) -> Result<(Problem, ContinuationResult), Failure> {
    let prob = cfg.assemble().map_err(run_err)?;
    let result = solve_continuation(&prob, &cfg.continuation_options(), None).map_err(run_err)?;
    Ok((prob, result))
}

fn print_stage_table(result: &ContinuationResult) {
    println!(
        "{:>8}  {:>22}  {:>12}  {:>6}  {:>8}  converged",
        "p", "e_p", "grad (dual)", "iters", "applies"
    );
    for st in &result.stages {
        println!(
            "{:>8}  {:>22}  {:>12.4e}  {:>6}  {:>8}  {}",
            st.p, st.e_p, st.grad_dual_norm, st.iterations, st.operator_applies, st.converged
        );
    }
}

fn warn_if_degenerate(prob: &Problem) {
    if prob.degenerate {
        println!(
            "warning: exterior data vanishes at every sampled node; \
             the unique minimiser is u = 0 and every e_p = 0"
        );
    }
}

fn cmd_solve(args: &RunArgs) -> CmdResult {
    let cfg = load_config(args)?;
    let (prob, result) = run_continuation(&cfg)?;
    let report = build_report(&prob, &result, &cfg, None).map_err(run_err)?;
    let dir = out_dir(&cfg);
    fraclinf::io::write_run_dir(&dir, &cfg, &prob, &result, &report).map_err(run_err)?;
    warn_if_degenerate(&prob);
    print_stage_table(&result);
    println!("run artifacts in {}", dir.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(args: &RunArgs) -> CmdResult {
    let cfg = load_config(args)?;
    let (prob, result) = run_continuation(&cfg)?;
    let uniq = if prob.degenerate {
        None
    } else {
        Some(
            verify::uniqueness_experiment(&prob, &cfg.continuation_options(), cfg.seed)
                .map_err(run_err)?,
        )
    };
    let report = build_report(&prob, &result, &cfg, uniq.as_ref()).map_err(run_err)?;
    let dir = out_dir(&cfg);
    fraclinf::io::write_run_dir(&dir, &cfg, &prob, &result, &report).map_err(run_err)?;
    warn_if_degenerate(&prob);
    for line in report.summary_lines() {
        println!("{line}");
    }
    println!("report written to {}", dir.join("report.json").display());
    if report.hard_pass {
        println!("hard checks: PASS");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("hard checks: FAIL");
        Ok(ExitCode::from(1))
    }
}

fn cmd_sweep_p(args: &RunArgs) -> CmdResult {
    let cfg = load_config(args)?;
    let (prob, result) = run_continuation(&cfg)?;
    let report = build_report(&prob, &result, &cfg, None).map_err(run_err)?;
    let dir = out_dir(&cfg);
    fs::create_dir_all(&dir).map_err(|e| io_err("cannot create output directory", e))?;
    let path = dir.join("sweep.csv");
    fs::write(
        &path,
        fraclinf::io::sweep_csv(&report.stages, &cfg.config_hash()),
    )
    .map_err(|e| io_err("cannot write sweep.csv", e))?;
    warn_if_degenerate(&prob);
    println!(
        "{:>8}  {:>22}  {:>22}  {:>12}  {:>10}",
        "p", "e_p", "mass", "gap (rel)", "saturated"
    );
    for row in &report.stages {
        println!(
            "{:>8}  {:>22}  {:>22}  {:>12}  {:>10}",
            row.p,
            row.e_p,
            row.mass.map_or_else(|| "-".into(), |v| v.to_string()),
            row.duality_gap_rel
                .map_or_else(|| "-".into(), |v| format!("{v:.4e}")),
            row.saturation_excl
                .map_or_else(|| "-".into(), |v| format!("{v:.3}")),
        );
    }
    println!("sweep written to {}", path.display());
    Ok(ExitCode::SUCCESS)
}

/// Standalone artifact for the uniqueness experiment; the verify report
/// embeds the same numbers in its uniqueness section.
#[derive(Serialize)]
struct UniquenessArtifact {
    schema: &'static str,
    config_hash: String,
    seed: u64,
    pair_distance: f64,
    rel_pair_distance: f64,
    tolerance_rel: f64,
    saturation_a: f64,
    saturation_b: f64,
    saturation_avg: f64,
    max_saturation_discrepancy: f64,
    pass: bool,
}

fn cmd_uniqueness(args: &RunArgs) -> CmdResult {
    let cfg = load_config(args)?;
    let prob = cfg.assemble().map_err(run_err)?;
    let rep = verify::uniqueness_experiment(&prob, &cfg.continuation_options(), cfg.seed)
        .map_err(run_err)?;
    let artifact = UniquenessArtifact {
        schema: "fraclinf-uniqueness/1",
        config_hash: cfg.config_hash(),
        seed: rep.seed,
        pair_distance: rep.pair_distance,
        rel_pair_distance: rep.rel_pair_distance,
        tolerance_rel: verify::TOL_UNIQUENESS_REL,
        saturation_a: rep.saturation_a,
        saturation_b: rep.saturation_b,
        saturation_avg: rep.saturation_avg,
        max_saturation_discrepancy: rep.max_saturation_discrepancy,
        pass: rep.pass,
    };
    let dir = out_dir(&cfg);
    fs::create_dir_all(&dir).map_err(|e| io_err("cannot create output directory", e))?;
    let path = dir.join("uniqueness.json");
    let mut json = serde_json::to_string_pretty(&artifact)
        .map_err(|e| Failure::Run(format!("cannot serialize uniqueness report: {e}")))?;
    json.push('\n');
    fs::write(&path, json).map_err(|e| io_err("cannot write uniqueness.json", e))?;
    println!(
        "two paths at p = {}: distance {:.3e} (relative {:.3e}, tolerance {:.0e})",
        cfg.p_schedule.last().unwrap(),
        rep.pair_distance,
        rep.rel_pair_distance,
        verify::TOL_UNIQUENESS_REL
    );
    println!(
        "saturation a/b/avg: {:.3}/{:.3}/{:.3} (max discrepancy {:.4})",
        rep.saturation_a, rep.saturation_b, rep.saturation_avg, rep.max_saturation_discrepancy
    );
    println!("uniqueness report written to {}", path.display());
    if rep.pass {
        println!("uniqueness: PASS");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("uniqueness: FAIL");
        Ok(ExitCode::from(1))
    }
}

fn cmd_operator_check(args: &OperatorArgs) -> CmdResult {
    if !args.spacing.is_finite() || args.spacing <= 0.0 || args.spacing > 0.5 {
        return Err(Failure::Usage(format!(
            "spacing must lie in (0, 0.5], got {}",
            args.spacing
        )));
    }
    if args.probes < 2 {
        return Err(Failure::Usage("need at least 2 probe points".into()));
    }
    let fns = [
        ("gaussian", AnalyticFn::gaussian(1)),
        (
            "bump",
            AnalyticFn::smooth_bump(1, [0.0, 0.0], 3.0, 1.0).map_err(run_err)?,
        ),
    ];
    // probes snapped to the coarse lattice so both resolutions share them
    let coarse = Grid::new(1, 8.0, args.spacing).map_err(usage)?;
    let probes: Vec<f64> = (0..args.probes)
        .map(|k| {
            let x = -4.0 + 8.0 * k as f64 / (args.probes - 1) as f64;
            (x / coarse.spacing()).round() * coarse.spacing()
        })
        .collect();
    println!(
        "{:>5}  {:>9}  {:>12}  {:>12}  {:>6}",
        "s", "function", "err(h)", "err(h/2)", "ratio"
    );
    let mut all_pass = true;
    for s in [0.1, 0.25, 0.4] {
        for (fname, f) in &fns {
            let oracle: Vec<f64> = probes
                .iter()
                .map(|&x| oracle_slap(f, &[x], s))
                .collect::<Result<_, _>>()
                .map_err(run_err)?;
            let omax = oracle.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let mut max_err = [0.0f64; 2];
            for (gi, h) in [args.spacing, 0.5 * args.spacing].into_iter().enumerate() {
                let grid = Grid::new(1, 8.0, h).map_err(usage)?;
                let op =
                    FracLapOperator::build(&grid, s, OperatorMode::WithTail).map_err(run_err)?;
                let u: Vec<f64> = (0..grid.node_count())
                    .map(|i| f.eval(&grid.coord(i)[..1]))
                    .collect();
                for (&x, &want) in probes.iter().zip(&oracle) {
                    let i = (0..grid.node_count())
                        .find(|&i| (grid.coord(i)[0] - x).abs() < 1e-12)
                        .ok_or_else(|| {
                            Failure::Run(format!("probe {x} is not a grid node at h = {h}"))
                        })?;
                    let got = op.apply_row(&u, i);
                    // guarded relative error: plain relative away from the
                    // oracle's zero crossings
                    let err = (got - want).abs() / want.abs().max(0.01 * omax);
                    max_err[gi] = max_err[gi].max(err);
                }
            }
            let ratio = max_err[0] / max_err[1];
            let pass = max_err[0] <= 1e-3 && ratio >= 1.5;
            all_pass &= pass;
            println!(
                "{:>5}  {:>9}  {:>12.4e}  {:>12.4e}  {:>6.2}{}",
                s,
                fname,
                max_err[0],
                max_err[1],
                ratio,
                if pass { "" } else { "  FAIL" }
            );
        }
    }

    // Kelvin reflection identity, checked through the oracle alone.
    let s = 0.25;
    let f = AnalyticFn::smooth_bump(1, [2.0, 0.0], 0.75, 1.0).map_err(run_err)?;
    let fk = kelvin_transform(&f, [0.0, 0.0], 1.0, s).map_err(run_err)?;
    let kelvin_probes = [0.4, 0.45, 0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.9, 1.5];
    let mut worst: f64 = 0.0;
    for y in kelvin_probes {
        let lhs = oracle_slap(&fk, &[y], s).map_err(run_err)?;
        let ky = kelvin_point(&[0.0], 1.0, &[y]);
        let rhs = reflection_factor(&[0.0], 1.0, s, &[y])
            * oracle_slap(&f, &ky[..1], s).map_err(run_err)?;
        worst = worst.max((lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1.0));
    }
    let kelvin_pass = worst <= 1e-6;
    all_pass &= kelvin_pass;
    println!(
        "kelvin identity (s = 0.25, 10 probes): max combined error {:.2e}{}",
        worst,
        if kelvin_pass { "" } else { "  FAIL" }
    );
    if all_pass {
        println!("operator check: PASS");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("operator check: FAIL");
        Ok(ExitCode::from(1))
    }
}

fn cmd_export(args: &ExportArgs) -> CmdResult {
    let text = fs::read_to_string(&args.report)
        .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", args.report.display())))?;
    let v: Value = serde_json::from_str(&text)
        .map_err(|e| Failure::Usage(format!("malformed report: {e}")))?;
    let schema = v["schema"].as_str().unwrap_or("");
    if schema != report::SCHEMA {
        return Err(Failure::Usage(format!(
            "unsupported report schema `{schema}` (expected `{}`)",
            report::SCHEMA
        )));
    }
    let hash = v["config_hash"].as_str().unwrap_or("").to_string();
    let dir = match &args.out {
        Some(d) => d.clone(),
        None => args
            .report
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from(".")),
    };
    fs::create_dir_all(&dir).map_err(|e| io_err("cannot create output directory", e))?;

    let stage_cols = [
        "p",
        "e_p",
        "gradient_norm",
        "iterations",
        "operator_applies",
        "converged",
        "mass",
        "duality_gap_rel",
        "sharmonicity_max",
        "saturation_all",
        "saturation_excl",
        "band_fraction",
    ];
    let mut stages = format!("# config_hash={hash}\n{}\n", stage_cols.join(","));
    for row in v["stages"].as_array().map_or(&[][..], Vec::as_slice) {
        let cells: Vec<String> = stage_cols.iter().map(|c| cell(&row[*c])).collect();
        stages.push_str(&cells.join(","));
        stages.push('\n');
    }
    fs::write(dir.join("stages.csv"), stages).map_err(|e| io_err("cannot write stages.csv", e))?;

    let check_cols = ["name", "hard", "status", "observed", "threshold", "detail"];
    let mut checks = format!("# config_hash={hash}\n{}\n", check_cols.join(","));
    for row in v["checks"].as_array().map_or(&[][..], Vec::as_slice) {
        let cells: Vec<String> = check_cols.iter().map(|c| cell(&row[*c])).collect();
        checks.push_str(&cells.join(","));
        checks.push('\n');
    }
    fs::write(dir.join("checks.csv"), checks).map_err(|e| io_err("cannot write checks.csv", e))?;

    println!(
        "wrote {} and {}",
        dir.join("stages.csv").display(),
        dir.join("checks.csv").display()
    );
    Ok(ExitCode::SUCCESS)
}

/// One CSV cell from a JSON value. Numbers keep their shortest round-trip
/// form straight from the report; strings are quoted when they need it.
fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::Bool(b) => b.to_string(),
        Value::Number(n) => n.to_string(),
        Value::String(s) => {
            if s.contains(',') || s.contains('"') || s.contains('\n') {
                format!("\"{}\"", s.replace('"', "\"\""))
            } else {
                s.clone()
            }
        }
        other => other.to_string(),
    }
}
