use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use orlicz_risk_cli::report::{write_csv, write_json};
use orlicz_risk_cli::{run, Command, RunError, Scenario, Settings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Toggle {
    On,
    Off,
}

/// Conditional Orlicz norms and conditional convex risk measures on finite
/// probability spaces.
///
/// Writes `<scenario>.report.json` and `<scenario>.atoms.csv`. Exit status is 0 when
/// every tolerance check passes, 1 when one fails, 2 for invalid input and 3 when a
/// computation fails.
#[derive(Debug, Parser)]
#[command(name = "orlicz-risk", version)]
struct Args {
    command: Command,
    /// Scenario JSON file.
    scenario: PathBuf,
    /// Allowed duality gap and scalarization mismatch.
    #[arg(long, default_value_t = 1e-6)]
    tol_gap: f64,
    /// Allowed violation in norm checks.
    #[arg(long, default_value_t = 1e-8)]
    tol_norm: f64,
    /// Seed for randomized probes.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Solve atoms in parallel. Output is identical either way.
    #[arg(long, value_enum, default_value_t = Toggle::Off)]
    atoms_parallel: Toggle,
    /// Directory for the output files; defaults to the scenario's directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn outputs(args: &Args) -> (String, PathBuf, PathBuf) {
    let file_name = args
        .scenario
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".into());
    let stem = args
        .scenario
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".into());
    let dir = match &args.out_dir {
        Some(d) => d.clone(),
        None => args
            .scenario
            .parent()
            .unwrap_or(Path::new("."))
            .to_path_buf(),
    };
    (
        file_name,
        dir.join(format!("{stem}.report.json")),
        dir.join(format!("{stem}.atoms.csv")),
    )
}

fn main() -> ExitCode {
    let args = Args::parse();
    for (name, v) in [("--tol-gap", args.tol_gap), ("--tol-norm", args.tol_norm)] {
        if !(v.is_finite() && v >= 0.0) {
            eprintln!("error: {name} must be a nonnegative number, got {v}");
            return ExitCode::from(2);
        }
    }
    let scenario = match Scenario::from_path(&args.scenario) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {}: {e}", args.scenario.display());
            return ExitCode::from(2);
        }
    };
    let settings = Settings {
        tol_gap: args.tol_gap,
        tol_norm: args.tol_norm,
        seed: args.seed,
        atoms_parallel: args.atoms_parallel == Toggle::On,
    };
    let (name, report_path, csv_path) = outputs(&args);
    let out = match run(args.command, &scenario, &name, &settings) {
        Ok(o) => o,
        Err(e @ RunError::Scenario(_)) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    };
    if let Some(dir) = &args.out_dir {
        if let Err(e) = std::fs::create_dir_all(dir) {
            eprintln!("error: cannot create {}: {e}", dir.display());
            return ExitCode::from(3);
        }
    }
    if let Err(e) =
        write_json(&report_path, &out.report).and_then(|_| write_csv(&csv_path, &out.rows))
    {
        eprintln!("error: cannot write output: {e}");
        return ExitCode::from(3);
    }
    for c in &out.checks {
        let mark = if c.passed() { "pass" } else { "FAIL" };
        println!(
            "{mark}  {:<24} observed {:e}  allowed {:e}",
            c.name, c.observed, c.allowed
        );
    }
    println!("report: {}", report_path.display());
    println!("atoms:  {}", csv_path.display());
    if out.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
