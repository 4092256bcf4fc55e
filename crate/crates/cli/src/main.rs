use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use npc_lab::riemannian::quadrature::{quadrature_csv, quadrature_selftest};
use npc_lab_cli::{parse_scenario, run_scenario, CheckKind, CliError};

#[derive(Parser)]
#[command(name = "lab", version, about = "Harmonic maps into NPC and CAT(-1) spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the scenario's map, run its checks and write the reports.
    Run {
        scenario: PathBuf,
        /// Output directory (default: the scenario's `output`, else `out/<name>`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated checks to run instead of the scenario's list.
        #[arg(long, value_delimiter = ',')]
        checks: Option<Vec<CheckKind>>,
        /// Worker threads; 0 lets the runtime decide.
        #[arg(long, env = "LAB_THREADS")]
        threads: Option<usize>,
    },
    /// Parse and validate a scenario without running it.
    Validate { scenario: PathBuf },
    /// Compare the quadratic-form closed forms with numeric quadrature.
    QuadratureSelftest {
        /// Directory for quadrature.csv.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        cases: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1e-6)]
        tolerance: f64,
    },
}

fn run(
    path: PathBuf,
    out: Option<PathBuf>,
    checks: Option<Vec<CheckKind>>,
    threads: Option<usize>,
) -> Result<i32, CliError> {
    let mut scenario = parse_scenario(&path)?;
    if checks.is_some() {
        scenario.analysis.checks = checks;
    }
    let out = out
        .or_else(|| scenario.output.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(&scenario.name));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .expect("thread pool");
    let result = pool.install(|| run_scenario(&scenario, &out))?;
    print!("{}", npc_lab_cli::report::summary_text(&result.summary));
    println!("wall time {:.2?}", result.wall_time);
    for f in &result.manifest {
        println!("wrote {}", f.display());
    }
    Ok(result.exit_code())
}

fn selftest(out: Option<PathBuf>, cases: usize, seed: u64, tolerance: f64) -> Result<i32, CliError> {
    let rows = quadrature_selftest(seed, cases, &[2, 3], &[0.5, 1.0, 2.0])?;
    let worst = rows.iter().map(|r| r.rel_err).fold(0.0, f64::max);
    let failing = rows.iter().filter(|r| !(r.rel_err <= tolerance)).count();
    if let Some(dir) = out {
        std::fs::create_dir_all(&dir).map_err(|source| CliError::Io {
            path: dir.clone(),
            source,
        })?;
        let path = dir.join("quadrature.csv");
        std::fs::write(&path, quadrature_csv(&rows)).map_err(|source| CliError::Io { path, source })?;
    }
    println!("{} comparisons, worst relative error {worst:.3e}, {failing} above {tolerance:e}", rows.len());
    Ok(if failing == 0 { 0 } else { 2 })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            scenario,
            out,
            checks,
            threads,
        } => run(scenario, out, checks, threads),
        Command::Validate { scenario } => parse_scenario(&scenario).map(|s| {
            println!("{}: ok ({} checks)", s.name, s.enabled_checks().len());
            0
        }),
        Command::QuadratureSelftest {
            out,
            cases,
            seed,
            tolerance,
        } => selftest(out, cases, seed, tolerance),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
