use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::json;

use he_cli::commands::{self, Command};
use he_cli::config::{parse_config, DEFAULT_OUTPUT_DIR};
use he_cli::report::{float, write_outputs};
use he_cli::self_test;

const OUTPUT_DIR_ENV: &str = "HE_OUTPUT_DIR";

/// Numerical experiments on Hermitian-Einstein metrics over the projective
/// line. Exit code 0 on pass, 2 on a failed audit, 1 on error.
#[derive(Parser)]
#[command(name = "he", version)]
struct Cli {
    /// JSON experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config and $HE_OUTPUT_DIR.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for independent samples.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Run the built-in closed-form checks and exit.
    #[arg(long)]
    self_test: bool,
    #[command(subcommand)]
    command: Option<Sub>,
}

#[derive(Subcommand, Clone, Copy)]
enum Sub {
    /// Bergman kernel deviation over a list of levels.
    Bergman,
    /// Donaldson functional, cocycle defect and scale invariance.
    Mdon,
    /// Exact non-Archimedean functionals of a weight vector.
    Mna,
    /// Asymptotic slope of the Donaldson functional along a ray.
    SlopeTest,
    /// Minimize the Donaldson functional over FS metrics.
    Solve,
    /// Lower bound for δ-bounded metrics.
    AuditDeltabound,
    /// Coercivity constants along random rays.
    ProbeCoercivity,
    /// Second derivative along FS geodesics against its formula.
    ConvexityAudit,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Command {
        match s {
            Sub::Bergman => Command::Bergman,
            Sub::Mdon => Command::Mdon,
            Sub::Mna => Command::Mna,
            Sub::SlopeTest => Command::SlopeTest,
            Sub::Solve => Command::Solve,
            Sub::AuditDeltabound => Command::AuditDeltabound,
            Sub::ProbeCoercivity => Command::ProbeCoercivity,
            Sub::ConvexityAudit => Command::ConvexityAudit,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn execute(cli: Cli) -> Result<bool, String> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    if cli.self_test {
        return Ok(run_self_test());
    }
    let command: Command = cli
        .command
        .ok_or("no subcommand given (see --help)")?
        .into();
    let path = cli.config.ok_or("--config is required")?;
    let mut cfg = parse_config(&path).map_err(|e| e.to_string())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let dir = cli
        .out
        .or_else(|| cfg.output_dir.clone().map(PathBuf::from))
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));

    let start = Instant::now();
    let out = commands::run(command, &cfg).map_err(|e| format!("{}: {e}", command.name()))?;
    let wall = start.elapsed().as_secs_f64();
    let report = commands::report(command, &cfg, &out);
    let mut written = write_outputs(&dir, &report, &out.traces).map_err(|e| format!("{}: {e}", dir.display()))?;
    let timing = dir.join("timing.json");
    let text = serde_json::to_string_pretty(&json!({"command": command.name(), "wall_time": float(wall)}))
        .map_err(|e| e.to_string())?;
    std::fs::write(&timing, text + "\n").map_err(|e| format!("{}: {e}", timing.display()))?;
    written.push(timing);

    for file in &written {
        println!("wrote {}", file.display());
    }
    println!("{}: {} in {wall:.2} s", command.name(), if out.pass { "pass" } else { "FAIL" });
    Ok(out.pass)
}

fn run_self_test() -> bool {
    let start = Instant::now();
    let outcomes = self_test::run_all();
    let mut ok = true;
    for o in &outcomes {
        match &o.error {
            None => println!("ok    {}", o.name),
            Some(e) => {
                ok = false;
                println!("FAIL  {}: {e}", o.name);
            }
        }
    }
    let passed = outcomes.iter().filter(|o| o.error.is_none()).count();
    println!("{passed}/{} checks passed in {:.2} s", outcomes.len(), start.elapsed().as_secs_f64());
    ok
}
