use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use susy_matrix::pipeline::{run, RunOutcome};
use susy_matrix::scenario::{generate, ExampleKind, GenParams, Scenario, Stage};
use susy_matrix::Error;

const EXIT_FAIL: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(name = "susy-matrix", version, about = "Build and verify matrix intertwining operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the verification stages of a scenario file.
    Run {
        scenario: PathBuf,
        /// Comma-separated stages; defaults to the scenario's list.
        #[arg(long, value_delimiter = ',')]
        stages: Vec<String>,
        /// Acceptance tolerance for identity residuals.
        #[arg(long)]
        tol: Option<f64>,
        /// Number of sample points.
        #[arg(long)]
        points: Option<usize>,
        /// Seed for sample-point draws (overrides SUSY_MATRIX_SEED and the scenario).
        #[arg(long)]
        seed: Option<u64>,
        /// Sampling interval as `a,b`.
        #[arg(long, value_delimiter = ',', num_args = 2, allow_negative_numbers = true)]
        window: Option<Vec<f64>>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Write a scenario from one of the built-in families.
    Gen {
        /// irreducible, diagonal-pair, equal-blocks or random.
        kind: String,
        #[arg(long, default_value_t = 2)]
        n: usize,
        /// Operator order N.
        #[arg(long = "order", short = 'N', default_value_t = 2)]
        order: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Eigenvalues for diagonal-pair, as `l1,l2`.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, default_values_t = [0.0, 1.0])]
        lambdas: Vec<f64>,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn input_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(EXIT_INPUT)
}

fn env_seed() -> Result<Option<u64>, String> {
    match std::env::var("SUSY_MATRIX_SEED") {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| format!("SUSY_MATRIX_SEED is not an unsigned integer: '{s}'")),
        Err(_) => Ok(None),
    }
}

fn write_outputs(dir: &Path, outcome: &RunOutcome, metadata: serde_json::Value) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.json"), outcome.to_json())?;
    fs::write(dir.join("summary.txt"), outcome.summary())?;
    fs::write(
        dir.join("metadata.json"),
        serde_json::to_string_pretty(&metadata).unwrap() + "\n",
    )
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    path: &Path,
    stages: &[String],
    tol: Option<f64>,
    points: Option<usize>,
    seed: Option<u64>,
    window: Option<Vec<f64>>,
    out_dir: &Path,
) -> ExitCode {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return input_error(format!("cannot read {}: {e}", path.display())),
    };
    let mut sc = match Scenario::from_json(&text) {
        Ok(sc) => sc,
        Err(e) => return input_error(format!("{}: {e}", path.display())),
    };
    match env_seed() {
        Ok(Some(s)) => sc.seed = s,
        Ok(None) => {}
        Err(e) => return input_error(e),
    }
    if let Some(s) = seed {
        sc.seed = s;
    }
    if let Some(t) = tol {
        sc.config.tol_accept = t;
    }
    if let Some(p) = points {
        sc.config.points = p;
    }
    if let Some(w) = window {
        sc.config.window = (w[0], w[1]);
    }
    if !stages.is_empty() {
        match stages.iter().map(|s| s.parse::<Stage>()).collect::<Result<Vec<_>, Error>>() {
            Ok(st) => sc.stages = st,
            Err(e) => return input_error(e),
        }
    }
    if let Err(e) = sc.validate() {
        return input_error(e);
    }

    let started = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let clock = Instant::now();
    let outcome = run(&sc, &sc.stages(), &sc.verify_config());
    let metadata = serde_json::json!({
        "scenario_path": path.display().to_string(),
        "started_unix": started,
        "elapsed_ms": clock.elapsed().as_millis() as u64,
        "version": env!("CARGO_PKG_VERSION"),
    });
    if let Err(e) = write_outputs(out_dir, &outcome, metadata) {
        eprintln!("error: cannot write reports to {}: {e}", out_dir.display());
        return ExitCode::from(EXIT_INPUT);
    }
    print!("{}", outcome.summary());
    match &outcome.failure {
        Some(f) if f.numerical => {
            match f.point {
                Some(x) => eprintln!("stage {} failed at x = {x}: {}", f.stage, f.error),
                None => eprintln!("stage {} failed: {}", f.stage, f.error),
            }
            ExitCode::from(EXIT_NUMERICAL)
        }
        Some(f) => input_error(format!("stage {}: {}", f.stage, f.error)),
        None if outcome.passed => ExitCode::SUCCESS,
        None => ExitCode::from(EXIT_FAIL),
    }
}

fn cmd_gen(kind: &str, params: GenParams, out: Option<&Path>) -> ExitCode {
    let kind: ExampleKind = match kind.parse() {
        Ok(k) => k,
        Err(e) => return input_error(e),
    };
    let sc = match generate(kind, &params) {
        Ok(sc) => sc,
        Err(e) => return input_error(e),
    };
    match out {
        Some(p) => {
            if let Err(e) = fs::write(p, sc.to_json()) {
                return input_error(format!("cannot write {}: {e}", p.display()));
            }
        }
        None => print!("{}", sc.to_json()),
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            scenario,
            stages,
            tol,
            points,
            seed,
            window,
            out_dir,
        } => cmd_run(&scenario, &stages, tol, points, seed, window, &out_dir),
        Command::Gen {
            kind,
            n,
            order,
            seed,
            lambdas,
            out,
        } => cmd_gen(
            &kind,
            GenParams {
                n,
                order,
                seed,
                lambdas,
            },
            out.as_deref(),
        ),
    }
}
