//! The `fmbs` command line.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use fmbs_core::inverse::expected_mse;
use fmbs_core::placement::prefix_objectives;
use fmbs_core::{generate, Method, Model, ModelSpec};
use serde::Serialize;

use crate::error::{BenchError, Result};
use crate::experiment::{
    audit, indices_csv, indices_path, parse_budgets, parse_methods, records_csv, run_bench,
    run_method, summarize, summary_csv, summary_path, write_file, ExperimentConfig, DEFAULT_MU,
};
use crate::io::{load_matrix, save_matrix, MatrixFormat};
use crate::scaling::{run_scaling, ScalingConfig};

pub const THREADS_ENV: &str = "FMBS_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "fmbs",
    version,
    about = "Greedy sensor placement and benchmarks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a generated measurement matrix (`.bin`/`.fmbs` → binary, else CSV).
    Gen(GenArgs),
    /// Select sampling locations for a matrix and write the result as JSON.
    Place(PlaceArgs),
    /// Average expected MSE over generated instances, per method and budget.
    Bench(BenchArgs),
    /// Time FMBS over a sweep of budgets or problem sizes.
    Scaling(ScalingArgs),
}

fn parse_model(s: &str) -> std::result::Result<Model, String> {
    s.parse().map_err(|e: fmbs_core::Error| e.to_string())
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse().map_err(|e: fmbs_core::Error| e.to_string())
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// 1 (Gaussian) or 2 (Bernoulli 0/1)
    #[arg(long, value_parser = parse_model)]
    pub model: Model,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PlaceArgs {
    /// CSV (`rows,cols` header) or FMBS binary matrix
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long)]
    pub budget: usize,
    #[arg(long, default_value_t = DEFAULT_MU)]
    pub mu: f64,
    /// fmbs, greedy-direct, random or exhaustive
    #[arg(long, default_value = "fmbs", value_parser = parse_method)]
    pub method: Method,
    /// Seed for `random`
    #[arg(long)]
    pub seed: Option<u64>,
    /// Recompute FMBS candidate states from scratch every T steps
    #[arg(long)]
    pub refresh_every: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// 1 (Gaussian) or 2 (Bernoulli 0/1)
    #[arg(long, value_parser = parse_model)]
    pub model: Model,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub k: usize,
    /// A:B:STEP covers A, A+STEP, ... up to B inclusive; also a comma list
    #[arg(long)]
    pub budgets: String,
    #[arg(long, default_value_t = crate::experiment::DEFAULT_TRIALS)]
    pub trials: usize,
    #[arg(long, default_value_t = DEFAULT_MU)]
    pub mu: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated method ids
    #[arg(long, default_value = "fmbs,random")]
    pub methods: String,
    #[arg(long)]
    pub refresh_every: Option<usize>,
    /// Per-trial CSV; means go to `<stem>_summary.csv` and selected indices
    /// to `<stem>_indices.csv` alongside
    #[arg(long)]
    pub out: PathBuf,
    /// Reread the written files and recompute every mse from the stored indices
    #[arg(long)]
    pub audit: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SweepAxis {
    M,
    N,
}

#[derive(Debug, Args)]
pub struct ScalingArgs {
    /// `m`: budgets at fixed --n; `n`: problem sizes
    #[arg(long, value_enum)]
    pub sweep: SweepAxis,
    /// Sweep values, same syntax as bench --budgets
    #[arg(long)]
    pub values: String,
    /// Problem size for an M sweep
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Fixed budget for an N sweep (default: fraction·N)
    #[arg(long)]
    pub m: Option<usize>,
    /// Parameter dimension (default: equal to the budget)
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    pub fraction: f64,
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    #[arg(long, default_value = "1", value_parser = parse_model)]
    pub model: Model,
    #[arg(long, default_value_t = DEFAULT_MU)]
    pub mu: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
pub struct PlaceOutput {
    pub method: String,
    pub matrix: String,
    pub rows: usize,
    pub cols: usize,
    pub budget: usize,
    pub mu: f64,
    pub seed: Option<u64>,
    pub refresh_every: Option<usize>,
    pub indices: Vec<usize>,
    pub objective_trace: Vec<f64>,
    /// `Tr[(CΦ)ᵀCΦ]⁻¹`, absent when the selected rows are rank deficient.
    pub expected_mse: Option<f64>,
    pub step_seconds: Vec<f64>,
    pub wall_time_seconds: f64,
}

/// Fields of [`PlaceOutput`] that vary between identical runs.
pub const PLACE_TIMING_FIELDS: [&str; 2] = ["step_seconds", "wall_time_seconds"];

pub fn place(args: &PlaceArgs) -> Result<PlaceOutput> {
    let phi = load_matrix(&args.matrix)?;
    if args.budget == 0 || args.budget > phi.rows() {
        return Err(BenchError::Usage(format!(
            "BudgetError: --budget {} must be between 1 and the matrix row count {}",
            args.budget,
            phi.rows()
        )));
    }
    if !(args.mu > 0.0 && args.mu.is_finite()) {
        return Err(BenchError::Usage(format!(
            "--mu must be positive, got {}",
            args.mu
        )));
    }
    if args.refresh_every == Some(0) {
        return Err(BenchError::Usage("--refresh-every must be positive".into()));
    }
    let started = Instant::now();
    let result = run_method(
        &phi,
        args.method,
        args.budget,
        args.mu,
        args.seed.unwrap_or(0),
        args.refresh_every,
        true,
    )?;
    let wall = started.elapsed();
    let indices = result.set.indices().to_vec();
    let objective_trace = if result.objective_trace.is_empty() {
        prefix_objectives(&phi, &indices, args.mu)?
    } else {
        result.objective_trace.clone()
    };
    let expected_mse = if indices.len() >= phi.cols() {
        expected_mse(&phi, &indices, 1.0).ok()
    } else {
        None
    };
    Ok(PlaceOutput {
        method: args.method.to_string(),
        matrix: args.matrix.display().to_string(),
        rows: phi.rows(),
        cols: phi.cols(),
        budget: args.budget,
        mu: args.mu,
        seed: args.seed,
        refresh_every: args.refresh_every,
        indices,
        objective_trace,
        expected_mse,
        step_seconds: result.step_times.iter().map(|d| d.as_secs_f64()).collect(),
        wall_time_seconds: wall.as_secs_f64(),
    })
}

fn run_place(args: &PlaceArgs) -> Result<()> {
    let output = place(args)?;
    let mut json = serde_json::to_string_pretty(&output).expect("plain data serializes");
    json.push('\n');
    write_file(&args.out, &json)
}

fn run_gen(args: &GenArgs) -> Result<()> {
    let phi = generate(&ModelSpec::new(args.model, args.n, args.k, args.seed)?)?;
    save_matrix(&args.out, &phi, MatrixFormat::from_path(&args.out))
}

fn worker_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(value) = std::env::var(THREADS_ENV) {
        let threads: usize = value.trim().parse().map_err(|_| {
            BenchError::Usage(format!("{THREADS_ENV} must be a count, got `{value}`"))
        })?;
        builder = builder.num_threads(threads);
    }
    builder
        .build()
        .map_err(|e| BenchError::Usage(format!("cannot start worker pool: {e}")))
}

fn run_bench_cmd(args: &BenchArgs) -> Result<()> {
    let config = ExperimentConfig {
        model: args.model,
        n: args.n,
        k: args.k,
        budgets: parse_budgets(&args.budgets)?,
        mu: args.mu,
        sigma2: 1.0,
        trials: args.trials,
        seed: args.seed,
        methods: parse_methods(&args.methods)?,
        refresh_every: args.refresh_every,
    };
    let records = worker_pool()?.install(|| run_bench(&config))?;
    write_file(&args.out, &records_csv(&records))?;
    write_file(&summary_path(&args.out), &summary_csv(&summarize(&records)))?;
    write_file(&indices_path(&args.out), &indices_csv(&records))?;
    if args.audit {
        let checked = audit(
            &config,
            &read_to_string(&args.out)?,
            &read_to_string(&indices_path(&args.out))?,
        )?;
        println!("audit: {checked} rows match recomputed expected MSE");
    }
    Ok(())
}

fn run_scaling_cmd(args: &ScalingArgs) -> Result<()> {
    let values = parse_budgets(&args.values)?;
    let mut config = match args.sweep {
        SweepAxis::M => ScalingConfig::over_m(args.n, &values, args.k),
        SweepAxis::N => {
            if !(args.fraction > 0.0 && args.fraction <= 1.0) {
                return Err(BenchError::Usage(format!(
                    "--fraction must be in (0, 1], got {}",
                    args.fraction
                )));
            }
            ScalingConfig::over_n(&values, args.m, args.k, args.fraction)
        }
    };
    config.model = args.model;
    config.repeats = args.repeats;
    config.mu = args.mu;
    config.seed = args.seed;
    let report = run_scaling(&config)?;
    write_file(&args.out, &report.csv())?;
    print!("{}", report.summary());
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Gen(a) => run_gen(a),
        Command::Place(a) => run_place(a),
        Command::Bench(a) => run_bench_cmd(a),
        Command::Scaling(a) => run_scaling_cmd(a),
    }
}

fn subcommand_usage(cli: &Cli) -> String {
    let name = match cli.command {
        Command::Gen(_) => "gen",
        Command::Place(_) => "place",
        Command::Bench(_) => "bench",
        Command::Scaling(_) => "scaling",
    };
    let mut cmd = Cli::command();
    cmd.build();
    cmd.find_subcommand_mut(name)
        .map(|c| c.render_usage().to_string())
        .unwrap_or_default()
}

/// Parses `args`, runs the command and returns the process exit code:
/// 0 on success, 1 on I/O or file format errors, 2 on bad flags or budgets,
/// 3 on solver failures.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            let code = e.exit_code();
            eprintln!("error: {e}");
            if code == 2 {
                eprintln!(
                    "\n{}\n\nFor more information, try '--help'.",
                    subcommand_usage(&cli)
                );
            }
            code
        }
    }
}

/// Drops timing fields from a `place` JSON document.
pub fn strip_place_timing(json: &str) -> serde_json::Result<serde_json::Value> {
    let mut value: serde_json::Value = serde_json::from_str(json)?;
    if let Some(obj) = value.as_object_mut() {
        for key in PLACE_TIMING_FIELDS {
            obj.remove(key);
        }
    }
    Ok(value)
}

/// Drops the column named `column` from CSV text.
pub fn strip_csv_column(csv: &str, column: &str) -> String {
    let mut lines = csv.lines();
    let Some(header) = lines.next() else {
        return String::new();
    };
    let drop = header.split(',').position(|c| c == column);
    let keep = |line: &str| -> String {
        line.split(',')
            .enumerate()
            .filter(|(i, _)| Some(*i) != drop)
            .map(|(_, f)| f)
            .collect::<Vec<_>>()
            .join(",")
    };
    let mut out = keep(header);
    out.push('\n');
    for line in lines {
        out.push_str(&keep(line));
        out.push('\n');
    }
    out
}

pub fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| BenchError::io(format!("reading {}", path.display()), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn strips_timing_columns() {
        let csv = "method,m,trial,mse,seconds\nfmbs,4,0,1.5,0.001\n";
        assert_eq!(
            strip_csv_column(csv, "seconds"),
            "method,m,trial,mse\nfmbs,4,0,1.5\n"
        );
        let v =
            strip_place_timing(r#"{"indices":[0],"wall_time_seconds":1.0,"step_seconds":[1.0]}"#)
                .unwrap();
        assert_eq!(v, serde_json::json!({"indices": [0]}));
    }
}
