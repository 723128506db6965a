//! `hei` — run hierarchical Bayesian optimization on built-in test
//! functions or external black-box commands, benchmark method suites,
//! and extract stability diagnostics from saved traces.

mod config;
mod objective;
mod trace_io;

use std::fmt;
use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use hei_core::{
    run_bo_observed, run_suite, Error as CoreError, IterationRecord, RunConfig, SuiteEntry,
};

use config::{ObjectiveSource, RunSettings, SuiteSettings};
use objective::SubprocessObjective;
use trace_io::{gap_row, trace_header, trace_row, RowWriter, GAP_HEADER};

/// CLI failure with a process exit code: 2 config, 3 objective,
/// 4 too many failed replications, 1 anything else.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Objective(String),
    Suite(String),
    Internal(String),
}

impl CliError {
    fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    fn config_from(err: impl fmt::Display) -> Self {
        CliError::Config(err.to_string())
    }

    fn from_core(err: CoreError) -> Self {
        match err {
            CoreError::Objective { .. } => CliError::Objective(err.to_string()),
            other => CliError::Internal(other.to_string()),
        }
    }

    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Objective(_) => 3,
            CliError::Suite(_) => 4,
            CliError::Internal(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m)
            | CliError::Objective(m)
            | CliError::Suite(m)
            | CliError::Internal(m) => f.write_str(m),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "hei",
    version,
    about = "Bayesian optimization with hierarchical expected improvement"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one optimization and write its evaluation trace as CSV.
    Run(RunArgs),
    /// Run replicated method comparisons and write a per-iteration gap table.
    Suite(SuiteArgs),
    /// List built-in test functions with domains and known minima.
    Functions,
    /// Emit `iteration,log_ratio` stability diagnostics from a saved trace.
    Ratio(RatioArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Config file with `key = value` lines (# comments allowed).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in objective name (see `hei functions`).
    #[arg(long)]
    function: Option<String>,
    /// External objective command (one point in per line, one value out).
    #[arg(long)]
    command: Option<String>,
    /// Method name, e.g. hei-dsd, hei-mmap, hei-weak, ei-ok, ucb-ok.
    #[arg(long)]
    method: Option<String>,
    /// RNG seed (also the run_id column). HEI_SEED overrides.
    #[arg(long)]
    seed: Option<u64>,
    /// Initial space-filling design size.
    #[arg(long)]
    n_ini: Option<usize>,
    /// Total evaluation budget including the initial design.
    #[arg(long)]
    n_tot: Option<usize>,
    /// Correlation family: matern12, matern32, matern52, sqexp.
    #[arg(long)]
    kernel: Option<String>,
    /// Trace output path (default trace.csv).
    #[arg(long)]
    out: Option<String>,
    /// Output format (csv only).
    #[arg(long)]
    format: Option<String>,
    /// Domain lower bounds for external objectives, comma-separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    lower: Option<Vec<f64>>,
    /// Domain upper bounds for external objectives, comma-separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    upper: Option<Vec<f64>>,
    /// Per-evaluation timeout for external objectives (default 600).
    #[arg(long)]
    timeout_secs: Option<u64>,
}

impl RunArgs {
    fn settings(&self) -> RunSettings {
        RunSettings {
            function: self.function.clone(),
            command: self.command.clone(),
            method: self.method.clone(),
            seed: self.seed,
            n_ini: self.n_ini,
            n_tot: self.n_tot,
            kernel: self.kernel.clone(),
            out: self.out.clone(),
            format: self.format.clone(),
            lower: self.lower.clone(),
            upper: self.upper.clone(),
            timeout_secs: self.timeout_secs,
        }
    }
}

#[derive(Args)]
struct SuiteArgs {
    /// Config file with `key = value` lines (# comments allowed).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in objective name; suites need a known minimum for gaps.
    #[arg(long)]
    function: Option<String>,
    /// Comma-separated method names to compare.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    /// Replications per method (default 20).
    #[arg(long)]
    replications: Option<usize>,
    /// Base seed; replication r uses a derived seed. HEI_SEED overrides.
    #[arg(long)]
    seed: Option<u64>,
    /// Initial space-filling design size.
    #[arg(long)]
    n_ini: Option<usize>,
    /// Total evaluation budget including the initial design.
    #[arg(long)]
    n_tot: Option<usize>,
    /// Correlation family: matern12, matern32, matern52, sqexp.
    #[arg(long)]
    kernel: Option<String>,
    /// Gap-table output path (default gaps.csv).
    #[arg(long)]
    out: Option<String>,
    /// Concurrent replications (default: logical cores).
    #[arg(long)]
    workers: Option<usize>,
}

impl SuiteArgs {
    fn settings(&self) -> SuiteSettings {
        SuiteSettings {
            function: self.function.clone(),
            methods: self.methods.clone(),
            replications: self.replications,
            seed: self.seed,
            n_ini: self.n_ini,
            n_tot: self.n_tot,
            kernel: self.kernel.clone(),
            out: self.out.clone(),
            workers: self.workers,
        }
    }
}

#[derive(Args)]
struct RatioArgs {
    /// Saved trace CSV to read.
    trace: PathBuf,
    /// Output path (default: stdout).
    #[arg(long)]
    out: Option<String>,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Suite(args) => cmd_suite(args),
        Command::Functions => cmd_functions(),
        Command::Ratio(args) => cmd_ratio(args),
    };
    match result {
        Ok(()) => {}
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(err.exit_code());
        }
    }
}

fn create_out(path: &str) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::config(format!("cannot create output file {path}: {e}")))
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let mut settings = match &args.config {
        Some(path) => RunSettings::from_map(&config::parse_file(path)?)?,
        None => RunSettings::default(),
    };
    settings.overlay(args.settings());
    let resolved = config::resolve_run(settings)?;
    let dim = resolved.config.domain.dim();
    let method_name = resolved.method.name();
    let run_id = resolved.config.seed;
    let f_min = match &resolved.source {
        ObjectiveSource::Builtin(f) => Some(f.f_min()),
        ObjectiveSource::External { .. } => None,
    };

    let mut writer = RowWriter::new(create_out(&resolved.out)?, &trace_header(dim))
        .map_err(|e| CliError::Internal(format!("cannot write {}: {e}", resolved.out)))?;
    let mut write_err: Option<std::io::Error> = None;
    let observer = |rec: &IterationRecord| {
        if write_err.is_none() {
            if let Err(e) = writer.row(&trace_row(run_id, method_name, rec, f_min)) {
                write_err = Some(e);
            }
        }
    };

    let trace = match &resolved.source {
        ObjectiveSource::Builtin(f) => {
            let mut obj = f.objective();
            run_bo_observed(&resolved.config, &mut obj, observer)
        }
        ObjectiveSource::External { command } => {
            let mut obj = SubprocessObjective::spawn(
                command,
                Duration::from_secs(resolved.timeout_secs),
            )
            .map_err(CliError::from_core)?;
            run_bo_observed(&resolved.config, &mut obj, observer)
        }
    }
    .map_err(CliError::from_core)?;

    if let Some(e) = write_err {
        return Err(CliError::Internal(format!("cannot write {}: {e}", resolved.out)));
    }
    for warning in &trace.warnings {
        eprintln!("warning: {warning}");
    }
    let best_x = trace
        .best_x
        .iter()
        .map(|v| format!("{v}"))
        .collect::<Vec<_>>()
        .join(", ");
    println!(
        "{}: {} evaluations, best y = {} at ({best_x})",
        resolved.out,
        trace.records.len(),
        trace.best_y
    );
    if let Some(fm) = f_min {
        println!("gap to known minimum: {}", (trace.best_y - fm).max(0.0));
    }
    Ok(())
}

fn cmd_suite(args: SuiteArgs) -> Result<(), CliError> {
    let mut settings = match &args.config {
        Some(path) => SuiteSettings::from_map(&config::parse_file(path)?)?,
        None => SuiteSettings::default(),
    };
    settings.overlay(args.settings());
    let resolved = config::resolve_suite(settings)?;

    let mut entries = Vec::with_capacity(resolved.methods.len());
    for method in &resolved.methods {
        let mut cfg =
            RunConfig::for_method(*method, resolved.function.domain().clone(), resolved.seed);
        cfg.kernel = resolved.kernel;
        if let Some(n) = resolved.n_ini {
            cfg.n_ini = n;
        }
        if let Some(n) = resolved.n_tot {
            cfg.n_tot = n;
        }
        cfg.validate().map_err(CliError::config_from)?;
        entries.push(SuiteEntry {
            label: method.name().to_string(),
            config: cfg,
        });
    }

    let result = run_suite(
        &resolved.function,
        &entries,
        resolved.replications,
        resolved.workers,
    )
    .map_err(CliError::from_core)?;

    let mut writer = RowWriter::new(create_out(&resolved.out)?, GAP_HEADER)
        .map_err(|e| CliError::Internal(format!("cannot write {}: {e}", resolved.out)))?;
    for row in &result.rows {
        writer
            .row(&gap_row(row))
            .map_err(|e| CliError::Internal(format!("cannot write {}: {e}", resolved.out)))?;
    }

    for status in &result.statuses {
        if let Some(err) = &status.error {
            eprintln!(
                "warning: {} replication {} (seed {}) failed: {err}",
                status.label, status.replication, status.seed
            );
        }
    }
    let counts = result.success_counts();
    for (label, ok, total) in &counts {
        println!("{label}: {ok}/{total} replications succeeded");
    }
    println!("wrote {}", resolved.out);

    let struggling: Vec<String> = counts
        .iter()
        .filter(|(_, ok, total)| ok * 2 < *total)
        .map(|(label, ok, total)| format!("{label} ({ok}/{total})"))
        .collect();
    if !struggling.is_empty() {
        return Err(CliError::Suite(format!(
            "under half the replications succeeded for: {}",
            struggling.join(", ")
        )));
    }
    Ok(())
}

fn cmd_functions() -> Result<(), CliError> {
    println!("{:<10} {:>3}  {:<16} {:<24} {}", "name", "dim", "domain", "f_min", "provenance");
    for f in hei_core::all_builtins() {
        let d = f.dim();
        let lo = f.domain().lower();
        let hi = f.domain().upper();
        let uniform = lo.iter().all(|v| *v == lo[0]) && hi.iter().all(|v| *v == hi[0]);
        let domain = if uniform {
            format!("[{}, {}]^{d}", lo[0], hi[0])
        } else {
            (0..d)
                .map(|i| format!("[{}, {}]", lo[i], hi[i]))
                .collect::<Vec<_>>()
                .join(" x ")
        };
        let f_min = f.f_min();
        let f_min = if f_min != 0.0 && f_min.abs() < 1e-6 {
            format!("{f_min:e}")
        } else {
            format!("{f_min}")
        };
        println!(
            "{:<10} {:>3}  {:<16} {:<24} {}",
            f.name(),
            d,
            domain,
            f_min,
            f.provenance()
        );
    }
    Ok(())
}

fn cmd_ratio(args: RatioArgs) -> Result<(), CliError> {
    let ratios = trace_io::read_ratios(&args.trace)?;
    let mut lines = String::from("iteration,log_ratio\n");
    for (iteration, log_ratio) in &ratios.points {
        lines.push_str(&format!("{iteration},{log_ratio}\n"));
    }
    match args.out {
        Some(path) => std::fs::write(&path, lines)
            .map_err(|e| CliError::Internal(format!("cannot write {path}: {e}")))?,
        None => print!("{lines}"),
    }
    Ok(())
}
