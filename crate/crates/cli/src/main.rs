mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

/// Exact distributions, moments, samplers, CTRW limit and ruin model for the
/// generalized fractional counting process.
#[derive(Debug, Parser)]
#[command(name = "gfcp", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Parameter document: inline JSON (starting with `{`) or a file path.
    #[arg(long, global = true)]
    params: Option<String>,
    /// Master seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: available cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Output file (default: standard output).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Three-parameter Mittag-Leffler function or derivatives of E_{β,γ}.
    Ml(commands::MlArgs),
    /// Probability mass function.
    Pmf(commands::PmfArgs),
    /// Mean, variance and factorial/raw moments.
    Moments(commands::MomentsArgs),
    /// Covariance and correlation of M(s) and M(t).
    Cov(commands::CovArgs),
    /// Sample paths on a time grid, or event lists for alpha = 1.
    Sample(commands::SampleArgs),
    /// Characteristic function for alpha = 1.
    Charfn(commands::CharfnArgs),
    /// Inverse stable subordinator mean and covariance.
    Subordinator(commands::SubordinatorArgs),
    /// Correlation decay and fitted exponent.
    Dependence(commands::DependenceArgs),
    /// Distance between the scaled random walk and the exact pmf.
    Ctrw(commands::CtrwArgs),
    /// Ruin probabilities of the surplus process.
    Ruin(commands::RuinArgs),
    /// Runs the numerical acceptance checks.
    Selftest(commands::SelftestArgs),
}

/// Failure classes, each with its own exit status.
#[derive(Debug)]
enum CliError {
    Usage(String),
    Input(String),
    Core(gfcp_core::Error),
    Io(std::io::Error),
    /// A self-test ran to completion but some check failed.
    ChecksFailed(usize),
}

impl From<gfcp_core::Error> for CliError {
    fn from(e: gfcp_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 64,
            CliError::Input(_) | CliError::Io(_) => 1,
            CliError::Core(e) if e.is_input_error() => 1,
            CliError::Core(_) | CliError::ChecksFailed(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Input(m) => write!(f, "{m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
            CliError::ChecksFailed(n) => write!(f, "{n} check(s) failed"),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 64 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gfcp: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.global.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Input(format!("cannot start worker threads: {e}")))?;
    let doc = pool.install(|| commands::dispatch(&cli.global, &cli.command));
    let (doc, checks_failed) = doc?;
    let bytes = match cli.global.format {
        Format::Csv => doc.render_csv()?,
        Format::Json => doc.render_json(),
    };
    match &cli.global.out {
        Some(path) => std::fs::write(path, bytes)?,
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            out.write_all(&bytes)?;
            out.flush()?;
        }
    }
    if checks_failed > 0 {
        return Err(CliError::ChecksFailed(checks_failed));
    }
    Ok(())
}
