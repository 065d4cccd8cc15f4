use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

mod commands;
mod verify;

#[derive(Parser, Debug)]
#[command(name = "branched", version, about = "Branched rough paths: tables, lifts, sewing, RDEs and tree series")]
struct Cli {
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Forests with degree, factorial, symmetry and reduced coproduct.
    HopfTable(HopfTableArgs),
    /// Runs invariant suites; exits nonzero when a check fails.
    Verify(VerifyArgs),
    /// Lifts a sampled smooth driver to a branched rough path.
    Lift(LiftArgs),
    /// Extends a branched rough path to higher degree.
    Extend(ExtendArgs),
    /// Corrects an almost branched rough path.
    Correct(CorrectArgs),
    /// Sews a 2-increment.
    Sew(SewArgs),
    /// Solves a rough differential equation by Picard iteration.
    SolveRde(SolveRdeArgs),
    /// Local errors of truncated tree-series steps.
    BseriesCompare(BseriesArgs),
    /// Tabulates the neo-classical ratio.
    NeoclassicalSweep(SweepArgs),
}

#[derive(Args, Debug, serde::Serialize)]
struct Output {
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, serde::Serialize)]
pub struct HopfTableArgs {
    #[arg(long)]
    max_degree: usize,
    #[arg(long, default_value_t = 1)]
    labels: usize,
    /// Full coproduct instead of the reduced one.
    #[arg(long)]
    full: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(Clone, Copy, Debug, clap::ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Hopf,
    Binomial,
    Lift,
    All,
}

#[derive(Args, Debug, serde::Serialize)]
pub struct VerifyArgs {
    #[arg(long, value_enum)]
    suite: Suite,
    #[arg(long, default_value_t = 4)]
    max_degree: usize,
    #[arg(long, default_value_t = 1)]
    labels: usize,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug, serde::Serialize)]
pub struct LiftArgs {
    /// CSV with a `t` column followed by one column per coordinate.
    #[arg(long)]
    driver: PathBuf,
    #[arg(long)]
    degree: usize,
    #[arg(long, default_value = "simpson")]
    rule: String,
    /// Roughness exponent to record; defaults to `1/degree`.
    #[arg(long)]
    gamma: Option<f64>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug, serde::Serialize)]
pub struct ExtendArgs {
    #[arg(long)]
    brp: PathBuf,
    #[arg(long)]
    degree: usize,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug, serde::Serialize)]
pub struct CorrectArgs {
    #[arg(long)]
    brp: PathBuf,
    /// Hölder order of the defects, above 1.
    #[arg(long)]
    z: f64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug, serde::Serialize)]
pub struct SewArgs {
    /// Increment rows `i,j,v…`.
    #[arg(long)]
    input: PathBuf,
    /// JSON header; defaults to the input path with a `.json` extension.
    #[arg(long)]
    header: Option<PathBuf>,
    #[arg(long)]
    mu: f64,
    /// Prefix for `<prefix>.path.csv`, `<prefix>.lambda.csv` and their
    /// headers; the summary goes to `--out`.
    #[arg(long)]
    prefix: Option<PathBuf>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug, serde::Serialize)]
pub struct SolveRdeArgs {
    #[arg(long)]
    brp: PathBuf,
    /// JSON `{"fields": [polynomial map, …]}`.
    #[arg(long)]
    field: PathBuf,
    /// Initial value, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    eta: Vec<f64>,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    #[arg(long, default_value_t = 12)]
    max_splits: usize,
    /// Defect report JSON.
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    output: Output,
}

#[derive(Clone, Copy, Debug, clap::ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DriverKind {
    /// `x^a_t = t`.
    Identity,
    /// `x^a_t = sin((a+1)t)/(a+1)`.
    Trig,
}

#[derive(Args, Debug, serde::Serialize)]
pub struct BseriesArgs {
    #[arg(long)]
    field: PathBuf,
    #[arg(long, value_enum)]
    driver: DriverKind,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    orders: Vec<usize>,
    #[arg(long, default_value_t = 6)]
    refinements: u32,
    /// Longest step.
    #[arg(long, default_value_t = 0.25)]
    h_max: f64,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    eta: Vec<f64>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug, serde::Serialize)]
pub struct SweepArgs {
    #[arg(long, value_delimiter = ',', default_value = "0.3,0.5,0.7,1")]
    gamma_grid: Vec<f64>,
    #[arg(long, default_value_t = 200)]
    n_max: usize,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.5,1,2,10")]
    ratio_grid: Vec<f64>,
    #[command(flatten)]
    output: Output,
}

/// Bad arguments found after parsing; reported with exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Where a command writes its main table.
pub struct Sink {
    inner: Box<dyn Write>,
}

impl Sink {
    fn open(out: &Output) -> Result<Sink> {
        let inner: Box<dyn Write> = match &out.out {
            Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
            None => Box::new(BufWriter::new(std::io::stdout())),
        };
        Ok(Sink { inner })
    }

    /// `# {json}` comment line carrying the schema version and run metadata.
    pub fn header(&mut self, command: &str, meta: Value) -> Result<()> {
        writeln!(
            self.inner,
            "# {}",
            json!({"schema_version": branched::io::SCHEMA_VERSION, "command": command, "meta": meta})
        )?;
        Ok(())
    }

    pub fn writer(&mut self) -> &mut dyn Write {
        &mut self.inner
    }

    pub fn json(&mut self, v: &Value) -> Result<()> {
        serde_json::to_writer_pretty(&mut self.inner, v)?;
        writeln!(self.inner)?;
        Ok(())
    }

    fn finish(mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

pub fn open_read(p: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(p).with_context(|| format!("opening {}", p.display()))?))
}

pub fn create(p: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?))
}

fn echo<T: serde::Serialize>(command: &str, args: &T, threads: usize) {
    let v =
        json!({"schema_version": branched::io::SCHEMA_VERSION, "command": command, "threads": threads, "config": args});
    log::info!("config {v}");
}

fn run(cli: Cli) -> Result<bool> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(usage("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let threads = rayon::current_num_threads();
    macro_rules! go {
        ($name:literal, $args:expr, $f:path) => {{
            let args = $args;
            echo($name, &args, threads);
            let mut sink = Sink::open(&args.output)?;
            let ok = $f(&args, &mut sink)?;
            sink.finish()?;
            ok
        }};
    }
    Ok(match cli.command {
        Command::HopfTable(a) => go!("hopf-table", a, commands::hopf_table),
        Command::Verify(a) => go!("verify", a, verify::run),
        Command::Lift(a) => go!("lift", a, commands::lift),
        Command::Extend(a) => go!("extend", a, commands::extend),
        Command::Correct(a) => go!("correct", a, commands::correct),
        Command::Sew(a) => go!("sew", a, commands::sew),
        Command::SolveRde(a) => go!("solve-rde", a, commands::solve_rde),
        Command::BseriesCompare(a) => go!("bseries-compare", a, commands::bseries_compare),
        Command::NeoclassicalSweep(a) => go!("neoclassical-sweep", a, commands::neoclassical_sweep),
    })
}

fn error_kind(e: &anyhow::Error) -> String {
    match e.downcast_ref::<branched::Error>() {
        Some(inner) => format!("{inner:?}").split([' ', '(', '{']).next().unwrap_or("Error").to_string(),
        None => "Error".to_string(),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) if e.downcast_ref::<UsageError>().is_some() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            let diag = json!({
                "schema_version": branched::io::SCHEMA_VERSION,
                "error": error_kind(&e),
                "message": format!("{e:#}"),
            });
            eprintln!("{diag}");
            ExitCode::from(1)
        }
    }
}
