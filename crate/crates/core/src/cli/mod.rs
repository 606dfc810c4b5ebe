//! The `hdsel` command-line front end.
//!
//! Every subcommand resolves its flags into a serializable config, runs it,
//! and wraps the result in a [`Report`] whose manifest carries that config,
//! so `hdsel replay` can rerun any report.

mod diagnose;
mod fit;
mod mc;
mod penalty;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::model::{Dataset, Support};
use crate::penalty::PenaltyRule;
use crate::report::{unix_ms, Report, RunManifest};

pub use diagnose::{DiagnoseArgs, DiagnoseConfig};
pub use fit::{FitArgs, FitConfig};
pub use mc::McArgs;
pub use penalty::{PenaltyArgs, PenaltyConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "hdsel",
    version,
    about = "Sparse high-dimensional regression: LASSO, Post-LASSO and diagnostics"
)]
pub struct Cli {
    /// Master seed for every simulated quantity.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (defaults to all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Select covariates in a CSV dataset and report Post-LASSO estimates with confidence intervals.
    Fit(FitArgs),
    /// Run a Monte Carlo experiment.
    Mc(McArgs),
    /// Sparse eigenvalues, restricted-eigenvalue bounds and rate bounds for a design.
    Diagnose(DiagnoseArgs),
    /// Penalty levels under both rules.
    Penalty(PenaltyArgs),
    /// Rerun the command recorded in a report's manifest.
    Replay { report: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleArg {
    Xdep,
    Xindep,
}

impl From<RuleArg> for PenaltyRule {
    fn from(r: RuleArg) -> Self {
        match r {
            RuleArg::Xdep => PenaltyRule::XDependent,
            RuleArg::Xindep => PenaltyRule::XIndependent,
        }
    }
}

/// What a command hands back before it is wrapped in a report.
pub(crate) struct Outcome {
    pub result: Value,
    pub warnings: Vec<String>,
    pub table: Table,
    /// Extra files (path, contents) written next to the report.
    pub extra_files: Vec<(PathBuf, String)>,
}

pub(crate) struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| Error::Data(e.to_string());
        w.write_record(&self.header).map_err(err)?;
        for r in &self.rows {
            w.write_record(r).map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}

pub(crate) fn num(v: f64) -> String {
    format!("{v:?}")
}

pub(crate) fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::Data(e.to_string()))
}

fn from_value<T: DeserializeOwned>(v: Value) -> Result<T> {
    serde_json::from_value(v).map_err(|e| Error::Data(format!("manifest config: {e}")))
}

/// Maps column names to indices; the intercept is addressed as `intercept`.
pub(crate) fn resolve_columns(ds: &Dataset, names: &[String]) -> Result<Support> {
    let mut out = Vec::with_capacity(names.len());
    for name in names {
        match ds.names().iter().position(|n| n == name) {
            Some(j) => out.push(j),
            None => return Err(Error::Argument(format!("unknown column `{name}`"))),
        }
    }
    Ok(Support::new(out))
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Argument(_) | Error::Domain(_) | Error::Budget { .. } => EXIT_USAGE,
        _ => EXIT_RUNTIME,
    }
}

/// Resolved command ready to run.
enum Job {
    Fit(FitConfig),
    Mc(crate::sim::McConfig, Option<PathBuf>),
    Diagnose(DiagnoseConfig),
    Penalty(PenaltyConfig),
}

impl Job {
    fn name(&self) -> &'static str {
        match self {
            Job::Fit(_) => "fit",
            Job::Mc(..) => "mc",
            Job::Diagnose(_) => "diagnose",
            Job::Penalty(_) => "penalty",
        }
    }

    fn seed(&self) -> u64 {
        match self {
            Job::Fit(c) => c.seed,
            Job::Mc(c, _) => c.seed,
            Job::Diagnose(c) => c.seed,
            Job::Penalty(c) => c.seed,
        }
    }

    fn config(&self) -> Result<Value> {
        match self {
            Job::Fit(c) => to_value(c),
            Job::Mc(c, _) => to_value(c),
            Job::Diagnose(c) => to_value(c),
            Job::Penalty(c) => to_value(c),
        }
    }

    fn run(&self) -> Result<Outcome> {
        match self {
            Job::Fit(c) => fit::run(c),
            Job::Mc(c, dir) => mc::run(c, dir.as_deref()),
            Job::Diagnose(c) => diagnose::run(c),
            Job::Penalty(c) => penalty::run(c),
        }
    }

    fn from_manifest(path: &Path) -> Result<Job> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
        let report = Report::from_json(&text)?;
        let cfg = report.manifest.config;
        match report.manifest.command.as_str() {
            "fit" => Ok(Job::Fit(from_value(cfg)?)),
            "mc" => Ok(Job::Mc(from_value(cfg)?, None)),
            "diagnose" => Ok(Job::Diagnose(from_value(cfg)?)),
            "penalty" => Ok(Job::Penalty(from_value(cfg)?)),
            other => Err(Error::Data(format!(
                "unknown command `{other}` in manifest"
            ))),
        }
    }
}

fn resolve(cli: &Cli) -> Result<Job> {
    let seed = cli.seed;
    match &cli.command {
        Command::Fit(a) => Ok(Job::Fit(a.resolve(seed.unwrap_or(0)))),
        Command::Mc(a) => Ok(Job::Mc(a.resolve(seed)?, a.histograms.clone())),
        Command::Diagnose(a) => Ok(Job::Diagnose(a.resolve(seed.unwrap_or(0)))),
        Command::Penalty(a) => Ok(Job::Penalty(a.resolve(seed.unwrap_or(0)))),
        Command::Replay { report } => Job::from_manifest(report),
    }
}

fn execute(cli: &Cli) -> Result<(String, Vec<String>)> {
    let job = resolve(cli)?;
    let started = unix_ms();
    let outcome = match cli.threads {
        Some(0) => return Err(Error::Argument("--threads must be >= 1".into())),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::Argument(format!("cannot start {t} threads: {e}")))?
            .install(|| job.run())?,
        None => job.run()?,
    };
    for (path, contents) in &outcome.extra_files {
        std::fs::write(path, contents)?;
    }
    let text = match cli.format {
        Format::Csv => outcome.table.to_csv()?,
        Format::Json => {
            let mut manifest = RunManifest::new(job.name(), job.config()?, job.seed(), started);
            manifest.timestamps.finished_unix_ms = unix_ms();
            let mut t =
                Report::new(manifest, outcome.result, outcome.warnings.clone()).to_json()?;
            t.push('\n');
            t
        }
    };
    Ok((text, outcome.warnings))
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = sink.write_all(text.as_bytes());
            return code;
        }
    };
    match execute(&cli) {
        Ok((text, warnings)) => {
            for w in &warnings {
                let _ = writeln!(stderr, "warning: {w}");
            }
            let written = match &cli.output {
                Some(path) => std::fs::write(path, text).map_err(Error::from),
                None => stdout.write_all(text.as_bytes()).map_err(Error::from),
            };
            match written {
                Ok(()) => EXIT_OK,
                Err(e) => {
                    let _ = writeln!(stderr, "error: {e}");
                    EXIT_RUNTIME
                }
            }
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}
