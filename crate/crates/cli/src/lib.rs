//! Command-line harness: resolves an experiment configuration from a
//! preset, a TOML file and flags, runs it and emits one JSON record.
//!
//! Exit codes: 0 pass, 1 internal error, 2 failed check, 3 no convergence,
//! 4 configuration error. Every non-zero exit prints a JSON error record.

pub mod commands;
pub mod config;
pub mod presets;
pub mod report;
pub mod study;

use std::ffi::OsString;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use roughfrob::calculus::write_grid_file;
use roughfrob::{Error, Result};
use serde_json::{json, Value};

use crate::commands::{execute, val, Artifact};
use crate::config::{Command, ExperimentConfig, SignalEntry};
use crate::report::{error_record, plain_error, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_INTERNAL, EXIT_OK};

#[derive(Debug, Parser)]
#[command(name = "roughfrob", version, about = "Young integration, g-jet checks and rough Pfaff solvers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Young integral of f against g along a segment.
    Integrate(Flags),
    /// Boundary integral over a rectangle, with the integration by parts residual.
    Boundary(Flags),
    /// Dyadic jet test of V(g); optionally integrate the jet.
    CheckJet(Flags),
    /// Wedge-null test for every pair of components of g.
    CheckWedge(Flags),
    /// Involutivity conditions of a diagonal Pfaff system.
    CheckInvolutivity(Flags),
    /// Corrector for a non-jet (v, g) pair.
    Corrector(Flags),
    /// Young differential equation on an interval.
    SolveYde(Flags),
    /// Rough Pfaff system, diagonal or wedge-null.
    SolvePfaff(Flags),
    /// Implicit function F(g, y) = F(g(x0), y0).
    SolveImplicit(Flags),
    /// Sample a signal on a grid and write it as a grid file.
    GenSignal(Flags),
    /// Convergence study over levels or mollifier widths.
    Converge(Flags),
}

impl Sub {
    pub fn split(self) -> (Command, Flags) {
        match self {
            Sub::Integrate(f) => (Command::Integrate, f),
            Sub::Boundary(f) => (Command::Boundary, f),
            Sub::CheckJet(f) => (Command::CheckJet, f),
            Sub::CheckWedge(f) => (Command::CheckWedge, f),
            Sub::CheckInvolutivity(f) => (Command::CheckInvolutivity, f),
            Sub::Corrector(f) => (Command::Corrector, f),
            Sub::SolveYde(f) => (Command::SolveYde, f),
            Sub::SolvePfaff(f) => (Command::SolvePfaff, f),
            Sub::SolveImplicit(f) => (Command::SolveImplicit, f),
            Sub::GenSignal(f) => (Command::GenSignal, f),
            Sub::Converge(f) => (Command::Converge, f),
        }
    }
}

/// Flags override the preset and the config file, in that order.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// TOML experiment file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Built-in configuration, e.g. exp2d.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub level: Option<u32>,
    #[arg(long, allow_hyphen_values = true)]
    pub tol: Option<f64>,
    /// Added to every signal seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory for result.json and grid files.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long = "f")]
    pub f: Option<String>,
    #[arg(long = "g")]
    pub g: Option<String>,
    #[arg(long = "y")]
    pub y: Option<String>,
    #[arg(long = "u")]
    pub u: Option<String>,
    /// Named driver, or the candidate V of check-jet.
    #[arg(long, visible_alias = "v")]
    pub driver: Option<String>,
    /// diagonal or wedge-null.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub p0: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub theta0: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub y0: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub axis_order: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub levels: Option<Vec<u32>>,
    /// Study kind for converge: young, germ, pfaff, yde or mollify.
    #[arg(long)]
    pub study: Option<String>,
    #[arg(long)]
    pub depth: Option<u32>,
    #[arg(long)]
    pub sub_level: Option<u32>,
    #[arg(long)]
    pub max_iter: Option<usize>,
}

/// Overlays `top` onto `base`, merging nested tables.
fn merge(base: &mut toml::Table, top: toml::Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn parse_table(text: &str, origin: &str) -> Result<toml::Table> {
    text.parse::<toml::Table>()
        .map_err(|e| Error::Config(format!("{origin}: {}", e.message())))
}

pub fn resolve(cmd: Command, flags: &Flags) -> Result<ExperimentConfig> {
    let mut table = toml::Table::new();
    let file = match &flags.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
            Some(parse_table(&text, &path.display().to_string())?)
        }
        None => None,
    };
    let preset = flags
        .preset
        .clone()
        .or_else(|| file.as_ref().and_then(|t| t.get("preset")).and_then(|v| v.as_str()).map(String::from));
    if let Some(name) = &preset {
        table = parse_table(presets::source(name)?, name)?;
    }
    if let Some(f) = file {
        merge(&mut table, f);
    }
    let mut cfg: ExperimentConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(format!("config: {}", e.message())))?;
    if let Some(c) = cfg.command {
        if c != cmd {
            return Err(Error::Config(format!(
                "the configuration is for {}, not {}",
                c.name(),
                cmd.name()
            )));
        }
    }
    cfg.command = Some(cmd);
    cfg.preset = preset;
    apply_flags(&mut cfg, flags);
    Ok(cfg)
}

fn apply_flags(cfg: &mut ExperimentConfig, fl: &Flags) {
    fn set<T: Clone>(dst: &mut Option<T>, src: &Option<T>) {
        if src.is_some() {
            *dst = src.clone();
        }
    }
    let n = &mut cfg.numeric;
    set(&mut n.level, &fl.level);
    set(&mut n.tol, &fl.tol);
    set(&mut n.depth, &fl.depth);
    set(&mut n.sub_level, &fl.sub_level);
    set(&mut n.max_iter, &fl.max_iter);
    set(&mut cfg.seed, &fl.seed);
    set(&mut cfg.output.dir, &fl.out);
    let s = &mut cfg.signals;
    for (dst, src) in [(&mut s.f, &fl.f), (&mut s.g, &fl.g), (&mut s.y, &fl.y), (&mut s.u, &fl.u)] {
        if let Some(name) = src {
            *dst = Some(SignalEntry::Name(name.clone()));
        }
    }
    let p = &mut cfg.problem;
    set(&mut p.driver, &fl.driver);
    set(&mut p.mode, &fl.mode);
    set(&mut p.a, &fl.a);
    set(&mut p.b, &fl.b);
    set(&mut p.p0, &fl.p0);
    set(&mut p.theta0, &fl.theta0);
    set(&mut p.x0, &fl.x0);
    set(&mut p.y0, &fl.y0);
    set(&mut p.axis_order, &fl.axis_order);
    set(&mut cfg.study.kind, &fl.study);
    if let Some(l) = &fl.levels {
        cfg.study.levels = l.clone();
    }
}

/// Result of one invocation: the exit code and the JSON record printed on
/// stdout.
pub struct Run {
    pub code: i32,
    pub record: Value,
}

fn timing(started: SystemTime, clock: Instant) -> Value {
    let unix_ms = started.duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64);
    json!({ "started_unix_ms": unix_ms, "elapsed_ms": clock.elapsed().as_secs_f64() * 1e3 })
}

fn write_outputs(dir: &Path, artifacts: &[Artifact], record: &Value) -> Result<()> {
    fs::create_dir_all(dir)?;
    for a in artifacts {
        match a {
            Artifact::Grid { name, field } => write_grid_file(field, dir.join(name))?,
            Artifact::Csv { name, text } => fs::write(dir.join(name), text)?,
        }
    }
    let name = if record["status"] == "error" { "error.json" } else { "result.json" };
    fs::write(dir.join(name), serde_json::to_string_pretty(record).expect("JSON values serialise"))?;
    Ok(())
}

fn failed(e: &Error, cmd: Command, out: Option<&Path>, started: SystemTime, clock: Instant) -> Run {
    let mut record = error_record(e, Some(cmd.name()));
    record["timing"] = timing(started, clock);
    if let Some(dir) = out {
        // Reporting continues on stdout if the directory is unusable.
        let _ = write_outputs(dir, &[], &record);
    }
    Run { code: record["exit_code"].as_i64().unwrap_or(EXIT_CONFIG as i64) as i32, record }
}

/// Runs one subcommand in process.
pub fn run(cmd: Command, flags: &Flags) -> Run {
    let (started, clock) = (SystemTime::now(), Instant::now());
    let cfg = match resolve(cmd, flags) {
        Ok(c) => c,
        Err(e) => return failed(&e, cmd, flags.out.as_deref(), started, clock),
    };
    let out = cfg.output.dir.clone();
    let outcome = match execute(&cfg) {
        Ok(o) => o,
        Err(e) => return failed(&e, cmd, out.as_deref(), started, clock),
    };
    let code = if outcome.pass { EXIT_OK } else { EXIT_CHECK_FAILED };
    let files: Vec<&str> = match &out {
        Some(_) => outcome
            .artifacts
            .iter()
            .map(|a| match a {
                Artifact::Grid { name, .. } | Artifact::Csv { name, .. } => name.as_str(),
            })
            .collect(),
        None => Vec::new(),
    };
    let mut record = json!({
        "status": if outcome.pass { "pass" } else { "fail" },
        "exit_code": code,
        "command": cmd.name(),
        "preset": cfg.preset,
        "config": val(&cfg),
        "result": outcome.result,
        "artifacts": files,
    });
    record["timing"] = timing(started, clock);
    if let Some(dir) = &out {
        if let Err(e) = write_outputs(dir, &outcome.artifacts, &record) {
            return failed(&e, cmd, None, started, clock);
        }
    }
    Run { code, record }
}

/// Caps the global thread pool from `ROUGHFROB_THREADS`.
pub fn init_threads() -> std::result::Result<(), String> {
    let Ok(s) = std::env::var("ROUGHFROB_THREADS") else { return Ok(()) };
    let n = s
        .trim()
        .parse::<usize>()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("ROUGHFROB_THREADS must be a positive integer, got {s:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn emit(run: &Run) {
    println!("{}", serde_json::to_string_pretty(&run.record).expect("JSON values serialise"));
    if run.record["status"] == "error" {
        eprintln!("roughfrob: {}", run.record["error"]["message"].as_str().unwrap_or("error"));
    }
}

/// Entry point of the binary: parses, runs and prints; returns the exit code.
pub fn main_with_args<I: IntoIterator<Item = OsString>>(args: I) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return EXIT_OK;
            }
            let _ = e.print();
            let record = plain_error("usage", &e.kind().to_string(), EXIT_CONFIG, None);
            println!("{}", serde_json::to_string_pretty(&record).expect("JSON values serialise"));
            return EXIT_CONFIG;
        }
    };
    let (cmd, flags) = cli.command.split();
    if let Err(msg) = init_threads() {
        let run = Run { code: EXIT_CONFIG, record: plain_error("config", &msg, EXIT_CONFIG, Some(cmd.name())) };
        emit(&run);
        return run.code;
    }
    let run = panic::catch_unwind(AssertUnwindSafe(|| run(cmd, &flags))).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| p.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "panic".into());
        Run { code: EXIT_INTERNAL, record: plain_error("internal", &msg, EXIT_INTERNAL, Some(cmd.name())) }
    });
    emit(&run);
    run.code
}
