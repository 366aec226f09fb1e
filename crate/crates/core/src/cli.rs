//! Command-line front end.
//!
//! Exit status: 0 on success or a passing audit, 1 on a failing audit or a
//! search refused by its size guard, 2 on usage, file or validation errors.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::audit::{audit_trace, detect_perfect_correlations, locality_audit, no_signaling_check, AuditError};
use crate::correlations::CorrelationSpec;
use crate::hilbert::{outcome_tuples, Outcome};
use crate::hv_search::{
    enumerate_divergent_worlds_with, enumerate_single_world, many_worlds_witness, SearchError, SearchReport, WorldRule,
};
use crate::spacetime::{rest_frame_cascade, Event, WorldLine};
use crate::worlds::{run_scenario, Scenario, TraceLog};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "LOCALWORLDS_OUT";

#[derive(Debug, Parser)]
#[command(name = "localworlds", version, about = "Hidden-variable searches, local-worlds simulation and locality audits")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario; write its trace and statistics.
    Run(RunArgs),
    /// Search hidden-variable tables for a correlation spec.
    HvSearch(SearchArgs),
    /// Audit a trace for locality.
    Audit(AuditArgs),
    /// Compare a local party's partitions across two scenarios.
    NoSignaling(NoSignalingArgs),
    /// Print the frame-relative branching cascade.
    DemoCascade(CascadeArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Ensemble size (overrides the scenario).
    #[arg(long)]
    pub n: Option<usize>,
    /// Seed (overrides the scenario).
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, env = OUT_DIR_ENV, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    SingleWorld,
    /// World count; `None` takes it from the anchor constraint.
    Divergent(Option<usize>),
    Multivalued,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    match s {
        "single-world" => Ok(Mode::SingleWorld),
        "divergent" => Ok(Mode::Divergent(None)),
        "multivalued" => Ok(Mode::Multivalued),
        _ => match s.strip_prefix("divergent-").map(str::parse::<usize>) {
            Some(Ok(k)) => Ok(Mode::Divergent(Some(k))),
            _ => Err(format!("unknown mode {s:?}; use single-world, divergent, divergent-K or multivalued")),
        },
    }
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long, value_parser = parse_mode, default_value = "single-world")]
    pub mode: Mode,
    /// World-matching rule for divergent mode: anchor or independent.
    #[arg(long, default_value = "anchor")]
    pub rule: String,
    /// Also write the report as JSON into this directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    /// Trace file (JSON lines).
    pub trace: PathBuf,
    /// Scenario to audit against; defaults to the one embedded in the trace.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct NoSignalingArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub other: PathBuf,
    /// Local parties to compare (repeatable).
    #[arg(long = "local", required = true)]
    pub local: Vec<String>,
    #[arg(long)]
    pub n: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CascadeArgs {
    /// Velocity of the second object relative to the first.
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub v: f64,
    #[arg(long, default_value_t = 6)]
    pub depth: usize,
    /// Initial separation of the two objects.
    #[arg(long, default_value_t = 1.0)]
    pub separation: f64,
    /// Stop once induced times fall below this.
    #[arg(long, default_value_t = -1e6, allow_negative_numbers = true)]
    pub floor: f64,
}

/// Parses `args` (program name first) and runs the command.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(cli, out, err),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
            } else {
                let _ = write!(out, "{text}");
            }
            code
        }
    }
}

pub fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = match cli.command {
        Command::Run(a) => cmd_run(&a, out),
        Command::HvSearch(a) => cmd_hv_search(&a, out),
        Command::Audit(a) => cmd_audit(&a, out),
        Command::NoSignaling(a) => cmd_no_signaling(&a, out),
        Command::DemoCascade(a) => cmd_demo_cascade(&a, out),
    };
    match result {
        Ok(code) => code,
        Err((code, message)) => {
            let _ = writeln!(err, "error: {message}");
            code
        }
    }
}

type CmdResult = Result<i32, (i32, String)>;

fn usage<E: std::fmt::Display>(e: E) -> (i32, String) {
    (EXIT_USAGE, e.to_string())
}

fn read(path: &Path) -> Result<String, (i32, String)> {
    fs::read_to_string(path).map_err(|e| (EXIT_USAGE, format!("cannot read {}: {e}", path.display())))
}

fn load_scenario(path: &Path) -> Result<Scenario, (i32, String)> {
    let s = Scenario::from_toml(&read(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    s.validate().map_err(|e| usage(format!("{}: {e}", path.display())))?;
    Ok(s)
}

fn write_file(path: &Path, text: &str) -> Result<(), (i32, String)> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| usage(format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| usage(format!("cannot write {}: {e}", path.display())))
}

pub fn cmd_run(a: &RunArgs, out: &mut dyn Write) -> CmdResult {
    let mut scenario = load_scenario(&a.scenario)?;
    if let Some(n) = a.n {
        scenario.n = n;
    }
    if let Some(seed) = a.seed {
        scenario.seed = seed;
    }
    let run = run_scenario(&scenario).map_err(usage)?;
    let trace_path = a.out.join(format!("{}.trace.jsonl", scenario.name));
    let stats_path = a.out.join(format!("{}.stats.csv", scenario.name));
    write_file(&trace_path, &run.trace.to_jsonl())?;
    write_file(&stats_path, &run.stats.to_csv())?;
    let _ = writeln!(out, "scenario {} (N = {}, seed = {})", scenario.name, scenario.n, scenario.seed);
    let _ = write!(out, "{}", run.stats);
    let _ = writeln!(out, "trace: {}", trace_path.display());
    let _ = writeln!(out, "statistics: {}", stats_path.display());
    Ok(EXIT_OK)
}

fn anchor_worlds(spec: &CorrelationSpec) -> usize {
    spec.constraints
        .first()
        .map(|c| outcome_tuples(spec.parties.len()).filter(|t| Outcome::product(t.iter().copied()) == c.product).count())
        .unwrap_or(1)
}

pub fn cmd_hv_search(a: &SearchArgs, out: &mut dyn Write) -> CmdResult {
    let spec = CorrelationSpec::from_toml(&read(&a.spec)?).map_err(|e| usage(format!("{}: {e}", a.spec.display())))?;
    let result: Result<SearchReport, SearchError> = match a.mode {
        Mode::SingleWorld => enumerate_single_world(&spec),
        Mode::Divergent(k) => {
            let worlds = k.unwrap_or_else(|| anchor_worlds(&spec));
            let rule = match a.rule.as_str() {
                "anchor" if worlds > 1 => WorldRule::Anchor(0),
                "anchor" | "independent" => WorldRule::Independent,
                other => return Err(usage(format!("unknown world rule {other:?}; use anchor or independent"))),
            };
            enumerate_divergent_worlds_with(&spec, worlds, rule)
        }
        Mode::Multivalued => many_worlds_witness(&spec),
    };
    let report = match result {
        Ok(r) => r,
        Err(e @ SearchError::SizeGuard { .. }) => return Err((EXIT_FAIL, e.to_string())),
        Err(e) => return Err(usage(e)),
    };
    let _ = write!(out, "{report}");
    if let Some(dir) = &a.out {
        let stem = a.spec.file_stem().and_then(|s| s.to_str()).unwrap_or("spec");
        let path = dir.join(format!("{stem}.{}.json", report.mode));
        write_file(&path, &serde_json::to_string_pretty(&report).expect("report serializes"))?;
        let _ = writeln!(out, "report: {}", path.display());
    }
    Ok(EXIT_OK)
}

pub fn cmd_audit(a: &AuditArgs, out: &mut dyn Write) -> CmdResult {
    let text = read(&a.trace)?;
    let trace = TraceLog::from_jsonl(&text).map_err(|e| (EXIT_FAIL, format!("trace integrity: {e}")))?;
    let (report, scenario) = match &a.scenario {
        Some(path) => {
            let s = load_scenario(path)?;
            (locality_audit(&trace, &s), s)
        }
        None => (audit_trace(&trace), trace.header.definition.clone()),
    };
    let report = match report {
        Ok(r) => r,
        Err(e @ (AuditError::Integrity(_) | AuditError::Trace(_))) => return Err((EXIT_FAIL, e.to_string())),
        Err(e) => return Err(usage(e)),
    };
    let _ = write!(out, "{report}");
    if report.pass {
        let found = detect_perfect_correlations(&trace, &scenario);
        if found.is_empty() {
            let _ = writeln!(out, "perfect correlations: none found");
        }
        for c in found {
            let _ = writeln!(out, "perfect correlation: {c}");
        }
    }
    Ok(if report.pass { EXIT_OK } else { EXIT_FAIL })
}

pub fn cmd_no_signaling(a: &NoSignalingArgs, out: &mut dyn Write) -> CmdResult {
    let mut first = load_scenario(&a.scenario)?;
    let mut second = load_scenario(&a.other)?;
    if let Some(n) = a.n {
        first.n = n;
        second.n = n;
    }
    // names are labels, not part of the physics
    second.name = first.name.clone();
    let local: Vec<&str> = a.local.iter().map(String::as_str).collect();
    match no_signaling_check(&first, &second, &local) {
        Ok(report) => {
            let _ = write!(out, "{report}");
            Ok(if report.pass { EXIT_OK } else { EXIT_FAIL })
        }
        Err(e) => Err(usage(e)),
    }
}

pub fn cmd_demo_cascade(a: &CascadeArgs, out: &mut dyn Write) -> CmdResult {
    let line1 = WorldLine::new(0.0, 0.0).map_err(usage)?;
    let line2 = WorldLine::new(a.separation, a.v).map_err(usage)?;
    let cascade = rest_frame_cascade(line1, line2, &Event::new("E1", 0.0, 0.0), a.depth, a.floor).map_err(usage)?;
    let _ = writeln!(out, "object 1 at rest at x = 0 (frame S); object 2 at x = {} + {} t (frame S')", a.separation, a.v);
    let _ = write!(out, "{cascade}");
    Ok(EXIT_OK)
}
