//! `rk` — command-line driver for the reactive kernel.
//!
//! Programs are run instant by instant against an input script (one line of
//! comma-separated signal names per instant); the trace of interface inputs
//! and outputs is printed one line per instant. The `check` subcommands run
//! the determinism, reactivity, and equivalence analyses; `trace-diff`
//! compares two programs on the same inputs; `corpus` lists and runs the
//! bundled example programs.
//!
//! Exit codes. `run`, `trace-diff`, and `corpus run` use 0 for a completed
//! run, 10 for a parse error (program or input script), 11 for fuel
//! exhaustion, 12 for an internal invariant failure, and 2 for anything else
//! (unreadable files, bad replay logs). The `check` subcommands use 0 for a
//! passing verdict, 1 for a negative verdict, and 2 for any tool error.
//! `trace-diff` also exits 1 when the traces differ.

use clap::{Args, Parser, Subcommand, ValueEnum};
use rk_core::{
    bounded_traces, check_determinism, check_equivalence, dynamic_reactivity_probe, load_source,
    parse, static_reactivity_check, AnalysisError, DeterminismDivergence, DynamicVerdict,
    EquivalenceConfig, EvalError, InputStrategy, Interface, IoRecord, Loaded, Machine,
    ReactivityReport, Scheduler, SignalName, StaticVerdict, DEFAULT_FUEL,
};
use serde_json::json;
use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

const EXIT_VERDICT: i32 = 1;
const EXIT_TOOL: i32 = 2;
const EXIT_PARSE: i32 = 10;
const EXIT_FUEL: i32 = 11;
const EXIT_INTERNAL: i32 = 12;

/// Print a line to stdout, exiting quietly when the reader has gone away
/// (`rk corpus list | head` must not panic on the broken pipe).
fn out(line: std::fmt::Arguments<'_>) {
    use std::io::Write;
    let mut stdout = std::io::stdout().lock();
    if writeln!(stdout, "{line}").is_err() {
        std::process::exit(0);
    }
}

macro_rules! say {
    ($($arg:tt)*) => { out(format_args!($($arg)*)) };
}

#[derive(Parser)]
#[command(
    name = "rk",
    version,
    about = "Run and analyze reactive synchronous programs"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a program against an input script and print its io trace
    Run(RunArgs),
    /// Check a program property: determinism, reactivity, or equivalence
    #[command(subcommand)]
    Check(CheckCmd),
    /// Run two programs on the same inputs and compare traces instant by instant
    TraceDiff(TraceDiffArgs),
    /// List or run the bundled example programs
    #[command(subcommand)]
    Corpus(CorpusCmd),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SchedPolicy {
    /// Round-robin over ready occurrences
    Rr,
    /// Seeded random pick among ready occurrences
    Rand,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    /// Human-readable lines
    Text,
    /// A single structured document with the same verdicts
    #[value(alias = "structured", alias = "json-like-structured")]
    Json,
}

#[derive(Args)]
struct RunArgs {
    /// Program file
    program: PathBuf,
    /// Input script file, or the word `exhaustive` to print every reachable
    /// bounded trace instead of running one
    #[arg(long)]
    inputs: Option<String>,
    /// Instants to run: pads the script with empty sets or truncates it
    /// (default: the script length, or 4 without a script)
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    instants: Option<u64>,
    /// Rule applications allowed per instant
    #[arg(long, default_value_t = DEFAULT_FUEL, value_parser = clap::value_parser!(u64).range(1..))]
    fuel: u64,
    /// Scheduling policy
    #[arg(long, value_enum, default_value = "rr")]
    sched: SchedPolicy,
    /// Seed for the rand policy
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Replay a recorded schedule log instead of picking
    #[arg(long)]
    replay: Option<PathBuf>,
    /// Record the schedule picks to a file, replayable with --replay
    #[arg(long)]
    record: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Subcommand)]
enum CheckCmd {
    /// Same outputs and same final state under a panel of schedules
    Determinism(DeterminismArgs),
    /// Static same-instant recursion analysis plus a dynamic divergence probe
    Reactivity(ReactivityArgs),
    /// Bounded trace sets and bisimulation, which must agree
    Equivalence(EquivalenceArgs),
}

#[derive(Args)]
struct DeterminismArgs {
    program: PathBuf,
    /// Random schedules to try on top of the shifted round-robins
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    /// Instants to drive each schedule for
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    instants: Option<u64>,
    /// Input script (default: alternate empty and full interface)
    #[arg(long)]
    inputs: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_FUEL, value_parser = clap::value_parser!(u64).range(1..))]
    fuel: u64,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Args)]
struct ReactivityArgs {
    program: PathBuf,
    /// Instants each probed path runs for (default 4; with an input script,
    /// its length)
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    instants: Option<u64>,
    /// Input script file, or `exhaustive` to force trying every input
    /// sequence (default: exhaustive when small, sampled otherwise)
    #[arg(long)]
    inputs: Option<String>,
    #[arg(long, default_value_t = DEFAULT_FUEL, value_parser = clap::value_parser!(u64).range(1..))]
    fuel: u64,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Args)]
struct EquivalenceArgs {
    left: PathBuf,
    right: PathBuf,
    /// Instants to explore
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..))]
    depth: u64,
    #[arg(long, default_value_t = DEFAULT_FUEL, value_parser = clap::value_parser!(u64).range(1..))]
    fuel: u64,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Args)]
struct TraceDiffArgs {
    left: PathBuf,
    right: PathBuf,
    /// Input script applied to both programs
    #[arg(long)]
    inputs: Option<PathBuf>,
    /// Instants to run (default: the script length, or 4 without a script)
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    instants: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_FUEL, value_parser = clap::value_parser!(u64).range(1..))]
    fuel: u64,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Subcommand)]
enum CorpusCmd {
    /// List the bundled examples
    List {
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Run one bundled example on its companion input script
    Run {
        name: String,
        /// Instants to run (default: the companion script's length)
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        instants: Option<u64>,
        #[arg(long, default_value_t = DEFAULT_FUEL, value_parser = clap::value_parser!(u64).range(1..))]
        fuel: u64,
        #[arg(long, value_enum, default_value = "rr")]
        sched: SchedPolicy,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
}

struct CorpusEntry {
    name: &'static str,
    description: &'static str,
    source: &'static str,
    inputs: &'static str,
}

const CORPUS: &[CorpusEntry] = &[
    CorpusEntry {
        name: "await",
        description: "wait for a request, acknowledge it in the same instant",
        source: include_str!("../../../corpus/await.rk"),
        inputs: include_str!("../../../corpus/await.inputs"),
    },
    CorpusEntry {
        name: "pause",
        description: "emit, stop for one instant, emit again",
        source: include_str!("../../../corpus/pause.rk"),
        inputs: include_str!("../../../corpus/pause.inputs"),
    },
    CorpusEntry {
        name: "now",
        description: "a one-instant window: a late signal misses it",
        source: include_str!("../../../corpus/now.rk"),
        inputs: include_str!("../../../corpus/now.inputs"),
    },
    CorpusEntry {
        name: "loop",
        description: "react to every tick with a tock, one instant apart",
        source: include_str!("../../../corpus/loop.rk"),
        inputs: include_str!("../../../corpus/loop.inputs"),
    },
    CorpusEntry {
        name: "exit_trap",
        description: "cancel the rest of a block from inside, keeping the instant's emissions",
        source: include_str!("../../../corpus/exit_trap.rk"),
        inputs: include_str!("../../../corpus/exit_trap.inputs"),
    },
    CorpusEntry {
        name: "present",
        description: "branch on presence; the absent branch lands one instant later",
        source: include_str!("../../../corpus/present.rk"),
        inputs: include_str!("../../../corpus/present.inputs"),
    },
    CorpusEntry {
        name: "yield",
        description: "hand the turn to sibling threads and resume in the same instant",
        source: include_str!("../../../corpus/yield.rk"),
        inputs: include_str!("../../../corpus/yield.inputs"),
    },
    CorpusEntry {
        name: "nonreactive",
        description: "awaiting recursion: feeding s makes instant 1 diverge",
        source: include_str!("../../../corpus/nonreactive.rk"),
        inputs: include_str!("../../../corpus/nonreactive.inputs"),
    },
    CorpusEntry {
        name: "watch_growth",
        description: "a preemption shell stacked per instant, nesting without bound",
        source: include_str!("../../../corpus/watch_growth.rk"),
        inputs: include_str!("../../../corpus/watch_growth.inputs"),
    },
    CorpusEntry {
        name: "ca_rule90",
        description: "32-cell exclusive-or automaton, one thread per cell, one generation per instant",
        source: include_str!("../../../corpus/ca_rule90.rk"),
        inputs: include_str!("../../../corpus/ca_rule90.inputs"),
    },
];

fn main() {
    let cli = Cli::parse();
    let code = match dispatch(cli) {
        Ok(code) => code,
        Err(failure) => {
            eprintln!("rk: {}", failure.message);
            failure.code
        }
    };
    std::process::exit(code);
}

fn dispatch(cli: Cli) -> Result<i32, Failure> {
    match cli.cmd {
        Cmd::Run(args) => cmd_run(args),
        Cmd::Check(CheckCmd::Determinism(args)) => cmd_check_determinism(args),
        Cmd::Check(CheckCmd::Reactivity(args)) => cmd_check_reactivity(args),
        Cmd::Check(CheckCmd::Equivalence(args)) => cmd_check_equivalence(args),
        Cmd::TraceDiff(args) => cmd_trace_diff(args),
        Cmd::Corpus(CorpusCmd::List { format }) => cmd_corpus_list(format),
        Cmd::Corpus(CorpusCmd::Run {
            name,
            instants,
            fuel,
            sched,
            seed,
            format,
        }) => cmd_corpus_run(&name, instants, fuel, sched, seed, format),
    }
}

/// A diagnostic plus the exit code it deserves.
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn tool(message: impl Into<String>) -> Failure {
        Failure {
            code: EXIT_TOOL,
            message: message.into(),
        }
    }

    fn parse(message: impl Into<String>) -> Failure {
        Failure {
            code: EXIT_PARSE,
            message: message.into(),
        }
    }
}

fn eval_failure(err: EvalError) -> Failure {
    let code = match &err {
        EvalError::FuelExhausted { .. } => EXIT_FUEL,
        EvalError::ReplayDivergence { .. } => EXIT_TOOL,
        _ => EXIT_INTERNAL,
    };
    Failure {
        code,
        message: err.to_string(),
    }
}

/// Error mapping for analyses invoked from run-flavoured commands, where a
/// fuel failure must keep its dedicated exit code.
fn run_analysis_failure(err: AnalysisError) -> Failure {
    match err {
        AnalysisError::Eval(e) => eval_failure(e),
        other => Failure::tool(other.to_string()),
    }
}

fn read_file(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| Failure::tool(format!("cannot read {}: {e}", path.display())))
}

fn load_program(path: &Path, parse_code: i32) -> Result<Loaded, Failure> {
    let src = read_file(path)?;
    load_source(&src).map_err(|e| Failure {
        code: parse_code,
        message: e.render(&path.display().to_string()),
    })
}

fn displays(set: &BTreeSet<SignalName>) -> Vec<String> {
    let mut v: Vec<String> = set.iter().map(|s| s.display().to_string()).collect();
    v.sort();
    v
}

fn braced(names: &[String]) -> String {
    format!("{{{}}}", names.join(","))
}

fn fmt_input_seq(seq: &[BTreeSet<SignalName>]) -> String {
    let parts: Vec<String> = seq.iter().map(|s| braced(&displays(s))).collect();
    format!("[{}]", parts.join(","))
}

fn fmt_display_seq(seq: &[BTreeSet<String>]) -> String {
    let parts: Vec<String> = seq
        .iter()
        .map(|s| braced(&s.iter().cloned().collect::<Vec<_>>()))
        .collect();
    format!("[{}]", parts.join(","))
}

fn print_json(value: serde_json::Value) {
    say!(
        "{}",
        serde_json::to_string_pretty(&value).expect("value rendering cannot fail")
    );
}

/// Parse an input script: one line per instant, comma-separated signal
/// names, an empty line for an empty input set. Lines starting with `#` are
/// comments, not instants.
fn parse_script(text: &str) -> Result<Vec<Vec<String>>, String> {
    let mut instants = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('#') {
            continue;
        }
        if line.is_empty() {
            instants.push(Vec::new());
            continue;
        }
        let mut names = Vec::new();
        for part in line.split(',') {
            let name = part.trim();
            if name.is_empty() {
                return Err(format!("line {}: empty signal name", lineno + 1));
            }
            names.push(name.to_string());
        }
        instants.push(names);
    }
    Ok(instants)
}

fn resolve_script(
    rows: &[Vec<String>],
    interface: &Interface,
) -> Result<Vec<BTreeSet<SignalName>>, String> {
    rows.iter()
        .enumerate()
        .map(|(k, row)| {
            row.iter()
                .map(|name| {
                    interface.by_display(name).ok_or_else(|| {
                        format!("instant {}: signal {name} is not in the interface", k + 1)
                    })
                })
                .collect()
        })
        .collect()
}

fn script_from_text(
    text: &str,
    interface: &Interface,
    content_code: i32,
    origin: &str,
) -> Result<Vec<BTreeSet<SignalName>>, Failure> {
    let fail = |m: String| Failure {
        code: content_code,
        message: format!("{origin}: {m}"),
    };
    let rows = parse_script(text).map_err(fail)?;
    resolve_script(&rows, interface).map_err(fail)
}

fn load_script_file(
    path: &Path,
    interface: &Interface,
    content_code: i32,
) -> Result<Vec<BTreeSet<SignalName>>, Failure> {
    let text = read_file(path)?;
    script_from_text(&text, interface, content_code, &path.display().to_string())
}

/// Bring a script to its final length: `--instants` wins, then the script's
/// own length, then four instants. Padding is with empty input sets.
fn shape_script(
    mut script: Vec<BTreeSet<SignalName>>,
    instants: Option<u64>,
    had_script: bool,
) -> Vec<BTreeSet<SignalName>> {
    let target = match instants {
        Some(n) => n as usize,
        None if had_script => script.len(),
        None => 4,
    };
    script.resize(target, BTreeSet::new());
    script
}

fn build_scheduler(
    policy: SchedPolicy,
    seed: u64,
    replay: Option<&Path>,
) -> Result<Scheduler, Failure> {
    if let Some(path) = replay {
        let text = read_file(path)?;
        let mut picks = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let pick: u64 = line.parse().map_err(|_| {
                Failure::tool(format!(
                    "{}:{}: not an occurrence id: {line}",
                    path.display(),
                    lineno + 1
                ))
            })?;
            picks.push(pick);
        }
        return Ok(Scheduler::replay(picks));
    }
    Ok(match policy {
        SchedPolicy::Rr => Scheduler::round_robin(),
        SchedPolicy::Rand => Scheduler::seeded(seed),
    })
}

fn drive(
    loaded: Loaded,
    script: &[BTreeSet<SignalName>],
    sched: &mut Scheduler,
    fuel: u64,
) -> Result<Vec<IoRecord>, Failure> {
    let mut machine = Machine::new(loaded);
    let mut records = Vec::with_capacity(script.len());
    for inputs in script {
        records.push(machine.io_step(inputs, sched, fuel).map_err(eval_failure)?);
    }
    Ok(records)
}

fn records_json(records: &[IoRecord]) -> serde_json::Value {
    json!({
        "instants": records.len(),
        "trace": records
            .iter()
            .map(|rec| {
                json!({
                    "instant": rec.instant,
                    "in": displays(&rec.inputs),
                    "out": displays(&rec.outputs),
                    "fuel": rec.fuel_spent,
                    "picks": rec.schedule_log.iter().map(|e| e.occ.0).collect::<Vec<_>>(),
                })
            })
            .collect::<Vec<_>>(),
    })
}

fn print_records(records: &[IoRecord], format: Format) {
    match format {
        Format::Text => {
            for rec in records {
                say!("{}", rec.trace_line());
            }
        }
        Format::Json => print_json(records_json(records)),
    }
}

fn write_schedule_log(path: &Path, records: &[IoRecord]) -> Result<(), Failure> {
    let mut out = String::new();
    for rec in records {
        for entry in &rec.schedule_log {
            out.push_str(&entry.occ.to_string());
            out.push('\n');
        }
    }
    fs::write(path, out)
        .map_err(|e| Failure::tool(format!("cannot write {}: {e}", path.display())))
}

fn cmd_run(args: RunArgs) -> Result<i32, Failure> {
    let loaded = load_program(&args.program, EXIT_PARSE)?;
    if args.inputs.as_deref() == Some("exhaustive") {
        if args.record.is_some() || args.replay.is_some() {
            return Err(Failure::tool(
                "an exhaustive run enumerates traces; --record/--replay do not apply",
            ));
        }
        let cfg = EquivalenceConfig {
            depth: args.instants.unwrap_or(4),
            fuel: args.fuel,
            ..EquivalenceConfig::default()
        };
        let traces = bounded_traces(&loaded, &cfg).map_err(run_analysis_failure)?;
        match args.format {
            Format::Text => {
                for trace in &traces {
                    say!("{trace}");
                }
            }
            Format::Json => print_json(json!({
                "depth": cfg.depth,
                "traces": traces.iter().collect::<Vec<_>>(),
            })),
        }
        return Ok(0);
    }
    let script = match args.inputs.as_deref() {
        Some(path) => load_script_file(Path::new(path), &loaded.interface, EXIT_PARSE)?,
        None => Vec::new(),
    };
    let script = shape_script(script, args.instants, args.inputs.is_some());
    let mut sched = build_scheduler(args.sched, args.seed, args.replay.as_deref())?;
    let records = drive(loaded, &script, &mut sched, args.fuel)?;
    if let Some(path) = &args.record {
        write_schedule_log(path, &records)?;
    }
    print_records(&records, args.format);
    Ok(0)
}

fn cmd_check_determinism(args: DeterminismArgs) -> Result<i32, Failure> {
    let loaded = load_program(&args.program, EXIT_TOOL)?;
    let script = match &args.inputs {
        Some(path) => {
            let script = load_script_file(path, &loaded.interface, EXIT_TOOL)?;
            shape_script(script, args.instants, true)
        }
        None => {
            let full: BTreeSet<SignalName> = loaded.interface.names().iter().cloned().collect();
            (0..args.instants.unwrap_or(5))
                .map(|k| if k % 2 == 1 { full.clone() } else { BTreeSet::new() })
                .collect()
        }
    };
    let seeds: Vec<u64> = (0..args.seeds).collect();
    let report = check_determinism(&loaded, &script, &seeds, args.fuel)
        .map_err(|e| Failure::tool(e.to_string()))?;
    match args.format {
        Format::Text => match &report.divergence {
            None => say!(
                "determinism: PASS ({} schedules, {} instants)",
                report.schedules_tried, report.instants
            ),
            Some(DeterminismDivergence::Outputs {
                schedule,
                instant,
                expected,
                got,
            }) => say!(
                "determinism: FAIL (schedule {schedule}, instant {instant}): expected out={} got out={}",
                braced(&displays(expected)),
                braced(&displays(got))
            ),
            Some(DeterminismDivergence::FinalState { schedule }) => say!(
                "determinism: FAIL (schedule {schedule}): outputs agree but final states differ up to renaming"
            ),
        },
        Format::Json => {
            let divergence = match &report.divergence {
                None => serde_json::Value::Null,
                Some(DeterminismDivergence::Outputs {
                    schedule,
                    instant,
                    expected,
                    got,
                }) => json!({
                    "kind": "outputs",
                    "schedule": schedule,
                    "instant": instant,
                    "expected": displays(expected),
                    "got": displays(got),
                }),
                Some(DeterminismDivergence::FinalState { schedule }) => json!({
                    "kind": "final-state",
                    "schedule": schedule,
                }),
            };
            print_json(json!({
                "check": "determinism",
                "deterministic": report.deterministic,
                "schedules": report.schedules_tried,
                "instants": report.instants,
                "divergence": divergence,
            }));
        }
    }
    Ok(if report.deterministic { 0 } else { EXIT_VERDICT })
}

fn reactivity_text(static_verdict: &StaticVerdict, report: &ReactivityReport) {
    match static_verdict {
        StaticVerdict::Safe => say!("static: safe (no same-instant recursion)"),
        StaticVerdict::PotentiallyNonreactive { cycle } => say!(
            "static: potentially non-reactive (same-instant cycle: {})",
            cycle.join(" -> ")
        ),
    }
    match &report.verdict {
        DynamicVerdict::OkUpTo { instants, paths } => {
            say!("dynamic: ok up to {instants} instants ({paths} paths)");
        }
        DynamicVerdict::DivergedAt {
            instant,
            inputs,
            diagnosis,
        } => {
            say!(
                "dynamic: diverged_at({instant}) on inputs {}",
                fmt_input_seq(inputs)
            );
            say!("  {diagnosis}");
        }
    }
    if report.watch_depth_trend.len() > 1 {
        let n = report.watch_depth_trend.len();
        let max = report
            .watch_depth_trend
            .iter()
            .map(|(_, depth)| *depth)
            .max()
            .unwrap_or(0);
        if report.depth_strictly_increasing() {
            say!("watch depth: strictly increasing over {n} instants (reaches {max})");
        } else {
            say!("watch depth: bounded (max {max} over {n} instants)");
        }
    }
}

fn reactivity_json(static_verdict: &StaticVerdict, report: &ReactivityReport) -> serde_json::Value {
    let static_value = match static_verdict {
        StaticVerdict::Safe => json!({"safe": true, "cycle": serde_json::Value::Null}),
        StaticVerdict::PotentiallyNonreactive { cycle } => {
            json!({"safe": false, "cycle": cycle})
        }
    };
    let dynamic_value = match &report.verdict {
        DynamicVerdict::OkUpTo { instants, paths } => json!({
            "verdict": "ok",
            "instants": instants,
            "paths": paths,
        }),
        DynamicVerdict::DivergedAt {
            instant,
            inputs,
            diagnosis,
        } => json!({
            "verdict": "diverged_at",
            "instant": instant,
            "inputs": inputs.iter().map(|s| displays(s)).collect::<Vec<_>>(),
            "diagnosis": diagnosis,
        }),
    };
    json!({
        "check": "reactivity",
        "static": static_value,
        "dynamic": dynamic_value,
        "watch_depth_trend": report
            .watch_depth_trend
            .iter()
            .map(|(k, depth)| json!([k, depth]))
            .collect::<Vec<_>>(),
        "watch_depth_strictly_increasing": report.depth_strictly_increasing(),
    })
}

fn cmd_check_reactivity(args: ReactivityArgs) -> Result<i32, Failure> {
    let src = read_file(&args.program)?;
    let surface = parse(&src).map_err(|e| {
        Failure::tool(e.render(&args.program.display().to_string()))
    })?;
    let loaded = load_source(&src).map_err(|e| {
        Failure::tool(e.render(&args.program.display().to_string()))
    })?;
    let static_verdict = static_reactivity_check(&surface);
    let strategy = match args.inputs.as_deref() {
        None => InputStrategy::Auto {
            instants: args.instants.unwrap_or(4),
        },
        Some("exhaustive") => InputStrategy::Exhaustive {
            instants: args.instants.unwrap_or(4),
        },
        Some(path) => {
            let script = load_script_file(Path::new(path), &loaded.interface, EXIT_TOOL)?;
            InputStrategy::Script(shape_script(script, args.instants, true))
        }
    };
    let report = dynamic_reactivity_probe(&loaded, &strategy, args.fuel)
        .map_err(|e| Failure::tool(e.to_string()))?;
    match args.format {
        Format::Text => reactivity_text(&static_verdict, &report),
        Format::Json => print_json(reactivity_json(&static_verdict, &report)),
    }
    Ok(match report.verdict {
        DynamicVerdict::OkUpTo { .. } => 0,
        DynamicVerdict::DivergedAt { .. } => EXIT_VERDICT,
    })
}

fn cmd_check_equivalence(args: EquivalenceArgs) -> Result<i32, Failure> {
    let left = load_program(&args.left, EXIT_TOOL)?;
    let right = load_program(&args.right, EXIT_TOOL)?;
    let cfg = EquivalenceConfig {
        depth: args.depth,
        fuel: args.fuel,
        ..EquivalenceConfig::default()
    };
    match check_equivalence(&left, &right, &cfg) {
        Ok(report) => {
            match args.format {
                Format::Text => {
                    if report.equivalent {
                        say!(
                            "equivalent: yes (depth {}, {} paths, {} pairs)",
                            report.depth, report.paths, report.pairs
                        );
                    } else {
                        say!("equivalent: no (depth {})", report.depth);
                        if let Some(w) = &report.witness {
                            say!(
                                "witness: inputs {} instant {}: left out={} right out={}",
                                fmt_display_seq(&w.inputs),
                                w.instant,
                                braced(&w.left_outputs.iter().cloned().collect::<Vec<_>>()),
                                braced(&w.right_outputs.iter().cloned().collect::<Vec<_>>()),
                            );
                        }
                    }
                }
                Format::Json => {
                    let witness = match &report.witness {
                        None => serde_json::Value::Null,
                        Some(w) => json!({
                            "inputs": w.inputs.iter().map(|s| s.iter().collect::<Vec<_>>()).collect::<Vec<_>>(),
                            "instant": w.instant,
                            "left": w.left_outputs.iter().collect::<Vec<_>>(),
                            "right": w.right_outputs.iter().collect::<Vec<_>>(),
                        }),
                    };
                    print_json(json!({
                        "check": "equivalence",
                        "equivalent": report.equivalent,
                        "depth": report.depth,
                        "paths": report.paths,
                        "pairs": report.pairs,
                        "witness": witness,
                    }));
                }
            }
            Ok(if report.equivalent { 0 } else { EXIT_VERDICT })
        }
        Err(AnalysisError::InterfaceMismatch { left, right }) => {
            match args.format {
                Format::Text => say!(
                    "equivalent: no (interfaces differ: left {}, right {})",
                    braced(&left),
                    braced(&right)
                ),
                Format::Json => print_json(json!({
                    "check": "equivalence",
                    "equivalent": false,
                    "interface_mismatch": {"left": left, "right": right},
                })),
            }
            Ok(EXIT_VERDICT)
        }
        Err(other) => Err(Failure::tool(other.to_string())),
    }
}

fn cmd_trace_diff(args: TraceDiffArgs) -> Result<i32, Failure> {
    let left = load_program(&args.left, EXIT_PARSE)?;
    let right = load_program(&args.right, EXIT_PARSE)?;
    let rows = match &args.inputs {
        Some(path) => {
            let text = read_file(path)?;
            parse_script(&text).map_err(|m| {
                Failure::parse(format!("{}: {m}", path.display()))
            })?
        }
        None => Vec::new(),
    };
    let script_left = resolve_script(&rows, &left.interface)
        .map_err(|m| Failure::parse(format!("{}: {m}", args.left.display())))?;
    let script_right = resolve_script(&rows, &right.interface)
        .map_err(|m| Failure::parse(format!("{}: {m}", args.right.display())))?;
    let script_left = shape_script(script_left, args.instants, args.inputs.is_some());
    let script_right = shape_script(script_right, args.instants, args.inputs.is_some());
    let records_left = drive(left, &script_left, &mut Scheduler::round_robin(), args.fuel)?;
    let records_right = drive(right, &script_right, &mut Scheduler::round_robin(), args.fuel)?;
    let mut first_difference: Option<u64> = None;
    let mut rows_json = Vec::new();
    for (l, r) in records_left.iter().zip(&records_right) {
        let out_l = displays(&l.outputs);
        let out_r = displays(&r.outputs);
        let equal = out_l == out_r;
        if !equal && first_difference.is_none() {
            first_difference = Some(l.instant);
        }
        match args.format {
            Format::Text => say!(
                "instant {}: in={} left out={} right out={}{}",
                l.instant,
                braced(&displays(&l.inputs)),
                braced(&out_l),
                braced(&out_r),
                if equal { "" } else { "   <- differs" }
            ),
            Format::Json => rows_json.push(json!({
                "instant": l.instant,
                "in": displays(&l.inputs),
                "left": out_l,
                "right": out_r,
                "equal": equal,
            })),
        }
    }
    match args.format {
        Format::Text => match first_difference {
            None => say!("traces identical ({} instants)", records_left.len()),
            Some(k) => say!("traces differ first at instant {k}"),
        },
        Format::Json => print_json(json!({
            "identical": first_difference.is_none(),
            "first_difference": first_difference,
            "instants": rows_json,
        })),
    }
    Ok(if first_difference.is_none() {
        0
    } else {
        EXIT_VERDICT
    })
}

fn cmd_corpus_list(format: Format) -> Result<i32, Failure> {
    match format {
        Format::Text => {
            for entry in CORPUS {
                say!("{:<13} {}", entry.name, entry.description);
            }
        }
        Format::Json => print_json(json!({
            "corpus": CORPUS
                .iter()
                .map(|e| json!({"name": e.name, "description": e.description}))
                .collect::<Vec<_>>(),
        })),
    }
    Ok(0)
}

fn cmd_corpus_run(
    name: &str,
    instants: Option<u64>,
    fuel: u64,
    sched: SchedPolicy,
    seed: u64,
    format: Format,
) -> Result<i32, Failure> {
    let entry = CORPUS.iter().find(|e| e.name == name).ok_or_else(|| {
        Failure::tool(format!(
            "unknown corpus program {name:?}; `rk corpus list` shows the available names"
        ))
    })?;
    let loaded = load_source(entry.source).map_err(|e| Failure {
        code: EXIT_INTERNAL,
        message: format!("bundled program {name} does not load: {}", e.render(name)),
    })?;
    let script = script_from_text(entry.inputs, &loaded.interface, EXIT_INTERNAL, name)?;
    let script = shape_script(script, instants, true);
    let mut sched = build_scheduler(sched, seed, None)?;
    let records = drive(loaded, &script, &mut sched, fuel)?;
    print_records(&records, format);
    Ok(0)
}
