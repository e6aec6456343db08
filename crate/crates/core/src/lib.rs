//! A reactive synchronous kernel language: cooperative threads communicating
//! through broadcast signals, executed in a sequence of instants.
//!
//! Within an instant, threads run until each has either terminated or
//! suspended on an absent signal; emitted signals stay present for the rest
//! of the instant and are forgotten at the next. `watch` installs a
//! preemption that fires between instants, which is what keeps every
//! reaction deterministic: nothing is ever retracted mid-instant, so the
//! order threads run in cannot change what the instant computes.
//!
//! The crate provides, in dependency order:
//!
//! - [`names`] / [`ast`]: identity-based signal names, kernel terms,
//!   definitions and program multisets;
//! - [`surface`] / [`parse`] / [`desugar`]: the written language, with
//!   derived constructs (`await`, `loop`, `pause`, `present`, `trap`, …)
//!   lowered into the eight kernel forms;
//! - [`pretty`]: a printer whose output reparses to the same kernel term;
//! - [`env`] / [`eval`] / [`sched`]: signal environments, the instant
//!   evaluator, and pluggable (round-robin / seeded random / replay)
//!   schedulers;
//! - [`analysis`]: reactivity checking, determinism checking, and program
//!   equivalence (bounded traces and bisimulation, with renaming of
//!   non-interface signals);
//! - [`gen`]: a seeded random program generator for the checkers.

pub mod names;
pub mod ast;
pub mod env;
pub mod surface;
pub mod parse;
pub mod desugar;
pub mod pretty;
pub mod eval;
pub mod sched;
pub mod analysis;
pub mod gen;

pub use analysis::{
    bounded_traces, canonical_form, check_determinism, check_equivalence,
    dynamic_reactivity_probe, equal_up_to_renaming, static_reactivity_check, AnalysisError,
    DeterminismDivergence, DeterminismReport, DynamicVerdict, EquivalenceConfig,
    EquivalenceReport, EquivalenceWitness, InputStrategy, ReactivityReport, RenamingWitness,
    StaticVerdict, DEFAULT_MATCH_BUDGET,
};
pub use ast::{DefId, DefTable, Definition, Program, Thread};
pub use desugar::{load_source, load_two, Loaded};
pub use env::SignalEnv;
pub use eval::{
    classify, end_of_instant, eval_thread, input_env, is_stuck, run_instant, EvalError, Fuel,
    InstantOutcome, IoRecord, Machine, OccId, ScheduleEntry, ThreadStatus, DEFAULT_FUEL,
};
pub use gen::{gen_source, GenConfig};
pub use names::{Interface, NameOrigin, NameSession, SignalName};
pub use parse::{parse, ParseError};
pub use pretty::pretty_print;
pub use sched::Scheduler;
