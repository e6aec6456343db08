//! Bounded behavioural equivalence.
//!
//! Two programs over the same interface are compared by what an observer
//! can see: the per-instant output sets produced in response to every input
//! sequence up to a depth bound. Because programs here are deterministic
//! (checked separately), trace-set equality and stepwise bisimulation
//! coincide; this module runs **both** routes and insists they agree, so a
//! bug in either one surfaces as an error instead of a wrong verdict.
//!
//! Route A enumerates whole input sequences and compares the resulting
//! trace sets. Route B walks the synchronous product breadth-first,
//! comparing outputs instant by instant and memoizing state pairs by
//! canonical form; its first mismatch is a shortest possible witness.

use super::reactivity::input_subsets;
use super::renaming::canonical_form;
use super::AnalysisError;
use crate::desugar::Loaded;
use crate::eval::{Machine, DEFAULT_FUEL};
use crate::names::SignalName;
use crate::sched::Scheduler;
use std::collections::{BTreeSet, HashSet, VecDeque};

#[derive(Debug, Clone)]
pub struct EquivalenceConfig {
    /// Instants to explore.
    pub depth: u64,
    /// Cap on input sequences per program (route A).
    pub max_paths: u64,
    /// Cap on product states enqueued (route B).
    pub max_pairs: u64,
    /// Fuel budget per instant.
    pub fuel: u64,
}

impl Default for EquivalenceConfig {
    fn default() -> EquivalenceConfig {
        EquivalenceConfig {
            depth: 4,
            max_paths: 1 << 16,
            max_pairs: 1 << 16,
            fuel: DEFAULT_FUEL,
        }
    }
}

/// A distinguishing experiment: feed `inputs` (one set per instant) and the
/// programs visibly disagree at `instant` (1-based, the last entry).
/// Signals are recorded by display name so the witness is meaningful no
/// matter how the two programs were loaded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquivalenceWitness {
    pub inputs: Vec<BTreeSet<String>>,
    pub instant: u64,
    pub left_outputs: BTreeSet<String>,
    pub right_outputs: BTreeSet<String>,
}

#[derive(Debug, Clone)]
pub struct EquivalenceReport {
    pub equivalent: bool,
    pub witness: Option<EquivalenceWitness>,
    /// Instants explored.
    pub depth: u64,
    /// Input sequences compared by the trace route.
    pub paths: u64,
    /// Product states visited by the bisimulation route.
    pub pairs: u64,
}

fn displays(set: &BTreeSet<SignalName>) -> BTreeSet<String> {
    set.iter().map(|s| s.display().to_string()).collect()
}

fn render(set: &BTreeSet<String>) -> String {
    set.iter().cloned().collect::<Vec<_>>().join(",")
}

/// The set of depth-bounded traces of one program: for every input sequence
/// of length `depth`, the string of per-instant observations
/// `in{..}out{..};…`. Input sets are rendered sorted by display name, so
/// trace sets of programs loaded in different sessions are comparable.
pub fn bounded_traces(
    loaded: &Loaded,
    cfg: &EquivalenceConfig,
) -> Result<BTreeSet<String>, AnalysisError> {
    let subsets = input_subsets(&loaded.interface);
    check_path_cap(subsets.len(), cfg)?;
    let mut out = BTreeSet::new();
    let machine = Machine::new(loaded.clone());
    explore(&machine, &subsets, cfg.depth, cfg.fuel, String::new(), &mut out)?;
    Ok(out)
}

fn check_path_cap(breadth: usize, cfg: &EquivalenceConfig) -> Result<u64, AnalysisError> {
    (breadth as u64)
        .checked_pow(cfg.depth as u32)
        .filter(|p| *p <= cfg.max_paths)
        .ok_or_else(|| AnalysisError::CapExceeded {
            detail: format!(
                "{breadth} input subsets over {} instants exceed max_paths={}",
                cfg.depth, cfg.max_paths
            ),
        })
}

fn explore(
    machine: &Machine,
    subsets: &[BTreeSet<SignalName>],
    depth_left: u64,
    fuel: u64,
    prefix: String,
    out: &mut BTreeSet<String>,
) -> Result<(), AnalysisError> {
    if depth_left == 0 {
        out.insert(prefix);
        return Ok(());
    }
    for subset in subsets {
        let mut m = machine.clone();
        let mut sched = Scheduler::round_robin();
        let rec = m.io_step(subset, &mut sched, fuel)?;
        let line = format!(
            "{prefix}in{{{}}}out{{{}}};",
            render(&displays(&rec.inputs)),
            render(&displays(&rec.outputs)),
        );
        explore(&m, subsets, depth_left - 1, fuel, line, out)?;
    }
    Ok(())
}

/// Decide bounded behavioural equivalence of two programs over the same
/// interface, producing a shortest distinguishing input sequence when they
/// differ. Both internal routes must agree.
pub fn check_equivalence(
    left: &Loaded,
    right: &Loaded,
    cfg: &EquivalenceConfig,
) -> Result<EquivalenceReport, AnalysisError> {
    let left_iface: Vec<String> = sorted_iface(left);
    let right_iface: Vec<String> = sorted_iface(right);
    if left_iface != right_iface {
        return Err(AnalysisError::InterfaceMismatch {
            left: left_iface,
            right: right_iface,
        });
    }

    // Route A: whole-sequence trace sets.
    let left_traces = bounded_traces(left, cfg)?;
    let right_traces = bounded_traces(right, cfg)?;
    let trace_equal = left_traces == right_traces;
    let subsets = input_subsets(&left.interface);
    let paths = check_path_cap(subsets.len(), cfg)?;

    // Inputs are enumerated over the left interface; drive the right
    // machine through the same-named signals of its own interface.
    let translate = |subset: &BTreeSet<SignalName>| -> BTreeSet<SignalName> {
        subset
            .iter()
            .map(|s| {
                right
                    .interface
                    .by_display(s.display())
                    .expect("interfaces were checked equal")
            })
            .collect()
    };

    // Route B: breadth-first bisimulation on the product. FIFO order makes
    // the first mismatch minimal in instant count; state pairs are merged
    // by canonical form, which only identifies programs with identical
    // observable futures.
    let mut frontier: VecDeque<(Machine, Machine, Vec<BTreeSet<String>>)> = VecDeque::new();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    let mut pairs = 0u64;
    let start = (Machine::new(left.clone()), Machine::new(right.clone()));
    seen.insert((
        canonical_form(&start.0.program),
        canonical_form(&start.1.program),
    ));
    frontier.push_back((start.0, start.1, Vec::new()));
    let mut witness: Option<EquivalenceWitness> = None;
    'bfs: while let Some((ml, mr, prefix)) = frontier.pop_front() {
        pairs += 1;
        if pairs > cfg.max_pairs {
            return Err(AnalysisError::CapExceeded {
                detail: format!("bisimulation visited more than {} state pairs", cfg.max_pairs),
            });
        }
        if prefix.len() as u64 == cfg.depth {
            continue;
        }
        for subset in &subsets {
            let mut l = ml.clone();
            let mut r = mr.clone();
            let mut sl = Scheduler::round_robin();
            let mut sr = Scheduler::round_robin();
            let rec_l = l.io_step(subset, &mut sl, cfg.fuel)?;
            let rec_r = r.io_step(&translate(subset), &mut sr, cfg.fuel)?;
            let out_l = displays(&rec_l.outputs);
            let out_r = displays(&rec_r.outputs);
            if out_l != out_r {
                let mut inputs = prefix.clone();
                inputs.push(displays(subset));
                witness = Some(EquivalenceWitness {
                    instant: inputs.len() as u64,
                    inputs,
                    left_outputs: out_l,
                    right_outputs: out_r,
                });
                break 'bfs;
            }
            let key = (canonical_form(&l.program), canonical_form(&r.program));
            if seen.insert(key) {
                let mut inputs = prefix.clone();
                inputs.push(displays(subset));
                frontier.push_back((l, r, inputs));
            }
        }
    }
    let bisim_equal = witness.is_none();

    if trace_equal != bisim_equal {
        return Err(AnalysisError::InternalDisagreement {
            detail: format!(
                "trace route says {}, bisimulation route says {}",
                verdict(trace_equal),
                verdict(bisim_equal)
            ),
        });
    }
    Ok(EquivalenceReport {
        equivalent: trace_equal,
        witness,
        depth: cfg.depth,
        paths,
        pairs,
    })
}

fn sorted_iface(loaded: &Loaded) -> Vec<String> {
    let mut v: Vec<String> = loaded
        .interface
        .names()
        .iter()
        .map(|s| s.display().to_string())
        .collect();
    v.sort();
    v
}

fn verdict(equal: bool) -> &'static str {
    if equal {
        "equivalent"
    } else {
        "different"
    }
}
