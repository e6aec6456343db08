//! Reactivity checking.
//!
//! A program is reactive when every instant finishes: each thread either
//! terminates or suspends. The static check over-approximates the ways an
//! instant can fail to finish — recursion (explicit or via `loop`) that can
//! re-enter itself without crossing an instant boundary — by building a
//! same-instant call graph and flagging its cycles. The dynamic probe
//! actually drives the program over chosen input sequences with a fuel
//! budget, reporting divergence as a verdict rather than an error, and
//! tracking preemption-nesting growth (the other way behaviour degrades).

use super::AnalysisError;
use crate::desugar::Loaded;
use crate::eval::{EvalError, Machine};
use crate::names::SignalName;
use crate::sched::Scheduler;
use crate::surface::{SurfaceKind, SurfaceProgram, SurfaceTerm};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use std::collections::{BTreeSet, HashMap};

/// Outcome of the static same-instant recursion analysis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StaticVerdict {
    /// No same-instant cycle is reachable: every instant terminates, for
    /// every input and schedule.
    Safe,
    /// A cycle that can re-enter itself within one instant. `cycle` lists
    /// the nodes (definition names and `loop@line:col` labels) in order.
    PotentiallyNonreactive { cycle: Vec<String> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Node {
    Def(usize),
    Loop(usize),
}

struct StaticCtx<'a> {
    sp: &'a SurfaceProgram,
    def_index: HashMap<&'a str, usize>,
    /// Loop occurrences in traversal order (defs first, then roots).
    loops: Vec<&'a SurfaceTerm>,
    loop_id_by_addr: HashMap<usize, usize>,
    /// Per definition: can its body complete within the instant it started?
    may_complete: Vec<bool>,
}

fn collect_loops<'a>(
    term: &'a SurfaceTerm,
    loops: &mut Vec<&'a SurfaceTerm>,
    by_addr: &mut HashMap<usize, usize>,
) {
    match &term.kind {
        SurfaceKind::Loop(body) => {
            by_addr.insert(term as *const _ as usize, loops.len());
            loops.push(term);
            collect_loops(body, loops, by_addr);
        }
        SurfaceKind::Nil
        | SurfaceKind::Emit(_)
        | SurfaceKind::Await(_)
        | SurfaceKind::Pause
        | SurfaceKind::Yield
        | SurfaceKind::Exit(_)
        | SurfaceKind::Call(_, _) => {}
        SurfaceKind::Local(_, b)
        | SurfaceKind::Spawn(b)
        | SurfaceKind::When(_, b)
        | SurfaceKind::Watch(_, b)
        | SurfaceKind::Now(b)
        | SurfaceKind::Trap(_, b) => collect_loops(b, loops, by_addr),
        SurfaceKind::Seq(a, b) => {
            collect_loops(a, loops, by_addr);
            collect_loops(b, loops, by_addr);
        }
        SurfaceKind::Present(_, t, e) => {
            collect_loops(t, loops, by_addr);
            collect_loops(e, loops, by_addr);
        }
    }
}

impl<'a> StaticCtx<'a> {
    /// May this term complete in the same instant it starts in? An
    /// over-approximation: guards are assumed satisfiable, so `await` and
    /// `when` bodies count as completable.
    fn completes(&self, term: &SurfaceTerm) -> bool {
        match &term.kind {
            SurfaceKind::Nil | SurfaceKind::Emit(_) => true,
            // May complete at once if the signal is already present.
            SurfaceKind::Await(_) => true,
            // The waker is scheduled within the same instant.
            SurfaceKind::Yield => true,
            // Spawning returns immediately; the body runs on its own.
            SurfaceKind::Spawn(_) => true,
            SurfaceKind::Pause | SurfaceKind::Exit(_) => false,
            // A loop never completes: it either suspends or runs away.
            SurfaceKind::Loop(_) => false,
            SurfaceKind::Local(_, b)
            | SurfaceKind::When(_, b)
            | SurfaceKind::Watch(_, b)
            | SurfaceKind::Now(b)
            | SurfaceKind::Trap(_, b) => self.completes(b),
            SurfaceKind::Seq(a, b) => self.completes(a) && self.completes(b),
            // The else branch starts an instant later, so only the
            // then branch can finish this instant.
            SurfaceKind::Present(_, t, _) => self.completes(t),
            SurfaceKind::Call(name, _) => {
                self.def_index
                    .get(name.as_str())
                    .is_some_and(|i| self.may_complete[*i])
            }
        }
    }

    /// Nodes this term can enter within the instant it starts in.
    fn edges(&self, term: &'a SurfaceTerm, out: &mut Vec<Node>) {
        match &term.kind {
            SurfaceKind::Nil
            | SurfaceKind::Emit(_)
            | SurfaceKind::Await(_)
            | SurfaceKind::Pause
            | SurfaceKind::Yield
            | SurfaceKind::Exit(_) => {}
            SurfaceKind::Call(name, _) => {
                if let Some(i) = self.def_index.get(name.as_str()) {
                    out.push(Node::Def(*i));
                }
            }
            SurfaceKind::Loop(_) => {
                let id = self.loop_id_by_addr[&(term as *const _ as usize)];
                out.push(Node::Loop(id));
            }
            SurfaceKind::Local(_, b)
            | SurfaceKind::Spawn(b)
            | SurfaceKind::When(_, b)
            | SurfaceKind::Watch(_, b)
            | SurfaceKind::Now(b)
            | SurfaceKind::Trap(_, b) => self.edges(b, out),
            SurfaceKind::Seq(a, b) => {
                self.edges(a, out);
                if self.completes(a) {
                    self.edges(b, out);
                }
            }
            SurfaceKind::Present(_, t, _) => self.edges(t, out),
        }
    }

    fn node_edges(&self, node: Node) -> Vec<Node> {
        let mut out = Vec::new();
        match node {
            Node::Def(i) => self.edges(&self.sp.defs[i].body, &mut out),
            Node::Loop(id) => {
                let SurfaceKind::Loop(body) = &self.loops[id].kind else {
                    unreachable!("loop ids index loop terms");
                };
                self.edges(body, &mut out);
                // A body that can complete re-enters the loop head at once.
                if self.completes(body) {
                    out.push(Node::Loop(id));
                }
            }
        }
        out
    }

    fn label(&self, node: Node) -> String {
        match node {
            Node::Def(i) => self.sp.defs[i].name.value.clone(),
            Node::Loop(id) => format!("loop@{}", self.loops[id].pos),
        }
    }
}

/// Build the same-instant re-entry graph and look for a cycle reachable
/// from the program's run blocks.
pub fn static_reactivity_check(sp: &SurfaceProgram) -> StaticVerdict {
    let mut loops = Vec::new();
    let mut loop_id_by_addr = HashMap::new();
    for def in &sp.defs {
        collect_loops(&def.body, &mut loops, &mut loop_id_by_addr);
    }
    for root in &sp.roots {
        collect_loops(root, &mut loops, &mut loop_id_by_addr);
    }
    let mut ctx = StaticCtx {
        sp,
        def_index: sp
            .defs
            .iter()
            .enumerate()
            .map(|(i, d)| (d.name.value.as_str(), i))
            .collect(),
        loops,
        loop_id_by_addr,
        may_complete: vec![false; sp.defs.len()],
    };
    // Least fixpoint of "may complete within its starting instant".
    loop {
        let mut changed = false;
        for i in 0..sp.defs.len() {
            if !ctx.may_complete[i] && ctx.completes(&sp.defs[i].body) {
                ctx.may_complete[i] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    // Depth-first search from the roots' same-instant entries.
    let mut entry = Vec::new();
    for root in &sp.roots {
        ctx.edges(root, &mut entry);
    }
    #[derive(Clone, Copy, PartialEq)]
    enum Color {
        White,
        Gray,
        Black,
    }
    let mut color: HashMap<Node, Color> = HashMap::new();
    let mut path: Vec<Node> = Vec::new();
    fn dfs(
        ctx: &StaticCtx,
        node: Node,
        color: &mut HashMap<Node, Color>,
        path: &mut Vec<Node>,
    ) -> Option<Vec<Node>> {
        match color.get(&node).copied().unwrap_or(Color::White) {
            Color::Black => return None,
            Color::Gray => {
                let start = path.iter().position(|n| *n == node).expect("on path");
                let mut cycle = path[start..].to_vec();
                cycle.push(node);
                return Some(cycle);
            }
            Color::White => {}
        }
        color.insert(node, Color::Gray);
        path.push(node);
        for next in ctx.node_edges(node) {
            if let Some(cycle) = dfs(ctx, next, color, path) {
                return Some(cycle);
            }
        }
        path.pop();
        color.insert(node, Color::Black);
        None
    }
    for node in entry {
        if let Some(cycle) = dfs(&ctx, node, &mut color, &mut path) {
            return StaticVerdict::PotentiallyNonreactive {
                cycle: cycle.into_iter().map(|n| ctx.label(n)).collect(),
            };
        }
    }
    StaticVerdict::Safe
}

/// How the dynamic probe chooses input sequences.
#[derive(Debug, Clone)]
pub enum InputStrategy {
    /// Exhaustive when the input tree is small, sampled otherwise.
    Auto { instants: u64 },
    /// Every sequence of interface subsets, `instants` long.
    Exhaustive { instants: u64 },
    /// `paths` random input sequences from a seeded generator.
    Sampled {
        seed: u64,
        paths: u32,
        instants: u64,
    },
    /// Exactly this input sequence.
    Script(Vec<BTreeSet<SignalName>>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DynamicVerdict {
    /// Every explored path finished every instant within budget.
    OkUpTo { instants: u64, paths: u64 },
    /// Some instant failed to finish. `inputs` is the input sequence that
    /// got there (its length is the failing instant).
    DivergedAt {
        instant: u64,
        inputs: Vec<BTreeSet<SignalName>>,
        diagnosis: String,
    },
}

#[derive(Debug, Clone)]
pub struct ReactivityReport {
    pub verdict: DynamicVerdict,
    /// `(instant, max preemption nesting after it)` along the reference
    /// path: the scripted path, or the first path explored.
    pub watch_depth_trend: Vec<(u64, usize)>,
}

impl ReactivityReport {
    /// True when preemption nesting grows at every recorded instant — the
    /// signature of a program stacking `watch` shells without bound.
    pub fn depth_strictly_increasing(&self) -> bool {
        self.watch_depth_trend.len() > 1
            && self
                .watch_depth_trend
                .windows(2)
                .all(|w| w[1].1 > w[0].1)
    }
}

/// All subsets of the interface, ordered by their rendered name list (the
/// empty set first). This is the branching order everywhere inputs are
/// enumerated, so "first" is deterministic across the crate.
pub(super) fn input_subsets(interface: &crate::names::Interface) -> Vec<BTreeSet<SignalName>> {
    let names = interface.names();
    assert!(
        names.len() < 16,
        "subset enumeration over {} interface signals is not sensible",
        names.len()
    );
    let mut subsets: Vec<BTreeSet<SignalName>> = (0..(1u32 << names.len()))
        .map(|bits| {
            names
                .iter()
                .enumerate()
                .filter(|(i, _)| bits & (1 << i) != 0)
                .map(|(_, s)| s.clone())
                .collect()
        })
        .collect();
    subsets.sort_by_key(|set| {
        let mut displays: Vec<&str> = set.iter().map(|s| s.display()).collect();
        displays.sort();
        displays.join(",")
    });
    subsets
}

/// Walk the tree of input prefixes breadth-first, sharing common prefixes.
/// Because every shorter prefix is tried before any longer one, the first
/// divergence found is at the earliest reachable instant. The nesting trend
/// follows the leftmost branch (the all-empty input sequence).
fn probe_exhaustive(
    loaded: &Loaded,
    instants: u64,
    fuel_budget: u64,
) -> Result<ReactivityReport, AnalysisError> {
    let subsets = input_subsets(&loaded.interface);
    let total = (subsets.len() as u64)
        .checked_pow(instants as u32)
        .filter(|t| *t <= 1 << 16)
        .ok_or_else(|| AnalysisError::CapExceeded {
            detail: format!(
                "exhaustive exploration of {} subsets over {} instants",
                subsets.len(),
                instants
            ),
        })?;
    let mut trend = Vec::new();
    let mut frontier: Vec<(Machine, Vec<BTreeSet<SignalName>>)> =
        vec![(Machine::new(loaded.clone()), Vec::new())];
    for k in 0..instants {
        let mut next = Vec::with_capacity(frontier.len() * subsets.len());
        for (fi, (machine, prefix)) in frontier.iter().enumerate() {
            for (si, subset) in subsets.iter().enumerate() {
                let mut m = machine.clone();
                let mut sched = Scheduler::round_robin();
                match m.io_step(subset, &mut sched, fuel_budget) {
                    Ok(_) => {
                        if fi == 0 && si == 0 {
                            trend.push((k + 1, m.program.watch_depth()));
                        }
                        let mut inputs = prefix.clone();
                        inputs.push(subset.clone());
                        next.push((m, inputs));
                    }
                    Err(err @ EvalError::FuelExhausted { .. }) => {
                        let mut inputs = prefix.clone();
                        inputs.push(subset.clone());
                        return Ok(ReactivityReport {
                            verdict: DynamicVerdict::DivergedAt {
                                instant: k + 1,
                                inputs,
                                diagnosis: err.to_string(),
                            },
                            watch_depth_trend: trend,
                        });
                    }
                    Err(other) => return Err(other.into()),
                }
            }
        }
        frontier = next;
    }
    Ok(ReactivityReport {
        verdict: DynamicVerdict::OkUpTo {
            instants,
            paths: total,
        },
        watch_depth_trend: trend,
    })
}

/// Run one input sequence, recording the preemption-nesting trend; a fuel
/// exhaustion becomes a `DivergedAt` verdict.
fn run_path(
    loaded: &Loaded,
    inputs: &[BTreeSet<SignalName>],
    fuel_budget: u64,
    trend: Option<&mut Vec<(u64, usize)>>,
) -> Result<Option<DynamicVerdict>, AnalysisError> {
    let mut machine = Machine::new(loaded.clone());
    let mut sched = Scheduler::round_robin();
    let mut trend = trend;
    for (k, instant_inputs) in inputs.iter().enumerate() {
        match machine.io_step(instant_inputs, &mut sched, fuel_budget) {
            Ok(_) => {
                if let Some(trend) = trend.as_deref_mut() {
                    trend.push((k as u64 + 1, machine.program.watch_depth()));
                }
            }
            Err(err @ EvalError::FuelExhausted { .. }) => {
                return Ok(Some(DynamicVerdict::DivergedAt {
                    instant: k as u64 + 1,
                    inputs: inputs[..=k].to_vec(),
                    diagnosis: err.to_string(),
                }));
            }
            Err(other) => return Err(other.into()),
        }
    }
    Ok(None)
}

/// Probe the program for divergence over the chosen input space.
pub fn dynamic_reactivity_probe(
    loaded: &Loaded,
    strategy: &InputStrategy,
    fuel_budget: u64,
) -> Result<ReactivityReport, AnalysisError> {
    let paths: Vec<Vec<BTreeSet<SignalName>>> = match strategy {
        InputStrategy::Script(inputs) => vec![inputs.clone()],
        InputStrategy::Exhaustive { instants } => {
            return probe_exhaustive(loaded, *instants, fuel_budget);
        }
        InputStrategy::Sampled {
            seed,
            paths,
            instants,
        } => {
            let names = loaded.interface.names();
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            (0..*paths)
                .map(|_| {
                    (0..*instants)
                        .map(|_| {
                            names
                                .iter()
                                .filter(|_| rng.next_u64() % 2 == 0)
                                .cloned()
                                .collect::<BTreeSet<_>>()
                        })
                        .collect()
                })
                .collect()
        }
        InputStrategy::Auto { instants } => {
            let breadth = 1u64 << loaded.interface.len().min(16);
            let total = breadth.checked_pow(*instants as u32);
            let strategy = if total.is_some_and(|t| t <= 4096) {
                InputStrategy::Exhaustive {
                    instants: *instants,
                }
            } else {
                InputStrategy::Sampled {
                    seed: 0x5EED,
                    paths: 64,
                    instants: *instants,
                }
            };
            return dynamic_reactivity_probe(loaded, &strategy, fuel_budget);
        }
    };

    let mut trend = Vec::new();
    let mut instants_explored = 0u64;
    for (i, path) in paths.iter().enumerate() {
        instants_explored = instants_explored.max(path.len() as u64);
        let trend_slot = if i == 0 { Some(&mut trend) } else { None };
        if let Some(verdict) = run_path(loaded, path, fuel_budget, trend_slot)? {
            return Ok(ReactivityReport {
                verdict,
                watch_depth_trend: trend,
            });
        }
    }
    Ok(ReactivityReport {
        verdict: DynamicVerdict::OkUpTo {
            instants: instants_explored,
            paths: paths.len() as u64,
        },
        watch_depth_trend: trend,
    })
}
