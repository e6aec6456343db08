//! The instant evaluator.
//!
//! Execution alternates two phases. Within an instant, threads are picked by
//! a scheduler and each runs until it terminates or suspends on an absent
//! signal; emissions are monotone, so nothing observed can later be
//! retracted, and the instant is over when every thread is terminated or
//! suspended. Between instants, [`end_of_instant`] fires pending `watch`
//! preemptions and the signal environment is rebuilt from the next inputs.
//!
//! The evaluator is a loop over an explicit continuation stack rather than
//! recursion: a runaway program burns through its fuel budget without
//! touching the call stack, so divergence is reported as a value
//! ([`EvalError::FuelExhausted`]) instead of crashing the process.

use crate::ast::{DefTable, Program, Thread};
use crate::env::SignalEnv;
use crate::names::{Interface, NameSession, SignalName};
use crate::pretty::render_thread_truncated;
use crate::sched::Scheduler;
use std::collections::{BTreeSet, HashMap};
use thiserror::Error;

/// Default per-instant fuel budget: one unit per evaluation rule applied.
pub const DEFAULT_FUEL: u64 = 1_000_000;

/// A step budget. Every rule application costs one unit; running out means
/// the instant cannot finish within the budget.
#[derive(Debug, Clone)]
pub struct Fuel {
    remaining: u64,
    spent: u64,
}

impl Fuel {
    pub fn new(budget: u64) -> Fuel {
        Fuel {
            remaining: budget,
            spent: 0,
        }
    }

    /// Consume one unit; false when the budget is gone.
    pub fn charge(&mut self) -> bool {
        if self.remaining == 0 {
            return false;
        }
        self.remaining -= 1;
        self.spent += 1;
        true
    }

    pub fn spent(&self) -> u64 {
        self.spent
    }

    pub fn remaining(&self) -> u64 {
        self.remaining
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    /// The instant did not finish within the step budget. `at` is a
    /// depth-truncated rendering of the thread that was running.
    #[error("fuel exhausted after {spent} steps while running: {at}")]
    FuelExhausted { spent: u64, at: String },
    #[error("signal {name} is not defined in this instant's environment")]
    UnboundSignal { name: String },
    #[error("call to unknown definition #{id}")]
    UnknownDefinition { id: u32 },
    /// `end_of_instant` was applied to a thread that was not suspended.
    #[error("end of instant reached a non-suspended thread: {at}")]
    MalformedSuspension { at: String },
    /// A replay scheduler was driven past or against its recorded log.
    #[error("replay diverged: {detail}")]
    ReplayDivergence { detail: String },
    /// An internal consistency check failed; always a bug, never the
    /// program's fault.
    #[error("internal invariant violated: {detail}")]
    InternalInvariant { detail: String },
}

/// Result of running one thread until it terminated or suspended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalResult {
    /// What remains of the thread: `Nil` if it terminated, otherwise a
    /// suspended term whose leftmost active guard waits on an absent signal.
    pub residual: Thread,
    /// Bodies of `thread { … }` constructs reached this run, in creation
    /// order. The caller owns scheduling them.
    pub spawned: Vec<Thread>,
    /// Signals that became present during this run.
    pub emitted: Vec<SignalName>,
    /// Rule applications consumed (equals the fuel charged).
    pub steps: u64,
}

/// Evaluation context frames, innermost last.
enum Frame {
    WhenBody(SignalName),
    WatchBody(SignalName),
    SeqNext(Thread),
}

fn rebuild(mut t: Thread, stack: &mut Vec<Frame>) -> Thread {
    while let Some(frame) = stack.pop() {
        t = match frame {
            Frame::WhenBody(s) => Thread::when(s, t),
            Frame::WatchBody(s) => Thread::watch(s, t),
            Frame::SeqNext(next) => Thread::seq(t, next),
        };
    }
    t
}

/// Run one thread until it terminates or suspends.
///
/// Mutates `env` with emissions and fresh local declarations, and mints
/// fresh names in `session` for every `local` activation and capture repair.
pub fn eval_thread(
    t: Thread,
    env: &mut SignalEnv,
    defs: &DefTable,
    session: &mut NameSession,
    fuel: &mut Fuel,
) -> Result<EvalResult, EvalError> {
    let mut focus = t;
    let mut stack: Vec<Frame> = Vec::new();
    let mut spawned: Vec<Thread> = Vec::new();
    let mut emitted: Vec<SignalName> = Vec::new();
    let mut steps: u64 = 0;
    loop {
        if !fuel.charge() {
            let residual = rebuild(focus, &mut stack);
            return Err(EvalError::FuelExhausted {
                spent: fuel.spent(),
                at: render_thread_truncated(&residual, defs, 24),
            });
        }
        steps += 1;
        match focus {
            Thread::Nil => match stack.pop() {
                None => {
                    return Ok(EvalResult {
                        residual: Thread::Nil,
                        spawned,
                        emitted,
                        steps,
                    })
                }
                // A completed body completes its guard as well.
                Some(Frame::WhenBody(_)) | Some(Frame::WatchBody(_)) => focus = Thread::Nil,
                Some(Frame::SeqNext(next)) => focus = next,
            },
            Thread::Emit(s) => {
                match env.emit(&s) {
                    Some(true) => emitted.push(s),
                    Some(false) => {}
                    None => {
                        return Err(EvalError::UnboundSignal {
                            name: s.to_string(),
                        })
                    }
                }
                focus = Thread::Nil;
            }
            Thread::Local(binder, body) => {
                // Each activation gets its own signal, absent by default;
                // the binder itself never reaches the environment.
                let fresh = session.fresh(binder.display());
                env.define(fresh.clone(), false);
                let mut map = HashMap::new();
                map.insert(binder, fresh);
                focus = body.substitute(&map, session);
            }
            Thread::Spawn(body) => {
                spawned.push(*body);
                focus = Thread::Nil;
            }
            Thread::When(s, body) => match env.get(&s) {
                None => {
                    return Err(EvalError::UnboundSignal {
                        name: s.to_string(),
                    })
                }
                Some(false) => {
                    // Suspend: reassemble the whole thread around the guard.
                    let residual = rebuild(Thread::When(s, body), &mut stack);
                    return Ok(EvalResult {
                        residual,
                        spawned,
                        emitted,
                        steps,
                    });
                }
                Some(true) => {
                    stack.push(Frame::WhenBody(s));
                    focus = *body;
                }
            },
            Thread::Watch(s, body) => {
                // Preemption is decided between instants; within the instant
                // the body just runs. The signal must still be known.
                if !env.contains(&s) {
                    return Err(EvalError::UnboundSignal {
                        name: s.to_string(),
                    });
                }
                stack.push(Frame::WatchBody(s));
                focus = *body;
            }
            Thread::Call(id, args) => {
                let def = defs.get(id).ok_or(EvalError::UnknownDefinition { id: id.0 })?;
                if def.params.len() != args.len() {
                    return Err(EvalError::InternalInvariant {
                        detail: format!(
                            "call to {} with {} arguments, expected {}",
                            def.name,
                            args.len(),
                            def.params.len()
                        ),
                    });
                }
                let map: HashMap<SignalName, SignalName> =
                    def.params.iter().cloned().zip(args).collect();
                focus = def.body.substitute(&map, session);
            }
            Thread::Seq(a, b) => {
                stack.push(Frame::SeqNext(*b));
                focus = *a;
            }
        }
    }
}

/// What a thread can do right now, under a given environment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ThreadStatus {
    /// Fully finished (`()`).
    Terminated,
    /// Suspended: the leftmost active guard waits on this absent signal.
    Blocked(SignalName),
    /// Can take at least one step.
    Ready,
}

/// Classify a thread without running it. Walks the left spine only, so it is
/// cheap and safe on arbitrarily deep residuals. Signals missing from the
/// environment are treated as absent.
pub fn classify(t: &Thread, env: &SignalEnv) -> ThreadStatus {
    let mut cur = t;
    let mut depth = 0usize;
    loop {
        match cur {
            Thread::Nil => {
                return if depth == 0 {
                    ThreadStatus::Terminated
                } else {
                    // A finished body lets the enclosing construct step.
                    ThreadStatus::Ready
                };
            }
            Thread::Emit(_) | Thread::Local(_, _) | Thread::Spawn(_) | Thread::Call(_, _) => {
                return ThreadStatus::Ready;
            }
            Thread::When(s, body) => {
                if env.get(s) != Some(true) {
                    return ThreadStatus::Blocked(s.clone());
                }
                depth += 1;
                cur = body;
            }
            Thread::Watch(_, body) => {
                depth += 1;
                cur = body;
            }
            Thread::Seq(a, _) => {
                depth += 1;
                cur = a;
            }
        }
    }
}

/// True when the thread is terminated or suspended: running it now would
/// change nothing.
pub fn is_stuck(t: &Thread, env: &SignalEnv) -> bool {
    !matches!(classify(t, env), ThreadStatus::Ready)
}

/// The between-instants transformation: fire pending preemptions.
///
/// Defined on suspended threads only —
///
/// - `()` stays put;
/// - a sequence transforms its (suspended) head;
/// - `when s { T }` transforms `T` if `s` ended the instant present, and is
///   untouched otherwise (the suspension simply carries over);
/// - `watch s { T }` is discarded (becomes `()`) if `s` ended the instant
///   present, and transforms `T` otherwise.
///
/// Anything else on the active path means the instant was not actually over,
/// which is an internal error.
pub fn end_of_instant(t: Thread, env: &SignalEnv, defs: &DefTable) -> Result<Thread, EvalError> {
    enum Shell {
        When(SignalName),
        Watch(SignalName),
        Seq(Thread),
    }
    let mut shells: Vec<Shell> = Vec::new();
    let mut cur = t;
    let mut done = loop {
        match cur {
            Thread::Nil => break Thread::Nil,
            Thread::Seq(a, b) => {
                shells.push(Shell::Seq(*b));
                cur = *a;
            }
            Thread::When(s, body) => {
                if env.get(&s) == Some(true) {
                    shells.push(Shell::When(s));
                    cur = *body;
                } else {
                    // Still waiting; the subtree is untouched.
                    break Thread::When(s, body);
                }
            }
            Thread::Watch(s, body) => {
                if env.get(&s) == Some(true) {
                    // Preempted: whatever remained of the body is dropped.
                    break Thread::Nil;
                }
                shells.push(Shell::Watch(s));
                cur = *body;
            }
            other => {
                return Err(EvalError::MalformedSuspension {
                    at: render_thread_truncated(&other, defs, 24),
                });
            }
        }
    };
    while let Some(shell) = shells.pop() {
        done = match shell {
            Shell::When(s) => Thread::when(s, done),
            Shell::Watch(s) => Thread::watch(s, done),
            Shell::Seq(next) => Thread::seq(done, next),
        };
    }
    Ok(done)
}

/// Identity of one thread occurrence within a program run: its position in
/// the thread list. Spawned threads append, and positions never shift, so an
/// occurrence id is stable for the whole run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OccId(pub u64);

impl std::fmt::Display for OccId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One scheduler decision: which occurrence ran and how many steps it took.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScheduleEntry {
    pub occ: OccId,
    pub steps: u64,
}

/// Everything one instant produced.
#[derive(Debug, Clone)]
pub struct InstantOutcome {
    /// The program as it stands at the start of the next instant (all
    /// pending preemptions fired).
    pub program: Program,
    /// The final signal environment of the instant.
    pub env: SignalEnv,
    /// Signals that became present through emission this instant.
    pub emitted: BTreeSet<SignalName>,
    /// The decisions the scheduler made, in order.
    pub schedule_log: Vec<ScheduleEntry>,
    pub fuel_spent: u64,
}

/// Build the environment an instant starts from: `inputs` present, every
/// other interface signal and free signal of the program absent.
pub fn input_env(
    inputs: &BTreeSet<SignalName>,
    interface: &Interface,
    program: &Program,
) -> SignalEnv {
    let mut env = SignalEnv::new();
    for s in inputs {
        env.define(s.clone(), true);
    }
    for s in interface.names() {
        if !env.contains(s) {
            env.define(s.clone(), false);
        }
    }
    for s in program.free_signals() {
        if !env.contains(&s) {
            env.define(s, false);
        }
    }
    env
}

/// Run one full instant: schedule threads until every one of them is
/// terminated or suspended, then fire end-of-instant preemptions.
///
/// The scheduler is consulted with a snapshot of `(occurrence, ready?)`
/// pairs and must return a ready occurrence (or `None` exactly when nothing
/// is ready). Statuses are cached and only recomputed for the thread that
/// ran, for threads it spawned, and for threads woken by an emission.
pub fn run_instant(
    program: Program,
    env: SignalEnv,
    session: &mut NameSession,
    sched: &mut Scheduler,
    fuel_budget: u64,
) -> Result<InstantOutcome, EvalError> {
    let mut program = program;
    let mut env = env;
    let defs = program.defs.clone();
    // Defensive: make sure every signal the program can mention is defined.
    for s in program.free_signals() {
        if !env.contains(&s) {
            env.define(s, false);
        }
    }
    let mut fuel = Fuel::new(fuel_budget);
    let mut emitted: BTreeSet<SignalName> = BTreeSet::new();
    let mut schedule_log: Vec<ScheduleEntry> = Vec::new();

    let mut status: Vec<ThreadStatus> = program
        .threads
        .iter()
        .map(|t| classify(t, &env))
        .collect();
    // Occurrences waiting on each absent signal, so an emission can wake
    // exactly the threads it unblocks.
    let mut waiters: HashMap<SignalName, Vec<usize>> = HashMap::new();
    for (i, st) in status.iter().enumerate() {
        if let ThreadStatus::Blocked(s) = st {
            waiters.entry(s.clone()).or_default().push(i);
        }
    }

    loop {
        let snapshot: Vec<(OccId, bool)> = status
            .iter()
            .enumerate()
            .map(|(i, st)| (OccId(i as u64), matches!(st, ThreadStatus::Ready)))
            .collect();
        let Some(occ) = sched.pick(&snapshot)? else {
            if status.iter().any(|st| matches!(st, ThreadStatus::Ready)) {
                return Err(EvalError::InternalInvariant {
                    detail: "scheduler returned None while occurrences were ready".into(),
                });
            }
            break;
        };
        let i = occ.0 as usize;
        if i >= program.threads.len() || !matches!(status[i], ThreadStatus::Ready) {
            return Err(EvalError::InternalInvariant {
                detail: format!("scheduler picked occurrence {occ}, which is not ready"),
            });
        }
        let t = std::mem::replace(&mut program.threads[i], Thread::Nil);
        let present_before = env.present_count();
        let result = match eval_thread(t, &mut env, &defs, session, &mut fuel) {
            Ok(result) => result,
            // Name the occurrence that was running: fuel diagnostics must
            // point at the thread that failed to settle, not just its term.
            Err(EvalError::FuelExhausted { spent, at }) => {
                return Err(EvalError::FuelExhausted {
                    spent,
                    at: format!("occurrence {occ}: {at}"),
                });
            }
            Err(other) => return Err(other),
        };
        if env.present_count() < present_before {
            return Err(EvalError::InternalInvariant {
                detail: "presence is monotone within an instant".into(),
            });
        }
        program.threads[i] = result.residual;
        schedule_log.push(ScheduleEntry {
            occ,
            steps: result.steps,
        });
        status[i] = classify(&program.threads[i], &env);
        if let ThreadStatus::Blocked(s) = &status[i] {
            waiters.entry(s.clone()).or_default().push(i);
        }
        for body in result.spawned {
            let st = classify(&body, &env);
            if let ThreadStatus::Blocked(s) = &st {
                waiters.entry(s.clone()).or_default().push(program.threads.len());
            }
            program.add(body);
            status.push(st);
        }
        for s in result.emitted {
            if let Some(woken) = waiters.remove(&s) {
                for w in woken {
                    // A woken thread may immediately block again, deeper in.
                    status[w] = classify(&program.threads[w], &env);
                    if let ThreadStatus::Blocked(b) = &status[w] {
                        waiters.entry(b.clone()).or_default().push(w);
                    }
                }
            }
            emitted.insert(s);
        }
    }

    debug_assert!(
        program
            .threads
            .iter()
            .all(|t| is_stuck(t, &env)),
        "instant ended with a runnable thread"
    );
    for slot in &mut program.threads {
        let t = std::mem::replace(slot, Thread::Nil);
        *slot = end_of_instant(t, &env, &defs)?;
    }
    Ok(InstantOutcome {
        program,
        env,
        emitted,
        schedule_log,
        fuel_spent: fuel.spent(),
    })
}

/// One line of a machine's io trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IoRecord {
    /// 1-based instant index.
    pub instant: u64,
    pub inputs: BTreeSet<SignalName>,
    /// Interface signals that ended the instant present (inputs included).
    pub outputs: BTreeSet<SignalName>,
    pub schedule_log: Vec<ScheduleEntry>,
    pub fuel_spent: u64,
}

fn sorted_displays(set: &BTreeSet<SignalName>) -> Vec<String> {
    let mut v: Vec<String> = set.iter().map(|s| s.display().to_string()).collect();
    v.sort();
    v
}

impl IoRecord {
    /// `instant 3: in={a} out={b,c}` — names sorted by spelling.
    pub fn trace_line(&self) -> String {
        format!(
            "instant {}: in={{{}}} out={{{}}}",
            self.instant,
            sorted_displays(&self.inputs).join(","),
            sorted_displays(&self.outputs).join(",")
        )
    }
}

/// A program driven instant by instant from the outside: feed it an input
/// set, get the interface signals that ended up present.
#[derive(Debug, Clone)]
pub struct Machine {
    pub interface: Interface,
    pub program: Program,
    pub session: NameSession,
    /// Instants completed so far.
    pub instant: u64,
}

impl Machine {
    pub fn new(loaded: crate::desugar::Loaded) -> Machine {
        Machine {
            interface: loaded.interface,
            program: loaded.program,
            session: loaded.session,
            instant: 0,
        }
    }

    /// Run one instant on `inputs`. Interface signals the environment ends
    /// up holding present — emitted or fed in — are the outputs.
    pub fn io_step(
        &mut self,
        inputs: &BTreeSet<SignalName>,
        sched: &mut Scheduler,
        fuel_budget: u64,
    ) -> Result<IoRecord, EvalError> {
        let env = input_env(inputs, &self.interface, &self.program);
        let placeholder = Program::new(vec![Thread::Nil], self.program.defs.clone());
        let program = std::mem::replace(&mut self.program, placeholder);
        let outcome = run_instant(program, env, &mut self.session, sched, fuel_budget)?;
        self.program = outcome.program;
        self.instant += 1;
        let outputs = self
            .interface
            .names()
            .iter()
            .filter(|s| outcome.env.get(s) == Some(true))
            .cloned()
            .collect();
        Ok(IoRecord {
            instant: self.instant,
            inputs: inputs.clone(),
            outputs,
            schedule_log: outcome.schedule_log,
            fuel_spent: outcome.fuel_spent,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::{DefId, Definition};
    use crate::desugar::load_source;
    use proptest::prelude::*;
    use std::sync::Arc;

    struct Rig {
        ns: NameSession,
        env: SignalEnv,
        defs: DefTable,
    }

    impl Rig {
        fn new() -> Rig {
            Rig {
                ns: NameSession::new(),
                env: SignalEnv::new(),
                defs: DefTable::new(),
            }
        }

        fn sig(&mut self, name: &str, present: bool) -> SignalName {
            let s = self.ns.intern_free(name);
            self.env.define(s.clone(), present);
            s
        }

        fn eval(&mut self, t: Thread) -> EvalResult {
            let mut fuel = Fuel::new(DEFAULT_FUEL);
            eval_thread(t, &mut self.env, &self.defs, &mut self.ns, &mut fuel)
                .expect("evaluation succeeds")
        }
    }

    #[test]
    fn nil_terminates_immediately() {
        let mut rig = Rig::new();
        let r = rig.eval(Thread::Nil);
        assert_eq!(r.residual, Thread::Nil);
        assert!(r.emitted.is_empty() && r.spawned.is_empty());
    }

    #[test]
    fn emit_makes_present_and_is_idempotent() {
        let mut rig = Rig::new();
        let a = rig.sig("a", false);
        let r = rig.eval(Thread::Emit(a.clone()));
        assert_eq!(r.residual, Thread::Nil);
        assert_eq!(r.emitted, vec![a.clone()]);
        assert_eq!(rig.env.get(&a), Some(true));
        // Emitting an already-present signal changes nothing new.
        let r2 = rig.eval(Thread::Emit(a.clone()));
        assert!(r2.emitted.is_empty());
        assert_eq!(rig.env.get(&a), Some(true));
    }

    #[test]
    fn seq_runs_left_to_right_and_blocks_in_the_left() {
        let mut rig = Rig::new();
        let a = rig.sig("a", false);
        let b = rig.sig("b", false);
        let s = rig.sig("s", false);
        let r = rig.eval(Thread::seq(Thread::Emit(a.clone()), Thread::Emit(b.clone())));
        assert_eq!(r.residual, Thread::Nil);
        assert_eq!(r.emitted, vec![a, b.clone()]);
        // Left blocks: the whole sequence suspends with the right untouched.
        let t = Thread::seq(
            Thread::when(s.clone(), Thread::Nil),
            Thread::Emit(b.clone()),
        );
        let r = rig.eval(t.clone());
        assert_eq!(r.residual, t);
        assert!(r.emitted.is_empty());
    }

    #[test]
    fn when_guards_by_presence() {
        let mut rig = Rig::new();
        let yes = rig.sig("yes", true);
        let no = rig.sig("no", false);
        let a = rig.sig("a", false);
        // Present guard: body runs, completion unwraps the guard.
        let r = rig.eval(Thread::when(yes.clone(), Thread::Emit(a.clone())));
        assert_eq!(r.residual, Thread::Nil);
        assert_eq!(r.emitted, vec![a.clone()]);
        // Absent guard: suspend without touching the body.
        let t = Thread::when(no.clone(), Thread::Emit(a.clone()));
        let r = rig.eval(t.clone());
        assert_eq!(r.residual, t);
        assert!(r.emitted.is_empty());
        // Nested: the inner absent guard is where it sticks.
        let t = Thread::when(yes.clone(), Thread::when(no.clone(), Thread::Nil));
        let r = rig.eval(t.clone());
        assert_eq!(r.residual, t);
    }

    #[test]
    fn watch_does_not_preempt_within_the_instant() {
        let mut rig = Rig::new();
        let s = rig.sig("s", true); // present the whole time — still no cut
        let a = rig.sig("a", false);
        let r = rig.eval(Thread::watch(s.clone(), Thread::Emit(a.clone())));
        assert_eq!(r.residual, Thread::Nil);
        assert_eq!(r.emitted, vec![a]);
        // Blocked body: the watch shell is kept around the suspension.
        let no = rig.sig("no", false);
        let t = Thread::watch(s.clone(), Thread::when(no.clone(), Thread::Nil));
        let r = rig.eval(t.clone());
        assert_eq!(r.residual, t);
    }

    #[test]
    fn local_mints_a_fresh_absent_signal_per_activation() {
        let mut rig = Rig::new();
        let b = rig.ns.fresh("b");
        // local b { emit b; when b {} } completes: the fresh signal is
        // emitted and then seen present.
        let t = Thread::local(
            b.clone(),
            Thread::seq(
                Thread::Emit(b.clone()),
                Thread::when(b.clone(), Thread::Nil),
            ),
        );
        let before = rig.env.len();
        let r = rig.eval(t.clone());
        assert_eq!(r.residual, Thread::Nil);
        assert_eq!(r.emitted.len(), 1);
        assert_ne!(r.emitted[0], b, "the binder itself never hits the env");
        assert_eq!(rig.env.len(), before + 1);
        // A second activation mints a different signal.
        let r2 = rig.eval(t);
        assert_eq!(rig.env.len(), before + 2);
        assert_ne!(r2.emitted[0], r.emitted[0]);
    }

    #[test]
    fn spawn_parks_the_body_without_running_it() {
        let mut rig = Rig::new();
        let a = rig.sig("a", false);
        let r = rig.eval(Thread::spawn(Thread::Emit(a.clone())));
        assert_eq!(r.residual, Thread::Nil);
        assert_eq!(r.spawned, vec![Thread::Emit(a.clone())]);
        assert!(r.emitted.is_empty());
        assert_eq!(rig.env.get(&a), Some(false));
    }

    #[test]
    fn call_substitutes_arguments_with_repeats() {
        let mut rig = Rig::new();
        let x = rig.ns.fresh("x");
        let y = rig.ns.fresh("y");
        let id = rig
            .defs
            .push(Definition {
                name: "Twice".into(),
                params: vec![x.clone(), y.clone()],
                body: Thread::seq(Thread::Emit(x.clone()), Thread::Emit(y.clone())),
                generated: false,
            })
            .unwrap();
        let s = rig.sig("s", false);
        let r = rig.eval(Thread::Call(id, vec![s.clone(), s.clone()]));
        assert_eq!(r.residual, Thread::Nil);
        // Second emit finds the signal already present.
        assert_eq!(r.emitted, vec![s]);
    }

    #[test]
    fn unknown_definition_is_reported() {
        let mut rig = Rig::new();
        let mut fuel = Fuel::new(16);
        let err = eval_thread(
            Thread::Call(DefId(7), vec![]),
            &mut rig.env,
            &rig.defs,
            &mut rig.ns,
            &mut fuel,
        )
        .unwrap_err();
        assert!(matches!(err, EvalError::UnknownDefinition { id: 7 }));
    }

    #[test]
    fn divergence_burns_fuel_not_stack() {
        // def A(x) { emit x; A(x) } run { A(s) } — never suspends.
        let mut rig = Rig::new();
        let x = rig.ns.fresh("x");
        let mut defs = DefTable::new();
        let id = defs.next_id();
        defs.push(Definition {
            name: "A".into(),
            params: vec![x.clone()],
            body: Thread::seq(Thread::Emit(x.clone()), Thread::Call(id, vec![x.clone()])),
            generated: false,
        })
        .unwrap();
        let s = rig.sig("s", false);
        let mut fuel = Fuel::new(100_000);
        let err = eval_thread(
            Thread::Call(id, vec![s]),
            &mut rig.env,
            &defs,
            &mut rig.ns,
            &mut fuel,
        )
        .unwrap_err();
        match err {
            EvalError::FuelExhausted { spent, at } => {
                assert_eq!(spent, 100_000);
                assert!(!at.is_empty());
            }
            other => panic!("expected fuel exhaustion, got {other}"),
        }
    }

    #[test]
    fn deep_nesting_is_handled_iteratively() {
        let mut rig = Rig::new();
        let s = rig.sig("s", true);
        let a = rig.sig("a", false);
        let mut t = Thread::Emit(a.clone());
        for _ in 0..10_000 {
            t = Thread::when(s.clone(), t);
        }
        assert_eq!(classify(&t, &rig.env), ThreadStatus::Ready);
        let r = rig.eval(t);
        assert_eq!(r.residual, Thread::Nil);
        assert_eq!(r.emitted, vec![a]);
    }

    #[test]
    fn classification_follows_the_leftmost_active_guard() {
        let mut rig = Rig::new();
        let on = rig.sig("on", true);
        let off = rig.sig("off", false);
        let a = rig.sig("a", false);
        assert_eq!(classify(&Thread::Nil, &rig.env), ThreadStatus::Terminated);
        assert_eq!(
            classify(&Thread::Emit(a.clone()), &rig.env),
            ThreadStatus::Ready
        );
        assert_eq!(
            classify(&Thread::when(off.clone(), Thread::Nil), &rig.env),
            ThreadStatus::Blocked(off.clone())
        );
        // Guard present, body finished: the guard can unwrap, so it is ready.
        assert_eq!(
            classify(&Thread::when(on.clone(), Thread::Nil), &rig.env),
            ThreadStatus::Ready
        );
        // Suspension bubbles out of sequences and watch shells.
        let t = Thread::watch(
            on.clone(),
            Thread::seq(Thread::when(off.clone(), Thread::Nil), Thread::Emit(a)),
        );
        assert_eq!(classify(&t, &rig.env), ThreadStatus::Blocked(off.clone()));
        assert!(is_stuck(&t, &rig.env));
    }

    #[test]
    fn end_of_instant_clauses() {
        let mut rig = Rig::new();
        let present = rig.sig("present", true);
        let absent = rig.sig("absent", false);
        let a = rig.sig("a", false);
        let defs = DefTable::new();
        // Terminated thread: unchanged.
        assert_eq!(
            end_of_instant(Thread::Nil, &rig.env, &defs).unwrap(),
            Thread::Nil
        );
        // Watch on a present signal: body dropped.
        let t = Thread::watch(
            present.clone(),
            Thread::when(absent.clone(), Thread::Emit(a.clone())),
        );
        assert_eq!(end_of_instant(t, &rig.env, &defs).unwrap(), Thread::Nil);
        // Watch on an absent signal: shell kept, body transformed.
        let inner_watch = Thread::watch(present.clone(), Thread::when(absent.clone(), Thread::Nil));
        let t = Thread::watch(absent.clone(), inner_watch);
        assert_eq!(
            end_of_instant(t, &rig.env, &defs).unwrap(),
            Thread::watch(absent.clone(), Thread::Nil)
        );
        // When on an absent signal: untouched, even around a watch that
        // would otherwise fire.
        let kept = Thread::when(
            absent.clone(),
            Thread::watch(present.clone(), Thread::Emit(a.clone())),
        );
        assert_eq!(end_of_instant(kept.clone(), &rig.env, &defs).unwrap(), kept);
        // When on a present signal: transform the body.
        let t = Thread::when(
            present.clone(),
            Thread::watch(present.clone(), Thread::Emit(a.clone())),
        );
        assert_eq!(
            end_of_instant(t, &rig.env, &defs).unwrap(),
            Thread::when(present.clone(), Thread::Nil)
        );
        // Sequences transform their head only.
        let t = Thread::seq(
            Thread::watch(present.clone(), Thread::when(absent.clone(), Thread::Nil)),
            Thread::Emit(a.clone()),
        );
        assert_eq!(
            end_of_instant(t, &rig.env, &defs).unwrap(),
            Thread::seq(Thread::Nil, Thread::Emit(a.clone()))
        );
        // A non-suspended construct on the active path is malformed.
        let bad = Thread::seq(Thread::Emit(a.clone()), Thread::Nil);
        assert!(matches!(
            end_of_instant(bad, &rig.env, &defs),
            Err(EvalError::MalformedSuspension { .. })
        ));
    }

    #[test]
    fn stacked_watch_preemption_discards_only_the_inner_shell() {
        // watch s1 { watch s2 { pause }; emit m }; with neither s1 nor s2
        // present, the pause's own bookkeeping signal is what fires: the
        // residual keeps both watch shells and drops only the finished wait.
        let loaded =
            load_source("interface s1, s2, m; run { watch s1 { watch s2 { pause }; emit m } }")
                .unwrap();
        let mut machine = Machine::new(loaded);
        let mut sched = Scheduler::round_robin();
        let r1 = machine
            .io_step(&BTreeSet::new(), &mut sched, DEFAULT_FUEL)
            .unwrap();
        assert!(r1.outputs.is_empty());
        // Next instant with no inputs: the pause completes, then emit m runs.
        let r2 = machine
            .io_step(&BTreeSet::new(), &mut sched, DEFAULT_FUEL)
            .unwrap();
        assert_eq!(sorted_displays(&r2.outputs), vec!["m".to_string()]);
    }

    #[test]
    fn run_instant_wakes_waiters_and_logs_the_schedule() {
        // t0 awaits s then emits o; t1 emits s. t0 starts out suspended, so
        // it is never offered to the scheduler until t1's emission wakes it:
        // the log shows 1 then 0.
        let mut ns = NameSession::new();
        let s = ns.intern_free("s");
        let o = ns.intern_free("o");
        let defs = Arc::new(DefTable::new());
        let program = Program::new(
            vec![
                Thread::seq(Thread::when(s.clone(), Thread::Nil), Thread::Emit(o.clone())),
                Thread::Emit(s.clone()),
            ],
            defs,
        );
        let env = input_env(&BTreeSet::new(), &Interface::default(), &program);
        let mut sched = Scheduler::round_robin();
        let outcome = run_instant(program, env, &mut ns, &mut sched, DEFAULT_FUEL).unwrap();
        assert_eq!(
            outcome.emitted,
            [s, o].into_iter().collect::<BTreeSet<_>>()
        );
        let order: Vec<u64> = outcome.schedule_log.iter().map(|e| e.occ.0).collect();
        assert_eq!(order, vec![1, 0]);
        assert!(outcome.program.threads.iter().all(|t| *t == Thread::Nil));
    }

    #[test]
    fn round_robin_passes_spawned_wakers_their_turn() {
        // Roots: [yield; emit a,  emit b]. The yield's waker spawns as
        // occurrence 2 and must run before the suspended 0 gets back in.
        let loaded = load_source("interface a, b; run { yield; emit a } run { emit b }").unwrap();
        let mut machine = Machine::new(loaded);
        let mut sched = Scheduler::round_robin();
        let r = machine
            .io_step(&BTreeSet::new(), &mut sched, DEFAULT_FUEL)
            .unwrap();
        let order: Vec<u64> = r.schedule_log.iter().map(|e| e.occ.0).collect();
        assert_eq!(order, vec![0, 1, 2, 0]);
        assert_eq!(sorted_displays(&r.outputs), vec!["a", "b"]);
    }

    #[test]
    fn outputs_include_inputs_that_ended_present() {
        let loaded = load_source("interface i, o; run { await i; emit o }").unwrap();
        let mut machine = Machine::new(loaded);
        let mut sched = Scheduler::round_robin();
        let i = machine.interface.by_display("i").unwrap();
        let first = machine
            .io_step(&BTreeSet::new(), &mut sched, DEFAULT_FUEL)
            .unwrap();
        assert_eq!(first.trace_line(), "instant 1: in={} out={}");
        let inputs: BTreeSet<SignalName> = [i].into_iter().collect();
        let second = machine.io_step(&inputs, &mut sched, DEFAULT_FUEL).unwrap();
        assert_eq!(second.trace_line(), "instant 2: in={i} out={i,o}");
    }

    // -- properties -----------------------------------------------------

    /// Local-free threads over a small interned pool: schedulers cannot
    /// change what an instant emits, and evaluation agrees with the
    /// classifier about stuckness.
    fn arb_simple(pool: Vec<SignalName>, depth: u32) -> BoxedStrategy<Thread> {
        let leaf_pool = pool.clone();
        let leaf = prop_oneof![
            Just(Thread::Nil),
            (0..leaf_pool.len()).prop_map(move |i| Thread::Emit(leaf_pool[i].clone())),
        ];
        leaf.prop_recursive(depth, 48, 3, move |inner| {
            let p1 = pool.clone();
            let p2 = pool.clone();
            prop_oneof![
                (inner.clone(), 0..p1.len())
                    .prop_map(move |(t, i)| Thread::when(p1[i].clone(), t)),
                (inner.clone(), 0..p2.len())
                    .prop_map(move |(t, i)| Thread::watch(p2[i].clone(), t)),
                inner.clone().prop_map(Thread::spawn),
                (inner.clone(), inner).prop_map(|(a, b)| Thread::seq(a, b)),
            ]
        })
        .boxed()
    }

    fn simple_programs() -> impl Strategy<Value = (Vec<SignalName>, Vec<Thread>)> {
        let mut ns = NameSession::new();
        let pool: Vec<SignalName> = ["a", "b", "c"].iter().map(|n| ns.intern_free(n)).collect();
        let pool2 = pool.clone();
        proptest::collection::vec(arb_simple(pool.clone(), 4), 1..4)
            .prop_map(move |ts| (pool2.clone(), ts))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn instant_emissions_are_schedule_independent(
            (pool, threads) in simple_programs(),
            seed in 0u64..1000,
        ) {
            let defs = Arc::new(DefTable::new());
            let program = Program::new(threads, defs);
            let iface = Interface::new(pool.clone());
            let run = |sched: &mut Scheduler| {
                let mut ns = NameSession::new();
                let env = input_env(&BTreeSet::new(), &iface, &program);
                run_instant(program.clone(), env, &mut ns, sched, DEFAULT_FUEL)
                    .expect("local-free instants terminate")
            };
            let rr = run(&mut Scheduler::round_robin());
            let rnd = run(&mut Scheduler::seeded(seed));
            prop_assert_eq!(&rr.emitted, &rnd.emitted);
            // Same final presence, hence same outputs.
            prop_assert_eq!(rr.env.present_set(), rnd.env.present_set());
        }

        #[test]
        fn evaluation_and_classification_agree(
            (pool, threads) in simple_programs(),
        ) {
            let defs = DefTable::new();
            let mut ns = NameSession::new();
            let mut env = SignalEnv::new();
            for (k, s) in pool.iter().enumerate() {
                env.define(s.clone(), k % 2 == 0);
            }
            for t in threads {
                let status = classify(&t, &env);
                let mut fuel = Fuel::new(DEFAULT_FUEL);
                let before = env.clone();
                let r = eval_thread(t.clone(), &mut env, &defs, &mut ns, &mut fuel).unwrap();
                match status {
                    ThreadStatus::Terminated => {
                        prop_assert_eq!(&t, &Thread::Nil);
                        prop_assert_eq!(&r.residual, &Thread::Nil);
                    }
                    ThreadStatus::Blocked(_) => {
                        // Stuck: running changes nothing at all.
                        prop_assert_eq!(&r.residual, &t);
                        prop_assert!(r.emitted.is_empty());
                        prop_assert!(r.spawned.is_empty());
                        prop_assert_eq!(before.present_set(), env.present_set());
                    }
                    ThreadStatus::Ready => {
                        // Progress: something observable changed.
                        prop_assert!(
                            r.residual != t
                                || !r.emitted.is_empty()
                                || !r.spawned.is_empty()
                        );
                    }
                }
                // Whatever remains is stuck under the (possibly grown) env...
                prop_assert!(is_stuck(&r.residual, &env));
            }
        }
    }
}
