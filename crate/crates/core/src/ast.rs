//! Kernel thread syntax: the eight constructs everything else reduces to,
//! plus definitions and the program multiset.

use crate::names::{NameSession, SignalName};
use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;
use thiserror::Error;

/// Index of a definition in its [`DefTable`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DefId(pub u32);

/// A kernel thread term.
///
/// Signals under `Local` are binders; every other signal position is a free
/// occurrence. Structural equality compares name identities — two terms that
/// differ only in the choice of a bound name are *not* `==`; that looser
/// comparison lives in `analysis::equal_up_to_renaming`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Thread {
    /// The terminated thread, written `()`.
    Nil,
    /// Make a signal present for the rest of the instant.
    Emit(SignalName),
    /// Declare a private signal for the body; running it renames the binder
    /// to a brand-new signal so parallel activations never share it.
    Local(SignalName, Box<Thread>),
    /// `thread { … }`: hand the body to the scheduler as a new thread.
    Spawn(Box<Thread>),
    /// Run the body only while the signal is present; suspend otherwise.
    When(SignalName, Box<Thread>),
    /// Run the body; if the signal is present when the instant ends, whatever
    /// remains of the body is discarded.
    Watch(SignalName, Box<Thread>),
    /// Invoke a definition with signal arguments (arguments may repeat).
    Call(DefId, Vec<SignalName>),
    /// Run the first to completion, then the second.
    Seq(Box<Thread>, Box<Thread>),
}

impl Thread {
    pub fn seq(a: Thread, b: Thread) -> Thread {
        Thread::Seq(Box::new(a), Box::new(b))
    }

    pub fn local(binder: SignalName, body: Thread) -> Thread {
        Thread::Local(binder, Box::new(body))
    }

    pub fn spawn(body: Thread) -> Thread {
        Thread::Spawn(Box::new(body))
    }

    pub fn when(signal: SignalName, body: Thread) -> Thread {
        Thread::When(signal, Box::new(body))
    }

    pub fn watch(signal: SignalName, body: Thread) -> Thread {
        Thread::Watch(signal, Box::new(body))
    }

    /// The signals occurring free in this term.
    pub fn free_signals(&self) -> BTreeSet<SignalName> {
        self.free_signals_ordered().into_iter().collect()
    }

    /// Free signals in order of first occurrence under a left-to-right
    /// traversal. This is the order loop-generated definitions list their
    /// parameters in, so it must not depend on hashing.
    pub fn free_signals_ordered(&self) -> Vec<SignalName> {
        let mut seen: BTreeSet<SignalName> = BTreeSet::new();
        let mut out = Vec::new();
        let mut bound: Vec<SignalName> = Vec::new();
        fn record(
            s: &SignalName,
            bound: &[SignalName],
            seen: &mut BTreeSet<SignalName>,
            out: &mut Vec<SignalName>,
        ) {
            if !bound.contains(s) && seen.insert(s.clone()) {
                out.push(s.clone());
            }
        }
        fn walk(
            t: &Thread,
            bound: &mut Vec<SignalName>,
            seen: &mut BTreeSet<SignalName>,
            out: &mut Vec<SignalName>,
        ) {
            match t {
                Thread::Nil => {}
                Thread::Emit(s) => record(s, bound, seen, out),
                Thread::Local(b, body) => {
                    bound.push(b.clone());
                    walk(body, bound, seen, out);
                    bound.pop();
                }
                Thread::Spawn(body) => walk(body, bound, seen, out),
                Thread::When(s, body) | Thread::Watch(s, body) => {
                    record(s, bound, seen, out);
                    walk(body, bound, seen, out);
                }
                Thread::Call(_, args) => {
                    for a in args {
                        record(a, bound, seen, out);
                    }
                }
                Thread::Seq(a, b) => {
                    walk(a, bound, seen, out);
                    walk(b, bound, seen, out);
                }
            }
        }
        walk(self, &mut bound, &mut seen, &mut out);
        out
    }

    /// Capture-avoiding simultaneous substitution of free signal occurrences.
    ///
    /// Binders shadow the mapping; a binder that would capture an incoming
    /// name is renamed to a fresh one first, which is why this needs the
    /// session. The evaluator's own substitutions (fresh locals, call
    /// unfolding) can never capture, but the operation is total anyway.
    pub fn substitute(
        &self,
        map: &HashMap<SignalName, SignalName>,
        session: &mut NameSession,
    ) -> Thread {
        if map.is_empty() {
            return self.clone();
        }
        let apply = |s: &SignalName| map.get(s).cloned().unwrap_or_else(|| s.clone());
        match self {
            Thread::Nil => Thread::Nil,
            Thread::Emit(s) => Thread::Emit(apply(s)),
            Thread::Local(b, body) => {
                let mut inner: HashMap<SignalName, SignalName> = map.clone();
                inner.remove(b);
                // Capture: some name free in the body is being renamed *to*
                // this binder. Rename the binder out of the way first.
                let captured = body
                    .free_signals()
                    .iter()
                    .any(|x| x != b && inner.get(x) == Some(b));
                if captured {
                    let fresh = session.fresh(b.display());
                    inner.insert(b.clone(), fresh.clone());
                    Thread::Local(fresh, Box::new(body.substitute(&inner, session)))
                } else {
                    Thread::Local(b.clone(), Box::new(body.substitute(&inner, session)))
                }
            }
            Thread::Spawn(body) => Thread::Spawn(Box::new(body.substitute(map, session))),
            Thread::When(s, body) => {
                Thread::When(apply(s), Box::new(body.substitute(map, session)))
            }
            Thread::Watch(s, body) => {
                Thread::Watch(apply(s), Box::new(body.substitute(map, session)))
            }
            Thread::Call(id, args) => Thread::Call(*id, args.iter().map(|a| apply(a)).collect()),
            Thread::Seq(a, b) => Thread::Seq(
                Box::new(a.substitute(map, session)),
                Box::new(b.substitute(map, session)),
            ),
        }
    }

    /// Maximum nesting depth of `Watch` wrappers. The reactivity monitor
    /// tracks this per instant to expose unbounded preemption-stack growth.
    /// Iterative: residual programs can nest arbitrarily deep over time.
    pub fn watch_depth(&self) -> usize {
        let mut max = 0usize;
        let mut work: Vec<(&Thread, usize)> = vec![(self, 0)];
        while let Some((t, d)) = work.pop() {
            match t {
                Thread::Nil | Thread::Emit(_) | Thread::Call(_, _) => {}
                Thread::Local(_, body) | Thread::Spawn(body) | Thread::When(_, body) => {
                    work.push((body, d));
                }
                Thread::Watch(_, body) => {
                    let nd = d + 1;
                    max = max.max(nd);
                    work.push((body, nd));
                }
                Thread::Seq(a, b) => {
                    work.push((a, d));
                    work.push((b, d));
                }
            }
        }
        max
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DefError {
    #[error("definition {name}: duplicate parameter {param}")]
    DuplicateParam { name: String, param: String },
    #[error("definition {name} is not closed: free signals {free:?} are not parameters")]
    OpenBody { name: String, free: Vec<String> },
}

/// One named definition. Parameters are plain signal tokens that occur free
/// in the body; invoking the definition substitutes arguments for them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Definition {
    pub name: String,
    pub params: Vec<SignalName>,
    pub body: Thread,
    /// True for definitions synthesized by loop desugaring (they still
    /// print and reparse like any other definition).
    pub generated: bool,
}

/// The definitions a program may call, indexed by [`DefId`].
///
/// Bodies must be closed under their parameters: a definition can only talk
/// about the signals it is passed. That is checked here and violations are
/// rejected, so unfolding a call can never pull a stale name into scope.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DefTable {
    defs: Vec<Definition>,
}

impl DefTable {
    pub fn new() -> DefTable {
        DefTable::default()
    }

    pub fn push(&mut self, def: Definition) -> Result<DefId, DefError> {
        for (i, p) in def.params.iter().enumerate() {
            if def.params[..i].contains(p) {
                return Err(DefError::DuplicateParam {
                    name: def.name.clone(),
                    param: p.display().to_string(),
                });
            }
        }
        let free = def.body.free_signals();
        let open: Vec<String> = free
            .iter()
            .filter(|s| !def.params.contains(s))
            .map(|s| s.display().to_string())
            .collect();
        if !open.is_empty() {
            return Err(DefError::OpenBody {
                name: def.name.clone(),
                free: open,
            });
        }
        let id = DefId(self.defs.len() as u32);
        self.defs.push(def);
        Ok(id)
    }

    /// Index of the next definition to be pushed; loop desugaring uses this
    /// to build self-referential bodies before inserting them.
    pub fn next_id(&self) -> DefId {
        DefId(self.defs.len() as u32)
    }

    pub fn get(&self, id: DefId) -> Option<&Definition> {
        self.defs.get(id.0 as usize)
    }

    pub fn len(&self) -> usize {
        self.defs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.defs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (DefId, &Definition)> {
        self.defs
            .iter()
            .enumerate()
            .map(|(i, d)| (DefId(i as u32), d))
    }
}

/// A multiset of threads plus the definitions they may call.
///
/// The `Vec` order carries occurrence identity for scheduling (creation
/// order); it has no semantic weight, and derived equality is equality of
/// this ordered representation. Terminated threads stay in the multiset as
/// `Nil`, so a program is never empty once created.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub threads: Vec<Thread>,
    pub defs: Arc<DefTable>,
}

impl Program {
    pub fn new(threads: Vec<Thread>, defs: Arc<DefTable>) -> Program {
        assert!(!threads.is_empty(), "a program holds at least one thread");
        Program { threads, defs }
    }

    /// Multiset multiplicity of a thread term.
    pub fn count(&self, t: &Thread) -> usize {
        self.threads.iter().filter(|x| *x == t).count()
    }

    pub fn add(&mut self, t: Thread) {
        self.threads.push(t);
    }

    /// Remove one occurrence of `t` if present.
    pub fn remove_one(&mut self, t: &Thread) -> bool {
        if let Some(i) = self.threads.iter().position(|x| x == t) {
            self.threads.remove(i);
            true
        } else {
            false
        }
    }

    /// Multiset union with a batch of threads (spawned threads join here).
    pub fn extend(&mut self, ts: impl IntoIterator<Item = Thread>) {
        self.threads.extend(ts);
    }

    /// Free signals across all threads. Definition bodies are closed, so
    /// call arguments already account for everything a call can mention.
    pub fn free_signals(&self) -> BTreeSet<SignalName> {
        let mut out = BTreeSet::new();
        for t in &self.threads {
            out.extend(t.free_signals());
        }
        out
    }

    /// Maximum watch nesting across the multiset.
    pub fn watch_depth(&self) -> usize {
        self.threads.iter().map(Thread::watch_depth).max().unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn session() -> NameSession {
        NameSession::new()
    }

    #[test]
    fn free_signals_sees_through_binders() {
        let mut ns = session();
        let s = ns.intern_free("s");
        let x = ns.intern_free("x");
        let b = ns.fresh("b");
        // local b { emit b; emit s }; when x ()
        let t = Thread::seq(
            Thread::local(
                b.clone(),
                Thread::seq(Thread::Emit(b.clone()), Thread::Emit(s.clone())),
            ),
            Thread::when(x.clone(), Thread::Nil),
        );
        let free = t.free_signals();
        assert!(free.contains(&s));
        assert!(free.contains(&x));
        assert!(!free.contains(&b));
        assert_eq!(t.free_signals_ordered(), vec![s, x]);
    }

    #[test]
    fn substitute_respects_shadowing() {
        let mut ns = session();
        let s = ns.intern_free("s");
        let s2 = ns.fresh("s2");
        // local s { emit s } is untouched by [s2/s]: the occurrence is bound.
        let t = Thread::local(s.clone(), Thread::Emit(s.clone()));
        let mut map = HashMap::new();
        map.insert(s.clone(), s2.clone());
        assert_eq!(t.substitute(&map, &mut ns), t);
    }

    #[test]
    fn substitute_avoids_capture() {
        let mut ns = session();
        let s = ns.intern_free("s");
        let x = ns.intern_free("x");
        // local s { emit x } under [s/x] must not capture the incoming s.
        let t = Thread::local(s.clone(), Thread::Emit(x.clone()));
        let mut map = HashMap::new();
        map.insert(x.clone(), s.clone());
        let out = t.substitute(&map, &mut ns);
        match out {
            Thread::Local(b, body) => {
                assert_ne!(b, s, "binder must be renamed away from the incoming name");
                assert_eq!(*body, Thread::Emit(s.clone()));
            }
            other => panic!("expected a local, got {other:?}"),
        }
        // And the free-signal law still holds: free(out) = map(free(t)).
        assert_eq!(
            t.substitute(&map, &mut ns).free_signals(),
            [s].into_iter().collect()
        );
    }

    #[test]
    fn def_table_rejects_open_bodies_and_duplicate_params() {
        let mut ns = session();
        let x = ns.fresh("x");
        let y = ns.intern_free("y");
        let mut table = DefTable::new();
        let open = Definition {
            name: "A".into(),
            params: vec![x.clone()],
            body: Thread::Emit(y.clone()),
            generated: false,
        };
        assert!(matches!(table.push(open), Err(DefError::OpenBody { .. })));
        let dup = Definition {
            name: "B".into(),
            params: vec![x.clone(), x.clone()],
            body: Thread::Nil,
            generated: false,
        };
        assert!(matches!(
            table.push(dup),
            Err(DefError::DuplicateParam { .. })
        ));
        let ok = Definition {
            name: "C".into(),
            params: vec![x.clone()],
            body: Thread::Emit(x.clone()),
            generated: false,
        };
        assert!(table.push(ok).is_ok());
        assert_eq!(table.len(), 1);
    }

    #[test]
    fn repeated_call_arguments_are_allowed() {
        let mut ns = session();
        let x = ns.fresh("x");
        let y = ns.fresh("y");
        let s = ns.intern_free("s");
        let mut table = DefTable::new();
        let id = table
            .push(Definition {
                name: "Twice".into(),
                params: vec![x.clone(), y.clone()],
                body: Thread::seq(Thread::Emit(x.clone()), Thread::Emit(y.clone())),
                generated: false,
            })
            .unwrap();
        let call = Thread::Call(id, vec![s.clone(), s.clone()]);
        assert_eq!(call.free_signals(), [s].into_iter().collect());
    }

    // -- properties ---------------------------------------------------------

    /// A tiny structural generator over a fixed 4-name pool, depth-bounded.
    fn arb_thread(pool: Vec<SignalName>, depth: u32) -> BoxedStrategy<Thread> {
        let leaf_pool = pool.clone();
        let leaf = prop_oneof![
            Just(Thread::Nil),
            (0..leaf_pool.len()).prop_map(move |i| Thread::Emit(leaf_pool[i].clone())),
        ];
        leaf.prop_recursive(depth, 64, 4, move |inner| {
            let p1 = pool.clone();
            let p2 = pool.clone();
            let p3 = pool.clone();
            prop_oneof![
                (inner.clone(), 0..p1.len())
                    .prop_map(move |(t, i)| Thread::local(p1[i].clone(), t)),
                inner.clone().prop_map(Thread::spawn),
                (inner.clone(), 0..p2.len())
                    .prop_map(move |(t, i)| Thread::when(p2[i].clone(), t)),
                (inner.clone(), 0..p3.len())
                    .prop_map(move |(t, i)| Thread::watch(p3[i].clone(), t)),
                (inner.clone(), inner).prop_map(|(a, b)| Thread::seq(a, b)),
            ]
        })
        .boxed()
    }

    fn pool_and_threads() -> impl Strategy<Value = (Vec<SignalName>, Thread)> {
        let mut ns = NameSession::new();
        let pool: Vec<SignalName> = ["a", "b", "c", "d"]
            .iter()
            .map(|n| ns.intern_free(n))
            .collect();
        arb_thread(pool.clone(), 5).prop_map(move |t| (pool.clone(), t))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        /// free(subst(t, m)) = m(free(t)) for injective renamings.
        #[test]
        fn substitution_free_signal_law((pool, t) in pool_and_threads()) {
            // Names are identified by session-local ids, so a session used
            // alongside the pool's must skip past the pool's id range.
            let mut ns = NameSession::new();
            for _ in 0..pool.len() {
                let _ = ns.fresh("pad");
            }
            // Injective map: pool[i] -> fresh name, pairwise distinct.
            let mut map = HashMap::new();
            for p in &pool {
                let img = ns.fresh(&format!("r_{}", p.display()));
                map.insert(p.clone(), img);
            }
            let before = t.free_signals();
            let after = t.substitute(&map, &mut ns).free_signals();
            let expected: BTreeSet<SignalName> = before
                .iter()
                .map(|s| map.get(s).cloned().unwrap_or_else(|| s.clone()))
                .collect();
            prop_assert_eq!(after, expected);
        }

        /// Substituting names that are not free is the identity.
        #[test]
        fn substitution_off_support_is_identity((pool, t) in pool_and_threads()) {
            let mut ns = NameSession::new();
            for _ in 0..pool.len() {
                let _ = ns.fresh("pad"); // keep ids disjoint from the pool's
            }
            let mut map = HashMap::new();
            map.insert(ns.fresh("ghost"), ns.fresh("ghost2"));
            prop_assert_eq!(t.substitute(&map, &mut ns), t);
        }

        /// Multiset count is additive under union.
        #[test]
        fn multiset_count_additivity(
            (pool, t) in pool_and_threads(),
            extra in 0usize..4,
            others in proptest::collection::vec(proptest::bool::ANY, 0..6),
        ) {
            let defs = Arc::new(DefTable::new());
            let mut p = Program::new(vec![Thread::Nil], defs.clone());
            for _ in 0..extra {
                p.add(t.clone());
            }
            let mut q: Vec<Thread> = Vec::new();
            for flag in &others {
                q.push(if *flag { t.clone() } else { Thread::Emit(pool[0].clone()) });
            }
            let before = p.count(&t);
            let q_count = q.iter().filter(|x| **x == t).count();
            p.extend(q);
            prop_assert_eq!(p.count(&t), before + q_count);
        }
    }
}
