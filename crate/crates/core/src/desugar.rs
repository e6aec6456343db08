//! Lowering surface programs to the kernel.
//!
//! Every derived construct expands into the eight kernel forms:
//!
//! - `await s`            → `when s ()`
//! - `loop { T }`         → a generated recursive definition `L(s…) = T; L(s…)`
//!                          over the free signals of `T` (one definition per
//!                          syntactic loop)
//! - `now { T }`          → `local n { emit n; watch n { T } }`, `n` fresh
//! - `pause`              → `local p { now { await p } }` fully expanded
//! - `exit s`             → `emit s; pause`
//! - `trap s { T }`       → `local s { watch s { T } }`
//! - `present s {A}{B}`   → the three-part join encoding: a watcher thread
//!                          that runs `B` next instant unless `s` shows up,
//!                          a `now`-bounded wait that runs `A` as soon as it
//!                          does, and an `await` on a fresh join signal
//! - `yield`              → `local y { thread { emit y }; await y }`
//!
//! Binders introduced here are session-fresh, so they can never collide with
//! names the user wrote. The output contains no derived nodes by type.

use crate::ast::{DefId, DefTable, Definition, Program, Thread};
use crate::names::{Interface, NameSession, SignalName};
use crate::parse::{parse, ParseError};
use crate::surface::{SurfaceKind, SurfaceProgram, SurfaceTerm};
use std::collections::HashMap;
use std::sync::Arc;
use thiserror::Error;

/// A lowered program together with the name context it was minted in.
/// The session travels with the program so that every name created while it
/// runs stays distinct from everything already in scope.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub program: Program,
    pub interface: Interface,
    pub session: NameSession,
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("{0}")]
    Parse(#[from] ParseError),
    #[error("interface mismatch: left declares {left:?}, right declares {right:?}")]
    InterfaceMismatch { left: Vec<String>, right: Vec<String> },
}

struct Lowerer<'a> {
    session: &'a mut NameSession,
    user_def_ids: HashMap<String, DefId>,
    n_user: usize,
    generated: Vec<Definition>,
    taken_def_names: Vec<String>,
    loop_counter: u32,
}

type Scope = Vec<(String, SignalName)>;

impl<'a> Lowerer<'a> {
    fn resolve(&mut self, name: &str, scope: &Scope) -> SignalName {
        for (n, tok) in scope.iter().rev() {
            if n == name {
                return tok.clone();
            }
        }
        self.session.intern_free(name)
    }

    fn fresh_loop_name(&mut self) -> String {
        loop {
            self.loop_counter += 1;
            let candidate = format!("loop_{}", self.loop_counter);
            if !self.taken_def_names.contains(&candidate) {
                self.taken_def_names.push(candidate.clone());
                return candidate;
            }
        }
    }

    /// `now { body }` = `local n { emit n; watch n { body } }`.
    fn now(&mut self, body: Thread) -> Thread {
        let n = self.session.fresh("n");
        Thread::local(
            n.clone(),
            Thread::seq(Thread::Emit(n.clone()), Thread::watch(n, body)),
        )
    }

    /// `pause` = `local p { now { await p } }`: the fresh `p` is never
    /// emitted, so the `await` suspends; the `now` signal is present at the
    /// end of the instant and discards it, and the pause completes at the
    /// start of the next instant.
    fn pause(&mut self) -> Thread {
        let p = self.session.fresh("p");
        let waiting = Thread::when(p.clone(), Thread::Nil);
        let bounded = self.now(waiting);
        Thread::local(p, bounded)
    }

    fn lower(&mut self, term: &SurfaceTerm, scope: &mut Scope) -> Thread {
        match &term.kind {
            SurfaceKind::Nil => Thread::Nil,
            SurfaceKind::Emit(s) => Thread::Emit(self.resolve(s, scope)),
            SurfaceKind::Local(names, body) => {
                for n in names {
                    let tok = self.session.fresh(n);
                    scope.push((n.clone(), tok));
                }
                let mut t = self.lower(body, scope);
                for _ in 0..names.len() {
                    let (_, tok) = scope.pop().expect("scope underflow");
                    t = Thread::local(tok, t);
                }
                t
            }
            SurfaceKind::Spawn(body) => Thread::spawn(self.lower(body, scope)),
            SurfaceKind::When(names, body) => {
                let toks: Vec<SignalName> =
                    names.iter().map(|n| self.resolve(n, scope)).collect();
                let mut t = self.lower(body, scope);
                for tok in toks.into_iter().rev() {
                    t = Thread::when(tok, t);
                }
                t
            }
            SurfaceKind::Watch(names, body) => {
                let toks: Vec<SignalName> =
                    names.iter().map(|n| self.resolve(n, scope)).collect();
                let mut t = self.lower(body, scope);
                for tok in toks.into_iter().rev() {
                    t = Thread::watch(tok, t);
                }
                t
            }
            SurfaceKind::Call(name, args) => {
                let id = *self
                    .user_def_ids
                    .get(name)
                    .expect("validated: call target exists");
                let args = args.iter().map(|a| self.resolve(a, scope)).collect();
                Thread::Call(id, args)
            }
            SurfaceKind::Seq(a, b) => {
                Thread::seq(self.lower(a, scope), self.lower(b, scope))
            }
            SurfaceKind::Await(s) => Thread::when(self.resolve(s, scope), Thread::Nil),
            SurfaceKind::Loop(body) => {
                let lowered = self.lower(body, scope);
                let args = lowered.free_signals_ordered();
                // The definition gets its own fresh parameters (hygiene: the
                // printed form must lower back to the same shape, and def
                // params are always binder-fresh).
                let params: Vec<SignalName> =
                    args.iter().map(|a| self.session.fresh(a.display())).collect();
                let renaming: HashMap<SignalName, SignalName> = args
                    .iter()
                    .cloned()
                    .zip(params.iter().cloned())
                    .collect();
                let def_body = lowered.substitute(&renaming, self.session);
                let id = DefId((self.n_user + self.generated.len()) as u32);
                let name = self.fresh_loop_name();
                self.generated.push(Definition {
                    name,
                    params: params.clone(),
                    body: Thread::seq(def_body, Thread::Call(id, params)),
                    generated: true,
                });
                Thread::Call(id, args)
            }
            SurfaceKind::Now(body) => {
                let lowered = self.lower(body, scope);
                self.now(lowered)
            }
            SurfaceKind::Pause => self.pause(),
            SurfaceKind::Exit(s) => {
                let sig = self.resolve(s, scope);
                Thread::seq(Thread::Emit(sig), self.pause())
            }
            SurfaceKind::Trap(name, body) => {
                let tok = self.session.fresh(name);
                scope.push((name.clone(), tok.clone()));
                let lowered = self.lower(body, scope);
                scope.pop();
                Thread::local(tok.clone(), Thread::watch(tok, lowered))
            }
            SurfaceKind::Present(s, then_branch, else_branch) => {
                let sig = self.resolve(s, scope);
                let t_then = self.lower(then_branch, scope);
                let t_else = self.lower(else_branch, scope);
                let join = self.session.fresh("t");
                // thread { watch s { pause; thread { else; emit join } } }
                let watcher = Thread::spawn(Thread::watch(
                    sig.clone(),
                    Thread::seq(
                        self.pause(),
                        Thread::spawn(Thread::seq(t_else, Thread::Emit(join.clone()))),
                    ),
                ));
                // now { await s; thread { then; emit join } }
                let awaiting = self.now(Thread::seq(
                    Thread::when(sig, Thread::Nil),
                    Thread::spawn(Thread::seq(t_then, Thread::Emit(join.clone()))),
                ));
                Thread::local(
                    join.clone(),
                    Thread::seq(
                        watcher,
                        Thread::seq(awaiting, Thread::when(join, Thread::Nil)),
                    ),
                )
            }
            SurfaceKind::Yield => {
                let y = self.session.fresh("y");
                Thread::local(
                    y.clone(),
                    Thread::seq(
                        Thread::spawn(Thread::Emit(y.clone())),
                        Thread::when(y, Thread::Nil),
                    ),
                )
            }
        }
    }
}

/// Lower a validated surface program into a kernel program, interning the
/// interface and every free name in `session`.
pub fn lower(sp: &SurfaceProgram, session: &mut NameSession) -> (Program, Interface) {
    let interface = Interface::new(
        sp.interface
            .iter()
            .map(|n| session.intern_interface(&n.value))
            .collect(),
    );
    let mut lw = Lowerer {
        session,
        user_def_ids: sp
            .defs
            .iter()
            .enumerate()
            .map(|(i, d)| (d.name.value.clone(), DefId(i as u32)))
            .collect(),
        n_user: sp.defs.len(),
        generated: Vec::new(),
        taken_def_names: sp.defs.iter().map(|d| d.name.value.clone()).collect(),
        loop_counter: 0,
    };
    let mut user_defs = Vec::new();
    for def in &sp.defs {
        let mut scope: Scope = def
            .params
            .iter()
            .map(|p| (p.value.clone(), lw.session.fresh(&p.value)))
            .collect();
        let body = lw.lower(&def.body, &mut scope);
        let params = scope.into_iter().map(|(_, tok)| tok).collect();
        user_defs.push(Definition {
            name: def.name.value.clone(),
            params,
            body,
            generated: false,
        });
    }
    let mut roots = Vec::new();
    for root in &sp.roots {
        let mut scope = Scope::new();
        roots.push(lw.lower(root, &mut scope));
    }
    let generated = std::mem::take(&mut lw.generated);
    let mut table = DefTable::new();
    for def in user_defs.into_iter().chain(generated) {
        table
            .push(def)
            .expect("lowered definitions are closed by construction");
    }
    (Program::new(roots, Arc::new(table)), interface)
}

/// Parse, validate and lower a source file in one step.
pub fn load_source(src: &str) -> Result<Loaded, ParseError> {
    let sp = parse(src)?;
    let mut session = NameSession::new();
    let (program, interface) = lower(&sp, &mut session);
    Ok(Loaded {
        program,
        interface,
        session,
    })
}

/// Load two programs against a shared name context so their interfaces are
/// the *same* tokens. Required by the equivalence checker; rejects programs
/// whose declared interfaces differ.
pub fn load_two(left: &str, right: &str) -> Result<(Loaded, Loaded), LoadError> {
    let sp_l = parse(left)?;
    let sp_r = parse(right)?;
    let names_l: Vec<String> = sp_l.interface.iter().map(|n| n.value.clone()).collect();
    let names_r: Vec<String> = sp_r.interface.iter().map(|n| n.value.clone()).collect();
    let mut sorted_l = names_l.clone();
    let mut sorted_r = names_r.clone();
    sorted_l.sort();
    sorted_r.sort();
    if sorted_l != sorted_r {
        return Err(LoadError::InterfaceMismatch {
            left: names_l,
            right: names_r,
        });
    }
    let mut session = NameSession::new();
    let (prog_l, iface_l) = lower(&sp_l, &mut session);
    let (prog_r, _iface_r) = lower(&sp_r, &mut session);
    let left = Loaded {
        program: prog_l,
        interface: iface_l.clone(),
        session: session.clone(),
    };
    let right = Loaded {
        program: prog_r,
        interface: iface_l,
        session,
    };
    Ok((left, right))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::names::NameOrigin;

    fn kernel_of(src: &str) -> Loaded {
        load_source(src).expect("load")
    }

    #[test]
    fn await_is_a_when_over_nil() {
        let loaded = kernel_of("interface s; run { await s }");
        match &loaded.program.threads[0] {
            Thread::When(sig, body) => {
                assert_eq!(sig.display(), "s");
                assert!(sig.is_interface());
                assert_eq!(**body, Thread::Nil);
            }
            other => panic!("expected when, got {other:?}"),
        }
    }

    #[test]
    fn pause_expands_to_the_double_local() {
        let loaded = kernel_of("run { pause }");
        // local p { local n { emit n; watch n { when p { () } } } }
        let Thread::Local(p, body) = &loaded.program.threads[0] else {
            panic!("expected local")
        };
        let Thread::Local(n, body) = &**body else {
            panic!("expected inner local")
        };
        let Thread::Seq(emit, watch) = &**body else {
            panic!("expected seq")
        };
        assert_eq!(**emit, Thread::Emit(n.clone()));
        let Thread::Watch(wn, inner) = &**watch else {
            panic!("expected watch")
        };
        assert_eq!(wn, n);
        assert_eq!(**inner, Thread::when(p.clone(), Thread::Nil));
        assert_eq!(p.origin(), NameOrigin::Fresh);
        assert_eq!(n.origin(), NameOrigin::Fresh);
        assert_ne!(p, n);
    }

    #[test]
    fn loop_generates_one_recursive_definition_per_occurrence() {
        let loaded = kernel_of("interface x; run { loop { emit x } }; run { loop { emit x } }");
        let defs = &loaded.program.defs;
        assert_eq!(defs.len(), 2, "one definition per syntactic loop");
        for (id, def) in defs.iter() {
            assert!(def.generated);
            assert_eq!(def.params.len(), 1);
            assert_eq!(def.params[0].display(), "x");
            // body = emit x; L(x)
            let expected = Thread::seq(
                Thread::Emit(def.params[0].clone()),
                Thread::Call(id, def.params.clone()),
            );
            assert_eq!(def.body, expected);
        }
        assert!(matches!(&loaded.program.threads[0], Thread::Call(_, args) if args.len() == 1));
    }

    #[test]
    fn trap_is_local_watch() {
        let loaded = kernel_of("interface a; run { trap t { emit a } }");
        let Thread::Local(tok, body) = &loaded.program.threads[0] else {
            panic!("expected local")
        };
        let Thread::Watch(w, inner) = &**body else {
            panic!("expected watch")
        };
        assert_eq!(w, tok);
        assert!(matches!(&**inner, Thread::Emit(s) if s.display() == "a"));
    }

    #[test]
    fn yield_spawns_its_own_waker() {
        let loaded = kernel_of("run { yield }");
        let Thread::Local(y, body) = &loaded.program.threads[0] else {
            panic!("expected local")
        };
        let expected = Thread::seq(
            Thread::spawn(Thread::Emit(y.clone())),
            Thread::when(y.clone(), Thread::Nil),
        );
        assert_eq!(**body, expected);
    }

    #[test]
    fn present_encoding_shape_and_fresh_join() {
        let loaded = kernel_of("interface s, a, b; run { present s { emit a } else { emit b } }");
        let Thread::Local(join, body) = &loaded.program.threads[0] else {
            panic!("expected local join")
        };
        assert_eq!(join.origin(), NameOrigin::Fresh);
        let Thread::Seq(watcher, rest) = &**body else {
            panic!("expected seq")
        };
        // Watcher branch: thread { watch s { pause…; thread { emit b; emit join } } }
        let Thread::Spawn(w) = &**watcher else {
            panic!("expected spawned watcher")
        };
        let Thread::Watch(ws, winner) = &**w else {
            panic!("expected watch in watcher")
        };
        assert_eq!(ws.display(), "s");
        let Thread::Seq(_pause, spawn_else) = &**winner else {
            panic!("expected pause; spawn")
        };
        let Thread::Spawn(else_body) = &**spawn_else else {
            panic!("expected spawned else branch")
        };
        let expected_else = Thread::seq(
            Thread::Emit(loaded.interface.by_display("b").unwrap()),
            Thread::Emit(join.clone()),
        );
        assert_eq!(**else_body, expected_else);
        // Main branch ends by awaiting the join signal.
        let Thread::Seq(_now, await_join) = &**rest else {
            panic!("expected now; await")
        };
        assert_eq!(**await_join, Thread::when(join.clone(), Thread::Nil));
        // The join signal is fresh: it is not free in either user branch.
        assert!(!Thread::Emit(loaded.interface.by_display("a").unwrap())
            .free_signals()
            .contains(join));
    }

    #[test]
    fn desugared_binders_do_not_occur_free_in_user_subterms() {
        // For `now { T }`: the fresh n must not be free in T's lowering.
        let loaded = kernel_of("interface a; run { now { emit a } }");
        let Thread::Local(n, body) = &loaded.program.threads[0] else {
            panic!()
        };
        let Thread::Seq(_, watch) = &**body else { panic!() };
        let Thread::Watch(_, user) = &**watch else { panic!() };
        assert!(!user.free_signals().contains(n));
    }

    #[test]
    fn load_two_shares_interface_tokens() {
        let (l, r) = load_two(
            "interface a; run { emit a }",
            "interface a; run { await a }",
        )
        .unwrap();
        assert_eq!(l.interface, r.interface);
        let Thread::Emit(sl) = &l.program.threads[0] else { panic!() };
        let Thread::When(sr, _) = &r.program.threads[0] else { panic!() };
        assert_eq!(sl, sr);
        assert!(load_two("interface a; run { () }", "interface b; run { () }").is_err());
    }
}
