//! Surface programs: what the parser produces and the desugarer consumes.
//!
//! Surface terms still contain the derived constructs (`await`, `loop`,
//! `now`, `pause`, `exit`, `trap`, `present`, `yield`) and the list sugar
//! for `local`/`when`/`watch`. Names are plain strings here; identity
//! resolution happens during lowering.

use std::collections::BTreeSet;
use std::fmt;

/// Line/column of a token, for diagnostics (both 1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Spanned<T> {
    pub pos: Pos,
    pub value: T,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SurfaceTerm {
    pub pos: Pos,
    pub kind: SurfaceKind,
}

impl SurfaceTerm {
    pub fn new(kind: SurfaceKind) -> SurfaceTerm {
        SurfaceTerm {
            pos: Pos::default(),
            kind,
        }
    }

    pub fn at(pos: Pos, kind: SurfaceKind) -> SurfaceTerm {
        SurfaceTerm { pos, kind }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SurfaceKind {
    Nil,
    Emit(String),
    /// `local a, b { … }` — one or more binders, nested left to right.
    Local(Vec<String>, Box<SurfaceTerm>),
    Spawn(Box<SurfaceTerm>),
    /// `when a, b { … }` — list sugar nests like `local`.
    When(Vec<String>, Box<SurfaceTerm>),
    Watch(Vec<String>, Box<SurfaceTerm>),
    Call(String, Vec<String>),
    Seq(Box<SurfaceTerm>, Box<SurfaceTerm>),
    // Derived constructs, eliminated by lowering:
    Await(String),
    Loop(Box<SurfaceTerm>),
    Now(Box<SurfaceTerm>),
    Pause,
    Exit(String),
    /// `trap s { … }` — binds `s` in the body.
    Trap(String, Box<SurfaceTerm>),
    /// `present s { then } else { else }`.
    Present(String, Box<SurfaceTerm>, Box<SurfaceTerm>),
    Yield,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SurfaceDef {
    pub name: Spanned<String>,
    pub params: Vec<Spanned<String>>,
    pub body: SurfaceTerm,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SurfaceProgram {
    pub interface: Vec<Spanned<String>>,
    pub defs: Vec<SurfaceDef>,
    /// One entry per `run { … }` block; the initial thread multiset.
    pub roots: Vec<SurfaceTerm>,
}

/// A validation problem, reported as `line:col: message` by the CLI.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{pos}: {message}")]
pub struct SurfaceError {
    pub pos: Pos,
    pub message: String,
}

fn err(pos: Pos, message: impl Into<String>) -> SurfaceError {
    SurfaceError {
        pos,
        message: message.into(),
    }
}

/// Free signal names of a surface term, string-level. `bound` is the stack
/// of enclosing binders (locals, traps, definition parameters).
pub fn surface_free_names(term: &SurfaceTerm, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
    let free = |s: &String, bound: &Vec<String>, out: &mut BTreeSet<String>| {
        if !bound.contains(s) {
            out.insert(s.clone());
        }
    };
    match &term.kind {
        SurfaceKind::Nil | SurfaceKind::Pause | SurfaceKind::Yield => {}
        SurfaceKind::Emit(s) | SurfaceKind::Await(s) | SurfaceKind::Exit(s) => {
            free(s, bound, out)
        }
        SurfaceKind::Local(names, body) => {
            bound.extend(names.iter().cloned());
            surface_free_names(body, bound, out);
            bound.truncate(bound.len() - names.len());
        }
        SurfaceKind::Trap(name, body) => {
            bound.push(name.clone());
            surface_free_names(body, bound, out);
            bound.pop();
        }
        SurfaceKind::Spawn(body) | SurfaceKind::Loop(body) | SurfaceKind::Now(body) => {
            surface_free_names(body, bound, out)
        }
        SurfaceKind::When(names, body) | SurfaceKind::Watch(names, body) => {
            for s in names {
                free(s, bound, out);
            }
            surface_free_names(body, bound, out);
        }
        SurfaceKind::Present(s, a, b) => {
            free(s, bound, out);
            surface_free_names(a, bound, out);
            surface_free_names(b, bound, out);
        }
        SurfaceKind::Call(_, args) => {
            for a in args {
                free(a, bound, out);
            }
        }
        SurfaceKind::Seq(a, b) => {
            surface_free_names(a, bound, out);
            surface_free_names(b, bound, out);
        }
    }
}

/// Check the program-level rules the grammar cannot express: unique
/// interface and definition names, calls that resolve with the right arity,
/// definition bodies closed under their parameters, and at least one run
/// block.
pub fn validate(sp: &SurfaceProgram) -> Result<(), SurfaceError> {
    for (i, name) in sp.interface.iter().enumerate() {
        if sp.interface[..i].iter().any(|n| n.value == name.value) {
            return Err(err(
                name.pos,
                format!("duplicate interface signal `{}`", name.value),
            ));
        }
    }
    for (i, def) in sp.defs.iter().enumerate() {
        if sp.defs[..i].iter().any(|d| d.name.value == def.name.value) {
            return Err(err(
                def.name.pos,
                format!("duplicate definition `{}`", def.name.value),
            ));
        }
        for (j, p) in def.params.iter().enumerate() {
            if def.params[..j].iter().any(|q| q.value == p.value) {
                return Err(err(
                    p.pos,
                    format!(
                        "duplicate parameter `{}` in definition `{}`",
                        p.value, def.name.value
                    ),
                ));
            }
        }
        let mut bound: Vec<String> = def.params.iter().map(|p| p.value.clone()).collect();
        let mut free = BTreeSet::new();
        surface_free_names(&def.body, &mut bound, &mut free);
        if !free.is_empty() {
            let list: Vec<String> = free.into_iter().collect();
            return Err(err(
                def.name.pos,
                format!(
                    "definition `{}` mentions signals that are not parameters: {} \
                     (definitions are closed: pass every signal they use)",
                    def.name.value,
                    list.join(", ")
                ),
            ));
        }
    }
    if sp.roots.is_empty() {
        return Err(err(
            Pos { line: 1, col: 1 },
            "program has no `run { … }` block".to_string(),
        ));
    }
    let check_calls = |term: &SurfaceTerm| -> Result<(), SurfaceError> {
        let mut stack = vec![term];
        while let Some(t) = stack.pop() {
            match &t.kind {
                SurfaceKind::Call(name, args) => {
                    let Some(def) = sp.defs.iter().find(|d| &d.name.value == name) else {
                        return Err(err(t.pos, format!("call to unknown definition `{name}`")));
                    };
                    if def.params.len() != args.len() {
                        return Err(err(
                            t.pos,
                            format!(
                                "`{name}` takes {} argument(s), got {}",
                                def.params.len(),
                                args.len()
                            ),
                        ));
                    }
                }
                SurfaceKind::Local(_, b)
                | SurfaceKind::Spawn(b)
                | SurfaceKind::When(_, b)
                | SurfaceKind::Watch(_, b)
                | SurfaceKind::Loop(b)
                | SurfaceKind::Now(b)
                | SurfaceKind::Trap(_, b) => stack.push(b),
                SurfaceKind::Present(_, a, b) | SurfaceKind::Seq(a, b) => {
                    stack.push(a);
                    stack.push(b);
                }
                _ => {}
            }
        }
        Ok(())
    };
    for def in &sp.defs {
        check_calls(&def.body)?;
    }
    for root in &sp.roots {
        check_calls(root)?;
    }
    Ok(())
}
