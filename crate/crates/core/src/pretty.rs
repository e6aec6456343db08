//! Rendering kernel programs back to source text.
//!
//! The contract is a fixpoint: feeding the output back through the parser
//! and lowering yields a program that prints to the same string. Names keep
//! their declared spelling where they have one; fresh names (desugaring
//! binders and runtime-minted locals) get their hint, suffixed `_2`, `_3`, …
//! whenever the spelling is already taken.

use crate::ast::{DefTable, Program, Thread};
use crate::names::{Interface, NameOrigin, SignalName};
use crate::parse::KEYWORDS;
use std::collections::HashMap;
use std::fmt::Write as _;

/// Deterministic signal-name → identifier assignment for one rendering.
struct Names {
    assigned: HashMap<SignalName, String>,
    taken: Vec<String>,
}

impl Names {
    fn build(program: &Program, interface: &Interface) -> Names {
        let mut order: Vec<SignalName> = Vec::new();
        for s in interface.names() {
            order.push(s.clone());
        }
        for (_, def) in program.defs.iter() {
            order.extend(def.params.iter().cloned());
            collect(&def.body, &mut order);
        }
        for t in &program.threads {
            collect(t, &mut order);
        }
        let mut names = Names {
            assigned: HashMap::new(),
            taken: KEYWORDS.iter().map(|k| k.to_string()).collect(),
        };
        // Non-fresh names own their spelling outright; reserve those first so
        // a fresh name with the same hint gets pushed to a suffixed form.
        for s in &order {
            if s.origin() != NameOrigin::Fresh && !names.assigned.contains_key(s) {
                let spelling = s.display().to_string();
                debug_assert!(
                    !names.taken.contains(&spelling),
                    "interned names are unique per spelling"
                );
                names.taken.push(spelling.clone());
                names.assigned.insert(s.clone(), spelling);
            }
        }
        for s in &order {
            if !names.assigned.contains_key(s) {
                let hint = s.display();
                let mut candidate = hint.to_string();
                let mut serial = 1u32;
                while names.taken.contains(&candidate) {
                    serial += 1;
                    candidate = format!("{hint}_{serial}");
                }
                names.taken.push(candidate.clone());
                names.assigned.insert(s.clone(), candidate);
            }
        }
        names
    }

    fn get(&self, s: &SignalName) -> &str {
        self.assigned
            .get(s)
            .map(|x| x.as_str())
            .expect("every name was collected before rendering")
    }
}

fn collect(t: &Thread, out: &mut Vec<SignalName>) {
    match t {
        Thread::Nil => {}
        Thread::Emit(s) => out.push(s.clone()),
        Thread::Local(b, body) => {
            out.push(b.clone());
            collect(body, out);
        }
        Thread::Spawn(body) => collect(body, out),
        Thread::When(s, body) | Thread::Watch(s, body) => {
            out.push(s.clone());
            collect(body, out);
        }
        Thread::Call(_, args) => out.extend(args.iter().cloned()),
        Thread::Seq(a, b) => {
            collect(a, out);
            collect(b, out);
        }
    }
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

/// Render one statement at `level`, without a trailing newline. A `Seq` in
/// statement position is grouped in braces so sequencing stays right-folded
/// through a reparse.
fn stmt(t: &Thread, names: &Names, defs: &DefTable, level: usize, out: &mut String) {
    match t {
        Thread::Nil => out.push_str("()"),
        Thread::Emit(s) => {
            let _ = write!(out, "emit {}", names.get(s));
        }
        Thread::Local(b, body) => {
            let _ = write!(out, "local {} ", names.get(b));
            block(body, names, defs, level, out);
        }
        Thread::Spawn(body) => {
            out.push_str("thread ");
            block(body, names, defs, level, out);
        }
        Thread::When(s, body) => {
            let _ = write!(out, "when {} ", names.get(s));
            block(body, names, defs, level, out);
        }
        Thread::Watch(s, body) => {
            let _ = write!(out, "watch {} ", names.get(s));
            block(body, names, defs, level, out);
        }
        Thread::Call(id, args) => {
            let name = defs.get(*id).map(|d| d.name.as_str()).unwrap_or("?");
            let _ = write!(out, "{name}(");
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                out.push_str(names.get(a));
            }
            out.push(')');
        }
        Thread::Seq(_, _) => block(t, names, defs, level, out),
    }
}

/// Render a braced block whose contents are the statements along the right
/// spine of `t`.
fn block(t: &Thread, names: &Names, defs: &DefTable, level: usize, out: &mut String) {
    out.push_str("{\n");
    let mut cur = t;
    loop {
        match cur {
            Thread::Seq(a, b) => {
                indent(out, level + 1);
                stmt(a, names, defs, level + 1, out);
                out.push_str(";\n");
                cur = b;
            }
            last => {
                indent(out, level + 1);
                stmt(last, names, defs, level + 1, out);
                out.push('\n');
                break;
            }
        }
    }
    indent(out, level);
    out.push('}');
}

/// Print a program as parseable source.
pub fn pretty_print(program: &Program, interface: &Interface) -> String {
    let names = Names::build(program, interface);
    let mut out = String::new();
    if !interface.is_empty() {
        out.push_str("interface ");
        for (i, s) in interface.names().iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            out.push_str(names.get(s));
        }
        out.push_str(";\n\n");
    }
    for (_, def) in program.defs.iter() {
        let _ = write!(out, "def {}(", def.name);
        for (i, p) in def.params.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            out.push_str(names.get(p));
        }
        out.push_str(") ");
        block(&def.body, &names, &program.defs, 0, &mut out);
        out.push_str("\n\n");
    }
    for t in &program.threads {
        out.push_str("run ");
        block(t, &names, &program.defs, 0, &mut out);
        out.push_str("\n");
    }
    out
}

fn compact(t: &Thread, defs: &DefTable, depth: usize, out: &mut String) {
    if depth == 0 {
        out.push('…');
        return;
    }
    match t {
        Thread::Nil => out.push_str("()"),
        Thread::Emit(s) => {
            let _ = write!(out, "emit {s}");
        }
        Thread::Local(b, body) => {
            let _ = write!(out, "local {b} {{ ");
            compact(body, defs, depth - 1, out);
            out.push_str(" }");
        }
        Thread::Spawn(body) => {
            out.push_str("thread { ");
            compact(body, defs, depth - 1, out);
            out.push_str(" }");
        }
        Thread::When(s, body) => {
            let _ = write!(out, "when {s} {{ ");
            compact(body, defs, depth - 1, out);
            out.push_str(" }");
        }
        Thread::Watch(s, body) => {
            let _ = write!(out, "watch {s} {{ ");
            compact(body, defs, depth - 1, out);
            out.push_str(" }");
        }
        Thread::Call(id, args) => {
            let name = defs.get(*id).map(|d| d.name.as_str()).unwrap_or("?");
            let _ = write!(out, "{name}(");
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                let _ = write!(out, "{a}");
            }
            out.push(')');
        }
        Thread::Seq(a, b) => {
            compact(a, defs, depth - 1, out);
            out.push_str("; ");
            compact(b, defs, depth - 1, out);
        }
    }
}

/// One-line rendering for diagnostics. Fresh names keep their `#id` marker,
/// so the output pins down identity but is not meant to reparse.
pub fn render_thread(t: &Thread, defs: &DefTable) -> String {
    render_thread_truncated(t, defs, 64)
}

/// Diagnostic rendering with subterms beyond `max_depth` elided as `…`.
/// Depth-bounded so it is safe on the arbitrarily deep residuals a runaway
/// program can build up.
pub fn render_thread_truncated(t: &Thread, defs: &DefTable, max_depth: usize) -> String {
    let mut out = String::new();
    compact(t, defs, max_depth, &mut out);
    out
}
