//! Equality of programs up to renaming of private signals.
//!
//! Interface names are observable, so they must match exactly. Every other
//! free signal is private bookkeeping, and two programs are considered the
//! same when some bijection between their private names (plus the usual
//! freedom in bound names) maps one thread multiset onto the other. The
//! matcher searches for such a bijection with backtracking, pruned by
//! structural skeletons, and gives up with an explicit budget error instead
//! of returning a silent wrong answer.

use super::AnalysisError;
use crate::ast::{DefId, Program, Thread};
use crate::names::SignalName;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::sync::Arc;

/// Node-visit budget for one `equal_up_to_renaming` call.
pub const DEFAULT_MATCH_BUDGET: u64 = 1_000_000;

/// A successful match: the bijection on private free signals (interface
/// names map to themselves and are omitted).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RenamingWitness {
    pub map: BTreeMap<SignalName, SignalName>,
}

struct Matcher<'a> {
    left: &'a Program,
    right: &'a Program,
    /// Private-name bijection built so far, with its inverse.
    fwd: HashMap<SignalName, SignalName>,
    bwd: HashMap<SignalName, SignalName>,
    /// Insertion order of `fwd` keys, for backtracking.
    trail: Vec<SignalName>,
    /// Binder pairs in scope, innermost last.
    bound: Vec<(SignalName, SignalName)>,
    /// Definition pairs proven interchangeable (precomputed).
    def_equiv: HashSet<(DefId, DefId)>,
    budget: u64,
    visited: u64,
}

impl<'a> Matcher<'a> {
    fn charge(&mut self) -> Result<(), AnalysisError> {
        self.visited += 1;
        if self.visited > self.budget {
            Err(AnalysisError::SearchBudgetExceeded {
                visited: self.visited,
            })
        } else {
            Ok(())
        }
    }

    fn match_name(&mut self, a: &SignalName, b: &SignalName) -> bool {
        // Innermost binding of either side decides first: a bound name can
        // only match the name it is paired with at the same level.
        for (l, r) in self.bound.iter().rev() {
            let hit_l = l == a;
            let hit_r = r == b;
            if hit_l || hit_r {
                return hit_l && hit_r;
            }
        }
        if a.is_interface() || b.is_interface() {
            return a.is_interface() && b.is_interface() && a == b;
        }
        match (self.fwd.get(a), self.bwd.get(b)) {
            (Some(img), _) => img == b,
            (None, Some(_)) => false, // b is already someone else's image
            (None, None) => {
                self.fwd.insert(a.clone(), b.clone());
                self.bwd.insert(b.clone(), a.clone());
                self.trail.push(a.clone());
                true
            }
        }
    }

    fn rollback(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let a = self.trail.pop().expect("trail mark within bounds");
            if let Some(b) = self.fwd.remove(&a) {
                self.bwd.remove(&b);
            }
        }
    }

    fn match_thread(&mut self, a: &Thread, b: &Thread) -> Result<bool, AnalysisError> {
        self.charge()?;
        Ok(match (a, b) {
            (Thread::Nil, Thread::Nil) => true,
            (Thread::Emit(x), Thread::Emit(y)) => self.match_name(x, y),
            (Thread::Local(x, ta), Thread::Local(y, tb)) => {
                self.bound.push((x.clone(), y.clone()));
                let ok = self.match_thread(ta, tb)?;
                self.bound.pop();
                ok
            }
            (Thread::Spawn(ta), Thread::Spawn(tb)) => self.match_thread(ta, tb)?,
            (Thread::When(x, ta), Thread::When(y, tb))
            | (Thread::Watch(x, ta), Thread::Watch(y, tb)) => {
                self.match_name(x, y) && self.match_thread(ta, tb)?
            }
            (Thread::Call(i, xs), Thread::Call(j, ys)) => {
                if !self.def_equiv.contains(&(*i, *j)) || xs.len() != ys.len() {
                    false
                } else {
                    xs.iter().zip(ys).all(|(x, y)| self.match_name(x, y))
                }
            }
            (Thread::Seq(a1, a2), Thread::Seq(b1, b2)) => {
                self.match_thread(a1, b1)? && self.match_thread(a2, b2)?
            }
            _ => false,
        })
    }

    /// Multiset matching over the thread lists, backtracking across both the
    /// pairing and the name bijection. Uses an explicit frame stack rather
    /// than recursion: residual programs can hold thousands of parked
    /// threads, and one call frame per thread would exhaust the stack.
    fn match_multiset(
        &mut self,
        order: &[usize],
        used: &mut [bool],
        skel_l: &[String],
        skel_r: &[String],
    ) -> Result<bool, AnalysisError> {
        struct Frame {
            /// Next right-hand candidate to consider for this slot.
            cursor: usize,
            /// Right-hand thread currently claimed by this slot.
            taken: Option<usize>,
            /// Trail length just before the claim's bindings.
            mark: usize,
        }
        if order.is_empty() {
            return Ok(true);
        }
        let mut frames = vec![Frame { cursor: 0, taken: None, mark: 0 }];
        loop {
            let at = frames.len() - 1;
            let i = order[at];
            let mut claimed = None;
            let mut cursor = frames[at].cursor;
            while cursor < self.right.threads.len() {
                let j = cursor;
                cursor += 1;
                if used[j] || skel_l[i] != skel_r[j] {
                    continue;
                }
                let mark = self.trail.len();
                let lt = &self.left.threads[i];
                let rt = &self.right.threads[j];
                if self.match_thread(lt, rt)? {
                    claimed = Some((j, mark));
                    break;
                }
                self.rollback(mark);
            }
            let frame = &mut frames[at];
            frame.cursor = cursor;
            match claimed {
                Some((j, mark)) => {
                    used[j] = true;
                    frame.taken = Some(j);
                    frame.mark = mark;
                    if frames.len() == order.len() {
                        return Ok(true);
                    }
                    frames.push(Frame { cursor: 0, taken: None, mark: 0 });
                }
                None => {
                    // This slot is out of candidates: retreat one level,
                    // releasing the parent's claim and its name bindings.
                    frames.pop();
                    let Some(parent) = frames.last_mut() else {
                        return Ok(false);
                    };
                    if let Some(j) = parent.taken.take() {
                        used[j] = false;
                    }
                    let mark = parent.mark;
                    self.rollback(mark);
                }
            }
        }
    }
}

/// Structure of a thread with private names blanked out: a cheap invariant
/// under any candidate bijection, used to prune the pairing search.
fn skeleton(t: &Thread) -> String {
    fn name(s: &SignalName, out: &mut String) {
        if s.is_interface() {
            let _ = write!(out, "i:{};", s.display());
        } else {
            out.push('_');
        }
    }
    fn walk(t: &Thread, out: &mut String) {
        match t {
            Thread::Nil => out.push('N'),
            Thread::Emit(s) => {
                out.push('E');
                name(s, out);
            }
            Thread::Local(_, body) => {
                out.push('L');
                walk(body, out);
            }
            Thread::Spawn(body) => {
                out.push('P');
                walk(body, out);
            }
            Thread::When(s, body) => {
                out.push('W');
                name(s, out);
                walk(body, out);
            }
            Thread::Watch(s, body) => {
                out.push('V');
                name(s, out);
                walk(body, out);
            }
            Thread::Call(id, args) => {
                let _ = write!(out, "C{}/", id.0);
                for a in args {
                    name(a, out);
                }
            }
            Thread::Seq(a, b) => {
                out.push('S');
                walk(a, out);
                walk(b, out);
            }
        }
    }
    let mut out = String::new();
    walk(t, &mut out);
    out
}

/// Which definition pairs are interchangeable: alpha-equal bodies under
/// positional parameter pairing, with recursion resolved coinductively
/// (assume all arity-compatible pairs equal, strike out refuted pairs until
/// stable). Definition bodies are closed, so no free-name bijection is
/// involved.
fn def_equivalence(
    left: &Program,
    right: &Program,
    budget: u64,
) -> Result<HashSet<(DefId, DefId)>, AnalysisError> {
    let mut rel: HashSet<(DefId, DefId)> = HashSet::new();
    if Arc::ptr_eq(&left.defs, &right.defs) {
        for (id, _) in left.defs.iter() {
            rel.insert((id, id));
        }
        return Ok(rel);
    }
    for (i, d1) in left.defs.iter() {
        for (j, d2) in right.defs.iter() {
            if d1.params.len() == d2.params.len() {
                rel.insert((i, j));
            }
        }
    }
    loop {
        let mut refuted: Vec<(DefId, DefId)> = Vec::new();
        for &(i, j) in &rel {
            let d1 = left.defs.get(i).expect("left id");
            let d2 = right.defs.get(j).expect("right id");
            let mut m = Matcher {
                left,
                right,
                fwd: HashMap::new(),
                bwd: HashMap::new(),
                trail: Vec::new(),
                bound: d1
                    .params
                    .iter()
                    .cloned()
                    .zip(d2.params.iter().cloned())
                    .collect(),
                def_equiv: rel.clone(),
                budget,
                visited: 0,
            };
            if !m.match_thread(&d1.body, &d2.body)? {
                refuted.push((i, j));
            }
        }
        if refuted.is_empty() {
            return Ok(rel);
        }
        for pair in refuted {
            rel.remove(&pair);
        }
    }
}

/// Search for a private-name bijection making `left` and `right` the same
/// thread multiset. `Ok(None)` means proven unequal; budget exhaustion is an
/// error, never a silent `None`.
pub fn equal_up_to_renaming(
    left: &Program,
    right: &Program,
    budget: u64,
) -> Result<Option<RenamingWitness>, AnalysisError> {
    if left.threads.len() != right.threads.len() {
        return Ok(None);
    }
    let skel_l: Vec<String> = left.threads.iter().map(skeleton).collect();
    let skel_r: Vec<String> = right.threads.iter().map(skeleton).collect();
    {
        let mut counts: HashMap<&str, i64> = HashMap::new();
        for s in &skel_l {
            *counts.entry(s.as_str()).or_default() += 1;
        }
        for s in &skel_r {
            *counts.entry(s.as_str()).or_default() -= 1;
        }
        if counts.values().any(|c| *c != 0) {
            return Ok(None);
        }
    }
    let def_equiv = def_equivalence(left, right, budget)?;
    // Match rare skeletons first: fewer candidates, earlier pruning.
    let mut skel_count: HashMap<&str, usize> = HashMap::new();
    for s in &skel_l {
        *skel_count.entry(s.as_str()).or_default() += 1;
    }
    let mut order: Vec<usize> = (0..left.threads.len()).collect();
    order.sort_by_key(|&i| (skel_count[skel_l[i].as_str()], i));
    let mut m = Matcher {
        left,
        right,
        fwd: HashMap::new(),
        bwd: HashMap::new(),
        trail: Vec::new(),
        bound: Vec::new(),
        def_equiv,
        budget,
        visited: 0,
    };
    let mut used = vec![false; right.threads.len()];
    if m.match_multiset(&order, &mut used, &skel_l, &skel_r)? {
        Ok(Some(RenamingWitness {
            map: m.fwd.into_iter().collect(),
        }))
    } else {
        Ok(None)
    }
}

/// A canonical textual key for a program state.
///
/// Equal keys imply the programs are equal up to renaming: bound names are
/// serialized as indices, private free names are numbered by first
/// occurrence after the thread list is brought into a canonical order, and
/// interface names appear verbatim. (The converse direction can fail on
/// threads whose per-thread forms tie — such states are simply not merged,
/// which costs re-exploration but never a wrong merge.)
pub fn canonical_form(program: &Program) -> String {
    // Pass 1: per-thread serialization with thread-local numbering.
    fn serialize(
        t: &Thread,
        binders: &mut Vec<SignalName>,
        free: &mut dyn FnMut(&SignalName) -> usize,
        out: &mut String,
    ) {
        fn name(
            s: &SignalName,
            binders: &[SignalName],
            free: &mut dyn FnMut(&SignalName) -> usize,
            out: &mut String,
        ) {
            if let Some(pos) = binders.iter().rposition(|b| b == s) {
                let _ = write!(out, "b{}", binders.len() - 1 - pos);
            } else if s.is_interface() {
                let _ = write!(out, "i:{}", s.display());
            } else {
                let _ = write!(out, "f{}", free(s));
            }
        }
        match t {
            Thread::Nil => out.push('N'),
            Thread::Emit(s) => {
                out.push('E');
                name(s, binders, free, out);
                out.push(';');
            }
            Thread::Local(b, body) => {
                out.push_str("L(");
                binders.push(b.clone());
                serialize(body, binders, free, out);
                binders.pop();
                out.push(')');
            }
            Thread::Spawn(body) => {
                out.push_str("P(");
                serialize(body, binders, free, out);
                out.push(')');
            }
            Thread::When(s, body) => {
                out.push('W');
                name(s, binders, free, out);
                out.push('(');
                serialize(body, binders, free, out);
                out.push(')');
            }
            Thread::Watch(s, body) => {
                out.push('V');
                name(s, binders, free, out);
                out.push('(');
                serialize(body, binders, free, out);
                out.push(')');
            }
            Thread::Call(id, args) => {
                let _ = write!(out, "C{}(", id.0);
                for a in args {
                    name(a, binders, free, out);
                    out.push(',');
                }
                out.push(')');
            }
            Thread::Seq(a, b) => {
                out.push_str("S(");
                serialize(a, binders, free, out);
                out.push(')');
                out.push('(');
                serialize(b, binders, free, out);
                out.push(')');
            }
        }
    }

    let mut locals: Vec<(String, usize)> = program
        .threads
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let mut numbering: HashMap<SignalName, usize> = HashMap::new();
            let mut out = String::new();
            let mut binders = Vec::new();
            {
                let mut free = |s: &SignalName| {
                    let next = numbering.len();
                    *numbering.entry(s.clone()).or_insert(next)
                };
                serialize(t, &mut binders, &mut free, &mut out);
            }
            (out, i)
        })
        .collect();
    // Canonical thread order: by local form, original position breaking ties
    // (ties are what makes the key conservative rather than complete).
    locals.sort();
    // Pass 2: global numbering of private free names in canonical order.
    let mut numbering: HashMap<SignalName, usize> = HashMap::new();
    let mut key = String::new();
    for (_, i) in &locals {
        let mut binders = Vec::new();
        {
            let mut free = |s: &SignalName| {
                let next = numbering.len();
                *numbering.entry(s.clone()).or_insert(next)
            };
            serialize(&program.threads[*i], &mut binders, &mut free, &mut key);
        }
        key.push('|');
    }
    key
}
