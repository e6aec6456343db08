//! Seeded random program generation, for exercising the checkers.
//!
//! Generated programs are recursion-free (no `def`, no `loop`), so every
//! instant terminates by construction — they can diverge in what they emit,
//! suspend on, and preempt, but never in how long an instant takes. That
//! makes them safe fodder for the determinism and equivalence checkers,
//! which assume instants finish.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use std::fmt::Write as _;

#[derive(Debug, Clone)]
pub struct GenConfig {
    /// Interface signals (named `s0`, `s1`, …).
    pub max_signals: usize,
    /// Maximum statement nesting depth.
    pub max_depth: u32,
    /// Maximum number of `run { … }` blocks.
    pub max_roots: usize,
}

impl Default for GenConfig {
    fn default() -> GenConfig {
        GenConfig {
            max_signals: 3,
            max_depth: 5,
            max_roots: 3,
        }
    }
}

struct Gen {
    rng: ChaCha8Rng,
    /// Signals an expression may mention: interface plus enclosing binders.
    scope: Vec<String>,
    /// Enclosing `trap` binders (targets for `exit`).
    traps: Vec<String>,
    binder_counter: u32,
}

impl Gen {
    fn below(&mut self, n: usize) -> usize {
        (self.rng.next_u64() % n.max(1) as u64) as usize
    }

    fn signal(&mut self) -> String {
        let i = self.below(self.scope.len());
        self.scope[i].clone()
    }

    fn binder(&mut self) -> String {
        self.binder_counter += 1;
        format!("x{}", self.binder_counter)
    }

    fn statement(&mut self, depth: u32, out: &mut String) {
        // (weight, kind) table; leaves only once the depth budget is gone.
        let nested = depth > 0;
        let choices: &[(u32, &str)] = if nested {
            &[
                (3, "emit"),
                (2, "await"),
                (1, "pause"),
                (1, "yield"),
                (1, "nil"),
                (4, "seq"),
                (2, "when"),
                (2, "watch"),
                (2, "local"),
                (2, "thread"),
                (1, "now"),
                (1, "trap"),
                (2, "present"),
                (1, "exit"),
            ]
        } else {
            &[
                (3, "emit"),
                (2, "await"),
                (1, "pause"),
                (1, "nil"),
                (1, "yield"),
            ]
        };
        let total: u32 = choices.iter().map(|(w, _)| w).sum();
        let mut roll = (self.rng.next_u64() % total as u64) as u32;
        let mut kind = choices[0].1;
        for (w, k) in choices {
            if roll < *w {
                kind = k;
                break;
            }
            roll -= w;
        }
        match kind {
            "emit" => {
                let s = self.signal();
                let _ = write!(out, "emit {s}");
            }
            "await" => {
                let s = self.signal();
                let _ = write!(out, "await {s}");
            }
            "pause" => out.push_str("pause"),
            "yield" => out.push_str("yield"),
            "nil" => out.push_str("()"),
            "seq" => {
                out.push_str("{ ");
                self.statement(depth - 1, out);
                out.push_str("; ");
                self.statement(depth - 1, out);
                out.push_str(" }");
            }
            "when" => {
                let s = self.signal();
                let _ = write!(out, "when {s} {{ ");
                self.statement(depth - 1, out);
                out.push_str(" }");
            }
            "watch" => {
                let s = self.signal();
                let _ = write!(out, "watch {s} {{ ");
                self.statement(depth - 1, out);
                out.push_str(" }");
            }
            "local" => {
                let b = self.binder();
                let _ = write!(out, "local {b} {{ ");
                self.scope.push(b);
                self.statement(depth - 1, out);
                self.scope.pop();
                out.push_str(" }");
            }
            "thread" => {
                out.push_str("thread { ");
                self.statement(depth - 1, out);
                out.push_str(" }");
            }
            "now" => {
                out.push_str("now { ");
                self.statement(depth - 1, out);
                out.push_str(" }");
            }
            "trap" => {
                let b = self.binder();
                let _ = write!(out, "trap {b} {{ ");
                self.scope.push(b.clone());
                self.traps.push(b);
                self.statement(depth - 1, out);
                self.traps.pop();
                self.scope.pop();
                out.push_str(" }");
            }
            "present" => {
                let s = self.signal();
                let _ = write!(out, "present {s} {{ ");
                self.statement(depth - 1, out);
                out.push_str(" } else { ");
                self.statement(depth - 1, out);
                out.push_str(" }");
            }
            "exit" => {
                if self.traps.is_empty() {
                    // No trap in scope: fall back to a plain emission.
                    let s = self.signal();
                    let _ = write!(out, "emit {s}");
                } else {
                    let i = self.below(self.traps.len());
                    let t = self.traps[i].clone();
                    let _ = write!(out, "exit {t}");
                }
            }
            _ => unreachable!("kind comes from the table"),
        }
    }
}

/// Produce the source text of a random program. The same `(seed, config)`
/// always yields the same text.
pub fn gen_source(seed: u64, cfg: &GenConfig) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_signals = 1 + (rng.next_u64() as usize) % cfg.max_signals.max(1);
    let n_roots = 1 + (rng.next_u64() as usize) % cfg.max_roots.max(1);
    let interface: Vec<String> = (0..n_signals).map(|i| format!("s{i}")).collect();
    let mut g = Gen {
        rng,
        scope: interface.clone(),
        traps: Vec::new(),
        binder_counter: 0,
    };
    let mut out = String::new();
    let _ = writeln!(out, "interface {};", interface.join(", "));
    for _ in 0..n_roots {
        out.push_str("run { ");
        let depth = 1 + (g.rng.next_u64() % cfg.max_depth.max(1) as u64) as u32;
        g.statement(depth, &mut out);
        out.push_str(" }\n");
    }
    out
}
