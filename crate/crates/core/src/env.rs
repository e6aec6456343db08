//! Signal environments: the per-instant truth assignment.
//!
//! An environment is rebuilt from the inputs at the start of every instant
//! and only ever grows within one: signals can be defined (absent) and made
//! present, never made absent again. There is deliberately no API to unset a
//! signal, so within-instant monotonicity is enforced by construction.

use crate::names::SignalName;
use std::collections::{BTreeSet, HashMap};

#[derive(Debug, Clone, Default)]
pub struct SignalEnv {
    map: HashMap<SignalName, bool>,
    present: usize,
}

impl SignalEnv {
    pub fn new() -> SignalEnv {
        SignalEnv::default()
    }

    /// Bind a signal that is not yet in the domain.
    pub fn define(&mut self, s: SignalName, value: bool) {
        debug_assert!(!self.map.contains_key(&s), "redefining {s}");
        if value {
            self.present += 1;
        }
        self.map.insert(s, value);
    }

    pub fn contains(&self, s: &SignalName) -> bool {
        self.map.contains_key(s)
    }

    /// `None` when the signal is outside the domain (an internal error at
    /// the evaluator level — every signal a running program can mention is
    /// bound before the instant starts).
    pub fn get(&self, s: &SignalName) -> Option<bool> {
        self.map.get(s).copied()
    }

    /// Make a signal present. Returns `Some(true)` when this changed the
    /// environment, `Some(false)` when it was already present, `None` when
    /// the signal is unbound.
    pub fn emit(&mut self, s: &SignalName) -> Option<bool> {
        match self.map.get_mut(s) {
            None => None,
            Some(v) if *v => Some(false),
            Some(v) => {
                *v = true;
                self.present += 1;
                Some(true)
            }
        }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Number of present signals; monotonically non-decreasing within an
    /// instant, which the instant loop asserts after every evaluation step.
    pub fn present_count(&self) -> usize {
        self.present
    }

    /// All present signals.
    pub fn present_set(&self) -> BTreeSet<SignalName> {
        self.map
            .iter()
            .filter(|(_, v)| **v)
            .map(|(k, _)| k.clone())
            .collect()
    }
}
