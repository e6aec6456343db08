//! Signal names and the session that mints them.
//!
//! A signal name is an identity token: two names denote the same signal
//! exactly when they came out of the same `NameSession` mint (or were
//! interned under the same spelling). The display text travels with the
//! token for rendering, but equality, ordering and hashing use the numeric
//! identity only — so a runtime-generated name can reuse a human-friendly
//! hint without ever colliding with a source name.

use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

/// How a name came into existence.
///
/// Renaming equivalence pins `Interface` names and may rename everything
/// else, so the origin is the one piece of metadata the analyses consult.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NameOrigin {
    /// Declared in the program interface; observable from outside.
    Interface,
    /// Used free in the program text without being declared in the
    /// interface; shared by spelling across the whole program.
    ProgramFree,
    /// Minted by a session: source binders, desugaring binders, and the
    /// fresh signals created each time a `local` runs.
    Fresh,
}

#[derive(Debug)]
struct NameData {
    id: u64,
    display: String,
    origin: NameOrigin,
}

/// An interned signal name. Cloning is an `Arc` bump.
#[derive(Clone)]
pub struct SignalName(Arc<NameData>);

impl SignalName {
    /// Session-unique identity token.
    pub fn id(&self) -> u64 {
        self.0.id
    }

    /// The spelling this name was declared or hinted with. Not unique for
    /// fresh names; use the pretty-printer for unambiguous rendering.
    pub fn display(&self) -> &str {
        &self.0.display
    }

    pub fn origin(&self) -> NameOrigin {
        self.0.origin
    }

    pub fn is_interface(&self) -> bool {
        self.0.origin == NameOrigin::Interface
    }
}

impl PartialEq for SignalName {
    fn eq(&self, other: &Self) -> bool {
        self.0.id == other.0.id
    }
}

impl Eq for SignalName {}

impl PartialOrd for SignalName {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SignalName {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.id.cmp(&other.0.id)
    }
}

impl Hash for SignalName {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.id.hash(state);
    }
}

impl fmt::Debug for SignalName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.0.display, self.0.id)
    }
}

impl fmt::Display for SignalName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Fresh names share spellings, so keep the id visible in diagnostics.
        if self.0.origin == NameOrigin::Fresh {
            write!(f, "{}#{}", self.0.display, self.0.id)
        } else {
            f.write_str(&self.0.display)
        }
    }
}

/// The signal names a program exposes to its environment, in declaration
/// order. Inputs are chosen from here and outputs are reported over it.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Interface {
    names: Vec<SignalName>,
}

impl Interface {
    pub fn new(names: Vec<SignalName>) -> Interface {
        Interface { names }
    }

    pub fn names(&self) -> &[SignalName] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn contains(&self, s: &SignalName) -> bool {
        self.names.iter().any(|n| n == s)
    }

    /// Find an interface name by its spelling (used when reading input
    /// scripts, where signals arrive as text).
    pub fn by_display(&self, display: &str) -> Option<SignalName> {
        self.names.iter().find(|n| n.display() == display).cloned()
    }
}

/// Mints and interns signal names. The only mutable object in the core:
/// everything it hands out is immutable and freely shareable.
///
/// Fresh identities are unique within a session, so a name minted while a
/// program runs can never collide with anything already in scope. Cloning a
/// session forks the counter; names from two forks are only ever used in
/// separate runs, so overlapping ids across forks are harmless.
#[derive(Debug, Clone, Default)]
pub struct NameSession {
    next_id: u64,
    interned: HashMap<String, SignalName>,
}

impl NameSession {
    pub fn new() -> NameSession {
        NameSession::default()
    }

    fn mint(&mut self, display: &str, origin: NameOrigin) -> SignalName {
        let id = self.next_id;
        self.next_id += 1;
        SignalName(Arc::new(NameData {
            id,
            display: display.to_string(),
            origin,
        }))
    }

    /// Intern an interface declaration. Idempotent per spelling.
    pub fn intern_interface(&mut self, display: &str) -> SignalName {
        if let Some(existing) = self.interned.get(display) {
            return existing.clone();
        }
        let name = self.mint(display, NameOrigin::Interface);
        self.interned.insert(display.to_string(), name.clone());
        name
    }

    /// Resolve a free occurrence: the interface name of that spelling if one
    /// was declared, otherwise a program-free name shared by all occurrences
    /// of the spelling.
    pub fn intern_free(&mut self, display: &str) -> SignalName {
        if let Some(existing) = self.interned.get(display) {
            return existing.clone();
        }
        let name = self.mint(display, NameOrigin::ProgramFree);
        self.interned.insert(display.to_string(), name.clone());
        name
    }

    /// Mint a brand-new name, never equal to any other name from this
    /// session regardless of spelling.
    pub fn fresh(&mut self, hint: &str) -> SignalName {
        self.mint(hint, NameOrigin::Fresh)
    }
}
