//! Program analyses: renaming equivalence, determinism checking, reactivity
//! checking, and bounded behavioural equivalence.

mod determinism;
mod reactivity;
mod renaming;
mod traces;

pub use determinism::{check_determinism, DeterminismDivergence, DeterminismReport};
pub use reactivity::{
    dynamic_reactivity_probe, static_reactivity_check, DynamicVerdict, InputStrategy,
    ReactivityReport, StaticVerdict,
};
pub use renaming::{canonical_form, equal_up_to_renaming, RenamingWitness, DEFAULT_MATCH_BUDGET};
pub use traces::{
    bounded_traces, check_equivalence, EquivalenceConfig, EquivalenceReport, EquivalenceWitness,
};

use crate::eval::EvalError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalysisError {
    /// The renaming matcher gave up before finding or refuting a bijection.
    #[error("renaming search budget exceeded after {visited} nodes")]
    SearchBudgetExceeded { visited: u64 },
    /// An exploration outgrew its configured bounds.
    #[error("exploration cap exceeded: {detail}")]
    CapExceeded { detail: String },
    /// The two equivalence routes returned different verdicts — a bug in
    /// this crate, reported rather than silently ignored.
    #[error("equivalence routes disagree: {detail}")]
    InternalDisagreement { detail: String },
    /// Compared programs do not expose the same interface.
    #[error("interface mismatch: left={left:?} right={right:?}")]
    InterfaceMismatch {
        left: Vec<String>,
        right: Vec<String>,
    },
    #[error(transparent)]
    Eval(#[from] EvalError),
}
