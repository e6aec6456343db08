//! Thread schedulers.
//!
//! The evaluator hands a scheduler the full occurrence list each time it
//! needs a decision, as `(occurrence, ready?)` pairs; the scheduler must
//! answer with a ready occurrence, or `None` exactly when nothing is ready.
//! Because instants are confluent, the choice can only affect *how* an
//! instant unfolds (the schedule log), never what it computes — which is
//! precisely what the determinism checker exercises by re-running programs
//! under different schedulers.

use crate::eval::{EvalError, OccId};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// A scheduling policy. Construct one per run (they carry state across
/// instants) and pass it to `run_instant` / `Machine::io_step`.
#[derive(Debug, Clone)]
pub struct Scheduler {
    inner: Inner,
}

#[derive(Debug, Clone)]
enum Inner {
    /// Ring scan: remembers where the last pick happened and starts just
    /// after it, so every ready occurrence gets a turn before any occurrence
    /// gets two.
    RoundRobin { cursor: usize },
    /// Uniform choice among the ready occurrences from a seeded generator;
    /// the stream is stable across platforms, so a seed names a schedule.
    Seeded { rng: ChaCha8Rng },
    /// Follow a recorded schedule log; any mismatch with what is actually
    /// ready is an error rather than a silent re-interpretation.
    Replay { picks: Vec<u64>, at: usize },
}

impl Scheduler {
    pub fn round_robin() -> Scheduler {
        Scheduler::round_robin_from(0)
    }

    /// Round-robin with the ring scan starting at `start` — a cheap way to
    /// get a second deterministic schedule out of the same policy.
    pub fn round_robin_from(start: usize) -> Scheduler {
        Scheduler {
            inner: Inner::RoundRobin { cursor: start },
        }
    }

    pub fn seeded(seed: u64) -> Scheduler {
        Scheduler {
            inner: Inner::Seeded {
                rng: ChaCha8Rng::seed_from_u64(seed),
            },
        }
    }

    pub fn replay(picks: Vec<u64>) -> Scheduler {
        Scheduler {
            inner: Inner::Replay { picks, at: 0 },
        }
    }

    /// Choose the next occurrence to run. `None` means nothing is ready.
    pub fn pick(&mut self, snapshot: &[(OccId, bool)]) -> Result<Option<OccId>, EvalError> {
        let ready: Vec<OccId> = snapshot
            .iter()
            .filter(|(_, r)| *r)
            .map(|(occ, _)| *occ)
            .collect();
        if ready.is_empty() {
            return Ok(None);
        }
        match &mut self.inner {
            Inner::RoundRobin { cursor } => {
                let n = snapshot.len();
                for offset in 0..n {
                    let i = (*cursor + offset) % n;
                    if snapshot[i].1 {
                        *cursor = i + 1;
                        return Ok(Some(snapshot[i].0));
                    }
                }
                unreachable!("ready was non-empty");
            }
            Inner::Seeded { rng } => {
                let i = (rng.next_u64() % ready.len() as u64) as usize;
                Ok(Some(ready[i]))
            }
            Inner::Replay { picks, at } => {
                if *at >= picks.len() {
                    return Err(EvalError::ReplayDivergence {
                        detail: format!(
                            "log exhausted after {} picks but {} occurrence(s) still ready",
                            picks.len(),
                            ready.len()
                        ),
                    });
                }
                let id = OccId(picks[*at]);
                *at += 1;
                if !ready.contains(&id) {
                    return Err(EvalError::ReplayDivergence {
                        detail: format!(
                            "log wants occurrence {id}, but ready occurrences are {:?}",
                            ready.iter().map(|o| o.0).collect::<Vec<_>>()
                        ),
                    });
                }
                Ok(Some(id))
            }
        }
    }
}
