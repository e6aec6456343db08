//! Determinism checking: the semantics promises that scheduling cannot
//! change what a program computes, so the checker earns its keep by catching
//! implementation bugs — it re-runs a program under many schedules and
//! demands identical io behaviour and, at the end, residual programs that
//! are equal up to renaming of private signals.

use super::renaming::{equal_up_to_renaming, DEFAULT_MATCH_BUDGET};
use super::AnalysisError;
use crate::desugar::Loaded;
use crate::eval::Machine;
use crate::names::SignalName;
use crate::sched::Scheduler;
use std::collections::BTreeSet;

/// How a run under some schedule differed from the reference run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DeterminismDivergence {
    /// The instant's interface outputs differed.
    Outputs {
        schedule: String,
        instant: u64,
        expected: BTreeSet<SignalName>,
        got: BTreeSet<SignalName>,
    },
    /// Outputs agreed throughout, but the final residual programs are not
    /// equal up to renaming.
    FinalState { schedule: String },
}

#[derive(Debug, Clone)]
pub struct DeterminismReport {
    pub deterministic: bool,
    /// Number of schedules exercised, the reference included.
    pub schedules_tried: usize,
    /// Instants each run was driven for.
    pub instants: usize,
    pub divergence: Option<DeterminismDivergence>,
}

/// Drive the program through `inputs` under a reference schedule and a panel
/// of alternatives (a shifted round-robin plus one seeded-random schedule
/// per seed), comparing io behaviour instant by instant and the final states
/// up to renaming.
pub fn check_determinism(
    loaded: &Loaded,
    inputs: &[BTreeSet<SignalName>],
    seeds: &[u64],
    fuel_budget: u64,
) -> Result<DeterminismReport, AnalysisError> {
    let run = |mut sched: Scheduler| -> Result<(Vec<BTreeSet<SignalName>>, Machine), AnalysisError> {
        let mut machine = Machine::new(loaded.clone());
        let mut outputs = Vec::with_capacity(inputs.len());
        for instant_inputs in inputs {
            let record = machine.io_step(instant_inputs, &mut sched, fuel_budget)?;
            outputs.push(record.outputs);
        }
        Ok((outputs, machine))
    };

    let (reference_outputs, reference_machine) = run(Scheduler::round_robin())?;

    let mut schedules: Vec<(String, Scheduler)> =
        vec![("round-robin from 1".to_string(), Scheduler::round_robin_from(1))];
    for seed in seeds {
        schedules.push((format!("seeded({seed})"), Scheduler::seeded(*seed)));
    }
    let schedules_tried = schedules.len() + 1;

    for (name, sched) in schedules {
        let (outputs, machine) = run(sched)?;
        for (k, (expected, got)) in reference_outputs.iter().zip(&outputs).enumerate() {
            if expected != got {
                return Ok(DeterminismReport {
                    deterministic: false,
                    schedules_tried,
                    instants: inputs.len(),
                    divergence: Some(DeterminismDivergence::Outputs {
                        schedule: name,
                        instant: k as u64 + 1,
                        expected: expected.clone(),
                        got: got.clone(),
                    }),
                });
            }
        }
        let same_state = equal_up_to_renaming(
            &reference_machine.program,
            &machine.program,
            DEFAULT_MATCH_BUDGET,
        )?;
        if same_state.is_none() {
            return Ok(DeterminismReport {
                deterministic: false,
                schedules_tried,
                instants: inputs.len(),
                divergence: Some(DeterminismDivergence::FinalState { schedule: name }),
            });
        }
    }

    Ok(DeterminismReport {
        deterministic: true,
        schedules_tried,
        instants: inputs.len(),
        divergence: None,
    })
}
