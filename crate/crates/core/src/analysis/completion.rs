use super::AnalysisError;
use crate::nodeset::NodeSet;
use crate::sim::{Outcome, StepLog, Trace};
use crate::Step;

/// First step after which the target held all `n` rumors, if that happened
/// within the executed steps. A single-node network completes at step 0.
pub fn completion_time(trace: &Trace) -> Option<Step> {
    let n = trace.n();
    if trace.initial_target_rumors == n {
        return Some(0);
    }
    trace
        .target_progress
        .iter()
        .find(|&&(s, c)| c == n && s < trace.steps_executed)
        .map(|&(s, _)| s)
}

/// Completion recomputed from the deliveries alone: the target's rumors are
/// its own plus everything carried by messages it received. Valid for
/// protocols whose rumor sets grow only by receptions (not ArbGather).
pub fn completion_from_deliveries(trace: &Trace) -> Result<Option<Step>, AnalysisError> {
    if trace.log.is_none() {
        return Err(AnalysisError::NoLog);
    }
    let n = trace.n();
    let t = trace.graph.target();
    let mut held = NodeSet::singleton(t);
    if held.len() == n {
        return Ok(Some(0));
    }
    for (step, _, receiver, _, payload) in trace.deliveries() {
        if receiver != t {
            continue;
        }
        if let Some(r) = payload.rumors() {
            held.union_with(r);
            if held.len() == n {
                return Ok(Some(step));
            }
        }
    }
    Ok(None)
}

/// Rumor sets of all nodes at the start of step `step`, rebuilt from
/// deliveries of earlier steps. Same validity caveat as
/// [`completion_from_deliveries`].
pub fn rumor_sets_before(trace: &Trace, step: Step) -> Result<Vec<NodeSet>, AnalysisError> {
    if trace.log.is_none() {
        return Err(AnalysisError::NoLog);
    }
    let mut sets: Vec<NodeSet> = (0..trace.n()).map(NodeSet::singleton).collect();
    for (s, _, receiver, _, payload) in trace.deliveries() {
        if s >= step {
            break;
        }
        if let Some(r) = payload.rumors() {
            sets[receiver].union_with(r);
        }
    }
    Ok(sets)
}

/// The trace as if the run had stopped after `steps` steps. Final node
/// states are kept from the full run.
pub fn truncate(trace: &Trace, steps: Step) -> Trace {
    let steps = steps.min(trace.steps_executed);
    let mut t = trace.clone();
    t.steps_executed = steps;
    t.target_progress.retain(|&(s, _)| s < steps);
    t.events.retain(|e| e.step < steps);
    if let Some(log) = &trace.log {
        t.log = Some(StepLog {
            payloads: log.payloads.clone(),
            transmissions: log
                .transmissions
                .iter()
                .filter(|r| r.step < steps)
                .copied()
                .collect(),
            deliveries: log
                .deliveries
                .iter()
                .filter(|r| r.step < steps)
                .copied()
                .collect(),
            acks: log
                .acks
                .iter()
                .filter(|r| r.step < steps)
                .copied()
                .collect(),
        });
    }
    t.outcome = match completion_time(&t) {
        Some(step) => Outcome::Completed { step },
        None => Outcome::BudgetExhausted { stalled_from: None },
    };
    t
}
