use super::{AnalysisError, Check};
use crate::nodeset::NodeSet;
use crate::sim::{EventKind, Payload, Trace};
use crate::{Label, Step};

/// Every certified component equals the node's strong component.
pub fn arb_safety(trace: &Trace) -> Check {
    let scc = trace.graph.compute_scc();
    let mut check = Check::new("arb_safety");
    for e in &trace.events {
        if let EventKind::TestsPassed { component, .. } = &e.kind {
            let truth = scc.component_set(e.node);
            check.record(*component == truth, || {
                format!(
                    "node {} certified {:?}, true component {:?}",
                    e.node,
                    component.to_vec(),
                    truth.to_vec()
                )
            });
        }
    }
    check
}

/// When a node switches to the acyclic subroutine, its rumors include what
/// every member of its component held when the certifying double frame
/// began.
pub fn arb_rumor_completeness(trace: &Trace) -> Result<Check, AnalysisError> {
    if trace.log.is_none() {
        return Err(AnalysisError::NoLog);
    }
    let frames: Vec<Step> = trace
        .protocol
        .params
        .get("frame_lengths")
        .and_then(|v| serde_json::from_value(v.clone()).ok())
        .ok_or(AnalysisError::MissingParams("frame_lengths"))?;

    // (start of the double frame, node, component, rumors at the switch)
    let mut queries: Vec<(Step, Label, &NodeSet, &NodeSet)> = Vec::new();
    let mut updates: Vec<(Step, Label, &NodeSet)> = Vec::new();
    for e in &trace.events {
        if let EventKind::TestsPassed {
            class,
            component,
            rumors,
            ..
        } = &e.kind
        {
            let len = *frames.get(*class).ok_or_else(|| {
                AnalysisError::Inconsistent(format!("size class {class} has no frame length"))
            })?;
            queries.push((
                (e.step + 1).saturating_sub(2 * len),
                e.node,
                component,
                rumors,
            ));
            updates.push((e.step, e.node, rumors));
        }
    }
    for (step, _, receiver, _, payload) in trace.deliveries() {
        if let Payload::Gather { rumors, .. } = &**payload {
            updates.push((step, receiver, rumors));
        }
    }
    updates.sort_by_key(|u| u.0);
    queries.sort_by_key(|q| q.0);

    let mut held: Vec<NodeSet> = (0..trace.n()).map(NodeSet::singleton).collect();
    let mut check = Check::new("arb_rumor_completeness");
    let mut next = 0;
    for (start, v, component, rumors) in queries {
        while let Some(&(s, u, r)) = updates.get(next).filter(|u| u.0 < start) {
            debug_assert!(s < start);
            held[u].union_with(r);
            next += 1;
        }
        let missing: Vec<Label> = component
            .iter()
            .filter(|&u| !held[u].is_subset(rumors))
            .collect();
        check.record(missing.is_empty(), || {
            format!("node {v} switched without all rumors of members {missing:?}")
        });
    }
    Ok(check)
}
