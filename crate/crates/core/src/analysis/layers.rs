use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::digraph::LayerDecomposition;
use crate::nodeset::NodeSet;
use crate::sim::{EventKind, Trace};
use crate::{ceil_log2, Step};

/// Both parts of the layer claim for one `i`. `None` means the trace ends
/// before `τ_i`, so the part could not be observed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerVerdict {
    pub i: usize,
    pub tau: Step,
    /// (i): every node of `B_0 ∪ … ∪ B_{i−1}` is dormant from `τ_i` on.
    pub dormant: Option<bool>,
    /// (ii): at `τ_i` every rumor is held inside `B_i ∪ … ∪ B_r`.
    pub rumors: Option<bool>,
}

impl LayerVerdict {
    pub fn passed(&self) -> bool {
        self.dormant == Some(true) && self.rumors == Some(true)
    }
}

/// `τ_i = 4·c_h·⌈log₂ n⌉·Σ_{p<i} |B_p|` for `i = 0..=r`.
pub fn layer_times(layers: &LayerDecomposition, c_h: usize, n: usize) -> Vec<Step> {
    let unit = 4 * (c_h * ceil_log2(n)) as Step;
    let mut acc = 0;
    (0..=layers.r)
        .map(|i| {
            let tau = acc;
            acc += unit * layers.layers[i].len() as Step;
            tau
        })
        .collect()
}

/// Checks both parts of the claim for every `i` against `Mode` events,
/// transmissions and the rumor sets rebuilt from deliveries. Runs must go
/// on past `τ_r` (not stop at completion) for every part to be observable.
pub fn check_layer_claim(
    trace: &Trace,
    layers: &LayerDecomposition,
    c_h: usize,
) -> Result<Vec<LayerVerdict>, AnalysisError> {
    if trace.log.is_none() {
        return Err(AnalysisError::NoLog);
    }
    let n = trace.n();
    let end = trace.steps_executed;
    let taus = layer_times(layers, c_h, n);

    // Last time each node was active: the step before its final switch to
    // dormant, or `end` if it is active at the end.
    let mut active_since: Vec<Option<Step>> = vec![None; n];
    let mut last_active: Vec<Option<Step>> = vec![None; n];
    for e in &trace.events {
        if let EventKind::Mode { active } = e.kind {
            if e.step >= end {
                continue;
            }
            if active {
                active_since[e.node].get_or_insert(e.step);
            } else if let Some(s) = active_since[e.node].take() {
                last_active[e.node] = Some(e.step.max(s + 1) - 1);
            }
        }
    }
    for v in 0..n {
        if active_since[v].is_some() {
            last_active[v] = Some(end);
        }
    }
    let mut last_tx: Vec<Option<Step>> = vec![None; n];
    for (step, _, sender, _) in trace.transmissions() {
        last_tx[sender] = Some(step);
    }

    let mut held: Vec<NodeSet> = (0..n).map(NodeSet::singleton).collect();
    let mut deliveries = trace.deliveries().peekable();
    let mut verdicts = Vec::with_capacity(taus.len());
    for (i, &tau) in taus.iter().enumerate() {
        if tau > end {
            verdicts.push(LayerVerdict {
                i,
                tau,
                dormant: None,
                rumors: None,
            });
            continue;
        }
        while let Some((_, _, receiver, _, payload)) = deliveries.next_if(|d| d.0 < tau) {
            if let Some(r) = payload.rumors() {
                held[receiver].union_with(r);
            }
        }
        let earlier = layers.layers[..i].iter().flatten();
        let dormant = earlier
            .clone()
            .all(|&v| last_active[v].is_none_or(|s| s < tau) && last_tx[v].is_none_or(|s| s < tau));
        let mut inside = NodeSet::with_capacity(n);
        for &v in layers.layers[i..].iter().flatten() {
            inside.union_with(&held[v]);
        }
        verdicts.push(LayerVerdict {
            i,
            tau,
            dormant: (tau < end || i == 0).then_some(dormant),
            rumors: Some(inside.len() == n),
        });
    }
    Ok(verdicts)
}
