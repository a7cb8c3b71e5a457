use std::sync::Arc;

use serde_json::json;

use super::params::{round_robin_next, BetaSchedule};
use super::RumorCache;
use crate::nodeset::NodeSet;
use crate::selectors::SelectorLadder;
use crate::sim::{
    EventKind, NodeContext, NodeProtocol, NodeSnapshot, Payload, ProtocolFactory, Reception,
};
use crate::{Freq, Label, Step};

/// Transmission schedule of one activity period.
///
/// Stage `j ≤ θ−2` runs selector `j` of the ladder on frequency `j`, the last
/// stage runs RoundRobin on frequency `θ−1`. Selectors and RoundRobin are
/// indexed by global time, so overlapping stages of different nodes run the
/// same family in lockstep.
#[derive(Clone, Debug)]
pub struct ActivitySchedule {
    ladder: Arc<SelectorLadder>,
    beta: Arc<BetaSchedule>,
}

impl ActivitySchedule {
    pub fn new(ladder: Arc<SelectorLadder>) -> Self {
        let beta = Arc::new(BetaSchedule::from_ladder(&ladder));
        Self { ladder, beta }
    }

    pub fn beta(&self) -> &BetaSchedule {
        &self.beta
    }

    pub fn ladder(&self) -> &SelectorLadder {
        &self.ladder
    }

    pub fn theta(&self) -> usize {
        self.beta.theta()
    }

    pub fn n(&self) -> usize {
        self.beta.n()
    }

    /// Stage of a node activated at `alpha`, `None` outside its period.
    pub fn stage_at(&self, alpha: Step, step: Step) -> Option<usize> {
        step.checked_sub(alpha).and_then(|o| self.beta.stage_of(o))
    }

    /// Recommended wake-up step attached to stage-`j` messages.
    pub fn rws(&self, alpha: Step, stage: usize) -> Step {
        alpha + self.beta.beta(stage + 1)
    }

    pub fn next_transmission(&self, v: Label, alpha: Step, from: Step) -> Option<Step> {
        let end = alpha + self.beta.period();
        let mut t = from.max(alpha);
        while t < end {
            let j = self.stage_at(alpha, t)?;
            let stage_end = alpha + self.beta.beta(j + 1);
            let cand = if j + 1 < self.theta() {
                self.ladder.family(j).next_transmission(v, t)
            } else {
                Some(round_robin_next(v, self.n(), t))
            };
            if let Some(c) = cand.filter(|&c| c < stage_end) {
                return Some(c);
            }
            t = stage_end;
        }
        None
    }

    pub fn params(&self) -> serde_json::Value {
        json!({
            "theta": self.theta(),
            "c_strong": self.ladder.constant(),
            "selector_lengths": self.ladder.lengths(),
            "selector_strengths": self.ladder.families().map(|f| f.k()).collect::<Vec<_>>(),
            "beta": self.beta.values(),
        })
    }
}

/// Gathering on acyclic graphs with staged selectors.
///
/// Each node needs `N⁻(v)`; the engine grants it, or wrap the factory in
/// [`NeighborDiscovery`](super::NeighborDiscovery) to pay for it with one
/// RoundRobin cycle.
pub struct AcyclicGather {
    schedule: ActivitySchedule,
}

impl AcyclicGather {
    pub fn new(ladder: Arc<SelectorLadder>) -> Self {
        Self {
            schedule: ActivitySchedule::new(ladder),
        }
    }

    pub fn schedule(&self) -> &ActivitySchedule {
        &self.schedule
    }
}

impl ProtocolFactory for AcyclicGather {
    fn name(&self) -> String {
        "acyclic-gather".into()
    }

    fn frequencies(&self) -> usize {
        self.schedule.theta()
    }

    fn needs_in_neighbors(&self) -> bool {
        true
    }

    fn params(&self) -> serde_json::Value {
        self.schedule.params()
    }

    fn spawn(&self, ctx: &NodeContext) -> Box<dyn NodeProtocol> {
        let mut in_neighbors = ctx
            .in_neighbors
            .clone()
            .expect("acyclic-gather needs in-neighbor knowledge");
        in_neighbors.sort_unstable();
        let mut node = AcyclicNode {
            v: ctx.label,
            schedule: self.schedule.clone(),
            first_rws: vec![None; in_neighbors.len()],
            in_neighbors,
            reached: 0,
            alpha: None,
            rumors: NodeSet::singleton(ctx.label),
            cache: RumorCache::default(),
            events: Vec::new(),
        };
        if node.in_neighbors.is_empty() {
            node.activate(0, 0, None);
        }
        Box::new(node)
    }
}

struct AcyclicNode {
    v: Label,
    schedule: ActivitySchedule,
    in_neighbors: Vec<Label>,
    /// `rws¹(u, v)` per in-neighbor, in `in_neighbors` order.
    first_rws: Vec<Option<Step>>,
    reached: usize,
    alpha: Option<Step>,
    rumors: NodeSet,
    cache: RumorCache,
    events: Vec<(Step, EventKind)>,
}

impl AcyclicNode {
    fn activate(&mut self, at: Step, alpha: Step, trigger: Option<Label>) {
        self.alpha = Some(alpha);
        self.events
            .push((at, EventKind::Activated { alpha, trigger }));
    }
}

impl NodeProtocol for AcyclicNode {
    fn label(&self) -> Label {
        self.v
    }

    fn transmit(&mut self, step: Step, out: &mut Vec<(Freq, Arc<Payload>)>) {
        let Some(alpha) = self.alpha else { return };
        let Some(j) = self.schedule.stage_at(alpha, step) else {
            return;
        };
        let rws = self.schedule.rws(alpha, j);
        let payload = self.cache.gather(&self.rumors, rws, None);
        out.push((j, payload));
    }

    fn receive(&mut self, step: Step, receptions: &[Reception], _ack: Option<bool>) {
        let mut last: Option<(Step, Label)> = None;
        let mut grew = false;
        for r in receptions {
            let Payload::Gather { rumors, rws, .. } = &*r.payload else {
                continue;
            };
            grew |= self.rumors.union_with(rumors);
            let Ok(i) = self.in_neighbors.binary_search(&r.sender) else {
                continue;
            };
            if self.first_rws[i].is_none() {
                self.first_rws[i] = Some(*rws);
                self.reached += 1;
                last = last.max(Some((*rws, r.sender)));
            }
        }
        if self.alpha.is_none() && self.reached == self.in_neighbors.len() {
            if let Some((rws, u)) = last {
                self.activate(step, rws, Some(u));
            }
        }
        if let Some(alpha) = self.alpha {
            if grew && step >= alpha + self.schedule.beta().period() {
                self.events.push((
                    step,
                    EventKind::Anomaly {
                        message: format!("new rumors after the activity period of node {}", self.v),
                    },
                ));
            }
        }
    }

    fn next_wakeup(&self, from: Step) -> Option<Step> {
        self.schedule.next_transmission(self.v, self.alpha?, from)
    }

    fn rumors(&self) -> &NodeSet {
        &self.rumors
    }

    fn drain_events(&mut self, out: &mut Vec<(Step, EventKind)>) {
        out.append(&mut self.events);
    }

    fn snapshot(&self) -> NodeSnapshot {
        let first: Vec<(Label, Step)> = self
            .in_neighbors
            .iter()
            .zip(&self.first_rws)
            .filter_map(|(&u, r)| r.map(|r| (u, r)))
            .collect();
        NodeSnapshot {
            label: self.v,
            rumors: self.rumors.clone(),
            detail: json!({ "alpha": self.alpha, "first_rws": first }),
        }
    }
}
