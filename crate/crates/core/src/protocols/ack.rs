use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::params::round_robin_next;
use super::RumorCache;
use crate::nodeset::NodeSet;
use crate::selectors::SelectorLadder;
use crate::sim::{
    EventKind, NodeContext, NodeProtocol, NodeSnapshot, Payload, ProtocolFactory, Reception,
};
use crate::{Freq, Label, Step};

/// Gathering on acyclic graphs with acknowledgements.
///
/// An active node runs half-selector `j` of the ladder on frequency `j` for
/// every `j < κ−1` and RoundRobin on frequency `κ−1`, all at once. A positive
/// acknowledgement makes it dormant; any reception wakes it up again. The
/// acknowledgement is applied before the step's receptions, so a node that
/// succeeds and hears something new in the same step stays active.
pub struct AcyclicGatherWithAck {
    ladder: Arc<SelectorLadder>,
    start: AckStart,
}

/// Which nodes are active at step 0.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AckStart {
    /// Only nodes without in-neighbors. A non-source whose in-neighbors all
    /// succeed elsewhere first is never woken, and its own rumor is lost.
    Sources,
    /// Every node, since each starts with an undelivered rumor.
    #[default]
    All,
}

impl AcyclicGatherWithAck {
    /// `ladder` must hold `κ−1` half-selectors.
    pub fn new(ladder: Arc<SelectorLadder>, start: AckStart) -> Self {
        Self { ladder, start }
    }

    pub fn ladder(&self) -> &SelectorLadder {
        &self.ladder
    }
}

impl ProtocolFactory for AcyclicGatherWithAck {
    fn name(&self) -> String {
        "ack-gather".into()
    }

    fn frequencies(&self) -> usize {
        self.ladder.len() + 1
    }

    fn needs_in_neighbors(&self) -> bool {
        true
    }

    fn requires_ack(&self) -> bool {
        true
    }

    fn params(&self) -> serde_json::Value {
        json!({
            "kappa": self.frequencies(),
            "c_half": self.ladder.constant(),
            "selector_lengths": self.ladder.lengths(),
            "start": self.start,
        })
    }

    fn spawn(&self, ctx: &NodeContext) -> Box<dyn NodeProtocol> {
        let source = ctx
            .in_neighbors
            .as_ref()
            .expect("ack-gather needs in-neighbor knowledge")
            .is_empty();
        let active = source || self.start == AckStart::All;
        let mut events = Vec::new();
        if active {
            events.push((0, EventKind::Mode { active: true }));
        }
        Box::new(AckNode {
            v: ctx.label,
            n: ctx.n,
            ladder: self.ladder.clone(),
            active,
            activations: usize::from(active),
            rumors: NodeSet::singleton(ctx.label),
            cache: RumorCache::default(),
            events,
        })
    }
}

struct AckNode {
    v: Label,
    n: usize,
    ladder: Arc<SelectorLadder>,
    active: bool,
    activations: usize,
    rumors: NodeSet,
    cache: RumorCache,
    events: Vec<(Step, EventKind)>,
}

impl NodeProtocol for AckNode {
    fn label(&self) -> Label {
        self.v
    }

    fn transmit(&mut self, step: Step, out: &mut Vec<(Freq, Arc<Payload>)>) {
        if !self.active {
            return;
        }
        let payload = self.cache.rumors(&self.rumors);
        for (j, family) in self.ladder.families().enumerate() {
            if family.schedule_transmits(self.v, step) {
                out.push((j, payload.clone()));
            }
        }
        if step % self.n as Step == self.v as Step {
            out.push((self.ladder.len(), payload));
        }
    }

    fn receive(&mut self, step: Step, receptions: &[Reception], ack: Option<bool>) {
        let before = self.active;
        if ack == Some(true) {
            self.active = false;
        }
        for r in receptions {
            if let Some(rumors) = r.payload.rumors() {
                self.rumors.union_with(rumors);
            }
        }
        if !receptions.is_empty() {
            self.active = true;
        }
        if self.active != before {
            if self.active {
                self.activations += 1;
            }
            self.events.push((
                step + 1,
                EventKind::Mode {
                    active: self.active,
                },
            ));
        }
    }

    fn next_wakeup(&self, from: Step) -> Option<Step> {
        if !self.active {
            return None;
        }
        self.ladder
            .families()
            .filter_map(|f| f.next_transmission(self.v, from))
            .chain([round_robin_next(self.v, self.n, from)])
            .min()
    }

    fn rumors(&self) -> &NodeSet {
        &self.rumors
    }

    fn drain_events(&mut self, out: &mut Vec<(Step, EventKind)>) {
        out.append(&mut self.events);
    }

    fn snapshot(&self) -> NodeSnapshot {
        NodeSnapshot {
            label: self.v,
            rumors: self.rumors.clone(),
            detail: json!({ "active": self.active, "activations": self.activations }),
        }
    }
}
