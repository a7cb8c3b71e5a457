use std::sync::Arc;

use serde_json::json;

use crate::nodeset::NodeSet;
use crate::sim::{
    EventKind, NodeContext, NodeProtocol, NodeSnapshot, Payload, ProtocolFactory, Reception,
};
use crate::{Freq, Label, Step};

/// Learns `N⁻(v)` with one RoundRobin cycle of bare labels on frequency 0,
/// then runs `inner` shifted by `n` steps.
///
/// The inner protocol's own time values (activation steps, wake-up
/// recommendations) stay in inner time; event steps are shifted to run time.
pub struct NeighborDiscovery {
    inner: Arc<dyn ProtocolFactory>,
}

impl NeighborDiscovery {
    pub fn new(inner: Arc<dyn ProtocolFactory>) -> Self {
        Self { inner }
    }
}

impl ProtocolFactory for NeighborDiscovery {
    fn name(&self) -> String {
        format!("discovery+{}", self.inner.name())
    }

    fn frequencies(&self) -> usize {
        self.inner.frequencies().max(1)
    }

    fn requires_ack(&self) -> bool {
        self.inner.requires_ack()
    }

    fn params(&self) -> serde_json::Value {
        json!({
            "transform": "neighbor_discovery",
            "inner": { "name": self.inner.name(), "params": self.inner.params() },
        })
    }

    fn spawn(&self, ctx: &NodeContext) -> Box<dyn NodeProtocol> {
        Box::new(DiscoveryNode {
            v: ctx.label,
            n: ctx.n,
            offset: ctx.n as Step,
            factory: self.inner.clone(),
            heard: Vec::new(),
            own: NodeSet::singleton(ctx.label),
            inner: None,
            events: Vec::new(),
        })
    }
}

struct DiscoveryNode {
    v: Label,
    n: usize,
    offset: Step,
    factory: Arc<dyn ProtocolFactory>,
    heard: Vec<Label>,
    own: NodeSet,
    inner: Option<Box<dyn NodeProtocol>>,
    events: Vec<(Step, EventKind)>,
}

impl NodeProtocol for DiscoveryNode {
    fn label(&self) -> Label {
        self.v
    }

    fn transmit(&mut self, step: Step, out: &mut Vec<(Freq, Arc<Payload>)>) {
        match &mut self.inner {
            Some(inner) => inner.transmit(step - self.offset, out),
            None if step == self.v as Step => {
                out.push((0, Arc::new(Payload::Label { label: self.v })))
            }
            None => {}
        }
    }

    fn receive(&mut self, step: Step, receptions: &[Reception], ack: Option<bool>) {
        if let Some(inner) = &mut self.inner {
            inner.receive(step - self.offset, receptions, ack);
            return;
        }
        self.heard.extend(receptions.iter().map(|r| r.sender));
        if step + 1 == self.offset {
            self.heard.sort_unstable();
            self.heard.dedup();
            let mut in_neighbors = NodeSet::with_capacity(self.n);
            for &u in &self.heard {
                in_neighbors.insert(u);
            }
            self.events
                .push((step, EventKind::NeighborsLearned { in_neighbors }));
            self.inner = Some(self.factory.spawn(&NodeContext {
                n: self.n,
                label: self.v,
                in_neighbors: Some(std::mem::take(&mut self.heard)),
            }));
        }
    }

    fn next_wakeup(&self, from: Step) -> Option<Step> {
        match &self.inner {
            Some(inner) => inner
                .next_wakeup(from.saturating_sub(self.offset))
                .map(|s| s + self.offset),
            // Own slot, then the last discovery step to hand over.
            None if from <= self.v as Step => Some(self.v as Step),
            None => Some(self.offset - 1),
        }
    }

    fn rumors(&self) -> &NodeSet {
        self.inner.as_ref().map_or(&self.own, |i| i.rumors())
    }

    fn drain_events(&mut self, out: &mut Vec<(Step, EventKind)>) {
        out.append(&mut self.events);
        if let Some(inner) = &mut self.inner {
            let start = out.len();
            inner.drain_events(out);
            for e in &mut out[start..] {
                e.0 += self.offset;
            }
        }
    }

    fn snapshot(&self) -> NodeSnapshot {
        match &self.inner {
            Some(inner) => inner.snapshot(),
            None => NodeSnapshot {
                label: self.v,
                rumors: self.own.clone(),
                detail: serde_json::Value::Null,
            },
        }
    }
}
