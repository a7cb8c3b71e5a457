//! The gathering protocols as node-local state machines.
//!
//! * [`RoundRobin`]: node `w` transmits at steps `≡ w (mod n)`.
//! * [`AcyclicGather`]: activity periods of staged strong selectors plus a
//!   final RoundRobin stage, with activation driven by recommended wake-up
//!   steps (acyclic graphs).
//! * [`ArbGather`]: component discovery by gossip and local tests, then the
//!   acyclic protocol between components (arbitrary graphs).
//! * [`AcyclicGatherWithAck`]: half-selectors on all frequencies at once,
//!   silenced by positive acknowledgements (acyclic graphs, ack model).
//!
//! [`ProtocolConfig`] turns a protocol name and constants into a factory, a
//! default model and a step budget.

mod ack;
mod acyclic;
mod arb;
mod config;
mod discovery;
mod gossip;
mod params;
mod roundrobin;

use std::sync::Arc;

use crate::nodeset::NodeSet;
use crate::sim::Payload;
use crate::Step;

pub use ack::{AckStart, AcyclicGatherWithAck};
pub use acyclic::{ActivitySchedule, AcyclicGather};
pub use arb::ArbGather;
pub use config::{
    ConfigError, GossipKind, ModelOverride, Prepared, ProtocolConfig, ProtocolKind, Reductions,
};
pub use discovery::NeighborDiscovery;
pub use gossip::{merge_body, BrokenGossip, GossipNode, GossipSubprotocol, SimpleGossip};
pub use params::{ack_frequencies, round_robin_next, scc_classes, size_class, theta, BetaSchedule};
pub use roundrobin::RoundRobin;

/// Reuses the last payload while its contents are unchanged, so a node that
/// repeats itself shares one allocation (and one interned trace entry).
#[derive(Default)]
pub(crate) struct RumorCache {
    key: Option<(usize, Step)>,
    payload: Option<Arc<Payload>>,
}

impl RumorCache {
    fn lookup(&mut self, key: (usize, Step), make: impl FnOnce() -> Payload) -> Arc<Payload> {
        if self.key != Some(key) || self.payload.is_none() {
            self.key = Some(key);
            self.payload = Some(Arc::new(make()));
        }
        self.payload.clone().expect("filled above")
    }

    /// Rumor sets only grow, so their size identifies their contents.
    pub(crate) fn rumors(&mut self, rumors: &NodeSet) -> Arc<Payload> {
        self.lookup((rumors.len(), 0), || Payload::Rumors {
            rumors: rumors.clone(),
        })
    }

    /// The component, once set, never changes for a node.
    pub(crate) fn gather(
        &mut self,
        rumors: &NodeSet,
        rws: Step,
        component: Option<&NodeSet>,
    ) -> Arc<Payload> {
        self.lookup((rumors.len(), rws), || Payload::Gather {
            rumors: rumors.clone(),
            rws,
            component: component.cloned(),
        })
    }
}
