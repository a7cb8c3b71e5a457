use std::sync::Arc;

use super::params::round_robin_next;
use super::RumorCache;
use crate::nodeset::NodeSet;
use crate::sim::{NodeContext, NodeProtocol, Payload, ProtocolFactory, Reception};
use crate::{Freq, Label, Step};

/// Node `w` sends everything it holds at the steps `τ ≡ w (mod n)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct RoundRobin;

impl ProtocolFactory for RoundRobin {
    fn name(&self) -> String {
        "roundrobin".into()
    }

    fn frequencies(&self) -> usize {
        1
    }

    fn spawn(&self, ctx: &NodeContext) -> Box<dyn NodeProtocol> {
        Box::new(RoundRobinNode {
            v: ctx.label,
            n: ctx.n,
            rumors: NodeSet::singleton(ctx.label),
            cache: RumorCache::default(),
        })
    }
}

struct RoundRobinNode {
    v: Label,
    n: usize,
    rumors: NodeSet,
    cache: RumorCache,
}

impl NodeProtocol for RoundRobinNode {
    fn label(&self) -> Label {
        self.v
    }

    fn transmit(&mut self, _step: Step, out: &mut Vec<(Freq, Arc<Payload>)>) {
        out.push((0, self.cache.rumors(&self.rumors)));
    }

    fn receive(&mut self, _step: Step, receptions: &[Reception], _ack: Option<bool>) {
        for r in receptions {
            if let Some(rumors) = r.payload.rumors() {
                self.rumors.union_with(rumors);
            }
        }
    }

    fn next_wakeup(&self, from: Step) -> Option<Step> {
        Some(round_robin_next(self.v, self.n, from))
    }

    fn rumors(&self) -> &NodeSet {
        &self.rumors
    }
}
