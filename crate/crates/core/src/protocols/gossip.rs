//! Gossip inside strongly connected components.
//!
//! The arbitrary-graph protocol only relies on this contract: if all nodes of
//! a strong component `A` with `|A| ≤ 2^j` start an execution for class `j`
//! at the same frame boundary and nobody else transmits on that frequency
//! during the frame, then after [`GossipSubprotocol::frame_length`] steps every
//! node of `A` holds the starting item of every node of `A`.

use crate::sim::GossipBody;
use crate::{derive_seed, Label, Step};

pub trait GossipSubprotocol: Send + Sync {
    fn name(&self) -> String;

    /// `T_SCC(j)` for universe size `n`.
    fn frame_length(&self, n: usize, class: usize) -> Step;

    fn spawn(&self, n: usize, label: Label, class: usize) -> Box<dyn GossipNode>;
}

/// One node's gossip state for one size class.
pub trait GossipNode: Send {
    /// Begins the execution of frame `frame`, which starts at step `start`,
    /// with `own` as this node's item.
    fn start(&mut self, frame: u64, start: Step, own: GossipBody);

    /// Body to send at `step`, if any. Only called at steps announced by
    /// [`next_transmission`](Self::next_transmission).
    fn transmit(&mut self, step: Step) -> Option<&GossipBody>;

    /// Returns `true` if the collected body grew.
    fn receive(&mut self, step: Step, body: &GossipBody) -> bool;

    /// First step `≥ from` inside the current frame at which the node sends.
    fn next_transmission(&self, from: Step) -> Option<Step>;

    /// Everything collected in the current frame, own item included.
    fn collected(&self) -> &GossipBody;
}

/// Merges `other` into `into`; bodies of different kinds are ignored.
pub fn merge_body(into: &mut GossipBody, other: &GossipBody) -> bool {
    match (into, other) {
        (GossipBody::Labels(a), GossipBody::Labels(b)) => a.union_with(b),
        (GossipBody::Vectors(a), GossipBody::Vectors(b)) => {
            let mut grew = false;
            for (&u, vec) in b {
                if let std::collections::btree_map::Entry::Vacant(e) = a.entry(u) {
                    e.insert(vec.clone());
                    grew = true;
                }
            }
            grew
        }
        _ => false,
    }
}

/// Flooding over global-label RoundRobin: within a frame, node `v` sends all
/// it has collected at offsets `≡ v (mod n)`. A frame holds `2^j` cycles,
/// enough for any item to cross a component of at most `2^j` nodes.
#[derive(Clone, Copy, Debug, Default)]
pub struct SimpleGossip;

impl GossipSubprotocol for SimpleGossip {
    fn name(&self) -> String {
        "simple".into()
    }

    fn frame_length(&self, n: usize, class: usize) -> Step {
        (n as Step) << class
    }

    fn spawn(&self, n: usize, label: Label, class: usize) -> Box<dyn GossipNode> {
        Box::new(FloodNode::new(n, label, self.frame_length(n, class)))
    }
}

/// [`SimpleGossip`] that stays silent for a whole frame in about half of
/// its frames (chosen by hashing node, class and frame). Used to check that
/// component certification never accepts a wrong component.
#[derive(Clone, Copy, Debug)]
pub struct BrokenGossip {
    pub seed: u64,
}

impl GossipSubprotocol for BrokenGossip {
    fn name(&self) -> String {
        "broken".into()
    }

    fn frame_length(&self, n: usize, class: usize) -> Step {
        SimpleGossip.frame_length(n, class)
    }

    fn spawn(&self, n: usize, label: Label, class: usize) -> Box<dyn GossipNode> {
        let mut node = FloodNode::new(n, label, self.frame_length(n, class));
        node.mute = Some((self.seed, class));
        Box::new(node)
    }
}

struct FloodNode {
    n: Step,
    v: Label,
    frame_len: Step,
    frame_start: Step,
    known: GossipBody,
    muted: bool,
    mute: Option<(u64, usize)>,
}

impl FloodNode {
    fn new(n: usize, v: Label, frame_len: Step) -> Self {
        Self {
            n: n as Step,
            v,
            frame_len,
            frame_start: 0,
            known: GossipBody::Labels(Default::default()),
            muted: false,
            mute: None,
        }
    }
}

impl GossipNode for FloodNode {
    fn start(&mut self, frame: u64, start: Step, own: GossipBody) {
        self.frame_start = start;
        self.known = own;
        self.muted = self.mute.is_some_and(|(seed, class)| {
            derive_seed(&[seed, self.v as u64, class as u64, frame]) & 1 == 1
        });
    }

    fn transmit(&mut self, _step: Step) -> Option<&GossipBody> {
        (!self.muted).then_some(&self.known)
    }

    fn receive(&mut self, _step: Step, body: &GossipBody) -> bool {
        merge_body(&mut self.known, body)
    }

    fn next_transmission(&self, from: Step) -> Option<Step> {
        if self.muted {
            return None;
        }
        let from = from.max(self.frame_start);
        let offset = from - self.frame_start;
        let next = self.frame_start + offset + (self.v as Step + self.n - offset % self.n) % self.n;
        (next < self.frame_start + self.frame_len).then_some(next)
    }

    fn collected(&self) -> &GossipBody {
        &self.known
    }
}
