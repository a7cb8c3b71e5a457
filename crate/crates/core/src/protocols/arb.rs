use std::collections::BTreeMap;
use std::sync::Arc;

use serde_json::json;

use super::acyclic::ActivitySchedule;
use super::gossip::GossipSubprotocol;
use super::params::scc_classes;
use super::{GossipNode, RumorCache};
use crate::nodeset::NodeSet;
use crate::selectors::SelectorLadder;
use crate::sim::{
    EventKind, GossipBody, NodeContext, NodeProtocol, NodeSnapshot, Payload, ProtocolFactory,
    Reception, SccVector,
};
use crate::{Freq, Label, Step};

/// Gathering on arbitrary digraphs.
///
/// Frequencies `0..θ` carry the acyclic-gathering subroutine, frequencies
/// `θ..θ+θ'` the component-discovery subroutine, one per size class `j`.
/// For every class a node alternates label frames and vector frames of
/// length `T(j)`; after each vector frame it checks whether its label set is
/// certainly its strong component. The first certified class ends discovery
/// and the node starts its acyclic activity period at the next step.
pub struct ArbGather {
    schedule: ActivitySchedule,
    gossip: Arc<dyn GossipSubprotocol>,
    classes: usize,
}

impl ArbGather {
    pub fn new(ladder: Arc<SelectorLadder>, gossip: Arc<dyn GossipSubprotocol>) -> Self {
        let classes = scc_classes(ladder.n());
        Self {
            schedule: ActivitySchedule::new(ladder),
            gossip,
            classes,
        }
    }

    pub fn schedule(&self) -> &ActivitySchedule {
        &self.schedule
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    /// `T(j)` of the configured gossip plug-in.
    pub fn frame_length(&self, class: usize) -> Step {
        self.gossip.frame_length(self.schedule.n(), class)
    }
}

impl ProtocolFactory for ArbGather {
    fn name(&self) -> String {
        "arb-gather".into()
    }

    fn frequencies(&self) -> usize {
        self.schedule.theta() + self.classes
    }

    fn needs_in_neighbors(&self) -> bool {
        true
    }

    fn params(&self) -> serde_json::Value {
        let mut p = self.schedule.params();
        p["scc_classes"] = json!(self.classes);
        p["gossip"] = json!(self.gossip.name());
        p["frame_lengths"] = json!((0..self.classes)
            .map(|j| self.frame_length(j))
            .collect::<Vec<_>>());
        p
    }

    fn spawn(&self, ctx: &NodeContext) -> Box<dyn NodeProtocol> {
        let v = ctx.label;
        let mut in_neighbors = NodeSet::with_capacity(ctx.n);
        for &u in ctx
            .in_neighbors
            .as_ref()
            .expect("arb-gather needs in-neighbor knowledge")
        {
            in_neighbors.insert(u);
        }
        let classes = (0..self.classes)
            .map(|j| {
                let mut gossip = self.gossip.spawn(ctx.n, v, j);
                gossip.start(0, 0, GossipBody::Labels(NodeSet::singleton(v)));
                ClassState {
                    frame_len: self.gossip.frame_length(ctx.n, j),
                    gossip,
                    frame: 0,
                    component: NodeSet::new(),
                    snap_acy: NodeSet::new(),
                    snap_rumors: NodeSet::singleton(v),
                    cached: None,
                }
            })
            .collect();
        Box::new(ArbNode {
            v,
            schedule: self.schedule.clone(),
            in_neighbors,
            classes,
            acy_in: NodeSet::new(),
            rumors: NodeSet::singleton(v),
            first_rws: BTreeMap::new(),
            alpha_scc: None,
            passed: None,
            cache: RumorCache::default(),
            events: Vec::new(),
        })
    }
}

struct ClassState {
    frame_len: Step,
    gossip: Box<dyn GossipNode>,
    frame: u64,
    /// `C̃(v)` from the last label frame.
    component: NodeSet,
    /// `Ñ_acy(v)` and `R(v)` as of the start of the last label frame.
    snap_acy: NodeSet,
    snap_rumors: NodeSet,
    cached: Option<Arc<Payload>>,
}

struct Passed {
    component: NodeSet,
    alpha: Step,
}

struct ArbNode {
    v: Label,
    schedule: ActivitySchedule,
    in_neighbors: NodeSet,
    /// Empty once discovery has ended.
    classes: Vec<ClassState>,
    acy_in: NodeSet,
    rumors: NodeSet,
    first_rws: BTreeMap<Label, Step>,
    /// `(step, rws¹)` of the latest first reception from an acyclic
    /// in-neighbor; its `rws¹` is the SCC-activation, kept for inspection.
    alpha_scc: Option<(Step, Step)>,
    passed: Option<Passed>,
    cache: RumorCache,
    events: Vec<(Step, EventKind)>,
}

impl ArbNode {
    fn theta(&self) -> usize {
        self.schedule.theta()
    }

    fn receive_acy(&mut self, step: Step, sender: Label, payload: &Payload) -> bool {
        let Payload::Gather {
            rumors,
            rws,
            component,
        } = payload
        else {
            return false;
        };
        let grew = self.rumors.union_with(rumors);
        // A sender certified to share our component is not an acyclic
        // in-neighbor, whatever frequency it uses.
        let outside = component.as_ref().is_none_or(|c| !c.contains(self.v));
        if self.passed.is_none() && outside && self.in_neighbors.contains(sender) {
            self.acy_in.insert(sender);
            if let std::collections::btree_map::Entry::Vacant(e) = self.first_rws.entry(sender) {
                e.insert(*rws);
                self.alpha_scc = self.alpha_scc.max(Some((step, *rws)));
            }
        }
        grew
    }

    /// Tests 1–3 for the double frame that just ended.
    fn certified(component: &NodeSet, vectors: &BTreeMap<Label, Arc<SccVector>>) -> bool {
        if vectors.len() != component.len() || !vectors.keys().all(|&u| component.contains(u)) {
            return false;
        }
        vectors.values().all(|vec| {
            vec.component == *component
                && vec
                    .in_neighbors
                    .difference(&vec.acy_in_neighbors)
                    .is_subset(component)
        })
    }

    fn end_frames(&mut self, step: Step) {
        let next = step + 1;
        let mut certified: Option<(usize, u64, NodeSet, NodeSet)> = None;
        let no_vectors = BTreeMap::new();
        for (j, class) in self.classes.iter_mut().enumerate() {
            if !next.is_multiple_of(class.frame_len) {
                continue;
            }
            if class.frame % 2 == 0 {
                let mut labels = match class.gossip.collected() {
                    GossipBody::Labels(l) => l.clone(),
                    GossipBody::Vectors(_) => NodeSet::new(),
                };
                labels.insert(self.v);
                class.component = labels;
                let own = SccVector {
                    node: self.v,
                    component: class.component.clone(),
                    in_neighbors: self.in_neighbors.clone(),
                    acy_in_neighbors: class.snap_acy.clone(),
                    rumors: class.snap_rumors.clone(),
                };
                let body = GossipBody::Vectors(BTreeMap::from([(self.v, Arc::new(own))]));
                class.frame += 1;
                class.gossip.start(class.frame, next, body);
            } else {
                let vectors = match class.gossip.collected() {
                    GossipBody::Vectors(m) => m,
                    GossipBody::Labels(_) => &no_vectors,
                };
                if certified.is_none() && Self::certified(&class.component, vectors) {
                    let mut rumors = self.rumors.clone();
                    for vec in vectors.values() {
                        rumors.union_with(&vec.rumors);
                    }
                    certified = Some((j, class.frame / 2, class.component.clone(), rumors));
                }
                class.snap_acy = self.acy_in.clone();
                class.snap_rumors = self.rumors.clone();
                class.frame += 1;
                class.gossip.start(
                    class.frame,
                    next,
                    GossipBody::Labels(NodeSet::singleton(self.v)),
                );
            }
            class.cached = None;
        }
        if let Some((class, double_frame, component, rumors)) = certified {
            self.rumors = rumors.clone();
            self.classes.clear();
            self.events.push((
                step,
                EventKind::TestsPassed {
                    class,
                    double_frame,
                    component: component.clone(),
                    rumors,
                    alpha_acy: next,
                },
            ));
            self.passed = Some(Passed {
                component,
                alpha: next,
            });
        }
    }
}

impl NodeProtocol for ArbNode {
    fn label(&self) -> Label {
        self.v
    }

    fn transmit(&mut self, step: Step, out: &mut Vec<(Freq, Arc<Payload>)>) {
        if let Some(p) = &self.passed {
            if let Some(j) = self.schedule.stage_at(p.alpha, step) {
                let rws = self.schedule.rws(p.alpha, j);
                out.push((j, self.cache.gather(&self.rumors, rws, Some(&p.component))));
            }
        }
        let theta = self.theta();
        for (j, class) in self.classes.iter_mut().enumerate() {
            if class.gossip.next_transmission(step) != Some(step) {
                continue;
            }
            if class.cached.is_none() {
                class.cached = class.gossip.transmit(step).map(|body| {
                    Arc::new(Payload::Gossip {
                        class: j,
                        frame: class.frame,
                        body: body.clone(),
                    })
                });
            }
            if let Some(p) = &class.cached {
                out.push((theta + j, p.clone()));
            }
        }
    }

    fn receive(&mut self, step: Step, receptions: &[Reception], _ack: Option<bool>) {
        let theta = self.theta();
        let mut grew = false;
        for r in receptions {
            if r.freq < theta {
                grew |= self.receive_acy(step, r.sender, &r.payload);
                continue;
            }
            let j = r.freq - theta;
            let Some(class) = self.classes.get_mut(j) else {
                continue;
            };
            if let Payload::Gossip {
                class: c,
                frame,
                body,
            } = &*r.payload
            {
                // Stale or foreign traffic is dropped; only the tests decide
                // what the collected labels mean.
                if *c == j && *frame == class.frame && class.gossip.receive(step, body) {
                    class.cached = None;
                }
            }
        }
        if self.passed.is_none() {
            self.end_frames(step);
        } else if let Some(p) = &self.passed {
            if grew && step >= p.alpha + self.schedule.beta().period() {
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
        let acy = self
            .passed
            .as_ref()
            .and_then(|p| self.schedule.next_transmission(self.v, p.alpha, from));
        let scc = self
            .classes
            .iter()
            .map(|c| {
                let frame_end = from + (c.frame_len - 1 - from % c.frame_len);
                c.gossip
                    .next_transmission(from)
                    .map_or(frame_end, |t| t.min(frame_end))
            })
            .min();
        match (acy, scc) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
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
            detail: json!({
                "alpha_acy": self.passed.as_ref().map(|p| p.alpha),
                "component": self.passed.as_ref().map(|p| &p.component),
                "alpha_scc": self.alpha_scc.map(|(_, rws)| rws),
                "acy_in_neighbors": self.acy_in,
            }),
        }
    }
}
