use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::nodeset::NodeSet;
use crate::{Label, Step};

/// Message contents. Sizes are never budgeted.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Payload {
    /// The sender's label alone (neighbor discovery).
    Label { label: Label },
    /// A plain rumor set.
    Rumors { rumors: NodeSet },
    /// Acyclic-gathering message: rumors plus the recommended wake-up step.
    /// `component` is the sender's certified sc-component when the message
    /// comes from the acyclic part of the arbitrary-graph protocol.
    Gather {
        rumors: NodeSet,
        rws: Step,
        component: Option<NodeSet>,
    },
    /// Gossip traffic of size class `class` in frame `frame`.
    Gossip {
        class: usize,
        frame: u64,
        body: GossipBody,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "items", rename_all = "snake_case")]
pub enum GossipBody {
    /// Labels heard so far in an even frame.
    Labels(NodeSet),
    /// Vectors heard so far in an odd frame, keyed by originating node.
    Vectors(#[serde(with = "by_node")] BTreeMap<Label, Arc<SccVector>>),
}

/// Writes the vector map as a list; the key is each vector's own `node`.
/// Integer map keys do not survive the buffering of tagged enums.
mod by_node {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(
        m: &BTreeMap<Label, Arc<SccVector>>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        s.collect_seq(m.values())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<BTreeMap<Label, Arc<SccVector>>, D::Error> {
        let items = Vec::<Arc<SccVector>>::deserialize(d)?;
        Ok(items.into_iter().map(|v| (v.node, v)).collect())
    }
}

/// The vector `[u, C̃(u), N⁻(u), Ñ_acy(u), R(u)]` gossiped in odd frames.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SccVector {
    pub node: Label,
    pub component: NodeSet,
    pub in_neighbors: NodeSet,
    pub acy_in_neighbors: NodeSet,
    pub rumors: NodeSet,
}

impl Payload {
    /// Rumors carried, if any.
    pub fn rumors(&self) -> Option<&NodeSet> {
        match self {
            Payload::Rumors { rumors } | Payload::Gather { rumors, .. } => Some(rumors),
            _ => None,
        }
    }
}
