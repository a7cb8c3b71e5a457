//! Directed graph model for radio networks.
//!
//! Nodes are labelled `0..n`, one of them is the designated target `t`. The
//! structural queries here (sc-components, in-graphs, longest-path layers) are
//! used by the protocols' oracles and by trace analysis; the protocols
//! themselves never see the graph.

mod generate;
mod io;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nodeset::NodeSet;
use crate::Label;

pub use generate::{generate, GraphKind};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("graph must have at least one node")]
    Empty,
    #[error("edge ({u}, {v}) has an endpoint outside [0, {n})")]
    LabelOutOfRange { u: Label, v: Label, n: usize },
    #[error("self-loop at node {0}")]
    SelfLoop(Label),
    #[error("target {target} is outside [0, {n})")]
    TargetOutOfRange { target: Label, n: usize },
    #[error("graph contains a directed cycle")]
    Cyclic,
    #[error("{count} node(s) cannot reach target {target}, e.g. node {example}")]
    TargetUnreachable {
        target: Label,
        count: usize,
        example: Label,
    },
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// A directed graph over labels `0..n` with a designated target node.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphRepr", into = "GraphRepr")]
pub struct Digraph {
    n: usize,
    target: Label,
    out_adj: Vec<Vec<Label>>,
    in_adj: Vec<Vec<Label>>,
}

#[derive(Serialize, Deserialize)]
struct GraphRepr {
    n: usize,
    target: Label,
    edges: Vec<(Label, Label)>,
}

impl TryFrom<GraphRepr> for Digraph {
    type Error = GraphError;

    fn try_from(r: GraphRepr) -> Result<Self, Self::Error> {
        Digraph::new(r.n, r.target, r.edges)
    }
}

impl From<Digraph> for GraphRepr {
    fn from(g: Digraph) -> Self {
        GraphRepr {
            n: g.n,
            target: g.target,
            edges: g.edges().collect(),
        }
    }
}

impl Digraph {
    /// Builds a graph, rejecting self-loops and out-of-range labels.
    /// Duplicate edges are merged.
    pub fn new(
        n: usize,
        target: Label,
        edges: impl IntoIterator<Item = (Label, Label)>,
    ) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::Empty);
        }
        if target >= n {
            return Err(GraphError::TargetOutOfRange { target, n });
        }
        let mut out_adj = vec![Vec::new(); n];
        let mut in_adj = vec![Vec::new(); n];
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(GraphError::LabelOutOfRange { u, v, n });
            }
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            out_adj[u].push(v);
            in_adj[v].push(u);
        }
        for list in out_adj.iter_mut().chain(in_adj.iter_mut()) {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self {
            n,
            target,
            out_adj,
            in_adj,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn target(&self) -> Label {
        self.target
    }

    /// Sorted out-neighbors of `v`.
    pub fn out_neighbors(&self, v: Label) -> &[Label] {
        &self.out_adj[v]
    }

    /// Sorted in-neighbors of `v`, the set N⁻(v).
    pub fn in_neighbors(&self, v: Label) -> &[Label] {
        &self.in_adj[v]
    }

    pub fn has_edge(&self, u: Label, v: Label) -> bool {
        self.out_adj[u].binary_search(&v).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.out_adj.iter().map(Vec::len).sum()
    }

    /// Edges in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (Label, Label)> + '_ {
        self.out_adj
            .iter()
            .enumerate()
            .flat_map(|(u, outs)| outs.iter().map(move |&v| (u, v)))
    }

    pub fn sources(&self) -> impl Iterator<Item = Label> + '_ {
        (0..self.n).filter(|&v| self.in_adj[v].is_empty())
    }

    /// True iff every node has a directed path to the target.
    pub fn validate_target_reachable(&self) -> bool {
        self.unreachable_from_target().is_empty()
    }

    /// Nodes with no directed path to the target, in label order.
    pub fn unreachable_from_target(&self) -> Vec<Label> {
        let reach = self.in_graph(&NodeSet::singleton(self.target));
        (0..self.n).filter(|&v| !reach.contains(v)).collect()
    }

    pub(crate) fn require_target_reachable(&self) -> Result<(), GraphError> {
        let missing = self.unreachable_from_target();
        match missing.first() {
            None => Ok(()),
            Some(&example) => Err(GraphError::TargetUnreachable {
                target: self.target,
                count: missing.len(),
                example,
            }),
        }
    }

    /// All nodes with a directed path to some member of `nodes`, members included.
    pub fn in_graph(&self, nodes: &NodeSet) -> NodeSet {
        let mut seen = NodeSet::with_capacity(self.n);
        let mut queue: VecDeque<Label> = VecDeque::new();
        for v in nodes.iter().filter(|&v| v < self.n) {
            if seen.insert(v) {
                queue.push_back(v);
            }
        }
        while let Some(v) = queue.pop_front() {
            for &u in &self.in_adj[v] {
                if seen.insert(u) {
                    queue.push_back(u);
                }
            }
        }
        seen
    }

    /// Strongly connected components (iterative Tarjan).
    ///
    /// Component ids are assigned in topological order of the condensation,
    /// so `condensation_order` is always `0..components.len()`.
    pub fn compute_scc(&self) -> SccPartition {
        const UNSEEN: usize = usize::MAX;
        let n = self.n;
        let mut index = vec![UNSEEN; n];
        let mut low = vec![0usize; n];
        let mut on_stack = vec![false; n];
        let mut stack: Vec<Label> = Vec::new();
        let mut next_index = 0;
        // Tarjan emits sink components first.
        let mut emitted: Vec<Vec<Label>> = Vec::new();
        let mut call: Vec<(Label, usize)> = Vec::new();

        for root in 0..n {
            if index[root] != UNSEEN {
                continue;
            }
            call.push((root, 0));
            index[root] = next_index;
            low[root] = next_index;
            next_index += 1;
            stack.push(root);
            on_stack[root] = true;

            while let Some(&mut (v, ref mut edge)) = call.last_mut() {
                if let Some(&w) = self.out_adj[v].get(*edge) {
                    *edge += 1;
                    if index[w] == UNSEEN {
                        index[w] = next_index;
                        low[w] = next_index;
                        next_index += 1;
                        stack.push(w);
                        on_stack[w] = true;
                        call.push((w, 0));
                    } else if on_stack[w] {
                        low[v] = low[v].min(index[w]);
                    }
                    continue;
                }
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().expect("tarjan stack underflow");
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    emitted.push(comp);
                }
            }
        }

        emitted.reverse();
        let mut component_of = vec![0; n];
        for (id, comp) in emitted.iter().enumerate() {
            for &v in comp {
                component_of[v] = id;
            }
        }
        SccPartition {
            condensation_order: (0..emitted.len()).collect(),
            component_of,
            components: emitted,
        }
    }

    pub fn is_acyclic(&self) -> bool {
        self.compute_scc().components.len() == self.n
    }

    /// Longest-path distances to the target and the induced layers.
    pub fn layer_decomposition(&self) -> Result<LayerDecomposition, GraphError> {
        let order = self.topological_order().ok_or(GraphError::Cyclic)?;
        self.require_target_reachable()?;
        let mut delta = vec![0usize; self.n];
        for &v in order.iter().rev() {
            if v == self.target {
                continue;
            }
            delta[v] = self.out_adj[v]
                .iter()
                .map(|&w| delta[w] + 1)
                .max()
                .expect("non-target node reaching t has an out-neighbor");
        }
        let r = delta.iter().copied().max().unwrap_or(0);
        let mut layers = vec![Vec::new(); r + 1];
        for (v, &d) in delta.iter().enumerate() {
            layers[r - d].push(v);
        }
        Ok(LayerDecomposition { delta, layers, r })
    }

    /// Kahn's algorithm; `None` if the graph has a cycle.
    pub fn topological_order(&self) -> Option<Vec<Label>> {
        let mut indeg: Vec<usize> = self.in_adj.iter().map(Vec::len).collect();
        let mut queue: VecDeque<Label> = (0..self.n).filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::with_capacity(self.n);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &w in &self.out_adj[v] {
                indeg[w] -= 1;
                if indeg[w] == 0 {
                    queue.push_back(w);
                }
            }
        }
        (order.len() == self.n).then_some(order)
    }

    /// BFS distance from every node to the target along out-edges
    /// (`None` for nodes that cannot reach it).
    pub fn distances_to_target(&self) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n];
        dist[self.target] = Some(0);
        let mut queue = VecDeque::from([self.target]);
        while let Some(v) = queue.pop_front() {
            let d = dist[v].expect("queued nodes have a distance");
            for &u in &self.in_adj[v] {
                if dist[u].is_none() {
                    dist[u] = Some(d + 1);
                    queue.push_back(u);
                }
            }
        }
        dist
    }
}

/// Partition of the nodes into sc-components.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SccPartition {
    pub component_of: Vec<usize>,
    /// Each component's labels, sorted.
    pub components: Vec<Vec<Label>>,
    pub condensation_order: Vec<usize>,
}

impl SccPartition {
    pub fn component_set(&self, v: Label) -> NodeSet {
        self.components[self.component_of[v]]
            .iter()
            .copied()
            .collect()
    }

    pub fn same_component(&self, u: Label, v: Label) -> bool {
        self.component_of[u] == self.component_of[v]
    }
}

/// Longest-path layering of an acyclic graph.
///
/// `delta[v]` is the length of the longest path from `v` to the target and
/// `layers[i]` holds the nodes with `delta == r - i`, so the last layer is the
/// target alone and the first layer holds the nodes farthest from it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerDecomposition {
    pub delta: Vec<usize>,
    pub layers: Vec<Vec<Label>>,
    pub r: usize,
}

impl LayerDecomposition {
    pub fn layer_of(&self, v: Label) -> usize {
        self.r - self.delta[v]
    }
}
