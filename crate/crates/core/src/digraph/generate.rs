//! Seeded instance generators.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Digraph, GraphError};
use crate::Label;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphKind {
    /// Each forward pair of a random topological order is an edge with
    /// probability `density`; the target is last in that order.
    RandomDag { density: f64 },
    /// Layers of `width` nodes (default ⌈√n⌉) feeding forward into the
    /// target; every node has at least one edge into the next layer.
    LayeredDag { width: Option<usize>, density: f64 },
    /// Strongly connected blobs of the given sizes whose condensation is a path.
    SccChain { sizes: Vec<usize> },
    /// Every node points at target `n − 1`.
    Star,
    /// `0 → 1 → … → n − 1`, target `n − 1`.
    Path,
    /// Uniform random digraph (cycles allowed) with edge probability `density`.
    RandomDigraph { density: f64 },
}

impl GraphKind {
    pub fn name(&self) -> &'static str {
        match self {
            GraphKind::RandomDag { .. } => "random_dag",
            GraphKind::LayeredDag { .. } => "layered_dag",
            GraphKind::SccChain { .. } => "scc_chain",
            GraphKind::Star => "star",
            GraphKind::Path => "path",
            GraphKind::RandomDigraph { .. } => "random_digraph",
        }
    }
}

/// Generates a graph in which every node reaches the target.
///
/// Nodes left unable to reach the target by the random construction receive a
/// direct edge to it. Output is a pure function of `(kind, n, seed)`.
pub fn generate(kind: &GraphKind, n: usize, seed: u64) -> Result<Digraph, GraphError> {
    if n == 0 {
        return Err(GraphError::Empty);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (target, edges) = match kind {
        GraphKind::RandomDag { density } => random_dag(n, check_density(*density)?, &mut rng),
        GraphKind::LayeredDag { width, density } => {
            let width = width.unwrap_or_else(|| (n as f64).sqrt().ceil() as usize);
            if width == 0 {
                return Err(GraphError::InvalidParams(
                    "layer width must be positive".into(),
                ));
            }
            layered_dag(n, width, check_density(*density)?, &mut rng)
        }
        GraphKind::SccChain { sizes } => scc_chain(n, sizes, &mut rng)?,
        GraphKind::Star => (n - 1, (0..n - 1).map(|v| (v, n - 1)).collect()),
        GraphKind::Path => (n - 1, (0..n - 1).map(|v| (v, v + 1)).collect()),
        GraphKind::RandomDigraph { density } => {
            random_digraph(n, check_density(*density)?, &mut rng)
        }
    };
    let mut g = Digraph::new(n, target, edges)?;
    let missing = g.unreachable_from_target();
    if !missing.is_empty() {
        let edges = g.edges().chain(missing.into_iter().map(|v| (v, target)));
        g = Digraph::new(n, target, edges.collect::<Vec<_>>())?;
    }
    Ok(g)
}

fn check_density(d: f64) -> Result<f64, GraphError> {
    if (0.0..=1.0).contains(&d) {
        Ok(d)
    } else {
        Err(GraphError::InvalidParams(format!(
            "density {d} is outside [0, 1]"
        )))
    }
}

fn shuffled_labels(n: usize, rng: &mut ChaCha8Rng) -> Vec<Label> {
    let mut labels: Vec<Label> = (0..n).collect();
    labels.shuffle(rng);
    labels
}

fn random_dag(n: usize, density: f64, rng: &mut ChaCha8Rng) -> (Label, Vec<(Label, Label)>) {
    let order = shuffled_labels(n, rng);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(density) {
                edges.push((order[i], order[j]));
            }
        }
    }
    (order[n - 1], edges)
}

fn layered_dag(
    n: usize,
    width: usize,
    density: f64,
    rng: &mut ChaCha8Rng,
) -> (Label, Vec<(Label, Label)>) {
    let labels = shuffled_labels(n, rng);
    let target = labels[n - 1];
    let mut layers: Vec<&[Label]> = labels[..n - 1].chunks(width).collect();
    layers.push(&labels[n - 1..]);

    let mut edges = Vec::new();
    for pair in layers.windows(2) {
        let (here, next) = (pair[0], pair[1]);
        for &u in here {
            let before = edges.len();
            for &v in next {
                if rng.gen_bool(density) {
                    edges.push((u, v));
                }
            }
            if edges.len() == before {
                edges.push((u, next[rng.gen_range(0..next.len())]));
            }
        }
    }
    (target, edges)
}

fn scc_chain(
    n: usize,
    sizes: &[usize],
    rng: &mut ChaCha8Rng,
) -> Result<(Label, Vec<(Label, Label)>), GraphError> {
    if sizes.contains(&0) {
        return Err(GraphError::InvalidParams(
            "component sizes must be positive".into(),
        ));
    }
    let total: usize = sizes.iter().sum();
    if total != n {
        return Err(GraphError::InvalidParams(format!(
            "component sizes sum to {total}, expected n = {n}"
        )));
    }
    let labels = shuffled_labels(n, rng);
    let mut blobs: Vec<&[Label]> = Vec::with_capacity(sizes.len());
    let mut start = 0;
    for &s in sizes {
        blobs.push(&labels[start..start + s]);
        start += s;
    }

    let mut edges = Vec::new();
    for blob in &blobs {
        let s = blob.len();
        if s < 2 {
            continue;
        }
        for i in 0..s {
            edges.push((blob[i], blob[(i + 1) % s]));
        }
        for _ in 0..s / 2 {
            let (a, b) = (rng.gen_range(0..s), rng.gen_range(0..s));
            if a != b {
                edges.push((blob[a], blob[b]));
            }
        }
    }
    for pair in blobs.windows(2) {
        let (from, to) = (pair[0], pair[1]);
        let links = 1 + from.len() / 4;
        for _ in 0..links {
            let u = from[rng.gen_range(0..from.len())];
            let v = to[rng.gen_range(0..to.len())];
            edges.push((u, v));
        }
    }
    let last = blobs.last().expect("sizes sum to n >= 1");
    let target = last[rng.gen_range(0..last.len())];
    Ok((target, edges))
}

fn random_digraph(n: usize, density: f64, rng: &mut ChaCha8Rng) -> (Label, Vec<(Label, Label)>) {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if u != v && rng.gen_bool(density) {
                edges.push((u, v));
            }
        }
    }
    (rng.gen_range(0..n), edges)
}
