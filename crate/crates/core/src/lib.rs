//! Simulator and protocols for information gathering in ad-hoc radio networks.
//!
//! A network is a [`Digraph`] whose nodes know only their own label and the
//! universe size `n`. Nodes run a [`sim::NodeProtocol`] in synchronous steps
//! over one or more frequency channels; a transmission reaches an out-neighbor
//! only if no other in-neighbor of that node transmits on the same frequency
//! in the same step. The goal of every protocol here is to deliver the rumor of
//! every node to a designated target.

pub mod analysis;
pub mod digraph;
pub mod nodeset;
pub mod protocols;
pub mod selectors;
pub mod sim;

pub use digraph::{Digraph, GraphError, GraphKind};
pub use nodeset::NodeSet;

/// Node label in `0..n`.
pub type Label = usize;
/// Discrete time step, starting at 0.
pub type Step = u64;
/// Frequency channel index.
pub type Freq = usize;

/// `⌈log₂ n⌉`, clamped below at 1 so schedule lengths never vanish.
pub fn ceil_log2(n: usize) -> usize {
    if n <= 2 {
        1
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as usize
    }
}

/// Mixes several integers into one RNG seed (splitmix64 finalizer per part).
pub fn derive_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(0x9E37_79B9_7F4A_7C15u64, |acc, &p| {
        let mut z = acc ^ p.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    })
}
