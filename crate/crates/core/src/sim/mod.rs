//! Discrete-time radio network engine.
//!
//! Every step has three phases: nodes decide their transmissions (one
//! optional message per frequency), the [`CollisionResolver`] computes who
//! hears what, and nodes are handed their receptions plus, in the ack model,
//! one bit telling each transmitter whether anybody received it. Decisions are
//! collected before deliveries exist, so a node can never react within the
//! step in which it hears something.
//!
//! Nodes report the next step at which they may transmit; steps in which no
//! node is due are skipped without changing the semantics, since silent
//! nodes produce no deliveries.

mod engine;
mod equivalence;
mod payload;
mod resolve;
mod trace;
mod transforms;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nodeset::NodeSet;
use crate::{Freq, Label, Step};

pub use engine::{run, run_with, DeliveryOrder, Recording, RunOptions};
pub use equivalence::{delivery_equivalence, srt_replay, EquivalenceVerdict, TimeMap};
pub use payload::{GossipBody, Payload, SccVector};
pub use resolve::{resolve_step, CollisionResolver, Delivery, StepOutcome, Transmission};
pub use trace::{
    AckRecord, EventKind, FreqRecord, NodeEvent, Outcome, ProtocolInfo, RunStats, RxRecord,
    StepLog, StepRecord, Trace, TraceFormatError, TxRecord,
};
pub use transforms::{multiplex_to_single_frequency, strip_srt, MultiplexFactory, StripSrtFactory};

/// Channel semantics for a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NetworkModel {
    /// Number of frequency channels `κ ≥ 1`.
    pub frequencies: usize,
    /// Whether a node hears a frequency while transmitting on it.
    pub srt: bool,
    /// Whether transmitters learn if at least one out-neighbor received them.
    pub ack: bool,
}

impl NetworkModel {
    /// `κ` frequencies with simultaneous receive/transmit and no acks.
    pub fn relaxed(frequencies: usize) -> Self {
        Self {
            frequencies,
            srt: true,
            ack: false,
        }
    }

    /// One frequency, half-duplex, no acks.
    pub fn standard() -> Self {
        Self {
            frequencies: 1,
            srt: false,
            ack: false,
        }
    }

    pub fn with_ack(mut self, ack: bool) -> Self {
        self.ack = ack;
        self
    }

    pub fn with_srt(mut self, srt: bool) -> Self {
        self.srt = srt;
        self
    }
}

impl std::fmt::Display for NetworkModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "k{}{}{}",
            self.frequencies,
            if self.srt { "+srt" } else { "" },
            if self.ack { "+ack" } else { "" }
        )
    }
}

/// A message as heard by a receiver.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Reception {
    pub freq: Freq,
    pub sender: Label,
    pub payload: Arc<Payload>,
}

/// What a node knows when it is created.
#[derive(Clone, Debug)]
pub struct NodeContext {
    pub n: usize,
    pub label: Label,
    /// `N⁻(label)`, present only when the factory asks for it.
    pub in_neighbors: Option<Vec<Label>>,
}

/// Summary of a node's state at the end of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeSnapshot {
    pub label: Label,
    pub rumors: NodeSet,
    pub detail: serde_json::Value,
}

/// Node-local state machine.
///
/// The engine calls `transmit(s)` exactly at the steps `s` announced by
/// [`next_wakeup`](Self::next_wakeup), and then `receive(s, …)` for the same
/// step even if nothing was heard. Outside its wake-up steps a node is only
/// called through `receive`, and only when it heard something.
pub trait NodeProtocol: Send {
    fn label(&self) -> Label;

    /// Pushes at most one message per frequency for `step`.
    fn transmit(&mut self, step: Step, out: &mut Vec<(Freq, Arc<Payload>)>);

    /// Step-`step` receptions, sorted by frequency unless the run fuzzes the
    /// order. `ack` is present iff the model has acks and the node
    /// transmitted at this step.
    fn receive(&mut self, step: Step, receptions: &[Reception], ack: Option<bool>);

    /// The first step `≥ from` at which the node may transmit, assuming it
    /// hears nothing in between. `None` means never.
    fn next_wakeup(&self, from: Step) -> Option<Step>;

    /// Rumors currently held, own rumor included.
    fn rumors(&self) -> &NodeSet;

    /// Moves pending events into `out`.
    fn drain_events(&mut self, _out: &mut Vec<(Step, EventKind)>) {}

    fn snapshot(&self) -> NodeSnapshot {
        NodeSnapshot {
            label: self.label(),
            rumors: self.rumors().clone(),
            detail: serde_json::Value::Null,
        }
    }
}

/// Creates one [`NodeProtocol`] per node.
pub trait ProtocolFactory: Send + Sync {
    fn name(&self) -> String;

    /// Frequencies used, all in `0..frequencies()`.
    fn frequencies(&self) -> usize;

    /// Whether nodes are created with `N⁻(v)` (the engine grants it).
    fn needs_in_neighbors(&self) -> bool {
        false
    }

    fn requires_ack(&self) -> bool {
        false
    }

    /// Parameters recorded in the trace.
    fn params(&self) -> serde_json::Value {
        serde_json::Value::Null
    }

    fn spawn(&self, ctx: &NodeContext) -> Box<dyn NodeProtocol>;
}

impl<F: ProtocolFactory + ?Sized> ProtocolFactory for Arc<F> {
    fn name(&self) -> String {
        (**self).name()
    }
    fn frequencies(&self) -> usize {
        (**self).frequencies()
    }
    fn needs_in_neighbors(&self) -> bool {
        (**self).needs_in_neighbors()
    }
    fn requires_ack(&self) -> bool {
        (**self).requires_ack()
    }
    fn params(&self) -> serde_json::Value {
        (**self).params()
    }
    fn spawn(&self, ctx: &NodeContext) -> Box<dyn NodeProtocol> {
        (**self).spawn(ctx)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("{count} node(s) cannot reach the target, e.g. node {example}")]
    TargetUnreachable { count: usize, example: Label },
    #[error("protocol `{protocol}` needs {needed} frequencies but the model has {available}")]
    TooFewFrequencies {
        protocol: String,
        needed: usize,
        available: usize,
    },
    #[error("protocol `{0}` requires the acknowledgement model")]
    AckRequired(String),
    #[error("model must have at least one frequency")]
    NoFrequencies,
    #[error("node {node} transmitted on frequency {freq} outside the model at step {step}")]
    BadFrequency { node: Label, freq: Freq, step: Step },
    #[error("node {node} transmitted twice on frequency {freq} at step {step}")]
    DuplicateTransmission { node: Label, freq: Freq, step: Step },
    #[error("invalid transform: {0}")]
    InvalidTransform(String),
}
