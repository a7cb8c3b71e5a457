use std::sync::Arc;

use super::{NetworkModel, Payload};
use crate::digraph::Digraph;
use crate::{Freq, Label};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transmission {
    pub sender: Label,
    pub freq: Freq,
    pub payload: Arc<Payload>,
}

/// A successful reception; `tx` indexes the step's transmission list.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Delivery {
    pub receiver: Label,
    pub sender: Label,
    pub freq: Freq,
    pub tx: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StepOutcome {
    /// Sorted by `(receiver, freq)`.
    pub deliveries: Vec<Delivery>,
    /// `(sender, heard by someone)` for every transmitting node, sorted by
    /// sender; empty unless the model has acks.
    pub acks: Vec<(Label, bool)>,
}

/// Applies the collision rule for one step.
///
/// A node receives on frequency `f` iff exactly one of its in-neighbors
/// transmits on `f`; two or more transmitters are indistinguishable from
/// silence. Without SRT a node transmitting on `f` hears nothing on `f`.
/// Scratch buffers are reused across steps.
pub struct CollisionResolver {
    freqs: usize,
    stamp: Vec<u32>,
    count: Vec<u32>,
    last_tx: Vec<u32>,
    tx_stamp: Vec<u32>,
    generation: u32,
    touched: Vec<usize>,
}

impl CollisionResolver {
    pub fn new(n: usize, freqs: usize) -> Self {
        let slots = n * freqs;
        Self {
            freqs,
            stamp: vec![0; slots],
            count: vec![0; slots],
            last_tx: vec![0; slots],
            tx_stamp: vec![0; slots],
            generation: 0,
            touched: Vec::new(),
        }
    }

    pub fn resolve(
        &mut self,
        g: &Digraph,
        model: &NetworkModel,
        txs: &[Transmission],
        out: &mut StepOutcome,
    ) {
        out.deliveries.clear();
        out.acks.clear();
        self.generation = self.generation.wrapping_add(1);
        if self.generation == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.tx_stamp.iter_mut().for_each(|s| *s = 0);
            self.generation = 1;
        }
        let gen = self.generation;
        self.touched.clear();

        for tx in txs {
            self.tx_stamp[tx.sender * self.freqs + tx.freq] = gen;
        }
        for (i, tx) in txs.iter().enumerate() {
            for &w in g.out_neighbors(tx.sender) {
                let slot = w * self.freqs + tx.freq;
                if self.stamp[slot] != gen {
                    self.stamp[slot] = gen;
                    self.count[slot] = 0;
                    self.touched.push(slot);
                }
                self.count[slot] += 1;
                self.last_tx[slot] = i as u32;
            }
        }
        for &slot in &self.touched {
            if self.count[slot] != 1 {
                continue;
            }
            if !model.srt && self.tx_stamp[slot] == gen {
                continue;
            }
            let tx = self.last_tx[slot] as usize;
            out.deliveries.push(Delivery {
                receiver: slot / self.freqs,
                sender: txs[tx].sender,
                freq: slot % self.freqs,
                tx,
            });
        }
        out.deliveries
            .sort_unstable_by_key(|d| (d.receiver, d.freq));

        if model.ack {
            let mut heard: Vec<Label> = out.deliveries.iter().map(|d| d.sender).collect();
            heard.sort_unstable();
            heard.dedup();
            let mut senders: Vec<Label> = txs.iter().map(|t| t.sender).collect();
            senders.sort_unstable();
            senders.dedup();
            out.acks = senders
                .into_iter()
                .map(|s| (s, heard.binary_search(&s).is_ok()))
                .collect();
        }
    }
}

/// One-shot collision resolution for a single step.
pub fn resolve_step(g: &Digraph, model: &NetworkModel, txs: &[Transmission]) -> StepOutcome {
    let mut resolver = CollisionResolver::new(g.n(), model.frequencies);
    let mut out = StepOutcome::default();
    resolver.resolve(g, model, txs, &mut out);
    out
}
