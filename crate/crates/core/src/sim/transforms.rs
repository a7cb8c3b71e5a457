//! Wrappers that run a protocol written for the relaxed model in a stricter one.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde_json::json;

use super::{
    EventKind, NodeContext, NodeProtocol, NodeSnapshot, Payload, ProtocolFactory, Reception,
    SimError,
};
use crate::nodeset::NodeSet;
use crate::selectors::{SelectorFamily, SelectorKind};
use crate::{Freq, Label, Step};

/// Time-multiplexes a `κ`-frequency protocol onto one frequency.
///
/// Outer step `s·κ + f` carries the inner protocol's frequency-`f` message of
/// step `s`. Everything heard during round `s` is handed to the inner node as
/// its step-`s` receptions (tagged with the original frequency) at the end of
/// the round, with the ack bit OR-ed over the round.
pub fn multiplex_to_single_frequency(
    inner: Arc<dyn ProtocolFactory>,
    kappa: usize,
) -> MultiplexFactory {
    assert!(kappa >= 1, "at least one frequency");
    MultiplexFactory { inner, kappa }
}

pub struct MultiplexFactory {
    inner: Arc<dyn ProtocolFactory>,
    kappa: usize,
}

impl MultiplexFactory {
    pub fn kappa(&self) -> usize {
        self.kappa
    }
}

impl ProtocolFactory for MultiplexFactory {
    fn name(&self) -> String {
        format!("{}+mux{}", self.inner.name(), self.kappa)
    }

    fn frequencies(&self) -> usize {
        1
    }

    fn needs_in_neighbors(&self) -> bool {
        self.inner.needs_in_neighbors()
    }

    fn requires_ack(&self) -> bool {
        self.inner.requires_ack()
    }

    fn params(&self) -> serde_json::Value {
        json!({
            "transform": "multiplex",
            "kappa": self.kappa,
            "inner": { "name": self.inner.name(), "params": self.inner.params() },
        })
    }

    fn spawn(&self, ctx: &NodeContext) -> Box<dyn NodeProtocol> {
        Box::new(MultiplexNode {
            inner: self.inner.spawn(ctx),
            kappa: self.kappa as Step,
            round: None,
            outbox: Vec::new(),
            buffer: Vec::new(),
            ack: None,
        })
    }
}

struct MultiplexNode {
    inner: Box<dyn NodeProtocol>,
    kappa: Step,
    /// Round in progress: the inner node was woken or heard something in it.
    round: Option<Step>,
    outbox: Vec<(Freq, Arc<Payload>)>,
    buffer: Vec<Reception>,
    ack: Option<bool>,
}

impl NodeProtocol for MultiplexNode {
    fn label(&self) -> Label {
        self.inner.label()
    }

    fn transmit(&mut self, step: Step, out: &mut Vec<(Freq, Arc<Payload>)>) {
        let (s, f) = (step / self.kappa, (step % self.kappa) as Freq);
        if f == 0 && self.round.is_none() && self.inner.next_wakeup(s) == Some(s) {
            self.round = Some(s);
            self.inner.transmit(s, &mut self.outbox);
        }
        if self.round == Some(s) {
            if let Some((_, p)) = self.outbox.iter().find(|(g, _)| *g == f) {
                out.push((0, p.clone()));
            }
        }
    }

    fn receive(&mut self, step: Step, receptions: &[Reception], ack: Option<bool>) {
        let (s, f) = (step / self.kappa, (step % self.kappa) as Freq);
        if !receptions.is_empty() || ack.is_some() {
            self.round.get_or_insert(s);
        }
        self.buffer.extend(receptions.iter().map(|r| Reception {
            freq: f,
            ..r.clone()
        }));
        if let Some(a) = ack {
            self.ack = Some(self.ack.unwrap_or(false) || a);
        }
        if f as Step == self.kappa - 1 && self.round == Some(s) {
            self.buffer.sort_by_key(|r| r.freq);
            self.inner.receive(s, &self.buffer, self.ack);
            self.buffer.clear();
            self.outbox.clear();
            self.ack = None;
            self.round = None;
        }
    }

    fn next_wakeup(&self, from: Step) -> Option<Step> {
        if let Some(s) = self.round {
            let base = s * self.kappa;
            let next_tx = self
                .outbox
                .iter()
                .map(|(f, _)| base + *f as Step)
                .filter(|&t| t >= from)
                .min();
            let flush = base + self.kappa - 1;
            return Some(next_tx.map_or(flush, |t| t.min(flush)));
        }
        let s_from = from.div_ceil(self.kappa);
        self.inner.next_wakeup(s_from).map(|s| s * self.kappa)
    }

    fn rumors(&self) -> &NodeSet {
        self.inner.rumors()
    }

    fn drain_events(&mut self, out: &mut Vec<(Step, EventKind)>) {
        self.inner.drain_events(out);
    }

    fn snapshot(&self) -> NodeSnapshot {
        self.inner.snapshot()
    }
}

/// Removes the need to hear while transmitting, using a strong
/// `(n, 2)`-selector `S¹` of length `ℓ₁`.
///
/// Inner step `τ` becomes the segment `[τ·ℓ₁, (τ+1)·ℓ₁)`; at its `i`-th step
/// a node repeats its step-`τ` message iff it belongs to `S¹_i` and listens
/// otherwise. The inner node receives the union of everything heard in the
/// segment (one reception per sender) at the segment's end.
pub fn strip_srt(
    inner: Arc<dyn ProtocolFactory>,
    wrap_selector: Arc<SelectorFamily>,
) -> Result<StripSrtFactory, SimError> {
    if inner.frequencies() != 1 {
        return Err(SimError::InvalidTransform(format!(
            "SRT removal needs a single-frequency protocol, `{}` uses {}",
            inner.name(),
            inner.frequencies()
        )));
    }
    if wrap_selector.kind() != SelectorKind::Strong || wrap_selector.k() < 2.min(wrap_selector.n())
    {
        return Err(SimError::InvalidTransform(
            "SRT removal needs a strong selector of strength at least 2".into(),
        ));
    }
    Ok(StripSrtFactory {
        inner,
        selector: wrap_selector,
    })
}

pub struct StripSrtFactory {
    inner: Arc<dyn ProtocolFactory>,
    selector: Arc<SelectorFamily>,
}

impl StripSrtFactory {
    pub fn segment_length(&self) -> usize {
        self.selector.length()
    }
}

impl ProtocolFactory for StripSrtFactory {
    fn name(&self) -> String {
        format!("{}+nosrt", self.inner.name())
    }

    fn frequencies(&self) -> usize {
        1
    }

    fn needs_in_neighbors(&self) -> bool {
        self.inner.needs_in_neighbors()
    }

    fn requires_ack(&self) -> bool {
        self.inner.requires_ack()
    }

    fn params(&self) -> serde_json::Value {
        json!({
            "transform": "strip_srt",
            "segment_length": self.selector.length(),
            "inner": { "name": self.inner.name(), "params": self.inner.params() },
        })
    }

    fn spawn(&self, ctx: &NodeContext) -> Box<dyn NodeProtocol> {
        Box::new(StripNode {
            inner: self.inner.spawn(ctx),
            selector: self.selector.clone(),
            seg_len: self.selector.length() as Step,
            segment: None,
            message: None,
            heard: BTreeMap::new(),
            ack: None,
            scratch: Vec::new(),
        })
    }
}

struct StripNode {
    inner: Box<dyn NodeProtocol>,
    selector: Arc<SelectorFamily>,
    seg_len: Step,
    segment: Option<Step>,
    message: Option<Arc<Payload>>,
    heard: BTreeMap<Label, Reception>,
    ack: Option<bool>,
    scratch: Vec<(Freq, Arc<Payload>)>,
}

impl NodeProtocol for StripNode {
    fn label(&self) -> Label {
        self.inner.label()
    }

    fn transmit(&mut self, step: Step, out: &mut Vec<(Freq, Arc<Payload>)>) {
        let (tau, i) = (step / self.seg_len, step % self.seg_len);
        if i == 0 && self.segment.is_none() && self.inner.next_wakeup(tau) == Some(tau) {
            self.segment = Some(tau);
            self.scratch.clear();
            self.inner.transmit(tau, &mut self.scratch);
            assert!(
                self.scratch.len() <= 1 && self.scratch.iter().all(|(f, _)| *f == 0),
                "SRT removal wraps single-frequency protocols only"
            );
            self.message = self.scratch.pop().map(|(_, p)| p);
        }
        if self.segment == Some(tau) {
            if let Some(m) = &self.message {
                if self.selector.schedule_transmits(self.label(), step) {
                    out.push((0, m.clone()));
                }
            }
        }
    }

    fn receive(&mut self, step: Step, receptions: &[Reception], ack: Option<bool>) {
        let (tau, i) = (step / self.seg_len, step % self.seg_len);
        if !receptions.is_empty() || ack.is_some() {
            self.segment.get_or_insert(tau);
        }
        for r in receptions {
            self.heard.entry(r.sender).or_insert_with(|| r.clone());
        }
        if let Some(a) = ack {
            self.ack = Some(self.ack.unwrap_or(false) || a);
        }
        if i == self.seg_len - 1 && self.segment == Some(tau) {
            let union: Vec<Reception> = std::mem::take(&mut self.heard).into_values().collect();
            self.inner.receive(tau, &union, self.ack);
            self.segment = None;
            self.message = None;
            self.ack = None;
        }
    }

    fn next_wakeup(&self, from: Step) -> Option<Step> {
        if let Some(tau) = self.segment {
            let end = tau * self.seg_len + self.seg_len - 1;
            let next_tx = self
                .message
                .as_ref()
                .and_then(|_| self.selector.next_transmission(self.label(), from))
                .filter(|&t| t <= end);
            return Some(next_tx.map_or(end, |t| t.min(end)));
        }
        let tau_from = from.div_ceil(self.seg_len);
        self.inner.next_wakeup(tau_from).map(|t| t * self.seg_len)
    }

    fn rumors(&self) -> &NodeSet {
        self.inner.rumors()
    }

    fn drain_events(&mut self, out: &mut Vec<(Step, EventKind)>) {
        self.inner.drain_events(out);
    }

    fn snapshot(&self) -> NodeSnapshot {
        self.inner.snapshot()
    }
}
