use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::resolve::{CollisionResolver, StepOutcome, Transmission};
use super::trace::{
    AckRecord, NodeEvent, Outcome, ProtocolInfo, RunStats, RxRecord, StepLog, Trace, TxRecord,
};
use super::{
    NetworkModel, NodeContext, NodeProtocol, Payload, ProtocolFactory, Reception, SimError,
};
use crate::digraph::Digraph;
use crate::{derive_seed, Freq, Label, Step};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Recording {
    /// Keep every transmission, delivery and ack.
    #[default]
    Full,
    /// Keep only target progress, events and final states.
    Summary,
}

/// Order in which a node's same-step receptions are handed over. Protocols
/// must not depend on it; the non-default orders exist to test that.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DeliveryOrder {
    #[default]
    Forward,
    Reverse,
    Shuffled(u64),
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub max_steps: Step,
    /// Stop right after the step in which the target completes (plus
    /// `linger` further steps).
    pub stop_at_completion: bool,
    pub linger: Step,
    pub recording: Recording,
    pub delivery_order: DeliveryOrder,
}

impl RunOptions {
    pub fn new(max_steps: Step) -> Self {
        Self {
            max_steps,
            stop_at_completion: true,
            linger: 0,
            recording: Recording::Full,
            delivery_order: DeliveryOrder::Forward,
        }
    }

    pub fn summary(mut self) -> Self {
        self.recording = Recording::Summary;
        self
    }

    /// Keeps running for `steps` steps after completion (still within
    /// `max_steps`).
    pub fn linger(mut self, steps: Step) -> Self {
        self.linger = steps;
        self
    }

    pub fn run_to_budget(mut self) -> Self {
        self.stop_at_completion = false;
        self
    }
}

/// Runs `factory` on `g` for at most `max_steps` steps with full recording,
/// stopping once the target holds every rumor.
pub fn run(
    g: &Digraph,
    factory: &dyn ProtocolFactory,
    model: NetworkModel,
    max_steps: Step,
) -> Result<Trace, SimError> {
    run_with(g, factory, model, &RunOptions::new(max_steps))
}

pub fn run_with(
    g: &Digraph,
    factory: &dyn ProtocolFactory,
    model: NetworkModel,
    opts: &RunOptions,
) -> Result<Trace, SimError> {
    if model.frequencies == 0 {
        return Err(SimError::NoFrequencies);
    }
    let missing = g.unreachable_from_target();
    if let Some(&example) = missing.first() {
        return Err(SimError::TargetUnreachable {
            count: missing.len(),
            example,
        });
    }
    if factory.frequencies() > model.frequencies {
        return Err(SimError::TooFewFrequencies {
            protocol: factory.name(),
            needed: factory.frequencies(),
            available: model.frequencies,
        });
    }
    if factory.requires_ack() && !model.ack {
        return Err(SimError::AckRequired(factory.name()));
    }

    let n = g.n();
    let mut nodes: Vec<Box<dyn NodeProtocol>> = (0..n)
        .map(|v| {
            factory.spawn(&NodeContext {
                n,
                label: v,
                in_neighbors: factory
                    .needs_in_neighbors()
                    .then(|| g.in_neighbors(v).to_vec()),
            })
        })
        .collect();

    let mut engine = Engine {
        resolver: CollisionResolver::new(n, model.frequencies),
        wake: BinaryHeap::new(),
        pending: vec![None; n],
        log: (opts.recording == Recording::Full).then(StepLog::default),
        interned: HashMap::new(),
        events: Vec::new(),
        stats: RunStats::default(),
        event_buf: Vec::new(),
    };
    for (v, node) in nodes.iter_mut().enumerate() {
        engine.drain(v, node.as_mut());
        engine.schedule(v, node.next_wakeup(0));
    }

    let target = g.target();
    let initial = nodes[target].rumors().len();
    let mut progress = Vec::new();
    let mut last_count = initial;
    let mut completion = (initial == n).then_some(0);
    // Steps `0..limit` may run; lowered once the run completes.
    let mut limit = opts.max_steps;
    if completion.is_some() && opts.stop_at_completion {
        limit = limit.min(opts.linger);
    }

    let mut steps_executed: Step = 0;
    let mut stalled_from = None;
    if limit > 0 {
        let mut txs: Vec<Transmission> = Vec::new();
        let mut outcome = StepOutcome::default();
        let mut out: Vec<(Freq, Arc<Payload>)> = Vec::new();
        let mut woken: Vec<Label> = Vec::new();
        let mut inbox: Vec<Reception> = Vec::new();
        loop {
            let Some(step) = engine.next_step() else {
                stalled_from = Some(steps_executed);
                steps_executed = limit;
                break;
            };
            if step >= limit {
                steps_executed = limit;
                break;
            }
            woken.clear();
            engine.pop_due(step, &mut woken);

            txs.clear();
            for &v in &woken {
                out.clear();
                nodes[v].transmit(step, &mut out);
                out.sort_by_key(|(f, _)| *f);
                for (i, (f, payload)) in out.iter().enumerate() {
                    if *f >= model.frequencies {
                        return Err(SimError::BadFrequency {
                            node: v,
                            freq: *f,
                            step,
                        });
                    }
                    if i > 0 && out[i - 1].0 == *f {
                        return Err(SimError::DuplicateTransmission {
                            node: v,
                            freq: *f,
                            step,
                        });
                    }
                    txs.push(Transmission {
                        sender: v,
                        freq: *f,
                        payload: payload.clone(),
                    });
                }
            }
            engine.resolver.resolve(g, &model, &txs, &mut outcome);
            engine.record(step, &txs, &outcome);

            // Woken nodes always get a receive call; others only when they heard
            // something or are owed an ack.
            let mut touched: Vec<Label> = woken.clone();
            touched.extend(outcome.deliveries.iter().map(|d| d.receiver));
            touched.extend(outcome.acks.iter().map(|&(s, _)| s));
            touched.sort_unstable();
            touched.dedup();

            let mut di = 0;
            for &v in &touched {
                inbox.clear();
                while let Some(d) = outcome.deliveries.get(di).filter(|d| d.receiver == v) {
                    inbox.push(Reception {
                        freq: d.freq,
                        sender: d.sender,
                        payload: txs[d.tx].payload.clone(),
                    });
                    di += 1;
                }
                match opts.delivery_order {
                    DeliveryOrder::Forward => {}
                    DeliveryOrder::Reverse => inbox.reverse(),
                    DeliveryOrder::Shuffled(seed) => {
                        let mut rng =
                            ChaCha8Rng::seed_from_u64(derive_seed(&[seed, step, v as u64]));
                        inbox.shuffle(&mut rng);
                    }
                }
                let ack = outcome
                    .acks
                    .binary_search_by_key(&v, |&(s, _)| s)
                    .ok()
                    .map(|i| outcome.acks[i].1);
                nodes[v].receive(step, &inbox, ack);
                engine.drain(v, nodes[v].as_mut());
                let next = nodes[v].next_wakeup(step + 1);
                engine.schedule(v, next);
            }

            steps_executed = step + 1;
            if touched.binary_search(&target).is_ok() {
                let count = nodes[target].rumors().len();
                if count != last_count {
                    progress.push((step, count));
                    last_count = count;
                    if count == n && completion.is_none() {
                        completion = Some(step);
                        if opts.stop_at_completion {
                            limit = limit.min(step + 1 + opts.linger);
                        }
                    }
                }
            }
            if steps_executed >= limit {
                break;
            }
        }
    }

    let outcome = match completion {
        Some(step) => Outcome::Completed { step },
        None => Outcome::BudgetExhausted { stalled_from },
    };
    let mut events = engine.events;
    events.sort_by_key(|e| (e.step, e.node));
    Ok(Trace {
        model,
        protocol: ProtocolInfo {
            name: factory.name(),
            params: factory.params(),
        },
        graph: g.clone(),
        budget: opts.max_steps,
        steps_executed,
        outcome,
        initial_target_rumors: initial,
        target_progress: progress,
        events,
        final_states: nodes.iter().map(|node| node.snapshot()).collect(),
        stats: engine.stats,
        log: engine.log,
    })
}

struct Engine {
    resolver: CollisionResolver,
    /// Min-heap of `(step, node)`; entries not matching `pending` are stale.
    wake: BinaryHeap<Reverse<(Step, Label)>>,
    pending: Vec<Option<Step>>,
    log: Option<StepLog>,
    /// Payload interning by allocation; the log keeps every interned `Arc`
    /// alive, so addresses cannot be reused while they are keys here.
    interned: HashMap<*const Payload, u32>,
    events: Vec<NodeEvent>,
    stats: RunStats,
    event_buf: Vec<(Step, super::EventKind)>,
}

impl Engine {
    fn schedule(&mut self, v: Label, at: Option<Step>) {
        self.pending[v] = at;
        if let Some(s) = at {
            self.wake.push(Reverse((s, v)));
        }
    }

    fn next_step(&mut self) -> Option<Step> {
        while let Some(&Reverse((s, v))) = self.wake.peek() {
            if self.pending[v] == Some(s) {
                return Some(s);
            }
            self.wake.pop();
        }
        None
    }

    /// Pops every node due at `step`, in label order.
    fn pop_due(&mut self, step: Step, woken: &mut Vec<Label>) {
        while let Some(&Reverse((s, v))) = self.wake.peek() {
            if s != step {
                break;
            }
            self.wake.pop();
            if self.pending[v] == Some(s) {
                self.pending[v] = None;
                woken.push(v);
            }
        }
        woken.sort_unstable();
        woken.dedup();
    }

    fn drain(&mut self, v: Label, node: &mut dyn NodeProtocol) {
        node.drain_events(&mut self.event_buf);
        self.events
            .extend(self.event_buf.drain(..).map(|(step, kind)| NodeEvent {
                step,
                node: v,
                kind,
            }));
    }

    fn intern(&mut self, payload: &Arc<Payload>) -> u32 {
        let log = self.log.as_mut().expect("interning requires a log");
        *self
            .interned
            .entry(Arc::as_ptr(payload))
            .or_insert_with(|| {
                log.payloads.push(payload.clone());
                (log.payloads.len() - 1) as u32
            })
    }

    fn record(&mut self, step: Step, txs: &[Transmission], outcome: &StepOutcome) {
        self.stats.transmissions += txs.len() as u64;
        self.stats.deliveries += outcome.deliveries.len() as u64;
        if self.log.is_none() {
            return;
        }
        let ids: Vec<u32> = txs.iter().map(|t| self.intern(&t.payload)).collect();
        let log = self.log.as_mut().expect("checked above");
        for (t, &payload) in txs.iter().zip(&ids) {
            log.transmissions.push(TxRecord {
                step,
                sender: t.sender as u32,
                freq: t.freq as u32,
                payload,
            });
        }
        for d in &outcome.deliveries {
            log.deliveries.push(RxRecord {
                step,
                receiver: d.receiver as u32,
                sender: d.sender as u32,
                freq: d.freq as u32,
                payload: ids[d.tx],
            });
        }
        for &(sender, ok) in &outcome.acks {
            log.acks.push(AckRecord {
                step,
                sender: sender as u32,
                ok,
            });
        }
    }
}
