use std::io::{BufRead, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{NetworkModel, NodeSnapshot, Payload};
use crate::digraph::Digraph;
use crate::nodeset::NodeSet;
use crate::{Freq, Label, Step};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolInfo {
    pub name: String,
    pub params: serde_json::Value,
}

/// Protocol-level happenings that analyses need but deliveries do not show.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum EventKind {
    NeighborsLearned {
        in_neighbors: NodeSet,
    },
    /// The activation step became known. `trigger` is the in-neighbor whose
    /// first recommended wake-up step was adopted (`None` for sources).
    Activated {
        alpha: Step,
        trigger: Option<Label>,
    },
    /// Active/dormant status in force from the event step on.
    Mode {
        active: bool,
    },
    /// All component tests passed after double frame `double_frame` of size
    /// class `class`.
    TestsPassed {
        class: usize,
        double_frame: u64,
        component: NodeSet,
        rumors: NodeSet,
        alpha_acy: Step,
    },
    Anomaly {
        message: String,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeEvent {
    pub step: Step,
    pub node: Label,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Outcome {
    /// The target held all rumors after step `step`.
    Completed { step: Step },
    /// The budget ran out. `stalled_from` is set when no node could ever
    /// transmit again from that step on, i.e. the run deadlocked.
    BudgetExhausted { stalled_from: Option<Step> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TxRecord {
    pub step: Step,
    pub sender: u32,
    pub freq: u32,
    pub payload: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RxRecord {
    pub step: Step,
    pub receiver: u32,
    pub sender: u32,
    pub freq: u32,
    pub payload: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AckRecord {
    pub step: Step,
    pub sender: u32,
    pub ok: bool,
}

/// Flat per-run logs, each sorted by step. Payloads are interned.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepLog {
    pub payloads: Vec<Arc<Payload>>,
    pub transmissions: Vec<TxRecord>,
    pub deliveries: Vec<RxRecord>,
    pub acks: Vec<AckRecord>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunStats {
    pub transmissions: u64,
    pub deliveries: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub model: NetworkModel,
    pub protocol: ProtocolInfo,
    pub graph: Digraph,
    pub budget: Step,
    /// Steps `0..steps_executed` were simulated.
    pub steps_executed: Step,
    pub outcome: Outcome,
    pub initial_target_rumors: usize,
    /// `(step, |R(t)| after that step)` at every change.
    pub target_progress: Vec<(Step, usize)>,
    pub events: Vec<NodeEvent>,
    pub final_states: Vec<NodeSnapshot>,
    pub stats: RunStats,
    /// Present when the run recorded full step logs.
    pub log: Option<StepLog>,
}

/// Everything that happened on one frequency in one step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FreqRecord {
    pub freq: Freq,
    pub transmitters: Vec<(Label, Arc<Payload>)>,
    /// `(receiver, sender, payload)`. Receivers not listed heard silence or
    /// a collision, which are indistinguishable.
    pub deliveries: Vec<(Label, Label, Arc<Payload>)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepRecord {
    pub step: Step,
    /// Only frequencies with at least one transmitter.
    pub frequencies: Vec<FreqRecord>,
    pub acks: Vec<(Label, bool)>,
}

impl Trace {
    pub fn completion_step(&self) -> Option<Step> {
        match self.outcome {
            Outcome::Completed { step } => Some(step),
            Outcome::BudgetExhausted { .. } => None,
        }
    }

    pub fn is_complete(&self) -> bool {
        self.completion_step().is_some()
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    fn require_log(&self) -> &StepLog {
        self.log
            .as_ref()
            .expect("this query needs a trace recorded with full step logs")
    }

    /// Deliveries as `(step, freq, receiver, sender, payload)`, in step order.
    pub fn deliveries(&self) -> impl Iterator<Item = (Step, Freq, Label, Label, &Arc<Payload>)> {
        let log = self.require_log();
        log.deliveries.iter().map(move |d| {
            (
                d.step,
                d.freq as Freq,
                d.receiver as Label,
                d.sender as Label,
                &log.payloads[d.payload as usize],
            )
        })
    }

    /// Transmissions as `(step, freq, sender, payload)`, in step order.
    pub fn transmissions(&self) -> impl Iterator<Item = (Step, Freq, Label, &Arc<Payload>)> {
        let log = self.require_log();
        log.transmissions.iter().map(move |t| {
            (
                t.step,
                t.freq as Freq,
                t.sender as Label,
                &log.payloads[t.payload as usize],
            )
        })
    }

    /// The record of `step`; empty for silent steps.
    pub fn step_record(&self, step: Step) -> StepRecord {
        let log = self.require_log();
        let range = |key: &dyn Fn(usize) -> Step, len: usize| {
            let lo = partition(len, |i| key(i) < step);
            let hi = partition(len, |i| key(i) <= step);
            lo..hi
        };
        let txs = range(&|i| log.transmissions[i].step, log.transmissions.len());
        let rxs = range(&|i| log.deliveries[i].step, log.deliveries.len());
        let acks = range(&|i| log.acks[i].step, log.acks.len());

        let mut freqs: Vec<FreqRecord> = Vec::new();
        for t in &log.transmissions[txs] {
            let f = t.freq as Freq;
            let rec = match freqs.iter_mut().find(|r| r.freq == f) {
                Some(r) => r,
                None => {
                    freqs.push(FreqRecord {
                        freq: f,
                        transmitters: Vec::new(),
                        deliveries: Vec::new(),
                    });
                    freqs.last_mut().expect("just pushed")
                }
            };
            rec.transmitters
                .push((t.sender as Label, log.payloads[t.payload as usize].clone()));
        }
        for d in &log.deliveries[rxs] {
            let rec = freqs
                .iter_mut()
                .find(|r| r.freq == d.freq as Freq)
                .expect("a delivery implies a transmission on its frequency");
            rec.deliveries.push((
                d.receiver as Label,
                d.sender as Label,
                log.payloads[d.payload as usize].clone(),
            ));
        }
        freqs.sort_by_key(|r| r.freq);
        StepRecord {
            step,
            frequencies: freqs,
            acks: log.acks[acks]
                .iter()
                .map(|a| (a.sender as Label, a.ok))
                .collect(),
        }
    }

    /// Dense records for steps `0..steps_executed`.
    pub fn step_records(&self) -> impl Iterator<Item = StepRecord> + '_ {
        (0..self.steps_executed).map(|s| self.step_record(s))
    }

    pub fn events_of(&self, node: Label) -> impl Iterator<Item = &NodeEvent> {
        self.events.iter().filter(move |e| e.node == node)
    }
}

fn partition(len: usize, pred: impl Fn(usize) -> bool) -> usize {
    let (mut lo, mut hi) = (0, len);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if pred(mid) {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    lo
}

#[derive(Debug, Error)]
pub enum TraceFormatError {
    #[error("trace i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("trace line {line}: {source}")]
    Json {
        line: usize,
        source: serde_json::Error,
    },
    #[error("trace: {0}")]
    Structure(String),
}

#[derive(Serialize, Deserialize)]
struct FreqLine {
    f: Freq,
    transmitters: Vec<(Label, u32)>,
    deliveries: Vec<(Label, Label, u32)>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Line {
    Header {
        model: NetworkModel,
        protocol: ProtocolInfo,
        graph: Digraph,
        budget: Step,
        initial_target_rumors: usize,
        full_log: bool,
    },
    Payload {
        id: u32,
        payload: Arc<Payload>,
    },
    Step {
        step: Step,
        freq: Vec<FreqLine>,
        acks: Vec<(Label, bool)>,
    },
    Event(NodeEvent),
    Final {
        steps_executed: Step,
        #[serde(flatten)]
        outcome: Outcome,
        target_progress: Vec<(Step, usize)>,
        stats: RunStats,
        final_states: Vec<NodeSnapshot>,
    },
}

impl Trace {
    /// JSON-lines export: a header, then payload definitions and one line per
    /// non-silent step (payloads are defined before first use), then events,
    /// then a final summary line.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<(), TraceFormatError> {
        let mut emit = |line: &Line| -> Result<(), TraceFormatError> {
            serde_json::to_writer(&mut w, line)
                .map_err(|e| TraceFormatError::Json { line: 0, source: e })?;
            w.write_all(b"\n")?;
            Ok(())
        };
        emit(&Line::Header {
            model: self.model,
            protocol: self.protocol.clone(),
            graph: self.graph.clone(),
            budget: self.budget,
            initial_target_rumors: self.initial_target_rumors,
            full_log: self.log.is_some(),
        })?;
        if let Some(log) = &self.log {
            let mut defined = 0u32;
            let (mut ti, mut di, mut ai) = (0, 0, 0);
            loop {
                let next = [
                    log.transmissions.get(ti).map(|t| t.step),
                    log.deliveries.get(di).map(|d| d.step),
                    log.acks.get(ai).map(|a| a.step),
                ]
                .into_iter()
                .flatten()
                .min();
                let Some(step) = next else { break };
                let mut freq: Vec<FreqLine> = Vec::new();
                let line_for = |freq: &mut Vec<FreqLine>, f: Freq| -> usize {
                    match freq.iter().position(|l| l.f == f) {
                        Some(i) => i,
                        None => {
                            freq.push(FreqLine {
                                f,
                                transmitters: Vec::new(),
                                deliveries: Vec::new(),
                            });
                            freq.len() - 1
                        }
                    }
                };
                while let Some(t) = log.transmissions.get(ti).filter(|t| t.step == step) {
                    while defined <= t.payload {
                        emit(&Line::Payload {
                            id: defined,
                            payload: log.payloads[defined as usize].clone(),
                        })?;
                        defined += 1;
                    }
                    let i = line_for(&mut freq, t.freq as Freq);
                    freq[i].transmitters.push((t.sender as Label, t.payload));
                    ti += 1;
                }
                while let Some(d) = log.deliveries.get(di).filter(|d| d.step == step) {
                    let i = line_for(&mut freq, d.freq as Freq);
                    freq[i]
                        .deliveries
                        .push((d.receiver as Label, d.sender as Label, d.payload));
                    di += 1;
                }
                let mut acks = Vec::new();
                while let Some(a) = log.acks.get(ai).filter(|a| a.step == step) {
                    acks.push((a.sender as Label, a.ok));
                    ai += 1;
                }
                freq.sort_by_key(|l| l.f);
                emit(&Line::Step { step, freq, acks })?;
            }
        }
        for e in &self.events {
            emit(&Line::Event(e.clone()))?;
        }
        emit(&Line::Final {
            steps_executed: self.steps_executed,
            outcome: self.outcome,
            target_progress: self.target_progress.clone(),
            stats: self.stats,
            final_states: self.final_states.clone(),
        })
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf)
            .expect("writing a trace to memory cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Trace, TraceFormatError> {
        let structure = |msg: &str| TraceFormatError::Structure(msg.to_string());
        let mut header = None;
        let mut fin = None;
        let mut log = StepLog::default();
        let mut events = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: Line = serde_json::from_str(&line).map_err(|e| TraceFormatError::Json {
                line: i + 1,
                source: e,
            })?;
            match parsed {
                h @ Line::Header { .. } => header = Some(h),
                Line::Payload { id, payload } => {
                    if id as usize != log.payloads.len() {
                        return Err(structure("payload ids must be dense and ordered"));
                    }
                    log.payloads.push(payload);
                }
                Line::Step { step, freq, acks } => {
                    let known = log.payloads.len() as u32;
                    for fl in freq {
                        for (sender, payload) in fl.transmitters {
                            if payload >= known {
                                return Err(structure("payload used before definition"));
                            }
                            log.transmissions.push(TxRecord {
                                step,
                                sender: sender as u32,
                                freq: fl.f as u32,
                                payload,
                            });
                        }
                        for (receiver, sender, payload) in fl.deliveries {
                            log.deliveries.push(RxRecord {
                                step,
                                receiver: receiver as u32,
                                sender: sender as u32,
                                freq: fl.f as u32,
                                payload,
                            });
                        }
                    }
                    log.acks.extend(acks.into_iter().map(|(s, ok)| AckRecord {
                        step,
                        sender: s as u32,
                        ok,
                    }));
                }
                Line::Event(e) => events.push(e),
                f @ Line::Final { .. } => fin = Some(f),
            }
        }
        let Some(Line::Header {
            model,
            protocol,
            graph,
            budget,
            initial_target_rumors,
            full_log,
        }) = header
        else {
            return Err(structure("missing header line"));
        };
        let Some(Line::Final {
            steps_executed,
            outcome,
            target_progress,
            stats,
            final_states,
        }) = fin
        else {
            return Err(structure("missing final line"));
        };
        sort_log(&mut log);
        Ok(Trace {
            model,
            protocol,
            graph,
            budget,
            steps_executed,
            outcome,
            initial_target_rumors,
            target_progress,
            events,
            final_states,
            stats,
            log: full_log.then_some(log),
        })
    }
}

/// Restores the canonical in-step order the engine produces.
fn sort_log(log: &mut StepLog) {
    log.transmissions
        .sort_by_key(|t| (t.step, t.sender, t.freq));
    log.deliveries.sort_by_key(|d| (d.step, d.receiver, d.freq));
    log.acks.sort_by_key(|a| (a.step, a.sender));
}
