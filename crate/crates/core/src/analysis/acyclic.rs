use std::collections::HashMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{AnalysisError, Check};
use crate::protocols::BetaSchedule;
use crate::sim::{EventKind, Payload, Trace};
use crate::{Label, Step};

/// When and how a node's activity period was fixed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Activation {
    /// Step at which the node learned `alpha`.
    pub learned: Step,
    pub alpha: Step,
    /// In-neighbor whose recommendation was adopted; `None` for sources and
    /// for component-level activations.
    pub trigger: Option<Label>,
}

/// First activation per node, from `Activated` events or, for the
/// arbitrary-graph protocol, the start of the acyclic subroutine.
pub fn activations(trace: &Trace) -> Vec<Option<Activation>> {
    let mut acts = vec![None; trace.n()];
    for e in &trace.events {
        let act = match e.kind {
            EventKind::Activated { alpha, trigger } => Activation {
                learned: e.step,
                alpha,
                trigger,
            },
            EventKind::TestsPassed { alpha_acy, .. } => Activation {
                learned: e.step,
                alpha: alpha_acy,
                trigger: None,
            },
            _ => continue,
        };
        acts[e.node].get_or_insert(act);
    }
    acts
}

/// The `β` offsets recorded in the protocol parameters.
pub fn beta_schedule(trace: &Trace) -> Result<BetaSchedule, AnalysisError> {
    let values: Vec<Step> = trace
        .protocol
        .params
        .get("beta")
        .and_then(|v| serde_json::from_value(v.clone()).ok())
        .ok_or(AnalysisError::MissingParams("beta"))?;
    BetaSchedule::from_values(trace.n(), values).ok_or_else(|| {
        AnalysisError::Inconsistent("recorded β values do not form a schedule".into())
    })
}

/// `(u, v) ↦ (step, rws)` of the first message from `u` that `v` heard
/// carrying a recommended wake-up step.
type FirstReaches = HashMap<(Label, Label), (Step, Step)>;

fn first_reaches(trace: &Trace) -> Result<FirstReaches, AnalysisError> {
    if trace.log.is_none() {
        return Err(AnalysisError::NoLog);
    }
    let mut first = HashMap::new();
    for (step, _, receiver, sender, payload) in trace.deliveries() {
        if let Payload::Gather { rws, .. } = **payload {
            first.entry((sender, receiver)).or_insert((step, rws));
        }
    }
    Ok(first)
}

/// Each node fixes its activity period at most once.
pub fn single_activation(trace: &Trace) -> Check {
    let mut count = vec![0usize; trace.n()];
    for e in &trace.events {
        if matches!(
            e.kind,
            EventKind::Activated { .. } | EventKind::TestsPassed { .. }
        ) {
            count[e.node] += 1;
        }
    }
    let mut check = Check::new("single_activation");
    for (v, &c) in count.iter().enumerate() {
        check.record(c <= 1, || format!("node {v} activated {c} times"));
    }
    check
}

/// Path `v_0 … v_p = t` where each `v_a` is the in-neighbor whose first
/// message set `α(v_{a+1})`, ending at a source.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriticalPath {
    pub nodes: Vec<Label>,
    /// `α(v_a)` along the path.
    pub alphas: Vec<Step>,
}

impl CriticalPath {
    pub fn hops(&self) -> usize {
        self.nodes.len() - 1
    }
}

/// Walks activation triggers back from the target. Every link is checked
/// against the deliveries: `α(v_{a+1}) = rws¹(v_a, v_{a+1})` and `v_a` was the
/// last in-neighbor to first reach `v_{a+1}`. A mismatch means the engine or
/// protocol is broken.
pub fn critical_path(trace: &Trace) -> Result<CriticalPath, AnalysisError> {
    let g = &trace.graph;
    let acts = activations(trace);
    let first = first_reaches(trace)?;
    let t = g.target();
    if acts[t].is_none() {
        return Err(AnalysisError::TargetNotActivated(t));
    }
    let bad = |m: String| Err(AnalysisError::Inconsistent(m));
    let mut nodes = vec![t];
    let mut alphas = Vec::new();
    let mut v = t;
    loop {
        let Some(act) = acts[v] else {
            return bad(format!("node {v} on the critical path never activated"));
        };
        alphas.push(act.alpha);
        let Some(u) = act.trigger else {
            if !g.in_neighbors(v).is_empty() || act.alpha != 0 {
                return bad(format!(
                    "node {v} activated without a trigger but is not a source"
                ));
            }
            break;
        };
        if !g.has_edge(u, v) {
            return bad(format!("trigger {u} of node {v} is not an in-neighbor"));
        }
        let Some(&(step, rws)) = first.get(&(u, v)) else {
            return bad(format!("no delivery from trigger {u} to node {v}"));
        };
        if rws != act.alpha || step != act.learned {
            return bad(format!(
                "α({v}) = {} learned at {} but rws¹({u},{v}) = {rws} heard at {step}",
                act.alpha, act.learned
            ));
        }
        for &w in g.in_neighbors(v) {
            match first.get(&(w, v)) {
                None => return bad(format!("node {v} activated before hearing in-neighbor {w}")),
                Some(&(s, r)) if w != u && (s, r, w) > (step, rws, u) => {
                    return bad(format!("in-neighbor {w} reached {v} after trigger {u}"))
                }
                _ => {}
            }
        }
        if nodes.len() > g.n() {
            return bad("critical path revisits a node".into());
        }
        nodes.push(u);
        v = u;
    }
    nodes.reverse();
    alphas.reverse();
    if alphas.windows(2).any(|w| w[0] >= w[1]) {
        return bad(format!(
            "α does not increase along the critical path: {alphas:?}"
        ));
    }
    Ok(CriticalPath { nodes, alphas })
}

fn count_increments(
    acts: &[Option<Activation>],
    beta: &BetaSchedule,
    interval: &Range<Step>,
) -> u64 {
    acts.iter()
        .flatten()
        .map(|a| {
            beta.values()
                .iter()
                .filter(|&&b| interval.contains(&(a.alpha + b)))
                .count() as u64
        })
        .sum()
}

/// Stage-index increments of all nodes with steps in `interval`: the
/// `−1 → 0` step at `α(v)`, then `α(v) + β_j` for `j = 1..=θ`.
pub fn stage_increments(trace: &Trace, interval: Range<Step>) -> Result<u64, AnalysisError> {
    let beta = beta_schedule(trace)?;
    Ok(count_increments(&activations(trace), &beta, &interval))
}

/// In stage `j ≤ θ−2` a node sends only on frequency `j`, in the last stage
/// only on `θ−1`, and never outside its activity period. Transmissions on
/// frequencies `≥ θ` (component discovery) are not inspected.
pub fn frequency_discipline(trace: &Trace) -> Result<Check, AnalysisError> {
    if trace.log.is_none() {
        return Err(AnalysisError::NoLog);
    }
    let beta = beta_schedule(trace)?;
    let acts = activations(trace);
    let mut check = Check::new("frequency_discipline");
    for (step, freq, sender, _) in trace.transmissions() {
        if freq >= beta.theta() {
            continue;
        }
        let stage = acts[sender]
            .filter(|a| a.alpha <= step)
            .and_then(|a| beta.stage_of(step - a.alpha));
        check.record(stage == Some(freq), || {
            format!("node {sender} sent on frequency {freq} at step {step} in stage {stage:?}")
        });
    }
    Ok(check)
}

/// Sources activate at 0; any other node activates exactly when its last
/// in-neighbor first reaches it, adopting that in-neighbor's recommendation
/// (ties broken by larger rws, then larger label). Nodes that heard all
/// in-neighbors must have activated.
pub fn activation_after_in_neighbors(trace: &Trace) -> Result<Check, AnalysisError> {
    let g = &trace.graph;
    let first = first_reaches(trace)?;
    let acts = activations(trace);
    let mut check = Check::new("activation_after_in_neighbors");
    for (v, act) in acts.iter().enumerate() {
        let ins = g.in_neighbors(v);
        let last = ins
            .iter()
            .map(|&u| first.get(&(u, v)).map(|&(s, r)| (s, r, u)))
            .collect::<Option<Vec<_>>>()
            .map(|all| all.into_iter().max());
        let ok = match (*act, last) {
            (Some(a), _) if ins.is_empty() => a.alpha == 0 && a.learned == 0 && a.trigger.is_none(),
            (Some(a), Some(Some((s, r, u)))) => {
                a.learned == s && a.alpha == r && a.trigger == Some(u)
            }
            (Some(_), _) => false,
            (None, Some(_)) => false,
            (None, None) => true,
        };
        check.record(ok, || {
            format!(
                "node {v}: activation {:?}, last first-reach {last:?}",
                acts[v]
            )
        });
    }
    Ok(check)
}

/// Every node whose activity period ended inside the trace reached all of
/// its out-neighbors during it.
pub fn acyclic_liveness(trace: &Trace) -> Result<Check, AnalysisError> {
    let g = &trace.graph;
    let beta = beta_schedule(trace)?;
    let first = first_reaches(trace)?;
    let acts = activations(trace);
    let mut check = Check::new("acyclic_liveness");
    for (v, act) in acts.iter().enumerate() {
        let Some(a) = act else { continue };
        if a.alpha + beta.period() > trace.steps_executed {
            continue;
        }
        for &w in g.out_neighbors(v) {
            check.record(first.contains_key(&(v, w)), || {
                format!("node {v} never reached out-neighbor {w}")
            });
        }
    }
    Ok(check)
}

/// One link `v_a → v_{a+1}` of the critical path.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LemmaSegment {
    pub from: Label,
    pub to: Label,
    /// Stage `h` of `v_a` in which it first reached `v_{a+1}`.
    pub stage: usize,
    /// `α(v_{a+1}) − α(v_a) = β_{h+1}`.
    pub delta: Step,
    /// Stage increments of all nodes in `[α(v_a), α(v_{a+1}))`.
    pub increments: u64,
    /// What the selector argument guarantees: 1 for `h = 0`, otherwise more
    /// than `2^{h−1}` in-neighbors of `v_{a+1}` must close stage `h−1` in the
    /// interval.
    pub required: u64,
}

impl LemmaSegment {
    pub fn margin(&self) -> f64 {
        self.increments as f64 / self.required as f64
    }
}

/// Per-link stage-increment accounting along `path`.
pub fn lemma_segments(
    trace: &Trace,
    path: &CriticalPath,
) -> Result<Vec<LemmaSegment>, AnalysisError> {
    let beta = beta_schedule(trace)?;
    let acts = activations(trace);
    path.nodes
        .windows(2)
        .zip(path.alphas.windows(2))
        .map(|(v, a)| {
            let delta = a[1] - a[0];
            let Some(h) = beta
                .values()
                .iter()
                .position(|&b| b == delta)
                .and_then(|i| i.checked_sub(1))
            else {
                return Err(AnalysisError::Inconsistent(format!(
                    "α({}) − α({}) = {delta} is not a β value",
                    v[1], v[0]
                )));
            };
            let increments = count_increments(&acts, &beta, &(a[0]..a[1]));
            let required = if h == 0 { 1 } else { (1u64 << (h - 1)) + 1 };
            Ok(LemmaSegment {
                from: v[0],
                to: v[1],
                stage: h,
                delta,
                increments,
                required,
            })
        })
        .collect()
}
