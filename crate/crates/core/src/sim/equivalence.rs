use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{Payload, Trace};
use crate::{Label, Step};

/// Maps steps of the second trace onto the time axis of the first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TimeMap {
    Identity,
    /// `σ ↦ ⌊σ / d⌋`, e.g. rounds of a multiplexed run.
    Divide(Step),
}

impl TimeMap {
    pub fn apply(self, step: Step) -> Step {
        match self {
            TimeMap::Identity => step,
            TimeMap::Divide(d) => step / d,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquivalenceVerdict {
    /// Every delivery of the first trace appears in the mapped second one.
    pub superset: bool,
    /// The two delivery sets coincide.
    pub equal: bool,
    pub first_deliveries: usize,
    pub second_deliveries: usize,
    /// Up to ten `(step, sender, receiver)` deliveries of the first trace
    /// missing from the second.
    pub missing: Vec<(Step, Label, Label)>,
    pub missing_count: usize,
}

impl EquivalenceVerdict {
    pub fn pass(&self) -> bool {
        self.superset
    }
}

type Key<'a> = (Step, Label, Label, &'a Payload);

fn keys(t: &Trace, map: TimeMap) -> HashSet<Key<'_>> {
    t.deliveries()
        .map(|(step, _, receiver, sender, payload)| (map.apply(step), sender, receiver, &**payload))
        .collect()
}

/// Compares the sets of `(step, sender, receiver, payload)` deliveries of two
/// full traces after pulling `t2` back through `time_map`. Passes iff `t2`'s
/// set contains `t1`'s.
pub fn delivery_equivalence(t1: &Trace, t2: &Trace, time_map: TimeMap) -> EquivalenceVerdict {
    compare(keys(t1, TimeMap::Identity), keys(t2, time_map))
}

/// Checks a run of a [`strip_srt`](super::strip_srt)-wrapped protocol
/// against its own inner schedule: in every segment of `segment` steps, each
/// message that the simultaneous-receive model would deliver, given the
/// inner transmissions of that segment, must actually be delivered somewhere
/// in the segment. The first set of the verdict holds those expected
/// deliveries, the second the actual ones, both on the segment time axis.
pub fn srt_replay(stripped: &Trace, segment: Step) -> EquivalenceVerdict {
    let g = &stripped.graph;
    // (segment, freq) -> distinct (sender, payload) transmitted in it
    let mut sent: HashMap<(Step, usize), Vec<(Label, &Payload)>> = HashMap::new();
    for (step, freq, sender, payload) in stripped.transmissions() {
        let list = sent.entry((step / segment, freq)).or_default();
        if !list.iter().any(|&(u, p)| u == sender && p == &**payload) {
            list.push((sender, payload));
        }
    }
    let mut expected = HashSet::new();
    for (&(seg, _), list) in &sent {
        let mut heard: HashMap<Label, (usize, Label, &Payload)> = HashMap::new();
        for &(u, p) in list {
            for &w in g.out_neighbors(u) {
                heard.entry(w).or_insert((0, u, p)).0 += 1;
            }
        }
        for (w, (count, u, p)) in heard {
            if count == 1 {
                expected.insert((seg, u, w, p));
            }
        }
    }
    compare(expected, keys(stripped, TimeMap::Divide(segment)))
}

fn compare(a: HashSet<Key<'_>>, b: HashSet<Key<'_>>) -> EquivalenceVerdict {
    let mut missing: Vec<(Step, Label, Label)> = a
        .iter()
        .filter(|k| !b.contains(*k))
        .map(|&(s, u, v, _)| (s, u, v))
        .collect();
    missing.sort_unstable();
    let missing_count = missing.len();
    missing.truncate(10);
    EquivalenceVerdict {
        superset: missing_count == 0,
        equal: missing_count == 0 && a.len() == b.len(),
        first_deliveries: a.len(),
        second_deliveries: b.len(),
        missing,
        missing_count,
    }
}
