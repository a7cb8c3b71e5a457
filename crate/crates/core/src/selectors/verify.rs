use std::ops::ControlFlow;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{SelectorFamily, SelectorKind};
use crate::Label;

/// Default cap on `Σ_m C(n, m)·m·ℓ` for exhaustive checks.
pub const DEFAULT_EXHAUSTIVE_BUDGET: f64 = 1e10;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// `element` is never singled out of `set`.
    Strong { set: Vec<Label>, element: Label },
    /// Only `isolated` members of `set` are singled out.
    Half {
        set: Vec<Label>,
        isolated: usize,
        required: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail {
        witness: Witness,
    },
    /// Exhaustive enumeration would exceed the budget; nothing was checked.
    Infeasible {
        cost: f64,
        budget: f64,
    },
}

impl Verdict {
    pub fn is_pass(&self) -> bool {
        matches!(self, Verdict::Pass)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum SampledVerdict {
    NoCounterexample { trials: usize },
    Fail { witness: Witness },
}

/// Per-label membership bitmaps over the slot indices.
struct Membership {
    words: usize,
    bits: Vec<u64>,
}

impl Membership {
    fn new(f: &SelectorFamily) -> Self {
        let words = f.length().div_ceil(64);
        let mut bits = vec![0u64; words * f.n()];
        for v in 0..f.n() {
            let row = &mut bits[v * words..(v + 1) * words];
            for &i in f.slots_of(v) {
                row[i as usize / 64] |= 1 << (i % 64);
            }
        }
        Self { words, bits }
    }

    fn row(&self, v: Label) -> &[u64] {
        &self.bits[v * self.words..(v + 1) * self.words]
    }

    /// `out[i]` is set iff `set[i]` is alone in some slot among `set`.
    fn isolated(&self, set: &[Label], out: &mut Vec<bool>) {
        out.clear();
        out.resize(set.len(), false);
        for w in 0..self.words {
            let (mut once, mut twice) = (0u64, 0u64);
            for &x in set {
                let b = self.row(x)[w];
                twice |= once & b;
                once |= b;
            }
            let alone = once & !twice;
            if alone == 0 {
                continue;
            }
            for (flag, &x) in out.iter_mut().zip(set) {
                *flag |= self.row(x)[w] & alone != 0;
            }
        }
    }
}

fn binomial(n: usize, m: usize) -> f64 {
    (0..m).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Work estimate for exhaustive verification: `Σ_{m ≤ k} C(n, m)·m·ℓ`.
pub fn exhaustive_cost(f: &SelectorFamily) -> f64 {
    (1..=f.k().min(f.n()))
        .map(|m| binomial(f.n(), m) * m as f64 * f.length() as f64)
        .sum()
}

/// Visits all `m`-subsets of `[0, n)` in lexicographic order.
fn for_each_subset<B>(
    n: usize,
    m: usize,
    mut visit: impl FnMut(&[Label]) -> ControlFlow<B>,
) -> ControlFlow<B> {
    if m > n {
        return ControlFlow::Continue(());
    }
    let mut idx: Vec<Label> = (0..m).collect();
    loop {
        visit(&idx)?;
        let Some(pos) = (0..m).rev().find(|&i| idx[i] < n - m + i) else {
            return ControlFlow::Continue(());
        };
        idx[pos] += 1;
        for i in pos + 1..m {
            idx[i] = idx[i - 1] + 1;
        }
    }
}

fn check_subset(
    kind: SelectorKind,
    mem: &Membership,
    set: &[Label],
    scratch: &mut Vec<bool>,
) -> Option<Witness> {
    mem.isolated(set, scratch);
    match kind {
        SelectorKind::Strong => scratch.iter().position(|&ok| !ok).map(|i| Witness::Strong {
            set: set.to_vec(),
            element: set[i],
        }),
        SelectorKind::Half => {
            let isolated = scratch.iter().filter(|&&ok| ok).count();
            let required = set.len().div_ceil(2);
            (isolated < required).then(|| Witness::Half {
                set: set.to_vec(),
                isolated,
                required,
            })
        }
    }
}

fn exhaustive(kind: SelectorKind, f: &SelectorFamily, budget: f64) -> Verdict {
    let cost = exhaustive_cost(f);
    if cost > budget {
        return Verdict::Infeasible { cost, budget };
    }
    let mem = Membership::new(f);
    let mut scratch = Vec::new();
    // Smaller subsets first, so a failing family reports a minimal witness.
    for m in 1..=f.k().min(f.n()) {
        let found = for_each_subset(f.n(), m, |set| {
            match check_subset(kind, &mem, set, &mut scratch) {
                Some(w) => ControlFlow::Break(w),
                None => ControlFlow::Continue(()),
            }
        });
        if let ControlFlow::Break(witness) = found {
            return Verdict::Fail { witness };
        }
    }
    Verdict::Pass
}

/// Exhaustive check of the strong `(n, k)` property, whatever `f.kind()` says.
pub fn verify_strong_selector(f: &SelectorFamily, budget: f64) -> Verdict {
    exhaustive(SelectorKind::Strong, f, budget)
}

/// Exhaustive check of the half-selector property with the `⌈|X|/2⌉` threshold.
pub fn verify_half_selector(f: &SelectorFamily, budget: f64) -> Verdict {
    exhaustive(SelectorKind::Half, f, budget)
}

/// Exhaustive check of the property matching the family's declared kind.
pub fn verify(f: &SelectorFamily, budget: f64) -> Verdict {
    exhaustive(f.kind(), f, budget)
}

/// Checks the declared property on `trials` random subsets: a size uniform in
/// `1..=k`, then a uniform subset of that size.
pub fn verify_sampled(f: &SelectorFamily, trials: usize, seed: u64) -> SampledVerdict {
    assert!(trials >= 1, "at least one trial is required");
    let mem = Membership::new(f);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scratch = Vec::new();
    let kmax = f.k().min(f.n());
    for _ in 0..trials {
        let m = rng.gen_range(1..=kmax);
        let mut set = sample(&mut rng, f.n(), m).into_vec();
        set.sort_unstable();
        if let Some(witness) = check_subset(f.kind(), &mem, &set, &mut scratch) {
            return SampledVerdict::Fail { witness };
        }
    }
    SampledVerdict::NoCounterexample { trials }
}
