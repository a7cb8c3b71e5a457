//! Strong selectors and half-selectors.
//!
//! A family `S_0..S_{ℓ−1}` over `[0, n)` is a strong `(n, k)`-selector if for
//! every `X` with `|X| ≤ k` and every `x ∈ X` some `S_i ∩ X = {x}`; it is an
//! `(n, k)`-half-selector if at least `⌈|X|/2⌉` members of each such `X` are
//! singled out. Protocols run a family cyclically: node `v` transmits at step
//! `τ` iff `v ∈ S_{τ mod ℓ}`.
//!
//! Families are stored transposed, as one sorted slot list per label, because
//! the hot query during simulation is "when does `v` next transmit".

mod io;
mod ladder;
mod verify;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{derive_seed, Label, Step};

pub use ladder::{
    build_half_ladder, build_strong_ladder, build_verified, half_length, strong_length,
    LadderConfig, SelectorLadder,
};
pub use verify::{
    exhaustive_cost, verify, verify_half_selector, verify_sampled, verify_strong_selector,
    SampledVerdict, Verdict, Witness, DEFAULT_EXHAUSTIVE_BUDGET,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SelectorError {
    #[error("strength k = {k} must lie in [1, n = {n}]")]
    BadStrength { n: usize, k: usize },
    #[error("selector length must be at least 1")]
    ZeroLength,
    #[error("label {label} in set {set} is outside [0, {n})")]
    LabelOutOfRange { label: Label, set: usize, n: usize },
    #[error("singleton fallback needs length >= n ({n}), got {length}")]
    FallbackTooShort { n: usize, length: usize },
    #[error(
        "no verified family for {kind} (n={n}, k={k}, length={length}) after {attempts} attempts"
    )]
    Unverifiable {
        kind: SelectorKind,
        n: usize,
        k: usize,
        length: usize,
        attempts: usize,
    },
    #[error("selector file: {0}")]
    Parse(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectorKind {
    Strong,
    Half,
}

impl std::fmt::Display for SelectorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SelectorKind::Strong => "strong",
            SelectorKind::Half => "half",
        })
    }
}

impl std::str::FromStr for SelectorKind {
    type Err = SelectorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "strong" => Ok(SelectorKind::Strong),
            "half" => Ok(SelectorKind::Half),
            other => Err(SelectorError::Parse(format!(
                "unknown selector kind `{other}`"
            ))),
        }
    }
}

/// How far a family's contract has been checked.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Verification {
    Unverified,
    /// The property holds by construction (k = 1, or singletons).
    ByConstruction,
    Exhaustive,
    /// No counterexample among `trials` random subsets.
    Sampled {
        trials: usize,
    },
}

impl Verification {
    /// Exhaustively checked or correct by construction.
    pub fn is_certain(self) -> bool {
        matches!(
            self,
            Verification::Exhaustive | Verification::ByConstruction
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SelectorFamily {
    n: usize,
    k: usize,
    kind: SelectorKind,
    length: usize,
    /// `slots[v]`: sorted indices `i` with `v ∈ S_i`.
    slots: Vec<Vec<u32>>,
    verification: Verification,
}

impl SelectorFamily {
    /// A family from explicit sets. Duplicate members are merged.
    pub fn from_sets(
        kind: SelectorKind,
        n: usize,
        k: usize,
        sets: &[Vec<Label>],
    ) -> Result<Self, SelectorError> {
        check_strength(n, k)?;
        if sets.is_empty() {
            return Err(SelectorError::ZeroLength);
        }
        let mut slots = vec![Vec::new(); n];
        for (i, set) in sets.iter().enumerate() {
            for &v in set {
                if v >= n {
                    return Err(SelectorError::LabelOutOfRange {
                        label: v,
                        set: i,
                        n,
                    });
                }
                slots[v].push(i as u32);
            }
        }
        for s in &mut slots {
            s.dedup();
        }
        Ok(Self {
            n,
            k,
            kind,
            length: sets.len(),
            slots,
            verification: Verification::Unverified,
        })
    }

    /// `[{0}, {1}, …, {n−1}]` padded with empty sets; a valid selector of
    /// either kind for every `k`.
    pub fn singletons(
        kind: SelectorKind,
        n: usize,
        k: usize,
        length: usize,
    ) -> Result<Self, SelectorError> {
        check_strength(n, k)?;
        if length < n {
            return Err(SelectorError::FallbackTooShort { n, length });
        }
        Ok(Self {
            n,
            k,
            kind,
            length,
            slots: (0..n as u32).map(|v| vec![v]).collect(),
            verification: Verification::ByConstruction,
        })
    }

    /// `[[0, n)]` padded with empty sets: the only sensible `k = 1` family.
    pub fn full_set(kind: SelectorKind, n: usize, length: usize) -> Result<Self, SelectorError> {
        check_strength(n, 1)?;
        if length == 0 {
            return Err(SelectorError::ZeroLength);
        }
        Ok(Self {
            n,
            k: 1,
            kind,
            length,
            slots: vec![vec![0]; n],
            verification: Verification::ByConstruction,
        })
    }

    /// Each label joins each set independently with probability `1/k`.
    pub fn random(
        kind: SelectorKind,
        n: usize,
        k: usize,
        length: usize,
        seed: u64,
    ) -> Result<Self, SelectorError> {
        check_strength(n, k)?;
        if length == 0 {
            return Err(SelectorError::ZeroLength);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = 1.0 / k as f64;
        let slots = (0..n)
            .map(|_| bernoulli_positions(length, p, &mut rng))
            .collect();
        Ok(Self {
            n,
            k,
            kind,
            length,
            slots,
            verification: Verification::Unverified,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn kind(&self) -> SelectorKind {
        self.kind
    }

    /// Number of sets `ℓ`, padding included.
    pub fn length(&self) -> usize {
        self.length
    }

    pub fn verification(&self) -> Verification {
        self.verification
    }

    pub(crate) fn set_verification(&mut self, v: Verification) {
        self.verification = v;
    }

    /// Sorted indices of the sets containing `v`.
    pub fn slots_of(&self, v: Label) -> &[u32] {
        &self.slots[v]
    }

    /// Materializes the sets `S_0..S_{ℓ−1}`.
    pub fn sets(&self) -> Vec<Vec<Label>> {
        let mut sets = vec![Vec::new(); self.length];
        for (v, slots) in self.slots.iter().enumerate() {
            for &i in slots {
                sets[i as usize].push(v);
            }
        }
        sets
    }

    /// True iff `node ∈ S_{step mod ℓ}`.
    pub fn schedule_transmits(&self, node: Label, step: Step) -> bool {
        let i = (step % self.length as Step) as u32;
        self.slots[node].binary_search(&i).is_ok()
    }

    /// The first step `≥ step` at which `node` transmits, or `None` if it
    /// belongs to no set.
    pub fn next_transmission(&self, node: Label, step: Step) -> Option<Step> {
        let slots = &self.slots[node];
        let first = *slots.first()?;
        let len = self.length as Step;
        let base = step - step % len;
        let i = (step % len) as u32;
        let at = slots.partition_point(|&s| s < i);
        Some(match slots.get(at) {
            Some(&s) => base + s as Step,
            None => base + len + first as Step,
        })
    }

    /// Copy with extra empty sets appended up to `length`.
    pub fn padded(&self, length: usize) -> Self {
        assert!(length >= self.length, "padding cannot shrink a family");
        Self {
            length,
            ..self.clone()
        }
    }

    /// Copy that deliberately violates the contract on `{x, y}`.
    ///
    /// For strong families every set containing `x` also receives `y`, so `x`
    /// is never singled out from `{x, y}`. For half-selectors every set
    /// meeting `{x, y}` receives both, so neither is singled out.
    pub fn with_planted_violation(&self, x: Label, y: Label) -> Self {
        assert!(x != y && x < self.n && y < self.n);
        let mut slots = self.slots.clone();
        let merged = union_sorted(&slots[x], &slots[y]);
        match self.kind {
            SelectorKind::Strong => slots[y] = merged,
            SelectorKind::Half => {
                slots[x] = merged.clone();
                slots[y] = merged;
            }
        }
        Self {
            slots,
            verification: Verification::Unverified,
            ..self.clone()
        }
    }
}

fn check_strength(n: usize, k: usize) -> Result<(), SelectorError> {
    if k == 0 || k > n {
        Err(SelectorError::BadStrength { n, k })
    } else {
        Ok(())
    }
}

fn union_sorted(a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut out: Vec<u32> = a.iter().chain(b).copied().collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Sorted positions in `0..len` of independent `p`-coin successes, drawn by
/// geometric skipping.
fn bernoulli_positions(len: usize, p: f64, rng: &mut ChaCha8Rng) -> Vec<u32> {
    if p >= 1.0 {
        return (0..len as u32).collect();
    }
    let log_q = (1.0 - p).ln();
    let mut out = Vec::with_capacity((len as f64 * p * 1.2) as usize + 4);
    let mut pos = 0usize;
    while pos < len {
        let u: f64 = 1.0 - rng.gen::<f64>();
        let skip = (u.ln() / log_q).floor();
        if skip >= (len - pos) as f64 {
            break;
        }
        pos += skip as usize;
        out.push(pos as u32);
        pos += 1;
    }
    out
}

/// Strong `(n, k)`-selector of exactly `target_length` sets.
///
/// `k = 1` yields the full set padded with empty sets (correct by
/// construction); otherwise a random family that is left unverified.
pub fn build_strong_selector(
    n: usize,
    k: usize,
    target_length: usize,
    seed: u64,
) -> Result<SelectorFamily, SelectorError> {
    build(SelectorKind::Strong, n, k, target_length, seed)
}

/// Half-selector counterpart of [`build_strong_selector`].
pub fn build_half_selector(
    n: usize,
    k: usize,
    target_length: usize,
    seed: u64,
) -> Result<SelectorFamily, SelectorError> {
    build(SelectorKind::Half, n, k, target_length, seed)
}

fn build(
    kind: SelectorKind,
    n: usize,
    k: usize,
    length: usize,
    seed: u64,
) -> Result<SelectorFamily, SelectorError> {
    check_strength(n, k)?;
    if k == 1 {
        return SelectorFamily::full_set(kind, n, length);
    }
    let kind_tag = kind as u64;
    SelectorFamily::random(
        kind,
        n,
        k,
        length,
        derive_seed(&[seed, kind_tag, n as u64, k as u64, length as u64]),
    )
}
