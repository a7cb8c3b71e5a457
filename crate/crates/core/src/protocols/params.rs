use serde::{Deserialize, Serialize};

use crate::selectors::SelectorLadder;
use crate::{ceil_log2, Label, Step};

/// Stage count `θ = ⌈(log₂ n − log₂ log₂ n)/2⌉ + 2`, at least 2.
pub fn theta(n: usize) -> usize {
    if n < 2 {
        return 2;
    }
    let lg = (n as f64).log2();
    let half = (lg - lg.log2()) / 2.0;
    // Guard against 2.999999 style rounding noise for exact powers.
    let rounded = (half - 1e-9).ceil().max(0.0) as usize;
    (rounded + 2).max(2)
}

/// Frequencies of the acknowledgement protocol, `κ = ⌈log₂ n⌉ + 2`.
pub fn ack_frequencies(n: usize) -> usize {
    ceil_log2(n) + 2
}

/// Size classes of the SCC-subroutine, `j = 0..θ'` with `2^{θ'−1} ≥ n`.
pub fn scc_classes(n: usize) -> usize {
    ceil_log2(n) + 1
}

/// Smallest `j` with `2^j ≥ size`.
pub fn size_class(size: usize) -> usize {
    let mut j = 0;
    while (1usize << j) < size {
        j += 1;
    }
    j
}

/// Activity-stage offsets `β_0 < β_1 < … < β_θ`.
///
/// Stage `j ≤ θ−2` lasts `ℓ_j` steps and the last stage lasts `n` steps, so
/// `β_θ = Σ_{g ≤ θ−2} ℓ_g + n`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BetaSchedule {
    n: usize,
    beta: Vec<Step>,
}

impl BetaSchedule {
    /// `lengths` are `ℓ_0..ℓ_{θ−2}`.
    pub fn new(n: usize, lengths: &[usize]) -> Self {
        assert!(!lengths.is_empty(), "at least one selector stage");
        let mut beta = Vec::with_capacity(lengths.len() + 2);
        let mut acc: Step = 0;
        beta.push(0);
        for &l in lengths {
            acc += l as Step;
            beta.push(acc);
        }
        beta.push(acc + n as Step);
        Self { n, beta }
    }

    pub fn from_ladder(ladder: &SelectorLadder) -> Self {
        Self::new(ladder.n(), &ladder.lengths())
    }

    /// Rebuilds a schedule from `β_0..β_θ` as recorded in trace parameters.
    pub fn from_values(n: usize, beta: Vec<Step>) -> Option<Self> {
        let ok = beta.len() >= 3
            && beta[0] == 0
            && beta.windows(2).all(|w| w[0] < w[1])
            && beta[beta.len() - 1] - beta[beta.len() - 2] == n as Step;
        ok.then_some(Self { n, beta })
    }

    pub fn theta(&self) -> usize {
        self.beta.len() - 1
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn beta(&self, j: usize) -> Step {
        self.beta[j]
    }

    pub fn values(&self) -> &[Step] {
        &self.beta
    }

    /// Length `β_θ` of an activity period.
    pub fn period(&self) -> Step {
        self.beta[self.theta()]
    }

    /// Stage `j` with `β_j ≤ offset < β_{j+1}`, or `None` past the period.
    pub fn stage_of(&self, offset: Step) -> Option<usize> {
        if offset >= self.period() {
            return None;
        }
        Some(self.beta.partition_point(|&b| b <= offset) - 1)
    }
}

/// First step `≥ from` of the form `v + m·n`.
pub fn round_robin_next(v: Label, n: usize, from: Step) -> Step {
    let n = n as Step;
    from + (v as Step + n - from % n) % n
}
