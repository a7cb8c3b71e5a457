use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{
    build_half_selector, build_strong_selector, verify, verify_sampled, SampledVerdict,
    SelectorError, SelectorFamily, SelectorKind, Verdict, Verification, DEFAULT_EXHAUSTIVE_BUDGET,
};
use crate::{ceil_log2, derive_seed};

/// Slot count `c·k²·⌈log₂ n⌉` used for strong `(n, k)`-selectors.
pub fn strong_length(n: usize, k: usize, c: usize) -> usize {
    c * k * k * ceil_log2(n)
}

/// Slot count `c·k·⌈log₂ n⌉` used for `(n, k)`-half-selectors.
pub fn half_length(n: usize, k: usize, c: usize) -> usize {
    c * k * ceil_log2(n)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderConfig {
    /// Exhaustive verification is attempted when its cost is at most this.
    pub exhaustive_budget: f64,
    /// Random subsets checked when exhaustive verification is infeasible.
    pub sampled_trials: usize,
    /// Resamples before falling back to singletons.
    pub max_attempts: usize,
    /// Request strength `2^j + 1` instead of `2^j`, for runs where a node
    /// cannot hear on a frequency it transmits on.
    pub strength_bump: bool,
}

impl Default for LadderConfig {
    fn default() -> Self {
        Self {
            exhaustive_budget: DEFAULT_EXHAUSTIVE_BUDGET,
            sampled_trials: 1000,
            max_attempts: 16,
            strength_bump: false,
        }
    }
}

/// Families for `k = 2^0, 2^1, …, 2^max_j` with lengths in exact geometric
/// progression (ratio 4 for strong, 2 for half).
#[derive(Clone, Debug, PartialEq)]
pub struct SelectorLadder {
    n: usize,
    kind: SelectorKind,
    constant: usize,
    families: Vec<Arc<SelectorFamily>>,
}

impl SelectorLadder {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> SelectorKind {
        self.kind
    }

    pub fn constant(&self) -> usize {
        self.constant
    }

    pub fn family(&self, j: usize) -> &SelectorFamily {
        &self.families[j]
    }

    pub fn families(&self) -> impl Iterator<Item = &SelectorFamily> {
        self.families.iter().map(|f| f.as_ref())
    }

    pub fn len(&self) -> usize {
        self.families.len()
    }

    pub fn is_empty(&self) -> bool {
        self.families.is_empty()
    }

    pub fn lengths(&self) -> Vec<usize> {
        self.families.iter().map(|f| f.length()).collect()
    }
}

/// Strong ladder `j = 0..=max_j` with `ℓ_j = c_s·4^j·⌈log₂ n⌉`.
pub fn build_strong_ladder(
    n: usize,
    max_j: usize,
    c_s: usize,
    seed: u64,
    config: &LadderConfig,
) -> Result<SelectorLadder, SelectorError> {
    build_ladder(SelectorKind::Strong, n, max_j, c_s, seed, config)
}

/// Half ladder `j = 0..=max_j` with `b_j = c_h·2^j·⌈log₂ n⌉`.
pub fn build_half_ladder(
    n: usize,
    max_j: usize,
    c_h: usize,
    seed: u64,
    config: &LadderConfig,
) -> Result<SelectorLadder, SelectorError> {
    build_ladder(SelectorKind::Half, n, max_j, c_h, seed, config)
}

fn build_ladder(
    kind: SelectorKind,
    n: usize,
    max_j: usize,
    c: usize,
    seed: u64,
    config: &LadderConfig,
) -> Result<SelectorLadder, SelectorError> {
    if c == 0 {
        return Err(SelectorError::ZeroLength);
    }
    let families = (0..=max_j)
        .map(|j| {
            let nominal = 1usize << j;
            let length = match kind {
                SelectorKind::Strong => strong_length(n, nominal, c),
                SelectorKind::Half => half_length(n, nominal, c),
            };
            let k = (nominal + usize::from(config.strength_bump)).min(n);
            build_verified(kind, n, k, length, derive_seed(&[seed, j as u64]), config).map(Arc::new)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SelectorLadder {
        n,
        kind,
        constant: c,
        families,
    })
}

/// Resamples until the family passes the strongest feasible check; falls
/// back to singletons when resampling keeps failing and the length allows it.
pub fn build_verified(
    kind: SelectorKind,
    n: usize,
    k: usize,
    length: usize,
    seed: u64,
    config: &LadderConfig,
) -> Result<SelectorFamily, SelectorError> {
    for attempt in 0..config.max_attempts {
        let attempt_seed = derive_seed(&[seed, attempt as u64]);
        let mut f = match kind {
            SelectorKind::Strong => build_strong_selector(n, k, length, attempt_seed)?,
            SelectorKind::Half => build_half_selector(n, k, length, attempt_seed)?,
        };
        if f.verification().is_certain() {
            return Ok(f);
        }
        match verify(&f, config.exhaustive_budget) {
            Verdict::Pass => {
                f.set_verification(Verification::Exhaustive);
                return Ok(f);
            }
            Verdict::Fail { .. } => continue,
            Verdict::Infeasible { .. } => {
                let trials = config.sampled_trials;
                if let SampledVerdict::NoCounterexample { .. } =
                    verify_sampled(&f, trials, derive_seed(&[attempt_seed, 1]))
                {
                    f.set_verification(Verification::Sampled { trials });
                    return Ok(f);
                }
            }
        }
    }
    if length >= n {
        return SelectorFamily::singletons(kind, n, k, length);
    }
    Err(SelectorError::Unverifiable {
        kind,
        n,
        k,
        length,
        attempts: config.max_attempts,
    })
}
