use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::params::{ack_frequencies, size_class, theta};
use super::{
    AckStart, AcyclicGather, AcyclicGatherWithAck, ArbGather, BetaSchedule, BrokenGossip,
    GossipSubprotocol, NeighborDiscovery, RoundRobin, SimpleGossip,
};
use crate::digraph::Digraph;
use crate::selectors::{
    build_half_ladder, build_strong_ladder, LadderConfig, SelectorError, SelectorKind,
    SelectorLadder,
};
use crate::sim::{
    multiplex_to_single_frequency, strip_srt, NetworkModel, ProtocolFactory, SimError,
};
use crate::{ceil_log2, Step};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolKind {
    #[serde(rename = "roundrobin")]
    RoundRobin,
    AcyclicGather,
    ArbGather,
    AckGather,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 4] = [
        ProtocolKind::RoundRobin,
        ProtocolKind::AcyclicGather,
        ProtocolKind::ArbGather,
        ProtocolKind::AckGather,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ProtocolKind::RoundRobin => "roundrobin",
            ProtocolKind::AcyclicGather => "acyclic-gather",
            ProtocolKind::ArbGather => "arb-gather",
            ProtocolKind::AckGather => "ack-gather",
        }
    }

    /// Whether the protocol is only defined on acyclic graphs.
    pub fn needs_dag(self) -> bool {
        matches!(self, ProtocolKind::AcyclicGather | ProtocolKind::AckGather)
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProtocolKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| ConfigError::UnknownProtocol(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum GossipKind {
    Simple,
    /// Mutes about half of each node's frames.
    Broken {
        seed: u64,
    },
}

impl GossipKind {
    fn build(self) -> Arc<dyn GossipSubprotocol> {
        match self {
            GossipKind::Simple => Arc::new(SimpleGossip),
            GossipKind::Broken { seed } => Arc::new(BrokenGossip { seed }),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error(
        "unknown protocol `{0}` (expected roundrobin, acyclic-gather, arb-gather or ack-gather)"
    )]
    UnknownProtocol(String),
    #[error("selector construction failed: {0}")]
    Selector(#[from] SelectorError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Everything that selects and parameterizes a protocol.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub kind: ProtocolKind,
    /// `c_s` in `ℓ_j = c_s·4^j·⌈log₂ n⌉`.
    pub c_strong: usize,
    /// `c_h` in `b_j = c_h·2^j·⌈log₂ n⌉`.
    pub c_half: usize,
    pub gossip: GossipKind,
    /// Seed of the randomized selector construction.
    pub selector_seed: u64,
    pub ladder: LadderConfig,
    /// Learn in-neighbors with a RoundRobin cycle instead of being told.
    pub neighbor_discovery: bool,
    pub ack_start: AckStart,
}

impl ProtocolConfig {
    pub fn new(kind: ProtocolKind) -> Self {
        Self {
            kind,
            c_strong: 16,
            c_half: 16,
            gossip: GossipKind::Simple,
            selector_seed: 0,
            ladder: LadderConfig::default(),
            neighbor_discovery: false,
            ack_start: AckStart::default(),
        }
    }
}

/// Explicit changes to the protocol's default model.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelOverride {
    pub frequencies: Option<usize>,
    pub srt: Option<bool>,
    pub ack: Option<bool>,
}

/// Model reductions applied on top of the protocol.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reductions {
    /// Time-multiplex all frequencies onto one.
    pub single_frequency: bool,
    /// Remove the need to hear while transmitting (implies single frequency).
    pub strip_srt: bool,
}

/// A protocol ready to run on a particular graph.
pub struct Prepared {
    pub factory: Arc<dyn ProtocolFactory>,
    pub model: NetworkModel,
    /// Step budget for the run, already scaled by any reductions.
    pub budget: Step,
    /// The step budget in the protocol's own model.
    pub base_budget: Step,
    /// Time dilation from reductions: one protocol step spans this many
    /// run steps.
    pub dilation: Step,
    /// Upper bound on completion that the protocol guarantees (in run steps),
    /// and whether it is strict.
    pub bound: Option<(Step, bool)>,
    /// `β` offsets when the protocol uses activity periods.
    pub beta: Option<BetaSchedule>,
}

type LadderKey = (SelectorKind, usize, usize, usize, u64, String);

fn ladder_cache() -> &'static Mutex<HashMap<LadderKey, Arc<SelectorLadder>>> {
    static CACHE: OnceLock<Mutex<HashMap<LadderKey, Arc<SelectorLadder>>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// Builds (or reuses) a verified ladder. Construction is deterministic in its
/// arguments, so caching only saves time.
pub fn cached_ladder(
    kind: SelectorKind,
    n: usize,
    max_j: usize,
    c: usize,
    seed: u64,
    config: &LadderConfig,
) -> Result<Arc<SelectorLadder>, SelectorError> {
    let key = (
        kind,
        n,
        max_j,
        c,
        seed,
        serde_json::to_string(config).expect("ladder config serializes"),
    );
    if let Some(l) = ladder_cache().lock().expect("cache lock").get(&key) {
        return Ok(l.clone());
    }
    let ladder = Arc::new(match kind {
        SelectorKind::Strong => build_strong_ladder(n, max_j, c, seed, config)?,
        SelectorKind::Half => build_half_ladder(n, max_j, c, seed, config)?,
    });
    ladder_cache()
        .lock()
        .expect("cache lock")
        .insert(key, ladder.clone());
    Ok(ladder)
}

impl ProtocolConfig {
    /// The model the protocol is designed for.
    pub fn default_model(&self, n: usize) -> NetworkModel {
        match self.kind {
            ProtocolKind::RoundRobin => NetworkModel::standard(),
            ProtocolKind::AcyclicGather => NetworkModel::relaxed(theta(n)),
            ProtocolKind::ArbGather => NetworkModel::relaxed(theta(n) + super::scc_classes(n)),
            ProtocolKind::AckGather => NetworkModel::relaxed(ack_frequencies(n)).with_ack(true),
        }
    }

    pub fn strong_ladder(
        &self,
        n: usize,
        strength_bump: bool,
    ) -> Result<Arc<SelectorLadder>, SelectorError> {
        let config = LadderConfig {
            strength_bump,
            ..self.ladder.clone()
        };
        cached_ladder(
            SelectorKind::Strong,
            n,
            theta(n) - 2,
            self.c_strong,
            self.selector_seed,
            &config,
        )
    }

    pub fn half_ladder(&self, n: usize) -> Result<Arc<SelectorLadder>, SelectorError> {
        cached_ladder(
            SelectorKind::Half,
            n,
            ack_frequencies(n) - 2,
            self.c_half,
            self.selector_seed,
            &self.ladder,
        )
    }

    /// Builds the factory, model and budget for a run on `g`.
    pub fn prepare(
        &self,
        g: &Digraph,
        overrides: ModelOverride,
        reductions: Reductions,
    ) -> Result<Prepared, ConfigError> {
        let n = g.n();
        let mut model = self.default_model(n);
        if let Some(f) = overrides.frequencies {
            model.frequencies = f;
        }
        if let Some(s) = overrides.srt {
            model.srt = s;
        }
        if let Some(a) = overrides.ack {
            model.ack = a;
        }
        if reductions.single_frequency || reductions.strip_srt {
            model.frequencies = 1;
        }
        if reductions.strip_srt {
            model.srt = false;
        }
        // Without SRT and without the stripping wrapper, selectors need one
        // extra unit of strength so a listening node is isolated from itself.
        let bump = !model.srt && !reductions.strip_srt;

        let l = ceil_log2(n) as Step;
        let nn = n as Step;
        let mut beta = None;
        let (mut factory, base_budget, bound): (
            Arc<dyn ProtocolFactory>,
            Step,
            Option<(Step, bool)>,
        ) = match self.kind {
            ProtocolKind::RoundRobin => {
                let depth = g
                    .distances_to_target()
                    .into_iter()
                    .flatten()
                    .max()
                    .unwrap_or(0) as Step;
                let b = nn * (depth + 1);
                (Arc::new(RoundRobin), b, Some((b, false)))
            }
            ProtocolKind::AcyclicGather => {
                let f = AcyclicGather::new(self.strong_ladder(n, bump)?);
                let b = f.schedule().beta().period() * nn;
                beta = Some(f.schedule().beta().clone());
                (Arc::new(f), b, None)
            }
            ProtocolKind::ArbGather => {
                let f = ArbGather::new(self.strong_ladder(n, bump)?, self.gossip.build());
                let scc = g.compute_scc();
                let gossip: Step = scc
                    .components
                    .iter()
                    .map(|c| f.frame_length(size_class(c.len())))
                    .sum();
                let b = 2 * gossip + f.schedule().beta().period() * nn;
                beta = Some(f.schedule().beta().clone());
                (Arc::new(f), b, Some((b, false)))
            }
            ProtocolKind::AckGather => {
                let f = AcyclicGatherWithAck::new(self.half_ladder(n)?, self.ack_start);
                let b = 4 * self.c_half as Step * nn * l;
                (Arc::new(f), b, Some((b, true)))
            }
        };
        let offset = if self.neighbor_discovery {
            factory = Arc::new(NeighborDiscovery::new(factory));
            nn
        } else {
            0
        };
        let mut dilation: Step = 1;
        if (reductions.single_frequency || reductions.strip_srt) && factory.frequencies() > 1 {
            let kappa = factory.frequencies();
            factory = Arc::new(multiplex_to_single_frequency(factory, kappa));
            dilation *= kappa as Step;
        }
        if reductions.strip_srt {
            let s1 = cached_ladder(
                SelectorKind::Strong,
                n,
                1,
                self.c_strong,
                self.selector_seed,
                &self.ladder,
            )?;
            let wrap = Arc::new(s1.family(s1.len() - 1).clone());
            dilation *= wrap.length() as Step;
            factory = Arc::new(strip_srt(factory, wrap)?);
        }
        let budget = (base_budget + offset) * dilation;
        let bound = bound.map(|(b, strict)| ((b + offset) * dilation, strict));
        Ok(Prepared {
            factory,
            model,
            budget,
            base_budget,
            dilation,
            bound,
            beta,
        })
    }
}
