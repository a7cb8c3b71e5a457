use std::collections::BTreeMap;
use std::sync::Arc;

use radiogather::digraph::generate;
use radiogather::protocols::{ModelOverride, ProtocolConfig, ProtocolKind, Reductions, RoundRobin};
use radiogather::sim::*;
use radiogather::{Digraph, Freq, GraphKind, Label, NodeSet, Step};

fn rumor(v: Label) -> Arc<Payload> {
    Arc::new(Payload::Rumors {
        rumors: NodeSet::singleton(v),
    })
}

fn tx(sender: Label, freq: Freq) -> Transmission {
    Transmission {
        sender,
        freq,
        payload: rumor(sender),
    }
}

/// 0, 1, 2 all point at 3; 3 points at 4.
fn fan_in() -> Digraph {
    Digraph::new(5, 4, [(0, 3), (1, 3), (2, 3), (3, 4)]).unwrap()
}

fn heard(out: &StepOutcome) -> Vec<(Label, Label, Freq)> {
    out.deliveries
        .iter()
        .map(|d| (d.receiver, d.sender, d.freq))
        .collect()
}

#[test]
fn zero_to_three_transmitters() {
    let g = fan_in();
    let m = NetworkModel::standard();
    assert!(heard(&resolve_step(&g, &m, &[])).is_empty());
    assert_eq!(heard(&resolve_step(&g, &m, &[tx(1, 0)])), vec![(3, 1, 0)]);
    assert!(heard(&resolve_step(&g, &m, &[tx(0, 0), tx(1, 0)])).is_empty());
    assert!(heard(&resolve_step(&g, &m, &[tx(0, 0), tx(1, 0), tx(2, 0)])).is_empty());
}

#[test]
fn frequencies_are_independent() {
    let g = fan_in();
    let m = NetworkModel::relaxed(3);
    let out = resolve_step(&g, &m, &[tx(0, 0), tx(1, 1), tx(2, 1)]);
    assert_eq!(heard(&out), vec![(3, 0, 0)]);
    let out = resolve_step(&g, &m, &[tx(0, 0), tx(1, 1), tx(2, 2)]);
    assert_eq!(heard(&out), vec![(3, 0, 0), (3, 1, 1), (3, 2, 2)]);
}

#[test]
fn half_duplex_blocks_only_own_frequency() {
    let g = fan_in();
    // 3 transmits on 0 while 0 sends to it on 0 and 1 on 1.
    let txs = [tx(0, 0), tx(1, 1), tx(3, 0)];
    let with = resolve_step(&g, &NetworkModel::relaxed(2), &txs);
    assert_eq!(heard(&with), vec![(3, 0, 0), (3, 1, 1), (4, 3, 0)]);
    let without = resolve_step(&g, &NetworkModel::relaxed(2).with_srt(false), &txs);
    assert_eq!(heard(&without), vec![(3, 1, 1), (4, 3, 0)]);
}

#[test]
fn acks_report_any_success() {
    let g = fan_in();
    let txs = [tx(0, 0), tx(1, 0), tx(2, 1), tx(3, 0)];
    let m = NetworkModel::relaxed(2).with_ack(true);
    let out = resolve_step(&g, &m, &txs);
    assert_eq!(out.acks, vec![(0, false), (1, false), (2, true), (3, true)]);
    let out = resolve_step(&g, &NetworkModel::relaxed(2), &txs);
    assert!(out.acks.is_empty());
}

#[test]
fn self_loops_are_not_edges() {
    assert!(Digraph::new(2, 1, [(0, 0), (0, 1)]).is_err());
}

/// Node `v` sends its rumor set at the scripted steps and frequencies.
struct Script {
    freqs: usize,
    plan: BTreeMap<(Label, Step), Vec<Freq>>,
}

struct ScriptNode {
    v: Label,
    plan: BTreeMap<Step, Vec<Freq>>,
    rumors: NodeSet,
    log: Log,
}

/// `(node, step, receptions, ack)` per step a node was shown.
type Log = Arc<std::sync::Mutex<Vec<(Label, Step, usize, Option<bool>)>>>;

impl ProtocolFactory for Script {
    fn name(&self) -> String {
        "script".into()
    }
    fn frequencies(&self) -> usize {
        self.freqs
    }
    fn spawn(&self, ctx: &NodeContext) -> Box<dyn NodeProtocol> {
        Box::new(ScriptNode {
            v: ctx.label,
            plan: self
                .plan
                .iter()
                .filter(|((v, _), _)| *v == ctx.label)
                .map(|((_, s), f)| (*s, f.clone()))
                .collect(),
            rumors: NodeSet::singleton(ctx.label),
            log: Default::default(),
        })
    }
}

impl NodeProtocol for ScriptNode {
    fn label(&self) -> Label {
        self.v
    }
    fn transmit(&mut self, step: Step, out: &mut Vec<(Freq, Arc<Payload>)>) {
        let p = Arc::new(Payload::Rumors {
            rumors: self.rumors.clone(),
        });
        for &f in &self.plan[&step] {
            out.push((f, p.clone()));
        }
    }
    fn receive(&mut self, step: Step, receptions: &[Reception], ack: Option<bool>) {
        self.log
            .lock()
            .unwrap()
            .push((self.v, step, receptions.len(), ack));
        for r in receptions {
            self.rumors.union_with(r.payload.rumors().unwrap());
        }
    }
    fn next_wakeup(&self, from: Step) -> Option<Step> {
        self.plan.range(from..).next().map(|(&s, _)| s)
    }
    fn rumors(&self) -> &NodeSet {
        &self.rumors
    }
}

fn script(freqs: usize, plan: &[(Label, Step, &[Freq])]) -> Script {
    Script {
        freqs,
        plan: plan.iter().map(|&(v, s, f)| ((v, s), f.to_vec())).collect(),
    }
}

#[test]
fn engine_relays_along_a_path() {
    let g = Digraph::new(3, 2, [(0, 1), (1, 2)]).unwrap();
    let f = script(1, &[(0, 0, &[0]), (1, 5, &[0])]);
    let t = run(&g, &f, NetworkModel::standard(), 100).unwrap();
    assert_eq!(t.outcome, Outcome::Completed { step: 5 });
    assert_eq!(t.steps_executed, 6);
    assert_eq!(t.target_progress, vec![(5, 3)]);
    let d: Vec<_> = t.deliveries().map(|(s, _, r, u, _)| (s, u, r)).collect();
    assert_eq!(d, vec![(0, 0, 1), (5, 1, 2)]);
}

#[test]
fn stall_is_reported_as_deadlock() {
    let g = Digraph::new(3, 2, [(0, 1), (1, 2)]).unwrap();
    let f = script(1, &[(0, 3, &[0])]);
    let t = run(&g, &f, NetworkModel::standard(), 50).unwrap();
    assert_eq!(
        t.outcome,
        Outcome::BudgetExhausted {
            stalled_from: Some(4)
        }
    );
    assert_eq!(t.steps_executed, 50);
}

#[test]
fn budget_cuts_a_live_run() {
    let g = Digraph::new(3, 2, [(0, 1), (1, 2)]).unwrap();
    let f = script(1, &[(0, 0, &[0]), (1, 9, &[0])]);
    let t = run(&g, &f, NetworkModel::standard(), 9).unwrap();
    assert_eq!(t.outcome, Outcome::BudgetExhausted { stalled_from: None });
    assert_eq!(t.steps_executed, 9);
}

#[test]
fn single_node_completes_immediately() {
    let g = Digraph::new(1, 0, []).unwrap();
    let t = run(&g, &RoundRobin, NetworkModel::standard(), 10).unwrap();
    assert_eq!(t.outcome, Outcome::Completed { step: 0 });
    assert_eq!(t.steps_executed, 0);
    let t = run_with(
        &g,
        &RoundRobin,
        NetworkModel::standard(),
        &RunOptions::new(10).linger(3),
    )
    .unwrap();
    assert_eq!(t.steps_executed, 3);
}

#[test]
fn linger_and_run_to_budget() {
    let g = generate(&GraphKind::Path, 4, 0).unwrap();
    let base = run(&g, &RoundRobin, NetworkModel::standard(), 100).unwrap();
    let c = base.completion_step().unwrap();
    let more = run_with(
        &g,
        &RoundRobin,
        NetworkModel::standard(),
        &RunOptions::new(100).linger(7),
    )
    .unwrap();
    assert_eq!(more.completion_step(), Some(c));
    assert_eq!(more.steps_executed, c + 1 + 7);
    let all = run_with(
        &g,
        &RoundRobin,
        NetworkModel::standard(),
        &RunOptions::new(100).run_to_budget(),
    )
    .unwrap();
    assert_eq!(all.steps_executed, 100);
    assert_eq!(all.completion_step(), Some(c));
}

#[test]
fn model_mismatches_are_rejected() {
    let g = generate(&GraphKind::Star, 4, 0).unwrap();
    let f = script(3, &[]);
    assert!(matches!(
        run(&g, &f, NetworkModel::relaxed(2), 10),
        Err(SimError::TooFewFrequencies { .. })
    ));
    let cfg = ProtocolConfig::new(ProtocolKind::AckGather);
    let p = cfg
        .prepare(
            &g,
            ModelOverride {
                ack: Some(false),
                ..Default::default()
            },
            Reductions::default(),
        )
        .unwrap();
    assert!(matches!(
        run(&g, p.factory.as_ref(), p.model, 10),
        Err(SimError::AckRequired(_))
    ));
    let unreachable = Digraph::new(3, 2, [(0, 2)]).unwrap();
    assert!(matches!(
        run(&unreachable, &RoundRobin, NetworkModel::standard(), 10),
        Err(SimError::TargetUnreachable {
            count: 1,
            example: 1
        })
    ));
}

#[test]
fn out_of_model_frequency_is_an_error() {
    let g = Digraph::new(2, 1, [(0, 1)]).unwrap();
    let bad = script(1, &[(0, 0, &[0, 0])]);
    assert!(matches!(
        run(&g, &bad, NetworkModel::standard(), 5),
        Err(SimError::DuplicateTransmission { .. })
    ));
}

#[test]
fn step_records_regroup_the_log() {
    let g = fan_in();
    let f = script(2, &[(0, 0, &[0]), (1, 0, &[0, 1]), (2, 2, &[1])]);
    let t = run_with(
        &g,
        &f,
        NetworkModel::relaxed(2).with_ack(true),
        &RunOptions::new(4).run_to_budget(),
    )
    .unwrap();
    let r0 = t.step_record(0);
    assert_eq!(r0.frequencies.len(), 2);
    assert!(
        r0.frequencies[0].deliveries.is_empty(),
        "0 and 1 collide on frequency 0"
    );
    assert_eq!(r0.frequencies[1].deliveries.len(), 1);
    assert_eq!(r0.acks, vec![(0, false), (1, true)]);
    assert!(t.step_record(1).frequencies.is_empty());
    assert_eq!(t.step_records().count(), 4);
}

fn ag_setup(n: usize, seed: u64) -> (Digraph, ProtocolConfig) {
    let g = generate(&GraphKind::RandomDag { density: 0.2 }, n, seed).unwrap();
    (g, ProtocolConfig::new(ProtocolKind::AcyclicGather))
}

#[test]
fn runs_are_deterministic() {
    let (g, cfg) = ag_setup(24, 3);
    let p = cfg
        .prepare(&g, ModelOverride::default(), Reductions::default())
        .unwrap();
    let a = run(&g, p.factory.as_ref(), p.model, p.budget).unwrap();
    let b = run(&g, p.factory.as_ref(), p.model, p.budget).unwrap();
    assert!(a.is_complete());
    assert_eq!(a, b);
    assert_eq!(a.to_jsonl(), b.to_jsonl());
}

#[test]
fn reception_order_does_not_matter() {
    for kind in [
        ProtocolKind::AcyclicGather,
        ProtocolKind::ArbGather,
        ProtocolKind::AckGather,
    ] {
        let g = generate(&GraphKind::RandomDag { density: 0.3 }, 20, 5).unwrap();
        let p = ProtocolConfig::new(kind)
            .prepare(&g, ModelOverride::default(), Reductions::default())
            .unwrap();
        let base = run(&g, p.factory.as_ref(), p.model, p.budget).unwrap();
        for order in [
            DeliveryOrder::Reverse,
            DeliveryOrder::Shuffled(1),
            DeliveryOrder::Shuffled(2),
        ] {
            let opts = RunOptions {
                delivery_order: order,
                ..RunOptions::new(p.budget)
            };
            let t = run_with(&g, p.factory.as_ref(), p.model, &opts).unwrap();
            assert_eq!(t, base, "{kind} under {order:?}");
        }
    }
}

#[test]
fn jsonl_round_trip() {
    let (g, cfg) = ag_setup(12, 1);
    let p = cfg
        .prepare(&g, ModelOverride::default(), Reductions::default())
        .unwrap();
    let t = run(&g, p.factory.as_ref(), p.model, p.budget).unwrap();
    let text = t.to_jsonl();
    let back = Trace::read_jsonl(text.as_bytes()).unwrap();
    assert_eq!(back, t);
    assert!(Trace::read_jsonl("{\"nonsense\":1}\n".as_bytes()).is_err());

    // Gossip vectors, acks and discovery labels all have to survive too.
    let cyc = generate(&GraphKind::SccChain { sizes: vec![3, 4] }, 7, 2).unwrap();
    for (kind, g) in [
        (ProtocolKind::ArbGather, &cyc),
        (ProtocolKind::AckGather, &g),
    ] {
        let mut cfg = ProtocolConfig::new(kind);
        cfg.neighbor_discovery = true;
        let p = cfg
            .prepare(g, ModelOverride::default(), Reductions::default())
            .unwrap();
        let t = run(g, p.factory.as_ref(), p.model, p.budget).unwrap();
        assert!(t.is_complete());
        let back = Trace::read_jsonl(t.to_jsonl().as_bytes()).unwrap();
        assert_eq!(back, t, "{kind}");
    }
}

#[test]
fn summary_recording_keeps_outcome() {
    let (g, cfg) = ag_setup(16, 2);
    let p = cfg
        .prepare(&g, ModelOverride::default(), Reductions::default())
        .unwrap();
    let full = run(&g, p.factory.as_ref(), p.model, p.budget).unwrap();
    let summary = run_with(
        &g,
        p.factory.as_ref(),
        p.model,
        &RunOptions::new(p.budget).summary(),
    )
    .unwrap();
    assert!(summary.log.is_none());
    assert_eq!(summary.outcome, full.outcome);
    assert_eq!(summary.events, full.events);
    assert_eq!(summary.target_progress, full.target_progress);
}

#[test]
fn multiplexing_preserves_deliveries() {
    for seed in 0..3 {
        let (g, cfg) = ag_setup(20, seed);
        let base = cfg
            .prepare(&g, ModelOverride::default(), Reductions::default())
            .unwrap();
        let mux = cfg
            .prepare(
                &g,
                ModelOverride::default(),
                Reductions {
                    single_frequency: true,
                    strip_srt: false,
                },
            )
            .unwrap();
        assert_eq!(mux.model.frequencies, 1);
        let t0 = run(&g, base.factory.as_ref(), base.model, base.budget).unwrap();
        let t1 = run(&g, mux.factory.as_ref(), mux.model, mux.budget).unwrap();
        let v = delivery_equivalence(&t0, &t1, TimeMap::Divide(mux.dilation));
        assert!(v.equal, "seed {seed}: {v:?}");
        let c0 = t0.completion_step().unwrap();
        let c1 = t1.completion_step().unwrap();
        assert_eq!(c1 / mux.dilation, c0);
    }
}

#[test]
fn stripping_keeps_every_scheduled_success() {
    let (g, cfg) = ag_setup(16, 4);
    let strip = cfg
        .prepare(
            &g,
            ModelOverride::default(),
            Reductions {
                single_frequency: false,
                strip_srt: true,
            },
        )
        .unwrap();
    assert!(!strip.model.srt);
    let t = run(&g, strip.factory.as_ref(), strip.model, strip.budget).unwrap();
    assert!(t.is_complete());
    let kappa = strip.factory.params()["inner"]["params"]["kappa"]
        .as_u64()
        .unwrap();
    let v = srt_replay(&t, strip.dilation / kappa);
    assert!(v.superset && v.first_deliveries > 0, "{v:?}");
}

#[test]
fn strip_requires_single_frequency_inner() {
    let (g, cfg) = ag_setup(8, 0);
    let p = cfg
        .prepare(&g, ModelOverride::default(), Reductions::default())
        .unwrap();
    let sel = Arc::new(radiogather::selectors::build_strong_selector(8, 2, 64, 0).unwrap());
    assert!(matches!(
        strip_srt(p.factory.clone(), sel.clone()),
        Err(SimError::InvalidTransform(_))
    ));
    assert!(strip_srt(Arc::new(RoundRobin), sel).is_ok());
    let weak = Arc::new(radiogather::selectors::build_strong_selector(8, 1, 8, 0).unwrap());
    assert!(strip_srt(Arc::new(RoundRobin), weak).is_err());
}

#[test]
fn multiplexed_roundrobin_matches_plain() {
    let g = generate(
        &GraphKind::LayeredDag {
            width: Some(3),
            density: 0.5,
        },
        13,
        2,
    )
    .unwrap();
    let t0 = run(&g, &RoundRobin, NetworkModel::standard(), 1000).unwrap();
    let mux = multiplex_to_single_frequency(Arc::new(RoundRobin), 3);
    let t1 = run(&g, &mux, NetworkModel::standard(), 3000).unwrap();
    assert!(delivery_equivalence(&t0, &t1, TimeMap::Divide(3)).equal);
}
