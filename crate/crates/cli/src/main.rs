use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use radiogather::analysis::{analyze, ReportOptions, RunReport};
use radiogather::digraph::generate;
use radiogather::protocols::{AckStart, ModelOverride, ProtocolConfig, ProtocolKind, Reductions};
use radiogather::selectors::{
    build_verified, half_length, strong_length, verify, verify_sampled, LadderConfig,
    SampledVerdict, SelectorFamily, SelectorKind, Verdict, DEFAULT_EXHAUSTIVE_BUDGET,
};
use radiogather::sim::{run_with, RunOptions, Trace};
use radiogather::{Digraph, GraphKind, Step};

mod experiment;

#[derive(Parser)]
#[command(
    name = "radiogather",
    version,
    about = "Information gathering in ad-hoc radio networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a graph and write it in the text graph format.
    Gen(GenArgs),
    /// Build or load a selector family and verify it.
    Selector(SelectorArgs),
    /// Run one protocol on one graph.
    Run(RunArgs),
    /// Sweep a protocol over sizes and seeds, writing one CSV row per run.
    Experiment(experiment::ExperimentArgs),
    /// Analyze a stored JSONL trace.
    Analyze(AnalyzeArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum GenKind {
    RandomDag,
    LayeredDag,
    SccChain,
    Star,
    Path,
    RandomDigraph,
}

/// Generator parameters shared by `gen`, `run` and `experiment`.
#[derive(Args, Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct GenParams {
    /// Edge density (default 0.5 for layered_dag, 0.1 otherwise).
    #[arg(long)]
    pub density: Option<f64>,
    /// Layer width for layered_dag (default ⌈√n⌉).
    #[arg(long)]
    pub width: Option<usize>,
    /// Comma-separated component sizes for scc_chain (default blobs of 4).
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
}

impl GenParams {
    pub fn kind(&self, kind: GenKind, n: usize) -> GraphKind {
        let density = self.density.unwrap_or(match kind {
            GenKind::LayeredDag => 0.5,
            _ => 0.1,
        });
        match kind {
            GenKind::RandomDag => GraphKind::RandomDag { density },
            GenKind::LayeredDag => GraphKind::LayeredDag {
                width: self.width,
                density,
            },
            GenKind::SccChain => GraphKind::SccChain {
                sizes: self.sizes.clone().unwrap_or_else(|| blobs(n, 4)),
            },
            GenKind::Star => GraphKind::Star,
            GenKind::Path => GraphKind::Path,
            GenKind::RandomDigraph => GraphKind::RandomDigraph { density },
        }
    }
}

fn blobs(n: usize, size: usize) -> Vec<usize> {
    let mut sizes = vec![size; n / size];
    if !n.is_multiple_of(size) {
        sizes.push(n % size);
    }
    sizes
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AckStartArg {
    All,
    Sources,
}

/// Protocol constants and model flags. With no flags each protocol runs in
/// the relaxed model it was designed for.
#[derive(Args, Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct ProtocolArgs {
    /// roundrobin, acyclic-gather, arb-gather or ack-gather.
    #[arg(long, short = 'p', value_parser = parse_protocol)]
    pub protocol: Option<ProtocolKind>,
    /// Number of frequencies in the model.
    #[arg(long)]
    pub frequencies: Option<usize>,
    /// Let nodes hear while transmitting (`--srt false` to forbid it).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub srt: Option<bool>,
    /// Give transmitters acknowledgements (`--ack false` to withhold them).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub ack: Option<bool>,
    /// Time-multiplex all frequencies onto one.
    #[arg(long)]
    pub single_freq: bool,
    /// Wrap the protocol so it runs without SRT (also multiplexes).
    #[arg(long)]
    pub no_srt: bool,
    #[arg(long, default_value_t = 16)]
    pub c_strong: usize,
    #[arg(long, default_value_t = 16)]
    pub c_half: usize,
    /// Scales the protocol's step budget.
    #[arg(long, default_value_t = 1.0)]
    pub budget_multiplier: f64,
    #[arg(long, value_enum, default_value_t = AckStartArg::All)]
    pub ack_start: AckStartArg,
    /// Learn in-neighbors by a RoundRobin cycle before starting.
    #[arg(long)]
    pub neighbor_discovery: bool,
    /// Seed of the randomized selector construction.
    #[arg(long, default_value_t = 0)]
    pub selector_seed: u64,
}

fn parse_protocol(s: &str) -> Result<ProtocolKind, String> {
    s.parse().map_err(|e| format!("{e}"))
}

impl ProtocolArgs {
    pub fn kind(&self) -> Result<ProtocolKind> {
        self.protocol.context("--protocol is required")
    }

    pub fn config(&self) -> Result<ProtocolConfig> {
        let mut cfg = ProtocolConfig::new(self.kind()?);
        cfg.c_strong = self.c_strong;
        cfg.c_half = self.c_half;
        cfg.selector_seed = self.selector_seed;
        cfg.neighbor_discovery = self.neighbor_discovery;
        cfg.ack_start = match self.ack_start {
            AckStartArg::All => AckStart::All,
            AckStartArg::Sources => AckStart::Sources,
        };
        Ok(cfg)
    }

    pub fn overrides(&self) -> ModelOverride {
        ModelOverride {
            frequencies: self.frequencies,
            srt: self.srt,
            ack: self.ack,
        }
    }

    pub fn reductions(&self) -> Reductions {
        Reductions {
            single_frequency: self.single_freq,
            strip_srt: self.no_srt,
        }
    }

    pub fn scale(&self, budget: Step) -> Result<Step> {
        let m = self.budget_multiplier;
        if !(m.is_finite() && m > 0.0) {
            bail!("--budget-multiplier must be positive, got {m}");
        }
        Ok((budget as f64 * m).ceil() as Step)
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: GenKind,
    #[arg(long)]
    n: usize,
    #[arg(long, env = "RADIOGATHER_SEED", default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    params: GenParams,
    /// Output file (stdout if omitted).
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VerifyMode {
    Exhaustive,
    Sampled,
    None,
}

#[derive(Args)]
struct SelectorArgs {
    #[arg(long, value_parser = parse_selector_kind, required_unless_present = "check")]
    kind: Option<SelectorKind>,
    #[arg(long, required_unless_present = "check")]
    n: Option<usize>,
    #[arg(long, required_unless_present = "check")]
    k: Option<usize>,
    /// Number of sets (default c·k²·⌈log₂ n⌉ strong, c·k·⌈log₂ n⌉ half).
    #[arg(long)]
    length: Option<usize>,
    #[arg(long, default_value_t = 16)]
    c: usize,
    #[arg(long, env = "RADIOGATHER_SEED", default_value_t = 0)]
    seed: u64,
    /// Verify this selector file instead of building one.
    #[arg(long, conflicts_with_all = ["kind", "n", "k", "length"])]
    check: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = VerifyMode::Exhaustive)]
    verify: VerifyMode,
    /// Largest exhaustive cost Σ C(n, m)·m·length attempted.
    #[arg(long, default_value_t = DEFAULT_EXHAUSTIVE_BUDGET)]
    budget: f64,
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

fn parse_selector_kind(s: &str) -> Result<SelectorKind, String> {
    s.parse().map_err(|e| format!("{e}"))
}

#[derive(Args)]
struct RunArgs {
    /// Graph file in the text graph format.
    #[arg(long, conflicts_with = "gen")]
    graph: Option<PathBuf>,
    /// Generate the graph instead of reading it.
    #[arg(long, value_enum, requires = "n")]
    gen: Option<GenKind>,
    #[arg(long)]
    n: Option<usize>,
    #[command(flatten)]
    params: GenParams,
    #[arg(long, env = "RADIOGATHER_SEED", default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    protocol: ProtocolArgs,
    /// Keep running this many steps after completion.
    #[arg(long, default_value_t = 0)]
    linger: Step,
    /// Run the whole budget even after completion.
    #[arg(long)]
    to_budget: bool,
    #[arg(long, default_value = "trace.jsonl")]
    trace: PathBuf,
    /// Also write the analysis report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    trace: PathBuf,
    /// Completion bound to check, in run steps.
    #[arg(long)]
    bound: Option<Step>,
    /// Require completion strictly below the bound.
    #[arg(long, requires = "bound")]
    strict: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    report: Option<PathBuf>,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// `Ok(false)` when the command ran but a requested check failed.
fn dispatch(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Gen(a) => cmd_gen(a),
        Command::Selector(a) => cmd_selector(a),
        Command::Run(a) => cmd_run(a),
        Command::Experiment(a) => experiment::cmd_experiment(a),
        Command::Analyze(a) => cmd_analyze(a),
    }
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => io::stdout().write_all(text.as_bytes()).map_err(Into::into),
    }
}

fn cmd_gen(a: GenArgs) -> Result<bool> {
    let g = generate(&a.params.kind(a.kind, a.n), a.n, a.seed)?;
    write_or_print(a.out.as_deref(), &g.to_text())?;
    if a.out.is_some() {
        println!(
            "n={} target={} edges={} acyclic={}",
            g.n(),
            g.target(),
            g.edge_count(),
            g.is_acyclic()
        );
    }
    Ok(true)
}

fn cmd_selector(a: SelectorArgs) -> Result<bool> {
    let f = match &a.check {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            SelectorFamily::from_text(&text)?
        }
        None => {
            let (kind, n, k) = (a.kind.unwrap(), a.n.unwrap(), a.k.unwrap());
            let length = a.length.unwrap_or_else(|| match kind {
                SelectorKind::Strong => strong_length(n, k, a.c),
                SelectorKind::Half => half_length(n, k, a.c),
            });
            let f = build_verified(kind, n, k, length, a.seed, &LadderConfig::default())?;
            if let Some(out) = &a.out {
                fs::write(out, f.to_text())
                    .with_context(|| format!("writing {}", out.display()))?;
            }
            f
        }
    };
    println!(
        "{} selector n={} k={} length={}",
        f.kind(),
        f.n(),
        f.k(),
        f.length()
    );
    let ok = match a.verify {
        VerifyMode::None => true,
        VerifyMode::Exhaustive => match verify(&f, a.budget) {
            Verdict::Pass => {
                println!("exhaustive: pass");
                true
            }
            Verdict::Fail { witness } => {
                println!("exhaustive: fail {}", serde_json::to_string(&witness)?);
                false
            }
            Verdict::Infeasible { cost, budget } => {
                bail!("exhaustive verification costs {cost:.3e}, over the budget {budget:.3e}")
            }
        },
        VerifyMode::Sampled => match verify_sampled(&f, a.trials, a.seed) {
            SampledVerdict::NoCounterexample { trials } => {
                println!("sampled: no counterexample in {trials} trials");
                true
            }
            SampledVerdict::Fail { witness } => {
                println!("sampled: fail {}", serde_json::to_string(&witness)?);
                false
            }
        },
    };
    Ok(ok)
}

fn load_graph(path: &Path) -> Result<Digraph> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Digraph::from_text(&text).with_context(|| format!("parsing {}", path.display()))
}

fn cmd_run(a: RunArgs) -> Result<bool> {
    let g = match (&a.graph, a.gen) {
        (Some(path), _) => load_graph(path)?,
        (None, Some(kind)) => {
            let n = a.n.unwrap();
            generate(&a.params.kind(kind, n), n, a.seed)?
        }
        (None, None) => bail!("either --graph or --gen is required"),
    };
    let p = &a.protocol;
    let prep = p.config()?.prepare(&g, p.overrides(), p.reductions())?;
    let budget = p.scale(prep.budget)?;
    let mut opts = RunOptions::new(budget).linger(a.linger);
    if a.to_budget {
        opts = opts.run_to_budget();
    }
    let trace = run_with(&g, prep.factory.as_ref(), prep.model, &opts)?;
    let file =
        fs::File::create(&a.trace).with_context(|| format!("creating {}", a.trace.display()))?;
    trace.write_jsonl(io::BufWriter::new(file))?;

    let report = analyze(
        &trace,
        &ReportOptions {
            seed: Some(a.seed),
            bound: prep.bound,
        },
    )?;
    match report.completion_step {
        Some(c) => println!("completed at step {c}"),
        None => println!("not complete after {} steps", trace.steps_executed),
    }
    println!(
        "protocol={} model={} n={} budget={budget}",
        report.protocol, report.model, report.n
    );
    if let Some(b) = report.bound_value {
        println!(
            "bound={b} margin={}",
            report.margin.map_or("-".into(), |m| m.to_string())
        );
    }
    println!("{}", report.verdicts());
    print_failures(&report);
    if let Some(path) = &a.report {
        fs::write(path, serde_json::to_string_pretty(&report)?)?;
    }
    Ok(report.passed())
}

fn cmd_analyze(a: AnalyzeArgs) -> Result<bool> {
    let file =
        fs::File::open(&a.trace).with_context(|| format!("opening {}", a.trace.display()))?;
    let trace = Trace::read_jsonl(BufReader::new(file))?;
    let opts = ReportOptions {
        seed: a.seed,
        bound: a.bound.map(|b| (b, a.strict)),
    };
    let report = analyze(&trace, &opts)?;
    let json = serde_json::to_string_pretty(&report)?;
    write_or_print(a.report.as_deref(), &json)?;
    if a.report.is_some() {
        println!("{}", report.verdicts());
    }
    print_failures(&report);
    Ok(report.passed())
}

fn print_failures(report: &RunReport) {
    for c in report.checks.iter().filter(|c| !c.passed()) {
        let first = c.examples.first().map_or("", String::as_str);
        eprintln!(
            "{}: {} of {} failed; {first}",
            c.name, c.failures, c.checked
        );
    }
}
