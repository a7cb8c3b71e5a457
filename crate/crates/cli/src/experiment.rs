//! Parameter sweeps with CSV output.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use radiogather::analysis::{analyze, loglog_slope, median, ReportOptions, RunReport, CSV_COLUMNS};
use radiogather::digraph::generate;
use radiogather::sim::{run_with, RunOptions};

use crate::{GenKind, GenParams, ProtocolArgs};

/// Everything that determines the output of a sweep.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub gen: GenKind,
    pub params: GenParams,
    pub protocol: ProtocolArgs,
    pub sizes: Vec<usize>,
    pub seeds: u64,
    /// First seed; runs use `seed_base .. seed_base + seeds`.
    pub seed_base: u64,
    /// Record only completion and node states (protocol checks are skipped).
    pub summary_only: bool,
}

#[derive(Args)]
pub struct ExperimentArgs {
    /// Read the sweep from a JSON spec instead of flags.
    #[arg(long, conflicts_with_all = ["gen", "n"])]
    spec: Option<PathBuf>,
    #[arg(long, value_enum, required_unless_present = "spec")]
    gen: Option<GenKind>,
    /// Comma-separated sizes.
    #[arg(long, value_delimiter = ',', required_unless_present = "spec")]
    n: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    #[arg(long, env = "RADIOGATHER_SEED", default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    params: GenParams,
    #[command(flatten)]
    protocol: ProtocolArgs,
    #[arg(long)]
    summary_only: bool,
    /// CSV output (stdout if omitted).
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Write the resolved spec as JSON.
    #[arg(long)]
    write_spec: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

impl ExperimentArgs {
    fn resolve(&self) -> Result<ExperimentSpec> {
        if let Some(path) = &self.spec {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            return serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", path.display()));
        }
        self.protocol.kind()?;
        Ok(ExperimentSpec {
            gen: self.gen.unwrap(),
            params: self.params.clone(),
            protocol: self.protocol.clone(),
            sizes: self.n.clone(),
            seeds: self.seeds,
            seed_base: self.seed,
            summary_only: self.summary_only,
        })
    }
}

fn run_one(spec: &ExperimentSpec, n: usize, seed: u64) -> Result<RunReport> {
    let g = generate(&spec.params.kind(spec.gen, n), n, seed)?;
    let p = &spec.protocol;
    let prep = p.config()?.prepare(&g, p.overrides(), p.reductions())?;
    let mut opts = RunOptions::new(p.scale(prep.budget)?);
    if spec.summary_only {
        opts = opts.summary();
    }
    let trace = run_with(&g, prep.factory.as_ref(), prep.model, &opts)?;
    Ok(analyze(
        &trace,
        &ReportOptions {
            seed: Some(seed),
            bound: prep.bound,
        },
    )?)
}

pub fn cmd_experiment(a: ExperimentArgs) -> Result<bool> {
    let spec = a.resolve()?;
    if spec.sizes.is_empty() || spec.seeds == 0 {
        bail!("nothing to run: need at least one size and one seed");
    }
    if let Some(path) = &a.write_spec {
        fs::write(path, serde_json::to_string_pretty(&spec)?)?;
    }
    let mut points: Vec<(usize, u64)> = spec
        .sizes
        .iter()
        .flat_map(|&n| (0..spec.seeds).map(move |s| (n, spec.seed_base + s)))
        .collect();
    points.sort_unstable();
    points.dedup();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.threads.unwrap_or(0))
        .build()?;
    // `collect` keeps input order, so rows come out sorted by (n, seed).
    let reports: Vec<Result<RunReport>> = pool.install(|| {
        points
            .par_iter()
            .map(|&(n, seed)| run_one(&spec, n, seed).with_context(|| format!("n={n} seed={seed}")))
            .collect()
    });

    let sink: Box<dyn io::Write> = match &a.out {
        Some(path) => Box::new(
            fs::File::create(path).with_context(|| format!("creating {}", path.display()))?,
        ),
        None => Box::new(io::stdout()),
    };
    let mut csv = csv::Writer::from_writer(sink);
    csv.write_record(CSV_COLUMNS)?;
    let proto = spec.protocol.kind()?.as_str();
    let gen = spec.params.kind(spec.gen, 1).name();
    let mut by_n: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut failed = 0;
    for (&(n, seed), r) in points.iter().zip(reports) {
        let r = r?;
        if !r.passed() {
            failed += 1;
        }
        if let Some(c) = r.completion_step {
            by_n.entry(n).or_default().push(c as f64);
        }
        csv.write_record(r.csv_record(&format!("{proto}-{gen}-n{n}-s{seed}")))?;
    }
    csv.flush()?;
    drop(csv);

    let medians: Vec<(f64, f64)> = by_n
        .iter()
        .filter_map(|(&n, v)| median(v).map(|m| (n as f64, m)))
        .collect();
    for (n, m) in &medians {
        eprintln!("n={n} median completion {m}");
    }
    match loglog_slope(&medians) {
        Some(s) => eprintln!("{proto}: log-log slope of median completion vs n = {s:.3}"),
        None => eprintln!("{proto}: slope needs at least two sizes with completed runs"),
    }
    eprintln!("{} runs, {failed} with failed checks", points.len());
    Ok(failed == 0)
}
