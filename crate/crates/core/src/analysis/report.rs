use serde::{Deserialize, Serialize};

use super::acyclic::{
    activation_after_in_neighbors, activations, acyclic_liveness, beta_schedule, critical_path,
    frequency_discipline, lemma_segments, single_activation, stage_increments, CriticalPath,
    LemmaSegment,
};
use super::arb::{arb_rumor_completeness, arb_safety};
use super::completion::{completion_from_deliveries, completion_time};
use super::layers::{check_layer_claim, LayerVerdict};
use super::{AnalysisError, Check};
use crate::sim::{EventKind, Trace};
use crate::Step;

/// Columns of [`RunReport::csv_record`].
pub const CSV_COLUMNS: [&str; 10] = [
    "run_id",
    "protocol",
    "model",
    "n",
    "seed",
    "completion_step",
    "budget",
    "bound_value",
    "margin",
    "verdicts",
];

#[derive(Clone, Debug, Default)]
pub struct ReportOptions {
    pub seed: Option<u64>,
    /// Completion bound in run steps and whether it is strict.
    pub bound: Option<(Step, bool)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub protocol: String,
    pub model: String,
    pub n: usize,
    pub seed: Option<u64>,
    pub budget: Step,
    pub steps_executed: Step,
    pub completion_step: Option<Step>,
    pub bound_value: Option<Step>,
    /// `bound − completion`, when both exist.
    pub margin: Option<i64>,
    /// `α(v)` per node, for protocols with activity periods.
    pub activations: Option<Vec<Option<Step>>>,
    pub stage_increments: Option<u64>,
    pub critical_path: Option<CriticalPath>,
    pub lemma_segments: Option<Vec<LemmaSegment>>,
    pub layer_claim: Option<Vec<LayerVerdict>>,
    pub anomalies: usize,
    pub checks: Vec<Check>,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    /// `name=pass;name=fail;…`
    pub fn verdicts(&self) -> String {
        self.checks
            .iter()
            .map(|c| format!("{}={}", c.name, if c.passed() { "pass" } else { "fail" }))
            .collect::<Vec<_>>()
            .join(";")
    }

    /// Smallest lemma margin along the critical path.
    pub fn min_lemma_margin(&self) -> Option<f64> {
        self.lemma_segments
            .as_ref()?
            .iter()
            .map(LemmaSegment::margin)
            .min_by(f64::total_cmp)
    }

    pub fn csv_record(&self, run_id: &str) -> Vec<String> {
        let opt = |v: Option<String>| v.unwrap_or_default();
        vec![
            run_id.to_string(),
            self.protocol.clone(),
            self.model.clone(),
            self.n.to_string(),
            opt(self.seed.map(|s| s.to_string())),
            opt(self.completion_step.map(|s| s.to_string())),
            self.budget.to_string(),
            opt(self.bound_value.map(|s| s.to_string())),
            opt(self.margin.map(|s| s.to_string())),
            self.verdicts(),
        ]
    }
}

/// Builds the report for a trace. Protocol-specific checks run when the
/// trace comes from an untransformed protocol and has step logs.
pub fn analyze(trace: &Trace, opts: &ReportOptions) -> Result<RunReport, AnalysisError> {
    let completion = completion_time(trace);
    let mut checks = Vec::new();

    let mut done = Check::new("completed");
    done.record(completion.is_some(), || {
        format!("not complete after {} steps", trace.steps_executed)
    });
    checks.push(done);

    if let Some((bound, strict)) = opts.bound {
        let mut c = Check::new("completion_bound");
        if let Some(step) = completion {
            let ok = if strict { step < bound } else { step <= bound };
            c.record(ok, || format!("completed at {step}, bound {bound}"));
        }
        checks.push(c);
    }

    let anomalies = trace
        .events
        .iter()
        .filter(|e| matches!(e.kind, EventKind::Anomaly { .. }))
        .count();
    let mut c = Check::new("no_anomalies");
    c.record(anomalies == 0, || format!("{anomalies} anomaly events"));
    checks.push(c);

    let mut report = RunReport {
        protocol: trace.protocol.name.clone(),
        model: trace.model.to_string(),
        n: trace.n(),
        seed: opts.seed,
        budget: trace.budget,
        steps_executed: trace.steps_executed,
        completion_step: completion,
        bound_value: opts.bound.map(|b| b.0),
        margin: opts
            .bound
            .zip(completion)
            .map(|((b, _), c)| b as i64 - c as i64),
        activations: None,
        stage_increments: None,
        critical_path: None,
        lemma_segments: None,
        layer_claim: None,
        anomalies,
        checks,
    };
    if trace.log.is_none() {
        return Ok(report);
    }

    let name = trace.protocol.name.as_str();
    // Arb nodes merge gossiped rumors outside the delivery log, and stripped
    // nodes only absorb what they heard at the end of each segment.
    if !name.starts_with("arb-gather") && !name.ends_with("+nosrt") {
        let mut c = Check::new("completion_cross_check");
        let replay = completion_from_deliveries(trace)?;
        c.record(replay == completion, || {
            format!("deliveries complete the target at {replay:?}, trace says {completion:?}")
        });
        report.checks.push(c);
    }

    match name {
        "acyclic-gather" | "arb-gather" => {
            let beta = beta_schedule(trace)?;
            let acts = activations(trace);
            report.activations = Some(acts.iter().map(|a| a.map(|a| a.alpha)).collect());
            let total = stage_increments(trace, 0..trace.steps_executed)?;
            report.stage_increments = Some(total);
            let mut budget = Check::new("stage_increment_budget");
            let cap = (beta.theta() as u64 + 1) * trace.n() as u64;
            budget.record(total <= cap, || {
                format!("{total} increments exceed (θ+1)·n = {cap}")
            });
            report.checks.push(budget);
            report.checks.push(single_activation(trace));
            report.checks.push(frequency_discipline(trace)?);

            if name == "acyclic-gather" {
                report.checks.push(activation_after_in_neighbors(trace)?);
                report.checks.push(acyclic_liveness(trace)?);
                match critical_path(trace) {
                    Ok(path) => {
                        let mut c = Check::new("critical_path_bound");
                        if let Some(step) = completion {
                            let cap = beta.period() * (path.hops() as Step + 1);
                            c.record(step <= cap, || {
                                format!("completed at {step} > β_θ·(hops+1) = {cap}")
                            });
                        }
                        report.checks.push(c);
                        report.lemma_segments = Some(lemma_segments(trace, &path)?);
                        report.critical_path = Some(path);
                    }
                    Err(AnalysisError::TargetNotActivated(_)) => {}
                    Err(e) => return Err(e),
                }
            } else {
                report.checks.push(arb_safety(trace));
                report.checks.push(arb_rumor_completeness(trace)?);
            }
        }
        "ack-gather" => {
            let c_h = trace
                .protocol
                .params
                .get("c_half")
                .and_then(serde_json::Value::as_u64)
                .ok_or(AnalysisError::MissingParams("c_half"))? as usize;
            let layers = trace
                .graph
                .layer_decomposition()
                .map_err(|e| AnalysisError::Inconsistent(e.to_string()))?;
            let verdicts = check_layer_claim(trace, &layers, c_h)?;
            let mut c = Check::new("layer_claim");
            for v in verdicts.iter().filter(|v| v.dormant.is_some()) {
                c.record(v.passed(), || format!("{v:?}"));
            }
            report.checks.push(c);
            report.layer_claim = Some(verdicts);
        }
        _ => {}
    }
    Ok(report)
}

/// Least-squares slope of `ln y` against `ln x`. Needs two distinct
/// positive `x` values; non-positive points are ignored.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (pts.len() >= 2 && sxx > 1e-12).then(|| sxy / sxx)
}

pub fn median(values: &[f64]) -> Option<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    match k {
        0 => None,
        _ if k % 2 == 1 => Some(v[k / 2]),
        _ => Some((v[k / 2 - 1] + v[k / 2]) / 2.0),
    }
}
