//! Post-hoc analysis of recorded traces.
//!
//! Everything here is a pure function of a [`Trace`](crate::sim::Trace):
//! completion metrics, the critical path and stage-increment accounting of
//! the acyclic protocol, the layered dormancy claim of the acknowledgement
//! protocol, and the per-run [`RunReport`] that bundles them.

mod acyclic;
mod arb;
mod checks;
mod completion;
mod layers;
mod report;

use thiserror::Error;

use crate::Label;

pub use acyclic::{
    activation_after_in_neighbors, activations, acyclic_liveness, beta_schedule, critical_path,
    frequency_discipline, lemma_segments, single_activation, stage_increments, Activation,
    CriticalPath, LemmaSegment,
};
pub use arb::{arb_rumor_completeness, arb_safety};
pub use checks::Check;
pub use completion::{completion_from_deliveries, completion_time, rumor_sets_before, truncate};
pub use layers::{check_layer_claim, layer_times, LayerVerdict};
pub use report::{analyze, loglog_slope, median, ReportOptions, RunReport, CSV_COLUMNS};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AnalysisError {
    #[error("the trace was recorded without step logs")]
    NoLog,
    #[error("target {0} has not activated within the trace")]
    TargetNotActivated(Label),
    #[error("inconsistent trace: {0}")]
    Inconsistent(String),
    #[error("trace parameters lack `{0}`")]
    MissingParams(&'static str),
}
