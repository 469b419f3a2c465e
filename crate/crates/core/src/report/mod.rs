//! Report generation: per-subject analysis with aggregate tables, synthetic
//! datasets with their calibration summary, and the dominance audit.

mod aggregate;
mod analysis;
mod audit;
mod simulate;

use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

use crate::axioms::{DeferralPolicy, FosdMode};
use crate::choice::ChoiceError;
use crate::design::{DesignError, Taxonomy};
use crate::par::Execution;
use crate::rational::{self, Rational};
use crate::sim::SimError;

pub use aggregate::{
    check_consistency, Aggregates, AxiomShare, DeferralRow, FirstLastTest, MergedTable, RoundRow, StabilityRow,
    StochasticShares, TripleRow,
};
pub use analysis::{
    analyze_dataset, run_analysis, write_subjects_csv, AnalysisReport, DesignSummary, HmView, LpDiscrepancy, LpView,
    MergedAnalysis, RoundAnalysis, StochasticAnalysis, SubjectReport,
};
pub use audit::{run_dominance_audit, AreaRow, AuditReport, CdfRow, LabelCheck, NearReport, PairEntry};
pub use simulate::{run_simulation, Population, SimulationOutput, SimulationSpec, SimulationSummary};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error(transparent)]
    Choice(#[from] ChoiceError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("cannot read {}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("no subject has complete choice data")]
    NoSubjects,
    #[error("report consistency check failed: {0}")]
    Consistency(String),
}

impl ReportError {
    /// Internal assertion failures, as opposed to bad input.
    pub fn is_internal(&self) -> bool {
        matches!(self, ReportError::Consistency(_))
    }
}

/// Inputs and options of an analysis run, echoed into the report.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RunConfig {
    /// Design directory; the built-in design when absent.
    pub design: Option<PathBuf>,
    pub choices: PathBuf,
    pub policy: DeferralPolicy,
    /// FOSD reading for the per-round violation counts. The merged
    /// classification always uses the strict-axiom form.
    pub fosd_mode: FosdMode,
    pub taxonomy: Taxonomy,
    #[serde(with = "rational::serde_str")]
    pub merge_threshold: Rational,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    #[serde(skip)]
    pub execution: Execution,
}

impl RunConfig {
    pub fn new(choices: impl Into<PathBuf>) -> Self {
        RunConfig {
            design: None,
            choices: choices.into(),
            policy: DeferralPolicy::Strict,
            fosd_mode: FosdMode::DominatedChoice,
            taxonomy: Taxonomy::Declared,
            merge_threshold: rational::zero(),
            out: None,
            seed: None,
            execution: Execution::default(),
        }
    }
}

/// A count with its denominator. `share` is exact; `percent` is rounded
/// half-up to the nearest half percent.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Share {
    pub count: usize,
    pub of: usize,
    pub share: String,
    pub percent: String,
}

impl Share {
    pub fn new(count: usize, of: usize) -> Self {
        let share = if of == 0 { "0".to_string() } else { rational::format(&rational::ratio(count as i64, of as i64)) };
        Share { count, of, share, percent: render_percent(count, of) }
    }
}

/// `count / of` as a percentage rounded half-up to a multiple of 0.5.
pub fn render_percent(count: usize, of: usize) -> String {
    if of == 0 {
        return "n/a".to_string();
    }
    let (count, of) = (count as u128, of as u128);
    // floor(200·count/of + 1/2) half-percent steps
    let halves = (400 * count + of) / (2 * of);
    if halves % 2 == 0 {
        format!("{}", halves / 2)
    } else {
        format!("{}.5", halves / 2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percent_rendering() {
        assert_eq!(render_percent(91, 113), "80.5");
        assert_eq!(render_percent(80, 308), "26");
        assert_eq!(render_percent(1, 8), "12.5");
        // 1/400 = 0.25% sits exactly on the half step and rounds up
        assert_eq!(render_percent(1, 400), "0.5");
        assert_eq!(render_percent(3, 400), "1");
        assert_eq!(render_percent(0, 5), "0");
        assert_eq!(render_percent(5, 5), "100");
        assert_eq!(render_percent(1, 0), "n/a");
        assert_eq!(Share::new(2, 4).share, "1/2");
    }
}
