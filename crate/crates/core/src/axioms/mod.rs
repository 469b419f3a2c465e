//! Axiom-violation detectors.

pub mod deterministic;
pub mod stochastic;

use serde::{Deserialize, Serialize};

use crate::design::{ExperimentDesign, LotteryIdx, MenuIdx};

pub use deterministic::{
    check_contraction, check_decisiveness, check_fosd_choice, check_independence, check_star, check_transitivity,
    check_warp, violated_fixtures, FosdMode, RiskAttitude,
};
pub use stochastic::{
    check_regularity, check_stochastic_decisiveness, check_stochastic_transitivity, ProbabilityBasis,
    StochasticViolation, TransitivityVariant,
};

/// How empty choices (deferrals) enter tests that compare choice sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DeferralPolicy {
    /// Empty choices are data: they take part in set comparisons and count
    /// as mistakes in Houtman-Maks scoring.
    #[default]
    Strict,
    /// Menus or fixtures involving an empty choice are skipped.
    Lenient,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Axiom {
    Decisiveness,
    Transitivity,
    Contraction,
    Warp,
    Fosd,
    Independence,
    Star,
}

impl Axiom {
    pub const ALL: [Axiom; 7] = [
        Axiom::Decisiveness,
        Axiom::Transitivity,
        Axiom::Contraction,
        Axiom::Warp,
        Axiom::Fosd,
        Axiom::Independence,
        Axiom::Star,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Axiom::Decisiveness => "Decisiveness",
            Axiom::Transitivity => "Transitivity",
            Axiom::Contraction => "Contraction Consistency",
            Axiom::Warp => "WARP",
            Axiom::Fosd => "FOSD",
            Axiom::Independence => "Independence",
            Axiom::Star => "Stability of Attitudes to Risk",
        }
    }
}

/// One instantiation of a violated implication.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AxiomViolation {
    pub axiom: Axiom,
    /// Menus instantiating the implication, in the axiom's reading order.
    pub menus: Vec<MenuIdx>,
    /// Lotteries instantiating it (e.g. `p, q` or `p, q, r`).
    pub lotteries: Vec<LotteryIdx>,
    /// Index of the design fixture (triple, independence pair) involved.
    pub fixture: Option<usize>,
    /// Sub-kind marker, e.g. `"strict"` for an FOSD violation where only the
    /// dominated lottery was chosen.
    pub note: Option<&'static str>,
    pub policy: Option<DeferralPolicy>,
    pub fosd_mode: Option<FosdMode>,
}

impl AxiomViolation {
    fn new(axiom: Axiom, menus: Vec<MenuIdx>, lotteries: Vec<LotteryIdx>) -> Self {
        AxiomViolation { axiom, menus, lotteries, fixture: None, note: None, policy: None, fosd_mode: None }
    }

    pub fn render(&self, design: &ExperimentDesign) -> ViolationView {
        ViolationView {
            axiom: self.axiom,
            menus: self.menus.iter().map(|&m| design.menus[m].id.clone()).collect(),
            lotteries: self.lotteries.iter().map(|&l| design.lottery_id(l).to_string()).collect(),
            fixture: self.fixture,
            note: self.note,
            policy: self.policy,
            fosd_mode: self.fosd_mode,
        }
    }
}

/// Id-based rendering of a violation for reports.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ViolationView {
    pub axiom: Axiom,
    pub menus: Vec<String>,
    pub lotteries: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixture: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub policy: Option<DeferralPolicy>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fosd_mode: Option<FosdMode>,
}
