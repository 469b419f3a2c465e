use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::aggregate::{check_consistency, Aggregates};
use super::{ReportError, RunConfig};
use crate::axioms::stochastic::{StochasticAxiom, StochasticView};
use crate::axioms::{
    check_contraction, check_decisiveness, check_fosd_choice, check_independence, check_regularity, check_star,
    check_stochastic_decisiveness, check_stochastic_transitivity, check_transitivity, check_warp, violated_fixtures,
    Axiom, AxiomViolation, DeferralPolicy, FosdMode, ProbabilityBasis, StochasticViolation, TransitivityVariant,
    ViolationView,
};
use crate::choice::{
    estimate_probabilities, load_choices, merge_correspondence, slice_rounds, Correspondence, Dataset, Flagged,
    RoundSlice, SubjectRecords,
};
use crate::design::{builtin_design, ExperimentDesign, RankedPair, Taxonomy};
use crate::eu::{classify_eum, eu_rationalizable, EuConstraintKind, EuFit, EumResult, APPROX_UM_THRESHOLD};
use crate::hm::{HmMode, HmResult, HmTable};
use crate::par;
use crate::rational;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub config: RunConfig,
    pub design: DesignSummary,
    pub subjects: Vec<SubjectReport>,
    /// Subjects left out of every aggregate, with the reason.
    pub excluded: Vec<Flagged>,
    pub aggregates: Aggregates,
    /// Subjects whose merged EUM classification disagrees with the exact
    /// LP rationalizability check.
    pub lp_discrepancies: Vec<LpDiscrepancy>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DesignSummary {
    pub lotteries: Vec<String>,
    pub menus: BTreeMap<String, Vec<String>>,
    pub rounds_expected: usize,
    pub fosd_menus: Vec<String>,
    pub star_menus: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubjectReport {
    pub subject_id: String,
    pub rounds: usize,
    pub deferrals: usize,
    pub merged: MergedAnalysis,
    pub stochastic: StochasticAnalysis,
    pub per_round: Vec<RoundAnalysis>,
}

/// Analysis of the choice correspondence merged over all rounds.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MergedAnalysis {
    pub choices: BTreeMap<String, Vec<String>>,
    /// Every menu has exactly one chosen lottery.
    pub strict_preferences: bool,
    /// Every binary menu has exactly one chosen lottery.
    pub strict_binary: bool,
    pub hm: HmView,
    pub eum: EumResult,
    pub lp: LpView,
    pub violated_axioms: Vec<Axiom>,
    pub violations: Vec<ViolationView>,
    pub deferred_menus: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct HmView {
    pub score: usize,
    pub evaluated: usize,
    pub mode: HmMode,
    pub policy: DeferralPolicy,
    pub canonical_order: String,
    pub minimizers: usize,
    pub mistakes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LpView {
    pub feasible: bool,
    /// `[prize, utility]` pairs of one rationalizing utility.
    pub utilities: Vec<[String; 2]>,
    pub conflict: Vec<ConstraintView>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConstraintView {
    pub menu: String,
    pub kind: EuConstraintKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub better: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worse: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StochasticAnalysis {
    pub violated_axioms: Vec<StochasticAxiom>,
    pub violations: Vec<StochasticView>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoundAnalysis {
    pub round: usize,
    pub choices: BTreeMap<String, Vec<String>>,
    pub hm_penalize: usize,
    pub hm_active_only: usize,
    pub eum: EumResult,
    pub violated_axioms: Vec<Axiom>,
    /// Indices of the design triples with an intransitive cycle.
    pub intransitive_triples: Vec<usize>,
    pub violations: Vec<ViolationView>,
    pub deferrals: usize,
    pub deferred_menus: Vec<String>,
    pub mean_response_time_ms: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LpDiscrepancy {
    pub subject_id: String,
    pub is_eum_all: bool,
    pub lp_feasible: bool,
}

/// Everything shared by the per-subject analyses.
struct Context<'a> {
    design: &'a ExperimentDesign,
    config: &'a RunConfig,
    strict: HmTable,
    weak: HmTable,
    fosd: Vec<RankedPair>,
    star: Vec<RankedPair>,
    ids: Vec<&'a str>,
}

impl<'a> Context<'a> {
    fn new(design: &'a ExperimentDesign, config: &'a RunConfig) -> Self {
        let strict = HmTable::for_design(design, HmMode::Strict).expect("design size within enumeration guard");
        let weak = HmTable::for_design(design, HmMode::Weak).expect("design size within enumeration guard");
        Context {
            design,
            config,
            strict,
            weak,
            fosd: design.fosd_menus(config.taxonomy),
            star: design.star_pairs(config.taxonomy),
            ids: design.lotteries.iter().map(|l| l.id()).collect(),
        }
    }

    fn violations(&self, c: &Correspondence, mode: FosdMode) -> Vec<AxiomViolation> {
        let (d, policy) = (self.design, self.config.policy);
        let mut out = check_decisiveness(c);
        out.extend(check_transitivity(d, c, &d.triples));
        out.extend(check_contraction(d, c, &d.nested));
        out.extend(check_warp(d, c));
        out.extend(check_fosd_choice(c, &self.fosd, mode));
        out.extend(check_independence(c, &d.independence, policy));
        out.extend(check_star(d, c, &self.star, policy).0);
        out
    }

    fn eum(&self, c: &Correspondence, hm: &HmResult) -> EumResult {
        classify_eum(self.design, c, hm, self.config.taxonomy, self.config.policy, APPROX_UM_THRESHOLD)
    }

    fn hm_view(&self, table: &HmTable, hm: &HmResult) -> HmView {
        HmView {
            score: hm.score,
            evaluated: hm.evaluated,
            mode: hm.mode,
            policy: hm.policy,
            canonical_order: table.order_label(hm.canonical, &self.ids),
            minimizers: hm.witnesses.len(),
            mistakes: hm.mistakes.iter().map(|&m| self.design.menus[m].id.clone()).collect(),
        }
    }

    fn menu_ids(&self, menus: impl Iterator<Item = usize>) -> Vec<String> {
        menus.map(|m| self.design.menus[m].id.clone()).collect()
    }

    fn lp_view(&self, fit: &EuFit) -> LpView {
        let lottery = |l: Option<usize>| l.map(|l| self.ids[l].to_string());
        LpView {
            feasible: fit.feasible,
            utilities: fit.utilities.iter().map(|(z, u)| [rational::format(z), rational::format(u)]).collect(),
            conflict: fit
                .conflict
                .iter()
                .map(|k| ConstraintView {
                    menu: self.design.menus[k.menu].id.clone(),
                    kind: k.kind,
                    better: lottery(k.better),
                    worse: lottery(k.worse),
                })
                .collect(),
        }
    }

    fn subject(&self, subject_id: &str, slices: &[RoundSlice]) -> SubjectReport {
        let design = self.design;
        let policy = self.config.policy;

        let c = merge_correspondence(slices, &self.config.merge_threshold);
        let hm = self.weak.evaluate(&c, policy);
        let violations = self.violations(&c, FosdMode::StrictAxiom);
        let binary: Vec<usize> = design.binary_menus().collect();
        let merged = MergedAnalysis {
            choices: c.render(design),
            strict_preferences: c.values.iter().all(|v| v.count_ones() == 1),
            strict_binary: binary.iter().all(|&m| c.value(m).count_ones() == 1),
            hm: self.hm_view(&self.weak, &hm),
            eum: self.eum(&c, &hm),
            lp: self.lp_view(&eu_rationalizable(design, &c, policy, true)),
            violated_axioms: axioms_of(&violations),
            violations: violations.iter().map(|v| v.render(design)).collect(),
            deferred_menus: self.menu_ids((0..design.menus.len()).filter(|&m| c.is_empty_at(m))),
        };

        let probs = estimate_probabilities(design, slices);
        let mut stochastic: Vec<StochasticViolation> = check_stochastic_decisiveness(&probs);
        stochastic.extend(check_regularity(design, &probs, &design.nested));
        for variant in [TransitivityVariant::Weak, TransitivityVariant::Moderate, TransitivityVariant::Strong] {
            stochastic.extend(check_stochastic_transitivity(
                design,
                &probs,
                &design.triples,
                variant,
                ProbabilityBasis::Raw,
            ));
        }
        let stochastic = StochasticAnalysis {
            violated_axioms: stochastic.iter().map(|v| v.axiom).collect::<BTreeSet<_>>().into_iter().collect(),
            violations: stochastic.iter().map(|v| v.render(design)).collect(),
        };

        let per_round: Vec<RoundAnalysis> = slices.iter().map(|s| self.round(s)).collect();
        SubjectReport {
            subject_id: subject_id.to_string(),
            rounds: slices.len(),
            deferrals: per_round.iter().map(|r| r.deferrals).sum(),
            merged,
            stochastic,
            per_round,
        }
    }

    fn round(&self, slice: &RoundSlice) -> RoundAnalysis {
        let design = self.design;
        let c = slice.correspondence();
        let hm = self.strict.evaluate(&c, self.config.policy);
        let violations = self.violations(&c, self.config.fosd_mode);
        let transitivity: Vec<AxiomViolation> =
            violations.iter().filter(|v| v.axiom == Axiom::Transitivity).cloned().collect();
        RoundAnalysis {
            round: slice.round,
            choices: c.render(design),
            hm_penalize: self.strict.score(&c, DeferralPolicy::Strict),
            hm_active_only: self.strict.score(&c, DeferralPolicy::Lenient),
            eum: self.eum(&c, &hm),
            violated_axioms: axioms_of(&violations),
            intransitive_triples: violated_fixtures(&transitivity).into_iter().collect(),
            violations: violations.iter().map(|v| v.render(design)).collect(),
            deferrals: slice.deferrals(),
            deferred_menus: self.menu_ids((0..design.menus.len()).filter(|&m| c.is_empty_at(m))),
            mean_response_time_ms: slice.mean_response_time_ms(),
        }
    }
}

fn axioms_of(violations: &[AxiomViolation]) -> Vec<Axiom> {
    violations.iter().map(|v| v.axiom).collect::<BTreeSet<_>>().into_iter().collect()
}

fn design_summary(design: &ExperimentDesign, taxonomy: Taxonomy) -> DesignSummary {
    let menu_id = |p: &RankedPair| design.menus[p.menu].id.clone();
    DesignSummary {
        lotteries: design.lotteries.iter().map(|l| l.id().to_string()).collect(),
        menus: design
            .menus
            .iter()
            .map(|m| (m.id.clone(), m.members.iter().map(|&l| design.lottery_id(l).to_string()).collect()))
            .collect(),
        rounds_expected: design.rounds_expected,
        fosd_menus: design.fosd_menus(taxonomy).iter().map(menu_id).collect(),
        star_menus: design.star_pairs(taxonomy).iter().map(menu_id).collect(),
    }
}

/// Analyses an already loaded dataset. Subjects are processed in parallel
/// and reported in subject-id order.
pub fn analyze_dataset(
    design: &ExperimentDesign,
    dataset: &Dataset,
    config: &RunConfig,
) -> Result<AnalysisReport, ReportError> {
    let mut excluded: Vec<Flagged> = dataset.incomplete.iter().map(|(_, f)| f.clone()).collect();
    let mut sliced: Vec<(&SubjectRecords, Vec<RoundSlice>)> = Vec::new();
    for s in &dataset.subjects {
        match slice_rounds(design, s) {
            Ok(slices) => sliced.push((s, slices)),
            Err(e) => excluded.push(Flagged { subject_id: s.subject_id.clone(), reason: e.to_string() }),
        }
    }
    if sliced.is_empty() {
        return Err(ReportError::NoSubjects);
    }
    sliced.sort_by(|a, b| a.0.subject_id.cmp(&b.0.subject_id));
    excluded.sort_by(|a, b| a.subject_id.cmp(&b.subject_id));

    let ctx = Context::new(design, config);
    let subjects = par::map(config.execution, &sliced, |(s, slices)| ctx.subject(&s.subject_id, slices));
    let aggregates = Aggregates::build(design, &subjects);
    let lp_discrepancies = subjects
        .iter()
        .filter(|s| s.merged.eum.is_eum_all != s.merged.lp.feasible)
        .map(|s| LpDiscrepancy {
            subject_id: s.subject_id.clone(),
            is_eum_all: s.merged.eum.is_eum_all,
            lp_feasible: s.merged.lp.feasible,
        })
        .collect();
    let report = AnalysisReport {
        config: config.clone(),
        design: design_summary(design, config.taxonomy),
        subjects,
        excluded,
        aggregates,
        lp_discrepancies,
    };
    check_consistency(design, &report).map_err(ReportError::Consistency)?;
    Ok(report)
}

/// Loads the design and choices named in `config` and analyses them.
pub fn run_analysis(config: &RunConfig) -> Result<AnalysisReport, ReportError> {
    let design = match &config.design {
        Some(dir) => ExperimentDesign::load_dir(dir)?,
        None => builtin_design(),
    };
    let text = read(&config.choices)?;
    let dataset = load_choices(&design, &text, &config.choices.display().to_string())?;
    analyze_dataset(&design, &dataset, config)
}

pub(super) fn read(path: &Path) -> Result<String, ReportError> {
    std::fs::read_to_string(path).map_err(|source| ReportError::Io { path: path.to_path_buf(), source })
}

/// One row per subject with flat columns.
pub fn write_subjects_csv<W: Write>(report: &AnalysisReport, out: W) -> Result<(), csv::Error> {
    let rounds = report.subjects.iter().map(|s| s.rounds).max().unwrap_or(0);
    let mut header: Vec<String> = [
        "subject_id",
        "rounds",
        "deferrals",
        "merged_hm",
        "is_um",
        "is_approx_um",
        "strict_preferences",
        "is_eum_binary",
        "is_eum_all",
        "risk_attitude",
        "lp_feasible",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(Axiom::ALL.iter().map(|a| format!("violates_{}", axiom_key(*a))));
    header.extend(StochasticAxiom::ALL.iter().map(|a| format!("violates_{}", stochastic_key(*a))));
    for r in 1..=rounds {
        for col in ["hm_penalize", "hm_active_only", "um", "eum_all", "deferrals", "mean_rt_ms"] {
            header.push(format!("r{r}_{col}"));
        }
    }

    let mut w = csv::Writer::from_writer(out);
    w.write_record(&header)?;
    for s in &report.subjects {
        let m = &s.merged;
        let mut row = vec![
            s.subject_id.clone(),
            s.rounds.to_string(),
            s.deferrals.to_string(),
            m.hm.score.to_string(),
            m.eum.is_um.to_string(),
            m.eum.is_approx_um.to_string(),
            m.strict_preferences.to_string(),
            m.eum.is_eum_binary.to_string(),
            m.eum.is_eum_all.to_string(),
            format!("{:?}", m.eum.risk_attitude),
            m.lp.feasible.to_string(),
        ];
        row.extend(Axiom::ALL.iter().map(|a| m.violated_axioms.contains(a).to_string()));
        row.extend(StochasticAxiom::ALL.iter().map(|a| s.stochastic.violated_axioms.contains(a).to_string()));
        for k in 0..rounds {
            match s.per_round.get(k) {
                Some(r) => row.extend([
                    r.hm_penalize.to_string(),
                    r.hm_active_only.to_string(),
                    r.eum.is_um.to_string(),
                    r.eum.is_eum_all.to_string(),
                    r.deferrals.to_string(),
                    r.mean_response_time_ms.map(|v| v.to_string()).unwrap_or_default(),
                ]),
                None => row.extend(std::iter::repeat_n(String::new(), 6)),
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn axiom_key(a: Axiom) -> &'static str {
    match a {
        Axiom::Decisiveness => "decisiveness",
        Axiom::Transitivity => "transitivity",
        Axiom::Contraction => "contraction",
        Axiom::Warp => "warp",
        Axiom::Fosd => "fosd",
        Axiom::Independence => "independence",
        Axiom::Star => "star",
    }
}

fn stochastic_key(a: StochasticAxiom) -> &'static str {
    match a {
        StochasticAxiom::Regularity => "regularity",
        StochasticAxiom::Wst => "wst",
        StochasticAxiom::Mst => "mst",
        StochasticAxiom::Sst => "sst",
        StochasticAxiom::StochasticDecisiveness => "stochastic_decisiveness",
    }
}
