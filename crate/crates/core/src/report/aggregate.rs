//! Aggregate tables over the included subjects, and the check that they
//! agree with the per-subject entries.

use serde::Serialize;

use super::analysis::{AnalysisReport, RoundAnalysis, SubjectReport};
use super::{render_percent, Share};
use crate::axioms::stochastic::StochasticAxiom;
use crate::axioms::{Axiom, RiskAttitude};
use crate::design::ExperimentDesign;
use crate::stats::{fisher_exact_2x2, mann_whitney_u, TestResult};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Aggregates {
    /// Included subjects: the denominator of every per-subject share.
    pub subjects: usize,
    pub rounds: usize,
    pub merged: MergedTable,
    pub risk_attitudes: Vec<AttitudeShare>,
    /// Subjects whose merged choices satisfy each axiom.
    pub deterministic_compliant: Vec<AxiomShare>,
    /// Subjects choosing only the dominated lottery at some FOSD menu.
    pub strict_fosd_violators: Share,
    pub stochastic_compliant: StochasticShares,
    pub rounds_table: Vec<RoundRow>,
    /// First round against the last.
    pub first_last_tests: Vec<FirstLastTest>,
    pub deferrals: Vec<DeferralRow>,
    pub intransitivities: Vec<TripleRow>,
    pub stability: Vec<StabilityRow>,
    pub improvement: Vec<Improvement>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Cells {
    pub um: Share,
    pub eum_binary: Share,
    pub eum_all: Share,
}

/// Merged-data classification split by whether any indifference is revealed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MergedTable {
    pub strict: Cells,
    pub with_indifference: Cells,
    pub total: Cells,
    pub approx_um: Share,
    pub lp_rationalizable: Share,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AttitudeShare {
    pub attitude: RiskAttitude,
    pub subjects: Share,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AxiomShare {
    pub axiom: Axiom,
    pub name: &'static str,
    pub subjects: Share,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StochasticAxiomShare {
    pub axiom: StochasticAxiom,
    pub name: &'static str,
    pub subjects: Share,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StochasticShares {
    pub axioms: Vec<StochasticAxiomShare>,
    /// Regularity and the three transitivity conditions together.
    pub last_four: Share,
    pub all_five: Share,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoundRow {
    pub round: usize,
    pub um: Share,
    pub approx_um: Share,
    pub active_um: Share,
    pub eum_binary: Share,
    pub eum_all: Share,
    pub hm_penalize_mean: f64,
    pub hm_penalize_median: f64,
    pub hm_active_mean: f64,
    pub hm_active_median: f64,
    pub response_time_mean_s: Option<f64>,
    pub response_time_median_s: Option<f64>,
    /// Subjects violating each axiom in this round.
    pub violating: Vec<AxiomShare>,
    pub deferring: Share,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FirstLastTest {
    pub measure: String,
    pub test: TestResult,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DeferralRow {
    pub menu: String,
    pub lotteries: Vec<String>,
    /// Deferrals over all subject-rounds.
    pub unmerged: Share,
    /// Subjects whose merged choice at the menu is empty.
    pub merged: Share,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TripleRow {
    pub lotteries: Vec<String>,
    pub menus: Vec<String>,
    /// Subject-rounds with an intransitive cycle on the triple.
    pub intransitive: Share,
    /// Against the next triple in the list.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vs_next: Option<TestResult>,
}

/// Subjects rational in round `from` (per round, or consistently over the
/// merged data) who stay rational in round `to`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StabilityRow {
    pub from: usize,
    pub to: usize,
    pub um: Share,
    pub eum: Share,
}

/// Change of the retained count from the first to the last transition,
/// relative to the first.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Improvement {
    pub model: &'static str,
    pub change: i64,
    pub relative_to: usize,
    pub percent: String,
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let k = s.len() / 2;
    if s.len() % 2 == 1 {
        s[k]
    } else {
        (s[k - 1] + s[k]) / 2.0
    }
}

fn count<T>(items: &[T], pred: impl Fn(&T) -> bool) -> usize {
    items.iter().filter(|x| pred(x)).count()
}

fn rational_um(s: &SubjectReport, r: &RoundAnalysis) -> bool {
    r.eum.is_um || s.merged.eum.is_um
}

fn rational_eum(s: &SubjectReport, r: &RoundAnalysis) -> bool {
    r.eum.is_eum_all || s.merged.eum.is_eum_all
}

fn round_measures(subjects: &[SubjectReport], k: usize) -> [Vec<f64>; 3] {
    let rounds: Vec<&RoundAnalysis> = subjects.iter().map(|s| &s.per_round[k]).collect();
    [
        rounds.iter().map(|r| r.hm_penalize as f64).collect(),
        rounds.iter().map(|r| r.hm_active_only as f64).collect(),
        rounds.iter().filter_map(|r| r.mean_response_time_ms).map(|ms| ms / 1000.0).collect(),
    ]
}

impl Aggregates {
    pub fn build(design: &ExperimentDesign, subjects: &[SubjectReport]) -> Self {
        let n = subjects.len();
        let rounds = subjects.iter().map(|s| s.rounds).min().unwrap_or(0);

        let cells = |pick: &dyn Fn(&SubjectReport) -> bool| Cells {
            um: Share::new(count(subjects, |s| pick(s) && s.merged.eum.is_um), n),
            eum_binary: Share::new(count(subjects, |s| pick(s) && s.merged.eum.is_eum_binary), n),
            eum_all: Share::new(count(subjects, |s| pick(s) && s.merged.eum.is_eum_all), n),
        };
        // binary-menu EUM is split on the binary menus only
        let split = |strict: bool| {
            let mut c = cells(&|s| s.merged.strict_preferences == strict);
            c.eum_binary =
                Share::new(count(subjects, |s| s.merged.strict_binary == strict && s.merged.eum.is_eum_binary), n);
            c
        };
        let merged = MergedTable {
            strict: split(true),
            with_indifference: split(false),
            total: cells(&|_| true),
            approx_um: Share::new(count(subjects, |s| s.merged.eum.is_approx_um), n),
            lp_rationalizable: Share::new(count(subjects, |s| s.merged.lp.feasible), n),
        };

        let risk_attitudes = [
            RiskAttitude::RiskAverse,
            RiskAttitude::RiskSeeking,
            RiskAttitude::RiskNeutral,
            RiskAttitude::Unclassified,
        ]
        .into_iter()
        .map(|attitude| AttitudeShare {
            attitude,
            subjects: Share::new(count(subjects, |s| s.merged.eum.risk_attitude == attitude), n),
        })
        .collect();

        let deterministic_compliant = Axiom::ALL
            .iter()
            .map(|&axiom| AxiomShare {
                axiom,
                name: axiom.name(),
                subjects: Share::new(count(subjects, |s| !s.merged.violated_axioms.contains(&axiom)), n),
            })
            .collect();
        let strict_fosd_violators = Share::new(
            count(subjects, |s| s.merged.violations.iter().any(|v| v.axiom == Axiom::Fosd && v.note == Some("strict"))),
            n,
        );

        let complies = |s: &SubjectReport, a: &StochasticAxiom| !s.stochastic.violated_axioms.contains(a);
        let last_four = [StochasticAxiom::Regularity, StochasticAxiom::Wst, StochasticAxiom::Mst, StochasticAxiom::Sst];
        let stochastic_compliant = StochasticShares {
            axioms: StochasticAxiom::ALL
                .iter()
                .map(|&axiom| StochasticAxiomShare {
                    axiom,
                    name: axiom.name(),
                    subjects: Share::new(count(subjects, |s| complies(s, &axiom)), n),
                })
                .collect(),
            last_four: Share::new(count(subjects, |s| last_four.iter().all(|a| complies(s, a))), n),
            all_five: Share::new(count(subjects, |s| StochasticAxiom::ALL.iter().all(|a| complies(s, a))), n),
        };

        let rounds_table: Vec<RoundRow> = (0..rounds)
            .map(|k| {
                let rs: Vec<&RoundAnalysis> = subjects.iter().map(|s| &s.per_round[k]).collect();
                let [pen, act, rt] = round_measures(subjects, k);
                RoundRow {
                    round: k + 1,
                    um: Share::new(count(&rs, |r| r.eum.is_um), n),
                    approx_um: Share::new(count(&rs, |r| r.eum.is_approx_um), n),
                    active_um: Share::new(count(&rs, |r| r.hm_active_only == 0), n),
                    eum_binary: Share::new(count(&rs, |r| r.eum.is_eum_binary), n),
                    eum_all: Share::new(count(&rs, |r| r.eum.is_eum_all), n),
                    hm_penalize_mean: mean(&pen),
                    hm_penalize_median: median(&pen),
                    hm_active_mean: mean(&act),
                    hm_active_median: median(&act),
                    response_time_mean_s: (!rt.is_empty()).then(|| mean(&rt)),
                    response_time_median_s: (!rt.is_empty()).then(|| median(&rt)),
                    violating: Axiom::ALL
                        .iter()
                        .map(|&axiom| AxiomShare {
                            axiom,
                            name: axiom.name(),
                            subjects: Share::new(count(&rs, |r| r.violated_axioms.contains(&axiom)), n),
                        })
                        .collect(),
                    deferring: Share::new(count(&rs, |r| r.deferrals > 0), n),
                }
            })
            .collect();

        let first_last_tests = if rounds >= 2 { first_last(subjects, &rounds_table, rounds) } else { Vec::new() };

        let subject_rounds = n * rounds;
        let deferrals = (0..design.menus.len())
            .map(|m| {
                let id = &design.menus[m].id;
                let unmerged: usize =
                    subjects.iter().flat_map(|s| &s.per_round).filter(|r| r.deferred_menus.contains(id)).count();
                DeferralRow {
                    menu: id.clone(),
                    lotteries: design.menus[m].members.iter().map(|&l| design.lottery_id(l).to_string()).collect(),
                    unmerged: Share::new(unmerged, subject_rounds),
                    merged: Share::new(count(subjects, |s| s.merged.deferred_menus.contains(id)), n),
                }
            })
            .collect();

        let counts: Vec<usize> = (0..design.triples.len())
            .map(|t| subjects.iter().flat_map(|s| &s.per_round).filter(|r| r.intransitive_triples.contains(&t)).count())
            .collect();
        let intransitivities = design
            .triples
            .iter()
            .enumerate()
            .map(|(t, triple)| {
                let total = subject_rounds as u64;
                let vs_next = counts.get(t + 1).map(|&next| {
                    let (a, b) = (counts[t] as u64, next as u64);
                    fisher_exact_2x2(a, total - a, b, total - b)
                });
                TripleRow {
                    lotteries: triple.lotteries.iter().map(|&l| design.lottery_id(l).to_string()).collect(),
                    menus: triple.menus.iter().map(|&m| design.menus[m].id.clone()).collect(),
                    intransitive: Share::new(counts[t], subject_rounds),
                    vs_next,
                }
            })
            .collect();

        let stability: Vec<StabilityRow> = (1..rounds)
            .map(|to| {
                let retained = |rational: fn(&SubjectReport, &RoundAnalysis) -> bool| {
                    let base = count(subjects, |s| rational(s, &s.per_round[to - 1]));
                    let kept = count(subjects, |s| rational(s, &s.per_round[to - 1]) && rational(s, &s.per_round[to]));
                    Share::new(kept, base)
                };
                StabilityRow { from: to, to: to + 1, um: retained(rational_um), eum: retained(rational_eum) }
            })
            .collect();
        let improvement = match (stability.first(), stability.last()) {
            (Some(first), Some(last)) if stability.len() >= 2 => {
                vec![improvement("UM", &first.um, &last.um), improvement("EUM", &first.eum, &last.eum)]
            }
            _ => Vec::new(),
        };

        Aggregates {
            subjects: n,
            rounds,
            merged,
            risk_attitudes,
            deterministic_compliant,
            strict_fosd_violators,
            stochastic_compliant,
            rounds_table,
            first_last_tests,
            deferrals,
            intransitivities,
            stability,
            improvement,
        }
    }
}

fn improvement(model: &'static str, first: &Share, last: &Share) -> Improvement {
    let change = last.count as i64 - first.count as i64;
    let magnitude = render_percent(change.unsigned_abs() as usize, first.count);
    let percent = if change < 0 && magnitude != "0" && first.count > 0 { format!("-{magnitude}") } else { magnitude };
    Improvement { model, change, relative_to: first.count, percent }
}

fn first_last(subjects: &[SubjectReport], rows: &[RoundRow], rounds: usize) -> Vec<FirstLastTest> {
    let (first, last) = (&rows[0], &rows[rounds - 1]);
    let mut out = Vec::new();
    let mut fisher = |measure: String, a: &Share, b: &Share| {
        let (a, b, n) = (a.count as u64, b.count as u64, a.of as u64);
        out.push(FirstLastTest { measure, test: fisher_exact_2x2(a, n - a, b, n - b) });
    };
    fisher("UM".into(), &first.um, &last.um);
    fisher("approximate UM".into(), &first.approx_um, &last.approx_um);
    fisher("active-choice UM".into(), &first.active_um, &last.active_um);
    fisher("EUM binary".into(), &first.eum_binary, &last.eum_binary);
    fisher("EUM all".into(), &first.eum_all, &last.eum_all);
    for (a, b) in first.violating.iter().zip(&last.violating) {
        fisher(format!("violating {}", a.name), &a.subjects, &b.subjects);
    }
    let [pen1, act1, rt1] = round_measures(subjects, 0);
    let [pen5, act5, rt5] = round_measures(subjects, rounds - 1);
    for (measure, x, y) in [("HM penalize", pen1, pen5), ("HM active only", act1, act5), ("response time", rt1, rt5)] {
        if let Ok(test) = mann_whitney_u(&x, &y) {
            out.push(FirstLastTest { measure: measure.into(), test });
        }
    }
    out
}

/// Recounts every aggregate from the per-subject entries and checks the
/// logical nesting of the per-subject flags.
pub fn check_consistency(design: &ExperimentDesign, report: &AnalysisReport) -> Result<(), String> {
    let subjects = &report.subjects;
    let agg = &report.aggregates;
    let n = subjects.len();
    let expect = |what: &str, share: &Share, count: usize, of: usize| -> Result<(), String> {
        if share.count == count && share.of == of {
            Ok(())
        } else {
            Err(format!("{what}: reported {}/{}, recounted {count}/{of}", share.count, share.of))
        }
    };

    if agg.subjects != n {
        return Err(format!("subject count {} vs {n} entries", agg.subjects));
    }
    for w in subjects.windows(2) {
        if w[0].subject_id >= w[1].subject_id {
            return Err(format!("subjects out of order at {}", w[1].subject_id));
        }
    }
    for s in subjects {
        let flags = std::iter::once(&s.merged.eum).chain(s.per_round.iter().map(|r| &r.eum));
        for e in flags {
            if e.is_eum_all && !e.is_um {
                return Err(format!("{}: EUM without UM", s.subject_id));
            }
            if e.is_um && !e.is_approx_um {
                return Err(format!("{}: UM without approximate UM", s.subject_id));
            }
        }
        if s.per_round.len() != s.rounds || s.deferrals != s.per_round.iter().map(|r| r.deferrals).sum::<usize>() {
            return Err(format!("{}: round entries disagree", s.subject_id));
        }
    }

    let mut um = 0;
    let mut eum_all = 0;
    let mut strict_um = 0;
    for s in subjects {
        um += usize::from(s.merged.eum.is_um);
        eum_all += usize::from(s.merged.eum.is_eum_all);
        strict_um += usize::from(s.merged.eum.is_um && s.merged.strict_preferences);
    }
    expect("merged UM", &agg.merged.total.um, um, n)?;
    expect("merged EUM", &agg.merged.total.eum_all, eum_all, n)?;
    expect("merged strict UM", &agg.merged.strict.um, strict_um, n)?;
    let m = &agg.merged;
    for (strict, indifferent, total) in [
        (&m.strict.um, &m.with_indifference.um, &m.total.um),
        (&m.strict.eum_binary, &m.with_indifference.eum_binary, &m.total.eum_binary),
        (&m.strict.eum_all, &m.with_indifference.eum_all, &m.total.eum_all),
    ] {
        if strict.count + indifferent.count != total.count {
            return Err(format!("merged rows {} + {} vs total {}", strict.count, indifferent.count, total.count));
        }
    }

    for row in &agg.deterministic_compliant {
        let c = subjects.iter().filter(|s| !s.merged.violated_axioms.contains(&row.axiom)).count();
        expect(row.name, &row.subjects, c, n)?;
    }
    for row in &agg.stochastic_compliant.axioms {
        let c = subjects.iter().filter(|s| !s.stochastic.violated_axioms.contains(&row.axiom)).count();
        expect(row.name, &row.subjects, c, n)?;
    }
    let attitudes: usize = agg.risk_attitudes.iter().map(|a| a.subjects.count).sum();
    if attitudes != n {
        return Err(format!("risk attitudes cover {attitudes} of {n} subjects"));
    }

    if agg.rounds_table.len() != agg.rounds {
        return Err("round table length".into());
    }
    for row in &agg.rounds_table {
        let k = row.round - 1;
        let mut c_um = 0;
        let mut c_eum = 0;
        for s in subjects {
            c_um += usize::from(s.per_round[k].eum.is_um);
            c_eum += usize::from(s.per_round[k].eum.is_eum_all);
        }
        expect("round UM", &row.um, c_um, n)?;
        expect("round EUM", &row.eum_all, c_eum, n)?;
        for v in &row.violating {
            let c = subjects.iter().filter(|s| s.per_round[k].violated_axioms.contains(&v.axiom)).count();
            expect(v.name, &v.subjects, c, n)?;
        }
    }

    let subject_rounds = n * agg.rounds;
    let total_deferrals: usize = subjects.iter().map(|s| s.deferrals).sum();
    let tabled: usize = agg.deferrals.iter().map(|d| d.unmerged.count).sum();
    if total_deferrals != tabled || agg.deferrals.len() != design.menus.len() {
        return Err(format!("deferrals per menu sum to {tabled}, subjects total {total_deferrals}"));
    }
    for row in &agg.deferrals {
        let merged = subjects.iter().filter(|s| s.merged.deferred_menus.contains(&row.menu)).count();
        expect("merged deferrals", &row.merged, merged, n)?;
        if row.unmerged.of != subject_rounds {
            return Err("deferral denominator".into());
        }
    }

    for (t, row) in agg.intransitivities.iter().enumerate() {
        let mut c = 0;
        for s in subjects {
            for r in &s.per_round {
                c += usize::from(r.intransitive_triples.contains(&t));
            }
        }
        expect("intransitivities", &row.intransitive, c, subject_rounds)?;
    }

    for row in &agg.stability {
        let (a, b) = (row.from - 1, row.to - 1);
        let base = subjects.iter().filter(|s| rational_um(s, &s.per_round[a])).count();
        let kept =
            subjects.iter().filter(|s| rational_um(s, &s.per_round[a]) && rational_um(s, &s.per_round[b])).count();
        expect("UM stability", &row.um, kept, base)?;
    }
    Ok(())
}
