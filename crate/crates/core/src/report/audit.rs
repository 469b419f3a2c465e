//! Pairwise dominance audit of a design: both relations for every pair,
//! near-dominance reports for unranked pairs, the CDF and integrated-CDF
//! tables, and a comparison of the declared labels with exact results.

use std::fmt;

use serde::Serialize;

use crate::design::{DeclaredLabel, ExperimentDesign, LotteryIdx, MenuIdx};
use crate::dominance::{check_fosd, check_sosd, near_dominance_report, DominanceKind, NearDominanceReport};
use crate::lottery::{cdf_area_at, cdf_at, expected_value, overlapping_range, Lottery};
use crate::rational::{self, Rational};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AuditReport {
    pub lotteries: Vec<LotteryRow>,
    pub pairs: Vec<PairEntry>,
    pub near_fosd: Vec<NearReport>,
    pub near_sosd: Vec<NearReport>,
    /// Column labels of the CDF table: the intervals between consecutive prizes.
    pub cdf_intervals: Vec<String>,
    pub cdf_table: Vec<CdfRow>,
    pub area_columns: Vec<String>,
    /// `∫₀ˣ F` at each integer `x` from 1 to the largest prize.
    pub area_table: Vec<AreaRow>,
    pub label_checks: Vec<LabelCheck>,
    /// The label checks that fail.
    pub discrepancies: Vec<LabelCheck>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LotteryRow {
    pub id: String,
    /// `[prize, probability]`
    pub support: Vec<[String; 2]>,
    pub expected_value: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PairEntry {
    pub first: String,
    pub second: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub menu: Option<String>,
    pub overlapping_range: bool,
    pub fosd: Option<String>,
    pub sosd: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NearReport {
    pub first: String,
    pub second: String,
    pub report: NearDominanceReport,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CdfRow {
    pub lottery: String,
    pub values: Vec<String>,
    pub expected_value: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AreaRow {
    pub x: u32,
    pub values: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LabelCheck {
    pub menu: String,
    pub lotteries: Vec<String>,
    pub declared: String,
    pub computed: String,
    pub agrees: bool,
}

/// Exact label of a menu, in the vocabulary of the declared labels.
#[derive(Clone, Debug, PartialEq, Eq)]
enum Computed {
    Fosd(LotteryIdx),
    Sosd(LotteryIdx),
    None,
    FosdDominant(LotteryIdx),
    SosdDominant(LotteryIdx),
}

struct Labelled<'a>(&'a Computed, &'a ExperimentDesign);

impl fmt::Display for Labelled<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let id = |l: &LotteryIdx| self.1.lottery_id(*l).to_string();
        match self.0 {
            Computed::Fosd(l) => write!(f, "{} FOSD", id(l)),
            Computed::Sosd(l) => write!(f, "{} SOSD", id(l)),
            Computed::None => f.write_str("no dominance"),
            Computed::FosdDominant(l) => write!(f, "{} FOSD-dominant", id(l)),
            Computed::SosdDominant(l) => write!(f, "{} SOSD-dominant", id(l)),
        }
    }
}

fn fosd_over(p: &Lottery, q: &Lottery) -> bool {
    check_fosd(p, q).dominant_id(p, q) == Some(p.id())
}

fn sosd_over(p: &Lottery, q: &Lottery) -> bool {
    check_sosd(p, q).dominant_id(p, q) == Some(p.id())
}

fn compute_label(design: &ExperimentDesign, m: MenuIdx) -> Computed {
    let members = &design.menus[m].members;
    let lot = |l: LotteryIdx| &design.lotteries[l];
    let dominant = |rel: fn(&Lottery, &Lottery) -> bool| {
        members.iter().copied().find(|&d| members.iter().all(|&o| o == d || rel(lot(d), lot(o))))
    };
    match (members.len(), dominant(fosd_over), dominant(sosd_over)) {
        (2, Some(d), _) => Computed::Fosd(d),
        (2, None, Some(d)) => Computed::Sosd(d),
        (_, Some(d), _) => Computed::FosdDominant(d),
        (_, None, Some(d)) => Computed::SosdDominant(d),
        _ => Computed::None,
    }
}

/// A "nearly dominant" label holds when the lottery is not dominant but
/// dominates at least one other member.
fn agrees(design: &ExperimentDesign, m: MenuIdx, declared: &DeclaredLabel, computed: &Computed) -> bool {
    let idx = |id: &str| design.lottery(id);
    let members = &design.menus[m].members;
    let beats_some = |d: LotteryIdx, rel: fn(&Lottery, &Lottery) -> bool| {
        members.iter().any(|&o| o != d && rel(&design.lotteries[d], &design.lotteries[o]))
    };
    match (declared, computed) {
        (DeclaredLabel::Fosd { dominant }, Computed::Fosd(d)) => idx(dominant) == Some(*d),
        (DeclaredLabel::Sosd { dominant }, Computed::Sosd(d)) => idx(dominant) == Some(*d),
        (DeclaredLabel::None, Computed::None) => true,
        (DeclaredLabel::FosdDominant { dominant }, Computed::FosdDominant(d)) => idx(dominant) == Some(*d),
        (DeclaredLabel::NearlyFosdDominant { dominant }, c) => match idx(dominant) {
            Some(d) => !matches!(c, Computed::FosdDominant(_)) && beats_some(d, fosd_over),
            None => false,
        },
        (DeclaredLabel::NearlySosdDominant { dominant }, c) => match idx(dominant) {
            Some(d) => !matches!(c, Computed::FosdDominant(_) | Computed::SosdDominant(_)) && beats_some(d, sosd_over),
            None => false,
        },
        _ => false,
    }
}

fn fmt_r(r: &Rational) -> String {
    rational::format(r)
}

pub fn run_dominance_audit(design: &ExperimentDesign) -> AuditReport {
    let lots = &design.lotteries;
    let ev: Vec<Rational> = lots.iter().map(|l| expected_value(l).into_inner()).collect();

    let lotteries = lots
        .iter()
        .zip(&ev)
        .map(|(l, e)| LotteryRow {
            id: l.id().to_string(),
            support: l.support().iter().map(|a| [fmt_r(a.prize.amount()), fmt_r(a.mass.value())]).collect(),
            expected_value: fmt_r(e),
        })
        .collect();

    let mut pairs = Vec::new();
    let mut near_fosd = Vec::new();
    let mut near_sosd = Vec::new();
    for i in 0..lots.len() {
        for j in i + 1..lots.len() {
            let (p, q) = (&lots[i], &lots[j]);
            let fosd = check_fosd(p, q);
            let sosd = check_sosd(p, q);
            pairs.push(PairEntry {
                first: p.id().to_string(),
                second: q.id().to_string(),
                menu: design.binary_menu(i, j).map(|m| design.menus[m].id.clone()),
                overlapping_range: overlapping_range(p, q),
                fosd: fosd.dominant_id(p, q).map(str::to_string),
                sosd: sosd.dominant_id(p, q).map(str::to_string),
            });
            // the lottery with the higher mean is reported first
            let (a, b) = if ev[j] > ev[i] { (q, p) } else { (p, q) };
            let near = |kind| NearReport {
                first: a.id().to_string(),
                second: b.id().to_string(),
                report: near_dominance_report(a, b, kind),
            };
            if fosd.dominant().is_none() {
                near_fosd.push(near(DominanceKind::Fosd));
            }
            if sosd.dominant().is_none() {
                near_sosd.push(near(DominanceKind::Sosd));
            }
        }
    }

    let prizes = design.prizes();
    let mut starts = prizes.clone();
    if !starts.first().is_some_and(|z| *z == rational::zero()) {
        starts.insert(0, rational::zero());
    }
    let cdf_intervals = starts
        .iter()
        .enumerate()
        .map(|(k, s)| match starts.get(k + 1) {
            Some(e) => format!("[{},{})", fmt_r(s), fmt_r(e)),
            None => format!("[{},inf)", fmt_r(s)),
        })
        .collect();
    let cdf_table = lots
        .iter()
        .zip(&ev)
        .map(|(l, e)| CdfRow {
            lottery: l.id().to_string(),
            values: starts.iter().map(|x| fmt_r(cdf_at(l, x).value())).collect(),
            expected_value: fmt_r(e),
        })
        .collect();

    let top = prizes.last().map(|z| z.floor().to_integer()).unwrap_or_default();
    let top = u32::try_from(top).unwrap_or(0);
    let area_table = (1..=top)
        .map(|x| {
            let xr = rational::int(i64::from(x));
            AreaRow { x, values: lots.iter().map(|l| fmt_r(&cdf_area_at(l, &xr))).collect() }
        })
        .collect();

    let label_checks: Vec<LabelCheck> = (0..design.menus.len())
        .filter_map(|m| {
            let declared = design.declared[m].as_ref()?;
            let computed = compute_label(design, m);
            Some(LabelCheck {
                menu: design.menus[m].id.clone(),
                lotteries: design.menus[m].members.iter().map(|&l| design.lottery_id(l).to_string()).collect(),
                declared: declared.to_string(),
                computed: Labelled(&computed, design).to_string(),
                agrees: agrees(design, m, declared, &computed),
            })
        })
        .collect();
    let discrepancies = label_checks.iter().filter(|c| !c.agrees).cloned().collect();

    AuditReport {
        lotteries,
        pairs,
        near_fosd,
        near_sosd,
        cdf_intervals,
        cdf_table,
        area_columns: lots.iter().map(|l| l.id().to_string()).collect(),
        area_table,
        label_checks,
        discrepancies,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::builtin_design;

    #[test]
    fn builtin_discrepancies() {
        let audit = run_dominance_audit(&builtin_design());
        let flagged: Vec<&str> = audit.discrepancies.iter().map(|c| c.menu.as_str()).collect();
        assert_eq!(flagged, ["2", "3", "5", "7", "12", "13", "14"]);
        let m12 = &audit.discrepancies[4];
        assert_eq!(m12.computed, "A1 SOSD-dominant");
        assert_eq!(audit.cdf_intervals, ["[0,9)", "[9,10)", "[10,20)", "[20,24)", "[24,inf)"]);
        assert_eq!(audit.area_table.len(), 24);
        let pair = |a: &str, b: &str| audit.pairs.iter().find(|p| p.first == a && p.second == b).unwrap();
        assert_eq!(pair("A1", "A2").fosd.as_deref(), Some("A1"));
        assert_eq!(pair("A2", "D").fosd.as_deref(), Some("D"));
        assert_eq!(pair("A1", "D").fosd, None);
        assert_eq!(pair("B1", "B2").sosd.as_deref(), Some("B1"));
        let near = audit.near_fosd.iter().find(|r| r.first == "A2" && r.second == "C2").unwrap();
        assert_eq!(near.report.net_gap, rational::ratio(5, 24));
    }
}
