//! Expected-utility classification and an exact LP oracle for EU
//! rationalizability.

use num_traits::{One, Zero};
use serde::Serialize;

use crate::axioms::{check_fosd_choice, check_independence, check_star, DeferralPolicy, FosdMode, RiskAttitude};
use crate::choice::Correspondence;
use crate::design::{ExperimentDesign, LotteryIdx, MenuIdx, Taxonomy};
use crate::hm::HmResult;
use crate::lottery::Lottery;
use crate::lp::{find_feasible, irreducible_infeasible_subset, Relation, Row};
use crate::rational::{self, Rational};

/// Default cutoff for "approximately" utility maximising.
pub const APPROX_UM_THRESHOLD: usize = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EumResult {
    pub hm_score: usize,
    pub is_um: bool,
    pub is_approx_um: bool,
    pub fosd_ok: bool,
    pub independence_ok: bool,
    pub star_ok: bool,
    pub is_eum_binary: bool,
    pub is_eum_all: bool,
    pub risk_attitude: RiskAttitude,
}

/// UM from the HM score; EUM on binary menus from the FOSD (exact-dominant
/// form), Independence and StAR checks.
pub fn classify_eum(
    design: &ExperimentDesign,
    c: &Correspondence,
    hm: &HmResult,
    taxonomy: Taxonomy,
    policy: DeferralPolicy,
    approx_threshold: usize,
) -> EumResult {
    let fosd_ok = check_fosd_choice(c, &design.fosd_menus(taxonomy), FosdMode::StrictAxiom).is_empty();
    let independence_ok = check_independence(c, &design.independence, policy).is_empty();
    let (star, risk_attitude) = check_star(design, c, &design.star_pairs(taxonomy), policy);
    let star_ok = star.is_empty();
    let is_um = hm.score == 0;
    let is_eum_binary = fosd_ok && independence_ok && star_ok;
    EumResult {
        hm_score: hm.score,
        is_um,
        is_approx_um: hm.score <= approx_threshold,
        fosd_ok,
        independence_ok,
        star_ok,
        is_eum_binary,
        is_eum_all: is_um && is_eum_binary,
        risk_attitude,
    }
}

/// Margin for strict preferences in the LP.
pub fn epsilon() -> Rational {
    rational::ratio(1, 1_000_000)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EuConstraintKind {
    /// `EU(better) ≥ EU(worse) + ε`
    Strict,
    /// `EU(better) = EU(worse)`
    Indifferent,
    /// Empty choice under the strict deferral policy: unsatisfiable.
    Deferral,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EuConstraint {
    pub menu: MenuIdx,
    pub better: Option<LotteryIdx>,
    pub worse: Option<LotteryIdx>,
    pub kind: EuConstraintKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EuFit {
    pub feasible: bool,
    /// `(prize, u(prize))` for a rationalizing utility, lowest prize first.
    pub utilities: Vec<(Rational, Rational)>,
    /// Irreducible conflicting constraints, when requested and infeasible.
    pub conflict: Vec<EuConstraint>,
}

/// `Pr(X ≥ z)` for each prize above the lowest: the coefficient of the
/// utility increment at `z` in `EU(p)`.
fn survival(p: &Lottery, prizes: &[Rational]) -> Vec<Rational> {
    prizes[1..]
        .iter()
        .map(|z| p.support().iter().filter(|a| a.prize.amount() >= z).map(|a| a.mass.value().clone()).sum())
        .collect()
}

fn constraints(design: &ExperimentDesign, c: &Correspondence, policy: DeferralPolicy) -> Vec<EuConstraint> {
    let mut out = Vec::new();
    for (m, menu) in design.menus.iter().enumerate() {
        let chosen = c.value(m);
        if chosen == 0 {
            if policy == DeferralPolicy::Strict {
                out.push(EuConstraint { menu: m, better: None, worse: None, kind: EuConstraintKind::Deferral });
            }
            continue;
        }
        let inside: Vec<_> = menu.members.iter().copied().filter(|&l| chosen & (1 << l) != 0).collect();
        for &q in menu.members.iter().filter(|&&l| chosen & (1 << l) == 0) {
            for &p in &inside {
                out.push(EuConstraint { menu: m, better: Some(p), worse: Some(q), kind: EuConstraintKind::Strict });
            }
        }
        for w in inside.windows(2) {
            out.push(EuConstraint {
                menu: m,
                better: Some(w[0]),
                worse: Some(w[1]),
                kind: EuConstraintKind::Indifferent,
            });
        }
    }
    out
}

/// LP rows over increments `y_k = d_k − ε ≥ 0`, where `d_k` is the utility
/// step between consecutive prizes, `Σ d_k = 1` and every `d_k ≥ ε`.
fn rows(cons: &[EuConstraint], surv: &[Vec<Rational>], k: usize) -> (Vec<Row>, Vec<Option<usize>>) {
    let eps = epsilon();
    let mut rows = vec![Row {
        coeffs: vec![Rational::one(); k],
        relation: Relation::Eq,
        rhs: Rational::one() - &eps * Rational::from_integer(k.into()),
    }];
    let mut origin = vec![None];
    let mut seen = Vec::<(Vec<Rational>, Relation, Rational)>::new();
    for (i, con) in cons.iter().enumerate() {
        let row = match (con.kind, con.better, con.worse) {
            (EuConstraintKind::Deferral, _, _) => Row {
                // 0 ≥ 1: no utility makes deferral optimal.
                coeffs: vec![Rational::zero(); k],
                relation: Relation::Ge,
                rhs: Rational::one(),
            },
            (kind, Some(p), Some(q)) => {
                let diff: Vec<Rational> = surv[p].iter().zip(&surv[q]).map(|(a, b)| a - b).collect();
                let shift: Rational = diff.iter().sum::<Rational>() * &eps;
                match kind {
                    EuConstraintKind::Strict => Row { coeffs: diff, relation: Relation::Ge, rhs: &eps - shift },
                    _ => Row { coeffs: diff, relation: Relation::Eq, rhs: -shift },
                }
            }
            _ => unreachable!("pairwise constraint without lotteries"),
        };
        let key = (row.coeffs.clone(), row.relation, row.rhs.clone());
        if seen.contains(&key) {
            continue;
        }
        seen.push(key);
        rows.push(row);
        origin.push(Some(i));
    }
    (rows, origin)
}

/// Whether some strictly increasing utility over the design's prizes
/// rationalizes `c` as EU maximisation: chosen lotteries tie, and beat every
/// unchosen menu member by at least ε.
pub fn eu_rationalizable(
    design: &ExperimentDesign,
    c: &Correspondence,
    policy: DeferralPolicy,
    explain: bool,
) -> EuFit {
    let prizes = design.prizes();
    let k = prizes.len() - 1;
    let surv: Vec<Vec<Rational>> = design.lotteries.iter().map(|l| survival(l, &prizes)).collect();
    let cons = constraints(design, c, policy);
    let (rows, origin) = rows(&cons, &surv, k);
    match find_feasible(k, &rows) {
        Some(y) => {
            let eps = epsilon();
            let mut u = Rational::zero();
            let mut utilities = vec![(prizes[0].clone(), u.clone())];
            for (z, yk) in prizes[1..].iter().zip(&y) {
                u = u + yk + &eps;
                utilities.push((z.clone(), u.clone()));
            }
            EuFit { feasible: true, utilities, conflict: Vec::new() }
        }
        None => {
            let conflict = if explain {
                irreducible_infeasible_subset(k, &rows)
                    .into_iter()
                    .filter_map(|r| origin[r])
                    .map(|i| cons[i].clone())
                    .collect()
            } else {
                Vec::new()
            };
            EuFit { feasible: false, utilities: Vec::new(), conflict }
        }
    }
}

/// Expected utility of `p` under a piecewise utility given at the prizes.
pub fn expected_utility(p: &Lottery, utilities: &[(Rational, Rational)]) -> Rational {
    p.support()
        .iter()
        .map(|a| {
            let u = utilities
                .iter()
                .find(|(z, _)| z == a.prize.amount())
                .map(|(_, u)| u.clone())
                .expect("utility defined at every prize");
            u * a.mass.value()
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::builtin_design;
    use crate::hm::{HmMode, HmTable};

    fn corr(d: &ExperimentDesign, entries: &[(&str, &[&str])]) -> Correspondence {
        let mut values: Vec<u16> = vec![0; d.menus.len()];
        for (m, ids) in entries {
            values[d.menu(m).unwrap()] = ids.iter().fold(0, |a, id| a | (1 << d.lottery(id).unwrap()));
        }
        Correspondence::new(values)
    }

    /// Risk-averse EU choice under u(x) = sqrt-like concave steps.
    fn concave_choices(d: &ExperimentDesign) -> Correspondence {
        // utilities at 0, 9, 10, 20, 24 with decreasing steps
        let u = [(0, 0), (9, 45), (10, 49), (20, 79), (24, 87)].map(|(z, u)| (rational::int(z), rational::int(u)));
        let values = d
            .menus
            .iter()
            .map(|m| {
                let eus: Vec<_> = m.members.iter().map(|&l| expected_utility(&d.lotteries[l], &u)).collect();
                let best = eus.iter().max().unwrap();
                m.members.iter().zip(&eus).filter(|(_, e)| *e == best).fold(0u16, |a, (&l, _)| a | (1 << l))
            })
            .collect();
        Correspondence::new(values)
    }

    #[test]
    fn dominated_choice_is_not_eu() {
        let d = builtin_design();
        let c = corr(&d, &[("1", &["A2"])]);
        let fit = eu_rationalizable(&d, &c, DeferralPolicy::Lenient, true);
        assert!(!fit.feasible);
        assert_eq!(fit.conflict.len(), 1);
        assert_eq!(fit.conflict[0].menu, d.menu("1").unwrap());
    }

    #[test]
    fn independence_reversal_is_not_eu() {
        let d = builtin_design();
        let c = corr(&d, &[("2", &["B1"]), ("3", &["C2"])]);
        let fit = eu_rationalizable(&d, &c, DeferralPolicy::Lenient, true);
        assert!(!fit.feasible);
        assert_eq!(fit.conflict.len(), 2);
    }

    #[test]
    fn deferral_under_policies() {
        let d = builtin_design();
        let c = corr(&d, &[("1", &["A1"])]);
        assert!(eu_rationalizable(&d, &c, DeferralPolicy::Lenient, false).feasible);
        let fit = eu_rationalizable(&d, &c, DeferralPolicy::Strict, true);
        assert!(!fit.feasible);
        assert_eq!(fit.conflict.len(), 1);
        assert_eq!(fit.conflict[0].kind, EuConstraintKind::Deferral);
    }

    #[test]
    fn concave_agent_round_trip() {
        let d = builtin_design();
        let c = concave_choices(&d);
        let fit = eu_rationalizable(&d, &c, DeferralPolicy::Strict, false);
        assert!(fit.feasible);
        assert_eq!(fit.utilities.first().unwrap().1, Rational::zero());
        assert_eq!(fit.utilities.last().unwrap().1, Rational::one());
        for (m, menu) in d.menus.iter().enumerate() {
            let eus: Vec<_> = menu.members.iter().map(|&l| expected_utility(&d.lotteries[l], &fit.utilities)).collect();
            let best = eus.iter().max().unwrap();
            let argmax =
                menu.members.iter().zip(&eus).filter(|(_, e)| *e == best).fold(0u16, |a, (&l, _)| a | (1 << l));
            assert_eq!(argmax, c.value(m), "menu {}", menu.id);
        }

        let t = HmTable::for_design(&d, HmMode::Weak).unwrap();
        let hm = t.evaluate(&c, DeferralPolicy::Strict);
        let r = classify_eum(&d, &c, &hm, Taxonomy::Declared, DeferralPolicy::Strict, APPROX_UM_THRESHOLD);
        assert!(r.is_eum_all);
        assert_eq!(r.risk_attitude, RiskAttitude::RiskAverse);
    }

    #[test]
    fn um_but_not_eum() {
        let d = builtin_design();
        // A linear order with B1 > B2 but C2 > C1 is UM yet breaks Independence.
        let order = crate::orders::LinearOrder(
            ["A1", "D", "B1", "C2", "B2", "C1", "A2"].iter().map(|id| d.lottery(id).unwrap()).collect(),
        );
        let c = Correspondence::new(d.menus.iter().map(|m| 1u16 << order.max_of(m.mask).unwrap()).collect());
        let t = HmTable::for_design(&d, HmMode::Weak).unwrap();
        let hm = t.evaluate(&c, DeferralPolicy::Strict);
        let r = classify_eum(&d, &c, &hm, Taxonomy::Declared, DeferralPolicy::Strict, APPROX_UM_THRESHOLD);
        assert!(r.is_um);
        assert!(!r.independence_ok);
        assert!(!r.is_eum_all);
    }

    #[test]
    fn all_deferral_is_not_um() {
        let d = builtin_design();
        let c = Correspondence::new(vec![0; d.menus.len()]);
        let t = HmTable::for_design(&d, HmMode::Weak).unwrap();
        let hm = t.evaluate(&c, DeferralPolicy::Strict);
        let r = classify_eum(&d, &c, &hm, Taxonomy::Declared, DeferralPolicy::Strict, APPROX_UM_THRESHOLD);
        assert!(!r.is_um);
        assert!(!r.is_eum_all);
    }
}
