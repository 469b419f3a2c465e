//! Random-utility implications on empirical choice probabilities. All
//! comparisons are exact.

use serde::Serialize;

use crate::choice::ChoiceProbabilities;
use crate::design::{ExperimentDesign, LotteryIdx, MenuIdx, Triple};
use crate::rational::{self, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum StochasticAxiom {
    Regularity,
    #[serde(rename = "WST")]
    Wst,
    #[serde(rename = "MST")]
    Mst,
    #[serde(rename = "SST")]
    Sst,
    StochasticDecisiveness,
}

impl StochasticAxiom {
    pub const ALL: [StochasticAxiom; 5] = [
        StochasticAxiom::StochasticDecisiveness,
        StochasticAxiom::Regularity,
        StochasticAxiom::Wst,
        StochasticAxiom::Mst,
        StochasticAxiom::Sst,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StochasticAxiom::Regularity => "Regularity",
            StochasticAxiom::Wst => "Weak Stochastic Transitivity",
            StochasticAxiom::Mst => "Moderate Stochastic Transitivity",
            StochasticAxiom::Sst => "Strong Stochastic Transitivity",
            StochasticAxiom::StochasticDecisiveness => "Stochastic Decisiveness",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TransitivityVariant {
    Weak,
    Moderate,
    Strong,
}

impl TransitivityVariant {
    pub fn axiom(self) -> StochasticAxiom {
        match self {
            TransitivityVariant::Weak => StochasticAxiom::Wst,
            TransitivityVariant::Moderate => StochasticAxiom::Mst,
            TransitivityVariant::Strong => StochasticAxiom::Sst,
        }
    }
}

/// Which frequencies enter the binary-menu probabilities of the
/// transitivity tests.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbabilityBasis {
    /// Counts over all rounds, deferrals included in the denominator.
    #[default]
    Raw,
    /// Counts over rounds with an active choice only.
    ActiveOnly,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StochasticViolation {
    pub axiom: StochasticAxiom,
    pub menus: Vec<MenuIdx>,
    pub lotteries: Vec<LotteryIdx>,
    /// The probabilities compared, in the order of `menus`.
    pub values: Vec<Rational>,
}

impl StochasticViolation {
    pub fn render(&self, design: &ExperimentDesign) -> StochasticView {
        StochasticView {
            axiom: self.axiom,
            menus: self.menus.iter().map(|&m| design.menus[m].id.clone()).collect(),
            lotteries: self.lotteries.iter().map(|&l| design.lottery_id(l).to_string()).collect(),
            values: self.values.iter().map(rational::format).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StochasticView {
    pub axiom: StochasticAxiom,
    pub menus: Vec<String>,
    pub lotteries: Vec<String>,
    pub values: Vec<String>,
}

/// `Pr(p, A) ≤ Pr(p, B)` for `p ∈ B ⊂ A`, over the given `(B, A)` pairs.
pub fn check_regularity(
    design: &ExperimentDesign,
    probs: &ChoiceProbabilities,
    nested: &[(MenuIdx, MenuIdx)],
) -> Vec<StochasticViolation> {
    let mut out = Vec::new();
    for &(small, large) in nested {
        for &p in &design.menus[small].members {
            let in_large = probs.prob(p, large);
            let in_small = probs.prob(p, small);
            if in_large > in_small {
                out.push(StochasticViolation {
                    axiom: StochasticAxiom::Regularity,
                    menus: vec![large, small],
                    lotteries: vec![p],
                    values: vec![in_large, in_small],
                });
            }
        }
    }
    out
}

/// For every arrangement `(p, q, r)` of a triple with `Pr(p,{p,q}) ≥ 1/2`
/// and `Pr(q,{q,r}) ≥ 1/2`, `Pr(p,{p,r})` must reach 1/2, the smaller, or the
/// larger antecedent probability.
pub fn check_stochastic_transitivity(
    design: &ExperimentDesign,
    probs: &ChoiceProbabilities,
    triples: &[Triple],
    variant: TransitivityVariant,
    basis: ProbabilityBasis,
) -> Vec<StochasticViolation> {
    const ARRANGEMENTS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let half = rational::ratio(1, 2);
    let pr = |l, m| match basis {
        ProbabilityBasis::Raw => probs.prob(l, m),
        ProbabilityBasis::ActiveOnly => probs.active_prob(l, m),
    };
    let mut out = Vec::new();
    for triple in triples {
        for arr in ARRANGEMENTS {
            let [p, q, r] = arr.map(|k| triple.lotteries[k]);
            let (Some(pq), Some(qr), Some(prm)) =
                (design.binary_menu(p, q), design.binary_menu(q, r), design.binary_menu(p, r))
            else {
                continue;
            };
            let a = pr(p, pq);
            let b = pr(q, qr);
            if a < half || b < half {
                continue;
            }
            let c = pr(p, prm);
            let threshold = match variant {
                TransitivityVariant::Weak => half.clone(),
                TransitivityVariant::Moderate => a.clone().min(b.clone()),
                TransitivityVariant::Strong => a.clone().max(b.clone()),
            };
            if c < threshold {
                out.push(StochasticViolation {
                    axiom: variant.axiom(),
                    menus: vec![pq, qr, prm],
                    lotteries: vec![p, q, r],
                    values: vec![a, b, c],
                });
            }
        }
    }
    out
}

/// One violation per menu with `Pr(A, A) < 1`.
pub fn check_stochastic_decisiveness(probs: &ChoiceProbabilities) -> Vec<StochasticViolation> {
    (0..probs.deferrals.len())
        .filter(|&m| probs.deferrals[m] > 0)
        .map(|m| StochasticViolation {
            axiom: StochasticAxiom::StochasticDecisiveness,
            menus: vec![m],
            lotteries: vec![],
            values: vec![probs.active(m)],
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::builtin_design;
    use crate::rational::ratio;

    /// Probabilities over five rounds from `(menu, lottery, count)` entries;
    /// remaining mass is deferral.
    fn probs(design: &ExperimentDesign, entries: &[(&str, &str, u32)]) -> ChoiceProbabilities {
        let n = design.menus.len();
        let mut counts = vec![vec![0u32; design.lotteries.len()]; n];
        for (m, l, k) in entries {
            counts[design.menu(m).unwrap()][design.lottery(l).unwrap()] = *k;
        }
        let deferrals = counts.iter().map(|row| 5 - row.iter().sum::<u32>()).collect();
        ChoiceProbabilities { rounds: 5, counts, deferrals }
    }

    fn full(design: &ExperimentDesign) -> Vec<(String, String, u32)> {
        design.menus.iter().map(|m| (m.id.clone(), design.lottery_id(m.members[0]).to_string(), 5)).collect()
    }

    #[test]
    fn regularity_example() {
        let d = builtin_design();
        // {A1,A2} is menu 1, {A1,A2,C1} is menu 10
        let p = probs(&d, &[("1", "A1", 2), ("10", "A1", 3)]);
        let v = check_regularity(&d, &p, &d.nested);
        assert!(v.iter().any(|v| v.values == vec![ratio(3, 5), ratio(2, 5)]));
        let p = probs(&d, &[("1", "A1", 3), ("10", "A1", 3)]);
        assert!(check_regularity(&d, &p, &d.nested).iter().all(|v| v.menus[1] != d.menu("1").unwrap()));
    }

    #[test]
    fn transitivity_variants() {
        let d = builtin_design();
        // triple (A1, D, A2): {A1,D}=8, {A2,D}=9, {A1,A2}=1
        let wst =
            probs(&d, &[("8", "A1", 3), ("8", "D", 2), ("9", "D", 3), ("9", "A2", 2), ("1", "A1", 2), ("1", "A2", 3)]);
        let run = |p: &ChoiceProbabilities, v| {
            check_stochastic_transitivity(&d, p, &d.triples[..1], v, ProbabilityBasis::Raw)
        };
        assert!(!run(&wst, TransitivityVariant::Weak).is_empty());

        let sst =
            probs(&d, &[("8", "A1", 4), ("8", "D", 1), ("9", "D", 3), ("9", "A2", 2), ("1", "A1", 3), ("1", "A2", 2)]);
        assert!(run(&sst, TransitivityVariant::Weak).is_empty());
        assert!(run(&sst, TransitivityVariant::Moderate).is_empty());
        let v = run(&sst, TransitivityVariant::Strong);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].values, vec![ratio(4, 5), ratio(3, 5), ratio(3, 5)]);
    }

    #[test]
    fn deferral_mass_and_basis() {
        let d = builtin_design();
        // two deferrals at each binary menu: raw antecedents at 2/5 do not fire
        let p = probs(&d, &[("8", "A1", 2), ("8", "D", 1), ("9", "D", 2), ("9", "A2", 1), ("1", "A2", 3)]);
        let raw =
            check_stochastic_transitivity(&d, &p, &d.triples[..1], TransitivityVariant::Weak, ProbabilityBasis::Raw);
        assert!(raw.is_empty());
        let active = check_stochastic_transitivity(
            &d,
            &p,
            &d.triples[..1],
            TransitivityVariant::Weak,
            ProbabilityBasis::ActiveOnly,
        );
        assert!(!active.is_empty());
    }

    #[test]
    fn ties_at_half_fire_antecedents() {
        let mut spec = crate::design::builtin_spec();
        spec.fixtures.rounds_expected = 4;
        let d = ExperimentDesign::build(spec).unwrap();
        let mut counts = vec![vec![0u32; d.lotteries.len()]; d.menus.len()];
        let set = |c: &mut Vec<Vec<u32>>, m: &str, l: &str, k| c[d.menu(m).unwrap()][d.lottery(l).unwrap()] = k;
        set(&mut counts, "8", "A1", 2);
        set(&mut counts, "8", "D", 2);
        set(&mut counts, "9", "D", 2);
        set(&mut counts, "9", "A2", 2);
        set(&mut counts, "1", "A2", 4);
        let deferrals = counts.iter().map(|r| 4 - r.iter().sum::<u32>()).collect();
        let p = ChoiceProbabilities { rounds: 4, counts, deferrals };
        let v =
            check_stochastic_transitivity(&d, &p, &d.triples[..1], TransitivityVariant::Weak, ProbabilityBasis::Raw);
        assert!(!v.is_empty());
    }

    #[test]
    fn decisiveness() {
        let d = builtin_design();
        let entries = full(&d);
        let refs: Vec<(&str, &str, u32)> = entries.iter().map(|(m, l, k)| (m.as_str(), l.as_str(), *k)).collect();
        assert!(check_stochastic_decisiveness(&probs(&d, &refs)).is_empty());
        let mut one = refs.clone();
        one[0].2 = 4;
        assert_eq!(check_stochastic_decisiveness(&probs(&d, &one)).len(), 1);
        let mut never = refs.clone();
        never[0].2 = 0;
        let v = check_stochastic_decisiveness(&probs(&d, &never));
        assert_eq!(v[0].values, vec![Rational::from_integer(0.into())]);
    }
}
