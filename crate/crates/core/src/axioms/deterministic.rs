//! Deterministic choice axioms over (possibly empty, possibly multi-valued)
//! choice correspondences. A per-round choice function is passed as the
//! singleton-or-empty special case.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{Axiom, AxiomViolation, DeferralPolicy};
use crate::choice::Correspondence;
use crate::design::{ExperimentDesign, IndependencePair, LotteryIdx, MenuIdx, RankedPair, Triple};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FosdMode {
    /// The choice must be exactly the dominant lottery.
    #[default]
    StrictAxiom,
    /// Only an active choice of the dominated lottery counts.
    DominatedChoice,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum RiskAttitude {
    RiskAverse,
    RiskSeeking,
    RiskNeutral,
    Unclassified,
}

fn bit(l: LotteryIdx) -> u16 {
    1 << l
}

pub fn check_decisiveness(c: &Correspondence) -> Vec<AxiomViolation> {
    (0..c.values.len())
        .filter(|&m| c.is_empty_at(m))
        .map(|m| AxiomViolation::new(Axiom::Decisiveness, vec![m], vec![]))
        .collect()
}

/// Every ordered arrangement `(p, q, r)` of every triple with `p ∈ C({p,q})`,
/// `q ∈ C({q,r})` and `p ∉ C({p,r})`. Violations carry the triple index in
/// `fixture`; use [`violated_fixtures`] to count each triple once.
pub fn check_transitivity(design: &ExperimentDesign, c: &Correspondence, triples: &[Triple]) -> Vec<AxiomViolation> {
    const ARRANGEMENTS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut out = Vec::new();
    for (t, triple) in triples.iter().enumerate() {
        for arr in ARRANGEMENTS {
            let [p, q, r] = arr.map(|k| triple.lotteries[k]);
            let (Some(pq), Some(qr), Some(pr)) =
                (design.binary_menu(p, q), design.binary_menu(q, r), design.binary_menu(p, r))
            else {
                continue;
            };
            if c.contains(pq, p) && c.contains(qr, q) && !c.contains(pr, p) {
                let mut v = AxiomViolation::new(Axiom::Transitivity, vec![pq, qr, pr], vec![p, q, r]);
                v.fixture = Some(t);
                out.push(v);
            }
        }
    }
    out
}

/// `p ∈ C(A)`, `p ∈ B ⊂ A`, `p ∉ C(B)`, over the given `(B, A)` pairs.
pub fn check_contraction(
    design: &ExperimentDesign,
    c: &Correspondence,
    nested: &[(MenuIdx, MenuIdx)],
) -> Vec<AxiomViolation> {
    let mut out = Vec::new();
    for &(small, large) in nested {
        let carried = c.value(large) & design.menus[small].mask;
        for &p in &design.menus[small].members {
            if carried & bit(p) != 0 && !c.contains(small, p) {
                out.push(AxiomViolation::new(Axiom::Contraction, vec![large, small], vec![p]));
            }
        }
    }
    out
}

/// `p ∈ C(A)`, `q ∈ A ∖ C(A)`, `q ∈ C(B)` and `p ∈ B`, over all menu pairs.
pub fn check_warp(design: &ExperimentDesign, c: &Correspondence) -> Vec<AxiomViolation> {
    let mut out = Vec::new();
    for (a, menu_a) in design.menus.iter().enumerate() {
        let chosen = c.value(a);
        let rejected = menu_a.mask & !chosen;
        if chosen == 0 || rejected == 0 {
            continue;
        }
        for (b, menu_b) in design.menus.iter().enumerate() {
            if a == b {
                continue;
            }
            for &p in &menu_a.members {
                if chosen & bit(p) == 0 || !menu_b.contains(p) {
                    continue;
                }
                for &q in &menu_a.members {
                    if rejected & bit(q) != 0 && c.contains(b, q) {
                        out.push(AxiomViolation::new(Axiom::Warp, vec![a, b], vec![p, q]));
                    }
                }
            }
        }
    }
    out
}

pub fn check_fosd_choice(c: &Correspondence, menus: &[RankedPair], mode: FosdMode) -> Vec<AxiomViolation> {
    let mut out = Vec::new();
    for pair in menus {
        let v = c.value(pair.menu);
        let violated = match mode {
            FosdMode::StrictAxiom => v != bit(pair.dominant),
            FosdMode::DominatedChoice => v & bit(pair.dominated) != 0,
        };
        if violated {
            let mut viol = AxiomViolation::new(Axiom::Fosd, vec![pair.menu], vec![pair.dominant, pair.dominated]);
            viol.fosd_mode = Some(mode);
            if v == bit(pair.dominated) {
                viol.note = Some("strict");
            }
            out.push(viol);
        }
    }
    out
}

/// Choice at the mixed menu must be the image of the base-menu choice under
/// the mixture map: both empty, matching singletons, or both full.
pub fn check_independence(
    c: &Correspondence,
    pairs: &[IndependencePair],
    policy: DeferralPolicy,
) -> Vec<AxiomViolation> {
    let mut out = Vec::new();
    for (k, pair) in pairs.iter().enumerate() {
        let base = c.value(pair.base_menu);
        let mixed = c.value(pair.mixed_menu);
        if policy == DeferralPolicy::Lenient && (base == 0 || mixed == 0) {
            continue;
        }
        let image = pair.images.iter().filter(|(b, _)| base & bit(*b) != 0).fold(0u16, |m, (_, img)| m | bit(*img));
        if image != mixed {
            let lotteries = pair.images.iter().flat_map(|&(b, m)| [b, m]).collect();
            let mut v = AxiomViolation::new(Axiom::Independence, vec![pair.base_menu, pair.mixed_menu], lotteries);
            v.fixture = Some(k);
            v.policy = Some(policy);
            out.push(v);
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum StarCase {
    Empty,
    Dominant,
    Dominated,
    Both,
}

fn star_case(c: &Correspondence, pair: &RankedPair) -> StarCase {
    let v = c.value(pair.menu);
    let d = v & bit(pair.dominant) != 0;
    let s = v & bit(pair.dominated) != 0;
    match (d, s) {
        (false, false) => StarCase::Empty,
        (true, false) => StarCase::Dominant,
        (false, true) => StarCase::Dominated,
        (true, true) => StarCase::Both,
    }
}

fn jointly_overlapping(design: &ExperimentDesign, a: &RankedPair, b: &RankedPair) -> bool {
    let ls = [a.dominant, a.dominated, b.dominant, b.dominated].map(|l| &design.lotteries[l]);
    let lo = ls.iter().map(|l| l.low()).max().expect("four lotteries");
    let hi = ls.iter().map(|l| l.high()).min().expect("four lotteries");
    lo < hi
}

/// Every two SOSD-ranked binary menus with a common overlapping range must
/// show the same case (both empty, both dominant, both dominated, both full).
/// The revealed risk attitude is read off the common case when the test
/// passes.
pub fn check_star(
    design: &ExperimentDesign,
    c: &Correspondence,
    pairs: &[RankedPair],
    policy: DeferralPolicy,
) -> (Vec<AxiomViolation>, RiskAttitude) {
    let cases: Vec<(usize, StarCase)> = pairs
        .iter()
        .enumerate()
        .map(|(k, p)| (k, star_case(c, p)))
        .filter(|(_, case)| !(policy == DeferralPolicy::Lenient && *case == StarCase::Empty))
        .collect();
    let mut out = Vec::new();
    for (i, &(a, ca)) in cases.iter().enumerate() {
        for &(b, cb) in &cases[i + 1..] {
            if ca != cb && jointly_overlapping(design, &pairs[a], &pairs[b]) {
                let (pa, pb) = (&pairs[a], &pairs[b]);
                let mut v = AxiomViolation::new(
                    Axiom::Star,
                    vec![pa.menu, pb.menu],
                    vec![pa.dominant, pa.dominated, pb.dominant, pb.dominated],
                );
                v.policy = Some(policy);
                out.push(v);
            }
        }
    }
    let attitude = if !out.is_empty() {
        RiskAttitude::Unclassified
    } else {
        let distinct: BTreeSet<u8> = cases.iter().map(|(_, c)| *c as u8).collect();
        match (distinct.len(), cases.first().map(|(_, c)| *c)) {
            (1, Some(StarCase::Dominant)) => RiskAttitude::RiskAverse,
            (1, Some(StarCase::Dominated)) => RiskAttitude::RiskSeeking,
            (1, Some(StarCase::Both)) => RiskAttitude::RiskNeutral,
            _ => RiskAttitude::Unclassified,
        }
    };
    (out, attitude)
}

/// Distinct fixture indices among the violations (each triple or pair counted
/// once).
pub fn violated_fixtures(violations: &[AxiomViolation]) -> BTreeSet<usize> {
    violations.iter().filter_map(|v| v.fixture).collect()
}
