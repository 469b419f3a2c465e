//! First- and second-order stochastic dominance over exact step CDFs.
//!
//! Both distribution functions are step functions with jumps at the union of
//! the two supports, so every check reduces to finitely many breakpoints:
//! `F_p − F_q` is constant between breakpoints and `∫₀ˣ (F_p − F_q)` is linear
//! between them. Evaluation runs over `[0, M]` where `M` is the largest prize
//! of either lottery.

use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::lottery::{cdf_area_at, cdf_at, union_prizes, Lottery, Money};
use crate::rational::{self, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum DominanceKind {
    Fosd,
    Sosd,
}

/// Which argument of a pairwise check dominates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    First,
    Second,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "UPPERCASE")]
pub enum DominanceRelation {
    None,
    Fosd { dominant: Side, witness: Money },
    Sosd { dominant: Side, witness: Money },
}

impl DominanceRelation {
    pub fn dominant(&self) -> Option<Side> {
        match self {
            DominanceRelation::None => None,
            DominanceRelation::Fosd { dominant, .. } | DominanceRelation::Sosd { dominant, .. } => Some(*dominant),
        }
    }

    pub fn kind(&self) -> Option<DominanceKind> {
        match self {
            DominanceRelation::None => None,
            DominanceRelation::Fosd { .. } => Some(DominanceKind::Fosd),
            DominanceRelation::Sosd { .. } => Some(DominanceKind::Sosd),
        }
    }

    /// Id of the dominant lottery, given the arguments the check ran on.
    pub fn dominant_id<'a>(&self, p: &'a Lottery, q: &'a Lottery) -> Option<&'a str> {
        self.dominant().map(|s| match s {
            Side::First => p.id(),
            Side::Second => q.id(),
        })
    }
}

/// `0` followed by the sorted union of both supports.
fn evaluation_points(p: &Lottery, q: &Lottery) -> Vec<Rational> {
    let mut pts = union_prizes(p, q);
    if !pts[0].is_zero() {
        pts.insert(0, Rational::zero());
    }
    pts
}

/// Shared sign scan: `values` must be `≤ 0` everywhere for the first lottery
/// to dominate and `≥ 0` everywhere for the second.
fn scan(points: &[Rational], values: &[Rational]) -> Option<(Side, Rational)> {
    let first_strict = points.iter().zip(values).find(|(_, v)| !v.is_zero());
    let (witness, v) = first_strict?;
    if v.is_negative() {
        values.iter().all(|v| !v.is_positive()).then(|| (Side::First, witness.clone()))
    } else {
        values.iter().all(|v| !v.is_negative()).then(|| (Side::Second, witness.clone()))
    }
}

pub fn check_fosd(p: &Lottery, q: &Lottery) -> DominanceRelation {
    let pts = evaluation_points(p, q);
    let gaps: Vec<Rational> = pts.iter().map(|x| cdf_at(p, x).value() - cdf_at(q, x).value()).collect();
    match scan(&pts, &gaps) {
        Some((dominant, w)) => DominanceRelation::Fosd { dominant, witness: money(w) },
        None => DominanceRelation::None,
    }
}

pub fn check_sosd(p: &Lottery, q: &Lottery) -> DominanceRelation {
    let pts = evaluation_points(p, q);
    let gaps: Vec<Rational> = pts.iter().map(|x| area_gap(p, q, x)).collect();
    match scan(&pts, &gaps) {
        Some((dominant, w)) => DominanceRelation::Sosd { dominant, witness: money(w) },
        None => DominanceRelation::None,
    }
}

fn area_gap(p: &Lottery, q: &Lottery, x: &Rational) -> Rational {
    cdf_area_at(p, x) - cdf_area_at(q, x)
}

fn money(r: Rational) -> Money {
    Money::new(r).expect("evaluation points are non-negative")
}

/// A maximal stretch of `[0, M)` on which one lottery's CDF lies below the
/// other's (first-order reports only).
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Segment {
    #[serde(with = "rational::serde_str")]
    pub start: Rational,
    #[serde(with = "rational::serde_str")]
    pub end: Rational,
    /// `None` where the two CDFs coincide.
    pub favours: Option<Side>,
    /// Length-weighted average of `|F_p − F_q|` over the segment.
    #[serde(with = "rational::serde_str")]
    pub mean_gap: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NearDominanceReport {
    pub kind: DominanceKind,
    /// Top of the evaluation range (largest prize of either lottery).
    #[serde(with = "rational::serde_str")]
    pub range_top: Rational,
    /// Supremum `x*` of the initial stretch `[0, x*]` on which the first
    /// lottery's condition holds. For FOSD the condition fails *at* `x*`
    /// whenever `x* < range_top` (step CDFs are right-continuous).
    #[serde(with = "rational::serde_str")]
    pub bound: Rational,
    /// Points where the sign of the pointwise (FOSD) or cumulative (SOSD)
    /// difference flips.
    #[serde(with = "rational::serde_str_vec")]
    pub crossings: Vec<Rational>,
    pub segments: Vec<Segment>,
    /// FOSD: length-weighted average of `F_q − F_p` over `[0, M]`.
    /// SOSD: `∫₀ᴹ (F_q − F_p)`, i.e. the expected-value difference.
    /// Positive values favour the first lottery.
    #[serde(with = "rational::serde_str")]
    pub net_gap: Rational,
}

pub fn near_dominance_report(p: &Lottery, q: &Lottery, kind: DominanceKind) -> NearDominanceReport {
    match kind {
        DominanceKind::Fosd => near_fosd(p, q),
        DominanceKind::Sosd => near_sosd(p, q),
    }
}

fn sign(r: &Rational) -> i8 {
    if r.is_positive() {
        1
    } else if r.is_negative() {
        -1
    } else {
        0
    }
}

fn near_fosd(p: &Lottery, q: &Lottery) -> NearDominanceReport {
    let pts = evaluation_points(p, q);
    let top = pts[pts.len() - 1].clone();
    // piece i is [pts[i], pts[i+1]) with constant gap F_p − F_q
    let pieces: Vec<(Rational, Rational, Rational)> = pts
        .windows(2)
        .map(|w| {
            let gap = cdf_at(p, &w[0]).value() - cdf_at(q, &w[0]).value();
            (w[0].clone(), w[1].clone(), gap)
        })
        .collect();

    let bound = pieces
        .iter()
        .find(|(_, _, gap)| gap.is_positive())
        .map(|(start, _, _)| start.clone())
        .unwrap_or_else(|| top.clone());

    let mut crossings = Vec::new();
    let mut last_sign = 0i8;
    for (start, _, gap) in &pieces {
        let s = sign(gap);
        if s != 0 {
            if last_sign != 0 && s != last_sign {
                crossings.push(start.clone());
            }
            last_sign = s;
        }
    }

    let mut segments: Vec<Segment> = Vec::new();
    let mut area = Rational::zero();
    for (start, end, gap) in &pieces {
        let favours = match sign(gap) {
            -1 => Some(Side::First),
            1 => Some(Side::Second),
            _ => None,
        };
        let weighted = gap.abs() * (end - start);
        area += -(gap * (end - start));
        match segments.last_mut() {
            Some(seg) if seg.favours == favours => {
                // mean_gap holds the running integral until finalised below
                seg.mean_gap += weighted;
                seg.end = end.clone();
            }
            _ => segments.push(Segment { start: start.clone(), end: end.clone(), favours, mean_gap: weighted }),
        }
    }
    for seg in &mut segments {
        let len = &seg.end - &seg.start;
        seg.mean_gap = &seg.mean_gap / len;
    }
    let net_gap = if top.is_zero() { Rational::zero() } else { area / &top };

    NearDominanceReport { kind: DominanceKind::Fosd, range_top: top, bound, crossings, segments, net_gap }
}

fn near_sosd(p: &Lottery, q: &Lottery) -> NearDominanceReport {
    let pts = evaluation_points(p, q);
    let top = pts[pts.len() - 1].clone();
    let g: Vec<Rational> = pts.iter().map(|x| area_gap(p, q, x)).collect();

    // first point where the cumulative gap turns positive
    let mut bound = top.clone();
    for i in 0..pts.len() - 1 {
        if !g[i].is_positive() && g[i + 1].is_positive() {
            bound = root(&pts[i], &pts[i + 1], &g[i], &g[i + 1]);
            break;
        }
    }

    let mut crossings = Vec::new();
    let mut last: Option<(i8, usize)> = None;
    for i in 0..pts.len() {
        let s = sign(&g[i]);
        if s == 0 {
            continue;
        }
        if let Some((ls, li)) = last {
            if ls != s {
                let x = if li + 1 == i {
                    root(&pts[li], &pts[i], &g[li], &g[i])
                } else {
                    // G touched zero at pts[li+1..i]; it leaves zero after the last of them
                    pts[i - 1].clone()
                };
                crossings.push(x);
            }
        }
        last = Some((s, i));
    }

    NearDominanceReport {
        kind: DominanceKind::Sosd,
        range_top: top,
        bound,
        crossings,
        segments: Vec::new(),
        net_gap: -g[g.len() - 1].clone(),
    }
}

/// Zero of the line through `(x0, g0)` and `(x1, g1)`.
fn root(x0: &Rational, x1: &Rational, g0: &Rational, g1: &Rational) -> Rational {
    if g0.is_zero() {
        return x0.clone();
    }
    x0 + (x1 - x0) * (-g0) / (g1 - g0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn lot(id: &str, atoms: &[(u32, i64, i64)]) -> Lottery {
        Lottery::from_ints(id, atoms).unwrap()
    }

    fn a1() -> Lottery {
        lot("A1", &[(0, 10, 100), (10, 60, 100), (20, 30, 100)])
    }
    fn a2() -> Lottery {
        lot("A2", &[(0, 20, 100), (10, 50, 100), (20, 30, 100)])
    }
    fn b1() -> Lottery {
        lot("B1", &[(0, 25, 100), (10, 30, 100), (20, 45, 100)])
    }
    fn b2() -> Lottery {
        lot("B2", &[(0, 25, 100), (9, 40, 100), (24, 35, 100)])
    }
    fn c2() -> Lottery {
        lot("C2", &[(0, 625, 1000), (9, 200, 1000), (24, 175, 1000)])
    }
    fn d() -> Lottery {
        lot("D", &[(0, 15, 100), (10, 50, 100), (20, 35, 100)])
    }

    #[test]
    fn fosd_pairs() {
        assert_eq!(check_fosd(&a1(), &a2()).dominant(), Some(Side::First));
        assert_eq!(check_fosd(&d(), &a2()).dominant(), Some(Side::First));
        assert_eq!(check_fosd(&a2(), &a1()).dominant(), Some(Side::Second));
        assert_eq!(check_fosd(&a1(), &a1()), DominanceRelation::None);
        assert_eq!(check_fosd(&a1(), &d()), DominanceRelation::None);
    }

    #[test]
    fn sosd_pairs() {
        assert_eq!(check_sosd(&a1(), &d()).dominant_id(&a1(), &d()), Some("A1"));
        assert_eq!(check_sosd(&d(), &b1()).dominant_id(&d(), &b1()), Some("D"));
        // exact integration: B1 dominates B2 (the area gap is ≤ 0 on [0, 24])
        assert_eq!(check_sosd(&b1(), &b2()).dominant(), Some(Side::First));
        assert_eq!(check_sosd(&b1(), &b1()), DominanceRelation::None);
    }

    #[test]
    fn near_fosd_a1_c2_matches_hand_computation() {
        let r = near_dominance_report(&a1(), &c2(), DominanceKind::Fosd);
        assert_eq!(r.bound, int(20));
        assert_eq!(r.crossings, vec![int(20)]);
        assert_eq!(r.segments.len(), 2);
        assert_eq!(r.segments[0].favours, Some(Side::First));
        assert_eq!(r.segments[0].mean_gap, ratio(335, 1000));
        assert_eq!(r.segments[1].favours, Some(Side::Second));
        assert_eq!(r.segments[1].mean_gap, ratio(175, 1000));
        assert_eq!(r.net_gap, ratio(1, 4));
    }

    #[test]
    fn near_sosd_identical_is_full_range() {
        let r = near_dominance_report(&b2(), &b2(), DominanceKind::Sosd);
        assert_eq!(r.bound, int(24));
        assert!(r.crossings.is_empty());
        assert!(r.net_gap.is_zero());
    }

    #[test]
    fn near_sosd_locates_exact_crossing() {
        // G(x) = ∫(F_p − F_q) is −x/2 on [0,1] and rises by x on [1,3]
        let p = lot("P", &[(1, 1, 1)]);
        let q = lot("Q", &[(0, 1, 2), (3, 1, 2)]);
        // F_p − F_q: [0,1): −1/2, [1,3): +1/2  → G(1) = −1/2, G(3) = 1/2
        let r = near_dominance_report(&p, &q, DominanceKind::Sosd);
        assert_eq!(r.bound, int(2));
        assert_eq!(r.crossings, vec![int(2)]);
        assert_eq!(r.net_gap, ratio(-1, 2));
    }
}
