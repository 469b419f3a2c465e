//! Money lotteries with exact probabilities.

use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::{self, Rational};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LotteryError {
    #[error("lottery `{0}` has an empty support")]
    EmptySupport(String),
    #[error("lottery `{id}`: negative prize {prize}")]
    NegativePrize { id: String, prize: String },
    #[error("lottery `{id}`: probability {mass} outside [0, 1]")]
    BadMass { id: String, mass: String },
    #[error("lottery `{id}`: prize {prize} listed twice")]
    DuplicatePrize { id: String, prize: String },
    #[error("lottery `{id}`: masses sum to {sum}, not 1")]
    MassSum { id: String, sum: String },
    #[error("mixing weight {0} outside (0, 1)")]
    MixWeight(String),
}

/// Non-negative amount of money.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Money(#[serde(with = "rational::serde_str")] Rational);

impl Money {
    pub fn new(amount: Rational) -> Option<Self> {
        (!amount.is_negative()).then_some(Money(amount))
    }

    pub fn from_int(amount: u32) -> Self {
        Money(rational::int(i64::from(amount)))
    }

    pub fn amount(&self) -> &Rational {
        &self.0
    }

    pub fn into_inner(self) -> Rational {
        self.0
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&rational::format(&self.0))
    }
}

/// Exact probability in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Probability(#[serde(with = "rational::serde_str")] Rational);

impl Probability {
    pub fn new(value: Rational) -> Option<Self> {
        (!value.is_negative() && value <= Rational::one()).then_some(Probability(value))
    }

    pub fn ratio(num: i64, den: i64) -> Option<Self> {
        if den == 0 {
            return None;
        }
        Self::new(rational::ratio(num, den))
    }

    pub fn value(&self) -> &Rational {
        &self.0
    }
}

impl fmt::Display for Probability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&rational::format(&self.0))
    }
}

/// One support point of a lottery.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Atom {
    pub prize: Money,
    pub mass: Probability,
}

/// A finite money lottery. The support is sorted by prize, every mass is
/// strictly positive and the masses sum to exactly one.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Lottery {
    id: String,
    support: Vec<Atom>,
}

impl Lottery {
    /// Builds a lottery from unsorted `(prize, mass)` pairs. Zero masses are
    /// dropped; repeated prizes are rejected.
    pub fn new(
        id: impl Into<String>,
        atoms: impl IntoIterator<Item = (Rational, Rational)>,
    ) -> Result<Self, LotteryError> {
        let id = id.into();
        let mut support = Vec::new();
        for (prize, mass) in atoms {
            let prize = Money::new(prize.clone())
                .ok_or_else(|| LotteryError::NegativePrize { id: id.clone(), prize: rational::format(&prize) })?;
            let mass_p = Probability::new(mass.clone())
                .ok_or_else(|| LotteryError::BadMass { id: id.clone(), mass: rational::format(&mass) })?;
            if mass.is_zero() {
                continue;
            }
            support.push(Atom { prize, mass: mass_p });
        }
        support.sort_by(|a, b| a.prize.cmp(&b.prize));
        if let Some(w) = support.windows(2).find(|w| w[0].prize == w[1].prize) {
            return Err(LotteryError::DuplicatePrize { id, prize: w[0].prize.to_string() });
        }
        if support.is_empty() {
            return Err(LotteryError::EmptySupport(id));
        }
        let sum: Rational = support.iter().map(|a| a.mass.value()).sum();
        if !sum.is_one() {
            return Err(LotteryError::MassSum { id, sum: rational::format(&sum) });
        }
        Ok(Lottery { id, support })
    }

    /// Convenience constructor over integer prizes and `num/den` masses.
    pub fn from_ints(id: &str, atoms: &[(u32, i64, i64)]) -> Result<Self, LotteryError> {
        Lottery::new(id, atoms.iter().map(|&(z, n, d)| (rational::int(i64::from(z)), rational::ratio(n, d))))
    }

    /// Point mass at `prize`.
    pub fn degenerate(id: &str, prize: Rational) -> Result<Self, LotteryError> {
        Lottery::new(id, [(prize, rational::one())])
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn support(&self) -> &[Atom] {
        &self.support
    }

    pub fn low(&self) -> &Money {
        &self.support[0].prize
    }

    pub fn high(&self) -> &Money {
        &self.support[self.support.len() - 1].prize
    }

    /// Mass at exactly `prize` (zero off the support).
    pub fn mass_at(&self, prize: &Rational) -> Rational {
        self.support
            .iter()
            .find(|a| a.prize.amount() == prize)
            .map(|a| a.mass.value().clone())
            .unwrap_or_else(Rational::zero)
    }

    /// Same distribution, ignoring the identifier.
    pub fn same_distribution(&self, other: &Lottery) -> bool {
        self.support == other.support
    }
}

impl fmt::Display for Lottery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}=(", self.id)?;
        for (i, a) in self.support.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}:{}", a.prize, a.mass)?;
        }
        f.write_str(")")
    }
}

pub fn expected_value(p: &Lottery) -> Money {
    let ev: Rational = p.support.iter().map(|a| a.prize.amount() * a.mass.value()).sum();
    Money(ev)
}

/// Right-continuous distribution function `F_p(x)`.
pub fn cdf_at(p: &Lottery, x: &Rational) -> Probability {
    let f: Rational = p.support.iter().take_while(|a| a.prize.amount() <= x).map(|a| a.mass.value()).sum();
    Probability(f)
}

/// `∫₀ˣ F_p(t) dt`, which for a step function equals `Σ mass · (x − prize)⁺`.
pub fn cdf_area_at(p: &Lottery, x: &Rational) -> Rational {
    p.support.iter().filter(|a| a.prize.amount() < x).map(|a| (x - a.prize.amount()) * a.mass.value()).sum()
}

/// The compound lottery `alpha·p + (1 − alpha)·q`. The result carries the id
/// `mix(alpha,p,q)`; callers usually rename it.
pub fn mix(alpha: &Probability, p: &Lottery, q: &Lottery) -> Result<Lottery, LotteryError> {
    let a = alpha.value();
    if a.is_zero() || a.is_one() {
        return Err(LotteryError::MixWeight(alpha.to_string()));
    }
    let b = Rational::one() - a;
    let atoms = union_prizes(p, q)
        .into_iter()
        .map(|z| {
            let m = a * p.mass_at(&z) + &b * q.mass_at(&z);
            (z, m)
        })
        .collect::<Vec<_>>();
    Lottery::new(format!("mix({alpha},{},{})", p.id, q.id), atoms)
}

/// True when `[p_l, p_h] ∩ [q_l, q_h]` is an interval of positive length.
pub fn overlapping_range(p: &Lottery, q: &Lottery) -> bool {
    let lo = p.low().max(q.low());
    let hi = p.high().min(q.high());
    lo < hi
}

/// Sorted union of both supports' prizes.
pub fn union_prizes(p: &Lottery, q: &Lottery) -> Vec<Rational> {
    let mut z: Vec<Rational> = p.support.iter().chain(q.support.iter()).map(|a| a.prize.amount().clone()).collect();
    z.sort();
    z.dedup();
    z
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn a1() -> Lottery {
        Lottery::from_ints("A1", &[(0, 10, 100), (10, 60, 100), (20, 30, 100)]).unwrap()
    }

    fn c2() -> Lottery {
        Lottery::from_ints("C2", &[(0, 625, 1000), (9, 200, 1000), (24, 175, 1000)]).unwrap()
    }

    #[test]
    fn expected_values() {
        assert_eq!(expected_value(&a1()).amount(), &int(12));
        assert_eq!(expected_value(&c2()).amount(), &int(6));
        let point = Lottery::degenerate("P", int(5)).unwrap();
        assert_eq!(expected_value(&point).amount(), &int(5));
    }

    #[test]
    fn cdf_values() {
        assert_eq!(cdf_at(&a1(), &ratio(19, 2)).value(), &ratio(1, 10));
        assert_eq!(cdf_at(&c2(), &int(9)).value(), &ratio(825, 1000));
        assert_eq!(cdf_at(&c2(), &int(24)).value(), &int(1));
        assert_eq!(cdf_at(&c2(), &ratio(-1, 2)).value(), &int(0));
    }

    #[test]
    fn area_values() {
        assert_eq!(cdf_area_at(&a1(), &int(12)), ratio(12, 5));
        let b2 = Lottery::from_ints("B2", &[(0, 25, 100), (9, 40, 100), (24, 35, 100)]).unwrap();
        assert_eq!(cdf_area_at(&b2, &int(10)), ratio(29, 10));
        assert_eq!(cdf_area_at(&b2, &int(24)), int(12));
    }

    #[test]
    fn rejects_invalid_lotteries() {
        assert!(matches!(Lottery::from_ints("X", &[(0, 1, 2), (1, 1, 3)]), Err(LotteryError::MassSum { .. })));
        assert!(matches!(Lottery::from_ints("X", &[]), Err(LotteryError::EmptySupport(_))));
        assert!(matches!(Lottery::from_ints("X", &[(3, 1, 2), (3, 1, 2)]), Err(LotteryError::DuplicatePrize { .. })));
        assert!(matches!(Lottery::new("X", [(int(-1), int(1))]), Err(LotteryError::NegativePrize { .. })));
    }

    #[test]
    fn zero_masses_are_dropped_and_support_sorted() {
        let p = Lottery::from_ints("X", &[(20, 1, 2), (5, 0, 1), (0, 1, 2)]).unwrap();
        assert_eq!(p.support().len(), 2);
        assert_eq!(p.low().amount(), &int(0));
        assert_eq!(p.high().amount(), &int(20));
    }

    #[test]
    fn mixing_is_idempotent_and_rejects_endpoints() {
        let half = Probability::ratio(1, 2).unwrap();
        assert!(mix(&half, &a1(), &a1()).unwrap().same_distribution(&a1()));
        let one = Probability::ratio(1, 1).unwrap();
        assert!(mix(&one, &a1(), &c2()).is_err());
    }

    #[test]
    fn overlap_requires_positive_length() {
        let p = Lottery::from_ints("P", &[(0, 1, 2), (1, 1, 2)]).unwrap();
        let q = Lottery::from_ints("Q", &[(1, 1, 2), (2, 1, 2)]).unwrap();
        assert!(!overlapping_range(&p, &q));
        assert!(overlapping_range(&a1(), &c2()));
    }
}
