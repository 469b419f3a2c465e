//! Strict and weak preference orders over a small set of alternatives.

use std::fmt;

use itertools::Itertools;
use thiserror::Error;

use crate::design::LotteryIdx;

/// Largest alternative count accepted by the exhaustive enumerators.
pub const MAX_ENUMERATED: usize = 9;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("order enumeration supports 1..={MAX_ENUMERATED} alternatives, got {0}")]
pub struct EnumerationGuard(pub usize);

fn guard(n: usize) -> Result<(), EnumerationGuard> {
    if (1..=MAX_ENUMERATED).contains(&n) {
        Ok(())
    } else {
        Err(EnumerationGuard(n))
    }
}

/// Permutation of alternatives, best first.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinearOrder(pub Vec<LotteryIdx>);

impl LinearOrder {
    /// Best member of `mask` under this order.
    pub fn max_of(&self, mask: u16) -> Option<LotteryIdx> {
        self.0.iter().copied().find(|&l| mask & (1 << l) != 0)
    }

    pub fn to_weak(&self) -> WeakOrder {
        WeakOrder::from_classes(self.0.iter().map(|&l| vec![l]).collect())
    }
}

/// Ordered partition into indifference classes, best class first. Stored as
/// a rank per alternative (0 = best class).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct WeakOrder {
    ranks: Vec<u8>,
}

impl WeakOrder {
    pub fn from_ranks(ranks: Vec<u8>) -> Self {
        WeakOrder { ranks }
    }

    /// Builds from classes; panics on an empty class or a repeated member.
    pub fn from_classes(classes: Vec<Vec<LotteryIdx>>) -> Self {
        let n: usize = classes.iter().map(Vec::len).sum();
        let mut ranks = vec![u8::MAX; n];
        for (r, class) in classes.iter().enumerate() {
            assert!(!class.is_empty(), "empty indifference class");
            for &l in class {
                assert_eq!(ranks[l], u8::MAX, "alternative {l} listed twice");
                ranks[l] = r as u8;
            }
        }
        WeakOrder { ranks }
    }

    pub fn ranks(&self) -> &[u8] {
        &self.ranks
    }

    pub fn classes(&self) -> Vec<Vec<LotteryIdx>> {
        let k = self.ranks.iter().map(|&r| r as usize + 1).max().unwrap_or(0);
        let mut out = vec![Vec::new(); k];
        for (l, &r) in self.ranks.iter().enumerate() {
            out[r as usize].push(l);
        }
        out
    }

    /// Maximal class of `mask` as a bitmask (empty for an empty mask).
    pub fn max_set(&self, mask: u16) -> u16 {
        let best = self.ranks.iter().enumerate().filter(|(l, _)| mask & (1 << l) != 0).map(|(_, &r)| r).min();
        match best {
            None => 0,
            Some(b) => self
                .ranks
                .iter()
                .enumerate()
                .filter(|&(l, &r)| r == b && mask & (1 << l) != 0)
                .fold(0, |m, (l, _)| m | (1 << l)),
        }
    }
}

impl fmt::Display for WeakOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let classes = self.classes();
        for (i, c) in classes.iter().enumerate() {
            if i > 0 {
                f.write_str(" > ")?;
            }
            write!(f, "{{{}}}", c.iter().join(","))?;
        }
        Ok(())
    }
}

/// All `n!` linear orders in lexicographic order.
pub fn enumerate_linear_orders(n: usize) -> Result<impl Iterator<Item = LinearOrder>, EnumerationGuard> {
    guard(n)?;
    Ok((0..n).permutations(n).map(LinearOrder))
}

/// All ordered set partitions of `n` alternatives, lazily. Each set
/// partition (as a restricted growth string) is emitted under every
/// ordering of its blocks.
pub fn enumerate_weak_orders(n: usize) -> Result<WeakOrders, EnumerationGuard> {
    guard(n)?;
    Ok(WeakOrders { rgs: vec![0; n], perm: vec![0], done: false })
}

pub struct WeakOrders {
    rgs: Vec<u8>,
    perm: Vec<u8>,
    done: bool,
}

impl WeakOrders {
    fn blocks(&self) -> usize {
        self.rgs.iter().copied().max().map_or(0, |m| m as usize + 1)
    }

    fn advance_rgs(&mut self) -> bool {
        let n = self.rgs.len();
        for i in (1..n).rev() {
            let prefix_max = self.rgs[..i].iter().copied().max().unwrap_or(0);
            if self.rgs[i] <= prefix_max {
                self.rgs[i] += 1;
                for v in &mut self.rgs[i + 1..] {
                    *v = 0;
                }
                return true;
            }
        }
        false
    }
}

fn next_permutation(v: &mut [u8]) -> bool {
    let Some(i) = (1..v.len()).rev().find(|&i| v[i - 1] < v[i]) else {
        return false;
    };
    let j = (i..v.len()).rev().find(|&j| v[j] > v[i - 1]).expect("successor exists");
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

impl Iterator for WeakOrders {
    type Item = WeakOrder;

    fn next(&mut self) -> Option<WeakOrder> {
        if self.done {
            return None;
        }
        let ranks = self.rgs.iter().map(|&b| self.perm[b as usize]).collect();
        if !next_permutation(&mut self.perm) {
            if self.advance_rgs() {
                self.perm = (0..self.blocks() as u8).collect();
            } else {
                self.done = true;
            }
        }
        Some(WeakOrder { ranks })
    }
}

/// Ordered Bell (Fubini) number via `a(n) = Σ_k C(n,k) a(n−k)`.
pub fn ordered_bell(n: usize) -> u64 {
    let mut a = vec![1u64; n + 1];
    for m in 1..=n {
        let mut binom = 1u64;
        let mut s = 0u64;
        for k in 1..=m {
            binom = binom * (m - k + 1) as u64 / k as u64;
            s += binom * a[m - k];
        }
        a[m] = s;
    }
    a[n]
}
