//! Houtman-Maks distance: the fewest menus whose choices must be discarded
//! for the rest to be explained by maximising one preference order.
//!
//! Scoring is an exhaustive scan over a precomputed table holding, for each
//! order and menu, the bitmask the order would select.

use serde::Serialize;

use crate::axioms::DeferralPolicy;
use crate::choice::Correspondence;
use crate::design::{ExperimentDesign, MenuIdx};
use crate::orders::{enumerate_linear_orders, enumerate_weak_orders, EnumerationGuard, LinearOrder, WeakOrder};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum HmMode {
    /// Linear orders; a menu is consistent when the single chosen lottery is
    /// the order's maximum.
    Strict,
    /// Weak orders; the choice set must equal the order's full maximal class.
    Weak,
}

/// Selection table for one mode over a fixed menu collection.
pub struct HmTable {
    mode: HmMode,
    n: usize,
    menus: usize,
    /// Rank vector (weak) or permutation (strict) per order.
    orders: Vec<Vec<u8>>,
    /// `selected[o * menus + m]`
    selected: Vec<u16>,
}

impl HmTable {
    pub fn new(mode: HmMode, n: usize, menu_masks: &[u16]) -> Result<Self, EnumerationGuard> {
        let orders: Vec<Vec<u8>> = match mode {
            HmMode::Strict => enumerate_linear_orders(n)?.map(|o| o.0.into_iter().map(|l| l as u8).collect()).collect(),
            HmMode::Weak => {
                let mut all: Vec<WeakOrder> = enumerate_weak_orders(n)?.collect();
                all.sort_by_cached_key(WeakOrder::classes);
                all.into_iter().map(|w| w.ranks().to_vec()).collect()
            }
        };
        let mut selected = Vec::with_capacity(orders.len() * menu_masks.len());
        for o in &orders {
            match mode {
                HmMode::Strict => {
                    let order = LinearOrder(o.iter().map(|&l| l as usize).collect());
                    selected.extend(menu_masks.iter().map(|&m| order.max_of(m).map_or(0, |l| 1u16 << l)));
                }
                HmMode::Weak => {
                    let order = WeakOrder::from_ranks(o.clone());
                    selected.extend(menu_masks.iter().map(|&m| order.max_set(m)));
                }
            }
        }
        Ok(HmTable { mode, n, menus: menu_masks.len(), orders, selected })
    }

    pub fn for_design(design: &ExperimentDesign, mode: HmMode) -> Result<Self, EnumerationGuard> {
        let masks: Vec<u16> = design.menus.iter().map(|m| m.mask).collect();
        HmTable::new(mode, design.lotteries.len(), &masks)
    }

    pub fn mode(&self) -> HmMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.orders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orders.is_empty()
    }

    /// Order `o` as indifference classes, best first.
    pub fn order_classes(&self, o: usize) -> Vec<Vec<usize>> {
        match self.mode {
            HmMode::Strict => self.orders[o].iter().map(|&l| vec![l as usize]).collect(),
            HmMode::Weak => WeakOrder::from_ranks(self.orders[o].clone()).classes(),
        }
    }

    pub fn order_label(&self, o: usize, ids: &[&str]) -> String {
        self.order_classes(o)
            .iter()
            .map(|c| c.iter().map(|&l| ids[l]).collect::<Vec<_>>().join("~"))
            .collect::<Vec<_>>()
            .join(" > ")
    }

    fn row(&self, o: usize) -> &[u16] {
        &self.selected[o * self.menus..(o + 1) * self.menus]
    }

    fn evaluated(&self, c: &Correspondence, policy: DeferralPolicy) -> Vec<MenuIdx> {
        assert_eq!(c.values.len(), self.menus, "correspondence does not match the table's menus");
        (0..self.menus).filter(|&m| policy == DeferralPolicy::Strict || !c.is_empty_at(m)).collect()
    }

    /// Minimum mistake count only, with early exit per order.
    pub fn score(&self, c: &Correspondence, policy: DeferralPolicy) -> usize {
        let menus = self.evaluated(c, policy);
        let mut best = menus.len();
        for o in 0..self.orders.len() {
            let row = self.row(o);
            let mut k = 0;
            for &m in &menus {
                if row[m] != c.values[m] {
                    k += 1;
                    if k >= best {
                        break;
                    }
                }
            }
            if k < best {
                best = k;
                if best == 0 {
                    break;
                }
            }
        }
        best
    }

    /// Full result with every minimising order.
    pub fn evaluate(&self, c: &Correspondence, policy: DeferralPolicy) -> HmResult {
        let menus = self.evaluated(c, policy);
        let mut best = usize::MAX;
        let mut witnesses = Vec::new();
        for o in 0..self.orders.len() {
            let row = self.row(o);
            let k = menus.iter().filter(|&&m| row[m] != c.values[m]).count();
            if k < best {
                best = k;
                witnesses.clear();
            }
            if k == best {
                witnesses.push(o as u32);
            }
        }
        let canonical = witnesses[0] as usize;
        let row = self.row(canonical);
        let mistakes = (0..self.menus).filter(|&m| menus.contains(&m) && row[m] != c.values[m]).collect();
        HmResult { score: best, evaluated: menus.len(), mode: self.mode, policy, witnesses, canonical, mistakes }
    }

    pub fn alternatives(&self) -> usize {
        self.n
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HmResult {
    pub score: usize,
    /// Menus taking part in the evaluation.
    pub evaluated: usize,
    pub mode: HmMode,
    pub policy: DeferralPolicy,
    /// Indices into the table of every minimising order, in table order.
    pub witnesses: Vec<u32>,
    /// First minimiser; table order is lexicographic in the class listing.
    pub canonical: usize,
    /// Mistaken menus under the canonical witness.
    pub mistakes: Vec<MenuIdx>,
}
