//! Experiment design: lotteries, menus, the declared dominance taxonomy and
//! the axiom fixtures (transitivity triples, mixture pairs, nested menus).

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dominance::{check_fosd, check_sosd, DominanceRelation, Side};
use crate::lottery::{mix, overlapping_range, Lottery, LotteryError, Probability};
use crate::rational::{self, Rational};

/// Lottery ids index into [`ExperimentDesign::lotteries`]; menus are stored as
/// bitmasks over those indices.
pub const MAX_LOTTERIES: usize = 16;

pub type LotteryIdx = usize;
pub type MenuIdx = usize;

#[derive(Debug, Error)]
pub enum DesignError {
    #[error("{file}:{line}: {message}")]
    Parse { file: String, line: u64, message: String },
    #[error("{0}: {1}")]
    Io(PathBuf, std::io::Error),
    #[error("fixtures: {0}")]
    Toml(String),
    #[error(transparent)]
    Lottery(#[from] LotteryError),
    #[error("{context}: unknown lottery `{id}`")]
    UnknownLottery { context: String, id: String },
    #[error("{context}: unknown menu `{id}`")]
    UnknownMenu { context: String, id: String },
    #[error("duplicate lottery `{0}`")]
    DuplicateLottery(String),
    #[error("duplicate menu `{0}`")]
    DuplicateMenu(String),
    #[error("menu `{0}` lists a lottery twice")]
    RepeatedMember(String),
    #[error("menu `{0}` is empty")]
    EmptyMenu(String),
    #[error("{context}: menu `{menu}` is not binary")]
    NotBinary { context: String, menu: String },
    #[error("triple {lotteries:?}: {message}")]
    Triple { lotteries: Vec<String>, message: String },
    #[error("independence pair {base}/{mixed}: {message}")]
    Mixture { base: String, mixed: String, message: String },
    #[error("menu `{menu}`: lotteries {p} and {q} do not have an overlapping range")]
    NoOverlap { menu: String, p: String, q: String },
    #[error("menu `{menu}`: dominant lottery `{lottery}` is not on the menu")]
    DominantNotInMenu { menu: String, lottery: String },
    #[error("design has {0} lotteries; at most {MAX_LOTTERIES} are supported")]
    TooManyLotteries(usize),
    #[error("nested pair {smaller} ⊂ {larger} is not a proper inclusion")]
    NotNested { smaller: String, larger: String },
    #[error("rounds_expected must be at least 1")]
    NoRounds,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Menu {
    pub id: String,
    pub members: Vec<LotteryIdx>,
    #[serde(skip)]
    pub mask: u16,
}

impl Menu {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, l: LotteryIdx) -> bool {
        self.mask & (1 << l) != 0
    }

    pub fn is_binary(&self) -> bool {
        self.members.len() == 2
    }
}

/// A dominance label as printed in the design table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "relation", rename_all = "kebab-case")]
pub enum DeclaredLabel {
    /// Binary menu whose `dominant` lottery first-order dominates the other.
    Fosd {
        dominant: String,
    },
    /// Binary menu whose `dominant` lottery second-order dominates the other.
    Sosd {
        dominant: String,
    },
    /// No dominance between the menu's lotteries.
    None,
    /// A lottery first-order dominating every other lottery of a larger menu.
    FosdDominant {
        dominant: String,
    },
    NearlyFosdDominant {
        dominant: String,
    },
    NearlySosdDominant {
        dominant: String,
    },
}

impl DeclaredLabel {
    pub fn dominant(&self) -> Option<&str> {
        match self {
            DeclaredLabel::None => None,
            DeclaredLabel::Fosd { dominant }
            | DeclaredLabel::Sosd { dominant }
            | DeclaredLabel::FosdDominant { dominant }
            | DeclaredLabel::NearlyFosdDominant { dominant }
            | DeclaredLabel::NearlySosdDominant { dominant } => Some(dominant),
        }
    }
}

impl fmt::Display for DeclaredLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeclaredLabel::Fosd { dominant } => write!(f, "{dominant} FOSD"),
            DeclaredLabel::Sosd { dominant } => write!(f, "{dominant} SOSD"),
            DeclaredLabel::None => f.write_str("no dominance"),
            DeclaredLabel::FosdDominant { dominant } => write!(f, "{dominant} FOSD-dominant"),
            DeclaredLabel::NearlyFosdDominant { dominant } => {
                write!(f, "{dominant} nearly FOSD-dominant")
            }
            DeclaredLabel::NearlySosdDominant { dominant } => {
                write!(f, "{dominant} nearly SOSD-dominant")
            }
        }
    }
}

/// Three lotteries and the three binary menus pairing them.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Triple {
    pub lotteries: [LotteryIdx; 3],
    pub menus: [MenuIdx; 3],
}

/// A base binary menu `{p, q}` and the mixed menu
/// `{alpha·p + (1−alpha)·r, alpha·q + (1−alpha)·r}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IndependencePair {
    pub base_menu: MenuIdx,
    pub mixed_menu: MenuIdx,
    pub alpha: Probability,
    pub mixing: Lottery,
    /// `(base lottery, its mixture in the mixed menu)`, in base-menu order.
    pub images: [(LotteryIdx, LotteryIdx); 2],
}

/// Binary menu whose lotteries are ranked by dominance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RankedPair {
    pub menu: MenuIdx,
    pub dominant: LotteryIdx,
    pub dominated: LotteryIdx,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Taxonomy {
    /// Dominance labels as declared in the design.
    #[default]
    Declared,
    /// Dominance relations recomputed with exact arithmetic.
    Computed,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ExperimentDesign {
    pub lotteries: Vec<Lottery>,
    pub menus: Vec<Menu>,
    pub declared: Vec<Option<DeclaredLabel>>,
    pub triples: Vec<Triple>,
    pub independence: Vec<IndependencePair>,
    /// `(smaller, larger)` menu pairs with `smaller ⊂ larger`.
    pub nested: Vec<(MenuIdx, MenuIdx)>,
    pub rounds_expected: usize,
    /// Menu order of the fixed first and last rounds.
    pub presentation_order: Vec<MenuIdx>,
    #[serde(skip)]
    lottery_index: BTreeMap<String, LotteryIdx>,
    #[serde(skip)]
    menu_index: BTreeMap<String, MenuIdx>,
    #[serde(skip)]
    mask_index: BTreeMap<u16, MenuIdx>,
}

/// Raw design parts, validated by [`ExperimentDesign::build`].
#[derive(Clone, Debug, Default)]
pub struct DesignSpec {
    pub lotteries: Vec<Lottery>,
    pub menus: Vec<(String, Vec<String>)>,
    pub fixtures: Fixtures,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fixtures {
    #[serde(default = "default_rounds")]
    pub rounds_expected: usize,
    #[serde(default)]
    pub presentation_order: Vec<String>,
    #[serde(default)]
    pub declared: Vec<DeclaredFixture>,
    #[serde(default, rename = "triple")]
    pub triples: Vec<TripleFixture>,
    #[serde(default)]
    pub independence: Vec<IndependenceFixture>,
    /// Explicit nested pairs; every proper inclusion is used when absent.
    #[serde(default)]
    pub nested: Option<Vec<NestedFixture>>,
}

fn default_rounds() -> usize {
    5
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DeclaredFixture {
    pub menu: String,
    #[serde(flatten)]
    pub label: DeclaredLabel,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripleFixture {
    pub lotteries: [String; 3],
    pub menus: [String; 3],
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndependenceFixture {
    pub base_menu: String,
    pub mixed_menu: String,
    pub alpha: String,
    /// `[prize, mass]` pairs of the common mixing lottery.
    pub mixing_lottery: Vec<[String; 2]>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NestedFixture {
    pub smaller: String,
    pub larger: String,
}

impl ExperimentDesign {
    pub fn build(spec: DesignSpec) -> Result<Self, DesignError> {
        let DesignSpec { lotteries, menus: raw_menus, fixtures } = spec;
        if lotteries.len() > MAX_LOTTERIES {
            return Err(DesignError::TooManyLotteries(lotteries.len()));
        }
        if fixtures.rounds_expected == 0 {
            return Err(DesignError::NoRounds);
        }
        let mut lottery_index = BTreeMap::new();
        for (i, l) in lotteries.iter().enumerate() {
            if lottery_index.insert(l.id().to_string(), i).is_some() {
                return Err(DesignError::DuplicateLottery(l.id().to_string()));
            }
        }

        let mut menus = Vec::new();
        let mut menu_index = BTreeMap::new();
        let mut mask_index = BTreeMap::new();
        for (id, members) in raw_menus {
            if menu_index.contains_key(&id) {
                return Err(DesignError::DuplicateMenu(id));
            }
            let mut idx = Vec::new();
            for m in &members {
                let i = *lottery_index
                    .get(m)
                    .ok_or_else(|| DesignError::UnknownLottery { context: format!("menu `{id}`"), id: m.clone() })?;
                idx.push(i);
            }
            idx.sort_unstable();
            if idx.windows(2).any(|w| w[0] == w[1]) {
                return Err(DesignError::RepeatedMember(id));
            }
            if idx.is_empty() {
                return Err(DesignError::EmptyMenu(id));
            }
            let mask = idx.iter().fold(0u16, |m, &i| m | (1 << i));
            if mask_index.insert(mask, menus.len()).is_some() {
                return Err(DesignError::DuplicateMenu(id));
            }
            menu_index.insert(id.clone(), menus.len());
            menus.push(Menu { id, members: idx, mask });
        }

        let mut design = ExperimentDesign {
            lotteries,
            declared: vec![None; menus.len()],
            menus,
            triples: Vec::new(),
            independence: Vec::new(),
            nested: Vec::new(),
            rounds_expected: fixtures.rounds_expected,
            presentation_order: Vec::new(),
            lottery_index,
            menu_index,
            mask_index,
        };

        design.presentation_order = if fixtures.presentation_order.is_empty() {
            (0..design.menus.len()).collect()
        } else {
            let order = fixtures
                .presentation_order
                .iter()
                .map(|m| design.menu_ref("presentation_order", m))
                .collect::<Result<Vec<_>, _>>()?;
            let mut sorted = order.clone();
            sorted.sort_unstable();
            if sorted != (0..design.menus.len()).collect::<Vec<_>>() {
                return Err(DesignError::Toml("presentation_order must list every menu exactly once".into()));
            }
            order
        };

        for d in &fixtures.declared {
            let m = design.menu_ref("declared taxonomy", &d.menu)?;
            if let Some(dom) = d.label.dominant() {
                let l = design.lottery_ref("declared taxonomy", dom)?;
                if !design.menus[m].contains(l) {
                    return Err(DesignError::DominantNotInMenu { menu: d.menu.clone(), lottery: dom.to_string() });
                }
            }
            if matches!(d.label, DeclaredLabel::Fosd { .. } | DeclaredLabel::Sosd { .. })
                && !design.menus[m].is_binary()
            {
                return Err(DesignError::NotBinary {
                    context: "declared pairwise dominance".into(),
                    menu: d.menu.clone(),
                });
            }
            design.declared[m] = Some(d.label.clone());
        }
        for pair in design.star_pairs(Taxonomy::Declared) {
            let (p, q) = (&design.lotteries[pair.dominant], &design.lotteries[pair.dominated]);
            if !overlapping_range(p, q) {
                return Err(DesignError::NoOverlap {
                    menu: design.menus[pair.menu].id.clone(),
                    p: p.id().to_string(),
                    q: q.id().to_string(),
                });
            }
        }

        for t in &fixtures.triples {
            let triple = design.build_triple(t)?;
            design.triples.push(triple);
        }
        for f in &fixtures.independence {
            let pair = design.build_independence(f)?;
            design.independence.push(pair);
        }

        design.nested = match &fixtures.nested {
            None => design.all_nested_pairs(),
            Some(list) => list
                .iter()
                .map(|n| {
                    let s = design.menu_ref("nested pair", &n.smaller)?;
                    let l = design.menu_ref("nested pair", &n.larger)?;
                    let (sm, lm) = (design.menus[s].mask, design.menus[l].mask);
                    if sm & lm != sm || sm == lm {
                        return Err(DesignError::NotNested { smaller: n.smaller.clone(), larger: n.larger.clone() });
                    }
                    Ok((s, l))
                })
                .collect::<Result<_, _>>()?,
        };
        Ok(design)
    }

    fn build_triple(&self, t: &TripleFixture) -> Result<Triple, DesignError> {
        let names = t.lotteries.to_vec();
        let err = |message: String| DesignError::Triple { lotteries: names.clone(), message };
        let mut lot = [0; 3];
        for (k, id) in t.lotteries.iter().enumerate() {
            lot[k] = self.lottery_ref("triple", id)?;
        }
        if lot[0] == lot[1] || lot[1] == lot[2] || lot[0] == lot[2] {
            return Err(err("lotteries must be distinct".into()));
        }
        let mut menus = [0; 3];
        for (k, id) in t.menus.iter().enumerate() {
            let m = self.menu_ref("triple", id)?;
            if !self.menus[m].is_binary() {
                return Err(DesignError::NotBinary { context: "triple".into(), menu: id.clone() });
            }
            menus[k] = m;
        }
        for (a, b) in [(0, 1), (1, 2), (0, 2)] {
            if self.binary_menu(lot[a], lot[b]).is_none() {
                return Err(err(format!("no binary menu for {{{}, {}}}", t.lotteries[a], t.lotteries[b])));
            }
        }
        let mut listed: Vec<_> = menus.to_vec();
        listed.sort_unstable();
        let mut needed: Vec<_> =
            [(0, 1), (1, 2), (0, 2)].iter().filter_map(|&(a, b)| self.binary_menu(lot[a], lot[b])).collect();
        needed.sort_unstable();
        if listed != needed {
            return Err(err("menus do not match the triple's three pairs".into()));
        }
        Ok(Triple { lotteries: lot, menus })
    }

    fn build_independence(&self, f: &IndependenceFixture) -> Result<IndependencePair, DesignError> {
        let err =
            |message: String| DesignError::Mixture { base: f.base_menu.clone(), mixed: f.mixed_menu.clone(), message };
        let base = self.menu_ref("independence", &f.base_menu)?;
        let mixed = self.menu_ref("independence", &f.mixed_menu)?;
        for (m, id) in [(base, &f.base_menu), (mixed, &f.mixed_menu)] {
            if !self.menus[m].is_binary() {
                return Err(DesignError::NotBinary { context: "independence pair".into(), menu: id.clone() });
            }
        }
        let alpha = rational::parse(&f.alpha)
            .and_then(Probability::new)
            .ok_or_else(|| err(format!("invalid alpha `{}`", f.alpha)))?;
        let atoms = f
            .mixing_lottery
            .iter()
            .map(|[z, m]| {
                let z = rational::parse(z).ok_or_else(|| err(format!("invalid prize `{z}`")))?;
                let m = rational::parse(m).ok_or_else(|| err(format!("invalid mass `{m}`")))?;
                Ok((z, m))
            })
            .collect::<Result<Vec<_>, DesignError>>()?;
        let mixing = Lottery::new("mixing", atoms)?;
        let mut images = [(0, 0); 2];
        for (k, &b) in self.menus[base].members.iter().enumerate() {
            let image = mix(&alpha, &self.lotteries[b], &mixing)?;
            let found = self.menus[mixed]
                .members
                .iter()
                .copied()
                .find(|&c| self.lotteries[c].same_distribution(&image))
                .ok_or_else(|| err(format!("mixture of {} is not on the mixed menu", self.lotteries[b].id())))?;
            images[k] = (b, found);
        }
        if images[0].1 == images[1].1 {
            return Err(err("both base lotteries map to the same mixture".into()));
        }
        Ok(IndependencePair { base_menu: base, mixed_menu: mixed, alpha, mixing, images })
    }

    fn all_nested_pairs(&self) -> Vec<(MenuIdx, MenuIdx)> {
        let mut out = Vec::new();
        for (l, large) in self.menus.iter().enumerate() {
            for (s, small) in self.menus.iter().enumerate() {
                if s != l && small.mask & large.mask == small.mask {
                    out.push((s, l));
                }
            }
        }
        out.sort_by_key(|&(s, l)| (l, s));
        out
    }

    fn lottery_ref(&self, context: &str, id: &str) -> Result<LotteryIdx, DesignError> {
        self.lottery(id).ok_or_else(|| DesignError::UnknownLottery { context: context.to_string(), id: id.to_string() })
    }

    fn menu_ref(&self, context: &str, id: &str) -> Result<MenuIdx, DesignError> {
        self.menu(id).ok_or_else(|| DesignError::UnknownMenu { context: context.to_string(), id: id.to_string() })
    }

    pub fn lottery(&self, id: &str) -> Option<LotteryIdx> {
        self.lottery_index.get(id).copied()
    }

    pub fn menu(&self, id: &str) -> Option<MenuIdx> {
        self.menu_index.get(id).copied()
    }

    pub fn menu_by_mask(&self, mask: u16) -> Option<MenuIdx> {
        self.mask_index.get(&mask).copied()
    }

    pub fn binary_menu(&self, a: LotteryIdx, b: LotteryIdx) -> Option<MenuIdx> {
        self.menu_by_mask((1 << a) | (1 << b))
    }

    pub fn lottery_id(&self, l: LotteryIdx) -> &str {
        self.lotteries[l].id()
    }

    /// `{A1,A2}` style rendering of a menu.
    pub fn menu_label(&self, m: MenuIdx) -> String {
        self.set_label(self.menus[m].mask)
    }

    pub fn set_label(&self, mask: u16) -> String {
        let ids: Vec<&str> =
            (0..self.lotteries.len()).filter(|i| mask & (1 << i) != 0).map(|i| self.lottery_id(i)).collect();
        format!("{{{}}}", ids.join(","))
    }

    pub fn binary_menus(&self) -> impl Iterator<Item = MenuIdx> + '_ {
        (0..self.menus.len()).filter(|&m| self.menus[m].is_binary())
    }

    /// Sorted prize set `Z` over all lotteries.
    pub fn prizes(&self) -> Vec<Rational> {
        let mut z: Vec<Rational> =
            self.lotteries.iter().flat_map(|l| l.support().iter().map(|a| a.prize.amount().clone())).collect();
        z.sort();
        z.dedup();
        z
    }

    /// Binary menus on which the FOSD axiom is tested.
    pub fn fosd_menus(&self, taxonomy: Taxonomy) -> Vec<RankedPair> {
        match taxonomy {
            Taxonomy::Declared => self.declared_pairs(|l| match l {
                DeclaredLabel::Fosd { dominant } => Some(dominant),
                _ => None,
            }),
            Taxonomy::Computed => self.computed_pairs(check_fosd),
        }
    }

    /// Binary menus ranked by second- but not first-order dominance whose
    /// lotteries have overlapping ranges; these drive the StAR test.
    pub fn star_pairs(&self, taxonomy: Taxonomy) -> Vec<RankedPair> {
        match taxonomy {
            Taxonomy::Declared => self.declared_pairs(|l| match l {
                DeclaredLabel::Sosd { dominant } => Some(dominant),
                _ => None,
            }),
            Taxonomy::Computed => self
                .computed_pairs(|p, q| match check_fosd(p, q) {
                    DominanceRelation::None => check_sosd(p, q),
                    _ => DominanceRelation::None,
                })
                .into_iter()
                .filter(|r| overlapping_range(&self.lotteries[r.dominant], &self.lotteries[r.dominated]))
                .collect(),
        }
    }

    fn declared_pairs(&self, pick: impl Fn(&DeclaredLabel) -> Option<&String>) -> Vec<RankedPair> {
        self.binary_menus()
            .filter_map(|m| {
                let dom = pick(self.declared[m].as_ref()?)?;
                let dominant = self.lottery(dom)?;
                let dominated = *self.menus[m].members.iter().find(|&&l| l != dominant)?;
                Some(RankedPair { menu: m, dominant, dominated })
            })
            .collect()
    }

    fn computed_pairs(&self, check: impl Fn(&Lottery, &Lottery) -> DominanceRelation) -> Vec<RankedPair> {
        self.binary_menus()
            .filter_map(|m| {
                let (a, b) = (self.menus[m].members[0], self.menus[m].members[1]);
                let rel = check(&self.lotteries[a], &self.lotteries[b]);
                let (dominant, dominated) = match rel.dominant()? {
                    Side::First => (a, b),
                    Side::Second => (b, a),
                };
                Some(RankedPair { menu: m, dominant, dominated })
            })
            .collect()
    }

    /// Loads `lotteries.csv`, `menus.csv` and `fixtures.toml` from a directory.
    pub fn load_dir(dir: &Path) -> Result<Self, DesignError> {
        Self::load(&dir.join("lotteries.csv"), &dir.join("menus.csv"), &dir.join("fixtures.toml"))
    }

    pub fn load(lotteries: &Path, menus: &Path, fixtures: &Path) -> Result<Self, DesignError> {
        let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| DesignError::Io(p.to_path_buf(), e));
        let lotteries = parse_lotteries_csv(&read(lotteries)?, &lotteries.display().to_string())?;
        let menus = parse_menus_csv(&read(menus)?, &menus.display().to_string())?;
        let fixtures = parse_fixtures(&read(fixtures)?)?;
        ExperimentDesign::build(DesignSpec { lotteries, menus, fixtures })
    }
}

fn csv_error(file: &str, line: u64, message: impl Into<String>) -> DesignError {
    DesignError::Parse { file: file.to_string(), line, message: message.into() }
}

fn csv_rows(text: &str, file: &str, header: &[&str]) -> Result<Vec<(u64, csv::StringRecord)>, DesignError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let found = reader.headers().map_err(|e| csv_error(file, 1, e.to_string()))?.clone();
    let found: Vec<&str> = found.iter().collect();
    if found != header {
        return Err(csv_error(file, 1, format!("expected header {header:?}, found {found:?}")));
    }
    reader
        .records()
        .map(|r| {
            let r = r.map_err(|e| {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                csv_error(file, line, e.to_string())
            })?;
            Ok((r.position().map(|p| p.line()).unwrap_or(0), r))
        })
        .collect()
}

/// `lottery_id, prize, prob_num, prob_den`, one row per support atom.
pub fn parse_lotteries_csv(text: &str, file: &str) -> Result<Vec<Lottery>, DesignError> {
    let rows = csv_rows(text, file, &["lottery_id", "prize", "prob_num", "prob_den"])?;
    let mut order: Vec<String> = Vec::new();
    let mut atoms: BTreeMap<String, Vec<(Rational, Rational)>> = BTreeMap::new();
    for (line, r) in rows {
        let id = r[0].to_string();
        let prize =
            rational::parse(&r[1]).ok_or_else(|| csv_error(file, line, format!("invalid prize `{}`", &r[1])))?;
        let num: i64 = r[2].parse().map_err(|_| csv_error(file, line, format!("invalid prob_num `{}`", &r[2])))?;
        let den: i64 = r[3].parse().map_err(|_| csv_error(file, line, format!("invalid prob_den `{}`", &r[3])))?;
        if den <= 0 || num < 0 {
            return Err(csv_error(file, line, "probability must be num/den with num ≥ 0, den > 0"));
        }
        if !atoms.contains_key(&id) {
            order.push(id.clone());
        }
        atoms.entry(id).or_default().push((prize, rational::ratio(num, den)));
    }
    order
        .into_iter()
        .map(|id| {
            let a = atoms.remove(&id).unwrap_or_default();
            Lottery::new(id, a).map_err(DesignError::from)
        })
        .collect()
}

/// `menu_id, lottery_id`, one row per membership; menus keep first-seen order.
pub fn parse_menus_csv(text: &str, file: &str) -> Result<Vec<(String, Vec<String>)>, DesignError> {
    let rows = csv_rows(text, file, &["menu_id", "lottery_id"])?;
    let mut menus: Vec<(String, Vec<String>)> = Vec::new();
    for (_, r) in rows {
        let (m, l) = (r[0].to_string(), r[1].to_string());
        match menus.iter_mut().find(|(id, _)| *id == m) {
            Some((_, members)) => members.push(l),
            None => menus.push((m, vec![l])),
        }
    }
    Ok(menus)
}

pub fn parse_fixtures(text: &str) -> Result<Fixtures, DesignError> {
    toml::from_str(text).map_err(|e| DesignError::Toml(e.to_string()))
}

/// The built-in 7-lottery, 15-menu design.
pub fn builtin_design() -> ExperimentDesign {
    ExperimentDesign::build(builtin_spec()).expect("built-in design is valid")
}

pub const BUILTIN_LOTTERIES_CSV: &str = include_str!("../../../data/design/lotteries.csv");
pub const BUILTIN_MENUS_CSV: &str = include_str!("../../../data/design/menus.csv");
pub const BUILTIN_FIXTURES_TOML: &str = include_str!("../../../data/design/fixtures.toml");

pub fn builtin_spec() -> DesignSpec {
    let l = |id: &str, atoms: &[(u32, i64, i64)]| Lottery::from_ints(id, atoms).expect("valid lottery");
    let lotteries = vec![
        l("A1", &[(0, 10, 100), (10, 60, 100), (20, 30, 100)]),
        l("A2", &[(0, 20, 100), (10, 50, 100), (20, 30, 100)]),
        l("B1", &[(0, 25, 100), (10, 30, 100), (20, 45, 100)]),
        l("B2", &[(0, 25, 100), (9, 40, 100), (24, 35, 100)]),
        l("C1", &[(0, 625, 1000), (10, 150, 1000), (20, 225, 1000)]),
        l("C2", &[(0, 625, 1000), (9, 200, 1000), (24, 175, 1000)]),
        l("D", &[(0, 15, 100), (10, 50, 100), (20, 35, 100)]),
    ];
    let menu = |id: &str, members: &[&str]| (id.to_string(), members.iter().map(|s| s.to_string()).collect::<Vec<_>>());
    let menus = vec![
        menu("1", &["A1", "A2"]),
        menu("2", &["B1", "B2"]),
        menu("3", &["C1", "C2"]),
        menu("4", &["B1", "D"]),
        menu("5", &["B2", "D"]),
        menu("6", &["A1", "B1"]),
        menu("7", &["A1", "B2"]),
        menu("8", &["A1", "D"]),
        menu("9", &["A2", "D"]),
        menu("10", &["A1", "A2", "C1"]),
        menu("11", &["A1", "A2", "C2"]),
        menu("12", &["A1", "B1", "B2"]),
        menu("13", &["B1", "B2", "D"]),
        menu("14", &["A1", "B1", "B2", "D"]),
        menu("15", &["A1", "A2", "C1", "C2"]),
    ];
    let declared = |m: &str, label: DeclaredLabel| DeclaredFixture { menu: m.into(), label };
    let dom = |s: &str| s.to_string();
    let fixtures = Fixtures {
        rounds_expected: 5,
        presentation_order: Vec::new(),
        declared: vec![
            declared("1", DeclaredLabel::Fosd { dominant: dom("A1") }),
            declared("2", DeclaredLabel::None),
            declared("3", DeclaredLabel::None),
            declared("4", DeclaredLabel::Sosd { dominant: dom("D") }),
            declared("5", DeclaredLabel::None),
            declared("6", DeclaredLabel::Sosd { dominant: dom("A1") }),
            declared("7", DeclaredLabel::None),
            declared("8", DeclaredLabel::Sosd { dominant: dom("A1") }),
            declared("9", DeclaredLabel::Fosd { dominant: dom("D") }),
            declared("10", DeclaredLabel::FosdDominant { dominant: dom("A1") }),
            declared("11", DeclaredLabel::NearlyFosdDominant { dominant: dom("A1") }),
            declared("12", DeclaredLabel::NearlySosdDominant { dominant: dom("A1") }),
            declared("13", DeclaredLabel::NearlySosdDominant { dominant: dom("D") }),
            declared("14", DeclaredLabel::NearlySosdDominant { dominant: dom("A1") }),
            declared("15", DeclaredLabel::NearlyFosdDominant { dominant: dom("A1") }),
        ],
        triples: [
            (["A1", "D", "A2"], ["1", "9", "8"]),
            (["A1", "D", "B2"], ["7", "5", "8"]),
            (["A1", "B1", "B2"], ["7", "2", "6"]),
            (["D", "B2", "B1"], ["2", "5", "4"]),
            (["A1", "D", "B1"], ["6", "4", "8"]),
        ]
        .iter()
        .map(|(l, m)| TripleFixture { lotteries: l.map(str::to_string), menus: m.map(str::to_string) })
        .collect(),
        independence: vec![IndependenceFixture {
            base_menu: "2".into(),
            mixed_menu: "3".into(),
            alpha: "1/2".into(),
            mixing_lottery: vec![["0".into(), "1".into()]],
        }],
        nested: None,
    };
    DesignSpec { lotteries, menus, fixtures }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_shape() {
        let d = builtin_design();
        assert_eq!(d.lotteries.len(), 7);
        assert_eq!(d.menus.len(), 15);
        let sizes: Vec<usize> = [2, 3, 4].iter().map(|&k| d.menus.iter().filter(|m| m.len() == k).count()).collect();
        assert_eq!(sizes, vec![9, 4, 2]);
        assert_eq!(d.triples.len(), 5);
        assert_eq!(d.independence.len(), 1);
        assert_eq!(d.nested.len(), 20);
        assert_eq!(d.rounds_expected, 5);
    }

    #[test]
    fn builtin_files_match_constant() {
        let lot = parse_lotteries_csv(BUILTIN_LOTTERIES_CSV, "lotteries.csv").unwrap();
        let menus = parse_menus_csv(BUILTIN_MENUS_CSV, "menus.csv").unwrap();
        let fixtures = parse_fixtures(BUILTIN_FIXTURES_TOML).unwrap();
        let from_files = ExperimentDesign::build(DesignSpec { lotteries: lot, menus, fixtures }).unwrap();
        assert_eq!(from_files, builtin_design());
    }

    #[test]
    fn declared_fixtures() {
        let d = builtin_design();
        let fosd: Vec<_> = d
            .fosd_menus(Taxonomy::Declared)
            .iter()
            .map(|r| (d.menus[r.menu].id.as_str(), d.lottery_id(r.dominant)))
            .collect();
        assert_eq!(fosd, vec![("1", "A1"), ("9", "D")]);
        let star: Vec<_> = d
            .star_pairs(Taxonomy::Declared)
            .iter()
            .map(|r| (d.menus[r.menu].id.as_str(), d.lottery_id(r.dominant)))
            .collect();
        assert_eq!(star, vec![("4", "D"), ("6", "A1"), ("8", "A1")]);
    }

    #[test]
    fn computed_taxonomy_adds_exact_sosd_pairs() {
        let d = builtin_design();
        assert_eq!(d.fosd_menus(Taxonomy::Computed), d.fosd_menus(Taxonomy::Declared));
        let star: Vec<_> = d
            .star_pairs(Taxonomy::Computed)
            .iter()
            .map(|r| (d.menus[r.menu].id.as_str(), d.lottery_id(r.dominant)))
            .collect();
        assert_eq!(star, vec![("2", "B1"), ("3", "C1"), ("4", "D"), ("5", "D"), ("6", "A1"), ("7", "A1"), ("8", "A1")]);
    }

    #[test]
    fn unknown_lottery_in_menu_is_rejected() {
        let mut spec = builtin_spec();
        spec.menus.push(("16".into(), vec!["A1".into(), "Z9".into()]));
        assert!(matches!(
            ExperimentDesign::build(spec),
            Err(DesignError::UnknownLottery { id, .. }) if id == "Z9"
        ));
    }

    #[test]
    fn duplicate_menu_is_rejected() {
        let mut spec = builtin_spec();
        spec.menus.push(("1".into(), vec!["B1".into(), "C1".into()]));
        assert!(matches!(ExperimentDesign::build(spec), Err(DesignError::DuplicateMenu(_))));
        let mut spec = builtin_spec();
        spec.menus.push(("99".into(), vec!["A2".into(), "A1".into()]));
        assert!(matches!(ExperimentDesign::build(spec), Err(DesignError::DuplicateMenu(_))));
    }

    #[test]
    fn fixture_on_non_binary_menu_is_rejected() {
        let mut spec = builtin_spec();
        spec.fixtures.triples[0].menus[0] = "10".into();
        assert!(matches!(ExperimentDesign::build(spec), Err(DesignError::NotBinary { .. })));
        let mut spec = builtin_spec();
        spec.fixtures.independence[0].mixed_menu = "12".into();
        assert!(matches!(ExperimentDesign::build(spec), Err(DesignError::NotBinary { .. })));
    }

    #[test]
    fn broken_mixture_identity_is_rejected() {
        let mut spec = builtin_spec();
        spec.fixtures.independence[0].alpha = "1/3".into();
        assert!(matches!(ExperimentDesign::build(spec), Err(DesignError::Mixture { .. })));
    }

    #[test]
    fn lotteries_csv_reports_line() {
        let text = "lottery_id,prize,prob_num,prob_den\nA,0,1,2\nA,x,1,2\n";
        match parse_lotteries_csv(text, "l.csv") {
            Err(DesignError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }
}
