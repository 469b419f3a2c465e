//! Choice observations: ingestion, round slicing, merging into a choice
//! correspondence and empirical choice probabilities.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use num_traits::Zero;
use serde::Serialize;
use thiserror::Error;

use crate::design::{ExperimentDesign, LotteryIdx, MenuIdx};
use crate::rational::{self, Rational};

pub const DEFER: &str = "DEFER";

#[derive(Debug, Error)]
pub enum ChoiceError {
    #[error("{file}:{line}: {message}")]
    Parse { file: String, line: u64, message: String },
    #[error("{file}:{line}: unknown menu `{menu}`")]
    UnknownMenu { file: String, line: u64, menu: String },
    #[error("{file}:{line}: lottery `{lottery}` is not on menu `{menu}`")]
    NotInMenu { file: String, line: u64, lottery: String, menu: String },
    #[error("{file}:{line}: subject `{subject}` repeats trial {trial}")]
    DuplicateTrial { file: String, line: u64, subject: String, trial: u32 },
    #[error("{0}: no choice records")]
    Empty(String),
    #[error("subject `{subject}`: menu `{menu}` appears {count} times, expected {expected}")]
    UnevenRounds { subject: String, menu: String, count: usize, expected: usize },
    #[error("no rounds to analyse")]
    NoRounds,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Outcome {
    Chosen(LotteryIdx),
    Deferred,
}

impl Outcome {
    pub fn mask(self) -> u16 {
        match self {
            Outcome::Chosen(l) => 1 << l,
            Outcome::Deferred => 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChoiceRecord {
    pub subject_id: String,
    /// 1-based presentation order.
    pub trial_index: u32,
    pub menu: MenuIdx,
    pub outcome: Outcome,
    pub response_time_ms: Option<f64>,
}

/// All records of one subject, sorted by trial index.
#[derive(Clone, Debug, PartialEq)]
pub struct SubjectRecords {
    pub subject_id: String,
    pub records: Vec<ChoiceRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Flagged {
    pub subject_id: String,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    /// Subjects whose every menu appears `rounds_expected` times, sorted by id.
    pub subjects: Vec<SubjectRecords>,
    /// Subjects excluded from aggregate analysis, with the reason.
    pub incomplete: Vec<(SubjectRecords, Flagged)>,
}

/// The i-th appearance of every menu for one subject.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundSlice {
    pub subject_id: String,
    /// 1-based.
    pub round: usize,
    pub outcomes: Vec<Outcome>,
    pub response_times_ms: Vec<Option<f64>>,
}

impl RoundSlice {
    pub fn correspondence(&self) -> Correspondence {
        Correspondence { values: self.outcomes.iter().map(|o| o.mask()).collect() }
    }

    pub fn deferrals(&self) -> usize {
        self.outcomes.iter().filter(|o| **o == Outcome::Deferred).count()
    }

    pub fn mean_response_time_ms(&self) -> Option<f64> {
        let rts: Vec<f64> = self.response_times_ms.iter().flatten().copied().collect();
        (!rts.is_empty()).then(|| rts.iter().sum::<f64>() / rts.len() as f64)
    }
}

/// Choice values per menu as lottery bitmasks; `0` is the empty choice.
/// A per-round choice function is the special case of singleton-or-empty
/// values.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Correspondence {
    pub values: Vec<u16>,
}

impl Correspondence {
    pub fn new(values: Vec<u16>) -> Self {
        Correspondence { values }
    }

    pub fn value(&self, m: MenuIdx) -> u16 {
        self.values[m]
    }

    pub fn contains(&self, m: MenuIdx, l: LotteryIdx) -> bool {
        self.values[m] & (1 << l) != 0
    }

    pub fn is_empty_at(&self, m: MenuIdx) -> bool {
        self.values[m] == 0
    }

    pub fn is_single_valued(&self) -> bool {
        self.values.iter().all(|v| v.count_ones() <= 1)
    }

    /// Lottery-id sets per menu id, for reports.
    pub fn render(&self, design: &ExperimentDesign) -> BTreeMap<String, Vec<String>> {
        self.values
            .iter()
            .enumerate()
            .map(|(m, &v)| {
                let ids = (0..design.lotteries.len())
                    .filter(|l| v & (1 << l) != 0)
                    .map(|l| design.lottery_id(l).to_string())
                    .collect();
                (design.menus[m].id.clone(), ids)
            })
            .collect()
    }
}

/// Empirical choice frequencies over rounds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChoiceProbabilities {
    pub rounds: u32,
    /// `counts[menu][lottery]`
    pub counts: Vec<Vec<u32>>,
    pub deferrals: Vec<u32>,
}

impl ChoiceProbabilities {
    /// `Pr({l}, m)` as a raw frequency over all rounds.
    pub fn prob(&self, l: LotteryIdx, m: MenuIdx) -> Rational {
        rational::ratio(i64::from(self.counts[m][l]), i64::from(self.rounds))
    }

    /// `Pr({l}, m)` renormalised over the rounds with an active choice; zero
    /// when every round was deferred.
    pub fn active_prob(&self, l: LotteryIdx, m: MenuIdx) -> Rational {
        let active = self.rounds - self.deferrals[m];
        if active == 0 {
            Rational::zero()
        } else {
            rational::ratio(i64::from(self.counts[m][l]), i64::from(active))
        }
    }

    /// `Pr(A, A)`: share of rounds with an active choice.
    pub fn active(&self, m: MenuIdx) -> Rational {
        rational::ratio(i64::from(self.rounds - self.deferrals[m]), i64::from(self.rounds))
    }

    pub fn deferral(&self, m: MenuIdx) -> Rational {
        rational::ratio(i64::from(self.deferrals[m]), i64::from(self.rounds))
    }
}

/// Parses `choices.csv` and validates it against the design.
///
/// Chosen lotteries outside their menu, unknown menus and repeated trial
/// indices are hard errors. Subjects whose menus do not all appear
/// `rounds_expected` times are flagged and moved to [`Dataset::incomplete`].
pub fn load_choices(design: &ExperimentDesign, text: &str, file: &str) -> Result<Dataset, ChoiceError> {
    let err = |line: u64, message: String| ChoiceError::Parse { file: file.to_string(), line, message };
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(true).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| err(1, e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(c_subject), Some(c_trial), Some(c_menu), Some(c_outcome)) =
        (col("subject_id"), col("trial_index"), col("menu_id"), col("outcome"))
    else {
        return Err(err(1, "header must contain subject_id, trial_index, menu_id, outcome[, response_time_ms]".into()));
    };
    let c_rt = col("response_time_ms");

    let mut by_subject: BTreeMap<String, Vec<ChoiceRecord>> = BTreeMap::new();
    let mut seen: BTreeSet<(String, u32)> = BTreeSet::new();
    for row in reader.records() {
        let row = row.map_err(|e| err(e.position().map(|p| p.line()).unwrap_or(0), e.to_string()))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let field = |c: usize| row.get(c).unwrap_or("");
        let subject = field(c_subject).to_string();
        if subject.is_empty() {
            return Err(err(line, "empty subject_id".into()));
        }
        let trial: u32 = field(c_trial)
            .parse()
            .ok()
            .filter(|&t| t >= 1)
            .ok_or_else(|| err(line, format!("invalid trial_index `{}`", field(c_trial))))?;
        let menu_id = field(c_menu);
        let menu = design.menu(menu_id).ok_or_else(|| ChoiceError::UnknownMenu {
            file: file.to_string(),
            line,
            menu: menu_id.to_string(),
        })?;
        let raw = field(c_outcome);
        let outcome = if raw == DEFER {
            Outcome::Deferred
        } else {
            let l = design.lottery(raw).filter(|&l| design.menus[menu].contains(l)).ok_or_else(|| {
                ChoiceError::NotInMenu {
                    file: file.to_string(),
                    line,
                    lottery: raw.to_string(),
                    menu: menu_id.to_string(),
                }
            })?;
            Outcome::Chosen(l)
        };
        let rt = match c_rt.map(field).filter(|s| !s.is_empty()) {
            None => None,
            Some(s) => Some(
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite() && *v >= 0.0)
                    .ok_or_else(|| err(line, format!("invalid response_time_ms `{s}`")))?,
            ),
        };
        if !seen.insert((subject.clone(), trial)) {
            return Err(ChoiceError::DuplicateTrial { file: file.to_string(), line, subject, trial });
        }
        by_subject.entry(subject.clone()).or_default().push(ChoiceRecord {
            subject_id: subject,
            trial_index: trial,
            menu,
            outcome,
            response_time_ms: rt,
        });
    }
    if by_subject.is_empty() {
        return Err(ChoiceError::Empty(file.to_string()));
    }

    let mut subjects = Vec::new();
    let mut incomplete = Vec::new();
    for (subject_id, mut records) in by_subject {
        records.sort_by_key(|r| r.trial_index);
        let s = SubjectRecords { subject_id, records };
        match completeness(design, &s) {
            None => subjects.push(s),
            Some(reason) => {
                let flag = Flagged { subject_id: s.subject_id.clone(), reason };
                incomplete.push((s, flag));
            }
        }
    }
    Ok(Dataset { subjects, incomplete })
}

fn completeness(design: &ExperimentDesign, s: &SubjectRecords) -> Option<String> {
    let counts = menu_counts(design, &s.records);
    let off: Vec<String> = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c != design.rounds_expected)
        .map(|(m, c)| format!("menu {} appears {c} times", design.menus[m].id))
        .collect();
    (!off.is_empty()).then(|| {
        format!(
            "{} records; expected {} appearances per menu: {}",
            s.records.len(),
            design.rounds_expected,
            off.join("; ")
        )
    })
}

fn menu_counts(design: &ExperimentDesign, records: &[ChoiceRecord]) -> Vec<usize> {
    let mut counts = vec![0usize; design.menus.len()];
    for r in records {
        counts[r.menu] += 1;
    }
    counts
}

/// Splits a subject's records into rounds: round `i` holds the `i`-th
/// appearance (in trial order) of every menu.
pub fn slice_rounds(design: &ExperimentDesign, subject: &SubjectRecords) -> Result<Vec<RoundSlice>, ChoiceError> {
    let counts = menu_counts(design, &subject.records);
    // the majority count is taken as the round count; the first menu off it is named
    let mut freq: BTreeMap<usize, usize> = BTreeMap::new();
    for &c in &counts {
        *freq.entry(c).or_default() += 1;
    }
    let rounds = freq.iter().max_by_key(|&(c, n)| (*n, *c)).map(|(&c, _)| c).unwrap_or(0);
    if let Some((m, &c)) = counts.iter().enumerate().find(|(_, &c)| c != rounds) {
        return Err(ChoiceError::UnevenRounds {
            subject: subject.subject_id.clone(),
            menu: design.menus[m].id.clone(),
            count: c,
            expected: rounds,
        });
    }
    if rounds == 0 {
        return Err(ChoiceError::NoRounds);
    }
    let mut records: Vec<&ChoiceRecord> = subject.records.iter().collect();
    records.sort_by_key(|r| r.trial_index);
    let mut slices: Vec<RoundSlice> = (1..=rounds)
        .map(|round| RoundSlice {
            subject_id: subject.subject_id.clone(),
            round,
            outcomes: vec![Outcome::Deferred; design.menus.len()],
            response_times_ms: vec![None; design.menus.len()],
        })
        .collect();
    let mut seen = vec![0usize; design.menus.len()];
    for r in records {
        let slice = &mut slices[seen[r.menu]];
        slice.outcomes[r.menu] = r.outcome;
        slice.response_times_ms[r.menu] = r.response_time_ms;
        seen[r.menu] += 1;
    }
    Ok(slices)
}

/// Union of the chosen lotteries across rounds. A lottery enters only when
/// its choice frequency is positive and at least `threshold`.
pub fn merge_correspondence(slices: &[RoundSlice], threshold: &Rational) -> Correspondence {
    let n_menus = slices.first().map(|s| s.outcomes.len()).unwrap_or(0);
    let rounds = slices.len() as i64;
    let mut counts: Vec<BTreeMap<LotteryIdx, i64>> = vec![BTreeMap::new(); n_menus];
    for s in slices {
        for (m, o) in s.outcomes.iter().enumerate() {
            if let Outcome::Chosen(l) = o {
                *counts[m].entry(*l).or_default() += 1;
            }
        }
    }
    let values = counts
        .into_iter()
        .map(|c| {
            c.into_iter()
                .filter(|&(_, n)| n > 0 && rational::ratio(n, rounds) >= *threshold)
                .fold(0u16, |mask, (l, _)| mask | (1 << l))
        })
        .collect();
    Correspondence { values }
}

pub fn estimate_probabilities(design: &ExperimentDesign, slices: &[RoundSlice]) -> ChoiceProbabilities {
    let n_menus = design.menus.len();
    let mut counts = vec![vec![0u32; design.lotteries.len()]; n_menus];
    let mut deferrals = vec![0u32; n_menus];
    for s in slices {
        for (m, o) in s.outcomes.iter().enumerate() {
            match o {
                Outcome::Chosen(l) => counts[m][*l] += 1,
                Outcome::Deferred => deferrals[m] += 1,
            }
        }
    }
    ChoiceProbabilities { rounds: slices.len() as u32, counts, deferrals }
}

/// Writes records in the `choices.csv` format.
pub fn write_choices_csv<W: Write>(
    design: &ExperimentDesign,
    records: &[ChoiceRecord],
    out: W,
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["subject_id", "trial_index", "menu_id", "outcome", "response_time_ms"])?;
    for r in records {
        let outcome = match r.outcome {
            Outcome::Chosen(l) => design.lottery_id(l),
            Outcome::Deferred => DEFER,
        };
        let rt = r.response_time_ms.map(|v| format!("{v}")).unwrap_or_default();
        w.write_record([r.subject_id.as_str(), &r.trial_index.to_string(), &design.menus[r.menu].id, outcome, &rt])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::builtin_design;

    fn slice(design: &ExperimentDesign, round: usize, choices: &[(&str, Option<&str>)]) -> RoundSlice {
        let mut outcomes = vec![Outcome::Deferred; design.menus.len()];
        for (menu, pick) in choices {
            let m = design.menu(menu).unwrap();
            outcomes[m] = match pick {
                Some(l) => Outcome::Chosen(design.lottery(l).unwrap()),
                None => Outcome::Deferred,
            };
        }
        RoundSlice { subject_id: "s".into(), round, outcomes, response_times_ms: vec![None; design.menus.len()] }
    }

    fn full_csv(design: &ExperimentDesign, subject: &str, rounds: usize) -> String {
        let mut s = String::from("subject_id,trial_index,menu_id,outcome,response_time_ms\n");
        let mut t = 1;
        for _ in 0..rounds {
            for m in &design.menus {
                let pick = design.lottery_id(m.members[0]);
                s += &format!("{subject},{t},{},{pick},{}\n", m.id, 1000 + t);
                t += 1;
            }
        }
        s
    }

    #[test]
    fn merging_follows_worked_example() {
        let d = builtin_design();
        let picks = [None, Some("A2"), Some("A1"), Some("A2"), Some("A1")];
        let slices: Vec<_> = picks.iter().enumerate().map(|(i, p)| slice(&d, i + 1, &[("1", *p)])).collect();
        let c = merge_correspondence(&slices, &Rational::zero());
        let m = d.menu("1").unwrap();
        assert_eq!(c.value(m), d.menus[m].mask);
        // menu 2 was never chosen from
        assert!(c.is_empty_at(d.menu("2").unwrap()));
        // a threshold of 1/2 keeps neither (each chosen 2/5 of the time)
        assert_eq!(merge_correspondence(&slices, &rational::ratio(1, 2)).value(m), 0);
    }

    #[test]
    fn probabilities_count_rounds() {
        let d = builtin_design();
        let picks = [Some("A1"), Some("A1"), Some("A2"), Some("A1"), None];
        let slices: Vec<_> = picks.iter().enumerate().map(|(i, p)| slice(&d, i + 1, &[("1", *p)])).collect();
        let p = estimate_probabilities(&d, &slices);
        let m = d.menu("1").unwrap();
        assert_eq!(p.prob(d.lottery("A1").unwrap(), m), rational::ratio(3, 5));
        assert_eq!(p.prob(d.lottery("A2").unwrap(), m), rational::ratio(1, 5));
        assert_eq!(p.active(m), rational::ratio(4, 5));
        assert_eq!(p.active_prob(d.lottery("A1").unwrap(), m), rational::ratio(3, 4));
        assert_eq!(p.active(d.menu("2").unwrap()), Rational::zero());
    }

    #[test]
    fn load_and_slice_a_complete_subject() {
        let d = builtin_design();
        let data = load_choices(&d, &full_csv(&d, "s1", 5), "choices.csv").unwrap();
        assert_eq!(data.subjects.len(), 1);
        let slices = slice_rounds(&d, &data.subjects[0]).unwrap();
        assert_eq!(slices.len(), 5);
        assert!(slices.iter().all(|s| s.outcomes.len() == 15));
        assert_eq!(slices[4].response_times_ms[14], Some(1075.0));
    }

    #[test]
    fn slicing_uses_appearance_order_not_trial_blocks() {
        let d = builtin_design();
        let m = d.menu("1").unwrap();
        let picks = ["A1", "A2", "A2", "A1", "A1"];
        let trials = [3, 17, 29, 50, 64];
        let mut records = Vec::new();
        for (k, (&t, p)) in trials.iter().zip(picks).enumerate() {
            records.push(ChoiceRecord {
                subject_id: "s".into(),
                trial_index: t,
                menu: m,
                outcome: Outcome::Chosen(d.lottery(p).unwrap()),
                response_time_ms: Some(k as f64),
            });
        }
        // every other menu: five appearances at arbitrary later trials
        let mut t = 100;
        for other in (0..d.menus.len()).filter(|&o| o != m) {
            for _ in 0..5 {
                records.push(ChoiceRecord {
                    subject_id: "s".into(),
                    trial_index: t,
                    menu: other,
                    outcome: Outcome::Deferred,
                    response_time_ms: None,
                });
                t += 1;
            }
        }
        records.reverse();
        let slices = slice_rounds(&d, &SubjectRecords { subject_id: "s".into(), records }).unwrap();
        let got: Vec<_> = slices.iter().map(|s| s.outcomes[m]).collect();
        let want: Vec<_> = picks.iter().map(|p| Outcome::Chosen(d.lottery(p).unwrap())).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn chosen_lottery_outside_menu_is_rejected() {
        let d = builtin_design();
        let text = "subject_id,trial_index,menu_id,outcome,response_time_ms\ns,1,1,B1,\n";
        assert!(matches!(load_choices(&d, text, "c.csv"), Err(ChoiceError::NotInMenu { line: 2, .. })));
    }

    #[test]
    fn missing_record_flags_subject() {
        let d = builtin_design();
        let text = full_csv(&d, "s1", 5);
        let truncated: String = text.lines().take(75).map(|l| format!("{l}\n")).collect();
        let data = load_choices(&d, &truncated, "c.csv").unwrap();
        assert!(data.subjects.is_empty());
        assert_eq!(data.incomplete.len(), 1);
        assert!(data.incomplete[0].1.reason.contains("74 records"));
        assert!(matches!(
            slice_rounds(&d, &data.incomplete[0].0),
            Err(ChoiceError::UnevenRounds { count: 4, expected: 5, .. })
        ));
    }

    #[test]
    fn empty_file_and_duplicate_trials_are_errors() {
        let d = builtin_design();
        let header = "subject_id,trial_index,menu_id,outcome,response_time_ms\n";
        assert!(matches!(load_choices(&d, header, "c.csv"), Err(ChoiceError::Empty(_))));
        let dup = format!("{header}s,1,1,A1,\ns,1,2,DEFER,\n");
        assert!(matches!(load_choices(&d, &dup, "c.csv"), Err(ChoiceError::DuplicateTrial { .. })));
    }

    #[test]
    fn missing_response_times_are_tolerated() {
        let d = builtin_design();
        let text = "subject_id,trial_index,menu_id,outcome,response_time_ms\ns,1,1,A1,\ns,2,1,DEFER,12.5\n";
        let data = load_choices(&d, text, "c.csv").unwrap();
        let recs = &data.incomplete[0].0.records;
        assert_eq!(recs[0].response_time_ms, None);
        assert_eq!(recs[1].response_time_ms, Some(12.5));
    }
}
