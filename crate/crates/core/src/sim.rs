//! Synthetic choosers: uniform-random agents for calibrating HM scores and
//! expected-utility agents (optionally with logit noise) for property tests.

use std::collections::BTreeMap;

use num_traits::{Signed, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::axioms::{
    check_contraction, check_decisiveness, check_fosd_choice, check_independence, check_regularity, check_star,
    check_stochastic_decisiveness, check_stochastic_transitivity, check_transitivity, check_warp, DeferralPolicy,
    FosdMode, ProbabilityBasis, RiskAttitude, TransitivityVariant,
};
use crate::choice::{
    estimate_probabilities, merge_correspondence, ChoiceRecord, Correspondence, Outcome, RoundSlice, SubjectRecords,
};
use crate::design::{ExperimentDesign, LotteryIdx, Taxonomy};
use crate::eu::eu_rationalizable;
use crate::hm::{HmMode, HmTable};
use crate::lottery::Lottery;
use crate::par::{self, Execution};
use crate::rational::{self, Rational};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SimError {
    #[error("utility must be defined at every prize and strictly increasing")]
    NotIncreasing,
    #[error("noise scale must be finite and non-negative")]
    BadNoise,
    #[error("population is empty")]
    NoAgents,
}

/// Utility values at the design's prizes, lowest prize first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UtilityFunction {
    points: Vec<(Rational, Rational)>,
}

impl UtilityFunction {
    pub fn new(mut points: Vec<(Rational, Rational)>) -> Result<Self, SimError> {
        points.sort_by(|a, b| a.0.cmp(&b.0));
        if points.is_empty() || points.windows(2).any(|w| w[0].0 == w[1].0 || w[0].1 >= w[1].1) {
            return Err(SimError::NotIncreasing);
        }
        Ok(UtilityFunction { points })
    }

    /// `u(x) = x`.
    pub fn linear(prizes: &[Rational]) -> Self {
        UtilityFunction::new(prizes.iter().map(|z| (z.clone(), z.clone())).collect()).expect("distinct prizes")
    }

    /// Piecewise-linear utility with the given slope on each interval
    /// between consecutive prizes, `u(lowest) = 0`.
    pub fn from_slopes(prizes: &[Rational], slopes: &[Rational]) -> Result<Self, SimError> {
        if slopes.len() + 1 != prizes.len() || slopes.iter().any(|s| !s.is_positive()) {
            return Err(SimError::NotIncreasing);
        }
        let mut u = Rational::zero();
        let mut points = vec![(prizes[0].clone(), u.clone())];
        for (w, s) in prizes.windows(2).zip(slopes) {
            u += s * (&w[1] - &w[0]);
            points.push((w[1].clone(), u.clone()));
        }
        UtilityFunction::new(points)
    }

    pub fn points(&self) -> &[(Rational, Rational)] {
        &self.points
    }

    /// Rescaled so the top prize has utility one.
    pub fn normalized(&self) -> Self {
        let top = self.points.last().expect("non-empty").1.clone();
        let low = self.points[0].1.clone();
        let span = &top - &low;
        UtilityFunction { points: self.points.iter().map(|(z, u)| (z.clone(), (u - &low) / &span)).collect() }
    }

    pub fn at(&self, z: &Rational) -> Option<&Rational> {
        self.points.iter().find(|(p, _)| p == z).map(|(_, u)| u)
    }

    pub fn expected(&self, p: &Lottery) -> Rational {
        p.support()
            .iter()
            .map(|a| self.at(a.prize.amount()).expect("utility defined at every prize") * a.mass.value())
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum AgentKind {
    UniformRandom { include_deferral: bool },
    ExpectedUtility { utility: UtilityFunction, noise_scale: f64 },
}

impl AgentKind {
    pub fn expected_utility(utility: UtilityFunction, noise_scale: f64) -> Result<Self, SimError> {
        if !noise_scale.is_finite() || noise_scale < 0.0 {
            return Err(SimError::BadNoise);
        }
        Ok(AgentKind::ExpectedUtility { utility, noise_scale })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AgentSpec {
    pub subject_id: String,
    pub kind: AgentKind,
    /// Stream of the master-seeded generator used by this agent.
    pub stream: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SimConfig<'a> {
    pub design: &'a ExperimentDesign,
    pub agents: usize,
    pub rounds: usize,
    pub seed: u64,
    pub execution: Execution,
}

impl<'a> SimConfig<'a> {
    pub fn new(design: &'a ExperimentDesign, agents: usize, seed: u64) -> Self {
        SimConfig { design, agents, rounds: design.rounds_expected, seed, execution: Execution::default() }
    }

    pub fn agent_spec(&self, i: usize, kinds: &[AgentKind]) -> AgentSpec {
        AgentSpec { subject_id: subject_id(i), kind: kinds[i % kinds.len()].clone(), stream: i as u64 }
    }
}

pub fn subject_id(i: usize) -> String {
    format!("S{:04}", i + 1)
}

fn agent_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Presentation sequence: the first and last rounds follow the design's
/// presentation order; the middle rounds are one shuffled block.
fn trial_sequence(design: &ExperimentDesign, rounds: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let order = &design.presentation_order;
    if rounds == 1 {
        return order.clone();
    }
    let mut middle: Vec<usize> = (0..rounds - 2).flat_map(|_| order.iter().copied()).collect();
    middle.shuffle(rng);
    order.iter().copied().chain(middle).chain(order.iter().copied()).collect()
}

/// Lowest-index lottery among the exact EU maximisers of the menu.
fn eu_argmax(members: &[LotteryIdx], eu: &[Rational]) -> LotteryIdx {
    let mut best = members[0];
    for &l in &members[1..] {
        if eu[l] > eu[best] {
            best = l;
        }
    }
    best
}

/// Per-agent state: the generator plus cached expected utilities.
struct Chooser<'a> {
    kind: &'a AgentKind,
    eu: Vec<Rational>,
    eu_f64: Vec<f64>,
}

impl<'a> Chooser<'a> {
    fn new(design: &ExperimentDesign, kind: &'a AgentKind) -> Self {
        let eu: Vec<Rational> = match kind {
            AgentKind::ExpectedUtility { utility, .. } => {
                design.lotteries.iter().map(|l| utility.expected(l)).collect()
            }
            AgentKind::UniformRandom { .. } => Vec::new(),
        };
        let eu_f64 = eu.iter().map(rational::to_f64).collect();
        Chooser { kind, eu, eu_f64 }
    }
}

fn choose(design: &ExperimentDesign, menu: usize, chooser: &Chooser, rng: &mut ChaCha8Rng) -> Outcome {
    let members = &design.menus[menu].members;
    match chooser.kind {
        AgentKind::UniformRandom { include_deferral } => {
            let options = members.len() + usize::from(*include_deferral);
            let k = rng.random_range(0..options);
            members.get(k).map_or(Outcome::Deferred, |&l| Outcome::Chosen(l))
        }
        AgentKind::ExpectedUtility { noise_scale, .. } if *noise_scale == 0.0 => {
            Outcome::Chosen(eu_argmax(members, &chooser.eu))
        }
        AgentKind::ExpectedUtility { noise_scale, .. } => {
            let eus: Vec<f64> = members.iter().map(|&l| chooser.eu_f64[l]).collect();
            let top = eus.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let weights: Vec<f64> = eus.iter().map(|e| ((e - top) / noise_scale).exp()).collect();
            let mut draw = rng.random::<f64>() * weights.iter().sum::<f64>();
            for (&l, w) in members.iter().zip(&weights) {
                if draw < *w {
                    return Outcome::Chosen(l);
                }
                draw -= w;
            }
            Outcome::Chosen(*members.last().expect("menu is non-empty"))
        }
    }
}

/// One agent's records over all rounds, in trial order.
pub fn simulate_agent(design: &ExperimentDesign, rounds: usize, seed: u64, spec: &AgentSpec) -> Vec<ChoiceRecord> {
    let mut rng = agent_rng(seed, spec.stream);
    let trials = trial_sequence(design, rounds, &mut rng);
    let chooser = Chooser::new(design, &spec.kind);
    trials
        .into_iter()
        .enumerate()
        .map(|(t, menu)| ChoiceRecord {
            subject_id: spec.subject_id.clone(),
            trial_index: t as u32 + 1,
            menu,
            outcome: choose(design, menu, &chooser, &mut rng),
            response_time_ms: None,
        })
        .collect()
}

/// Records of `config.agents` agents; agent `i` behaves as
/// `kinds[i % kinds.len()]`. Output is ordered by agent, then trial.
pub fn simulate_dataset(config: &SimConfig, kinds: &[AgentKind]) -> Result<Vec<ChoiceRecord>, SimError> {
    if kinds.is_empty() || config.agents == 0 {
        return Err(SimError::NoAgents);
    }
    let per_agent = par::map_range(config.execution, config.agents, |i| {
        simulate_agent(config.design, config.rounds, config.seed, &config.agent_spec(i, kinds))
    });
    Ok(per_agent.into_iter().flatten().collect())
}

/// Random strictly increasing piecewise-linear utility over `prizes`,
/// normalised to `[0, 1]`: strictly decreasing slopes give a concave
/// function, strictly increasing slopes a convex one.
pub fn random_utility<R: Rng>(prizes: &[Rational], shape: Shape, rng: &mut R) -> UtilityFunction {
    let k = prizes.len() - 1;
    let mut slopes: Vec<usize> = rand::seq::index::sample(rng, 1000, k).into_iter().map(|s| s + 1).collect();
    slopes.sort_unstable();
    match shape {
        Shape::Concave => slopes.reverse(),
        Shape::Convex => {}
        Shape::Linear => slopes = vec![1; k],
    }
    let slopes: Vec<Rational> = slopes.into_iter().map(|s| rational::int(s as i64)).collect();
    UtilityFunction::from_slopes(prizes, &slopes).expect("positive slopes").normalized()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Concave,
    Convex,
    Linear,
}

/// Uniform (with deferral), noiseless EU and noisy EU agents in equal shares,
/// with utilities drawn from `seed`.
pub fn mixed_population(design: &ExperimentDesign, n: usize, seed: u64, noise_scale: f64) -> Vec<AgentKind> {
    let prizes = design.prizes();
    let mut rng = agent_rng(seed, u64::MAX);
    (0..n)
        .map(|i| match i % 3 {
            0 => AgentKind::UniformRandom { include_deferral: true },
            k => {
                let shape = if rng.random::<bool>() { Shape::Concave } else { Shape::Convex };
                let utility = random_utility(&prizes, shape, &mut rng);
                let noise = if k == 1 { 0.0 } else { noise_scale };
                AgentKind::ExpectedUtility { utility, noise_scale: noise }
            }
        })
        .collect()
}

/// `n` EU agents of one utility shape, utilities drawn from `seed`.
pub fn eu_population(
    design: &ExperimentDesign,
    n: usize,
    seed: u64,
    shape: Shape,
    noise_scale: f64,
) -> Result<Vec<AgentKind>, SimError> {
    let prizes = design.prizes();
    let mut rng = agent_rng(seed, u64::MAX);
    (0..n).map(|_| AgentKind::expected_utility(random_utility(&prizes, shape, &mut rng), noise_scale)).collect()
}

fn slices_of(design: &ExperimentDesign, records: Vec<ChoiceRecord>) -> Vec<RoundSlice> {
    let subject = SubjectRecords { subject_id: records[0].subject_id.clone(), records };
    crate::choice::slice_rounds(design, &subject).expect("simulated rounds are complete")
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CalibrationResult {
    pub agents: usize,
    pub percentile: String,
    pub value: usize,
    pub mode: HmMode,
    pub policy: DeferralPolicy,
    pub include_deferral: bool,
    /// `histogram[s]` agents scored `s`.
    pub histogram: Vec<usize>,
    pub mean: f64,
}

/// Nearest-rank percentile of sorted values: index `ceil(p·N) − 1`.
pub fn nearest_rank(sorted: &[usize], p: &Rational) -> usize {
    let n = rational::int(sorted.len() as i64);
    let rank = (p * n).ceil().to_integer();
    let idx = i64::try_from(rank).unwrap_or(i64::MAX).max(1) as usize - 1;
    sorted[idx.min(sorted.len() - 1)]
}

/// HM-score distribution of uniform-random agents over one round (15
/// decisions on the built-in design), scored in `mode` under `policy`.
pub fn calibrate_hm_percentile(
    config: &SimConfig,
    percentile: &Rational,
    include_deferral: bool,
    mode: HmMode,
    policy: DeferralPolicy,
) -> Result<CalibrationResult, SimError> {
    calibrate_population(config, &[AgentKind::UniformRandom { include_deferral }], percentile, mode, policy).map(
        |mut r| {
            r.include_deferral = include_deferral;
            r
        },
    )
}

/// HM-score percentile for an arbitrary population, on each agent's first
/// round.
pub fn calibrate_population(
    config: &SimConfig,
    kinds: &[AgentKind],
    percentile: &Rational,
    mode: HmMode,
    policy: DeferralPolicy,
) -> Result<CalibrationResult, SimError> {
    if kinds.is_empty() || config.agents == 0 {
        return Err(SimError::NoAgents);
    }
    let design = config.design;
    let table = HmTable::for_design(design, mode).expect("design size within enumeration guard");
    let mut scores = par::map_range(config.execution, config.agents, |i| {
        let spec = config.agent_spec(i, kinds);
        let records = simulate_agent(design, 1, config.seed, &spec);
        let slices = slices_of(design, records);
        table.score(&slices[0].correspondence(), policy)
    });
    scores.sort_unstable();
    let mut histogram = vec![0; scores.last().map_or(0, |&s| s + 1)];
    for &s in &scores {
        histogram[s] += 1;
    }
    Ok(CalibrationResult {
        agents: scores.len(),
        percentile: rational::format(percentile),
        value: nearest_rank(&scores, percentile),
        mode,
        policy,
        include_deferral: kinds.iter().any(|k| matches!(k, AgentKind::UniformRandom { include_deferral: true })),
        histogram,
        mean: scores.iter().sum::<usize>() as f64 / scores.len() as f64,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ShapeOutcome {
    pub shape: Shape,
    pub agents: usize,
    pub passed: usize,
    pub attitudes: BTreeMap<String, usize>,
    pub failures: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EuSuiteReport {
    pub taxonomy: Taxonomy,
    pub outcomes: Vec<ShapeOutcome>,
}

impl EuSuiteReport {
    pub fn all_passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.failures.is_empty() && o.passed == o.agents)
    }
}

/// Problems found in one noiseless EU agent's data; empty when every
/// deterministic and stochastic axiom holds, HM scores are zero, the LP
/// oracle succeeds and StAR reveals `expected`.
pub fn audit_eu_agent(
    design: &ExperimentDesign,
    records: Vec<ChoiceRecord>,
    strict: &HmTable,
    weak: &HmTable,
    taxonomy: Taxonomy,
    expected: Option<RiskAttitude>,
) -> Vec<String> {
    let mut problems = Vec::new();
    let slices = slices_of(design, records);
    let merged = merge_correspondence(&slices, &Rational::zero());
    let policy = DeferralPolicy::Strict;
    let fosd = design.fosd_menus(taxonomy);
    let star_pairs = design.star_pairs(taxonomy);
    let mut views: Vec<(String, Correspondence)> =
        slices.iter().map(|s| (format!("round {}", s.round), s.correspondence())).collect();
    views.push(("merged".into(), merged.clone()));
    for (label, c) in &views {
        let (star, attitude) = check_star(design, c, &star_pairs, policy);
        let counts = [
            ("Decisiveness", check_decisiveness(c).len()),
            ("Transitivity", check_transitivity(design, c, &design.triples).len()),
            ("Contraction", check_contraction(design, c, &design.nested).len()),
            ("WARP", check_warp(design, c).len()),
            ("FOSD", check_fosd_choice(c, &fosd, FosdMode::StrictAxiom).len()),
            ("Independence", check_independence(c, &design.independence, policy).len()),
            ("StAR", star.len()),
        ];
        for (name, n) in counts {
            if n > 0 {
                problems.push(format!("{label}: {n} {name} violations"));
            }
        }
        if let Some(want) = expected {
            if attitude != want {
                problems.push(format!("{label}: revealed {attitude:?}, expected {want:?}"));
            }
        }
    }
    for s in &slices {
        let score = strict.score(&s.correspondence(), policy);
        if score != 0 {
            problems.push(format!("round {}: strict HM score {score}", s.round));
        }
    }
    let score = weak.score(&merged, policy);
    if score != 0 {
        problems.push(format!("merged: weak HM score {score}"));
    }
    if !eu_rationalizable(design, &merged, policy, false).feasible {
        problems.push("merged: LP oracle finds no rationalizing utility".into());
    }
    let probs = estimate_probabilities(design, &slices);
    let mut stochastic =
        check_regularity(design, &probs, &design.nested).len() + check_stochastic_decisiveness(&probs).len();
    for v in [TransitivityVariant::Weak, TransitivityVariant::Moderate, TransitivityVariant::Strong] {
        stochastic += check_stochastic_transitivity(design, &probs, &design.triples, v, ProbabilityBasis::Raw).len();
    }
    if stochastic > 0 {
        problems.push(format!("{stochastic} stochastic violations"));
    }
    problems
}

/// Noiseless EU agents with random strictly concave and strictly convex
/// utilities must pass every axiom and reveal risk aversion or risk seeking.
pub fn proposition1_suite(
    design: &ExperimentDesign,
    agents_per_shape: usize,
    seed: u64,
    taxonomy: Taxonomy,
    execution: Execution,
) -> EuSuiteReport {
    let strict = HmTable::for_design(design, HmMode::Strict).expect("design size within enumeration guard");
    let weak = HmTable::for_design(design, HmMode::Weak).expect("design size within enumeration guard");
    let prizes = design.prizes();
    let outcomes = [Shape::Concave, Shape::Convex]
        .into_iter()
        .enumerate()
        .map(|(s, shape)| {
            let expected = match shape {
                Shape::Concave => RiskAttitude::RiskAverse,
                _ => RiskAttitude::RiskSeeking,
            };
            let results = par::map_range(execution, agents_per_shape, |i| {
                let stream = (s * agents_per_shape + i) as u64;
                let mut rng = agent_rng(seed, u64::MAX - stream);
                let utility = random_utility(&prizes, shape, &mut rng);
                let spec = AgentSpec {
                    subject_id: subject_id(i),
                    kind: AgentKind::ExpectedUtility { utility, noise_scale: 0.0 },
                    stream,
                };
                let records = simulate_agent(design, design.rounds_expected, seed, &spec);
                let problems = audit_eu_agent(design, records.clone(), &strict, &weak, taxonomy, Some(expected));
                let merged = merge_correspondence(&slices_of(design, records), &Rational::zero());
                let (_, attitude) = check_star(design, &merged, &design.star_pairs(taxonomy), DeferralPolicy::Strict);
                (spec.subject_id, problems, attitude)
            });
            let mut attitudes = BTreeMap::new();
            let mut failures = Vec::new();
            let mut passed = 0;
            for (id, problems, attitude) in results {
                *attitudes.entry(format!("{attitude:?}")).or_insert(0) += 1;
                if problems.is_empty() {
                    passed += 1;
                } else {
                    failures.extend(problems.into_iter().map(|p| format!("{shape:?} {id}: {p}")));
                }
            }
            ShapeOutcome { shape, agents: agents_per_shape, passed, attitudes, failures }
        })
        .collect();
    EuSuiteReport { taxonomy, outcomes }
}
