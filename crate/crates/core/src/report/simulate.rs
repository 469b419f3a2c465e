use serde::Serialize;

use super::ReportError;
use crate::axioms::DeferralPolicy;
use crate::choice::write_choices_csv;
use crate::design::ExperimentDesign;
use crate::hm::HmMode;
use crate::par::Execution;
use crate::rational::{self, Rational};
use crate::sim::{
    calibrate_hm_percentile, calibrate_population, eu_population, mixed_population, simulate_dataset, AgentKind,
    CalibrationResult, Shape, SimConfig, SimError,
};

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Population {
    Uniform {
        include_deferral: bool,
    },
    ExpectedUtility {
        shape: Shape,
        noise_scale: f64,
    },
    /// Uniform with deferral, noiseless EU and noisy EU in equal shares.
    Mixed {
        noise_scale: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimulationSpec {
    pub agents: usize,
    pub rounds: usize,
    pub seed: u64,
    pub population: Population,
    #[serde(with = "rational::serde_str")]
    pub percentile: Rational,
    pub hm_mode: HmMode,
    pub policy: DeferralPolicy,
    /// Whether the uniform reference agents of the calibration may defer.
    pub calibration_deferral: bool,
    #[serde(skip)]
    pub execution: Execution,
}

impl SimulationSpec {
    pub fn new(design: &ExperimentDesign, agents: usize, seed: u64) -> Self {
        SimulationSpec {
            agents,
            rounds: design.rounds_expected,
            seed,
            population: Population::Uniform { include_deferral: true },
            percentile: rational::ratio(1, 40),
            hm_mode: HmMode::Strict,
            policy: DeferralPolicy::Strict,
            calibration_deferral: false,
            execution: Execution::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimulationSummary {
    pub spec: SimulationSpec,
    pub records: usize,
    /// HM scores of the generated agents on their first round.
    pub population_hm: CalibrationResult,
    /// HM scores of uniform-random agents with the same seed and count.
    pub calibration: CalibrationResult,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationOutput {
    /// The dataset in `choices.csv` format.
    pub choices_csv: Vec<u8>,
    pub summary: SimulationSummary,
}

pub fn run_simulation(design: &ExperimentDesign, spec: &SimulationSpec) -> Result<SimulationOutput, ReportError> {
    if spec.agents == 0 {
        return Err(SimError::NoAgents.into());
    }
    let kinds = match &spec.population {
        Population::Uniform { include_deferral } => {
            vec![AgentKind::UniformRandom { include_deferral: *include_deferral }]
        }
        Population::ExpectedUtility { shape, noise_scale } => {
            eu_population(design, spec.agents, spec.seed, *shape, *noise_scale)?
        }
        Population::Mixed { noise_scale } => {
            if !noise_scale.is_finite() || *noise_scale < 0.0 {
                return Err(SimError::BadNoise.into());
            }
            mixed_population(design, spec.agents, spec.seed, *noise_scale)
        }
    };
    let mut config = SimConfig::new(design, spec.agents, spec.seed);
    config.rounds = spec.rounds;
    config.execution = spec.execution;

    let records = simulate_dataset(&config, &kinds)?;
    let mut choices_csv = Vec::new();
    write_choices_csv(design, &records, &mut choices_csv).expect("writing to memory");
    let population_hm = calibrate_population(&config, &kinds, &spec.percentile, spec.hm_mode, spec.policy)?;
    let calibration =
        calibrate_hm_percentile(&config, &spec.percentile, spec.calibration_deferral, spec.hm_mode, spec.policy)?;
    Ok(SimulationOutput {
        choices_csv,
        summary: SimulationSummary { spec: spec.clone(), records: records.len(), population_hm, calibration },
    })
}
