use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use riskchoice::axioms::{DeferralPolicy, FosdMode};
use riskchoice::design::{builtin_design, ExperimentDesign, Taxonomy};
use riskchoice::hm::HmMode;
use riskchoice::par::Execution;
use riskchoice::rational::{self, Rational};
use riskchoice::report::{
    run_analysis, run_dominance_audit, run_simulation, write_subjects_csv, Population, ReportError, RunConfig,
    SimulationSpec,
};
use riskchoice::sim::Shape;

/// Revealed-preference and stochastic-choice analysis of repeated choice
/// between lotteries.
#[derive(Parser)]
#[command(name = "riskchoice", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyse a choices file against a design.
    Analyze(AnalyzeArgs),
    /// Generate a synthetic choices file and an HM calibration summary.
    Simulate(SimulateArgs),
    /// Pairwise dominance audit of a design.
    AuditDominance(AuditArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    #[value(alias = "penalize")]
    Strict,
    #[value(alias = "active-only")]
    Lenient,
}

impl From<PolicyArg> for DeferralPolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Strict => DeferralPolicy::Strict,
            PolicyArg::Lenient => DeferralPolicy::Lenient,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FosdModeArg {
    StrictAxiom,
    DominatedChoice,
}

#[derive(Clone, Copy, ValueEnum)]
enum TaxonomyArg {
    Declared,
    Computed,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum PopulationArg {
    /// Uniform over the menu's lotteries and the deferral option.
    Uniform,
    /// Uniform over the menu's lotteries only.
    UniformActive,
    Concave,
    Convex,
    Linear,
    /// Uniform, noiseless EU and noisy EU agents in equal shares.
    Mixed,
}

#[derive(Clone, Copy, ValueEnum)]
enum HmModeArg {
    Strict,
    Weak,
}

#[derive(clap::Args)]
struct DesignArg {
    /// Directory with lotteries.csv, menus.csv and fixtures.toml; the
    /// built-in design when omitted.
    #[arg(long)]
    design: Option<PathBuf>,
}

impl DesignArg {
    fn load(&self) -> Result<ExperimentDesign> {
        Ok(match &self.design {
            Some(dir) => ExperimentDesign::load_dir(dir).map_err(ReportError::from)?,
            None => builtin_design(),
        })
    }
}

#[derive(clap::Args)]
struct AnalyzeArgs {
    #[arg(long)]
    choices: PathBuf,
    #[command(flatten)]
    design: DesignArg,
    #[arg(long, value_enum, default_value = "strict")]
    policy: PolicyArg,
    /// FOSD reading for per-round counts.
    #[arg(long, value_enum, default_value = "dominated-choice")]
    fosd_mode: FosdModeArg,
    #[arg(long, value_enum, default_value = "declared")]
    taxonomy: TaxonomyArg,
    /// Minimum choice frequency for a lottery to enter the merged choice.
    #[arg(long, default_value = "0", value_parser = parse_fraction)]
    merge_threshold: Rational,
    /// Recorded in the report; the analysis itself is deterministic.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Analyse subjects on one thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(clap::Args)]
struct SimulateArgs {
    #[command(flatten)]
    design: DesignArg,
    #[arg(long)]
    agents: usize,
    #[arg(long, default_value_t = 20241213)]
    seed: u64,
    #[arg(long, value_enum, default_value = "uniform")]
    population: PopulationArg,
    /// Logit noise scale for EU agents.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long, default_value = "1/40", value_parser = parse_fraction)]
    percentile: Rational,
    #[arg(long, value_enum, default_value = "strict")]
    policy: PolicyArg,
    #[arg(long, value_enum, default_value = "strict")]
    hm_mode: HmModeArg,
    /// Let the uniform reference agents of the calibration defer.
    #[arg(long)]
    calibration_deferral: bool,
    /// Path of the generated choices file.
    #[arg(long)]
    out: PathBuf,
    /// Path of the JSON summary; standard output when omitted.
    #[arg(long)]
    summary: Option<PathBuf>,
    #[arg(long)]
    sequential: bool,
}

#[derive(clap::Args)]
struct AuditArgs {
    #[command(flatten)]
    design: DesignArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_fraction(s: &str) -> Result<Rational, String> {
    let r = rational::parse(s).ok_or_else(|| format!("`{s}` is not a number or fraction"))?;
    if r < rational::zero() || r > rational::one() {
        return Err(format!("`{s}` is outside [0, 1]"));
    }
    Ok(r)
}

fn execution(sequential: bool) -> Execution {
    if sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => fs::write(path, bytes).with_context(|| format!("writing {}", path.display())),
        None => io::stdout().write_all(bytes).context("writing to standard output"),
    }
}

fn json<T: serde::Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn analyze(args: AnalyzeArgs) -> Result<()> {
    let config = RunConfig {
        design: args.design.design,
        choices: args.choices,
        policy: args.policy.into(),
        fosd_mode: match args.fosd_mode {
            FosdModeArg::StrictAxiom => FosdMode::StrictAxiom,
            FosdModeArg::DominatedChoice => FosdMode::DominatedChoice,
        },
        taxonomy: match args.taxonomy {
            TaxonomyArg::Declared => Taxonomy::Declared,
            TaxonomyArg::Computed => Taxonomy::Computed,
        },
        merge_threshold: args.merge_threshold,
        out: args.out.clone(),
        seed: args.seed,
        execution: execution(args.sequential),
    };
    let report = run_analysis(&config)?;
    let bytes = match args.format {
        Format::Json => json(&report)?,
        Format::Csv => {
            let mut buf = Vec::new();
            write_subjects_csv(&report, &mut buf)?;
            buf
        }
    };
    emit(args.out.as_deref(), &bytes)
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let design = args.design.load()?;
    let mut spec = SimulationSpec::new(&design, args.agents, args.seed);
    let eu = |shape| Population::ExpectedUtility { shape, noise_scale: args.noise };
    spec.population = match args.population {
        PopulationArg::Uniform => Population::Uniform { include_deferral: true },
        PopulationArg::UniformActive => Population::Uniform { include_deferral: false },
        PopulationArg::Concave => eu(Shape::Concave),
        PopulationArg::Convex => eu(Shape::Convex),
        PopulationArg::Linear => eu(Shape::Linear),
        PopulationArg::Mixed => Population::Mixed { noise_scale: args.noise },
    };
    if let Some(rounds) = args.rounds {
        if rounds == 0 {
            bail!("--rounds must be positive");
        }
        spec.rounds = rounds;
    }
    spec.percentile = args.percentile;
    spec.policy = args.policy.into();
    spec.hm_mode = match args.hm_mode {
        HmModeArg::Strict => HmMode::Strict,
        HmModeArg::Weak => HmMode::Weak,
    };
    spec.calibration_deferral = args.calibration_deferral;
    spec.execution = execution(args.sequential);

    let output = run_simulation(&design, &spec)?;
    emit(Some(&args.out), &output.choices_csv)?;
    emit(args.summary.as_deref(), &json(&output.summary)?)
}

fn audit(args: AuditArgs) -> Result<()> {
    let design = args.design.load()?;
    emit(args.out.as_deref(), &json(&run_dominance_audit(&design))?)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Analyze(args) => analyze(args),
        Command::Simulate(args) => simulate(args),
        Command::AuditDominance(args) => audit(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let internal = e.downcast_ref::<ReportError>().is_some_and(ReportError::is_internal);
            ExitCode::from(if internal { 2 } else { 1 })
        }
    }
}
