//! Batch experiment runner behind the CLI: config parsing and merging, the
//! five scenarios, per-trial seeding, and machine-readable reports.
//!
//! Reproducibility contract: trial `t` draws from stream `t` of the master
//! seed (scaling uses one global trial counter across its size grid), every
//! sub-draw inside a trial happens in a fixed documented order, and
//! aggregation is a fold in trial order. Reports from identical configs are
//! byte-identical whether trials ran sequentially or in parallel.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::ensemble::{imbalance, prepare_balanced_ensemble, prepare_ensemble, prune_to_balance};
use crate::error::{Error, Result};
use crate::protocols::{
    blind_distinguish, fluctuation_distinguish, run_timeline, signal_attempt, MessageBit,
    PreparationGuess, TimelineScenario,
};
use crate::quantum::MeasurementAxis;
use crate::rng::RandomSource;
use crate::stats::{
    binomial_exact, expected_abs_imbalance, mutual_information_bits, scaling_fit,
    sigma_zero_probability, tv_distance, tv_distance_to_exact, Histogram, JointCounts,
    ORACLE_MAX_COUNT,
};

/// Grid of ensemble sizes the scaling scenario sweeps.
pub const SCALING_GRID: [usize; 7] = [64, 128, 256, 512, 1024, 2048, 4096];

/// Per-trial statistic records are included while `trials` stays at or
/// below this; beyond it the report carries summary statistics only.
pub const TRIAL_RECORD_LIMIT: usize = 10_000;
/// Qubit records are exported while `trials * n` stays at or below this.
pub const QUBIT_RECORD_LIMIT: usize = 100_000;
/// Timeline event records are included while `trials` stays at or below this.
pub const EVENT_RECORD_LIMIT: usize = 1_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Prepare,
    NoSignal,
    Distinguish,
    Scaling,
    Timeline,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scenario::Prepare => write!(f, "prepare"),
            Scenario::NoSignal => write!(f, "no-signal"),
            Scenario::Distinguish => write!(f, "distinguish"),
            Scenario::Scaling => write!(f, "scaling"),
            Scenario::Timeline => write!(f, "timeline"),
        }
    }
}

/// Measurement-axis flag value: `x`, `z`, or `bloch:<theta>,<phi>` with the
/// spherical angles in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AxisSpec {
    X,
    Z,
    Bloch { theta: f64, phi: f64 },
}

impl AxisSpec {
    pub fn axis(&self) -> Result<MeasurementAxis> {
        match self {
            AxisSpec::X => Ok(MeasurementAxis::x()),
            AxisSpec::Z => Ok(MeasurementAxis::z()),
            AxisSpec::Bloch { theta, phi } => {
                if !theta.is_finite() || !phi.is_finite() {
                    return Err(Error::invalid_config(
                        "basis",
                        "bloch angles must be finite",
                    ));
                }
                Ok(MeasurementAxis::from_angles(*theta, *phi))
            }
        }
    }
}

impl FromStr for AxisSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" => Ok(AxisSpec::X),
            "z" => Ok(AxisSpec::Z),
            other => {
                let angles = other.strip_prefix("bloch:").ok_or_else(|| {
                    Error::invalid_config(
                        "basis",
                        format!("`{other}` is not x, z, or bloch:<theta>,<phi>"),
                    )
                })?;
                let (theta, phi) = angles.split_once(',').ok_or_else(|| {
                    Error::invalid_config("basis", format!("`{other}` is missing the phi angle"))
                })?;
                let parse = |name: &str, v: &str| {
                    v.trim().parse::<f64>().map_err(|_| {
                        Error::invalid_config("basis", format!("`{v}` is not a valid {name} angle"))
                    })
                };
                Ok(AxisSpec::Bloch {
                    theta: parse("theta", theta)?,
                    phi: parse("phi", phi)?,
                })
            }
        }
    }
}

impl fmt::Display for AxisSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AxisSpec::X => write!(f, "x"),
            AxisSpec::Z => write!(f, "z"),
            AxisSpec::Bloch { theta, phi } => write!(f, "bloch:{theta},{phi}"),
        }
    }
}

impl Serialize for AxisSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for AxisSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(|e| D::Error::custom(format!("{e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
}

/// Fully resolved experiment configuration. Identical configs (including
/// the seed) produce byte-identical reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub n: usize,
    pub trials: usize,
    pub copies: usize,
    pub basis: AxisSpec,
    pub latency: f64,
    pub seed: u64,
    pub prune: bool,
    pub format: OutputFormat,
}

impl ExperimentConfig {
    pub fn defaults(scenario: Scenario) -> Self {
        Self {
            scenario,
            n: 100,
            trials: 10_000,
            copies: 10,
            basis: AxisSpec::Z,
            latency: 1.0,
            seed: 0,
            prune: false,
            format: OutputFormat::Json,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid_config("n", "must be at least 1"));
        }
        if self.trials == 0 {
            return Err(Error::invalid_config("trials", "must be at least 1"));
        }
        if self.copies == 0 {
            return Err(Error::invalid_config("copies", "must be at least 1"));
        }
        if !self.latency.is_finite() || self.latency < 0.0 {
            return Err(Error::invalid_config("latency", "must be non-negative"));
        }
        if (self.prune || self.scenario == Scenario::Timeline) && self.n < 2 {
            return Err(Error::invalid_config(
                "n",
                "balancing needs at least 2 qubits",
            ));
        }
        let axis = self.basis.axis()?;
        if matches!(self.scenario, Scenario::Distinguish | Scenario::NoSignal)
            && !axis.in_xz_plane()
        {
            return Err(Error::invalid_config(
                "basis",
                format!(
                    "scenario `{}` needs an axis in the x-z plane, got `{}`",
                    self.scenario, self.basis
                ),
            ));
        }
        Ok(())
    }

    /// Parses a flat JSON object with the flag names as keys. `scenario`
    /// must be present; every other field falls back to its default. This is
    /// the config-file format and the FFI entry format.
    pub fn from_json_str(json: &str) -> Result<Self> {
        let partial: PartialConfig = serde_json::from_str(json)
            .map_err(|e| Error::invalid_config("config", e.to_string()))?;
        let scenario = partial
            .scenario
            .ok_or_else(|| Error::invalid_config("scenario", "missing"))?;
        let config = partial.over(Self::defaults(scenario));
        config.validate()?;
        Ok(config)
    }
}

/// Optional-field mirror of [`ExperimentConfig`] for config files and flag
/// merging. Unknown keys are rejected with a message naming them.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialConfig {
    scenario: Option<Scenario>,
    n: Option<usize>,
    trials: Option<usize>,
    copies: Option<usize>,
    basis: Option<AxisSpec>,
    latency: Option<f64>,
    seed: Option<u64>,
    prune: Option<bool>,
    format: Option<OutputFormat>,
    out: Option<String>,
}

impl PartialConfig {
    fn over(&self, base: ExperimentConfig) -> ExperimentConfig {
        ExperimentConfig {
            scenario: base.scenario,
            n: self.n.unwrap_or(base.n),
            trials: self.trials.unwrap_or(base.trials),
            copies: self.copies.unwrap_or(base.copies),
            basis: self.basis.unwrap_or(base.basis),
            latency: self.latency.unwrap_or(base.latency),
            seed: self.seed.unwrap_or(base.seed),
            prune: self.prune.unwrap_or(base.prune),
            format: self.format.unwrap_or(base.format),
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "bellsim",
    version,
    about = "Two-party Bell-pair ensemble experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug)]
pub struct CommonArgs {
    /// Ensemble size: number of shared pairs per preparation
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of independent trials
    #[arg(long)]
    pub trials: Option<usize>,
    /// Master seed for the per-trial random streams
    #[arg(long)]
    pub seed: Option<u64>,
    /// Report format
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
    /// Write the report to this path instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Flat JSON config file; command-line flags override its values
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Prepare ensembles and export their qubits
    Prepare {
        #[command(flatten)]
        common: CommonArgs,
        /// Preparation axis (x | z | bloch:<theta>,<phi>)
        #[arg(long)]
        basis: Option<AxisSpec>,
        /// Balance outcome counts exactly before exporting
        #[arg(long)]
        prune: bool,
    },
    /// Blind distinguisher on unpruned ensembles: accuracy, TV distance, MI
    #[command(name = "no-signal")]
    NoSignal {
        #[command(flatten)]
        common: CommonArgs,
        /// Alice's measurement strategy axis
        #[arg(long)]
        basis: Option<AxisSpec>,
    },
    /// Fluctuation distinguisher on several balanced copies
    Distinguish {
        #[command(flatten)]
        common: CommonArgs,
        /// Alice's measurement axis
        #[arg(long)]
        basis: Option<AxisSpec>,
        /// Balanced copies per verdict
        #[arg(long)]
        copies: Option<usize>,
        /// Balance each copy with a pruning discard list
        #[arg(long)]
        prune: bool,
    },
    /// Mean |N_delta| across a grid of sizes and its power-law exponent
    Scaling {
        #[command(flatten)]
        common: CommonArgs,
        /// Preparation axis for the swept ensembles
        #[arg(long)]
        basis: Option<AxisSpec>,
    },
    /// Event timelines for all three protocols at one channel latency
    Timeline {
        #[command(flatten)]
        common: CommonArgs,
        /// Classical channel latency in seconds
        #[arg(long, allow_hyphen_values = true)]
        latency: Option<f64>,
    },
}

/// A resolved CLI invocation: the validated config plus the output path.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedInvocation {
    pub config: ExperimentConfig,
    pub out: Option<PathBuf>,
}

/// Parses command-line tokens (argv\[0\] included) into a validated config.
/// Clap-level failures (unknown flags, unparsable values, flags that do not
/// belong to the chosen scenario) surface as invalid-config errors naming
/// the offending token.
pub fn parse_config<I, T>(args: I) -> Result<ParsedInvocation>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli =
        Cli::try_parse_from(args).map_err(|e| Error::invalid_config("args", e.to_string()))?;
    resolve_invocation(cli)
}

/// Merges subcommand flags over the optional config file over defaults,
/// then validates.
pub fn resolve_invocation(cli: Cli) -> Result<ParsedInvocation> {
    let (scenario, common, basis, copies, latency, prune) = match cli.command {
        Command::Prepare {
            common,
            basis,
            prune,
        } => (Scenario::Prepare, common, basis, None, None, prune),
        Command::NoSignal { common, basis } => {
            (Scenario::NoSignal, common, basis, None, None, false)
        }
        Command::Distinguish {
            common,
            basis,
            copies,
            prune,
        } => (Scenario::Distinguish, common, basis, copies, None, prune),
        Command::Scaling { common, basis } => (Scenario::Scaling, common, basis, None, None, false),
        Command::Timeline { common, latency } => {
            (Scenario::Timeline, common, None, None, latency, false)
        }
    };

    let file = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::invalid_config("config", format!("{}: {e}", path.display())))?;
            let partial: PartialConfig = serde_json::from_str(&text)
                .map_err(|e| Error::invalid_config("config", format!("{}: {e}", path.display())))?;
            if let Some(file_scenario) = partial.scenario {
                if file_scenario != scenario {
                    return Err(Error::invalid_config(
                        "scenario",
                        format!(
                            "config file says `{file_scenario}` but the command line chose `{scenario}`"
                        ),
                    ));
                }
            }
            partial
        }
        None => PartialConfig::default(),
    };

    let flags = PartialConfig {
        scenario: Some(scenario),
        n: common.n,
        trials: common.trials,
        copies,
        basis,
        latency,
        seed: common.seed,
        prune: prune.then_some(true),
        format: common.format,
        out: None,
    };

    let config = flags.over(file.over(ExperimentConfig::defaults(scenario)));
    config.validate()?;
    let out = common.out.or_else(|| file.out.as_ref().map(PathBuf::from));
    Ok(ParsedInvocation { config, out })
}

/// One report record; the variant in use depends on the scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Record {
    /// Long-format per-trial statistic (no-signal, distinguish, scaling).
    Trial {
        trial: usize,
        scenario: String,
        n: usize,
        statistic: String,
        value: f64,
    },
    /// One exported qubit (prepare).
    Qubit {
        trial: usize,
        n: usize,
        pruned: bool,
        origin_index: usize,
        amp_up_re: f64,
        amp_up_im: f64,
        amp_down_re: f64,
        amp_down_im: f64,
    },
    /// One timeline event (timeline).
    Event {
        trial: usize,
        protocol: String,
        timestamp: f64,
        actor: String,
        kind: String,
        detail: String,
    },
}

/// Aggregate statistic with the exact oracle value beside it when one
/// exists.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryStat {
    pub statistic: String,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<f64>,
}

impl SummaryStat {
    fn new(statistic: &str, value: f64) -> Self {
        Self {
            statistic: statistic.to_string(),
            value,
            oracle: None,
        }
    }

    fn with_oracle(statistic: &str, value: f64, oracle: f64) -> Self {
        Self {
            statistic: statistic.to_string(),
            value,
            oracle: Some(oracle),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub summary: Vec<SummaryStat>,
    pub records: Vec<Record>,
}

fn map_trials<T, F>(trials: usize, parallel: bool, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    if parallel {
        (0..trials).into_par_iter().map(f).collect()
    } else {
        (0..trials).map(f).collect()
    }
}

/// Runs the configured scenario with trials in parallel.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    run_with(config, true)
}

/// Sequential twin of [`run_experiment`]; produces the identical report.
pub fn run_experiment_sequential(config: &ExperimentConfig) -> Result<ExperimentReport> {
    run_with(config, false)
}

fn run_with(config: &ExperimentConfig, parallel: bool) -> Result<ExperimentReport> {
    config.validate()?;
    let (summary, records) = match config.scenario {
        Scenario::Prepare => prepare_scenario(config, parallel)?,
        Scenario::NoSignal => no_signal_scenario(config, parallel)?,
        Scenario::Distinguish => distinguish_scenario(config, parallel)?,
        Scenario::Scaling => scaling_scenario(config, parallel)?,
        Scenario::Timeline => timeline_scenario(config, parallel)?,
    };
    Ok(ExperimentReport {
        config: config.clone(),
        summary,
        records,
    })
}

struct PrepareTrial {
    abs_delta: f64,
    final_len: usize,
    qubits: Vec<Record>,
}

fn prepare_scenario(
    config: &ExperimentConfig,
    parallel: bool,
) -> Result<(Vec<SummaryStat>, Vec<Record>)> {
    let axis = config.basis.axis()?;
    let export_qubits = config.trials.saturating_mul(config.n) <= QUBIT_RECORD_LIMIT;
    let outputs = map_trials(config.trials, parallel, |trial| {
        let mut rng = RandomSource::new(config.seed, trial as u64);
        // draw order: n pair collapses, then (when pruning) any re-preparations
        let (ensemble, record) = prepare_ensemble(config.n, axis, &mut rng)?;
        let abs_delta = imbalance(&record)?.value().abs() as f64;
        let final_ensemble = if config.prune {
            match prune_to_balance(&ensemble, &record) {
                Ok((balanced, _)) => balanced,
                // an all-equal batch cannot balance; start over like Bob would
                Err(Error::EmptyEnsemble) => prepare_balanced_ensemble(config.n, axis, &mut rng)?.0,
                Err(e) => return Err(e),
            }
        } else {
            ensemble
        };
        let qubits = if export_qubits {
            final_ensemble
                .states()
                .iter()
                .zip(final_ensemble.origin_indices())
                .map(|(state, &origin_index)| Record::Qubit {
                    trial,
                    n: final_ensemble.len(),
                    pruned: final_ensemble.label().pruned(),
                    origin_index,
                    amp_up_re: state.amp_up().re,
                    amp_up_im: state.amp_up().im,
                    amp_down_re: state.amp_down().re,
                    amp_down_im: state.amp_down().im,
                })
                .collect()
        } else {
            Vec::new()
        };
        Ok(PrepareTrial {
            abs_delta,
            final_len: final_ensemble.len(),
            qubits,
        })
    })?;

    let trials = config.trials as f64;
    let mean_abs = outputs.iter().map(|o| o.abs_delta).sum::<f64>() / trials;
    let mean_len = outputs.iter().map(|o| o.final_len as f64).sum::<f64>() / trials;
    let mut summary = Vec::new();
    if config.n.is_multiple_of(2) && config.n <= ORACLE_MAX_COUNT {
        summary.push(SummaryStat::with_oracle(
            "mean_abs_imbalance",
            mean_abs,
            expected_abs_imbalance(config.n)?,
        ));
    } else {
        summary.push(SummaryStat::new("mean_abs_imbalance", mean_abs));
    }
    summary.push(SummaryStat::new("mean_final_size", mean_len));
    if !export_qubits {
        summary.push(SummaryStat::new("records_omitted", 1.0));
    }
    let records = outputs.into_iter().flat_map(|o| o.qubits).collect();
    Ok((summary, records))
}

struct NoSignalTrial {
    sigma_z_prep: i64,
    sigma_x_prep: i64,
    correct_z: bool,
    correct_x: bool,
}

fn no_signal_scenario(
    config: &ExperimentConfig,
    parallel: bool,
) -> Result<(Vec<SummaryStat>, Vec<Record>)> {
    let strategy = config.basis.axis()?;
    let outputs = map_trials(config.trials, parallel, |trial| {
        let mut rng = RandomSource::new(config.seed, trial as u64);
        // draw order per trial: z preparation, its blind measurement, then
        // the x preparation and its blind measurement
        let run_bit = |bit: MessageBit, rng: &mut RandomSource| -> Result<(i64, bool)> {
            let truth = match bit {
                MessageBit::One => PreparationGuess::ZPrepared,
                MessageBit::Zero => PreparationGuess::XPrepared,
            };
            let (ensemble, _bob_private) = signal_attempt(bit, config.n, rng)?;
            let verdict = blind_distinguish(ensemble.into_states(), &strategy, rng)?;
            Ok((verdict.evidence[0].value(), verdict.guess == truth))
        };
        let (sigma_z_prep, correct_z) = run_bit(MessageBit::One, &mut rng)?;
        let (sigma_x_prep, correct_x) = run_bit(MessageBit::Zero, &mut rng)?;
        Ok(NoSignalTrial {
            sigma_z_prep,
            sigma_x_prep,
            correct_z,
            correct_x,
        })
    })?;

    let mut hist_z = Histogram::new();
    let mut hist_x = Histogram::new();
    let mut joint = JointCounts::new(3);
    let mut correct = 0u64;
    for o in &outputs {
        hist_z.record(o.sigma_z_prep);
        hist_x.record(o.sigma_x_prep);
        // Bob's bit against sign(Σ) ∈ {-, 0, +}
        joint.record(true, (o.sigma_z_prep.signum() + 1) as usize);
        joint.record(false, (o.sigma_x_prep.signum() + 1) as usize);
        correct += o.correct_z as u64 + o.correct_x as u64;
    }
    let accuracy = correct as f64 / (2 * config.trials) as f64;

    let mut summary = vec![
        SummaryStat::with_oracle("blind_accuracy", accuracy, 0.5),
        SummaryStat::with_oracle("tv_distance", tv_distance(&hist_z, &hist_x)?, 0.0),
        SummaryStat::with_oracle(
            "mutual_information_bits",
            mutual_information_bits(&joint)?,
            0.0,
        ),
    ];
    if config.n <= ORACLE_MAX_COUNT {
        let exact = binomial_exact(config.n)?;
        summary.push(SummaryStat::with_oracle(
            "tv_to_exact_z_prep",
            tv_distance_to_exact(&hist_z, &exact)?,
            0.0,
        ));
        summary.push(SummaryStat::with_oracle(
            "tv_to_exact_x_prep",
            tv_distance_to_exact(&hist_x, &exact)?,
            0.0,
        ));
    }

    let records = if config.trials <= TRIAL_RECORD_LIMIT {
        outputs
            .iter()
            .enumerate()
            .flat_map(|(trial, o)| {
                [
                    ("sigma_z_prep", o.sigma_z_prep as f64),
                    ("sigma_x_prep", o.sigma_x_prep as f64),
                    ("blind_correct_z_prep", o.correct_z as u64 as f64),
                    ("blind_correct_x_prep", o.correct_x as u64 as f64),
                ]
                .map(|(statistic, value)| Record::Trial {
                    trial,
                    scenario: config.scenario.to_string(),
                    n: config.n,
                    statistic: statistic.to_string(),
                    value,
                })
            })
            .collect()
    } else {
        summary.push(SummaryStat::new("records_omitted", 1.0));
        Vec::new()
    };
    Ok((summary, records))
}

struct DistinguishTrial {
    correct_z: bool,
    correct_x: bool,
    oracle_error_x: f64,
    mean_copy_len: f64,
}

fn distinguish_scenario(
    config: &ExperimentConfig,
    parallel: bool,
) -> Result<(Vec<SummaryStat>, Vec<Record>)> {
    let axis = config.basis.axis()?;
    let outputs = map_trials(config.trials, parallel, |trial| {
        let mut rng = RandomSource::new(config.seed, trial as u64);
        // draw order per trial: k z-prepared copies and their measurements,
        // then k x-prepared copies and theirs
        let run_prep = |bit: MessageBit, rng: &mut RandomSource| -> Result<(bool, f64, f64)> {
            let truth = match bit {
                MessageBit::One => PreparationGuess::ZPrepared,
                MessageBit::Zero => PreparationGuess::XPrepared,
            };
            let mut copies = Vec::with_capacity(config.copies);
            for _ in 0..config.copies {
                let states = if config.prune {
                    prepare_balanced_ensemble(config.n, bit.axis(), rng)?
                        .0
                        .into_states()
                } else {
                    prepare_ensemble(config.n, bit.axis(), rng)?.0.into_states()
                };
                copies.push(states);
            }
            let sizes: Vec<usize> = copies.iter().map(|c| c.len()).collect();
            let mut oracle_error = 1.0;
            for &size in &sizes {
                oracle_error *= sigma_zero_probability(size)?;
            }
            let mean_len = sizes.iter().sum::<usize>() as f64 / sizes.len() as f64;
            let verdict = fluctuation_distinguish(copies, &axis, rng)?;
            Ok((verdict.guess == truth, oracle_error, mean_len))
        };
        let (correct_z, _, len_z) = run_prep(MessageBit::One, &mut rng)?;
        let (correct_x, oracle_error_x, len_x) = run_prep(MessageBit::Zero, &mut rng)?;
        Ok(DistinguishTrial {
            correct_z,
            correct_x,
            oracle_error_x,
            mean_copy_len: (len_z + len_x) / 2.0,
        })
    })?;

    let trials = config.trials as f64;
    let accuracy_z = outputs.iter().filter(|o| o.correct_z).count() as f64 / trials;
    let accuracy_x = outputs.iter().filter(|o| o.correct_x).count() as f64 / trials;
    let mean_oracle_error = outputs.iter().map(|o| o.oracle_error_x).sum::<f64>() / trials;
    let mean_copy_len = outputs.iter().map(|o| o.mean_copy_len).sum::<f64>() / trials;

    let mut summary = vec![
        SummaryStat::with_oracle("verdict_accuracy_z_prep", accuracy_z, 1.0),
        SummaryStat::with_oracle(
            "verdict_accuracy_x_prep",
            accuracy_x,
            1.0 - mean_oracle_error,
        ),
        SummaryStat::new("mean_copy_size", mean_copy_len),
        SummaryStat::new("oracle_error_x_prep", mean_oracle_error),
    ];

    let records = if config.trials <= TRIAL_RECORD_LIMIT {
        outputs
            .iter()
            .enumerate()
            .flat_map(|(trial, o)| {
                [
                    ("verdict_correct_z_prep", o.correct_z as u64 as f64),
                    ("verdict_correct_x_prep", o.correct_x as u64 as f64),
                    ("oracle_error_x_prep", o.oracle_error_x),
                ]
                .map(|(statistic, value)| Record::Trial {
                    trial,
                    scenario: config.scenario.to_string(),
                    n: config.n,
                    statistic: statistic.to_string(),
                    value,
                })
            })
            .collect()
    } else {
        summary.push(SummaryStat::new("records_omitted", 1.0));
        Vec::new()
    };
    Ok((summary, records))
}

fn scaling_scenario(
    config: &ExperimentConfig,
    parallel: bool,
) -> Result<(Vec<SummaryStat>, Vec<Record>)> {
    let axis = config.basis.axis()?;
    let total = SCALING_GRID.len() * config.trials;
    // one global trial counter across the grid keeps streams unique
    let outputs = map_trials(total, parallel, |global| {
        let size = SCALING_GRID[global / config.trials];
        let mut rng = RandomSource::new(config.seed, global as u64);
        let (_, record) = prepare_ensemble(size, axis, &mut rng)?;
        Ok(imbalance(&record)?.value().abs() as f64)
    })?;

    let mut records = Vec::new();
    let mut empirical = Vec::new();
    let mut oracle_points = Vec::new();
    for (i, &size) in SCALING_GRID.iter().enumerate() {
        let chunk = &outputs[i * config.trials..(i + 1) * config.trials];
        let mean_abs = chunk.iter().sum::<f64>() / config.trials as f64;
        let oracle = expected_abs_imbalance(size)?;
        empirical.push((size, mean_abs));
        oracle_points.push((size, oracle));
        for (statistic, value) in [
            ("mean_abs_imbalance", mean_abs),
            ("oracle_abs_imbalance", oracle),
        ] {
            records.push(Record::Trial {
                trial: i,
                scenario: config.scenario.to_string(),
                n: size,
                statistic: statistic.to_string(),
                value,
            });
        }
    }

    let fit = scaling_fit(&empirical)?;
    let oracle_fit = scaling_fit(&oracle_points)?;
    let summary = vec![
        SummaryStat::with_oracle("scaling_exponent", fit.exponent, oracle_fit.exponent),
        SummaryStat::new("scaling_r_squared", fit.r_squared),
        SummaryStat::new("scaling_intercept", fit.intercept),
    ];
    Ok((summary, records))
}

fn timeline_scenario(
    config: &ExperimentConfig,
    parallel: bool,
) -> Result<(Vec<SummaryStat>, Vec<Record>)> {
    const PROTOCOLS: [TimelineScenario; 3] = [
        TimelineScenario::SignalAttempt,
        TimelineScenario::Telephone,
        TimelineScenario::BalancedDistinguish,
    ];
    let keep_events = config.trials <= EVENT_RECORD_LIMIT;
    let outputs = map_trials(config.trials, parallel, |trial| {
        let mut rng = RandomSource::new(config.seed, trial as u64);
        let mut events = Vec::new();
        for protocol in PROTOCOLS {
            let log = run_timeline(protocol, config.n, config.latency, &mut rng)?;
            log.validate()?;
            if keep_events {
                for event in log.events() {
                    events.push(Record::Event {
                        trial,
                        protocol: protocol.to_string(),
                        timestamp: event.timestamp,
                        actor: event.actor.to_string(),
                        kind: event.kind.to_string(),
                        detail: event.detail.clone(),
                    });
                }
            }
        }
        Ok(events)
    })?;

    let mut summary = vec![
        SummaryStat::new("protocol_runs", (3 * config.trials) as f64),
        SummaryStat::with_oracle("causality_violations", 0.0, 0.0),
    ];
    if !keep_events {
        summary.push(SummaryStat::new("records_omitted", 1.0));
    }
    Ok((summary, outputs.into_iter().flatten().collect()))
}

/// Pretty JSON rendering of a report, trailing newline included.
pub fn render_json(report: &ExperimentReport) -> Result<String> {
    let mut text = serde_json::to_string_pretty(report)
        .map_err(|e| Error::Io(format!("failed to encode report: {e}")))?;
    text.push('\n');
    Ok(text)
}

/// CSV rendering: config and summary as `#` comment lines around a
/// rectangular record table whose columns depend on the scenario.
pub fn render_csv(report: &ExperimentReport) -> Result<String> {
    let config_json = serde_json::to_string(&report.config)
        .map_err(|e| Error::Io(format!("failed to encode config: {e}")))?;
    let mut lines = vec![format!("# config: {config_json}")];
    let header = match report.config.scenario {
        Scenario::Prepare => {
            "trial,n,pruned,origin_index,amp_up_re,amp_up_im,amp_down_re,amp_down_im"
        }
        Scenario::Timeline => "trial,protocol,timestamp,actor,kind,detail",
        _ => "trial,scenario,n,statistic,value",
    };
    lines.push(header.to_string());
    for record in &report.records {
        lines.push(match record {
            Record::Trial {
                trial,
                scenario,
                n,
                statistic,
                value,
            } => format!("{trial},{scenario},{n},{statistic},{value}"),
            Record::Qubit {
                trial,
                n,
                pruned,
                origin_index,
                amp_up_re,
                amp_up_im,
                amp_down_re,
                amp_down_im,
            } => format!(
                "{trial},{n},{pruned},{origin_index},{amp_up_re},{amp_up_im},{amp_down_re},{amp_down_im}"
            ),
            Record::Event {
                trial,
                protocol,
                timestamp,
                actor,
                kind,
                detail,
            } => format!("{trial},{protocol},{timestamp},{actor},{kind},{detail}"),
        });
    }
    for stat in &report.summary {
        lines.push(match stat.oracle {
            Some(oracle) => {
                format!(
                    "# summary: {}={} oracle={}",
                    stat.statistic, stat.value, oracle
                )
            }
            None => format!("# summary: {}={}", stat.statistic, stat.value),
        });
    }
    lines.push(String::new());
    Ok(lines.join("\n"))
}

/// Renders the report in its configured format.
pub fn render(report: &ExperimentReport) -> Result<String> {
    match report.config.format {
        OutputFormat::Json => render_json(report),
        OutputFormat::Csv => render_csv(report),
    }
}
