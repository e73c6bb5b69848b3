//! Tomography experiments: Haar test states measured through each POVM under
//! the systematic error model, reconstructed, and scored by infidelity.
//!
//! Every random draw comes from a stream keyed by the master seed and the
//! trial's coordinates, so results do not depend on worker count or on which
//! other POVMs share the run.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{mle_estimate, EstimatorOptions};
use crate::povm::{build_named, load_povm, Povm};
use crate::qcore::{fidelity_pure, haar_random_state, rng_stream, PureState};
use crate::simulate::{prepare_state, ErrorModel, MeasurementRun};

const STATE_TAG: u64 = 0x57A7E;
const ERR_TAG: u64 = 0xE44;
const PREP_TAG: u64 = 0x9E9;
const NOISE_TAG: u64 = 0x4015E;

/// A built-in POVM name or a POVM file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PovmSpec {
    Name(String),
    File { file: PathBuf },
}

impl PovmSpec {
    pub fn build(&self, dim: usize) -> Result<Povm> {
        match self {
            PovmSpec::Name(n) => build_named(n, dim),
            PovmSpec::File { file } => {
                let p = load_povm(file)?;
                if p.dim() != dim {
                    return Err(Error::DimensionMismatch { expected: dim, found: p.dim() });
                }
                Ok(p)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRange {
    pub povm: PovmSpec,
    #[serde(default = "one")]
    pub n_min: usize,
    /// Defaults to the POVM's setting count.
    #[serde(default)]
    pub n_max: Option<usize>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OutputPaths {
    pub trials_csv: Option<PathBuf>,
    pub aggregate_csv: Option<PathBuf>,
    pub plot_data: Option<PathBuf>,
}

fn default_n_states() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dim: usize,
    #[serde(default)]
    pub povms: Vec<PovmSpec>,
    #[serde(default = "default_n_states")]
    pub n_states: usize,
    #[serde(default)]
    pub error_model: ErrorModel,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sweep: Option<SweepRange>,
    #[serde(default)]
    pub outputs: OutputPaths,
    #[serde(default)]
    pub estimator: EstimatorOptions,
}

impl ExperimentConfig {
    pub fn new(dim: usize, povms: &[&str]) -> Self {
        Self {
            dim,
            povms: povms.iter().map(|n| PovmSpec::Name(n.to_string())).collect(),
            n_states: default_n_states(),
            error_model: ErrorModel::default(),
            seed: 0,
            sweep: None,
            outputs: OutputPaths::default(),
            estimator: EstimatorOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_states == 0 {
            return Err(Error::invalid("n_states must be at least 1"));
        }
        let builtin = self.povms.iter().any(|p| matches!(p, PovmSpec::Name(_)))
            || matches!(self.sweep, Some(SweepRange { povm: PovmSpec::Name(_), .. }));
        if builtin && !matches!(self.dim, 4 | 16) {
            return Err(Error::invalid(format!("built-in POVMs need dim 4 or 16, got {}", self.dim)));
        }
        self.error_model.validate()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub povm: String,
    pub ic_class: String,
    pub d: usize,
    pub n_settings_used: usize,
    pub state_index: usize,
    /// NaN when the trial failed.
    pub infidelity: f64,
    pub objective: f64,
    pub converged: bool,
    pub seed: u64,
}

impl TrialResult {
    pub fn failed(&self) -> bool {
        !self.infidelity.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub povm: String,
    pub ic_class: String,
    pub d: usize,
    pub n_settings_used: usize,
    /// Clamped at zero; single trials may round to tiny negative values.
    pub mean_infidelity: f64,
    /// Sample standard deviation (n - 1 denominator) over the trials.
    pub std_infidelity: f64,
    /// Trials that produced an estimate.
    pub n_states: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub trials: Vec<TrialResult>,
    pub rows: Vec<AggregateRow>,
}

/// 64-bit FNV-1a, used to key random streams by POVM id.
pub fn fnv1a(text: &str) -> u64 {
    text.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3))
}

/// Test state `index` of a run; shared by every POVM.
pub fn test_state(seed: u64, dim: usize, index: usize) -> PureState {
    haar_random_state(dim, &mut rng_stream(seed, &[STATE_TAG, dim as u64, index as u64]))
}

/// One POVM (possibly a prefix of a larger one) inside an experiment.
struct Arm {
    povm: Povm,
    key: u64,
}

fn run_trial(arm: &Arm, run: &MeasurementRun, cfg: &ExperimentConfig, index: usize) -> TrialResult {
    let psi = test_state(cfg.seed, cfg.dim, index);
    let outcome = (|| {
        let rho = prepare_state(&psi, &cfg.error_model, &mut rng_stream(cfg.seed, &[PREP_TAG, arm.key, index as u64]))?;
        let record = run.measure(&rho, &mut rng_stream(cfg.seed, &[NOISE_TAG, arm.key, index as u64]))?;
        let est = mle_estimate(&record, &arm.povm, &cfg.estimator)?;
        let f = fidelity_pure(&psi, &est.rho_hat)?;
        Ok::<_, Error>((1.0 - f, est.objective, est.converged))
    })();
    let (infidelity, objective, converged) = outcome.unwrap_or((f64::NAN, f64::NAN, false));
    TrialResult {
        povm: arm.povm.name.clone(),
        ic_class: arm.povm.ic_class_claim.as_str().to_string(),
        d: arm.povm.dim(),
        n_settings_used: arm.povm.n_settings(),
        state_index: index,
        infidelity,
        objective,
        converged,
        seed: cfg.seed,
    }
}

fn aggregate(trials: &[TrialResult]) -> AggregateRow {
    let first = &trials[0];
    let ok: Vec<f64> = trials.iter().filter(|t| !t.failed()).map(|t| t.infidelity).collect();
    let n = ok.len();
    let mean = if n == 0 { f64::NAN } else { ok.iter().sum::<f64>() / n as f64 };
    let mean_reported = mean.max(0.0);
    let std = if n < 2 {
        0.0
    } else {
        (ok.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    };
    AggregateRow {
        povm: first.povm.clone(),
        ic_class: first.ic_class.clone(),
        d: first.d,
        n_settings_used: first.n_settings_used,
        mean_infidelity: mean_reported,
        std_infidelity: std,
        n_states: n,
        seed: first.seed,
    }
}

fn run_arms(arms: &[Arm], cfg: &ExperimentConfig) -> Result<SweepResult> {
    let runs: Vec<MeasurementRun> = arms
        .iter()
        .map(|a| MeasurementRun::new(&a.povm, &cfg.error_model, cfg.seed, &[ERR_TAG, a.key]))
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> = (0..arms.len()).flat_map(|a| (0..cfg.n_states).map(move |s| (a, s))).collect();
    // collect() keeps index order, so the reduction below is deterministic
    let trials: Vec<TrialResult> = jobs.par_iter().map(|&(a, s)| run_trial(&arms[a], &runs[a], cfg, s)).collect();
    let rows = trials.chunks(cfg.n_states).map(aggregate).collect();
    Ok(SweepResult { trials, rows })
}

/// Every configured POVM against the same `n_states` test states.
pub fn run_table(cfg: &ExperimentConfig) -> Result<SweepResult> {
    cfg.validate()?;
    if cfg.povms.is_empty() {
        return Err(Error::invalid("no POVMs configured"));
    }
    let arms = cfg
        .povms
        .iter()
        .map(|spec| {
            let povm = spec.build(cfg.dim)?;
            Ok(Arm { key: fnv1a(&povm.name), povm })
        })
        .collect::<Result<Vec<_>>>()?;
    run_arms(&arms, cfg)
}

/// Tomography with the first `N` settings for each `N` in `n_values`. Every
/// prefix shares the full POVM's error draws, so the full-length row equals
/// the corresponding [`run_table`] row.
pub fn run_basis_sweep(cfg: &ExperimentConfig, povm: &PovmSpec, n_values: &[usize]) -> Result<SweepResult> {
    cfg.validate()?;
    let full = povm.build(cfg.dim)?;
    if !full.settings().iter().all(|s| s.is_orthobasis) || full.n_settings() < 2 {
        return Err(Error::invalid(format!("'{}' is not a multi-setting family of bases", full.name)));
    }
    if n_values.is_empty() {
        return Err(Error::invalid("empty sweep"));
    }
    let key = fnv1a(&full.name);
    let arms = n_values
        .iter()
        .map(|&n| {
            if n == 0 || n > full.n_settings() {
                return Err(Error::invalid(format!("N = {n} outside 1..={}", full.n_settings())));
            }
            Ok(Arm { povm: full.truncated(n)?, key })
        })
        .collect::<Result<Vec<_>>>()?;
    run_arms(&arms, cfg)
}

/// `n_min..=n_max` from the config's sweep range.
pub fn sweep_values(range: &SweepRange, dim: usize) -> Result<Vec<usize>> {
    let full = range.povm.build(dim)?.n_settings();
    let hi = range.n_max.unwrap_or(full);
    if range.n_min == 0 || range.n_min > hi || hi > full {
        return Err(Error::invalid(format!("sweep range {}..={hi} outside 1..={full}", range.n_min)));
    }
    Ok((range.n_min..=hi).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailureSetReport {
    pub dim: usize,
    pub n_states: usize,
    pub generic_mean_infidelity: f64,
    pub generic_max_infidelity: f64,
    pub failure_mean_infidelity: f64,
    pub failure_max_infidelity: f64,
}

/// Noiseless PSI tomography of generic states and of states with
/// `<0|psi> = 0`, on which the PSI probabilities ignore relative phases.
pub fn failure_set_probe(dim: usize, n_states: usize, seed: u64) -> Result<FailureSetReport> {
    if n_states == 0 {
        return Err(Error::invalid("n_states must be at least 1"));
    }
    let povm = build_named("psi", dim)?;
    let opts = EstimatorOptions::default();
    let infid = |psi: &PureState| -> Result<f64> {
        let r = crate::estimate::mle_from_frequencies(&povm, &povm.pure_probabilities(psi), &opts)?;
        Ok(1.0 - fidelity_pure(psi, &r.rho_hat)?)
    };
    let stats = |xs: Vec<f64>| (xs.iter().sum::<f64>() / xs.len() as f64, xs.iter().copied().fold(0.0, f64::max));
    let generic = (0..n_states)
        .into_par_iter()
        .map(|j| infid(&haar_random_state(dim, &mut rng_stream(seed, &[0xF5, 0, j as u64]))))
        .collect::<Result<Vec<_>>>()?;
    let failing = (0..n_states)
        .into_par_iter()
        .map(|j| {
            let mut amps = haar_random_state(dim, &mut rng_stream(seed, &[0xF5, 1, j as u64])).amplitudes().clone();
            amps[0] = num_complex::Complex64::new(0.0, 0.0);
            infid(&PureState::normalized(amps)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let (gm, gx) = stats(generic);
    let (fm, fx) = stats(failing);
    Ok(FailureSetReport {
        dim,
        n_states,
        generic_mean_infidelity: gm,
        generic_max_infidelity: gx,
        failure_mean_infidelity: fm,
        failure_max_infidelity: fx,
    })
}

/// Runs `f` on a pool of `jobs` workers (`None`: rayon's default).
pub fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        None => Ok(f()),
        Some(0) => Err(Error::invalid("--jobs must be at least 1")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::invalid(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

fn write_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::invalid(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::invalid(e.to_string()))
}

fn read_csv<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<T>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|e| Error::Schema(e.to_string()))
}

pub fn trials_csv(trials: &[TrialResult]) -> Result<String> {
    write_csv(trials)
}

pub fn parse_trials_csv(text: &str) -> Result<Vec<TrialResult>> {
    read_csv(text)
}

pub fn aggregate_csv(rows: &[AggregateRow]) -> Result<String> {
    write_csv(rows)
}

pub fn parse_aggregate_csv(text: &str) -> Result<Vec<AggregateRow>> {
    read_csv(text)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlotPoint {
    #[serde(rename = "N")]
    pub n: usize,
    pub mean_infidelity: f64,
}

/// Two-column `(N, mean_infidelity)` curve.
pub fn plot_data(rows: &[AggregateRow]) -> Result<String> {
    let pts: Vec<PlotPoint> =
        rows.iter().map(|r| PlotPoint { n: r.n_settings_used, mean_infidelity: r.mean_infidelity }).collect();
    write_csv(&pts)
}

pub fn parse_plot_data(text: &str) -> Result<Vec<PlotPoint>> {
    read_csv(text)
}
