//! Tomographic data under systematic measurement errors: imperfect state
//! preparation, fixed per-setting unitary perturbations of the measurement,
//! and additive frequency noise.

mod nnls;
mod tof;

use std::path::Path;

use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::povm::{neumark_embed, NeumarkEmbedding, Povm};
use crate::qcore::{
    eigh, gue_generator, hermitize, random_perturbation_unitary, rng_stream, CMat, CVec, DensityMatrix,
    PureState, UnitaryMap,
};

pub use nnls::nnls;
pub use tof::{fit_tof, synthesize_tof, synthesize_with, TofFit, TofSignal, TofTemplates, N_CHANNELS};

/// Perturbation strength whose GUE unitaries have mean process infidelity
/// 0.018 in `d = 16` (bisection over 200 draws, see
/// [`crate::qcore::calibrate_epsilon`]).
pub const DEFAULT_EPSILON_MAP: f64 = 0.134_926_007_691_961_67;
pub const DEFAULT_FREQ_NOISE_SIGMA: f64 = 0.01;
pub const DEFAULT_PREP_INFIDELITY: f64 = 0.005;
/// Host dimension into which single nonorthogonal settings are dilated.
pub const HOST_DIM: usize = 16;
/// Share of the preparation infidelity produced by a coherent rotation; the
/// rest comes from depolarization.
const PREP_COHERENT_SHARE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorModel {
    /// Strength of the fixed unitary perturbation applied to each setting.
    pub epsilon_map: f64,
    /// Standard deviation of the additive noise on frequencies.
    pub freq_noise_sigma: f64,
    /// Target infidelity `1 - <psi|rho_a|psi>` of the prepared state.
    pub prep_infidelity: f64,
    /// Reuse one perturbation for all settings instead of independent draws.
    #[serde(default)]
    pub correlated_waveforms: bool,
}

impl Default for ErrorModel {
    fn default() -> Self {
        Self {
            epsilon_map: DEFAULT_EPSILON_MAP,
            freq_noise_sigma: DEFAULT_FREQ_NOISE_SIGMA,
            prep_infidelity: DEFAULT_PREP_INFIDELITY,
            correlated_waveforms: false,
        }
    }
}

impl ErrorModel {
    /// All error sources switched off.
    pub fn noiseless() -> Self {
        Self { epsilon_map: 0.0, freq_noise_sigma: 0.0, prep_infidelity: 0.0, correlated_waveforms: false }
    }

    pub fn validate(&self) -> Result<()> {
        let params = [self.epsilon_map, self.freq_noise_sigma, self.prep_infidelity];
        if params.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::invalid("error-model parameters must be finite and nonnegative"));
        }
        if self.freq_noise_sigma >= 0.2 {
            return Err(Error::invalid("freq_noise_sigma must be below 0.2"));
        }
        Ok(())
    }
}

/// Imperfect preparation of `target`: a small coherent rotation followed by
/// depolarization, tuned so that `<psi|rho_a|psi> = 1 - prep_infidelity`.
pub fn prepare_state(target: &PureState, model: &ErrorModel, rng: &mut impl Rng) -> Result<DensityMatrix> {
    model.validate()?;
    let d = target.dim();
    let eta = model.prep_infidelity;
    if eta > 1.0 - 1.0 / d as f64 {
        return Err(Error::invalid(format!("prep_infidelity {eta} is not reachable in d = {d}")));
    }
    if eta == 0.0 {
        return Ok(target.projector());
    }
    // coherent part: exp(-i eps G)|psi> with eps solving the overlap equation
    let g = gue_generator(d, rng);
    let (vals, vecs) = eigh(&g);
    let psi = target.amplitudes();
    let weights: Vec<f64> = (0..d).map(|k| vecs.column(k).dotc(psi).norm_sqr()).collect();
    let coherent_infid = |eps: f64| {
        let z: C64 = weights.iter().zip(&vals).map(|(&w, &l)| C64::from_polar(w, -eps * l)).sum();
        1.0 - z.norm_sqr()
    };
    let goal = PREP_COHERENT_SHARE * eta;
    let mut eps = 0.0;
    let mut hi = None;
    let mut x = 0.0;
    while x < 1.0 {
        x += 1e-3;
        if coherent_infid(x) >= goal {
            hi = Some(x);
            break;
        }
    }
    if let Some(mut hi) = hi {
        let mut lo = hi - 1e-3;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if coherent_infid(mid) < goal {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        eps = 0.5 * (lo + hi);
    }
    let u = crate::qcore::unitary_from_generator(&g, eps);
    let rotated: CVec = u.matrix() * psi;
    let f_u = rotated.dotc(psi).norm_sqr();
    let lambda = (f_u - (1.0 - eta)) / (f_u - 1.0 / d as f64);
    let pure = &rotated * rotated.adjoint();
    let mixed = CMat::identity(d, d).unscale(d as f64);
    let rho = hermitize(&(pure * C64::new(1.0 - lambda, 0.0) + mixed * C64::new(lambda, 0.0)));
    Ok(DensityMatrix::from_raw(rho))
}

/// Fixed perturbation of one setting, and the effects it actually realizes.
#[derive(Debug, Clone)]
struct PerturbedSetting {
    unitary: UnitaryMap,
    effects: Vec<CMat>,
}

/// One run of a POVM: the per-setting error unitaries are drawn once and
/// shared by every state measured in the run.
#[derive(Debug, Clone)]
pub struct MeasurementRun {
    povm: Povm,
    model: ErrorModel,
    embedding: Option<NeumarkEmbedding>,
    settings: Vec<PerturbedSetting>,
    seed: u64,
}

impl MeasurementRun {
    /// Draws setting `i`'s perturbation from stream `(seed, key..., i)`
    /// (`(seed, key..., 0)` for every setting with correlated waveforms), so
    /// a POVM prefix sees the same errors as the full POVM.
    pub fn new(povm: &Povm, model: &ErrorModel, seed: u64, key: &[u64]) -> Result<Self> {
        model.validate()?;
        let embedding = if povm.is_single_nonorthogonal() {
            Some(neumark_embed(povm, HOST_DIM.max(povm.total_outcomes()).max(povm.dim()))?)
        } else {
            None
        };
        let err_dim = embedding.as_ref().map_or(povm.dim(), NeumarkEmbedding::host_dim);
        let mut settings = Vec::with_capacity(povm.n_settings());
        for (i, s) in povm.settings().iter().enumerate() {
            let stream = if model.correlated_waveforms { 0 } else { i as u64 };
            let mut path = key.to_vec();
            path.push(stream);
            let mut rng = rng_stream(seed, &path);
            let unitary = random_perturbation_unitary(err_dim, model.epsilon_map, &mut rng);
            let effects = if model.epsilon_map == 0.0 {
                s.effects.iter().map(|e| e.matrix().clone()).collect()
            } else if let Some(emb) = &embedding {
                // Π U_N^H U_err^H |k>, read out on the assigned sublevels
                let total = unitary.matrix() * emb.unitary.matrix();
                emb.assignment
                    .iter()
                    .map(|&k| {
                        let v = CVec::from_fn(emb.sub_dim, |i, _| total[(k, i)].conj());
                        &v * v.adjoint()
                    })
                    .collect()
            } else {
                s.effects.iter().map(|e| hermitize(&unitary.conjugate(e.matrix()))).collect()
            };
            settings.push(PerturbedSetting { unitary, effects });
        }
        Ok(Self { povm: povm.clone(), model: *model, embedding, settings, seed })
    }

    /// Same as [`MeasurementRun::new`] with the seed taken from `rng`.
    pub fn from_rng(povm: &Povm, model: &ErrorModel, rng: &mut impl Rng) -> Result<Self> {
        let seed = rng.random();
        Self::new(povm, model, seed, &[])
    }

    pub fn povm(&self) -> &Povm {
        &self.povm
    }

    pub fn error_unitary(&self, setting: usize) -> &UnitaryMap {
        &self.settings[setting].unitary
    }

    pub fn embedding(&self) -> Option<&NeumarkEmbedding> {
        self.embedding.as_ref()
    }

    /// Outcome probabilities of the perturbed measurement, per setting.
    pub fn probabilities(&self, rho: &DensityMatrix) -> Result<Vec<Vec<f64>>> {
        if rho.dim() != self.povm.dim() {
            return Err(Error::DimensionMismatch { expected: self.povm.dim(), found: rho.dim() });
        }
        let mut out = Vec::with_capacity(self.settings.len());
        for s in &self.settings {
            let p: Vec<f64> = s
                .effects
                .iter()
                .map(|e| e.iter().zip(rho.matrix().iter()).map(|(a, b)| (a * b.conj()).re).sum())
                .collect();
            if let Some(bad) = p.iter().find(|&&x| x < -1e-9) {
                return Err(Error::Numerical(format!("negative outcome probability {bad:e}")));
            }
            out.push(p);
        }
        Ok(out)
    }

    /// Frequencies `clip(p + N(0, sigma_eff), 0, 1)` with
    /// `sigma_eff = sigma * sqrt(d / outcomes_in_setting)`.
    pub fn measure(&self, rho: &DensityMatrix, rng: &mut impl Rng) -> Result<MeasurementRecord> {
        let probs = self.probabilities(rho)?;
        let d = self.povm.dim() as f64;
        let mut settings = Vec::with_capacity(probs.len());
        for (p, s) in probs.into_iter().zip(self.povm.settings()) {
            let sigma = self.model.freq_noise_sigma * (d / s.len() as f64).sqrt();
            let frequencies = if sigma > 0.0 {
                let noise = Normal::new(0.0, sigma).map_err(|e| Error::invalid(e.to_string()))?;
                p.iter().map(|&x| (x + noise.sample(rng)).clamp(0.0, 1.0)).collect()
            } else {
                p.iter().map(|&x| x.clamp(0.0, 1.0)).collect()
            };
            settings.push(SettingFrequencies { label: s.label.clone(), frequencies });
        }
        Ok(MeasurementRecord {
            povm_id: self.povm.name.clone(),
            seed: self.seed,
            error_model: self.model,
            settings,
        })
    }
}

/// Measures `rho` in a fresh run whose errors are drawn from `rng`.
pub fn measure(rho: &DensityMatrix, povm: &Povm, model: &ErrorModel, rng: &mut impl Rng) -> Result<MeasurementRecord> {
    MeasurementRun::from_rng(povm, model, rng)?.measure(rho, rng)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingFrequencies {
    pub label: String,
    pub frequencies: Vec<f64>,
}

/// Outcome frequencies of one state, aligned with the POVM's settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub povm_id: String,
    pub seed: u64,
    pub error_model: ErrorModel,
    pub settings: Vec<SettingFrequencies>,
}

impl MeasurementRecord {
    /// Frequencies in setting order.
    pub fn flat(&self) -> Vec<f64> {
        self.settings.iter().flat_map(|s| s.frequencies.iter().copied()).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::io::write_atomic(path.as_ref(), self.to_json()?.as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::povm::build_named;
    use crate::qcore::{calibrate_epsilon, fidelity_pure, haar_random_state, process_infidelity};

    fn state(d: usize, seed: u64) -> PureState {
        haar_random_state(d, &mut rng_stream(seed, &[9]))
    }

    #[test]
    fn default_epsilon_matches_calibration() {
        let eps = calibrate_epsilon(16, 0.018, 200, 1);
        assert!((eps - DEFAULT_EPSILON_MAP).abs() < 1e-12);
        let mut rng = rng_stream(1, &[0xCA11B]);
        let mean: f64 = (0..200)
            .map(|_| process_infidelity(&random_perturbation_unitary(16, eps, &mut rng)))
            .sum::<f64>()
            / 200.0;
        assert!((mean - 0.018).abs() < 1e-9);
    }

    #[test]
    fn noiseless_frequencies_follow_born_rule() {
        for (name, d) in [("std", 4), ("mub", 4), ("sic", 4), ("psi", 4), ("gmb", 16)] {
            let povm = build_named(name, d).unwrap();
            let psi = state(d, 1);
            let run = MeasurementRun::new(&povm, &ErrorModel::noiseless(), 5, &[]).unwrap();
            let rec = run.measure(&psi.projector(), &mut rng_stream(6, &[])).unwrap();
            for (a, b) in rec.flat().iter().zip(povm.pure_probabilities(&psi)) {
                assert!((a - b).abs() < 1e-12, "{name}");
            }
        }
    }

    #[test]
    fn embedded_setting_reduces_to_ideal_for_tiny_errors() {
        let povm = build_named("psi", 4).unwrap();
        let model = ErrorModel { epsilon_map: 1e-12, ..ErrorModel::noiseless() };
        let run = MeasurementRun::new(&povm, &model, 5, &[]).unwrap();
        assert_eq!(run.embedding().unwrap().host_dim(), 16);
        let psi = state(4, 2);
        let p = run.probabilities(&psi.projector()).unwrap().concat();
        for (a, b) in p.iter().zip(povm.pure_probabilities(&psi)) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn errors_are_systematic_within_a_run() {
        let povm = build_named("mub", 4).unwrap();
        let model = ErrorModel { freq_noise_sigma: 0.0, prep_infidelity: 0.0, ..ErrorModel::default() };
        let run = MeasurementRun::new(&povm, &model, 5, &[1]).unwrap();
        let rho = state(4, 3).projector();
        let a = run.measure(&rho, &mut rng_stream(1, &[])).unwrap();
        let b = run.measure(&rho, &mut rng_stream(2, &[])).unwrap();
        assert_eq!(a, b);
        let again = MeasurementRun::new(&povm, &model, 5, &[1]).unwrap();
        assert_eq!(again.error_unitary(2).matrix(), run.error_unitary(2).matrix());
        let other = MeasurementRun::new(&povm, &model, 5, &[2]).unwrap();
        assert!((other.error_unitary(2).matrix() - run.error_unitary(2).matrix()).norm() > 1e-3);
    }

    #[test]
    fn settings_are_uncorrelated_unless_requested() {
        let povm = build_named("mub", 4).unwrap();
        let run = MeasurementRun::new(&povm, &ErrorModel::default(), 5, &[]).unwrap();
        assert!((run.error_unitary(0).matrix() - run.error_unitary(1).matrix()).norm() > 1e-3);
        let model = ErrorModel { correlated_waveforms: true, ..ErrorModel::default() };
        let run = MeasurementRun::new(&povm, &model, 5, &[]).unwrap();
        for i in 1..povm.n_settings() {
            assert_eq!(run.error_unitary(0).matrix(), run.error_unitary(i).matrix());
        }
    }

    #[test]
    fn prefixes_share_errors() {
        let povm = build_named("mub", 16).unwrap();
        let full = MeasurementRun::new(&povm, &ErrorModel::default(), 8, &[3]).unwrap();
        let part = MeasurementRun::new(&povm.truncated(5).unwrap(), &ErrorModel::default(), 8, &[3]).unwrap();
        for i in 0..5 {
            assert_eq!(full.error_unitary(i).matrix(), part.error_unitary(i).matrix());
        }
    }

    #[test]
    fn prepared_states_hit_target_fidelity() {
        let model = ErrorModel::default();
        for seed in 0..50 {
            let psi = state(16, seed);
            let rho = prepare_state(&psi, &model, &mut rng_stream(seed, &[4])).unwrap();
            rho.check().unwrap();
            let f = fidelity_pure(&psi, &rho).unwrap();
            assert!((f - (1.0 - DEFAULT_PREP_INFIDELITY)).abs() < 1e-9, "{f}");
        }
        let psi = state(4, 0);
        assert!(prepare_state(&psi, &ErrorModel { prep_infidelity: 0.9, ..model }, &mut rng_stream(0, &[])).is_err());
    }

    #[test]
    fn frequency_noise_has_scaled_width() {
        let povm = build_named("psi", 4).unwrap();
        let model = ErrorModel { epsilon_map: 0.0, prep_infidelity: 0.0, ..ErrorModel::default() };
        let run = MeasurementRun::new(&povm, &model, 1, &[]).unwrap();
        let rho = DensityMatrix::maximally_mixed(4);
        let p = run.probabilities(&rho).unwrap().concat();
        let mut rng = rng_stream(2, &[]);
        let mut sq = 0.0;
        let mut n = 0.0;
        for _ in 0..400 {
            let f = run.measure(&rho, &mut rng).unwrap().flat();
            assert!(f.iter().all(|x| (0.0..=1.0).contains(x)));
            sq += f.iter().zip(&p).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            n += f.len() as f64;
        }
        let expected = 0.01 * (4.0 / p.len() as f64).sqrt();
        assert!(((sq / n).sqrt() / expected - 1.0).abs() < 0.05);
    }

    #[test]
    fn rejects_bad_models() {
        let povm = build_named("mub", 4).unwrap();
        for model in [
            ErrorModel { epsilon_map: -1.0, ..ErrorModel::default() },
            ErrorModel { freq_noise_sigma: 0.3, ..ErrorModel::default() },
            ErrorModel { prep_infidelity: f64::NAN, ..ErrorModel::default() },
        ] {
            assert!(MeasurementRun::new(&povm, &model, 0, &[]).is_err());
        }
        let run = MeasurementRun::new(&povm, &ErrorModel::default(), 0, &[]).unwrap();
        assert!(run.probabilities(&DensityMatrix::maximally_mixed(2)).is_err());
    }

    #[test]
    fn record_round_trip() {
        let povm = build_named("sic", 4).unwrap();
        let rec = measure(&state(4, 7).projector(), &povm, &ErrorModel::default(), &mut rng_stream(3, &[])).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rec.json");
        rec.save(&path).unwrap();
        assert_eq!(MeasurementRecord::load(&path).unwrap(), rec);
        assert!(MeasurementRecord::from_json("{}").is_err());
    }
}
