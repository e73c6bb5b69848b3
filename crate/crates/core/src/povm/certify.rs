//! Informational-completeness diagnostics: the exact rank of the measurement
//! map plus sampled rank-one checks. The sampled parts are evidence only.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use serde::Serialize;

use super::{IcClass, Povm};
use crate::estimate::{mle_from_frequencies, EstimatorOptions};
use crate::qcore::{fidelity_pure, haar_random_state, rng_stream, CMat, CVec, PureState};

/// Singular values at or below this count as zero.
pub const RANK_TOL: f64 = 1e-9;
/// Probability vectors closer than this in sup-norm are indistinguishable.
pub const DISTINGUISH_TOL: f64 = 1e-8;
/// Noiseless reconstructions must reach this infidelity.
pub const STRICT_TOL: f64 = 1e-6;

/// Coordinates of a Hermitian matrix in an orthonormal basis of the real
/// space of Hermitian matrices: diagonal, then `√2 Re`, `√2 Im` for `i < j`.
pub fn real_vectorize(a: &CMat) -> Vec<f64> {
    let d = a.nrows();
    let mut v = Vec::with_capacity(d * d);
    v.extend((0..d).map(|i| a[(i, i)].re));
    let s = std::f64::consts::SQRT_2;
    for i in 0..d {
        for j in i + 1..d {
            v.push(s * a[(i, j)].re);
            v.push(s * a[(i, j)].im);
        }
    }
    v
}

/// Rows are the vectorized effects, so `M vec(rho)` lists the outcome
/// probabilities.
#[derive(Debug, Clone)]
pub struct MeasurementMap {
    pub matrix: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    /// Orthonormal basis of the null space, one column per vector.
    pub kernel: DMatrix<f64>,
}

impl MeasurementMap {
    pub fn new(povm: &Povm) -> Self {
        let d2 = povm.dim() * povm.dim();
        let rows: Vec<Vec<f64>> = povm.effects().map(|e| real_vectorize(e.matrix())).collect();
        let matrix = DMatrix::from_fn(rows.len(), d2, |r, c| rows[r][c]);
        // pad to at least d² rows so that V spans the whole column space
        let padded = DMatrix::from_fn(rows.len().max(d2), d2, |r, c| if r < rows.len() { rows[r][c] } else { 0.0 });
        let svd = padded.svd(false, true);
        let vt = svd.v_t.expect("requested V^T");
        let singular_values: Vec<f64> = svd.singular_values.iter().copied().collect();
        let null: Vec<usize> = (0..d2).filter(|&k| singular_values[k] <= RANK_TOL).collect();
        let kernel = DMatrix::from_fn(d2, null.len(), |r, c| vt[(null[c], r)]);
        Self { matrix, singular_values, kernel }
    }

    pub fn rank(&self) -> usize {
        self.singular_values.iter().filter(|&&s| s > RANK_TOL).count()
    }

    pub fn kernel_dim(&self) -> usize {
        self.kernel.ncols()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CertifyOptions {
    /// Pure-state pairs for the distinguishability check.
    pub r1_pairs: usize,
    /// Haar states for the reconstruction check; zero skips it.
    pub strict_states: usize,
    pub seed: u64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self { r1_pairs: 1000, strict_states: 50, seed: 0 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct R1Distinguishability {
    pub pairs_tested: usize,
    pub indistinguishable: usize,
    pub min_sup_difference: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct StrictnessEvidence {
    pub states_tested: usize,
    pub max_infidelity: f64,
    pub mean_infidelity: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct IcReport {
    pub povm: String,
    pub dim: usize,
    pub rank: usize,
    pub kernel_dim: usize,
    pub fully_ic: bool,
    pub r1_distinguishability: R1Distinguishability,
    pub strictness_evidence: Option<StrictnessEvidence>,
    pub claim: IcClass,
    /// Strongest class supported by the checks above.
    pub inferred: IcClass,
}

impl IcReport {
    /// A claim conflicts with the checks if it asserts more than they show.
    pub fn claim_consistent(&self) -> bool {
        match self.claim {
            IcClass::FullyIc => self.fully_ic,
            IcClass::R1sIc => self.inferred != IcClass::R1Ic && self.inferred != IcClass::Unknown,
            IcClass::R1Ic => self.inferred != IcClass::Unknown,
            IcClass::Unknown => true,
        }
    }
}

/// Second state of pair `k`; cycles through an independent state, a
/// diagonal phase change, complex conjugation and a small perturbation.
fn partner(psi: &PureState, k: usize, rng: &mut impl Rng) -> PureState {
    let d = psi.dim();
    let a = psi.amplitudes();
    let v: CVec = match k % 4 {
        0 => return haar_random_state(d, rng),
        1 => CVec::from_fn(d, |i, _| a[i] * C64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU))),
        2 => a.map(|z| z.conj()),
        _ => {
            let other = haar_random_state(d, rng);
            a + other.amplitudes() * C64::new(1e-3, 0.0)
        }
    };
    PureState::normalized(v).expect("nonzero partner")
}

fn r1_check(povm: &Povm, opts: &CertifyOptions) -> R1Distinguishability {
    let mut rng = rng_stream(opts.seed, &[0xD15]);
    let mut tested = 0;
    let mut bad = 0;
    let mut min_diff = f64::INFINITY;
    for k in 0..opts.r1_pairs {
        let psi = haar_random_state(povm.dim(), &mut rng);
        let phi = partner(&psi, k, &mut rng);
        // skip pairs that are (numerically) the same ray
        if 1.0 - psi.inner(&phi).norm_sqr() < 1e-12 {
            continue;
        }
        tested += 1;
        let diff = povm
            .pure_probabilities(&psi)
            .iter()
            .zip(povm.pure_probabilities(&phi))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        min_diff = min_diff.min(diff);
        if diff <= DISTINGUISH_TOL {
            bad += 1;
        }
    }
    R1Distinguishability { pairs_tested: tested, indistinguishable: bad, min_sup_difference: min_diff, passed: bad == 0 }
}

fn strictness_check(povm: &Povm, opts: &CertifyOptions) -> Option<StrictnessEvidence> {
    if opts.strict_states == 0 {
        return None;
    }
    let mut rng = rng_stream(opts.seed, &[0x5791C7]);
    let est = EstimatorOptions::default();
    let infids: Vec<f64> = (0..opts.strict_states)
        .map(|_| {
            let psi = haar_random_state(povm.dim(), &mut rng);
            match mle_from_frequencies(povm, &povm.pure_probabilities(&psi), &est) {
                Ok(r) => fidelity_pure(&psi, &r.rho_hat).map_or(1.0, |f| 1.0 - f),
                Err(_) => 1.0,
            }
        })
        .collect();
    let max = infids.iter().copied().fold(0.0, f64::max);
    Some(StrictnessEvidence {
        states_tested: infids.len(),
        max_infidelity: max,
        mean_infidelity: infids.iter().sum::<f64>() / infids.len() as f64,
        passed: max < STRICT_TOL,
    })
}

pub fn certify_ic(povm: &Povm, opts: &CertifyOptions) -> IcReport {
    let map = MeasurementMap::new(povm);
    let d2 = povm.dim() * povm.dim();
    let rank = map.rank();
    let fully_ic = rank == d2;
    let r1 = r1_check(povm, opts);
    let strict = strictness_check(povm, opts);
    let inferred = if fully_ic {
        IcClass::FullyIc
    } else if strict.as_ref().is_some_and(|s| s.passed) {
        IcClass::R1sIc
    } else if r1.passed {
        IcClass::R1Ic
    } else {
        IcClass::Unknown
    };
    IcReport {
        povm: povm.name.clone(),
        dim: povm.dim(),
        rank,
        kernel_dim: map.kernel_dim(),
        fully_ic,
        r1_distinguishability: r1,
        strictness_evidence: strict,
        claim: povm.ic_class_claim,
        inferred,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::povm::{build_named, build_standard_basis};
    use crate::qcore::{gue_generator, DensityMatrix};

    #[test]
    fn vectorization_preserves_inner_products() {
        let mut rng = rng_stream(1, &[]);
        let a = gue_generator(5, &mut rng);
        let b = gue_generator(5, &mut rng);
        let direct: f64 = (&a * &b).trace().re;
        let va = real_vectorize(&a);
        let vb = real_vectorize(&b);
        let via: f64 = va.iter().zip(&vb).map(|(x, y)| x * y).sum();
        assert!((direct - via).abs() < 1e-12);
    }

    #[test]
    fn map_rows_give_probabilities() {
        let povm = build_named("sic", 4).unwrap();
        let map = MeasurementMap::new(&povm);
        let psi = haar_random_state(4, &mut rng_stream(2, &[]));
        let rho = real_vectorize(psi.projector().matrix());
        let p = &map.matrix * nalgebra::DVector::from_vec(rho);
        for (a, b) in p.iter().zip(povm.pure_probabilities(&psi)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn ranks_of_builtins() {
        for (name, d, full) in [("mub", 4, true), ("gmb", 4, true), ("sic", 4, true), ("psi", 4, false), ("5gmb", 4, false)] {
            let map = MeasurementMap::new(&build_named(name, d).unwrap());
            assert_eq!(map.rank() + map.kernel_dim(), d * d);
            assert_eq!(map.rank() == d * d, full, "{name}");
        }
    }

    #[test]
    fn kernel_is_annihilated() {
        let povm = build_named("4gmb", 4).unwrap();
        let map = MeasurementMap::new(&povm);
        assert!(map.kernel_dim() > 0);
        assert!((&map.matrix * &map.kernel).amax() < 1e-10);
        let gram = map.kernel.tr_mul(&map.kernel);
        assert!((gram - DMatrix::identity(map.kernel_dim(), map.kernel_dim())).amax() < 1e-10);
    }

    #[test]
    fn standard_basis_fails_every_diagnostic() {
        let povm = build_standard_basis(4).unwrap();
        let report = certify_ic(&povm, &CertifyOptions { r1_pairs: 200, strict_states: 5, seed: 1 });
        assert_eq!(report.rank, 4);
        assert!(!report.fully_ic);
        assert!(!report.r1_distinguishability.passed);
        assert!(!report.strictness_evidence.unwrap().passed);
        assert_eq!(report.inferred, IcClass::Unknown);
    }

    #[test]
    fn classes_in_dimension_four() {
        let opts = CertifyOptions { r1_pairs: 400, strict_states: 10, seed: 3 };
        let mub = certify_ic(&build_named("mub", 4).unwrap(), &opts);
        assert_eq!(mub.inferred, IcClass::FullyIc);
        assert!(mub.claim_consistent());
        let psi = certify_ic(&build_named("psi", 4).unwrap(), &opts);
        assert!(!psi.fully_ic && psi.r1_distinguishability.passed);
        assert!(psi.claim_consistent());
    }

    #[test]
    fn mixed_kernel_direction_is_invisible() {
        // states differing along the kernel give equal probabilities
        let povm = build_named("5gmb", 4).unwrap();
        let map = MeasurementMap::new(&povm);
        let k = map.kernel.column(0);
        let d = 4;
        let mut h = CMat::zeros(d, d);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        (0..d).for_each(|i| h[(i, i)] = C64::new(k[i], 0.0));
        let mut idx = d;
        for i in 0..d {
            for j in i + 1..d {
                h[(i, j)] = C64::new(k[idx] * s, k[idx + 1] * s);
                h[(j, i)] = h[(i, j)].conj();
                idx += 2;
            }
        }
        let rho = DensityMatrix::maximally_mixed(d);
        let shifted = DensityMatrix::new(rho.matrix() + h * C64::new(0.05, 0.0)).unwrap();
        for (a, b) in povm.probabilities(&rho).unwrap().concat().iter().zip(povm.probabilities(&shifted).unwrap().concat()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
