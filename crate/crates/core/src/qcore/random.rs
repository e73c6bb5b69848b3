//! Seeded sampling: per-trial streams, Haar states and GUE perturbations.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use super::{eigh, trace, CMat, CVec, PureState, UnitaryMap};

/// Generator used for every random draw in the crate.
pub type StreamRng = ChaCha20Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Independent, reproducible stream keyed by `(master_seed, path...)`.
///
/// The same key always yields the same stream regardless of which thread
/// asks for it, which is what makes parallel and serial runs agree.
pub fn rng_stream(master_seed: u64, path: &[u64]) -> StreamRng {
    let mut rng = ChaCha20Rng::seed_from_u64(master_seed);
    let stream = path
        .iter()
        .fold(0x243F_6A88_85A3_08D3u64, |acc, &k| splitmix64(acc ^ splitmix64(k)));
    rng.set_stream(stream);
    rng
}

fn complex_normal(rng: &mut impl Rng) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Haar-uniform pure state: complex Gaussian components, normalized.
pub fn haar_random_state(dim: usize, rng: &mut impl Rng) -> PureState {
    assert!(dim >= 2, "haar_random_state: dimension must be at least 2");
    loop {
        let v = CVec::from_fn(dim, |_, _| complex_normal(rng));
        if let Ok(s) = PureState::normalized(v) {
            return s;
        }
    }
}

/// GUE draw normalized so that `Tr(G^2) = dim`.
pub fn gue_generator(dim: usize, rng: &mut impl Rng) -> CMat {
    let mut g = CMat::zeros(dim, dim);
    for j in 0..dim {
        g[(j, j)] = C64::new(rng.sample(StandardNormal), 0.0);
        for i in 0..j {
            let z = complex_normal(rng) * std::f64::consts::FRAC_1_SQRT_2;
            g[(i, j)] = z;
            g[(j, i)] = z.conj();
        }
    }
    let tr2: f64 = g.iter().map(|z| z.norm_sqr()).sum();
    g * C64::new((dim as f64 / tr2).sqrt(), 0.0)
}

/// `exp(-i * epsilon * G)` for Hermitian `G`.
pub fn unitary_from_generator(generator: &CMat, epsilon: f64) -> UnitaryMap {
    let n = generator.nrows();
    if epsilon == 0.0 {
        return UnitaryMap::identity(n);
    }
    let (vals, vecs) = eigh(generator);
    let phases = CVec::from_iterator(n, vals.iter().map(|&l| C64::from_polar(1.0, -epsilon * l)));
    let mut scaled = vecs.clone();
    for (k, mut col) in scaled.column_iter_mut().enumerate() {
        col *= phases[k];
    }
    UnitaryMap::from_raw(scaled * vecs.adjoint())
}

/// Random unitary `exp(-i epsilon G)` with `G` a normalized GUE draw.
///
/// The generator is always drawn (even for `epsilon == 0`) so the stream
/// position does not depend on `epsilon`.
pub fn random_perturbation_unitary(dim: usize, epsilon: f64, rng: &mut impl Rng) -> UnitaryMap {
    assert!(epsilon >= 0.0, "perturbation strength must be nonnegative");
    let g = gue_generator(dim, rng);
    unitary_from_generator(&g, epsilon)
}

/// Process (entanglement) infidelity of `U` relative to the identity,
/// `1 - |Tr U|^2 / d^2`.
pub fn process_infidelity(u: &UnitaryMap) -> f64 {
    let d = u.dim() as f64;
    1.0 - trace(u.matrix()).norm_sqr() / (d * d)
}

/// Bisects the perturbation strength so the mean process infidelity over
/// `draws` fixed GUE generators equals `target`.
pub fn calibrate_epsilon(dim: usize, target: f64, draws: usize, seed: u64) -> f64 {
    let mut rng = rng_stream(seed, &[0xCA11B]);
    let gens: Vec<CMat> = (0..draws).map(|_| gue_generator(dim, &mut rng)).collect();
    // eigen-decompose once; infidelity only depends on the spectrum
    let spectra: Vec<Vec<f64>> = gens.iter().map(|g| eigh(g).0).collect();
    let mean_infid = |eps: f64| {
        spectra
            .iter()
            .map(|s| {
                let tr: C64 = s.iter().map(|&l| C64::from_polar(1.0, -eps * l)).sum();
                1.0 - tr.norm_sqr() / (dim * dim) as f64
            })
            .sum::<f64>()
            / draws as f64
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    while mean_infid(hi) < target {
        hi *= 2.0;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mean_infid(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn haar_norm_and_determinism() {
        let a = haar_random_state(16, &mut rng_stream(5, &[1, 2]));
        let b = haar_random_state(16, &mut rng_stream(5, &[1, 2]));
        let c = haar_random_state(16, &mut rng_stream(5, &[1, 3]));
        assert!((a.amplitudes().norm_squared() - 1.0).abs() < 1e-12);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn haar_second_moment() {
        // E|<psi1|psi2>|^2 = 1/d for independent Haar states
        let d = 16;
        let n = 10_000;
        let mut rng = rng_stream(2024, &[]);
        let samples: Vec<f64> = (0..n)
            .map(|_| {
                let a = haar_random_state(d, &mut rng);
                let b = haar_random_state(d, &mut rng);
                a.inner(&b).norm_sqr()
            })
            .collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!((mean - 1.0 / 16.0).abs() < 3.0 * se, "mean {mean}, se {se}");
    }

    #[test]
    fn perturbation_properties() {
        let mut rng = rng_stream(1, &[]);
        let u0 = random_perturbation_unitary(8, 0.0, &mut rng);
        assert!((u0.matrix() - CMat::identity(8, 8)).norm() < 1e-12);
        let u = random_perturbation_unitary(16, 0.3, &mut rng);
        assert!(UnitaryMap::new(u.matrix().clone()).is_ok());
    }

    #[test]
    fn gue_normalization() {
        let g = gue_generator(16, &mut rng_stream(9, &[]));
        let tr2 = trace(&(&g * &g)).re;
        assert!((tr2 - 16.0).abs() < 1e-10);
        assert!(super::super::hermiticity_error(&g) < 1e-15);
    }

    #[test]
    fn stream_separation() {
        let mut a = rng_stream(1, &[0, 1]);
        let mut b = rng_stream(1, &[1, 0]);
        assert_ne!(a.random::<u64>(), b.random::<u64>());
    }
}
