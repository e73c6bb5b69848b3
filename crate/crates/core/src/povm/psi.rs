//! The `3d - 2` outcome rank-one POVM probing populations and the
//! coherences `c_0^* c_j`.

use num_complex::Complex64 as C64;

use super::{IcClass, Povm, Setting};
use crate::error::{Error, Result};
use crate::qcore::{CVec, HermitianOperator};

/// `E_0 = (1 - t(d-1))|0><0|` and `E_{j,m} = (1/3)|w_jm><w_jm|` with
/// `|w_jm> = √t|0> + ω^m|j>`, `ω = e^{2πi/3}`, `t = 1/(2(d-1))`.
pub fn build_psi(dim: usize) -> Result<Povm> {
    if dim < 2 {
        return Err(Error::invalid("PSI POVM needs dimension >= 2"));
    }
    let t = 1.0 / (2.0 * (dim - 1) as f64);
    let mut effects = Vec::with_capacity(3 * dim - 2);
    let mut v0 = CVec::zeros(dim);
    v0[0] = C64::new((1.0 - t * (dim - 1) as f64).sqrt(), 0.0);
    effects.push(HermitianOperator::rank_one(&v0));
    let scale = (1.0f64 / 3.0).sqrt();
    for j in 1..dim {
        for m in 0..3 {
            let omega = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * m as f64 / 3.0);
            let mut w = CVec::zeros(dim);
            w[0] = C64::new(scale * t.sqrt(), 0.0);
            w[j] = omega * scale;
            effects.push(HermitianOperator::rank_one(&w));
        }
    }
    let setting = Setting { label: "psi".into(), effects, is_orthobasis: false };
    Povm::new("psi", dim, vec![setting], IcClass::R1sIc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{eigh, PureState};

    #[test]
    fn counts_and_completeness() {
        for d in [2usize, 4, 16] {
            let p = build_psi(d).unwrap();
            assert_eq!(p.total_outcomes(), 3 * d - 2);
            assert!(p.settings()[0].completeness_residual() < 1e-12);
            for e in p.effects() {
                let (vals, _) = eigh(e.matrix());
                assert!(vals[1].abs() < 1e-14, "effect is not rank one");
            }
        }
    }

    #[test]
    fn phase_blind_on_failure_set() {
        // <0|psi> = 0: probabilities only depend on |c_j|
        let p = build_psi(4).unwrap();
        let a = PureState::from_slice(&[
            C64::new(0.0, 0.0),
            C64::new(0.6, 0.0),
            C64::new(0.0, 0.64),
            C64::new(0.48, 0.0),
        ])
        .unwrap();
        let b = PureState::from_slice(&[
            C64::new(0.0, 0.0),
            C64::from_polar(0.6, 1.1),
            C64::from_polar(0.64, -2.0),
            C64::from_polar(0.48, 0.3),
        ])
        .unwrap();
        let pa = p.pure_probabilities(&a);
        let pb = p.pure_probabilities(&b);
        for (x, y) in pa.iter().zip(&pb) {
            assert!((x - y).abs() < 1e-15);
        }
        // generic states with c_0 != 0 are told apart
        let c = PureState::from_slice(&[
            C64::new(0.3, 0.0),
            C64::new(0.6, 0.0),
            C64::new(0.0, 0.64),
            C64::new(0.48, 0.0),
        ])
        .unwrap();
        let d = PureState::from_slice(&[
            C64::new(0.3, 0.0),
            C64::new(0.6, 0.0),
            C64::new(0.64, 0.0),
            C64::new(0.48, 0.0),
        ])
        .unwrap();
        let diff = p
            .pure_probabilities(&c)
            .iter()
            .zip(p.pure_probabilities(&d))
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(diff > 1e-3);
    }
}
