//! Complete sets of mutually unbiased bases in dimension `2^n` from the
//! field spread of GF(2^n).

use num_complex::Complex64 as C64;
use rand::Rng;

use super::gf2n::Gf2n;
use super::{IcClass, Povm, Setting};
use crate::error::{Error, Result};
use crate::qcore::{eigh, rng_stream, CMat, CVec};

const MUB_SEED: u64 = 0x4D55_4200;
const MIN_GAP: f64 = 1e-6;
const MAX_ATTEMPTS: u64 = 64;

/// Hermitian Pauli operator `i^{|a & b|} X^a Z^b` on `n` qubits.
///
/// Basis index `k` has qubit `i` in bit `i`; `X^a|k> = |k ^ a>` and
/// `Z^b|k> = (-1)^{popcount(b & k)} |k>`.
pub fn pauli_hermitian(n: u32, a: u32, b: u32) -> CMat {
    let d = 1usize << n;
    let phase = match (a & b).count_ones() % 4 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, 1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, -1.0),
    };
    let mut m = CMat::zeros(d, d);
    for k in 0..d as u32 {
        let sign = if (b & k).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
        m[((k ^ a) as usize, k as usize)] = phase * sign;
    }
    m
}

/// Symplectic labels `(a, b)` of the nonidentity Paulis in each commuting
/// class, in spread order: `lambda = inf` first, then `lambda = 0, 1, 2, ...`
/// as polynomial bit masks.
pub fn mub_class_paulis(field: &Gf2n) -> Vec<(String, Vec<(u32, u32)>)> {
    let q = field.order();
    let mut classes = Vec::with_capacity(q as usize + 1);
    classes.push(("lambda=inf".to_string(), (1..q).map(|x| (0, x)).collect()));
    for lambda in 0..q {
        let members = (1..q)
            .map(|x| (x, field.dual_coordinates(field.mul(lambda, x))))
            .collect();
        classes.push((format!("lambda={lambda}"), members));
    }
    classes
}

/// Joint eigenbasis of a commuting set of Hermitian Paulis.
fn joint_eigenbasis(n: u32, members: &[(u32, u32)], stream: &[u64]) -> Result<Vec<CVec>> {
    let d = 1usize << n;
    let paulis: Vec<CMat> = members.iter().map(|&(a, b)| pauli_hermitian(n, a, b)).collect();
    for attempt in 0..MAX_ATTEMPTS {
        let mut path = stream.to_vec();
        path.push(attempt);
        let mut rng = rng_stream(MUB_SEED, &path);
        let mut h = CMat::zeros(d, d);
        for p in &paulis {
            h += p * C64::new(rng.random_range(0.5..1.5), 0.0);
        }
        let (vals, vecs) = eigh(&h);
        let gap = vals.windows(2).map(|w| w[0] - w[1]).fold(f64::INFINITY, f64::min);
        if gap >= MIN_GAP {
            return Ok((0..d).map(|k| vecs.column(k).into_owned()).collect());
        }
    }
    Err(Error::Numerical("no nondegenerate combination found for a Pauli class".into()))
}

/// The `d + 1` mutually unbiased bases for `d` a power of two (`d <= 16`).
pub fn build_mub(dim: usize) -> Result<Povm> {
    let field = Gf2n::with_order(dim)
        .ok_or_else(|| Error::invalid(format!("MUB construction needs d in {{2,4,8,16}}, got {dim}")))?;
    let n = field.degree();
    let mut settings = Vec::with_capacity(dim + 1);
    for (idx, (label, members)) in mub_class_paulis(&field).into_iter().enumerate() {
        let basis = joint_eigenbasis(n, &members, &[dim as u64, idx as u64])?;
        settings.push(Setting::from_basis(label, &basis));
    }
    Povm::new("mub", dim, settings, IcClass::FullyIc)
}

/// The first `count` bases of [`build_mub`]; five bases are expected to be
/// rank-one strictly informationally complete.
pub fn build_mub_subset(dim: usize, count: usize) -> Result<Povm> {
    let full = build_mub(dim)?;
    let claim = if count == 5 && dim >= 5 { IcClass::R1sIc } else { IcClass::Unknown };
    let mut sub = full.truncated(count)?.renamed(format!("{count}mub"));
    if count == full.n_settings() {
        sub = sub.renamed("mub");
    } else {
        sub.ic_class_claim = claim;
    }
    Ok(sub)
}
