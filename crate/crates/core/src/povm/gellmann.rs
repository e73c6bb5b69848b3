//! Bases built from pairwise superpositions `(|j> ± |k>)/√2` and
//! `(|j> ± i|k>)/√2`.

use num_complex::Complex64 as C64;

use super::{standard_setting, IcClass, Povm, Setting};
use crate::error::{Error, Result};
use crate::qcore::CVec;

fn require_even(dim: usize) -> Result<()> {
    if dim < 2 || dim % 2 != 0 {
        return Err(Error::invalid(format!("Gell-Mann bases need an even dimension, got {dim}")));
    }
    Ok(())
}

fn standard_vectors(dim: usize) -> Vec<CVec> {
    (0..dim)
        .map(|k| {
            let mut v = CVec::zeros(dim);
            v[k] = C64::new(1.0, 0.0);
            v
        })
        .collect()
}

/// Basis pairing the levels in `pairs`: for each `(j, k)` the vectors
/// `(|j> + phase|k>)/√2` and `(|j> - phase|k>)/√2`.
fn paired_basis(dim: usize, pairs: &[(usize, usize)], phase: C64) -> Vec<CVec> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(dim);
    for &(j, k) in pairs {
        for sign in [1.0, -1.0] {
            let mut v = CVec::zeros(dim);
            v[j] = C64::new(h, 0.0);
            v[k] = phase * (sign * h);
            out.push(v);
        }
    }
    out
}

/// Round-robin (circle method) 1-factorization of the complete graph on
/// `dim` vertices: `dim - 1` perfect matchings covering each pair once.
pub fn round_robin_matchings(dim: usize) -> Vec<Vec<(usize, usize)>> {
    assert!(dim >= 2 && dim % 2 == 0);
    let m = dim - 1;
    (0..m)
        .map(|r| {
            let mut pairs = vec![(r, dim - 1)];
            for k in 1..dim / 2 {
                pairs.push(((r + k) % m, (r + m - k) % m));
            }
            pairs
        })
        .collect()
}

/// Standard basis plus an X-type and a Y-type basis for each of the
/// `d - 1` round-robin matchings: `2d - 1` bases.
pub fn build_gmb_full(dim: usize) -> Result<Povm> {
    require_even(dim)?;
    let mut settings = vec![standard_setting(&standard_vectors(dim))];
    for (r, pairs) in round_robin_matchings(dim).iter().enumerate() {
        settings.push(Setting::from_basis(format!("x-r{r}"), &paired_basis(dim, pairs, C64::new(1.0, 0.0))));
        settings.push(Setting::from_basis(format!("y-r{r}"), &paired_basis(dim, pairs, C64::new(0.0, 1.0))));
    }
    Povm::new("gmb", dim, settings, IcClass::FullyIc)
}

fn neighbour_bases(dim: usize) -> [Setting; 4] {
    let even: Vec<_> = (0..dim / 2).map(|k| (2 * k, 2 * k + 1)).collect();
    let odd: Vec<_> = (0..dim / 2).map(|k| (2 * k + 1, (2 * k + 2) % dim)).collect();
    let re = C64::new(1.0, 0.0);
    let im = C64::new(0.0, 1.0);
    [
        Setting::from_basis("B1", &paired_basis(dim, &even, re)),
        Setting::from_basis("B2", &paired_basis(dim, &odd, re)),
        Setting::from_basis("B3", &paired_basis(dim, &even, im)),
        Setting::from_basis("B4", &paired_basis(dim, &odd, im)),
    ]
}

/// Standard basis `B0` plus the four nearest-neighbour coupling bases.
pub fn build_gmb_5(dim: usize) -> Result<Povm> {
    require_even(dim)?;
    let mut b0 = standard_setting(&standard_vectors(dim));
    b0.label = "B0".into();
    let mut settings = vec![b0];
    settings.extend(neighbour_bases(dim));
    Povm::new("5gmb", dim, settings, IcClass::R1sIc)
}

/// The four nearest-neighbour coupling bases without the standard basis.
pub fn build_gmb_4(dim: usize) -> Result<Povm> {
    require_even(dim)?;
    Povm::new("4gmb", dim, neighbour_bases(dim).to_vec(), IcClass::R1Ic)
}
