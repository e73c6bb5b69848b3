//! Neumark dilation of a rank-one POVM into a projective measurement on a
//! larger space.

use num_complex::Complex64 as C64;

use super::Povm;
use crate::error::{Error, Result};
use crate::qcore::{eigh, CMat, CVec, UnitaryMap};

/// Eigenvalue ratio above which an effect counts as having rank > 1.
const RANK_ONE_TOL: f64 = 1e-10;

/// Unitary `U` on the host space whose standard-basis measurement, restricted
/// to the first `sub_dim` levels, reproduces the POVM.
#[derive(Debug, Clone)]
pub struct NeumarkEmbedding {
    pub unitary: UnitaryMap,
    /// Host sublevel that reports each POVM outcome.
    pub assignment: Vec<usize>,
    pub sub_dim: usize,
}

impl NeumarkEmbedding {
    pub fn host_dim(&self) -> usize {
        self.unitary.dim()
    }

    /// Host sublevels not assigned to any outcome.
    pub fn dead_sublevels(&self) -> Vec<usize> {
        (0..self.host_dim()).filter(|k| !self.assignment.contains(k)).collect()
    }

    /// `Π U^H |k><k| U Π^H` for host sublevel `k`, as an operator on the subspace.
    pub fn projected_effect(&self, k: usize) -> CMat {
        let v = self.projected_vector(k);
        &v * v.adjoint()
    }

    /// `Π U^H |k>`
    pub fn projected_vector(&self, k: usize) -> CVec {
        let u = self.unitary.matrix();
        CVec::from_fn(self.sub_dim, |i, _| u[(k, i)].conj())
    }

    /// Largest `||Π E_μ Π^H - E_μ||_F` over the outcomes of `povm`.
    pub fn max_residual(&self, povm: &Povm) -> f64 {
        povm.effects()
            .zip(&self.assignment)
            .map(|(e, &k)| (self.projected_effect(k) - e.matrix()).norm())
            .fold(0.0, f64::max)
    }
}

/// Square-root vector `v` with `E = |v><v|`, phase fixed so the largest
/// component is real and positive.
pub(crate) fn rank_one_vector(e: &CMat) -> Option<CVec> {
    let (vals, vecs) = eigh(e);
    let top = vals[0].max(0.0);
    if vals.len() > 1 && vals[1].abs() > RANK_ONE_TOL * top.max(1.0) {
        return None;
    }
    let mut v = vecs.column(0).into_owned() * C64::new(top.sqrt(), 0.0);
    let (imax, _) = v
        .iter()
        .enumerate()
        .fold((0, -1.0), |acc, (i, z)| if z.norm() > acc.1 + 1e-12 { (i, z.norm()) } else { acc });
    let phase = v[imax].conj() / v[imax].norm().max(f64::MIN_POSITIVE);
    v *= phase;
    Some(v)
}

/// Dilates a single-setting rank-one POVM with `N <= host_dim` outcomes.
///
/// Row `μ` of the isometry is `<v_μ|`, outcome `μ` is read from host sublevel
/// `μ`, and the remaining columns are completed by Gram-Schmidt against the
/// standard basis.
pub fn neumark_embed(povm: &Povm, host_dim: usize) -> Result<NeumarkEmbedding> {
    if povm.n_settings() != 1 {
        return Err(Error::invalid("Neumark embedding needs a single-setting POVM"));
    }
    let n = povm.total_outcomes();
    let d = povm.dim();
    if n > host_dim || d > host_dim {
        return Err(Error::invalid(format!(
            "{n} outcomes on {d} levels do not fit a {host_dim}-level host"
        )));
    }
    let vectors: Vec<CVec> = povm
        .effects()
        .map(|e| rank_one_vector(e.matrix()))
        .collect::<Option<_>>()
        .ok_or_else(|| Error::invalid("Neumark embedding needs rank-one effects"))?;

    let mut cols: Vec<CVec> = (0..d)
        .map(|i| CVec::from_fn(host_dim, |mu, _| if mu < n { vectors[mu][i].conj() } else { C64::new(0.0, 0.0) }))
        .collect();
    while cols.len() < host_dim {
        let mut best: Option<(f64, CVec)> = None;
        for k in 0..host_dim {
            let mut v = CVec::zeros(host_dim);
            v[k] = C64::new(1.0, 0.0);
            for _ in 0..2 {
                for c in &cols {
                    let proj = c.dotc(&v);
                    v -= c * proj;
                }
            }
            let norm = v.norm();
            if best.as_ref().map_or(true, |b| norm > b.0 + 1e-12) {
                best = Some((norm, v));
            }
        }
        let (norm, v) = best.expect("host dimension is positive");
        if norm < 1e-6 {
            return Err(Error::Numerical("isometry completion lost rank".into()));
        }
        cols.push(v.unscale(norm));
    }
    let u = CMat::from_columns(&cols);
    let unitary = UnitaryMap::new(u).map_err(|e| Error::Numerical(format!("dilation not unitary: {e}")))?;
    Ok(NeumarkEmbedding { unitary, assignment: (0..n).collect(), sub_dim: d })
}
