//! Weyl-Heisenberg covariant SIC-POVM from a numerically searched fiducial.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{IcClass, Povm, Setting};
use crate::error::{Error, Result};
use crate::qcore::{rng_stream, CMat, CVec, HermitianOperator};

const SIC_SEED: u64 = 0x5_1C;
const MAX_RESTARTS: u64 = 100;
const MAX_ITERS: usize = 400;
/// Required `sum_{a<b} (|<psi_a|psi_b>|^2 - 1/(d+1))^2`.
pub const SIC_RESIDUAL_TARGET: f64 = 1e-18;

/// Displacement operators `X^j Z^k`, row-major in `(j, k)`.
fn displacements(dim: usize) -> Vec<CMat> {
    let omega = |p: usize| C64::from_polar(1.0, 2.0 * std::f64::consts::PI * (p % dim) as f64 / dim as f64);
    let mut out = Vec::with_capacity(dim * dim);
    for j in 0..dim {
        for k in 0..dim {
            // X^j Z^k |l> = ω^{kl} |l + j>
            let mut m = CMat::zeros(dim, dim);
            for l in 0..dim {
                m[((l + j) % dim, l)] = omega(k * l);
            }
            out.push(m);
        }
    }
    out
}

fn orbit(fiducial: &CVec, ds: &[CMat]) -> Vec<CVec> {
    ds.iter().map(|d| d * fiducial).collect()
}

/// Sum of squared deviations of the pairwise overlaps from `1/(d+1)`.
pub fn sic_residual(fiducial: &CVec) -> f64 {
    let dim = fiducial.len();
    let f = fiducial.unscale(fiducial.norm());
    let vs = orbit(&f, &displacements(dim));
    let target = 1.0 / (dim as f64 + 1.0);
    let mut acc = 0.0;
    for a in 0..vs.len() {
        for b in a + 1..vs.len() {
            acc += (vs[a].dotc(&vs[b]).norm_sqr() - target).powi(2);
        }
    }
    acc
}

/// Outcome of a fiducial search.
#[derive(Debug, Clone)]
pub struct SicSearch {
    pub fiducial: CVec,
    pub residual: f64,
    pub restarts: u64,
}

/// Residual vector and Jacobian with respect to the `2d` real parameters at
/// a normalized fiducial.
fn residuals_and_jacobian(phi: &CVec, ds: &[CMat]) -> (DVector<f64>, DMatrix<f64>) {
    let dim = phi.len();
    let n_pairs = ds.len() * (ds.len() - 1) / 2;
    let target = 1.0 / (dim as f64 + 1.0);
    let psis = orbit(phi, ds);
    let mut r = DVector::zeros(n_pairs);
    let mut jac = DMatrix::zeros(n_pairs, 2 * dim);
    let mut row = 0;
    for a in 0..ds.len() {
        let da_h = ds[a].adjoint();
        for b in a + 1..ds.len() {
            // q = <phi|M|phi> with M = D_a^H D_b; u = M phi, w = M^H phi
            let u = &da_h * &psis[b];
            let w = ds[b].adjoint() * &psis[a];
            let q = phi.dotc(&u);
            let q2 = q.norm_sqr();
            r[row] = q2 - target;
            for k in 0..dim {
                // real direction e_k, imaginary direction i e_k
                let dq_re = u[k] + w[k].conj();
                let dq_im = C64::new(0.0, -1.0) * u[k] + C64::new(0.0, 1.0) * w[k].conj();
                let dn_re = 2.0 * phi[k].re;
                let dn_im = 2.0 * phi[k].im;
                jac[(row, k)] = 2.0 * (q.conj() * dq_re).re - 2.0 * q2 * dn_re;
                jac[(row, dim + k)] = 2.0 * (q.conj() * dq_im).re - 2.0 * q2 * dn_im;
            }
            row += 1;
        }
    }
    (r, jac)
}

fn to_vec(theta: &DVector<f64>, dim: usize) -> CVec {
    let v = CVec::from_fn(dim, |k, _| C64::new(theta[k], theta[dim + k]));
    v.unscale(v.norm())
}

fn from_vec(v: &CVec) -> DVector<f64> {
    let dim = v.len();
    DVector::from_fn(2 * dim, |i, _| if i < dim { v[i].re } else { v[i - dim].im })
}

/// Levenberg-Marquardt descent from one starting point, with the
/// normalization enforced by projection after every step.
fn local_search(start: CVec, ds: &[CMat]) -> (CVec, f64) {
    let dim = start.len();
    let mut phi = start.unscale(start.norm());
    let (mut r, mut jac) = residuals_and_jacobian(&phi, ds);
    let mut cost = r.norm_squared();
    let mut mu = 1e-3;
    for _ in 0..MAX_ITERS {
        if cost < SIC_RESIDUAL_TARGET * 1e-6 {
            break;
        }
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let g = &jt * &r;
        let mut improved = false;
        for _ in 0..30 {
            let mut lhs = jtj.clone();
            for i in 0..2 * dim {
                lhs[(i, i)] += mu * (1.0 + jtj[(i, i)]);
            }
            let Some(step) = lhs.lu().solve(&(-&g)) else {
                mu *= 10.0;
                continue;
            };
            let trial = to_vec(&(from_vec(&phi) + step), dim);
            let (tr, tj) = residuals_and_jacobian(&trial, ds);
            let tcost = tr.norm_squared();
            if tcost < cost {
                phi = trial;
                r = tr;
                jac = tj;
                cost = tcost;
                mu = (mu * 0.3).max(1e-15);
                improved = true;
                break;
            }
            mu *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (phi, cost)
}

/// Multi-start search for a Weyl-Heisenberg SIC fiducial.
pub fn find_sic_fiducial(dim: usize) -> Result<SicSearch> {
    let ds = displacements(dim);
    let mut best: Option<(CVec, f64)> = None;
    for restart in 0..MAX_RESTARTS {
        let mut rng = rng_stream(SIC_SEED, &[dim as u64, restart]);
        let start = CVec::from_fn(dim, |_, _| {
            C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        let (phi, cost) = local_search(start, &ds);
        let cost = sic_residual(&phi).max(cost);
        if cost < SIC_RESIDUAL_TARGET {
            return Ok(SicSearch { fiducial: phi, residual: cost, restarts: restart + 1 });
        }
        if best.as_ref().map_or(true, |b| cost < b.1) {
            best = Some((phi, cost));
        }
    }
    let best = best.map(|b| b.1).unwrap_or(f64::INFINITY);
    Err(Error::Numerical(format!(
        "SIC fiducial search failed after {MAX_RESTARTS} restarts; best residual {best:e}"
    )))
}

/// SIC-POVM in `d = 4` (the only dimension the workbench supports), from a
/// numerically searched fiducial or a supplied one.
pub fn build_sic(dim: usize, fiducial: Option<&CVec>) -> Result<Povm> {
    if dim != 4 {
        return Err(Error::invalid(format!("SIC-POVM is only supported for d = 4, got {dim}")));
    }
    let phi = match fiducial {
        Some(f) => {
            if f.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: f.len() });
            }
            let res = sic_residual(f);
            if !(res < SIC_RESIDUAL_TARGET) {
                return Err(Error::invalid(format!("supplied fiducial has SIC residual {res:e}")));
            }
            f.unscale(f.norm())
        }
        None => find_sic_fiducial(dim)?.fiducial,
    };
    let scale = 1.0 / dim as f64;
    let effects = orbit(&phi, &displacements(dim))
        .iter()
        .map(|v| HermitianOperator::hermitized(&(v * v.adjoint() * C64::new(scale, 0.0))))
        .collect();
    let setting = Setting { label: "sic".into(), effects, is_orthobasis: false };
    Povm::new("sic", dim, vec![setting], IcClass::FullyIc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobian_matches_finite_differences() {
        let ds = displacements(3);
        let mut rng = rng_stream(1, &[]);
        let phi = CVec::from_fn(3, |_, _| C64::new(rng.random(), rng.random()));
        let phi = phi.unscale(phi.norm());
        let (_, jac) = residuals_and_jacobian(&phi, &ds);
        // residuals for an unnormalized parameter vector
        let eval = |theta: &DVector<f64>| {
            let v = CVec::from_fn(3, |k, _| C64::new(theta[k], theta[3 + k]));
            let n = v.norm_squared();
            let psis = orbit(&v, &ds);
            let mut out = vec![];
            for a in 0..9 {
                for b in a + 1..9 {
                    out.push(psis[a].dotc(&psis[b]).norm_sqr() / (n * n));
                }
            }
            out
        };
        let theta = from_vec(&phi);
        let h = 1e-6;
        for p in 0..6 {
            let mut tp = theta.clone();
            tp[p] += h;
            let mut tm = theta.clone();
            tm[p] -= h;
            let (fp, fm) = (eval(&tp), eval(&tm));
            for row in 0..fp.len() {
                let fd = (fp[row] - fm[row]) / (2.0 * h);
                assert!((fd - jac[(row, p)]).abs() < 1e-7, "row {row} param {p}");
            }
        }
    }

    #[test]
    fn sic_d4_properties() {
        let p = build_sic(4, None).unwrap();
        assert_eq!(p.total_outcomes(), 16);
        assert!(p.settings()[0].completeness_residual() < 1e-9);
        let vs: Vec<CVec> = p
            .effects()
            .map(|e| {
                let (vals, v) = crate::qcore::eigh(e.matrix());
                v.column(0) * C64::new((vals[0] * 4.0).sqrt(), 0.0)
            })
            .collect();
        let mut pairs = 0;
        for a in 0..16 {
            for b in a + 1..16 {
                assert!((vs[a].dotc(&vs[b]).norm_sqr() - 0.2).abs() < 1e-9);
                pairs += 1;
            }
        }
        assert_eq!(pairs, 120);
    }

    #[test]
    fn supplied_fiducial_is_checked() {
        let found = find_sic_fiducial(4).unwrap();
        assert!(found.residual < SIC_RESIDUAL_TARGET);
        assert!(build_sic(4, Some(&found.fiducial)).is_ok());
        let bad = CVec::from_element(4, C64::new(0.5, 0.0));
        assert!(build_sic(4, Some(&bad)).is_err());
        assert!(build_sic(16, None).is_err());
    }
}
