//! Constrained reconstruction of density matrices from outcome frequencies.
//!
//! Maximum likelihood defaults to a damped Newton method on a factorization
//! `rho = B B^H`. Near rank-deficient optima, where the positivity constraint
//! is active, first-order projected methods slow to a sublinear crawl; the
//! factored form removes the constraint and keeps second-order information.
//! Projected gradient descent (Barzilai-Borwein steps, Armijo halving along
//! the projection arc) is available as an option and drives the
//! least-squares estimator. No accepted iterate increases the objective.

use std::ops::AddAssign;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::povm::Povm;
use crate::qcore::{eigh, hermitize, CMat, DensityMatrix, HermitianOperator};
use crate::simulate::MeasurementRecord;

/// Stopping and regularization parameters shared by the estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorOptions {
    pub max_iterations: usize,
    /// Stop once `||P(rho - grad f(rho)) - rho||_F` falls below this, with
    /// `P` the projection onto density matrices.
    pub tolerance: f64,
    /// Lower clamp on probabilities inside `log` and the gradient.
    pub probability_floor: f64,
    /// Sufficient-decrease constant of the Armijo test.
    pub armijo: f64,
    /// Algorithm used by [`mle_estimate`]; least squares always uses
    /// projected gradient.
    pub solver: Solver,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    /// Projected gradient descent over density matrices.
    ProjectedGradient,
    /// Damped Newton iterations on a factorization `rho = B B^H`.
    FactoredNewton,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        Self {
            max_iterations: 5000,
            tolerance: 1e-9,
            probability_floor: 1e-12,
            armijo: 1e-4,
            solver: Solver::FactoredNewton,
        }
    }
}

/// `converged` is false when the iteration cap was hit or when no further
/// decrease could be resolved in double precision before reaching the
/// tolerance.
#[derive(Debug, Clone)]
pub struct EstimatorResult {
    pub rho_hat: DensityMatrix,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub optimality_residual: f64,
}

#[derive(Serialize, Deserialize)]
struct EstimatorResultFile {
    dim: usize,
    rho_hat: Vec<[f64; 2]>,
    objective: f64,
    iterations: usize,
    converged: bool,
    optimality_residual: f64,
}

impl EstimatorResult {
    /// JSON export with `rho_hat` as row-major `[re, im]` pairs.
    pub fn to_json(&self) -> Result<String> {
        let m = self.rho_hat.matrix();
        let d = m.nrows();
        let file = EstimatorResultFile {
            dim: d,
            rho_hat: (0..d * d).map(|k| [m[(k / d, k % d)].re, m[(k / d, k % d)].im]).collect(),
            objective: self.objective,
            iterations: self.iterations,
            converged: self.converged,
            optimality_residual: self.optimality_residual,
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: EstimatorResultFile = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        if f.rho_hat.len() != f.dim * f.dim {
            return Err(Error::Schema("rho_hat has the wrong number of entries".into()));
        }
        let m = CMat::from_fn(f.dim, f.dim, |i, j| {
            let [re, im] = f.rho_hat[i * f.dim + j];
            C64::new(re, im)
        });
        Ok(Self {
            rho_hat: DensityMatrix::new(m)?,
            objective: f.objective,
            iterations: f.iterations,
            converged: f.converged,
            optimality_residual: f.optimality_residual,
        })
    }
}

/// Euclidean projection of `v` onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Frobenius-nearest density matrix: eigen-decompose and project the
/// spectrum onto the simplex.
pub fn project_psd_simplex(a: &HermitianOperator) -> DensityMatrix {
    DensityMatrix::from_raw(project_matrix(a.matrix()))
}

fn project_matrix(a: &CMat) -> CMat {
    let (vals, vecs) = eigh(a);
    let w = project_simplex(&vals);
    let d = a.nrows();
    let mut scaled = CMat::zeros(d, d);
    for (k, &wk) in w.iter().enumerate() {
        if wk > 0.0 {
            let s = C64::new(wk.sqrt(), 0.0);
            scaled.set_column(k, &(vecs.column(k) * s));
        }
    }
    hermitize(&(&scaled * scaled.adjoint()))
}

/// Effects stacked as weighted eigenvector columns: `E_j = sum_{c: owner(c)=j} a_c a_c^H`.
#[derive(Debug, Clone)]
struct EffectFactors {
    columns: CMat,
    owner: Vec<usize>,
    n_effects: usize,
}

impl EffectFactors {
    fn new(povm: &Povm) -> Self {
        let d = povm.dim();
        let mut cols = Vec::new();
        let mut owner = Vec::new();
        let mut n_effects = 0;
        for (j, e) in povm.effects().enumerate() {
            let (vals, vecs) = eigh(e.matrix());
            let top = vals[0].abs().max(1e-300);
            for (k, &l) in vals.iter().enumerate() {
                if l > 1e-14 * top {
                    cols.push(vecs.column(k) * C64::new(l.sqrt(), 0.0));
                    owner.push(j);
                }
            }
            n_effects = j + 1;
        }
        let columns = if cols.is_empty() { CMat::zeros(d, 0) } else { CMat::from_columns(&cols) };
        Self { columns, owner, n_effects }
    }

    fn probabilities(&self, rho: &CMat) -> Vec<f64> {
        let b = rho * &self.columns;
        let mut p = vec![0.0; self.n_effects];
        for (c, &j) in self.owner.iter().enumerate() {
            p[j] += self.columns.column(c).dotc(&b.column(c)).re;
        }
        p
    }

    /// `sum_j w_j E_j`
    fn combine(&self, w: &[f64]) -> CMat {
        let mut scaled = self.columns.clone();
        for (c, &j) in self.owner.iter().enumerate() {
            scaled.column_mut(c).scale_mut(w[j]);
        }
        hermitize(&(scaled * self.columns.adjoint()))
    }
}

#[derive(Debug, Clone, Copy)]
enum Loss {
    NegLogLikelihood,
    LeastSquares,
}

struct Problem<'a> {
    factors: EffectFactors,
    freqs: Vec<f64>,
    loss: Loss,
    opts: &'a EstimatorOptions,
}

impl Problem<'_> {
    fn objective(&self, p: &[f64]) -> f64 {
        match self.loss {
            Loss::NegLogLikelihood => -self
                .freqs
                .iter()
                .zip(p)
                .filter(|(&n, _)| n > 0.0)
                .map(|(&n, &pj)| n * pj.max(self.opts.probability_floor).ln())
                .sum::<f64>(),
            Loss::LeastSquares => self.freqs.iter().zip(p).map(|(n, pj)| (n - pj).powi(2)).sum(),
        }
    }

    /// `f(p + dp) - f(p)`, evaluated from the increments so that changes far
    /// below the magnitude of `f` are still resolved.
    fn objective_change(&self, p: &[f64], dp: &[f64]) -> f64 {
        let floor = self.opts.probability_floor;
        match self.loss {
            Loss::NegLogLikelihood => self
                .freqs
                .iter()
                .zip(p.iter().zip(dp))
                .filter(|(&n, _)| n > 0.0)
                .map(|(&n, (&pj, &dj))| {
                    let old = pj.max(floor);
                    let new = (pj + dj).max(floor);
                    -n * ((new - old) / old).ln_1p()
                })
                .sum(),
            Loss::LeastSquares => self
                .freqs
                .iter()
                .zip(p.iter().zip(dp))
                .map(|(&n, (&pj, &dj))| dj * (dj - 2.0 * (n - pj)))
                .sum(),
        }
    }

    /// Per-effect weights `w_j` of the gradient `sum_j w_j E_j`.
    fn gradient_weights(&self, p: &[f64]) -> Vec<f64> {
        match self.loss {
            Loss::NegLogLikelihood => self
                .freqs
                .iter()
                .zip(p)
                .map(|(&n, &pj)| if n > 0.0 { -n / pj.max(self.opts.probability_floor) } else { 0.0 })
                .collect(),
            Loss::LeastSquares => self.freqs.iter().zip(p).map(|(n, pj)| -2.0 * (n - pj)).collect(),
        }
    }

    fn gradient(&self, p: &[f64]) -> CMat {
        self.factors.combine(&self.gradient_weights(p))
    }

    /// `||P(rho - grad) - rho||_F`, zero exactly at constrained minimizers.
    fn fixed_point_residual(&self, rho: &CMat, grad: &CMat) -> f64 {
        (project_matrix(&(rho - grad)) - rho).norm()
    }
}

fn inner(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

/// Projected gradient descent from `I/d` with Barzilai-Borwein trial steps
/// and Armijo halving along the projection arc.
fn projected_gradient(problem: &Problem<'_>, dim: usize) -> EstimatorResult {
    let opts = problem.opts;
    let mut rho = CMat::identity(dim, dim).unscale(dim as f64);
    let mut p = problem.factors.probabilities(&rho);
    let mut g = problem.gradient(&p);

    let traceless = |m: &CMat| {
        let tr = m.trace() / C64::new(dim as f64, 0.0);
        (m - CMat::identity(dim, dim) * tr).norm()
    };
    let mut step = 1.0 / traceless(&g).max(1e-12);
    let mut prev: Option<(CMat, CMat)> = None;
    let mut residual = problem.fixed_point_residual(&rho, &g);
    let mut converged = residual < opts.tolerance;
    let mut iterations = 0;

    while !converged && iterations < opts.max_iterations {
        iterations += 1;
        if let Some((rho_prev, g_prev)) = &prev {
            let s = &rho - rho_prev;
            let y = &g - g_prev;
            let sy = inner(&s, &y);
            step = if sy > 0.0 { (inner(&s, &s) / sy).clamp(1e-12, 1e12) } else { (step * 2.0).min(1e12) };
        }
        let attempt = |t: f64| {
            let trial = project_matrix(&(&rho - &g * C64::new(t, 0.0)));
            let delta = &trial - &rho;
            let dp = problem.factors.probabilities(&delta);
            let df = problem.objective_change(&p, &dp);
            (df < 0.0 && df <= opts.armijo * inner(&g, &delta)).then_some((trial, dp))
        };
        // halve first; when the arc only bends into descent beyond the trial
        // step (a face change), expand instead
        let accepted = (0..60)
            .map(|k| step * 0.5f64.powi(k))
            .chain((1..40).map(|k| step * 2f64.powi(k)))
            .find_map(attempt);
        let Some((next, dp)) = accepted else { break };
        p.iter_mut().zip(&dp).for_each(|(a, b)| *a += b);
        let gn = problem.gradient(&p);
        prev = Some((std::mem::replace(&mut rho, next), std::mem::replace(&mut g, gn)));
        residual = problem.fixed_point_residual(&rho, &g);
        converged = residual < opts.tolerance;
    }
    let p = problem.factors.probabilities(&rho);
    EstimatorResult {
        rho_hat: DensityMatrix::from_raw(rho),
        objective: problem.objective(&p),
        iterations,
        converged,
        optimality_residual: residual,
    }
}

/// Levenberg-Marquardt system `(J^T C J + D + mu s I) delta = -g`, where `D`
/// repeats one `2d x 2d` block per column of `B`.
struct NewtonSystem {
    jac: DMatrix<f64>,
    curv: Vec<f64>,
    block: DMatrix<f64>,
    n_blocks: usize,
    scale: f64,
    gauss_newton: std::cell::OnceCell<DMatrix<f64>>,
}

impl NewtonSystem {
    fn new(jac: DMatrix<f64>, curv: Vec<f64>, g: &CMat, n_blocks: usize) -> Self {
        let d = g.nrows();
        let mut block = DMatrix::<f64>::zeros(2 * d, 2 * d);
        for l in 0..d {
            for i in 0..d {
                let e = g[(i, l)] * 2.0;
                block[(2 * i, 2 * l)] = e.re;
                block[(2 * i, 2 * l + 1)] = -e.im;
                block[(2 * i + 1, 2 * l)] = e.im;
                block[(2 * i + 1, 2 * l + 1)] = e.re;
            }
        }
        let gn_diag = (0..jac.ncols())
            .map(|q| jac.column(q).iter().zip(&curv).map(|(a, c)| c * a * a).sum::<f64>())
            .fold(0.0, f64::max);
        let scale = (gn_diag + block.diagonal().amax()).max(1e-300);
        Self { jac, curv, block, n_blocks, scale, gauss_newton: std::cell::OnceCell::new() }
    }

    fn width(&self) -> usize {
        self.block.nrows()
    }

    fn quadratic(&self, delta: &DVector<f64>) -> f64 {
        let jd = &self.jac * delta;
        let gn: f64 = jd.iter().zip(&self.curv).map(|(a, c)| c * a * a).sum();
        let w = self.width();
        let bl: f64 = (0..self.n_blocks)
            .map(|k| {
                let part = delta.rows(k * w, w);
                part.dot(&(&self.block * part))
            })
            .sum();
        gn + bl
    }

    fn solve(&self, mu: f64, grad: &DVector<f64>) -> Option<DVector<f64>> {
        let m = self.curv.len();
        let nvar = self.jac.ncols();
        let w = self.width();
        let mut damped = self.block.clone();
        for q in 0..w {
            damped[(q, q)] += mu * self.scale;
        }
        match damped.clone().cholesky() {
            // Woodbury: only an m x m system is factorized
            Some(chol) if m < nvar => {
                let mut y = DMatrix::<f64>::zeros(m, nvar);
                let mut rhs = -grad;
                for k in 0..self.n_blocks {
                    let cols = k * w..(k + 1) * w;
                    let sol = chol.solve(&self.jac.columns(k * w, w).transpose());
                    y.columns_mut(k * w, w).copy_from(&sol.transpose());
                    let part = chol.solve(&rhs.rows(k * w, w).into_owned());
                    rhs.rows_mut(cols.start, w).copy_from(&part);
                }
                let mut cap = &y * self.jac.transpose();
                for (j, c) in self.curv.iter().enumerate() {
                    cap[(j, j)] += 1.0 / c;
                }
                let t = cap.cholesky()?.solve(&(&self.jac * &rhs));
                Some(rhs - y.tr_mul(&t))
            }
            _ => {
                let mut lhs = self
                    .gauss_newton
                    .get_or_init(|| {
                        let mut scaled = self.jac.clone();
                        for (j, mut row) in scaled.row_iter_mut().enumerate() {
                            row *= self.curv[j].sqrt();
                        }
                        scaled.tr_mul(&scaled)
                    })
                    .clone();
                for k in 0..self.n_blocks {
                    lhs.view_mut((k * w, k * w), (w, w)).add_assign(&damped);
                }
                Some(lhs.cholesky()?.solve(&(-grad)))
            }
        }
    }
}

/// Damped Newton descent on `rho = B B^H` for the extended likelihood
/// `F(B) = -sum_j nu_j log p_j(B B^H) + N ||B||_F^2`, `N = sum_j nu_j`.
///
/// For `t > 0`, `F(t rho) = F(rho) - N log t + N t` is minimized at `t = 1`,
/// so unconstrained minimizers of `F` are unit-trace maximum-likelihood
/// estimates.
fn factored_newton(problem: &Problem<'_>, dim: usize) -> EstimatorResult {
    let full = newton_from(problem, CMat::identity(dim, dim).unscale((dim as f64).sqrt()), problem.opts.tolerance);
    // Near a rank-deficient optimum the full factorization is degenerate and
    // double precision limits the accuracy; restarting on the numerical
    // range of the estimate gives a nondegenerate problem. The convex
    // objective decides which answer is kept.
    let (vals, vecs) = eigh(full.rho_hat.matrix());
    let rank = vals.iter().filter(|&&l| l > 1e-4 * vals[0]).count();
    if rank == dim {
        return full;
    }
    let b0 = CMat::from_fn(dim, rank, |i, k| vecs[(i, k)] * vals[k].sqrt());
    let polished = newton_from(problem, b0, 1e-3 * problem.opts.tolerance);
    // The residual is a poor referee here: outcomes with small p amplify it
    // far above the actual error. Ties in the objective, which is resolved to
    // rounding level, go to the restart.
    let slack = 1e-14 * full.objective.abs().max(1.0);
    if polished.objective <= full.objective + slack {
        let converged = full.converged || polished.converged;
        EstimatorResult { iterations: full.iterations + polished.iterations, converged, ..polished }
    } else {
        full
    }
}

fn newton_from(problem: &Problem<'_>, mut b: CMat, tolerance: f64) -> EstimatorResult {
    let opts = problem.opts;
    let fac = &problem.factors;
    let n_total: f64 = problem.freqs.iter().sum();
    let dim = b.nrows();
    let r = b.ncols();
    let nvar = 2 * dim * r;
    let ncols = fac.columns.ncols();

    // v[c, k] = a_c^H b_k
    let project_cols = |b: &CMat| fac.columns.adjoint() * b;
    let probs_from = |v: &CMat| {
        let mut p = vec![0.0; fac.n_effects];
        for (c, &j) in fac.owner.iter().enumerate() {
            p[j] += v.row(c).iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
        p
    };
    let normalized = |b: &CMat| {
        let rho = b * b.adjoint();
        let tr = rho.trace().re;
        hermitize(&rho.unscale(tr))
    };

    let mut v = project_cols(&b);
    let mut p = probs_from(&v);
    let mut mu = 1e-3;
    let mut iterations = 0;
    let mut residual;
    let mut converged = false;
    let idx = |i: usize, k: usize| 2 * (k * dim + i);

    loop {
        let rho = normalized(&b);
        let pr = fac.probabilities(&rho);
        residual = problem.fixed_point_residual(&rho, &problem.gradient(&pr));
        if residual < tolerance {
            converged = true;
            break;
        }
        if iterations >= opts.max_iterations {
            break;
        }
        iterations += 1;

        // gradient and Hessian in real coordinates (Re, Im interleaved, column-major B)
        let w = problem.gradient_weights(&p);
        let curv: Vec<f64> = problem
            .freqs
            .iter()
            .zip(&p)
            .map(|(&nj, &pj)| if nj > 0.0 { nj / pj.max(opts.probability_floor).powi(2) } else { 0.0 })
            .collect();
        let active: Vec<usize> = (0..fac.n_effects).filter(|&j| curv[j] > 0.0).collect();
        let mut row_of = vec![usize::MAX; fac.n_effects];
        active.iter().enumerate().for_each(|(row, &j)| row_of[j] = row);
        let mut jac = DMatrix::<f64>::zeros(active.len(), nvar);
        for c in 0..ncols {
            let row = row_of[fac.owner[c]];
            if row == usize::MAX {
                continue;
            }
            for k in 0..r {
                let vk = v[(c, k)];
                for i in 0..dim {
                    let z = fac.columns[(i, c)] * vk * 2.0;
                    jac[(row, idx(i, k))] += z.re;
                    jac[(row, idx(i, k) + 1)] += z.im;
                }
            }
        }
        let x = DVector::from_fn(nvar, |q, _| {
            let z = b[((q / 2) % dim, q / 2 / dim)];
            if q % 2 == 0 { z.re } else { z.im }
        });
        let wa = DVector::from_iterator(active.len(), active.iter().map(|&j| w[j]));
        let grad = jac.tr_mul(&wa) + &x * (2.0 * n_total);
        // second-order part: 2 realrep(G + N I), identical on each column of B
        let g = fac.combine(&w) + CMat::identity(dim, dim) * C64::new(n_total, 0.0);
        let system = NewtonSystem::new(jac, active.iter().map(|&j| curv[j]).collect(), &g, r);

        let mut accepted = false;
        for _ in 0..40 {
            let Some(delta) = system.solve(mu, &grad) else {
                mu = (mu * 10.0).max(1e-12);
                continue;
            };
            let predicted = -(grad.dot(&delta) + 0.5 * system.quadratic(&delta));
            let db = CMat::from_fn(dim, r, |i, k| C64::new(delta[idx(i, k)], delta[idx(i, k) + 1]));
            let u = project_cols(&db);
            let mut dp = vec![0.0; fac.n_effects];
            for (c, &j) in fac.owner.iter().enumerate() {
                dp[j] += v
                    .row(c)
                    .iter()
                    .zip(u.row(c).iter())
                    .map(|(a, d)| 2.0 * (a.conj() * d).re + d.norm_sqr())
                    .sum::<f64>();
            }
            let feasible = problem
                .freqs
                .iter()
                .zip(p.iter().zip(&dp))
                .all(|(&nj, (&pj, &dj))| nj <= 0.0 || pj + dj > 0.0);
            let change = if feasible {
                problem.objective_change(&p, &dp) + n_total * (2.0 * x.dot(&delta) + delta.norm_squared())
            } else {
                f64::INFINITY
            };
            if change < 0.0 {
                let ratio = if predicted > 0.0 { -change / predicted } else { 0.0 };
                if ratio > 0.75 {
                    mu = (mu / 4.0).max(1e-15);
                } else if ratio < 0.25 {
                    mu *= 2.0;
                }
                b += db;
                v = project_cols(&b);
                p = probs_from(&v);
                accepted = true;
                break;
            }
            mu = (mu * 4.0).max(1e-12);
        }
        if !accepted {
            // no descent direction resolvable in double precision
            break;
        }
    }
    let rho = normalized(&b);
    let pr = fac.probabilities(&rho);
    EstimatorResult {
        objective: problem.objective(&pr),
        rho_hat: DensityMatrix::from_raw(rho),
        iterations,
        converged,
        optimality_residual: residual,
    }
}

/// Checks that the record's settings line up with the POVM's and returns the
/// flattened frequencies.
fn aligned_frequencies(record: &MeasurementRecord, povm: &Povm) -> Result<Vec<f64>> {
    if record.settings.len() != povm.n_settings() {
        return Err(Error::invalid(format!(
            "record has {} settings, POVM has {}",
            record.settings.len(),
            povm.n_settings()
        )));
    }
    for (r, s) in record.settings.iter().zip(povm.settings()) {
        if r.frequencies.len() != s.len() || r.label != s.label {
            return Err(Error::invalid(format!(
                "record setting '{}' ({} outcomes) does not match POVM setting '{}' ({} outcomes)",
                r.label,
                r.frequencies.len(),
                s.label,
                s.len()
            )));
        }
    }
    Ok(record.settings.iter().flat_map(|s| s.frequencies.iter().copied()).collect())
}

fn check_frequencies(freqs: &[f64]) -> Result<()> {
    if freqs.is_empty() {
        return Err(Error::invalid("empty measurement record"));
    }
    if freqs.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("non-finite frequency"));
    }
    if freqs.iter().all(|&x| x <= 0.0) {
        return Err(Error::invalid("all frequencies are zero"));
    }
    Ok(())
}

/// Maximum-likelihood estimate from flattened frequencies (setting order).
pub fn mle_from_frequencies(povm: &Povm, freqs: &[f64], opts: &EstimatorOptions) -> Result<EstimatorResult> {
    if freqs.len() != povm.total_outcomes() {
        return Err(Error::DimensionMismatch { expected: povm.total_outcomes(), found: freqs.len() });
    }
    check_frequencies(freqs)?;
    let problem = Problem {
        factors: EffectFactors::new(povm),
        freqs: freqs.iter().map(|&x| x.max(0.0)).collect(),
        loss: Loss::NegLogLikelihood,
        opts,
    };
    Ok(match opts.solver {
        Solver::ProjectedGradient => projected_gradient(&problem, povm.dim()),
        Solver::FactoredNewton => factored_newton(&problem, povm.dim()),
    })
}

/// Minimizes `-sum_j nu_j log p_j(rho)` over density matrices.
pub fn mle_estimate(record: &MeasurementRecord, povm: &Povm, opts: &EstimatorOptions) -> Result<EstimatorResult> {
    let freqs = aligned_frequencies(record, povm)?;
    mle_from_frequencies(povm, &freqs, opts)
}

pub fn lsq_from_frequencies(povm: &Povm, freqs: &[f64], opts: &EstimatorOptions) -> Result<EstimatorResult> {
    if freqs.len() != povm.total_outcomes() {
        return Err(Error::DimensionMismatch { expected: povm.total_outcomes(), found: freqs.len() });
    }
    check_frequencies(freqs)?;
    let problem = Problem {
        factors: EffectFactors::new(povm),
        freqs: freqs.to_vec(),
        loss: Loss::LeastSquares,
        opts,
    };
    Ok(projected_gradient(&problem, povm.dim()))
}

/// Minimizes `sum_j (nu_j - p_j(rho))^2` over density matrices.
pub fn lsq_estimate(record: &MeasurementRecord, povm: &Povm, opts: &EstimatorOptions) -> Result<EstimatorResult> {
    let freqs = aligned_frequencies(record, povm)?;
    lsq_from_frequencies(povm, &freqs, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::povm::{build_named, build_standard_basis, IcClass};
    use crate::qcore::{fidelity_pure, gue_generator, haar_random_state, rng_stream, PureState};

    fn random_hermitian(d: usize, seed: u64) -> HermitianOperator {
        HermitianOperator::hermitized(&gue_generator(d, &mut rng_stream(seed, &[])))
    }

    #[test]
    fn simplex_examples() {
        let p = project_simplex(&[0.5, 0.7, -0.2]);
        for (a, b) in p.iter().zip([0.4, 0.6, 0.0]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(project_simplex(&[0.0; 4]), vec![0.25; 4]);
        assert_eq!(project_simplex(&[0.2, 0.3, 0.5]), vec![0.2, 0.3, 0.5]);
    }

    #[test]
    fn psd_projection_of_zero_is_maximally_mixed() {
        let z = HermitianOperator::hermitized(&CMat::zeros(4, 4));
        let rho = project_psd_simplex(&z);
        assert!((rho.matrix() - CMat::identity(4, 4).unscale(4.0)).norm() < 1e-15);
    }

    #[test]
    fn psd_projection_is_idempotent_on_states() {
        for seed in 0..20 {
            let psi = haar_random_state(4, &mut rng_stream(seed, &[1]));
            let mixed = (psi.projector().into_matrix() + CMat::identity(4, 4).unscale(4.0)).unscale(2.0);
            for m in [psi.projector().into_matrix(), mixed] {
                let p = project_psd_simplex(&HermitianOperator::hermitized(&m));
                assert!((p.matrix() - &m).norm() < 1e-10);
            }
        }
    }

    /// `X = P(A)` iff `X` is a state and `A - X - theta I` is negative
    /// semidefinite and annihilates `X`, with `theta` its top eigenvalue.
    #[test]
    fn psd_projection_satisfies_kkt() {
        for seed in 0..100 {
            let a = random_hermitian(4, 100 + seed);
            let x = project_psd_simplex(&a);
            x.check().unwrap();
            let m = a.matrix() - x.matrix();
            let theta = eigh(&m).0[0];
            let shifted = m - CMat::identity(4, 4) * C64::new(theta, 0.0);
            assert!((&shifted * x.matrix()).norm() < 1e-8, "seed {seed}");
        }
    }

    fn noiseless_case(name: &str, d: usize, seed: u64) -> (Povm, PureState, Vec<f64>) {
        let povm = build_named(name, d).unwrap();
        let psi = haar_random_state(d, &mut rng_stream(seed, &[2]));
        let freqs = povm.pure_probabilities(&psi);
        (povm, psi, freqs)
    }

    #[test]
    fn mle_recovers_noiseless_states() {
        for (name, d) in [("mub", 4), ("sic", 4), ("psi", 4), ("5gmb", 4), ("mub", 16)] {
            let (povm, psi, freqs) = noiseless_case(name, d, 7);
            let r = mle_from_frequencies(&povm, &freqs, &EstimatorOptions::default()).unwrap();
            assert!(r.converged, "{name}");
            let infid = 1.0 - fidelity_pure(&psi, &r.rho_hat).unwrap();
            assert!(infid < 1e-6, "{name} d={d}: {infid}");
        }
    }

    #[test]
    fn mle_objective_respects_entropy_bound() {
        let (povm, _, mut freqs) = noiseless_case("mub", 4, 11);
        let mut rng = rng_stream(12, &[]);
        use rand::Rng;
        freqs.iter_mut().for_each(|f| *f = (*f + rng.random_range(-0.02..0.02)).clamp(0.0, 1.0));
        let bound: f64 = -freqs.iter().filter(|&&f| f > 0.0).map(|f| f * f.ln()).sum::<f64>();
        let r = mle_from_frequencies(&povm, &freqs, &EstimatorOptions::default()).unwrap();
        assert!(r.objective >= bound - 1e-12);
        // consistent data attains the bound
        let (povm, _, freqs) = noiseless_case("sic", 4, 13);
        let bound: f64 = -freqs.iter().filter(|&&f| f > 0.0).map(|f| f * f.ln()).sum::<f64>();
        let r = mle_from_frequencies(&povm, &freqs, &EstimatorOptions::default()).unwrap();
        assert!((r.objective - bound).abs() < 1e-10);
    }

    #[test]
    fn uniform_data_gives_maximally_mixed() {
        let povm = build_named("mub", 4).unwrap();
        let freqs = vec![0.25; povm.total_outcomes()];
        for solver in [Solver::FactoredNewton, Solver::ProjectedGradient] {
            let opts = EstimatorOptions { solver, ..Default::default() };
            let r = mle_from_frequencies(&povm, &freqs, &opts).unwrap();
            assert!((r.rho_hat.matrix() - CMat::identity(4, 4).unscale(4.0)).norm() < 1e-9);
        }
    }

    #[test]
    fn single_basis_gives_diagonal_estimate() {
        let povm = build_standard_basis(4).unwrap();
        let freqs = [0.1, 0.2, 0.3, 0.4];
        let r = mle_from_frequencies(&povm, &freqs, &EstimatorOptions::default()).unwrap();
        let m = r.rho_hat.matrix();
        for i in 0..4 {
            assert!((m[(i, i)].re - freqs[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn solvers_agree_on_noisy_data() {
        use rand::Rng;
        let (povm, _, mut freqs) = noiseless_case("mub", 4, 21);
        let mut rng = rng_stream(22, &[]);
        freqs.iter_mut().for_each(|f| *f = (*f + rng.random_range(-0.01..0.01)).clamp(0.0, 1.0));
        let newton = mle_from_frequencies(&povm, &freqs, &EstimatorOptions::default()).unwrap();
        let opts = EstimatorOptions { solver: Solver::ProjectedGradient, max_iterations: 20000, ..Default::default() };
        let pg = mle_from_frequencies(&povm, &freqs, &opts).unwrap();
        assert!(newton.converged);
        // projected steps stall once decreases drop below double precision
        assert!(pg.optimality_residual < 1e-6);
        assert!((newton.objective - pg.objective).abs() < 1e-9);
        assert!((newton.rho_hat.matrix() - pg.rho_hat.matrix()).norm() < 1e-5);
    }

    #[test]
    fn setting_order_does_not_matter() {
        let (povm, _, freqs) = noiseless_case("mub", 4, 31);
        let mut settings = povm.settings().to_vec();
        settings.reverse();
        let reversed = Povm::new("rev", 4, settings, IcClass::Unknown).unwrap();
        let mut chunks: Vec<&[f64]> = freqs.chunks(4).collect();
        chunks.reverse();
        let rfreqs: Vec<f64> = chunks.concat();
        let a = mle_from_frequencies(&povm, &freqs, &EstimatorOptions::default()).unwrap();
        let b = mle_from_frequencies(&reversed, &rfreqs, &EstimatorOptions::default()).unwrap();
        assert!((a.rho_hat.matrix() - b.rho_hat.matrix()).norm() < 1e-7);
    }

    #[test]
    fn least_squares_recovers_noiseless_state() {
        let (povm, psi, freqs) = noiseless_case("mub", 4, 41);
        let r = lsq_from_frequencies(&povm, &freqs, &EstimatorOptions::default()).unwrap();
        assert!(1.0 - fidelity_pure(&psi, &r.rho_hat).unwrap() < 1e-6);
        assert!(r.objective < 1e-12);
    }

    #[test]
    fn rejects_bad_frequencies() {
        let povm = build_named("mub", 4).unwrap();
        let opts = EstimatorOptions::default();
        assert!(matches!(
            mle_from_frequencies(&povm, &[0.25; 4], &opts),
            Err(Error::DimensionMismatch { .. })
        ));
        let zeros = vec![0.0; povm.total_outcomes()];
        assert!(mle_from_frequencies(&povm, &zeros, &opts).is_err());
        let mut nan = vec![0.25; povm.total_outcomes()];
        nan[3] = f64::NAN;
        assert!(lsq_from_frequencies(&povm, &nan, &opts).is_err());
    }

    #[test]
    fn result_json_round_trip() {
        let (povm, _, freqs) = noiseless_case("sic", 4, 51);
        let r = mle_from_frequencies(&povm, &freqs, &EstimatorOptions::default()).unwrap();
        let back = EstimatorResult::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(back.rho_hat.matrix(), r.rho_hat.matrix());
        assert_eq!(back.iterations, r.iterations);
        assert!(EstimatorResult::from_json("{\"dim\": 2}").is_err());
    }
}
