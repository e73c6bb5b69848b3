//! Numeric foundations: states, operators, the Hermitian eigensolver and
//! reproducible random sampling.

mod eig;
mod random;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub use eig::eigh;
pub use random::{
    calibrate_epsilon, gue_generator, haar_random_state, process_infidelity,
    random_perturbation_unitary, rng_stream, unitary_from_generator, StreamRng,
};

pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const NORM_TOL: f64 = 1e-12;
pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = 1e-10;
pub const UNITARY_TOL: f64 = 1e-10;

pub(crate) const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Largest element-wise deviation of `a` from its adjoint.
pub fn hermiticity_error(a: &CMat) -> f64 {
    let n = a.nrows();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        for i in 0..=j {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `(A + A^H) / 2`
pub fn hermitize(a: &CMat) -> CMat {
    (a + a.adjoint()) * C64::new(0.5, 0.0)
}

pub fn trace(a: &CMat) -> C64 {
    a.diagonal().sum()
}

/// Normalized pure state `|psi>`.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amplitudes: CVec,
}

impl PureState {
    /// Wraps amplitudes that are already normalized to within `NORM_TOL`.
    pub fn new(amplitudes: CVec) -> Result<Self> {
        if amplitudes.len() < 1 {
            return Err(Error::invalid("pure state needs dimension >= 1"));
        }
        let norm = amplitudes.norm_squared();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::invalid(format!("state norm^2 is {norm}, expected 1")));
        }
        Ok(Self { amplitudes })
    }

    /// Normalizes arbitrary nonzero amplitudes.
    pub fn normalized(amplitudes: CVec) -> Result<Self> {
        let norm = amplitudes.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::invalid("cannot normalize a zero or non-finite vector"));
        }
        Ok(Self { amplitudes: amplitudes.unscale(norm) })
    }

    pub fn from_slice(amps: &[C64]) -> Result<Self> {
        Self::normalized(CVec::from_column_slice(amps))
    }

    /// Computational basis state `|k>`.
    pub fn basis(dim: usize, k: usize) -> Self {
        assert!(k < dim);
        let mut v = CVec::zeros(dim);
        v[k] = ONE;
        Self { amplitudes: v }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &CVec {
        &self.amplitudes
    }

    pub fn projector(&self) -> DensityMatrix {
        DensityMatrix { matrix: &self.amplitudes * self.amplitudes.adjoint() }
    }

    /// `<self|other>`
    pub fn inner(&self, other: &PureState) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }
}

/// Hermitian, unit-trace, positive semidefinite operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: CMat,
}

impl DensityMatrix {
    /// Validates Hermiticity, trace and positivity.
    pub fn new(matrix: CMat) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::invalid("density matrix must be square and nonempty"));
        }
        let herm = hermiticity_error(&matrix);
        if herm > HERMITIAN_TOL {
            return Err(Error::invalid(format!("not Hermitian (deviation {herm:e})")));
        }
        let tr = trace(&matrix).re;
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::invalid(format!("trace is {tr}, expected 1")));
        }
        let (vals, _) = eigh(&matrix);
        let min = vals.last().copied().unwrap_or(0.0);
        if min < -PSD_TOL {
            return Err(Error::invalid(format!("minimum eigenvalue {min:e} is negative")));
        }
        Ok(Self { matrix })
    }

    /// Skips validation; callers guarantee the invariants by construction.
    pub(crate) fn from_raw(matrix: CMat) -> Self {
        Self { matrix }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self { matrix: CMat::identity(dim, dim).unscale(dim as f64) }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMat {
        self.matrix
    }

    /// Re-checks all invariants; used by tests and validation passes.
    pub fn check(&self) -> Result<()> {
        Self::new(self.matrix.clone()).map(|_| ())
    }

    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Unitary operator `U`, `U^H U = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryMap {
    matrix: CMat,
}

impl UnitaryMap {
    pub fn new(matrix: CMat) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::invalid("unitary must be square"));
        }
        let n = matrix.nrows();
        let err = (matrix.adjoint() * &matrix - CMat::identity(n, n)).norm();
        if err > UNITARY_TOL {
            return Err(Error::invalid(format!("not unitary (deviation {err:e})")));
        }
        Ok(Self { matrix })
    }

    pub(crate) fn from_raw(matrix: CMat) -> Self {
        Self { matrix }
    }

    pub fn identity(dim: usize) -> Self {
        Self { matrix: CMat::identity(dim, dim) }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn column(&self, k: usize) -> CVec {
        self.matrix.column(k).into_owned()
    }

    pub fn adjoint(&self) -> UnitaryMap {
        Self { matrix: self.matrix.adjoint() }
    }

    /// `U A U^H`
    pub fn conjugate(&self, a: &CMat) -> CMat {
        &self.matrix * a * self.matrix.adjoint()
    }
}

/// Hermitian operator such as a POVM effect or a perturbation generator.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    matrix: CMat,
}

impl HermitianOperator {
    pub fn new(matrix: CMat) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::invalid("Hermitian operator must be square"));
        }
        let herm = hermiticity_error(&matrix);
        if herm > HERMITIAN_TOL {
            return Err(Error::invalid(format!("not Hermitian (deviation {herm:e})")));
        }
        Ok(Self { matrix })
    }

    /// Takes the Hermitian part of a matrix that is Hermitian up to rounding.
    pub fn hermitized(matrix: &CMat) -> Self {
        Self { matrix: hermitize(matrix) }
    }

    /// `|v><v|`
    pub fn rank_one(v: &CVec) -> Self {
        Self { matrix: v * v.adjoint() }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMat {
        self.matrix
    }

    /// `Tr(self * rho)`, real for Hermitian arguments.
    pub fn expectation(&self, rho: &CMat) -> f64 {
        // Tr(A B) = sum_ij A_ij B_ji, and for Hermitian B, B_ji = conj(B_ij)
        self.matrix
            .iter()
            .zip(rho.iter())
            .map(|(a, b)| (a * b.conj()).re)
            .sum()
    }
}

/// Eigenvalues (descending) and orthonormal eigenvectors of a Hermitian operator.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: UnitaryMap,
}

pub fn eig_hermitian(a: &HermitianOperator) -> Eigen {
    let (values, vectors) = eigh(a.matrix());
    Eigen { values, vectors: UnitaryMap::from_raw(vectors) }
}

/// Validating front-end for raw matrices: rejects inputs that are not
/// Hermitian within `HERMITIAN_TOL`.
pub fn eig_hermitian_checked(a: &CMat) -> Result<Eigen> {
    Ok(eig_hermitian(&HermitianOperator::new(a.clone())?))
}

/// `<psi|rho|psi>`; the infidelity of a reconstruction is one minus this.
pub fn fidelity_pure(psi: &PureState, rho: &DensityMatrix) -> Result<f64> {
    if psi.dim() != rho.dim() {
        return Err(Error::DimensionMismatch { expected: psi.dim(), found: rho.dim() });
    }
    let v = psi.amplitudes();
    Ok(v.dotc(&(rho.matrix() * v)).re)
}
