//! Measurement strategies: construction, validation, persistence and
//! informational-completeness diagnostics.


mod certify;
mod gellmann;
mod gf2n;
mod io;
mod mub;
mod neumark;
mod psi;
mod sic;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::{eigh, CMat, DensityMatrix, HermitianOperator, PureState};

pub use certify::{
    certify_ic, real_vectorize, CertifyOptions, IcReport, MeasurementMap, R1Distinguishability, StrictnessEvidence,
    DISTINGUISH_TOL, RANK_TOL, STRICT_TOL,
};
pub use gellmann::{build_gmb_4, build_gmb_5, build_gmb_full, round_robin_matchings};
pub use gf2n::Gf2n;
pub use io::{load_povm, parse_povm, save_povm, to_json};
pub use mub::{build_mub, build_mub_subset, mub_class_paulis, pauli_hermitian};
pub use neumark::{neumark_embed, NeumarkEmbedding};
pub use psi::build_psi;
pub use sic::{build_sic, find_sic_fiducial, sic_residual, SicSearch};

/// Tolerance on `||sum_mu E_mu - I||_F` per setting.
pub const COMPLETENESS_TOL: f64 = 1e-8;
/// Smallest eigenvalue allowed for an effect.
pub const EFFECT_PSD_TOL: f64 = 1e-10;

/// Informational-completeness class a POVM claims to belong to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum IcClass {
    FullyIc,
    R1sIc,
    R1Ic,
    Unknown,
}

impl IcClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            IcClass::FullyIc => "FULLY_IC",
            IcClass::R1sIc => "R1S_IC",
            IcClass::R1Ic => "R1_IC",
            IcClass::Unknown => "UNKNOWN",
        }
    }
}

impl std::fmt::Display for IcClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One complete measurement: effects that sum to the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Setting {
    pub label: String,
    pub effects: Vec<HermitianOperator>,
    pub is_orthobasis: bool,
}

impl Setting {
    /// Orthonormal-basis setting from the columns of `basis`.
    pub fn from_basis(label: impl Into<String>, basis: &[crate::qcore::CVec]) -> Self {
        Self {
            label: label.into(),
            effects: basis.iter().map(HermitianOperator::rank_one).collect(),
            is_orthobasis: true,
        }
    }

    pub fn len(&self) -> usize {
        self.effects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.effects.is_empty()
    }

    /// `||sum E - I||_F`
    pub fn completeness_residual(&self) -> f64 {
        let d = self.effects.first().map_or(0, |e| e.dim());
        let mut sum = CMat::zeros(d, d);
        for e in &self.effects {
            sum += e.matrix();
        }
        (sum - CMat::identity(d, d)).norm()
    }

    /// Born-rule probabilities `Tr(E rho)`.
    pub fn probabilities(&self, rho: &CMat) -> Vec<f64> {
        self.effects.iter().map(|e| e.expectation(rho)).collect()
    }
}

/// Ordered collection of measurement settings on a `dim`-level system.
#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    pub name: String,
    dim: usize,
    settings: Vec<Setting>,
    pub ic_class_claim: IcClass,
}

impl Povm {
    /// Validates effect positivity, per-setting completeness and the
    /// orthobasis flags.
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        settings: Vec<Setting>,
        ic_class_claim: IcClass,
    ) -> Result<Self> {
        if dim < 1 {
            return Err(Error::invalid("POVM dimension must be positive"));
        }
        if settings.is_empty() {
            return Err(Error::invalid("POVM needs at least one setting"));
        }
        for s in &settings {
            if s.effects.is_empty() {
                return Err(Error::invalid(format!("setting '{}' has no effects", s.label)));
            }
            for e in &s.effects {
                if e.dim() != dim {
                    return Err(Error::DimensionMismatch { expected: dim, found: e.dim() });
                }
                let (vals, _) = eigh(e.matrix());
                if vals[dim - 1] < -EFFECT_PSD_TOL {
                    return Err(Error::invalid(format!(
                        "setting '{}' has an effect with eigenvalue {:e}",
                        s.label,
                        vals[dim - 1]
                    )));
                }
            }
            if s.is_orthobasis {
                if s.effects.len() != dim {
                    return Err(Error::invalid(format!(
                        "orthobasis setting '{}' has {} effects, expected {dim}",
                        s.label,
                        s.effects.len()
                    )));
                }
                for e in &s.effects {
                    let m = e.matrix();
                    if (m * m - m).norm() > COMPLETENESS_TOL {
                        return Err(Error::invalid(format!(
                            "orthobasis setting '{}' contains a non-projector",
                            s.label
                        )));
                    }
                }
            }
        }
        let residuals: Vec<f64> = settings.iter().map(Setting::completeness_residual).collect();
        if residuals.iter().any(|&r| !(r <= COMPLETENESS_TOL)) {
            return Err(Error::Incomplete { residuals, tolerance: COMPLETENESS_TOL });
        }
        Ok(Self { name: name.into(), dim, settings, ic_class_claim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn settings(&self) -> &[Setting] {
        &self.settings
    }

    pub fn n_settings(&self) -> usize {
        self.settings.len()
    }

    pub fn total_outcomes(&self) -> usize {
        self.settings.iter().map(Setting::len).sum()
    }

    /// All effects in setting order.
    pub fn effects(&self) -> impl Iterator<Item = &HermitianOperator> {
        self.settings.iter().flat_map(|s| s.effects.iter())
    }

    /// Probabilities per setting for `rho`.
    pub fn probabilities(&self, rho: &DensityMatrix) -> Result<Vec<Vec<f64>>> {
        if rho.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: rho.dim() });
        }
        Ok(self.settings.iter().map(|s| s.probabilities(rho.matrix())).collect())
    }

    /// Probabilities for a pure state, flattened in setting order.
    pub fn pure_probabilities(&self, psi: &PureState) -> Vec<f64> {
        let v = psi.amplitudes();
        self.effects().map(|e| v.dotc(&(e.matrix() * v)).re).collect()
    }

    /// The first `n` settings, in construction order.
    pub fn truncated(&self, n: usize) -> Result<Povm> {
        if n == 0 || n > self.settings.len() {
            return Err(Error::invalid(format!(
                "cannot keep {n} of {} settings",
                self.settings.len()
            )));
        }
        let claim = if n == self.settings.len() { self.ic_class_claim } else { IcClass::Unknown };
        Ok(Povm {
            name: if n == self.settings.len() { self.name.clone() } else { format!("{}[{n}]", self.name) },
            dim: self.dim,
            settings: self.settings[..n].to_vec(),
            ic_class_claim: claim,
        })
    }

    /// Single non-orthogonal setting, which needs a Neumark embedding to be
    /// realized as a projective measurement.
    pub fn is_single_nonorthogonal(&self) -> bool {
        self.settings.len() == 1 && !self.settings[0].is_orthobasis
    }

    /// Same POVM with a different name.
    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

/// `d` projectors onto the computational basis.
pub fn build_standard_basis(dim: usize) -> Result<Povm> {
    if dim < 2 {
        return Err(Error::invalid("standard basis needs dimension >= 2"));
    }
    let basis: Vec<_> = (0..dim).map(|k| PureState::basis(dim, k).amplitudes().clone()).collect();
    Povm::new("std", dim, vec![standard_setting(&basis)], IcClass::Unknown)
}

pub(crate) fn standard_setting(basis: &[crate::qcore::CVec]) -> Setting {
    Setting::from_basis("std", basis)
}

/// Built-in POVM families addressable by name.
pub const BUILTIN_NAMES: &[&str] = &["std", "sic", "mub", "gmb", "psi", "5gmb", "4gmb", "5mub"];

/// Constructs a built-in POVM by (case-insensitive) name.
pub fn build_named(name: &str, dim: usize) -> Result<Povm> {
    match name.to_ascii_lowercase().as_str() {
        "std" | "standard" => build_standard_basis(dim),
        "sic" => build_sic(dim, None),
        "mub" => build_mub(dim),
        "gmb" => build_gmb_full(dim),
        "psi" => build_psi(dim),
        "5gmb" => build_gmb_5(dim),
        "4gmb" => build_gmb_4(dim),
        "5mub" => build_mub_subset(dim, 5),
        other => Err(Error::invalid(format!(
            "unknown POVM '{other}' (built-ins: {})",
            BUILTIN_NAMES.join(", ")
        ))),
    }
}
