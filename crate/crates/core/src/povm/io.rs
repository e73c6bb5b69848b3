//! JSON persistence for POVMs. Complex numbers are `[re, im]` pairs and
//! matrices are lists of rows.

use std::path::Path;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::{IcClass, Povm, Setting};
use crate::error::{Error, Result};
use crate::qcore::{CMat, HermitianOperator};

#[derive(Debug, Serialize, Deserialize)]
struct SettingFile {
    label: String,
    effects: Vec<Vec<Vec<[f64; 2]>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    is_orthobasis: Option<bool>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PovmFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    dim: usize,
    settings: Vec<SettingFile>,
    #[serde(default)]
    ic_class_claim: Option<IcClass>,
}

pub(crate) fn matrix_to_rows(m: &CMat) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub(crate) fn rows_to_matrix(rows: &[Vec<[f64; 2]>], dim: usize) -> Result<CMat> {
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        return Err(Error::Schema(format!("effect matrix is not {dim}x{dim}")));
    }
    if rows.iter().flatten().flatten().any(|x| !x.is_finite()) {
        return Err(Error::Schema("non-finite matrix entry".into()));
    }
    Ok(CMat::from_fn(dim, dim, |i, j| C64::new(rows[i][j][0], rows[i][j][1])))
}

pub fn to_json(povm: &Povm) -> Result<String> {
    let file = PovmFile {
        name: Some(povm.name.clone()),
        dim: povm.dim(),
        settings: povm
            .settings()
            .iter()
            .map(|s| SettingFile {
                label: s.label.clone(),
                effects: s.effects.iter().map(|e| matrix_to_rows(e.matrix())).collect(),
                is_orthobasis: Some(s.is_orthobasis),
            })
            .collect(),
        ic_class_claim: Some(povm.ic_class_claim),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

/// Parses and validates a POVM document. A missing class claim becomes
/// `UNKNOWN`; a missing orthobasis flag is inferred.
pub fn parse_povm(text: &str) -> Result<Povm> {
    let file: PovmFile = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
    if file.dim == 0 {
        return Err(Error::Schema("dim must be positive".into()));
    }
    let mut settings = Vec::with_capacity(file.settings.len());
    for s in &file.settings {
        let effects = s
            .effects
            .iter()
            .map(|rows| {
                let m = rows_to_matrix(rows, file.dim)?;
                HermitianOperator::new(m).map_err(|e| Error::Schema(format!("setting '{}': {e}", s.label)))
            })
            .collect::<Result<Vec<_>>>()?;
        let is_orthobasis = s.is_orthobasis.unwrap_or_else(|| {
            effects.len() == file.dim
                && effects.iter().all(|e| {
                    let m = e.matrix();
                    (m * m - m).norm() < super::COMPLETENESS_TOL
                })
        });
        settings.push(Setting { label: s.label.clone(), effects, is_orthobasis });
    }
    Povm::new(
        file.name.unwrap_or_else(|| "custom".into()),
        file.dim,
        settings,
        file.ic_class_claim.unwrap_or(IcClass::Unknown),
    )
}

pub fn load_povm(path: impl AsRef<Path>) -> Result<Povm> {
    let text = std::fs::read_to_string(path)?;
    parse_povm(&text)
}

pub fn save_povm(povm: &Povm, path: impl AsRef<Path>) -> Result<()> {
    crate::io::write_atomic(path.as_ref(), to_json(povm)?.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::povm::{build_mub, build_standard_basis};

    #[test]
    fn round_trip_standard_basis() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("std4.json");
        let p = build_standard_basis(4).unwrap();
        save_povm(&p, &path).unwrap();
        let q = load_povm(&path).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn round_trip_mub_exact() {
        let p = build_mub(4).unwrap();
        let q = parse_povm(&to_json(&p).unwrap()).unwrap();
        for (a, b) in p.effects().zip(q.effects()) {
            assert!((a.matrix() - b.matrix()).norm() < 1e-12);
        }
        assert_eq!(q.ic_class_claim, IcClass::FullyIc);
    }

    #[test]
    fn scaled_effects_rejected_with_residual() {
        let text = r#"{"dim":2,"settings":[{"label":"s","effects":[
            [[[1.01,0],[0,0]],[[0,0],[0,0]]],
            [[[0,0],[0,0]],[[0,0],[1.01,0]]]]}]}"#;
        match parse_povm(text) {
            Err(Error::Incomplete { residuals, .. }) => {
                assert!((residuals[0] - 0.01 * 2f64.sqrt()).abs() < 1e-12)
            }
            other => panic!("expected incompleteness, got {other:?}"),
        }
    }

    #[test]
    fn defaults_and_schema_errors() {
        let text = r#"{"dim":2,"settings":[{"label":"z","effects":[
            [[[1,0],[0,0]],[[0,0],[0,0]]],
            [[[0,0],[0,0]],[[0,0],[1,0]]]]}]}"#;
        let p = parse_povm(text).unwrap();
        assert_eq!(p.ic_class_claim, IcClass::Unknown);
        assert!(p.settings()[0].is_orthobasis);
        assert!(matches!(parse_povm(r#"{"dim":2}"#), Err(Error::Schema(_))));
        assert!(matches!(
            parse_povm(r#"{"dim":2,"settings":[{"label":"z","effects":[[[[1,0]]]]}]}"#),
            Err(Error::Schema(_))
        ));
    }
}
