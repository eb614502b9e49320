use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ncmaj::hermitian::{CMatrix, Hermitian, Psd, TOL};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Square complex matrix as nested rows of `[re, im]` pairs.
///
/// Floats are written in shortest round-trip form, so re-parsing an emitted
/// document recovers every entry bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixDocument {
    pub order: usize,
    pub entries: Vec<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// When true, the matrix must pass the Hermitian check on load.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hermitian: Option<bool>,
    /// Overrides; only `hermitian` is honoured.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<BTreeMap<String, f64>>,
}

impl MatrixDocument {
    pub fn from_matrix(m: &CMatrix, label: &str, hermitian: bool) -> Self {
        let entries = (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
            .collect();
        Self {
            order: m.nrows(),
            entries,
            label: Some(label.to_string()),
            hermitian: hermitian.then_some(true),
            tolerances: None,
        }
    }

    pub fn to_matrix(&self) -> Result<CMatrix, CliError> {
        let n = self.order;
        if n == 0 {
            return Err(CliError::Usage("document has order 0".into()));
        }
        if self.entries.len() != n || self.entries.iter().any(|row| row.len() != n) {
            return Err(CliError::Usage(format!("entries must form a {n} x {n} array")));
        }
        if self.entries.iter().flatten().flatten().any(|v| !v.is_finite()) {
            return Err(CliError::Usage("entries must be finite".into()));
        }
        Ok(CMatrix::from_fn(n, n, |i, j| {
            let [re, im] = self.entries[i][j];
            Complex64::new(re, im)
        }))
    }

    fn hermitian_tol(&self) -> Result<f64, CliError> {
        let Some(tols) = &self.tolerances else { return Ok(TOL.hermitian) };
        if let Some(key) = tols.keys().find(|k| k.as_str() != "hermitian") {
            return Err(CliError::Usage(format!("unsupported tolerance override `{key}`")));
        }
        match tols.get("hermitian") {
            Some(&t) if t.is_finite() && t >= 0.0 => Ok(t),
            Some(&t) => Err(CliError::Usage(format!("invalid hermitian tolerance {t}"))),
            None => Ok(TOL.hermitian),
        }
    }

    pub fn to_hermitian(&self) -> Result<Hermitian, CliError> {
        let m = self.to_matrix()?;
        let tol = self.hermitian_tol()?;
        let scale = m.iter().map(|z| z.norm()).fold(1.0, f64::max);
        let dev = (&m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if dev > tol * scale {
            return Err(CliError::Usage(format!("matrix is not Hermitian (deviation {dev:e})")));
        }
        Ok(Hermitian::symmetrized(m))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).expect("documents serialize");
        fs::write(path, text + "\n").map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }
}

pub fn read_hermitian(path: &Path) -> Result<Hermitian, CliError> {
    MatrixDocument::read(path)?.to_hermitian()
}

pub fn read_psd(path: &Path) -> Result<Psd, CliError> {
    Ok(Psd::new(read_hermitian(path)?)?)
}
