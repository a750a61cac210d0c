//! The JSON problem schema and its conversion into a validated risk spec.
//!
//! ```json
//! {
//!   "dim": 3,
//!   "v1": [[...], ...], "v2": [[...], ...], "c": [[...], ...],
//!   "omega": [[...], ...],      // optional, defaults to identity
//!   "b1": [...], "b2": [...],   // optional, default zero
//!   "seed": 42                  // optional
//! }
//! ```
//!
//! Matrices are row-major nested arrays. Serialisation uses the shortest
//! representation that parses back to the same value, so files round-trip
//! exactly.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use meta_equiv_core::harness::{instance_ridge, partition_joint};
use meta_equiv_core::{build_model, build_risk_spec, random_spd, Matrix, RiskSpec};

use crate::error::CliError;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub dim: usize,
    pub v1: Vec<Vec<f64>>,
    pub v2: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b1: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b2: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ProblemFile {
    /// Deterministic random problem: one partitioned SPD joint covariance,
    /// identity weighting, zero bias.
    pub fn generate(dim: usize, seed: u64) -> ProblemFile {
        let sigma = random_spd(2 * dim, seed, instance_ridge(dim));
        let (v1, v2, c) = partition_joint(&sigma, dim);
        ProblemFile {
            dim,
            v1: v1.to_nested(),
            v2: v2.to_nested(),
            c: c.to_nested(),
            omega: Some(Matrix::identity(dim).to_nested()),
            b1: Some(vec![0.0; dim]),
            b2: Some(vec![0.0; dim]),
            seed: Some(seed),
        }
    }

    pub fn load(path: &Path) -> Result<ProblemFile, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::runtime(format!("reading {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::runtime(format!("parsing {}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::runtime(format!("serialising problem: {e}")))?;
        text.push('\n');
        fs::write(path, text)
            .map_err(|e| CliError::runtime(format!("writing {}: {e}", path.display())))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    /// Validates dimensions with JSON-path context, then runs the model
    /// assumption gates.
    pub fn to_risk_spec(&self) -> Result<RiskSpec, CliError> {
        let k = self.dim;
        if k == 0 {
            return Err(CliError::runtime("$.dim: must be at least 1".to_string()));
        }
        let v1 = matrix_from_nested("v1", &self.v1, k)?;
        let v2 = matrix_from_nested("v2", &self.v2, k)?;
        let c = matrix_from_nested("c", &self.c, k)?;
        let omega = match &self.omega {
            Some(rows) => matrix_from_nested("omega", rows, k)?,
            None => Matrix::identity(k),
        };
        let b1 = vector_checked("b1", self.b1.as_deref(), k)?;
        let b2 = vector_checked("b2", self.b2.as_deref(), k)?;

        let model = build_model(v1, v2, c, &b1, &b2)?;
        Ok(build_risk_spec(model, omega)?)
    }
}

fn matrix_from_nested(name: &str, rows: &[Vec<f64>], dim: usize) -> Result<Matrix, CliError> {
    if rows.len() != dim {
        return Err(CliError::runtime(format!(
            "$.{name}: expected {dim} rows, found {}",
            rows.len()
        )));
    }
    let mut data = Vec::with_capacity(dim * dim);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != dim {
            return Err(CliError::runtime(format!(
                "$.{name}[{i}]: expected {dim} entries, found {}",
                row.len()
            )));
        }
        data.extend_from_slice(row);
    }
    Matrix::new(dim, dim, data)
        .map_err(|e| CliError::runtime(format!("$.{name}: {e}")))
}

fn vector_checked(name: &str, v: Option<&[f64]>, dim: usize) -> Result<Vec<f64>, CliError> {
    match v {
        None => Ok(vec![0.0; dim]),
        Some(values) => {
            if values.len() != dim {
                return Err(CliError::runtime(format!(
                    "$.{name}: expected length {dim}, found {}",
                    values.len()
                )));
            }
            if let Some(bad) = values.iter().position(|x| !x.is_finite()) {
                return Err(CliError::runtime(format!(
                    "$.{name}[{bad}]: entry is not finite"
                )));
            }
            Ok(values.to_vec())
        }
    }
}
