//! Statistical problem assembly and validation.
//!
//! A [`JointModel`] holds the joint asymptotic second-moment description of
//! two estimators of a common parameter: block variances `V1`, `V2`, the
//! cross-covariance `C`, and scaled bias vectors `b1`, `b2`. Validation
//! enforces the two working assumptions:
//!
//! - A1: `V1` and `V2` are symmetric positive definite,
//! - A2: the assembled joint covariance `Sigma = [[V1, C], [C^T, V2]]` is
//!   symmetric positive definite.
//!
//! A [`RiskSpec`] extends the model with the risk weighting `Omega` and
//! caches the derived quadratic coefficients: `delta_b = b2 - b1`,
//! `Lambda = delta_b delta_b^T`, and `M = V1 + V2 - C - C^T + Lambda`.
//! Positive definiteness of `M` is the strict-convexity certificate for
//! the trace risk; it follows from A2 and is re-checked as an internal
//! consistency gate.

use thiserror::Error;

use crate::matrix::{
    cholesky_check, inverse, Matrix, MatrixError, SpdCertificate, CONDITION_CEILING,
};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ModelError {
    #[error("{context}: {source}")]
    DimensionMismatch {
        context: String,
        source: MatrixError,
    },
    #[error("assumption A1 violated: V{block} is not symmetric positive definite ({source})")]
    AssumptionA1Violated { block: u8, source: MatrixError },
    #[error("assumption A2 violated: joint covariance Sigma is not symmetric positive definite within tolerance ({detail})")]
    AssumptionA2Violated { detail: String },
    #[error("risk weighting Omega is not symmetric positive definite ({detail})")]
    OmegaNotSpd { detail: String },
    #[error("internal consistency failure: M = V1 + V2 - C - C^T + Lambda is not positive definite ({detail})")]
    MNotSpd { detail: String },
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

/// SPD check with the conditioning ceiling applied on top of the
/// eigenvalue certificate. A certificate whose condition estimate reaches
/// `1e12` is useless downstream, so it counts as a violation.
fn spd_check_conditioned(m: &Matrix) -> Result<SpdCertificate, String> {
    let cert = cholesky_check(m).map_err(|e| e.to_string())?;
    if cert.condition_estimate >= CONDITION_CEILING {
        return Err(format!(
            "condition estimate {:e} reaches ceiling {:e}",
            cert.condition_estimate, CONDITION_CEILING
        ));
    }
    Ok(cert)
}

/// Joint asymptotic description of two estimators in the scaled regime.
#[derive(Debug, Clone, PartialEq)]
pub struct JointModel {
    dim: usize,
    v1: Matrix,
    v2: Matrix,
    c: Matrix,
    b1: Matrix,
    b2: Matrix,
}

impl JointModel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn v1(&self) -> &Matrix {
        &self.v1
    }

    pub fn v2(&self) -> &Matrix {
        &self.v2
    }

    pub fn c(&self) -> &Matrix {
        &self.c
    }

    /// Scaled asymptotic bias of the first estimator, as a column vector.
    pub fn b1(&self) -> &Matrix {
        &self.b1
    }

    pub fn b2(&self) -> &Matrix {
        &self.b2
    }

    /// Assembles the joint covariance `[[V1, C], [C^T, V2]]`.
    pub fn sigma(&self) -> Matrix {
        let k = self.dim;
        let mut s = Matrix::zeros(2 * k, 2 * k);
        for i in 0..k {
            for j in 0..k {
                s[(i, j)] = self.v1[(i, j)];
                s[(i, k + j)] = self.c[(i, j)];
                s[(k + i, j)] = self.c[(j, i)];
                s[(k + i, k + j)] = self.v2[(i, j)];
            }
        }
        s
    }
}

/// Builds and validates a [`JointModel`].
pub fn build_model(
    v1: Matrix,
    v2: Matrix,
    c: Matrix,
    b1: &[f64],
    b2: &[f64],
) -> Result<JointModel, ModelError> {
    let k = v1.rows();
    let square_of_dim = |m: &Matrix, name: &str| -> Result<(), ModelError> {
        if m.rows() != k || m.cols() != k {
            return Err(ModelError::DimensionMismatch {
                context: format!("{name} must be {k}x{k}"),
                source: MatrixError::InvalidData {
                    rows: k,
                    cols: k,
                    got: m.rows() * m.cols(),
                },
            });
        }
        Ok(())
    };
    square_of_dim(&v1, "v1")?;
    square_of_dim(&v2, "v2")?;
    square_of_dim(&c, "c")?;
    if b1.len() != k || b2.len() != k {
        return Err(ModelError::DimensionMismatch {
            context: format!("bias vectors must have length {k}"),
            source: MatrixError::InvalidData {
                rows: k,
                cols: 1,
                got: b1.len().max(b2.len()),
            },
        });
    }

    cholesky_check(&v1).map_err(|source| ModelError::AssumptionA1Violated { block: 1, source })?;
    cholesky_check(&v2).map_err(|source| ModelError::AssumptionA1Violated { block: 2, source })?;

    let model = JointModel {
        dim: k,
        v1,
        v2,
        c,
        b1: Matrix::col_vector(b1)?,
        b2: Matrix::col_vector(b2)?,
    };
    validate_assumptions(&model)?;
    Ok(model)
}

/// Certifies assumption A2 on the assembled joint covariance.
///
/// Success is exactly the condition under which the trace risk is strictly
/// convex and every downstream uniqueness claim holds.
pub fn validate_assumptions(model: &JointModel) -> Result<SpdCertificate, ModelError> {
    spd_check_conditioned(&model.sigma())
        .map_err(|detail| ModelError::AssumptionA2Violated { detail })
}

/// A validated risk problem: model, weighting, and cached quadratic
/// coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskSpec {
    model: JointModel,
    omega: Matrix,
    omega_inv: Matrix,
    omega_cert: SpdCertificate,
    delta_b: Matrix,
    lambda: Matrix,
    m_matrix: Matrix,
    m_cert: SpdCertificate,
    /// `N = V1 - C - b1 delta_b^T`, the constant block of the gradient:
    /// `grad R(W) = 2 Omega^-1 (W M - N)`.
    n_matrix: Matrix,
}

impl RiskSpec {
    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    pub fn model(&self) -> &JointModel {
        &self.model
    }

    pub fn omega(&self) -> &Matrix {
        &self.omega
    }

    pub fn omega_inv(&self) -> &Matrix {
        &self.omega_inv
    }

    pub fn omega_cert(&self) -> &SpdCertificate {
        &self.omega_cert
    }

    pub fn delta_b(&self) -> &Matrix {
        &self.delta_b
    }

    pub fn lambda(&self) -> &Matrix {
        &self.lambda
    }

    pub fn m_matrix(&self) -> &Matrix {
        &self.m_matrix
    }

    pub fn m_cert(&self) -> &SpdCertificate {
        &self.m_cert
    }

    pub fn n_matrix(&self) -> &Matrix {
        &self.n_matrix
    }
}

/// Builds a [`RiskSpec`], caching `delta_b`, `Lambda`, `M`, and `Omega^-1`.
pub fn build_risk_spec(model: JointModel, omega: Matrix) -> Result<RiskSpec, ModelError> {
    let k = model.dim();
    if omega.rows() != k || omega.cols() != k {
        return Err(ModelError::DimensionMismatch {
            context: format!("omega must be {k}x{k}"),
            source: MatrixError::InvalidData {
                rows: k,
                cols: k,
                got: omega.rows() * omega.cols(),
            },
        });
    }
    let omega_cert =
        spd_check_conditioned(&omega).map_err(|detail| ModelError::OmegaNotSpd { detail })?;
    let omega_inv = inverse(&omega)?;

    let delta_b = model.b2().sub(model.b1())?;
    let lambda = delta_b.matmul(&delta_b.transpose())?;
    let m_matrix = model
        .v1()
        .add(model.v2())?
        .sub(model.c())?
        .sub(&model.c().transpose())?
        .add(&lambda)?
        .symmetrized();
    let m_cert =
        spd_check_conditioned(&m_matrix).map_err(|detail| ModelError::MNotSpd { detail })?;

    let n_matrix = model
        .v1()
        .sub(model.c())?
        .sub(&model.b1().matmul(&delta_b.transpose())?)?;

    Ok(RiskSpec {
        model,
        omega,
        omega_inv,
        omega_cert,
        delta_b,
        lambda,
        m_matrix,
        m_cert,
        n_matrix,
    })
}
