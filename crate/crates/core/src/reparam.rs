//! Invertible affine reparameterisations of weight space.
//!
//! An [`AffineMap`] sends `W` to `A W B + K_off` with invertible `A`, `B`.
//! Composing the risk with the inverse map gives the same objective in new
//! coordinates ([`pullback_risk`]); gradients transport between coordinate
//! systems by [`transform_gradient`]: if `R1 = R2 ∘ T` then
//! `grad R1(W) = A^T grad R2(T(W)) B^T`.
//!
//! [`Chart`] names the two standard weight conventions for combining two
//! estimators plus arbitrary affine charts:
//!
//! - `FormA`: weight on the second estimator, the base coordinates;
//! - `FormB`: weight on the first estimator, reached through the
//!   involution `W -> I - W` (that is `A = -I`, `B = I`, `K_off = I`);
//! - `General(t)`: coordinates reached through an arbitrary map `t`.

use rand::Rng;

use crate::matrix::{condition_estimate, inverse, Matrix, MatrixError, CONDITION_CEILING};
use crate::model::RiskSpec;
use crate::risk::{RiskEvaluator, WeightMatrix};

/// Invertible affine transform `T(W) = A W B + K_off` on square matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    a: Matrix,
    b: Matrix,
    k_off: Matrix,
}

impl AffineMap {
    /// Validates squareness, matching dimensions, and invertibility of `a`
    /// and `b` within the conditioning ceiling.
    pub fn new(a: Matrix, b: Matrix, k_off: Matrix) -> Result<Self, MatrixError> {
        let dim = a.rows();
        for m in [&a, &b, &k_off] {
            if !m.is_square() {
                return Err(MatrixError::NotSquare {
                    rows: m.rows(),
                    cols: m.cols(),
                });
            }
            if m.rows() != dim {
                return Err(MatrixError::DimensionMismatch {
                    op: "affine map blocks",
                    left_rows: dim,
                    left_cols: dim,
                    right_rows: m.rows(),
                    right_cols: m.cols(),
                });
            }
        }
        for m in [&a, &b] {
            let est = condition_estimate(m)?;
            if !est.is_finite() || est >= CONDITION_CEILING {
                return Err(MatrixError::IllConditioned { estimate: est });
            }
        }
        Ok(AffineMap { a, b, k_off })
    }

    pub fn identity(dim: usize) -> Self {
        AffineMap {
            a: Matrix::identity(dim),
            b: Matrix::identity(dim),
            k_off: Matrix::zeros(dim, dim),
        }
    }

    /// The involution `W -> I - W`.
    pub fn form_b(dim: usize) -> Self {
        AffineMap {
            a: Matrix::identity(dim).scale(-1.0),
            b: Matrix::identity(dim),
            k_off: Matrix::identity(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.a.rows()
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn k_off(&self) -> &Matrix {
        &self.k_off
    }

    /// `A W B + K_off`.
    pub fn apply(&self, w: &Matrix) -> Result<Matrix, MatrixError> {
        self.a.matmul(w)?.matmul(&self.b)?.add(&self.k_off)
    }

    /// The inverse map `W -> A^-1 (W - K_off) B^-1`.
    pub fn invert(&self) -> Result<AffineMap, MatrixError> {
        let a_inv = inverse(&self.a)?;
        let b_inv = inverse(&self.b)?;
        let k = a_inv.matmul(&self.k_off)?.matmul(&b_inv)?.scale(-1.0);
        Ok(AffineMap {
            a: a_inv,
            b: b_inv,
            k_off: k,
        })
    }

    /// The composition `self ∘ first`, i.e. `W -> self(first(W))`.
    pub fn compose(&self, first: &AffineMap) -> Result<AffineMap, MatrixError> {
        let a = self.a.matmul(&first.a)?;
        let b = first.b.matmul(&self.b)?;
        let k = self
            .a
            .matmul(&first.k_off)?
            .matmul(&self.b)?
            .add(&self.k_off)?;
        Ok(AffineMap { a, b, k_off: k })
    }

    /// Draws a map with `A, B = I + 0.5 G` (standard normal `G`), resampled
    /// until both condition estimates stay below `1e3`, and a standard
    /// normal offset. Keeps property-test residual tolerances meaningful.
    pub fn random_well_conditioned<R: Rng>(dim: usize, rng: &mut R) -> Self {
        let draw = |rng: &mut R| loop {
            let g = crate::matrix::random_normal(dim, dim, rng);
            let m = Matrix::identity(dim).add(&g.scale(0.5)).expect("same dims");
            if let Ok(est) = condition_estimate(&m) {
                if est < 1e3 {
                    return m;
                }
            }
        };
        let a = draw(rng);
        let b = draw(rng);
        let k_off = crate::matrix::random_normal(dim, dim, rng);
        AffineMap { a, b, k_off }
    }
}

/// Transports a gradient evaluated at `T(W)` back to the source
/// coordinates: `A^T grad B^T`.
pub fn transform_gradient(t: &AffineMap, grad_at_image: &Matrix) -> Result<Matrix, MatrixError> {
    t.a.transpose()
        .matmul(grad_at_image)?
        .matmul(&t.b.transpose())
}

/// Named coordinate charts on weight space.
#[derive(Debug, Clone, PartialEq)]
pub enum Chart {
    /// Base coordinates: `W` weights the second estimator.
    FormA,
    /// Mirror coordinates: `W` weights the first estimator.
    FormB,
    /// Coordinates reached from the base chart through `map`.
    General(AffineMap),
}

impl Chart {
    /// The affine map carrying base (FormA) coordinates into this chart.
    pub fn map(&self, dim: usize) -> AffineMap {
        match self {
            Chart::FormA => AffineMap::identity(dim),
            Chart::FormB => AffineMap::form_b(dim),
            Chart::General(t) => t.clone(),
        }
    }

    /// Chart coordinates of a base-chart weight.
    pub fn from_base(&self, w_base: &Matrix) -> Result<Matrix, MatrixError> {
        self.map(w_base.rows()).apply(w_base)
    }

    /// Base-chart coordinates of a weight given in this chart.
    pub fn to_base(&self, w: &Matrix) -> Result<Matrix, MatrixError> {
        self.map(w.rows()).invert()?.apply(w)
    }

    pub fn label(&self) -> &'static str {
        match self {
            Chart::FormA => "A",
            Chart::FormB => "B",
            Chart::General(_) => "general",
        }
    }
}

/// The risk seen through an affine chart: `R2(W2) = R(T^-1(W2))`.
///
/// Captures the spec and map by value; the inverse map is computed once at
/// construction.
#[derive(Debug, Clone)]
pub struct PullbackRisk {
    spec: RiskSpec,
    map: AffineMap,
    inverse: AffineMap,
}

/// Builds the pulled-back risk evaluator for an invertible map.
pub fn pullback_risk(spec: RiskSpec, map: AffineMap) -> Result<PullbackRisk, MatrixError> {
    if map.dim() != spec.dim() {
        return Err(MatrixError::DimensionMismatch {
            op: "pullback",
            left_rows: spec.dim(),
            left_cols: spec.dim(),
            right_rows: map.dim(),
            right_cols: map.dim(),
        });
    }
    let inverse = map.invert()?;
    Ok(PullbackRisk { spec, map, inverse })
}

impl PullbackRisk {
    pub fn spec(&self) -> &RiskSpec {
        &self.spec
    }

    pub fn map(&self) -> &AffineMap {
        &self.map
    }

    pub fn inverse_map(&self) -> &AffineMap {
        &self.inverse
    }

    fn base_point(&self, w: &WeightMatrix) -> Result<WeightMatrix, MatrixError> {
        WeightMatrix::new(self.inverse.apply(w.as_matrix())?)
    }
}

impl RiskEvaluator for PullbackRisk {
    fn dim(&self) -> usize {
        self.spec.dim()
    }

    fn value(&self, w: &WeightMatrix) -> Result<f64, MatrixError> {
        self.spec.value(&self.base_point(w)?)
    }

    /// Gradient in chart coordinates, by the transport law applied to the
    /// inverse map: `grad R2(W2) = A^-T grad R(T^-1(W2)) B^-T`.
    fn gradient(&self, w: &WeightMatrix) -> Result<Matrix, MatrixError> {
        let base_grad = self.spec.gradient(&self.base_point(w)?)?;
        transform_gradient(&self.inverse, &base_grad)
    }
}
