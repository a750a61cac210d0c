//! Dense real matrix kernel.
//!
//! Row-major storage, `f64` entries, sized for problems up to a few hundred
//! rows. Provides the operations the rest of the crate is built on:
//! products, transpose, LU solves, Cholesky-based positive-definiteness
//! checks, symmetric eigenvalues (cyclic Jacobi), Kronecker products,
//! column-stacking vectorisation, norms, and seeded random SPD generation.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

/// Relative tolerance used when asserting symmetry of a matrix.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Condition-estimate ceiling beyond which solves refuse to proceed.
pub const CONDITION_CEILING: f64 = 1e12;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum MatrixError {
    #[error("dimension mismatch in {op}: left is {left_rows}x{left_cols}, right is {right_rows}x{right_cols}")]
    DimensionMismatch {
        op: &'static str,
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric: |a[{i},{j}] - a[{j},{i}]| = {deviation:e} exceeds tolerance")]
    NotSymmetric { i: usize, j: usize, deviation: f64 },
    #[error("matrix is not positive definite: leading minor {minor} has nonpositive pivot {pivot:e}")]
    NotPositiveDefinite { minor: usize, pivot: f64 },
    #[error("matrix is singular or ill-conditioned: condition estimate {estimate:e}")]
    IllConditioned { estimate: f64 },
    #[error("entry ({i},{j}) is not finite")]
    NonFiniteEntry { i: usize, j: usize },
    #[error("data length {got} does not match {rows}x{cols}")]
    InvalidData { rows: usize, cols: usize, got: usize },
}

/// Certificate that a matrix is symmetric positive definite.
///
/// Carries the extreme-eigenvalue evidence: `min_eigenvalue > 0` and the
/// spectral condition estimate `max_eigenvalue / min_eigenvalue`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpdCertificate {
    pub min_eigenvalue: f64,
    pub condition_estimate: f64,
}

impl SpdCertificate {
    pub fn max_eigenvalue(&self) -> f64 {
        self.min_eigenvalue * self.condition_estimate
    }
}

/// Dense row-major matrix: `data[i * cols + j]` holds entry `(i, j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major data, validating length and finiteness.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, MatrixError> {
        if data.len() != rows * cols {
            return Err(MatrixError::InvalidData {
                rows,
                cols,
                got: data.len(),
            });
        }
        let m = Matrix { rows, cols, data };
        m.check_finite()?;
        Ok(m)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self, MatrixError> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(MatrixError::InvalidData {
                    rows: r,
                    cols: c,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Matrix::new(r, c, data)
    }

    /// Column vector from a slice.
    pub fn col_vector(v: &[f64]) -> Result<Self, MatrixError> {
        Matrix::new(v.len(), 1, v.to_vec())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Rows as nested vectors, for serialisation.
    pub fn to_nested(&self) -> Vec<Vec<f64>> {
        (0..self.rows)
            .map(|i| self.data[i * self.cols..(i + 1) * self.cols].to_vec())
            .collect()
    }

    pub fn check_finite(&self) -> Result<(), MatrixError> {
        for i in 0..self.rows {
            for j in 0..self.cols {
                if !self[(i, j)].is_finite() {
                    return Err(MatrixError::NonFiniteEntry { i, j });
                }
            }
        }
        Ok(())
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix, MatrixError> {
        if self.cols != rhs.rows {
            return Err(self.dim_err("matmul", rhs));
        }
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self.data[i * self.cols + k];
                if aik == 0.0 {
                    continue;
                }
                let row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                let dst = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (d, r) in dst.iter_mut().zip(row) {
                    *d += aik * r;
                }
            }
        }
        Ok(out)
    }

    pub fn add(&self, rhs: &Matrix) -> Result<Matrix, MatrixError> {
        self.zip_with("add", rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Matrix) -> Result<Matrix, MatrixError> {
        self.zip_with("sub", rhs, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    fn zip_with(
        &self,
        op: &'static str,
        rhs: &Matrix,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Matrix, MatrixError> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(self.dim_err(op, rhs));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        })
    }

    fn dim_err(&self, op: &'static str, rhs: &Matrix) -> MatrixError {
        MatrixError::DimensionMismatch {
            op,
            left_rows: self.rows,
            left_cols: self.cols,
            right_rows: rhs.rows,
            right_cols: rhs.cols,
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Euclidean norm; the Frobenius norm specialised to column vectors.
    pub fn two_norm(&self) -> f64 {
        self.frobenius_norm()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Maximum absolute column sum.
    pub fn one_norm(&self) -> f64 {
        let mut best = 0.0f64;
        for j in 0..self.cols {
            let s: f64 = (0..self.rows).map(|i| self[(i, j)].abs()).sum();
            best = best.max(s);
        }
        best
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Maximum asymmetry `|a[i,j] - a[j,i]|` over all pairs, with its location.
    pub fn max_asymmetry(&self) -> (usize, usize, f64) {
        let mut worst = (0, 0, 0.0f64);
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let d = (self[(i, j)] - self[(j, i)]).abs();
                if d > worst.2 {
                    worst = (i, j, d);
                }
            }
        }
        worst
    }

    pub fn is_symmetric_within(&self, tol: f64) -> bool {
        self.is_square() && self.max_asymmetry().2 <= tol
    }

    /// `(A + A^T) / 2`.
    pub fn symmetrized(&self) -> Matrix {
        let mut out = self.clone();
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[i * self.cols + j] = 0.5 * (self[(i, j)] + self[(j, i)]);
            }
        }
        out
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Kronecker product: block `(i, j)` of the result is `a[i,j] * b`.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(a.rows * b.rows, a.cols * b.cols);
    for ia in 0..a.rows {
        for ja in 0..a.cols {
            let scale = a[(ia, ja)];
            for ib in 0..b.rows {
                for jb in 0..b.cols {
                    out[(ia * b.rows + ib, ja * b.cols + jb)] = scale * b[(ib, jb)];
                }
            }
        }
    }
    out
}

/// Column-stacking vectorisation: stacks columns of `m` into one column
/// vector, so that `tr(A X B X^T) = vec(X)^T (B^T ⊗ A) vec(X)` holds.
pub fn vectorize(m: &Matrix) -> Matrix {
    let mut data = Vec::with_capacity(m.rows * m.cols);
    for j in 0..m.cols {
        for i in 0..m.rows {
            data.push(m[(i, j)]);
        }
    }
    Matrix {
        rows: m.rows * m.cols,
        cols: 1,
        data,
    }
}

/// Inverse of [`vectorize`]: reshapes a stacked column back into `rows x cols`.
pub fn unvectorize(v: &Matrix, rows: usize, cols: usize) -> Result<Matrix, MatrixError> {
    if v.cols != 1 || v.rows != rows * cols {
        return Err(MatrixError::InvalidData {
            rows,
            cols,
            got: v.rows * v.cols,
        });
    }
    let mut out = Matrix::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            out[(i, j)] = v[(j * rows + i, 0)];
        }
    }
    Ok(out)
}

struct LuFactors {
    lu: Matrix,
    perm: Vec<usize>,
}

fn lu_factor(a: &Matrix) -> Result<LuFactors, MatrixError> {
    if !a.is_square() {
        return Err(MatrixError::NotSquare {
            rows: a.rows,
            cols: a.cols,
        });
    }
    let n = a.rows;
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let mut p = k;
        let mut best = lu[(k, k)].abs();
        for i in (k + 1)..n {
            let v = lu[(i, k)].abs();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best == 0.0 {
            return Err(MatrixError::IllConditioned {
                estimate: f64::INFINITY,
            });
        }
        if p != k {
            for j in 0..n {
                let tmp = lu[(k, j)];
                lu[(k, j)] = lu[(p, j)];
                lu[(p, j)] = tmp;
            }
            perm.swap(k, p);
        }
        for i in (k + 1)..n {
            let factor = lu[(i, k)] / lu[(k, k)];
            lu[(i, k)] = factor;
            for j in (k + 1)..n {
                let delta = factor * lu[(k, j)];
                lu[(i, j)] -= delta;
            }
        }
    }
    Ok(LuFactors { lu, perm })
}

impl LuFactors {
    fn solve(&self, b: &Matrix) -> Matrix {
        let n = self.lu.rows;
        let mut x = Matrix::zeros(n, b.cols);
        for col in 0..b.cols {
            // forward substitution on the permuted right-hand side
            let mut y = vec![0.0; n];
            for i in 0..n {
                let mut s = b[(self.perm[i], col)];
                for k in 0..i {
                    s -= self.lu[(i, k)] * y[k];
                }
                y[i] = s;
            }
            for i in (0..n).rev() {
                let mut s = y[i];
                for k in (i + 1)..n {
                    s -= self.lu[(i, k)] * x[(k, col)];
                }
                x[(i, col)] = s / self.lu[(i, i)];
            }
        }
        x
    }
}

/// Solves `A X = B` by LU with partial pivoting.
///
/// Refuses matrices whose 1-norm condition estimate reaches
/// [`CONDITION_CEILING`].
pub fn solve(a: &Matrix, b: &Matrix) -> Result<Matrix, MatrixError> {
    if a.rows != b.rows {
        return Err(MatrixError::DimensionMismatch {
            op: "solve",
            left_rows: a.rows,
            left_cols: a.cols,
            right_rows: b.rows,
            right_cols: b.cols,
        });
    }
    let factors = lu_factor(a)?;
    let a_inv = factors.solve(&Matrix::identity(a.rows));
    let estimate = a.one_norm() * a_inv.one_norm();
    if !estimate.is_finite() || estimate >= CONDITION_CEILING {
        return Err(MatrixError::IllConditioned { estimate });
    }
    Ok(factors.solve(b))
}

/// Inverse via LU. Same conditioning gate as [`solve`].
pub fn inverse(a: &Matrix) -> Result<Matrix, MatrixError> {
    solve(a, &Matrix::identity(a.rows))
}

/// 1-norm condition estimate `||A||_1 ||A^-1||_1`; infinite when singular.
pub fn condition_estimate(a: &Matrix) -> Result<f64, MatrixError> {
    let factors = match lu_factor(a) {
        Ok(f) => f,
        Err(MatrixError::IllConditioned { .. }) => return Ok(f64::INFINITY),
        Err(e) => return Err(e),
    };
    let a_inv = factors.solve(&Matrix::identity(a.rows));
    Ok(a.one_norm() * a_inv.one_norm())
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
///
/// Fails with the index of the first leading minor whose pivot is
/// nonpositive.
pub fn cholesky_factor(a: &Matrix) -> Result<Matrix, MatrixError> {
    if !a.is_square() {
        return Err(MatrixError::NotSquare {
            rows: a.rows,
            cols: a.cols,
        });
    }
    let n = a.rows;
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut pivot = a[(j, j)];
        for k in 0..j {
            pivot -= l[(j, k)] * l[(j, k)];
        }
        if pivot <= 0.0 || !pivot.is_finite() {
            return Err(MatrixError::NotPositiveDefinite { minor: j, pivot });
        }
        l[(j, j)] = pivot.sqrt();
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / l[(j, j)];
        }
    }
    Ok(l)
}

fn require_symmetric(m: &Matrix) -> Result<(), MatrixError> {
    if !m.is_square() {
        return Err(MatrixError::NotSquare {
            rows: m.rows,
            cols: m.cols,
        });
    }
    let tol = SYMMETRY_TOL * (1.0 + m.max_abs());
    let (i, j, deviation) = m.max_asymmetry();
    if deviation > tol {
        return Err(MatrixError::NotSymmetric { i, j, deviation });
    }
    Ok(())
}

/// All eigenvalues of a symmetric matrix, ascending, by cyclic Jacobi
/// rotations on the symmetrised copy.
pub fn sym_eigenvalues(m: &Matrix) -> Result<Vec<f64>, MatrixError> {
    require_symmetric(m)?;
    let n = m.rows;
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut a = m.symmetrized();
    let scale = a.frobenius_norm().max(1.0);
    let tol = f64::EPSILON * scale;
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[(i, j)] * a[(i, j)];
            }
        }
        if (2.0 * off).sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= f64::EPSILON * scale * 1e-3 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(p, k)] = a[(k, p)];
                    a[(k, q)] = s * akp + c * akq;
                    a[(q, k)] = a[(k, q)];
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                a[(p, p)] = app - t * apq;
                a[(q, q)] = aqq + t * apq;
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
            }
        }
    }
    let mut eigs: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    eigs.sort_by(|x, y| x.partial_cmp(y).expect("eigenvalues are finite"));
    Ok(eigs)
}

/// Minimum and maximum eigenvalue of a symmetric matrix.
pub fn sym_eigen_extremes(m: &Matrix) -> Result<(f64, f64), MatrixError> {
    let eigs = sym_eigenvalues(m)?;
    Ok((eigs[0], eigs[eigs.len() - 1]))
}

/// Checks symmetric positive definiteness and returns the eigenvalue
/// certificate.
///
/// Acceptance requires the computed minimum eigenvalue to be strictly
/// positive; the eigen solve carries rounding fuzz of order
/// `eps * scale`, far inside the `1e-10 * scale` symmetry band. On
/// rejection the error carries the first nonpositive Cholesky pivot
/// when one exists.
pub fn cholesky_check(m: &Matrix) -> Result<SpdCertificate, MatrixError> {
    require_symmetric(m)?;
    let (min_eig, max_eig) = sym_eigen_extremes(m)?;
    if min_eig <= 0.0 {
        // report the offending leading minor from an actual factorisation
        return Err(match cholesky_factor(&m.symmetrized()) {
            Err(e @ MatrixError::NotPositiveDefinite { .. }) => e,
            _ => MatrixError::NotPositiveDefinite {
                minor: m.rows,
                pivot: min_eig,
            },
        });
    }
    Ok(SpdCertificate {
        min_eigenvalue: min_eig,
        condition_estimate: (max_eig / min_eig).max(1.0),
    })
}

/// Fills a matrix with standard normal draws from `rng`, row-major order.
pub fn random_normal<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    Matrix { rows, cols, data }
}

/// Seeded random symmetric positive definite matrix: `G G^T + ridge * I`
/// with `G` a `dim x dim` standard normal draw.
///
/// Deterministic for a fixed `(dim, seed, ridge)` triple.
pub fn random_spd(dim: usize, seed: u64, ridge: f64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = random_normal(dim, dim, &mut rng);
    let mut out = g.matmul(&g.transpose()).expect("square product");
    for i in 0..dim {
        out[(i, i)] += ridge;
    }
    out
}
