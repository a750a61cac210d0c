//! Property suites for model assembly: the quadratic-form decomposition of
//! M, the submatrix consequences of joint positive definiteness, and the
//! rank structure of the bias term.

mod common;

use common::{partitioned_blocks, random_full_instance};
use meta_equiv_core::matrix::{cholesky_check, random_normal, sym_eigenvalues, Matrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn quad_form(m: &Matrix, z: &Matrix) -> f64 {
    z.transpose().matmul(m).unwrap().matmul(z).unwrap()[(0, 0)]
}

#[test]
fn m_quadratic_form_decomposes_through_sigma() {
    // z^T M z = [z; -z]^T Sigma [z; -z] + z^T Lambda z, strictly positive
    for seed in 0..100u64 {
        let dim = 1 + (seed % 4) as usize;
        let spec = random_full_instance(dim, seed);
        let sigma = spec.model().sigma();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
        for _ in 0..200 {
            let z = random_normal(dim, 1, &mut rng);
            if z.two_norm() == 0.0 {
                continue;
            }
            let mut stacked = vec![0.0; 2 * dim];
            for i in 0..dim {
                stacked[i] = z[(i, 0)];
                stacked[dim + i] = -z[(i, 0)];
            }
            let v = Matrix::col_vector(&stacked).unwrap();

            let lhs = quad_form(spec.m_matrix(), &z);
            let rhs = quad_form(&sigma, &v) + quad_form(spec.lambda(), &z);
            assert!(lhs > 0.0, "seed {seed}: z^T M z = {lhs} not positive");
            assert!(
                (lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()),
                "seed {seed}: decomposition residual {}",
                (lhs - rhs).abs()
            );
        }
    }
}

#[test]
fn joint_positive_definiteness_implies_block_positive_definiteness() {
    for seed in 0..50u64 {
        let dim = 1 + (seed % 5) as usize;
        let (v1, v2, _) = partitioned_blocks(dim, seed);
        cholesky_check(&v1).unwrap();
        cholesky_check(&v2).unwrap();
    }
}

#[test]
fn lambda_is_rank_at_most_one() {
    for seed in 0..50u64 {
        let dim = 1 + (seed % 4) as usize;
        let spec = random_full_instance(dim, seed);
        let lambda = spec.lambda();
        let delta = spec.delta_b();

        // spectrum: at most one eigenvalue away from zero, equal to |delta|^2
        let eigs = sym_eigenvalues(lambda).unwrap();
        let norm2 = delta.two_norm().powi(2);
        let scale = 1.0 + lambda.max_abs();
        for &e in &eigs[..eigs.len() - 1] {
            assert!(e.abs() <= 1e-10 * scale, "seed {seed}: eig {e}");
        }
        assert!((eigs[eigs.len() - 1] - norm2).abs() <= 1e-10 * (1.0 + norm2));

        // quadratic form collapses to the squared projection
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xBEEF);
        for _ in 0..20 {
            let z = random_normal(dim, 1, &mut rng);
            let lhs = quad_form(lambda, &z);
            let proj = delta.transpose().matmul(&z).unwrap()[(0, 0)];
            let rhs = proj * proj;
            assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }
    }
}
