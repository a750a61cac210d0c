//! Property suites for the matrix kernel.

mod common;

use meta_equiv_core::matrix::{
    cholesky_check, kron, random_normal, random_spd, solve, sym_eigenvalues, vectorize,
    unvectorize, Matrix,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Determinant by cofactor expansion: an implementation-independent oracle
/// for small matrices.
fn det_cofactor(m: &Matrix) -> f64 {
    let n = m.rows();
    if n == 1 {
        return m[(0, 0)];
    }
    let mut det = 0.0;
    for j in 0..n {
        let mut minor = Matrix::zeros(n - 1, n - 1);
        for i in 1..n {
            let mut col = 0;
            for jj in 0..n {
                if jj == j {
                    continue;
                }
                minor[(i - 1, col)] = m[(i, jj)];
                col += 1;
            }
        }
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        det += sign * m[(0, j)] * det_cofactor(&minor);
    }
    det
}

/// Sylvester's criterion: positive definite iff every leading principal
/// minor has positive determinant.
fn positive_definite_by_minors(m: &Matrix) -> bool {
    let n = m.rows();
    for k in 1..=n {
        let mut lead = Matrix::zeros(k, k);
        for i in 0..k {
            for j in 0..k {
                lead[(i, j)] = m[(i, j)];
            }
        }
        if det_cofactor(&lead) <= 0.0 {
            return false;
        }
    }
    true
}

#[test]
fn kron_vec_trace_identity() {
    // tr(A X B X^T) = vec(X)^T (B^T ⊗ A) vec(X) for SPD A, symmetric B
    let mut failures = 0;
    for trial in 0..100u64 {
        let p = 1 + (trial % 3) as usize;
        let q = 1 + ((trial / 3) % 3) as usize;
        let a = random_spd(p, 1000 + trial, 0.2);
        let mut rng = ChaCha8Rng::seed_from_u64(2000 + trial);
        let b = random_normal(q, q, &mut rng).symmetrized();
        let x = random_normal(p, q, &mut rng);

        let lhs = a
            .matmul(&x)
            .unwrap()
            .matmul(&b)
            .unwrap()
            .matmul(&x.transpose())
            .unwrap()
            .trace();
        let v = vectorize(&x);
        let big = kron(&b.transpose(), &a);
        let rhs = v.transpose().matmul(&big).unwrap().matmul(&v).unwrap()[(0, 0)];
        if (lhs - rhs).abs() > 1e-10 * (1.0 + lhs.abs()) {
            failures += 1;
        }
    }
    assert_eq!(failures, 0);
}

#[test]
fn cholesky_check_agrees_with_sylvester_criterion() {
    // brute force over dims 1..=5 on a mix of definite and indefinite draws
    let mut accepted = 0;
    let mut rejected = 0;
    for dim in 1..=5usize {
        for trial in 0..40u64 {
            let seed = dim as u64 * 100 + trial;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = random_normal(dim, dim, &mut rng);
            let shift = -2.0 + 4.0 * (trial as f64 / 39.0);
            let mut s = g.symmetrized();
            for i in 0..dim {
                s[(i, i)] += shift;
            }
            // skip draws too close to the definiteness boundary for the
            // oracle comparison to be meaningful
            let eigs = sym_eigenvalues(&s).unwrap();
            if eigs[0].abs() <= 1e-8 * (1.0 + s.max_abs()) {
                continue;
            }
            let ours = cholesky_check(&s).is_ok();
            let oracle = positive_definite_by_minors(&s);
            assert_eq!(ours, oracle, "dim {dim} trial {trial} disagrees");
            if ours {
                accepted += 1;
                let cert = cholesky_check(&s).unwrap();
                assert!((cert.min_eigenvalue - eigs[0]).abs() <= 1e-10 * (1.0 + s.max_abs()));
                assert!(cert.condition_estimate >= 1.0);
            } else {
                rejected += 1;
            }
        }
    }
    assert!(accepted > 20, "want definite draws, got {accepted}");
    assert!(rejected > 20, "want indefinite draws, got {rejected}");
}

#[test]
fn solve_round_trip_well_conditioned() {
    for trial in 0..100u64 {
        let dim = 1 + (trial % 6) as usize;
        let a = random_spd(dim, 3000 + trial, 0.1);
        let cert = cholesky_check(&a).unwrap();
        if cert.condition_estimate >= 1e8 {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(4000 + trial);
        let b = random_normal(dim, 1, &mut rng);
        let x = solve(&a, &b).unwrap();
        let residual = a.matmul(&x).unwrap().sub(&b).unwrap().two_norm();
        assert!(
            residual <= 1e-9 * b.two_norm().max(1.0),
            "trial {trial}: residual {residual}"
        );
    }
}

#[test]
fn random_spd_identical_inputs_identical_outputs() {
    for (dim, seed, ridge) in [(1usize, 0u64, 0.1), (3, 42, 0.1), (5, 7, 0.3), (8, 99, 0.8)] {
        let a = random_spd(dim, seed, ridge);
        let b = random_spd(dim, seed, ridge);
        assert_eq!(a.data(), b.data(), "dim {dim} seed {seed}");
        cholesky_check(&a).unwrap();
    }
}

proptest! {
    #[test]
    fn transpose_is_an_involution(seed in 0u64..5000, rows in 1usize..6, cols in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_normal(rows, cols, &mut rng);
        prop_assert_eq!(m.transpose().transpose(), m);
    }

    #[test]
    fn matmul_transpose_reverses(seed in 0u64..5000, p in 1usize..5, q in 1usize..5, r in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_normal(p, q, &mut rng);
        let b = random_normal(q, r, &mut rng);
        let lhs = a.matmul(&b).unwrap().transpose();
        let rhs = b.transpose().matmul(&a.transpose()).unwrap();
        let gap = lhs.sub(&rhs).unwrap().max_abs();
        prop_assert!(gap <= 1e-12 * (1.0 + lhs.max_abs()));
    }

    #[test]
    fn kron_has_blockwise_structure(seed in 0u64..5000, p in 1usize..4, q in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_normal(p, p, &mut rng);
        let b = random_normal(q, q, &mut rng);
        let k = kron(&a, &b);
        prop_assert_eq!(k.rows(), p * q);
        for ia in 0..p {
            for ja in 0..p {
                for ib in 0..q {
                    for jb in 0..q {
                        let expect = a[(ia, ja)] * b[(ib, jb)];
                        prop_assert_eq!(k[(ia * q + ib, ja * q + jb)], expect);
                    }
                }
            }
        }
    }

    #[test]
    fn vectorize_unvectorize_round_trip(seed in 0u64..5000, rows in 1usize..6, cols in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_normal(rows, cols, &mut rng);
        let v = vectorize(&m);
        prop_assert_eq!(v.rows(), rows * cols);
        prop_assert_eq!(unvectorize(&v, rows, cols).unwrap(), m);
    }
}
