//! Shared fixtures for the property suites.
#![allow(dead_code)] // each test target uses a different subset

use meta_equiv_core::matrix::random_normal;
use meta_equiv_core::{
    build_model, build_risk_spec, random_spd, Matrix, RiskSpec,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn scalar(x: f64) -> Matrix {
    Matrix::from_rows(&[&[x]]).unwrap()
}

/// v1 = 2, v2 = 1, c = 0.5, zero bias, omega = 1: the scalar golden case
/// with optimum 0.75 and minimum risk 0.875.
pub fn canonical_spec() -> RiskSpec {
    let model =
        build_model(scalar(2.0), scalar(1.0), scalar(0.5), &[0.0], &[0.0]).unwrap();
    build_risk_spec(model, scalar(1.0)).unwrap()
}

/// Partitions one `2K x 2K` SPD draw into the joint covariance blocks.
pub fn partitioned_blocks(dim: usize, seed: u64) -> (Matrix, Matrix, Matrix) {
    let two_k = 2 * dim;
    let sigma = random_spd(two_k, seed, 0.05 * two_k as f64);
    let mut v1 = Matrix::zeros(dim, dim);
    let mut v2 = Matrix::zeros(dim, dim);
    let mut c = Matrix::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            v1[(i, j)] = sigma[(i, j)];
            c[(i, j)] = sigma[(i, dim + j)];
            v2[(i, j)] = sigma[(dim + i, dim + j)];
        }
    }
    (v1, v2, c)
}

/// Random instance with nonzero biases and a random SPD risk weighting,
/// exercising the general-bias code paths.
pub fn random_full_instance(dim: usize, seed: u64) -> RiskSpec {
    let (v1, v2, c) = partitioned_blocks(dim, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(7);
    let b1 = random_normal(dim, 1, &mut rng).data().to_vec();
    let b2 = random_normal(dim, 1, &mut rng).data().to_vec();
    let omega = random_spd(dim, seed.wrapping_add(0x5EED), 0.5);
    let model = build_model(v1, v2, c, &b1, &b2).unwrap();
    build_risk_spec(model, omega).unwrap()
}

/// Zero-bias, identity-weighting instance (the harness recipe).
pub fn random_zero_bias_instance(dim: usize, seed: u64) -> RiskSpec {
    meta_equiv_core::random_instance(dim, seed).unwrap()
}

/// Seeded random square matrix.
pub fn random_square(dim: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(11);
    random_normal(dim, dim, &mut rng)
}
