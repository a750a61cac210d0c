//! Property suites for affine reparameterisation: pointwise risk
//! consistency, the gradient transport law, the involution chart, and
//! preservation of strict convexity under pullback.

mod common;

use common::{canonical_spec, random_full_instance};
use meta_equiv_core::matrix::{kron, random_normal, sym_eigenvalues, vectorize, Matrix};
use meta_equiv_core::reparam::{pullback_risk, transform_gradient, AffineMap};
use meta_equiv_core::risk::{hessian, RiskEvaluator, WeightMatrix};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn weight(m: Matrix) -> WeightMatrix {
    WeightMatrix::new(m).unwrap()
}

#[test]
fn pullback_value_is_consistent_with_base_risk() {
    // R(W) equals the pulled-back risk at T(W) for random instances,
    // maps, and points
    for seed in 0..100u64 {
        let dim = 1 + (seed % 3) as usize;
        let spec = random_full_instance(dim, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x51D);
        let map = AffineMap::random_well_conditioned(dim, &mut rng);
        let pulled = pullback_risk(spec.clone(), map.clone()).unwrap();

        let w = weight(random_normal(dim, dim, &mut rng));
        let base_value = spec.value(&w).unwrap();
        let image = weight(map.apply(w.as_matrix()).unwrap());
        let pulled_value = pulled.value(&image).unwrap();
        assert!(
            (base_value - pulled_value).abs() <= 1e-10 * (1.0 + base_value.abs()),
            "seed {seed}: consistency residual {}",
            (base_value - pulled_value).abs()
        );
    }
}

#[test]
fn gradient_transport_law_holds() {
    // grad R(W) = A^T grad R2(T(W)) B^T, with both gradients also checked
    // against their own finite-difference oracles
    for seed in 0..100u64 {
        let dim = 1 + (seed % 3) as usize;
        let spec = random_full_instance(dim, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9A0);
        let map = AffineMap::random_well_conditioned(dim, &mut rng);
        let pulled = pullback_risk(spec.clone(), map.clone()).unwrap();

        let w = weight(random_normal(dim, dim, &mut rng));
        let image = weight(map.apply(w.as_matrix()).unwrap());

        let base_grad = spec.gradient(&w).unwrap();
        let pulled_grad = pulled.gradient(&image).unwrap();
        let transported = transform_gradient(&map, &pulled_grad).unwrap();
        let rel = base_grad.sub(&transported).unwrap().frobenius_norm()
            / (1.0 + base_grad.frobenius_norm());
        assert!(rel <= 1e-8, "seed {seed}: transport residual {rel}");

        let base_fd = spec.fd_gradient_default(&w).unwrap();
        let base_rel = base_grad.sub(&base_fd).unwrap().frobenius_norm()
            / (1.0 + base_grad.frobenius_norm());
        assert!(base_rel <= 1e-5, "seed {seed}: base fd residual {base_rel}");

        let pulled_fd = pulled.fd_gradient_default(&image).unwrap();
        let pulled_rel = pulled_grad.sub(&pulled_fd).unwrap().frobenius_norm()
            / (1.0 + pulled_grad.frobenius_norm());
        assert!(
            pulled_rel <= 1e-5,
            "seed {seed}: pullback fd residual {pulled_rel}"
        );
    }
}

proptest! {
    #[test]
    fn mirror_chart_is_involutive(seed in 0u64..4000, dim in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = random_normal(dim, dim, &mut rng);
        let t = AffineMap::form_b(dim);
        let round = t.apply(&t.apply(&w).unwrap()).unwrap();
        let drift = round.sub(&w).unwrap().max_abs();
        prop_assert!(drift <= 1e-15 * (1.0 + w.max_abs()));
    }

    #[test]
    fn inverse_composes_to_identity(seed in 0u64..4000, dim in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = AffineMap::random_well_conditioned(dim, &mut rng);
        let round = t.compose(&t.invert().unwrap()).unwrap();
        let w = random_normal(dim, dim, &mut rng);
        let out = round.apply(&w).unwrap();
        let scale = 1.0 + w.max_abs();
        prop_assert!(out.sub(&w).unwrap().max_abs() <= 1e-9 * scale);
    }
}

/// Hessian of an evaluator by central differences of its analytic
/// gradient in column-stacked coordinates.
fn fd_hessian<E: RiskEvaluator>(eval: &E, at: &Matrix, h: f64) -> Matrix {
    let dim = eval.dim();
    let n = dim * dim;
    let mut out = Matrix::zeros(n, n);
    for col in 0..n {
        // unit perturbation in vec coordinates: entry (col % dim, col / dim)
        let (i, j) = (col % dim, col / dim);
        let mut plus = at.clone();
        plus[(i, j)] += h;
        let mut minus = at.clone();
        minus[(i, j)] -= h;
        let gp = eval.gradient(&weight(plus)).unwrap();
        let gm = eval.gradient(&weight(minus)).unwrap();
        let diff = gp.sub(&gm).unwrap().scale(1.0 / (2.0 * h));
        let v = vectorize(&diff);
        for row in 0..n {
            out[(row, col)] = v[(row, 0)];
        }
    }
    out
}

#[test]
fn pullback_preserves_strict_convexity() {
    // the pulled-back Hessian is the base Hessian conjugated by the
    // inverse coordinate map; both the conjugation and a finite-difference
    // Hessian of the pullback gradient must agree and stay positive
    // definite
    for seed in 0..20u64 {
        let dim = 1 + (seed % 2) as usize;
        let spec = random_full_instance(dim, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xE1);
        let map = AffineMap::random_well_conditioned(dim, &mut rng);
        let pulled = pullback_risk(spec.clone(), map.clone()).unwrap();

        let (h_base, _) = hessian(&spec).unwrap();
        let inv = map.invert().unwrap();
        let s_inv = kron(&inv.b().transpose(), inv.a());
        let conjugated = s_inv.transpose().matmul(&h_base).unwrap().matmul(&s_inv).unwrap();

        let at = random_normal(dim, dim, &mut rng);
        let numeric = fd_hessian(&pulled, &at, 1e-4);
        let gap = numeric.sub(&conjugated).unwrap().frobenius_norm()
            / (1.0 + conjugated.frobenius_norm());
        assert!(gap <= 1e-6, "seed {seed}: Hessian routes disagree by {gap}");

        let eigs = sym_eigenvalues(&conjugated.symmetrized()).unwrap();
        assert!(eigs[0] > 0.0, "seed {seed}: pulled-back min eig {}", eigs[0]);
    }
}

#[test]
fn scalar_slice_mirror_through_form_b() {
    // g(w) = f(1 - w) along W = w I for the mirror chart
    let spec = canonical_spec();
    let pulled = pullback_risk(spec.clone(), AffineMap::form_b(1)).unwrap();
    for i in 0..=100 {
        let w = -0.5 + 2.0 * i as f64 / 100.0;
        let f = spec
            .value(&weight(Matrix::from_rows(&[&[1.0 - w]]).unwrap()))
            .unwrap();
        let g = pulled
            .value(&weight(Matrix::from_rows(&[&[w]]).unwrap()))
            .unwrap();
        assert!((f - g).abs() <= 1e-12 * (1.0 + f.abs()));
    }
}
