use entropic_time::linalg::{
    hermitian_eig, kron, matrix_exponential_skew, ComplexMatrix, UnitaryPropagator, C64,
};
use entropic_time::random::{complex_normal, random_hermitian, seeded_rng};
use proptest::prelude::*;

/// exp(A) by scaling and squaring a truncated Taylor series.
fn taylor_expm(a: &ComplexMatrix) -> ComplexMatrix {
    let n = a.rows();
    let norm = a.frobenius_norm();
    let mut squarings = 0;
    let mut scale = 1.0;
    while norm * scale > 0.1 {
        scale *= 0.5;
        squarings += 1;
    }
    let a = a.scale(C64::new(scale, 0.0));
    let mut term = ComplexMatrix::identity(n);
    let mut sum = ComplexMatrix::identity(n);
    for k in 1..30 {
        term = term.matmul(&a).scale(C64::new(1.0 / k as f64, 0.0));
        sum = sum.add(&term);
    }
    for _ in 0..squarings {
        sum = sum.matmul(&sum);
    }
    sum
}

fn random_matrix(rows: usize, cols: usize, seed: u64) -> ComplexMatrix {
    let mut rng = seeded_rng(seed);
    ComplexMatrix::from_fn(rows, cols, |_, _| complex_normal(&mut rng))
}

#[test]
fn eigen_reconstruction_random_8x8() {
    let mut rng = seeded_rng(1);
    let m = random_hermitian(8, &mut rng);
    let eig = hermitian_eig(&m).unwrap();
    assert!(eig.reconstruct().max_abs_diff(&m) <= 1e-10 * m.max_abs());
    assert!(eig.vectors.unitarity_deviation() < 1e-12);
    for w in eig.values.windows(2) {
        assert!(w[0] <= w[1]);
    }
    for (k, &l) in eig.values.iter().enumerate() {
        let v = eig.vectors.column(k);
        let mv = m.matvec(&v);
        assert!(mv.max_abs_diff(&v.scale(C64::new(l, 0.0))) < 1e-10);
    }
}

#[test]
fn eigen_handles_degenerate_spectrum() {
    let mut rng = seeded_rng(4);
    let u = matrix_exponential_skew(&random_hermitian(6, &mut rng), 1.0).unwrap();
    let d = ComplexMatrix::real_diagonal(&[1.0, 1.0, 1.0, -2.0, -2.0, 5.0]);
    let m = u.matmul(&d).matmul(&u.adjoint());
    let eig = hermitian_eig(&m).unwrap();
    let expected = [-2.0, -2.0, 1.0, 1.0, 1.0, 5.0];
    for (a, b) in eig.values.iter().zip(expected) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!(eig.reconstruct().max_abs_diff(&m) < 1e-12);
}

#[test]
fn exponential_matches_taylor_oracle() {
    let mut rng = seeded_rng(2);
    let h = random_hermitian(6, &mut rng);
    let t = 0.37;
    let u = matrix_exponential_skew(&h, t).unwrap();
    let oracle = taylor_expm(&h.scale(C64::new(0.0, -t)));
    assert!(u.max_abs_diff(&oracle) < 1e-9, "{}", u.max_abs_diff(&oracle));
    assert!(u.unitarity_deviation() < 1e-9);
}

#[test]
fn propagator_apply_matches_full_unitary() {
    let mut rng = seeded_rng(5);
    let h = random_hermitian(7, &mut rng);
    let prop = UnitaryPropagator::new(&h).unwrap();
    let psi = entropic_time::random::random_unit_vector(7, &mut rng);
    let direct = prop.unitary(1.7).matvec(&psi);
    assert!(prop.apply(&psi, 1.7).max_abs_diff(&direct) < 1e-13);
}

#[test]
fn kron_matches_index_formula() {
    let a = random_matrix(2, 2, 10);
    let b = random_matrix(3, 3, 11);
    let k = kron(&a, &b).unwrap();
    assert_eq!((k.rows(), k.cols()), (6, 6));
    for i in 0..2 {
        for j in 0..2 {
            for p in 0..3 {
                for q in 0..3 {
                    assert_eq!(k[(3 * i + p, 3 * j + q)], a[(i, j)] * b[(p, q)]);
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn eigen_reconstruction_property(seed in any::<u64>(), n in 1usize..12) {
        let mut rng = seeded_rng(seed);
        let m = random_hermitian(n, &mut rng);
        let eig = hermitian_eig(&m).unwrap();
        prop_assert!(eig.reconstruct().max_abs_diff(&m) <= 1e-10 * m.max_abs());
    }

    #[test]
    fn forward_backward_evolution_is_identity(seed in any::<u64>(), n in 1usize..9, t in -10.0f64..10.0) {
        let mut rng = seeded_rng(seed);
        let h = random_hermitian(n, &mut rng);
        let prod = matrix_exponential_skew(&h, t).unwrap()
            .matmul(&matrix_exponential_skew(&h, -t).unwrap());
        prop_assert!(prod.max_abs_diff(&ComplexMatrix::identity(n)) <= 1e-9);
    }

    #[test]
    fn kron_is_associative(seed in any::<u64>(), d1 in 1usize..4, d2 in 1usize..4, d3 in 1usize..4) {
        let a = random_matrix(d1, d2, seed);
        let b = random_matrix(d2, d3, seed.wrapping_add(1));
        let c = random_matrix(d3, d1, seed.wrapping_add(2));
        let left = kron(&kron(&a, &b).unwrap(), &c).unwrap();
        let right = kron(&a, &kron(&b, &c).unwrap()).unwrap();
        // each entry is a product of three factors; association order changes
        // rounding only at the last ulp
        prop_assert!(left.max_abs_diff(&right) <= 4.0 * f64::EPSILON * left.max_abs().max(1.0));
    }
}
