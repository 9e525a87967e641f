mod common;

use common::*;
use num_complex::Complex64;
use proptest::prelude::*;
use ris_capnet::channel::seeded_rng;
use ris_capnet::numerics::*;
use ris_capnet::Error;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn max_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    a.sub(b).unwrap().max_abs()
}

#[test]
fn matmul_matches_triple_loop() {
    let mut rng = seeded_rng(1);
    for _ in 0..20 {
        let a = random_complex(3, 4, &mut rng);
        let b = random_complex(4, 2, &mut rng);
        let got = matmul(&a, &b).unwrap();
        assert_eq!(got.shape(), (3, 2));
        assert!(max_diff(&got, &triple_loop_matmul(&a, &b)) <= 1e-12);
    }
}

#[test]
fn matmul_identity_and_permutation() {
    let x = ComplexMatrix::from_vec(2, 2, vec![c(1.0, 2.0), c(-3.0, 0.5), c(0.0, -1.0), c(4.0, 4.0)]).unwrap();
    assert_eq!(matmul(&ComplexMatrix::identity(2), &x).unwrap(), x);
    let p = ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
    let v = ComplexMatrix::column_vector(vec![c(5.0, 1.0), c(-2.0, 3.0)]);
    assert_eq!(matmul(&p, &v).unwrap(), ComplexMatrix::column_vector(vec![c(-2.0, 3.0), c(5.0, 1.0)]));
}

#[test]
fn matmul_shape_error_names_both_shapes() {
    let err = matmul(&ComplexMatrix::zeros(2, 3), &ComplexMatrix::zeros(2, 3)).unwrap_err();
    match &err {
        Error::Shape { left, right, .. } => assert_eq!((*left, *right), ((2, 3), (2, 3))),
        other => panic!("unexpected error {other:?}"),
    }
    let msg = err.to_string();
    assert!(msg.contains("2x3") || msg.contains("(2, 3)"), "{msg}");
}

#[test]
fn adjoint_examples() {
    let j = ComplexMatrix::from_vec(1, 1, vec![c(0.0, 1.0)]).unwrap();
    assert_eq!(adjoint(&j)[(0, 0)], c(0.0, -1.0));
    let sym = ComplexMatrix::from_real(2, 2, &[1.0, 2.0, 2.0, 5.0]).unwrap();
    assert_eq!(adjoint(&sym), sym);
    let a = random_complex(2, 3, &mut seeded_rng(2));
    let h = adjoint(&a);
    assert_eq!(h.shape(), (3, 2));
    for i in 0..3 {
        for k in 0..2 {
            assert_eq!(h[(i, k)], a[(k, i)].conj());
        }
    }
    assert_eq!(adjoint(&h), a);
}

#[test]
fn kron_examples() {
    let x = random_complex(2, 3, &mut seeded_rng(3));
    assert_eq!(kron(&ComplexMatrix::identity(1), &x), x);
    let a = ComplexMatrix::row_vector(vec![c(1.0, 0.0), c(-1.0, 0.0)]);
    let b = ComplexMatrix::row_vector(vec![c(1.0, 0.0), c(1.0, 0.0)]);
    let want: Vec<Complex64> = [1.0, 1.0, -1.0, -1.0].iter().map(|&v| c(v, 0.0)).collect();
    assert_eq!(kron(&a, &b).as_slice(), &want[..]);
    let mut rng = seeded_rng(4);
    let a = random_complex(2, 1, &mut rng);
    let b = random_complex(3, 1, &mut rng);
    let k = kron(&a, &b);
    assert_eq!(k.shape(), (6, 1));
    for i in 0..2 {
        for j in 0..3 {
            assert_eq!(k[(i * 3 + j, 0)], a[(i, 0)] * b[(j, 0)]);
        }
    }
}

#[test]
fn kron_mixed_product() {
    let mut rng = seeded_rng(5);
    for _ in 0..10 {
        let a = random_complex(2, 3, &mut rng);
        let b = random_complex(3, 2, &mut rng);
        let cc = random_complex(3, 2, &mut rng);
        let d = random_complex(2, 4, &mut rng);
        let lhs = matmul(&kron(&a, &b), &kron(&cc, &d)).unwrap();
        let rhs = kron(&matmul(&a, &cc).unwrap(), &matmul(&b, &d).unwrap());
        assert!(max_diff(&lhs, &rhs) <= 1e-10);
    }
}

#[test]
fn matmul_is_associative() {
    let mut rng = seeded_rng(6);
    for _ in 0..10 {
        let a = random_complex(3, 4, &mut rng);
        let b = random_complex(4, 5, &mut rng);
        let d = random_complex(5, 2, &mut rng);
        let left = matmul(&matmul(&a, &b).unwrap(), &d).unwrap();
        let right = matmul(&a, &matmul(&b, &d).unwrap()).unwrap();
        assert!(max_diff(&left, &right) <= 1e-9);
    }
}

#[test]
fn logdet_examples() {
    for n in 1..6 {
        assert_eq!(logdet_hermitian_psd(&ComplexMatrix::identity(n)).unwrap(), 0.0);
    }
    let d = ComplexMatrix::diagonal(&[c(2.0, 0.0), c(4.0, 0.0)]);
    assert!((logdet_hermitian_psd(&d).unwrap() - 3.0).abs() < 1e-14);
}

#[test]
fn logdet_matches_jacobi_oracle() {
    let mut rng = seeded_rng(7);
    for _ in 0..20 {
        let b = random_complex(6, 6, &mut rng);
        let a = ComplexMatrix::identity(6).add(&matmul(&adjoint(&b), &b).unwrap()).unwrap();
        let want: f64 = hermitian_eigenvalues(&a).iter().map(|l| l.log2()).sum();
        let got = logdet_hermitian_psd(&a).unwrap();
        assert!((got - want).abs() <= 1e-9 * want.abs(), "{got} vs {want}");
    }
}

#[test]
fn logdet_is_invariant_under_unitary_rotation() {
    let mut rng = seeded_rng(8);
    for _ in 0..20 {
        let a = random_complex(2, 3, &mut rng);
        let t: f64 = rand::Rng::random_range(&mut rng, 0.0..std::f64::consts::TAU);
        let phi: f64 = rand::Rng::random_range(&mut rng, 0.0..std::f64::consts::TAU);
        let g = ComplexMatrix::from_vec(
            2,
            2,
            vec![
                c(t.cos(), 0.0),
                -Complex64::from_polar(t.sin(), phi),
                Complex64::from_polar(t.sin(), -phi),
                c(t.cos(), 0.0),
            ],
        )
        .unwrap();
        let f = |m: &ComplexMatrix| {
            let gram = matmul(&adjoint(m), m).unwrap();
            logdet_hermitian_psd(&gram.add(&ComplexMatrix::identity(3)).unwrap()).unwrap()
        };
        let base = f(&a);
        let rotated = f(&matmul(&g, &a).unwrap());
        assert!((base - rotated).abs() <= 1e-9 * base.abs());
    }
}

#[test]
fn logdet_rejects_bad_arguments() {
    assert!(matches!(
        logdet_hermitian_psd(&ComplexMatrix::zeros(2, 3)),
        Err(Error::Shape { .. })
    ));
    let skew = ComplexMatrix::from_real(2, 2, &[1.0, 0.5, -0.5, 1.0]).unwrap();
    assert!(matches!(logdet_hermitian_psd(&skew), Err(Error::NotHermitian { .. })));
    let indefinite = ComplexMatrix::diagonal(&[c(1.0, 0.0), c(-1.0, 0.0)]);
    assert!(matches!(
        logdet_hermitian_psd(&indefinite),
        Err(Error::NotPositiveDefinite { .. })
    ));
}

#[test]
fn operations_keep_entries_finite() {
    let mut rng = seeded_rng(9);
    let a = random_complex(4, 4, &mut rng);
    let b = random_complex(4, 4, &mut rng);
    for m in [matmul(&a, &b).unwrap(), adjoint(&a), kron(&a, &b)] {
        assert!(m.is_finite());
    }
}

fn complex_matrix(rows: usize, cols: usize) -> impl Strategy<Value = ComplexMatrix> {
    proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), rows * cols).prop_map(move |v| {
        ComplexMatrix::from_vec(rows, cols, v.into_iter().map(|(a, b)| c(a, b)).collect()).unwrap()
    })
}

proptest! {
    #[test]
    fn adjoint_is_an_involution(a in complex_matrix(3, 2)) {
        prop_assert_eq!(adjoint(&adjoint(&a)), a);
    }

    #[test]
    fn gram_plus_identity_has_nonnegative_logdet(a in complex_matrix(4, 3)) {
        let m = matmul(&adjoint(&a), &a).unwrap().add(&ComplexMatrix::identity(3)).unwrap();
        let v = logdet_hermitian_psd(&m).unwrap();
        prop_assert!(v >= -1e-12 && v.is_finite());
    }

    #[test]
    fn kron_shape_and_entries(a in complex_matrix(2, 2), b in complex_matrix(1, 3)) {
        let k = kron(&a, &b);
        prop_assert_eq!(k.shape(), (2, 6));
        for i in 0..2 {
            for j in 0..2 {
                for q in 0..3 {
                    prop_assert_eq!(k[(i, j * 3 + q)], a[(i, j)] * b[(0, q)]);
                }
            }
        }
    }
}

#[test]
fn stacked_qr_logdet_matches_eigen_oracle() {
    let mut rng = seeded_rng(41);
    for (rows, cols) in [(1, 1), (2, 2), (6, 2), (3, 5)] {
        for rho in [0.0, 0.3, 1e3, 1e8] {
            let h = random_complex(rows, cols, &mut rng);
            let got = log2_det_identity_plus_gram(&h, rho).unwrap();
            // Wide matrices: det(I + ρ hᴴ h) = det(I + ρ h hᴴ), whose Gram has no null space.
            let want = if rows < cols { eigen_rate(&adjoint(&h), rho) } else { eigen_rate(&h, rho) };
            assert!(close(got, want, 1e-10, 1e-12), "{rows}x{cols} rho {rho}: {got} vs {want}");
        }
    }
}

#[test]
fn stacked_qr_logdet_is_accurate_for_rank_one_channels() {
    // h = u wᴴ gives det(I + ρ hᴴ h) = 1 + ρ |u|² |w|² exactly.
    let u = [c(1.0, 0.5), c(-0.3, 0.2), c(0.7, -1.1)];
    let w = [c(0.4, -0.9), c(1.2, 0.1)];
    let h = ComplexMatrix::from_fn(3, 2, |i, k| u[i] * w[k].conj());
    let rho = 1e12;
    let nu: f64 = u.iter().map(|z| z.norm_sqr()).sum();
    let nw: f64 = w.iter().map(|z| z.norm_sqr()).sum();
    let want = (1.0 + rho * nu * nw).log2();
    let got = log2_det_identity_plus_gram(&h, rho).unwrap();
    assert!((got - want).abs() <= 1e-12 * want, "{got} vs {want}");
}

#[test]
fn stacked_qr_logdet_rejects_invalid_snr() {
    let h = ComplexMatrix::identity(2);
    assert!(log2_det_identity_plus_gram(&h, -1.0).is_err());
    assert!(log2_det_identity_plus_gram(&h, f64::NAN).is_err());
}
