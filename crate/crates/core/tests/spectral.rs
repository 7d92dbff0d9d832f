use chainset::spectral::{controllability_subspace, decay_bound, lyapunov_split, matrix_exp};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

fn mat(n: usize, v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(n, n, v)
}

fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

// Symmetric matrices have an independent exponential through their
// eigendecomposition.
fn sym_exp(a: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    let e = SymmetricEigen::new(a.clone());
    let d = DMatrix::from_diagonal(&e.eigenvalues.map(|l| (l * t).exp()));
    &e.eigenvectors * d * e.eigenvectors.transpose()
}

#[test]
fn exp_of_jordan_block_is_polynomial() {
    let a = mat(3, &[0.5, 1.0, 0.0, 0.0, 0.5, 1.0, 0.0, 0.0, 0.5]);
    let t = 2.0f64;
    let s = (0.5 * t).exp();
    let want = mat(3, &[s, t * s, t * t / 2.0 * s, 0.0, s, t * s, 0.0, 0.0, s]);
    assert!(rel_err(&matrix_exp(&a, t).unwrap(), &want) < 1e-13);
}

#[test]
fn controllability_of_chain_of_integrators() {
    let a = mat(3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
    let b_last = DMatrix::from_column_slice(3, 1, &[0.0, 0.0, 1.0]);
    let b_first = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
    assert_eq!(controllability_subspace(&a, &b_last).unwrap().ncols(), 3);
    assert_eq!(controllability_subspace(&a, &b_first).unwrap().ncols(), 1);
}

fn entries(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, n * n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exp_matches_symmetric_oracle(v in entries(3), t in -1.5f64..1.5) {
        let m = mat(3, &v);
        let a = (&m + m.transpose()) * 0.5;
        prop_assert!(rel_err(&matrix_exp(&a, t).unwrap(), &sym_exp(&a, t)) < 1e-12);
    }

    #[test]
    fn exp_semigroup(v in entries(3), s in -1.0f64..1.0, t in -1.0f64..1.0) {
        let a = mat(3, &v);
        let lhs = matrix_exp(&a, s + t).unwrap();
        let rhs = matrix_exp(&a, s).unwrap() * matrix_exp(&a, t).unwrap();
        prop_assert!(rel_err(&rhs, &lhs) < 1e-11);
    }

    #[test]
    fn split_invariants(v in entries(4)) {
        let a = mat(4, &v);
        let split = lyapunov_split(&a, None).unwrap();
        // keep spectra whose groups are well separated from the threshold
        prop_assume!(split.eigenvalues.iter().all(|e| e.0.abs() > 0.05));
        let n = 4;
        prop_assert_eq!(split.dim_plus() + split.dim_zero() + split.dim_minus(), n);
        let id = DMatrix::<f64>::identity(n, n);
        let sum = &split.proj_plus + &split.proj_zero + &split.proj_minus;
        let scale = split.proj_plus.norm().max(split.proj_minus.norm()).max(1.0);
        prop_assert!((sum - &id).amax() < 1e-10 * scale);
        for p in [&split.proj_plus, &split.proj_minus, &split.proj_h] {
            prop_assert!((p * p - p).amax() < 1e-10 * scale * scale);
        }
        for (basis, proj) in [(&split.basis_plus, &split.proj_plus), (&split.basis_minus, &split.proj_minus)] {
            if basis.ncols() > 0 {
                let img = &a * basis;
                let resid = (&img - proj * &img).norm();
                prop_assert!(resid <= 1e-8 * a.norm() * scale);
                let gram = basis.transpose() * basis;
                prop_assert!((gram - DMatrix::<f64>::identity(basis.ncols(), basis.ncols())).amax() < 1e-12);
            }
        }
        // the number of eigenvalues (with multiplicity) on each side matches the dims
        let pos = split.eigenvalues.iter().filter(|e| e.0 > 0.0).count();
        prop_assert_eq!(pos, split.dim_plus());
    }

    #[test]
    fn controllability_is_invariant_and_contains_b(v in entries(3), b in prop::collection::vec(-1.0f64..1.0, 3)) {
        let a = mat(3, &v);
        let bm = DMatrix::from_column_slice(3, 1, &b);
        prop_assume!(bm.norm() > 1e-3);
        let c = controllability_subspace(&a, &bm).unwrap();
        let proj = &c * c.transpose();
        prop_assert!((&bm - &proj * &bm).norm() < 1e-9);
        let ac = &a * &c;
        prop_assert!((&ac - &proj * &ac).norm() < 1e-8 * (1.0 + a.norm()));
    }

    #[test]
    fn decay_bound_holds(v in entries(3), t in 0.0f64..8.0) {
        let a = mat(3, &v) - DMatrix::<f64>::identity(3, 3) * 5.0;
        if let Some(d) = decay_bound(&a).unwrap() {
            let e = matrix_exp(&a, t).unwrap();
            prop_assert!(e.norm() <= d.at(t) * (1.0 + 1e-9));
        }
    }
}
