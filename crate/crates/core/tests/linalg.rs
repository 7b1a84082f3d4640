mod common;

use common::*;
use invpde::linalg::{matmul, min_norm_lstsq, ThinSvd};
use invpde::DenseMatrix;
use proptest::prelude::*;

#[test]
fn jacobi_oracle_reconstructs_its_input() {
    let mut g = rng(11);
    let a = random_matrix(&mut g, 7, 4);
    let (u, s, v) = jacobi_svd(&a);
    let us: Vec<Vec<f64>> = u.iter().map(|r| r.iter().zip(&s).map(|(x, y)| x * y).collect()).collect();
    let back = naive_matmul(&us, &transpose(&v));
    assert!(frob_diff(&a, &back) < 1e-13 * frob(&a));
    let utu = naive_matmul(&transpose(&u), &u);
    for (i, row) in utu.iter().enumerate() {
        for (j, x) in row.iter().enumerate() {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((x - want).abs() < 1e-13);
        }
    }
}

#[test]
fn identity_system_is_solved_exactly() {
    let a = DenseMatrix::identity(2);
    let b = DenseMatrix::column(&[1.0, 2.0]);
    let sol = min_norm_lstsq(&a, &b, 1e-12).unwrap();
    assert_eq!(sol.rank, 2);
    assert!((sol.x[(0, 0)] - 1.0).abs() < 1e-15);
    assert!((sol.x[(1, 0)] - 2.0).abs() < 1e-15);
    assert!(sol.residual_norm < 1e-15);
}

#[test]
fn single_row_gives_minimum_norm_point() {
    let a = DenseMatrix::from_row_major(1, 2, vec![1.0, 1.0]).unwrap();
    let b = DenseMatrix::column(&[2.0]);
    let sol = min_norm_lstsq(&a, &b, 1e-12).unwrap();
    assert!((sol.x[(0, 0)] - 1.0).abs() < 1e-14);
    assert!((sol.x[(1, 0)] - 1.0).abs() < 1e-14);
}

#[test]
fn rank_two_six_by_four_matches_pseudoinverse_oracle() {
    for seed in 0..5 {
        let mut g = rng(100 + seed);
        let a = random_low_rank(&mut g, 6, 4, 2);
        let b: Vec<f64> = (0..6).map(|i| (i as f64 * 0.7).sin()).collect();
        let want = matvec(&pinv(&a, 1e-12), &b);
        let sol = min_norm_lstsq(&to_dense(&a), &DenseMatrix::column(&b), 1e-12).unwrap();
        assert_eq!(sol.rank, 2);
        let got = sol.x.col_to_vec(0);
        let rel = max_abs_diff(&got, &want) / max_abs(&want);
        assert!(rel <= 1e-12, "seed {seed}: rel err {rel:e}");
    }
}

#[test]
fn thin_svd_matches_oracle_singular_values() {
    let mut g = rng(5);
    let a = random_matrix(&mut g, 9, 5);
    let (_, mut s, _) = jacobi_svd(&a);
    s.sort_by(|x, y| y.partial_cmp(x).unwrap());
    let svd = ThinSvd::new(&to_dense(&a)).unwrap();
    let got = svd.singular_values();
    assert!(got.windows(2).all(|w| w[0] >= w[1] && w[1] >= 0.0));
    assert!(max_abs_diff(got, &s) < 1e-13 * s[0]);
}

#[test]
fn project_equals_h_pinv_h_times_b() {
    let mut g = rng(8);
    let h = random_low_rank(&mut g, 10, 4, 3);
    let b = random_matrix(&mut g, 10, 2);
    let want = naive_matmul(&naive_matmul(&h, &pinv(&h, 1e-12)), &b);
    let svd = ThinSvd::new(&to_dense(&h)).unwrap();
    let got = from_dense(&svd.project(&to_dense(&b), 1e-12));
    assert!(frob_diff(&got, &want) <= 1e-10 * frob(&want));
}

#[test]
fn identity_and_dot_products() {
    let mut g = rng(2);
    let m = random_matrix(&mut g, 3, 4);
    assert_eq!(from_dense(&matmul(&DenseMatrix::identity(3), &to_dense(&m)).unwrap()), m);
    let a = DenseMatrix::from_row_major(1, 3, vec![1.0, 2.0, 3.0]).unwrap();
    let b = DenseMatrix::column(&[4.0, 5.0, 6.0]);
    let c = matmul(&a, &b).unwrap();
    assert_eq!(c.shape(), (1, 1));
    assert_eq!(c[(0, 0)], 32.0);
    assert!(matmul(&a, &a).is_err());
}

#[test]
fn matmul_matches_naive_triple_loop() {
    let mut g = rng(3);
    let a = random_matrix(&mut g, 5, 7);
    let b = random_matrix(&mut g, 7, 3);
    let want = naive_matmul(&a, &b);
    let got = from_dense(&matmul(&to_dense(&a), &to_dense(&b)).unwrap());
    assert!(frob_diff(&got, &want) <= 1e-14 * frob(&want));
}

#[test]
fn non_finite_input_is_rejected() {
    let a = DenseMatrix::from_row_major(2, 1, vec![1.0, f64::NAN]).unwrap();
    let b = DenseMatrix::column(&[1.0, 1.0]);
    assert!(min_norm_lstsq(&a, &b, 1e-12).is_err());
    assert!(min_norm_lstsq(&DenseMatrix::identity(2), &DenseMatrix::column(&[1.0, f64::INFINITY]), 1e-12).is_err());
}

fn matrix_strategy(max_r: usize, max_c: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1..=max_r, 1..=max_c).prop_flat_map(|(r, c)| prop::collection::vec(prop::collection::vec(-1.0f64..1.0, c), r))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normal_equations_hold(a in matrix_strategy(8, 6), seed in 0u64..1000) {
        let mut g = rng(seed);
        let b: Vec<f64> = random_matrix(&mut g, a.len(), 1).into_iter().map(|r| r[0]).collect();
        let sol = min_norm_lstsq(&to_dense(&a), &DenseMatrix::column(&b), 1e-12).unwrap();
        let x = sol.x.col_to_vec(0);
        let r: Vec<f64> = matvec(&a, &x).iter().zip(&b).map(|(p, q)| p - q).collect();
        let atr = matvec(&transpose(&a), &r);
        let bn = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        let atr_n = atr.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!(atr_n <= 1e-10 * (frob(&a) * bn + 1.0));
    }

    #[test]
    fn rank_deficient_solution_avoids_null_space(rows in 3usize..9, cols in 3usize..7, seed in 0u64..1000) {
        let mut g = rng(seed);
        let r = 1 + (seed as usize) % (rows.min(cols) - 1);
        let a = random_low_rank(&mut g, rows, cols, r);
        let b: Vec<f64> = random_matrix(&mut g, rows, 1).into_iter().map(|v| v[0]).collect();
        let sol = min_norm_lstsq(&to_dense(&a), &DenseMatrix::column(&b), 1e-10).unwrap();
        let x = sol.x.col_to_vec(0);
        let papx = matvec(&naive_matmul(&pinv(&a, 1e-10), &a), &x);
        let null_part: Vec<f64> = x.iter().zip(&papx).map(|(p, q)| p - q).collect();
        let xn = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let nn = null_part.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!(nn <= 1e-10 * xn.max(1e-300));
    }

    #[test]
    fn matmul_is_bilinear(seed in 0u64..1000, n in 1usize..6, k in 1usize..6, m in 1usize..6) {
        let mut g = rng(seed);
        let a = random_matrix(&mut g, n, k);
        let b = random_matrix(&mut g, k, m);
        let c = random_matrix(&mut g, k, m);
        let bc: Vec<Vec<f64>> = b.iter().zip(&c).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p + q).collect()).collect();
        let lhs = from_dense(&matmul(&to_dense(&a), &to_dense(&bc)).unwrap());
        let ab = from_dense(&matmul(&to_dense(&a), &to_dense(&b)).unwrap());
        let ac = from_dense(&matmul(&to_dense(&a), &to_dense(&c)).unwrap());
        let rhs: Vec<Vec<f64>> = ab.iter().zip(&ac).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p + q).collect()).collect();
        prop_assert!(frob_diff(&lhs, &rhs) <= 1e-14 * (frob(&lhs) + 1.0));
    }
}
