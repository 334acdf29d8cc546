use hamspec::matrix::{det, herm_eigen, rank, CMat, C64};
use hamspec::model::{Blocks, SystemCoefficients, TailTag};
use hamspec::solution::FundamentalMatrix;
use proptest::prelude::*;

fn cmat(n: usize, m: usize) -> impl Strategy<Value = CMat> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n * m)
        .prop_map(move |v| CMat::from_vec(n, m, v.into_iter().map(|(re, im)| C64::new(re, im)).collect()))
}

fn square() -> impl Strategy<Value = CMat> {
    (1usize..6).prop_flat_map(|n| cmat(n, n))
}

fn herm(a: &CMat) -> CMat {
    (a + &a.adjoint()).scale_real(0.5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn determinant_is_multiplicative((a, b) in (1usize..6).prop_flat_map(|n| (cmat(n, n), cmat(n, n)))) {
        let lhs = det(&a.matmul(&b)).unwrap();
        let rhs = det(&a).unwrap() * det(&b).unwrap();
        prop_assert!((lhs - rhs).norm() <= 1e-10 * (1.0 + rhs.norm()));
    }

    #[test]
    fn rank_is_invariant_under_row_permutation(
        (a, perm) in (1usize..6, 1usize..6).prop_flat_map(|(r, c)| {
            (cmat(r, c), Just((0..r).collect::<Vec<_>>()).prop_shuffle())
        }),
        k in 0usize..3,
    ) {
        // Make the matrix rank deficient by repeating the first row k times.
        let mut rows: Vec<Vec<C64>> = (0..a.rows()).map(|i| a.row(i).to_vec()).collect();
        for _ in 0..k {
            rows.push(rows[0].clone());
        }
        let a = CMat::from_rows(&rows).unwrap();
        let mut order = perm.clone();
        order.extend(perm.len()..a.rows());
        let permuted = CMat::from_rows(&order.iter().map(|&i| a.row(i).to_vec()).collect::<Vec<_>>()).unwrap();
        prop_assert_eq!(rank(&a, 1e-10), rank(&permuted, 1e-10));
        prop_assert!(rank(&a, 1e-10) <= a.rows().min(a.cols()));
    }

    #[test]
    fn hermitian_eigendecomposition_reconstructs(a in square()) {
        let h = herm(&a);
        let eig = herm_eigen(&h, 1e-12).unwrap();
        prop_assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
        let v = &eig.vectors;
        let d = CMat::diag(&eig.values.iter().map(|&x| C64::new(x, 0.0)).collect::<Vec<_>>());
        let rebuilt = v.matmul(&d).matmul(&v.adjoint());
        prop_assert!((&rebuilt - &h).fro_norm() <= 1e-10 * (1.0 + h.fro_norm()));
        let gram = v.adjoint().matmul(v);
        prop_assert!((&gram - &CMat::identity(h.rows())).fro_norm() <= 1e-10);
    }

    #[test]
    fn fundamental_matrix_is_symplectic(
        blocks in (1usize..3).prop_flat_map(|n| prop::collection::vec(
            (cmat(n, n), cmat(n, n), cmat(n, n), cmat(n, n), cmat(n, n)), 8)),
        lambda in (-2.0f64..2.0, -1.0f64..1.0),
    ) {
        let n = blocks[0].0.rows();
        let s = 0.1;
        let rows: Vec<Blocks> = blocks
            .into_iter()
            .map(|(a, b, c, x1, x2)| Blocks {
                a: a.scale_real(s),
                b: herm(&b).scale_real(s),
                c: herm(&c).scale_real(s),
                w1: x1.matmul(&x1.adjoint()).scale_real(s),
                w2: x2.matmul(&x2.adjoint()).scale_real(s),
            })
            .collect();
        let last = rows.len() as i64 - 1;
        let sys = SystemCoefficients::new(n, 0, TailTag::Constant, "random", move |t| {
            rows[t.clamp(0, last) as usize].clone()
        });
        let z = C64::new(lambda.0, lambda.1);
        let mut phi = FundamentalMatrix::new(&sys, z);
        let mut phi_bar = FundamentalMatrix::new(&sys, z.conj());
        let j = CMat::j(n);
        for t in [0, 3, 8, 12] {
            let p = phi.at(t).unwrap();
            let q = phi_bar.at(t).unwrap();
            let defect = (&q.adjoint().matmul(&j).matmul(&p) - &j).fro_norm();
            prop_assert!(defect <= 1e-9 * (1.0 + p.fro_norm() * q.fro_norm()), "t = {t}: defect {defect}");
        }
    }
}
