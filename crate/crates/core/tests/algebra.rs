use proptest::prelude::*;

use tsp::algebra::{dft3, idft3, tpinv, tprod, tprod_oracle, ttranspose, TubalMatrix};
use tsp::io::{read_tensor, write_tensor};

fn tensor(rows: usize, cols: usize, depth: usize) -> impl Strategy<Value = TubalMatrix> {
    prop::collection::vec(-3.0f64..3.0, rows * cols * depth)
        .prop_map(move |v| TubalMatrix::from_vec(rows, cols, depth, v).unwrap())
}

fn dims() -> impl Strategy<Value = (usize, usize, usize, usize)> {
    (1usize..5, 1usize..5, 1usize..4, 1usize..6)
}

fn close(a: &TubalMatrix, b: &TubalMatrix, tol: f64) -> bool {
    a.dims() == b.dims() && a.max_abs_diff(b) <= tol * (1.0 + a.fro_norm().max(b.fro_norm()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fourier_product_matches_block_circulant(
        (x, y) in dims().prop_flat_map(|(m, n, p, l)| (tensor(m, n, l), tensor(n, p, l)))
    ) {
        prop_assert!(close(&tprod(&x, &y).unwrap(), &tprod_oracle(&x, &y).unwrap(), 1e-12));
    }

    #[test]
    fn transpose_reverses_products(
        (x, y) in dims().prop_flat_map(|(m, n, p, l)| (tensor(m, n, l), tensor(n, p, l)))
    ) {
        let lhs = ttranspose(&tprod(&x, &y).unwrap());
        let rhs = tprod(&ttranspose(&y), &ttranspose(&x)).unwrap();
        prop_assert!(close(&lhs, &rhs, 1e-12));
        prop_assert_eq!(ttranspose(&ttranspose(&x)), x);
    }

    #[test]
    fn product_is_associative(
        (x, y, z) in dims().prop_flat_map(|(m, n, p, l)| (tensor(m, n, l), tensor(n, p, l), tensor(p, 2, l)))
    ) {
        let lhs = tprod(&tprod(&x, &y).unwrap(), &z).unwrap();
        let rhs = tprod(&x, &tprod(&y, &z).unwrap()).unwrap();
        prop_assert!(close(&lhs, &rhs, 1e-11));
    }

    #[test]
    fn dft_round_trip(x in dims().prop_flat_map(|(m, n, _, l)| tensor(m, n, l))) {
        prop_assert!(close(&idft3(&dft3(&x)).unwrap(), &x, 1e-13));
    }

    #[test]
    fn pseudoinverse_axioms(x in dims().prop_flat_map(|(m, n, _, l)| tensor(m, n, l))) {
        let y = tpinv(&x);
        let xyx = tprod(&tprod(&x, &y).unwrap(), &x).unwrap();
        let yxy = tprod(&tprod(&y, &x).unwrap(), &y).unwrap();
        prop_assert!(close(&xyx, &x, 1e-9));
        prop_assert!(close(&yxy, &y, 1e-9));
        let xy = tprod(&x, &y).unwrap();
        let yx = tprod(&y, &x).unwrap();
        prop_assert!(close(&ttranspose(&xy), &xy, 1e-9));
        prop_assert!(close(&ttranspose(&yx), &yx, 1e-9));
    }

    #[test]
    fn unfold_fold_round_trip(x in dims().prop_flat_map(|(m, n, _, l)| tensor(m, n, l))) {
        let back = TubalMatrix::fold(&x.unfold(), x.depth()).unwrap();
        prop_assert_eq!(back, x);
    }

    #[test]
    fn binary_format_round_trip(x in dims().prop_flat_map(|(m, n, _, l)| tensor(m, n, l))) {
        let mut buf = Vec::new();
        write_tensor(&mut buf, &x).unwrap();
        prop_assert_eq!(read_tensor(buf.as_slice()).unwrap(), x);
    }
}

#[test]
fn identity_is_neutral() {
    let x = TubalMatrix::from_fn(3, 4, 5, |i, j, k| (i + 2 * j) as f64 - k as f64 * 0.5);
    assert!(close(&tprod(&TubalMatrix::identity(3, 5), &x).unwrap(), &x, 1e-14));
    assert!(close(&tprod(&x, &TubalMatrix::identity(4, 5)).unwrap(), &x, 1e-14));
}

#[test]
fn mismatched_inner_dimensions_are_rejected() {
    let x = TubalMatrix::zeros(2, 3, 4);
    let y = TubalMatrix::zeros(2, 3, 4);
    assert!(tprod(&x, &y).is_err());
    assert!(tprod(&x, &TubalMatrix::zeros(3, 1, 5)).is_err());
}
