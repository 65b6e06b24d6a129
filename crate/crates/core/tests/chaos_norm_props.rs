use nalgebra::DMatrix;
use proptest::prelude::*;

use ulil::chaos_norm::{box_ball_linear_max, chaos_norm, chaos_norm_oracle, ChaosMatrix};
use ulil::linalg::DenseMatrix;

const RESTARTS: usize = 16;

fn matrix_strategy(max_k: usize, max_l: usize) -> impl Strategy<Value = ChaosMatrix> {
    (1..=max_k, 1..=max_l).prop_flat_map(|(k, l)| {
        prop::collection::vec(-3.0f64..3.0, k * l)
            .prop_map(move |v| ChaosMatrix::new(DenseMatrix::from_fn(k, l, |i, j| v[i * l + j])).unwrap())
    })
}

fn norm(a: &ChaosMatrix, t: f64) -> f64 {
    chaos_norm(a, t, RESTARTS).unwrap().value
}

fn sigma_max(a: &ChaosMatrix) -> f64 {
    let m = a.matrix();
    let d = DMatrix::from_fn(m.rows(), m.cols(), |i, j| m.get(i, j));
    d.singular_values().max()
}

/// `max b^T A c` over sign vectors, the value of the norm once `t >= max(k, l)`.
fn vertex_max(a: &ChaosMatrix) -> f64 {
    let (k, l) = (a.rows(), a.cols());
    let mut best = f64::NEG_INFINITY;
    for bm in 0..1u32 << k {
        let b: Vec<f64> = (0..k).map(|i| if bm >> i & 1 == 1 { 1.0 } else { -1.0 }).collect();
        for cm in 0..1u32 << l {
            let c: Vec<f64> = (0..l).map(|j| if cm >> j & 1 == 1 { 1.0 } else { -1.0 }).collect();
            best = best.max(a.bilinear(&b, &c));
        }
    }
    best
}

#[test]
fn closed_forms() {
    for k in 1..=5 {
        for t in [0.25, 0.5, 1.0, 2.0, 3.5, 8.0] {
            assert!((norm(&ChaosMatrix::identity(k), t) - t.min(k as f64)).abs() <= 1e-9);
            let ones = ChaosMatrix::new(DenseMatrix::from_fn(k, k, |_, _| 1.0)).unwrap();
            assert!((norm(&ones, t) - (t * k as f64).min((k * k) as f64)).abs() <= 1e-9);
        }
    }
}

#[test]
fn rectangular_ones_closed_form() {
    // (sum b)(sum c) with sum b <= min(sqrt(t k), k).
    let ones = ChaosMatrix::new(DenseMatrix::from_fn(2, 5, |_, _| 1.0)).unwrap();
    for t in [0.5f64, 1.0, 2.0, 3.0, 6.0] {
        let want = (t * 2.0).sqrt().min(2.0) * (t * 5.0).sqrt().min(5.0);
        assert!((norm(&ones, t) - want).abs() <= 1e-9, "t = {t}");
    }
}

#[test]
fn parsing_forms_agree() {
    let a = ChaosMatrix::from_inline("1, -2; 0.5, 3").unwrap();
    let b = ChaosMatrix::from_csv("# comment\n1,-2\n0.5,3\n").unwrap();
    assert_eq!(a, b);
    assert!(ChaosMatrix::from_inline("1,2;3").is_err());
    assert!(ChaosMatrix::from_inline("1,x").is_err());
    assert!(ChaosMatrix::from_rows(&[vec![f64::INFINITY]]).is_err());
}

#[test]
fn invalid_parameters() {
    let a = ChaosMatrix::identity(2);
    assert!(chaos_norm(&a, 0.0, RESTARTS).is_err());
    assert!(chaos_norm(&a, -1.0, RESTARTS).is_err());
    assert!(chaos_norm(&a, 1.0, 0).is_err());
    assert!(chaos_norm_oracle(&ChaosMatrix::identity(5), 1.0, 0.1).is_err());
    assert!(chaos_norm_oracle(&a, 1.0, 0.5).is_err());
}

#[test]
fn box_ball_examples() {
    let (x, v) = box_ball_linear_max(&[3.0, 4.0], 1.0).unwrap();
    assert!((v - 5.0).abs() <= 1e-12);
    assert!((x[0] - 0.6).abs() <= 1e-9 && (x[1] - 0.8).abs() <= 1e-9);
    let (_, v) = box_ball_linear_max(&[1.0, -1.0, 0.5], 10.0).unwrap();
    assert!((v - 2.5).abs() <= 1e-12);
    let (x, v) = box_ball_linear_max(&[0.0, 0.0], 1.0).unwrap();
    assert_eq!(v, 0.0);
    assert!(x.iter().all(|c| *c == 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn homogeneous(a in matrix_strategy(4, 4), t in 0.2f64..5.0) {
        let base = norm(&a, t);
        for lambda in [-2.0, 0.5, 3.0] {
            let scaled = ChaosMatrix::new(a.matrix().scaled(lambda)).unwrap();
            let v = norm(&scaled, t);
            prop_assert!((v - lambda.abs() * base).abs() <= 1e-6 * (1.0 + base.abs() * lambda.abs()), "lambda {}: {} vs {}", lambda, v, base);
        }
    }

    #[test]
    fn monotone_in_t(a in matrix_strategy(4, 4), t in 0.2f64..4.0, dt in 0.01f64..3.0) {
        prop_assert!(norm(&a, t) <= norm(&a, t + dt) * (1.0 + 1e-8) + 1e-12);
    }

    #[test]
    fn upper_bounds(a in matrix_strategy(5, 5), t in 0.1f64..6.0) {
        let v = norm(&a, t);
        let bound = (t * sigma_max(&a)).min(a.matrix().abs_sum());
        prop_assert!(v <= bound * (1.0 + 1e-9) + 1e-12, "{} > {}", v, bound);
        prop_assert!(v >= 0.0);
    }

    #[test]
    fn maximisers_are_feasible(a in matrix_strategy(5, 5), t in 0.1f64..6.0) {
        let r = chaos_norm(&a, t, RESTARTS).unwrap();
        for v in [&r.b, &r.c] {
            prop_assert!(v.iter().all(|x| x.abs() <= 1.0 + 1e-12));
            prop_assert!(v.iter().map(|x| x * x).sum::<f64>() <= t * (1.0 + 1e-9));
        }
        prop_assert!((a.bilinear(&r.b, &r.c) - r.value).abs() <= 1e-12 * (1.0 + r.value.abs()));
    }

    #[test]
    fn large_t_reaches_sign_vertices(a in matrix_strategy(5, 5), extra in 0.0f64..3.0) {
        let t = a.rows().max(a.cols()) as f64 + extra;
        let want = vertex_max(&a);
        prop_assert!((norm(&a, t) - want).abs() <= 1e-9 * (1.0 + want.abs()));
    }

    #[test]
    fn transpose_invariant(a in matrix_strategy(4, 5), t in 0.2f64..5.0) {
        let v = norm(&a, t);
        prop_assert!((norm(&a.transpose(), t) - v).abs() <= 1e-6 * (1.0 + v));
    }

    #[test]
    fn agrees_with_oracle(a in matrix_strategy(3, 4), t in 0.3f64..4.0) {
        let v = norm(&a, t);
        let o = chaos_norm_oracle(&a, t, 0.1).unwrap();
        prop_assert!((v - o).abs() <= 0.02 * v.max(o) + 1e-12, "{} vs oracle {}", v, o);
    }

    #[test]
    fn box_ball_dominates_random_feasible_points(
        v in prop::collection::vec(-3.0f64..3.0, 1..8),
        t in 0.1f64..6.0,
        seed in prop::collection::vec(-1.0f64..1.0, 8),
    ) {
        let (x, best) = box_ball_linear_max(&v, t).unwrap();
        prop_assert!(x.iter().all(|c| c.abs() <= 1.0 + 1e-12));
        prop_assert!(x.iter().map(|c| c * c).sum::<f64>() <= t * (1.0 + 1e-9));
        let y: Vec<f64> = seed[..v.len()].to_vec();
        let r = (y.iter().map(|c| c * c).sum::<f64>() / t).sqrt().max(1.0);
        let feasible: f64 = y.iter().zip(&v).map(|(c, w)| c / r * w).sum();
        prop_assert!(feasible <= best + 1e-9);
    }
}
