mod common;

use amlbfgs::curvature::{CurvatureStore, MemoryPolicy};
use amlbfgs::direction::{dense_bfgs_oracle, dense_inverse_hessian, two_loop_direction};
use amlbfgs::linalg::dot;
use common::*;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn store_with(pairs: &[amlbfgs::curvature::CurvaturePair]) -> CurvatureStore {
    let mut store = CurvatureStore::new(MemoryPolicy::fixed(pairs.len().max(1))).unwrap();
    for p in pairs.iter().cloned() {
        store.admit_pair(p);
    }
    store
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matches_dense_oracle(seed in any::<u64>(), d in 2usize..12, q in 1usize..7) {
        let mut r = rng(seed);
        let pairs = random_pairs(&mut r, d, q);
        let g = random_vec(&mut r, d);
        let fast = two_loop_direction(&store_with(&pairs), &g).unwrap();
        prop_assert!(rel_err(&fast.direction, &dense_bfgs_oracle(&pairs, &g)) < 1e-10);
    }

    #[test]
    fn inverse_hessian_is_spd(seed in any::<u64>(), q in 1usize..6) {
        let d = 6;
        let mut r = rng(seed);
        let pairs = random_pairs(&mut r, d, q);
        let h = DMatrix::from_row_slice(d, d, &dense_inverse_hessian(&pairs, d));
        prop_assert!((&h - h.transpose()).abs().max() < 1e-10 * h.abs().max());
        let eig = h.symmetric_eigen();
        prop_assert!(eig.eigenvalues.iter().all(|&l| l > 0.0), "eigenvalues {:?}", eig.eigenvalues);
    }

    #[test]
    fn direction_is_descent(seed in any::<u64>(), q in 0usize..6) {
        let d = 7;
        let mut r = rng(seed);
        let pairs = random_pairs(&mut r, d, q);
        let g = random_vec(&mut r, d);
        let p = two_loop_direction(&store_with(&pairs), &g).unwrap().direction;
        prop_assert!(dot(&p, &g).unwrap() < 0.0);
    }

    #[test]
    fn direction_is_linear_in_gradient(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let d = 5;
        let mut r = rng(seed);
        let store = store_with(&random_pairs(&mut r, d, 3));
        let g1 = random_vec(&mut r, d);
        let g2 = random_vec(&mut r, d);
        let mix: Vec<f64> = g1.iter().zip(&g2).map(|(x, y)| a * x + b * y).collect();
        let p1 = two_loop_direction(&store, &g1).unwrap().direction;
        let p2 = two_loop_direction(&store, &g2).unwrap().direction;
        let pm = two_loop_direction(&store, &mix).unwrap().direction;
        for i in 0..d {
            let expect = a * p1[i] + b * p2[i];
            let scale = (a * p1[i]).abs() + (b * p2[i]).abs() + 1e-12;
            prop_assert!((pm[i] - expect).abs() <= 1e-10 * scale);
        }
    }
}

#[test]
fn secant_equation_holds_for_newest_pair() {
    let mut r = rng(8);
    let d = 6;
    let pairs = random_pairs(&mut r, d, 4);
    let store = store_with(&pairs);
    let newest = pairs.last().unwrap();
    // H t = s for the most recent pair
    let p = two_loop_direction(&store, newest.t()).unwrap().direction;
    let hs: Vec<f64> = p.iter().map(|x| -x).collect();
    assert!(rel_err(&hs, newest.s()) < 1e-10);
}

#[test]
fn gamma_reported_from_newest_pair() {
    let mut r = rng(2);
    let pairs = random_pairs(&mut r, 4, 2);
    let store = store_with(&pairs);
    let last = pairs.last().unwrap();
    let expected = dot(last.s(), last.t()).unwrap() / dot(last.t(), last.t()).unwrap();
    let res = two_loop_direction(&store, &[1.0, 0.0, 0.0, 0.0]).unwrap();
    assert!((res.gamma - expected).abs() < 1e-15 * expected.abs());
}
