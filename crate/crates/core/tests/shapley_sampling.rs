//! Sampled Shapley against the exact enumeration.

mod common;

use xaits_core::shap::{exact_shapley, sampled_shapley, ShapConfig};

use common::{random_rows, rng, RandomFn};

fn mean_abs_error(m: usize, f: &RandomFn, inst: &[f64], bg: &[Vec<f64>], seed: u64) -> f64 {
    let exact = exact_shapley(|x| f.eval(x), inst, bg).unwrap();
    let cfg = ShapConfig {
        n_iterations: m,
        seed,
        ..ShapConfig::new(bg.to_vec())
    };
    let est = sampled_shapley(|x| f.eval(x), inst, &cfg).unwrap();
    exact.phi.iter().zip(&est.phi).map(|(a, b)| (a - b).abs()).sum::<f64>() / inst.len() as f64
}

#[test]
fn error_shrinks_with_more_iterations() {
    let mut r = rng(40);
    let (mut small, mut large) = (0.0, 0.0);
    for trial in 0..20 {
        let f = RandomFn::new(&mut r, 6);
        let inst = random_rows(&mut r, 1, 6).remove(0);
        let bg = random_rows(&mut r, 8, 6);
        small += mean_abs_error(500, &f, &inst, &bg, trial);
        large += mean_abs_error(4000, &f, &inst, &bg, trial);
    }
    assert!(large <= small, "M=4000 error {large} exceeds M=500 error {small}");
}

#[test]
fn additive_function_is_recovered_exactly() {
    let inst = [1.0, -2.0, 0.5, 3.0];
    let cfg = ShapConfig {
        n_iterations: 7,
        ..ShapConfig::new(vec![vec![0.0; 4]])
    };
    let res = sampled_shapley(|x| x.iter().sum(), &inst, &cfg).unwrap();
    for (p, x) in res.phi.iter().zip(inst) {
        assert!((p - x).abs() < 1e-12);
    }
}

#[test]
fn same_seed_gives_identical_result() {
    let mut r = rng(41);
    let f = RandomFn::new(&mut r, 5);
    let inst = random_rows(&mut r, 1, 5).remove(0);
    let cfg = ShapConfig {
        n_iterations: 301,
        seed: 9,
        ..ShapConfig::new(random_rows(&mut r, 7, 5))
    };
    let a = sampled_shapley(|x| f.eval(x), &inst, &cfg).unwrap();
    let b = sampled_shapley(|x| f.eval(x), &inst, &cfg).unwrap();
    assert_eq!(a, b);
}
