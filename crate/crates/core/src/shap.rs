//! Shapley-value attributions with interventional missing-feature semantics:
//! a feature outside the coalition takes its value from a background row, and
//! the coalition value is averaged over the background.
//!
//! [`exact_shapley`] enumerates all `2^d` coalitions. [`sampled_shapley`]
//! estimates the same quantity from random feature orderings: each iteration
//! draws a permutation and a background row, then switches features from the
//! background to the instance in permutation order, crediting each feature
//! with the change in prediction it causes. Iterations come in antithetic
//! pairs (a permutation and its reverse on the same background row), which
//! cancels the sampling noise of pairwise interactions, and background rows
//! are drawn in shuffled passes so each is used about equally often.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::explanation::{rank_attributions, Explanation, FeatureAttribution, Method};

/// Enumeration limit for [`exact_shapley`].
pub const MAX_EXACT_FEATURES: usize = 20;

/// Background rows used when the training set is larger.
pub const DEFAULT_BACKGROUND_ROWS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShapError {
    #[error("exact enumeration supports at most {MAX_EXACT_FEATURES} features, got {0}")]
    TooManyFeatures(usize),
    #[error("background set is empty")]
    EmptyBackground,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("n_iterations must be at least 1")]
    NoIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapConfig {
    pub n_iterations: usize,
    pub background: Vec<Vec<f64>>,
    pub top_k: usize,
    pub seed: u64,
}

impl ShapConfig {
    pub fn new(background: Vec<Vec<f64>>) -> Self {
        Self {
            n_iterations: 2000,
            background,
            top_k: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapResult {
    pub phi: Vec<f64>,
    /// Mean black-box output over the background rows.
    pub baseline: f64,
    pub prediction: f64,
}

impl ShapResult {
    /// `sum(phi) - (prediction - baseline)`.
    pub fn efficiency_gap(&self) -> f64 {
        self.phi.iter().sum::<f64>() - (self.prediction - self.baseline)
    }
}

/// The whole training set if it has at most 100 rows, else 100 rows taken at
/// evenly spaced positions.
pub fn default_background(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len();
    if n <= DEFAULT_BACKGROUND_ROWS {
        return rows.to_vec();
    }
    (0..DEFAULT_BACKGROUND_ROWS)
        .map(|i| rows[i * n / DEFAULT_BACKGROUND_ROWS].clone())
        .collect()
}

fn check_inputs(instance: &[f64], background: &[Vec<f64>]) -> Result<(), ShapError> {
    if background.is_empty() {
        return Err(ShapError::EmptyBackground);
    }
    if let Some(row) = background.iter().find(|r| r.len() != instance.len()) {
        return Err(ShapError::DimensionMismatch {
            expected: instance.len(),
            got: row.len(),
        });
    }
    Ok(())
}

fn mean_over_background<F: Fn(&[f64]) -> f64>(f: &F, background: &[Vec<f64>]) -> f64 {
    background.iter().map(|b| f(b)).sum::<f64>() / background.len() as f64
}

/// Exact Shapley values by enumerating every coalition.
pub fn exact_shapley<F>(
    predict_fn: F,
    instance: &[f64],
    background: &[Vec<f64>],
) -> Result<ShapResult, ShapError>
where
    F: Fn(&[f64]) -> f64,
{
    check_inputs(instance, background)?;
    let d = instance.len();
    if d > MAX_EXACT_FEATURES {
        return Err(ShapError::TooManyFeatures(d));
    }

    // value of every coalition, indexed by bitmask of features taken from the instance
    let mut values = vec![0.0; 1 << d];
    let mut z = vec![0.0; d];
    for (mask, value) in values.iter_mut().enumerate() {
        let mut acc = 0.0;
        for b in background {
            for j in 0..d {
                z[j] = if mask >> j & 1 == 1 { instance[j] } else { b[j] };
            }
            acc += predict_fn(&z);
        }
        *value = acc / background.len() as f64;
    }

    // |S|! (d - |S| - 1)! / d!  =  1 / (d * C(d-1, |S|))
    let mut weight = vec![0.0; d.max(1)];
    let mut binom = 1.0;
    for (s, w) in weight.iter_mut().enumerate() {
        if s > 0 {
            binom = binom * (d - s) as f64 / s as f64;
        }
        *w = 1.0 / (d as f64 * binom);
    }

    let mut phi = vec![0.0; d];
    for (j, phi_j) in phi.iter_mut().enumerate() {
        let bit = 1usize << j;
        let mut total = 0.0;
        for mask in 0..values.len() {
            if mask & bit == 0 {
                let size = mask.count_ones() as usize;
                total += weight[size] * (values[mask | bit] - values[mask]);
            }
        }
        *phi_j = total;
    }

    Ok(ShapResult {
        phi,
        baseline: values[0],
        prediction: values[values.len() - 1],
    })
}

/// Monte-Carlo Shapley values over random permutations and background rows.
pub fn sampled_shapley<F>(
    predict_fn: F,
    instance: &[f64],
    cfg: &ShapConfig,
) -> Result<ShapResult, ShapError>
where
    F: Fn(&[f64]) -> f64,
{
    check_inputs(instance, &cfg.background)?;
    if cfg.n_iterations == 0 {
        return Err(ShapError::NoIterations);
    }
    let d = instance.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..d).collect();
    let mut sums = vec![0.0; d];
    let mut z = vec![0.0; d];
    // background rows are drawn in shuffled passes: each draw is uniform, but
    // every row is used equally often over a full pass
    let mut rows: Vec<usize> = (0..cfg.background.len()).collect();
    let mut next_row = rows.len();
    let mut b = &cfg.background[0];
    for m in 0..cfg.n_iterations {
        // odd iterations walk the previous permutation backwards with the same
        // background row; each permutation is still uniformly distributed
        if m % 2 == 0 {
            order.shuffle(&mut rng);
            if next_row == rows.len() {
                rows.shuffle(&mut rng);
                next_row = 0;
            }
            b = &cfg.background[rows[next_row]];
            next_row += 1;
        } else {
            order.reverse();
        }
        z.copy_from_slice(b);
        // z holds x_{-j}; flipping j gives x_{+j}
        let mut before = predict_fn(&z);
        for &j in &order {
            z[j] = instance[j];
            let after = predict_fn(&z);
            sums[j] += after - before;
            before = after;
        }
    }
    let m = cfg.n_iterations as f64;
    Ok(ShapResult {
        phi: sums.into_iter().map(|s| s / m).collect(),
        baseline: mean_over_background(&predict_fn, &cfg.background),
        prediction: predict_fn(instance),
    })
}

/// Top-`k` attributions by `|phi|`. Shapley output carries no cut-off
/// conditions.
pub fn summarize_instance(
    result: &ShapResult,
    feature_names: &[String],
    top_k: usize,
) -> Result<Explanation, ShapError> {
    if feature_names.len() != result.phi.len() {
        return Err(ShapError::DimensionMismatch {
            expected: result.phi.len(),
            got: feature_names.len(),
        });
    }
    let attributions = feature_names
        .iter()
        .zip(&result.phi)
        .map(|(name, &phi)| FeatureAttribution {
            feature_name: name.clone(),
            weight: phi,
            condition: String::new(),
        })
        .collect();
    Ok(Explanation {
        method: Method::Shap,
        instance_period: None,
        prediction: result.prediction,
        intercept_or_baseline: result.baseline,
        attributions: rank_attributions(attributions, top_k),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn additive_function_zero_background() {
        let inst = [1.5, -2.0, 4.0, 0.25];
        let bg = vec![vec![0.0; 4]];
        let f = |x: &[f64]| x.iter().sum::<f64>();
        let exact = exact_shapley(f, &inst, &bg).unwrap();
        for (p, v) in exact.phi.iter().zip(inst) {
            assert!((p - v).abs() < 1e-12);
        }
        let cfg = ShapConfig {
            n_iterations: 7,
            ..ShapConfig::new(bg)
        };
        let sampled = sampled_shapley(f, &inst, &cfg).unwrap();
        for (p, v) in sampled.phi.iter().zip(inst) {
            assert!((p - v).abs() < 1e-12);
        }
    }

    #[test]
    fn ignored_feature_gets_zero() {
        let bg = vec![vec![0.3, 0.1, 2.0], vec![-1.0, 0.5, 7.0]];
        let f = |x: &[f64]| x[0] * x[0] + 3.0 * x[1];
        let r = exact_shapley(f, &[1.0, 2.0, -5.0], &bg).unwrap();
        assert_eq!(r.phi[2], 0.0);
    }

    #[test]
    fn product_of_two_features() {
        let r = exact_shapley(|x| x[0] * x[1], &[1.0, 1.0, 5.0], &[vec![0.0; 3]]).unwrap();
        assert!((r.phi[0] - 0.5).abs() < 1e-15);
        assert!((r.phi[1] - 0.5).abs() < 1e-15);
        assert_eq!(r.phi[2], 0.0);
        assert_eq!((r.baseline, r.prediction), (0.0, 1.0));
    }

    #[test]
    fn sampled_is_seeded() {
        let bg = vec![vec![0.0, 1.0, 0.5], vec![1.0, 0.0, -0.5]];
        let f = |x: &[f64]| x[0] * x[1] + x[2].powi(2);
        let cfg = ShapConfig {
            n_iterations: 200,
            seed: 4,
            ..ShapConfig::new(bg)
        };
        let a = sampled_shapley(f, &[2.0, 3.0, 1.0], &cfg).unwrap();
        let b = sampled_shapley(f, &[2.0, 3.0, 1.0], &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn input_errors() {
        let f = |x: &[f64]| x[0];
        assert_eq!(exact_shapley(f, &[1.0], &[]), Err(ShapError::EmptyBackground));
        assert_eq!(
            exact_shapley(|_| 0.0, &[0.0; 21], &[vec![0.0; 21]]),
            Err(ShapError::TooManyFeatures(21))
        );
        let cfg = ShapConfig::new(vec![]);
        assert_eq!(sampled_shapley(f, &[1.0], &cfg), Err(ShapError::EmptyBackground));
        let cfg = ShapConfig {
            n_iterations: 0,
            ..ShapConfig::new(vec![vec![0.0]])
        };
        assert_eq!(sampled_shapley(f, &[1.0], &cfg), Err(ShapError::NoIterations));
    }

    fn names(n: usize) -> Vec<String> {
        ["c", "a", "b", "d", "e", "f"][..n].iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn summary_ordering() {
        let r = ShapResult {
            phi: vec![0.0, 0.0, 0.0],
            baseline: 1.0,
            prediction: 1.0,
        };
        let e = summarize_instance(&r, &names(3), 5).unwrap();
        let order: Vec<_> = e.attributions.iter().map(|a| a.feature_name.as_str()).collect();
        assert_eq!(order, ["a", "b", "c"]);
        assert!(e.attributions.iter().all(|a| a.condition.is_empty()));

        let r = ShapResult {
            phi: vec![3.0, -5.0, 1.0],
            baseline: 0.0,
            prediction: -1.0,
        };
        let e = summarize_instance(&r, &names(3), 2).unwrap();
        let w: Vec<_> = e.attributions.iter().map(|a| a.weight).collect();
        assert_eq!(w, [-5.0, 3.0]);
        assert_eq!(e.method, Method::Shap);
        assert!(summarize_instance(&r, &names(2), 2).is_err());
    }

    #[test]
    fn background_sampling() {
        let rows: Vec<Vec<f64>> = (0..250).map(|i| vec![f64::from(i)]).collect();
        let bg = default_background(&rows);
        assert_eq!(bg.len(), 100);
        assert_eq!(bg[0], vec![0.0]);
        assert_eq!(bg[1], vec![2.0]);
        assert_eq!(bg[99], vec![247.0]);
        assert_eq!(default_background(&rows[..40]).len(), 40);
    }
}
