//! Local surrogate explanations.
//!
//! Gaussian perturbations around the instance (scaled by training standard
//! deviations) are scored by the black box, weighted with an exponential
//! proximity kernel, and fit with ridge-penalized weighted least squares.
//! The `top_k` features with the largest `|coefficient * std|` are kept and
//! the surrogate is refit on them alone. Each kept feature is annotated with
//! the training-quartile bracket its instance value falls in.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::explanation::{rank_attributions, Explanation, FeatureAttribution, Method};
use crate::timeseries::SupervisedDataset;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LimeError {
    #[error("need at least 4 training rows for quartiles, got {0}")]
    TooFewRows(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("surrogate fit is singular even with ridge penalty {penalty:e}")]
    SingularFit { penalty: f64 },
    #[error("black box returned a non-finite value")]
    NonFinitePrediction,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// Proximity kernel width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelWidth {
    /// `0.75 * sqrt(d)`
    Auto,
    Fixed(f64),
}

impl KernelWidth {
    pub fn resolve(self, n_features: usize) -> f64 {
        match self {
            KernelWidth::Auto => 0.75 * (n_features as f64).sqrt(),
            KernelWidth::Fixed(w) => w,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimeConfig {
    pub n_samples: usize,
    pub kernel_width: KernelWidth,
    pub top_k: usize,
    pub ridge_penalty: f64,
    pub seed: u64,
}

impl Default for LimeConfig {
    fn default() -> Self {
        Self {
            n_samples: 5000,
            kernel_width: KernelWidth::Auto,
            top_k: 5,
            ridge_penalty: 1.0,
            seed: 0,
        }
    }
}

impl LimeConfig {
    pub fn validate(&self) -> Result<(), LimeError> {
        if self.top_k == 0 {
            return Err(LimeError::InvalidConfig("top_k must be at least 1".into()));
        }
        if self.n_samples < self.top_k + 1 {
            return Err(LimeError::InvalidConfig(format!(
                "n_samples {} must exceed top_k {}",
                self.n_samples, self.top_k
            )));
        }
        if !(self.ridge_penalty >= 0.0) {
            return Err(LimeError::InvalidConfig("ridge_penalty must be >= 0".into()));
        }
        if let KernelWidth::Fixed(w) = self.kernel_width {
            if !(w > 0.0 && w.is_finite()) {
                return Err(LimeError::InvalidConfig("kernel width must be > 0".into()));
            }
        }
        Ok(())
    }
}

/// Per-feature summaries of the training data.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainStats {
    pub feature_names: Vec<String>,
    pub means: Vec<f64>,
    /// Population standard deviations.
    pub stds: Vec<f64>,
    /// 25/50/75% quantiles (linear interpolation).
    pub quartiles: Vec<[f64; 3]>,
}

impl TrainStats {
    pub fn n_features(&self) -> usize {
        self.means.len()
    }

    pub fn from_rows(feature_names: Vec<String>, rows: &[Vec<f64>]) -> Result<Self, LimeError> {
        let n = rows.len();
        if n < 4 {
            return Err(LimeError::TooFewRows(n));
        }
        let d = rows[0].len();
        let mut means = Vec::with_capacity(d);
        let mut stds = Vec::with_capacity(d);
        let mut quartiles = Vec::with_capacity(d);
        for j in 0..d {
            let mut col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            let mean = col.iter().sum::<f64>() / n as f64;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            col.sort_by(f64::total_cmp);
            means.push(mean);
            stds.push(var.sqrt());
            quartiles.push([quantile(&col, 0.25), quantile(&col, 0.5), quantile(&col, 0.75)]);
        }
        Ok(Self {
            feature_names,
            means,
            stds,
            quartiles,
        })
    }
}

/// Quantile of sorted data with linear interpolation between order statistics.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn compute_train_stats(train: &SupervisedDataset) -> Result<TrainStats, LimeError> {
    TrainStats::from_rows(train.feature_names.clone(), &train.x)
}

/// `n_samples` rows: the instance itself, then gaussian perturbations with
/// per-feature standard deviation `stats.stds`.
pub fn perturb_samples(
    instance: &[f64],
    stats: &TrainStats,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>, LimeError> {
    if instance.len() != stats.n_features() {
        return Err(LimeError::DimensionMismatch {
            expected: stats.n_features(),
            got: instance.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_samples);
    if n_samples > 0 {
        out.push(instance.to_vec());
    }
    for _ in 1..n_samples {
        out.push(
            instance
                .iter()
                .zip(&stats.stds)
                .map(|(&v, &s)| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    v + s * z
                })
                .collect(),
        );
    }
    Ok(out)
}

/// `exp(-D² / width²)` with `D` the euclidean distance to the instance.
pub fn proximity_weights(
    instance: &[f64],
    samples: &[Vec<f64>],
    kernel_width: f64,
) -> Result<Vec<f64>, LimeError> {
    if !(kernel_width > 0.0) {
        return Err(LimeError::InvalidConfig("kernel width must be > 0".into()));
    }
    samples
        .iter()
        .map(|s| {
            if s.len() != instance.len() {
                return Err(LimeError::DimensionMismatch {
                    expected: instance.len(),
                    got: s.len(),
                });
            }
            let d2: f64 = s.iter().zip(instance).map(|(a, b)| (a - b) * (a - b)).sum();
            Ok((-d2 / (kernel_width * kernel_width)).exp())
        })
        .collect()
}

/// A weighted linear surrogate restricted to `features`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateFit {
    pub features: Vec<usize>,
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    /// Penalty actually used after any fallback.
    pub penalty: f64,
}

/// Ridge-penalized weighted least squares with an unpenalized intercept.
/// A singular normal matrix is retried with the penalty raised tenfold, up to
/// three times.
pub fn fit_weighted_ridge(
    samples: &[Vec<f64>],
    targets: &[f64],
    weights: &[f64],
    features: &[usize],
    penalty: f64,
) -> Result<SurrogateFit, LimeError> {
    let k = features.len();
    let total_w: f64 = weights.iter().sum();
    let x_mean: Vec<f64> = features
        .iter()
        .map(|&j| samples.iter().zip(weights).map(|(s, w)| w * s[j]).sum::<f64>() / total_w)
        .collect();
    let y_mean = targets.iter().zip(weights).map(|(y, w)| w * y).sum::<f64>() / total_w;

    let mut gram = DMatrix::<f64>::zeros(k, k);
    let mut rhs = DVector::<f64>::zeros(k);
    let mut centered = vec![0.0; k];
    for ((s, &y), &w) in samples.iter().zip(targets).zip(weights) {
        for (a, &j) in features.iter().enumerate() {
            centered[a] = s[j] - x_mean[a];
        }
        for a in 0..k {
            rhs[a] += w * centered[a] * (y - y_mean);
            for b in a..k {
                gram[(a, b)] += w * centered[a] * centered[b];
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
    }

    let mut lambda = penalty;
    for attempt in 0..=3 {
        if attempt > 0 {
            lambda = lambda.max(1e-8) * 10.0;
        }
        let mut m = gram.clone();
        for a in 0..k {
            m[(a, a)] += lambda;
        }
        if let Some(chol) = m.cholesky().filter(well_conditioned) {
            let beta = chol.solve(&rhs);
            if beta.iter().all(|v| v.is_finite()) {
                let intercept = y_mean - beta.iter().zip(&x_mean).map(|(b, m)| b * m).sum::<f64>();
                return Ok(SurrogateFit {
                    features: features.to_vec(),
                    coefficients: beta.iter().copied().collect(),
                    intercept,
                    penalty: lambda,
                });
            }
        }
    }
    Err(LimeError::SingularFit { penalty: lambda })
}

/// Rejects factorizations whose pivots span more than 12 orders of magnitude
/// in the squared scale; rounding lets exactly singular matrices through
/// otherwise.
fn well_conditioned(chol: &nalgebra::Cholesky<f64, nalgebra::Dyn>) -> bool {
    let l = chol.l_dirty();
    let diag = (0..l.nrows()).map(|i| l[(i, i)] * l[(i, i)]);
    let (lo, hi) = diag.fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    l.nrows() == 0 || lo > 1e-12 * hi
}

/// Human-readable bracket of `value` among the quartiles, e.g.
/// `0.25 < calls (t-1) <= 0.50`. `display` maps thresholds before printing.
pub fn quartile_condition(
    name: &str,
    value: f64,
    quartiles: [f64; 3],
    display: impl Fn(f64) -> f64,
) -> String {
    let [q1, q2, q3] = quartiles;
    let (a, b, c) = (display(q1), display(q2), display(q3));
    if value <= q1 {
        format!("{name} <= {a:.2}")
    } else if value <= q2 {
        format!("{a:.2} < {name} <= {b:.2}")
    } else if value <= q3 {
        format!("{b:.2} < {name} <= {c:.2}")
    } else {
        format!("{name} > {c:.2}")
    }
}

/// Explains `predict_fn` at `instance`. Returns the explanation with no
/// period attached; see [`Explanation::with_period`].
pub fn explain_lime<F>(
    predict_fn: F,
    instance: &[f64],
    stats: &TrainStats,
    cfg: &LimeConfig,
) -> Result<Explanation, LimeError>
where
    F: Fn(&[f64]) -> f64,
{
    cfg.validate()?;
    let d = stats.n_features();
    let samples = perturb_samples(instance, stats, cfg.n_samples, cfg.seed)?;
    let targets: Vec<f64> = samples.iter().map(|s| predict_fn(s)).collect();
    if targets.iter().any(|v| !v.is_finite()) {
        return Err(LimeError::NonFinitePrediction);
    }
    let weights = proximity_weights(instance, &samples, cfg.kernel_width.resolve(d))?;

    let all: Vec<usize> = (0..d).collect();
    let full = fit_weighted_ridge(&samples, &targets, &weights, &all, cfg.ridge_penalty)?;

    let mut order: Vec<usize> = all;
    let importance = |j: usize| (full.coefficients[j] * stats.stds[j]).abs();
    order.sort_by(|&a, &b| importance(b).total_cmp(&importance(a)).then(a.cmp(&b)));
    order.truncate(cfg.top_k.min(d));
    order.sort_unstable();

    let local = fit_weighted_ridge(&samples, &targets, &weights, &order, cfg.ridge_penalty)?;
    let attributions = local
        .features
        .iter()
        .zip(&local.coefficients)
        .map(|(&j, &w)| {
            let name = &stats.feature_names[j];
            FeatureAttribution {
                feature_name: name.clone(),
                weight: w,
                condition: quartile_condition(name, instance[j], stats.quartiles[j], |v| v),
            }
        })
        .collect();

    Ok(Explanation {
        method: Method::Lime,
        instance_period: None,
        prediction: targets[0],
        intercept_or_baseline: local.intercept,
        attributions: rank_attributions(attributions, cfg.top_k),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats_for(rows: &[Vec<f64>]) -> TrainStats {
        let names = (0..rows[0].len()).map(|j| format!("f{j}")).collect();
        TrainStats::from_rows(names, rows).unwrap()
    }

    #[test]
    fn train_stats_examples() {
        let rows: Vec<Vec<f64>> = [1.0, 2.0, 3.0, 4.0].iter().map(|&v| vec![v, 7.0]).collect();
        let s = stats_for(&rows);
        assert_eq!(s.means, vec![2.5, 7.0]);
        assert_eq!(s.quartiles[0], [1.75, 2.5, 3.25]);
        assert_eq!(s.stds[1], 0.0);
        assert_eq!(s.quartiles[1], [7.0, 7.0, 7.0]);
        assert!((s.stds[0] - 1.25f64.sqrt()).abs() < 1e-15);
        assert_eq!(
            TrainStats::from_rows(vec![], &rows[..3]),
            Err(LimeError::TooFewRows(3))
        );
    }

    #[test]
    fn zero_std_means_no_noise() {
        let rows = vec![vec![1.0, 2.0]; 4];
        let s = stats_for(&rows);
        let samples = perturb_samples(&[5.0, 6.0], &s, 50, 3).unwrap();
        assert_eq!(samples.len(), 50);
        assert!(samples.iter().all(|r| r == &vec![5.0, 6.0]));
    }

    #[test]
    fn perturbation_is_seeded() {
        let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![f64::from(i), f64::from(i * i)]).collect();
        let s = stats_for(&rows);
        let a = perturb_samples(&[1.0, 2.0], &s, 100, 42).unwrap();
        let b = perturb_samples(&[1.0, 2.0], &s, 100, 42).unwrap();
        let c = perturb_samples(&[1.0, 2.0], &s, 100, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a[0], vec![1.0, 2.0]);
        assert!(matches!(
            perturb_samples(&[1.0], &s, 10, 0),
            Err(LimeError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn sample_mean_near_instance() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![f64::from(i) * 0.3, 1.0 - f64::from(i) * 0.05]).collect();
        let s = stats_for(&rows);
        let inst = [0.7, 0.2];
        let n = 5000;
        let samples = perturb_samples(&inst, &s, n, 11).unwrap();
        for j in 0..2 {
            let mean = samples.iter().map(|r| r[j]).sum::<f64>() / n as f64;
            assert!((mean - inst[j]).abs() < 3.0 * s.stds[j] / (n as f64).sqrt());
        }
    }

    #[test]
    fn proximity_examples() {
        let w = proximity_weights(&[0.0, 0.0], &[vec![0.0, 0.0], vec![3.0, 4.0], vec![6.0, 8.0]], 5.0).unwrap();
        assert_eq!(w[0], 1.0);
        assert!((w[1] - (-1.0f64).exp()).abs() < 1e-15);
        assert!((w[1] - 0.367879).abs() < 1e-6);
        assert!(w[0] > w[1] && w[1] > w[2]);
        assert!(proximity_weights(&[0.0], &[vec![0.0]], 0.0).is_err());
    }

    #[test]
    fn conditions_bracket_the_value() {
        let q = [0.25, 0.5, 0.75];
        assert_eq!(quartile_condition("x", 0.1, q, |v| v), "x <= 0.25");
        assert_eq!(quartile_condition("x", 0.4, q, |v| v), "0.25 < x <= 0.50");
        assert_eq!(quartile_condition("x", 0.75, q, |v| v), "0.50 < x <= 0.75");
        assert_eq!(quartile_condition("x", 0.9, q, |v| v), "x > 0.75");
        assert_eq!(quartile_condition("x", 0.9, q, |v| v * 100.0), "x > 75.00");
    }

    fn spread_rows(d: usize) -> Vec<Vec<f64>> {
        (0..20)
            .map(|i| (0..d).map(|j| ((i * (j + 3)) % 7) as f64 / 7.0).collect())
            .collect()
    }

    #[test]
    fn recovers_single_linear_feature() {
        let s = stats_for(&spread_rows(4));
        let inst = [0.5, 0.5, 0.5, 0.5];
        let cfg = LimeConfig {
            kernel_width: KernelWidth::Fixed(100.0),
            ridge_penalty: 0.0,
            seed: 5,
            ..LimeConfig::default()
        };
        let e = explain_lime(|x| 3.0 * x[0], &inst, &s, &cfg).unwrap();
        assert_eq!(e.attributions[0].feature_name, "f0");
        assert!((e.attributions[0].weight - 3.0).abs() < 1e-9);
        for a in &e.attributions[1..] {
            assert!(a.weight.abs() < 1e-9);
        }
        assert!((e.prediction - 1.5).abs() < 1e-12);
    }

    #[test]
    fn constant_black_box_has_no_signal() {
        let s = stats_for(&spread_rows(3));
        let e = explain_lime(|_| 2.5, &[0.1, 0.2, 0.3], &s, &LimeConfig::default()).unwrap();
        assert!(e.attributions.iter().all(|a| a.weight.abs() < 1e-12));
        assert!((e.intercept_or_baseline - 2.5).abs() < 1e-12);
        assert_eq!(e.attributions.len(), 3);
    }

    #[test]
    fn deterministic_and_sorted() {
        let s = stats_for(&spread_rows(8));
        let f = |x: &[f64]| x[0] - 2.0 * x[3] + x[5] * x[6] + 0.1 * x[7];
        let inst = [0.2, 0.4, 0.1, 0.9, 0.3, 0.5, 0.6, 0.8];
        let cfg = LimeConfig {
            seed: 9,
            ..LimeConfig::default()
        };
        let a = explain_lime(f, &inst, &s, &cfg).unwrap();
        let b = explain_lime(f, &inst, &s, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.attributions.len(), 5);
        a.validate(Some(5)).unwrap();
        assert_eq!(a.attributions[0].feature_name, "f3");
        assert!(a.attributions[0].weight < 0.0);
    }

    #[test]
    fn singular_fit_falls_back() {
        // duplicated column makes the unpenalized normal matrix singular
        let samples: Vec<Vec<f64>> = (0..10).map(|i| vec![f64::from(i), f64::from(i)]).collect();
        let targets: Vec<f64> = samples.iter().map(|r| r[0]).collect();
        let w = vec![1.0; 10];
        let fit = fit_weighted_ridge(&samples, &targets, &w, &[0, 1], 0.0).unwrap();
        assert!(fit.penalty > 0.0);
        assert!((fit.coefficients[0] - fit.coefficients[1]).abs() < 1e-9);
    }

    #[test]
    fn config_validation() {
        let bad = LimeConfig {
            n_samples: 5,
            top_k: 5,
            ..LimeConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = LimeConfig {
            top_k: 0,
            ..LimeConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
