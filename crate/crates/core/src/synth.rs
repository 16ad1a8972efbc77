//! Synthetic monthly data with a known generating process, standing in for
//! proprietary sales data.
//!
//! [`synth`] produces seasonal activity series `feature1..featureN` and a
//! `sales` target that depends on a few lagged activities. The generating
//! coefficients come back as a [`GroundTruth`] that can be serialized next to
//! the data and evaluated on lag-expanded rows, so explanations can be checked
//! against the true dependence.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::timeseries::{feature_name, Column, Period, TimeSeriesFrame};

/// Name of the generated target column.
pub const TARGET: &str = "sales";

/// Shortest series [`synth`] accepts.
pub const MIN_MONTHS: usize = 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid arguments: {0}")]
    InvalidArgs(String),
    #[error("ground truth needs feature `{0}`, which the dataset lacks")]
    MissingFeature(String),
}

/// One linear term `coefficient * column(t - lag)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaggedTerm {
    pub column: String,
    pub lag: usize,
    pub coefficient: f64,
}

impl LaggedTerm {
    pub fn feature(&self) -> String {
        feature_name(&self.column, self.lag)
    }
}

/// `amplitude * tanh((column(t - lag) - center) / scale)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TanhTerm {
    pub column: String,
    pub lag: usize,
    pub amplitude: f64,
    pub center: f64,
    pub scale: f64,
}

/// The noise-free part of the target process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruth {
    pub seed: u64,
    pub months: usize,
    pub target: String,
    pub intercept: f64,
    pub linear: Vec<LaggedTerm>,
    pub nonlinear: Vec<TanhTerm>,
    pub noise_std: f64,
}

impl GroundTruth {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ground truth serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Features the target depends on, in term order.
    pub fn relevant_features(&self) -> Vec<String> {
        let mut out: Vec<String> = self.linear.iter().map(LaggedTerm::feature).collect();
        for t in &self.nonlinear {
            let name = feature_name(&t.column, t.lag);
            if !out.contains(&name) {
                out.push(name);
            }
        }
        out
    }

    /// Returns the expected target as a function of a lag-expanded row with
    /// the given feature names.
    pub fn predictor(
        &self,
        feature_names: &[String],
    ) -> Result<impl Fn(&[f64]) -> f64 + Clone + Send + Sync, SynthError> {
        let index = |column: &str, lag: usize| {
            let name = feature_name(column, lag);
            feature_names
                .iter()
                .position(|n| *n == name)
                .ok_or(SynthError::MissingFeature(name))
        };
        let linear = self
            .linear
            .iter()
            .map(|t| Ok((index(&t.column, t.lag)?, t.coefficient)))
            .collect::<Result<Vec<_>, SynthError>>()?;
        let nonlinear = self
            .nonlinear
            .iter()
            .map(|t| Ok((index(&t.column, t.lag)?, t.amplitude, t.center, t.scale)))
            .collect::<Result<Vec<_>, SynthError>>()?;
        let intercept = self.intercept;
        Ok(move |row: &[f64]| {
            let mut y = intercept;
            for &(j, c) in &linear {
                y += c * row[j];
            }
            for &(j, a, m, s) in &nonlinear {
                y += a * ((row[j] - m) / s).tanh();
            }
            y
        })
    }
}

fn first_period() -> Period {
    Period::new(2010, 1).expect("valid start period")
}

fn frame_from(
    features: Vec<Vec<f64>>,
    target: Vec<f64>,
    skip: usize,
) -> TimeSeriesFrame {
    let months = target.len() - skip;
    let periods = (0..months).map(|i| first_period().offset(i as i64)).collect();
    let mut columns: Vec<Column> = features
        .into_iter()
        .enumerate()
        .map(|(j, v)| Column {
            name: format!("feature{}", j + 1),
            values: v[skip..].to_vec(),
        })
        .collect();
    columns.push(Column {
        name: TARGET.to_owned(),
        values: target[skip..].to_vec(),
    });
    TimeSeriesFrame::new(periods, columns, TARGET).expect("generated frame is regular")
}

fn check_args(months: usize, n_features: usize, min_features: usize) -> Result<(), SynthError> {
    if months < MIN_MONTHS {
        return Err(SynthError::InvalidArgs(format!(
            "months must be at least {MIN_MONTHS}, got {months}"
        )));
    }
    if n_features < min_features {
        return Err(SynthError::InvalidArgs(format!(
            "need at least {min_features} activity features, got {n_features}"
        )));
    }
    Ok(())
}

/// Seasonal activity features and a sparse lagged target, starting 2010-01.
///
/// The target depends on `feature1 (t-1)`, `feature2 (t-3)`, the current
/// `feature3` (when present) and a saturating effect of `feature1 (t-2)`.
pub fn synth(
    seed: u64,
    months: usize,
    n_features: usize,
) -> Result<(TimeSeriesFrame, GroundTruth), SynthError> {
    check_args(months, n_features, 2)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");

    let mut linear = vec![
        LaggedTerm {
            column: "feature1".into(),
            lag: 1,
            coefficient: 0.6,
        },
        LaggedTerm {
            column: "feature2".into(),
            lag: 3,
            coefficient: 0.9,
        },
    ];
    if n_features >= 3 {
        linear.push(LaggedTerm {
            column: "feature3".into(),
            lag: 0,
            coefficient: 0.4,
        });
    }
    let nonlinear = vec![TanhTerm {
        column: "feature1".into(),
        lag: 2,
        amplitude: 3.0,
        center: 20.0,
        scale: 4.0,
    }];
    let truth = GroundTruth {
        seed,
        months,
        target: TARGET.into(),
        intercept: 10.0,
        linear,
        nonlinear,
        noise_std: 1.0,
    };

    // warm-up months so every lagged term is defined from the first row on
    let warmup = truth
        .linear
        .iter()
        .map(|t| t.lag)
        .chain(truth.nonlinear.iter().map(|t| t.lag))
        .max()
        .unwrap_or(0);
    let total = months + warmup;
    let features: Vec<Vec<f64>> = (0..n_features)
        .map(|j| {
            let level = 20.0 + 5.0 * j as f64;
            let amplitude = 4.0 + j as f64;
            let phase = (j * 5 % 12) as f64;
            (0..total)
                .map(|t| {
                    let season = amplitude * (2.0 * PI * (t as f64 + phase) / 12.0).sin();
                    (level + season + 1.5 * unit.sample(&mut rng)).max(0.0)
                })
                .collect()
        })
        .collect();

    let column = |name: &str| -> usize {
        name.strip_prefix("feature")
            .and_then(|k| k.parse::<usize>().ok())
            .expect("generated term names a feature")
            - 1
    };
    let target: Vec<f64> = (0..total)
        .map(|t| {
            if t < warmup {
                return 0.0;
            }
            let mut y = truth.intercept;
            for term in &truth.linear {
                y += term.coefficient * features[column(&term.column)][t - term.lag];
            }
            for term in &truth.nonlinear {
                let v = features[column(&term.column)][t - term.lag];
                y += term.amplitude * ((v - term.center) / term.scale).tanh();
            }
            (y + truth.noise_std * unit.sample(&mut rng)).max(1.0)
        })
        .collect();

    Ok((frame_from(features, target, warmup), truth))
}

/// A target following `y_t = c + phi * y_{t-1} + noise` next to activity
/// features that are independent noise.
pub fn synth_ar1(
    seed: u64,
    months: usize,
    n_features: usize,
    phi: f64,
) -> Result<TimeSeriesFrame, SynthError> {
    check_args(months, n_features, 0)?;
    if !(phi.abs() < 1.0) {
        return Err(SynthError::InvalidArgs(format!(
            "|phi| must be below 1 for a stationary series, got {phi}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mean = 100.0;
    let warmup = 50;
    let total = months + warmup;
    let mut target = Vec::with_capacity(total);
    let mut y = mean;
    for _ in 0..total {
        y = mean + phi * (y - mean) + 5.0 * unit.sample(&mut rng);
        target.push(y);
    }
    let features = (0..n_features)
        .map(|_| (0..total).map(|_| 50.0 + 10.0 * unit.sample(&mut rng)).collect())
        .collect();
    Ok(frame_from(features, target, warmup))
}
