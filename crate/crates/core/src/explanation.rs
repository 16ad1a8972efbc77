//! Ranked per-feature attributions for one prediction, shared by both
//! explainers.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::timeseries::Period;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Lime,
    Shap,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Lime => "lime",
            Method::Shap => "shap",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureAttribution {
    #[serde(rename = "feature")]
    pub feature_name: String,
    pub weight: f64,
    /// Cut-off condition on the instance value; empty for Shapley output.
    pub condition: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Explanation {
    pub method: Method,
    #[serde(rename = "period")]
    pub instance_period: Option<Period>,
    pub prediction: f64,
    #[serde(rename = "baseline")]
    pub intercept_or_baseline: f64,
    pub attributions: Vec<FeatureAttribution>,
}

#[derive(Debug, Error, PartialEq)]
pub enum ExplanationError {
    #[error("explanation json: {0}")]
    Json(String),
    #[error("attribution `{0}` has a non-finite weight")]
    NonFinite(String),
    #[error("attributions are not sorted by |weight| descending at `{0}`")]
    Unsorted(String),
    #[error("{got} attributions exceed top_k = {top_k}")]
    TooMany { got: usize, top_k: usize },
}

/// Ordering used for attribution lists: larger `|weight|` first, then name.
pub fn attribution_order(a: &FeatureAttribution, b: &FeatureAttribution) -> Ordering {
    b.weight
        .abs()
        .total_cmp(&a.weight.abs())
        .then_with(|| a.feature_name.cmp(&b.feature_name))
}

/// Sorts attributions and keeps the first `top_k`.
pub fn rank_attributions(
    mut attributions: Vec<FeatureAttribution>,
    top_k: usize,
) -> Vec<FeatureAttribution> {
    attributions.sort_by(attribution_order);
    attributions.truncate(top_k);
    attributions
}

impl Explanation {
    pub fn with_period(mut self, period: Option<Period>) -> Self {
        self.instance_period = period;
        self
    }

    /// Checks the invariants a consumer may rely on.
    pub fn validate(&self, top_k: Option<usize>) -> Result<(), ExplanationError> {
        if let Some(top_k) = top_k {
            if self.attributions.len() > top_k {
                return Err(ExplanationError::TooMany {
                    got: self.attributions.len(),
                    top_k,
                });
            }
        }
        if let Some(a) = self.attributions.iter().find(|a| !a.weight.is_finite()) {
            return Err(ExplanationError::NonFinite(a.feature_name.clone()));
        }
        for pair in self.attributions.windows(2) {
            if attribution_order(&pair[0], &pair[1]) != Ordering::Less {
                return Err(ExplanationError::Unsorted(pair[1].feature_name.clone()));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("explanation serializes")
    }

    /// Parses and validates an explanation document.
    pub fn from_json(text: &str) -> Result<Self, ExplanationError> {
        let e: Self = serde_json::from_str(text).map_err(|e| ExplanationError::Json(e.to_string()))?;
        e.validate(None)?;
        Ok(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn attr(name: &str, weight: f64) -> FeatureAttribution {
        FeatureAttribution {
            feature_name: name.into(),
            weight,
            condition: String::new(),
        }
    }

    #[test]
    fn ranking_uses_magnitude_then_name() {
        let ranked = rank_attributions(
            vec![attr("b", 0.0), attr("c", 3.0), attr("a", 0.0), attr("d", -5.0)],
            3,
        );
        let names: Vec<_> = ranked.iter().map(|a| a.feature_name.as_str()).collect();
        assert_eq!(names, ["d", "c", "a"]);
    }

    #[test]
    fn json_schema() {
        let e = Explanation {
            method: Method::Lime,
            instance_period: "2019-09".parse().ok(),
            prediction: 0.5,
            intercept_or_baseline: 0.25,
            attributions: vec![FeatureAttribution {
                feature_name: "calls (t-1)".into(),
                weight: -0.125,
                condition: "calls (t-1) <= 0.68".into(),
            }],
        };
        let text = e.to_json();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["method"], "lime");
        assert_eq!(v["period"], "2019-09");
        assert_eq!(v["baseline"], 0.25);
        assert_eq!(v["attributions"][0]["feature"], "calls (t-1)");
        assert_eq!(Explanation::from_json(&text).unwrap(), e);
    }

    #[test]
    fn validate_rejects_unsorted() {
        let e = Explanation {
            method: Method::Shap,
            instance_period: None,
            prediction: 0.0,
            intercept_or_baseline: 0.0,
            attributions: vec![attr("a", 1.0), attr("b", 2.0)],
        };
        assert_eq!(e.validate(None), Err(ExplanationError::Unsorted("b".into())));
        assert!(matches!(e.validate(Some(1)), Err(ExplanationError::TooMany { .. })));
    }
}
