//! Lagged SVR forecasting for monthly multivariate series, with two
//! model-agnostic local explainers and the statistics used to compare them
//! in a human evaluation study.
//!
//! The pipeline: [`timeseries`] reframes a frame into a supervised dataset,
//! [`model_selection`] grid-searches an epsilon-SVR ([`svr`]) with rolling
//! time-series cross-validation across several lags, and [`lime`] and
//! [`shap`] explain single predictions as ranked [`explanation::Explanation`]s.
//! [`evalstats`] holds the Welch and Spearman machinery for survey responses.

pub mod evalstats;
pub mod explanation;
pub mod lime;
pub mod model_selection;
pub mod shap;
pub mod svr;
pub mod synth;
pub mod timeseries;
