//! Rolling-origin cross-validation, SVR grid search scored by MAPE, and the
//! lag sweep that compares datasets built with different window lengths.

use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::svr::{
    train_svr, HyperParamsRecord, KernelKind, KernelSpec, SolverOptions, SvrError,
    SvrHyperParams, SvrModel,
};
use crate::timeseries::{
    apply_minmax, chrono_split, fit_minmax, make_supervised, ColumnRange, ScalerParams,
    SupervisedDataset, TimeSeriesError, TimeSeriesFrame,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SelectionError {
    #[error("{n_rows} rows cannot form {n_splits} folds (need at least n_splits + 1)")]
    TooFewRows { n_rows: usize, n_splits: usize },
    #[error("n_splits must be at least 1")]
    NoSplits,
    #[error("zero true value at index {0}; MAPE undefined")]
    ZeroTruth(usize),
    #[error("length mismatch: {0} true values vs {1} predictions")]
    DimensionMismatch(usize, usize),
    #[error("MAPE of an empty vector")]
    Empty,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error(transparent)]
    Svr(#[from] SvrError),
    #[error(transparent)]
    TimeSeries(#[from] TimeSeriesError),
}

/// Hyperparameter grid. `gammas` only applies to RBF candidates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamGrid {
    pub kernels: Vec<KernelKind>,
    #[serde(rename = "C")]
    pub cs: Vec<f64>,
    pub gammas: Vec<f64>,
    pub epsilons: Vec<f64>,
}

impl Default for ParamGrid {
    /// The study's grid with gamma 0.1 added: its reported winners use
    /// gamma = 0.1, which the published grid does not list.
    fn default() -> Self {
        Self {
            kernels: vec![KernelKind::Linear, KernelKind::Rbf],
            cs: vec![0.1, 1.5, 10.0, 25.0, 50.0],
            gammas: vec![1e-5, 1e-4, 1e-3, 1e-2, 0.1],
            epsilons: vec![0.1, 0.2, 0.3, 0.5],
        }
    }
}

impl ParamGrid {
    /// Exactly the published grid (no gamma 0.1).
    pub fn published() -> Self {
        Self {
            gammas: vec![1e-5, 1e-4, 1e-3, 1e-2],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SelectionError> {
        if self.kernels.is_empty() || self.cs.is_empty() || self.epsilons.is_empty() {
            return Err(SelectionError::InvalidGrid("kernels, C and epsilons must be non-empty".into()));
        }
        if self.kernels.contains(&KernelKind::Rbf) && self.gammas.is_empty() {
            return Err(SelectionError::InvalidGrid("rbf kernel needs at least one gamma".into()));
        }
        Ok(())
    }

    /// Candidates in canonical order: kernel, then C, gamma, epsilon ascending.
    pub fn candidates(&self) -> Vec<SvrHyperParams> {
        fn sorted(v: &[f64]) -> Vec<f64> {
            let mut v = v.to_vec();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        }
        let mut kernels = self.kernels.clone();
        kernels.sort();
        kernels.dedup();
        let (cs, gammas, epsilons) = (sorted(&self.cs), sorted(&self.gammas), sorted(&self.epsilons));
        let mut out = Vec::new();
        for kind in kernels {
            for &c in &cs {
                let kernels: Vec<KernelSpec> = match kind {
                    KernelKind::Linear => vec![KernelSpec::Linear],
                    KernelKind::Rbf => gammas.iter().map(|&gamma| KernelSpec::Rbf { gamma }).collect(),
                };
                for kernel in kernels {
                    for &epsilon in &epsilons {
                        out.push(SvrHyperParams { c, epsilon, kernel });
                    }
                }
            }
        }
        out
    }
}

/// One expanding-window fold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CvSplit {
    pub train: Range<usize>,
    pub valid: Range<usize>,
}

/// Expanding-window folds: the data is cut into `n_splits + 1` chunks of
/// `floor(n_rows / (n_splits + 1))` rows, the last chunk absorbing the
/// remainder; fold `i` validates on chunk `i + 1` and trains on everything
/// before it.
pub fn time_series_splits(n_rows: usize, n_splits: usize) -> Result<Vec<CvSplit>, SelectionError> {
    if n_splits == 0 {
        return Err(SelectionError::NoSplits);
    }
    if n_rows < n_splits + 1 {
        return Err(SelectionError::TooFewRows { n_rows, n_splits });
    }
    let chunk = n_rows / (n_splits + 1);
    Ok((0..n_splits)
        .map(|i| {
            let start = chunk * (i + 1);
            let end = if i + 1 == n_splits { n_rows } else { start + chunk };
            CvSplit {
                train: 0..start,
                valid: start..end,
            }
        })
        .collect())
}

/// Mean absolute percentage error, in percent.
pub fn mape(y_true: &[f64], y_pred: &[f64]) -> Result<f64, SelectionError> {
    if y_true.len() != y_pred.len() {
        return Err(SelectionError::DimensionMismatch(y_true.len(), y_pred.len()));
    }
    if y_true.is_empty() {
        return Err(SelectionError::Empty);
    }
    let mut total = 0.0;
    for (i, (t, p)) in y_true.iter().zip(y_pred).enumerate() {
        if *t == 0.0 {
            return Err(SelectionError::ZeroTruth(i));
        }
        total += ((t - p) / t).abs();
    }
    Ok(100.0 * total / y_true.len() as f64)
}

/// Knobs for [`grid_search_with`].
#[derive(Debug, Clone, PartialEq)]
pub struct SearchOptions {
    pub n_splits: usize,
    pub solver: SolverOptions,
    /// When the dataset's target is min-max scaled, its original range;
    /// MAPE is then computed on the original scale.
    pub target_range: Option<ColumnRange>,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            n_splits: 4,
            solver: SolverOptions::default(),
            target_range: None,
        }
    }
}

impl SearchOptions {
    fn score(&self, y_true: &[f64], y_pred: &[f64]) -> Result<f64, SelectionError> {
        match self.target_range {
            None => mape(y_true, y_pred),
            Some(r) => {
                let t: Vec<f64> = y_true.iter().map(|&v| r.unscale(v)).collect();
                let p: Vec<f64> = y_pred.iter().map(|&v| r.unscale(v)).collect();
                mape(&t, &p)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateScore {
    pub hyper: SvrHyperParams,
    /// `+inf` when some fold failed to converge.
    pub mean_cv_mape: f64,
    pub fold_mapes: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearchReport {
    /// Sorted by mean CV MAPE; ties keep canonical candidate order.
    pub candidates: Vec<CandidateScore>,
    pub best: SvrHyperParams,
    pub best_cv_mape: f64,
    /// Best candidate refit on the whole training set. A candidate whose
    /// refit does not converge is passed over for the next one.
    pub best_model: SvrModel,
}

pub fn grid_search(
    train: &SupervisedDataset,
    grid: &ParamGrid,
    n_splits: usize,
) -> Result<GridSearchReport, SelectionError> {
    grid_search_with(
        train,
        grid,
        &SearchOptions {
            n_splits,
            ..SearchOptions::default()
        },
    )
}

pub fn grid_search_with(
    train: &SupervisedDataset,
    grid: &ParamGrid,
    opts: &SearchOptions,
) -> Result<GridSearchReport, SelectionError> {
    grid.validate()?;
    search_candidates(train, &grid.candidates(), opts)
}

/// Scores an explicit candidate list; list order is the tie-break order.
pub fn search_candidates(
    train: &SupervisedDataset,
    candidates: &[SvrHyperParams],
    opts: &SearchOptions,
) -> Result<GridSearchReport, SelectionError> {
    if candidates.is_empty() {
        return Err(SelectionError::InvalidGrid("no candidates".into()));
    }
    let folds = time_series_splits(train.n_rows(), opts.n_splits)?;
    let fold_data: Vec<(SupervisedDataset, SupervisedDataset)> = folds
        .iter()
        .map(|f| (train.slice(f.train.clone()), train.slice(f.valid.clone())))
        .collect();

    let scores = candidates
        .par_iter()
        .map(|hp| score_candidate(hp, &fold_data, opts))
        .collect::<Result<Vec<_>, _>>()?;

    let mut ranked = scores;
    // stable sort keeps canonical order among equal scores
    ranked.sort_by(|a, b| a.mean_cv_mape.total_cmp(&b.mean_cv_mape));
    // the winner is the best-ranked candidate whose full refit converges
    let mut refit_error = None;
    let mut chosen = None;
    for (rank, cand) in ranked.iter().enumerate() {
        match train_svr(train, &cand.hyper, &opts.solver) {
            Ok(model) => {
                chosen = Some((rank, model));
                break;
            }
            Err(e @ SvrError::NoConvergence { .. }) => {
                refit_error.get_or_insert(e);
            }
            Err(e) => return Err(e.into()),
        }
    }
    let Some((rank, best_model)) = chosen else {
        return Err(refit_error.expect("at least one candidate was tried").into());
    };
    let best = ranked[rank].hyper;
    let best_cv_mape = ranked[rank].mean_cv_mape;
    Ok(GridSearchReport {
        candidates: ranked,
        best,
        best_cv_mape,
        best_model,
    })
}

fn score_candidate(
    hp: &SvrHyperParams,
    folds: &[(SupervisedDataset, SupervisedDataset)],
    opts: &SearchOptions,
) -> Result<CandidateScore, SelectionError> {
    let mut fold_mapes = Vec::with_capacity(folds.len());
    for (fit_part, valid) in folds {
        let score = match train_svr(fit_part, hp, &opts.solver) {
            Ok(model) => opts.score(&valid.y, &model.predict_batch(&valid.x)?)?,
            Err(SvrError::NoConvergence { .. }) => f64::INFINITY,
            // a single-row first fold cannot be trained on
            Err(e) => return Err(e.into()),
        };
        fold_mapes.push(score);
    }
    let mean_cv_mape = fold_mapes.iter().sum::<f64>() / fold_mapes.len() as f64;
    Ok(CandidateScore {
        hyper: *hp,
        mean_cv_mape,
        fold_mapes,
    })
}

/// Options for [`lag_sweep`].
#[derive(Debug, Clone, PartialEq)]
pub struct SweepOptions {
    pub train_fraction: f64,
    pub n_splits: usize,
    /// Min-max scale the whole frame before reframing; MAPE is still
    /// reported on the original target scale.
    pub scale: bool,
    pub solver: SolverOptions,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            n_splits: 4,
            scale: true,
            solver: SolverOptions::default(),
        }
    }
}

/// One row of the lag comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LagRow {
    pub lag: usize,
    /// Test-set MAPE in percent of the refit best model.
    pub test_mape: f64,
    /// Mean CV MAPE of the selected candidate; `None` if no candidate converged.
    pub cv_mape: Option<f64>,
    pub best_hyperparameters: HyperParamsRecord,
    pub n_train: usize,
    pub n_test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LagSweepReport {
    pub target: String,
    pub rows: Vec<LagRow>,
    /// Lag with the lowest test MAPE (earliest listed wins ties).
    pub best_lag: usize,
}

impl LagSweepReport {
    pub fn best_row(&self) -> &LagRow {
        self.rows
            .iter()
            .find(|r| r.lag == self.best_lag)
            .expect("best lag is one of the rows")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Parses a report and checks that `best_lag` is a minimal row.
    pub fn from_json(text: &str) -> Result<Self, String> {
        let r: Self = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let Some(best) = r.rows.iter().find(|row| row.lag == r.best_lag) else {
            return Err(format!("best_lag {} not among rows", r.best_lag));
        };
        if r.rows.iter().any(|row| row.test_mape < best.test_mape) {
            return Err("best_lag does not have the minimal test MAPE".into());
        }
        SvrHyperParams::try_from(best.best_hyperparameters).map_err(|e| e.to_string())?;
        Ok(r)
    }
}

/// Everything produced by a sweep; `models[i]` belongs to `report.rows[i]`.
#[derive(Debug, Clone)]
pub struct LagSweep {
    pub report: LagSweepReport,
    pub models: Vec<SvrModel>,
    pub scaler: Option<ScalerParams>,
}

impl LagSweep {
    pub fn best_model(&self) -> &SvrModel {
        let idx = self
            .report
            .rows
            .iter()
            .position(|r| r.lag == self.report.best_lag)
            .expect("best lag is one of the rows");
        &self.models[idx]
    }
}

/// For each lag: reframe, split chronologically, grid-search on the training
/// part, and score the refit winner on the test part.
pub fn lag_sweep(
    frame: &TimeSeriesFrame,
    lags: &[usize],
    grid: &ParamGrid,
    opts: &SweepOptions,
) -> Result<LagSweep, SelectionError> {
    if lags.is_empty() {
        return Err(SelectionError::InvalidGrid("no lags requested".into()));
    }
    let (working, scaler) = if opts.scale {
        let params = fit_minmax(frame);
        (apply_minmax(frame, &params)?, Some(params))
    } else {
        (frame.clone(), None)
    };
    let search = SearchOptions {
        n_splits: opts.n_splits,
        solver: opts.solver,
        target_range: scaler.as_ref().and_then(|p| p.get(frame.target())),
    };

    let mut rows = Vec::with_capacity(lags.len());
    let mut models = Vec::with_capacity(lags.len());
    for &lag in lags {
        let ds = make_supervised(&working, lag)?;
        let (train, test) = chrono_split(&ds, opts.train_fraction)?;
        let report = grid_search_with(&train, grid, &search)?;
        let test_mape = search.score(&test.y, &report.best_model.predict_batch(&test.x)?)?;
        rows.push(LagRow {
            lag,
            test_mape,
            cv_mape: report.best_cv_mape.is_finite().then_some(report.best_cv_mape),
            best_hyperparameters: report.best.into(),
            n_train: train.n_rows(),
            n_test: test.n_rows(),
        });
        models.push(report.best_model);
    }

    let best_lag = rows
        .iter()
        .fold(None::<&LagRow>, |best, r| match best {
            Some(b) if b.test_mape <= r.test_mape => Some(b),
            _ => Some(r),
        })
        .map(|r| r.lag)
        .expect("at least one lag");
    Ok(LagSweep {
        report: LagSweepReport {
            target: frame.target().to_owned(),
            rows,
            best_lag,
        },
        models,
        scaler,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_rows_four_splits() {
        let folds = time_series_splits(10, 4).unwrap();
        let expect = [(0..2, 2..4), (0..4, 4..6), (0..6, 6..8), (0..8, 8..10)];
        assert_eq!(folds.len(), 4);
        for (f, (t, v)) in folds.iter().zip(expect) {
            assert_eq!(f.train, t);
            assert_eq!(f.valid, v);
        }
    }

    #[test]
    fn last_fold_absorbs_remainder() {
        let folds = time_series_splits(13, 3).unwrap();
        assert_eq!(folds.last().unwrap().valid, 9..13);
        assert_eq!(folds[0].train, 0..3);
    }

    #[test]
    fn too_few_rows_for_splits() {
        assert_eq!(
            time_series_splits(4, 4),
            Err(SelectionError::TooFewRows {
                n_rows: 4,
                n_splits: 4
            })
        );
        assert_eq!(time_series_splits(4, 0), Err(SelectionError::NoSplits));
    }

    #[test]
    fn mape_examples() {
        assert_eq!(mape(&[100.0], &[90.0]).unwrap(), 10.0);
        assert_eq!(mape(&[3.0, 4.0], &[3.0, 4.0]).unwrap(), 0.0);
        assert!((mape(&[100.0, 200.0], &[110.0, 180.0]).unwrap() - 10.0).abs() < 1e-12);
        assert_eq!(mape(&[1.0, 0.0], &[1.0, 1.0]), Err(SelectionError::ZeroTruth(1)));
        assert_eq!(mape(&[1.0], &[1.0, 2.0]), Err(SelectionError::DimensionMismatch(1, 2)));
        assert_eq!(mape(&[], &[]), Err(SelectionError::Empty));
    }

    #[test]
    fn published_grid_has_100_candidates() {
        assert_eq!(ParamGrid::published().candidates().len(), 1 * 5 * 4 * 4 + 1 * 5 * 4);
        assert_eq!(ParamGrid::default().candidates().len(), 5 * 5 * 4 + 5 * 4);
    }

    #[test]
    fn canonical_order() {
        let grid = ParamGrid {
            kernels: vec![KernelKind::Rbf, KernelKind::Linear],
            cs: vec![10.0, 1.0],
            gammas: vec![0.5, 0.1],
            epsilons: vec![0.2, 0.1],
        };
        let c = grid.candidates();
        assert_eq!(c.len(), 2 * 2 + 2 * 2 * 2);
        assert_eq!(c[0].kernel, KernelSpec::Linear);
        assert_eq!((c[0].c, c[0].epsilon), (1.0, 0.1));
        assert_eq!((c[1].c, c[1].epsilon), (1.0, 0.2));
        assert_eq!(c[4].kernel, KernelSpec::Rbf { gamma: 0.1 });
        assert_eq!((c[4].c, c[4].epsilon), (1.0, 0.1));
        assert_eq!(c.last().unwrap().kernel, KernelSpec::Rbf { gamma: 0.5 });
    }

    #[test]
    fn empty_grid_rejected() {
        let grid = ParamGrid {
            kernels: vec![KernelKind::Rbf],
            gammas: vec![],
            ..ParamGrid::default()
        };
        assert!(matches!(grid.validate(), Err(SelectionError::InvalidGrid(_))));
    }

    #[test]
    fn grid_json_uses_capital_c() {
        let text = r#"{"kernels":["linear","rbf"],"C":[1.5],"gammas":[0.1],"epsilons":[0.1]}"#;
        let g: ParamGrid = serde_json::from_str(text).unwrap();
        assert_eq!(g.candidates().len(), 2);
    }
}
