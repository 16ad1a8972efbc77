//! Subcommand bodies. Each reads its inputs, delegates to the core library,
//! checks its JSON output against the matching schema and returns the bytes
//! to write.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use xaits_core::evalstats::{
    demographic_correlation, load_responses, render_summary_table, render_welch_table, summarize,
    welch_t_test, Demographic, Group, GroupStats, ResponseSummary, ResponseTable, SpearmanResult,
    WelchResult,
};
use xaits_core::explanation::{rank_attributions, Explanation};
use xaits_core::lime::{compute_train_stats, explain_lime, quartile_condition, LimeConfig, TrainStats};
use xaits_core::model_selection::{lag_sweep, LagSweepReport, ParamGrid, SweepOptions};
use xaits_core::shap::{default_background, sampled_shapley, summarize_instance, ShapConfig};
use xaits_core::svr::SvrModel;
use xaits_core::synth::{synth, GroundTruth};
use xaits_core::timeseries::{
    apply_minmax, chrono_split, fit_minmax, load_frame, make_supervised, parse_feature_name,
    ColumnRange, Period, ScalerParams, SupervisedDataset, TimeSeriesFrame,
};

use crate::config::{read_to_string, require_files, Explainer, Format, RunConfig};
use crate::error::{CliError, Result};
use crate::render;

/// Target column name used in supervised dataset CSVs.
const DATASET_TARGET: &str = "target";

/// A file to write next to the primary output.
pub struct Artifact {
    pub path: PathBuf,
    pub contents: String,
}

/// Primary output plus side files.
pub struct Output {
    pub primary: String,
    pub artifacts: Vec<Artifact>,
}

impl Output {
    fn only(primary: String) -> Self {
        Self {
            primary,
            artifacts: Vec::new(),
        }
    }
}

/// Serializes `value` and checks that the text parses back to the same value.
fn checked_json<T: Serialize + DeserializeOwned + PartialEq>(value: &T) -> Result<String> {
    let text = serde_json::to_string_pretty(value)?;
    let back: T = serde_json::from_str(&text)?;
    if back != *value {
        return Err(CliError::Validation("output does not round-trip through its schema".into()));
    }
    Ok(text + "\n")
}

fn reject_svg(cfg: &RunConfig, what: &str) -> Result<()> {
    if cfg.format == Format::Svg {
        return Err(CliError::Validation(format!(
            "svg output is only available for `explain`, not `{what}`"
        )));
    }
    Ok(())
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn load_frame_file(path: &Path, target: &str) -> Result<TimeSeriesFrame> {
    let text = read_to_string(path)?;
    load_frame(&text, target).map_err(|e| CliError::from(e).in_file(path))
}

pub fn synth_cmd(cfg: &RunConfig, out: Option<&Path>, truth_path: Option<&Path>) -> Result<Output> {
    reject_svg(cfg, "synth")?;
    let (frame, truth) = synth(cfg.seed, cfg.months, cfg.features)?;
    let truth_path = truth_path
        .map(Path::to_owned)
        .or_else(|| out.map(|o| sibling(o, "truth.json")));
    let mut artifacts = Vec::new();
    if let Some(path) = truth_path {
        let text = truth.to_json() + "\n";
        if GroundTruth::from_json(&text)? != truth {
            return Err(CliError::Validation("ground truth does not round-trip".into()));
        }
        artifacts.push(Artifact { path, contents: text });
    }
    Ok(Output {
        primary: frame.to_csv(),
        artifacts,
    })
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
struct ScalerFile {
    columns: Vec<ScalerColumn>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
struct ScalerColumn {
    name: String,
    min: f64,
    max: f64,
}

fn scaler_json(params: &ScalerParams) -> Result<String> {
    checked_json(&ScalerFile {
        columns: params
            .columns
            .iter()
            .map(|(name, r)| ScalerColumn {
                name: name.clone(),
                min: r.min,
                max: r.max,
            })
            .collect(),
    })
}

fn load_scaler(path: &Path) -> Result<ScalerParams> {
    let text = read_to_string(path)?;
    let file: ScalerFile = serde_json::from_str(&text).map_err(|e| CliError::from(e).in_file(path))?;
    Ok(ScalerParams {
        columns: file
            .columns
            .into_iter()
            .map(|c| (c.name, ColumnRange { min: c.min, max: c.max }))
            .collect(),
    })
}

pub fn prepare_cmd(
    cfg: &RunConfig,
    input: &Path,
    lag: usize,
    scale: bool,
    out: Option<&Path>,
    scaler_path: Option<&Path>,
) -> Result<Output> {
    reject_svg(cfg, "prepare")?;
    require_files([input])?;
    let frame = load_frame_file(input, &cfg.target)?;
    let mut artifacts = Vec::new();
    let working = if scale {
        let params = fit_minmax(&frame);
        let path = scaler_path
            .map(Path::to_owned)
            .or_else(|| out.map(|o| sibling(o, "scaler.json")));
        if let Some(path) = path {
            artifacts.push(Artifact {
                path,
                contents: scaler_json(&params)?,
            });
        }
        apply_minmax(&frame, &params)?
    } else {
        frame
    };
    let ds = make_supervised(&working, lag)?;
    Ok(Output {
        primary: ds.to_csv(),
        artifacts,
    })
}

pub struct TrainPaths<'a> {
    pub input: &'a Path,
    pub model_out: Option<&'a Path>,
    pub dataset_out: Option<&'a Path>,
    pub scaler_out: Option<&'a Path>,
}

pub fn train_cmd(cfg: &RunConfig, paths: TrainPaths<'_>, scale: bool) -> Result<Output> {
    reject_svg(cfg, "train")?;
    require_files([paths.input])?;
    if let Some(g) = &cfg.grid {
        require_files([g.as_path()])?;
    }
    let frame = load_frame_file(paths.input, &cfg.target)?;
    let grid = match &cfg.grid {
        Some(path) => {
            let text = read_to_string(path)?;
            let grid: ParamGrid =
                serde_json::from_str(&text).map_err(|e| CliError::from(e).in_file(path))?;
            grid.validate().map_err(|e| CliError::from(e).in_file(path))?;
            grid
        }
        None => ParamGrid::default(),
    };
    let opts = SweepOptions {
        train_fraction: cfg.train_fraction,
        n_splits: cfg.n_splits,
        scale,
        ..SweepOptions::default()
    };
    let sweep = lag_sweep(&frame, &cfg.lags, &grid, &opts).map_err(|e| CliError::from(e).in_file(paths.input))?;

    let report_json = sweep.report.to_json() + "\n";
    LagSweepReport::from_json(&report_json).map_err(CliError::Validation)?;

    let mut artifacts = Vec::new();
    if let Some(path) = paths.model_out {
        let model = sweep.best_model();
        let text = model.to_json() + "\n";
        let back = SvrModel::from_json(&text)?;
        if back.support_vectors != model.support_vectors || back.dual_coeffs != model.dual_coeffs {
            return Err(CliError::Validation("model does not round-trip".into()));
        }
        artifacts.push(Artifact {
            path: path.to_owned(),
            contents: text,
        });
    }
    if let Some(path) = paths.dataset_out {
        let working = match &sweep.scaler {
            Some(params) => apply_minmax(&frame, params)?,
            None => frame.clone(),
        };
        artifacts.push(Artifact {
            path: path.to_owned(),
            contents: make_supervised(&working, sweep.report.best_lag)?.to_csv(),
        });
    }
    if let (Some(path), Some(params)) = (paths.scaler_out, &sweep.scaler) {
        artifacts.push(Artifact {
            path: path.to_owned(),
            contents: scaler_json(params)?,
        });
    }

    let primary = match cfg.format {
        Format::Table => render::sweep_table(&sweep.report),
        _ => report_json,
    };
    Ok(Output { primary, artifacts })
}

pub struct ExplainPaths<'a> {
    pub model: &'a Path,
    pub dataset: &'a Path,
    pub scaler: Option<&'a Path>,
    pub svg: Option<&'a Path>,
}

/// The column that appears lagged but not at lag 0 is the target.
fn target_column(feature_names: &[String]) -> Option<&str> {
    let lag0: Vec<&str> = feature_names
        .iter()
        .map(|n| parse_feature_name(n))
        .filter(|(_, k)| *k == 0)
        .map(|(c, _)| c)
        .collect();
    feature_names
        .iter()
        .map(|n| parse_feature_name(n))
        .find(|(c, k)| *k == 1 && !lag0.contains(c))
        .map(|(c, _)| c)
}

fn range_of(scaler: &ScalerParams, column: &str) -> Result<ColumnRange> {
    scaler
        .get(column)
        .ok_or_else(|| CliError::Validation(format!("scaler has no column `{column}`")))
}

fn span(r: ColumnRange) -> f64 {
    r.max - r.min
}

/// Rewrites a LIME explanation of a min-max scaled model in original units:
/// the surrogate `y' = b + sum w_j x'_j` becomes an equivalent linear model
/// of the raw features and target.
fn denormalize_lime(
    e: Explanation,
    instance: &[f64],
    stats: &TrainStats,
    scaler: &ScalerParams,
    y_range: ColumnRange,
) -> Result<Explanation> {
    let sy = span(y_range);
    let mut intercept = y_range.min + sy * e.intercept_or_baseline;
    let mut attributions = Vec::with_capacity(e.attributions.len());
    for mut a in e.attributions {
        let j = stats
            .feature_names
            .iter()
            .position(|n| *n == a.feature_name)
            .expect("attribution names a training feature");
        let r = range_of(scaler, parse_feature_name(&a.feature_name).0)?;
        if span(r) > 0.0 {
            let w = sy * a.weight / span(r);
            intercept -= w * r.min;
            a.weight = w;
        } else {
            a.weight *= sy;
        }
        a.condition = quartile_condition(&a.feature_name, instance[j], stats.quartiles[j], |v| r.unscale(v));
        attributions.push(a);
    }
    let k = attributions.len();
    Ok(Explanation {
        prediction: y_range.unscale(e.prediction),
        intercept_or_baseline: intercept,
        attributions: rank_attributions(attributions, k),
        ..e
    })
}

fn denormalize_shap(mut e: Explanation, y_range: ColumnRange) -> Explanation {
    let sy = span(y_range);
    e.prediction = y_range.unscale(e.prediction);
    e.intercept_or_baseline = y_range.unscale(e.intercept_or_baseline);
    for a in &mut e.attributions {
        a.weight *= sy;
    }
    e
}

fn load_dataset(path: &Path) -> Result<SupervisedDataset> {
    let text = read_to_string(path)?;
    SupervisedDataset::from_csv(&text, DATASET_TARGET).map_err(|e| CliError::from(e).in_file(path))
}

pub fn explain_cmd(
    cfg: &RunConfig,
    paths: ExplainPaths<'_>,
    period: &str,
    denormalize: bool,
) -> Result<Output> {
    require_files([paths.model, paths.dataset])?;
    if let Some(s) = paths.scaler {
        require_files([s])?;
    }
    if denormalize && paths.scaler.is_none() {
        return Err(CliError::Validation("--denormalize needs --scaler".into()));
    }
    let period: Period = period
        .parse()
        .map_err(|_| CliError::Validation(format!("`{period}` is not a YYYY-MM period")))?;
    let model_text = read_to_string(paths.model)?;
    let model = SvrModel::from_json(&model_text).map_err(|e| CliError::from(e).in_file(paths.model))?;
    let ds = load_dataset(paths.dataset)?;
    if model.n_features != ds.n_features()
        || (!model.feature_names.is_empty() && model.feature_names != ds.feature_names)
    {
        return Err(CliError::Validation(format!(
            "{}: features do not match the model in {}",
            paths.dataset.display(),
            paths.model.display()
        )));
    }
    let (train, test) = chrono_split(&ds, cfg.train_fraction)?;
    let Some(row) = test.row_of(period) else {
        return Err(CliError::Validation(format!(
            "period {period} is not in the test split ({} to {})",
            test.row_periods[0],
            test.row_periods[test.n_rows() - 1]
        )));
    };
    let instance = &test.x[row];
    let predict = |x: &[f64]| model.predict(x).unwrap_or(f64::NAN);

    let scaling = match (denormalize, paths.scaler) {
        (true, Some(path)) => {
            let scaler = load_scaler(path)?;
            let target = target_column(&ds.feature_names)
                .ok_or_else(|| CliError::Validation("cannot identify the target column".into()))?;
            let y_range = range_of(&scaler, target).map_err(|e| e.in_file(path))?;
            Some((scaler, y_range))
        }
        _ => None,
    };

    let mut explanations = Vec::new();
    if matches!(cfg.explainer, Explainer::Lime | Explainer::Both) {
        let stats = compute_train_stats(&train)?;
        let lime_cfg = LimeConfig {
            n_samples: cfg.lime_samples,
            top_k: cfg.top_k,
            seed: cfg.seed,
            ..LimeConfig::default()
        };
        let mut e = explain_lime(predict, instance, &stats, &lime_cfg)?.with_period(Some(period));
        if let Some((scaler, y_range)) = &scaling {
            e = denormalize_lime(e, instance, &stats, scaler, *y_range)?;
        }
        explanations.push(e);
    }
    if matches!(cfg.explainer, Explainer::Shap | Explainer::Both) {
        let shap_cfg = ShapConfig {
            n_iterations: cfg.shap_iterations,
            top_k: cfg.top_k,
            seed: cfg.seed,
            ..ShapConfig::new(default_background(&train.x))
        };
        let result = sampled_shapley(predict, instance, &shap_cfg)?;
        let mut e = summarize_instance(&result, &ds.feature_names, cfg.top_k)?.with_period(Some(period));
        if let Some((_, y_range)) = &scaling {
            e = denormalize_shap(e, *y_range);
        }
        explanations.push(e);
    }

    for e in &explanations {
        e.validate(Some(cfg.top_k))?;
    }
    let json = if explanations.len() == 1 {
        let text = explanations[0].to_json() + "\n";
        Explanation::from_json(&text)?;
        text
    } else {
        let text = serde_json::to_string_pretty(&explanations)? + "\n";
        let back: Vec<serde_json::Value> = serde_json::from_str(&text)?;
        for v in back {
            Explanation::from_json(&v.to_string())?;
        }
        text
    };

    let svg = render::explanations_svg(&explanations);
    let mut artifacts = Vec::new();
    if let Some(path) = paths.svg {
        artifacts.push(Artifact {
            path: path.to_owned(),
            contents: svg.clone(),
        });
    }
    let primary = match cfg.format {
        Format::Json => json,
        Format::Svg => svg,
        Format::Table => explanations
            .iter()
            .map(render::explanation_table)
            .collect::<Vec<_>>()
            .join("\n"),
    };
    Ok(Output { primary, artifacts })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WelchComparison {
    pub a: String,
    pub b: String,
    pub result: WelchResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpearmanRow {
    pub group: Group,
    pub result: SpearmanResult,
}

/// JSON document written by `eval`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "test", rename_all = "lowercase", deny_unknown_fields)]
pub enum EvalReport {
    Welch {
        comparisons: Vec<WelchComparison>,
    },
    Spearman {
        demographic: Demographic,
        groups: Vec<SpearmanRow>,
    },
    Summary {
        groups: Vec<ResponseSummary>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum EvalTest {
    Welch,
    Spearman,
    Summary,
}

/// A summary-statistics file: one comparison or a list of them.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum SummaryInput {
    One(SummaryPair),
    Many(Vec<SummaryPair>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SummaryPair {
    a: GroupStats,
    b: GroupStats,
}

pub struct EvalArgs<'a> {
    pub responses: Option<&'a Path>,
    pub summary: Option<&'a Path>,
    pub test: Option<EvalTest>,
    pub groups: Option<&'a [Group]>,
    pub demographic: Demographic,
}

fn find<'t>(tables: &'t [ResponseTable], g: Group) -> Result<&'t ResponseTable> {
    tables
        .iter()
        .find(|t| t.group == g)
        .ok_or_else(|| CliError::Validation(format!("no responses for group {g}")))
}

pub fn eval_cmd(cfg: &RunConfig, args: EvalArgs<'_>) -> Result<Output> {
    reject_svg(cfg, "eval")?;
    let report = match (args.summary, args.responses) {
        (Some(path), None) => {
            require_files([path])?;
            if !matches!(args.test, None | Some(EvalTest::Welch)) {
                return Err(CliError::Validation("--summary only supports the welch test".into()));
            }
            let text = read_to_string(path)?;
            let input: SummaryInput =
                serde_json::from_str(&text).map_err(|e| CliError::Validation(e.to_string()).in_file(path))?;
            let pairs = match input {
                SummaryInput::One(p) => vec![p],
                SummaryInput::Many(v) => v,
            };
            let comparisons = pairs
                .into_iter()
                .map(|p| {
                    let result = WelchResult::from_groups(&p.a, &p.b).map_err(|e| CliError::from(e).in_file(path))?;
                    Ok(WelchComparison {
                        a: p.a.label,
                        b: p.b.label,
                        result,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            EvalReport::Welch { comparisons }
        }
        (None, Some(path)) => {
            require_files([path])?;
            let text = read_to_string(path)?;
            let tables = load_responses(&text, cfg.n_cases).map_err(|e| CliError::from(e).in_file(path))?;
            match args.test.unwrap_or(EvalTest::Summary) {
                EvalTest::Summary => EvalReport::Summary {
                    groups: tables.iter().map(summarize).collect::<std::result::Result<_, _>>()?,
                },
                EvalTest::Welch => {
                    let pairs: Vec<(Group, Group)> = match args.groups {
                        Some([a, b]) => vec![(*a, *b)],
                        Some(_) => {
                            return Err(CliError::Validation("welch needs exactly two --groups".into()))
                        }
                        None => vec![
                            (Group::Lime, Group::NoXai),
                            (Group::Shap, Group::NoXai),
                            (Group::Lime, Group::Shap),
                        ],
                    };
                    let comparisons = pairs
                        .into_iter()
                        .map(|(a, b)| {
                            let result = welch_t_test(&find(&tables, a)?.yes_counts(), &find(&tables, b)?.yes_counts())?;
                            Ok(WelchComparison {
                                a: a.to_string(),
                                b: b.to_string(),
                                result,
                            })
                        })
                        .collect::<Result<Vec<_>>>()?;
                    EvalReport::Welch { comparisons }
                }
                EvalTest::Spearman => {
                    let selected: Vec<Group> = match args.groups {
                        Some(g) => g.to_vec(),
                        None => tables.iter().map(|t| t.group).collect(),
                    };
                    let groups = selected
                        .into_iter()
                        .map(|g| {
                            Ok(SpearmanRow {
                                group: g,
                                result: demographic_correlation(find(&tables, g)?, args.demographic)?,
                            })
                        })
                        .collect::<Result<Vec<_>>>()?;
                    EvalReport::Spearman {
                        demographic: args.demographic,
                        groups,
                    }
                }
            }
        }
        _ => {
            return Err(CliError::Validation(
                "give exactly one of --responses or --summary".into(),
            ))
        }
    };

    let json = checked_json(&report)?;
    let primary = match cfg.format {
        Format::Table => eval_table(&report),
        _ => json,
    };
    Ok(Output::only(primary))
}

fn eval_table(report: &EvalReport) -> String {
    match report {
        EvalReport::Welch { comparisons } => comparisons
            .iter()
            .map(|c| render_welch_table(&c.a, &c.b, &c.result))
            .collect::<Vec<_>>()
            .join("\n"),
        EvalReport::Summary { groups } => render_summary_table(groups),
        EvalReport::Spearman { demographic, groups } => {
            let mut out = format!("{:<6} | {:>8} | {:>8} | {:>3}   ({demographic:?} vs yes count)\n", "group", "rho", "p", "n");
            for r in groups {
                out.push_str(&format!(
                    "{:<6} | {:>8.4} | {:>8.5} | {:>3}\n",
                    r.group.to_string(),
                    r.result.rho,
                    r.result.p_two_tailed,
                    r.result.n
                ));
            }
            out
        }
    }
}
