//! Monthly multivariate time series and their supervised reframing.
//!
//! A [`TimeSeriesFrame`] is a regular monthly series with one designated
//! target column. [`make_supervised`] turns it into a one-step-ahead
//! regression problem with the sliding window method: every column at lags
//! `1..=n`, plus the non-target columns at the current month. The target at
//! the current month is the label and never a feature.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Datelike, FixedOffset, NaiveDate, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Errors raised while building or transforming frames and datasets.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum TimeSeriesError {
    #[error("line {line}: invalid period `{value}` (expected YYYY-MM or YYYY-MM-DD)")]
    InvalidPeriod { line: usize, value: String },
    #[error("missing period {missing} (series must be consecutive months)")]
    MissingPeriod { missing: Period },
    #[error("line {line}: duplicate period {period}")]
    DuplicatePeriod { line: usize, period: Period },
    #[error("line {line}, column `{column}`: non-numeric cell `{value}`")]
    NonNumericCell {
        line: usize,
        column: String,
        value: String,
    },
    #[error("target column `{0}` not found")]
    UnknownTarget(String),
    #[error("column `{0}` not covered by scaler parameters")]
    UnknownColumn(String),
    #[error("duplicate column name `{0}`")]
    DuplicateColumn(String),
    #[error("malformed csv: {0}")]
    Csv(String),
    #[error("frame has no periods")]
    EmptyFrame,
    #[error("column `{column}` has {got} values for {expected} periods")]
    RaggedColumn {
        column: String,
        expected: usize,
        got: usize,
    },
    #[error("no events to aggregate")]
    EmptyInput,
    #[error("mean undefined for column `{column}` in {period}: no events")]
    UndefinedMean { column: String, period: Period },
    #[error("lag {lag} must be in 1..{periods}")]
    LagTooLarge { lag: usize, periods: usize },
    #[error("train fraction {0} must lie strictly between 0 and 1")]
    InvalidFraction(f64),
    #[error("split of {rows} rows at fraction {fraction} leaves one side empty")]
    EmptySplit { rows: usize, fraction: f64 },
    #[error("feature name `{0}` is not of the form `<column> (t-<k>)`")]
    BadFeatureName(String),
}

/// A calendar month.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Period {
    year: i32,
    month: u32,
}

impl Period {
    pub fn new(year: i32, month: u32) -> Option<Self> {
        (1..=12).contains(&month).then_some(Self { year, month })
    }

    pub fn year(self) -> i32 {
        self.year
    }

    pub fn month(self) -> u32 {
        self.month
    }

    fn ordinal(self) -> i64 {
        i64::from(self.year) * 12 + i64::from(self.month) - 1
    }

    fn from_ordinal(ordinal: i64) -> Self {
        Self {
            year: ordinal.div_euclid(12) as i32,
            month: ordinal.rem_euclid(12) as u32 + 1,
        }
    }

    /// The period `months` months later (negative values go back in time).
    pub fn offset(self, months: i64) -> Self {
        Self::from_ordinal(self.ordinal() + months)
    }

    pub fn succ(self) -> Self {
        self.offset(1)
    }

    /// Signed number of months from `self` to `later`.
    pub fn months_until(self, later: Period) -> i64 {
        later.ordinal() - self.ordinal()
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for Period {
    type Err = ();

    /// Accepts `YYYY-MM` or a full ISO date `YYYY-MM-DD` (the day is dropped).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Ok(date) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
            return Ok(Self {
                year: date.year(),
                month: date.month(),
            });
        }
        let (y, m) = s.split_once('-').ok_or(())?;
        if y.len() != 4 || m.len() != 2 {
            return Err(());
        }
        let year = y.parse().map_err(|_| ())?;
        let month = m.parse().map_err(|_| ())?;
        Self::new(year, month).ok_or(())
    }
}

impl Serialize for Period {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Period {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse()
            .map_err(|_| serde::de::Error::custom(format!("invalid period `{s}`")))
    }
}

/// One named column of a frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub values: Vec<f64>,
}

/// A regular monthly multivariate series.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesFrame {
    periods: Vec<Period>,
    columns: Vec<Column>,
    target: String,
}

impl TimeSeriesFrame {
    /// Builds a frame, checking regularity, column shape and target membership.
    pub fn new(
        periods: Vec<Period>,
        columns: Vec<Column>,
        target: impl Into<String>,
    ) -> Result<Self, TimeSeriesError> {
        let target = target.into();
        if periods.is_empty() {
            return Err(TimeSeriesError::EmptyFrame);
        }
        for pair in periods.windows(2) {
            if pair[1] == pair[0] {
                return Err(TimeSeriesError::DuplicatePeriod {
                    line: 0,
                    period: pair[1],
                });
            }
            if pair[1] != pair[0].succ() {
                return Err(TimeSeriesError::MissingPeriod {
                    missing: pair[0].succ(),
                });
            }
        }
        let mut seen = HashSet::new();
        for col in &columns {
            if !seen.insert(col.name.as_str()) {
                return Err(TimeSeriesError::DuplicateColumn(col.name.clone()));
            }
            if col.values.len() != periods.len() {
                return Err(TimeSeriesError::RaggedColumn {
                    column: col.name.clone(),
                    expected: periods.len(),
                    got: col.values.len(),
                });
            }
        }
        if !seen.contains(target.as_str()) {
            return Err(TimeSeriesError::UnknownTarget(target));
        }
        Ok(Self {
            periods,
            columns,
            target,
        })
    }

    pub fn periods(&self) -> &[Period] {
        &self.periods
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn target(&self) -> &str {
        &self.target
    }

    pub fn len(&self) -> usize {
        self.periods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.periods.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn target_values(&self) -> &[f64] {
        // the constructor guarantees membership
        &self.column(&self.target).expect("target column").values
    }

    /// Same periods and columns with a different target.
    pub fn with_target(&self, target: &str) -> Result<Self, TimeSeriesError> {
        Self::new(self.periods.clone(), self.columns.clone(), target)
    }

    /// Renders the frame as CSV with a leading `period` column.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("period");
        for col in &self.columns {
            out.push(',');
            out.push_str(&col.name);
        }
        out.push('\n');
        for (row, period) in self.periods.iter().enumerate() {
            out.push_str(&period.to_string());
            for col in &self.columns {
                out.push(',');
                out.push_str(&col.values[row].to_string());
            }
            out.push('\n');
        }
        out
    }
}

/// Parses a CSV whose first column holds periods and whose remaining columns
/// are numeric. Rows may arrive in any order; the result is sorted.
pub fn load_frame(csv_text: &str, target: &str) -> Result<TimeSeriesFrame, TimeSeriesError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(csv_text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| TimeSeriesError::Csv(e.to_string()))?
        .clone();
    if headers.len() < 2 {
        return Err(TimeSeriesError::Csv(
            "need a period column and at least one value column".into(),
        ));
    }
    let names: Vec<String> = headers.iter().skip(1).map(str::to_owned).collect();
    if !names.iter().any(|n| n == target) {
        return Err(TimeSeriesError::UnknownTarget(target.to_owned()));
    }

    let mut rows: BTreeMap<Period, Vec<f64>> = BTreeMap::new();
    for (idx, record) in reader.records().enumerate() {
        // header is line 1
        let line = idx + 2;
        let record = record.map_err(|e| TimeSeriesError::Csv(format!("line {line}: {e}")))?;
        let raw_period = record.get(0).unwrap_or_default();
        let period: Period = raw_period
            .parse()
            .map_err(|_| TimeSeriesError::InvalidPeriod {
                line,
                value: raw_period.to_owned(),
            })?;
        let mut values = Vec::with_capacity(names.len());
        for (col, name) in names.iter().enumerate() {
            let cell = record.get(col + 1).unwrap_or_default();
            let value: f64 = cell
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| TimeSeriesError::NonNumericCell {
                    line,
                    column: name.clone(),
                    value: cell.to_owned(),
                })?;
            values.push(value);
        }
        if rows.insert(period, values).is_some() {
            return Err(TimeSeriesError::DuplicatePeriod { line, period });
        }
    }

    let periods: Vec<Period> = rows.keys().copied().collect();
    let columns = names
        .iter()
        .enumerate()
        .map(|(c, name)| Column {
            name: name.clone(),
            values: rows.values().map(|r| r[c]).collect(),
        })
        .collect();
    TimeSeriesFrame::new(periods, columns, target)
}

/// How events falling into the same month are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reducer {
    Sum,
    Count,
    Mean,
}

/// A single timestamped observation of one column.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub timestamp: DateTime<Utc>,
    pub column: String,
    pub value: f64,
}

impl Event {
    /// Parses an RFC 3339 timestamp.
    pub fn parse(timestamp: &str, column: &str, value: f64) -> Result<Self, chrono::ParseError> {
        Ok(Self {
            timestamp: DateTime::parse_from_rfc3339(timestamp)?.with_timezone(&Utc),
            column: column.to_owned(),
            value,
        })
    }
}

/// Default shift applied to event timestamps before bucketing (UTC+2).
pub const DEFAULT_UTC_OFFSET_SECS: i32 = 2 * 3600;

/// Buckets events into calendar months (in the zone `utc_offset_secs` east of
/// UTC) and reduces each bucket. Columns come out sorted by name. Months
/// without events are zero for `sum` and `count`; for `mean` they are an error.
pub fn aggregate_monthly(
    events: &[Event],
    reducer: Reducer,
    target: &str,
    utc_offset_secs: i32,
) -> Result<TimeSeriesFrame, TimeSeriesError> {
    if events.is_empty() {
        return Err(TimeSeriesError::EmptyInput);
    }
    let zone = FixedOffset::east_opt(utc_offset_secs).expect("utc offset within ±24h");
    let month_of = |ts: &DateTime<Utc>| {
        let local = ts.with_timezone(&zone);
        Period {
            year: local.year(),
            month: local.month(),
        }
    };

    // column -> period -> (sum, count)
    let mut buckets: BTreeMap<&str, BTreeMap<Period, (f64, usize)>> = BTreeMap::new();
    let mut first = Period::from_ordinal(i64::MAX / 24);
    let mut last = Period::from_ordinal(i64::MIN / 24);
    for ev in events {
        let p = month_of(&ev.timestamp);
        first = first.min(p);
        last = last.max(p);
        let slot = buckets
            .entry(ev.column.as_str())
            .or_default()
            .entry(p)
            .or_insert((0.0, 0));
        slot.0 += ev.value;
        slot.1 += 1;
    }

    let n = first.months_until(last) as usize + 1;
    let periods: Vec<Period> = (0..n).map(|i| first.offset(i as i64)).collect();
    let mut columns = Vec::with_capacity(buckets.len());
    for (name, by_month) in &buckets {
        let mut values = Vec::with_capacity(n);
        for &p in &periods {
            let (sum, count) = by_month.get(&p).copied().unwrap_or((0.0, 0));
            let v = match reducer {
                Reducer::Sum => sum,
                Reducer::Count => count as f64,
                Reducer::Mean if count == 0 => {
                    return Err(TimeSeriesError::UndefinedMean {
                        column: (*name).to_owned(),
                        period: p,
                    })
                }
                Reducer::Mean => sum / count as f64,
            };
            values.push(v);
        }
        columns.push(Column {
            name: (*name).to_owned(),
            values,
        });
    }
    TimeSeriesFrame::new(periods, columns, target)
}

/// Observed range of one column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnRange {
    pub min: f64,
    pub max: f64,
}

impl ColumnRange {
    pub fn scale(&self, v: f64) -> f64 {
        if self.max > self.min {
            (v - self.min) / (self.max - self.min)
        } else {
            0.0
        }
    }

    /// Inverse of [`scale`](Self::scale). Constant columns map back to `min`.
    pub fn unscale(&self, v: f64) -> f64 {
        if self.max > self.min {
            self.min + v * (self.max - self.min)
        } else {
            self.min
        }
    }
}

/// Per-column min-max scaling parameters, in frame column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub columns: Vec<(String, ColumnRange)>,
}

impl ScalerParams {
    pub fn get(&self, column: &str) -> Option<ColumnRange> {
        self.columns
            .iter()
            .find(|(name, _)| name == column)
            .map(|(_, r)| *r)
    }
}

pub fn fit_minmax(frame: &TimeSeriesFrame) -> ScalerParams {
    let columns = frame
        .columns
        .iter()
        .map(|c| {
            let min = c.values.iter().copied().fold(f64::INFINITY, f64::min);
            let max = c.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (c.name.clone(), ColumnRange { min, max })
        })
        .collect();
    ScalerParams { columns }
}

fn map_columns(
    frame: &TimeSeriesFrame,
    params: &ScalerParams,
    f: impl Fn(&ColumnRange, f64) -> f64,
) -> Result<TimeSeriesFrame, TimeSeriesError> {
    let columns = frame
        .columns
        .iter()
        .map(|c| {
            let range = params
                .get(&c.name)
                .ok_or_else(|| TimeSeriesError::UnknownColumn(c.name.clone()))?;
            Ok(Column {
                name: c.name.clone(),
                values: c.values.iter().map(|&v| f(&range, v)).collect(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TimeSeriesFrame {
        periods: frame.periods.clone(),
        columns,
        target: frame.target.clone(),
    })
}

/// Maps every column to `(v - min) / (max - min)`; constant columns become 0.
pub fn apply_minmax(
    frame: &TimeSeriesFrame,
    params: &ScalerParams,
) -> Result<TimeSeriesFrame, TimeSeriesError> {
    map_columns(frame, params, ColumnRange::scale)
}

pub fn invert_minmax(
    frame: &TimeSeriesFrame,
    params: &ScalerParams,
) -> Result<TimeSeriesFrame, TimeSeriesError> {
    map_columns(frame, params, ColumnRange::unscale)
}

/// Feature name for `column` at lag `k`; the current month carries no tag.
pub fn feature_name(column: &str, k: usize) -> String {
    if k == 0 {
        column.to_owned()
    } else {
        format!("{column} (t-{k})")
    }
}

/// Splits a feature name into its source column and lag.
pub fn parse_feature_name(name: &str) -> (&str, usize) {
    if let Some(stripped) = name.strip_suffix(')') {
        if let Some((column, lag)) = stripped.rsplit_once(" (t-") {
            if let Ok(k) = lag.parse() {
                return (column, k);
            }
        }
    }
    (name, 0)
}

/// A lag-expanded regression dataset. Rows are in chronological order.
#[derive(Debug, Clone, PartialEq)]
pub struct SupervisedDataset {
    pub feature_names: Vec<String>,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub row_periods: Vec<Period>,
    pub lag: usize,
    pub target: String,
}

impl SupervisedDataset {
    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn row_of(&self, period: Period) -> Option<usize> {
        self.row_periods.iter().position(|&p| p == period)
    }

    /// Rows `range` as a new dataset.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            feature_names: self.feature_names.clone(),
            x: self.x[range.clone()].to_vec(),
            y: self.y[range.clone()].to_vec(),
            row_periods: self.row_periods[range].to_vec(),
            lag: self.lag,
            target: self.target.clone(),
        }
    }

    /// CSV with `period`, the features in canonical order, then `target`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("period");
        for name in &self.feature_names {
            out.push(',');
            out.push_str(&csv_field(name));
        }
        out.push_str(",target\n");
        for (i, period) in self.row_periods.iter().enumerate() {
            out.push_str(&period.to_string());
            for v in &self.x[i] {
                out.push(',');
                out.push_str(&v.to_string());
            }
            out.push(',');
            out.push_str(&self.y[i].to_string());
            out.push('\n');
        }
        out
    }

    /// Reads back a CSV written by [`to_csv`](Self::to_csv). The lag is the
    /// largest tag among the feature names; the target name is recovered from
    /// the lag-1 block when the target column is not named explicitly.
    pub fn from_csv(csv_text: &str, target: &str) -> Result<Self, TimeSeriesError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(csv_text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| TimeSeriesError::Csv(e.to_string()))?
            .clone();
        let n = headers.len();
        if n < 3 || headers.get(n - 1) != Some("target") {
            return Err(TimeSeriesError::Csv(
                "expected `period`, feature columns, then `target`".into(),
            ));
        }
        let feature_names: Vec<String> = headers.iter().skip(1).take(n - 2).map(str::to_owned).collect();
        let lag = feature_names
            .iter()
            .map(|f| parse_feature_name(f).1)
            .max()
            .unwrap_or(0);
        if lag == 0 {
            return Err(TimeSeriesError::BadFeatureName(feature_names[0].clone()));
        }

        let mut x = Vec::new();
        let mut y = Vec::new();
        let mut row_periods: Vec<Period> = Vec::new();
        for (idx, record) in reader.records().enumerate() {
            let line = idx + 2;
            let record = record.map_err(|e| TimeSeriesError::Csv(format!("line {line}: {e}")))?;
            let raw = record.get(0).unwrap_or_default();
            let period: Period = raw.parse().map_err(|_| TimeSeriesError::InvalidPeriod {
                line,
                value: raw.to_owned(),
            })?;
            if let Some(&prev) = row_periods.last() {
                if period == prev {
                    return Err(TimeSeriesError::DuplicatePeriod { line, period });
                }
                if period != prev.succ() {
                    return Err(TimeSeriesError::MissingPeriod {
                        missing: prev.succ(),
                    });
                }
            }
            let mut row = Vec::with_capacity(n - 1);
            for c in 1..n {
                let cell = record.get(c).unwrap_or_default();
                let v = cell
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| TimeSeriesError::NonNumericCell {
                        line,
                        column: headers.get(c).unwrap_or_default().to_owned(),
                        value: cell.to_owned(),
                    })?;
                row.push(v);
            }
            y.push(row.pop().expect("target cell"));
            x.push(row);
            row_periods.push(period);
        }
        Ok(Self {
            feature_names,
            x,
            y,
            row_periods,
            lag,
            target: target.to_owned(),
        })
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

/// Sliding-window reframing for one-step-ahead forecasting.
///
/// Layout: the lag-0 block (non-target columns) comes first, then lag 1 up to
/// `lag` with every column; each block follows frame column order.
pub fn make_supervised(
    frame: &TimeSeriesFrame,
    lag: usize,
) -> Result<SupervisedDataset, TimeSeriesError> {
    let periods = frame.len();
    if lag == 0 || lag >= periods {
        return Err(TimeSeriesError::LagTooLarge { lag, periods });
    }

    // (column index, lag) per feature, in canonical order
    let mut layout = Vec::new();
    for k in 0..=lag {
        for (c, col) in frame.columns.iter().enumerate() {
            if k == 0 && col.name == frame.target {
                continue;
            }
            layout.push((c, k));
        }
    }
    let feature_names = layout
        .iter()
        .map(|&(c, k)| feature_name(&frame.columns[c].name, k))
        .collect();

    let target = frame.target_values();
    let mut x = Vec::with_capacity(periods - lag);
    let mut y = Vec::with_capacity(periods - lag);
    for t in lag..periods {
        x.push(
            layout
                .iter()
                .map(|&(c, k)| frame.columns[c].values[t - k])
                .collect(),
        );
        y.push(target[t]);
    }
    Ok(SupervisedDataset {
        feature_names,
        x,
        y,
        row_periods: frame.periods[lag..].to_vec(),
        lag,
        target: frame.target.clone(),
    })
}

/// Chronological split: the first `floor(fraction * n)` rows train, the rest test.
pub fn chrono_split(
    ds: &SupervisedDataset,
    train_fraction: f64,
) -> Result<(SupervisedDataset, SupervisedDataset), TimeSeriesError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(TimeSeriesError::InvalidFraction(train_fraction));
    }
    let n = ds.n_rows();
    let cut = (train_fraction * n as f64).floor() as usize;
    if cut == 0 || cut >= n {
        return Err(TimeSeriesError::EmptySplit {
            rows: n,
            fraction: train_fraction,
        });
    }
    Ok((ds.slice(0..cut), ds.slice(cut..n)))
}
