//! Statistics for human-evaluation responses: per-group summaries, Welch's
//! unequal-variance t-test and Spearman's rank correlation, with two-tailed
//! p-values from the Student t distribution.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use statrs::function::beta::checked_beta_reg;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("response table is empty")]
    EmptyTable,
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("sample variance is zero")]
    ZeroVariance,
    #[error("invalid summary statistics: {0}")]
    InvalidSummary(String),
    #[error("degrees of freedom must be positive and finite, got {0}")]
    InvalidDf(f64),
    #[error("test statistic is NaN")]
    NanStatistic,
    #[error("length mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("input is constant; rank correlation undefined")]
    ConstantInput,
    #[error("line {line}: {message}")]
    BadRecord { line: usize, message: String },
    #[error("malformed csv: {0}")]
    Csv(String),
}

/// Upper tail `P(T > t)` of Student's t with `df` degrees of freedom.
///
/// For `t >= 0` this is `I_{df/(df+t²)}(df/2, 1/2) / 2`; negative `t` uses
/// the symmetry `sf(-t) = 1 - sf(t)`.
pub fn student_t_sf(t: f64, df: f64) -> Result<f64, EvalError> {
    if !(df > 0.0 && df.is_finite()) {
        return Err(EvalError::InvalidDf(df));
    }
    if t.is_nan() {
        return Err(EvalError::NanStatistic);
    }
    let x = if t.is_infinite() { 0.0 } else { df / (df + t * t) };
    let tail = 0.5 * checked_beta_reg(0.5 * df, 0.5, x).map_err(|_| EvalError::InvalidDf(df))?;
    Ok(if t >= 0.0 { tail } else { 1.0 - tail })
}

/// `2 * P(T > |t|)`, clamped to `[0, 1]`.
pub fn two_tailed_p(t: f64, df: f64) -> Result<f64, EvalError> {
    Ok((2.0 * student_t_sf(t.abs(), df)?).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WelchResult {
    pub mean_a: f64,
    pub mean_b: f64,
    /// Sample variances (n - 1 denominator).
    pub var_a: f64,
    pub var_b: f64,
    pub n_a: usize,
    pub n_b: usize,
    pub t_stat: f64,
    /// Welch–Satterthwaite degrees of freedom.
    pub df: f64,
    pub p_two_tailed: f64,
}

fn mean_and_sample_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Welch's two-sample t-test on raw observations.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<WelchResult, EvalError> {
    for v in [a, b] {
        if v.len() < 2 {
            return Err(EvalError::TooFewSamples {
                needed: 2,
                got: v.len(),
            });
        }
    }
    let (mean_a, var_a) = mean_and_sample_var(a);
    let (mean_b, var_b) = mean_and_sample_var(b);
    if var_a == 0.0 || var_b == 0.0 {
        return Err(EvalError::ZeroVariance);
    }
    welch_from_summary(mean_a, var_a, a.len(), mean_b, var_b, b.len())
}

/// Welch's t-test from group means, sample variances and sizes.
pub fn welch_from_summary(
    mean_a: f64,
    var_a: f64,
    n_a: usize,
    mean_b: f64,
    var_b: f64,
    n_b: usize,
) -> Result<WelchResult, EvalError> {
    if n_a < 2 || n_b < 2 {
        return Err(EvalError::InvalidSummary(format!(
            "group sizes must be at least 2 (got {n_a} and {n_b})"
        )));
    }
    if !(var_a >= 0.0 && var_b >= 0.0) || !var_a.is_finite() || !var_b.is_finite() {
        return Err(EvalError::InvalidSummary("variances must be finite and non-negative".into()));
    }
    if var_a == 0.0 && var_b == 0.0 {
        return Err(EvalError::InvalidSummary("both variances are zero".into()));
    }
    if !mean_a.is_finite() || !mean_b.is_finite() {
        return Err(EvalError::InvalidSummary("means must be finite".into()));
    }
    let (na, nb) = (n_a as f64, n_b as f64);
    let (sa, sb) = (var_a / na, var_b / nb);
    let se2 = sa + sb;
    let t_stat = (mean_a - mean_b) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    let p_two_tailed = two_tailed_p(t_stat, df)?;
    Ok(WelchResult {
        mean_a,
        mean_b,
        var_a,
        var_b,
        n_a,
        n_b,
        t_stat,
        df,
        p_two_tailed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpearmanResult {
    pub rho: f64,
    pub p_two_tailed: f64,
    pub n: usize,
}

/// 1-based ranks with ties sharing their average rank.
pub fn mid_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && v[idx[end]] == v[idx[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

/// Spearman's rho (Pearson correlation of mid-ranks) with a t-approximation
/// p-value on `n - 2` degrees of freedom.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<SpearmanResult, EvalError> {
    if x.len() != y.len() {
        return Err(EvalError::DimensionMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 3 {
        return Err(EvalError::TooFewSamples { needed: 3, got: n });
    }
    let rho = pearson(&mid_ranks(x), &mid_ranks(y))
        .ok_or(EvalError::ConstantInput)?
        .clamp(-1.0, 1.0);
    let df = (n - 2) as f64;
    let p_two_tailed = if rho.abs() >= 1.0 {
        0.0
    } else {
        two_tailed_p(rho * (df / (1.0 - rho * rho)).sqrt(), df)?
    };
    Ok(SpearmanResult { rho, p_two_tailed, n })
}

/// Study arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Group {
    #[serde(rename = "LIME")]
    Lime,
    #[serde(rename = "SHAP")]
    Shap,
    #[serde(rename = "noXAI")]
    NoXai,
}

impl std::str::FromStr for Group {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lime" => Ok(Group::Lime),
            "shap" => Ok(Group::Shap),
            "noxai" | "no_xai" | "none" => Ok(Group::NoXai),
            other => Err(format!("unknown group `{other}` (expected LIME, SHAP or noXAI)")),
        }
    }
}

impl std::fmt::Display for Group {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Group::Lime => "LIME",
            Group::Shap => "SHAP",
            Group::NoXai => "noXAI",
        })
    }
}

/// Numeric demographic codes; encodings are the caller's.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Demographics {
    pub age: Option<f64>,
    pub gender: Option<f64>,
    pub education: Option<f64>,
    pub stem: Option<bool>,
    pub xai_knowledge: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Demographic {
    Age,
    Gender,
    Education,
    Stem,
    XaiKnowledge,
}

impl std::str::FromStr for Demographic {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "age" => Demographic::Age,
            "gender" => Demographic::Gender,
            "education" => Demographic::Education,
            "stem" => Demographic::Stem,
            "xai_knowledge" => Demographic::XaiKnowledge,
            other => return Err(format!("unknown demographic `{other}`")),
        })
    }
}

impl Demographics {
    pub fn code(&self, which: Demographic) -> Option<f64> {
        match which {
            Demographic::Age => self.age,
            Demographic::Gender => self.gender,
            Demographic::Education => self.education,
            Demographic::Stem => self.stem.map(|b| if b { 1.0 } else { 0.0 }),
            Demographic::XaiKnowledge => self.xai_knowledge,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Participant {
    pub id: String,
    pub yes_count: u32,
    pub demographics: Demographics,
}

/// Responses of one study arm: how many of `n_cases` predictions each
/// participant reported understanding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseTable {
    pub group: Group,
    pub n_cases: u32,
    pub participants: Vec<Participant>,
}

impl ResponseTable {
    pub fn yes_counts(&self) -> Vec<f64> {
        self.participants.iter().map(|p| f64::from(p.yes_count)).collect()
    }

    pub fn no_counts(&self) -> Vec<f64> {
        self.participants
            .iter()
            .map(|p| f64::from(self.n_cases - p.yes_count))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountSummary {
    pub sum: f64,
    pub mean: f64,
    pub median: f64,
}

impl CountSummary {
    fn of(v: &[f64]) -> Self {
        let mut sorted = v.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
        };
        let sum: f64 = v.iter().sum();
        Self {
            sum,
            mean: sum / n as f64,
            median,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseSummary {
    pub group: Group,
    pub participants: usize,
    pub yes: CountSummary,
    pub no: CountSummary,
}

pub fn summarize(table: &ResponseTable) -> Result<ResponseSummary, EvalError> {
    if table.participants.is_empty() {
        return Err(EvalError::EmptyTable);
    }
    Ok(ResponseSummary {
        group: table.group,
        participants: table.participants.len(),
        yes: CountSummary::of(&table.yes_counts()),
        no: CountSummary::of(&table.no_counts()),
    })
}

/// Parses a response CSV (`participant_id, group, yes_count`, plus optional
/// `age, gender, education, stem, xai_knowledge`) into one table per group.
pub fn load_responses(csv_text: &str, n_cases: u32) -> Result<Vec<ResponseTable>, EvalError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(csv_text.as_bytes());
    let headers = reader.headers().map_err(|e| EvalError::Csv(e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(id_col), Some(group_col), Some(yes_col)) =
        (col("participant_id"), col("group"), col("yes_count"))
    else {
        return Err(EvalError::Csv(
            "header must contain participant_id, group and yes_count".into(),
        ));
    };
    let demo_cols = [
        col("age"),
        col("gender"),
        col("education"),
        col("stem"),
        col("xai_knowledge"),
    ];

    let mut groups: BTreeMap<Group, Vec<Participant>> = BTreeMap::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2;
        let bad = |message: String| EvalError::BadRecord { line, message };
        let record = record.map_err(|e| bad(e.to_string()))?;
        let field = |c: usize| record.get(c).unwrap_or_default();
        let group: Group = field(group_col).parse().map_err(bad)?;
        let yes_count: u32 = field(yes_col)
            .parse()
            .map_err(|_| bad(format!("yes_count `{}` is not a count", field(yes_col))))?;
        if yes_count > n_cases {
            return Err(bad(format!("yes_count {yes_count} exceeds {n_cases} cases")));
        }
        let number = |c: Option<usize>, name: &str| -> Result<Option<f64>, EvalError> {
            match c.map(field).filter(|s| !s.is_empty()) {
                None => Ok(None),
                Some(s) => s
                    .parse::<f64>()
                    .map(Some)
                    .map_err(|_| bad(format!("{name} `{s}` is not numeric"))),
            }
        };
        let stem = match demo_cols[3].map(field).filter(|s| !s.is_empty()) {
            None => None,
            Some(s) => Some(match s.to_ascii_lowercase().as_str() {
                "1" | "true" | "yes" => true,
                "0" | "false" | "no" => false,
                _ => return Err(bad(format!("stem `{s}` is not a boolean"))),
            }),
        };
        let demographics = Demographics {
            age: number(demo_cols[0], "age")?,
            gender: number(demo_cols[1], "gender")?,
            education: number(demo_cols[2], "education")?,
            stem,
            xai_knowledge: number(demo_cols[4], "xai_knowledge")?,
        };
        groups.entry(group).or_default().push(Participant {
            id: field(id_col).to_owned(),
            yes_count,
            demographics,
        });
    }
    if groups.is_empty() {
        return Err(EvalError::EmptyTable);
    }
    Ok(groups
        .into_iter()
        .map(|(group, participants)| ResponseTable {
            group,
            n_cases,
            participants,
        })
        .collect())
}

/// Spearman correlation between a demographic code and the yes-count, over
/// participants that report the demographic.
pub fn demographic_correlation(
    table: &ResponseTable,
    which: Demographic,
) -> Result<SpearmanResult, EvalError> {
    let (codes, yes): (Vec<f64>, Vec<f64>) = table
        .participants
        .iter()
        .filter_map(|p| p.demographics.code(which).map(|c| (c, f64::from(p.yes_count))))
        .unzip();
    spearman(&codes, &yes)
}

/// Summary statistics of one group, as supplied in a summary file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupStats {
    pub label: String,
    pub mean: f64,
    pub variance: f64,
    pub n: usize,
}

impl WelchResult {
    pub fn from_groups(a: &GroupStats, b: &GroupStats) -> Result<Self, EvalError> {
        welch_from_summary(a.mean, a.variance, a.n, b.mean, b.variance, b.n)
    }
}

fn stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

/// Text table in the layout of a spreadsheet "t-Test: two-sample assuming
/// unequal variances" report.
pub fn render_welch_table(label_a: &str, label_b: &str, r: &WelchResult) -> String {
    let rows: [(&str, String, String); 7] = [
        ("Mean", format!("{:.2}", r.mean_a), format!("{:.2}", r.mean_b)),
        (
            "Standard Deviation",
            format!("{:.3}", r.var_a.sqrt()),
            format!("{:.3}", r.var_b.sqrt()),
        ),
        ("Variance", format!("{:.3}", r.var_a), format!("{:.3}", r.var_b)),
        ("Observations", r.n_a.to_string(), r.n_b.to_string()),
        ("df", format!("{:.2}", r.df), String::new()),
        ("t Stat", format!("{:.3}", r.t_stat), String::new()),
        (
            "P(T<=t) two-tail",
            format!("{:.5}{}", r.p_two_tailed, stars(r.p_two_tailed)),
            String::new(),
        ),
    ];
    let w0 = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
    let w1 = rows.iter().map(|r| r.1.len()).chain([label_a.len()]).max().unwrap_or(0);
    let mut out = String::new();
    let _ = writeln!(out, "{:w0$} | {:w1$} | {}", "", label_a, label_b);
    for (name, a, b) in rows {
        let _ = writeln!(out, "{name:w0$} | {a:w1$} | {b}");
    }
    out
}

/// Sum / Mean / Median of yes and no answers, one column per group.
pub fn render_summary_table(summaries: &[ResponseSummary]) -> String {
    let mut out = String::new();
    let _ = write!(out, "{:<3} | {:<6}", "", "");
    for s in summaries {
        let _ = write!(out, " | {:>6}", s.group.to_string());
    }
    out.push('\n');
    for (label, pick) in [
        ("Yes", (|s: &ResponseSummary| &s.yes) as fn(&ResponseSummary) -> &CountSummary),
        ("No", |s: &ResponseSummary| &s.no),
    ] {
        for (i, stat) in ["Sum", "Mean", "Median"].iter().enumerate() {
            let _ = write!(out, "{:<3} | {:<6}", if i == 0 { label } else { "" }, stat);
            for s in summaries {
                let c = pick(s);
                let cell = match i {
                    0 => format!("{}", c.sum),
                    1 => format!("{:.2}", c.mean),
                    _ => format!("{}", c.median),
                };
                let _ = write!(out, " | {cell:>6}");
            }
            out.push('\n');
        }
    }
    out
}
