//! Text tables and minimal SVG charts for explanations and sweep reports.

use std::fmt::Write as _;

use xaits_core::explanation::{Explanation, Method};
use xaits_core::model_selection::LagSweepReport;
use xaits_core::svr::SvrHyperParams;

const NEGATIVE: &str = "#d62728";
const POSITIVE: &str = "#2ca02c";
const WIDTH: f64 = 760.0;
const LABEL_W: f64 = 300.0;
const ROW_H: f64 = 28.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn color(w: f64) -> &'static str {
    if w < 0.0 {
        NEGATIVE
    } else {
        POSITIVE
    }
}

/// Row label: the LIME condition when present, else the feature name.
fn label(e: &Explanation, i: usize) -> &str {
    let a = &e.attributions[i];
    if a.condition.is_empty() {
        &a.feature_name
    } else {
        &a.condition
    }
}

/// One chart panel; returns the SVG fragment and its height.
fn panel(e: &Explanation, y0: f64) -> (String, f64) {
    let n = e.attributions.len();
    let top = y0 + 40.0;
    let plot_h = ROW_H * n.max(1) as f64;
    let (x_lo, x_hi) = (LABEL_W + 20.0, WIDTH - 30.0);
    let span = e
        .attributions
        .iter()
        .map(|a| a.weight.abs())
        .fold(0.0f64, f64::max)
        .max(1e-12);
    let x_of = |w: f64| x_lo + (x_hi - x_lo) * (w + span) / (2.0 * span);
    let zero = x_of(0.0);
    let period = e
        .instance_period
        .map(|p| format!(" for {p}"))
        .unwrap_or_default();
    let (title, axis) = match e.method {
        Method::Lime => ("LIME explanation", "Local surrogate weight (effect on prediction)"),
        Method::Shap => ("SHAP explanation", "SHAP value (contribution to prediction)"),
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" font-size="15" font-weight="bold">{title}{}: prediction {:.4}</text>"#,
        10.0,
        y0 + 20.0,
        escape(&period),
        e.prediction
    );
    for (i, a) in e.attributions.iter().enumerate() {
        let cy = top + ROW_H * i as f64 + ROW_H / 2.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="end">{}</text>"#,
            LABEL_W,
            cy + 4.0,
            escape(label(e, i))
        );
        let x = x_of(a.weight);
        match e.method {
            Method::Lime => {
                let _ = writeln!(
                    s,
                    r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="{}"/>"#,
                    x.min(zero),
                    cy - ROW_H * 0.35,
                    (x - zero).abs(),
                    ROW_H * 0.7,
                    color(a.weight)
                );
            }
            Method::Shap => {
                let _ = writeln!(
                    s,
                    r#"<line x1="{zero:.1}" y1="{cy:.1}" x2="{x:.1}" y2="{cy:.1}" stroke="silver"/>"#
                );
                let _ = writeln!(
                    s,
                    r#"<circle cx="{x:.1}" cy="{cy:.1}" r="6" fill="{}"/>"#,
                    color(a.weight)
                );
            }
        }
    }
    let bottom = top + plot_h;
    // axes, ticks and x-axis label
    let _ = writeln!(
        s,
        r#"<line x1="{zero:.1}" y1="{top:.1}" x2="{zero:.1}" y2="{bottom:.1}" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<line x1="{x_lo:.1}" y1="{bottom:.1}" x2="{x_hi:.1}" y2="{bottom:.1}" stroke="black"/>"#
    );
    for w in [-span, 0.0, span] {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">{:.3}</text>"#,
            x_of(w),
            bottom + 16.0,
            w
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">{axis}</text>"#,
        (x_lo + x_hi) / 2.0,
        bottom + 34.0
    );
    // legend
    let ly = bottom + 52.0;
    for (k, (fill, text)) in [(NEGATIVE, "lowers the prediction"), (POSITIVE, "raises the prediction")]
        .iter()
        .enumerate()
    {
        let lx = x_lo + 200.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{lx:.1}" y="{:.1}" width="12" height="12" fill="{fill}"/>"#,
            ly - 10.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{ly:.1}" font-size="12">{text}</text>"#,
            lx + 18.0
        );
    }
    (s, ly + 20.0 - y0)
}

/// Explanations stacked vertically in one SVG document.
pub fn explanations_svg(explanations: &[Explanation]) -> String {
    let mut body = String::new();
    let mut y = 0.0;
    for e in explanations {
        let (fragment, h) = panel(e, y);
        body.push_str(&fragment);
        y += h + 10.0;
    }
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{y:.0}\" viewBox=\"0 0 {WIDTH} {y:.0}\" font-family=\"sans-serif\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{body}</svg>\n"
    )
}

pub fn explanation_table(e: &Explanation) -> String {
    let mut out = String::new();
    let period = e.instance_period.map(|p| p.to_string()).unwrap_or_else(|| "-".into());
    let base = match e.method {
        Method::Lime => "intercept",
        Method::Shap => "baseline",
    };
    let _ = writeln!(
        out,
        "{} | period {period} | prediction {:.4} | {base} {:.4}",
        e.method.to_string().to_uppercase(),
        e.prediction,
        e.intercept_or_baseline
    );
    let w = e
        .attributions
        .iter()
        .enumerate()
        .map(|(i, _)| label(e, i).len())
        .max()
        .unwrap_or(0)
        .max("feature".len());
    let _ = writeln!(out, "{:>4} | {:w$} | {:>10}", "rank", "feature", "weight");
    for (i, a) in e.attributions.iter().enumerate() {
        let _ = writeln!(out, "{:>4} | {:w$} | {:>10.4}", i + 1, label(e, i), a.weight);
    }
    out
}

/// Lag comparison in the layout of the study's results table.
pub fn sweep_table(report: &LagSweepReport) -> String {
    let rows: Vec<(String, String, String)> = report
        .rows
        .iter()
        .map(|r| {
            let hp = SvrHyperParams::try_from(r.best_hyperparameters)
                .map(|h| h.to_string())
                .unwrap_or_else(|e| e.to_string());
            (r.lag.to_string(), format!("{:.2}", r.test_mape), hp)
        })
        .collect();
    let w = rows.iter().map(|r| r.2.len()).max().unwrap_or(0);
    let mut out = String::new();
    let _ = writeln!(out, "{:>3} | {:>8} | {:w$}", "Lag", "MAPE (%)", "Best hyperparameters");
    for (lag, mape, hp) in rows {
        let _ = writeln!(out, "{lag:>3} | {mape:>8} | {hp}");
    }
    let _ = writeln!(out, "target: {}, best lag: {}", report.target, report.best_lag);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use xaits_core::explanation::FeatureAttribution;

    fn sample(method: Method) -> Explanation {
        Explanation {
            method,
            instance_period: "2018-05".parse().ok(),
            prediction: 0.4,
            intercept_or_baseline: 0.3,
            attributions: vec![
                FeatureAttribution {
                    feature_name: "calls (t-1)".into(),
                    weight: -0.2,
                    condition: if method == Method::Lime { "calls (t-1) <= 0.25".into() } else { String::new() },
                },
                FeatureAttribution {
                    feature_name: "mails".into(),
                    weight: 0.1,
                    condition: String::new(),
                },
            ],
        }
    }

    #[test]
    fn svg_has_bars_dots_legend_and_axis_label() {
        let svg = explanations_svg(&[sample(Method::Lime), sample(Method::Shap)]);
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<circle").count(), 2);
        assert!(svg.contains(NEGATIVE) && svg.contains(POSITIVE));
        assert!(svg.contains("raises the prediction"));
        assert!(svg.contains("SHAP value (contribution to prediction)"));
        assert!(svg.contains("calls (t-1) &lt;= 0.25"));
    }

    #[test]
    fn table_lists_ranked_rows() {
        let t = explanation_table(&sample(Method::Shap));
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[2].contains("calls (t-1)"));
    }
}
