use std::fmt::Write;

use super::ComparisonReport;

/// Pretty JSON with a trailing newline.
pub fn report_json(report: &ComparisonReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report is serializable");
    s.push('\n');
    s
}

/// `0.007966986` style for p ≥ 0.001, `3.42E-05` below.
pub fn format_p(p: f64) -> String {
    if p == 0.0 {
        return "0".into();
    }
    if p >= 1e-4 {
        let s = format!("{p:.9}");
        let s = s.trim_end_matches('0');
        return s.trim_end_matches('.').to_string();
    }
    let s = format!("{p:.2E}");
    let (mantissa, exp) = s.split_once('E').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}E{sign}{:02}", exp.abs())
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

/// Accuracy table (architectures as columns) and the statistics table.
pub fn render_markdown(report: &ComparisonReport) -> String {
    let mut out = String::new();
    let labels: Vec<&str> = report.summaries.iter().map(|s| s.label.as_str()).collect();
    writeln!(out, "## Accuracy ({} repeats)\n", report.run_matrix.repeats()).unwrap();
    writeln!(out, "| | {} |", labels.join(" | ")).unwrap();
    writeln!(out, "|---|{}", "---|".repeat(labels.len())).unwrap();
    let means: Vec<String> = report.summaries.iter().map(|s| format!("{:.3}", s.mean)).collect();
    writeln!(out, "| Accuracy | {} |", means.join(" | ")).unwrap();

    writeln!(out, "\n## Statistical tests\n").unwrap();
    writeln!(out, "| Test | p-value | Significant |").unwrap();
    writeln!(out, "|---|---|---|").unwrap();
    writeln!(
        out,
        "| ANOVA ({}) | {} | {} |",
        labels.join(", "),
        format_p(report.anova.p_value),
        yes_no(report.anova_significant)
    )
    .unwrap();
    for p in &report.pairwise {
        writeln!(
            out,
            "| U test ({}, {}) | {} | {} |",
            p.a.label(),
            p.b.label(),
            format_p(p.test.p_value),
            yes_no(p.significant)
        )
        .unwrap();
    }
    writeln!(
        out,
        "\nSignificance level: {} for the ANOVA test, {:.4} for the Mann-Whitney U test.",
        report.alpha_anova, report.alpha_pairwise
    )
    .unwrap();
    out
}

pub fn render_quartile_csv(report: &ComparisonReport) -> String {
    let mut out = String::from("architecture,n,mean,min,q1,median,q3,max,whisker_low,whisker_high\n");
    for s in &report.summaries {
        let q = &s.quartiles;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            s.label,
            report.run_matrix.repeats(),
            s.mean,
            q.min,
            q.q1,
            q.median,
            q.q3,
            q.max,
            q.whisker_low,
            q.whisker_high
        )
        .unwrap();
    }
    out
}

/// Standalone SVG box plot of the accuracy distribution per architecture.
pub fn render_boxplot_svg(report: &ComparisonReport) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const LEFT: f64 = 60.0;
    const RIGHT: f64 = 20.0;
    const TOP: f64 = 30.0;
    const BOTTOM: f64 = 50.0;

    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for s in &report.summaries {
        lo = lo.min(s.quartiles.min);
        hi = hi.max(s.quartiles.max);
    }
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    let pad = ((hi - lo) * 0.1).max(0.01);
    let (lo, hi) = ((lo - pad).max(0.0), (hi + pad).min(1.0));
    let y = |v: f64| TOP + (hi - v) / (hi - lo) * (H - TOP - BOTTOM);

    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
    writeln!(
        out,
        r#"<text x="{:.1}" y="18" text-anchor="middle" font-size="14">Distribution of accuracy values</text>"#,
        W / 2.0
    )
    .unwrap();
    // y axis with five ticks
    writeln!(
        out,
        r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{:.1}" stroke="black"/>"#,
        H - BOTTOM
    )
    .unwrap();
    for i in 0..=4 {
        let v = lo + (hi - lo) * i as f64 / 4.0;
        let yy = y(v);
        writeln!(
            out,
            r#"<line x1="{:.1}" y1="{yy:.1}" x2="{LEFT}" y2="{yy:.1}" stroke="black"/><text x="{:.1}" y="{:.1}" text-anchor="end">{v:.3}</text>"#,
            LEFT - 4.0,
            LEFT - 6.0,
            yy + 4.0
        )
        .unwrap();
    }
    let n = report.summaries.len().max(1) as f64;
    let slot = (W - LEFT - RIGHT) / n;
    for (i, s) in report.summaries.iter().enumerate() {
        let q = &s.quartiles;
        let cx = LEFT + slot * (i as f64 + 0.5);
        let half = slot * 0.25;
        writeln!(out, r#"<g class="box" data-arch="{}">"#, s.label).unwrap();
        writeln!(
            out,
            r#"<line x1="{cx:.1}" y1="{:.1}" x2="{cx:.1}" y2="{:.1}" stroke="black"/>"#,
            y(q.whisker_high),
            y(q.q3)
        )
        .unwrap();
        writeln!(
            out,
            r#"<line x1="{cx:.1}" y1="{:.1}" x2="{cx:.1}" y2="{:.1}" stroke="black"/>"#,
            y(q.q1),
            y(q.whisker_low)
        )
        .unwrap();
        for w in [q.whisker_low, q.whisker_high] {
            writeln!(
                out,
                r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black"/>"#,
                cx - half / 2.0,
                y(w),
                cx + half / 2.0,
                y(w)
            )
            .unwrap();
        }
        writeln!(
            out,
            r##"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="#9ecae1" stroke="black"/>"##,
            cx - half,
            y(q.q3),
            2.0 * half,
            (y(q.q1) - y(q.q3)).max(0.5)
        )
        .unwrap();
        writeln!(
            out,
            r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black" stroke-width="2"/>"#,
            cx - half,
            y(q.median),
            cx + half,
            y(q.median)
        )
        .unwrap();
        for &o in &q.outliers {
            writeln!(
                out,
                r#"<circle cx="{cx:.1}" cy="{:.1}" r="2.5" fill="none" stroke="black"/>"#,
                y(o)
            )
            .unwrap();
        }
        writeln!(
            out,
            r#"<text x="{cx:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            H - BOTTOM + 18.0,
            s.label
        )
        .unwrap();
        writeln!(out, "</g>").unwrap();
    }
    writeln!(out, "</svg>").unwrap();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evalstats::{compare_architectures, RunMatrix};
    use crate::models::Architecture;

    fn report() -> ComparisonReport {
        let samples = vec![
            vec![0.70, 0.72, 0.71, 0.74, 0.69],
            vec![0.60, 0.62, 0.61, 0.64, 0.40],
            vec![0.80, 0.82, 0.81, 0.84, 0.79],
            vec![0.90, 0.92, 0.91, 0.94, 0.89],
        ];
        compare_architectures(&RunMatrix::from_samples(Architecture::ALL.to_vec(), samples, 1).unwrap()).unwrap()
    }

    #[test]
    fn p_formatting() {
        assert_eq!(format_p(3.42e-5), "3.42E-05");
        assert_eq!(format_p(1.32e-21), "1.32E-21");
        assert_eq!(format_p(0.007966986), "0.007966986");
        assert_eq!(format_p(0.00066457), "0.00066457");
        assert_eq!(format_p(0.5), "0.5");
        assert_eq!(format_p(1.0), "1");
    }

    #[test]
    fn markdown_layout() {
        let md = render_markdown(&report());
        assert!(md.contains("| | CNN-LSTM | ED-LSTM | Stacked-LSTM | Vanilla-LSTM |"));
        assert!(md.contains("| Accuracy | 0.712 | 0.574 | 0.812 | 0.912 |"));
        assert!(md.contains("0.0083 for the Mann-Whitney U test"));
        assert_eq!(md.matches("| U test (").count(), 6);
    }

    #[test]
    fn svg_has_one_box_per_architecture() {
        let svg = render_boxplot_svg(&report());
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches(r#"<g class="box""#).count(), 4);
        assert_eq!(svg.matches("<circle").count(), 1);
    }

    #[test]
    fn csv_rows() {
        let csv = render_quartile_csv(&report());
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.lines().nth(1).unwrap().starts_with("CNN-LSTM,5,"));
    }

    #[test]
    fn json_roundtrip() {
        let r = report();
        let back: ComparisonReport = serde_json::from_str(&report_json(&r)).unwrap();
        assert_eq!(back, r);
    }
}
