//! CSV and plain-text rendering of comparison and cross-validation results.

use std::fmt::Write as _;
use std::io::Write;

use crate::error::{Error, Result};
use crate::model_select::CvScore;
use crate::pipeline::{ComparisonReport, ComparisonRow, SummaryRow};

pub const COMPARISON_HEADER: [&str; 8] = [
    "mu",
    "dt",
    "iter_old",
    "iter_vkoga",
    "time_old_s",
    "time_vkoga_s",
    "gain_iter_pct",
    "gain_time_pct",
];

pub const CV_HEADER: [&str; 4] = ["epsilon", "score", "mean_centers", "error"];

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidInput(format!("csv: {other:?}")),
    }
}

pub fn format_mu(mu: &[f64]) -> String {
    let parts: Vec<String> = mu.iter().map(|v| v.to_string()).collect();
    format!("({})", parts.join(", "))
}

/// One line per test case. Only the two time columns vary between runs.
pub fn write_comparison_csv<W: Write>(report: &ComparisonReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COMPARISON_HEADER).map_err(csv_err)?;
    for r in &report.rows {
        w.write_record([
            format_mu(&r.mu),
            r.dt.to_string(),
            r.iter_old.to_string(),
            r.iter_vkoga.to_string(),
            r.time_old_s.to_string(),
            r.time_vkoga_s.to_string(),
            r.gain_iter_pct.to_string(),
            r.gain_time_pct.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_cv_csv<W: Write>(scores: &[CvScore], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CV_HEADER).map_err(csv_err)?;
    for s in scores {
        w.write_record([
            s.epsilon.to_string(),
            s.score.to_string(),
            s.mean_centers.to_string(),
            s.error.clone().unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Which test coordinate labels the Min and Max rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extremizer {
    Mu,
    Dt,
}

impl Extremizer {
    /// `Dt` when every row shares one parameter, otherwise `Mu`.
    pub fn infer(rows: &[ComparisonRow]) -> Self {
        match rows.first() {
            Some(first) if rows.len() > 1 && rows.iter().all(|r| r.mu == first.mu) => Self::Dt,
            _ => Self::Mu,
        }
    }

    fn label(self, row: &ComparisonRow) -> String {
        match self {
            Self::Mu => format_mu(&row.mu),
            Self::Dt => format!("{:.3e}", row.dt),
        }
    }
}

fn summary_line(out: &mut String, name: &str, s: &SummaryRow, tag: &str) {
    let _ = writeln!(
        out,
        "{name:<6}| {:>7.2} {:>9.4} | {:>7.2} {:>9.4} | {:>8.2}% {:>8.2}% | {tag}",
        s.iter_old, s.time_old_s, s.iter_vkoga, s.time_vkoga_s, s.gain_iter_pct, s.gain_time_pct,
    );
}

/// Old-value vs surrogate table with Mean, Min and Max rows. Min and Max
/// are chosen by iteration gain; the time gain is informational.
pub fn render_table(report: &ComparisonReport) -> String {
    let by = Extremizer::infer(&report.rows);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "      |     Old value     |       VKOGA       |        Gain         |"
    );
    let _ = writeln!(
        out,
        "      |    iter  time [s] |    iter  time [s] |      iter       time | {}",
        match by {
            Extremizer::Mu => "mu",
            Extremizer::Dt => "dt",
        }
    );
    let _ = writeln!(out, "{}", "-".repeat(78));
    match &report.summary {
        Some(s) => {
            summary_line(&mut out, "Mean", &s.mean, "");
            for (name, row) in [("Min", &s.min), ("Max", &s.max)] {
                let tag = row
                    .row
                    .map(|i| by.label(&report.rows[i]))
                    .unwrap_or_default();
                summary_line(&mut out, name, row, &tag);
            }
        }
        None => {
            let _ = writeln!(out, "no successful runs");
        }
    }
    let failed: Vec<&ComparisonRow> = report.rows.iter().filter(|r| !r.ok()).collect();
    if !failed.is_empty() {
        let _ = writeln!(out, "{} failed case(s):", failed.len());
        for r in failed {
            let _ = writeln!(
                out,
                "  mu = {}, dt = {}: {}",
                format_mu(&r.mu),
                r.dt,
                r.error.as_deref().unwrap_or("")
            );
        }
    }
    let outside = report.rows.iter().filter(|r| r.dt_outside_training).count();
    if outside > 0 {
        let _ = writeln!(
            out,
            "{outside} case(s) use a dt outside the training timesteps"
        );
    }
    let _ = writeln!(
        out,
        "Min/Max chosen by iteration gain; timings averaged over {} repetition(s)",
        report.repetitions
    );
    out
}

/// Per-case listing, one line per row.
pub fn render_rows(report: &ComparisonReport) -> String {
    let mut out = String::new();
    for r in &report.rows {
        let _ = writeln!(
            out,
            "mu = {:<12} dt = {:<10.4e} iter {:>6.2} -> {:>6.2} ({:>7.2}%)  init residual {:.2e} -> {:.2e}",
            format_mu(&r.mu),
            r.dt,
            r.iter_old,
            r.iter_vkoga,
            r.gain_iter_pct,
            r.init_residual_old,
            r.init_residual_vkoga
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::ComparisonSummary;

    fn row(mu: Vec<f64>, dt: f64, old: f64, new: f64) -> ComparisonRow {
        ComparisonRow {
            mu,
            dt,
            t_end: 2.0,
            iter_old: old,
            iter_vkoga: new,
            time_old_s: 1.0,
            time_vkoga_s: 0.5,
            gain_iter_pct: (old - new) / old * 100.0,
            gain_time_pct: 50.0,
            init_residual_old: 1.0,
            init_residual_vkoga: 0.1,
            max_state_diff: 0.0,
            dt_outside_training: false,
            error: None,
        }
    }

    fn summary_of(rows: &[ComparisonRow], min: usize, max: usize) -> ComparisonSummary {
        let s = |i: Option<usize>| {
            let r = &rows[i.unwrap_or(0)];
            SummaryRow {
                iter_old: r.iter_old,
                iter_vkoga: r.iter_vkoga,
                time_old_s: r.time_old_s,
                time_vkoga_s: r.time_vkoga_s,
                gain_iter_pct: r.gain_iter_pct,
                gain_time_pct: r.gain_time_pct,
                row: i,
            }
        };
        ComparisonSummary {
            mean: s(None),
            min: s(Some(min)),
            max: s(Some(max)),
        }
    }

    #[test]
    fn csv_has_expected_columns() {
        let rows = vec![
            row(vec![3.4, 0.2], 0.01, 4.0, 2.0),
            row(vec![3.2, 0.0], 0.01, 4.0, 3.0),
        ];
        let report = ComparisonReport {
            summary: Some(summary_of(&rows, 1, 0)),
            rows,
            repetitions: 1,
        };
        let mut buf = Vec::new();
        write_comparison_csv(&report, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(
            lines[0],
            "mu,dt,iter_old,iter_vkoga,time_old_s,time_vkoga_s,gain_iter_pct,gain_time_pct"
        );
        assert_eq!(lines[1], "\"(3.4, 0.2)\",0.01,4,2,1,0.5,50,50");

        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let recs: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
        assert_eq!(recs[1][0].to_string(), "(3.2, 0)");
        assert_eq!(recs[1][6].parse::<f64>().unwrap(), 25.0);
    }

    #[test]
    fn table_labels_extremizers() {
        let rows = vec![
            row(vec![3.4, 0.2], 0.01, 4.0, 2.0),
            row(vec![3.2, 0.0], 0.01, 4.0, 3.0),
        ];
        let report = ComparisonReport {
            summary: Some(summary_of(&rows, 1, 0)),
            rows,
            repetitions: 10,
        };
        let t = render_table(&report);
        let min = t.lines().find(|l| l.starts_with("Min")).unwrap();
        assert!(min.ends_with("(3.2, 0)"), "{min}");
        let max = t.lines().find(|l| l.starts_with("Max")).unwrap();
        assert!(max.contains("50.00%") && max.ends_with("(3.4, 0.2)"));
        assert!(t.contains("10 repetition"));

        let rows = vec![
            row(vec![3.4, 0.2], 0.001, 3.0, 2.0),
            row(vec![3.4, 0.2], 0.05, 5.0, 4.0),
        ];
        assert_eq!(Extremizer::infer(&rows), Extremizer::Dt);
        let report = ComparisonReport {
            summary: Some(summary_of(&rows, 1, 0)),
            rows,
            repetitions: 1,
        };
        let t = render_table(&report);
        assert!(
            t.lines()
                .any(|l| l.starts_with("Min") && l.ends_with("5.000e-2")),
            "{t}"
        );
    }

    #[test]
    fn failures_are_listed() {
        let mut r = row(vec![3.4, 0.2], 0.01, f64::NAN, f64::NAN);
        r.error = Some("newton failed".into());
        let report = ComparisonReport {
            rows: vec![r],
            summary: None,
            repetitions: 1,
        };
        let t = render_table(&report);
        assert!(t.contains("no successful runs"));
        assert!(t.contains("newton failed"));
        let mut buf = Vec::new();
        write_comparison_csv(&report, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().contains("NaN"));
    }

    #[test]
    fn cv_csv() {
        let scores = vec![
            CvScore {
                epsilon: 0.1,
                score: 1e-6,
                mean_centers: 12.0,
                error: None,
            },
            CvScore {
                epsilon: 100.0,
                score: f64::INFINITY,
                mean_centers: 0.0,
                error: Some("degenerate, kernel".into()),
            },
        ];
        let mut buf = Vec::new();
        write_cv_csv(&scores, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "epsilon,score,mean_centers,error");
        assert_eq!(lines[1], "0.1,0.000001,12,");
        assert_eq!(lines[2], "100,inf,0,\"degenerate, kernel\"");
    }
}
