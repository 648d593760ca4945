//! Feature-matrix CSV export/import, human-readable result tables, and
//! top-feature scatter exports (CSV and static SVG).

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::eval::{LosoReport, RankedFeature, SubjectRow};
use crate::features::{feature_names, FEATURE_LEN};
use crate::session::Group;
use crate::Error;

/// Writes the cohort feature matrix: header row of dimension names, one row
/// per subject, first two columns `subject_id` and `group`. Rows are emitted
/// in the given order (callers sort by subject id for determinism).
pub fn write_feature_matrix(rows: &[SubjectRow]) -> String {
    let mut out = String::new();
    out.push_str("subject_id,group");
    for name in feature_names() {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for row in rows {
        out.push_str(&row.subject_id);
        out.push(',');
        let _ = write!(out, "{}", row.group);
        for v in &row.features {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

fn parse_group(s: &str) -> Result<Group, Error> {
    match s {
        "control" => Ok(Group::Control),
        "asd" => Ok(Group::Asd),
        "adhd" => Ok(Group::Adhd),
        "comorbid" => Ok(Group::Comorbid),
        other => Err(Error::Format(format!("unknown group {other:?}"))),
    }
}

/// Reads a feature matrix previously written by `write_feature_matrix`.
pub fn read_feature_matrix(text: &str) -> Result<Vec<SubjectRow>, Error> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty feature matrix".into()))?;
    let expected_cols = FEATURE_LEN + 2;
    let header_cols = header.split(',').count();
    if header_cols != expected_cols {
        return Err(Error::Format(format!(
            "feature matrix header has {header_cols} columns, expected {expected_cols}"
        )));
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let subject_id = fields.next().unwrap_or_default().to_string();
        let group = parse_group(fields.next().unwrap_or_default())?;
        let features: Vec<f64> = fields
            .map(|f| {
                f.parse::<f64>().map_err(|_| {
                    Error::Format(format!(
                        "row {} ({subject_id}): bad numeric field {f:?}",
                        lineno + 2
                    ))
                })
            })
            .collect::<Result<_, _>>()?;
        if features.len() != FEATURE_LEN {
            return Err(Error::Format(format!(
                "row {} ({subject_id}): {} feature columns, expected {FEATURE_LEN}",
                lineno + 2,
                features.len()
            )));
        }
        rows.push(SubjectRow { subject_id, group, features });
    }
    Ok(rows)
}

/// Renders a plain-text result table: one row per class, columns
/// Correct / Incorrect, accuracy underneath.
pub fn render_table(report: &LosoReport) -> String {
    let mut out = String::new();
    let title = format!(
        "Classification results for {} vs {}",
        report.stage.positive_name, report.stage.negative_name
    );
    let _ = writeln!(out, "{title}");
    let name_width = report
        .confusion
        .classes
        .iter()
        .map(|c| c.name.len())
        .max()
        .unwrap_or(0)
        .max("Classifier".len());
    let _ = writeln!(out, "{:<name_width$} | Correct | Incorrect", "Classifier");
    let _ = writeln!(out, "{:-<name_width$}-+---------+----------", "");
    for class in &report.confusion.classes {
        let _ = writeln!(
            out,
            "{:<name_width$} | {:<7} | {:<9}",
            class.name, class.correct, class.incorrect
        );
    }
    let _ = writeln!(out, "Accuracy: {:.1}%", report.accuracy * 100.0);
    if report.leaky_selection {
        let _ = writeln!(out, "WARNING leakage: selection outside folds (paper-mode)");
    }
    out
}

/// Scatter data for the top 3 features: subject_id, group, f1, f2, f3.
/// The config comment line keeps the artifact self-describing.
pub fn scatter_csv(
    dataset: &[SubjectRow],
    report: &LosoReport,
    top: &[RankedFeature],
    config_json: &str,
) -> String {
    let mut out = format!("# config: {config_json}\n");
    let dims: Vec<usize> = top.iter().take(3).map(|f| f.index).collect();
    out.push_str("subject_id,group");
    for f in top.iter().take(3) {
        let _ = write!(out, ",{}", f.name);
    }
    out.push('\n');
    for subject in &report.per_subject {
        if let Some(row) = dataset.iter().find(|r| r.subject_id == subject.subject_id) {
            let _ = write!(out, "{},{}", row.subject_id, row.group);
            for &d in &dims {
                let _ = write!(out, ",{}", row.features[d]);
            }
            out.push('\n');
        }
    }
    out
}

/// Static SVG scatter: first two top features on the axes, the third encoded
/// by marker radius, color by true class.
pub fn scatter_svg(
    dataset: &[SubjectRow],
    report: &LosoReport,
    top: &[RankedFeature],
    config_json: &str,
) -> String {
    const W: f64 = 640.0;
    const H: f64 = 640.0;
    const MARGIN: f64 = 60.0;
    let dims: Vec<usize> = top.iter().take(3).map(|f| f.index).collect();
    let points: Vec<(&SubjectRow, &str)> = report
        .per_subject
        .iter()
        .filter_map(|p| {
            dataset
                .iter()
                .find(|r| r.subject_id == p.subject_id)
                .map(|r| (r, p.truth.as_str()))
        })
        .collect();
    let extent = |d: usize| -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (r, _) in &points {
            lo = lo.min(r.features[d]);
            hi = hi.max(r.features[d]);
        }
        if !(hi > lo) {
            (lo - 0.5, lo + 0.5)
        } else {
            (lo, hi)
        }
    };
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(svg, "<!-- config: {} -->", config_json.replace("--", "- -"));
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    if dims.len() >= 2 {
        let (x0, x1) = extent(dims[0]);
        let (y0, y1) = extent(dims[1]);
        let (z0, z1) = if dims.len() > 2 { extent(dims[2]) } else { (0.0, 1.0) };
        let sx = |v: f64| MARGIN + (v - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
        let sy = |v: f64| H - MARGIN - (v - y0) / (y1 - y0) * (H - 2.0 * MARGIN);
        for (r, truth) in &points {
            let cx = sx(r.features[dims[0]]);
            let cy = sy(r.features[dims[1]]);
            let radius = if dims.len() > 2 {
                3.0 + 7.0 * (r.features[dims[2]] - z0) / (z1 - z0).max(1e-12)
            } else {
                5.0
            };
            let color = if *truth == report.stage.positive_name {
                "#d62728"
            } else {
                "#1f77b4"
            };
            let _ = writeln!(
                svg,
                r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="{radius:.2}" fill="{color}" fill-opacity="0.7"><title>{}</title></circle>"#,
                r.subject_id
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.0}" y="{:.0}" font-size="14">{}</text>"#,
            W / 2.0 - 60.0,
            H - 20.0,
            top[0].name
        );
        let _ = writeln!(
            svg,
            r#"<text x="18" y="{:.0}" font-size="14" transform="rotate(-90 18 {:.0})">{}</text>"#,
            H / 2.0,
            H / 2.0,
            top[1].name
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.0}" y="24" font-size="16">{} vs {}</text>"#,
        MARGIN,
        report.stage.positive_name,
        report.stage.negative_name
    );
    svg.push_str("</svg>\n");
    svg
}

/// Full evaluation artifact: the report plus the resolved config and seed.
#[derive(Debug, Clone, Serialize)]
pub struct EvaluationArtifact<'a> {
    pub config: &'a crate::eval::PipelineConfig,
    pub seed: u64,
    pub report: &'a LosoReport,
    pub top_features: Vec<RankedFeature>,
}

pub fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
