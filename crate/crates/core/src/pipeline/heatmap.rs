//! SVG heatmap of a correlation report: rows are training sets, columns are
//! metrics, shade is linear in the raw coefficient over [-1, 1].

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::correlation::CorrelationReport;
use crate::error::{Error, Result};
use crate::metrics::{MetricKind, Orientation};

use super::report::write_file;

const CELL_W: f64 = 84.0;
const CELL_H: f64 = 34.0;
const LEFT: f64 = 110.0;
const TOP: f64 = 64.0;
const LIGHT: (f64, f64, f64) = (247.0, 251.0, 255.0);
const DARK: (f64, f64, f64) = (8.0, 48.0, 107.0);

/// Fill colour for a coefficient: -1 is the lightest shade, +1 the darkest.
pub fn shade(coefficient: f64) -> String {
    let t = ((coefficient.clamp(-1.0, 1.0) + 1.0) / 2.0).clamp(0.0, 1.0);
    let mix = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        mix(LIGHT.0, DARK.0),
        mix(LIGHT.1, DARK.1),
        mix(LIGHT.2, DARK.2)
    )
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

pub fn render_svg(report: &CorrelationReport) -> Result<String> {
    let trains = report.train_sets();
    let metrics = report.metrics();
    if trains.is_empty() || metrics.is_empty() {
        return Err(Error::Invalid("cannot draw a heatmap of an empty report".into()));
    }
    let width = LEFT + CELL_W * metrics.len() as f64 + 24.0;
    let grid_bottom = TOP + CELL_H * trains.len() as f64;
    let height = grid_bottom + 110.0;

    let mut svg = String::new();
    let w = &mut svg;
    // writes into a String cannot fail
    let _ = writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        w,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{} correlation: performance vs similarity</text>"#,
        width / 2.0,
        report.method
    );
    for (c, metric) in metrics.iter().enumerate() {
        let x = LEFT + CELL_W * (c as f64 + 0.5);
        let _ = writeln!(w, r#"<text x="{x}" y="{}" text-anchor="middle">{}</text>"#, TOP - 10.0, metric);
    }
    for (r, train) in trains.iter().enumerate() {
        let y = TOP + CELL_H * r as f64;
        let _ = writeln!(
            w,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            LEFT - 8.0,
            y + CELL_H / 2.0 + 4.0,
            escape(train)
        );
        for (c, metric) in metrics.iter().enumerate() {
            let x = LEFT + CELL_W * c as f64;
            let coefficient = report.get(train, *metric).and_then(|e| e.coefficient);
            let (fill, label, ink) = match coefficient {
                Some(v) => (shade(v), format!("{v:.2}"), if v > 0.2 { "#ffffff" } else { "#000000" }),
                None => ("#d9d9d9".to_owned(), "n/a".to_owned(), "#000000"),
            };
            let _ = writeln!(
                w,
                r##"<rect class="cell" x="{x}" y="{y}" width="{CELL_W}" height="{CELL_H}" fill="{fill}" stroke="#ffffff"/>"##
            );
            let _ = writeln!(
                w,
                r#"<text x="{}" y="{}" text-anchor="middle" fill="{ink}">{label}</text>"#,
                x + CELL_W / 2.0,
                y + CELL_H / 2.0 + 4.0
            );
        }
    }

    // legend: gradient bar from -1 to 1 plus the orientation note
    let bar_y = grid_bottom + 20.0;
    let bar_w = CELL_W * metrics.len() as f64;
    let steps = 20;
    for i in 0..steps {
        let v = -1.0 + 2.0 * (i as f64 + 0.5) / steps as f64;
        let _ = writeln!(
            w,
            r#"<rect class="legend" x="{}" y="{bar_y}" width="{}" height="12" fill="{}"/>"#,
            LEFT + bar_w * i as f64 / steps as f64,
            bar_w / steps as f64,
            shade(v)
        );
    }
    let _ = writeln!(w, r#"<text x="{LEFT}" y="{}" text-anchor="start">-1</text>"#, bar_y + 26.0);
    let _ = writeln!(w, r#"<text x="{}" y="{}" text-anchor="end">1</text>"#, LEFT + bar_w, bar_y + 26.0);
    let (sims, dists): (Vec<MetricKind>, Vec<MetricKind>) = metrics
        .iter()
        .partition(|m| m.orientation() == Orientation::SimilarityHigherCloser);
    let names = |ms: &[MetricKind]| ms.iter().map(|m| m.name()).collect::<Vec<_>>().join(", ");
    let mut note_y = bar_y + 46.0;
    if !sims.is_empty() {
        let _ = writeln!(
            w,
            r#"<text x="{LEFT}" y="{note_y}">{}: darker is better (similarity should rise with performance)</text>"#,
            names(&sims)
        );
        note_y += 16.0;
    }
    if !dists.is_empty() {
        let _ = writeln!(
            w,
            r#"<text x="{LEFT}" y="{note_y}">{}: lighter is better (distance should fall as performance rises)</text>"#,
            names(&dists)
        );
        note_y += 16.0;
    }
    let _ = writeln!(
        w,
        r#"<text x="{LEFT}" y="{note_y}">raw coefficients; in-domain rows {}</text>"#,
        if report.include_id { "included" } else { "excluded" }
    );
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Plain CSV matrix of raw coefficients; undefined cells are `NA`.
pub fn render_matrix_csv(report: &CorrelationReport) -> String {
    let metrics = report.metrics();
    let mut out = String::from("train");
    for m in &metrics {
        out.push(',');
        out.push_str(m.name());
    }
    out.push('\n');
    for train in report.train_sets() {
        out.push_str(train);
        for m in &metrics {
            out.push(',');
            match report.get(train, *m).and_then(|e| e.coefficient) {
                Some(v) => out.push_str(&v.to_string()),
                None => out.push_str("NA"),
            }
        }
        out.push('\n');
    }
    out
}

/// Write the SVG to `path` and the CSV matrix next to it (same stem, `.csv`).
/// Returns the CSV path.
pub fn emit_heatmap(report: &CorrelationReport, path: &Path) -> Result<PathBuf> {
    let svg = render_svg(report)?;
    write_file(path, &svg)?;
    let csv_path = path.with_extension("csv");
    write_file(&csv_path, &render_matrix_csv(report))?;
    Ok(csv_path)
}
