//! Result tables (CSV) and summary bar charts (SVG).

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::MetricsReport;
use crate::train::{CellOutcome, RankEntry, SweepRow, TrainConfig};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRow {
    pub experiment_id: String,
    pub backbone: String,
    pub topic_encoder: String,
    pub use_wiki: bool,
    pub beta: f64,
    pub split_id: String,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub macro_f1: f64,
    pub mae: f64,
    pub n_test: u64,
    pub wall_seconds: f64,
}

impl ResultRow {
    pub fn new(
        experiment_id: &str,
        config: &TrainConfig,
        split_id: &str,
        report: &MetricsReport,
        wall_seconds: Option<f64>,
    ) -> Self {
        ResultRow {
            experiment_id: experiment_id.to_owned(),
            backbone: config.backbone.clone(),
            topic_encoder: config.topic_encoder.as_str().to_owned(),
            use_wiki: config.use_wiki,
            beta: config.beta,
            split_id: split_id.to_owned(),
            accuracy: report.accuracy,
            precision: report.precision,
            recall: report.recall,
            macro_f1: report.macro_f1,
            mae: report.mae,
            n_test: report.n_test,
            wall_seconds: wall_seconds.unwrap_or(0.0),
        }
    }
}

/// Successful cells become rows; wall time is kept only if `record_timing`.
pub fn rows_from_outcomes(outcomes: &[CellOutcome], record_timing: bool) -> Vec<ResultRow> {
    outcomes
        .iter()
        .filter_map(|o| {
            let r = o.result.as_ref().ok()?;
            Some(ResultRow::new(
                &o.experiment_id,
                &o.config,
                &o.split_id,
                r,
                record_timing.then_some(o.wall_seconds),
            ))
        })
        .collect()
}

pub fn rows_from_sweep(
    experiment_id: &str,
    config: &TrainConfig,
    split_id: &str,
    sweep: &[SweepRow],
    record_timing: bool,
) -> Vec<ResultRow> {
    sweep
        .iter()
        .map(|s| {
            let cfg = TrainConfig {
                beta: s.beta,
                ..config.clone()
            };
            ResultRow::new(
                &format!("{experiment_id}-beta{}", s.beta),
                &cfg,
                split_id,
                &s.report,
                record_timing.then_some(s.wall_seconds),
            )
        })
        .collect()
}

/// CSV text with a leading `# config_sha256:` comment line.
pub fn to_csv<T: Serialize>(rows: &[T], config_hash: &str) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let body = w
        .into_inner()
        .map_err(|e| Error::InvalidArgument(format!("csv flush: {e}")))?;
    let body = String::from_utf8(body).expect("csv writer emits utf-8");
    Ok(format!("# config_sha256: {config_hash}\n{body}"))
}

#[derive(Serialize)]
struct ErrorRow<'a> {
    experiment_id: &'a str,
    split_id: &'a str,
    error: &'a str,
}

pub fn errors_csv(outcomes: &[CellOutcome], config_hash: &str) -> Result<String> {
    let rows: Vec<ErrorRow> = outcomes
        .iter()
        .filter_map(|o| {
            o.result.as_ref().err().map(|e| ErrorRow {
                experiment_id: &o.experiment_id,
                split_id: &o.split_id,
                error: e,
            })
        })
        .collect();
    to_csv(&rows, config_hash)
}

pub fn ranking_csv(ranking: &[RankEntry], config_hash: &str) -> Result<String> {
    to_csv(ranking, config_hash)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Vertical bar chart of values in [0, 1].
pub fn bar_chart_svg(title: &str, bars: &[(String, f64)], config_hash: &str) -> String {
    let bar_w = 48.0;
    let gap = 16.0;
    let plot_h = 240.0;
    let left = 56.0;
    let top = 40.0;
    let width = left + bars.len().max(1) as f64 * (bar_w + gap) + gap;
    let height = top + plot_h + 110.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, "<!-- config_sha256: {config_hash} -->");
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" font-size="14" text-anchor="middle">{}</text>"#,
        width / 2.0,
        escape(title)
    );
    for k in 0..=4 {
        let v = k as f64 / 4.0;
        let y = top + plot_h * (1.0 - v);
        let _ = writeln!(
            s,
            r##"<line x1="{left}" y1="{y}" x2="{}" y2="{y}" stroke="#ddd"/><text x="{}" y="{}" text-anchor="end">{v:.2}</text>"##,
            width - gap,
            left - 6.0,
            y + 4.0
        );
    }
    for (i, (label, value)) in bars.iter().enumerate() {
        let v = value.clamp(0.0, 1.0);
        let x = left + gap + i as f64 * (bar_w + gap);
        let h = plot_h * v;
        let y = top + plot_h - h;
        let _ = writeln!(
            s,
            r##"<rect x="{x}" y="{y}" width="{bar_w}" height="{h}" fill="#4a78b0"/><text x="{}" y="{}" text-anchor="middle">{:.3}</text>"##,
            x + bar_w / 2.0,
            y - 4.0,
            value
        );
        let lx = x + bar_w / 2.0;
        let ly = top + plot_h + 12.0;
        let _ = writeln!(
            s,
            r#"<text x="{lx}" y="{ly}" transform="rotate(40 {lx} {ly})">{}</text>"#,
            escape(label)
        );
    }
    s.push_str("</svg>\n");
    s
}
