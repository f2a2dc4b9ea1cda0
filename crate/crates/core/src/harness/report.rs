use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::planner::{summarize, EvalReport, SampleMetrics, Summary};

use super::{HarnessError, RolloutLog};

pub const METRICS_FORMAT: &str = "socialnav-metrics";
pub const METRICS_VERSION: u32 = 1;

const METRICS: [&str; 4] = ["ade", "fde", "heading_violation", "velocity_violation"];

fn metric(m: &SampleMetrics, k: usize) -> f64 {
    [m.ade, m.fde, m.heading_violation, m.velocity_violation][k]
}

fn summary_of(r: &EvalReport, k: usize) -> &Summary {
    [&r.ade, &r.fde, &r.heading_violation, &r.velocity_violation][k]
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum MetricsLine {
    Header { format: String, version: u32, variant: String },
    Sample(SampleMetrics),
    Summary(BTreeMap<String, Summary>),
}

fn data_err(e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Data(e.to_string())
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>, HarnessError> {
    std::fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| HarnessError::Data(format!("{}: {e}", path.display())))
}

/// Writes an evaluation as JSON lines: header, one line per sample, summary.
pub fn write_metrics<W: Write>(report: &EvalReport, mut w: W) -> Result<(), HarnessError> {
    let mut put = |line: &MetricsLine| -> Result<(), HarnessError> {
        serde_json::to_writer(&mut w, line).map_err(data_err)?;
        w.write_all(b"\n").map_err(data_err)
    };
    put(&MetricsLine::Header {
        format: METRICS_FORMAT.into(),
        version: METRICS_VERSION,
        variant: report.variant.clone(),
    })?;
    for m in &report.per_sample {
        put(&MetricsLine::Sample(m.clone()))?;
    }
    let summary = METRICS
        .iter()
        .enumerate()
        .map(|(k, name)| (name.to_string(), *summary_of(report, k)))
        .collect();
    put(&MetricsLine::Summary(summary))
}

/// Reads a metrics file; summaries are recomputed from the samples.
pub fn read_metrics<R: BufRead>(r: R) -> Result<EvalReport, HarnessError> {
    let mut variant = None;
    let mut samples = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(data_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: MetricsLine =
            serde_json::from_str(&line).map_err(|e| HarnessError::Data(format!("metrics line {}: {e}", i + 1)))?;
        match parsed {
            MetricsLine::Header { format, version, variant: v } => {
                if format != METRICS_FORMAT || version != METRICS_VERSION {
                    return Err(HarnessError::Data(format!("unsupported metrics format {format} v{version}")));
                }
                variant = Some(v);
            }
            MetricsLine::Sample(m) => samples.push(m),
            MetricsLine::Summary(_) => {}
        }
    }
    let variant = variant.ok_or_else(|| HarnessError::Data("metrics file lacks a header".into()))?;
    Ok(EvalReport::from_metrics(&variant, samples))
}

/// Per-sample differences `b - a` for every id present in both reports.
pub fn compare_reports(a: &EvalReport, b: &EvalReport) -> Vec<(String, [f64; 4])> {
    let base: BTreeMap<&str, &SampleMetrics> = a.per_sample.iter().map(|m| (m.id.as_str(), m)).collect();
    let mut out: Vec<(String, [f64; 4])> = b
        .per_sample
        .iter()
        .filter_map(|mb| {
            let ma = base.get(mb.id.as_str())?;
            Some((mb.id.clone(), std::array::from_fn(|k| metric(mb, k) - metric(ma, k))))
        })
        .collect();
    out.sort_by(|x, y| x.0.cmp(&y.0));
    out
}

/// Paths written by a report.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReportFiles {
    pub tables: Vec<PathBuf>,
    pub plots: Vec<PathBuf>,
    pub summary: PathBuf,
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    variant: &'a str,
    metric: &'a str,
    count: usize,
    mean: f64,
    median: f64,
    q1: f64,
    q3: f64,
    min: f64,
    max: f64,
    violation_rate: f64,
}

fn summary_row<'a>(variant: &'a str, metric: &'a str, s: &Summary) -> SummaryRow<'a> {
    SummaryRow {
        variant,
        metric,
        count: s.count,
        mean: s.mean,
        median: s.median,
        q1: s.q1,
        q3: s.q3,
        min: s.min,
        max: s.max,
        violation_rate: s.positive_rate,
    }
}

fn file_stem(variant: &str) -> String {
    variant
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect()
}

/// Writes per-sample tables, summary statistics, paired deltas against the
/// first report and one distribution plot per metric.
pub fn metrics_report(reports: &[EvalReport], out_dir: &Path) -> Result<ReportFiles, HarnessError> {
    if reports.is_empty() {
        return Err(HarnessError::Usage("nothing to report".into()));
    }
    std::fs::create_dir_all(out_dir).map_err(data_err)?;
    let mut files = ReportFiles::default();

    for r in reports {
        let path = out_dir.join(format!("samples_{}.csv", file_stem(&r.variant)));
        let mut w = csv::Writer::from_writer(create(&path)?);
        for m in &r.per_sample {
            w.serialize(m).map_err(data_err)?;
        }
        w.flush().map_err(data_err)?;
        files.tables.push(path);
    }

    let path = out_dir.join("summary.csv");
    let mut w = csv::Writer::from_writer(create(&path)?);
    let mut json = serde_json::Map::new();
    for r in reports {
        let mut per = serde_json::Map::new();
        for (k, name) in METRICS.iter().enumerate() {
            let s = summary_of(r, k);
            w.serialize(summary_row(&r.variant, name, s)).map_err(data_err)?;
            per.insert(name.to_string(), serde_json::to_value(s).map_err(data_err)?);
        }
        json.insert(r.variant.clone(), per.into());
    }
    for b in &reports[1..] {
        let a = &reports[0];
        let label = format!("{}-minus-{}", b.variant, a.variant);
        let deltas = compare_reports(a, b);
        let path = out_dir.join(format!("paired_{}.csv", file_stem(&label)));
        let mut pw = csv::Writer::from_writer(create(&path)?);
        pw.write_record(["id", "d_ade", "d_fde", "d_heading_violation", "d_velocity_violation"])
            .map_err(data_err)?;
        for (id, d) in &deltas {
            let mut row = vec![id.clone()];
            row.extend(d.iter().map(|v| v.to_string()));
            pw.write_record(&row).map_err(data_err)?;
        }
        pw.flush().map_err(data_err)?;
        files.tables.push(path);
        let mut per = serde_json::Map::new();
        for (k, name) in METRICS.iter().enumerate() {
            let s = summarize(&deltas.iter().map(|(_, d)| d[k]).collect::<Vec<_>>());
            w.serialize(summary_row(&label, name, &s)).map_err(data_err)?;
            per.insert(name.to_string(), serde_json::to_value(s).map_err(data_err)?);
        }
        json.insert(label, per.into());
    }
    w.flush().map_err(data_err)?;
    files.tables.push(path);

    for (k, name) in METRICS.iter().enumerate() {
        let groups: Vec<(&str, Vec<f64>)> = reports
            .iter()
            .map(|r| (r.variant.as_str(), r.per_sample.iter().map(|m| metric(m, k)).collect()))
            .collect();
        let path = out_dir.join(format!("{name}.svg"));
        std::fs::write(&path, violin_svg(name, &groups)).map_err(data_err)?;
        files.plots.push(path);
    }

    files.summary = out_dir.join("summary.json");
    std::fs::write(&files.summary, serde_json::to_string_pretty(&json).map_err(data_err)?).map_err(data_err)?;
    Ok(files)
}

/// One row of the rollout table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RolloutRow {
    pub scene: String,
    pub ego_id: i64,
    pub variant: String,
    pub status: String,
    pub steps: usize,
    pub min_h: Option<f64>,
    pub ade_vs_truth: f64,
    pub path_length: f64,
    pub max_abs_u_f: f64,
    pub max_abs_u_dtheta: f64,
}

impl From<&RolloutLog> for RolloutRow {
    fn from(l: &RolloutLog) -> Self {
        let max_abs = |f: fn(&super::StepRecord) -> f64| l.steps.iter().map(|s| f(s).abs()).fold(0.0, f64::max);
        Self {
            scene: l.header.scene.clone(),
            ego_id: l.header.ego_id,
            variant: l.header.variant.clone(),
            status: l.summary.status.as_str().into(),
            steps: l.summary.steps,
            min_h: l.summary.min_h,
            ade_vs_truth: l.summary.ade_vs_truth,
            path_length: l.summary.path_length,
            max_abs_u_f: max_abs(|s| s.control.u_f),
            max_abs_u_dtheta: max_abs(|s| s.control.u_dtheta),
        }
    }
}

/// Writes a rollout table, status counts and a plot of robot paths against
/// the recorded tracks.
pub fn rollout_report(logs: &[RolloutLog], out_dir: &Path) -> Result<ReportFiles, HarnessError> {
    if logs.is_empty() {
        return Err(HarnessError::Usage("nothing to report".into()));
    }
    std::fs::create_dir_all(out_dir).map_err(data_err)?;
    let rows: Vec<RolloutRow> = logs.iter().map(RolloutRow::from).collect();
    let table = out_dir.join("rollouts.csv");
    let mut w = csv::Writer::from_writer(create(&table)?);
    for r in &rows {
        w.serialize(r).map_err(data_err)?;
    }
    w.flush().map_err(data_err)?;

    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for r in &rows {
        *counts.entry(r.status.as_str()).or_default() += 1;
    }
    let ade = summarize(&rows.iter().map(|r| r.ade_vs_truth).collect::<Vec<_>>());
    let min_h = rows.iter().filter_map(|r| r.min_h).reduce(f64::min);
    let summary = out_dir.join("rollouts_summary.json");
    let json = serde_json::json!({ "rollouts": rows.len(), "status": counts, "ade_vs_truth": ade, "min_h": min_h });
    std::fs::write(&summary, serde_json::to_string_pretty(&json).map_err(data_err)?).map_err(data_err)?;

    let plot = out_dir.join("rollouts.svg");
    std::fs::write(&plot, paths_svg(logs)).map_err(data_err)?;
    Ok(ReportFiles {
        tables: vec![table],
        plots: vec![plot],
        summary,
    })
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Gaussian kernel density on a grid, Silverman bandwidth.
fn density(xs: &[f64], grid: &[f64]) -> Vec<f64> {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    let span = grid[grid.len() - 1] - grid[0];
    let bw = (1.06 * sd * n.powf(-0.2)).max(span * 1e-3).max(1e-12);
    grid.iter()
        .map(|g| xs.iter().map(|x| (-0.5 * ((g - x) / bw).powi(2)).exp()).sum::<f64>())
        .collect()
}

fn violin_svg(title: &str, groups: &[(&str, Vec<f64>)]) -> String {
    let (w, h, top, bottom, left) = (160.0 * groups.len() as f64 + 80.0, 360.0, 40.0, 320.0, 60.0);
    let all: Vec<f64> = groups.iter().flat_map(|g| g.1.iter().copied()).filter(|v| v.is_finite()).collect();
    let (lo, mut hi) = all.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    if all.is_empty() {
        return String::new();
    }
    if hi - lo < 1e-12 {
        hi = lo + 1.0;
    }
    let y = |v: f64| bottom - (v - lo) / (hi - lo) * (bottom - top);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{title}</text>"#, w / 2.0);
    let _ = writeln!(s, r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{bottom}" stroke="black"/>"#);
    for k in 0..=4 {
        let v = lo + (hi - lo) * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.1}" text-anchor="end">{v:.3}</text>"#,
            left - 6.0,
            y(v) + 4.0
        );
    }
    let grid: Vec<f64> = (0..80).map(|i| lo + (hi - lo) * i as f64 / 79.0).collect();
    for (i, (label, xs)) in groups.iter().enumerate() {
        let cx = left + 80.0 + 160.0 * i as f64;
        let color = PALETTE[i % PALETTE.len()];
        let xs: Vec<f64> = xs.iter().copied().filter(|v| v.is_finite()).collect();
        if !xs.is_empty() {
            let d = density(&xs, &grid);
            let peak = d.iter().cloned().fold(0.0, f64::max).max(1e-300);
            let mut pts: Vec<String> = grid.iter().zip(&d).map(|(g, v)| format!("{:.1},{:.1}", cx + 60.0 * v / peak, y(*g))).collect();
            pts.extend(grid.iter().zip(&d).rev().map(|(g, v)| format!("{:.1},{:.1}", cx - 60.0 * v / peak, y(*g))));
            let _ = writeln!(
                s,
                r#"<polygon points="{}" fill="{color}" fill-opacity="0.35" stroke="{color}"/>"#,
                pts.join(" ")
            );
            let st = summarize(&xs);
            let _ = writeln!(
                s,
                r#"<rect x="{:.1}" y="{:.1}" width="8" height="{:.1}" fill="black"/>"#,
                cx - 4.0,
                y(st.q3),
                (y(st.q1) - y(st.q3)).max(0.5)
            );
            let _ = writeln!(s, r#"<circle cx="{cx:.1}" cy="{:.1}" r="3" fill="white"/>"#, y(st.median));
        }
        let _ = writeln!(s, r#"<text x="{cx:.1}" y="{}" text-anchor="middle">{label}</text>"#, bottom + 20.0);
    }
    s.push_str("</svg>\n");
    s
}

fn paths_svg(logs: &[RolloutLog]) -> String {
    let mut pts: Vec<[f64; 2]> = Vec::new();
    for l in logs {
        pts.extend(&l.header.ground_truth);
        pts.push(l.header.start.pos());
        pts.extend(l.steps.iter().map(|s| s.next.pos()));
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in &pts {
        x0 = x0.min(p[0]);
        x1 = x1.max(p[0]);
        y0 = y0.min(p[1]);
        y1 = y1.max(p[1]);
    }
    let scale = 560.0 / (x1 - x0).max(y1 - y0).max(1e-9);
    let map = |p: [f64; 2]| format!("{:.1},{:.1}", 20.0 + (p[0] - x0) * scale, 580.0 - (p[1] - y0) * scale);
    let mut s = String::from(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"600\" height=\"600\" font-family=\"sans-serif\" font-size=\"11\">\n",
    );
    for (i, l) in logs.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let truth: Vec<String> = l.header.ground_truth.iter().map(|p| map(*p)).collect();
        let mut robot = vec![map(l.header.start.pos())];
        robot.extend(l.steps.iter().map(|st| map(st.next.pos())));
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-dasharray="4 3"/>"#,
            truth.join(" ")
        );
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"><title>{} ego {} {}</title></polyline>"#,
            robot.join(" "),
            l.header.scene,
            l.header.ego_id,
            l.summary.status.as_str()
        );
    }
    s.push_str("</svg>\n");
    s
}
