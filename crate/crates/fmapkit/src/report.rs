//! Aggregation of result directories into a CSV table and SVG charts.
//!
//! Recognized inputs, found recursively:
//! - `pck*.csv`: PCK curves, one line per curve in `pck.svg`
//! - `eval_summary*.csv`: evaluation summaries
//! - `trace*.csv`: adaptation traces
//! - `params*.toml`: adapted parameters, one bar per collection in
//!   `lambda.svg` and `gamma.svg`
//!
//! Files matching these names that fail to parse are skipped with a warning
//! and listed at the end of the report.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use fmapkit_core::eval::area_under_curve;

use crate::formats::{parse_adapted_params, parse_pck, read_trace, AdaptedParams, EvalSummary};
use crate::mesh_io::write_atomic;
use crate::{Error, Result};

/// `(step, lambda, gamma, total)` rows of an adaptation trace.
pub type TraceRows = Vec<(usize, f64, f64, f64)>;

#[derive(Clone, Debug, Default)]
pub struct ReportInputs {
    pub curves: Vec<(String, Vec<(f64, f64)>)>,
    pub summaries: Vec<(String, EvalSummary)>,
    pub traces: Vec<(String, TraceRows)>,
    pub params: Vec<(String, AdaptedParams)>,
    /// `(relative path, reason)` for skipped files.
    pub skipped: Vec<(String, String)>,
}

impl ReportInputs {
    pub fn is_empty(&self) -> bool {
        self.curves.is_empty() && self.summaries.is_empty() && self.traces.is_empty() && self.params.is_empty()
    }
}

fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|e| Error::io(dir, e)))
        .collect::<Result<_>>()?;
    entries.sort();
    for path in entries {
        if path.is_dir() {
            walk(&path, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}

fn parse_summary(text: &str) -> std::result::Result<Vec<EvalSummary>, String> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("label,mean_error,auc,unreachable,vertices") {
        return Err("missing summary header".into());
    }
    let rows = lines
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 5 {
                return Err(format!("expected 5 fields in '{line}'"));
            }
            let bad = || format!("invalid number in '{line}'");
            Ok(EvalSummary {
                label: f[0].to_string(),
                mean_error: f[1].parse().map_err(|_| bad())?,
                auc: f[2].parse().map_err(|_| bad())?,
                unreachable: f[3].parse().map_err(|_| bad())?,
                vertices: f[4].parse().map_err(|_| bad())?,
            })
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if rows.is_empty() {
        return Err("no data rows".into());
    }
    Ok(rows)
}

pub fn collect_inputs(dir: &Path) -> Result<ReportInputs> {
    let mut files = Vec::new();
    walk(dir, &mut files)?;
    let mut inputs = ReportInputs::default();
    for path in files {
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        let rel = path.strip_prefix(dir).unwrap_or(&path).display().to_string();
        let is = |prefix: &str, ext: &str| name.starts_with(prefix) && name.ends_with(ext);
        let kind = if is("pck", ".csv") {
            "pck"
        } else if is("eval_summary", ".csv") {
            "summary"
        } else if is("trace", ".csv") {
            "trace"
        } else if is("params", ".toml") {
            "params"
        } else {
            continue;
        };
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) => {
                log::warn!("skipping {rel}: {e}");
                inputs.skipped.push((rel, e.to_string()));
                continue;
            }
        };
        let parsed: std::result::Result<(), String> = match kind {
            "pck" => parse_pck(&text).map(|c| inputs.curves.push((rel.clone(), c))),
            "summary" => parse_summary(&text).map(|rows| {
                inputs
                    .summaries
                    .extend(rows.into_iter().map(|r| (rel.clone(), r)))
            }),
            "trace" => read_trace(&path)
                .map_err(|e| e.to_string())
                .and_then(|t| if t.is_empty() { Err("empty trace".into()) } else { Ok(t) })
                .map(|t| inputs.traces.push((rel.clone(), t))),
            _ => parse_adapted_params(&text).map(|p| inputs.params.push((rel.clone(), p))),
        };
        if let Err(reason) = parsed {
            log::warn!("skipping malformed {rel}: {reason}");
            inputs.skipped.push((rel, reason));
        }
    }
    Ok(inputs)
}

/// Writes `report.csv`, `report.txt` and the SVG charts into `out`; returns
/// the written paths.
pub fn write_report(inputs: &ReportInputs, out: &Path) -> Result<Vec<PathBuf>> {
    if inputs.is_empty() {
        return Err(Error::EmptyInput("no results found".into()));
    }
    let mut written = Vec::new();
    let mut emit = |name: &str, content: String| -> Result<()> {
        let path = out.join(name);
        write_atomic(&path, content.as_bytes())?;
        written.push(path);
        Ok(())
    };

    let rows = table_rows(inputs);
    let mut csv = String::from("kind,source,label,metric,value\n");
    for r in &rows {
        writeln!(csv, "{},{},{},{},{:?}", r.0, r.1, r.2, r.3, r.4).expect("writing to a String");
    }
    for (path, reason) in &inputs.skipped {
        writeln!(csv, "# skipped {path}: {reason}").expect("writing to a String");
    }
    emit("report.csv", csv)?;

    let mut text = String::new();
    for r in &rows {
        writeln!(text, "{:<8} {:<40} {:<12} {:<12} {:>14.6e}", r.0, r.1, r.2, r.3, r.4).expect("writing to a String");
    }
    if !inputs.skipped.is_empty() {
        text.push_str("\nskipped (malformed):\n");
        for (path, reason) in &inputs.skipped {
            writeln!(text, "  {path}: {reason}").expect("writing to a String");
        }
    }
    emit("report.txt", text)?;

    if !inputs.curves.is_empty() {
        emit("pck.svg", line_chart("PCK", "normalized geodesic error", "fraction of vertices", &inputs.curves))?;
    }
    if !inputs.params.is_empty() {
        let bars = |f: fn(&AdaptedParams) -> f64| -> Vec<(String, f64)> {
            inputs.params.iter().map(|(_, p)| (p.collection.clone(), f(p))).collect()
        };
        emit("lambda.svg", bar_chart("adapted lambda", &bars(|p| p.lambda)))?;
        emit("gamma.svg", bar_chart("adapted gamma", &bars(|p| p.gamma)))?;
    }
    Ok(written)
}

type Row = (&'static str, String, String, &'static str, f64);

fn table_rows(inputs: &ReportInputs) -> Vec<Row> {
    let mut rows: Vec<Row> = Vec::new();
    for (src, curve) in &inputs.curves {
        rows.push(("pck", src.clone(), String::new(), "auc", area_under_curve(curve)));
    }
    for (src, s) in &inputs.summaries {
        rows.push(("summary", src.clone(), s.label.clone(), "mean_error", s.mean_error));
        rows.push(("summary", src.clone(), s.label.clone(), "auc", s.auc));
        rows.push(("summary", src.clone(), s.label.clone(), "unreachable", s.unreachable as f64));
    }
    for (src, trace) in &inputs.traces {
        let last = trace.last().expect("non-empty trace");
        rows.push(("trace", src.clone(), String::new(), "steps", (trace.len() - 1) as f64));
        rows.push(("trace", src.clone(), String::new(), "initial_total", trace[0].3));
        rows.push(("trace", src.clone(), String::new(), "final_total", last.3));
    }
    for (src, p) in &inputs.params {
        rows.push(("params", src.clone(), p.collection.clone(), "lambda", p.lambda));
        rows.push(("params", src.clone(), p.collection.clone(), "gamma", p.gamma));
        rows.push(("params", src.clone(), p.collection.clone(), "final_loss", p.final_loss));
    }
    rows
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 60.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn svg_open(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    )
}

fn axes(s: &mut String, x_label: &str, y_label: &str, y_max: f64) {
    let (x0, y0, x1, y1) = (MARGIN, HEIGHT - MARGIN, WIDTH - MARGIN, MARGIN);
    writeln!(s, "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>").unwrap();
    writeln!(s, "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>").unwrap();
    for i in 0..=4 {
        let v = y_max * i as f64 / 4.0;
        let y = y0 - (y0 - y1) * i as f64 / 4.0;
        writeln!(s, "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>", x0 - 6.0, y + 4.0, tick(v)).unwrap();
    }
    writeln!(s, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>", (x0 + x1) / 2.0, HEIGHT - 15.0, escape(x_label)).unwrap();
    writeln!(
        s,
        "<text x=\"15\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 15 {})\">{}</text>",
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    )
    .unwrap();
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.1e}")
    } else {
        format!("{v:.3}")
    }
}

/// Line plot of `(x, y)` series with `y ∈ [0, 1]`.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let x_max = series
        .iter()
        .flat_map(|(_, pts)| pts.iter().map(|p| p.0))
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut s = svg_open(title);
    axes(&mut s, x_label, y_label, 1.0);
    for i in 0..=4 {
        let v = x_max * i as f64 / 4.0;
        let x = MARGIN + (WIDTH - 2.0 * MARGIN) * i as f64 / 4.0;
        writeln!(s, "<text x=\"{x}\" y=\"{}\" text-anchor=\"middle\">{}</text>", HEIGHT - MARGIN + 16.0, tick(v)).unwrap();
    }
    for (i, (label, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let points: Vec<String> = pts
            .iter()
            .map(|&(x, y)| {
                let px = MARGIN + (WIDTH - 2.0 * MARGIN) * x / x_max;
                let py = HEIGHT - MARGIN - (HEIGHT - 2.0 * MARGIN) * y;
                format!("{px:.2},{py:.2}")
            })
            .collect();
        writeln!(s, "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>", points.join(" ")).unwrap();
        let ly = MARGIN + 16.0 * i as f64;
        writeln!(
            s,
            "<text x=\"{}\" y=\"{ly}\" fill=\"{color}\" text-anchor=\"end\">{}</text>",
            WIDTH - MARGIN - 4.0,
            escape(label)
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

/// Vertical bars, one per labelled value.
pub fn bar_chart(title: &str, bars: &[(String, f64)]) -> String {
    let y_max = bars.iter().map(|b| b.1).fold(0.0f64, f64::max);
    let y_max = if y_max > 0.0 { y_max * 1.1 } else { 1.0 };
    let mut s = svg_open(title);
    axes(&mut s, "collection", title, y_max);
    let slot = (WIDTH - 2.0 * MARGIN) / bars.len().max(1) as f64;
    for (i, (label, v)) in bars.iter().enumerate() {
        let h = (HEIGHT - 2.0 * MARGIN) * (v / y_max).clamp(0.0, 1.0);
        let x = MARGIN + slot * i as f64 + slot * 0.15;
        let y = HEIGHT - MARGIN - h;
        writeln!(
            s,
            "<rect class=\"bar\" x=\"{x:.2}\" y=\"{y:.2}\" width=\"{:.2}\" height=\"{h:.2}\" fill=\"{}\"><title>{}</title></rect>",
            slot * 0.7,
            PALETTE[i % PALETTE.len()],
            escape(label)
        )
        .unwrap();
        writeln!(s, "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>", x + slot * 0.35, y - 4.0, tick(*v)).unwrap();
        writeln!(
            s,
            "<text class=\"label\" x=\"{:.2}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
            x + slot * 0.35,
            HEIGHT - MARGIN + 16.0,
            escape(label)
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bar_chart_has_one_bar_per_entry() {
        let svg = bar_chart("gamma", &[("a".into(), 0.3), ("b<c".into(), 0.7)]);
        assert_eq!(svg.matches("class=\"bar\"").count(), 2);
        assert!(svg.contains("b&lt;c"));
    }

    #[test]
    fn line_chart_has_one_polyline_per_series() {
        let svg = line_chart("t", "x", "y", &[("one".into(), vec![(0.0, 0.0), (0.1, 1.0)])]);
        assert_eq!(svg.matches("<polyline").count(), 1);
    }

    #[test]
    fn summary_parsing() {
        assert!(parse_summary("label,mean_error,auc,unreachable,vertices\nfmap,0.1,0.9,0,10\n").is_ok());
        assert!(parse_summary("label,mean_error,auc,unreachable,vertices\nfmap,x,0.9,0,10\n").is_err());
        assert!(parse_summary("nope\n").is_err());
    }
}
