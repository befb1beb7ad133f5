//! Static reports derived from a results CSV and, optionally, trained
//! manifolds.
//!
//! Plots show `log10` of the error against `r`, `m` or `log10 λ`, one line
//! per series (`method` or `method/kernel`), each point being the lowest
//! error over the remaining axes. Points that cannot be drawn on a log
//! axis (zero error, `λ = 0`) are left out of the plots but stay in the
//! tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use plotters::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::format::{create_dir, write_json};
use crate::manifest::load_manifold;
use crate::results::{read_rows, ResultRow};

/// Series name to `(x, y)` points, x ascending.
pub type SeriesMap = BTreeMap<String, Vec<(f64, f64)>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotData {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: SeriesMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportIndex {
    /// Plot file stem to the data it shows, untransformed.
    pub plots: BTreeMap<String, PlotData>,
    pub files: Vec<PathBuf>,
}

/// Best value per series at each distinct `x`.
pub fn best_by(rows: &[ResultRow], x: impl Fn(&ResultRow) -> Option<f64>) -> SeriesMap {
    let mut best: BTreeMap<String, BTreeMap<u64, (f64, f64)>> = BTreeMap::new();
    for row in rows {
        let (Some(v), Some(xv)) = (row.value, x(row)) else { continue };
        let slot = best.entry(row.series()).or_default();
        // Key on the bit pattern so equal x values collapse; order fixed below.
        let e = slot.entry(xv.to_bits()).or_insert((xv, v));
        if v < e.1 {
            e.1 = v;
        }
    }
    best.into_iter()
        .map(|(k, pts)| {
            let mut v: Vec<(f64, f64)> = pts.into_values().collect();
            v.sort_by(|a, b| a.0.total_cmp(&b.0));
            (k, v)
        })
        .collect()
}

fn draw_plot(path: &Path, plot: &PlotData, log_x: bool) -> Result<()> {
    let tx = |x: f64| if log_x { x.log10() } else { x };
    let pts: BTreeMap<&String, Vec<(f64, f64)>> = plot
        .series
        .iter()
        .map(|(k, v)| {
            let p: Vec<(f64, f64)> = v
                .iter()
                .filter(|(x, y)| *y > 0.0 && (!log_x || *x > 0.0))
                .map(|&(x, y)| (tx(x), y.log10()))
                .collect();
            (k, p)
        })
        .filter(|(_, p)| !p.is_empty())
        .collect();
    let all = pts.values().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        return Ok(());
    }
    let pad = |a: f64, b: f64| if b - a > 0.0 { 0.05 * (b - a) } else { 0.5 };
    let (px, py) = (pad(x0, x1), pad(y0, y1));

    let err = |e: String| CliError::io(path, std::io::Error::other(e));
    let root = SVGBackend::new(path, (800, 560)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| err(e.to_string()))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(&plot.title, ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d((x0 - px)..(x1 + px), (y0 - py)..(y1 + py))
        .map_err(|e| err(e.to_string()))?;
    let x_desc = if log_x { format!("log10 {}", plot.x_label) } else { plot.x_label.clone() };
    chart
        .configure_mesh()
        .x_desc(x_desc)
        .y_desc(format!("log10 {}", plot.y_label))
        .draw()
        .map_err(|e| err(e.to_string()))?;
    for (i, (name, p)) in pts.into_iter().enumerate() {
        let color = Palette99::pick(i).to_rgba();
        chart
            .draw_series(LineSeries::new(p.iter().copied(), color.stroke_width(2)))
            .map_err(|e| err(e.to_string()))?
            .label(name.as_str())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
        chart
            .draw_series(p.iter().map(|&(x, y)| Circle::new((x, y), 3, color.filled())))
            .map_err(|e| err(e.to_string()))?;
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(|e| err(e.to_string()))?;
    root.present().map_err(|e| err(e.to_string()))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

pub fn markdown_table(rows: &[ResultRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "| method | kernel | r | m | epsilon | lambda | normalize | metric | value | source | error |");
    let _ = writeln!(s, "|---|---|---|---|---|---|---|---|---|---|---|");
    for r in rows {
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} | {:e} | {} | {} | {} | {} | {} |",
            r.method,
            r.kernel.as_deref().unwrap_or(""),
            r.r,
            r.m,
            fmt_opt(r.epsilon),
            r.lambda,
            r.normalize,
            r.metric,
            fmt_opt(r.value),
            r.source,
            r.error.as_deref().unwrap_or("").replace('|', "/"),
        );
    }
    s
}

/// Writes plots, tables and `report.json` into `out`.
pub fn build_report(csv: &Path, manifolds: &[PathBuf], out: &Path) -> Result<ReportIndex> {
    let rows = read_rows(csv)?;
    create_dir(out)?;
    let mut index = ReportIndex {
        plots: BTreeMap::new(),
        files: Vec::new(),
    };

    let metrics: Vec<&str> = {
        let mut m: Vec<&str> = rows.iter().map(|r| r.metric.as_str()).collect();
        m.sort_unstable();
        m.dedup();
        m
    };
    let y_label = metrics.join("/");
    type Axis = (&'static str, &'static str, bool, fn(&ResultRow) -> Option<f64>);
    let axes: [Axis; 3] = [
        ("error_vs_r", "r", false, |r| Some(r.r as f64)),
        ("error_vs_m", "m", false, |r| (r.m > 0).then_some(r.m as f64)),
        ("error_vs_lambda", "lambda", true, |r| (r.method != "pod").then_some(r.lambda)),
    ];
    for (stem, x_label, log_x, x) in axes {
        let series = best_by(&rows, x);
        if series.is_empty() {
            continue;
        }
        let plot = PlotData {
            title: format!("error vs {x_label}"),
            x_label: x_label.into(),
            y_label: y_label.clone(),
            series,
        };
        let path = out.join(format!("{stem}.svg"));
        draw_plot(&path, &plot, log_x)?;
        index.files.push(path);
        index.plots.insert(stem.into(), plot);
    }

    if !manifolds.is_empty() {
        let mut series = SeriesMap::new();
        let mut table = String::from("manifold,j,sigma_ratio\n");
        for dir in manifolds {
            let (mf, _) = load_manifold(dir)?;
            let sv = &mf.basis.singular_values;
            let s1 = sv.first().copied().unwrap_or(0.0);
            if !(s1 > 0.0) {
                continue;
            }
            let name = dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let pts: Vec<(f64, f64)> = sv.iter().enumerate().map(|(j, s)| ((j + 1) as f64, s / s1)).collect();
            for (j, y) in &pts {
                let _ = writeln!(table, "{name},{j},{y}");
            }
            series.insert(name, pts);
        }
        let plot = PlotData {
            title: "singular value decay".into(),
            x_label: "j".into(),
            y_label: "sigma_j / sigma_1".into(),
            series,
        };
        let path = out.join("singular_values.svg");
        draw_plot(&path, &plot, false)?;
        let csv_path = out.join("singular_values.csv");
        std::fs::write(&csv_path, table).map_err(|e| CliError::io(&csv_path, e))?;
        index.files.extend([path, csv_path]);
        index.plots.insert("singular_values".into(), plot);
    }

    let mut md = String::from("# Results\n\n## Best per series\n\n");
    let summary = crate::sweep::summarize(&rows);
    md += &markdown_table(&summary.best.values().cloned().collect::<Vec<_>>());
    md += &format!("\n## All rows ({} total, {} failed)\n\n", summary.rows, summary.failures);
    md += &markdown_table(&rows);
    let md_path = out.join("results.md");
    std::fs::write(&md_path, md).map_err(|e| CliError::io(&md_path, e))?;
    index.files.push(md_path);

    let json_path = out.join("report.json");
    index.files.push(json_path.clone());
    write_json(&json_path, &index)?;
    Ok(index)
}
