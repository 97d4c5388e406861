//! Static SVG figures: log-energy boxplots per filter and top-k waveform
//! grids. Everything is read back from the report files so `plot` can run
//! on a finished output directory.

use std::fmt::Write as _;
use std::path::Path;

use cspwave_core::band::BandName;
use cspwave_core::evaluate::BoxplotStats;
use serde::Deserialize;

use crate::error::CliError;

const COLORS: [&str; 2] = ["#c0392b", "#2471a3"];

#[derive(Debug, Clone, Deserialize)]
pub struct EvalStats {
    pub preictal: Option<BoxplotStats>,
    pub interictal: Option<BoxplotStats>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct EvalRow {
    pub band: BandName,
    pub filter: usize,
    pub auc: f64,
    pub n_pos: usize,
    pub n_neg: usize,
    pub boxplot_stats: EvalStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveformRow {
    pub window_id: usize,
    pub start_us: i64,
    pub energy: f64,
    pub samples: Vec<f64>,
}

fn read(path: &Path) -> Result<String, CliError> {
    if !path.is_file() {
        return Err(CliError::MissingReportFile(path.to_path_buf()));
    }
    std::fs::read_to_string(path).map_err(CliError::io(path))
}

pub fn parse_waveform_csv(text: &str) -> Result<Vec<WaveformRow>, String> {
    let mut rows = Vec::new();
    for (n, line) in text.lines().enumerate().skip(1) {
        if line.is_empty() {
            continue;
        }
        let bad = |what: &str| format!("line {}: bad {what}", n + 1);
        let mut f = line.split(',');
        let window_id = f.next().and_then(|v| v.parse().ok()).ok_or_else(|| bad("window_id"))?;
        let start_us = f.next().and_then(|v| v.parse().ok()).ok_or_else(|| bad("start_us"))?;
        let energy = f
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad("energy_filtered"))?;
        let samples = f
            .map(str::parse)
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|_| bad("sample"))?;
        rows.push(WaveformRow {
            window_id,
            start_us,
            energy,
            samples,
        });
    }
    Ok(rows)
}

fn fmt_num(x: f64) -> String {
    let s = format!("{x:.2}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Log-energy boxplots of filter `t` for every band, both conditions side by
/// side, AUC printed along the top axis.
pub fn boxplot_svg(rows: &[&EvalRow], t: usize) -> String {
    let (left, right, top, bottom) = (60.0, 20.0, 60.0, 50.0);
    let group = 70.0;
    let plot_h = 260.0;
    let width = left + right + group * rows.len().max(1) as f64;
    let height = top + plot_h + bottom;

    let stats = |r: &EvalRow| [r.boxplot_stats.preictal.clone(), r.boxplot_stats.interictal.clone()];
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for r in rows {
        for s in stats(r).iter().flatten() {
            lo = lo.min(s.min);
            hi = hi.max(s.max);
        }
    }
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    let (lo, hi) = (lo.floor(), hi.ceil().max(lo.floor() + 1.0));
    let y = |v: f64| top + plot_h * (hi - v) / (hi - lo);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="16" text-anchor="middle" font-size="13">Log-energy (log10 µV²) of filter w{t} outputs</text>"#,
        width / 2.0
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{}" stroke="black"/>"#,
        top + plot_h
    );
    let mut v = lo;
    while v <= hi + 1e-9 {
        let yy = y(v);
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{yy}" x2="{left}" y2="{yy}" stroke="black"/><text x="{}" y="{}" text-anchor="end">{}</text>"#,
            left - 4.0,
            left - 6.0,
            yy + 4.0,
            fmt_num(v)
        );
        v += ((hi - lo) / 8.0).ceil().max(1.0);
    }
    let _ = writeln!(svg, r#"<text x="{}" y="40" text-anchor="start">AUC</text>"#, 4.0);
    for (i, r) in rows.iter().enumerate() {
        let cx = left + group * (i as f64 + 0.5);
        let _ = writeln!(
            svg,
            r#"<text x="{cx}" y="40" text-anchor="middle">{}</text>"#,
            fmt_num(r.auc)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{cx}" y="{}" text-anchor="middle">{}</text>"#,
            top + plot_h + 18.0,
            r.band
        );
        for (c, s) in stats(r).iter().enumerate() {
            let Some(s) = s else { continue };
            let bx = cx + if c == 0 { -24.0 } else { 4.0 };
            let w = 20.0;
            let mid = bx + w / 2.0;
            let color = COLORS[c];
            let _ = writeln!(
                svg,
                r#"<line x1="{mid}" y1="{}" x2="{mid}" y2="{}" stroke="{color}"/>"#,
                y(s.whisker_high),
                y(s.whisker_low)
            );
            for wv in [s.whisker_low, s.whisker_high] {
                let _ = writeln!(
                    svg,
                    r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{color}"/>"#,
                    bx + 4.0,
                    y(wv),
                    bx + w - 4.0,
                    y(wv)
                );
            }
            let _ = writeln!(
                svg,
                r#"<rect x="{bx}" y="{}" width="{w}" height="{}" fill="{color}" fill-opacity="0.25" stroke="{color}"/>"#,
                y(s.q3),
                (y(s.q1) - y(s.q3)).max(0.5)
            );
            let _ = writeln!(
                svg,
                r#"<line x1="{bx}" y1="{}" x2="{}" y2="{}" stroke="{color}" stroke-width="2"/>"#,
                y(s.median),
                bx + w,
                y(s.median)
            );
            for ev in [s.min, s.max] {
                if ev < s.whisker_low || ev > s.whisker_high {
                    let _ = writeln!(
                        svg,
                        r#"<circle cx="{mid}" cy="{}" r="2" fill="none" stroke="{color}"/>"#,
                        y(ev)
                    );
                }
            }
        }
    }
    let ly = height - 12.0;
    for (c, label) in ["preictal", "interictal"].iter().enumerate() {
        let lx = left + 110.0 * c as f64;
        let _ = writeln!(
            svg,
            r#"<rect x="{lx}" y="{}" width="10" height="10" fill="{}"/><text x="{}" y="{ly}">{label}</text>"#,
            ly - 9.0,
            COLORS[c],
            lx + 14.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Magnification giving a trace of peak `peak` roughly the height of the
/// largest trace, from 1, 2, 5, 10, 20, ...
pub fn trace_scale(peak: f64, largest: f64) -> f64 {
    if peak.is_nan() || largest.is_nan() || peak <= 0.0 || largest <= 0.0 {
        return 1.0;
    }
    let mut best = 1.0;
    let mut base = 1.0;
    while base < 1e6 {
        for m in [1.0, 2.0, 5.0] {
            let f = base * m;
            if f * peak <= largest * (1.0 + 1e-12) {
                best = f;
            }
        }
        base *= 10.0;
    }
    best
}

/// One trace per row, each scaled by the printed factor.
pub fn waveform_grid_svg(rows: &[WaveformRow], caption: &str) -> String {
    let (left, right, top, row_h) = (110.0, 20.0, 36.0, 44.0);
    let plot_w = 560.0;
    let width = left + plot_w + right;
    let height = top + row_h * rows.len().max(1) as f64 + 30.0;
    let peak = |r: &WaveformRow| r.samples.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let largest = rows.iter().map(peak).fold(0.0f64, f64::max);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="18" text-anchor="middle" font-size="13">{}</text>"#,
        width / 2.0,
        escape(caption)
    );
    if rows.is_empty() {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">no waveforms</text>"#,
            width / 2.0,
            top + row_h / 2.0
        );
    }
    for (i, r) in rows.iter().enumerate() {
        let base = top + row_h * (i as f64 + 0.5);
        let f = trace_scale(peak(r), largest);
        let amp = if largest > 0.0 {
            (row_h / 2.0 - 2.0) / largest
        } else {
            0.0
        };
        let n = r.samples.len().max(2);
        let mut points = String::new();
        for (j, x) in r.samples.iter().enumerate() {
            let px = left + plot_w * j as f64 / (n - 1) as f64;
            let py = base - x * f * amp;
            let _ = write!(points, "{px:.2},{py:.2} ");
        }
        let _ = writeln!(
            svg,
            r#"<text x="4" y="{}">#{} ×{}</text>"#,
            base + 4.0,
            r.window_id,
            fmt_num(f)
        );
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="black" stroke-width="0.8"/>"#,
            points.trim_end()
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{left}" y="{}">row height = {} µV peak-to-peak at ×1</text>"#,
        height - 10.0,
        fmt_num(2.0 * largest)
    );
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders every figure for the report in `dir`, returning (file, svg).
pub fn render(dir: &Path) -> Result<Vec<(String, String)>, CliError> {
    let eval_path = dir.join("evaluation.json");
    let rows: Vec<EvalRow> = serde_json::from_str(&read(&eval_path)?).map_err(|e| CliError::Stage {
        stage: "plot",
        message: format!("{}: {e}", eval_path.display()),
    })?;
    let mut out = Vec::new();
    for t in 1..=2 {
        let sel: Vec<&EvalRow> = rows.iter().filter(|r| r.filter == t).collect();
        out.push((format!("boxplot_w{t}.svg"), boxplot_svg(&sel, t)));
    }
    let mut bands: Vec<BandName> = rows.iter().map(|r| r.band).collect();
    bands.dedup();
    for band in bands {
        for s in 1..=2 {
            for t in 1..=2 {
                let name = format!("waveforms_{band}_{s}_{t}");
                let path = dir.join(format!("{name}.csv"));
                let parsed = parse_waveform_csv(&read(&path)?).map_err(|e| CliError::Stage {
                    stage: "plot",
                    message: format!("{}: {e}", path.display()),
                })?;
                let condition = if s == 1 { "preictal" } else { "interictal" };
                let caption = format!(
                    "{band}: top {} {condition} windows ranked and projected with w{t}",
                    parsed.len()
                );
                out.push((format!("{name}.svg"), waveform_grid_svg(&parsed, &caption)));
            }
        }
    }
    Ok(out)
}
