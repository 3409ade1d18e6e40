//! Deterministic SVG plots with CSV companions, drawn from report data only.
//!
//! Ordered features get line plots; binary and categorical features get bars
//! (ICE) and bars with min/max whiskers (MUCE). The y axis is always [0, 1].

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::feature::FeatureValue;
use crate::grid::StabilityInterval;
use crate::report::{csv_field, ExplanationReport, FeatureReport};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 56.0;

const MAX_COLOR: &str = "#1f5fbf";
const MIN_COLOR: &str = "#e0a800";
const ICE_COLOR: &str = "#444444";
const OBS_COLOR: &str = "#1a9641";
const RANGE_COLOR: &str = "#d7191c";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Line,
    BarsWithWhiskers,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chart {
    Ice,
    Muce,
}

impl Chart {
    fn tag(self) -> &'static str {
        match self {
            Chart::Ice => "ice",
            Chart::Muce => "muce",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub kind: PlotKind,
    pub chart: Chart,
    pub title: String,
}

impl PlotSpec {
    pub fn for_feature(feature: &FeatureReport, chart: Chart) -> Self {
        let kind = if feature.ordered() {
            PlotKind::Line
        } else {
            PlotKind::BarsWithWhiskers
        };
        let title = format!("{} {}", chart.tag().to_uppercase(), feature.name);
        Self { kind, chart, title }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlotFiles {
    pub svg: String,
    pub csv: String,
}

pub fn render(feature: &FeatureReport, chart: Chart) -> PlotFiles {
    let spec = PlotSpec::for_feature(feature, chart);
    match (spec.kind, chart) {
        (PlotKind::Line, Chart::Ice) => line_ice(&spec, feature),
        (PlotKind::Line, Chart::Muce) => line_muce(&spec, feature),
        (PlotKind::BarsWithWhiskers, _) => bars(&spec, feature),
    }
}

/// File-name-safe version of a feature name.
pub fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Writes `<feature>_ice.{svg,csv}` and `<feature>_muce.{svg,csv}` for every
/// feature; returns the SVG paths.
pub fn emit_plots(report: &ExplanationReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for feature in &report.features {
        for chart in [Chart::Ice, Chart::Muce] {
            let files = render(feature, chart);
            let stem = format!("{}_{}", file_stem(&feature.name), chart.tag());
            let svg = dir.join(format!("{stem}.svg"));
            std::fs::write(&svg, &files.svg)?;
            std::fs::write(dir.join(format!("{stem}.csv")), &files.csv)?;
            written.push(svg);
        }
    }
    Ok(written)
}

struct Frame {
    x0: f64,
    x1: f64,
}

impl Frame {
    fn for_interval(lo: f64, hi: f64) -> Self {
        let span = hi - lo;
        let pad = if span > 0.0 { 0.05 * span } else { 0.5f64.max(0.05 * lo.abs()) };
        Self { x0: lo - pad, x1: hi + pad }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)
    }
}

fn py(y: f64) -> f64 {
    TOP + (1.0 - y.clamp(0.0, 1.0)) * (HEIGHT - TOP - BOTTOM)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn open_svg(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{:.2}" y="20" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(title));
    // y axis, fixed to [0, 1]
    for i in 0..=4 {
        let y = i as f64 * 0.25;
        let _ = writeln!(
            out,
            r##"<line x1="{LEFT}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#e6e6e6"/><text x="{:.2}" y="{:.2}" text-anchor="end">{:.2}</text>"##,
            py(y),
            WIDTH - RIGHT,
            py(y),
            LEFT - 6.0,
            py(y) + 4.0,
            y
        );
    }
    let _ = writeln!(
        out,
        r##"<line x1="{LEFT}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#999999" stroke-dasharray="4 4"/>"##,
        py(0.5),
        WIDTH - RIGHT,
        py(0.5)
    );
    let _ = writeln!(
        out,
        r##"<rect x="{LEFT}" y="{TOP}" width="{:.2}" height="{:.2}" fill="none" stroke="#333333"/>"##,
        WIDTH - LEFT - RIGHT,
        HEIGHT - TOP - BOTTOM
    );
}

fn x_ticks(out: &mut String, frame: &Frame, lo: f64, hi: f64, label: &str) {
    let ticks: Vec<f64> = if hi > lo {
        (0..=4).map(|i| lo + (hi - lo) * i as f64 / 4.0).collect()
    } else {
        vec![lo]
    };
    for t in ticks {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            frame.px(t),
            HEIGHT - BOTTOM + 16.0,
            fmt_tick(t)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        HEIGHT - 12.0,
        escape(label)
    );
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".to_string() } else { s.to_string() }
}

fn polyline(out: &mut String, frame: &Frame, pts: &[(f64, f64)], color: &str, class: &str, dashed: bool) {
    let coords: Vec<String> = pts.iter().map(|(x, y)| format!("{:.2},{:.2}", frame.px(*x), py(*y))).collect();
    let dash = if dashed { r#" stroke-dasharray="6 3""# } else { "" };
    let _ = writeln!(
        out,
        r#"<polyline class="{class}" points="{}" fill="none" stroke="{color}" stroke-width="2"{dash}/>"#,
        coords.join(" ")
    );
}

fn star(out: &mut String, cx: f64, cy: f64, r: f64, color: &str, class: &str) {
    let mut pts = Vec::with_capacity(10);
    for k in 0..10 {
        let radius = if k % 2 == 0 { r } else { r * 0.45 };
        let angle = std::f64::consts::PI * (k as f64 / 5.0 - 0.5);
        pts.push(format!("{:.2},{:.2}", cx + radius * angle.cos(), cy + radius * angle.sin()));
    }
    let _ = writeln!(out, r#"<polygon class="{class}" points="{}" fill="{color}"/>"#, pts.join(" "));
}

fn triangle(out: &mut String, cx: f64, cy: f64, up: bool, color: &str, class: &str) {
    let s = if up { -1.0 } else { 1.0 };
    let _ = writeln!(
        out,
        r##"<polygon class="{class}" points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" fill="{color}" stroke="#000000"/>"##,
        cx,
        cy + s * 7.0,
        cx - 6.0,
        cy - s * 5.0,
        cx + 6.0,
        cy - s * 5.0
    );
}

fn interval_bounds(feature: &FeatureReport) -> (f64, f64) {
    feature.interval.bounds().unwrap_or((0.0, 1.0))
}

fn num(v: &FeatureValue) -> f64 {
    v.as_f64().unwrap_or(0.0)
}

/// Markers shared by both line plots: the observation (green star) and the
/// two stability-range endpoints (red stars), placed on the ICE curve.
fn common_markers(out: &mut String, frame: &Frame, feature: &FeatureReport) {
    let ice = &feature.ice;
    let (lo, hi) = interval_bounds(feature);
    let at = |x: f64| {
        ice.points
            .iter()
            .min_by(|a, b| (num(&a.value) - x).abs().total_cmp(&(num(&b.value) - x).abs()))
            .map_or(0.5, |p| p.prediction)
    };
    for x in [lo, hi] {
        star(out, frame.px(x), py(at(x)), 7.0, RANGE_COLOR, "marker range");
    }
    star(
        out,
        frame.px(num(&ice.observation_value)),
        py(ice.observation_prediction),
        9.0,
        OBS_COLOR,
        "marker observation",
    );
}

fn line_ice(spec: &PlotSpec, feature: &FeatureReport) -> PlotFiles {
    let (lo, hi) = interval_bounds(feature);
    let frame = Frame::for_interval(lo, hi);
    let mut svg = String::new();
    open_svg(&mut svg, &spec.title);
    let pts: Vec<(f64, f64)> = feature.ice.points.iter().map(|p| (num(&p.value), p.prediction)).collect();
    polyline(&mut svg, &frame, &pts, ICE_COLOR, "curve ice", false);
    common_markers(&mut svg, &frame, feature);
    x_ticks(&mut svg, &frame, lo, hi, &feature.name);
    svg.push_str("</svg>\n");

    let mut csv = String::from("value,prediction\n");
    for p in &feature.ice.points {
        let _ = writeln!(csv, "{},{}", p.value, p.prediction);
    }
    PlotFiles { svg, csv }
}

fn line_muce(spec: &PlotSpec, feature: &FeatureReport) -> PlotFiles {
    let (lo, hi) = interval_bounds(feature);
    let frame = Frame::for_interval(lo, hi);
    let mut svg = String::new();
    open_svg(&mut svg, &spec.title);
    let ice: Vec<(f64, f64)> = feature.ice.points.iter().map(|p| (num(&p.value), p.prediction)).collect();
    polyline(&mut svg, &frame, &ice, ICE_COLOR, "curve ice", true);
    for (curve, color, class) in [
        (&feature.max_curve, MAX_COLOR, "curve max"),
        (&feature.min_curve, MIN_COLOR, "curve min"),
    ] {
        let pts: Vec<(f64, f64)> = curve.points.iter().map(|p| (num(&p.value), p.prediction)).collect();
        polyline(&mut svg, &frame, &pts, color, class, false);
    }
    common_markers(&mut svg, &frame, feature);
    let value_at = |index: i64| {
        feature
            .max_curve
            .points
            .iter()
            .find(|p| p.index == index)
            .map_or(0.0, |p| num(&p.value))
    };
    triangle(
        &mut svg,
        frame.px(value_at(feature.extremal_max.index)),
        py(feature.extremal_max.prediction),
        true,
        MAX_COLOR,
        "marker extremal-max",
    );
    triangle(
        &mut svg,
        frame.px(value_at(feature.extremal_min.index)),
        py(feature.extremal_min.prediction),
        false,
        MIN_COLOR,
        "marker extremal-min",
    );
    x_ticks(&mut svg, &frame, lo, hi, &feature.name);
    svg.push_str("</svg>\n");

    let mut csv = String::from("index,value,max_prediction,min_prediction\n");
    for (a, b) in feature.max_curve.points.iter().zip(&feature.min_curve.points) {
        let _ = writeln!(csv, "{},{},{},{}", a.index, a.value, a.prediction, b.prediction);
    }
    PlotFiles { svg, csv }
}

fn bars(spec: &PlotSpec, feature: &FeatureReport) -> PlotFiles {
    let ice = &feature.ice.points;
    let n = ice.len().max(1);
    let slot = (WIDTH - LEFT - RIGHT) / n as f64;
    let bar_w = slot * 0.5;
    let ranked = matches!(feature.interval, StabilityInterval::Categories { .. });
    let mut svg = String::new();
    open_svg(&mut svg, &spec.title);
    let mut csv = match spec.chart {
        Chart::Ice => String::from("position,value,rank,prediction\n"),
        Chart::Muce => String::from("position,value,rank,ice_prediction,max_prediction,min_prediction\n"),
    };
    for (i, p) in ice.iter().enumerate() {
        let cx = LEFT + slot * (i as f64 + 0.5);
        let own = p.value == feature.ice.observation_value;
        let stroke = if own { OBS_COLOR } else { "#333333" };
        let _ = writeln!(
            svg,
            r##"<rect class="bar" x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#9ecae1" stroke="{stroke}" stroke-width="{}"/>"##,
            cx - bar_w / 2.0,
            py(p.prediction),
            bar_w,
            py(0.0) - py(p.prediction),
            if own { 3 } else { 1 }
        );
        let label = if ranked {
            format!("{} (#{})", p.value, i + 1)
        } else {
            p.value.to_string()
        };
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            cx,
            HEIGHT - BOTTOM + 16.0,
            escape(&label)
        );
        let rank = if ranked { (i + 1).to_string() } else { String::new() };
        match spec.chart {
            Chart::Ice => {
                let _ = writeln!(csv, "{i},{},{rank},{}", csv_field(&p.value.to_string()), p.prediction);
            }
            Chart::Muce => {
                let hi = feature.max_curve.points.get(i).map_or(p.prediction, |q| q.prediction);
                let lo = feature.min_curve.points.get(i).map_or(p.prediction, |q| q.prediction);
                let _ = writeln!(
                    svg,
                    r##"<g class="whisker"><line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="#000000" stroke-width="2"/><line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{MAX_COLOR}" stroke-width="2"/><line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{MIN_COLOR}" stroke-width="2"/></g>"##,
                    py(hi),
                    py(lo),
                    cx - bar_w / 4.0,
                    py(hi),
                    cx + bar_w / 4.0,
                    py(hi),
                    cx - bar_w / 4.0,
                    py(lo),
                    cx + bar_w / 4.0,
                    py(lo)
                );
                let _ = writeln!(
                    csv,
                    "{i},{},{rank},{},{hi},{lo}",
                    csv_field(&p.value.to_string()),
                    p.prediction
                );
            }
        }
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        HEIGHT - 12.0,
        escape(&feature.name)
    );
    svg.push_str("</svg>\n");
    PlotFiles { svg, csv }
}
