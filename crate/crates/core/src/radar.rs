//! SVG radar charts of the six factor scores and per-factor trend plots.
//!
//! Axis `i` points at `-90° + i·60°` (top, then clockwise) in
//! [`RiskFactor`] order. Colours come from a fixed palette: resident blue
//! `#1f77b4`, risky template red `#d62728`, history grey `#7f7f7f`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::risk::RiskFactor;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RenderError {
    #[error("nothing to render: no series or points")]
    EmptySeries,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Colour {
    Resident,
    Risky,
    Historical,
}

impl Colour {
    pub fn hex(self) -> &'static str {
        match self {
            Colour::Resident => "#1f77b4",
            Colour::Risky => "#d62728",
            Colour::Historical => "#7f7f7f",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarSeries {
    pub label: String,
    pub scores: [Option<f64>; 6],
    pub colour: Colour,
    pub fill_opacity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarSpec {
    /// Listed first is drawn on top.
    pub series: Vec<RadarSeries>,
    pub size_px: u32,
    pub ring_count: u32,
    /// Axes to emphasise (e.g. flagged factors).
    #[serde(default)]
    pub emphasis: Vec<RiskFactor>,
}

impl RadarSpec {
    pub fn new(series: Vec<RadarSeries>) -> Self {
        RadarSpec {
            series,
            size_px: 640,
            ring_count: 5,
            emphasis: Vec::new(),
        }
    }

    pub fn center(&self) -> (f64, f64) {
        let c = f64::from(self.size_px) / 2.0;
        (c, c)
    }

    pub fn radius(&self) -> f64 {
        f64::from(self.size_px) / 2.0 - 60.0
    }
}

pub fn axis_point(index: usize, score: f64, center: (f64, f64), radius: f64) -> (f64, f64) {
    let angle = (-90.0 + 60.0 * index as f64) * PI / 180.0;
    (
        center.0 + score * radius * angle.cos(),
        center.1 + score * radius * angle.sin(),
    )
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn points(vertices: &[(f64, f64)]) -> String {
    vertices
        .iter()
        .map(|(x, y)| format!("{x:.2},{y:.2}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Renders the overlaid radar chart. Null scores sit at the centre with a
/// hollow marker and a footnote.
pub fn render_radar(spec: &RadarSpec) -> Result<String, RenderError> {
    if spec.series.is_empty() {
        return Err(RenderError::EmptySeries);
    }
    let size = spec.size_px;
    let center = spec.center();
    let radius = spec.radius();
    let legend_rows = spec.series.len() as u32;
    let height = size + 24 * legend_rows + 24;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{size}" height="{height}" viewBox="0 0 {size} {height}" font-family="sans-serif">"#
    );
    let _ = writeln!(svg, r#"<rect width="{size}" height="{height}" fill="white"/>"#);

    let _ = writeln!(svg, r#"<g class="rings">"#);
    for ring in 1..=spec.ring_count {
        let frac = f64::from(ring) / f64::from(spec.ring_count);
        let ring_pts: Vec<_> = (0..6).map(|i| axis_point(i, frac, center, radius)).collect();
        let _ = writeln!(
            svg,
            r##"<polygon class="ring" points="{}" fill="none" stroke="#dddddd" stroke-width="1"/>"##,
            points(&ring_pts)
        );
    }
    let _ = writeln!(svg, "</g>");

    let _ = writeln!(svg, r#"<g class="axes">"#);
    for (i, factor) in RiskFactor::ALL.iter().enumerate() {
        let (x, y) = axis_point(i, 1.0, center, radius);
        let emphasised = spec.emphasis.contains(factor);
        let (stroke, width) = if emphasised { ("#d62728", 3) } else { ("#999999", 1) };
        let _ = writeln!(
            svg,
            r#"<line class="axis" data-factor="{factor}" x1="{:.2}" y1="{:.2}" x2="{x:.2}" y2="{y:.2}" stroke="{stroke}" stroke-width="{width}"/>"#,
            center.0, center.1
        );
    }
    for (i, factor) in RiskFactor::ALL.iter().enumerate() {
        let (x, y) = axis_point(i, 1.0 + 28.0 / radius, center, radius);
        let anchor = match i {
            0 | 3 => "middle",
            1 | 2 => "start",
            _ => "end",
        };
        let weight = if spec.emphasis.contains(factor) { "bold" } else { "normal" };
        let _ = writeln!(
            svg,
            r##"<text class="axis-label" data-factor="{factor}" x="{x:.2}" y="{y:.2}" text-anchor="{anchor}" dominant-baseline="middle" font-size="14" font-weight="{weight}" fill="#333333">{}</text>"##,
            escape(factor.label())
        );
    }
    let _ = writeln!(svg, "</g>");

    let mut any_null = false;
    let _ = writeln!(svg, r#"<g class="series-layer">"#);
    for (order, series) in spec.series.iter().enumerate().rev() {
        let vertices: Vec<_> = series
            .scores
            .iter()
            .enumerate()
            .map(|(i, s)| axis_point(i, s.unwrap_or(0.0).clamp(0.0, 1.0), center, radius))
            .collect();
        let colour = series.colour.hex();
        let _ = writeln!(
            svg,
            r#"<polygon class="series" data-series="{order}" data-label="{}" points="{}" fill="{colour}" fill-opacity="{:.2}" stroke="{colour}" stroke-width="2"/>"#,
            escape(&series.label),
            points(&vertices),
            series.fill_opacity
        );
        for (i, s) in series.scores.iter().enumerate() {
            if s.is_none() {
                any_null = true;
                let (x, y) = vertices[i];
                let _ = writeln!(
                    svg,
                    r#"<circle class="null-marker" data-factor="{}" cx="{x:.2}" cy="{y:.2}" r="5" fill="white" stroke="{colour}" stroke-width="1.5"/>"#,
                    RiskFactor::ALL[i]
                );
            }
        }
    }
    let _ = writeln!(svg, "</g>");

    let _ = writeln!(svg, r#"<g class="legend">"#);
    for (row, series) in spec.series.iter().enumerate() {
        let y = size + 24 * row as u32;
        let _ = writeln!(
            svg,
            r##"<g class="legend-entry"><rect x="20" y="{}" width="14" height="14" fill="{}" fill-opacity="{:.2}" stroke="{}"/><text x="42" y="{}" font-size="13" fill="#333333">{}</text></g>"##,
            y,
            series.colour.hex(),
            series.fill_opacity.max(0.3),
            series.colour.hex(),
            y + 11,
            escape(&series.label)
        );
    }
    let _ = writeln!(svg, "</g>");
    if any_null {
        let _ = writeln!(
            svg,
            r##"<text class="footnote" x="20" y="{}" font-size="12" fill="#555555">○ no data for this factor (plotted at centre)</text>"##,
            size + 24 * legend_rows + 12
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Renders one factor's score over time on a fixed `[0, 1]` scale, with the
/// template level as a dashed reference line.
pub fn render_trend(
    points_in: &[(NaiveDate, Option<f64>)],
    factor: RiskFactor,
    template_level: Option<f64>,
) -> Result<String, RenderError> {
    if points_in.is_empty() {
        return Err(RenderError::EmptySeries);
    }
    let (width, height) = (640.0, 320.0);
    let (left, right, top, bottom) = (50.0, 20.0, 30.0, 40.0);
    let plot_w = width - left - right;
    let plot_h = height - top - bottom;
    let first = points_in[0].0;
    let span = (points_in[points_in.len() - 1].0 - first).num_days().max(1) as f64;
    let x_of = |d: NaiveDate| left + plot_w * ((d - first).num_days() as f64 / span);
    let y_of = |s: f64| top + (1.0 - s.clamp(0.0, 1.0)) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif">"#
    );
    let _ = writeln!(svg, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r##"<text class="title" x="{left}" y="18" font-size="14" fill="#333333">{}</text>"##,
        escape(factor.label())
    );
    for tick in [0.0, 0.5, 1.0] {
        let y = y_of(tick);
        let _ = writeln!(
            svg,
            r##"<line class="grid" x1="{left}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#eeeeee"/><text x="{:.2}" y="{y:.2}" font-size="11" text-anchor="end" dominant-baseline="middle" fill="#666666">{tick:.1}</text>"##,
            left + plot_w,
            left - 6.0
        );
    }
    if let Some(level) = template_level {
        let y = y_of(level);
        let _ = writeln!(
            svg,
            r##"<line class="reference" x1="{left}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#d62728" stroke-dasharray="6 4" stroke-width="1.5"/>"##,
            left + plot_w
        );
    }

    // Consecutive non-null points form one polyline; nulls break the line.
    let mut segments: Vec<Vec<(f64, f64)>> = vec![Vec::new()];
    for (date, score) in points_in {
        match score {
            Some(s) => segments.last_mut().expect("non-empty").push((x_of(*date), y_of(*s))),
            None => segments.push(Vec::new()),
        }
    }
    for seg in segments.iter().filter(|s| s.len() > 1) {
        let _ = writeln!(
            svg,
            r##"<polyline class="trend" points="{}" fill="none" stroke="#1f77b4" stroke-width="2"/>"##,
            points(seg)
        );
    }
    for (date, score) in points_in {
        if let Some(s) = score {
            let _ = writeln!(
                svg,
                r##"<circle class="point" data-date="{date}" cx="{:.2}" cy="{:.2}" r="3" fill="#1f77b4"/>"##,
                x_of(*date),
                y_of(*s)
            );
        }
    }
    let _ = writeln!(
        svg,
        r##"<text x="{left}" y="{:.2}" font-size="11" fill="#666666">{first}</text><text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end" fill="#666666">{}</text>"##,
        height - 12.0,
        left + plot_w,
        height - 12.0,
        points_in[points_in.len() - 1].0
    );
    svg.push_str("</svg>\n");
    Ok(svg)
}
