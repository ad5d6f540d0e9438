//! Self-contained SVG rendering: scatter plots of particle sets and simple
//! line charts, with no plotting dependencies.

use std::fmt::Write as _;

use fdrl::matrix::Matrix;

const SIZE: f64 = 480.0;
const MARGIN: f64 = 40.0;

/// One named point set with a fill color.
pub struct Series<'a> {
    pub label: &'a str,
    pub color: &'a str,
    pub points: &'a Matrix,
}

pub const COLOR_REFERENCE: &str = "#1f77b4";
pub const COLOR_SAMPLES: &str = "#ff7f0e";
pub const COLOR_EXTRA: &str = "#2ca02c";

/// Scatter plot of 2D point sets on a shared square viewport.
///
/// The viewport is the smallest zero-centered square containing every point
/// (plus padding), so reruns with the same data render identically.
pub fn scatter(title: &str, series: &[Series<'_>]) -> String {
    let mut extent: f64 = 1.0;
    for s in series {
        for row in s.points.iter_rows() {
            for &v in row.iter().take(2) {
                if v.is_finite() {
                    extent = extent.max(v.abs());
                }
            }
        }
    }
    let extent = extent * 1.1;
    let scale = (SIZE - 2.0 * MARGIN) / (2.0 * extent);
    let to_px = |x: f64, y: f64| {
        (
            SIZE / 2.0 + x * scale,
            SIZE / 2.0 - y * scale,
        )
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"##
    );
    let _ = writeln!(svg, r##"<rect width="{SIZE}" height="{SIZE}" fill="white"/>"##);
    // Frame and zero axes.
    let inner = SIZE - 2.0 * MARGIN;
    let _ = writeln!(
        svg,
        r##"<rect x="{MARGIN}" y="{MARGIN}" width="{inner}" height="{inner}" fill="none" stroke="#cccccc"/>"##
    );
    let (zx, zy) = to_px(0.0, 0.0);
    let _ = writeln!(
        svg,
        r##"<line x1="{MARGIN}" y1="{zy}" x2="{}" y2="{zy}" stroke="#eeeeee"/>"##,
        SIZE - MARGIN
    );
    let _ = writeln!(
        svg,
        r##"<line x1="{zx}" y1="{MARGIN}" x2="{zx}" y2="{}" stroke="#eeeeee"/>"##,
        SIZE - MARGIN
    );
    let _ = writeln!(
        svg,
        r##"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"##,
        SIZE / 2.0,
        escape(title)
    );
    // Extent labels on the x axis.
    let _ = writeln!(
        svg,
        r##"<text x="{MARGIN}" y="{}" font-family="sans-serif" font-size="10" fill="#888888">-{:.2}</text>"##,
        SIZE - MARGIN / 2.0,
        extent
    );
    let _ = writeln!(
        svg,
        r##"<text x="{}" y="{}" text-anchor="end" font-family="sans-serif" font-size="10" fill="#888888">{:.2}</text>"##,
        SIZE - MARGIN,
        SIZE - MARGIN / 2.0,
        extent
    );

    for (i, s) in series.iter().enumerate() {
        for row in s.points.iter_rows() {
            if row.len() < 2 || !row[0].is_finite() || !row[1].is_finite() {
                continue;
            }
            let (px, py) = to_px(row[0], row[1]);
            if (MARGIN..=SIZE - MARGIN).contains(&px) && (MARGIN..=SIZE - MARGIN).contains(&py) {
                let _ = writeln!(
                    svg,
                    r##"<circle cx="{px:.2}" cy="{py:.2}" r="1.6" fill="{}" fill-opacity="0.6"/>"##,
                    s.color
                );
            }
        }
        // Legend.
        let ly = 20.0 + 16.0 * i as f64;
        let _ = writeln!(
            svg,
            r##"<circle cx="{}" cy="{ly}" r="4" fill="{}"/><text x="{}" y="{}" font-family="sans-serif" font-size="11">{}</text>"##,
            SIZE - 150.0,
            s.color,
            SIZE - 140.0,
            ly + 4.0,
            escape(s.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Line chart of `(x, y)` points, x ascending.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, points: &[(f64, f64)]) -> String {
    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in points {
        x_min = x_min.min(x);
        x_max = x_max.max(x);
        y_min = y_min.min(y);
        y_max = y_max.max(y);
    }
    if !x_min.is_finite() || x_min == x_max {
        x_min -= 1.0;
        x_max += 1.0;
    }
    if !y_min.is_finite() || y_min == y_max {
        y_min -= 1.0;
        y_max += 1.0;
    }
    let pad_y = 0.1 * (y_max - y_min);
    let (y_min, y_max) = (y_min - pad_y, y_max + pad_y);
    let inner = SIZE - 2.0 * MARGIN;
    let to_px = |x: f64, y: f64| {
        (
            MARGIN + (x - x_min) / (x_max - x_min) * inner,
            SIZE - MARGIN - (y - y_min) / (y_max - y_min) * inner,
        )
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"##
    );
    let _ = writeln!(svg, r##"<rect width="{SIZE}" height="{SIZE}" fill="white"/>"##);
    let _ = writeln!(
        svg,
        r##"<rect x="{MARGIN}" y="{MARGIN}" width="{inner}" height="{inner}" fill="none" stroke="#cccccc"/>"##
    );
    let _ = writeln!(
        svg,
        r##"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"##,
        SIZE / 2.0,
        escape(title)
    );
    let _ = writeln!(
        svg,
        r##"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="11">{}</text>"##,
        SIZE / 2.0,
        SIZE - 8.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r##"<text x="12" y="{}" font-family="sans-serif" font-size="11" transform="rotate(-90 12 {})">{}</text>"##,
        SIZE / 2.0,
        SIZE / 2.0,
        escape(y_label)
    );

    let path: Vec<String> = points
        .iter()
        .map(|&(x, y)| {
            let (px, py) = to_px(x, y);
            format!("{px:.2},{py:.2}")
        })
        .collect();
    let _ = writeln!(
        svg,
        r##"<polyline points="{}" fill="none" stroke="{COLOR_REFERENCE}" stroke-width="1.5"/>"##,
        path.join(" ")
    );
    // Value labels only when the series is sparse enough to read them.
    let label = points.len() <= 20;
    for &(x, y) in points {
        let (px, py) = to_px(x, y);
        let _ = writeln!(svg, r##"<circle cx="{px:.2}" cy="{py:.2}" r="3" fill="{COLOR_REFERENCE}"/>"##);
        if label {
            let _ = writeln!(
                svg,
                r##"<text x="{px:.2}" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="9" fill="#555555">{y:.4}</text>"##,
                py - 8.0
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
