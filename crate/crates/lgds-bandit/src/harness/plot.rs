//! Native SVG plot emission. No plotting dependency: the harness writes
//! the handful of chart types it needs directly.

use std::fmt::Write as _;

use super::summary::BoxStats;

const W: f64 = 640.0;
const H: f64 = 480.0;
const MARGIN: f64 = 60.0;

fn svg_open(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(
        s,
        r#"<rect width="{W}" height="{H}" fill="white"/><text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{}</text>"#,
        W / 2.0,
        xml_escape(title)
    );
    s
}

fn xml_escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn axis_labels(s: &mut String, x_label: &str, y_label: &str) {
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="13">{}</text>"#,
        W / 2.0,
        H - 12.0,
        xml_escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" font-family="sans-serif" font-size="13" transform="rotate(-90 16 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        xml_escape(y_label)
    );
}

struct LogScale {
    lo: f64,
    hi: f64,
}

impl LogScale {
    fn from(values: impl Iterator<Item = f64>) -> Option<LogScale> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() || !hi.is_finite() {
            return None;
        }
        // pad a decade fraction on each side
        Some(LogScale {
            lo: lo.ln() - 0.3,
            hi: hi.ln() + 0.3,
        })
    }

    fn x(&self, v: f64) -> f64 {
        MARGIN + (v.ln() - self.lo) / (self.hi - self.lo) * (W - 2.0 * MARGIN)
    }

    fn y(&self, v: f64) -> f64 {
        H - MARGIN - (v.ln() - self.lo) / (self.hi - self.lo) * (H - 2.0 * MARGIN)
    }
}

/// Log-log scatter with a y = x reference line. Nonpositive points cannot
/// be drawn on log axes; they are omitted and counted in an annotation.
pub fn scatter_log_log(
    points: &[(f64, f64)],
    x_label: &str,
    y_label: &str,
    title: &str,
) -> String {
    let mut s = svg_open(title);
    let drawable: Vec<(f64, f64)> = points
        .iter()
        .cloned()
        .filter(|&(x, y)| x > 0.0 && y > 0.0)
        .collect();
    let omitted = points.len() - drawable.len();
    if let Some(scale) = LogScale::from(drawable.iter().flat_map(|&(x, y)| [x, y].into_iter())) {
        let (x0, y0) = (scale.x(scale.lo.exp()), scale.y(scale.lo.exp()));
        let (x1, y1) = (scale.x(scale.hi.exp()), scale.y(scale.hi.exp()));
        let _ = writeln!(
            s,
            r##"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y1}" stroke="#888" stroke-dasharray="4 3"/>"##
        );
        for (x, y) in &drawable {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="steelblue" fill-opacity="0.7"/>"#,
                scale.x(*x),
                scale.y(*y)
            );
        }
    }
    if omitted > 0 {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="40" text-anchor="middle" font-family="sans-serif" font-size="12">{omitted} nonpositive point(s) omitted from log axes</text>"#,
            W / 2.0
        );
    }
    axis_labels(&mut s, x_label, y_label);
    s.push_str("</svg>\n");
    s
}

/// One spec's pair of comparison intervals.
#[derive(Debug, Clone, Copy)]
pub struct IntervalPoint {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

/// Interval-vs-interval scatter: each spec draws a horizontal bar for the
/// x policy's interval and a vertical bar for the y policy's, crossing at
/// the interval midpoints, on linear axes with a y = x reference line.
pub fn interval_scatter(
    points: &[IntervalPoint],
    x_label: &str,
    y_label: &str,
    title: &str,
) -> String {
    let mut s = svg_open(title);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in points {
        for v in [p.x_min, p.x_max, p.y_min, p.y_max] {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if points.is_empty() || !lo.is_finite() {
        lo = 0.0;
        hi = 1.0;
    }
    let pad = 0.05 * (hi - lo).max(1e-12);
    let (lo, hi) = (lo - pad, hi + pad);
    let px = |v: f64| MARGIN + (v - lo) / (hi - lo) * (W - 2.0 * MARGIN);
    let py = |v: f64| H - MARGIN - (v - lo) / (hi - lo) * (H - 2.0 * MARGIN);
    let _ = writeln!(
        s,
        r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#888" stroke-dasharray="4 3"/>"##,
        px(lo),
        py(lo),
        px(hi),
        py(hi)
    );
    for p in points {
        let xm = 0.5 * (p.x_min + p.x_max);
        let ym = 0.5 * (p.y_min + p.y_max);
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="indianred" stroke-opacity="0.6"/>"#,
            px(p.x_min),
            py(ym),
            px(p.x_max),
            py(ym)
        );
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="indianred" stroke-opacity="0.6"/>"#,
            px(xm),
            py(p.y_min),
            px(xm),
            py(p.y_max)
        );
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="darkred"/>"#,
            px(xm),
            py(ym)
        );
    }
    axis_labels(&mut s, x_label, y_label);
    s.push_str("</svg>\n");
    s
}

/// Side-by-side box plots with whiskers at 1.5 IQR.
pub fn box_plot(groups: &[(String, BoxStats)], y_label: &str, title: &str) -> String {
    let mut s = svg_open(title);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (_, b) in groups {
        lo = lo.min(b.whisker_lo);
        hi = hi.max(b.whisker_hi);
        for &o in &b.outliers {
            lo = lo.min(o);
            hi = hi.max(o);
        }
    }
    if groups.is_empty() || !lo.is_finite() {
        lo = 0.0;
        hi = 1.0;
    }
    let pad = 0.05 * (hi - lo).max(1e-12);
    let (lo, hi) = (lo - pad, hi + pad);
    let py = |v: f64| H - MARGIN - (v - lo) / (hi - lo) * (H - 2.0 * MARGIN);
    let slot = (W - 2.0 * MARGIN) / groups.len().max(1) as f64;
    let box_w = (slot * 0.5).min(60.0);
    for (idx, (label, b)) in groups.iter().enumerate() {
        let cx = MARGIN + slot * (idx as f64 + 0.5);
        let (x0, x1) = (cx - box_w / 2.0, cx + box_w / 2.0);
        let _ = writeln!(
            s,
            r#"<line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="black"/>"#,
            py(b.whisker_lo),
            py(b.q1)
        );
        let _ = writeln!(
            s,
            r#"<line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="black"/>"#,
            py(b.q3),
            py(b.whisker_hi)
        );
        let _ = writeln!(
            s,
            r#"<rect x="{x0:.2}" y="{:.2}" width="{box_w:.2}" height="{:.2}" fill="lightsteelblue" stroke="black"/>"#,
            py(b.q3),
            (py(b.q1) - py(b.q3)).abs()
        );
        let _ = writeln!(
            s,
            r#"<line x1="{x0:.2}" y1="{:.2}" x2="{x1:.2}" y2="{:.2}" stroke="black" stroke-width="2"/>"#,
            py(b.median),
            py(b.median)
        );
        for &o in &b.outliers {
            let _ = writeln!(
                s,
                r#"<circle cx="{cx:.2}" cy="{:.2}" r="2" fill="none" stroke="black"/>"#,
                py(o)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{cx:.2}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">{}</text>"#,
            H - MARGIN + 20.0,
            xml_escape(label)
        );
    }
    axis_labels(&mut s, "", y_label);
    s.push_str("</svg>\n");
    s
}
