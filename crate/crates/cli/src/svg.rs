//! Minimal deterministic SVG emission.
//!
//! Hand-rolled so that re-running a plot command yields byte-identical
//! files (floats are formatted with fixed precision, and nothing depends
//! on map iteration order). Good enough for line charts, scatters, and
//! trajectory frames.

use std::fmt::Write as _;

/// Formats a coordinate with two decimals, normalizing negative zero.
pub fn fmt(v: f64) -> String {
    let v = if v == 0.0 { 0.0 } else { v };
    format!("{v:.2}")
}

pub struct Svg {
    width: f64,
    height: f64,
    body: String,
}

impl Svg {
    pub fn new(width: f64, height: f64) -> Svg {
        Svg { width, height, body: String::new() }
    }

    pub fn comment(&mut self, text: &str) {
        let _ = writeln!(self.body, "  <!-- {} -->", text.replace("--", "-"));
    }

    pub fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, width: f64) {
        let _ = writeln!(
            self.body,
            r#"  <line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{stroke}" stroke-width="{}"/>"#,
            fmt(x1),
            fmt(y1),
            fmt(x2),
            fmt(y2),
            fmt(width)
        );
    }

    pub fn dashed_circle(&mut self, cx: f64, cy: f64, r: f64, stroke: &str) {
        let _ = writeln!(
            self.body,
            r#"  <circle cx="{}" cy="{}" r="{}" fill="none" stroke="{stroke}" stroke-width="1.5" stroke-dasharray="6 4"/>"#,
            fmt(cx),
            fmt(cy),
            fmt(r)
        );
    }

    pub fn circle(&mut self, cx: f64, cy: f64, r: f64, fill: &str, stroke: &str) {
        let _ = writeln!(
            self.body,
            r#"  <circle cx="{}" cy="{}" r="{}" fill="{fill}" stroke="{stroke}" stroke-width="1"/>"#,
            fmt(cx),
            fmt(cy),
            fmt(r)
        );
    }

    pub fn polygon(&mut self, points: &[(f64, f64)], fill: &str, stroke: &str) {
        let pts: Vec<String> =
            points.iter().map(|(x, y)| format!("{},{}", fmt(*x), fmt(*y))).collect();
        let _ = writeln!(
            self.body,
            r#"  <polygon points="{}" fill="{fill}" stroke="{stroke}" stroke-width="1"/>"#,
            pts.join(" ")
        );
    }

    pub fn polyline(&mut self, points: &[(f64, f64)], stroke: &str, width: f64) {
        if points.len() < 2 {
            return;
        }
        let pts: Vec<String> =
            points.iter().map(|(x, y)| format!("{},{}", fmt(*x), fmt(*y))).collect();
        let _ = writeln!(
            self.body,
            r#"  <polyline points="{}" fill="none" stroke="{stroke}" stroke-width="{}"/>"#,
            pts.join(" "),
            fmt(width)
        );
    }

    pub fn text(&mut self, x: f64, y: f64, size: f64, anchor: &str, content: &str) {
        let _ = writeln!(
            self.body,
            r#"  <text x="{}" y="{}" font-size="{}" font-family="sans-serif" text-anchor="{anchor}">{}</text>"#,
            fmt(x),
            fmt(y),
            fmt(size),
            escape(content)
        );
    }

    /// A small marker glyph used for scatter points and legends.
    pub fn marker(&mut self, shape: Marker, x: f64, y: f64, r: f64, color: &str) {
        match shape {
            Marker::Circle => self.circle(x, y, r, color, color),
            Marker::Square => {
                let _ = writeln!(
                    self.body,
                    r#"  <rect x="{}" y="{}" width="{}" height="{}" fill="{color}"/>"#,
                    fmt(x - r),
                    fmt(y - r),
                    fmt(2.0 * r),
                    fmt(2.0 * r)
                );
            }
            Marker::Triangle => {
                self.polygon(&[(x, y - r), (x - r, y + r), (x + r, y + r)], color, color)
            }
            Marker::Diamond => {
                self.polygon(&[(x, y - r), (x + r, y), (x, y + r), (x - r, y)], color, color)
            }
            Marker::Cross => {
                self.line(x - r, y - r, x + r, y + r, color, 1.5);
                self.line(x - r, y + r, x + r, y - r, color, 1.5);
            }
            Marker::Plus => {
                self.line(x - r, y, x + r, y, color, 1.5);
                self.line(x, y - r, x, y + r, color, 1.5);
            }
        }
    }

    pub fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n  <rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n{body}</svg>\n",
            w = fmt(self.width),
            h = fmt(self.height),
            body = self.body
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Marker {
    Circle,
    Square,
    Triangle,
    Diamond,
    Cross,
    Plus,
}

pub const MARKERS: [Marker; 6] =
    [Marker::Circle, Marker::Square, Marker::Triangle, Marker::Diamond, Marker::Cross, Marker::Plus];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Linear data-to-pixel scale.
#[derive(Clone, Copy)]
pub struct Scale {
    pub lo: f64,
    pub hi: f64,
    pub px_lo: f64,
    pub px_hi: f64,
}

impl Scale {
    pub fn map(&self, v: f64) -> f64 {
        let t = if self.hi == self.lo { 0.5 } else { (v - self.lo) / (self.hi - self.lo) };
        self.px_lo + t * (self.px_hi - self.px_lo)
    }

    /// Evenly spaced tick values, endpoints included.
    pub fn ticks(&self, n: usize) -> Vec<f64> {
        (0..=n).map(|i| self.lo + (self.hi - self.lo) * i as f64 / n as f64).collect()
    }
}
