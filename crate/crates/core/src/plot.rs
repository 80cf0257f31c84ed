//! Minimal SVG line plots: polylines over a pair of axes.

use std::fmt::Write as _;

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#7f7f7f",
];

#[derive(Debug, Clone)]
pub struct Series {
    pub points: Vec<(f64, f64)>,
    pub color: Option<String>,
    pub width: f64,
    pub opacity: f64,
}

impl Series {
    pub fn new(points: Vec<(f64, f64)>) -> Self {
        Series {
            points,
            color: None,
            width: 1.5,
            opacity: 1.0,
        }
    }

    pub fn color(mut self, color: &str) -> Self {
        self.color = Some(color.to_string());
        self
    }

    pub fn width(mut self, width: f64) -> Self {
        self.width = width;
        self
    }

    pub fn opacity(mut self, opacity: f64) -> Self {
        self.opacity = opacity;
        self
    }
}

/// A plot with a fixed data window. Points outside the window are clipped
/// by the viewport; non-finite points break the polyline.
#[derive(Debug, Clone)]
pub struct Plot {
    pub title: String,
    pub width: f64,
    pub height: f64,
    pub x_range: Option<(f64, f64)>,
    pub y_range: Option<(f64, f64)>,
    pub series: Vec<Series>,
}

impl Plot {
    pub fn new(title: &str) -> Self {
        Plot {
            title: title.to_string(),
            width: 640.0,
            height: 480.0,
            x_range: None,
            y_range: None,
            series: Vec::new(),
        }
    }

    pub fn x_range(mut self, lo: f64, hi: f64) -> Self {
        self.x_range = Some((lo, hi));
        self
    }

    pub fn y_range(mut self, lo: f64, hi: f64) -> Self {
        self.y_range = Some((lo, hi));
        self
    }

    pub fn add(&mut self, series: Series) {
        self.series.push(series);
    }

    fn data_bounds(&self) -> ((f64, f64), (f64, f64)) {
        let finite = self
            .series
            .iter()
            .flat_map(|s| &s.points)
            .filter(|(x, y)| x.is_finite() && y.is_finite());
        let mut xb = (f64::INFINITY, f64::NEG_INFINITY);
        let mut yb = (f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in finite {
            xb = (xb.0.min(x), xb.1.max(x));
            yb = (yb.0.min(y), yb.1.max(y));
        }
        let pad = |(lo, hi): (f64, f64)| {
            if lo.partial_cmp(&hi).is_none_or(|o| o.is_gt()) {
                (-1.0, 1.0)
            } else if hi - lo < 1e-12 {
                (lo - 1.0, hi + 1.0)
            } else {
                let m = 0.05 * (hi - lo);
                (lo - m, hi + m)
            }
        };
        (
            self.x_range.unwrap_or_else(|| pad(xb)),
            self.y_range.unwrap_or_else(|| pad(yb)),
        )
    }

    pub fn to_svg(&self) -> String {
        let (w, h) = (self.width, self.height);
        let margin = 40.0;
        let ((x0, x1), (y0, y1)) = self.data_bounds();
        let sx = |x: f64| margin + (x - x0) / (x1 - x0) * (w - 2.0 * margin);
        let sy = |y: f64| h - margin - (y - y0) / (y1 - y0) * (h - 2.0 * margin);

        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
        );
        let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="20" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
            w / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            out,
            r#"<defs><clipPath id="plot"><rect x="{margin}" y="{margin}" width="{}" height="{}"/></clipPath></defs>"#,
            w - 2.0 * margin,
            h - 2.0 * margin
        );
        // frame, then the coordinate axes when they are in view
        let _ = writeln!(
            out,
            r#"<rect x="{margin}" y="{margin}" width="{}" height="{}" fill="none" stroke="black" stroke-width="1"/>"#,
            w - 2.0 * margin,
            h - 2.0 * margin
        );
        if x0 < 0.0 && 0.0 < x1 {
            let _ = writeln!(
                out,
                r##"<line x1="{0:.3}" y1="{margin}" x2="{0:.3}" y2="{1}" stroke="#999" stroke-width="0.75"/>"##,
                sx(0.0),
                h - margin
            );
        }
        if y0 < 0.0 && 0.0 < y1 {
            let _ = writeln!(
                out,
                r##"<line x1="{margin}" y1="{0:.3}" x2="{1}" y2="{0:.3}" stroke="#999" stroke-width="0.75"/>"##,
                sy(0.0),
                w - margin
            );
        }
        for (label, x, y, anchor) in [
            (format!("{x0:.3}"), margin, h - margin + 15.0, "start"),
            (format!("{x1:.3}"), w - margin, h - margin + 15.0, "end"),
            (format!("{y0:.3}"), margin - 4.0, h - margin, "end"),
            (format!("{y1:.3}"), margin - 4.0, margin + 10.0, "end"),
        ] {
            let _ = writeln!(
                out,
                r#"<text x="{x}" y="{y}" font-family="sans-serif" font-size="10" text-anchor="{anchor}">{label}</text>"#
            );
        }

        let _ = writeln!(out, r#"<g clip-path="url(#plot)" fill="none">"#);
        for (k, s) in self.series.iter().enumerate() {
            let color = s
                .color
                .clone()
                .unwrap_or_else(|| PALETTE[k % PALETTE.len()].into());
            for run in s
                .points
                .split(|(x, y)| !x.is_finite() || !y.is_finite())
                .filter(|r| r.len() >= 2)
            {
                let pts: Vec<String> = run
                    .iter()
                    .map(|&(x, y)| format!("{:.3},{:.3}", sx(x), sy(y)))
                    .collect();
                let _ = writeln!(
                    out,
                    r#"<polyline points="{}" stroke="{color}" stroke-width="{}" stroke-opacity="{}"/>"#,
                    pts.join(" "),
                    s.width,
                    s.opacity
                );
            }
        }
        out.push_str("</g>\n</svg>\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polylines_split_on_gaps() {
        let mut p = Plot::new("a < b").x_range(-1.0, 1.0).y_range(-1.0, 1.0);
        p.add(Series::new(vec![
            (-1.0, -1.0),
            (0.0, 0.0),
            (f64::NAN, 0.0),
            (0.5, 0.5),
            (1.0, 1.0),
            (f64::INFINITY, 2.0),
            (0.9, 0.9),
        ]));
        let svg = p.to_svg();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("a &lt; b"));
        assert!(svg.contains(r#"points="40.000,440.000 320.000,240.000""#));
        assert!(svg.ends_with("</svg>\n"));
    }

    #[test]
    fn automatic_window_is_deterministic() {
        let mut p = Plot::new("");
        p.add(Series::new(vec![(0.0, 3.0), (1.0, 3.0)]).color("red"));
        assert_eq!(p.to_svg(), p.clone().to_svg());
        assert!(p.to_svg().contains(r#"stroke="red""#));
    }
}
