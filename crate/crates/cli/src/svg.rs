//! Minimal SVG emitters: line plots and 2-D heatmaps.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 420.0;
const PAD: f64 = 56.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

fn bounds(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn header(out: &mut String, title: &str) {
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12"><rect width="100%" height="100%" fill="white"/><text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        W / 2.0,
        escape(title)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn line_plot(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let (x0, x1) = bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (y0, y1) = bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let mut out = String::new();
    header(&mut out, title);
    let _ = write!(
        out,
        r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let (x, y) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let _ = write!(out, r#"<text x="{:.1}" y="{}" text-anchor="middle">{:.3}</text>"#, sx(x), H - PAD + 16.0, x);
        let _ = write!(out, r#"<text x="{}" y="{:.1}" text-anchor="end">{:.3}</text>"#, PAD - 4.0, sy(y) + 4.0, y);
    }
    let _ = write!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 12.0, escape(xlabel));
    let _ = write!(
        out,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(ylabel)
    );
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = write!(out, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
        let _ = write!(
            out,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            W - PAD - 120.0,
            PAD + 16.0 + 14.0 * i as f64,
            escape(&s.name)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Heatmap over `[x0, x1] x [y0, y1]` of values indexed `i * ny + j` for
/// x-cell `i` and y-cell `j`, with an optional marker.
pub fn heatmap(title: &str, nx: usize, ny: usize, extent: [f64; 4], values: &[f64], marker: Option<[f64; 2]>) -> String {
    let max = values.iter().copied().fold(0.0, f64::max);
    let size = (H - 2.0 * PAD).min(W - 2.0 * PAD);
    let (cw, ch) = (size / nx as f64, size / ny as f64);
    let mut out = String::new();
    header(&mut out, title);
    for i in 0..nx {
        for j in 0..ny {
            let v = if max > 0.0 { values[i * ny + j] / max } else { 0.0 };
            let shade = (255.0 * (1.0 - v)).round() as u8;
            let _ = write!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="rgb({shade},{shade},255)"/>"#,
                PAD + i as f64 * cw,
                PAD + size - (j + 1) as f64 * ch,
                cw + 0.05,
                ch + 0.05
            );
        }
    }
    if let Some([mx, my]) = marker {
        let px = PAD + (mx - extent[0]) / (extent[1] - extent[0]) * size;
        let py = PAD + size - (my - extent[2]) / (extent[3] - extent[2]) * size;
        let _ = write!(out, r#"<circle cx="{px:.2}" cy="{py:.2}" r="4" fill="none" stroke="red" stroke-width="2"/>"#);
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_plot_is_wellformed() {
        let s = line_plot("a<b", "k", "loss", &[Series { name: "x".into(), points: vec![(0.0, 1.0), (1.0, 0.5)] }]);
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert!(s.contains("a&lt;b") && s.contains("<polyline"));
    }

    #[test]
    fn heatmap_has_one_rect_per_cell() {
        let s = heatmap("h", 3, 2, [0.0, 1.0, 0.0, 1.0], &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0], Some([0.5, 0.5]));
        assert_eq!(s.matches("<rect").count(), 1 + 6);
        assert!(s.contains("<circle"));
    }
}
