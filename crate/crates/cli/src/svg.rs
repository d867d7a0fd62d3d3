//! Minimal static SVG rendering of line plots and heatmaps.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 110.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;
const MAX_CELLS: usize = 200;
const PALETTE: [(f64, f64, f64); 5] =
    [(68.0, 1.0, 84.0), (59.0, 82.0, 139.0), (33.0, 145.0, 140.0), (94.0, 201.0, 98.0), (253.0, 231.0, 37.0)];
const LINE_COLOURS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

pub struct Line {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-300 {
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

fn colour(u: f64) -> String {
    let u = u.clamp(0.0, 1.0) * (PALETTE.len() - 1) as f64;
    let k = (u.floor() as usize).min(PALETTE.len() - 2);
    let f = u - k as f64;
    let (a, b) = (PALETTE[k], PALETTE[k + 1]);
    let mix = |p: f64, q: f64| (p + f * (q - p)).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

fn frame(out: &mut String, title: &str, xlabel: &str, ylabel: &str, xr: (f64, f64), yr: (f64, f64)) {
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">
<rect width="100%" height="100%" fill="white"/>
<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>
<text x="{}" y="{}" text-anchor="middle">{}</text>
<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>
"#,
        LEFT + pw / 2.0,
        escape(title),
        LEFT + pw / 2.0,
        HEIGHT - 12.0,
        escape(xlabel),
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(ylabel)
    );
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let x = LEFT + f * pw;
        let y = TOP + ph - f * ph;
        let _ = writeln!(out, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, TOP + ph + 18.0, tick(xr.0 + f * (xr.1 - xr.0)));
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, LEFT - 6.0, y + 4.0, tick(yr.0 + f * (yr.1 - yr.0)));
    }
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.1e}")
    } else {
        format!("{v:.3}").trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn line_plot(title: &str, xlabel: &str, ylabel: &str, lines: &[Line]) -> String {
    let xr = range(lines.iter().flat_map(|l| l.x.iter().copied()));
    let yr = range(lines.iter().flat_map(|l| l.y.iter().copied()));
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let mut out = String::new();
    frame(&mut out, title, xlabel, ylabel, xr, yr);
    let _ = writeln!(out, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    for (k, line) in lines.iter().enumerate() {
        let c = LINE_COLOURS[k % LINE_COLOURS.len()];
        let pts: Vec<String> = line
            .x
            .iter()
            .zip(&line.y)
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(x, y)| {
                format!("{:.2},{:.2}", LEFT + (x - xr.0) / (xr.1 - xr.0) * pw, TOP + ph - (y - yr.0) / (yr.1 - yr.0) * ph)
            })
            .collect();
        let _ = writeln!(out, r#"<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
        if lines.len() > 1 {
            let y = TOP + 14.0 + 16.0 * k as f64;
            let _ = writeln!(out, r#"<line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="{c}" stroke-width="2"/>"#, WIDTH - RIGHT + 8.0, WIDTH - RIGHT + 24.0);
            let _ = writeln!(out, r#"<text x="{}" y="{}">{}</text>"#, WIDTH - RIGHT + 28.0, y + 4.0, escape(&line.label));
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Heatmap of `values[row][col]` over `x` (columns) and `y` (rows). With
/// `sqrt` the colour scale shows the square root of the values.
pub fn heatmap(title: &str, xlabel: &str, ylabel: &str, x: &[f64], y: &[f64], values: &[Vec<f64>], sqrt: bool) -> String {
    let xr = range(x.iter().copied());
    let yr = range(y.iter().copied());
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let scale = |v: f64| if sqrt { v.max(0.0).sqrt() } else { v };
    let zr = range(values.iter().flatten().map(|&v| scale(v)));
    let cols = x.len().clamp(1, MAX_CELLS);
    let rows = y.len().clamp(1, MAX_CELLS);
    let (cw, rh) = (pw / cols as f64, ph / rows as f64);
    let mut out = String::new();
    frame(&mut out, title, xlabel, ylabel, xr, yr);
    for r in 0..rows {
        let src_r = r * y.len() / rows;
        for c in 0..cols {
            let src_c = c * x.len() / cols;
            let v = values.get(src_r).and_then(|row| row.get(src_c)).copied().unwrap_or(0.0);
            let u = (scale(v) - zr.0) / (zr.1 - zr.0);
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                LEFT + c as f64 * cw,
                TOP + ph - (r + 1) as f64 * rh,
                cw + 0.05,
                rh + 0.05,
                colour(u)
            );
        }
    }
    let bar_x = WIDTH - RIGHT + 12.0;
    for k in 0..50 {
        let u = k as f64 / 49.0;
        let _ = writeln!(out, r#"<rect x="{bar_x}" y="{:.2}" width="14" height="{:.2}" fill="{}"/>"#, TOP + ph - (k + 1) as f64 * ph / 50.0, ph / 50.0 + 0.05, colour(u));
    }
    let label = if sqrt { "sqrt" } else { "value" };
    let _ = writeln!(out, r#"<text x="{}" y="{:.1}">{}</text>"#, bar_x + 18.0, TOP + 8.0, tick(zr.1));
    let _ = writeln!(out, r#"<text x="{}" y="{:.1}">{}</text>"#, bar_x + 18.0, TOP + ph, tick(zr.0));
    let _ = writeln!(out, r#"<text x="{}" y="{:.1}">{label}</text>"#, bar_x, TOP - 6.0);
    let _ = writeln!(out, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_well_formed_documents() {
        let line = line_plot("t", "x", "y", &[Line { label: "a".into(), x: vec![0.0, 1.0], y: vec![1.0, 1.0] }]);
        assert!(line.starts_with("<svg") && line.ends_with("</svg>\n"));
        assert!(line.contains("polyline"));
        let map = heatmap("m", "x", "t", &[0.0, 1.0], &[0.0, 1.0, 2.0], &[vec![0.0, 1.0], vec![4.0, 9.0], vec![0.0, 0.0]], true);
        assert_eq!(map.matches("<rect").count(), 2 + 6 + 50);
    }

    #[test]
    fn palette_endpoints() {
        assert_eq!(colour(0.0), "#440154");
        assert_eq!(colour(1.0), "#fde725");
        assert_eq!(colour(2.0), "#fde725");
    }
}
