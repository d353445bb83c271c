//! Static SVG line plots and heatmaps.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN: (f64, f64, f64, f64) = (70.0, 20.0, 30.0, 50.0); // left, right, top, bottom
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub struct Series<'a> {
    pub label: &'a str,
    pub x: &'a [f64],
    pub y: &'a [f64],
}

fn finite_range(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if lo > hi {
        None
    } else if lo == hi {
        Some((lo - 0.5, hi + 0.5))
    } else {
        Some((lo, hi))
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn frame(out: &mut String, title: &str, xlabel: &str, ylabel: &str, xr: (f64, f64), yr: (f64, f64)) {
    let (l, r, t, b) = MARGIN;
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = write!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = write!(
        out,
        r#"<rect x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - l - r,
        H - t - b
    );
    let _ = write!(out, r#"<text x="{}" y="18" text-anchor="middle">{}</text>"#, W / 2.0, escape(title));
    let _ = write!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (l + W - r) / 2.0, H - 10.0, escape(xlabel));
    let _ = write!(
        out,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        (t + H - b) / 2.0,
        (t + H - b) / 2.0,
        escape(ylabel)
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let xv = xr.0 + f * (xr.1 - xr.0);
        let yv = yr.0 + f * (yr.1 - yr.0);
        let px = l + f * (W - l - r);
        let py = H - b - f * (H - t - b);
        let _ = write!(out, r#"<text x="{px}" y="{}" text-anchor="middle">{xv:.3e}</text>"#, H - b + 16.0);
        let _ = write!(out, r#"<text x="{}" y="{}" text-anchor="end">{yv:.3e}</text>"#, l - 4.0, py + 4.0);
    }
}

/// Line plot of one or more series. Non-finite points break the line.
pub fn line_plot(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let (l, r, t, b) = MARGIN;
    let xr = finite_range(series.iter().flat_map(|s| s.x.iter().copied())).unwrap_or((0.0, 1.0));
    let yr = finite_range(series.iter().flat_map(|s| s.y.iter().copied())).unwrap_or((0.0, 1.0));
    let px = |x: f64| l + (x - xr.0) / (xr.1 - xr.0) * (W - l - r);
    let py = |y: f64| H - b - (y - yr.0) / (yr.1 - yr.0) * (H - t - b);
    let mut out = String::new();
    frame(&mut out, title, xlabel, ylabel, xr, yr);
    for (n, s) in series.iter().enumerate() {
        let color = COLORS[n % COLORS.len()];
        let mut d = String::new();
        let mut pen = false;
        for (x, y) in s.x.iter().zip(s.y) {
            if x.is_finite() && y.is_finite() {
                let _ = write!(d, "{}{:.2},{:.2} ", if pen { "L" } else { "M" }, px(*x), py(*y));
                pen = true;
            } else {
                pen = false;
            }
        }
        let _ = write!(out, r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, d.trim_end());
        let _ = write!(
            out,
            r#"<text x="{}" y="{}" fill="{color}" text-anchor="end">{}</text>"#,
            W - r - 6.0,
            t + 16.0 * (n as f64 + 1.0),
            escape(s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn viridis(f: f64) -> String {
    const STOPS: [(f64, f64, f64); 5] =
        [(68.0, 1.0, 84.0), (59.0, 82.0, 139.0), (33.0, 145.0, 140.0), (94.0, 201.0, 98.0), (253.0, 231.0, 37.0)];
    let x = f.clamp(0.0, 1.0) * 4.0;
    let i = (x.floor() as usize).min(3);
    let u = x - i as f64;
    let (a, b) = (STOPS[i], STOPS[i + 1]);
    let c = |p: f64, q: f64| (p + u * (q - p)).round() as u8;
    format!("#{:02x}{:02x}{:02x}", c(a.0, b.0), c(a.1, b.1), c(a.2, b.2))
}

/// Heatmap of `values[row][col]` with rows along `y` and columns along `x`.
/// Non-finite cells are drawn grey. `log` colors by `log10`.
pub fn heatmap(title: &str, xlabel: &str, ylabel: &str, x: &[f64], y: &[f64], values: &[Vec<f64>], log: bool) -> String {
    let (l, r, t, b) = MARGIN;
    let tf = |v: f64| if log { if v > 0.0 { v.log10() } else { f64::NAN } } else { v };
    let xr = finite_range(x.iter().copied()).unwrap_or((0.0, 1.0));
    let yr = finite_range(y.iter().copied()).unwrap_or((0.0, 1.0));
    let vr = finite_range(values.iter().flatten().map(|v| tf(*v))).unwrap_or((0.0, 1.0));
    let mut out = String::new();
    frame(&mut out, title, xlabel, ylabel, xr, yr);
    let cw = (W - l - r) / x.len().max(1) as f64;
    let ch = (H - t - b) / y.len().max(1) as f64;
    for (i, row) in values.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let tv = tf(*v);
            let fill = if tv.is_finite() { viridis((tv - vr.0) / (vr.1 - vr.0)) } else { "#bbbbbb".into() };
            let _ = write!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
                l + j as f64 * cw,
                H - b - (i as f64 + 1.0) * ch,
                cw + 0.3,
                ch + 0.3
            );
        }
    }
    let _ = write!(
        out,
        r#"<text x="{}" y="{}" text-anchor="end">{}color: {:.3e} .. {:.3e}</text>"#,
        W - r,
        t - 6.0,
        if log { "log10 " } else { "" },
        vr.0,
        vr.1
    );
    out.push_str("</svg>\n");
    out
}
