//! Minimal static SVG line plots and stick diagrams.

use std::fmt::Write;

pub const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const MARGIN: [f64; 4] = [50.0, 150.0, 50.0, 70.0]; // top, right, bottom, left

pub struct Series<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

/// Horizontal reference line, e.g. a limit.
pub struct Reference<'a> {
    pub label: &'a str,
    pub y: f64,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Linear map from data to pixels.
#[derive(Clone, Copy)]
struct Frame {
    x: (f64, f64),
    y: (f64, f64),
    px: (f64, f64),
    py: (f64, f64),
}

impl Frame {
    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let u = self.px.0 + (x - self.x.0) / (self.x.1 - self.x.0) * (self.px.1 - self.px.0);
        let v = self.py.0 + (y - self.y.0) / (self.y.1 - self.y.0) * (self.py.1 - self.py.0);
        (u, v)
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        return (0.0, 1.0);
    }
    let span = (hi - lo).max(1e-9 * (1.0 + lo.abs().max(hi.abs())));
    (lo - 0.05 * span, hi + 0.05 * span)
}

fn polyline(
    out: &mut String,
    frame: &Frame,
    pts: &[(f64, f64)],
    color: &str,
    width: f64,
    extra: &str,
) {
    let coords: Vec<String> = pts
        .iter()
        .map(|&(x, y)| {
            let (u, v) = frame.map(x, y);
            format!("{u:.2},{v:.2}")
        })
        .collect();
    let _ = writeln!(
        out,
        r#"<polyline fill="none" stroke="{color}" stroke-width="{width}" {extra} points="{}"/>"#,
        coords.join(" ")
    );
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="28" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-12 * step {
        out.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
        t += step;
    }
    out
}

fn axes(out: &mut String, frame: &Frame, xlabel: &str, ylabel: &str) {
    let (x0, x1) = frame.px;
    let (y1, y0) = frame.py;
    let _ = writeln!(
        out,
        r#"<rect x="{x0}" y="{y0}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        x1 - x0,
        y1 - y0
    );
    for t in ticks(frame.x.0, frame.x.1) {
        let (u, _) = frame.map(t, frame.y.0);
        let _ = writeln!(
            out,
            r#"<line x1="{u:.2}" y1="{y1}" x2="{u:.2}" y2="{}" stroke="black"/>"#,
            y1 + 5.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{u:.2}" y="{}" text-anchor="middle">{t}</text>"#,
            y1 + 18.0
        );
    }
    for t in ticks(frame.y.0, frame.y.1) {
        let (_, v) = frame.map(frame.x.0, t);
        let _ = writeln!(
            out,
            r#"<line x1="{}" y1="{v:.2}" x2="{x0}" y2="{v:.2}" stroke="black"/>"#,
            x0 - 5.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{:.2}" text-anchor="end">{t}</text>"#,
            x0 - 8.0,
            v + 4.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        y1 + 38.0,
        escape(xlabel)
    );
    let _ = writeln!(
        out,
        r#"<text transform="translate({},{}) rotate(-90)" text-anchor="middle">{}</text>"#,
        x0 - 50.0,
        (y0 + y1) / 2.0,
        escape(ylabel)
    );
}

fn plot_frame(x: (f64, f64), y: (f64, f64)) -> Frame {
    Frame {
        x,
        y,
        px: (MARGIN[3], WIDTH - MARGIN[1]),
        py: (HEIGHT - MARGIN[2], MARGIN[0]),
    }
}

/// Line plot of several series with optional horizontal reference lines.
pub fn line_plot(
    title: &str,
    xlabel: &str,
    ylabel: &str,
    series: &[Series],
    refs: &[Reference],
) -> String {
    let xs = series.iter().flat_map(|s| s.points.iter().map(|p| p.0));
    let ys = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.1))
        .chain(refs.iter().map(|r| r.y));
    let (xlo, xhi) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
        (a.min(v), b.max(v))
    });
    let (ylo, yhi) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
        (a.min(v), b.max(v))
    });
    let frame = plot_frame(padded(xlo, xhi), padded(ylo, yhi));

    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, &frame, xlabel, ylabel);
    for r in refs {
        let (u0, v) = frame.map(frame.x.0, r.y);
        let (u1, _) = frame.map(frame.x.1, r.y);
        let _ = writeln!(
            out,
            r##"<line x1="{u0:.2}" y1="{v:.2}" x2="{u1:.2}" y2="{v:.2}" stroke="#555" stroke-dasharray="2,3"/>"##
        );
        let _ = writeln!(
            out,
            r##"<text x="{:.2}" y="{:.2}" fill="#555">{}</text>"##,
            u1 + 6.0,
            v + 4.0,
            escape(r.label)
        );
    }
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let dash = if s.dashed {
            r#"stroke-dasharray="6,4""#
        } else {
            ""
        };
        polyline(&mut out, &frame, &s.points, color, 1.8, dash);
        let ly = MARGIN[0] + 10.0 + 18.0 * i as f64;
        let lx = WIDTH - MARGIN[1] + 15.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2" {dash}/>"#,
            lx + 22.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}">{}</text>"#,
            lx + 28.0,
            ly + 4.0,
            escape(s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// One pose of the stick figure: polylines in world coordinates.
pub struct Pose {
    pub stance: Vec<(f64, f64)>,
    pub torso: Vec<(f64, f64)>,
    pub swing: Vec<(f64, f64)>,
}

/// Overlaid poses on the stair profile with equal axis scales. Later poses
/// are drawn darker.
pub fn stick_diagram(
    title: &str,
    profile: &[(f64, f64)],
    poses: &[Pose],
    swing_path: &[(f64, f64)],
) -> String {
    let all = profile.iter().chain(
        poses
            .iter()
            .flat_map(|p| p.stance.iter().chain(&p.torso).chain(&p.swing)),
    );
    let (xlo, xhi, ylo, yhi) = all.fold(
        (
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
        ),
        |(a, b, c, d), &(x, y)| (a.min(x), b.max(x), c.min(y), d.max(y)),
    );
    let (xlo, xhi) = padded(xlo, xhi);
    let (ylo, yhi) = padded(ylo, yhi);
    // Equal scales: widen whichever range is short for the plot's aspect ratio.
    let pw = WIDTH - MARGIN[1] - MARGIN[3];
    let ph = HEIGHT - MARGIN[0] - MARGIN[2];
    let scale = (pw / (xhi - xlo)).min(ph / (yhi - ylo));
    let (cx, cy) = ((xlo + xhi) / 2.0, (ylo + yhi) / 2.0);
    let (hx, hy) = (pw / scale / 2.0, ph / scale / 2.0);
    let frame = plot_frame((cx - hx, cx + hx), (cy - hy, cy + hy));

    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, &frame, "x (m)", "y (m)");
    polyline(&mut out, &frame, profile, "#8c564b", 2.5, "");
    polyline(
        &mut out,
        &frame,
        swing_path,
        "#999",
        1.0,
        r#"stroke-dasharray="3,3""#,
    );
    let n = poses.len().max(2) - 1;
    for (i, p) in poses.iter().enumerate() {
        let opacity = 0.25 + 0.75 * i as f64 / n as f64;
        let op = format!(r#"stroke-opacity="{opacity:.3}" stroke-linecap="round""#);
        polyline(&mut out, &frame, &p.stance, PALETTE[0], 2.0, &op);
        polyline(&mut out, &frame, &p.swing, PALETTE[1], 2.0, &op);
        polyline(&mut out, &frame, &p.torso, "black", 2.0, &op);
    }
    let legend = [
        (PALETTE[0], "stance leg"),
        (PALETTE[1], "swing leg"),
        ("black", "torso"),
        ("#999", "swing foot path"),
    ];
    for (i, (color, label)) in legend.iter().enumerate() {
        let ly = MARGIN[0] + 10.0 + 18.0 * i as f64;
        let lx = WIDTH - MARGIN[1] + 15.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            lx + 22.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}">{label}</text>"#,
            lx + 28.0,
            ly + 4.0
        );
    }
    out.push_str("</svg>\n");
    out
}
