//! Minimal SVG line charts and box plots. Output depends only on the input
//! numbers, so identical runs give identical files.

use std::fmt::Write;

const W: f64 = 800.0;
const H: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 8] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];
/// Longest series drawn point by point; longer ones are thinned evenly.
const MAX_POINTS: usize = 2000;

/// Five-number summary plus the mean.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct BoxStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
    pub n: usize,
}

/// Quantile by linear interpolation between order statistics of sorted data.
fn quantile_sorted(s: &[f64], q: f64) -> f64 {
    let pos = q * (s.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    s[lo] + (pos - lo as f64) * (s[hi] - s[lo])
}

impl BoxStats {
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut s = values.to_vec();
        s.sort_by(f64::total_cmp);
        Some(BoxStats {
            min: s[0],
            q1: quantile_sorted(&s, 0.25),
            median: quantile_sorted(&s, 0.5),
            q3: quantile_sorted(&s, 0.75),
            max: s[s.len() - 1],
            mean: s.iter().sum::<f64>() / s.len() as f64,
            n: s.len(),
        })
    }
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn new(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Self {
        let (x0, x1) = bounds(xs);
        let (y0, y1) = bounds(ys);
        Frame { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (H - TOP - BOTTOM)
    }
}

fn bounds(v: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = v
        .filter(|x| x.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        let pad = lo.abs().max(1.0) * 0.05;
        return (lo - pad, hi + pad);
    }
    let pad = (hi - lo) * 0.05;
    (lo - pad, hi + pad)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(out: &mut String, title: &str, x_label: &str, y_label: &str, f: &Frame) {
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">
<rect width="100%" height="100%" fill="white"/>
<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>
<text x="{}" y="{}" text-anchor="middle">{}</text>
<text transform="translate(18 {}) rotate(-90)" text-anchor="middle">{}</text>
<rect x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="black"/>
"#,
        W / 2.0,
        escape(title),
        LEFT + (W - LEFT - RIGHT) / 2.0,
        H - 15.0,
        escape(x_label),
        TOP + (H - TOP - BOTTOM) / 2.0,
        escape(y_label),
        W - LEFT - RIGHT,
        H - TOP - BOTTOM,
    );
    for i in 0..=4 {
        let y = f.y0 + (f.y1 - f.y0) * i as f64 / 4.0;
        let _ = writeln!(
            out,
            r##"<line x1="{LEFT}" x2="{:.1}" y1="{py:.1}" y2="{py:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"##,
            W - RIGHT,
            LEFT - 6.0,
            f.py(y) + 4.0,
            tick_label(y),
            py = f.py(y),
        );
    }
}

fn tick_label(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e5).contains(&a) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

/// Line chart of `(name, points)` series.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let xs = series.iter().flat_map(|(_, p)| p.iter().map(|q| q.0));
    let ys = series.iter().flat_map(|(_, p)| p.iter().map(|q| q.1));
    let f = Frame::new(xs, ys);
    let mut out = String::new();
    header(&mut out, title, x_label, y_label, &f);
    for i in 0..=4 {
        let x = f.x0 + (f.x1 - f.x0) * i as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            f.px(x),
            H - BOTTOM + 16.0,
            tick_label(x)
        );
    }
    for (k, (name, pts)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let stride = pts.len().div_ceil(MAX_POINTS).max(1);
        let mut path = String::new();
        for (j, (x, y)) in pts.iter().enumerate() {
            if j % stride != 0 && j + 1 != pts.len() {
                continue;
            }
            if !(x.is_finite() && y.is_finite()) {
                continue;
            }
            let _ = write!(path, "{}{:.1},{:.1}", if path.is_empty() { "M" } else { " L" }, f.px(*x), f.py(*y));
        }
        let _ = writeln!(out, r#"<path d="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>"#);
        let ly = TOP + 16.0 * k as f64 + 10.0;
        let _ = writeln!(
            out,
            r#"<line x1="{:.1}" x2="{:.1}" y1="{ly:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="3"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            W - RIGHT + 10.0,
            W - RIGHT + 30.0,
            W - RIGHT + 35.0,
            ly + 4.0,
            escape(name)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Box plot with whiskers at min and max and the mean as a diamond.
pub fn box_plot(title: &str, y_label: &str, groups: &[(String, BoxStats)]) -> String {
    let ys = groups.iter().flat_map(|(_, b)| [b.min, b.max]);
    let f = Frame {
        x0: 0.0,
        x1: groups.len().max(1) as f64,
        ..Frame::new(std::iter::empty(), ys)
    };
    let mut out = String::new();
    header(&mut out, title, "", y_label, &f);
    for (k, (name, b)) in groups.iter().enumerate() {
        let cx = f.px(k as f64 + 0.5);
        let half = (W - LEFT - RIGHT) / groups.len() as f64 * 0.25;
        let color = COLORS[k % COLORS.len()];
        let _ = writeln!(
            out,
            r#"<line x1="{cx:.1}" x2="{cx:.1}" y1="{:.1}" y2="{:.1}" stroke="black"/>"#,
            f.py(b.min),
            f.py(b.max)
        );
        let _ = writeln!(
            out,
            r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="{color}" fill-opacity="0.4" stroke="black"/>"#,
            cx - half,
            f.py(b.q3),
            2.0 * half,
            (f.py(b.q1) - f.py(b.q3)).max(0.5)
        );
        let _ = writeln!(
            out,
            r#"<line x1="{:.1}" x2="{:.1}" y1="{my:.1}" y2="{my:.1}" stroke="black" stroke-width="2"/>"#,
            cx - half,
            cx + half,
            my = f.py(b.median)
        );
        let (mx, my) = (cx, f.py(b.mean));
        let _ = writeln!(
            out,
            r#"<path d="M{:.1},{my:.1} L{mx:.1},{:.1} L{:.1},{my:.1} L{mx:.1},{:.1} Z" fill="white" stroke="black"/>"#,
            mx - 5.0,
            my - 5.0,
            mx + 5.0,
            my + 5.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{cx:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            H - BOTTOM + 16.0,
            escape(name)
        );
    }
    out.push_str("</svg>\n");
    out
}
