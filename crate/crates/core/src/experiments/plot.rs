//! Static SVG rendering of result tables.
//!
//! Output depends only on the CSV text: coordinates are printed with a fixed
//! number of decimals and elements are emitted in column order.

use std::fmt::Write as _;

use super::output::PlotKind;
use super::{ExperimentError, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];
const HISTOGRAM_BINS: usize = 20;

struct Parsed {
    kind: PlotKind,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn plot_error(message: impl Into<String>) -> ExperimentError {
    ExperimentError::Plot(message.into())
}

fn parse(text: &str) -> Result<Parsed> {
    let declared = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .flat_map(|l| l.split_whitespace())
        .find_map(|tok| tok.strip_prefix("plot="))
        .map(|k| PlotKind::parse(k).ok_or_else(|| plot_error(format!("unknown plot kind `{k}`"))))
        .transpose()?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| plot_error(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.iter().all(|h| h.is_empty()) {
        return Err(plot_error("missing header row"));
    }
    let rows = reader
        .records()
        .map(|r| {
            r.map(|rec| rec.iter().map(str::to_string).collect())
                .map_err(|e| plot_error(e.to_string()))
        })
        .collect::<Result<Vec<Vec<String>>>>()?;
    let kind = declared.unwrap_or_else(|| {
        if header.iter().any(|h| h == "precision") && header.iter().any(|h| h == "recall") {
            PlotKind::Prd
        } else {
            PlotKind::Lines
        }
    });
    Ok(Parsed { kind, header, rows })
}

/// Render a result CSV (as written by the experiment runner) to SVG.
pub fn render_csv(text: &str) -> Result<String> {
    let parsed = parse(text)?;
    let mut svg = Svg::new();
    match parsed.kind {
        PlotKind::Prd => prd(&mut svg, &parsed)?,
        PlotKind::Lines | PlotKind::None => lines(&mut svg, &parsed),
        PlotKind::Histogram => histograms(&mut svg, &parsed),
    }
    Ok(svg.finish())
}

struct Svg {
    body: String,
}

impl Svg {
    fn new() -> Self {
        let mut body = String::new();
        let _ = writeln!(
            body,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(body, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        Self { body }
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str) {
        let _ = writeln!(
            self.body,
            r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{stroke}"/>"#
        );
    }

    fn text(&mut self, x: f64, y: f64, anchor: &str, content: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{x:.2}" y="{y:.2}" text-anchor="{anchor}">{}</text>"#,
            escape(content)
        );
    }

    fn polyline(&mut self, points: &[(f64, f64)], stroke: &str, width: f64) {
        if points.is_empty() {
            return;
        }
        let mut p = String::new();
        for (i, (x, y)) in points.iter().enumerate() {
            if i > 0 {
                p.push(' ');
            }
            let _ = write!(p, "{x:.2},{y:.2}");
        }
        let _ = writeln!(
            self.body,
            r#"<polyline fill="none" stroke="{stroke}" stroke-width="{width}" points="{p}"/>"#
        );
    }

    fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str) {
        let _ = writeln!(
            self.body,
            r#"<rect x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{h:.2}" fill="{fill}"/>"#
        );
    }

    fn finish(mut self) -> String {
        self.body.push_str("</svg>\n");
        self.body
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// A plotting panel: pixel rectangle plus data ranges.
struct Frame {
    left: f64,
    top: f64,
    right: f64,
    bottom: f64,
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        self.left + (x - self.x.0) / (self.x.1 - self.x.0) * (self.right - self.left)
    }

    fn py(&self, y: f64) -> f64 {
        self.bottom - (y - self.y.0) / (self.y.1 - self.y.0) * (self.bottom - self.top)
    }

    fn axes(&self, svg: &mut Svg, x_label: &str, y_label: &str) {
        svg.line(self.left, self.bottom, self.right, self.bottom, "black");
        svg.line(self.left, self.bottom, self.left, self.top, "black");
        for i in 0..=4 {
            let f = i as f64 / 4.0;
            let xv = self.x.0 + f * (self.x.1 - self.x.0);
            let yv = self.y.0 + f * (self.y.1 - self.y.0);
            let (xp, yp) = (self.px(xv), self.py(yv));
            svg.line(xp, self.bottom, xp, self.bottom + 4.0, "black");
            svg.text(xp, self.bottom + 16.0, "middle", &tick(xv));
            svg.line(self.left - 4.0, yp, self.left, yp, "black");
            svg.text(self.left - 6.0, yp + 4.0, "end", &tick(yv));
        }
        svg.text((self.left + self.right) / 2.0, self.bottom + 32.0, "middle", x_label);
        svg.text(self.left, self.top - 8.0, "start", y_label);
    }
}

fn tick(v: f64) -> String {
    let s = format!("{v:.3}");
    if s == "-0.000" {
        "0.000".into()
    } else {
        s
    }
}

/// Padded range covering `values`; `[0, 1]` when empty.
fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo <= f64::EPSILON * lo.abs().max(1.0) {
        let pad = 0.5 * lo.abs().max(1.0) * 1e-3;
        return (lo - pad, hi + pad);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn numeric(rows: &[Vec<String>], col: usize) -> Vec<Option<f64>> {
    rows.iter()
        .map(|r| r.get(col).and_then(|c| c.parse::<f64>().ok()).filter(|v| v.is_finite()))
        .collect()
}

fn main_frame() -> Frame {
    Frame {
        left: 70.0,
        top: 30.0,
        right: 620.0,
        bottom: 350.0,
        x: (0.0, 1.0),
        y: (0.0, 1.0),
    }
}

fn prd(svg: &mut Svg, parsed: &Parsed) -> Result<()> {
    let col = |name: &str| {
        parsed
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| plot_error(format!("PRD table lacks a `{name}` column")))
    };
    let frame = main_frame();
    frame.axes(svg, "recall", "precision");
    let curve = |p: usize, r: usize| -> Vec<(f64, f64)> {
        numeric(&parsed.rows, r)
            .into_iter()
            .zip(numeric(&parsed.rows, p))
            .filter_map(|(r, p)| Some((frame.px(r?), frame.py(p?))))
            .collect()
    };
    let mut run = 0;
    while let (Some(p), Some(r)) = (
        parsed.header.iter().position(|h| *h == format!("precision_run{run}")),
        parsed.header.iter().position(|h| *h == format!("recall_run{run}")),
    ) {
        svg.polyline(&curve(p, r), "#bbbbbb", 1.0);
        run += 1;
    }
    svg.polyline(&curve(col("precision")?, col("recall")?), PALETTE[0], 2.0);
    Ok(())
}

fn lines(svg: &mut Svg, parsed: &Parsed) {
    let xs = numeric(&parsed.rows, 0);
    let series: Vec<(usize, Vec<Option<f64>>)> = (1..parsed.header.len())
        .map(|c| (c, numeric(&parsed.rows, c)))
        .filter(|(_, v)| v.iter().any(Option::is_some))
        .collect();
    let points = |ys: &[Option<f64>]| -> Vec<(f64, f64)> {
        xs.iter()
            .zip(ys)
            .filter_map(|(x, y)| Some((x.as_ref().copied()?, y.as_ref().copied()?)))
            .collect()
    };
    let all: Vec<(f64, f64)> = series.iter().flat_map(|(_, ys)| points(ys)).collect();
    let mut frame = main_frame();
    frame.x = range(all.iter().map(|p| p.0));
    frame.y = range(all.iter().map(|p| p.1));
    let x_label = parsed.header.first().map(String::as_str).unwrap_or("");
    frame.axes(svg, x_label, "");
    for (i, (c, ys)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut pts = points(ys);
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let px: Vec<(f64, f64)> = pts.iter().map(|&(x, y)| (frame.px(x), frame.py(y))).collect();
        svg.polyline(&px, color, 1.5);
        let ly = frame.top + 14.0 * i as f64;
        svg.line(frame.right - 110.0, ly, frame.right - 95.0, ly, color);
        svg.text(frame.right - 90.0, ly + 4.0, "start", &parsed.header[*c]);
    }
}

fn histograms(svg: &mut Svg, parsed: &Parsed) {
    let n = parsed.header.len().max(1);
    let cols = (n as f64).sqrt().ceil() as usize;
    let grid_rows = n.div_ceil(cols);
    let cell_w = (WIDTH - 20.0) / cols as f64;
    let cell_h = (HEIGHT - 10.0) / grid_rows as f64;
    for (c, name) in parsed.header.iter().enumerate() {
        let values: Vec<f64> = numeric(&parsed.rows, c).into_iter().flatten().collect();
        let (gx, gy) = ((c % cols) as f64, (c / cols) as f64);
        let mut frame = Frame {
            left: 10.0 + gx * cell_w + 45.0,
            top: 10.0 + gy * cell_h + 20.0,
            right: 10.0 + (gx + 1.0) * cell_w - 10.0,
            bottom: 10.0 + (gy + 1.0) * cell_h - 36.0,
            x: range(values.iter().copied()),
            y: (0.0, 1.0),
        };
        let mut counts = [0usize; HISTOGRAM_BINS];
        let width = (frame.x.1 - frame.x.0) / HISTOGRAM_BINS as f64;
        for v in &values {
            let b = (((v - frame.x.0) / width) as usize).min(HISTOGRAM_BINS - 1);
            counts[b] += 1;
        }
        let peak = counts.iter().copied().max().unwrap_or(0);
        if peak > 0 {
            frame.y = (0.0, peak as f64);
        }
        frame.axes(svg, name, "count");
        for (b, &count) in counts.iter().enumerate() {
            if count == 0 {
                continue;
            }
            let x0 = frame.px(frame.x.0 + b as f64 * width);
            let x1 = frame.px(frame.x.0 + (b + 1) as f64 * width);
            let y = frame.py(count as f64);
            svg.rect(x0, y, x1 - x0, frame.bottom - y, PALETTE[c % PALETTE.len()]);
        }
    }
}
