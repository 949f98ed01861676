//! CSV tables with a fixed numeric format, and static SVG line plots.

use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Float(x) => format_float(*x),
            Cell::Int(n) => n.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Float(x) => Some(*x),
            Cell::Int(n) => Some(*n as f64),
            Cell::Empty => None,
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<usize> for Cell {
    fn from(n: usize) -> Self {
        Cell::Int(n as i64)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

/// 17 significant digits in scientific notation.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let k = self.header.iter().position(|h| *h == name)?;
        Some(self.rows.iter().map(|r| r[k].as_f64()).collect())
    }

    /// `# config_sha256=…`, then the header, then one line per row.
    pub fn to_csv(&self, config_sha256: &str) -> String {
        let mut out = format!("# config_sha256={config_sha256}\n");
        out += &self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            out += &cells.join(",");
            out.push('\n');
        }
        out
    }

    /// Every numeric column against the first one.
    pub fn to_svg(&self, title: &str) -> String {
        let x: Vec<Option<f64>> = self.rows.iter().map(|r| r[0].as_f64()).collect();
        let series: Vec<(&str, Vec<Option<f64>>)> = self.header[1..]
            .iter()
            .enumerate()
            .map(|(k, h)| (*h, self.rows.iter().map(|r| r[k + 1].as_f64()).collect()))
            .collect();
        svg_plot(title, self.header[0], &x, &series)
    }
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn finite_range(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo > hi {
        return None;
    }
    if hi - lo < 1e-300 {
        Some((lo - 0.5, hi + 0.5))
    } else {
        Some((lo, hi))
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn svg_plot(title: &str, x_label: &str, x: &[Option<f64>], series: &[(&str, Vec<Option<f64>>)]) -> String {
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let xr = finite_range(x.iter().flatten().copied());
    let yr = finite_range(series.iter().flat_map(|(_, v)| v.iter().flatten().copied()));
    let (Some((x0, x1)), Some((y0, y1))) = (xr, yr) else {
        svg.push_str("</svg>\n");
        return svg;
    };
    let (pw, ph) = (WIDTH - 2.0 * MARGIN, HEIGHT - 2.0 * MARGIN);
    let sx = |v: f64| MARGIN + (v - x0) / (x1 - x0) * pw;
    let sy = |v: f64| HEIGHT - MARGIN - (v - y0) / (y1 - y0) * ph;
    let _ = writeln!(
        svg,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for (v, anchor, px, py) in [
        (x0, "start", MARGIN, HEIGHT - MARGIN + 18.0),
        (x1, "end", WIDTH - MARGIN, HEIGHT - MARGIN + 18.0),
    ] {
        let _ = writeln!(
            svg,
            r#"<text x="{px}" y="{py}" text-anchor="{anchor}" font-family="sans-serif" font-size="11">{v:.4e}</text>"#
        );
    }
    for (v, py) in [(y0, HEIGHT - MARGIN), (y1, MARGIN + 10.0)] {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{py}" text-anchor="end" font-family="sans-serif" font-size="11">{v:.3e}</text>"#,
            MARGIN - 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="13">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 18.0,
        escape(x_label)
    );
    for (k, (name, ys)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let points: Vec<String> = x
            .iter()
            .zip(ys)
            .filter_map(|(xv, yv)| match (xv, yv) {
                (Some(a), Some(b)) if a.is_finite() && b.is_finite() => Some(format!("{:.2},{:.2}", sx(*a), sy(*b))),
                _ => None,
            })
            .collect();
        if !points.is_empty() {
            let _ = writeln!(
                svg,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                points.join(" ")
            );
        }
        let ly = MARGIN + 16.0 * (k as f64 + 1.0);
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{ly}" text-anchor="end" fill="{color}" font-family="sans-serif" font-size="12">{}</text>"#,
            WIDTH - MARGIN - 6.0,
            escape(name)
        );
    }
    svg.push_str("</svg>\n");
    svg
}
