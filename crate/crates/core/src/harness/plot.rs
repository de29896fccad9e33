use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::summary::{CellSummary, Summary};
use super::write_atomic;
use crate::error::Result;

pub const PLOTS_DIR: &str = "plots";

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

struct Axes {
    x: (f64, f64),
    y: (f64, f64),
}

impl Axes {
    fn fit(cells: &[&CellSummary]) -> Self {
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for c in cells {
            for (i, &e) in c.curve.evaluations.iter().enumerate() {
                x0 = x0.min(e as f64);
                x1 = x1.max(e as f64);
                y0 = y0.min(c.curve.q1[i]);
                y1 = y1.max(c.curve.q3[i]);
            }
        }
        if !x0.is_finite() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        if x1 <= x0 {
            x1 = x0 + 1.0;
        }
        if y1 <= y0 {
            let pad = y0.abs().max(1.0) * 0.05;
            (y0, y1) = (y0 - pad, y1 + pad);
        }
        Self { x: (x0, x1), y: (y0, y1) }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn tick_label(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e5 || v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v:.2}")
    }
}

/// Median incumbent against evaluations, one polyline per algorithm with an
/// interquartile band when the cell has more than one trial.
pub fn render_problem_svg(problem: &str, cells: &[&CellSummary]) -> String {
    let axes = Axes::fit(cells);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        escape(problem)
    );
    let (x_end, y_end) = (WIDTH - RIGHT, HEIGHT - BOTTOM);
    let _ = writeln!(
        s,
        r#"<path d="M{LEFT:.1},{TOP:.1} V{y_end:.1} H{x_end:.1}" fill="none" stroke="black"/>"#
    );
    for k in 0..=4 {
        let t = k as f64 / 4.0;
        let xv = axes.x.0 + t * (axes.x.1 - axes.x.0);
        let yv = axes.y.0 + t * (axes.y.1 - axes.y.0);
        let (x, y) = (axes.px(xv), axes.py(yv));
        let _ = writeln!(
            s,
            r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            y_end + 18.0,
            tick_label(xv)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            y + 4.0,
            tick_label(yv)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">evaluations</text>"#,
        (LEFT + x_end) / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">incumbent</text>"#,
        (TOP + y_end) / 2.0,
        (TOP + y_end) / 2.0
    );
    for (i, c) in cells.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let e = &c.curve.evaluations;
        if c.trials > 1 && !e.is_empty() {
            let mut pts: Vec<String> = e
                .iter()
                .zip(&c.curve.q3)
                .map(|(&x, &y)| format!("{:.2},{:.2}", axes.px(x as f64), axes.py(y)))
                .collect();
            pts.extend(
                e.iter()
                    .zip(&c.curve.q1)
                    .rev()
                    .map(|(&x, &y)| format!("{:.2},{:.2}", axes.px(x as f64), axes.py(y))),
            );
            let _ = writeln!(
                s,
                r#"<polygon class="band" data-algorithm="{}" points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
                escape(&c.algorithm),
                pts.join(" ")
            );
        }
        let pts: Vec<String> = e
            .iter()
            .zip(&c.curve.median)
            .map(|(&x, &y)| format!("{:.2},{:.2}", axes.px(x as f64), axes.py(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline class="median" data-algorithm="{}" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            escape(&c.algorithm),
            pts.join(" ")
        );
        let ly = TOP + 10.0 + 20.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/>"#,
            x_end + 15.0,
            x_end + 40.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}">{}</text>"#,
            x_end + 46.0,
            ly + 4.0,
            escape(&c.algorithm)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Write `plots/<problem>.svg` for every problem in the summary.
pub fn export_plots(summary: &Summary, dir: &Path) -> Result<Vec<PathBuf>> {
    let out = dir.join(PLOTS_DIR);
    std::fs::create_dir_all(&out)?;
    let mut written = Vec::new();
    for problem in summary.problems() {
        let cells: Vec<&CellSummary> = summary.cells.iter().filter(|c| c.problem == problem).collect();
        let path = out.join(format!("{problem}.svg"));
        write_atomic(&path, render_problem_svg(problem, &cells).as_bytes())?;
        written.push(path);
    }
    Ok(written)
}
