//! SVG panels of convergence time against echoing factor.
//!
//! One panel per (dataset, algorithm, B): log-scale K on x, steps and
//! samples at convergence on a log left axis with ±1 std bands, tuned step
//! size on a log right axis. Cells with an unconverged run use a cross
//! marker instead of a dot.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{ensure, Context, Result};

use crate::sweep::CellSummary;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 80.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const STEPS_COLOR: &str = "#1f5fbf";
const SAMPLES_COLOR: &str = "#c0392b";
const ETA_COLOR: &str = "#2e8b57";

/// Mean and standard deviation of one plotted quantity.
type Series = fn(&CellSummary) -> (f64, f64);

/// Log-scale axis mapping `[lo, hi]` (in log10) onto `[a, b]` pixels.
#[derive(Clone, Copy, Debug)]
struct LogAxis {
    lo: f64,
    hi: f64,
    a: f64,
    b: f64,
}

impl LogAxis {
    /// Padded log range covering the positive finite `values`.
    fn covering(values: impl Iterator<Item = f64>, a: f64, b: f64) -> LogAxis {
        let logs: Vec<f64> = values
            .filter(|v| v.is_finite() && *v > 0.0)
            .map(f64::log10)
            .collect();
        let (mut lo, mut hi) = logs
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| {
                (l.min(v), h.max(v))
            });
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        let pad = if hi - lo < 1e-9 {
            0.5
        } else {
            0.08 * (hi - lo)
        };
        LogAxis {
            lo: lo - pad,
            hi: hi + pad,
            a,
            b,
        }
    }

    fn map(&self, v: f64) -> f64 {
        self.a + (v.log10() - self.lo) / (self.hi - self.lo) * (self.b - self.a)
    }

    /// Powers of ten inside the range.
    fn decades(&self) -> Vec<f64> {
        (self.lo.ceil() as i32..=self.hi.floor() as i32)
            .map(|e| 10f64.powi(e))
            .collect()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn fmt_num(v: f64) -> String {
    if (1e-3..1e5).contains(&v.abs()) {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.0e}")
    }
}

fn marker(out: &mut String, series: &str, color: &str, x: f64, y: f64, converged: bool) {
    if converged {
        let _ = writeln!(
            out,
            r#"<circle class="point {series}" cx="{x:.2}" cy="{y:.2}" r="4" fill="{color}"/>"#
        );
    } else {
        let _ = writeln!(
            out,
            r#"<path class="point {series} unconverged" d="M{:.2},{:.2}L{:.2},{:.2}M{:.2},{:.2}L{:.2},{:.2}" stroke="{color}" stroke-width="2" fill="none"/>"#,
            x - 5.0,
            y - 5.0,
            x + 5.0,
            y + 5.0,
            x - 5.0,
            y + 5.0,
            x + 5.0,
            y - 5.0
        );
    }
}

/// One panel for cells sharing a batch size.
pub fn render_panel(cells: &[&CellSummary]) -> String {
    let mut cells: Vec<&CellSummary> = cells.to_vec();
    cells.sort_by(|a, b| a.k_mean.total_cmp(&b.k_mean));
    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, HEIGHT - BOTTOM, TOP);
    let x_axis = LogAxis::covering(cells.iter().map(|c| c.k_mean), x0, x1);
    let lower = |m: f64, s: f64| if m - s > 0.0 { m - s } else { m / 2.0 };
    let y_axis = LogAxis::covering(
        cells.iter().flat_map(|c| {
            [
                lower(c.mean_steps, c.std_steps),
                c.mean_steps + c.std_steps,
                lower(c.mean_samples, c.std_samples),
                c.mean_samples + c.std_samples,
            ]
        }),
        y0,
        y1,
    );
    let eta_axis = LogAxis::covering(cells.iter().map(|c| c.eta), y0, y1);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    if let Some(c) = cells.first() {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{} / {} / B = {}</text>"#,
            WIDTH / 2.0,
            escape(&c.dataset),
            escape(&c.algorithm),
            c.batch_size
        );
    }
    let _ = writeln!(
        s,
        r#"<path class="axes" d="M{x0},{y1}L{x0},{y0}L{x1},{y0}L{x1},{y1}" stroke="black" fill="none"/>"#
    );
    for c in &cells {
        let x = x_axis.map(c.k_mean);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{y0}" x2="{x:.2}" y2="{:.1}" stroke="black"/>"#,
            y0 + 5.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{:.1}" text-anchor="middle">{}</text>"#,
            y0 + 18.0,
            escape(&c.k)
        );
    }
    for v in y_axis.decades() {
        let y = y_axis.map(v);
        let _ = writeln!(
            s,
            r#"<line x1="{:.1}" y1="{y:.2}" x2="{x0}" y2="{y:.2}" stroke="black"/>"#,
            x0 - 5.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 8.0,
            y + 4.0,
            fmt_num(v)
        );
    }
    for v in eta_axis.decades() {
        let y = eta_axis.map(v);
        let _ = writeln!(
            s,
            r#"<line x1="{x1}" y1="{y:.2}" x2="{:.1}" y2="{y:.2}" stroke="{ETA_COLOR}"/>"#,
            x1 + 5.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.2}" fill="{ETA_COLOR}">{}</text>"#,
            x1 + 8.0,
            y + 4.0,
            fmt_num(v)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">echoing factor K</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate(18,{:.1}) rotate(-90)" text-anchor="middle">at convergence</text>"#,
        (y0 + y1) / 2.0
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate({:.1},{:.1}) rotate(90)" text-anchor="middle" fill="{ETA_COLOR}">tuned step size</text>"#,
        WIDTH - 12.0,
        (y0 + y1) / 2.0
    );

    let series: [(&str, &str, Series); 2] = [
        ("steps", STEPS_COLOR, |c| (c.mean_steps, c.std_steps)),
        ("samples", SAMPLES_COLOR, |c| {
            (c.mean_samples, c.std_samples)
        }),
    ];
    for (name, color, get) in series {
        let upper: Vec<String> = cells
            .iter()
            .map(|c| {
                let (m, sd) = get(c);
                format!("{:.2},{:.2}", x_axis.map(c.k_mean), y_axis.map(m + sd))
            })
            .collect();
        let below: Vec<String> = cells
            .iter()
            .rev()
            .map(|c| {
                let (m, sd) = get(c);
                format!(
                    "{:.2},{:.2}",
                    x_axis.map(c.k_mean),
                    y_axis.map(lower(m, sd))
                )
            })
            .collect();
        let _ = writeln!(
            s,
            r#"<polygon class="band {name}" points="{} {}" fill="{color}" fill-opacity="0.18" stroke="none"/>"#,
            upper.join(" "),
            below.join(" ")
        );
        let line: Vec<String> = cells
            .iter()
            .map(|c| format!("{:.2},{:.2}", x_axis.map(c.k_mean), y_axis.map(get(c).0)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline class="line {name}" points="{}" stroke="{color}" stroke-width="2" fill="none"/>"#,
            line.join(" ")
        );
        for c in &cells {
            marker(
                &mut s,
                name,
                color,
                x_axis.map(c.k_mean),
                y_axis.map(get(c).0),
                c.all_converged(),
            );
        }
    }
    let eta_line: Vec<String> = cells
        .iter()
        .map(|c| format!("{:.2},{:.2}", x_axis.map(c.k_mean), eta_axis.map(c.eta)))
        .collect();
    let _ = writeln!(
        s,
        r#"<polyline class="line eta" points="{}" stroke="{ETA_COLOR}" stroke-dasharray="5,4" fill="none"/>"#,
        eta_line.join(" ")
    );
    for c in &cells {
        let (x, y) = (x_axis.map(c.k_mean), eta_axis.map(c.eta));
        let _ = writeln!(
            s,
            r#"<path class="eta" d="M{x:.2},{:.2}L{:.2},{y:.2}L{x:.2},{:.2}L{:.2},{y:.2}Z" fill="{ETA_COLOR}"/>"#,
            y - 4.0,
            x + 4.0,
            y + 4.0,
            x - 4.0
        );
    }
    let legend = [
        (STEPS_COLOR, "steps KT"),
        (SAMPLES_COLOR, "samples BT"),
        (ETA_COLOR, "tuned step size"),
    ];
    for (i, (color, label)) in legend.iter().enumerate() {
        let y = TOP + 14.0 + 16.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{:.1}" y="{:.1}" width="10" height="10" fill="{color}"/>"#,
            x0 + 10.0,
            y - 9.0
        );
        let _ = writeln!(s, r#"<text x="{:.1}" y="{y:.1}">{label}</text>"#, x0 + 26.0);
    }
    s.push_str("</svg>\n");
    s
}

fn file_stem(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Writes one panel per (dataset, algorithm, B) into `out_dir`.
pub fn emit_plots(cells: &[CellSummary], out_dir: &Path) -> Result<Vec<PathBuf>> {
    ensure!(!cells.is_empty(), "no cells to plot");
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let mut keys: Vec<(&str, &str, usize)> = Vec::new();
    for c in cells {
        let key = (c.dataset.as_str(), c.algorithm.as_str(), c.batch_size);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    let mut paths = Vec::new();
    for (dataset, algorithm, b) in keys {
        let panel: Vec<&CellSummary> = cells
            .iter()
            .filter(|c| c.dataset == dataset && c.algorithm == algorithm && c.batch_size == b)
            .collect();
        let path = out_dir.join(format!(
            "{}_{}_B{b}.svg",
            file_stem(dataset),
            file_stem(algorithm)
        ));
        std::fs::write(&path, render_panel(&panel))
            .with_context(|| format!("writing {}", path.display()))?;
        paths.push(path);
    }
    Ok(paths)
}
