//! Static SVG rendering of MSE curves and of the MSE surface over AR
//! coefficient and mobility.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::{GridCurve, SweepResult};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotAxis {
    Mobility,
    Sir,
}

impl PlotAxis {
    fn label(self) -> &'static str {
        match self {
            PlotAxis::Mobility => "Mobility (km/h)",
            PlotAxis::Sir => "SIR (dB)",
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Frame {
    x0: f64,
    x1: f64,
    /// log10 bounds
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        let span = if self.x1 > self.x0 { self.x1 - self.x0 } else { 1.0 };
        LEFT + (x - self.x0) / span * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        let span = if self.y1 > self.y0 { self.y1 - self.y0 } else { 1.0 };
        HEIGHT - BOTTOM - (y.log10() - self.y0) / span * (HEIGHT - TOP - BOTTOM)
    }
}

fn header(svg: &mut String, title: &str) {
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        escape(title)
    );
}

/// Log-scale MSE chart, one polyline per estimator.
pub fn line_chart_svg(result: &SweepResult, axis: PlotAxis) -> Result<String> {
    if result.rows.is_empty() {
        return Err(Error::invalid("result", "nothing to plot"));
    }
    let xs = |r: &crate::harness::SweepRow| match axis {
        PlotAxis::Mobility => r.v_kmh,
        PlotAxis::Sir => r.sir_db,
    };
    let finite: Vec<_> = result.rows.iter().filter(|r| r.mse > 0.0 && r.mse.is_finite()).collect();
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for r in &finite {
        x0 = x0.min(xs(r));
        x1 = x1.max(xs(r));
        lo = lo.min(r.mse);
        hi = hi.max(r.mse);
    }
    if finite.is_empty() {
        (x0, x1, lo, hi) = (0.0, 1.0, 0.1, 1.0);
    }
    let frame = Frame {
        x0,
        x1,
        y0: lo.log10().floor(),
        y1: hi.log10().ceil().max(lo.log10().floor() + 1.0),
    };

    let mut svg = String::new();
    header(&mut svg, "MSE");
    // decade grid and labels
    let mut decade = frame.y0 as i32;
    while decade as f64 <= frame.y1 {
        let y = frame.py(10f64.powi(decade));
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">1e{decade}</text>"##,
            WIDTH - RIGHT,
            LEFT - 6.0,
            y + 4.0
        );
        decade += 1;
    }
    let mut ticks: Vec<f64> = finite.iter().map(|r| xs(r)).collect();
    ticks.sort_by(f64::total_cmp);
    ticks.dedup();
    for t in ticks {
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            frame.px(t),
            HEIGHT - BOTTOM + 16.0,
            t
        );
    }
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        WIDTH - LEFT - RIGHT,
        HEIGHT - TOP - BOTTOM
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        HEIGHT - 16.0,
        axis.label()
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">MSE</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );

    let mut kinds: Vec<_> = result.rows.iter().map(|r| r.estimator).collect();
    kinds.dedup();
    kinds.sort();
    kinds.dedup();
    for (i, kind) in kinds.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut pts: Vec<_> = finite.iter().filter(|r| r.estimator == *kind).map(|r| (xs(r), r.mse)).collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let coords: Vec<String> = pts
            .iter()
            .map(|(x, y)| format!("{:.2},{:.2}", frame.px(*x), frame.py(*y)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"><title>{kind}</title></polyline>"#,
            coords.join(" ")
        );
        let ly = TOP + 20.0 + 20.0 * i as f64;
        let lx = WIDTH - RIGHT + 12.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{kind}</text>"#,
            lx + 24.0,
            lx + 30.0,
            ly + 4.0
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn heat_color(t: f64) -> String {
    // dark blue -> teal -> yellow
    let t = t.clamp(0.0, 1.0);
    let stops = [(68.0, 1.0, 84.0), (33.0, 145.0, 140.0), (253.0, 231.0, 37.0)];
    let (a, b, u) = if t < 0.5 { (stops[0], stops[1], t * 2.0) } else { (stops[1], stops[2], t * 2.0 - 1.0) };
    let mix = |x: f64, y: f64| (x + (y - x) * u).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

/// Heatmap of log10 MSE with AR coefficient on x and mobility on y.
pub fn surface_svg(curves: &[GridCurve]) -> Result<String> {
    if curves.is_empty() || curves.iter().any(|c| c.grid.is_empty()) {
        return Err(Error::invalid("surface", "nothing to plot"));
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for m in curves.iter().flat_map(|c| &c.mse).filter(|m| **m > 0.0 && m.is_finite()) {
        lo = lo.min(m.log10());
        hi = hi.max(m.log10());
    }
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let row_h = plot_h / curves.len() as f64;

    let mut svg = String::new();
    header(&mut svg, "MSE over AR coefficient and mobility");
    for (ri, c) in curves.iter().enumerate() {
        let y = TOP + plot_h - (ri + 1) as f64 * row_h;
        let cell_w = plot_w / c.grid.len() as f64;
        for (gi, m) in c.mse.iter().enumerate() {
            let t = if hi > lo { (m.log10() - lo) / (hi - lo) } else { 0.0 };
            let _ = writeln!(
                svg,
                r#"<rect x="{:.2}" y="{y:.2}" width="{:.2}" height="{row_h:.2}" fill="{}"/>"#,
                LEFT + gi as f64 * cell_w,
                cell_w + 0.3,
                heat_color(t)
            );
        }
        // marker at the optimum
        let best = c.grid.iter().position(|a| *a == c.a_star).unwrap_or(0);
        let _ = writeln!(
            svg,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="red"/>"#,
            LEFT + (best as f64 + 0.5) * cell_w,
            y + row_h / 2.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            y + row_h / 2.0 + 4.0,
            c.v_kmh
        );
    }
    let first = &curves[0].grid;
    for frac in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let idx = ((first.len() - 1) as f64 * frac).round() as usize;
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{:.2}</text>"#,
            LEFT + (idx as f64 + 0.5) * plot_w / first.len() as f64,
            HEIGHT - BOTTOM + 16.0,
            first[idx]
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">AR coefficient a</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 16.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">Mobility (km/h)</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    // colour bar
    for i in 0..20 {
        let t = i as f64 / 19.0;
        let _ = writeln!(
            svg,
            r#"<rect x="{:.2}" y="{:.2}" width="16" height="{:.2}" fill="{}"/>"#,
            WIDTH - RIGHT + 24.0,
            TOP + plot_h * (1.0 - (i + 1) as f64 / 20.0),
            plot_h / 20.0 + 0.3,
            heat_color(t)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}">1e{lo:.1}</text><text x="{:.2}" y="{:.2}">1e{hi:.1}</text>"#,
        WIDTH - RIGHT + 46.0,
        TOP + plot_h,
        WIDTH - RIGHT + 46.0,
        TOP + 10.0
    );
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn write(path: &Path, svg: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}

pub fn render_plot(result: &SweepResult, axis: PlotAxis, path: &Path) -> Result<()> {
    write(path, &line_chart_svg(result, axis)?)
}

pub fn render_surface(curves: &[GridCurve], path: &Path) -> Result<()> {
    write(path, &surface_svg(curves)?)
}
