//! Standalone SVG figures of a run directory. Coordinates are printed with
//! fixed precision so identical inputs give identical bytes.

use crate::run::{load_run, HarnessError, DENSITY, SERIES};
use lmcf_core::io::read_curve;
use lmcf_core::models::{lawlor_margin_for_radius, lawlor_profile};
use lmcf_core::Point;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotKind {
    /// Profile curves at five times.
    Flow,
    /// One figure per rescaling directory, with the fitted model.
    Rescale,
    /// Gaussian density against scale.
    Density,
    /// `max |A|²` against time.
    A2,
}

impl PlotKind {
    pub const ALL: [PlotKind; 4] = [PlotKind::Flow, PlotKind::Rescale, PlotKind::Density, PlotKind::A2];
}

impl std::str::FromStr for PlotKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "flow" => Ok(PlotKind::Flow),
            "rescale" => Ok(PlotKind::Rescale),
            "density" => Ok(PlotKind::Density),
            "a2" => Ok(PlotKind::A2),
            _ => Err(format!("unknown plot {s:?} (flow, rescale, density, a2)")),
        }
    }
}

#[derive(Debug, Default)]
pub struct PlotReport {
    pub written: Vec<PathBuf>,
    pub notices: Vec<String>,
}

const PALETTE: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];

struct Line {
    points: Vec<(f64, f64)>,
    color: String,
    dashed: bool,
    label: Option<String>,
}

impl Line {
    fn new(points: Vec<(f64, f64)>, color: &str) -> Self {
        Line { points, color: color.to_string(), dashed: false, label: None }
    }

    fn labelled(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    fn dashed(mut self) -> Self {
        self.dashed = true;
        self
    }
}

struct Figure {
    title: String,
    xlabel: String,
    ylabel: String,
    x: (f64, f64),
    y: (f64, f64),
    log_x: bool,
    log_y: bool,
    width: f64,
    height: f64,
    lines: Vec<Line>,
}

const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

impl Figure {
    fn new(title: &str, xlabel: &str, ylabel: &str, x: (f64, f64), y: (f64, f64)) -> Self {
        Figure {
            title: title.into(),
            xlabel: xlabel.into(),
            ylabel: ylabel.into(),
            x,
            y,
            log_x: false,
            log_y: false,
            width: 640.0,
            height: 480.0,
            lines: Vec::new(),
        }
    }

    /// Square plot area for curves in the plane.
    fn plane(title: &str, half_width: f64) -> Self {
        let mut f = Figure::new(title, "x", "y", (-half_width, half_width), (-half_width, half_width));
        f.width = 480.0 + LEFT + RIGHT;
        f.height = 480.0 + TOP + BOTTOM;
        f
    }

    fn tx(&self, v: f64, (lo, hi): (f64, f64), log: bool) -> f64 {
        let (v, lo, hi) = if log { (v.log10(), lo.log10(), hi.log10()) } else { (v, lo, hi) };
        (v - lo) / (hi - lo)
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + self.tx(x, self.x, self.log_x) * (self.width - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        self.height - BOTTOM - self.tx(y, self.y, self.log_y) * (self.height - TOP - BOTTOM)
    }

    fn render(&self) -> String {
        let (w, h) = (self.width, self.height);
        let (pw, ph) = (w - LEFT - RIGHT, h - TOP - BOTTOM);
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{w:.0}" height="{h:.0}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<defs><clipPath id="plot"><rect x="{LEFT:.0}" y="{TOP:.0}" width="{pw:.0}" height="{ph:.0}"/></clipPath></defs>"#
        );
        let _ = writeln!(s, r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(&self.title));
        for t in ticks(self.x, self.log_x) {
            let x = self.px(t);
            let _ = writeln!(s, r##"<line x1="{x:.2}" y1="{TOP:.0}" x2="{x:.2}" y2="{:.0}" stroke="#e0e0e0"/>"##, h - BOTTOM);
            let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.0}" text-anchor="middle">{}</text>"#, h - BOTTOM + 16.0, tick_label(t));
        }
        for t in ticks(self.y, self.log_y) {
            let y = self.py(t);
            let _ = writeln!(s, r##"<line x1="{LEFT:.0}" y1="{y:.2}" x2="{:.0}" y2="{y:.2}" stroke="#e0e0e0"/>"##, w - RIGHT);
            let _ = writeln!(s, r#"<text x="{:.0}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 6.0, y + 4.0, tick_label(t));
        }
        let _ = writeln!(s, r#"<rect x="{LEFT:.0}" y="{TOP:.0}" width="{pw:.0}" height="{ph:.0}" fill="none" stroke="black"/>"#);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.0}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, h - 12.0, escape(&self.xlabel));
        let _ = writeln!(
            s,
            r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(&self.ylabel)
        );
        let _ = writeln!(s, r#"<g clip-path="url(#plot)" fill="none" stroke-width="1.5">"#);
        for line in &self.lines {
            let pts: Vec<String> = line
                .points
                .iter()
                .filter(|(x, y)| (!self.log_x || *x > 0.0) && (!self.log_y || *y > 0.0) && x.is_finite() && y.is_finite())
                .map(|&(x, y)| format!("{:.2},{:.2}", self.px(x), self.py(y)))
                .collect();
            if pts.len() < 2 {
                continue;
            }
            let dash = if line.dashed { r#" stroke-dasharray="6 4""# } else { "" };
            let _ = writeln!(s, r#"<polyline stroke="{}"{dash} points="{}"/>"#, line.color, pts.join(" "));
        }
        s.push_str("</g>\n");
        let mut ly = TOP + 16.0;
        for line in self.lines.iter().filter(|l| l.label.is_some()) {
            let x = w - RIGHT - 150.0;
            let dash = if line.dashed { r#" stroke-dasharray="6 4""# } else { "" };
            let _ = writeln!(
                s,
                r#"<line x1="{x:.0}" y1="{:.0}" x2="{:.0}" y2="{:.0}" stroke="{}" stroke-width="2"{dash}/>"#,
                ly - 4.0,
                x + 24.0,
                ly - 4.0,
                line.color
            );
            let _ = writeln!(s, r#"<text x="{:.0}" y="{ly:.0}">{}</text>"#, x + 30.0, escape(line.label.as_deref().unwrap()));
            ly += 16.0;
        }
        s.push_str("</svg>\n");
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn ticks((lo, hi): (f64, f64), log: bool) -> Vec<f64> {
    if log {
        let (a, b) = (lo.log10().ceil() as i32, hi.log10().floor() as i32);
        let stride = ((b - a) / 8 + 1).max(1);
        return (a..=b).step_by(stride as usize).map(|e| 10f64.powi(e)).collect();
    }
    let span = hi - lo;
    if !(span > 0.0) {
        return vec![lo];
    }
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|&s| s >= raw).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-3..1e4).contains(&a) {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.0e}")
    }
}

fn points(z: &[Point]) -> Vec<(f64, f64)> {
    z.iter().map(|p| (p.re, p.im)).collect()
}

fn save(dir: &Path, name: &str, fig: &Figure, report: &mut PlotReport) -> Result<(), HarnessError> {
    let path = dir.join(name);
    fs::write(&path, fig.render()).map_err(|source| HarnessError::Io { path: path.clone(), source })?;
    report.written.push(path);
    Ok(())
}

fn read_csv(path: &Path) -> Option<(Vec<String>, Vec<Vec<String>>)> {
    let text = fs::read_to_string(path).ok()?;
    let mut lines = text.lines();
    let header = lines.next()?.split(',').map(String::from).collect();
    let rows = lines.filter(|l| !l.is_empty()).map(|l| l.split(',').map(String::from).collect()).collect();
    Some((header, rows))
}

fn column(header: &[String], name: &str) -> Option<usize> {
    header.iter().position(|h| h == name)
}

pub fn export_plots(dir: &Path, which: &[PlotKind]) -> Result<PlotReport, HarnessError> {
    let mut report = PlotReport::default();
    for kind in which {
        match kind {
            PlotKind::Flow => flow(dir, &mut report)?,
            PlotKind::Rescale => rescalings(dir, &mut report)?,
            PlotKind::Density => density(dir, &mut report)?,
            PlotKind::A2 => a2(dir, &mut report)?,
        }
    }
    for n in &report.notices {
        log::info!("{}: {n}", dir.display());
    }
    Ok(report)
}

fn flow(dir: &Path, report: &mut PlotReport) -> Result<(), HarnessError> {
    let run = load_run(dir)?;
    let snaps = &run.trajectory.snapshots;
    let half_width = 3.0 * snaps[0].curve.min_radius().max(1.0);
    let (t0, t1) = (snaps[0].t, snaps[snaps.len() - 1].t);
    // snapshots nearest to five evenly spaced times
    let mut picks: Vec<usize> = (0..5)
        .map(|k| {
            let target = t0 + (t1 - t0) * k as f64 / 4.0;
            (0..snaps.len()).min_by(|&a, &b| (snaps[a].t - target).abs().total_cmp(&(snaps[b].t - target).abs())).unwrap()
        })
        .collect();
    picks.dedup();
    let mut fig = Figure::plane("Profile curves", half_width);
    for (c, &i) in picks.iter().enumerate() {
        let color = PALETTE[c % PALETTE.len()];
        for (j, poly) in snaps[i].curve.full_profile().iter().enumerate() {
            let line = Line::new(points(poly), color);
            fig.lines.push(if j == 0 { line.labelled(format!("t = {:.4}", snaps[i].t)) } else { line });
        }
    }
    save(dir, "flow.svg", &fig, report)
}

fn rescale_dirs(dir: &Path) -> Result<Vec<(String, PathBuf)>, HarnessError> {
    let mut out: Vec<(String, PathBuf)> = fs::read_dir(dir)
        .map_err(|source| HarnessError::Io { path: dir.to_path_buf(), source })?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .filter_map(|e| {
            let name = e.file_name().to_string_lossy().into_owned();
            name.strip_prefix("rescale_").map(|rest| (rest.to_string(), e.path()))
        })
        .collect();
    out.sort();
    Ok(out)
}

fn rescalings(dir: &Path, report: &mut PlotReport) -> Result<(), HarnessError> {
    let dirs = rescale_dirs(dir)?;
    if dirs.is_empty() {
        report.notices.push("rescaling plots skipped: no rescale_* directories".into());
        return Ok(());
    }
    let mut seen = Vec::new();
    for (tag, sub) in dirs {
        let kind = tag.rsplit_once('_').map_or(tag.as_str(), |(k, _)| k).to_string();
        let name = if seen.contains(&kind) { format!("{tag}.svg") } else { format!("{kind}.svg") };
        seen.push(kind.clone());
        let Some((header, rows)) = read_csv(&sub.join("fits.csv")) else {
            report.notices.push(format!("{name} skipped: {} missing", sub.join("fits.csv").display()));
            continue;
        };
        let half_width = if kind == "typeII" { 4.0 } else { 2.5 };
        let mut fig = Figure::plane(&format!("Rescaled profiles ({kind})"), half_width);
        let mut n = 2;
        let lambda_col = column(&header, "lambda");
        for (c, row) in rows.iter().enumerate() {
            let path = sub.join(format!("curve_{c:03}.csv"));
            let Ok((curve, _)) = read_curve(&path) else { continue };
            n = curve.n();
            let color = PALETTE[c % PALETTE.len()];
            let label = lambda_col.map(|i| format!("λ = {}", row[i].parse::<f64>().map_or(row[i].clone(), |l| format!("{l:.4}"))));
            for (j, poly) in curve.full_profile().iter().enumerate() {
                let line = Line::new(points(poly), color);
                fig.lines.push(match (&label, j) {
                    (Some(l), 0) => line.labelled(l.clone()),
                    _ => line,
                });
            }
        }
        let field = |row: &Vec<String>, name: &str| column(&header, name).and_then(|i| row.get(i)).and_then(|v| v.parse::<f64>().ok());
        match rows.iter().rev().find(|r| field(r, "theta_bar").is_some()) {
            Some(row) => {
                let theta = field(row, "theta_bar").unwrap();
                if let Some(b) = field(row, "b") {
                    if let Ok(neck) = lawlor_profile(b, theta, n, lawlor_margin_for_radius(b, n, 2.0 * half_width), half_width / 200.0) {
                        for (j, poly) in neck.full_profile().iter().enumerate() {
                            let line = Line::new(points(poly), "black").dashed();
                            fig.lines.push(if j == 0 { line.labelled(format!("neck B = {b:.4}")) } else { line });
                        }
                    }
                } else {
                    for (j, a) in ["alpha1", "alpha2"].iter().filter_map(|c| field(row, c)).enumerate() {
                        let d = Point::from_polar(2.0 * half_width, a);
                        let line = Line::new(vec![(-d.re, -d.im), (d.re, d.im)], "black").dashed();
                        fig.lines.push(if j == 0 { line.labelled("fitted pair") } else { line });
                    }
                }
            }
            None => report.notices.push(format!("{name}: no successful fit to overlay")),
        }
        save(dir, &name, &fig, report)?;
    }
    Ok(())
}

fn density(dir: &Path, report: &mut PlotReport) -> Result<(), HarnessError> {
    let Some((_, rows)) = read_csv(&dir.join(DENSITY)) else {
        report.notices.push(format!("density.svg skipped: {DENSITY} missing"));
        return Ok(());
    };
    let pts: Vec<(f64, f64)> =
        rows.iter().filter_map(|r| Some((r.first()?.parse().ok()?, r.get(1)?.parse().ok()?))).collect();
    if pts.len() < 2 {
        report.notices.push("density.svg skipped: fewer than two probes".into());
        return Ok(());
    }
    let (xmin, xmax) = bounds(pts.iter().map(|p| p.0));
    let (ymin, ymax) = bounds(pts.iter().map(|p| p.1));
    let pad = 0.1 * (ymax - ymin).max(0.05);
    let mut fig = Figure::new("Gaussian density", "r", "Θ", (xmin, xmax), (ymin - pad, ymax + pad));
    fig.log_x = true;
    fig.lines.push(Line::new(pts, PALETTE[0]));
    save(dir, "density.svg", &fig, report)
}

fn a2(dir: &Path, report: &mut PlotReport) -> Result<(), HarnessError> {
    let Some((header, rows)) = read_csv(&dir.join(SERIES)) else {
        report.notices.push(format!("a2.svg skipped: {SERIES} missing"));
        return Ok(());
    };
    let (Some(ti), Some(ai)) = (column(&header, "t"), column(&header, "max_a2")) else {
        report.notices.push("a2.svg skipped: series.csv lacks t or max_a2".into());
        return Ok(());
    };
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| Some((r.get(ti)?.parse().ok()?, r.get(ai)?.parse::<f64>().ok()?)))
        .filter(|p: &(f64, f64)| p.1 > 0.0 && p.1.is_finite())
        .collect();
    if pts.len() < 2 {
        report.notices.push("a2.svg skipped: fewer than two positive values".into());
        return Ok(());
    }
    let (xmin, xmax) = bounds(pts.iter().map(|p| p.0));
    let (ymin, ymax) = bounds(pts.iter().map(|p| p.1));
    let mut fig = Figure::new("Curvature", "t", "max |A|²", (xmin, xmax.max(xmin + 1e-12)), (ymin / 2.0, ymax * 2.0));
    fig.log_y = true;
    fig.lines.push(Line::new(pts, PALETTE[3]));
    save(dir, "a2.svg", &fig, report)
}

fn bounds(v: impl Iterator<Item = f64>) -> (f64, f64) {
    v.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
}
