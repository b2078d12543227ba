//! CSV, SVG and key-value report writers. All output is built in memory
//! with fixed formatting so identical inputs give identical bytes.

use std::fmt::Write as _;
use std::path::Path;

use crate::dynamics::SimulationResult;
use crate::geometry::{ConstraintSet, Vec2};
use crate::oracle::{ExtremumKind, OracleRun, SimilarityReport};
use crate::paths::PolygonalPath;
use crate::propagator::IntensityProfile;

pub fn trajectories_csv(result: &SimulationResult) -> String {
    let mut o = String::from("branch_id,t,q1,q2,v1,v2,event_flag\n");
    for tr in &result.trajectories {
        for s in &tr.samples {
            let _ = writeln!(o, "{},{},{},{},{},{},{}", tr.branch, s.t, s.q.x, s.q.y, s.v.x, s.v.y, s.flag.as_str());
        }
    }
    o
}

/// One row per path; vertices are `x y` pairs separated by `;`.
pub fn paths_csv(rows: &[(usize, Vec<PolygonalPath>)]) -> String {
    let mut o = String::from("dst_index,path_index,n_corners,length,action,vertices\n");
    for (dst, paths) in rows {
        for (k, p) in paths.iter().enumerate() {
            let verts: Vec<String> = p.vertices.iter().map(|v| format!("{} {}", v.x, v.y)).collect();
            let _ = writeln!(o, "{},{},{},{},{},{}", dst, k, p.n_corners(), p.length, p.action, verts.join(";"));
        }
    }
    o
}

pub fn intensity_csv(p: &IntensityProfile) -> String {
    let mut o = String::from("bin_index,screen_coordinate,intensity,n_paths,shadow_flag\n");
    for i in 0..p.len() {
        let _ = writeln!(o, "{},{},{},{},{}", i, p.coords[i], p.intensity[i], p.n_paths[i], u8::from(p.shadow[i]));
    }
    o
}

const COLORS: [&str; 4] = ["#1f4e9c", "#c0392b", "#27864a", "#7d3c98"];
const W: f64 = 720.0;
const H: f64 = 400.0;
const PAD: f64 = 50.0;

fn svg_header(o: &mut String, title: &str) {
    let _ = writeln!(o, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(o, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(o, r#"<text x="{}" y="24" font-family="sans-serif" font-size="15" text-anchor="middle">{}</text>"#, W / 2.0, escape(title));
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Line plot of one or more profiles sharing the screen axis.
pub fn profile_svg(title: &str, series: &[(&str, &IntensityProfile)]) -> String {
    let mut o = String::new();
    svg_header(&mut o, title);
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    for (_, p) in series {
        for &c in &p.coords {
            x0 = x0.min(c);
            x1 = x1.max(c);
        }
    }
    if !(x1 > x0) {
        x1 = x0 + 1.0;
    }
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - y.clamp(0.0, 1.0) * (H - 2.0 * PAD);
    let _ = writeln!(
        o,
        r##"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="#444"/>"##,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    for (v, label) in [(x0, x0), (x1, x1)] {
        let _ = writeln!(o, r#"<text x="{:.2}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{label:.3}</text>"#, sx(v), H - PAD + 16.0);
    }
    for y in [0.0, 0.5, 1.0] {
        let _ = writeln!(o, r#"<text x="{}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="end">{y}</text>"#, PAD - 6.0, sy(y) + 4.0);
    }
    let _ = writeln!(o, r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">screen coordinate</text>"#, W / 2.0, H - 12.0);
    for (k, (name, p)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = (0..p.len()).map(|i| format!("{:.2},{:.2}", sx(p.coords[i]), sy(p.intensity[i]))).collect();
        let _ = writeln!(o, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
        let ly = PAD + 16.0 + 16.0 * k as f64;
        let _ = writeln!(o, r#"<text x="{}" y="{ly}" font-family="sans-serif" font-size="12" fill="{color}" text-anchor="end">{}</text>"#, W - PAD - 8.0, escape(name));
    }
    o.push_str("</svg>\n");
    o
}

/// Walls and trajectories in the plane, fitted to the scenario domain.
pub fn trajectories_svg(title: &str, cs: &ConstraintSet, result: &SimulationResult) -> String {
    let mut o = String::new();
    svg_header(&mut o, title);
    let b = cs.bbox();
    let span = b.max - b.min;
    let scale = ((W - 2.0 * PAD) / span.x).min((H - 2.0 * PAD) / span.y);
    let map = |p: &Vec2| (PAD + (p.x - b.min.x) * scale, H - PAD - (p.y - b.min.y) * scale);
    let (ax, ay) = map(&b.min);
    let (bx, by) = map(&b.max);
    let _ = writeln!(o, r##"<rect x="{ax:.2}" y="{by:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#bbb"/>"##, bx - ax, ay - by);
    for c in cs.constraints() {
        if let Some(f) = c.face() {
            let (x1, y1) = map(&f.a);
            let (x2, y2) = map(&f.b);
            let _ = writeln!(o, r##"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="#222" stroke-width="2"/>"##);
        }
    }
    for (k, tr) in result.trajectories.iter().enumerate() {
        let pts: Vec<String> = tr
            .samples
            .iter()
            .map(|s| {
                let (x, y) = map(&s.q);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let color = COLORS[k % COLORS.len()];
        let _ = writeln!(o, r#"<polyline fill="none" stroke="{color}" stroke-width="1" stroke-opacity="0.7" points="{}"/>"#, pts.join(" "));
    }
    o.push_str("</svg>\n");
    o
}

/// `key = value` lines describing a profile comparison.
pub fn comparison_report(report: &SimilarityReport, oracle: Option<&OracleRun>) -> String {
    let mut o = String::new();
    let _ = writeln!(o, "n_bins = {}", report.n_bins);
    let _ = writeln!(o, "window_start = {}", report.window.start);
    let _ = writeln!(o, "window_end = {}", report.window.end);
    let _ = writeln!(o, "correlation = {}", report.correlation);
    let _ = writeln!(o, "max_abs_deviation = {}", report.max_abs_deviation);
    let _ = writeln!(o, "max_maximum_offset_bins = {}", report.max_offset(ExtremumKind::Maximum));
    let _ = writeln!(o, "max_minimum_offset_bins = {}", report.max_offset(ExtremumKind::Minimum));
    for (k, e) in report.extrema.iter().enumerate() {
        let b = e.position_b.map_or("none".to_string(), |p| p.to_string());
        let off = e.offset_bins().map_or("none".to_string(), |p| p.to_string());
        let _ = writeln!(o, "extremum_{k} = {} {} {} {}", e.kind.as_str(), e.position_a, b, off);
    }
    if let Some(run) = oracle {
        let _ = writeln!(o, "oracle_h = {}", run.h);
        let _ = writeln!(o, "oracle_nodes = {} {}", run.nx, run.ny);
        let _ = writeln!(o, "oracle_t_start = {}", run.schedule.t_start);
        let _ = writeln!(o, "oracle_t_end = {}", run.schedule.t_end);
        let _ = writeln!(o, "wavelength = {}", run.wavelength);
        for (k, w) in run.warnings.iter().enumerate() {
            let _ = writeln!(o, "warning_{k} = {w}");
        }
    }
    o
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), contents)
}
