//! Text emitters: SVG figures, OFF meshes and CSV tables.

use std::fmt::Write;

use crate::convex::{ConvexPolyhedron, ConvexPolytope};
use crate::geom::Vec2;
use crate::shape::SubstrateShape;
use crate::stability::{Backend, StabilityRecord};

const SVG_SIZE: f64 = 480.0;
const SVG_MARGIN: f64 = 24.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// CSV field: floats use the shortest round-trip representation, strings are quoted when needed.
fn csv_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else {
        String::new()
    }
}

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Generic CSV table with a header row.
pub fn csv_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = header.iter().map(|h| csv_escape(h)).collect::<Vec<_>>().join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.iter().map(|c| csv_escape(c)).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    out
}

/// `iteration,energy` rows.
pub fn trace_csv(trace: &[f64]) -> String {
    let rows: Vec<Vec<String>> = trace.iter().enumerate().map(|(i, &e)| vec![i.to_string(), csv_float(e)]).collect();
    csv_table(&["iteration", "energy"], &rows)
}

/// One row per record; `ratio` is empty when undefined.
pub fn records_csv(records: &[StabilityRecord]) -> String {
    let rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| {
            let backend = match r.backend {
                Backend::Exact => "exact".to_string(),
                Backend::Raster { h } => format!("raster:{h}"),
            };
            vec![
                r.family.clone(),
                csv_float(r.param),
                csv_float(r.asymmetry),
                csv_float(r.deficit),
                r.ratio.map(csv_float).unwrap_or_default(),
                csv_float(r.tau_star),
                backend,
            ]
        })
        .collect();
    csv_table(&["family", "param", "asymmetry", "deficit", "ratio", "tau_star", "backend"], &rows)
}

/// OFF mesh of a convex polyhedron, faces oriented outward.
pub fn polyhedron_off(p: &ConvexPolyhedron) -> String {
    let mut out = String::from("OFF\n");
    let _ = writeln!(out, "{} {} 0", p.vertices().len(), p.facets().len());
    for v in p.vertices() {
        let _ = writeln!(out, "{} {} {}", v.x, v.y, v.z);
    }
    for f in p.facets() {
        let mut idx = f.vertices.clone();
        if idx.len() >= 3 {
            let vs = p.vertices();
            let (a, b, c) = (vs[idx[0]], vs[idx[1]], vs[idx[2]]);
            if (b - a).cross(c - a).dot(f.normal) < 0.0 {
                idx.reverse();
            }
        }
        let _ = write!(out, "{}", idx.len());
        for i in idx {
            let _ = write!(out, " {i}");
        }
        out.push('\n');
    }
    out
}

struct Frame {
    lo: Vec2,
    scale: f64,
    height: f64,
}

impl Frame {
    fn fit(points: impl Iterator<Item = Vec2>) -> Self {
        let (mut lo, mut hi) = (Vec2::new(f64::INFINITY, f64::INFINITY), Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
        for p in points {
            lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        if !lo.x.is_finite() {
            lo = Vec2::new(-1.0, -1.0);
            hi = Vec2::new(1.0, 1.0);
        }
        let span = (hi.x - lo.x).max(hi.y - lo.y).max(1e-12);
        let scale = (SVG_SIZE - 2.0 * SVG_MARGIN) / span;
        Self { lo, scale, height: (hi.y - lo.y) * scale + 2.0 * SVG_MARGIN }
    }

    fn map(&self, p: Vec2) -> (f64, f64) {
        (SVG_MARGIN + (p.x - self.lo.x) * self.scale, self.height - SVG_MARGIN - (p.y - self.lo.y) * self.scale)
    }

    fn width(&self) -> f64 {
        SVG_SIZE
    }
}

fn svg_open(out: &mut String, w: f64, h: f64, comment: Option<&str>) {
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    if let Some(c) = comment {
        let _ = writeln!(out, "<!-- {} -->", c.replace("--", "- -"));
    }
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.1}\" height=\"{h:.1}\" viewBox=\"0 0 {w:.1} {h:.1}\">"
    );
    let _ = writeln!(out, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
}

fn path_of(frame: &Frame, rings: &[&[Vec2]]) -> String {
    let mut d = String::new();
    for ring in rings {
        for (k, p) in ring.iter().enumerate() {
            let (x, y) = frame.map(*p);
            let _ = write!(d, "{}{x:.3},{y:.3} ", if k == 0 { 'M' } else { 'L' });
        }
        d.push_str("Z ");
    }
    d.trim_end().to_string()
}

fn rings_of_shape(s: &SubstrateShape) -> Vec<&[Vec2]> {
    s.polygons()
        .map(|ps| {
            ps.iter()
                .flat_map(|p| std::iter::once(p.outer()).chain(p.holes().iter().map(|h| h.as_slice())))
                .collect()
        })
        .unwrap_or_default()
}

/// Planar shapes overlaid in one figure, with the substrate line `x_2 = 0` drawn when
/// `substrate` is set. Returns `None` for 3D shapes.
pub fn shapes_svg(shapes: &[&SubstrateShape], substrate: bool, comment: Option<&str>) -> Option<String> {
    if shapes.iter().any(|s| s.dim() != 2) {
        return None;
    }
    let all: Vec<Vec<&[Vec2]>> = shapes.iter().map(|s| rings_of_shape(s)).collect();
    let mut pts: Vec<Vec2> = all.iter().flatten().flat_map(|r| r.iter().copied()).collect();
    if substrate {
        pts.push(Vec2::new(pts.first().map_or(0.0, |p| p.x), 0.0));
    }
    let frame = Frame::fit(pts.iter().copied());
    let mut out = String::new();
    svg_open(&mut out, frame.width(), frame.height, comment);
    if substrate {
        let (_, y) = frame.map(Vec2::new(0.0, 0.0));
        let _ = writeln!(
            out,
            "<line x1=\"0\" y1=\"{y:.3}\" x2=\"{:.1}\" y2=\"{y:.3}\" stroke=\"#555\" stroke-width=\"1.5\"/>",
            frame.width()
        );
    }
    for (k, rings) in all.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let _ = writeln!(
            out,
            "<path d=\"{}\" fill=\"{color}\" fill-opacity=\"0.25\" fill-rule=\"evenodd\" stroke=\"{color}\" stroke-width=\"1\"/>",
            path_of(&frame, rings)
        );
    }
    out.push_str("</svg>\n");
    Some(out)
}

/// A planar convex polytope; `None` in 3D.
pub fn polytope_svg(p: &ConvexPolytope, comment: Option<&str>) -> Option<String> {
    let poly = p.as_polygon()?;
    let frame = Frame::fit(poly.vertices().iter().copied());
    let mut out = String::new();
    svg_open(&mut out, frame.width(), frame.height, comment);
    let (ox, oy) = frame.map(Vec2::new(0.0, 0.0));
    let _ = writeln!(out, "<circle cx=\"{ox:.3}\" cy=\"{oy:.3}\" r=\"2\" fill=\"#555\"/>");
    let color = PALETTE[0];
    let _ = writeln!(
        out,
        "<path d=\"{}\" fill=\"{color}\" fill-opacity=\"0.25\" stroke=\"{color}\" stroke-width=\"1\"/>",
        path_of(&frame, &[poly.vertices()])
    );
    out.push_str("</svg>\n");
    Some(out)
}

/// Log-log scatter of positive `(x, y)` pairs; other points are dropped.
pub fn loglog_scatter_svg(points: &[(f64, f64)], x_label: &str, y_label: &str, comment: Option<&str>) -> String {
    let logs: Vec<Vec2> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| Vec2::new(x.log10(), y.log10()))
        .collect();
    let frame = Frame::fit(logs.iter().copied());
    let mut out = String::new();
    let h = frame.height + SVG_MARGIN;
    svg_open(&mut out, frame.width(), h, comment);
    for p in &logs {
        let (x, y) = frame.map(*p);
        let _ = writeln!(out, "<circle cx=\"{x:.3}\" cy=\"{y:.3}\" r=\"3\" fill=\"{}\"/>", PALETTE[0]);
    }
    let _ = writeln!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\">log10 {}</text>",
        frame.width() / 2.0,
        h - 6.0,
        xml_escape(x_label)
    );
    let _ = writeln!(
        out,
        "<text x=\"12\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 12 {:.1})\">log10 {}</text>",
        h / 2.0,
        h / 2.0,
        xml_escape(y_label)
    );
    out.push_str("</svg>\n");
    out
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
