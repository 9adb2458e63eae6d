//! Serialization helpers: deterministic JSON and CSV writers and the
//! diagram SVG. Floats print in shortest-round-trip decimal form, so
//! identical inputs reproduce byte-identical files and every emitted value
//! parses back exactly.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;

use crate::bifurcation::{BifurcationDiagram, SaddleNodeCurve};
use crate::family::ParamBox;
use crate::invariants::SectionScan;

pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    fs::write(path, to_json_string(value))
}

/// Per-curve CSV with the continuation state and diagnostics at each point.
pub fn curve_csv(curve: &SaddleNodeCurve<f64>) -> String {
    let mut out = String::from("s,theta,x,abs_h1,abs_h2,dxx,tangent_s,tangent_theta,tangent_x\n");
    for p in &curve.points {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            p.pos[0],
            p.pos[1],
            p.pos[2],
            p.res_h1,
            p.res_h2,
            p.dxx,
            p.tangent[0],
            p.tangent[1],
            p.tangent[2]
        )
        .unwrap();
    }
    out
}

/// CSV of a(s); absent sections have an empty second column.
pub fn section_csv(scan: &SectionScan<f64>) -> String {
    let mut out = String::from("s,a\n");
    for (s, a) in scan.s_grid.iter().zip(&scan.a_of_s) {
        match a {
            Some(a) => writeln!(out, "{s},{a}").unwrap(),
            None => writeln!(out, "{s},").unwrap(),
        }
    }
    out
}

/// Presentation-only SVG of a diagram: the theta-axis runs horizontally
/// and the s-axis vertically. Curves are polylines, cusps filled markers,
/// intersections crosses, horizontal tangents open circles.
pub fn diagram_svg(diagram: &BifurcationDiagram<f64>, param_box: &ParamBox<f64>) -> String {
    let (w, h) = (800.0, 800.0);
    let margin = 40.0;
    let s_span = (param_box.s[1] - param_box.s[0]).max(1e-12);
    let t_span = (param_box.theta[1] - param_box.theta[0]).max(1e-12);
    let px = |theta: f64| margin + (theta - param_box.theta[0]) / t_span * (w - 2.0 * margin);
    let py = |s: f64| h - margin - (s - param_box.s[0]) / s_span * (h - 2.0 * margin);

    let mut svg = String::new();
    writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">"
    )
    .unwrap();
    writeln!(
        svg,
        "<rect x=\"{margin}\" y=\"{margin}\" width=\"{}\" height=\"{}\" fill=\"white\" stroke=\"#444\"/>",
        w - 2.0 * margin,
        h - 2.0 * margin
    )
    .unwrap();
    writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-size=\"14\">theta</text>",
        w / 2.0 - 20.0,
        h - 10.0
    )
    .unwrap();
    writeln!(svg, "<text x=\"8\" y=\"{}\" font-size=\"14\">s</text>", h / 2.0).unwrap();

    for curve in &diagram.curves {
        let mut points = String::new();
        for p in &curve.points {
            write!(points, "{},{} ", px(p.pos[1]), py(p.pos[0])).unwrap();
        }
        writeln!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"#1f5fba\" stroke-width=\"1.5\"/>",
            points.trim_end()
        )
        .unwrap();
    }
    for t in &diagram.horizontal_tangents {
        writeln!(
            svg,
            "<circle cx=\"{}\" cy=\"{}\" r=\"5\" fill=\"none\" stroke=\"#2a8f2a\" stroke-width=\"1.5\"/>",
            px(t.pos[1]),
            py(t.pos[0])
        )
        .unwrap();
    }
    for c in &diagram.cusps {
        writeln!(
            svg,
            "<circle cx=\"{}\" cy=\"{}\" r=\"4\" fill=\"#c22\"/>",
            px(c.pos[1]),
            py(c.pos[0])
        )
        .unwrap();
    }
    for rec in &diagram.intersections {
        let (cx, cy) = (px(rec.param[1]), py(rec.param[0]));
        let r = 5.0;
        writeln!(
            svg,
            "<path d=\"M {} {} L {} {} M {} {} L {} {}\" stroke=\"#b57700\" stroke-width=\"1.8\"/>",
            cx - r,
            cy - r,
            cx + r,
            cy + r,
            cx - r,
            cy + r,
            cx + r,
            cy - r
        )
        .unwrap();
    }
    writeln!(svg, "</svg>").unwrap();
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bifurcation::Termination;
    use crate::rational::Rational;

    #[test]
    fn csv_and_svg_shapes() {
        let curve = SaddleNodeCurve {
            pq: Rational::new(0, 1),
            points: vec![crate::bifurcation::CurvePoint {
                pos: [0.1, 0.2, 0.3],
                res_h1: 1e-12,
                res_h2: 1e-12,
                dxx: 0.5,
                tangent: [1.0, 0.0, 0.0],
            }],
            termination_start: Termination::Stalled,
            termination_end: Termination::Stalled,
        };
        let csv = curve_csv(&curve);
        assert!(csv.starts_with("s,theta,x,"));
        assert!(csv.lines().count() == 2);
        let diagram = BifurcationDiagram {
            pq: Rational::new(0, 1),
            curves: vec![curve],
            cusps: vec![],
            horizontal_tangents: vec![],
            intersections: vec![],
            boundary_hits: vec![],
            rotation_confirmed: vec![true],
        };
        let svg = diagram_svg(
            &diagram,
            &ParamBox { s: [0.0, 1.0], theta: [-1.0, 1.0] },
        );
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("polyline"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn json_round_trips_floats() {
        #[derive(serde::Serialize, serde::Deserialize, PartialEq, Debug)]
        struct P {
            v: f64,
        }
        let p = P { v: 0.1 + 0.2 };
        let s = to_json_string(&p);
        let back: P = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }
}
