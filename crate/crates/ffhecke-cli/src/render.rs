//! Deterministic rendering of Newton polygons as SVG or ASCII.
//!
//! SVG uses a fixed viewBox computed from the polygon extents at 40 px per
//! lattice unit, so identical inputs produce identical bytes. Breakpoints are
//! integral, so all emitted coordinates are exact integers.

use ffhecke::slope::Bundle;
use num_bigint::BigInt;
use num_traits::ToPrimitive;

const UNIT: i64 = 40;
const MARGIN: i64 = 20;

/// One polygon to draw, with a stable style tag used as the stroke class.
pub struct Overlay {
    pub bundle: Bundle,
    pub style: String,
}

pub enum Format {
    Svg,
    Ascii,
}

/// A render request: at least one polygon, optional minimal-slope marker on
/// the first polygon.
pub struct RenderSpec {
    pub format: Format,
    pub overlays: Vec<Overlay>,
    pub mark_min_slope: bool,
}

fn breakpoints(b: &Bundle) -> Vec<(i64, i64)> {
    b.newton_polygon()
        .breakpoints()
        .iter()
        .map(|(x, y)| {
            let yi: BigInt = y.to_integer();
            (i64::from(*x), yi.to_i64().expect("degree fits in i64"))
        })
        .collect()
}

pub fn render(spec: &RenderSpec) -> String {
    assert!(!spec.overlays.is_empty(), "nothing to render");
    match spec.format {
        Format::Ascii => render_ascii(spec),
        Format::Svg => render_svg(spec),
    }
}

fn render_ascii(spec: &RenderSpec) -> String {
    let mut out = String::new();
    for ov in &spec.overlays {
        let pts: Vec<String> = breakpoints(&ov.bundle)
            .iter()
            .map(|(x, y)| format!("({x},{y})"))
            .collect();
        out.push_str(&format!("{} [{}]: {}\n", ov.bundle, ov.style, pts.join(" -> ")));
    }
    if spec.mark_min_slope {
        let b = &spec.overlays[0].bundle;
        out.push_str(&format!("min slope: {}\n", b.nu_min()));
    }
    out
}

fn render_svg(spec: &RenderSpec) -> String {
    let mut min_y = 0i64;
    let mut max_y = 0i64;
    let mut max_x = 0i64;
    for ov in &spec.overlays {
        for (x, y) in breakpoints(&ov.bundle) {
            min_y = min_y.min(y);
            max_y = max_y.max(y);
            max_x = max_x.max(x);
        }
    }
    let width = max_x * UNIT + 2 * MARGIN;
    let height = (max_y - min_y) * UNIT + 2 * MARGIN;
    // Lattice (x, y) to pixel coordinates; SVG y grows downward.
    let px = |x: i64| MARGIN + x * UNIT;
    let py = |y: i64| MARGIN + (max_y - y) * UNIT;

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {width} {height}\">\n"
    ));
    // Lattice grid for readability.
    for x in 0..=max_x {
        out.push_str(&format!(
            "  <line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"#ddd\"/>\n",
            px(x),
            py(max_y),
            py(min_y)
        ));
    }
    for y in min_y..=max_y {
        out.push_str(&format!(
            "  <line x1=\"{0}\" y1=\"{2}\" x2=\"{1}\" y2=\"{2}\" stroke=\"#ddd\"/>\n",
            px(0),
            px(max_x),
            py(y)
        ));
    }
    for ov in &spec.overlays {
        let pts = breakpoints(&ov.bundle);
        let path: Vec<String> = pts.iter().map(|(x, y)| format!("{},{}", px(*x), py(*y))).collect();
        out.push_str(&format!(
            "  <polyline class=\"{}\" fill=\"none\" stroke=\"black\" stroke-width=\"2\" points=\"{}\"/>\n",
            ov.style,
            path.join(" ")
        ));
        for (x, y) in &pts {
            out.push_str(&format!(
                "  <circle cx=\"{}\" cy=\"{}\" r=\"4\" fill=\"black\"/>\n",
                px(*x),
                py(*y)
            ));
        }
    }
    if spec.mark_min_slope {
        // The minimal slope is the final segment of the first polygon.
        let pts = breakpoints(&spec.overlays[0].bundle);
        if pts.len() >= 2 {
            let a = pts[pts.len() - 2];
            let b = pts[pts.len() - 1];
            out.push_str(&format!(
                "  <line class=\"min-slope\" x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"orange\" stroke-width=\"3\"/>\n",
                px(a.0),
                py(a.1),
                px(b.0),
                py(b.1)
            ));
        }
    }
    out.push_str("</svg>\n");
    out
}
