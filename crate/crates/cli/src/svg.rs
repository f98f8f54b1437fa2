use std::fmt::Write as _;

use pucci_core::classify::{gamma_orbit, upsilon_orbit};
use pucci_core::field::{lines, vector_field, PhasePoint};
use pucci_core::flow::{find_periodic_orbit, periodic_orbit_through, Budget};
use pucci_core::params::ProblemParams;
use pucci_core::stationary::{self, StabilityClass, StationaryLabel};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const MARGIN: f64 = 0.08;

struct Frame {
    x0: f64,
    x1: f64,
    z0: f64,
    z1: f64,
}

impl Frame {
    fn new(params: &ProblemParams) -> Self {
        let (w, h) = (params.wall(), params.n0_height());
        Self {
            x0: -MARGIN * w,
            x1: (1.0 + 2.0 * MARGIN) * w,
            z0: -MARGIN * h,
            z1: (1.0 + MARGIN) * h,
        }
    }

    fn px(&self, q: PhasePoint) -> (f64, f64) {
        (
            (q.x - self.x0) / (self.x1 - self.x0) * WIDTH,
            HEIGHT - (q.z - self.z0) / (self.z1 - self.z0) * HEIGHT,
        )
    }

    fn contains(&self, q: PhasePoint) -> bool {
        q.x >= self.x0 && q.x <= self.x1 && q.z >= self.z0 && q.z <= self.z1
    }
}

fn line(s: &mut String, f: &Frame, a: PhasePoint, b: PhasePoint, class: &str) {
    let ((x1, y1), (x2, y2)) = (f.px(a), f.px(b));
    let _ = writeln!(s, r#"<line class="{class}" x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}"/>"#);
}

/// Polyline pieces inside the frame.
fn polylines(s: &mut String, f: &Frame, pts: &[PhasePoint], class: &str) {
    let mut run: Vec<(f64, f64)> = Vec::new();
    let flush = |s: &mut String, run: &mut Vec<(f64, f64)>| {
        if run.len() >= 2 {
            let coords: Vec<String> = run.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
            let _ = writeln!(s, r#"<polyline class="{class}" points="{}"/>"#, coords.join(" "));
        }
        run.clear();
    };
    for &q in pts {
        if q.is_finite() && f.contains(q) {
            run.push(f.px(q));
        } else {
            flush(s, &mut run);
        }
    }
    flush(s, &mut run);
}

fn closed(s: &mut String, f: &Frame, pts: &[PhasePoint], class: &str) {
    let coords: Vec<String> = pts
        .iter()
        .map(|&q| {
            let (x, y) = f.px(q);
            format!("{x:.2},{y:.2}")
        })
        .collect();
    let _ = writeln!(s, r#"<polygon class="{class}" points="{}"/>"#, coords.join(" "));
}

fn glyph(s: &mut String, f: &Frame, label: StationaryLabel, at: PhasePoint, class: StabilityClass) {
    let (x, y) = f.px(at);
    let name = format!("{class:?}").to_lowercase();
    let _ = write!(s, r#"<g class="stationary {name}" data-label="{}">"#, label.name());
    match class {
        StabilityClass::Source => {
            let _ = write!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="6" fill="white" stroke="black"/>"#);
        }
        StabilityClass::Sink => {
            let _ = write!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="6" fill="black"/>"#);
        }
        StabilityClass::Saddle => {
            let _ = write!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="10" height="10" fill="white" stroke="black"/>"#,
                x - 5.0,
                y - 5.0
            );
        }
        StabilityClass::Center => {
            let _ = write!(
                s,
                r#"<circle cx="{x:.2}" cy="{y:.2}" r="6" fill="white" stroke="black"/><circle cx="{x:.2}" cy="{y:.2}" r="2" fill="black"/>"#
            );
        }
        StabilityClass::NonHyperbolic => {
            let _ = write!(
                s,
                r#"<polygon points="{x:.2},{:.2} {:.2},{y:.2} {x:.2},{:.2} {:.2},{y:.2}" fill="grey" stroke="black"/>"#,
                y - 7.0,
                x + 7.0,
                y + 7.0,
                x - 7.0
            );
        }
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{}</text></g>"#, x + 8.0, y - 8.0, label.name());
}

/// Self-contained SVG of the first-quadrant flow at exponent `p`.
pub fn portrait(p: f64, params: &ProblemParams, grid: (usize, usize)) -> String {
    let f = Frame::new(params);
    let ls = lines(p, params);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}">"#
    );
    s.push_str(concat!(
        "<defs><marker id=\"head\" viewBox=\"0 0 6 6\" refX=\"5\" refY=\"3\" markerWidth=\"5\" markerHeight=\"5\" orient=\"auto\">",
        "<path d=\"M0,0 L6,3 L0,6 z\" fill=\"#888\"/></marker></defs>\n",
        "<style>line,polyline,polygon.cycle{fill:none;stroke-width:1.5}",
        ".arrow{stroke:#888;stroke-width:1;marker-end:url(#head)}.axis{stroke:black}",
        ".concavity{stroke:#c00;stroke-dasharray:6 3}.x-nullcline{stroke:#06c}.z-nullcline{stroke:#090}",
        ".wall{stroke:#a0a;stroke-dasharray:2 3}.gamma{stroke:#000;stroke-width:2}.upsilon{stroke:#e80;stroke-width:2}",
        "polygon.cycle{stroke:#555}text{font:12px sans-serif}</style>\n",
    ));
    let _ = writeln!(
        s,
        r#"<text x="10" y="18">p = {p} | {} lambda={} Lambda={} N={} a={}</text>"#,
        params.operator().name(),
        params.lambda(),
        params.big_lambda(),
        params.n(),
        params.a()
    );
    line(&mut s, &f, PhasePoint::new(f.x0, 0.0), PhasePoint::new(f.x1, 0.0), "axis");
    line(&mut s, &f, PhasePoint::new(0.0, f.z0), PhasePoint::new(0.0, f.z1), "axis");

    let (gw, gh) = grid;
    let (cw, ch) = (WIDTH / (gw as f64 + 1.0), HEIGHT / (gh as f64 + 1.0));
    let len = 0.4 * cw.min(ch);
    for i in 0..gw {
        for j in 0..gh {
            let q = PhasePoint::new(
                (i as f64 + 0.5) / gw as f64 * ls.wall,
                (j as f64 + 0.5) / gh as f64 * params.n0_height(),
            );
            let Ok(v) = vector_field(q, p, params) else { continue };
            let (x, y) = f.px(q);
            let (dx, dy) = (v[0] / (f.x1 - f.x0) * WIDTH, -v[1] / (f.z1 - f.z0) * HEIGHT);
            let norm = dx.hypot(dy);
            if !(norm > 0.0) || !norm.is_finite() {
                continue;
            }
            let _ = writeln!(
                s,
                r#"<line class="arrow" x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{:.2}"/>"#,
                x + len * dx / norm,
                y + len * dy / norm
            );
        }
    }

    line(&mut s, &f, PhasePoint::new(0.0, ls.concavity_level), PhasePoint::new(f.x1, ls.concavity_level), "concavity");
    line(&mut s, &f, ls.x_nullcline.from, ls.x_nullcline.to, "x-nullcline");
    line(&mut s, &f, ls.z_nullcline_upper.from, ls.z_nullcline_upper.to, "z-nullcline");
    line(&mut s, &f, ls.z_nullcline_lower.from, ls.z_nullcline_lower.to, "z-nullcline");
    line(&mut s, &f, PhasePoint::new(ls.wall, f.z0), PhasePoint::new(ls.wall, f.z1), "wall");

    let budget = Budget::default();
    if let Ok(t) = gamma_orbit(p, params, &budget) {
        polylines(&mut s, &f, &t.trajectory.points(), "orbit gamma");
    }
    if let Ok(t) = upsilon_orbit(p, params, &budget) {
        polylines(&mut s, &f, &t.trajectory.points(), "orbit upsilon");
    }

    if stationary::m0_in_first_quadrant(p, params) {
        let m0 = stationary::location(StationaryLabel::M0, p, params);
        let centre = stationary::classify_stationary(StationaryLabel::M0, p, params)
            .map(|sp| sp.classification == StabilityClass::Center)
            .unwrap_or(false);
        if centre {
            let reach = params.n0_height() - m0.z;
            for frac in [0.1, 0.25, 0.45] {
                match periodic_orbit_through(m0, frac * reach, p, params) {
                    Ok(o) if o.closure_gap <= 1e-6 * (1.0 + o.section_s) => closed(&mut s, &f, &o.points, "cycle"),
                    _ => {}
                }
            }
        } else if let Ok(o) = find_periodic_orbit(p, params, None) {
            closed(&mut s, &f, &o.points, "cycle");
        }
    }

    for sp in stationary::stationary_points(p, params) {
        if sp.in_first_quadrant && f.contains(sp.location) {
            glyph(&mut s, &f, sp.label, sp.location, sp.classification);
        }
    }
    s.push_str("</svg>\n");
    s
}
