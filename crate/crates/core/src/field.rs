//! Piecewise-quadratic vector fields, regions, distinguished lines and the Dulac weight.
//!
//! In the first quadrant each side of the concavity line carries its own quadratic
//! polynomial; both share the form
//! `Ẋ = X(X − (D−2) + Z/κ)`, `Ż = Z(D + a − pX − Z/κ)` with `(D, κ)` picked by
//! [`Branch`]. The two polynomials agree on the line itself.

use serde::Serialize;
use thiserror::Error;

use crate::params::ProblemParams;

/// Relative tolerance for classifying a point as lying on the concavity line.
pub const TAU_LINE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct PhasePoint {
    #[serde(rename = "X")]
    pub x: f64,
    #[serde(rename = "Z")]
    pub z: f64,
}

impl PhasePoint {
    pub const fn new(x: f64, z: f64) -> Self {
        Self { x, z }
    }

    pub fn dist(&self, other: &PhasePoint) -> f64 {
        (self.x - other.x).hypot(self.z - other.z)
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.z)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.z.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Region {
    RPlus,
    RMinus,
    OnConcavityLine,
    ThirdQuadrant,
    OnAxis,
    Outside,
}

impl Region {
    pub fn name(self) -> &'static str {
        match self {
            Region::RPlus => "RPlus",
            Region::RMinus => "RMinus",
            Region::OnConcavityLine => "OnConcavityLine",
            Region::ThirdQuadrant => "ThirdQuadrant",
            Region::OnAxis => "OnAxis",
            Region::Outside => "Outside",
        }
    }
}

/// Which polynomial of the piecewise system is in force.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Branch {
    /// First quadrant above the concavity line (`u'' < 0`).
    Upper,
    /// First quadrant below the concavity line (`u'' > 0`).
    Lower,
    /// Third quadrant (increasing solutions).
    Third,
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum FieldError {
    #[error("point ({x}, {z}) lies outside the first and third quadrants")]
    OutsideDomain { x: f64, z: f64 },
    #[error("point ({x}, {z}) lies on the concavity line")]
    OnInterface { x: f64, z: f64 },
    #[error("polyline is not closed (gap {gap:e})")]
    OpenCurve { gap: f64 },
    #[error("polyline segments {first} and {second} intersect")]
    SelfIntersection { first: usize, second: usize },
}

/// Dimension-like number and ellipticity constant of one branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub d: f64,
    pub kappa: f64,
}

pub fn piece(params: &ProblemParams, branch: Branch) -> Piece {
    match branch {
        Branch::Upper => Piece {
            d: params.dim(),
            kappa: params.kappa_upper(),
        },
        Branch::Lower => Piece {
            d: params.n_tilde(),
            kappa: params.kappa_lower(),
        },
        Branch::Third => {
            let (d, kappa) = params.third_quadrant_pair();
            Piece { d, kappa }
        }
    }
}

fn on_line(z: f64, level: f64) -> bool {
    (z - level).abs() <= TAU_LINE * level
}

pub fn region_of(pt: PhasePoint, params: &ProblemParams) -> Region {
    let PhasePoint { x, z } = pt;
    if !pt.is_finite() {
        return Region::Outside;
    }
    if x > 0.0 && z > 0.0 {
        let level = params.concavity_level();
        if on_line(z, level) {
            Region::OnConcavityLine
        } else if z > level {
            Region::RPlus
        } else {
            Region::RMinus
        }
    } else if x < 0.0 && z < 0.0 {
        Region::ThirdQuadrant
    } else if x == 0.0 || z == 0.0 {
        Region::OnAxis
    } else {
        Region::Outside
    }
}

/// Branch in force at a point of the closed first or third quadrant.
///
/// Points on the concavity line report [`Branch::Lower`]; both polynomials agree there.
pub fn branch_of(pt: PhasePoint, params: &ProblemParams) -> Result<Branch, FieldError> {
    let PhasePoint { x, z } = pt;
    if !pt.is_finite() {
        return Err(FieldError::OutsideDomain { x, z });
    }
    if x >= 0.0 && z >= 0.0 {
        let level = params.concavity_level();
        if z > level && !on_line(z, level) {
            Ok(Branch::Upper)
        } else {
            Ok(Branch::Lower)
        }
    } else if x <= 0.0 && z <= 0.0 {
        Ok(Branch::Third)
    } else {
        Err(FieldError::OutsideDomain { x, z })
    }
}

/// Right-hand side of one polynomial branch, evaluated anywhere.
#[inline]
pub fn branch_field(pt: PhasePoint, p: f64, params: &ProblemParams, branch: Branch) -> [f64; 2] {
    let Piece { d, kappa } = piece(params, branch);
    let PhasePoint { x, z } = pt;
    [
        x * (x - (d - 2.0) + z / kappa),
        z * (d + params.a() - p * x - z / kappa),
    ]
}

pub fn branch_jacobian(
    pt: PhasePoint,
    p: f64,
    params: &ProblemParams,
    branch: Branch,
) -> [[f64; 2]; 2] {
    let Piece { d, kappa } = piece(params, branch);
    let PhasePoint { x, z } = pt;
    [
        [2.0 * x - (d - 2.0) + z / kappa, x / kappa],
        [-p * z, d + params.a() - p * x - 2.0 * z / kappa],
    ]
}

/// Factor of `X` in `Ẋ`; its zero set is the X-nullcline away from the Z axis.
#[inline]
pub fn x_bracket(pt: PhasePoint, params: &ProblemParams, branch: Branch) -> f64 {
    let Piece { d, kappa } = piece(params, branch);
    pt.x - (d - 2.0) + pt.z / kappa
}

/// Factor of `Z` in `Ż`; its zero set is the Z-nullcline away from the X axis.
#[inline]
pub fn z_bracket(pt: PhasePoint, p: f64, params: &ProblemParams, branch: Branch) -> f64 {
    let Piece { d, kappa } = piece(params, branch);
    d + params.a() - p * pt.x - pt.z / kappa
}

pub fn vector_field(pt: PhasePoint, p: f64, params: &ProblemParams) -> Result<[f64; 2], FieldError> {
    let branch = branch_of(pt, params)?;
    Ok(branch_field(pt, p, params, branch))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Segment {
    pub from: PhasePoint,
    pub to: PhasePoint,
}

/// The straight lines organising the first-quadrant flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineSet {
    pub concavity_level: f64,
    /// `Ẋ = 0`, from the Z axis down to `A₀`; lies below the concavity line.
    pub x_nullcline: Segment,
    /// `Ż = 0` above the concavity line, from `N₀` down to the join point.
    pub z_nullcline_upper: Segment,
    /// `Ż = 0` below the concavity line, from the join point down to the X axis.
    pub z_nullcline_lower: Segment,
    /// `((1+a)/p, concavity level)`.
    pub join: PhasePoint,
    pub wall: f64,
}

pub fn lines(p: f64, params: &ProblemParams) -> LineSet {
    let level = params.concavity_level();
    let a = params.a();
    let nt = params.n_tilde();
    let k_lo = params.kappa_lower();
    let join = PhasePoint::new((1.0 + a) / p, level);
    LineSet {
        concavity_level: level,
        x_nullcline: Segment {
            from: PhasePoint::new(0.0, k_lo * (nt - 2.0)),
            to: PhasePoint::new(nt - 2.0, 0.0),
        },
        z_nullcline_upper: Segment {
            from: PhasePoint::new(0.0, params.n0_height()),
            to: join,
        },
        z_nullcline_lower: Segment {
            from: join,
            to: PhasePoint::new((nt + a) / p, 0.0),
        },
        join,
        wall: nt - 2.0,
    }
}

/// One sign rule of the flow on a distinguished line, checked on sample points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectionRule {
    pub line: &'static str,
    pub rule: &'static str,
    pub threshold: f64,
    pub samples: usize,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectionReport {
    pub rules: Vec<DirectionRule>,
}

impl DirectionReport {
    pub fn all_hold(&self) -> bool {
        self.rules.iter().all(|r| r.holds)
    }
}

fn sample_fractions() -> impl Iterator<Item = f64> {
    (1..40).map(|k| k as f64 / 40.0)
}

/// Checks the crossing directions on the concavity line, both nullclines and both axes.
pub fn field_directions_on_lines(p: f64, params: &ProblemParams) -> DirectionReport {
    let ls = lines(p, params);
    let alpha = params.alpha(p);
    let x_cross = ls.join.x;
    let wall = ls.wall;
    let top = params.n0_height();
    let field = |pt: PhasePoint| branch_field(pt, p, params, branch_of(pt, params).unwrap());
    let away = |x: f64, t: f64| (x - t).abs() > 1e-9 * (1.0 + t.abs());
    let mut rules = Vec::new();

    let mut check = |line, rule, threshold, pts: Vec<(PhasePoint, bool)>| {
        let holds = pts.iter().all(|&(_, ok)| ok);
        rules.push(DirectionRule {
            line,
            rule,
            threshold,
            samples: pts.len(),
            holds,
        });
    };

    // Concavity line: downward crossing exactly when X > (1+a)/p.
    let pts = sample_fractions()
        .map(|s| 3.0 * (x_cross + wall) * s)
        .filter(|&x| away(x, x_cross))
        .map(|x| {
            let pt = PhasePoint::new(x, ls.concavity_level);
            let [xd, zd] = field(pt);
            (pt, xd > 0.0 && ((zd < 0.0) == (x > x_cross)))
        })
        .collect();
    check("concavity", "crosses downward iff X > (1+a)/p", x_cross, pts);

    let seg_points = |seg: Segment| -> Vec<PhasePoint> {
        sample_fractions()
            .map(|s| {
                PhasePoint::new(
                    seg.from.x + s * (seg.to.x - seg.from.x),
                    seg.from.z + s * (seg.to.z - seg.from.z),
                )
            })
            .collect()
    };

    let pts = seg_points(ls.x_nullcline)
        .into_iter()
        .filter(|pt| away(pt.x, alpha))
        .map(|pt| {
            let [_, zd] = field(pt);
            (pt, (zd > 0.0) == (pt.x < alpha))
        })
        .collect();
    check("x_nullcline", "Zdot > 0 iff X < alpha", alpha, pts);

    let mut pts: Vec<(PhasePoint, bool)> = Vec::new();
    for seg in [ls.z_nullcline_upper, ls.z_nullcline_lower] {
        for pt in seg_points(seg).into_iter().filter(|pt| away(pt.x, alpha)) {
            let [xd, _] = field(pt);
            pts.push((pt, (xd > 0.0) == (pt.x < alpha)));
        }
    }
    check("z_nullcline", "Xdot > 0 iff X < alpha", alpha, pts);

    let pts = sample_fractions()
        .map(|s| 2.0 * wall * s)
        .filter(|&x| away(x, wall))
        .map(|x| {
            let pt = PhasePoint::new(x, 0.0);
            let [xd, zd] = field(pt);
            (pt, zd == 0.0 && ((xd < 0.0) == (x < wall)))
        })
        .collect();
    check("x_axis", "Xdot < 0 iff 0 < X < N~-2", wall, pts);

    let pts = sample_fractions()
        .map(|s| 2.0 * top * s)
        .filter(|&z| away(z, top) && away(z, ls.concavity_level))
        .map(|z| {
            let pt = PhasePoint::new(0.0, z);
            let [xd, zd] = field(pt);
            (pt, xd == 0.0 && ((zd > 0.0) == (z < top)))
        })
        .collect();
    check("z_axis", "Zdot > 0 iff 0 < Z < kappa(N+a)", top, pts);

    DirectionReport { rules }
}

/// Exponents `(e_x, e_z)` of the Dulac weight `X^e_x Z^e_z`.
pub fn dulac_exponents(p: f64) -> (f64, f64) {
    (2.0 / (p - 1.0), (3.0 - p) / (p - 1.0))
}

pub fn dulac_weight(pt: PhasePoint, p: f64) -> f64 {
    let (ex, ez) = dulac_exponents(p);
    pt.x.powf(ex) * pt.z.powf(ez)
}

/// Weighted divergence `∂X(φf) + ∂Z(φg)` in closed form.
pub fn dulac_phi(pt: PhasePoint, p: f64, params: &ProblemParams) -> Result<f64, FieldError> {
    let PhasePoint { x, z } = pt;
    let branch = match region_of(pt, params) {
        Region::RPlus => Branch::Upper,
        Region::RMinus => Branch::Lower,
        Region::OnConcavityLine => return Err(FieldError::OnInterface { x, z }),
        _ => return Err(FieldError::OutsideDomain { x, z }),
    };
    let d = piece(params, branch).d;
    let factor = (-p * (d - 2.0) + (d + 2.0 + 2.0 * params.a())) / (p - 1.0);
    Ok(dulac_weight(pt, p) * factor)
}

fn orient(a: PhasePoint, b: PhasePoint, c: PhasePoint) -> f64 {
    (b.x - a.x) * (c.z - a.z) - (b.z - a.z) * (c.x - a.x)
}

fn within(a: PhasePoint, b: PhasePoint, c: PhasePoint) -> bool {
    c.x >= a.x.min(b.x) && c.x <= a.x.max(b.x) && c.z >= a.z.min(b.z) && c.z <= a.z.max(b.z)
}

fn segments_meet(a: PhasePoint, b: PhasePoint, c: PhasePoint, d: PhasePoint) -> bool {
    let (o1, o2, o3, o4) = (orient(a, b, c), orient(a, b, d), orient(c, d, a), orient(c, d, b));
    if o1 * o2 < 0.0 && o3 * o4 < 0.0 {
        return true;
    }
    (o1 == 0.0 && within(a, b, c))
        || (o2 == 0.0 && within(a, b, d))
        || (o3 == 0.0 && within(c, d, a))
        || (o4 == 0.0 && within(c, d, b))
}

/// First pair of non-adjacent intersecting segments of a closed polyline, if any.
pub fn find_self_intersection(pts: &[PhasePoint]) -> Option<(usize, usize)> {
    let m = pts.len().saturating_sub(1);
    for i in 0..m {
        let (a, b) = (pts[i], pts[i + 1]);
        for j in (i + 2)..m {
            if i == 0 && j == m - 1 {
                continue;
            }
            let (c, d) = (pts[j], pts[j + 1]);
            if a.x.max(b.x) < c.x.min(d.x)
                || c.x.max(d.x) < a.x.min(b.x)
                || a.z.max(b.z) < c.z.min(d.z)
                || c.z.max(d.z) < a.z.min(b.z)
            {
                continue;
            }
            if segments_meet(a, b, c, d) {
                return Some((i, j));
            }
        }
    }
    None
}

const GAUSS_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GAUSS_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189,
    0.478_628_670_499_366,
    0.568_888_888_888_889,
    0.478_628_670_499_366,
    0.236_926_885_056_189,
];

/// `∮ φ (f dZ − g dX)` along a closed polyline; counterclockwise traversal gives `∬ Φ`.
pub fn dulac_line_integral(
    polyline: &[PhasePoint],
    p: f64,
    params: &ProblemParams,
) -> Result<f64, FieldError> {
    let (first, last) = match (polyline.first(), polyline.last()) {
        (Some(f), Some(l)) if polyline.len() >= 2 => (*f, *l),
        _ => return Err(FieldError::OpenCurve { gap: f64::INFINITY }),
    };
    let gap = first.dist(&last);
    if gap > 1e-8 * (1.0 + first.norm()) {
        return Err(FieldError::OpenCurve { gap });
    }
    if let Some(pt) = polyline.iter().find(|q| !(q.x > 0.0 && q.z > 0.0)) {
        return Err(FieldError::OutsideDomain { x: pt.x, z: pt.z });
    }
    if let Some((first, second)) = find_self_intersection(polyline) {
        return Err(FieldError::SelfIntersection { first, second });
    }
    let mut total = 0.0;
    for w in polyline.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (dx, dz) = (b.x - a.x, b.z - a.z);
        let mut seg = 0.0;
        for (node, weight) in GAUSS_NODES.iter().zip(GAUSS_WEIGHTS) {
            let s = 0.5 * (node + 1.0);
            let q = PhasePoint::new(a.x + s * dx, a.z + s * dz);
            let [f, g] = vector_field(q, p, params)?;
            seg += weight * dulac_weight(q, p) * (f * dz - g * dx);
        }
        total += 0.5 * seg;
    }
    Ok(total)
}
