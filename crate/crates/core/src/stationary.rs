//! Stationary points, their linearisations and local classification.

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::field::{branch_jacobian, branch_of, region_of, Branch, PhasePoint, Region};
use crate::params::ProblemParams;

/// Relative tolerance under which a real part counts as zero.
pub const TAU_IMAGINARY: f64 = 1e-10;

pub type Matrix2 = [[f64; 2]; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum StationaryLabel {
    O,
    N0,
    A0,
    M0,
}

impl StationaryLabel {
    pub const ALL: [StationaryLabel; 4] = [
        StationaryLabel::O,
        StationaryLabel::N0,
        StationaryLabel::A0,
        StationaryLabel::M0,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StationaryLabel::O => "O",
            StationaryLabel::N0 => "N0",
            StationaryLabel::A0 => "A0",
            StationaryLabel::M0 => "M0",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum StabilityClass {
    Source,
    Sink,
    Saddle,
    Center,
    NonHyperbolic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tangent {
    /// Unit vector with nonnegative X component.
    pub direction: [f64; 2],
    pub eigenvalue: f64,
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryPoint {
    pub label: StationaryLabel,
    pub location: PhasePoint,
    pub jacobian: Matrix2,
    pub eigenvalues: [Complex64; 2],
    pub classification: StabilityClass,
    pub tangents: Vec<Tangent>,
    pub in_first_quadrant: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum StationaryError {
    #[error("Jacobian requested on the concavity line at ({x}, {z})")]
    OnInterface { x: f64, z: f64 },
    #[error("point ({x}, {z}) lies outside the first and third quadrants")]
    OutsideDomain { x: f64, z: f64 },
    #[error("M0 is not in the first quadrant for p={p} <= {p_serrin}")]
    MNotInQuadrant { p: f64, p_serrin: f64 },
}

pub fn location(label: StationaryLabel, p: f64, params: &ProblemParams) -> PhasePoint {
    let nt = params.n_tilde();
    match label {
        StationaryLabel::O => PhasePoint::new(0.0, 0.0),
        StationaryLabel::N0 => PhasePoint::new(0.0, params.n0_height()),
        StationaryLabel::A0 => PhasePoint::new(nt - 2.0, 0.0),
        StationaryLabel::M0 => {
            let alpha = params.alpha(p);
            PhasePoint::new(alpha, params.kappa_lower() * (nt - 2.0 - alpha))
        }
    }
}

pub fn m0_in_first_quadrant(p: f64, params: &ProblemParams) -> bool {
    p > params.p_serrin()
}

/// Closed-form Jacobian of the branch in force at `pt`.
pub fn jacobian_at(pt: PhasePoint, p: f64, params: &ProblemParams) -> Result<Matrix2, StationaryError> {
    let PhasePoint { x, z } = pt;
    if region_of(pt, params) == Region::OnConcavityLine {
        return Err(StationaryError::OnInterface { x, z });
    }
    let branch = branch_of(pt, params).map_err(|_| StationaryError::OutsideDomain { x, z })?;
    Ok(branch_jacobian(pt, p, params, branch))
}

/// Eigenvalues from trace and determinant, larger real part first.
pub fn eigenvalues(m: &Matrix2) -> [Complex64; 2] {
    let half_tr = 0.5 * (m[0][0] + m[1][1]);
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let half_diff = 0.5 * (m[0][0] - m[1][1]);
    let disc = half_diff * half_diff + m[0][1] * m[1][0];
    if disc >= 0.0 {
        let root = disc.sqrt();
        let big = if half_tr >= 0.0 { half_tr + root } else { half_tr - root };
        let small = if big != 0.0 { det / big } else { 0.0 };
        let (hi, lo) = if big >= small { (big, small) } else { (small, big) };
        [Complex64::new(hi, 0.0), Complex64::new(lo, 0.0)]
    } else {
        let im = (-disc).sqrt();
        [Complex64::new(half_tr, im), Complex64::new(half_tr, -im)]
    }
}

pub fn classify_eigenvalues(eig: &[Complex64; 2]) -> StabilityClass {
    let scale = 1.0 + eig[0].norm().max(eig[1].norm());
    let zero = |s: Complex64| s.re.abs() < TAU_IMAGINARY * (1.0 + s.norm());
    if eig[0].im != 0.0 {
        if zero(eig[0]) {
            return StabilityClass::Center;
        }
    } else if eig.iter().any(|s| s.re.abs() < TAU_IMAGINARY * scale) {
        return StabilityClass::NonHyperbolic;
    }
    match (eig[0].re > 0.0, eig[1].re > 0.0) {
        (true, true) => StabilityClass::Source,
        (false, false) => StabilityClass::Sink,
        _ => StabilityClass::Saddle,
    }
}

fn unit_nonneg_x(v: [f64; 2]) -> [f64; 2] {
    let n = v[0].hypot(v[1]);
    let s = if v[0] < 0.0 || (v[0] == 0.0 && v[1] < 0.0) { -1.0 } else { 1.0 };
    [s * v[0] / n, s * v[1] / n]
}

/// Unit eigenvector for a real eigenvalue of a 2×2 matrix.
pub fn eigenvector(m: &Matrix2, sigma: f64) -> [f64; 2] {
    let r0 = [m[0][1], sigma - m[0][0]];
    let r1 = [sigma - m[1][1], m[1][0]];
    let n0 = r0[0].hypot(r0[1]);
    let n1 = r1[0].hypot(r1[1]);
    let v = if n0 == 0.0 && n1 == 0.0 {
        [1.0, 0.0]
    } else if n0 >= n1 {
        r0
    } else {
        r1
    };
    unit_nonneg_x(v)
}

fn tangents_for(label: StationaryLabel, j: &Matrix2, eig: &[Complex64; 2], p: f64, params: &ProblemParams) -> Vec<Tangent> {
    if eig[0].im != 0.0 {
        return Vec::new();
    }
    let tangent = |direction: [f64; 2], eigenvalue: f64| Tangent {
        direction: unit_nonneg_x(direction),
        eigenvalue,
        stable: eigenvalue < 0.0,
    };
    match label {
        StationaryLabel::N0 => {
            let a = params.a();
            let n = params.dim();
            let slope = -p * params.kappa_upper() * (n + a) / (n + 2.0 + 2.0 * a);
            vec![tangent([1.0, slope], 2.0 + a), tangent([0.0, 1.0], -(n + a))]
        }
        StationaryLabel::A0 => {
            let nt = params.n_tilde();
            let a = params.a();
            let sigma2 = nt + a - p * (nt - 2.0);
            let slope = params.kappa_lower() * (2.0 + a - p * (nt - 2.0)) / (nt - 2.0);
            vec![tangent([1.0, 0.0], nt - 2.0), tangent([1.0, slope], sigma2)]
        }
        StationaryLabel::O => {
            vec![tangent([1.0, 0.0], j[0][0]), tangent([0.0, 1.0], j[1][1])]
        }
        StationaryLabel::M0 => eig
            .iter()
            .map(|s| tangent(eigenvector(j, s.re), s.re))
            .collect(),
    }
}

fn build(label: StationaryLabel, p: f64, params: &ProblemParams) -> StationaryPoint {
    let loc = location(label, p, params);
    let branch = match label {
        StationaryLabel::N0 => Branch::Upper,
        _ => Branch::Lower,
    };
    if label == StationaryLabel::M0 {
        debug_assert!(loc.z < params.concavity_level());
    }
    let jacobian = branch_jacobian(loc, p, params, branch);
    let eig = eigenvalues(&jacobian);
    let classification = classify_eigenvalues(&eig);
    let in_first_quadrant = match label {
        StationaryLabel::M0 => m0_in_first_quadrant(p, params),
        _ => true,
    };
    StationaryPoint {
        label,
        location: loc,
        jacobian,
        eigenvalues: eig,
        classification,
        tangents: tangents_for(label, &jacobian, &eig, p, params),
        in_first_quadrant,
    }
}

/// All four stationary points; `M₀` carries `in_first_quadrant = false` when `p ≤ p_serrin`.
pub fn stationary_points(p: f64, params: &ProblemParams) -> Vec<StationaryPoint> {
    StationaryLabel::ALL.iter().map(|&l| build(l, p, params)).collect()
}

pub fn classify_stationary(
    label: StationaryLabel,
    p: f64,
    params: &ProblemParams,
) -> Result<StationaryPoint, StationaryError> {
    if label == StationaryLabel::M0 && !m0_in_first_quadrant(p, params) {
        return Err(StationaryError::MNotInQuadrant {
            p,
            p_serrin: params.p_serrin(),
        });
    }
    Ok(build(label, p, params))
}
