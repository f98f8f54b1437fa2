//! Physical-space side: reconstruction of `u(r)` from orbits, decay constants,
//! the energy function and an independent second-order shooting integrator.

use serde::Serialize;
use thiserror::Error;

use crate::field::{region_of, PhasePoint, Region};
use crate::flow::{Direction, Halt, OrbitFate, Sample, Trajectory, Verdict};
use crate::ode::{brent_root, Dopri5, OdeError, State, Step, Tolerance};
use crate::params::ProblemParams;
use crate::stationary::{self, StationaryLabel};

/// Relative tolerance on the ODE residual of emitted samples.
pub const TAU_RES: f64 = 1e-6;
/// Pointwise tolerance of the phase → radial → phase round trip.
pub const TAU_ROUND: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RadialError {
    #[error("trajectory has no samples")]
    EmptyTrajectory,
    #[error("X·Z must be positive to reconstruct u (t={t}, X={x}, Z={z})")]
    NonPositiveXZ { t: f64, x: f64, z: f64 },
    #[error("anchor time {0} is not a sample time of the trajectory")]
    AnchorNotOnTrajectory(f64),
    #[error("u' vanishes at r={0}")]
    VanishingDerivative(f64),
    #[error("energy is only defined where u'' ≥ 0 (point in region {0})")]
    WrongRegion(String),
    #[error("decay constants need a resolved fate, got {0}")]
    UnresolvedFate(String),
    #[error("initial value must be positive, got {0}")]
    NonPositiveGamma(f64),
    #[error(transparent)]
    Ode(#[from] OdeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadialSample {
    pub r: f64,
    pub u: f64,
    pub du: f64,
    pub ddu: f64,
}

/// Behaviour of a regular solution for large `r`, as read off by the shooting integrator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum DecayClass {
    Vanishes,
    Fast,
    Slow,
    PseudoSlow,
    Undetermined,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct DecayConstants {
    pub c_fast: Option<f64>,
    pub c_slow: Option<f64>,
    /// `(X₀Z₀)^{1/(p−1)}` at `M₀`, for comparison with `c_slow`.
    pub c_slow_expected: Option<f64>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialSolution {
    pub samples: Vec<RadialSample>,
    pub gamma: Option<f64>,
    pub wall_radius: Option<f64>,
    pub decay: Option<DecayClass>,
    pub constants: Option<DecayConstants>,
    /// Radii where `u''` changes sign.
    pub concavity_changes: Vec<f64>,
}

/// Relative residual of the radial equation at one sample, after dividing through by `u/r²`.
pub fn residual(s: &RadialSample, p: f64, params: &ProblemParams) -> f64 {
    let kappa = if s.ddu > 0.0 { params.kappa_lower() } else { params.kappa_upper() };
    let terms = [
        kappa * s.ddu * (s.r / s.u) * s.r,
        params.kappa_upper() * (params.dim() - 1.0) * s.du * s.r / s.u,
        ((2.0 + params.a()) * s.r.ln() + (p - 1.0) * s.u.ln()).exp(),
    ];
    let sum: f64 = terms.iter().sum();
    let scale: f64 = terms.iter().map(|t| t.abs()).sum();
    if scale == 0.0 {
        0.0
    } else {
        sum.abs() / scale
    }
}

pub fn max_residual(sol: &RadialSolution, p: f64, params: &ProblemParams) -> f64 {
    sol.samples.iter().map(|s| residual(s, p, params)).fold(0.0, f64::max)
}

/// Solution `u(r) = r^{−α}(XZ)^{1/(p−1)}`, `r = e^{t+shift}`, along a first-quadrant trajectory.
///
/// With `anchor = (t₀, u₀)` the radius is shifted so that `u = u₀` at the sample `t₀`.
/// Output stops at the first sample whose `r`, `u` or `u''` leaves the normal `f64` range.
pub fn reconstruct_u(
    traj: &Trajectory,
    p: f64,
    params: &ProblemParams,
    anchor: Option<(f64, f64)>,
) -> Result<RadialSolution, RadialError> {
    if traj.samples.is_empty() {
        return Err(RadialError::EmptyTrajectory);
    }
    let alpha = params.alpha(p);
    let inv = 1.0 / (p - 1.0);
    let amplitude = |q: PhasePoint| (q.x * q.z).powf(inv);
    let shift = match anchor {
        None => 0.0,
        Some((t0, u0)) => {
            let s = traj
                .samples
                .iter()
                .find(|s| (s.t - t0).abs() <= 1e-9 * (1.0 + t0.abs()))
                .ok_or(RadialError::AnchorNotOnTrajectory(t0))?;
            (amplitude(s.point).ln() - u0.ln()) / alpha - s.t
        }
    };
    let mut ordered: Vec<&Sample> = traj.samples.iter().collect();
    if traj.direction == Direction::Backward {
        ordered.reverse();
    }
    let mut samples = Vec::with_capacity(ordered.len());
    let mut last_t = f64::NEG_INFINITY;
    for s in ordered {
        let PhasePoint { x, z } = s.point;
        if !(x * z > 0.0) || x < 0.0 {
            return Err(RadialError::NonPositiveXZ { t: s.t, x, z });
        }
        if s.t <= last_t {
            continue;
        }
        last_t = s.t;
        let r = (s.t + shift).exp();
        let u = r.powf(-alpha) * amplitude(s.point);
        let du = -x * u / r;
        let f = crate::field::vector_field(s.point, p, params)
            .unwrap_or_else(|_| crate::field::branch_field(s.point, p, params, crate::field::Branch::Lower));
        let ddu = u / (r * r) * (x + x * x - f[0]);
        if !(r.is_finite() && u.is_normal() && (ddu == 0.0 || ddu.is_normal())) {
            break;
        }
        samples.push(RadialSample { r, u, du, ddu });
    }
    let wall_radius = match traj.halt {
        Halt::BlowUp { kind: crate::flow::EventKind::BlowUpX, time } => Some((time + shift).exp()),
        _ => None,
    };
    Ok(RadialSolution {
        samples,
        gamma: None,
        wall_radius,
        decay: None,
        constants: None,
        concavity_changes: Vec::new(),
    })
}

/// Phase coordinates `X = −ru'/u`, `Z = −r^{1+a}u^p/u'` of a radial solution; `t = ln r`.
pub fn to_phase(sol: &RadialSolution, p: f64, params: &ProblemParams) -> Result<Trajectory, RadialError> {
    let _ = p;
    if sol.samples.is_empty() {
        return Err(RadialError::EmptyTrajectory);
    }
    let mut samples = Vec::with_capacity(sol.samples.len());
    for s in &sol.samples {
        if s.du == 0.0 {
            return Err(RadialError::VanishingDerivative(s.r));
        }
        if s.u <= 0.0 {
            continue;
        }
        let x = -s.r * s.du / s.u;
        let z = -s.r.powf(1.0 + params.a()) * s.u.powf(p) / s.du;
        let point = PhasePoint::new(x, z);
        samples.push(Sample {
            t: s.r.ln(),
            point,
            region: region_of(point, params),
        });
    }
    Ok(Trajectory {
        samples,
        events: Vec::new(),
        direction: Direction::Forward,
        halt: Halt::Horizon,
    })
}

/// Limits `c_fast = lim u r^{Ñ−2}`, `C_slow = lim r^α u` or `c₁ < c₂` for a resolved fate.
///
/// Uses the canonical reconstruction of the trajectory (no anchor).
pub fn decay_constants(
    traj: &Trajectory,
    fate: &OrbitFate,
    p: f64,
    params: &ProblemParams,
) -> Result<DecayConstants, RadialError> {
    let inv = 1.0 / (p - 1.0);
    let end = traj.samples.last().ok_or(RadialError::EmptyTrajectory)?;
    match &fate.verdict {
        Verdict::ToStationary(StationaryLabel::A0) => Ok(DecayConstants {
            c_fast: fast_constant(&reconstruct_u(traj, p, params, None)?, params),
            ..DecayConstants::default()
        }),
        Verdict::ToStationary(StationaryLabel::M0) => {
            let m0 = stationary::location(StationaryLabel::M0, p, params);
            Ok(DecayConstants {
                c_slow: Some((end.point.x * end.point.z).powf(inv)),
                c_slow_expected: Some((m0.x * m0.z).powf(inv)),
                ..DecayConstants::default()
            })
        }
        Verdict::ToPeriodicOrbit(o) => Ok(DecayConstants {
            c1: Some(o.xz_min.powf(inv)),
            c2: Some(o.xz_max.powf(inv)),
            ..DecayConstants::default()
        }),
        v => Err(RadialError::UnresolvedFate(v.name())),
    }
}

/// `u r^{Ñ−2}` at the outermost sample.
pub fn fast_constant(sol: &RadialSolution, params: &ProblemParams) -> Option<f64> {
    sol.samples.last().map(|s| s.u * s.r.powf(params.n_tilde() - 2.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyValue {
    pub value: f64,
    pub region_valid: bool,
}

/// Energy in phase variables, valid in the convex region and on the concavity line.
///
/// `E = e^{t(Ñ−2−2α)} X (XZ)^{2/(p−1)} [X/2 + Z/(κ(p+1)) − (Ñ+a)/(p+1)]`, with `κ` the
/// constant of the convex region; it is a first integral there when `p = p_pseudo`.
pub fn energy(t: f64, q: PhasePoint, p: f64, params: &ProblemParams) -> Result<EnergyValue, RadialError> {
    let region = region_of(q, params);
    if !matches!(region, Region::RMinus | Region::OnConcavityLine) {
        return Err(RadialError::WrongRegion(region.name().to_string()));
    }
    let nt = params.n_tilde();
    let alpha = params.alpha(p);
    let kappa = params.kappa_lower();
    let bracket = q.x / 2.0 + q.z / (kappa * (p + 1.0)) - (nt + params.a()) / (p + 1.0);
    let value = (t * (nt - 2.0 - 2.0 * alpha)).exp() * q.x * (q.x * q.z).powf(2.0 / (p - 1.0)) * bracket;
    Ok(EnergyValue {
        value,
        region_valid: true,
    })
}

/// The same energy in radial variables; requires `u'' ≥ 0`.
///
/// `E(r) = r^Ñ [u'²/2 + r^a u^{p+1}/(κ(p+1))] + (Ñ+a)/(p+1) r^{Ñ−1} u u'`.
pub fn energy_radial(s: &RadialSample, p: f64, params: &ProblemParams) -> Result<EnergyValue, RadialError> {
    if s.ddu < 0.0 {
        return Err(RadialError::WrongRegion("u'' < 0".to_string()));
    }
    let nt = params.n_tilde();
    let a = params.a();
    let kappa = params.kappa_lower();
    let value = s.r.powf(nt) * (0.5 * s.du * s.du + s.r.powf(a) * s.u.powf(p + 1.0) / (kappa * (p + 1.0)))
        + (nt + a) / (p + 1.0) * s.r.powf(nt - 1.0) * s.u * s.du;
    Ok(EnergyValue {
        value,
        region_valid: true,
    })
}

/// `h(X) = (Ñ + a − pX) X^p`; the energy restricted to the Z-nullcline is a function of `h`.
pub fn level_function(x: f64, p: f64, params: &ProblemParams) -> f64 {
    (params.n_tilde() + params.a() - p * x) * x.powf(p)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootOptions {
    pub rtol: f64,
    /// Length of the integration range in `ln r`.
    pub log_span: f64,
    /// Width in `ln r` of the windows used to read off the decay.
    pub window: f64,
    pub r_max: Option<f64>,
    /// Start radius in units of the natural scale `γ^{−(p−1)/(2+a)}`.
    pub start_scale: f64,
}

impl Default for ShootOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            log_span: 300.0,
            window: 100.0,
            r_max: None,
            start_scale: 1e-6,
        }
    }
}

/// Initial radius and data from the expansion of the regular solution at the origin.
pub fn series_start(gamma: f64, p: f64, params: &ProblemParams, scale: f64) -> (f64, f64, f64) {
    let a = params.a();
    let kappa = params.kappa_upper();
    let na = params.dim() + a;
    let r0 = scale * gamma.powf(-(p - 1.0) / (2.0 + a));
    let gp = gamma.powf(p);
    let u0 = gamma - gp * r0.powf(2.0 + a) / (kappa * na * (2.0 + a));
    let du0 = -gp * r0.powf(1.0 + a) / (kappa * na);
    (r0, u0, du0)
}

/// Integrates `u(0) = γ`, `u'(0) = 0` in `s = ln r` with state `(u, r u')`.
pub fn shoot_regular(
    gamma: f64,
    p: f64,
    params: &ProblemParams,
    opts: &ShootOptions,
) -> Result<RadialSolution, RadialError> {
    if !(gamma > 0.0) {
        return Err(RadialError::NonPositiveGamma(gamma));
    }
    let (r0, u0, du0) = series_start(gamma, p, params, opts.start_scale);
    let alpha = params.alpha(p);
    let s0 = r0.ln();
    // Keep u, u'' and u^p of the emitted samples inside the normal range.
    let span = opts.log_span.min(600.0 / (alpha * p)).min(600.0 / (alpha + 2.0));
    let s_end = opts.r_max.map_or(s0 + span, |r| r.ln().min(s0 + span));
    let kr = params.kappa_upper() * (params.dim() - 1.0);
    let (k_up, k_lo) = (params.kappa_upper(), params.kappa_lower());
    // State (r^α u, r^α r u'); the equation is autonomous in these variables.
    let scaled = move |_s: f64, y: &State| -> f64 { -(kr * y[1] + y[0].abs().powf(p).copysign(y[0])) };
    let kappa_for = move |q: f64| if q > 0.0 { k_lo } else { k_up };
    let y0 = [r0.powf(alpha) * u0, r0.powf(alpha + 1.0) * du0];
    let mut convex = scaled(s0, &y0) > 0.0;
    let rhs = |convex: bool| {
        let k = if convex { k_lo } else { k_up };
        move |s: f64, y: &State| [alpha * y[0] + y[1], (1.0 + alpha) * y[1] + scaled(s, y) / k]
    };
    let tol = Tolerance {
        rtol: opts.rtol,
        atol: 1e-300,
    };
    let mut ode = Dopri5::new(&mut rhs(convex), s0, y0, tol, 1.0);
    let sample = |s: f64, y: &State| {
        let r = s.exp();
        let q = scaled(s, y);
        let down = r.powf(-alpha);
        RadialSample {
            r,
            u: y[0] * down,
            du: y[1] * down / r,
            ddu: q * down / (kappa_for(q) * r * r),
        }
    };
    let mut samples = vec![sample(s0, &y0)];
    let mut changes = Vec::new();
    let mut wall = None;
    const PROBES: usize = 6;
    while ode.t() < s_end {
        let rem = s_end - ode.t();
        if ode.h() > rem {
            ode.set_h(rem);
        }
        let step: Step = ode.step(&mut rhs(convex))?;
        let mut cut: Option<(f64, bool)> = None;
        let mut prev = (0.0, step.y0);
        for j in 1..=PROBES {
            let th = j as f64 / PROBES as f64;
            let y = if j == PROBES { step.y1 } else { step.dense(th) };
            if y[0] <= 0.0 {
                let f = |t: f64| step.dense(t)[0];
                let root = brent_root(f, prev.0, th, prev.1[0], y[0], 1e-13);
                cut = Some((root, true));
                break;
            }
            let side = |y: &State, th: f64| scaled(step.t0 + th * step.h(), y) > 0.0;
            if side(&y, th) != convex {
                let g = |t: f64| scaled(step.t0 + t * step.h(), &step.dense(t));
                let root = brent_root(g, prev.0, th, g(prev.0), g(th), 1e-13);
                if root * step.h() > 1e-13 {
                    cut = Some((root, false));
                    break;
                }
            }
            prev = (th, y);
        }
        match cut {
            Some((th, true)) => {
                let s = step.t0 + th * step.h();
                let mut y = step.dense(th);
                y[0] = y[0].max(0.0);
                samples.push(sample(s, &y));
                wall = Some(s.exp());
                break;
            }
            Some((th, false)) => {
                let s = step.t0 + th * step.h();
                let y = step.dense(th);
                samples.push(sample(s, &y));
                changes.push(s.exp());
                convex = !convex;
                ode.reset(&mut rhs(convex), s, y);
            }
            None => {
                samples.push(sample(step.t1, &step.y1));
                let now = scaled(step.t1, &step.y1) > 0.0;
                if now != convex {
                    changes.push(step.t1.exp());
                    convex = now;
                    ode.reset(&mut rhs(convex), step.t1, step.y1);
                }
            }
        }
    }
    let decay = if wall.is_some() {
        DecayClass::Vanishes
    } else {
        read_decay(&samples, p, params, opts.window.min(0.25 * (s_end - s0)))
    };
    Ok(RadialSolution {
        samples,
        gamma: Some(gamma),
        wall_radius: wall,
        decay: Some(decay),
        constants: None,
        concavity_changes: changes,
    })
}

/// Decay read off from the log-log slope and the oscillation of `r^α u` in the last windows.
fn read_decay(samples: &[RadialSample], p: f64, params: &ProblemParams, window: f64) -> DecayClass {
    let alpha = params.alpha(p);
    let fast = params.n_tilde() - 2.0;
    let logs: Vec<(f64, f64)> = samples.iter().map(|s| (s.r.ln(), s.u.ln())).collect();
    let (s_end, l_end) = *logs.last().unwrap();
    let at = |s: f64| {
        let i = logs.partition_point(|(x, _)| *x < s).min(logs.len() - 1);
        logs[i]
    };
    let (s_a, l_a) = at(s_end - window);
    if s_end - s_a <= 0.0 {
        return DecayClass::Undetermined;
    }
    let slope = (l_end - l_a) / (s_end - s_a);
    let amplitude = |lo: f64, hi: f64| {
        let vals = logs
            .iter()
            .filter(|(s, _)| *s >= lo && *s <= hi)
            .map(|(s, l)| alpha * s + l);
        let (mn, mx) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if mx >= mn {
            mx - mn
        } else {
            0.0
        }
    };
    if (slope + fast).abs() < 0.05 {
        DecayClass::Fast
    } else if (slope + alpha).abs() < 0.05 {
        let late = amplitude(s_end - window, s_end);
        let early = amplitude(s_end - 2.0 * window, s_end - window);
        if late > 1e-3 && early > 0.0 && late / early > 0.5 {
            DecayClass::PseudoSlow
        } else {
            DecayClass::Slow
        }
    } else {
        DecayClass::Undetermined
    }
}

/// Value and derivative of a sampled solution at `r`, by cubic Hermite interpolation.
pub fn interpolate(sol: &RadialSolution, r: f64) -> Option<(f64, f64)> {
    let s = &sol.samples;
    let i = s.partition_point(|q| q.r < r);
    if i == 0 || i >= s.len() {
        return s.get(i).filter(|q| q.r == r).map(|q| (q.u, q.du));
    }
    let (a, b) = (s[i - 1], s[i]);
    let h = b.r - a.r;
    let t = (r - a.r) / h;
    let (t2, t3) = (t * t, t * t * t);
    let u = (2.0 * t3 - 3.0 * t2 + 1.0) * a.u
        + (t3 - 2.0 * t2 + t) * h * a.du
        + (-2.0 * t3 + 3.0 * t2) * b.u
        + (t3 - t2) * h * b.du;
    let du = ((6.0 * t2 - 6.0 * t) * a.u
        + (3.0 * t2 - 4.0 * t + 1.0) * h * a.du
        + (-6.0 * t2 + 6.0 * t) * b.u
        + (3.0 * t2 - 2.0 * t) * h * b.du)
        / h;
    Some((u, du))
}
