//! The distinguished orbits `Γ` (out of `N₀`) and `Υ` (into `A₀`), the C/F/P/S
//! partition of exponents, the critical exponent, singular solutions and the
//! exterior-domain nonexistence check.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::field::PhasePoint;
use crate::flow::{
    self, capture_radius, integrate, trace, Budget, Direction, EventKind, FlowError, FlowOptions, Halt,
    OrbitFate, PeriodicOrbit, Traced, Verdict,
};
use crate::params::{Operator, ProblemParams};
use crate::stationary::{self, StabilityClass, StationaryLabel};

/// Offset from the bracket endpoints predicted by the exponent inequalities.
pub const BRACKET_MARGIN: f64 = 0.01;
pub const MAX_BISECTIONS: usize = 60;
pub const DEFAULT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum PClass {
    /// Γ crosses the wall: the regular solution vanishes at a finite radius.
    C,
    /// Γ ends at `A₀`: fast decay.
    F,
    /// Γ winds onto a periodic orbit: pseudo-slow decay.
    P,
    /// Γ ends at `M₀`: slow decay.
    S,
}

impl PClass {
    pub fn name(self) -> &'static str {
        match self {
            PClass::C => "C",
            PClass::F => "F",
            PClass::P => "P",
            PClass::S => "S",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassifyError {
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error("fate unresolved at p={p}: {note}")]
    Unresolved { p: f64, note: String },
    #[error("A0 is not a saddle for p={p} <= {p_serrin}")]
    SaddleUnavailable { p: f64, p_serrin: f64 },
    #[error("bracket [{lo}, {hi}] failed: {note}")]
    BracketFailure { lo: f64, hi: f64, note: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    pub p: f64,
    pub class: PClass,
    pub evidence: OrbitFate,
    /// `e^{t₂}` for the blow-up time `t₂` of Γ (seeded at `t = 0`).
    pub wall_radius: Option<f64>,
    pub concavity_crossings: usize,
}

impl Classification {
    /// One-line deterministic summary.
    pub fn detail(&self) -> String {
        match (&self.class, &self.evidence.verdict) {
            (PClass::C, _) => format!("wall_radius={:.16e}", self.wall_radius.unwrap_or(f64::NAN)),
            (_, Verdict::ToPeriodicOrbit(o)) => format!(
                "period={:.16e};xz_min={:.16e};xz_max={:.16e}",
                o.period, o.xz_min, o.xz_max
            ),
            (_, v) => format!(
                "{};distance={:.16e}",
                v.name(),
                self.evidence.certificate.final_distance.unwrap_or(f64::NAN)
            ),
        }
    }
}

fn seed_offset(loc: PhasePoint) -> f64 {
    1e-6 * (1.0 + loc.norm())
}

/// Start of Γ: `N₀` displaced along the unstable direction into the first quadrant.
pub fn gamma_seed(p: f64, params: &ProblemParams) -> PhasePoint {
    let n0 = stationary::classify_stationary(StationaryLabel::N0, p, params).expect("N0 always exists");
    let v = n0.tangents.iter().find(|t| !t.stable).expect("N0 is a saddle").direction;
    let d = seed_offset(n0.location);
    PhasePoint::new(n0.location.x + d * v[0], n0.location.z + d * v[1])
}

/// Start of Υ: `A₀` displaced along its stable direction into `Z > 0`.
pub fn upsilon_seed(p: f64, params: &ProblemParams) -> Result<PhasePoint, ClassifyError> {
    if p <= params.p_serrin() {
        return Err(ClassifyError::SaddleUnavailable {
            p,
            p_serrin: params.p_serrin(),
        });
    }
    let a0 = stationary::classify_stationary(StationaryLabel::A0, p, params).expect("A0 always exists");
    let w = a0.tangents.iter().find(|t| t.stable).expect("A0 is a saddle").direction;
    let w = if w[1] < 0.0 { [-w[0], -w[1]] } else { w };
    let d = seed_offset(a0.location);
    Ok(PhasePoint::new(a0.location.x + d * w[0], a0.location.z + d * w[1]))
}

pub fn gamma_orbit(p: f64, params: &ProblemParams, budget: &Budget) -> Result<Traced, ClassifyError> {
    Ok(trace(gamma_seed(p, params), p, params, Direction::Forward, budget)?)
}

pub fn upsilon_orbit(p: f64, params: &ProblemParams, budget: &Budget) -> Result<Traced, ClassifyError> {
    let seed = upsilon_seed(p, params)?;
    Ok(trace(seed, p, params, Direction::Backward, budget)?)
}

pub fn classify_p(p: f64, params: &ProblemParams) -> Result<Classification, ClassifyError> {
    classify_p_with(p, params, &Budget::default())
}

pub fn classify_p_with(p: f64, params: &ProblemParams, budget: &Budget) -> Result<Classification, ClassifyError> {
    let traced = gamma_orbit(p, params, budget)?;
    let fate = traced.fate;
    let class = match &fate.verdict {
        Verdict::BlowUpX => PClass::C,
        Verdict::ToStationary(StationaryLabel::A0) => PClass::F,
        Verdict::ToStationary(StationaryLabel::M0) => PClass::S,
        Verdict::ToPeriodicOrbit(_) => PClass::P,
        other => {
            return Err(ClassifyError::Unresolved {
                p,
                note: format!("{} ({})", other.name(), fate.certificate.note),
            })
        }
    };
    let wall_radius = (class == PClass::C).then(|| fate.blowup_time.map(f64::exp)).flatten();
    Ok(Classification {
        p,
        class,
        wall_radius,
        concavity_crossings: traced.trajectory.count(EventKind::ConcavityCross),
        evidence: fate,
    })
}

/// Which side of `p*` an exponent lies on, decided by Γ's first commitment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    /// Γ reaches the wall while `X` still increases.
    Below,
    /// Γ turns back across the X-nullcline before the wall.
    Above,
}

pub fn side_of_critical(p: f64, params: &ProblemParams, budget: &Budget) -> Result<Option<Side>, ClassifyError> {
    let opts = FlowOptions {
        horizon: budget.horizon,
        max_steps: budget.max_steps,
        capture: false,
        dense_samples: 0,
        stop_on: vec![EventKind::WallCross, EventKind::XNullclineCross],
        ..FlowOptions::default()
    };
    let traj = integrate(gamma_seed(p, params), p, params, Direction::Forward, &opts)?;
    Ok(match traj.halt {
        Halt::Stopped(EventKind::WallCross) => Some(Side::Below),
        Halt::Stopped(EventKind::XNullclineCross) => Some(Side::Above),
        _ => None,
    })
}

fn side_with_retry(p: f64, params: &ProblemParams, budget: &Budget) -> Result<Side, ClassifyError> {
    if let Some(s) = side_of_critical(p, params, budget)? {
        return Ok(s);
    }
    log::debug!("side test unresolved at p={p}, retrying with a larger budget");
    side_of_critical(p, params, &budget.scaled(10.0))?.ok_or_else(|| ClassifyError::Unresolved {
        p,
        note: "Γ neither crossed the wall nor the X-nullcline".to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCheck {
    pub lower_name: String,
    pub lower: f64,
    pub upper_name: String,
    pub upper: f64,
    pub above_lower: bool,
    pub below_upper: bool,
}

impl BoundCheck {
    pub fn all(&self) -> bool {
        self.above_lower && self.below_upper
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalResult {
    pub p_star: f64,
    pub bracket: (f64, f64),
    pub tol: f64,
    pub iterations: usize,
    pub bound_check: BoundCheck,
    /// Closest approach of Γ at `p_star` to `A₀` before it commits to a side.
    pub a0_approach: f64,
    pub approaches_a0: bool,
}

/// Strict bounds on `p*`: `(max{p_serrin, p_sobolev}, p_pseudo)` for M⁺, `(p_pseudo, p_sobolev)` for M⁻.
pub fn theoretical_bounds(params: &ProblemParams) -> ((&'static str, f64), (&'static str, f64)) {
    let (ps, pp, pd) = (params.p_serrin(), params.p_pseudo(), params.p_sobolev());
    match params.operator() {
        Operator::MPlus => {
            let lo = if ps >= pd { ("p_serrin", ps) } else { ("p_sobolev", pd) };
            (lo, ("p_pseudo", pp))
        }
        Operator::MMinus => (("p_pseudo", pp), ("p_sobolev", pd)),
    }
}

pub fn critical_exponent(params: &ProblemParams, tol: f64) -> Result<CriticalResult, ClassifyError> {
    critical_exponent_with(params, tol, &Budget::default())
}

pub fn critical_exponent_with(
    params: &ProblemParams,
    tol: f64,
    budget: &Budget,
) -> Result<CriticalResult, ClassifyError> {
    let ((lo_name, lo_bound), (hi_name, hi_bound)) = theoretical_bounds(params);
    let mut lo = lo_bound - BRACKET_MARGIN;
    let mut hi = hi_bound + BRACKET_MARGIN;
    let fail = |lo: f64, hi: f64, note: String| ClassifyError::BracketFailure { lo, hi, note };
    if side_with_retry(lo, params, budget).map_err(|e| fail(lo, hi, e.to_string()))? != Side::Below {
        return Err(fail(lo, hi, format!("p={lo} is not below the critical exponent")));
    }
    if side_with_retry(hi, params, budget).map_err(|e| fail(lo, hi, e.to_string()))? != Side::Above {
        return Err(fail(lo, hi, format!("p={hi} is not above the critical exponent")));
    }
    let mut iterations = 0;
    while hi - lo > tol && iterations < MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        match side_with_retry(mid, params, budget).map_err(|e| fail(lo, hi, e.to_string()))? {
            Side::Below => lo = mid,
            Side::Above => hi = mid,
        }
        iterations += 1;
    }
    let p_star = 0.5 * (lo + hi);
    let a0_approach = gamma_truncated_at_a0(p_star, params, budget)?.1;
    let a0 = stationary::location(StationaryLabel::A0, p_star, params);
    Ok(CriticalResult {
        p_star,
        bracket: (lo, hi),
        tol,
        iterations,
        bound_check: BoundCheck {
            lower_name: lo_name.to_string(),
            lower: lo_bound,
            upper_name: hi_name.to_string(),
            upper: hi_bound,
            above_lower: lo_bound < p_star,
            below_upper: p_star < hi_bound,
        },
        a0_approach,
        approaches_a0: a0_approach < capture_radius(a0),
    })
}

/// Γ cut at its closest approach to `A₀` before any wall crossing, and that distance.
pub fn gamma_truncated_at_a0(
    p: f64,
    params: &ProblemParams,
    budget: &Budget,
) -> Result<(Vec<PhasePoint>, f64), ClassifyError> {
    let opts = FlowOptions {
        horizon: budget.horizon,
        max_steps: budget.max_steps,
        capture: false,
        stop_on: vec![EventKind::WallCross, EventKind::XNullclineCross],
        ..FlowOptions::default()
    };
    let traj = integrate(gamma_seed(p, params), p, params, Direction::Forward, &opts)?;
    let a0 = stationary::location(StationaryLabel::A0, p, params);
    let (idx, d) = traj
        .samples
        .iter()
        .enumerate()
        .take_while(|(_, s)| s.point.x < params.wall())
        .map(|(i, s)| (i, s.point.dist(&a0)))
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .unwrap();
    Ok((traj.samples[..=idx].iter().map(|s| s.point).collect(), d))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub p: f64,
    pub class: Option<PClass>,
    pub detail: String,
}

/// Classifies every `p` on a pool of `jobs` workers; rows come back in input order.
pub fn sweep(params: &ProblemParams, ps: &[f64], jobs: usize, budget: &Budget) -> Vec<SweepRow> {
    let run = |&p: &f64| match classify_p_with(p, params, budget) {
        Ok(c) => SweepRow {
            p,
            class: Some(c.class),
            detail: c.detail(),
        },
        Err(e) => SweepRow {
            p,
            class: None,
            detail: e.to_string(),
        },
    };
    match rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build() {
        Ok(pool) => pool.install(|| ps.par_iter().map(run).collect()),
        Err(_) => ps.iter().map(run).collect(),
    }
}

/// Behaviour of a singular solution as `r → 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum NearOrigin {
    /// `u ~ c r^{-(Ñ-2)}`.
    DimensionBlowUp,
    /// `u ~ c r^{-α}`.
    AlphaBlowUp,
    /// `r^α u` oscillates between two positive constants.
    PseudoBlowUp,
}

/// Behaviour away from the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Outer {
    /// Vanishes at a finite radius.
    Ball,
    FastDecay,
    SlowDecay,
    PseudoSlowDecay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Cardinality {
    UniqueUpToScaling,
    Infinite,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Representative {
    pub seed: PhasePoint,
    pub backward: String,
    pub forward: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CatalogEntry {
    pub source: String,
    pub near_origin: NearOrigin,
    pub outer: Outer,
    pub cardinality: Cardinality,
    pub representatives: Vec<Representative>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleSummary {
    pub period: f64,
    pub section_s: f64,
    pub xz_min: f64,
    pub xz_max: f64,
    pub concavity_crossings: usize,
    pub closure_gap: f64,
}

impl From<&PeriodicOrbit> for CycleSummary {
    fn from(o: &PeriodicOrbit) -> Self {
        Self {
            period: o.period,
            section_s: o.section_s,
            xz_min: o.xz_min,
            xz_max: o.xz_max,
            concavity_crossings: o.concavity_crossings,
            closure_gap: o.closure_gap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingularCatalog {
    pub p: f64,
    pub operator: Operator,
    pub entries: Vec<CatalogEntry>,
    pub cycles: Vec<CycleSummary>,
    pub notes: Vec<String>,
}

impl SingularCatalog {
    pub fn has(&self, near: NearOrigin, outer: Outer) -> bool {
        self.entries.iter().any(|e| e.near_origin == near && e.outer == outer)
    }
}

fn outer_of(v: &Verdict) -> Option<Outer> {
    match v {
        Verdict::BlowUpX => Some(Outer::Ball),
        Verdict::ToStationary(StationaryLabel::A0) => Some(Outer::FastDecay),
        Verdict::ToStationary(StationaryLabel::M0) => Some(Outer::SlowDecay),
        Verdict::ToPeriodicOrbit(_) => Some(Outer::PseudoSlowDecay),
        _ => None,
    }
}

fn near_of(v: &Verdict) -> Option<NearOrigin> {
    match v {
        Verdict::ToStationary(StationaryLabel::A0) => Some(NearOrigin::DimensionBlowUp),
        Verdict::ToStationary(StationaryLabel::M0) => Some(NearOrigin::AlphaBlowUp),
        Verdict::ToPeriodicOrbit(_) => Some(NearOrigin::PseudoBlowUp),
        _ => None,
    }
}

fn ring(center: PhasePoint, radius: f64, angles: &[f64]) -> Vec<PhasePoint> {
    angles
        .iter()
        .map(|th| PhasePoint::new(center.x + radius * th.cos(), center.z + radius * th.sin()))
        .collect()
}

struct CatalogBuilder<'a> {
    p: f64,
    params: &'a ProblemParams,
    budget: &'a Budget,
    entries: Vec<CatalogEntry>,
    cycles: Vec<PeriodicOrbit>,
    notes: Vec<String>,
}

impl CatalogBuilder<'_> {
    fn note_cycle(&mut self, v: &Verdict) {
        if let Verdict::ToPeriodicOrbit(o) = v {
            let known = self
                .cycles
                .iter()
                .any(|c| (c.section_s - o.section_s).abs() <= 1e-6 * (1.0 + o.section_s));
            if !known {
                self.cycles.push((**o).clone());
            }
        }
    }

    fn add(&mut self, source: &str, near: NearOrigin, outer: Outer, cardinality: Cardinality, rep: Representative) {
        if let Some(e) = self
            .entries
            .iter_mut()
            .find(|e| e.source == source && e.near_origin == near && e.outer == outer)
        {
            e.representatives.push(rep);
            return;
        }
        self.entries.push(CatalogEntry {
            source: source.to_string(),
            near_origin: near,
            outer,
            cardinality,
            representatives: vec![rep],
        });
    }

    /// Seeds whose backward limit is known by construction; only the forward fate is traced.
    fn issued_from(&mut self, source: &str, near: NearOrigin, label: &str, seeds: &[PhasePoint]) -> Result<(), ClassifyError> {
        for &seed in seeds {
            let fwd = trace(seed, self.p, self.params, Direction::Forward, self.budget)?.fate;
            self.note_cycle(&fwd.verdict);
            let rep = Representative {
                seed,
                backward: format!("ToStationary({label})"),
                forward: fwd.verdict.name(),
            };
            match outer_of(&fwd.verdict) {
                Some(outer) => self.add(source, near, outer, Cardinality::Infinite, rep),
                None => self.notes.push(format!("{source}: seed {seed:?} forward fate {}", fwd.verdict.name())),
            }
        }
        Ok(())
    }

    /// Seeds traced both ways.
    fn two_sided(&mut self, source: &str, cardinality: Cardinality, seeds: &[PhasePoint]) -> Result<(), ClassifyError> {
        for &seed in seeds {
            let fwd = trace(seed, self.p, self.params, Direction::Forward, self.budget)?.fate;
            let bwd = trace(seed, self.p, self.params, Direction::Backward, self.budget)?.fate;
            self.note_cycle(&fwd.verdict);
            self.note_cycle(&bwd.verdict);
            let rep = Representative {
                seed,
                backward: bwd.verdict.name(),
                forward: fwd.verdict.name(),
            };
            match (near_of(&bwd.verdict), outer_of(&fwd.verdict)) {
                (Some(near), Some(outer)) => self.add(source, near, outer, cardinality, rep),
                _ => self.notes.push(format!(
                    "{source}: seed ({:.6}, {:.6}) is not singular (backward {}, forward {})",
                    seed.x,
                    seed.z,
                    rep.backward,
                    rep.forward
                )),
            }
        }
        Ok(())
    }
}

/// Singular radial solutions at `p`, assembled from computed orbits.
pub fn singular_catalog(p: f64, params: &ProblemParams, budget: &Budget) -> Result<SingularCatalog, ClassifyError> {
    let mut b = CatalogBuilder {
        p,
        params,
        budget,
        entries: Vec::new(),
        cycles: Vec::new(),
        notes: Vec::new(),
    };
    let a0 = stationary::classify_stationary(StationaryLabel::A0, p, params).expect("A0 always exists");
    let angles = [0.25 * std::f64::consts::PI, 0.5 * std::f64::consts::PI, 0.75 * std::f64::consts::PI];
    let rep_radius = |loc: PhasePoint| 1e-3 * (1.0 + loc.norm());

    match a0.classification {
        StabilityClass::Source => {
            let seeds = ring(a0.location, rep_radius(a0.location), &angles);
            b.issued_from("orbits issued from A0", NearOrigin::DimensionBlowUp, "A0", &seeds)?;
        }
        StabilityClass::NonHyperbolic => {
            // unstable orbits leave A0 = M0 between the X-nullcline and the X axis
            let start = std::f64::consts::PI - params.kappa_lower().atan();
            let span = std::f64::consts::PI - start;
            let sector: Vec<f64> = (1..=3).map(|k| start + span * k as f64 / 4.0).collect();
            let seeds = ring(a0.location, rep_radius(a0.location), &sector);
            b.issued_from("orbits issued from A0", NearOrigin::DimensionBlowUp, "A0", &seeds)?;
        }
        _ => {}
    }

    if p > params.p_serrin() {
        let ups = upsilon_orbit(p, params, budget)?;
        b.note_cycle(&ups.fate.verdict);
        match near_of(&ups.fate.verdict) {
            Some(near) => b.add(
                "Upsilon",
                near,
                Outer::FastDecay,
                Cardinality::UniqueUpToScaling,
                Representative {
                    seed: ups.trajectory.samples[0].point,
                    backward: ups.fate.verdict.name(),
                    forward: "ToStationary(A0)".to_string(),
                },
            ),
            None => b
                .notes
                .push(format!("Upsilon backward fate {} gives no singular solution", ups.fate.verdict.name())),
        }

        let m0 = stationary::classify_stationary(StationaryLabel::M0, p, params).expect("M0 in the first quadrant");
        if m0.classification == StabilityClass::Source {
            let seeds = ring(m0.location, rep_radius(m0.location), &angles);
            b.issued_from("orbits issued from M0", NearOrigin::AlphaBlowUp, "M0", &seeds)?;
        }
        let gamma = gamma_orbit(p, params, budget)?;
        b.note_cycle(&gamma.fate.verdict);

        let anchor = m0.location;
        let cycles: Vec<PeriodicOrbit> = b.cycles.clone();
        for c in &cycles {
            b.add(
                "periodic orbit",
                NearOrigin::PseudoBlowUp,
                Outer::PseudoSlowDecay,
                Cardinality::UniqueUpToScaling,
                Representative {
                    seed: PhasePoint::new(anchor.x, anchor.z + c.section_s),
                    backward: "ToPeriodicOrbit".to_string(),
                    forward: "ToPeriodicOrbit".to_string(),
                },
            );
            let inside: Vec<PhasePoint> = [0.9, 0.8, 0.6]
                .iter()
                .map(|f| PhasePoint::new(anchor.x, anchor.z + f * c.section_s))
                .collect();
            let outside: Vec<PhasePoint> = [1.02, 1.05, 1.1]
                .iter()
                .map(|f| PhasePoint::new(anchor.x, anchor.z + f * c.section_s))
                .filter(|q| q.z < params.n0_height())
                .collect();
            b.two_sided("inside periodic orbit", Cardinality::Infinite, &inside)?;
            b.two_sided("outside periodic orbit", Cardinality::Infinite, &outside)?;
        }

        b.add(
            "trivial",
            NearOrigin::AlphaBlowUp,
            Outer::SlowDecay,
            Cardinality::UniqueUpToScaling,
            Representative {
                seed: anchor,
                backward: "ToStationary(M0)".to_string(),
                forward: "ToStationary(M0)".to_string(),
            },
        );
    }

    Ok(SingularCatalog {
        p,
        operator: params.operator(),
        entries: b.entries,
        cycles: b.cycles.iter().map(CycleSummary::from).collect(),
        notes: b.notes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExteriorVerdict {
    Nonexistence,
    OutOfScope,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BarrierEvidence {
    pub vertices: usize,
    pub m0_inside: Option<bool>,
    pub a0_in_closure: bool,
    pub cycles_inside: Vec<bool>,
    pub outer_point_outside: bool,
    pub probe_fates: Vec<String>,
    pub probes_blow_up: bool,
}

impl BarrierEvidence {
    pub fn passes(&self) -> bool {
        self.m0_inside.unwrap_or(true)
            && self.a0_in_closure
            && self.cycles_inside.iter().all(|&b| b)
            && self.outer_point_outside
            && self.probes_blow_up
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExteriorReport {
    pub p: f64,
    pub verdict: ExteriorVerdict,
    pub class: PClass,
    pub evidence: Option<BarrierEvidence>,
}

/// Even-odd rule; points on an edge count as inside.
pub fn point_in_polygon(q: PhasePoint, poly: &[PhasePoint]) -> bool {
    if distance_to_polyline(q, poly, true) <= 1e-12 * (1.0 + q.norm()) {
        return true;
    }
    let mut inside = false;
    let n = poly.len();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if (a.z > q.z) != (b.z > q.z) {
            let x = a.x + (q.z - a.z) / (b.z - a.z) * (b.x - a.x);
            if q.x < x {
                inside = !inside;
            }
        }
    }
    inside
}

pub fn distance_to_polyline(q: PhasePoint, poly: &[PhasePoint], closed: bool) -> f64 {
    let n = poly.len();
    let edges = if closed { n } else { n.saturating_sub(1) };
    (0..edges)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            let (dx, dz) = (b.x - a.x, b.z - a.z);
            let len2 = dx * dx + dz * dz;
            let t = if len2 == 0.0 {
                0.0
            } else {
                (((q.x - a.x) * dx + (q.z - a.z) * dz) / len2).clamp(0.0, 1.0)
            };
            PhasePoint::new(a.x + t * dx, a.z + t * dz).dist(&q)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Closed barrier made of Γ, the wall or a link to `A₀`, and both axes.
pub fn barrier_polygon(p: f64, params: &ProblemParams, class: PClass, budget: &Budget) -> Result<Vec<PhasePoint>, ClassifyError> {
    let n0 = stationary::location(StationaryLabel::N0, p, params);
    let a0 = stationary::location(StationaryLabel::A0, p, params);
    let mut poly = vec![PhasePoint::new(0.0, 0.0), n0];
    match class {
        PClass::C => {
            let opts = FlowOptions {
                horizon: budget.horizon,
                max_steps: budget.max_steps,
                capture: false,
                stop_on: vec![EventKind::WallCross],
                ..FlowOptions::default()
            };
            let traj = integrate(gamma_seed(p, params), p, params, Direction::Forward, &opts)?;
            if traj.halt != Halt::Stopped(EventKind::WallCross) {
                return Err(ClassifyError::Unresolved {
                    p,
                    note: "Γ did not reach the wall".to_string(),
                });
            }
            poly.extend(traj.samples.iter().map(|s| s.point));
        }
        _ => {
            let (pts, _) = gamma_truncated_at_a0(p, params, budget)?;
            poly.extend(pts);
        }
    }
    poly.push(a0);
    Ok(poly)
}

/// Verdict on positive radial solutions outside a ball that vanish on its boundary.
pub fn exterior_nonexistence_check(
    p: f64,
    params: &ProblemParams,
    critical: Option<&CriticalResult>,
    budget: &Budget,
) -> Result<ExteriorReport, ClassifyError> {
    let at_critical = critical.is_some_and(|c| (p - c.p_star).abs() <= c.tol.max(c.bracket.1 - c.bracket.0));
    let class = if at_critical {
        PClass::F
    } else {
        classify_p_with(p, params, budget)?.class
    };
    if matches!(class, PClass::P | PClass::S) {
        return Ok(ExteriorReport {
            p,
            verdict: ExteriorVerdict::OutOfScope,
            class,
            evidence: None,
        });
    }
    let poly = barrier_polygon(p, params, class, budget)?;
    let m0_inside = stationary::m0_in_first_quadrant(p, params)
        .then(|| point_in_polygon(stationary::location(StationaryLabel::M0, p, params), &poly));
    let a0 = stationary::location(StationaryLabel::A0, p, params);
    let a0_in_closure = point_in_polygon(a0, &poly) || distance_to_polyline(a0, &poly, true) <= capture_radius(a0);

    let mut cycles_inside = Vec::new();
    if stationary::m0_in_first_quadrant(p, params) {
        if let Ok(o) = flow::find_periodic_orbit(p, params, None) {
            cycles_inside.push(o.points.iter().all(|q| point_in_polygon(*q, &poly)));
        }
    }

    // exterior solutions enter the first quadrant from Z = +∞ next to the Z axis
    let height = 2.0 * params.n0_height();
    let probes: Vec<PhasePoint> = [1e-3, 1e-2, 0.05, 0.1, 0.2]
        .iter()
        .map(|f| PhasePoint::new(f * params.wall(), height))
        .collect();
    let outer_point_outside = probes.iter().all(|q| !point_in_polygon(*q, &poly));
    let mut probe_fates = Vec::new();
    for q in &probes {
        let fate = trace(*q, p, params, Direction::Forward, budget)?.fate;
        probe_fates.push(fate.verdict.name());
    }
    let probes_blow_up = probe_fates.iter().all(|f| f == "BlowUpX");
    let evidence = BarrierEvidence {
        vertices: poly.len(),
        m0_inside,
        a0_in_closure,
        cycles_inside,
        outer_point_outside,
        probe_fates,
        probes_blow_up,
    };
    let verdict = if evidence.passes() {
        ExteriorVerdict::Nonexistence
    } else {
        return Err(ClassifyError::Unresolved {
            p,
            note: format!("barrier evidence failed: {evidence:?}"),
        });
    };
    Ok(ExteriorReport {
        p,
        verdict,
        class,
        evidence: Some(evidence),
    })
}

/// Hausdorff distance between two polylines, using their vertices.
pub fn hausdorff(a: &[PhasePoint], b: &[PhasePoint]) -> f64 {
    let one = |u: &[PhasePoint], v: &[PhasePoint]| {
        u.iter()
            .map(|q| distance_to_polyline(*q, v, false))
            .fold(0.0, f64::max)
    };
    one(a, b).max(one(b, a))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lap(n: u32) -> ProblemParams {
        ProblemParams::laplacian(n, 0.0).unwrap()
    }

    #[test]
    fn laplacian_classes_around_sobolev() {
        let pr = lap(3);
        assert_eq!(classify_p(4.0, &pr).unwrap().class, PClass::C);
        assert_eq!(classify_p(5.0, &pr).unwrap().class, PClass::F);
        assert_eq!(classify_p(7.0, &pr).unwrap().class, PClass::S);
        let c = classify_p(4.0, &pr).unwrap();
        assert!(c.wall_radius.unwrap() > 1.0);
    }

    #[test]
    fn gamma_starts_moving_right_and_down() {
        let pr = ProblemParams::new(1.0, 2.0, Operator::MPlus, 4, 0.0).unwrap();
        let traced = gamma_orbit(6.0, &pr, &Budget::default()).unwrap();
        let s = &traced.trajectory.samples;
        assert!(s[1].point.x > s[0].point.x && s[1].point.z < s[0].point.z);
        assert_eq!(s[0].region, crate::field::Region::RPlus);
    }

    #[test]
    fn upsilon_needs_a_saddle() {
        let pr = lap(3);
        assert!(matches!(upsilon_seed(3.0, &pr), Err(ClassifyError::SaddleUnavailable { .. })));
        let seed = upsilon_seed(4.0, &pr).unwrap();
        assert!(seed.z > 0.0 && seed.x < 1.0);
    }

    #[test]
    fn polygon_membership() {
        let sq = [
            PhasePoint::new(0.0, 0.0),
            PhasePoint::new(1.0, 0.0),
            PhasePoint::new(1.0, 1.0),
            PhasePoint::new(0.0, 1.0),
        ];
        assert!(point_in_polygon(PhasePoint::new(0.5, 0.5), &sq));
        assert!(point_in_polygon(PhasePoint::new(1.0, 0.5), &sq));
        assert!(!point_in_polygon(PhasePoint::new(1.5, 0.5), &sq));
        assert!((distance_to_polyline(PhasePoint::new(2.0, 0.5), &sq, true) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sweep_keeps_input_order() {
        let pr = lap(3);
        let ps = [7.0, 4.0, 6.0, 4.5];
        let rows = sweep(&pr, &ps, 3, &Budget::default());
        let got: Vec<f64> = rows.iter().map(|r| r.p).collect();
        assert_eq!(got, ps);
        assert_eq!(rows[1].class, Some(PClass::C));
    }
}
