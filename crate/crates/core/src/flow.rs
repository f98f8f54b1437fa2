//! Event-aware integration of the phase-plane systems, orbit fates and periodic orbits.
//!
//! The integrator always advances one polynomial branch at a time. A crossing of the
//! concavity line is localised on the dense output, the step is cut there and the
//! integration restarts on the other branch, so no step ever straddles the kink.

use serde::Serialize;
use thiserror::Error;

use crate::field::{
    branch_field, branch_of, piece, region_of, x_bracket, z_bracket, Branch, PhasePoint, Region, TAU_LINE,
};
use crate::ode::{brent_root, Dopri5, OdeError, State, Step, Tolerance};
use crate::params::ProblemParams;
use crate::stationary::{self, StabilityClass, StationaryLabel};

/// Event localisation tolerance in time.
pub const TAU_EVENT: f64 = 1e-12;
/// Fixed-point tolerance of the return map, in section coordinate.
pub const TAU_ORBIT: f64 = 1e-9;
pub const DEFAULT_HORIZON: f64 = 500.0;
pub const DEFAULT_MAX_STEPS: usize = 10_000_000;
/// Time window over which a capture must show contraction.
pub const CAPTURE_WINDOW: f64 = 5.0;

const PROBES: usize = 6;
const BLOWUP_FINAL: f64 = 1e6;
const LOOP_HORIZON: f64 = 200.0;
const SCAN_RATIO: f64 = 0.7;
const SETTLE_FACTOR: f64 = 1e-3;

pub fn capture_radius(loc: PhasePoint) -> f64 {
    1e-6 * (1.0 + loc.norm())
}

/// Abscissa past which an orbit moving right is declared to blow up.
pub fn x_threshold(params: &ProblemParams) -> f64 {
    1.5 * params.wall()
}

/// Height past which an orbit moving up (backward in time) is declared to blow up.
pub fn z_cap(params: &ProblemParams) -> f64 {
    10.0 * (params.concavity_level() + params.n0_height())
}

/// Smallest section coordinate at which a cycle is still distinguished from `M₀`.
fn section_floor(anchor: PhasePoint) -> f64 {
    1e-4 * (1.0 + anchor.norm())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Direction::Forward => "forward",
            Direction::Backward => "backward",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum EventKind {
    ConcavityCross,
    XNullclineCross,
    ZNullclineCross,
    WallCross,
    StationaryCapture,
    SectionCross,
    BlowUpX,
    BlowUpZ,
}

impl EventKind {
    pub fn name(self) -> &'static str {
        match self {
            EventKind::ConcavityCross => "ConcavityCross",
            EventKind::XNullclineCross => "XNullclineCross",
            EventKind::ZNullclineCross => "ZNullclineCross",
            EventKind::WallCross => "WallCross",
            EventKind::StationaryCapture => "StationaryCapture",
            EventKind::SectionCross => "SectionCross",
            EventKind::BlowUpX => "BlowUpX",
            EventKind::BlowUpZ => "BlowUpZ",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Event {
    pub kind: EventKind,
    pub t: f64,
    pub point: PhasePoint,
    pub detail: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sample {
    pub t: f64,
    pub point: PhasePoint,
    pub region: Region,
}

/// Why an integration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Halt {
    Captured(StationaryLabel),
    BlowUp { kind: EventKind, time: f64 },
    Stopped(EventKind),
    Horizon,
    StepBudget,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub events: Vec<Event>,
    pub direction: Direction,
    pub halt: Halt,
}

impl Trajectory {
    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectories hold at least the start sample")
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }

    pub fn points(&self) -> Vec<PhasePoint> {
        self.samples.iter().map(|s| s.point).collect()
    }

    pub fn first_event(&self, kind: EventKind) -> Option<&Event> {
        self.events.iter().find(|e| e.kind == kind)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlowError {
    #[error("start point ({x}, {z}) lies outside the first and third quadrants")]
    OutsideDomain { x: f64, z: f64 },
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error("orbit did not return to the section ({0})")]
    NoReturn(String),
    #[error("section start must lie strictly above the anchor (s={0})")]
    InvalidSectionStart(f64),
    #[error("no periodic orbit found: {0}")]
    NoCycleFound(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowOptions {
    pub tol: Tolerance,
    pub horizon: f64,
    pub max_steps: usize,
    pub max_step: f64,
    /// Extra dense-output samples stored inside each step.
    pub dense_samples: usize,
    pub capture: bool,
    /// Keep integrating after capture at an attracting point until much closer.
    pub settle: bool,
    pub blowup: bool,
    /// Base point of the vertical section ray `X = x₀, Z > z₀`.
    pub section: Option<PhasePoint>,
    pub stop_on: Vec<EventKind>,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            tol: Tolerance::default(),
            horizon: DEFAULT_HORIZON,
            max_steps: DEFAULT_MAX_STEPS,
            max_step: 0.5,
            dense_samples: 3,
            capture: true,
            settle: true,
            blowup: true,
            section: None,
            stop_on: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Target {
    label: StationaryLabel,
    loc: PhasePoint,
    radius: f64,
    attracting: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Probe {
    Concavity,
    XNull,
    ZNull,
    Wall,
    Section,
}

#[derive(Debug, Clone)]
struct Hit {
    theta: f64,
    kind: EventKind,
    detail: String,
}

fn rhs(params: &ProblemParams, p: f64, sign: f64, branch: Branch) -> impl FnMut(f64, &State) -> State + '_ {
    move |_t, y| {
        let f = branch_field(PhasePoint::new(y[0], y[1]), p, params, branch);
        [sign * f[0], sign * f[1]]
    }
}

fn pt(y: &State) -> PhasePoint {
    PhasePoint::new(y[0], y[1])
}

struct Tracer<'a> {
    params: &'a ProblemParams,
    p: f64,
    dir: Direction,
    sign: f64,
    opts: &'a FlowOptions,
    first: bool,
    branch: Branch,
    ode: Dopri5,
    tau: f64,
    samples: Vec<Sample>,
    events: Vec<Event>,
    targets: Vec<Target>,
    steps: usize,
    settling: Option<usize>,
    blowing: Option<EventKind>,
    halt: Option<Halt>,
}

impl<'a> Tracer<'a> {
    fn new(
        start: PhasePoint,
        p: f64,
        params: &'a ProblemParams,
        dir: Direction,
        opts: &'a FlowOptions,
    ) -> Result<Self, FlowError> {
        let PhasePoint { x, z } = start;
        let branch = branch_of(start, params).map_err(|_| FlowError::OutsideDomain { x, z })?;
        let first = branch != Branch::Third;
        let sign = dir.sign();
        let level = params.concavity_level();
        let on_concavity = first && x > 0.0 && (z - level).abs() <= TAU_LINE * level;
        let branch = if on_concavity {
            let zdot = sign * z * (1.0 + params.a() - p * x);
            if zdot > 0.0 {
                Branch::Upper
            } else {
                Branch::Lower
            }
        } else {
            branch
        };
        let y0 = [x, z];
        let ode = Dopri5::new(&mut rhs(params, p, sign, branch), 0.0, y0, opts.tol, opts.max_step);

        let mut targets = Vec::new();
        if first {
            for sp in stationary::stationary_points(p, params) {
                if !sp.in_first_quadrant {
                    continue;
                }
                let attracting = match (sp.classification, dir) {
                    (StabilityClass::Sink, Direction::Forward) => true,
                    (StabilityClass::Source, Direction::Backward) => true,
                    _ => false,
                };
                targets.push(Target {
                    label: sp.label,
                    loc: sp.location,
                    radius: capture_radius(sp.location),
                    attracting,
                });
            }
        }

        let mut tr = Tracer {
            params,
            p,
            dir,
            sign,
            opts,
            first,
            branch,
            ode,
            tau: 0.0,
            samples: vec![Sample {
                t: 0.0,
                point: start,
                region: region_of(start, params),
            }],
            events: Vec::new(),
            targets,
            steps: 0,
            settling: None,
            blowing: None,
            halt: None,
        };
        tr.initial_events(start);
        Ok(tr)
    }

    fn initial_events(&mut self, start: PhasePoint) {
        let params = self.params;
        let f = branch_field(start, self.p, params, self.branch);
        if f == [0.0, 0.0] {
            let label = stationary::StationaryLabel::ALL
                .iter()
                .copied()
                .min_by(|a, b| {
                    let da = stationary::location(*a, self.p, params).dist(&start);
                    let db = stationary::location(*b, self.p, params).dist(&start);
                    da.partial_cmp(&db).unwrap()
                })
                .unwrap();
            self.push_event(EventKind::StationaryCapture, 0.0, start, Some(label.name().to_string()));
            self.halt = Some(Halt::Captured(label));
            return;
        }
        if !self.first {
            return;
        }
        let level = params.concavity_level();
        let join_x = (1.0 + params.a()) / self.p;
        let on_concavity = start.x > 0.0 && (start.z - level).abs() <= TAU_LINE * level;
        let at_join = on_concavity && (start.x - join_x).abs() <= 1e-9 * (1.0 + join_x);
        let tag = |s: &str| Some(if at_join { "at P".to_string() } else { s.to_string() });
        if on_concavity {
            let into = match self.branch {
                Branch::Upper => "start->RPlus",
                _ => "start->RMinus",
            };
            self.push_event(EventKind::ConcavityCross, 0.0, start, tag(into));
        }
        let scale = 1.0 + start.norm();
        if start.z > 0.0 && z_bracket(start, self.p, params, self.branch).abs() <= 1e-12 * scale {
            self.push_event(EventKind::ZNullclineCross, 0.0, start, tag("start"));
        }
        if start.x > 0.0 && x_bracket(start, params, self.branch).abs() <= 1e-12 * scale {
            self.push_event(EventKind::XNullclineCross, 0.0, start, tag("start"));
        }
    }

    fn t_of(&self, tau: f64) -> f64 {
        self.sign * tau
    }

    fn push_event(&mut self, kind: EventKind, tau: f64, point: PhasePoint, detail: Option<String>) {
        self.events.push(Event {
            kind,
            t: self.t_of(tau),
            point,
            detail,
        });
    }

    fn push_sample(&mut self, tau: f64, point: PhasePoint) {
        let region = region_of(point, self.params);
        self.samples.push(Sample {
            t: self.t_of(tau),
            point,
            region,
        });
    }

    fn probe(&self, probe: Probe, y: &State) -> f64 {
        let q = pt(y);
        match probe {
            Probe::Concavity => {
                let side = if self.branch == Branch::Upper { 1.0 } else { -1.0 };
                side * (y[1] - self.params.concavity_level())
            }
            Probe::XNull => x_bracket(q, self.params, self.branch),
            Probe::ZNull => z_bracket(q, self.p, self.params, self.branch),
            Probe::Wall => y[0] - self.params.wall(),
            Probe::Section => y[0] - self.opts.section.map_or(0.0, |a| a.x),
        }
    }

    /// Signed rate of change of the concavity probe along the integration direction.
    fn concavity_rate(&self, y: &State) -> f64 {
        let side = if self.branch == Branch::Upper { 1.0 } else { -1.0 };
        side * self.sign * branch_field(pt(y), self.p, self.params, self.branch)[1]
    }

    fn root(&self, probe: Probe, step: &Step, a: f64, b: f64, fa: f64, fb: f64) -> f64 {
        let xtol = TAU_EVENT / step.h().abs().max(1e-300);
        brent_root(|th| self.probe(probe, &step.dense(th)), a, b, fa, fb, xtol)
    }

    fn concavity_hit(&self, step: &Step, thetas: &[f64], ys: &[State]) -> Option<f64> {
        let vals: Vec<f64> = ys.iter().map(|y| self.probe(Probe::Concavity, y)).collect();
        let min_theta = 1e-12 / step.h().abs().max(1e-300);
        for j in 0..PROBES {
            let (a, b) = (thetas[j], thetas[j + 1]);
            let (fa, fb) = (vals[j], vals[j + 1]);
            if fa >= 0.0 && fb < 0.0 {
                let r = self.root(Probe::Concavity, step, a, b, fa, fb);
                if r > min_theta {
                    return Some(r);
                }
            } else if fa > 0.0 && fb > 0.0 {
                // a brief excursion to the other side between two probes
                let (da, db) = (self.concavity_rate(&ys[j]), self.concavity_rate(&ys[j + 1]));
                if da < 0.0 && db > 0.0 {
                    let rate = |th: f64| self.concavity_rate(&step.dense(th));
                    let tm = brent_root(rate, a, b, da, db, 1e-14);
                    let fm = self.probe(Probe::Concavity, &step.dense(tm));
                    if fm < 0.0 {
                        let r = self.root(Probe::Concavity, step, a, tm, fa, fm);
                        if r > min_theta {
                            return Some(r);
                        }
                    }
                }
            }
        }
        None
    }

    fn scan(&self, step: &Step) -> (Vec<Hit>, Option<f64>) {
        let thetas: Vec<f64> = (0..=PROBES).map(|j| j as f64 / PROBES as f64).collect();
        let ys: Vec<State> = thetas
            .iter()
            .enumerate()
            .map(|(j, &th)| match j {
                0 => step.y0,
                j if j == PROBES => step.y1,
                _ => step.dense(th),
            })
            .collect();
        let mut hits = Vec::new();
        let mut cut: Option<f64> = None;
        if !self.first {
            return (hits, cut);
        }
        if let Some(th) = self.concavity_hit(step, &thetas, &ys) {
            let detail = match self.branch {
                Branch::Upper => "RPlus->RMinus",
                _ => "RMinus->RPlus",
            };
            hits.push(Hit {
                theta: th,
                kind: EventKind::ConcavityCross,
                detail: detail.to_string(),
            });
            cut = Some(th);
        }
        let mut probes = vec![
            (Probe::XNull, EventKind::XNullclineCross),
            (Probe::ZNull, EventKind::ZNullclineCross),
            (Probe::Wall, EventKind::WallCross),
        ];
        if self.opts.section.is_some() {
            probes.push((Probe::Section, EventKind::SectionCross));
        }
        for (probe, kind) in probes {
            let vals: Vec<f64> = ys.iter().map(|y| self.probe(probe, y)).collect();
            for j in 0..PROBES {
                let (fa, fb) = (vals[j], vals[j + 1]);
                let crosses = (fa < 0.0 && fb >= 0.0 && fb != fa) || (fa > 0.0 && fb <= 0.0);
                if !crosses || (fb == 0.0 && j + 1 < PROBES) {
                    continue;
                }
                let th = self.root(probe, step, thetas[j], thetas[j + 1], fa, fb);
                if th == 0.0 {
                    continue;
                }
                let y = step.dense(th);
                let rising = fb > fa;
                let detail = match probe {
                    Probe::XNull if y[0] > 0.0 => {
                        if rising { "below->above" } else { "above->below" }
                    }
                    Probe::ZNull if y[1] > 0.0 => {
                        if rising { "above->below" } else { "below->above" }
                    }
                    Probe::Wall => {
                        if rising { "outward" } else { "inward" }
                    }
                    Probe::Section => {
                        let anchor = self.opts.section.unwrap();
                        let oriented = if rising { 1.0 } else { -1.0 } == self.sign;
                        if y[1] <= anchor.z || !oriented {
                            continue;
                        }
                        if rising { "rightward" } else { "leftward" }
                    }
                    _ => continue,
                };
                hits.push(Hit {
                    theta: th,
                    kind,
                    detail: detail.to_string(),
                });
            }
        }
        for h in &hits {
            if self.opts.stop_on.contains(&h.kind) && cut.is_none_or(|c| h.theta < c) {
                cut = Some(h.theta);
            }
        }
        if let Some(c) = cut {
            hits.retain(|h| h.theta <= c);
        }
        hits.sort_by(|a, b| a.theta.partial_cmp(&b.theta).unwrap());
        (hits, cut)
    }

    fn advance(&mut self) -> Result<Option<Halt>, FlowError> {
        if let Some(h) = self.halt {
            return Ok(Some(h));
        }
        if self.tau >= self.opts.horizon {
            // already inside the capture radius and contracting
            if let Some(idx) = self.settling {
                let tg = self.targets[idx];
                let y = self.samples.last().unwrap().point;
                self.finish_capture(tg.label, y);
            } else {
                self.halt = Some(Halt::Horizon);
            }
            return Ok(self.halt);
        }
        if self.steps >= self.opts.max_steps {
            self.halt = Some(Halt::StepBudget);
            return Ok(self.halt);
        }
        let rem = self.opts.horizon - self.tau;
        if self.ode.h() > rem {
            self.ode.set_h(rem);
        }
        let params = self.params;
        let step = {
            let mut f = rhs(params, self.p, self.sign, self.branch);
            self.ode.step(&mut f)?
        };
        self.steps += 1;
        let (hits, cut) = self.scan(&step);
        let end_theta = cut.unwrap_or(1.0);
        let h = step.h();

        let k = self.opts.dense_samples;
        let mut dense: Vec<f64> = (1..=k)
            .map(|i| i as f64 / (k + 1) as f64)
            .filter(|&th| th < end_theta)
            .collect();
        dense.retain(|th| hits.iter().all(|hit| (hit.theta - th).abs() > 1e-12));
        let mut hi = 0;
        for th in dense {
            while hi < hits.len() && hits[hi].theta < th {
                self.record_hit(&step, &hits[hi]);
                hi += 1;
            }
            let y = step.dense(th);
            self.push_sample(step.t0 + th * h, pt(&y));
        }
        while hi < hits.len() {
            self.record_hit(&step, &hits[hi]);
            hi += 1;
        }

        if let Some(c) = cut {
            let tau = step.t0 + c * h;
            self.tau = tau;
            let last = hits.last().expect("a cut always comes from a hit");
            if last.kind == EventKind::ConcavityCross {
                self.branch = match self.branch {
                    Branch::Upper => Branch::Lower,
                    _ => Branch::Upper,
                };
                let y = self.samples.last().unwrap().point;
                let mut f = rhs(params, self.p, self.sign, self.branch);
                self.ode.reset(&mut f, tau, [y.x, y.z]);
            } else {
                self.halt = Some(Halt::Stopped(last.kind));
                return Ok(self.halt);
            }
        } else {
            self.tau = step.t1;
            self.push_sample(step.t1, pt(&step.y1));
            self.fix_side();
        }
        self.check_capture();
        if self.halt.is_none() && self.opts.blowup {
            self.check_blowup();
        }
        Ok(self.halt)
    }

    fn record_hit(&mut self, step: &Step, hit: &Hit) {
        let mut y = step.dense(hit.theta);
        if hit.kind == EventKind::ConcavityCross {
            y[1] = self.params.concavity_level();
        }
        let tau = step.t0 + hit.theta * step.h();
        self.push_event(hit.kind, tau, pt(&y), Some(hit.detail.clone()));
        self.push_sample(tau, pt(&y));
    }

    /// Switch branch if a step ended on the wrong side of the concavity line.
    fn fix_side(&mut self) {
        if !self.first {
            return;
        }
        let y = self.samples.last().unwrap().point;
        let level = self.params.concavity_level();
        let wrong = match self.branch {
            Branch::Upper => y.z < level - TAU_LINE * level,
            _ => y.z > level + TAU_LINE * level,
        };
        if !wrong {
            return;
        }
        let detail = match self.branch {
            Branch::Upper => "RPlus->RMinus",
            _ => "RMinus->RPlus",
        };
        self.push_event(EventKind::ConcavityCross, self.tau, y, Some(detail.to_string()));
        self.branch = match self.branch {
            Branch::Upper => Branch::Lower,
            _ => Branch::Upper,
        };
        let mut f = rhs(self.params, self.p, self.sign, self.branch);
        self.ode.reset(&mut f, self.tau, [y.x, y.z]);
    }

    fn distance_back(&self, loc: PhasePoint, window: f64) -> Option<f64> {
        let target = self.tau - window;
        if target < 0.0 {
            return None;
        }
        let sign = self.sign;
        let i = self.samples.partition_point(|s| sign * s.t < target);
        self.samples.get(i).map(|s| s.point.dist(&loc))
    }

    fn check_capture(&mut self) {
        if !self.opts.capture || !self.first {
            return;
        }
        let y = self.samples.last().unwrap().point;
        if let Some(idx) = self.settling {
            let tg = self.targets[idx];
            if y.dist(&tg.loc) < SETTLE_FACTOR * tg.radius {
                self.finish_capture(tg.label, y);
            }
            return;
        }
        for idx in 0..self.targets.len() {
            let tg = self.targets[idx];
            let d = y.dist(&tg.loc);
            if d >= tg.radius {
                continue;
            }
            let Some(d_before) = self.distance_back(tg.loc, CAPTURE_WINDOW) else {
                continue;
            };
            if d < d_before {
                if tg.attracting && self.opts.settle {
                    self.settling = Some(idx);
                    if d < SETTLE_FACTOR * tg.radius {
                        self.finish_capture(tg.label, y);
                    }
                } else {
                    self.finish_capture(tg.label, y);
                }
                return;
            }
        }
    }

    fn finish_capture(&mut self, label: StationaryLabel, y: PhasePoint) {
        self.push_event(EventKind::StationaryCapture, self.tau, y, Some(label.name().to_string()));
        self.halt = Some(Halt::Captured(label));
    }

    fn check_blowup(&mut self) {
        let y = self.samples.last().unwrap().point;
        let f = branch_field(y, self.p, self.params, self.branch);
        let (xd, zd) = (self.sign * f[0], self.sign * f[1]);
        let xcap = x_threshold(self.params);
        let zcap = z_cap(self.params);
        if self.blowing.is_none() {
            let kind = if self.first {
                if y.x >= xcap && xd > 0.0 {
                    Some(EventKind::BlowUpX)
                } else if y.z >= zcap && zd > 0.0 {
                    Some(EventKind::BlowUpZ)
                } else {
                    None
                }
            } else if y.z <= -zcap && zd < 0.0 {
                Some(EventKind::BlowUpZ)
            } else if y.x <= -xcap.max(1.0) && xd < 0.0 {
                Some(EventKind::BlowUpX)
            } else {
                None
            };
            if let Some(kind) = kind {
                self.blowing = Some(kind);
                self.push_event(kind, self.tau, y, Some("threshold".to_string()));
            }
        }
        let Some(kind) = self.blowing else {
            return;
        };
        let size = match kind {
            EventKind::BlowUpX => y.x.abs(),
            _ => y.z.abs(),
        };
        if size < BLOWUP_FINAL {
            return;
        }
        let pc = piece(self.params, self.branch);
        let remaining = match kind {
            EventKind::BlowUpX if self.first => {
                let c = pc.d - 2.0;
                -(1.0 - c / y.x).ln() / c
            }
            EventKind::BlowUpX => 1.0 / y.x.abs(),
            _ if self.first => {
                let m = pc.d + self.params.a() - self.p * y.x;
                if m > 0.0 {
                    (1.0 / (1.0 - m * pc.kappa / y.z)).ln() / m
                } else {
                    pc.kappa / y.z
                }
            }
            _ => pc.kappa / y.z.abs(),
        };
        let time = self.t_of(self.tau + remaining);
        self.halt = Some(Halt::BlowUp { kind, time });
    }

    fn run(&mut self) -> Result<Halt, FlowError> {
        loop {
            if let Some(h) = self.advance()? {
                return Ok(h);
            }
        }
    }

    fn into_trajectory(self) -> Trajectory {
        Trajectory {
            samples: self.samples,
            events: self.events,
            direction: self.dir,
            halt: self.halt.unwrap_or(Halt::Horizon),
        }
    }
}

/// Integrates from `start` until capture, blow-up, a stop event, or the horizon.
pub fn integrate(
    start: PhasePoint,
    p: f64,
    params: &ProblemParams,
    direction: Direction,
    opts: &FlowOptions,
) -> Result<Trajectory, FlowError> {
    let mut tr = Tracer::new(start, p, params, direction, opts)?;
    tr.run()?;
    Ok(tr.into_trajectory())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodicOrbit {
    pub points: Vec<PhasePoint>,
    pub period: f64,
    pub section_anchor: PhasePoint,
    /// Height of the orbit's crossing above the anchor on the section ray.
    pub section_s: f64,
    pub closure_gap: f64,
    pub xz_min: f64,
    pub xz_max: f64,
    pub crosses_concavity: bool,
    pub concavity_crossings: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Verdict {
    ToStationary(StationaryLabel),
    ToPeriodicOrbit(Box<PeriodicOrbit>),
    BlowUpX,
    BlowUpZ,
    Undetermined,
}

impl Verdict {
    pub fn name(&self) -> String {
        match self {
            Verdict::ToStationary(l) => format!("ToStationary({})", l.name()),
            Verdict::ToPeriodicOrbit(_) => "ToPeriodicOrbit".to_string(),
            Verdict::BlowUpX => "BlowUpX".to_string(),
            Verdict::BlowUpZ => "BlowUpZ".to_string(),
            Verdict::Undetermined => "Undetermined".to_string(),
        }
    }
}

/// Scalars backing a verdict.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Certificate {
    pub final_distance: Option<f64>,
    pub return_gap: Option<f64>,
    pub threshold: Option<f64>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrbitFate {
    pub verdict: Verdict,
    pub blowup_time: Option<f64>,
    pub certificate: Certificate,
    pub t_end: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Budget {
    pub horizon: f64,
    pub max_steps: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Self {
            horizon: DEFAULT_HORIZON,
            max_steps: DEFAULT_MAX_STEPS,
        }
    }
}

impl Budget {
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            horizon: self.horizon * factor,
            max_steps: (self.max_steps as f64 * factor) as usize,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Traced {
    pub trajectory: Trajectory,
    pub fate: OrbitFate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Return {
    pub s: f64,
    pub period: f64,
}

/// First return to the ray `X = anchor.x, Z > anchor.z` starting at height `s` above the anchor.
pub fn poincare_map(
    anchor: PhasePoint,
    s: f64,
    p: f64,
    params: &ProblemParams,
    direction: Direction,
) -> Result<Return, FlowError> {
    let traj = loop_once(anchor, s, p, params, direction, 0)?;
    let ev = traj.events.last().unwrap();
    Ok(Return {
        s: ev.point.z - anchor.z,
        period: ev.t.abs(),
    })
}

fn loop_once(
    anchor: PhasePoint,
    s: f64,
    p: f64,
    params: &ProblemParams,
    direction: Direction,
    dense_samples: usize,
) -> Result<Trajectory, FlowError> {
    if !(s > 0.0) {
        return Err(FlowError::InvalidSectionStart(s));
    }
    let opts = FlowOptions {
        horizon: LOOP_HORIZON,
        dense_samples,
        capture: false,
        section: Some(anchor),
        stop_on: vec![EventKind::SectionCross],
        ..FlowOptions::default()
    };
    let start = PhasePoint::new(anchor.x, anchor.z + s);
    let traj = integrate(start, p, params, direction, &opts)?;
    match traj.halt {
        Halt::Stopped(EventKind::SectionCross) => Ok(traj),
        other => Err(FlowError::NoReturn(format!("{other:?}"))),
    }
}

/// Closed orbit through height `s` on the section, traced forward once.
pub fn periodic_orbit_through(
    anchor: PhasePoint,
    s: f64,
    p: f64,
    params: &ProblemParams,
) -> Result<PeriodicOrbit, FlowError> {
    let traj = loop_once(anchor, s, p, params, Direction::Forward, 7)?;
    let points = traj.points();
    let first = points[0];
    let last = *points.last().unwrap();
    let xz: Vec<f64> = points.iter().map(|q| q.x * q.z).collect();
    let crossings = traj.count(EventKind::ConcavityCross);
    Ok(PeriodicOrbit {
        period: traj.last().t.abs(),
        section_anchor: anchor,
        section_s: s,
        closure_gap: first.dist(&last),
        xz_min: xz.iter().cloned().fold(f64::INFINITY, f64::min),
        xz_max: xz.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        crosses_concavity: crossings > 0,
        concavity_crossings: crossings,
        points,
    })
}

/// Outcome of evaluating `P(s) − s`.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Gap {
    Value(f64),
    Escapes,
}

fn gap(anchor: PhasePoint, s: f64, p: f64, params: &ProblemParams, dir: Direction) -> Gap {
    match poincare_map(anchor, s, p, params, dir) {
        Ok(r) => Gap::Value(r.s - s),
        Err(_) => Gap::Escapes,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Drift {
    /// Still drifting in the observed direction.
    Moving,
    /// Returns with a gap of the other sign or within tolerance.
    Settled,
    Escapes,
}

/// Searches for the nearest fixed point of the return map on one side of `s_start`.
///
/// `inward = true` looks below `s_start` (orbits there drift down), otherwise above.
fn search_cycle(
    anchor: PhasePoint,
    s_start: f64,
    inward: bool,
    p: f64,
    params: &ProblemParams,
    dir: Direction,
) -> Option<f64> {
    let floor = section_floor(anchor);
    let top = params.n0_height() - anchor.z;
    let drift = |s: f64| match gap(anchor, s, p, params, dir) {
        Gap::Value(v) if (inward && v < -TAU_ORBIT) || (!inward && v > TAU_ORBIT) => Drift::Moving,
        Gap::Value(_) => Drift::Settled,
        Gap::Escapes => Drift::Escapes,
    };
    match drift(s_start) {
        Drift::Settled => return Some(s_start),
        Drift::Escapes => return None,
        Drift::Moving => {}
    }
    let mut moving = s_start;
    let mut j = 0;
    let (mut other, mut other_state) = loop {
        j += 1;
        let s = if inward {
            s_start * SCAN_RATIO.powi(j)
        } else {
            top - (top - s_start) * SCAN_RATIO.powi(j)
        };
        if s < floor || (!inward && top - s < floor) || j > 200 {
            return None;
        }
        match drift(s) {
            Drift::Moving => moving = s,
            st => break (s, st),
        }
    };
    while (moving - other).abs() > 1e-11 * (1.0 + s_start) {
        let mid = 0.5 * (moving + other);
        match drift(mid) {
            Drift::Moving => moving = mid,
            st => {
                other = mid;
                other_state = st;
            }
        }
    }
    (other_state == Drift::Settled && other > floor).then_some(other)
}

/// Locates a periodic orbit around `M₀`; a seed height on the section is tried first.
pub fn find_periodic_orbit(
    p: f64,
    params: &ProblemParams,
    seed_hint: Option<f64>,
) -> Result<PeriodicOrbit, FlowError> {
    if !stationary::m0_in_first_quadrant(p, params) {
        return Err(FlowError::NoCycleFound(format!(
            "M0 is outside the first quadrant for p={p}"
        )));
    }
    let anchor = stationary::location(StationaryLabel::M0, p, params);
    let dir = Direction::Forward;
    if let Some(s) = seed_hint {
        if let Gap::Value(g) = gap(anchor, s, p, params, dir) {
            if g.abs() <= TAU_ORBIT {
                return periodic_orbit_through(anchor, s, p, params);
            }
            if let Some(sc) = search_cycle(anchor, s, g < 0.0, p, params, dir) {
                return periodic_orbit_through(anchor, sc, p, params);
            }
        }
    }
    // global scan from the top of the a priori box downward
    let floor = section_floor(anchor);
    let top = params.n0_height() - anchor.z;
    let mut s = top * 0.98;
    let mut last: Option<(f64, f64)> = None;
    while s > floor {
        if let Gap::Value(g) = gap(anchor, s, p, params, dir) {
            if g.abs() <= TAU_ORBIT {
                return periodic_orbit_through(anchor, s, p, params);
            }
            if let Some((s_prev, g_prev)) = last {
                if g_prev.signum() != g.signum() {
                    let (mut hi, mut lo) = (s_prev, s);
                    let hi_sign = g_prev.signum();
                    while hi - lo > 1e-11 * (1.0 + top) {
                        let mid = 0.5 * (hi + lo);
                        match gap(anchor, mid, p, params, dir) {
                            Gap::Value(v) if v.abs() <= TAU_ORBIT => {
                                lo = mid;
                                break;
                            }
                            Gap::Value(v) if v.signum() == hi_sign => hi = mid,
                            _ => lo = mid,
                        }
                    }
                    return periodic_orbit_through(anchor, lo, p, params);
                }
            }
            last = Some((s, g));
        }
        s *= SCAN_RATIO;
    }
    Err(FlowError::NoCycleFound(format!(
        "return map has no fixed point on the section above M0 for p={p}"
    )))
}

/// Integrates and classifies the limit behaviour of the orbit through `start`.
pub fn trace(
    start: PhasePoint,
    p: f64,
    params: &ProblemParams,
    direction: Direction,
    budget: &Budget,
) -> Result<Traced, FlowError> {
    let first = start.x >= 0.0 && start.z >= 0.0;
    let anchor = (first && stationary::m0_in_first_quadrant(p, params))
        .then(|| stationary::location(StationaryLabel::M0, p, params));
    let opts = FlowOptions {
        horizon: budget.horizon,
        max_steps: budget.max_steps,
        section: anchor,
        ..FlowOptions::default()
    };
    let mut tr = Tracer::new(start, p, params, direction, &opts)?;
    let mut crossings: Vec<f64> = Vec::new();
    let mut scanned = false;
    let mut inward_without_cycle = false;
    let halt = loop {
        let before = tr.events.len();
        let halt = tr.advance()?;
        if let Some(a) = anchor {
            crossings.extend(
                tr.events[before..]
                    .iter()
                    .filter(|e| e.kind == EventKind::SectionCross)
                    .map(|e| e.point.z - a.z),
            );
        }
        if let Some(h) = halt {
            break h;
        }
        if let (Some(a), false, true) = (anchor, scanned, crossings.len() >= 2) {
            scanned = true;
            let k = crossings.len();
            let (prev, last) = (crossings[k - 2], crossings[k - 1]);
            let inward = last < prev;
            if let Some(s) = search_cycle(a, last, inward, p, params, direction) {
                let orbit = periodic_orbit_through(a, s, p, params)?;
                let t_end = tr.t_of(tr.tau);
                let certificate = Certificate {
                    return_gap: Some(orbit.closure_gap),
                    final_distance: Some(last - s),
                    note: format!("return map fixed point at s={s:.12e} below last crossing {last:.12e}"),
                    ..Certificate::default()
                };
                let fate = OrbitFate {
                    verdict: Verdict::ToPeriodicOrbit(Box::new(orbit)),
                    blowup_time: None,
                    certificate,
                    t_end,
                };
                tr.halt = Some(Halt::Stopped(EventKind::SectionCross));
                return Ok(Traced {
                    trajectory: tr.into_trajectory(),
                    fate,
                });
            }
            inward_without_cycle = inward;
        }
    };
    let end = tr.samples.last().unwrap().point;
    let t_end = tr.t_of(tr.tau);
    let fate = match halt {
        Halt::Captured(label) => OrbitFate {
            verdict: Verdict::ToStationary(label),
            blowup_time: None,
            certificate: Certificate {
                final_distance: Some(end.dist(&stationary::location(label, p, params))),
                note: "distance below capture radius and contracting".to_string(),
                ..Certificate::default()
            },
            t_end,
        },
        Halt::BlowUp { kind, time } => OrbitFate {
            verdict: if kind == EventKind::BlowUpX {
                Verdict::BlowUpX
            } else {
                Verdict::BlowUpZ
            },
            blowup_time: Some(time),
            certificate: Certificate {
                threshold: Some(if kind == EventKind::BlowUpX {
                    x_threshold(params)
                } else {
                    z_cap(params)
                }),
                note: "threshold crossed with growing coordinate".to_string(),
                ..Certificate::default()
            },
            t_end,
        },
        Halt::Horizon | Halt::StepBudget | Halt::Stopped(_) if inward_without_cycle => {
            let m0 = anchor.unwrap();
            OrbitFate {
                verdict: Verdict::ToStationary(StationaryLabel::M0),
                blowup_time: None,
                certificate: Certificate {
                    final_distance: Some(end.dist(&m0)),
                    note: "inward spiral and the return map has no fixed point below it".to_string(),
                    ..Certificate::default()
                },
                t_end,
            }
        }
        _ => OrbitFate {
            verdict: Verdict::Undetermined,
            blowup_time: None,
            certificate: Certificate {
                threshold: Some(budget.horizon),
                note: format!("budget exhausted: {halt:?}"),
                ..Certificate::default()
            },
            t_end,
        },
    };
    Ok(Traced {
        trajectory: tr.into_trajectory(),
        fate,
    })
}

pub fn detect_fate(
    start: PhasePoint,
    p: f64,
    params: &ProblemParams,
    direction: Direction,
    budget: &Budget,
) -> Result<OrbitFate, FlowError> {
    trace(start, p, params, direction, budget).map(|t| t.fate)
}

/// Whether every sample lies in the open a priori box `(0, Ñ−2) × (0, κ(N+a))`.
pub fn box_certificate(points: &[PhasePoint], params: &ProblemParams) -> bool {
    let (xmax, zmax) = (params.wall(), params.n0_height());
    points.iter().all(|q| q.x > 0.0 && q.x < xmax && q.z > 0.0 && q.z < zmax)
}
