//! Acceptance suite: one line per criterion, non-zero exit if any criterion fails.

use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::Matrix2;
use pucci_core::classify::{
    classify_p, critical_exponent, exterior_nonexistence_check, gamma_orbit, gamma_seed, gamma_truncated_at_a0,
    singular_catalog, sweep, CriticalResult, ExteriorVerdict, NearOrigin, Outer, PClass,
};
use pucci_core::field::{dulac_phi, region_of, PhasePoint, Region};
use pucci_core::flow::{
    box_certificate, integrate, periodic_orbit_through, poincare_map, Budget, Direction,
    EventKind, FlowOptions, Verdict,
};
use pucci_core::params::{Operator, ProblemParams};
use pucci_core::radial::{decay_constants, energy, shoot_regular, DecayClass, ShootOptions};
use pucci_core::stationary::{self, StabilityClass, StationaryLabel};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const CRITICAL_TOL: f64 = 1e-6;
const REDUCTION_TOL: f64 = 1e-3;
const REDUCTION_TIME: Duration = Duration::from_secs(60);
const BOUND_MARGIN: f64 = 0.01;
const EIGEN_TOL: f64 = 1e-12;
const FLIP_OFFSET: f64 = 1e-6;
const DULAC_ZERO: f64 = 1e-12;
const RETURN_TOL: f64 = 1e-7;
const ENERGY_DRIFT: f64 = 1e-6;
const MIN_CROSSINGS: usize = 10;
const SLOW_TOL: f64 = 1e-6;

type Outcome = Result<String, String>;

fn params(lambda: f64, big: f64, op: Operator, n: u32, a: f64) -> ProblemParams {
    ProblemParams::new(lambda, big, op, n, a).expect("valid parameters")
}

fn mplus() -> ProblemParams {
    params(1.0, 2.0, Operator::MPlus, 4, 0.0)
}

fn mminus() -> ProblemParams {
    params(1.0, 2.0, Operator::MMinus, 3, 0.0)
}

fn check(ok: bool, pass: String, fail: String) -> Outcome {
    if ok {
        Ok(pass)
    } else {
        Err(fail)
    }
}

fn critical(pr: &ProblemParams) -> Result<CriticalResult, String> {
    critical_exponent(pr, CRITICAL_TOL).map_err(|e| e.to_string())
}

fn laplacian_reduction() -> Outcome {
    let mut seen = Vec::new();
    for n in [3u32, 4, 5, 6] {
        let pr = ProblemParams::laplacian(n, 0.0).unwrap();
        let start = Instant::now();
        let res = critical(&pr)?;
        let took = start.elapsed();
        let want = (n as f64 + 2.0) / (n as f64 - 2.0);
        if (res.p_star - want).abs() >= REDUCTION_TOL || took >= REDUCTION_TIME {
            return Err(format!("N={n}: p*={} want {want}, {took:?}", res.p_star));
        }
        seen.push(format!("N={n}:{:.6}", res.p_star));
    }
    Ok(seen.join(" "))
}

fn henon_reduction() -> Outcome {
    let mut seen = Vec::new();
    for (a, want) in [(1.0, 7.0), (2.0, 9.0)] {
        let pr = ProblemParams::laplacian(3, a).unwrap();
        let res = critical(&pr)?;
        if (res.p_star - want).abs() >= REDUCTION_TOL {
            return Err(format!("a={a}: p*={} want {want}", res.p_star));
        }
        seen.push(format!("a={a}:{:.6}", res.p_star));
    }
    Ok(seen.join(" "))
}

fn strict_bounds(pr: &ProblemParams, lo: f64, hi: f64) -> Outcome {
    let res = critical(pr)?;
    let ok = res.p_star > lo + BOUND_MARGIN && res.p_star < hi - BOUND_MARGIN && res.bound_check.all();
    check(
        ok,
        format!("p*={:.6} in ({lo:.4}, {hi:.4}), bound_check all true", res.p_star),
        format!("p*={} bounds ({lo}, {hi}) check {:?}", res.p_star, res.bound_check),
    )
}

fn random_params(rng: &mut StdRng) -> ProblemParams {
    loop {
        let lambda = rng.random_range(0.3..1.5);
        let big = lambda * rng.random_range(1.0..3.0);
        let op = if rng.random_bool(0.5) { Operator::MPlus } else { Operator::MMinus };
        let n = rng.random_range(3..9);
        let a = if rng.random_bool(0.3) { 0.0 } else { rng.random_range(-0.5..3.0) };
        if let Ok(pr) = ProblemParams::new(lambda, big, op, n, a) {
            return pr;
        }
    }
}

fn eigen_closed_forms() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x5eed_0005);
    let mut compared = 0;
    for _ in 0..200 {
        let pr = random_params(&mut rng);
        let p = rng.random_range(1.05..1.5 * pr.p_pseudo());
        for sp in stationary::stationary_points(p, &pr) {
            if sp.label == StationaryLabel::M0 && !sp.in_first_quadrant {
                continue;
            }
            let j = sp.jacobian;
            let generic = Matrix2::new(j[0][0], j[0][1], j[1][0], j[1][1]).complex_eigenvalues();
            let mut a: Vec<(f64, f64)> = sp.eigenvalues.iter().map(|c| (c.re, c.im)).collect();
            let mut b: Vec<(f64, f64)> = generic.iter().map(|c| (c.re, c.im)).collect();
            a.sort_by(|x, y| x.partial_cmp(y).unwrap());
            b.sort_by(|x, y| x.partial_cmp(y).unwrap());
            for (x, y) in a.iter().zip(&b) {
                let scale = 1.0 + x.0.hypot(x.1);
                if (x.0 - y.0).abs() > EIGEN_TOL * scale || (x.1 - y.1).abs() > EIGEN_TOL * scale {
                    return Err(format!("{:?} at p={p} {:?}: {a:?} vs {b:?}", sp.label, pr));
                }
            }
            compared += 1;
        }
    }
    let mut flips = 0;
    for pr in [mplus(), mminus(), params(1.0, 3.0, Operator::MPlus, 5, 1.0), params(0.5, 1.0, Operator::MMinus, 4, 0.5)] {
        let pp = pr.p_pseudo();
        let class = |p: f64| stationary::classify_stationary(StationaryLabel::M0, p, &pr).map(|s| s.classification);
        let got = (class(pp - FLIP_OFFSET), class(pp), class(pp + FLIP_OFFSET));
        let want = (Ok(StabilityClass::Source), Ok(StabilityClass::Center), Ok(StabilityClass::Sink));
        if got != want {
            return Err(format!("{:?}: M0 flip {got:?}", pr));
        }
        flips += 1;
    }
    Ok(format!("{compared} spectra within {EIGEN_TOL:e}; M0 source/center/sink flip on {flips} parameter sets"))
}

fn dulac_signs() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x5eed_0006);
    let mut counts = [0usize; 3];
    for pr in [mplus(), params(1.0, 2.0, Operator::MPlus, 4, 1.0)] {
        let mut drawn = 0;
        while drawn < 1000 {
            let q = PhasePoint::new(
                rng.random_range(0.0..pr.wall()),
                rng.random_range(0.0..pr.n0_height()),
            );
            let region = region_of(q, &pr);
            if !matches!(region, Region::RPlus | Region::RMinus) {
                continue;
            }
            drawn += 1;
            let low = dulac_phi(q, 0.9 * pr.p_sobolev(), &pr).map_err(|e| e.to_string())?;
            let high = dulac_phi(q, 1.1 * pr.p_pseudo(), &pr).map_err(|e| e.to_string())?;
            if !(low > 0.0) || !(high < 0.0) {
                return Err(format!("{q:?}: Φ(0.9 p_sobolev)={low}, Φ(1.1 p_pseudo)={high}"));
            }
            if region == Region::RPlus {
                let at = dulac_phi(q, pr.p_sobolev(), &pr).map_err(|e| e.to_string())?;
                if at.abs() > DULAC_ZERO {
                    return Err(format!("{q:?}: Φ(p_sobolev)={at} in R+"));
                }
                counts[2] += 1;
            }
            counts[0] += 1;
            counts[1] += 1;
        }
    }
    Ok(format!(
        "{} points positive, {} negative, {} zero in R+ within {DULAC_ZERO:e}",
        counts[0], counts[1], counts[2]
    ))
}

fn box_invariant() -> Outcome {
    let mut checked = Vec::new();
    for pr in [mplus(), mminus()] {
        let res = critical(&pr)?;
        let (pts, _) = gamma_truncated_at_a0(res.p_star, &pr, &Budget::default()).map_err(|e| e.to_string())?;
        if !box_certificate(&pts, &pr) {
            return Err(format!("{:?}: Γ at p*={} leaves the box", pr.operator(), res.p_star));
        }
        checked.push(format!("Γ_p*({})", pr.operator().name()));
    }
    let budget = Budget::default();
    let mut cycles = 0;
    for (pr, p) in [(mplus(), 8.85), (mplus(), 9.0), (mminus(), 2.345), (mminus(), 2.35)] {
        let mut orbits = Vec::new();
        let traced = gamma_orbit(p, &pr, &budget).map_err(|e| e.to_string())?;
        if let Verdict::ToPeriodicOrbit(o) = traced.fate.verdict {
            orbits.push(o.points);
        }
        let m0 = stationary::location(StationaryLabel::M0, p, &pr);
        for c in singular_catalog(p, &pr, &budget).map_err(|e| e.to_string())?.cycles {
            orbits.push(periodic_orbit_through(m0, c.section_s, p, &pr).map_err(|e| e.to_string())?.points);
        }
        if orbits.is_empty() {
            return Err(format!("{:?} p={p}: no cycle detected", pr.operator()));
        }
        if orbits.iter().any(|pts| !box_certificate(pts, &pr)) {
            return Err(format!("{:?} p={p}: a cycle leaves the box", pr.operator()));
        }
        cycles += orbits.len();
    }
    Ok(format!("{}; {cycles} detected cycles at M+ 8.85, 9 and M- 2.345, 2.35", checked.join(" ")))
}

fn center_energy() -> Outcome {
    let pr = ProblemParams::laplacian(3, 0.0).unwrap();
    let p = 5.0;
    let m0 = stationary::location(StationaryLabel::M0, p, &pr);
    let mut worst_return: f64 = 0.0;
    let mut worst_drift: f64 = 0.0;
    for s in [0.01, 0.05, 0.2] {
        let ret = poincare_map(m0, s, p, &pr, Direction::Forward).map_err(|e| e.to_string())?;
        worst_return = worst_return.max((ret.s - s).abs());
        let orbit = periodic_orbit_through(m0, s, p, &pr).map_err(|e| e.to_string())?;
        let e0 = energy(0.0, orbit.points[0], p, &pr).map_err(|e| e.to_string())?.value;
        for q in &orbit.points {
            let e = energy(0.0, *q, p, &pr).map_err(|e| e.to_string())?.value;
            worst_drift = worst_drift.max((e - e0).abs() / e0.abs());
        }
    }
    check(
        worst_return < RETURN_TOL && worst_drift < ENERGY_DRIFT,
        format!("max return displacement {worst_return:.2e}, max relative energy drift {worst_drift:.2e}"),
        format!("return {worst_return:e}, drift {worst_drift:e}"),
    )
}

fn pseudo_slow_regime() -> Outcome {
    let pr = mplus();
    let c = classify_p(9.0, &pr).map_err(|e| e.to_string())?;
    let traj = integrate(gamma_seed(9.0, &pr), 9.0, &pr, Direction::Forward, &FlowOptions::default())
        .map_err(|e| e.to_string())?;
    let crossings = traj.count(EventKind::ConcavityCross);
    check(
        c.class == PClass::P && crossings >= MIN_CROSSINGS,
        format!("class P, {crossings} concavity crossings"),
        format!("class {:?}, {crossings} crossings", c.class),
    )
}

fn slow_decay_constant() -> Outcome {
    let pr = ProblemParams::laplacian(3, 0.0).unwrap();
    let p = 7.0;
    let traced = gamma_orbit(p, &pr, &Budget::default()).map_err(|e| e.to_string())?;
    let m0 = stationary::location(StationaryLabel::M0, p, &pr);
    let end = traced.trajectory.last().point;
    let gap = (end.x * end.z - m0.x * m0.z).abs();
    let k = decay_constants(&traced.trajectory, &traced.fate, p, &pr).map_err(|e| e.to_string())?;
    let want = (m0.x * m0.z).powf(1.0 / (p - 1.0));
    let c = k.c_slow.ok_or("no slow constant")?;
    check(
        gap < SLOW_TOL && (c - want).abs() < SLOW_TOL,
        format!("|XZ - X0Z0| = {gap:.2e}, C_slow = {c:.10} vs {want:.10}"),
        format!("gap {gap:e}, C_slow {c} want {want}"),
    )
}

/// Grids avoid narrow neighbourhoods of p* and the slow spiral just above p_pseudo.
fn oracle_grids() -> Vec<(ProblemParams, Vec<f64>)> {
    vec![
        (
            mplus(),
            vec![
                1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 5.0, 6.0, 7.0, 8.0, 8.5, 8.65, 8.85, 8.92, 8.97, 9.5, 10.5, 12.0, 14.0, 18.0,
            ],
        ),
        (
            params(1.0, 2.0, Operator::MPlus, 4, 1.0),
            vec![
                1.5, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0, 11.8, 12.4, 12.6, 12.8, 14.0, 15.0, 17.0, 20.0, 25.0,
            ],
        ),
        (
            mminus(),
            vec![
                1.1, 1.3, 1.5, 1.7, 1.9, 2.0, 2.1, 2.2, 2.25, 2.3, 2.42, 2.5, 2.7, 3.0, 3.5, 4.0, 5.0, 6.0, 8.0, 10.0,
            ],
        ),
        (
            params(1.0, 2.0, Operator::MMinus, 3, 1.0),
            vec![
                1.2, 1.5, 1.8, 2.0, 2.2, 2.4, 2.6, 2.8, 2.9, 3.05, 3.2, 3.4, 3.7, 4.0, 4.5, 5.0, 6.0, 7.0, 9.0, 12.0,
            ],
        ),
    ]
}

fn oracle_agreement() -> Outcome {
    let mut tally = std::collections::BTreeMap::new();
    let mut total = 0;
    for (pr, grid) in oracle_grids() {
        for p in grid {
            let class = classify_p(p, &pr).map_err(|e| format!("{:?} a={} p={p}: {e}", pr.operator(), pr.a()))?.class;
            let sol = shoot_regular(1.0, p, &pr, &ShootOptions::default()).map_err(|e| e.to_string())?;
            let want = match class {
                PClass::C => DecayClass::Vanishes,
                PClass::F => DecayClass::Fast,
                PClass::P => DecayClass::PseudoSlow,
                PClass::S => DecayClass::Slow,
            };
            if sol.decay != Some(want) {
                return Err(format!(
                    "{:?} a={} p={p}: phase plane {:?}, shooting {:?}",
                    pr.operator(),
                    pr.a(),
                    class,
                    sol.decay
                ));
            }
            *tally.entry(class.name()).or_insert(0) += 1;
            total += 1;
        }
    }
    Ok(format!("{total} points agree, classes {tally:?}"))
}

fn singular_catalogs() -> Outcome {
    let budget = Budget::default();
    let below = singular_catalog(4.0, &mplus(), &budget).map_err(|e| e.to_string())?;
    let nontrivial: Vec<_> = below.entries.iter().filter(|e| e.source != "trivial").collect();
    if nontrivial.is_empty()
        || !nontrivial
            .iter()
            .all(|e| e.near_origin == NearOrigin::DimensionBlowUp && e.outer == Outer::Ball)
    {
        return Err(format!("MPlus p=4 entries {:?}", below.entries));
    }

    let pr = params(1.0, 1.2, Operator::MPlus, 3, 0.0);
    let p = 4.5;
    if !(p > pr.p_serrin() && p <= pr.p_sobolev()) {
        return Err(format!("p={p} not in ({}, {}]", pr.p_serrin(), pr.p_sobolev()));
    }
    let mid = singular_catalog(p, &pr, &budget).map_err(|e| e.to_string())?;
    let upsilon_from_m0 = mid.entries.iter().any(|e| {
        e.source == "Upsilon"
            && e
                .representatives
                .iter()
                .any(|r| r.backward == Verdict::ToStationary(StationaryLabel::M0).name())
    });
    if !upsilon_from_m0 {
        return Err(format!("MPlus p=4.5 entries {:?}", mid.entries));
    }

    let pr = mminus();
    let p = 2.345;
    let crit = critical(&pr)?;
    if !(p > pr.p_pseudo() && p < crit.p_star) {
        return Err(format!("p={p} not in ({}, {})", pr.p_pseudo(), crit.p_star));
    }
    let cyc = singular_catalog(p, &pr, &budget).map_err(|e| e.to_string())?;
    let families = [
        (NearOrigin::PseudoBlowUp, Outer::FastDecay),
        (NearOrigin::PseudoBlowUp, Outer::PseudoSlowDecay),
        (NearOrigin::PseudoBlowUp, Outer::SlowDecay),
        (NearOrigin::PseudoBlowUp, Outer::Ball),
    ];
    let missing: Vec<_> = families.iter().filter(|(n, o)| !cyc.has(*n, *o)).collect();
    check(
        !cyc.cycles.is_empty() && missing.is_empty(),
        format!(
            "MPlus p=4: {} ball-type entries; MPlus(1,1.2,3) p=4.5: Υ from M0; MMinus p=2.345: {} cycle(s) and 4 families",
            nontrivial.len(),
            cyc.cycles.len()
        ),
        format!("MMinus p=2.345 cycles {}, missing {missing:?}", cyc.cycles.len()),
    )
}

fn exterior_nonexistence() -> Outcome {
    let mut seen = Vec::new();
    for (pr, ps) in [(mplus(), [2.0, 4.0, 6.0, 8.0, 8.7]), (mminus(), [1.2, 1.6, 2.0, 2.2, 2.35])] {
        let crit = critical(&pr)?;
        for p in ps {
            if p > crit.p_star {
                return Err(format!("sample p={p} exceeds p*={}", crit.p_star));
            }
            let rep = exterior_nonexistence_check(p, &pr, Some(&crit), &Budget::default()).map_err(|e| e.to_string())?;
            let passes = rep.evidence.as_ref().is_some_and(|e| e.passes());
            if rep.verdict != ExteriorVerdict::Nonexistence || !passes {
                return Err(format!("{:?} p={p}: {:?}", pr.operator(), rep));
            }
        }
        seen.push(format!("{}: {:?}", pr.operator().name(), ps));
    }
    Ok(format!("Nonexistence with passing barrier evidence at {}", seen.join("; ")))
}

fn run_cli(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_pucci"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out.stdout)
}

fn determinism() -> Outcome {
    let base = [
        "sweep", "--lambda", "1", "--Lambda", "2", "--op", "plus", "--N", "4", "--a", "0", "--p-from", "2", "--p-to",
        "12", "--steps", "21",
    ];
    let with_jobs = |j: &str| {
        let mut v = base.to_vec();
        v.extend(["--jobs", j]);
        run_cli(&v)
    };
    let serial = with_jobs("1")?;
    let again = with_jobs("1")?;
    let parallel = with_jobs("4")?;
    let pr = mplus();
    let ps: Vec<f64> = (0..21).map(|k| 2.0 + 0.5 * k as f64).collect();
    let lib_serial = sweep(&pr, &ps, 1, &Budget::default());
    let lib_parallel = sweep(&pr, &ps, 8, &Budget::default());
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let orbit = |tag: &str| -> Result<Vec<u8>, String> {
        let prefix = dir.path().join(tag);
        let prefix = prefix.to_str().unwrap();
        run_cli(&["orbit", "--op", "plus", "--Lambda", "2", "--N", "4", "--p", "9", "--out", prefix])?;
        std::fs::read(format!("{prefix}.csv")).map_err(|e| e.to_string())
    };
    let (first, second) = (orbit("one")?, orbit("two")?);
    check(
        serial == again && serial == parallel && lib_serial == lib_parallel && !serial.is_empty() && first == second,
        format!(
            "sweep CSV byte-identical for --jobs 1 (twice) and --jobs 4 ({} bytes); orbit CSV identical across runs ({} bytes)",
            serial.len(),
            first.len()
        ),
        "outputs differ between runs".to_string(),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 14] = [
        ("Laplacian reduction", laplacian_reduction),
        ("Henon reduction", henon_reduction),
        ("strict bounds M+", || strict_bounds(&mplus(), 5.0, 9.0)),
        ("strict bounds M-", || strict_bounds(&mminus(), 7.0 / 3.0, 5.0)),
        ("eigenvalue closed forms", eigen_closed_forms),
        ("Dulac signs", dulac_signs),
        ("box invariant", box_invariant),
        ("center and energy", center_energy),
        ("pseudo-slow regime", pseudo_slow_regime),
        ("slow-decay constant", slow_decay_constant),
        ("oracle agreement", oracle_agreement),
        ("singular catalogs", singular_catalogs),
        ("exterior nonexistence", exterior_nonexistence),
        ("determinism and parallel equivalence", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let took = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("[PASS] {:>2} {name} ({took:.2}s): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("[FAIL] {:>2} {name} ({took:.2}s): {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
