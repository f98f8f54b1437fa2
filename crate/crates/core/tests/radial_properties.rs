use proptest::prelude::*;
use pucci_core::classify::{classify_p, gamma_orbit, upsilon_orbit, PClass};
use pucci_core::field::{region_of, PhasePoint, Region};
use pucci_core::flow::{integrate, Budget, Direction, EventKind, FlowOptions, Verdict};
use pucci_core::params::{Operator, ProblemParams};
use pucci_core::radial::*;

fn mplus() -> ProblemParams {
    ProblemParams::new(1.0, 2.0, Operator::MPlus, 4, 0.0).unwrap()
}

fn mminus() -> ProblemParams {
    ProblemParams::new(1.0, 2.0, Operator::MMinus, 3, 0.0).unwrap()
}

/// Energy change over a short segment that stays in the convex region, if any.
fn energy_change(start: PhasePoint, p: f64, params: &ProblemParams, length: f64) -> Option<(f64, f64)> {
    let opts = FlowOptions {
        horizon: length,
        capture: false,
        blowup: false,
        stop_on: vec![EventKind::ConcavityCross],
        ..FlowOptions::default()
    };
    let traj = integrate(start, p, params, Direction::Forward, &opts).ok()?;
    if traj.samples.iter().any(|s| region_of(s.point, params) != Region::RMinus) {
        return None;
    }
    let first = traj.samples.first()?;
    let last = traj.samples.last()?;
    if last.t - first.t < 0.5 * length {
        return None;
    }
    let e0 = energy(first.t, first.point, p, params).ok()?.value;
    let e1 = energy(last.t, last.point, p, params).ok()?.value;
    Some((e0, e1))
}

#[test]
fn energy_is_conserved_at_the_pseudo_exponent_for_both_operators() {
    for params in [mplus(), mminus(), ProblemParams::new(1.0, 3.0, Operator::MPlus, 5, 1.0).unwrap()] {
        let p = params.p_pseudo();
        let m0 = pucci_core::stationary::location(pucci_core::stationary::StationaryLabel::M0, p, &params);
        let start = PhasePoint::new(m0.x * 1.05, m0.z * 0.97);
        let (e0, e1) = energy_change(start, p, &params, 0.5).expect("segment stays convex");
        assert!((e1 - e0).abs() <= 1e-8 * e0.abs(), "{:?}: {e0} {e1}", params.operator());
    }
}

#[test]
fn regular_shooting_leaves_the_saddle_on_the_z_axis() {
    for params in [mplus(), mminus()] {
        let p = 4.0;
        let sol = shoot_regular(1.0, p, &params, &ShootOptions::default()).unwrap();
        let phase = to_phase(&sol, p, &params).unwrap();
        let first = phase.samples[0].point;
        let n0 = PhasePoint::new(0.0, params.n0_height());
        assert!(first.dist(&n0) < 1e-6 * params.n0_height(), "{first:?}");
    }
}

#[test]
fn halving_the_start_radius_does_not_move_the_solution() {
    let params = mplus();
    let p = 7.0;
    let coarse = shoot_regular(1.0, p, &params, &ShootOptions::default()).unwrap();
    let fine = shoot_regular(
        1.0,
        p,
        &params,
        &ShootOptions {
            start_scale: 5e-7,
            ..ShootOptions::default()
        },
    )
    .unwrap();
    for r in [0.1, 1.0, 3.0] {
        let (a, _) = interpolate(&coarse, r).unwrap();
        let (b, _) = interpolate(&fine, r).unwrap();
        assert!((a - b).abs() < 1e-8 * a, "r={r}: {a} {b}");
    }
    let (ra, rb) = (coarse.wall_radius.unwrap(), fine.wall_radius.unwrap());
    assert!((ra - rb).abs() < 1e-7 * ra);
}

#[test]
fn pseudo_slow_constants_are_ordered() {
    let params = mplus();
    let c = classify_p(9.0, &params).unwrap();
    assert_eq!(c.class, PClass::P);
    let traced = gamma_orbit(9.0, &params, &Budget::default()).unwrap();
    let k = decay_constants(&traced.trajectory, &traced.fate, 9.0, &params).unwrap();
    let (c1, c2) = (k.c1.unwrap(), k.c2.unwrap());
    assert!(0.0 < c1 && c1 < c2, "{c1} {c2}");
}

#[test]
fn slow_constant_matches_stationary_value() {
    let params = ProblemParams::laplacian(3, 0.0).unwrap();
    let traced = gamma_orbit(7.0, &params, &Budget::default()).unwrap();
    assert!(matches!(traced.fate.verdict, Verdict::ToStationary(_)));
    let k = decay_constants(&traced.trajectory, &traced.fate, 7.0, &params).unwrap();
    assert!((k.c_slow.unwrap() - k.c_slow_expected.unwrap()).abs() < 1e-6);
}

#[test]
fn fast_constant_follows_rescaling() {
    let params = ProblemParams::laplacian(3, 0.0).unwrap();
    let p = 7.0;
    let traced = upsilon_orbit(p, &params, &Budget::default()).unwrap();
    let traj = &traced.trajectory;
    let t0 = traj.samples.last().unwrap().t;
    let base = reconstruct_u(traj, p, &params, Some((t0, 1.0))).unwrap();
    let alpha = params.alpha(p);
    for tau in [0.5, 3.0] {
        let scaled = reconstruct_u(traj, p, &params, Some((t0, tau))).unwrap();
        let ratio = fast_constant(&scaled, &params).unwrap() / fast_constant(&base, &params).unwrap();
        let want = tau.powf(1.0 - (params.n_tilde() - 2.0) / alpha);
        assert!((ratio - want).abs() < 1e-9 * want, "{ratio} {want}");
    }
}

#[test]
fn decay_constants_refuse_unresolved_fates() {
    let params = ProblemParams::laplacian(3, 0.0).unwrap();
    let traced = gamma_orbit(4.0, &params, &Budget::default()).unwrap();
    assert!(matches!(
        decay_constants(&traced.trajectory, &traced.fate, 4.0, &params),
        Err(RadialError::UnresolvedFate(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn reconstruction_round_trips(p in 2.0f64..14.0, anchor in 0.1f64..10.0) {
        let params = mplus();
        let traced = gamma_orbit(p, &params, &Budget::default()).unwrap();
        let t0 = traced.trajectory.samples[0].t;
        let sol = reconstruct_u(&traced.trajectory, p, &params, Some((t0, anchor))).unwrap();
        prop_assert!(max_residual(&sol, p, &params) < TAU_RES);
        let back = to_phase(&sol, p, &params).unwrap();
        let shift = back.samples[0].t - t0;
        for (a, b) in back.samples.iter().zip(&traced.trajectory.samples) {
            prop_assert!((a.t - shift - b.t).abs() < TAU_ROUND * (1.0 + b.t.abs()));
            prop_assert!(a.point.dist(&b.point) < TAU_ROUND * (1.0 + b.point.norm()));
        }
    }

    #[test]
    fn shooting_is_scale_invariant(p in 2.4f64..6.0, tau in 0.3f64..4.0) {
        let params = mminus();
        let opts = ShootOptions { log_span: 30.0, ..ShootOptions::default() };
        let u = shoot_regular(1.0, p, &params, &opts).unwrap();
        let v = shoot_regular(tau, p, &params, &opts).unwrap();
        prop_assert!(max_residual(&v, p, &params) < TAU_RES);
        let stretch = tau.powf(1.0 / params.alpha(p));
        for s in v.samples.iter().step_by(5).filter(|s| s.r > 1e-2 && s.r < 1e2) {
            let (uu, _) = interpolate(&u, stretch * s.r).unwrap();
            prop_assert!((s.u - tau * uu).abs() < 1e-6 * s.u);
        }
    }

    #[test]
    fn energy_sign_follows_pseudo_exponent(
        p in prop_oneof![5.5f64..8.5, 9.5f64..14.0],
        fx in 0.05f64..0.95,
        fz in 0.05f64..0.95,
    ) {
        let params = mplus();
        let start = PhasePoint::new(fx * params.wall(), fz * params.concavity_level());
        if let Some((e0, e1)) = energy_change(start, p, &params, 0.05) {
            let want = (params.p_pseudo() - p).signum();
            prop_assert_eq!((e1 - e0).signum(), want, "p={} start={:?} {} {}", p, start, e0, e1);
        }
    }
}
