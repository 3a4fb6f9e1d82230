//! Time stepping: conservation, equilibria, linear decay oracle, failures.

mod common;

use std::f64::consts::PI;

use approx::assert_relative_eq;
use proptest::prelude::*;

use rdlc_core::diagnostics::fit_decay_rate;
use rdlc_core::solver::{run, CatalystKind, Profile, Simulation};
use rdlc_core::Error;

use common::reference_config;

#[test]
fn equilibrium_stays_exact() {
    let mut cfg = reference_config(64, 1.0);
    cfg.initial_a = Profile::Constant { value: 1.0 };
    cfg.initial_b = Profile::Constant { value: 1.0 };
    let out = run(&cfg).unwrap();
    assert!(out.failure.is_none());
    let tr = &out.trace;
    assert!(tr.channel("l2_dist").unwrap().iter().all(|v| *v == 0.0));
    assert!(tr.channel("mass").unwrap().iter().all(|v| *v == 2.0));
    assert!(tr.channel("min_ab").unwrap().iter().all(|v| *v == 1.0));
    assert!(out.snapshots.iter().all(|s| s.a.iter().chain(&s.b).all(|v| *v == 1.0)));
}

#[test]
fn constant_catalyst_rate_matches_linear_oracle() {
    // w = u2 − u1 obeys w_t = w_xx − 4 k0 w near equilibrium, so the lowest
    // antisymmetric mode gives ‖u‖² ∝ exp(−2(π² + 4 k0) t); u1 + u2 stays zero,
    // so the reaction is exactly linear here
    for k0 in [0.5, 1.0, 2.0] {
        let mut cfg = reference_config(256, 0.7);
        cfg.catalyst.kind = CatalystKind::Constant;
        cfg.catalyst.k0 = k0;
        cfg.initial_a = Profile::Cosine { base: 1.0, amplitude: 1e-2, mode: 1 };
        cfg.initial_b = Profile::Cosine { base: 1.0, amplitude: -1e-2, mode: 1 };
        let out = run(&cfg).unwrap();
        let fit = fit_decay_rate(&out.trace, "l2_dist", Some((0.2, 0.7))).unwrap();
        assert_relative_eq!(fit.rate, 2.0 * (PI * PI + 4.0 * k0), max_relative = 1e-4);
    }
}

#[test]
fn oversized_step_is_reported_not_fatal() {
    let mut cfg = reference_config(64, 1.0);
    cfg.catalyst.kind = CatalystKind::Constant;
    cfg.catalyst.k0 = 200.0;
    cfg.initial_a = Profile::Cosine { base: 1.0, amplitude: 0.9, mode: 1 };
    cfg.initial_b = Profile::Cosine { base: 1.0, amplitude: -0.9, mode: 1 };
    cfg.dt = Some(0.05);
    let out = run(&cfg).unwrap();
    assert!(out.stability_violations > 0);
    if let Some(e) = &out.failure {
        assert!(matches!(e, Error::PositivityLost { .. } | Error::NonFinite { .. }), "{e:?}");
        assert!(out.trace.len() < 21);
    }
}

#[test]
fn configuration_errors() {
    let mut cfg = reference_config(64, 1.0);
    cfg.catalyst.x0 = 0.45;
    assert!(Simulation::new(cfg).is_err());
    let mut cfg = reference_config(64, 1.0);
    cfg.initial_a = Profile::Cosine { base: 1.0, amplitude: 1.5, mode: 1 };
    assert!(matches!(Simulation::new(cfg).unwrap().run(), Err(Error::NonPositiveProfile { species: "a", .. })));
    let mut cfg = reference_config(64, 1.0);
    cfg.d1 = 0.0;
    assert!(Simulation::new(cfg).is_err());
}

#[test]
fn runs_are_deterministic() {
    let cfg = reference_config(64, 0.5);
    let (x, y) = (run(&cfg).unwrap(), run(&cfg).unwrap());
    assert_eq!(x.trace, y.trace);
    assert_eq!(x.snapshots, y.snapshots);
}

fn kind(i: usize) -> CatalystKind {
    match i {
        0 => CatalystKind::Constant,
        1 => CatalystKind::Bump,
        2 => CatalystKind::AnnularZero { outer: 0.2 },
        _ => CatalystKind::ModulatedBump { peak_ratio: 3.0, frequency: 5.0 },
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn conservation_and_monotonicity(
        amp in 0.0f64..0.8,
        mode in 1u32..4,
        k0 in 0.0f64..5.0,
        k in 0usize..4,
        d1 in 0.2f64..2.0,
        d2 in 0.2f64..2.0,
        dim in 1usize..=2,
    ) {
        let mut cfg = reference_config(if dim == 1 { 64 } else { 12 }, 0.3);
        cfg.dim = dim;
        cfg.d1 = d1;
        cfg.d2 = d2;
        cfg.catalyst.kind = kind(k);
        cfg.catalyst.k0 = k0;
        cfg.initial_a = Profile::Cosine { base: 1.0, amplitude: amp, mode };
        cfg.initial_b = Profile::Gaussian { base: 1.0, amplitude: -0.5 * amp, center: -0.1, width: 0.1, floor: None };
        let out = run(&cfg).unwrap();
        prop_assert!(out.failure.is_none());
        let tr = &out.trace;
        for m in tr.channel("mass").unwrap() {
            prop_assert!((m - 2.0).abs() < 1e-12);
        }
        for w in tr.channel("l2_dist").unwrap().windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-15);
        }
        let l3 = tr.channel("l3_sum").unwrap();
        prop_assert!(l3.iter().all(|v| *v <= l3[0] * (1.0 + 1e-12)));
        let floor = out.b0;
        prop_assert!(tr.channel("min_ab").unwrap().iter().all(|v| *v >= floor - 1e-12));
    }
}
