//! Trace series, decay fits, finite differences and audits.

mod common;

use approx::assert_relative_eq;
use proptest::prelude::*;

use rdlc_core::diagnostics::{audit, fd_derivative, fit_decay_rate, fit_log_linear, TraceSeries};
use rdlc_core::solver::{run, Profile};
use rdlc_core::Error;

use common::reference_config;

#[test]
fn trace_rejects_unordered_times() {
    assert!(TraceSeries::new(vec![0.0, 1.0, 1.0]).is_err());
    let mut tr = TraceSeries::new(vec![0.0, 1.0]).unwrap();
    assert!(tr.set_channel("x", "", "", vec![1.0]).is_err());
    assert!(fit_decay_rate(&tr, "missing", None).is_err());
}

#[test]
fn fit_errors() {
    let ts: Vec<f64> = (0..10).map(f64::from).collect();
    let mut ys = vec![1.0; 10];
    assert!(matches!(fit_log_linear(&ts, &ys, 0.0, 1.0), Err(Error::InsufficientSamples { .. })));
    ys[3] = 0.0;
    assert!(matches!(fit_log_linear(&ts, &ys, 0.0, 9.0), Err(Error::NonPositiveSample { .. })));
}

#[test]
fn fd_derivative_is_exact_on_quadratics() {
    let ts: Vec<f64> = (0..20).map(|k| 0.1 * k as f64).collect();
    let ys: Vec<f64> = ts.iter().map(|t| 2.0 * t * t - t + 3.0).collect();
    let d = fd_derivative(&ts, &ys).unwrap();
    for (t, v) in ts.iter().zip(&d.values) {
        assert_relative_eq!(*v, 4.0 * t - 1.0, epsilon = 1e-12);
    }
    assert!(fd_derivative(&ts[..2], &ys[..2]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn fit_recovers_rate_and_is_shift_invariant(rate in 0.01f64..50.0, c in -20.0f64..20.0, shift in -5.0f64..5.0) {
        let ts: Vec<f64> = (0..50).map(|k| shift + 0.01 * k as f64).collect();
        let ys: Vec<f64> = ts.iter().map(|t| (c - rate * t).exp()).collect();
        let f = fit_log_linear(&ts, &ys, shift, shift + 1.0).unwrap();
        prop_assert!((f.rate - rate).abs() < 1e-8 * (1.0 + rate));
        prop_assert!(f.r_squared > 1.0 - 1e-10);
        let scaled: Vec<f64> = ys.iter().map(|y| 7.5 * y).collect();
        let g = fit_log_linear(&ts, &scaled, shift, shift + 1.0).unwrap();
        prop_assert!((g.rate - f.rate).abs() < 1e-9 * (1.0 + rate));
    }
}

#[test]
fn equilibrium_audit_passes() {
    let mut cfg = reference_config(64, 1.0);
    cfg.initial_a = Profile::Constant { value: 1.0 };
    cfg.initial_b = Profile::Constant { value: 1.0 };
    let r = audit(&run(&cfg).unwrap(), None);
    assert!(r.all_pass(), "{:?}", r.failures().collect::<Vec<_>>());
}

#[test]
fn audit_is_deterministic_and_passes_on_reference() {
    let cfg = reference_config(128, 1.0);
    let (x, y) = (audit(&run(&cfg).unwrap(), None), audit(&run(&cfg).unwrap(), None));
    assert_eq!(x, y);
    assert!(x.all_pass(), "{:?}", x.failures().collect::<Vec<_>>());
    for id in ["mass_conservation", "mean_zero_shift", "l2_monotone", "l3_bound", "minimum_principle"] {
        assert!(x.get(id).is_some(), "missing {id}");
    }
}

#[test]
fn failed_run_fails_the_audit() {
    let mut cfg = reference_config(64, 1.0);
    cfg.catalyst.kind = rdlc_core::solver::CatalystKind::Constant;
    cfg.catalyst.k0 = 500.0;
    cfg.initial_a = Profile::Cosine { base: 1.0, amplitude: 0.95, mode: 1 };
    cfg.initial_b = Profile::Cosine { base: 1.0, amplitude: -0.95, mode: 1 };
    cfg.dt = Some(0.05);
    let out = run(&cfg).unwrap();
    if out.failure.is_some() {
        let r = audit(&out, None);
        assert!(!r.all_pass());
        assert!(!r.get("run_completed").unwrap().pass);
    }
}
