//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

mod common;

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rdlc_core::diagnostics::fit_decay_rate;
use rdlc_core::ext::Ext;
use rdlc_core::grid::Point;
use rdlc_core::ledger::{certificate_checks, verify_ledger, ConstantLedger, LedgerOptions};
use rdlc_core::logconv::{
    frequency_trace, lembp_check, lembp_input_from_trace, observation_estimate_check, quadratic_forms,
    state_at, tilt, FrequencyBounds, LembpInput,
};
use rdlc_core::solver::{CatalystKind, Simulation};
use rdlc_core::tolerances;
use rdlc_core::weight::{geometry_constants, WeightParams};

use common::{heat_config, orders, reference_config, sci};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: String) -> Outcome {
    if cond { Ok(msg) } else { Err(msg) }
}

fn reference() -> (Simulation, rdlc_core::solver::RunOutput) {
    let sim = Simulation::new(reference_config(256, 10.0)).unwrap();
    let run = sim.run().unwrap();
    (sim, run)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let (_, run) = reference();
    let elapsed = start.elapsed().as_secs_f64();
    if let Some(e) = &run.failure {
        return Err(format!("run failed: {e}"));
    }
    let tr = &run.trace;
    let mass = tr.channel("mass").unwrap().iter().map(|m| (m - 2.0).abs()).fold(0.0, f64::max);
    let l2_rise = tr.channel("l2_dist").unwrap().windows(2).map(|w| w[1] - w[0]).fold(f64::MIN, f64::max);
    let l3_rise = tr.channel("l3_sum").unwrap().windows(2).map(|w| w[1] - w[0]).fold(f64::MIN, f64::max);
    let min_gap = tr.channel("min_ab").unwrap().iter().map(|m| m - run.b0).fold(f64::MAX, f64::min);
    ensure(
        mass <= 1e-8 && l2_rise <= 1e-8 && l3_rise <= 1e-6 && min_gap >= -1e-6 && elapsed < 60.0,
        format!("mass dev {mass:.2e}, L2 max rise {l2_rise:.2e}, L3 max rise {l3_rise:.2e}, min - B0 {min_gap:.2e}, {elapsed:.2}s"),
    )
}

fn heat_rate_error(resolution: usize, dt: f64) -> f64 {
    let run = Simulation::new(heat_config(resolution, dt, 0.5, 0.02)).unwrap().run().unwrap();
    let fit = fit_decay_rate(&run.trace, "l2_dist", None).unwrap();
    (fit.rate / 2.0 - PI * PI).abs() / (PI * PI)
}

fn criterion_2() -> Outcome {
    let base = heat_rate_error(256, 1e-3);
    let levels = [64usize, 128, 256, 512];
    let errors: Vec<f64> = levels.iter().map(|&n| heat_rate_error(n, 1e-3 * 256.0 / n as f64)).collect();
    let ords = orders(&errors);
    ensure(
        base <= tolerances::DECAY_RATE_REL && ords.iter().all(|o| *o >= tolerances::CONVERGENCE_ORDER),
        format!("relative rate error {base:.2e} at N=256; errors {}; orders {ords:.3?}", sci(&errors)),
    )
}

fn criterion_3() -> Outcome {
    let levels = [128usize, 256, 512, 1024];
    let mut residuals = Vec::new();
    let mut scales = Vec::new();
    for &n in &levels {
        let mut cfg = reference_config(n, 1.0);
        cfg.catalyst.smoothness = Some(0.02);
        cfg.dt = Some(0.002 * 64.0 / n as f64);
        let sim = Simulation::new(cfg).unwrap();
        let run = sim.run().unwrap();
        let res = run.trace.channel("energy_residual").unwrap().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let dx = sim.grid.spacing;
        residuals.push(res);
        scales.push(run.dt * run.dt + dx * dx);
    }
    let ords = orders(&residuals);
    // C is the largest residual-to-(dt² + Δx²) ratio of the study; bounded
    // means the ratio does not drift by more than a factor 2 across levels.
    let ratios: Vec<f64> = residuals.iter().zip(&scales).map(|(r, s)| r / s).collect();
    let c_est = ratios.iter().fold(0.0f64, |m, v| m.max(*v));
    let bounded = ratios.iter().all(|r| *r >= 0.5 * c_est);
    ensure(
        bounded && ords.iter().all(|o| *o >= tolerances::CONVERGENCE_ORDER),
        format!("residuals {}; C = {c_est:.3e}; orders {ords:.3?}", sci(&residuals)),
    )
}

fn criterion_4() -> Outcome {
    let configs = [(0.5, 0.5, 1.0, 0.25), (1.0, 0.2, 2.0, 0.15), (0.25, 1.0, 0.75, 0.3)];
    let levels = [64usize, 128, 256, 512];
    let mut lines = Vec::new();
    let mut ok = true;
    let states: Vec<_> = levels
        .iter()
        .map(|&n| {
            let mut cfg = reference_config(n, 0.5);
            cfg.catalyst.smoothness = Some(0.05);
            let sim = Simulation::new(cfg).unwrap();
            let run = sim.run().unwrap();
            let st = state_at(&run, 0.5).unwrap();
            (sim, st)
        })
        .collect();
    for (s, h, big_t, x0) in configs {
        let mut aff = Vec::new();
        for (sim, st) in &states {
            let p = WeightParams::new(sim.grid.domain, x0, 0.1, s, h, big_t).unwrap();
            let ts = tilt(sim, st, &p).unwrap();
            aff.push(quadratic_forms(&sim.grid, &ts).unwrap().aff.abs());
        }
        let ords = orders(&aff);
        ok &= ords.iter().all(|o| *o >= tolerances::CONVERGENCE_ORDER);
        lines.push(format!("(s,h,T,x0)=({s},{h},{big_t},{x0}) orders {ords:.3?}"));
    }
    ensure(ok, lines.join("; "))
}

fn criterion_5() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for dim in [1usize, 2] {
        let domain = rdlc_core::grid::Domain::unit_ball(dim).unwrap();
        let p = WeightParams::new(domain, 0.25 * domain.radius * 2.0, 0.2 * domain.radius, 1.0, 1.0, 1.0).unwrap();
        let g = geometry_constants(&p, tolerances::GEOMETRY_SAMPLES).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let big_r = domain.radius;
        let x0 = p.center();
        let slack = 64.0 * f64::EPSILON * p.psi0();
        let mut violations = 0usize;
        let samples = 10_000;
        for k in 0..samples {
            let pt: Point = if k < samples / 2 {
                random_in_ball(&mut rng, dim, big_r)
            } else {
                let mut q = random_in_ball(&mut rng, dim, g.neighborhood);
                q[0] += x0[0];
                q
            };
            let grad2: f64 = p.grad_psi(&pt).iter().map(|v| v * v).sum();
            let phi1 = p.phi(1, &pt).abs();
            let phi3 = p.phi(3, &pt).abs();
            let rho = pt.iter().map(|v| v * v).sum::<f64>().sqrt();
            violations += usize::from(grad2 > g.c1 * phi1 + slack);
            violations += usize::from(grad2 > g.c1 * phi3 + slack);
            violations += usize::from(phi1 > g.c2 * grad2 + slack);
            if rho >= g.rho {
                violations += usize::from(phi3 > g.c2 * grad2 + slack);
            } else {
                violations += usize::from(p.phi(3, &pt) - p.phi(1, &pt) > -g.c3 + slack);
            }
            let d2 = pt.iter().zip(&x0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            if d2 < g.neighborhood * g.neighborhood {
                violations += usize::from(g.c01 * grad2 > phi1 + slack);
                violations += usize::from(phi1 > g.c02 * grad2 + slack);
            }
        }
        // analytic gradient against central differences at two step sizes
        let mut worst_order = f64::INFINITY;
        for _ in 0..50 {
            let pt = random_in_ball(&mut rng, dim, 0.8 * big_r);
            let exact = p.grad_psi(&pt);
            let fd = |eps: f64| -> f64 {
                (0..dim)
                    .map(|j| {
                        let (mut a, mut b) = (pt, pt);
                        a[j] += eps;
                        b[j] -= eps;
                        ((p.psi(&a) - p.psi(&b)) / (2.0 * eps) - exact[j]).abs()
                    })
                    .fold(0.0, f64::max)
            };
            let (e1, e2) = (fd(1e-3), fd(5e-4));
            if e2 > 1e-12 {
                worst_order = worst_order.min((e1 / e2).log2());
            }
        }
        ok &= violations == 0 && worst_order >= tolerances::CONVERGENCE_ORDER;
        lines.push(format!("n={dim}: {violations} violations at {samples} samples, gradient FD order {worst_order:.3}"));
    }
    ensure(ok, lines.join("; "))
}

fn random_in_ball(rng: &mut ChaCha8Rng, dim: usize, radius: f64) -> Point {
    loop {
        let mut q = [0.0; 3];
        for v in q.iter_mut().take(dim) {
            *v = rng.gen_range(-radius..radius);
        }
        if q.iter().map(|v| v * v).sum::<f64>() < radius * radius {
            return q;
        }
    }
}

fn criterion_6() -> Outcome {
    let ts: Vec<f64> = (0..=1000).map(|k| k as f64 * 1e-3).collect();
    let n = ts.len();
    let expo = LembpInput {
        times: ts.clone(),
        y: ts.iter().map(|t| (-t).exp()).collect(),
        n: vec![0.5; n],
        f1: vec![0.0; n],
        f2: vec![0.0; n],
        c0: 0.0,
        c1: 0.0,
        h: 0.1,
        horizon: 1.0,
        t1: 0.2,
        t2: 0.5,
        t3: 0.8,
    };
    let constant = LembpInput { y: vec![2.0; n], n: vec![0.0; n], ..expo.clone() };
    let r1 = lembp_check(&expo).map_err(|e| e.to_string())?;
    let r2 = lembp_check(&constant).map_err(|e| e.to_string())?;

    let (sim, run) = reference();
    let ledger = ConstantLedger::build(&sim, LedgerOptions::default()).map_err(|e| e.to_string())?;
    let a = &ledger.analysis;
    let p = WeightParams::new(sim.grid.domain, 0.25, 0.1, a.s2, 0.5, 5.0).unwrap();
    let bounds = FrequencyBounds { c0: a.big_c0, c1: a.big_c1, s2: a.s2 };
    let ft = frequency_trace(&sim, &run, &p, Some(bounds)).map_err(|e| e.to_string())?;
    let input = lembp_input_from_trace(&ft, a.big_c0, a.big_c1, &p, (1.0, 2.5, 4.0)).map_err(|e| e.to_string())?;
    let r3 = lembp_check(&input).map_err(|e| e.to_string())?;
    ensure(
        r1.hypothesis_violations() == 0
            && r1.conclusion_margin >= Ext::ZERO
            && r2.hypothesis_violations() == 0
            && r2.conclusion_margin >= Ext::ZERO
            && r3.hypothesis_violations() == 0
            && r3.conclusion_margin >= -r3.error_estimate,
        format!(
            "exponential margin {} (M = {}), constant margin {}, simulation flags {} margin {} (error estimate {})",
            r1.conclusion_margin,
            r1.m,
            r2.conclusion_margin,
            r3.hypothesis_violations(),
            r3.conclusion_margin,
            r3.error_estimate
        ),
    )
}

fn criterion_7() -> Outcome {
    let (sim, run) = reference();
    let ledger = ConstantLedger::build(&sim, LedgerOptions::default()).map_err(|e| e.to_string())?;
    let windows = [(0.5, 1.0), (1.0, 3.0), (2.0, 8.0)];
    let mut ok = true;
    let mut lines = Vec::new();
    for big_t in [1.0, 5.0, 10.0] {
        let r = observation_estimate_check(&sim, &run, &ledger, big_t, &windows).map_err(|e| e.to_string())?;
        ok &= r.pass();
        lines.push(format!("T={big_t}: margin {}", r.margin));
        if big_t == 10.0 {
            for w in &r.windows {
                lines.push(format!("({}, {}): margin {}", w.t1, w.t, w.margin));
            }
        }
    }
    ensure(ok, lines.join("; "))
}

fn criterion_8() -> Outcome {
    let (sim, run) = reference();
    let ledger = ConstantLedger::build(&sim, LedgerOptions::default()).map_err(|e| e.to_string())?;
    let entries = certificate_checks(&run, &ledger);
    let wanted = ["decay_certificate", "theta_contraction", "theta_below_one", "fitted_rate_dominates"];
    let mut ok = ledger.chain.beta.is_positive();
    let mut lines = Vec::new();
    for id in wanted {
        match entries.iter().find(|e| e.invariant_id == id) {
            Some(e) => {
                ok &= e.pass;
                lines.push(format!("{id}: {} (margin {})", if e.pass { "ok" } else { "violated" }, e.margin));
            }
            None => {
                ok = false;
                lines.push(format!("{id}: missing"));
            }
        }
    }
    lines.push(format!("beta = {}", ledger.chain.beta));
    ensure(ok, lines.join("; "))
}

fn criterion_9() -> Outcome {
    let sim = Simulation::new(reference_config(256, 10.0)).unwrap();
    let ledger = ConstantLedger::build(&sim, LedgerOptions::default()).map_err(|e| e.to_string())?;
    let a = &ledger.analysis;
    let c = &ledger.chain;
    let two = Ext::from_f64(2.0);
    let checks = [
        ("C0 in (0,1)", a.big_c0 > 0.0 && a.big_c0 < 1.0),
        ("C1 > 1", a.big_c1 > 1.0),
        ("s2 in (0,1]", a.s2 > 0.0 && a.s2 <= 1.0),
        ("theta in (0,1)", c.ln_theta.is_negative()),
        ("gamma = 1/theta", c.ln_gamma == -c.ln_theta),
        ("beta = |ln theta|/2", c.beta == c.ln_theta.abs() / two),
        ("M_ell <= bound", c.m_ell <= c.m_bound),
        ("recomputation identical", verify_ledger(&sim, &ledger).unwrap_or(false)),
    ];
    let failed: Vec<&str> = checks.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
    ensure(
        failed.is_empty(),
        format!("{} checks, failed: {:?}; theta = exp(-{}), M_ell = {} <= {}", checks.len(), failed, c.ln_inv_theta, c.m_ell, c.m_bound),
    )
}

fn criterion_10() -> Outcome {
    let cases: Vec<(f64, Option<f64>)> = vec![
        (1.0, None),
        (1.0, Some(0.2)),
        (1.0, Some(0.1)),
        (1.0, Some(0.05)),
        (0.25, Some(0.05)),
        (0.5, Some(0.05)),
        (2.0, Some(0.05)),
    ];
    let mut ok = true;
    let mut lines = Vec::new();
    for (k0, r) in cases {
        let mut cfg = reference_config(256, 10.0);
        cfg.catalyst.k0 = k0;
        match r {
            None => cfg.catalyst.kind = CatalystKind::Constant,
            Some(r) => cfg.catalyst.r = r,
        }
        let run = Simulation::new(cfg).unwrap().run().unwrap();
        let rate = fit_decay_rate(&run.trace, "l2_dist", None).map(|f| f.rate).unwrap_or(f64::NAN);
        ok &= run.failure.is_none() && rate > 0.0;
        let support = r.map_or("all".to_string(), |r| format!("B(0.25,{r})"));
        lines.push(format!("k0={k0} on {support}: {rate:.4}"));
    }
    ensure(ok, lines.join("; "))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("conservation and monotonicity", criterion_1),
        ("heat decay oracle", criterion_2),
        ("energy identity", criterion_3),
        ("boundary cancellation", criterion_4),
        ("weight geometry", criterion_5),
        ("interpolation lemma", criterion_6),
        ("observation estimate", criterion_7),
        ("decay certificate", criterion_8),
        ("ledger integrity", criterion_9),
        ("degenerate vs positive catalyst", criterion_10),
    ];
    let mut failures = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".to_string()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("PASS criterion {:>2} ({name}) [{secs:.1}s]: {msg}", k + 1),
            Err(msg) => {
                failures += 1;
                println!("FAIL criterion {:>2} ({name}) [{secs:.1}s]: {msg}", k + 1);
            }
        }
    }
    if failures > 0 {
        eprintln!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
