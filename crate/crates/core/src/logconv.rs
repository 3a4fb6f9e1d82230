//! Tilted functions, the symmetric and antisymmetric quadratic forms, the
//! frequency function, the three-time interpolation lemma, and the
//! observation estimate, all evaluated on simulation output.
//!
//! Indices run over `i = 1..4` with `u₃ = u₁`, `u₄ = u₂`, `Φ₂ = Φ₁`,
//! `Φ₄ = Φ₃` and `d = (d₁, d₂, d₁, d₂)`. The quadratic forms are implemented
//! for the interval (`n = 1`) only.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{fd_derivative, ReportEntry};
use crate::error::{invalid, Error, Result};
use crate::ext::Ext;
use crate::grid::{gradient_1d, integrate_unchecked, Grid};
use crate::ledger::{ChainConstants, ConstantLedger};
use crate::quad::{log_trapezoid, logaddexp, logsumexp};
use crate::solver::{RunOutput, Simulation, StatePair};
use crate::tolerances;
use crate::weight::{phi_eta_fields, WeightParams};

/// Tilted state `f_i = u_i e^{Φ_i/2}` with forcing and weight data.
#[derive(Debug, Clone, PartialEq)]
pub struct TiltedState {
    pub t: f64,
    pub f: [Vec<f64>; 4],
    pub v: [Vec<f64>; 4],
    pub phi: [Vec<f64>; 4],
    pub eta: [Vec<f64>; 4],
    pub d: [f64; 4],
    pub params: WeightParams,
}

impl TiltedState {
    /// Tilted forcing `Ϝ_i = v_i e^{Φ_i/2}`.
    pub fn forcing(&self, i: usize) -> Vec<f64> {
        self.v[i].iter().zip(&self.phi[i]).map(|(v, p)| v * libm::exp(0.5 * p)).collect()
    }
}

fn check_params(grid: &Grid, params: &WeightParams) -> Result<()> {
    params.validate()?;
    if params.domain != grid.domain {
        return Err(invalid("params", "weight domain differs from the grid domain"));
    }
    Ok(())
}

/// Tilts a state at its own time `state.t`.
pub fn tilt(sim: &Simulation, state: &StatePair, params: &WeightParams) -> Result<TiltedState> {
    let grid = &sim.grid;
    grid.check(&state.a)?;
    grid.check(&state.b)?;
    check_params(grid, params)?;
    let k = sim.catalyst_field(state.t);
    let (d1, d2) = (sim.config.d1, sim.config.d2);
    let (phi, eta) = phi_eta_fields(params, [d1, d2], grid, state.t)?;
    let u1 = state.u1();
    let u2 = state.u2();
    let v1: Vec<f64> = (0..grid.len()).map(|c| k[c] * (u1[c] + u2[c] + 2.0) * (u2[c] - u1[c])).collect();
    let v2: Vec<f64> = v1.iter().map(|x| -x).collect();
    let tiltf = |u: &[f64], p: &[f64]| -> Vec<f64> { u.iter().zip(p).map(|(u, p)| u * libm::exp(0.5 * p)).collect() };
    let f = [tiltf(&u1, &phi[0]), tiltf(&u2, &phi[1]), tiltf(&u1, &phi[2]), tiltf(&u2, &phi[3])];
    Ok(TiltedState { t: state.t, f, v: [v1.clone(), v2.clone(), v1, v2], phi, eta, d: [d1, d2, d1, d2], params: *params })
}

/// Scalar forms of one tilted state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticForms {
    /// `Σ dᵢ∫|∇fᵢ|² − Σ∫ηᵢ fᵢ²` with cell-centered gradients.
    pub sff: f64,
    /// `−Σ dᵢ∫Δfᵢ fᵢ − Σ∫ηᵢ fᵢ²` with the finite-volume Laplacian and the
    /// Robin wall flux `∂ₙfᵢ = ½ ∂ₙΦᵢ fᵢ`.
    pub sff_direct: f64,
    /// `Σ∫(−dᵢ∇Φᵢ·∇fᵢ − ½dᵢΔΦᵢ fᵢ) fᵢ`; zero in the continuum.
    pub aff: f64,
    /// `‖Ϝ‖² = Σ∫vᵢ² e^{Φᵢ}`.
    pub f2: f64,
    /// `‖f‖²`.
    pub norm2: f64,
    /// `⟨Ϝ, f⟩`.
    pub forcing: f64,
}

/// Evaluates the quadratic forms on the interval.
pub fn quadratic_forms(grid: &Grid, ts: &TiltedState) -> Result<QuadraticForms> {
    if grid.domain.dim != 1 {
        return Err(Error::UnsupportedDimension { dim: grid.domain.dim, operation: "quadratic_forms" });
    }
    for i in 0..4 {
        grid.check(&ts.f[i])?;
        grid.check(&ts.v[i])?;
    }
    let p = &ts.params;
    let gam = p.gamma(ts.t);
    let n = grid.len();
    let mut out = QuadraticForms { sff: 0.0, sff_direct: 0.0, aff: 0.0, f2: 0.0, norm2: 0.0, forcing: 0.0 };
    for i in 0..4 {
        let sign = WeightParams::phi_sign(i + 1);
        let di = ts.d[i];
        let f = &ts.f[i];
        let grad = gradient_1d(grid, f)?;
        let ff = ts.forcing(i);
        let mut grad_sq = 0.0;
        let mut eta_f = 0.0;
        let mut aff = 0.0;
        for c in 0..n {
            let x = &grid.centers[c];
            let vol = grid.volumes[c];
            let grad_phi = p.s * sign * p.grad_psi(x)[0] / gam;
            let lap_phi = p.s * sign * p.laplacian_psi(x) / gam;
            grad_sq += vol * grad[c] * grad[c];
            eta_f += vol * ts.eta[i][c] * f[c] * f[c];
            aff += vol * (-di * grad_phi * grad[c] - 0.5 * di * lap_phi * f[c]) * f[c];
            out.f2 += vol * ff[c] * ff[c];
            out.norm2 += vol * f[c] * f[c];
            out.forcing += vol * ff[c] * f[c];
        }
        // −∫Δf f = Σ_faces T (Δf)² − Σ_walls area ∂ₙf f
        let mut energy = 0.0;
        for face in &grid.faces {
            let diff = f[face.b] - f[face.a];
            energy += face.trans * diff * diff;
        }
        let mut wall = 0.0;
        for bf in &grid.boundary {
            let c = bf.cell;
            let inner = if c == 0 { 1 } else { n - 2 };
            let f_wall = 0.5 * (3.0 * f[c] - f[inner]);
            let dn_phi = p.s * sign * (p.grad_psi(&bf.point)[0] * bf.normal[0]) / gam;
            wall += bf.area * 0.5 * dn_phi * f_wall * f[c];
        }
        out.sff += di * grad_sq - eta_f;
        out.sff_direct += di * (energy - wall) - eta_f;
        out.aff += aff;
    }
    Ok(out)
}

/// Constants used to flag the differential inequalities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyBounds {
    pub c0: f64,
    pub c1: f64,
    /// Admissible convexity parameter; the sign check applies when `s ≤ s2`.
    pub s2: f64,
}

/// Frequency function and related series over the snapshots in `[0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyTrace {
    pub times: Vec<f64>,
    /// `N = ⟨Sf,f⟩/‖f‖²`, `None` where `‖f‖²` is below the floor.
    pub n_values: Vec<Option<f64>>,
    pub sff: Vec<f64>,
    pub sff_direct: Vec<f64>,
    pub aff: Vec<f64>,
    pub norm2: Vec<f64>,
    pub f_norm2: Vec<f64>,
    pub forcing: Vec<f64>,
    /// `½ d/dt‖f‖² + ⟨Sf,f⟩ − ⟨Ϝ,f⟩` with a finite-difference time derivative.
    pub sem_residual: Vec<f64>,
    /// Sample times violating the bound on `N′`.
    pub growth_violations: Vec<f64>,
    /// Sample times violating the two-sided bound on `½y′ + ⟨Sf,f⟩`.
    pub balance_violations: Vec<f64>,
    /// Sample times where `‖Ϝ‖² > C₁(‖f‖² + ⟨Sf,f⟩)`.
    pub forcing_violations: Vec<f64>,
    /// Sample times where `⟨Sf,f⟩ < 0` although `s ≤ s₂`.
    pub sign_violations: Vec<f64>,
}

impl FrequencyTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Every flag list is empty.
    pub fn clean(&self) -> bool {
        self.growth_violations.is_empty()
            && self.balance_violations.is_empty()
            && self.forcing_violations.is_empty()
            && self.sign_violations.is_empty()
    }
}

fn rounding(scale: f64) -> f64 {
    tolerances::ROUNDING_REL * scale.abs().max(f64::MIN_POSITIVE)
}

/// Maximal runs of consecutive defined samples.
fn defined_runs(values: &[Option<f64>]) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start = None;
    for (k, v) in values.iter().enumerate() {
        match (v, start) {
            (Some(_), None) => start = Some(k),
            (None, Some(s)) => {
                runs.push((s, k));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, values.len()));
    }
    runs
}

/// Computes the frequency trace over snapshots with `t ≤ T`, flagging
/// violations of the differential inequalities when `bounds` is given.
pub fn frequency_trace(
    sim: &Simulation,
    run: &RunOutput,
    params: &WeightParams,
    bounds: Option<FrequencyBounds>,
) -> Result<FrequencyTrace> {
    let mut tr = FrequencyTrace {
        times: Vec::new(),
        n_values: Vec::new(),
        sff: Vec::new(),
        sff_direct: Vec::new(),
        aff: Vec::new(),
        norm2: Vec::new(),
        f_norm2: Vec::new(),
        forcing: Vec::new(),
        sem_residual: Vec::new(),
        growth_violations: Vec::new(),
        balance_violations: Vec::new(),
        forcing_violations: Vec::new(),
        sign_violations: Vec::new(),
    };
    for snap in run.snapshots.iter().filter(|s| s.t <= params.horizon) {
        let ts = tilt(sim, snap, params)?;
        let q = quadratic_forms(&sim.grid, &ts)?;
        tr.times.push(snap.t);
        tr.n_values.push(if q.norm2 < tolerances::NORM_FLOOR { None } else { Some(q.sff / q.norm2) });
        tr.sff.push(q.sff);
        tr.sff_direct.push(q.sff_direct);
        tr.aff.push(q.aff);
        tr.norm2.push(q.norm2);
        tr.f_norm2.push(q.f2);
        tr.forcing.push(q.forcing);
    }
    if tr.times.len() < 3 {
        tr.sem_residual = vec![0.0; tr.times.len()];
        return Ok(tr);
    }
    let dy = fd_derivative(&tr.times, &tr.norm2)?;
    tr.sem_residual = (0..tr.len()).map(|k| 0.5 * dy.values[k] + tr.sff[k] - tr.forcing[k]).collect();

    let Some(b) = bounds else { return Ok(tr) };
    let h = params.h;
    for k in 0..tr.len() {
        let t = tr.times[k];
        let (y, sff) = (tr.norm2[k], tr.sff[k]);
        if y < tolerances::NORM_FLOOR {
            continue;
        }
        let lhs = (0.5 * dy.values[k] + sff).abs();
        let rhs = 0.5 * sff + b.c1 / h * y + 0.5 * dy.error[k];
        if lhs > rhs + rounding(lhs.max(rhs)) {
            tr.balance_violations.push(t);
        }
        let f2_bound = b.c1 * (y + sff);
        if tr.f_norm2[k] > f2_bound + rounding(f2_bound) {
            tr.forcing_violations.push(t);
        }
        if params.s <= b.s2 && sff < -rounding(y.max(sff.abs())) {
            tr.sign_violations.push(t);
        }
    }
    for (lo, hi) in defined_runs(&tr.n_values) {
        if hi - lo < 3 {
            continue;
        }
        let ns: Vec<f64> = tr.n_values[lo..hi].iter().map(|v| v.unwrap_or(0.0)).collect();
        let dn = fd_derivative(&tr.times[lo..hi], &ns)?;
        #[allow(clippy::needless_range_loop)]
        for j in 0..ns.len() {
            let t = tr.times[lo + j];
            if t >= params.horizon {
                continue;
            }
            let bound = ((1.0 + b.c0) / params.gamma(t) + b.c1) * ns[j] + 2.0 * b.c1 / (h * h) + dn.error[j];
            if dn.values[j] > bound + rounding(bound) {
                tr.growth_violations.push(t);
            }
        }
    }
    Ok(tr)
}

/// Sampled data for the three-time interpolation lemma.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LembpInput {
    pub times: Vec<f64>,
    pub y: Vec<f64>,
    pub n: Vec<f64>,
    pub f1: Vec<f64>,
    pub f2: Vec<f64>,
    pub c0: f64,
    pub c1: f64,
    pub h: f64,
    /// `T`.
    pub horizon: f64,
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
}

/// Outcome of [`lembp_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LembpReport {
    pub m: Ext,
    pub d: Ext,
    /// Sample times violating the first hypothesis.
    pub first_violations: Vec<f64>,
    /// Sample times violating the second hypothesis.
    pub second_violations: Vec<f64>,
    /// `ln RHS − ln LHS` of the conclusion.
    pub conclusion_margin: Ext,
    /// Change of the margin when every other sample is dropped.
    pub error_estimate: Ext,
}

impl LembpReport {
    pub fn hypothesis_violations(&self) -> usize {
        self.first_violations.len() + self.second_violations.len()
    }

    /// Hypotheses hold and the conclusion margin clears `−error_estimate`.
    pub fn pass(&self) -> bool {
        self.hypothesis_violations() == 0 && self.conclusion_margin >= -self.error_estimate
    }
}

/// Linear interpolation of samples at `t`.
fn interp(ts: &[f64], ys: &[f64], t: f64) -> f64 {
    let k = ts.partition_point(|s| *s < t);
    if k == 0 {
        return ys[0];
    }
    if k >= ts.len() {
        return ys[ts.len() - 1];
    }
    if ts[k] == t {
        return ys[k];
    }
    let w = (t - ts[k - 1]) / (ts[k] - ts[k - 1]);
    ys[k - 1] + w * (ys[k] - ys[k - 1])
}

/// Trapezoid integral of `|g|` over `[a, b]` using samples and interpolated ends.
fn trapezoid_abs(ts: &[f64], gs: &[f64], a: f64, b: f64) -> f64 {
    let mut nodes = vec![(a, interp(ts, gs, a).abs())];
    for (t, g) in ts.iter().zip(gs) {
        if *t > a && *t < b {
            nodes.push((*t, g.abs()));
        }
    }
    nodes.push((b, interp(ts, gs, b).abs()));
    nodes.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)).sum()
}

const LEMBP_QUADRATURE_NODES: usize = 4096;

/// `ln ∫_a^b e^{tC₁}/(T − t + h)^{1+C₀} dt` by the trapezoid rule in log space.
fn ln_weight_integral(c0: f64, c1: f64, horizon: f64, h: f64, a: f64, b: f64) -> f64 {
    let m = LEMBP_QUADRATURE_NODES;
    let ts: Vec<f64> = (0..=m).map(|k| a + (b - a) * k as f64 / m as f64).collect();
    let gs: Vec<f64> = ts.iter().map(|t| t * c1 - (1.0 + c0) * libm::log(horizon - t + h)).collect();
    log_trapezoid(&ts, &gs)
}

fn lembp_margin(input: &LembpInput, stride: usize) -> (Ext, Ext, Ext) {
    let ts: Vec<f64> = input.times.iter().step_by(stride).copied().collect();
    let pick = |v: &[f64]| -> Vec<f64> { v.iter().step_by(stride).copied().collect() };
    let (ys, f1s, f2s) = (pick(&input.y), pick(&input.f1), pick(&input.f2));
    let (t1, t2, t3) = (input.t1, input.t2, input.t3);
    let (c0, c1, big_t, h) = (input.c0, input.c1, input.horizon, input.h);
    let ln_num = ln_weight_integral(c0, c1, big_t, h, t2, t3);
    let ln_den = ln_weight_integral(c0, c1, big_t, h, t1, t2);
    let m = Ext::from_f64(3.0) * Ext::exp_f64(ln_num - ln_den);
    let one_m = Ext::ONE + m;
    let bracket = (t3 - t1) * (c1 + trapezoid_abs(&ts, &f2s, t1, t3)) + trapezoid_abs(&ts, &f1s, t1, t3);
    let d = Ext::from_f64(3.0) * one_m * Ext::from_f64(bracket);
    let (y1, y2, y3) = (interp(&ts, &ys, t1), interp(&ts, &ys, t2), interp(&ts, &ys, t3));
    let margin = if y2 == 0.0 {
        Ext::ZERO
    } else if y1 <= 0.0 || y3 <= 0.0 {
        Ext::from_f64(-f64::MAX)
    } else {
        let gam_ratio = libm::log((big_t - t1 + h) / (big_t - t3 + h));
        let inner = 3.0 * bracket + 3.0 * c0 * gam_ratio + (libm::log(y1) - libm::log(y2));
        one_m * Ext::from_f64(inner) + Ext::from_f64(libm::log(y3) - libm::log(y1))
    };
    (m, d, margin)
}

/// Checks both hypotheses of the lemma on the samples and evaluates the
/// conclusion `y(t₂)^{1+M} ≤ e^D ((T−t₁+h)/(T−t₃+h))^{3C₀(1+M)} y(t₃) y(t₁)^M`.
pub fn lembp_check(input: &LembpInput) -> Result<LembpReport> {
    let n = input.times.len();
    for (name, len) in [("y", input.y.len()), ("n", input.n.len()), ("f1", input.f1.len()), ("f2", input.f2.len())] {
        if len != n {
            return Err(invalid("lembp", alloc::format!("{name} has {len} samples, times has {n}")));
        }
    }
    if n < 5 {
        return Err(Error::InsufficientSamples { needed: 5, got: n });
    }
    if input.times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("times", "must be strictly increasing"));
    }
    if input.y.iter().chain(&input.n).any(|v| !(*v >= 0.0)) {
        return Err(invalid("y/n", "samples must be nonnegative"));
    }
    if !(input.c0 >= 0.0 && input.c1 >= 0.0 && input.h > 0.0 && input.horizon > 0.0) {
        return Err(invalid("constants", "need C0, C1 >= 0 and h, T > 0"));
    }
    let (t0, tn) = (input.times[0], input.times[n - 1]);
    if !(t0 <= input.t1 && input.t1 < input.t2 && input.t2 < input.t3 && input.t3 <= tn && input.t3 <= input.horizon) {
        return Err(invalid("t1/t2/t3", "need t1 < t2 < t3 inside the sampled window and t3 <= T"));
    }

    let dy = fd_derivative(&input.times, &input.y)?;
    let dn = fd_derivative(&input.times, &input.n)?;
    let mut first = Vec::new();
    let mut second = Vec::new();
    for k in 0..n {
        let t = input.times[k];
        if t >= input.horizon {
            continue;
        }
        let gam = input.horizon - t + input.h;
        let (y, nn) = (input.y[k], input.n[k]);
        let lhs = (0.5 * dy.values[k] + nn * y).abs();
        let rhs = (0.5 * nn + input.c0 / gam + input.c1) * y + input.f1[k] * y + 0.5 * dy.error[k];
        if lhs > rhs + rounding(lhs.max(rhs)) {
            first.push(t);
        }
        let bound = ((1.0 + input.c0) / gam + input.c1) * nn + input.f2[k] + dn.error[k];
        if dn.values[k] > bound + rounding(bound) {
            second.push(t);
        }
    }
    let (m, d, margin) = lembp_margin(input, 1);
    let (_, _, coarse) = lembp_margin(input, 2);
    Ok(LembpReport {
        m,
        d,
        first_violations: first,
        second_violations: second,
        conclusion_margin: margin,
        error_estimate: (margin - coarse).abs(),
    })
}

/// Builds the lemma input from a frequency trace with `F₁ = C₁/h`, `F₂ = 2C₁/h²`.
/// Samples where the tilted state vanishes exactly take `N = 0`.
pub fn lembp_input_from_trace(
    trace: &FrequencyTrace,
    c0: f64,
    c1: f64,
    params: &WeightParams,
    t: (f64, f64, f64),
) -> Result<LembpInput> {
    // an exactly vanishing tilted state makes the lemma vacuous; N = 0 there
    let idx: Vec<usize> =
        (0..trace.len()).filter(|k| trace.n_values[*k].is_some() || trace.norm2[*k] == 0.0).collect();
    if idx.len() != trace.len() {
        return Err(invalid("trace", "frequency undefined at some samples"));
    }
    let h = params.h;
    Ok(LembpInput {
        times: trace.times.clone(),
        y: trace.norm2.clone(),
        n: trace.n_values.iter().map(|v| v.unwrap_or(0.0)).collect(),
        f1: vec![c1 / h; trace.len()],
        f2: vec![2.0 * c1 / (h * h); trace.len()],
        c0,
        c1,
        h,
        horizon: params.horizon,
        t1: t.0,
        t2: t.1,
        t3: t.2,
    })
}

/// State at time `t`, interpolating linearly between snapshots.
pub fn state_at(run: &RunOutput, t: f64) -> Result<StatePair> {
    let snaps = &run.snapshots;
    let last = snaps.last().ok_or(Error::InsufficientSamples { needed: 1, got: 0 })?;
    let tol = 1e-9;
    if t < snaps[0].t - tol || t > last.t + tol {
        return Err(Error::TimeOutOfRange { t, horizon: last.t });
    }
    let k = snaps.partition_point(|s| s.t < t - tol);
    let k = k.min(snaps.len() - 1);
    if (snaps[k].t - t).abs() <= tol || k == 0 {
        return Ok(snaps[k].clone());
    }
    let (a, b) = (&snaps[k - 1], &snaps[k]);
    let mut s = a.lerp(b, (t - a.t) / (b.t - a.t));
    s.t = t;
    Ok(s)
}

fn l2_dist(grid: &Grid, s: &StatePair) -> f64 {
    let w: Vec<f64> = s.a.iter().zip(&s.b).map(|(a, b)| libm::pow(a - 1.0, 2.0) + libm::pow(b - 1.0, 2.0)).collect();
    integrate_unchecked(grid, &w)
}

fn l2_on(grid: &Grid, s: &StatePair, cells: &[usize]) -> f64 {
    cells
        .iter()
        .map(|&c| grid.volumes[c] * (libm::pow(s.a[c] - 1.0, 2.0) + libm::pow(s.b[c] - 1.0, 2.0)))
        .sum()
}

/// `ln ∫|u|² e^{κ φ₁}` for an extended-range exponent factor `κ`.
pub fn weighted_log_norm(grid: &Grid, s: &StatePair, params: &WeightParams, kappa: Ext) -> Ext {
    let terms: Vec<Ext> = (0..grid.len())
        .filter_map(|c| {
            let w = grid.volumes[c] * (libm::pow(s.a[c] - 1.0, 2.0) + libm::pow(s.b[c] - 1.0, 2.0));
            (w > 0.0).then(|| Ext::from_f64(libm::log(w)) + kappa * Ext::from_f64(params.phi(1, &grid.centers[c])))
        })
        .collect();
    let Some(max) = terms.iter().copied().reduce(|a, b| a.max(b)) else {
        return Ext::from_f64(f64::NEG_INFINITY.max(-f64::MAX));
    };
    let rest = logsumexp(terms.iter().map(|x| (*x - max).to_f64()));
    max + Ext::from_f64(rest)
}

/// Checks the run against the data hypotheses with bound `K₀`:
/// `(∫|uᵢ|³)^{2/3} ≤ K₀` and `|(v₁,v₂)|² ≤ K₀(|u|² + |u|⁴)` cellwise.
pub fn check_hypotheses(sim: &Simulation, run: &RunOutput, big_k0: f64) -> Result<()> {
    let grid = &sim.grid;
    for s in &run.snapshots {
        for (species, u) in [(1usize, s.u1()), (2, s.u2())] {
            let cubes: Vec<f64> = u.iter().map(|x| libm::pow(x.abs(), 3.0)).collect();
            let l3 = libm::pow(integrate_unchecked(grid, &cubes), 2.0 / 3.0);
            if l3 > big_k0 * (1.0 + tolerances::ROUNDING_REL) {
                let bound = if species == 1 { "cubic moment of u1" } else { "cubic moment of u2" };
                return Err(Error::HypothesisViolated { bound, t: s.t, value: l3, limit: big_k0 });
            }
        }
        let k = sim.catalyst_field(s.t);
        for (c, kc) in k.iter().enumerate() {
            let (u1, u2) = (s.a[c] - 1.0, s.b[c] - 1.0);
            let v1 = kc * (u1 + u2 + 2.0) * (u2 - u1);
            let lhs = 2.0 * v1 * v1;
            let u2n = u1 * u1 + u2 * u2;
            let rhs = big_k0 * (u2n + u2n * u2n);
            if lhs > rhs * (1.0 + tolerances::ROUNDING_REL) + f64::MIN_POSITIVE {
                return Err(Error::HypothesisViolated { bound: "pointwise reaction bound", t: s.t, value: lhs, limit: rhs });
            }
        }
    }
    Ok(())
}

/// Margin of one observation estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowMargin {
    pub t1: f64,
    pub t: f64,
    pub margin: Ext,
}

/// Observation estimate margins at horizon `T` and on shifted windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationReport {
    pub horizon: f64,
    pub margin: Ext,
    pub windows: Vec<WindowMargin>,
}

impl ObservationReport {
    pub fn pass(&self) -> bool {
        self.margin >= Ext::ZERO && self.windows.iter().all(|w| w.margin >= Ext::ZERO)
    }
}

/// `ln RHS − ln LHS` of `(‖u(t)‖²)^{1+M} ≤ e^{c(1+1/τ)} ‖u(t)‖²_B (‖u(t₁)‖²)^M`, `τ = t − t₁`.
fn observation_margin(sim: &Simulation, run: &RunOutput, ledger: &ConstantLedger, t1: f64, t: f64) -> Result<Ext> {
    if !(t > t1) {
        return Err(invalid("window", "need t > t1"));
    }
    let chain = ledger.chain_at(t - t1)?;
    let grid = &sim.grid;
    let s0 = state_at(run, t1)?;
    let st = state_at(run, t)?;
    let (n0, nt, nb) = (l2_dist(grid, &s0), l2_dist(grid, &st), l2_on(grid, &st, sim.ball_cells()));
    if nt == 0.0 {
        return Ok(Ext::ZERO);
    }
    if nb == 0.0 {
        return Ok(Ext::from_f64(-f64::MAX));
    }
    let tau = t - t1;
    let prefactor = chain.c * Ext::from_f64(1.0 + 1.0 / tau);
    Ok(prefactor + Ext::from_f64(libm::log(nb) - libm::log(nt)) + chain.m * Ext::from_f64(libm::log(n0) - libm::log(nt)))
}

/// Evaluates the observation estimate at horizon `T` (from `t₁ = 0`) and on
/// each `(t₁, t)` window, after checking the data hypotheses.
pub fn observation_estimate_check(
    sim: &Simulation,
    run: &RunOutput,
    ledger: &ConstantLedger,
    horizon: f64,
    windows: &[(f64, f64)],
) -> Result<ObservationReport> {
    check_hypotheses(sim, run, ledger.inputs.big_k0)?;
    let margin = observation_margin(sim, run, ledger, 0.0, horizon)?;
    let windows = windows
        .iter()
        .map(|&(t1, t)| Ok(WindowMargin { t1, t, margin: observation_margin(sim, run, ledger, t1, t)? }))
        .collect::<Result<Vec<_>>>()?;
    Ok(ObservationReport { horizon, margin, windows })
}

/// Checks the three inequalities that introduce the observation ball, at the
/// chain's `(T, h, ℓ)` and convexity parameter `s`.
pub fn step5_chain_check(
    sim: &Simulation,
    run: &RunOutput,
    ledger: &ConstantLedger,
    chain: &ChainConstants,
    s: f64,
) -> Result<Vec<ReportEntry>> {
    let grid = &sim.grid;
    let big_t = chain.horizon;
    let params = WeightParams::new(grid.domain, sim.config.catalyst.x0, sim.config.catalyst.r, s, 1.0, big_t)?;
    let g = &ledger.geometry;
    let ell_h = chain.ell_h;
    let one = Ext::ONE;
    let s_ext = Ext::from_f64(s);
    // s/Γ at T, T − ℓh, T − 2ℓh: Γ = h, (ℓ+1)h, (2ℓ+1)h
    let k_t = s_ext / chain.h;
    let k_a = s_ext / ((chain.ell + one) * chain.h);
    let k_c = s_ext / ((Ext::from_f64(2.0) * chain.ell + one) * chain.h);
    let st = state_at(run, big_t)?;
    let sa = state_at(run, big_t - ell_h)?;
    let sc = state_at(run, big_t - 2.0 * ell_h)?;
    let s0 = state_at(run, 0.0)?;
    let ln_a = weighted_log_norm(grid, &sa, &params, k_a);
    let ln_b = weighted_log_norm(grid, &st, &params, k_t);
    let ln_c = weighted_log_norm(grid, &sc, &params, k_c);
    let ln2 = Ext::from_f64(core::f64::consts::LN_2);
    let m = chain.m_ell;
    let tol = tolerances::LOG_ROUNDING;

    let f1 = chain.ln_k_ell + ln2 + ln_b + m * (ln2 + ln_c) - (one + m) * ln_a;

    let (nb, nt, n0) = (l2_on(grid, &st, sim.ball_cells()), l2_dist(grid, &st), l2_dist(grid, &s0));
    let ln_rhs3 = if n0 > 0.0 {
        let tail = -(s_ext * Ext::from_f64(g.mu0) / chain.h) + Ext::from_f64(libm::log(n0));
        if nb > 0.0 {
            let lb = Ext::from_f64(libm::log(nb));
            let (hi, lo) = if lb > tail { (lb, tail) } else { (tail, lb) };
            hi + Ext::from_f64(logaddexp(0.0, (lo - hi).to_f64()))
        } else {
            tail
        }
    } else {
        Ext::from_f64(-f64::MAX)
    };
    let f3 = if nt == 0.0 { Ext::ZERO } else { ln_rhs3 - ln_b };

    let f4 = if nt == 0.0 {
        Ext::ZERO
    } else {
        s_ext * Ext::from_f64(g.mu1) / ((chain.ell + one) * chain.h) + ln_a - Ext::from_f64(libm::log(nt))
    };

    Ok(vec![
        ReportEntry::from_margin("step5_interpolation", "three-time interpolation of the weighted norm", if nt == 0.0 { Ext::ZERO } else { f1 }, tol),
        ReportEntry::from_margin("step5_ball", "weighted norm at T bounded by the ball norm plus the off-ball tail", f3, tol),
        ReportEntry::from_margin("step5_unweight", "norm at T bounded by the weighted norm at T - l h", f4, tol),
    ])
}
