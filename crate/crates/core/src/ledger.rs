//! Every named constant of the decay proof chain, with provenance.
//!
//! The chain runs
//!
//! ```text
//! geometry (c01, c02, c1, c2, c3, μ0, μ1) + data (K0, B0, Cp, C_Sob)
//!   → s0, s1, s2, C0 … C7            smallness thresholds and commutator bounds
//!   → ℓ, h, M_ℓ, D_ℓ, K_ℓ            interpolation step
//!   → μ2, μ3, (c, M)                 observation estimate
//!   → β1, θ, γ, β                    exponential decay
//! ```
//!
//! From `ℓ` on the values leave `f64` range by thousands of orders of
//! magnitude, so they are carried as [`Ext`]. `θ` is within a double
//! exponential of 1 and is therefore stored through `ln(1/θ)`.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{fit_decay_rate, ReportEntry};
use crate::error::{invalid, Error, Result};
use crate::ext::Ext;
use crate::grid::{self, dirichlet_energy, integrate, neumann_eigenvalue_1, Grid};
use crate::linalg::solve_implicit;
use crate::quad::{log_integral, logaddexp};
use crate::solver::{RunOutput, Simulation};
use crate::tolerances;
use crate::weight::{derivative_bounds, geometry_constants, DerivativeBounds, GeometryConstants, WeightParams};

/// `K₀ = max((4∫(a₀³ + b₀³) + 4)^{2/3}, 32 ‖k‖²_∞)`.
pub fn compute_k0(grid: &Grid, a0: &[f64], b0: &[f64], k_sup: f64) -> Result<f64> {
    grid.check(a0)?;
    grid.check(b0)?;
    let cubes: Vec<f64> = a0.iter().zip(b0).map(|(a, b)| a * a * a + b * b * b).collect();
    let l3 = integrate(grid, &cubes)?;
    Ok(libm::pow(4.0 * l3 + 4.0, 2.0 / 3.0).max(32.0 * k_sup * k_sup))
}

/// Ratio `(∫|g|⁶)^{1/3} / (∫g² + ∫|∇g|²)` with the discrete Dirichlet form.
pub fn sobolev_ratio(grid: &Grid, g: &[f64]) -> f64 {
    let six: f64 = grid.volumes.iter().zip(g).map(|(v, x)| v * libm::pow(*x, 6.0)).sum();
    let h1 = grid::inner(grid, g, g) + dirichlet_energy(grid, g);
    libm::cbrt(six) / h1
}

const SOBOLEV_TRIALS: usize = 1000;
const SOBOLEV_REFINEMENTS: usize = 60;

/// Upper estimate of the `H¹ ↪ L⁶` constant on the grid.
///
/// Maximizes [`sobolev_ratio`] over constants, random cosine series, peaked
/// exponentials, and a nonlinear power iteration `g ← (I − L)^{-1} g⁵` started
/// from the best trial, then applies a 1.1 safety factor.
pub fn compute_sobolev_constant(grid: &Grid, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let big_r = grid.domain.radius;
    let mut best = sobolev_ratio(grid, &vec![1.0; grid.len()]);
    let mut best_field = vec![1.0; grid.len()];
    let consider = |g: Vec<f64>, best: &mut f64, best_field: &mut Vec<f64>| {
        let q = sobolev_ratio(grid, &g);
        if q.is_finite() && q > *best {
            *best = q;
            *best_field = g;
        }
    };
    for _ in 0..SOBOLEV_TRIALS {
        let modes = rng.gen_range(1..=8);
        let c0: f64 = rng.gen_range(-1.0..1.0);
        let coeffs: Vec<(f64, f64)> = (1..=modes)
            .map(|m| (rng.gen_range(-1.0..1.0) / m as f64, rng.gen_range(0.0..core::f64::consts::TAU)))
            .collect();
        let g = grid.sample(|p| {
            let z = (p[0] + big_r) / (2.0 * big_r);
            let y = if grid.domain.dim > 1 { (p[1] + big_r) / (2.0 * big_r) } else { 0.0 };
            c0 + coeffs
                .iter()
                .enumerate()
                .map(|(m, (c, ph))| c * libm::cos(core::f64::consts::PI * (m + 1) as f64 * (z + 0.5 * y) + ph))
                .sum::<f64>()
        });
        consider(g, &mut best, &mut best_field);
    }
    let w_min = 4.0 * grid.spacing;
    for k in 0..64 {
        let center = [-big_r + 2.0 * big_r * (k % 16) as f64 / 15.0, 0.0, 0.0];
        let width = w_min * libm::pow(2.0, (k / 16) as f64);
        let g = grid.sample(|p| libm::exp(-libm::sqrt(grid::dist2(p, &center)) / width));
        consider(g, &mut best, &mut best_field);
    }
    let mut g = best_field.clone();
    for _ in 0..SOBOLEV_REFINEMENTS {
        let g5: Vec<f64> = g.iter().map(|x| libm::pow(*x, 5.0)).collect();
        let mut next = solve_implicit(grid, 1.0, &g5)?;
        let scale = libm::sqrt(grid::inner(grid, &next, &next));
        if !(scale > 0.0) {
            break;
        }
        next.iter_mut().for_each(|x| *x /= scale);
        consider(next.clone(), &mut best, &mut best_field);
        g = next;
    }
    Ok(tolerances::SOBOLEV_SAFETY * best)
}

/// Data entering the analysis constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LedgerInputs {
    pub d1: f64,
    pub d2: f64,
    /// Catalyst floor on the observation ball.
    pub k0: f64,
    pub k_max: f64,
    /// Initial floor `B₀`.
    pub b0: f64,
    /// Data bound `K₀`.
    pub big_k0: f64,
    /// Poincaré–Wirtinger constant `1/λ₁`.
    pub cp: f64,
    pub c_sob: f64,
}

impl LedgerInputs {
    fn max_d(&self) -> f64 {
        self.d1.max(self.d2)
    }

    fn min_d(&self) -> f64 {
        self.d1.min(self.d2)
    }
}

/// Smallness thresholds and commutator constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConstants {
    pub s0: f64,
    pub s1: f64,
    pub s2: f64,
    pub big_c0: f64,
    pub big_c1: f64,
    pub big_c2: f64,
    pub big_c3: f64,
    pub big_c4: f64,
    pub big_c5: f64,
    pub big_c6: f64,
    pub big_c7: f64,
}

/// `s0 … s2`, `C0 … C7` from geometry, derivative maxima and data bounds.
pub fn compute_analysis_constants(
    inputs: &LedgerInputs,
    geometry: &GeometryConstants,
    derivatives: &DerivativeBounds,
) -> Result<AnalysisConstants> {
    let (maxd, mind) = (inputs.max_d(), inputs.min_d());
    if !(mind > 0.0) {
        return Err(invalid("d1/d2", "diffusivities must be positive"));
    }
    let s0 = 1.0f64.min(2.0 / (geometry.c1 * maxd));
    let c2 = maxd * (derivatives.hessian + derivatives.grad_laplacian);
    let c3 = c2 * 2.5f64.max(maxd / 2.0);
    let c4 = derivatives.laplacian;
    let c5 = (maxd * c4).max((maxd * c4) * (maxd * c4));
    let s1 = 1.0f64.min(0.375 / (0.5 * maxd * derivatives.hessian + c5));
    let c6 = geometry.mu1 + maxd * derivatives.grad_sq;
    let c7 = maxd * c6 / (geometry.c2 * geometry.c3 * geometry.c3);
    let s2 = s0.min(s1).min(1.0 / (c3 + c5)).min(geometry.c2 / mind);
    if !(s2 > 0.0) {
        return Err(Error::InconsistentConstants { detail: format!("s2 = {s2} is not positive") });
    }
    let c0 = 1.0 - mind * s2 / (4.0 * geometry.c2);
    if !(c0 > 0.0 && c0 < 1.0) {
        return Err(Error::InconsistentConstants { detail: format!("C0 = {c0} outside (0, 1)") });
    }
    let k = inputs.big_k0;
    let c1 = 1.0f64
        .max(c3 + c5 + c7)
        .max(4.0 * k * (1.0 + k * inputs.c_sob))
        .max(4.0 * k * k * inputs.c_sob / mind);
    Ok(AnalysisConstants {
        s0,
        s1,
        s2,
        big_c0: c0,
        big_c1: c1,
        big_c2: c2,
        big_c3: c3,
        big_c4: c4,
        big_c5: c5,
        big_c6: c6,
        big_c7: c7,
    })
}

/// Interpolation step and decay constants at horizon `T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainConstants {
    pub horizon: f64,
    /// Smallest integer `ℓ ≥ 2` meeting the selection inequality.
    pub ell: Ext,
    /// `ln(ℓ + 1)`.
    pub ln_ell1: f64,
    /// `h = min(1/(2ℓ), T/(4ℓ)) / 2`.
    pub h: Ext,
    /// `ℓ h = min(1/4, T/8)`.
    pub ell_h: f64,
    pub m_ell: Ext,
    /// Closed-form upper bound `3 e^{C1} (ℓ+1)^{C0} / (1 − (2/3)^{C0})`.
    pub m_bound: Ext,
    pub d_ell: Ext,
    pub k_ell: Ext,
    pub ln_k_ell: Ext,
    pub mu2: Ext,
    pub mu3: Ext,
    /// Exponent `M = 1 + 2 M_ℓ` of the observation estimate.
    pub m: Ext,
    /// Prefactor exponent `c = 2 μ3 + ln 4`.
    pub c: Ext,
    pub beta1: f64,
    /// `ln(1/θ)`; `θ = exp(−ln_inv_theta)`.
    pub ln_inv_theta: Ext,
    /// `ln θ = −ln(1/θ)`.
    pub ln_theta: Ext,
    /// `ln γ = ln(1/θ)`.
    pub ln_gamma: Ext,
    /// `β = |ln θ| / 2`.
    pub beta: Ext,
}

/// Selection function of `L = ln(ℓ + 1)`; nonpositive once `ℓ` is admissible.
fn selection(l: f64, a: &AnalysisConstants, g: &GeometryConstants) -> f64 {
    let c0 = a.big_c0;
    let ln_mbar = libm::log(3.0) + a.big_c1 + c0 * l - libm::log(1.0 - libm::pow(2.0 / 3.0, c0));
    libm::log(g.mu1) + logaddexp(0.0, ln_mbar) - l - libm::log(g.mu0 / 2.0)
}

/// `(ℓ, ln(ℓ+1))` for the smallest admissible integer `ℓ ≥ 2`.
fn select_ell(a: &AnalysisConstants, g: &GeometryConstants) -> Result<(Ext, f64)> {
    let admissible = |l: f64| selection(l, a, g) <= 0.0;
    let l_min = libm::log(3.0);
    if admissible(l_min) {
        return Ok((Ext::from_f64(2.0), l_min));
    }
    // The selection function falls with slope at least 1 − C0 > 0.
    let mut hi = 2.0 * l_min;
    while !admissible(hi) {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::InconsistentConstants { detail: "no admissible ell".to_string() });
        }
    }
    let mut lo = l_min;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if admissible(mid) { hi = mid } else { lo = mid }
    }
    // exact integers while they fit in f64
    if hi < 36.0 {
        let mut ell = libm::ceil(libm::expm1(lo)).max(2.0);
        while !admissible(libm::log1p(ell)) {
            ell += 1.0;
        }
        while ell > 2.0 && admissible(libm::log(ell)) {
            ell -= 1.0;
        }
        return Ok((Ext::from_f64(ell), libm::log1p(ell)));
    }
    // Beyond 2^52 consecutive integers are not distinguishable; ℓ is the
    // admissible value e^L − 1 at the upper end of the bracket.
    let ell = Ext::exp_f64(hi) - Ext::ONE;
    Ok((ell, hi))
}

/// `ln ∫ exp(−q e^w + q − C0 w) dw` over `[w0, w0 + width]` with `ln q` given.
fn ln_m_integral(ln_q: f64, c0: f64, w0: f64, width: f64) -> f64 {
    let q = libm::exp(ln_q);
    let g = move |w: f64| -libm::exp(ln_q + w) + q - c0 * w;
    let slope = move |w: f64| -libm::exp(ln_q + w) - c0;
    let panel = move |w: f64| 0.5 / (c0 + libm::exp(ln_q + w));
    log_integral(g, slope, panel, w0, w0 + width)
}

/// `M_ℓ` by quadrature, after substituting `T − t = h σ` and `w = ln(1 + σ)`.
pub fn compute_m_ell(big_c0: f64, big_c1: f64, ln_ell1: f64, ln_h: f64) -> Ext {
    let ln_q = libm::log(big_c1) + ln_h;
    let num = ln_m_integral(ln_q, big_c0, 0.0, ln_ell1);
    // ln((1 + 2ℓ)/(1 + ℓ)) = ln(2 − 1/(1 + ℓ))
    let width = libm::log(2.0 - libm::exp(-ln_ell1));
    let den = ln_m_integral(ln_q, big_c0, ln_ell1, width);
    Ext::from_f64(3.0) * Ext::exp_f64(num - den)
}

/// Interpolation and decay constants at horizon `T`.
pub fn compute_chain(
    analysis: &AnalysisConstants,
    inputs: &LedgerInputs,
    geometry: &GeometryConstants,
    horizon: f64,
) -> Result<ChainConstants> {
    if !(horizon > 0.0) {
        return Err(invalid("horizon", "must be positive"));
    }
    if !(inputs.k0 > 0.0) {
        return Err(invalid("k0", "the catalyst floor must be positive on the observation ball"));
    }
    let (c0, c1) = (analysis.big_c0, analysis.big_c1);
    let (ell, ln_ell1) = select_ell(analysis, geometry)?;
    let ell_h = 0.25f64.min(horizon / 8.0);
    let h = Ext::from_f64(ell_h) / ell;
    let ln_h = h.ln_f64();
    let m_ell = compute_m_ell(c0, c1, ln_ell1, ln_h);
    let one = Ext::ONE;
    let two = Ext::from_f64(2.0);
    let m_bound = Ext::from_f64(3.0) * Ext::exp_f64(c1) * Ext::exp_f64(c0 * ln_ell1)
        / Ext::from_f64(1.0 - libm::pow(2.0 / 3.0, c0));
    let d_ell = Ext::from_f64(3.0 * c1)
        * (one + m_ell)
        * (one + two * ell + Ext::from_f64(8.0) * ell * ell);
    let ln_2l1 = (two * ell + one).ln();
    let ln_k_ell = d_ell + Ext::from_f64(3.0 * c0) * (one + m_ell) * ln_2l1;
    let k_ell = ln_k_ell.exp();
    let mu2 = two * ell * Ext::from_f64(analysis.s2 * geometry.mu0);
    let mu3 = ((one + m_ell) * Ext::from_f64(core::f64::consts::LN_2) + ln_k_ell).max(mu2);
    let m = one + two * m_ell;
    let c = two * mu3 + Ext::from_f64(libm::log(4.0));
    let beta1 = (inputs.cp / (2.0 * inputs.d1))
        .max(inputs.cp / (2.0 * inputs.d2))
        .max(1.0 / (8.0 * inputs.b0 * inputs.k0));
    let ln_inv_theta = m.recip() * ((-(two * c)).exp() * m / Ext::from_f64(beta1)).ln_1p();
    let ln_theta = -ln_inv_theta;
    Ok(ChainConstants {
        horizon,
        ell,
        ln_ell1,
        h,
        ell_h,
        m_ell,
        m_bound,
        d_ell,
        k_ell,
        ln_k_ell,
        mu2,
        mu3,
        m,
        c,
        beta1,
        ln_inv_theta,
        ln_theta,
        ln_gamma: ln_inv_theta,
        beta: ln_theta.abs() / two,
    })
}

/// Ledger value: a number, or `exp` of a number for quantities within a
/// double exponential of 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LedgerValue {
    Real(Ext),
    ExpOf(Ext),
}

impl core::fmt::Display for LedgerValue {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            LedgerValue::Real(x) => write!(f, "{x}"),
            LedgerValue::ExpOf(x) => write!(f, "exp({x})"),
        }
    }
}

impl Serialize for LedgerValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        match self {
            LedgerValue::Real(x) => x.serialize(s),
            LedgerValue::ExpOf(_) => s.serialize_str(&self.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for LedgerValue {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        let x = Ext::deserialize(d)?;
        // `exp(y)` strings are read back as the value they denote
        Ok(LedgerValue::Real(x))
    }
}

/// One named constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub name: String,
    pub value: LedgerValue,
    /// Formula or sampling recipe.
    pub provenance: String,
    /// Descriptive label of where the constant enters.
    pub reference: String,
}

/// Options controlling ledger construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LedgerOptions {
    /// Horizon `T` for the interpolation step.
    pub horizon: f64,
    /// Initial number of geometry sample points.
    pub probe_resolution: usize,
    /// Seed of the Sobolev trial family.
    pub seed: u64,
}

impl Default for LedgerOptions {
    fn default() -> Self {
        LedgerOptions { horizon: 2.0, probe_resolution: tolerances::GEOMETRY_SAMPLES, seed: 0 }
    }
}

/// The complete ledger.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantLedger {
    pub options: LedgerOptions,
    pub inputs: LedgerInputs,
    pub geometry: GeometryConstants,
    pub derivatives: DerivativeBounds,
    pub analysis: AnalysisConstants,
    pub chain: ChainConstants,
    pub lambda1: f64,
}

impl ConstantLedger {
    /// Computes every constant for a prepared simulation.
    pub fn build(sim: &Simulation, options: LedgerOptions) -> Result<ConstantLedger> {
        let init = sim.init_state()?;
        let grid = &sim.grid;
        let cat = &sim.config.catalyst;
        let big_k0 = compute_k0(grid, &init.state.a, &init.state.b, cat.k_max())?;
        let lambda1 = neumann_eigenvalue_1(grid)?;
        let c_sob = compute_sobolev_constant(grid, options.seed)?;
        let params = weight_params(sim, options.horizon)?;
        let geometry = geometry_constants(&params, options.probe_resolution)?;
        let derivatives = derivative_bounds(&params, options.probe_resolution)?;
        let inputs = LedgerInputs {
            d1: sim.config.d1,
            d2: sim.config.d2,
            k0: cat.k0,
            k_max: cat.k_max(),
            b0: init.b0,
            big_k0,
            cp: 1.0 / lambda1,
            c_sob,
        };
        let analysis = compute_analysis_constants(&inputs, &geometry, &derivatives)?;
        let chain = compute_chain(&analysis, &inputs, &geometry, options.horizon)?;
        Ok(ConstantLedger { options, inputs, geometry, derivatives, analysis, chain, lambda1 })
    }

    /// Chain recomputed at another horizon.
    pub fn chain_at(&self, horizon: f64) -> Result<ChainConstants> {
        compute_chain(&self.analysis, &self.inputs, &self.geometry, horizon)
    }

    /// Flat list of named constants.
    pub fn entries(&self) -> Vec<LedgerEntry> {
        let g = &self.geometry;
        let d = &self.derivatives;
        let a = &self.analysis;
        let c = &self.chain;
        let i = &self.inputs;
        let r = |x: f64| LedgerValue::Real(Ext::from_f64(x));
        let e = LedgerValue::Real;
        let rows: Vec<(&str, LedgerValue, String, &str)> = vec![
            ("c01", r(g.c01), format!("min of (psi(x0)-psi)/|grad psi|^2 on B(x0,{:.6}) incl. limit 1/(2 lambda), / 1.05", g.neighborhood), "quadratic sandwich near the peak of the weight"),
            ("c02", r(g.c02), "max of the same ratio times 1.05".into(), "quadratic sandwich near the peak of the weight"),
            ("c1", r(g.c1), "1.05 max(|grad phi_i|^2/|phi_i| over samples (ball of one spacing around x0 excluded), 1/c01)".into(), "gradient bound for the shifted weights"),
            ("c2", r(g.c2), "1.05 max |phi_i|/|grad phi_i|^2 over the annulus (i=1,3) and its complement (i=1)".into(), "inverse gradient bound for the shifted weights"),
            ("c3", r(g.c3), "min of 2 psi off the annulus, / 1.05".into(), "separation of the two shifted weights"),
            ("rho", r(g.rho), "(|x0| + R)/2".into(), "inner radius of the boundary annulus"),
            ("mu0", r(g.mu0), "min of psi(x0) - psi outside B(x0,r) (/1.05 for n >= 2)".into(), "weight gap outside the observation ball"),
            ("mu1", r(g.mu1), "psi(x0) = 2|x0|R".into(), "sup of -phi_1"),
            ("max_grad_psi_sq", r(d.grad_sq), "sampled max |grad psi|^2".into(), "derivative maxima of the weight"),
            ("max_hess_psi", r(d.hessian), "sampled max Frobenius norm of the Hessian of psi".into(), "derivative maxima of the weight"),
            ("max_grad_lap_psi", r(d.grad_laplacian), "sampled max |grad Laplacian psi|".into(), "derivative maxima of the weight"),
            ("lambda1", r(self.lambda1), "smallest nonzero discrete Neumann eigenvalue (inverse iteration)".into(), "Poincare-Wirtinger inequality"),
            ("Cp", r(i.cp), "1/lambda1".into(), "Poincare-Wirtinger inequality"),
            ("C_Sob", r(i.c_sob), format!("1.1 max of (int g^6)^(1/3)/(int g^2 + int |grad g|^2), seeded trial family (seed {})", self.options.seed), "Sobolev embedding H1 into L6, per component"),
            ("K0", r(i.big_k0), "max((4 int(a0^3+b0^3) + 4)^(2/3), 32 |k|_inf^2)".into(), "data bound for the nonlinear terms"),
            ("B0", r(i.b0), "cellwise min(a0, b0)".into(), "minimum principle floor"),
            ("s0", r(a.s0), "min(1, 2/(c1 max d))".into(), "nonpositivity of eta_i"),
            ("C2", r(a.big_c2), "max d (max |hess psi| + max |grad Laplacian psi|)".into(), "second and third derivatives of Phi_i"),
            ("C3", r(a.big_c3), "C2 max(5/2, max d / 2)".into(), "Young inequality on the interior gradient terms"),
            ("C4", r(a.big_c4), "sampled max |Laplacian psi| over the closed ball".into(), "boundary Laplacian term"),
            ("C5", r(a.big_c5), "max(max d C4, (max d C4)^2)".into(), "boundary terms of the commutator"),
            ("s1", r(a.s1), "min(1, (3/8)/(max d max|hess psi|/2 + C5))".into(), "absorption of the Hessian term"),
            ("C6", r(a.big_c6), "max psi + max d max |grad psi|^2".into(), "bound on the time derivative of eta_i off the annulus"),
            ("C7", r(a.big_c7), "max d C6/(c2 c3^2)".into(), "off-annulus remainder"),
            ("s2", r(a.s2), "min(s0, s1, 1/(C3+C5), c2/min d)".into(), "admissible convexity parameter"),
            ("C0", r(a.big_c0), "1 - min d s2/(4 c2)".into(), "commutator bound coefficient"),
            ("C1", r(a.big_c1), "max(1, C3+C5+C7, 4K0(1+K0 C_Sob), 4K0^2 C_Sob/min d)".into(), "commutator and forcing bound"),
            ("T_chain", r(c.horizon), "horizon used for the interpolation step".into(), "interpolation step"),
            ("ell", e(c.ell), "smallest integer >= 2 with mu1 (1 + Mbar)/(ell+1) <= mu0/2, Mbar the closed-form bound".into(), "choice of the interpolation step count"),
            ("h", e(c.h), "min(1/(2 ell), T/(4 ell))/2".into(), "time shift of the weight"),
            ("M_ell", e(c.m_ell), "3 ratio of log-space Gauss-Legendre integrals of e^(t C1)/(T-t+h)^(1+C0)".into(), "interpolation exponent"),
            ("M_ell_bound", e(c.m_bound), "3 e^C1 (ell+1)^C0/(1-(2/3)^C0)".into(), "closed-form bound on the interpolation exponent"),
            ("D_ell", e(c.d_ell), "3 C1 (1 + M_ell)(1 + 2 ell + 8 ell^2)".into(), "interpolation prefactor exponent"),
            ("K_ell", e(c.k_ell), "exp(D_ell)(2 ell + 1)^(3 C0 (1 + M_ell))".into(), "interpolation prefactor"),
            ("mu2", e(c.mu2), "2 ell s2 mu0".into(), "large-h branch of the observation estimate"),
            ("mu3", e(c.mu3), "max((1+M_ell) ln 2 + ln K_ell, mu2)".into(), "observation estimate for every h"),
            ("M", e(c.m), "1 + 2 M_ell".into(), "observation estimate exponent"),
            ("c", e(c.c), "2 mu3 + ln 4".into(), "observation estimate prefactor exponent"),
            ("beta1", r(c.beta1), "max(Cp/(2 d1), Cp/(2 d2), 1/(8 B0 k0))".into(), "dissipation lower bound"),
            ("theta", LedgerValue::ExpOf(c.ln_theta), "(1 + e^(-2c) M/beta1)^(-1/M)".into(), "two-step contraction factor"),
            ("gamma", LedgerValue::ExpOf(c.ln_gamma), "1/theta".into(), "decay prefactor"),
            ("beta", e(c.beta), "|ln theta|/2".into(), "decay rate"),
        ];
        rows.into_iter()
            .map(|(name, value, provenance, reference)| LedgerEntry {
                name: name.to_string(),
                value,
                provenance,
                reference: reference.to_string(),
            })
            .collect()
    }
}

/// Weight parameters implied by the catalyst geometry (`s = h = 1`).
pub fn weight_params(sim: &Simulation, horizon: f64) -> Result<WeightParams> {
    let cat = &sim.config.catalyst;
    WeightParams::new(sim.grid.domain, cat.x0, cat.r, 1.0, 1.0, horizon)
}

/// Recomputes the ledger and reports whether every entry is bit-identical.
pub fn verify_ledger(sim: &Simulation, ledger: &ConstantLedger) -> Result<bool> {
    let again = ConstantLedger::build(sim, ledger.options)?;
    Ok(again.entries() == ledger.entries())
}

/// Ledger-dependent checks on a finished run: decay certificate,
/// two-step contraction, fitted rate versus `β`, and the dissipation chain.
pub fn certificate_checks(run: &RunOutput, ledger: &ConstantLedger) -> Vec<ReportEntry> {
    let chain = &ledger.chain;
    let tr = &run.trace;
    let l2 = tr.channel("l2_dist").unwrap_or(&[]);
    let mut out = Vec::new();

    // ‖u(t)‖² ≤ γ e^{−βt} ‖u(0)‖²  ⇔  ln ratio ≤ ln γ − β t
    let mut margin: Option<Ext> = None;
    if let Some(&l0) = l2.first() {
        if l0 > 0.0 {
            for (t, v) in tr.times.iter().zip(l2) {
                if *v > 0.0 {
                    let slack = chain.ln_gamma - chain.beta * Ext::from_f64(*t) - Ext::from_f64(libm::log(v / l0));
                    margin = Some(margin.map_or(slack, |m| m.min(slack)));
                }
            }
        }
    }
    out.push(ReportEntry::from_margin(
        "decay_certificate",
        "distance to equilibrium bounded by gamma exp(-beta t) times its initial value",
        margin.unwrap_or(Ext::ZERO),
        tolerances::LOG_ROUNDING,
    ));

    // ‖u(2(m+1))‖² ≤ θ ‖u(2m)‖²
    let at = |t: f64| -> Option<f64> {
        tr.times.iter().position(|s| (s - t).abs() < 1e-9).map(|k| l2[k])
    };
    let t_end = tr.times.last().copied().unwrap_or(0.0);
    let mut margin: Option<Ext> = None;
    let mut m = 0.0;
    while 2.0 * (m + 1.0) <= t_end + 1e-9 {
        if let (Some(a), Some(b)) = (at(2.0 * m), at(2.0 * (m + 1.0))) {
            if a > 0.0 && b > 0.0 {
                let slack = chain.ln_theta - Ext::from_f64(libm::log(b / a));
                margin = Some(margin.map_or(slack, |x| x.min(slack)));
            }
        }
        m += 1.0;
    }
    out.push(ReportEntry::from_margin(
        "theta_contraction",
        "two-step contraction by theta",
        margin.unwrap_or(Ext::ZERO),
        tolerances::LOG_ROUNDING,
    ));

    out.push(ReportEntry::from_margin(
        "theta_below_one",
        "theta lies strictly below 1",
        -chain.ln_theta,
        0.0,
    ));
    let strictly = out.last().map(|e| e.margin.is_positive()).unwrap_or(false);
    if let Some(last) = out.last_mut() {
        last.pass = strictly;
    }

    if let Ok(fit) = fit_decay_rate(tr, "l2_dist", None) {
        out.push(ReportEntry::from_margin(
            "fitted_rate_dominates",
            "fitted decay rate is at least the certified beta",
            Ext::from_f64(fit.rate) - chain.beta,
            0.0,
        ));
    }

    // 2‖u‖²_B ≤ 4β₁ (dissipation)
    let ball = tr.channel("l2_ball").unwrap_or(&[]);
    let ga = tr.channel("dissipation_grad_a").unwrap_or(&[]);
    let gb = tr.channel("dissipation_grad_b").unwrap_or(&[]);
    let gr = tr.channel("dissipation_reaction").unwrap_or(&[]);
    let mut worst = f64::INFINITY;
    let mut scale = 0.0f64;
    for k in 0..ball.len().min(ga.len()).min(gb.len()).min(gr.len()) {
        let rhs = 4.0 * chain.beta1 * (ga[k] + gb[k] + gr[k]);
        worst = worst.min(rhs - 2.0 * ball[k]);
        scale = scale.max(rhs.abs()).max(2.0 * ball[k]);
    }
    out.push(ReportEntry::from_margin(
        "beta1_chain",
        "ball norm bounded by 4 beta1 times the dissipation",
        Ext::from_f64(if worst.is_finite() { worst } else { 0.0 }),
        tolerances::ROUNDING_REL * scale.max(f64::MIN_POSITIVE),
    ));
    out
}
