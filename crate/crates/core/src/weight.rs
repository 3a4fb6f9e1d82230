//! Weight function `ψ`, shifted weights `φ₁, φ₃`, exponents `Φ_i`, multipliers
//! `η_i`, and sampled geometry constants.
//!
//! With `a = |x₀|` and `x₀ = (a, 0, …, 0)`,
//!
//! ```text
//! ψ(x) = 2aR (R² − |x|²) / D(x),   D(x) = a² + R² − 2a x₁.
//! ```
//!
//! `ψ` vanishes on `∂Ω`, is positive inside, and has a single nondegenerate
//! maximum `ψ(x₀) = 2aR` with Hessian `−4aR/(R² − a²) · I`. All derivatives
//! below are closed forms; nothing is differenced numerically.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{dist2, norm2, Domain, Grid, Point};
use crate::tolerances;

/// Parameters of the weight and of its time dependence `Γ(t) = T − t + h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightParams {
    pub domain: Domain,
    /// `|x₀|`; the center is `(|x₀|, 0, …, 0)`.
    pub x0: f64,
    /// Radius of the observation ball `B(x₀, r)`.
    pub r: f64,
    pub s: f64,
    pub h: f64,
    /// Terminal time `T`.
    pub horizon: f64,
}

impl WeightParams {
    pub fn new(domain: Domain, x0: f64, r: f64, s: f64, h: f64, horizon: f64) -> Result<WeightParams> {
        let p = WeightParams { domain, x0, r, s, h, horizon };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x0 > 0.0) {
            return Err(invalid("x0", "|x0| must be positive (the weight degenerates at the origin)"));
        }
        if !(self.r > 0.0) || !(self.x0 + self.r < self.domain.radius) {
            return Err(invalid("r", "need r > 0 and |x0| + r < R"));
        }
        if !(self.s > 0.0 && self.s <= 1.0) {
            return Err(invalid("s", "must lie in (0, 1]"));
        }
        if !(self.h > 0.0 && self.h <= 1.0) {
            return Err(invalid("h", "must lie in (0, 1]"));
        }
        if !(self.horizon > 0.0) {
            return Err(invalid("horizon", "must be positive"));
        }
        Ok(())
    }

    /// The center `x₀` as a point.
    pub fn center(&self) -> Point {
        [self.x0, 0.0, 0.0]
    }

    /// `ψ(x₀) = 2|x₀|R`.
    pub fn psi0(&self) -> f64 {
        2.0 * self.x0 * self.domain.radius
    }

    /// `λ` in `∇²ψ(x₀) = −λ I`.
    pub fn peak_curvature(&self) -> f64 {
        let r = self.domain.radius;
        4.0 * self.x0 * r / (r * r - self.x0 * self.x0)
    }

    /// `Γ(t) = T − t + h`.
    pub fn gamma(&self, t: f64) -> f64 {
        self.horizon - t + self.h
    }

    fn denom(&self, p: &Point) -> f64 {
        let (a, r) = (self.x0, self.domain.radius);
        a * a + r * r - 2.0 * a * p[0]
    }

    fn dim(&self) -> usize {
        self.domain.dim
    }

    pub fn psi(&self, p: &Point) -> f64 {
        let r = self.domain.radius;
        2.0 * self.x0 * r * (r * r - norm2(p)) / self.denom(p)
    }

    pub fn grad_psi(&self, p: &Point) -> Point {
        let (a, r) = (self.x0, self.domain.radius);
        let d = self.denom(p);
        let big_p = r * r - norm2(p);
        let mut g = [0.0; 3];
        for k in 0..self.dim() {
            g[k] = -4.0 * a * r * p[k] / d;
        }
        g[0] += big_p * 4.0 * a * a * r / (d * d);
        g
    }

    pub fn hess_psi(&self, p: &Point) -> [[f64; 3]; 3] {
        let (a, r) = (self.x0, self.domain.radius);
        let d = self.denom(p);
        let big_p = r * r - norm2(p);
        let mut h = [[0.0; 3]; 3];
        for j in 0..self.dim() {
            for k in 0..self.dim() {
                let djk = if j == k { 1.0 } else { 0.0 };
                let dj1 = if j == 0 { 1.0 } else { 0.0 };
                let dk1 = if k == 0 { 1.0 } else { 0.0 };
                h[j][k] = -4.0 * a * r * djk / d - 8.0 * a * a * r * (p[k] * dj1 + p[j] * dk1) / (d * d)
                    + 16.0 * a * a * a * r * big_p * dj1 * dk1 / (d * d * d);
            }
        }
        h
    }

    pub fn laplacian_psi(&self, p: &Point) -> f64 {
        let (a, r) = (self.x0, self.domain.radius);
        let n = self.dim() as f64;
        let d = self.denom(p);
        let big_p = r * r - norm2(p);
        -4.0 * a * r * n / d - 16.0 * a * a * r * p[0] / (d * d) + 16.0 * a * a * a * r * big_p / (d * d * d)
    }

    pub fn grad_laplacian_psi(&self, p: &Point) -> Point {
        let (a, r) = (self.x0, self.domain.radius);
        let n = self.dim() as f64;
        let d = self.denom(p);
        let big_p = r * r - norm2(p);
        let (d2, d3, d4) = (d * d, d * d * d, d * d * d * d);
        let mut g = [0.0; 3];
        for j in 0..self.dim() {
            g[j] = -32.0 * a * a * a * r * p[j] / d3;
        }
        g[0] += -8.0 * a * a * r * n / d2 - 16.0 * a * a * r / d2 - 64.0 * a * a * a * r * p[0] / d3
            + 96.0 * a * a * a * a * r * big_p / d4;
        g
    }

    /// `φ₁ = ψ − ψ(x₀)` for `which ∈ {1, 2}`, `φ₃ = −ψ − ψ(x₀)` for `which ∈ {3, 4}`.
    pub fn phi(&self, which: usize, p: &Point) -> f64 {
        let psi = self.psi(p);
        if which <= 2 { psi - self.psi0() } else { -psi - self.psi0() }
    }

    /// Sign `±1` with `∇φ_i = ±∇ψ`.
    pub fn phi_sign(which: usize) -> f64 {
        if which <= 2 { 1.0 } else { -1.0 }
    }
}

fn check_which(which: usize) -> Result<()> {
    if (1..=4).contains(&which) {
        Ok(())
    } else {
        Err(invalid("which", "index must be 1, 2, 3 or 4"))
    }
}

fn check_point(params: &WeightParams, p: &Point) -> Result<()> {
    if params.domain.contains(p) {
        Ok(())
    } else {
        Err(Error::OutsideDomain { radius: libm::sqrt(norm2(p)) })
    }
}

/// `ψ(point)`, rejecting points outside the closed ball.
pub fn eval_psi(params: &WeightParams, point: &Point) -> Result<f64> {
    check_point(params, point)?;
    Ok(params.psi(point))
}

/// `(Φ_i, η_i)` at `(point, t)`, with `d = (d₁, d₂)` and `d₃ = d₁`, `d₄ = d₂`.
pub fn eval_phi_eta(
    params: &WeightParams,
    diffusivities: [f64; 2],
    which: usize,
    point: &Point,
    t: f64,
) -> Result<(f64, f64)> {
    check_which(which)?;
    check_point(params, point)?;
    if !(0.0..=params.horizon).contains(&t) {
        return Err(Error::TimeOutOfRange { t, horizon: params.horizon });
    }
    let d = diffusivities[(which - 1) % 2];
    let g = params.gamma(t);
    let phi = params.phi(which, point);
    let grad2 = norm2(&params.grad_psi(point));
    let s = params.s;
    Ok((s * phi / g, s / (g * g) * (-0.5 * phi.abs() + 0.25 * d * s * grad2)))
}

/// Closed-form weight data at every cell center of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightFields {
    pub psi: Vec<f64>,
    pub phi1: Vec<f64>,
    pub phi3: Vec<f64>,
    pub grad_psi: Vec<Point>,
    pub hess_psi: Vec<[[f64; 3]; 3]>,
    pub laplacian_psi: Vec<f64>,
}

pub fn weight_fields(params: &WeightParams, grid: &Grid) -> Result<WeightFields> {
    params.validate()?;
    if grid.domain != params.domain {
        return Err(invalid("grid", "grid domain differs from the weight domain"));
    }
    let psi = grid.sample(|p| params.psi(p));
    let psi0 = params.psi0();
    Ok(WeightFields {
        phi1: psi.iter().map(|v| v - psi0).collect(),
        phi3: psi.iter().map(|v| -v - psi0).collect(),
        psi,
        grad_psi: grid.centers.iter().map(|p| params.grad_psi(p)).collect(),
        hess_psi: grid.centers.iter().map(|p| params.hess_psi(p)).collect(),
        laplacian_psi: grid.sample(|p| params.laplacian_psi(p)),
    })
}

/// Sampled constants of the weight geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryConstants {
    /// Lower constant of `c01 |∇ψ|² ≤ ψ(x₀) − ψ ≤ c02 |∇ψ|²` near `x₀`.
    pub c01: f64,
    pub c02: f64,
    /// `|∇φ_i|² ≤ c1 |φ_i|` on `Ω`.
    pub c1: f64,
    /// `|φ_i| ≤ c2 |∇φ_i|²` on the annulus (and on its complement for `i = 1`).
    pub c2: f64,
    /// `φ₃ − φ₁ ≤ −c3` away from the annulus.
    pub c3: f64,
    /// Inner radius of the annulus `ϑ = {ρ ≤ |x| < R}`.
    pub rho: f64,
    /// `φ₁ ≤ −μ₀` outside `B(x₀, r)`.
    pub mu0: f64,
    /// `sup(−φ₁) = ψ(x₀)`.
    pub mu1: f64,
    /// Radius of the neighborhood `B(x₀, (R − |x₀|)/2)` used for `c01, c02`.
    pub neighborhood: f64,
    /// Number of sample points in the final pass.
    pub samples: usize,
}

/// Sampled maxima of derivatives of `ψ` over the closed ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeBounds {
    /// `max |∇ψ|²`.
    pub grad_sq: f64,
    /// `max |∇²ψ|` (Frobenius norm).
    pub hessian: f64,
    /// `max |Δψ|`.
    pub laplacian: f64,
    /// `max |∇Δψ|`.
    pub grad_laplacian: f64,
    pub samples: usize,
}

/// Sample points of the closed ball.
///
/// `ψ` is invariant under rotations about the `x₁` axis, so for `n ≥ 2` it
/// suffices to sample the half-disk `{(x₁, ρ⊥) : ρ⊥ ≥ 0}` embedded as
/// `(x₁, ρ⊥, 0)`. Returns the points and the sampling spacing.
fn sample_points(params: &WeightParams, count: usize) -> (Vec<Point>, f64) {
    let big_r = params.domain.radius;
    let a = params.x0;
    let nb = (big_r - a) / 2.0;
    let mut pts = Vec::with_capacity(count + count / 4 + 512);
    let spacing;
    if params.domain.dim == 1 {
        spacing = 2.0 * big_r / count as f64;
        pts.extend((0..=count).map(|i| [-big_r + i as f64 * spacing, 0.0, 0.0]));
        pts.push([a - params.r, 0.0, 0.0]);
        pts.push([a + params.r, 0.0, 0.0]);
        let local = (count / 4).max(64);
        pts.extend((0..=local).map(|i| [a - nb + 2.0 * nb * i as f64 / local as f64, 0.0, 0.0]));
    } else {
        let nrad = libm::ceil(libm::sqrt(count as f64 / 2.0)) as usize;
        let nang = 2 * nrad;
        spacing = big_r / nrad as f64;
        for i in 0..=nrad {
            let rr = i as f64 * spacing;
            let m = if i == 0 { 0 } else { nang };
            for j in 0..=m {
                let al = PI * j as f64 / nang as f64;
                pts.push([rr * libm::cos(al), rr * libm::sin(al), 0.0]);
            }
        }
        for j in 0..=256 {
            let al = PI * j as f64 / 256.0;
            pts.push([a + params.r * libm::cos(al), params.r * libm::sin(al), 0.0]);
        }
        let lr = (nrad / 2).max(16);
        for i in 1..=lr {
            let rr = nb * i as f64 / lr as f64;
            for j in 0..=2 * lr {
                let al = PI * j as f64 / (2 * lr) as f64;
                pts.push([a + rr * libm::cos(al), rr * libm::sin(al), 0.0]);
            }
        }
    }
    // guard against rounding just outside the ball
    for p in &mut pts {
        let n = libm::sqrt(norm2(p));
        if n > big_r {
            p.iter_mut().for_each(|c| *c *= big_r / n);
        }
    }
    (pts, spacing)
}

const UNBOUNDED: f64 = 1e12;

fn geometry_pass(params: &WeightParams, count: usize) -> Result<GeometryConstants> {
    let (pts, spacing) = sample_points(params, count);
    let psi0 = params.psi0();
    let lam = params.peak_curvature();
    let big_r = params.domain.radius;
    let rho = (params.x0 + big_r) / 2.0;
    let nb = (big_r - params.x0) / 2.0;
    let c0 = params.center();
    let excl2 = spacing * spacing;
    let limit = 1.0 / (2.0 * lam);

    let (mut quot_min, mut quot_max) = (limit, limit);
    let mut ratio1_max: f64 = 0.0;
    let mut c2_max = limit;
    let mut c3_min = f64::INFINITY;
    let mut mu0 = f64::INFINITY;
    for p in &pts {
        let psi = params.psi(p);
        let g2 = norm2(&params.grad_psi(p));
        let phi1 = (psi0 - psi).max(0.0);
        let phi3 = psi + psi0;
        let rad = libm::sqrt(norm2(p));
        let d2 = dist2(p, &c0);
        let near_center = d2 < excl2;
        let in_annulus = rad >= rho;

        // clause (i)
        if !near_center && phi1 > 0.0 {
            ratio1_max = ratio1_max.max(g2 / phi1);
        }
        ratio1_max = ratio1_max.max(g2 / phi3);
        // clauses (ii), (iii)
        if in_annulus {
            if !(g2 > 0.0) || phi1 / g2 > UNBOUNDED {
                return Err(Error::UnboundedRatio { clause: "|phi_1| <= c2 |grad phi_1|^2 on the annulus" });
            }
            c2_max = c2_max.max(phi1 / g2).max(phi3 / g2);
        } else {
            c3_min = c3_min.min(2.0 * psi);
            if !near_center {
                if !(g2 > 0.0) || phi1 / g2 > UNBOUNDED {
                    return Err(Error::UnboundedRatio { clause: "|phi_1| <= c2 |grad phi_1|^2 off the annulus" });
                }
                c2_max = c2_max.max(phi1 / g2);
            }
        }
        // neighborhood sandwich
        if d2 < nb * nb && !near_center && g2 > 0.0 {
            let q = phi1 / g2;
            quot_min = quot_min.min(q);
            quot_max = quot_max.max(q);
        }
        if d2 >= params.r * params.r * (1.0 - 1e-12) {
            mu0 = mu0.min(phi1);
        }
    }
    if !(c3_min > 0.0) || !c3_min.is_finite() {
        return Err(Error::UnboundedRatio { clause: "phi_3 - phi_1 <= -c3 off the annulus" });
    }
    let safety = tolerances::GEOMETRY_SAFETY;
    let c01 = quot_min / safety;
    let mu0 = if params.domain.dim == 1 { mu0 } else { mu0 / safety };
    if !(mu0 > 0.0) {
        return Err(Error::UnboundedRatio { clause: "phi_1 <= -mu0 outside the observation ball" });
    }
    Ok(GeometryConstants {
        c01,
        c02: quot_max * safety,
        c1: safety * ratio1_max.max(1.0 / c01),
        c2: safety * c2_max,
        c3: c3_min / safety,
        rho,
        mu0,
        mu1: psi0,
        neighborhood: nb,
        samples: pts.len(),
    })
}

fn rel_change(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

const MAX_DOUBLINGS: usize = 6;

/// Geometry constants from dense sampling, doubled until every constant moves
/// by less than 1%.
pub fn geometry_constants(params: &WeightParams, probe_resolution: usize) -> Result<GeometryConstants> {
    params.validate()?;
    if probe_resolution < 1000 {
        return Err(Error::InsufficientSamples { needed: 1000, got: probe_resolution });
    }
    let mut count = probe_resolution;
    let mut prev = geometry_pass(params, count)?;
    for _ in 0..MAX_DOUBLINGS {
        count *= 2;
        let next = geometry_pass(params, count)?;
        let pairs = [
            (prev.c01, next.c01),
            (prev.c02, next.c02),
            (prev.c1, next.c1),
            (prev.c2, next.c2),
            (prev.c3, next.c3),
            (prev.mu0, next.mu0),
        ];
        let settled = pairs.iter().all(|&(a, b)| rel_change(a, b) < tolerances::GEOMETRY_REFINE_REL);
        prev = next;
        if settled {
            break;
        }
    }
    Ok(prev)
}

fn derivative_pass(params: &WeightParams, count: usize) -> DerivativeBounds {
    let (pts, _) = sample_points(params, count);
    let mut b = DerivativeBounds { grad_sq: 0.0, hessian: 0.0, laplacian: 0.0, grad_laplacian: 0.0, samples: pts.len() };
    for p in &pts {
        b.grad_sq = b.grad_sq.max(norm2(&params.grad_psi(p)));
        let h = params.hess_psi(p);
        let fro: f64 = h.iter().flatten().map(|v| v * v).sum();
        b.hessian = b.hessian.max(libm::sqrt(fro));
        b.laplacian = b.laplacian.max(params.laplacian_psi(p).abs());
        b.grad_laplacian = b.grad_laplacian.max(libm::sqrt(norm2(&params.grad_laplacian_psi(p))));
    }
    b
}

/// Maxima of `|∇ψ|²`, `|∇²ψ|`, `|Δψ|`, `|∇Δψ|` over the closed ball, refined
/// like [`geometry_constants`].
pub fn derivative_bounds(params: &WeightParams, probe_resolution: usize) -> Result<DerivativeBounds> {
    params.validate()?;
    if probe_resolution < 1000 {
        return Err(Error::InsufficientSamples { needed: 1000, got: probe_resolution });
    }
    let mut count = probe_resolution;
    let mut prev = derivative_pass(params, count);
    for _ in 0..MAX_DOUBLINGS {
        count *= 2;
        let next = derivative_pass(params, count);
        let settled = [
            (prev.grad_sq, next.grad_sq),
            (prev.hessian, next.hessian),
            (prev.laplacian, next.laplacian),
            (prev.grad_laplacian, next.grad_laplacian),
        ]
        .iter()
        .all(|&(a, b)| rel_change(a, b) < tolerances::GEOMETRY_REFINE_REL);
        prev = next;
        if settled {
            break;
        }
    }
    Ok(prev)
}

/// Points used by geometry sampling, exposed for audits.
pub fn geometry_sample_points(params: &WeightParams, count: usize) -> Vec<Point> {
    sample_points(params, count).0
}

/// One cell-wise field per index `i = 1..4`.
pub type FieldQuad = [Vec<f64>; 4];

/// Cell-wise `Φ_i` and `η_i` on a grid at time `t`, for `i = 1..4`.
pub fn phi_eta_fields(
    params: &WeightParams,
    diffusivities: [f64; 2],
    grid: &Grid,
    t: f64,
) -> Result<(FieldQuad, FieldQuad)> {
    if !(0.0..=params.horizon).contains(&t) {
        return Err(Error::TimeOutOfRange { t, horizon: params.horizon });
    }
    let n = grid.len();
    let mut phi: [Vec<f64>; 4] = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut eta: [Vec<f64>; 4] = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for (c, p) in grid.centers.iter().enumerate() {
        for i in 0..4 {
            let (f, e) = eval_phi_eta(params, diffusivities, i + 1, p, t)?;
            phi[i][c] = f;
            eta[i][c] = e;
        }
    }
    Ok((phi, eta))
}
