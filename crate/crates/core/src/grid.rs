//! Unit-measure ball, cell-centered finite-volume grids, and Neumann operators.
//!
//! A grid is a list of cells (center, volume) plus a list of interior faces,
//! each carrying a transmissibility `T = |face| / dist(centers)`. The discrete
//! Laplacian is
//!
//! ```text
//! (L u)_i = (1 / V_i) Σ_{faces f ∋ i} T_f (u_j − u_i)
//! ```
//!
//! Boundary faces carry no flux, so `Σ V_i (L u)_i = 0` exactly and `L` is
//! symmetric in the volume-weighted inner product.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg;

/// Coordinates of a point; unused trailing components are zero.
pub type Point = [f64; 3];

/// The ball `B(0, R)` with `|B| = 1` in dimension `dim`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub dim: usize,
    pub radius: f64,
}

impl Domain {
    /// Unit-measure ball in dimension 1, 2 or 3.
    pub fn unit_ball(dim: usize) -> Result<Domain> {
        let radius = match dim {
            1 => 0.5,
            2 => 1.0 / libm::sqrt(PI),
            3 => libm::cbrt(3.0 / (4.0 * PI)),
            _ => return Err(Error::UnsupportedDimension { dim, operation: "domain" }),
        };
        Ok(Domain { dim, radius })
    }

    /// Whether `p` lies in the closed ball (with relative slack `1e-12`).
    pub fn contains(&self, p: &Point) -> bool {
        norm2(p) <= self.radius * self.radius * (1.0 + 1e-12)
    }
}

/// Interior face between two cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Face {
    pub a: usize,
    pub b: usize,
    pub trans: f64,
}

/// Boundary face of a cell on `∂Ω`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryFace {
    pub cell: usize,
    /// Face measure (1 in dimension 1).
    pub area: f64,
    /// Point on `∂Ω` at the face center.
    pub point: Point,
    /// Outward unit normal.
    pub normal: Point,
    /// Distance from the cell center to the wall.
    pub dist: f64,
}

/// Cell layout, used where a structured stencil is needed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Layout {
    /// Uniform cells on `[−R, R]`, ordered left to right.
    Interval { cells: usize },
    /// Center disk followed by `rings` annuli of `sectors` cells each.
    Polar { rings: usize, sectors: usize },
}

/// Finite-volume discretization of the ball.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub domain: Domain,
    pub resolution: usize,
    pub layout: Layout,
    /// Characteristic spacing `Δx`.
    pub spacing: f64,
    pub centers: Vec<Point>,
    pub volumes: Vec<f64>,
    pub faces: Vec<Face>,
    pub boundary: Vec<BoundaryFace>,
}

/// Serializable grid metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub dim: usize,
    pub radius: f64,
    pub resolution: usize,
    pub spacing: f64,
    pub cells: usize,
}

/// Builds the grid for `domain` with `resolution` cells across (n=1) or rings (n=2).
pub fn build_grid(domain: Domain, resolution: usize) -> Result<Grid> {
    if resolution < 8 {
        return Err(invalid("resolution", "must be at least 8"));
    }
    match domain.dim {
        1 => Ok(interval_grid(domain, resolution)),
        2 => Ok(polar_grid(domain, resolution)),
        dim => Err(Error::UnsupportedDimension { dim, operation: "grid construction" }),
    }
}

fn interval_grid(domain: Domain, n: usize) -> Grid {
    let r = domain.radius;
    let dx = 2.0 * r / n as f64;
    let centers = (0..n).map(|i| [-r + (i as f64 + 0.5) * dx, 0.0, 0.0]).collect();
    let faces = (0..n - 1).map(|i| Face { a: i, b: i + 1, trans: 1.0 / dx }).collect();
    let boundary = vec![
        BoundaryFace { cell: 0, area: 1.0, point: [-r, 0.0, 0.0], normal: [-1.0, 0.0, 0.0], dist: 0.5 * dx },
        BoundaryFace { cell: n - 1, area: 1.0, point: [r, 0.0, 0.0], normal: [1.0, 0.0, 0.0], dist: 0.5 * dx },
    ];
    Grid {
        domain,
        resolution: n,
        layout: Layout::Interval { cells: n },
        spacing: dx,
        centers,
        volumes: vec![dx; n],
        faces,
        boundary,
    }
}

/// Number of angular sectors used for a polar grid with `rings` radial cells.
pub fn polar_sectors(rings: usize) -> usize {
    4 * rings
}

fn polar_grid(domain: Domain, nr: usize) -> Grid {
    let big_r = domain.radius;
    let dr = big_r / nr as f64;
    let ns = polar_sectors(nr);
    let dth = 2.0 * PI / ns as f64;
    let rings = nr - 1;
    let index = |ring: usize, sector: usize| 1 + (ring - 1) * ns + (sector % ns);

    let mut centers = vec![[0.0; 3]];
    let mut volumes = vec![PI * dr * dr];
    for j in 1..=rings {
        let (r0, r1) = (j as f64 * dr, (j + 1) as f64 * dr);
        let rc = 0.5 * (r0 + r1);
        for k in 0..ns {
            let th = (k as f64 + 0.5) * dth;
            centers.push([rc * libm::cos(th), rc * libm::sin(th), 0.0]);
            volumes.push(0.5 * (r1 * r1 - r0 * r0) * dth);
        }
    }

    let mut faces = Vec::new();
    for k in 0..ns {
        // center disk to the first annulus: arc of radius dr, centers 1.5 dr apart
        faces.push(Face { a: 0, b: index(1, k), trans: dr * dth / (1.5 * dr) });
    }
    for j in 1..=rings {
        let rc = (j as f64 + 0.5) * dr;
        let r_out = (j + 1) as f64 * dr;
        for k in 0..ns {
            faces.push(Face { a: index(j, k), b: index(j, k + 1), trans: dr / (rc * dth) });
            if j < rings {
                faces.push(Face { a: index(j, k), b: index(j + 1, k), trans: r_out * dth / dr });
            }
        }
    }

    let boundary = (0..ns)
        .map(|k| {
            let th = (k as f64 + 0.5) * dth;
            let n = [libm::cos(th), libm::sin(th), 0.0];
            BoundaryFace {
                cell: index(rings, k),
                area: big_r * dth,
                point: [big_r * n[0], big_r * n[1], 0.0],
                normal: n,
                dist: 0.5 * dr,
            }
        })
        .collect();

    Grid {
        domain,
        resolution: nr,
        layout: Layout::Polar { rings, sectors: ns },
        spacing: dr,
        centers,
        volumes,
        faces,
        boundary,
    }
}

impl Grid {
    pub fn len(&self) -> usize {
        self.volumes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.volumes.is_empty()
    }

    pub fn summary(&self) -> GridSummary {
        GridSummary {
            dim: self.domain.dim,
            radius: self.domain.radius,
            resolution: self.resolution,
            spacing: self.spacing,
            cells: self.len(),
        }
    }

    /// Errors unless `field` has one value per cell.
    pub fn check(&self, field: &[f64]) -> Result<()> {
        if field.len() == self.len() {
            Ok(())
        } else {
            Err(Error::GridMismatch { expected: self.len(), got: field.len() })
        }
    }

    /// Samples `f` at every cell center.
    pub fn sample(&self, f: impl FnMut(&Point) -> f64) -> Vec<f64> {
        self.centers.iter().map(f).collect()
    }

    /// Indices of cells whose centers lie in the open ball `B(c, r)`.
    pub fn cells_in_ball(&self, c: &Point, r: f64) -> Vec<usize> {
        (0..self.len()).filter(|&i| dist2(&self.centers[i], c) < r * r).collect()
    }

    /// Diagonal-free stencil data for the 1-D layout: `(lower, upper)` couplings
    /// `T / V` per row.
    pub(crate) fn tridiagonal(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let Layout::Interval { cells } = self.layout else { return None };
        let mut lower = vec![0.0; cells];
        let mut upper = vec![0.0; cells];
        for f in &self.faces {
            upper[f.a] = f.trans / self.volumes[f.a];
            lower[f.b] = f.trans / self.volumes[f.b];
        }
        Some((lower, upper))
    }
}

/// `d · L u` with zero boundary flux.
pub fn neumann_laplacian(grid: &Grid, field: &[f64], diffusivity: f64) -> Result<Vec<f64>> {
    grid.check(field)?;
    if !(diffusivity > 0.0) {
        return Err(invalid("diffusivity", "must be positive"));
    }
    let mut out = vec![0.0; grid.len()];
    apply_laplacian(grid, field, diffusivity, &mut out);
    Ok(out)
}

pub(crate) fn apply_laplacian(grid: &Grid, u: &[f64], d: f64, out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    for f in &grid.faces {
        let flux = f.trans * (u[f.b] - u[f.a]);
        out[f.a] += flux;
        out[f.b] -= flux;
    }
    for (o, v) in out.iter_mut().zip(&grid.volumes) {
        *o *= d / v;
    }
}

/// Volume-weighted sum `Σ V_i u_i`.
pub fn integrate(grid: &Grid, field: &[f64]) -> Result<f64> {
    grid.check(field)?;
    Ok(integrate_unchecked(grid, field))
}

pub(crate) fn integrate_unchecked(grid: &Grid, field: &[f64]) -> f64 {
    grid.volumes.iter().zip(field).map(|(v, u)| v * u).sum()
}

/// Volume-weighted inner product.
pub fn inner(grid: &Grid, u: &[f64], w: &[f64]) -> f64 {
    grid.volumes.iter().zip(u.iter().zip(w)).map(|(v, (a, b))| v * a * b).sum()
}

/// Discrete Dirichlet energy `Σ_f T_f (u_a − u_b)² = −⟨L u, u⟩`.
pub fn dirichlet_energy(grid: &Grid, u: &[f64]) -> f64 {
    grid.faces.iter().map(|f| f.trans * (u[f.a] - u[f.b]) * (u[f.a] - u[f.b])).sum()
}

/// Cell-centered derivative on the 1-D grid: central differences inside,
/// second-order one-sided stencils in the two end cells.
pub fn gradient_1d(grid: &Grid, u: &[f64]) -> Result<Vec<f64>> {
    grid.check(u)?;
    let Layout::Interval { cells: n } = grid.layout else {
        return Err(Error::UnsupportedDimension { dim: grid.domain.dim, operation: "cell gradient" });
    };
    let h = grid.spacing;
    let mut g = vec![0.0; n];
    for i in 1..n - 1 {
        g[i] = (u[i + 1] - u[i - 1]) / (2.0 * h);
    }
    g[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h);
    g[n - 1] = (3.0 * u[n - 1] - 4.0 * u[n - 2] + u[n - 3]) / (2.0 * h);
    Ok(g)
}

/// Smallest nonzero eigenvalue of `−L` (unit diffusivity).
///
/// Shifted inverse iteration with `(I − L)^{-1}` on the mean-zero subspace,
/// stopped when the Rayleigh quotient settles to `1e-13` relative.
pub fn neumann_eigenvalue_1(grid: &Grid) -> Result<f64> {
    const MAX_ITER: usize = 500;
    let mut v: Vec<f64> = grid.centers.iter().map(|p| p[0]).collect();
    project_mean_zero(grid, &mut v);
    normalize(grid, &mut v);
    let mut q_prev = f64::INFINITY;
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_ITER {
        let mut w = linalg::solve_implicit(grid, 1.0, &v)?;
        project_mean_zero(grid, &mut w);
        normalize(grid, &mut w);
        let q = dirichlet_energy(grid, &w);
        // residual ‖−L w − q w‖ in the volume norm
        let mut lw = vec![0.0; grid.len()];
        apply_laplacian(grid, &w, 1.0, &mut lw);
        let r: Vec<f64> = lw.iter().zip(&w).map(|(l, x)| -l - q * x).collect();
        residual = libm::sqrt(inner(grid, &r, &r)) / q;
        v = w;
        if (q - q_prev).abs() <= 1e-13 * q && residual < 1e-6 {
            return Ok(q);
        }
        q_prev = q;
    }
    Err(Error::NonConvergence { what: "Neumann eigenvalue iteration", iterations: MAX_ITER, residual })
}

fn project_mean_zero(grid: &Grid, v: &mut [f64]) {
    let m = integrate_unchecked(grid, v);
    v.iter_mut().for_each(|x| *x -= m);
}

fn normalize(grid: &Grid, v: &mut [f64]) {
    let n = libm::sqrt(inner(grid, v, v));
    v.iter_mut().for_each(|x| *x /= n);
}

pub(crate) fn norm2(p: &Point) -> f64 {
    p[0] * p[0] + p[1] * p[1] + p[2] * p[2]
}

pub(crate) fn dist2(p: &Point, q: &Point) -> f64 {
    let d = [p[0] - q[0], p[1] - q[1], p[2] - q[2]];
    norm2(&d)
}
