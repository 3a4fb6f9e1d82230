//! Centralized tolerances and numerical policy constants.
//!
//! Audits, verification reports, and the acceptance suite all read from here.

/// Allowed drift of `∫(a+b)` from 2.
pub const MASS: f64 = 1e-8;

/// Allowed drift of `∫(u1+u2)` from 0.
pub const MEAN_SHIFT: f64 = 1e-8;

/// Allowed increase of `‖(u1,u2)‖²` between consecutive snapshots.
pub const L2_MONOTONE: f64 = 1e-8;

/// Allowed increase of `∫(a³+b³)` over its initial value.
pub const L3_MONOTONE: f64 = 1e-6;

/// Allowed undershoot of `min(a,b)` below the initial floor `B0`.
pub const MIN_PRINCIPLE: f64 = 1e-6;

/// Per-step energy-identity residual, relative to the initial dissipation.
pub const ENERGY_RESIDUAL_REL: f64 = 1e-3;

/// Minimum observed convergence order for refinement studies.
pub const CONVERGENCE_ORDER: f64 = 1.9;

/// Relative tolerance of the heat-mode decay-rate oracle.
pub const DECAY_RATE_REL: f64 = 0.02;

/// Safety factor applied to sampled geometric constants.
pub const GEOMETRY_SAFETY: f64 = 1.05;

/// Safety factor applied to the sampled Sobolev constant.
pub const SOBOLEV_SAFETY: f64 = 1.1;

/// Floor on `‖f‖²` below which the frequency function is left undefined.
pub const NORM_FLOOR: f64 = 1e-30;

/// Default number of geometry sample points.
pub const GEOMETRY_SAMPLES: usize = 10_000;

/// Relative change below which geometry sampling stops refining.
pub const GEOMETRY_REFINE_REL: f64 = 0.01;

/// Fraction of a run skipped at the start of a default decay-rate fit window.
pub const FIT_SKIP_FRACTION: f64 = 0.1;

/// Samples below this fraction of a channel's peak are treated as rounding
/// noise and left out of the default fit window.
pub const FIT_NOISE_FLOOR: f64 = 1e-20;

/// Minimum number of samples for a decay-rate fit.
pub const FIT_MIN_SAMPLES: usize = 10;

/// Relative tolerance of iterative linear solves.
pub const LINEAR_SOLVE_REL: f64 = 1e-13;

/// Relative floating-point slack for inequalities evaluated from stored data.
pub const ROUNDING_REL: f64 = 1e-10;

/// Absolute slack for inequalities between logarithms of stored norms.
pub const LOG_ROUNDING: f64 = 1e-12;
