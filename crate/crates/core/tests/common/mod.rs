//! Shared configurations for the integration tests.

#![allow(dead_code)]

use rdlc_core::solver::{CatalystKind, CatalystSpec, Profile, SimConfig};

/// `k₀ = 1` on `B(0.25, 0.1)`, zero outside; `a₀ = 1 + 0.3 cos`, `b₀ = 1 − 0.3 cos`.
pub fn reference_config(resolution: usize, t_end: f64) -> SimConfig {
    SimConfig {
        dim: 1,
        resolution,
        d1: 1.0,
        d2: 1.0,
        catalyst: CatalystSpec { kind: CatalystKind::Bump, k0: 1.0, x0: 0.25, r: 0.1, smoothness: None },
        initial_a: Profile::Cosine { base: 1.0, amplitude: 0.3, mode: 1 },
        initial_b: Profile::Cosine { base: 1.0, amplitude: -0.3, mode: 1 },
        dt: None,
        t_end,
        snapshot_interval: 0.05,
    }
}

/// Pure diffusion of a single cosine mode.
pub fn heat_config(resolution: usize, dt: f64, t_end: f64, interval: f64) -> SimConfig {
    SimConfig {
        dim: 1,
        resolution,
        d1: 1.0,
        d2: 1.0,
        catalyst: CatalystSpec { kind: CatalystKind::Constant, k0: 0.0, x0: 0.25, r: 0.1, smoothness: None },
        initial_a: Profile::Cosine { base: 1.0, amplitude: 0.2, mode: 1 },
        initial_b: Profile::Cosine { base: 1.0, amplitude: -0.2, mode: 1 },
        dt: Some(dt),
        t_end,
        snapshot_interval: interval,
    }
}

/// Log-base-2 ratios of consecutive errors.
pub fn orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

/// `[1.23e-4, …]` formatting for error tables.
pub fn sci(xs: &[f64]) -> String {
    let items: Vec<String> = xs.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", items.join(", "))
}
