//! Scalar time series, decay-rate fits, finite-difference derivatives, and the
//! invariant audit.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::ext::Ext;
use crate::ledger::{certificate_checks, ConstantLedger};
use crate::solver::RunOutput;
use crate::tolerances;

/// One named scalar channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub name: String,
    pub definition: String,
    pub reference: String,
    pub values: Vec<f64>,
}

/// Time series of named scalar channels on a common time grid.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TraceSeries {
    pub times: Vec<f64>,
    pub channels: Vec<Channel>,
}

impl TraceSeries {
    pub fn new(times: Vec<f64>) -> Result<TraceSeries> {
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("times", "must be strictly increasing"));
        }
        Ok(TraceSeries { times, channels: Vec::new() })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Adds or replaces a channel.
    pub fn set_channel(&mut self, name: &str, definition: &str, reference: &str, values: Vec<f64>) -> Result<()> {
        if values.len() != self.times.len() {
            return Err(Error::GridMismatch { expected: self.times.len(), got: values.len() });
        }
        let ch = Channel {
            name: name.to_string(),
            definition: definition.to_string(),
            reference: reference.to_string(),
            values,
        };
        match self.channels.iter_mut().find(|c| c.name == name) {
            Some(slot) => *slot = ch,
            None => self.channels.push(ch),
        }
        Ok(())
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.channels.iter().find(|c| c.name == name).map(|c| c.values.as_slice())
    }

    pub fn channel_names(&self) -> impl Iterator<Item = &str> {
        self.channels.iter().map(|c| c.name.as_str())
    }
}

/// Least-squares fit `ln y ≈ intercept − rate · t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub rate: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub samples: usize,
}

/// Default fit window: the samples still above the rounding floor
/// ([`tolerances::FIT_NOISE_FLOOR`] times the largest value), with the first
/// 10% of that span removed.
pub fn default_window(times: &[f64], values: &[f64]) -> (f64, f64) {
    let peak = values.iter().fold(0.0f64, |m, v| m.max(*v));
    let last = values
        .iter()
        .position(|v| !(*v > tolerances::FIT_NOISE_FLOOR * peak))
        .map_or(times.len(), |k| k)
        .min(times.len());
    match (times.first(), last.checked_sub(1).and_then(|k| times.get(k))) {
        (Some(&a), Some(&b)) => (a + tolerances::FIT_SKIP_FRACTION * (b - a), b),
        _ => (0.0, 0.0),
    }
}

/// Fits an exponential decay to `channel` over `window` (default: [`default_window`]).
pub fn fit_decay_rate(series: &TraceSeries, channel: &str, window: Option<(f64, f64)>) -> Result<DecayFit> {
    let values = series.channel(channel).ok_or_else(|| invalid("channel", format!("no channel named {channel}")))?;
    let (t0, t1) = window.unwrap_or_else(|| default_window(&series.times, values));
    fit_log_linear(&series.times, values, t0, t1)
}

/// Fits `ln y` against `t` for samples with `t ∈ [t0, t1]`.
pub fn fit_log_linear(times: &[f64], values: &[f64], t0: f64, t1: f64) -> Result<DecayFit> {
    let mut pts = Vec::new();
    for (&t, &y) in times.iter().zip(values) {
        if t >= t0 && t <= t1 {
            if !(y > 0.0) {
                return Err(Error::NonPositiveSample { t, value: y });
            }
            pts.push((t, libm::log(y)));
        }
    }
    if pts.len() < tolerances::FIT_MIN_SAMPLES {
        return Err(Error::InsufficientSamples { needed: tolerances::FIT_MIN_SAMPLES, got: pts.len() });
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    let sty: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    let slope = sty / stt;
    let intercept = my - slope * mt;
    let ss_res: f64 = pts.iter().map(|p| libm::pow(p.1 - intercept - slope * p.0, 2.0)).sum();
    // a flat series has no variance to explain; treat rounding noise as flat
    let r_squared = if syy > 1e-24 * n * (1.0 + my * my) { 1.0 - ss_res / syy } else { 1.0 };
    Ok(DecayFit { rate: -slope, intercept, r_squared, samples: pts.len() })
}

/// Finite-difference derivative with an error estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Derivative {
    pub values: Vec<f64>,
    /// `|wide − narrow|` stencil disagreement at each sample.
    pub error: Vec<f64>,
}

/// Derivative of samples `ys` on the uniform grid `ts`.
///
/// Interior samples use the centered difference and compare it with the
/// stencil of twice the width; end samples use the second-order one-sided
/// stencil compared against the first-order one.
pub fn fd_derivative(ts: &[f64], ys: &[f64]) -> Result<Derivative> {
    let n = ts.len();
    if n < 3 || ys.len() != n {
        return Err(Error::InsufficientSamples { needed: 3, got: n.min(ys.len()) });
    }
    let mut values = alloc::vec![0.0; n];
    let mut error = alloc::vec![0.0; n];
    for k in 1..n - 1 {
        let narrow = (ys[k + 1] - ys[k - 1]) / (ts[k + 1] - ts[k - 1]);
        values[k] = narrow;
        error[k] = if k >= 2 && k + 2 < n {
            let wide = (ys[k + 2] - ys[k - 2]) / (ts[k + 2] - ts[k - 2]);
            (wide - narrow).abs()
        } else {
            let one = (ys[k + 1] - ys[k]) / (ts[k + 1] - ts[k]);
            let other = (ys[k] - ys[k - 1]) / (ts[k] - ts[k - 1]);
            (one - other).abs()
        };
    }
    let h0 = ts[1] - ts[0];
    values[0] = (-3.0 * ys[0] + 4.0 * ys[1] - ys[2]) / (2.0 * h0);
    error[0] = (values[0] - (ys[1] - ys[0]) / h0).abs();
    let hn = ts[n - 1] - ts[n - 2];
    values[n - 1] = (3.0 * ys[n - 1] - 4.0 * ys[n - 2] + ys[n - 3]) / (2.0 * hn);
    error[n - 1] = (values[n - 1] - (ys[n - 1] - ys[n - 2]) / hn).abs();
    Ok(Derivative { values, error })
}

/// One audited invariant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub invariant_id: String,
    /// Descriptive label of the inequality or identity checked.
    pub reference: String,
    pub pass: bool,
    /// Slack of the inequality; negative means violated before tolerance.
    pub margin: Ext,
    pub tolerance: f64,
}

impl ReportEntry {
    /// Entry that passes when `margin ≥ −tolerance`.
    pub fn from_margin(id: &str, reference: &str, margin: Ext, tolerance: f64) -> ReportEntry {
        ReportEntry {
            invariant_id: id.to_string(),
            reference: reference.to_string(),
            pass: margin >= Ext::from_f64(-tolerance),
            margin,
            tolerance,
        }
    }
}

/// Machine-readable audit of a finished run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AuditReport {
    pub entries: Vec<ReportEntry>,
}

impl AuditReport {
    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }

    pub fn get(&self, id: &str) -> Option<&ReportEntry> {
        self.entries.iter().find(|e| e.invariant_id == id)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ReportEntry> {
        self.entries.iter().filter(|e| !e.pass)
    }
}

fn channel_or_empty<'a>(series: &'a TraceSeries, name: &str) -> &'a [f64] {
    series.channel(name).unwrap_or(&[])
}

fn min_or_zero(it: impl Iterator<Item = f64>) -> f64 {
    it.fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v)))).unwrap_or(0.0)
}

/// Solver invariants evaluated on a trace: mass, mean shift, L² and L³
/// monotonicity, minimum principle, energy-identity residual.
pub fn audit_trace(series: &TraceSeries, floor: f64) -> AuditReport {
    let mut r = AuditReport::default();
    let mass = channel_or_empty(series, "mass");
    r.entries.push(ReportEntry::from_margin(
        "mass_conservation",
        "d/dt of the total mass vanishes",
        Ext::from_f64(min_or_zero(mass.iter().map(|m| -(m - 2.0).abs()))),
        tolerances::MASS,
    ));
    let shift = channel_or_empty(series, "mean_shift");
    r.entries.push(ReportEntry::from_margin(
        "mean_zero_shift",
        "integral of u1 + u2 vanishes",
        Ext::from_f64(min_or_zero(shift.iter().map(|m| -m.abs()))),
        tolerances::MEAN_SHIFT,
    ));
    let l2 = channel_or_empty(series, "l2_dist");
    r.entries.push(ReportEntry::from_margin(
        "l2_monotone",
        "distance to equilibrium is nonincreasing",
        Ext::from_f64(min_or_zero(l2.windows(2).map(|w| w[0] - w[1]))),
        tolerances::L2_MONOTONE,
    ));
    let l3 = channel_or_empty(series, "l3_sum");
    let l3_0 = l3.first().copied().unwrap_or(0.0);
    r.entries.push(ReportEntry::from_margin(
        "l3_bound",
        "cubic moment bounded by its initial value",
        Ext::from_f64(min_or_zero(l3.iter().map(|v| l3_0 - v))),
        tolerances::L3_MONOTONE,
    ));
    let min_ab = channel_or_empty(series, "min_ab");
    r.entries.push(ReportEntry::from_margin(
        "minimum_principle",
        "concentrations stay above the initial floor",
        Ext::from_f64(min_or_zero(min_ab.iter().map(|v| v - floor))),
        tolerances::MIN_PRINCIPLE,
    ));
    r.entries.push(energy_residual_entry(series));
    r
}

/// Full audit of a finished run: solver invariants, then the ledger
/// certificates when a ledger is supplied. A run that ended early adds a
/// failing `run_completed` entry.
pub fn audit(run: &RunOutput, ledger: Option<&ConstantLedger>) -> AuditReport {
    let mut r = audit_trace(&run.trace, run.b0);
    if run.failure.is_some() {
        r.entries.push(ReportEntry {
            invariant_id: "run_completed".to_string(),
            reference: "time stepping reached the final time".to_string(),
            pass: false,
            margin: Ext::from_f64(-1.0),
            tolerance: 0.0,
        });
    }
    if let Some(l) = ledger {
        r.entries.extend(certificate_checks(run, l));
    }
    r
}

/// Largest per-step energy-identity residual relative to the largest total
/// dissipation rate of the run.
fn energy_residual_entry(series: &TraceSeries) -> ReportEntry {
    let res = channel_or_empty(series, "energy_residual");
    let ga = channel_or_empty(series, "dissipation_grad_a");
    let gb = channel_or_empty(series, "dissipation_grad_b");
    let gr = channel_or_empty(series, "dissipation_reaction");
    let scale = (0..ga.len().min(gb.len()).min(gr.len())).map(|k| ga[k] + gb[k] + gr[k]).fold(0.0, f64::max);
    let worst = res.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let rel = if scale > 0.0 { worst / scale } else if worst == 0.0 { 0.0 } else { f64::INFINITY };
    ReportEntry::from_margin(
        "energy_identity",
        "half the rate of change of the squared distance plus the three dissipation integrals vanishes",
        Ext::from_f64(-rel),
        tolerances::ENERGY_RESIDUAL_REL,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    #[test]
    fn exact_exponential_fit() {
        let ts: Vec<f64> = (0..50).map(|k| k as f64 * 0.1).collect();
        let mut s = TraceSeries::new(ts.clone()).unwrap();
        s.set_channel("y", "", "", ts.iter().map(|t| 3.0 * libm::exp(-2.0 * t)).collect()).unwrap();
        let f = fit_decay_rate(&s, "y", None).unwrap();
        assert!((f.rate - 2.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_series_has_zero_rate() {
        let ts: Vec<f64> = (0..20).map(f64::from).collect();
        let f = fit_log_linear(&ts, &[5.0; 20], 0.0, 20.0).unwrap();
        assert!(f.rate.abs() < 1e-14);
        assert_eq!(f.r_squared, 1.0);
    }

    #[test]
    fn too_few_samples() {
        let ts: Vec<f64> = (0..5).map(f64::from).collect();
        assert!(matches!(fit_log_linear(&ts, &[1.0; 5], 0.0, 5.0), Err(Error::InsufficientSamples { .. })));
    }

    #[test]
    fn derivative_of_quadratic_is_exact() {
        let ts: Vec<f64> = (0..11).map(|k| k as f64 * 0.1).collect();
        let ys: Vec<f64> = ts.iter().map(|t| t * t).collect();
        let d = fd_derivative(&ts, &ys).unwrap();
        for (t, v) in ts.iter().zip(&d.values) {
            assert!((v - 2.0 * t).abs() < 1e-12);
        }
    }
}
