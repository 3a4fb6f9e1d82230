//! TOML run configuration: schema, defaults, validation and dotted overrides.

use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use rdlc_core::ledger::LedgerOptions;
use rdlc_core::solver::{default_snapshot_interval, CatalystKind, CatalystSpec, Profile, SimConfig, Simulation};
use rdlc_core::tolerances;

/// Whole configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Seed for every randomized procedure (Sobolev trial fields).
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub domain: DomainSection,
    pub grid: GridSection,
    #[serde(default)]
    pub physics: PhysicsSection,
    pub catalyst: CatalystSection,
    pub initial: InitialSection,
    pub stepper: StepperSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub dim: usize,
}

impl Default for DomainSection {
    fn default() -> Self {
        DomainSection { dim: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub resolution: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsSection {
    pub d1: f64,
    pub d2: f64,
}

impl Default for PhysicsSection {
    fn default() -> Self {
        PhysicsSection { d1: 1.0, d2: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CatalystShape {
    Constant,
    Bump,
    AnnularZero,
    ModulatedBump,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalystSection {
    pub shape: CatalystShape,
    pub k0: f64,
    pub x0: f64,
    pub r: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothness: Option<f64>,
    /// Outer radius of the zero annulus (`annular_zero`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outer: Option<f64>,
    /// Peak-to-floor ratio (`modulated_bump`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peak_ratio: Option<f64>,
    /// Angular frequency of the modulation (`modulated_bump`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub a: Profile,
    pub b: Profile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepperSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub t_end: f64,
    #[serde(default = "default_snapshot_interval")]
    pub snapshot_interval: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Write the binary snapshot file.
    pub snapshots: bool,
    /// Add the frequency function and weighted norm columns to the traces.
    pub frequency: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { snapshots: true, frequency: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    /// Horizon of the ledger's interpolation chain.
    pub chain_horizon: f64,
    pub probe_resolution: usize,
    /// Convexity parameter of the tilted quantities; default: the ledger's `s2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    /// Weight shift `h` of the tilted quantities.
    pub h: f64,
    /// Horizon `T` of the tilted quantities and the lemma; default: `t_end`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    /// Lemma times as fractions of the horizon.
    pub lemma_fractions: [f64; 3],
    /// Observation windows `(t1, t)` checked in addition to `(0, T)`.
    pub windows: Vec<[f64; 2]>,
    /// Coarsening levels of the energy-residual convergence table.
    pub convergence_levels: usize,
    /// End time of the convergence runs (capped at `t_end`).
    pub convergence_t_end: f64,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection {
            chain_horizon: 2.0,
            probe_resolution: tolerances::GEOMETRY_SAMPLES,
            s: None,
            h: 0.5,
            horizon: None,
            lemma_fractions: [0.2, 0.5, 0.8],
            windows: Vec::new(),
            convergence_levels: 3,
            convergence_t_end: 0.5,
        }
    }
}

impl RunConfig {
    /// Parses TOML text. Errors carry the parser's line, column and key.
    pub fn from_toml_str(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| anyhow!("{e}"))?;
        cfg.check()?;
        Ok(cfg)
    }

    /// Reads and parses a configuration file.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        RunConfig::from_toml_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    /// Semantic checks beyond the schema, including a dry construction of the
    /// simulation.
    pub fn check(&self) -> Result<()> {
        let c = &self.catalyst;
        match c.shape {
            CatalystShape::AnnularZero if c.outer.is_none() => bail!("catalyst.outer is required for annular_zero"),
            CatalystShape::ModulatedBump if c.peak_ratio.is_none() || c.frequency.is_none() => {
                bail!("catalyst.peak_ratio and catalyst.frequency are required for modulated_bump")
            }
            _ => {}
        }
        let a = &self.analysis;
        let [f1, f2, f3] = a.lemma_fractions;
        if !(0.0 < f1 && f1 < f2 && f2 < f3 && f3 <= 1.0) {
            bail!("analysis.lemma_fractions must satisfy 0 < f1 < f2 < f3 <= 1");
        }
        if !(a.h > 0.0 && a.h <= 1.0) {
            bail!("analysis.h must lie in (0, 1]");
        }
        if let Some(s) = a.s {
            if !(s > 0.0 && s <= 1.0) {
                bail!("analysis.s must lie in (0, 1]");
            }
        }
        if a.chain_horizon.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            bail!("analysis.chain_horizon must be positive");
        }
        Simulation::new(self.sim_config()).map_err(|e| anyhow!("{e}"))?;
        Ok(())
    }

    pub fn sim_config(&self) -> SimConfig {
        let c = &self.catalyst;
        let kind = match c.shape {
            CatalystShape::Constant => CatalystKind::Constant,
            CatalystShape::Bump => CatalystKind::Bump,
            CatalystShape::AnnularZero => CatalystKind::AnnularZero { outer: c.outer.unwrap_or(f64::NAN) },
            CatalystShape::ModulatedBump => CatalystKind::ModulatedBump {
                peak_ratio: c.peak_ratio.unwrap_or(f64::NAN),
                frequency: c.frequency.unwrap_or(f64::NAN),
            },
        };
        SimConfig {
            dim: self.domain.dim,
            resolution: self.grid.resolution,
            d1: self.physics.d1,
            d2: self.physics.d2,
            catalyst: CatalystSpec { kind, k0: c.k0, x0: c.x0, r: c.r, smoothness: c.smoothness },
            initial_a: self.initial.a,
            initial_b: self.initial.b,
            dt: self.stepper.dt,
            t_end: self.stepper.t_end,
            snapshot_interval: self.stepper.snapshot_interval,
        }
    }

    pub fn ledger_options(&self) -> LedgerOptions {
        LedgerOptions {
            horizon: self.analysis.chain_horizon,
            probe_resolution: self.analysis.probe_resolution,
            seed: self.seed,
        }
    }

    /// Horizon of the tilted quantities.
    pub fn horizon(&self) -> f64 {
        self.analysis.horizon.unwrap_or(self.stepper.t_end).min(self.stepper.t_end)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).context("cannot serialize config")
    }
}

/// Sets `key` (dotted path such as `catalyst.k0`) in a TOML document.
pub fn set_dotted(doc: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    let (last, path) = parts.split_last().ok_or_else(|| anyhow!("empty override key"))?;
    let mut table = doc;
    for p in path {
        table = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| anyhow!("override {key}: `{p}` is not a table"))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

/// Applies dotted overrides to TOML text and parses the result.
pub fn with_overrides(template: &str, overrides: &[(String, toml::Value)]) -> Result<(RunConfig, String)> {
    let mut doc: toml::Table = template.parse().map_err(|e| anyhow!("{e}"))?;
    for (k, v) in overrides {
        set_dotted(&mut doc, k, v.clone())?;
    }
    let text = toml::to_string(&doc)?;
    let cfg = RunConfig::from_toml_str(&text)?;
    Ok((cfg, text))
}
