//! Subcommand implementations. Each returns the process exit status.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use rdlc_core::diagnostics::{audit, fit_decay_rate, DecayFit, ReportEntry};
use rdlc_core::ledger::{verify_ledger, ConstantLedger, LedgerEntry};
use rdlc_core::logconv::{
    frequency_trace, lembp_check, lembp_input_from_trace, observation_estimate_check, step5_chain_check,
    FrequencyBounds, FrequencyTrace, LembpInput, LembpReport,
};
use rdlc_core::solver::{RunOutput, SimConfig, Simulation, CHANNELS};
use rdlc_core::weight::WeightParams;
use rdlc_core::{tolerances, Error, Ext};

use crate::config::{with_overrides, RunConfig};
use crate::formats::{self, Column, FORMAT_VERSION};

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok = 0,
    Usage = 1,
    Numerical = 2,
    Invariant = 3,
}

impl Status {
    pub fn code(self) -> u8 {
        self as u8
    }
}

/// Error tagged with the exit status it maps to.
#[derive(Debug)]
pub struct Failure {
    pub status: Status,
    pub error: anyhow::Error,
}

pub type Outcome<T> = Result<T, Failure>;

/// Pretty JSON on stdout; a reader that closed the pipe early is not an error.
fn print_json<T: Serialize>(value: &T) -> Outcome<()> {
    use std::io::Write;
    let text = serde_json::to_string_pretty(value).map_err(usage)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(usage(e)),
        _ => Ok(()),
    }
}

pub fn usage(error: impl Into<anyhow::Error>) -> Failure {
    Failure { status: Status::Usage, error: error.into() }
}

/// Maps a library error: bad input is a usage error, violated run hypotheses
/// are invariant failures, everything else is numerical.
pub fn from_core(e: Error) -> Failure {
    let status = match e {
        Error::InvalidParameter { .. }
        | Error::UnsupportedDimension { .. }
        | Error::GridMismatch { .. }
        | Error::OutsideDomain { .. }
        | Error::TimeOutOfRange { .. }
        | Error::NonPositiveProfile { .. } => Status::Usage,
        Error::HypothesisViolated { .. } => Status::Invariant,
        _ => Status::Numerical,
    };
    Failure { status, error: anyhow!("{e}") }
}

trait OrUsage<T> {
    fn or_usage(self) -> Outcome<T>;
}

impl<T> OrUsage<T> for anyhow::Result<T> {
    fn or_usage(self) -> Outcome<T> {
        self.map_err(usage)
    }
}

pub const CONFIG_FILE: &str = "config.toml";
pub const TRACES_FILE: &str = "traces.csv";
pub const SNAPSHOTS_FILE: &str = "snapshots.bin";
pub const SUMMARY_FILE: &str = "summary.json";
pub const VERIFICATION_FILE: &str = "verification.json";
pub const FREQUENCY_FILE: &str = "frequency.csv";
pub const PLOT_FILE: &str = "plot_data.csv";
pub const COMPARISON_FILE: &str = "comparison.csv";

fn tool_version() -> String {
    env!("CARGO_PKG_VERSION").to_string()
}

/// Decay fit recorded in the summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub channel: String,
    pub rate: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub samples: usize,
}

impl FitSummary {
    fn new(f: DecayFit) -> FitSummary {
        FitSummary {
            channel: "l2_dist".into(),
            rate: f.rate,
            intercept: f.intercept,
            r_squared: f.r_squared,
            samples: f.samples,
        }
    }
}

/// `summary.json` of a run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub format_version: u32,
    pub tool_version: String,
    pub config: RunConfig,
    pub resolved: SimConfig,
    pub cells: usize,
    pub spacing: f64,
    pub dt: f64,
    pub steps: usize,
    pub stability_violations: usize,
    pub b0: f64,
    pub t_final: f64,
    /// Error that ended the run early.
    pub failure: Option<String>,
    pub fit: Option<FitSummary>,
    pub fit_error: Option<String>,
    pub invariants: Vec<ReportEntry>,
    /// Identifiers of failed invariants.
    pub flags: Vec<String>,
    pub status: Status,
}

/// Tilted quantities of a 1-D run: frequency trace with its parameters.
fn tilted(sim: &Simulation, run: &RunOutput, cfg: &RunConfig, ledger: &ConstantLedger) -> Outcome<(WeightParams, FrequencyTrace)> {
    let cat = &sim.config.catalyst;
    let s = cfg.analysis.s.unwrap_or(ledger.analysis.s2);
    let p = WeightParams::new(sim.grid.domain, cat.x0, cat.r, s, cfg.analysis.h, cfg.horizon()).map_err(from_core)?;
    let a = &ledger.analysis;
    let bounds = FrequencyBounds { c0: a.big_c0, c1: a.big_c1, s2: a.s2 };
    let ft = frequency_trace(sim, run, &p, Some(bounds)).map_err(from_core)?;
    Ok((p, ft))
}

fn optional_columns(times: &[f64], ft: &FrequencyTrace) -> Vec<Column> {
    let at = |vals: &dyn Fn(usize) -> Option<f64>| -> Vec<Option<f64>> {
        times
            .iter()
            .map(|t| ft.times.iter().position(|s| (s - t).abs() <= 1e-9).and_then(vals))
            .collect()
    };
    vec![
        ("frequency_N".into(), at(&|k| ft.n_values[k])),
        ("weighted_norm2".into(), at(&|k| Some(ft.norm2[k]))),
    ]
}

/// Runs a parsed configuration into `dir` and returns the summary.
pub fn simulate_config(cfg: &RunConfig, config_text: &str, dir: &Path) -> Outcome<RunSummary> {
    let sim = Simulation::new(cfg.sim_config()).map_err(from_core)?;
    let run = sim.run().map_err(from_core)?;
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display())).or_usage()?;
    fs::write(dir.join(CONFIG_FILE), config_text).context("cannot write the config echo").or_usage()?;

    let mut extra = Vec::new();
    if cfg.output.frequency {
        if sim.config.dim == 1 {
            let ledger = ConstantLedger::build(&sim, cfg.ledger_options()).map_err(from_core)?;
            let (_, ft) = tilted(&sim, &run, cfg, &ledger)?;
            extra = optional_columns(&run.trace.times, &ft);
        } else {
            log::warn!("frequency columns are only available for dim = 1");
        }
    }
    formats::write_traces(&dir.join(TRACES_FILE), &run.trace, &extra).or_usage()?;
    if cfg.output.snapshots {
        formats::write_snapshots(&dir.join(SNAPSHOTS_FILE), &run.grid, &run.snapshots).or_usage()?;
    }

    let report = audit(&run, None);
    let (fit, fit_error) = match fit_decay_rate(&run.trace, "l2_dist", None) {
        Ok(f) => (Some(FitSummary::new(f)), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let status = if run.failure.is_some() {
        Status::Numerical
    } else if !report.all_pass() {
        Status::Invariant
    } else {
        Status::Ok
    };
    let summary = RunSummary {
        format_version: FORMAT_VERSION,
        tool_version: tool_version(),
        config: cfg.clone(),
        resolved: sim.config.clone(),
        cells: run.grid.cells,
        spacing: run.grid.spacing,
        dt: run.dt,
        steps: run.steps,
        stability_violations: run.stability_violations,
        b0: run.b0,
        t_final: run.trace.times.last().copied().unwrap_or(0.0),
        failure: run.failure.as_ref().map(|e| e.to_string()),
        fit,
        fit_error,
        flags: report.failures().map(|e| e.invariant_id.clone()).collect(),
        invariants: report.entries,
        status,
    };
    formats::write_json(&dir.join(SUMMARY_FILE), &summary).or_usage()?;
    Ok(summary)
}

/// `simulate`: the config is parsed and validated before anything is written.
pub fn simulate(config: &Path, out: &Path) -> Outcome<Status> {
    let text = fs::read_to_string(config).with_context(|| format!("cannot read {}", config.display())).or_usage()?;
    let cfg = RunConfig::from_toml_str(&text).with_context(|| format!("invalid config {}", config.display())).or_usage()?;
    let summary = simulate_config(&cfg, &text, out)?;
    match &summary.failure {
        Some(f) => log::error!("run stopped early: {f}"),
        None => log::info!("run finished at t = {} after {} steps", summary.t_final, summary.steps),
    }
    for f in &summary.flags {
        log::warn!("invariant failed: {f}");
    }
    Ok(summary.status)
}

/// Loaded run directory.
pub struct RunDir {
    pub config: RunConfig,
    pub sim: Simulation,
    pub summary: RunSummary,
    pub run: RunOutput,
}

pub fn load_run_dir(dir: &Path) -> Outcome<RunDir> {
    let config = RunConfig::load(&dir.join(CONFIG_FILE)).or_usage()?;
    let sim = Simulation::new(config.sim_config()).map_err(from_core)?;
    let summary: RunSummary = formats::read_json(&dir.join(SUMMARY_FILE)).or_usage()?;
    let trace = formats::read_traces(&dir.join(TRACES_FILE), &CHANNELS).or_usage()?;
    let snap_path = dir.join(SNAPSHOTS_FILE);
    if !snap_path.exists() {
        return Err(usage(anyhow!(
            "{} has no {SNAPSHOTS_FILE}; rerun simulate with output.snapshots = true",
            dir.display()
        )));
    }
    let (headers, snapshots) = formats::read_snapshots(&snap_path).or_usage()?;
    if headers.iter().any(|h| h.cells != sim.grid.len()) {
        return Err(usage(anyhow!("snapshots do not match the configured grid")));
    }
    let run = RunOutput {
        grid: sim.grid.summary(),
        trace,
        snapshots,
        b0: summary.b0,
        dt: summary.dt,
        steps: summary.steps,
        stability_violations: summary.stability_violations,
        failure: None,
    };
    Ok(RunDir { config, sim, summary, run })
}

/// Energy-residual refinement table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub t_end: f64,
    pub resolutions: Vec<usize>,
    pub dts: Vec<f64>,
    /// Largest absolute per-step residual of each run.
    pub residuals: Vec<f64>,
    /// Observed orders between consecutive levels; undefined when a residual vanishes.
    pub orders: Vec<Option<f64>>,
}

fn convergence_table(cfg: &RunConfig, base_dt: f64) -> Outcome<ConvergenceTable> {
    let levels = cfg.analysis.convergence_levels;
    let t_end = cfg.analysis.convergence_t_end.min(cfg.stepper.t_end);
    let mut table = ConvergenceTable { t_end, resolutions: vec![], dts: vec![], residuals: vec![], orders: vec![] };
    let finest = cfg.grid.resolution;
    for k in (0..levels).rev() {
        let res = finest >> k;
        if res < 8 {
            continue;
        }
        let mut sc = cfg.sim_config();
        sc.resolution = res;
        sc.dt = Some(base_dt * (1u64 << k) as f64);
        sc.t_end = t_end;
        sc.snapshot_interval = t_end.min(cfg.stepper.snapshot_interval);
        let run = Simulation::new(sc).and_then(|s| s.run()).map_err(from_core)?;
        let worst = run.trace.channel("energy_residual").unwrap_or(&[]).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        table.resolutions.push(res);
        table.dts.push(run.dt);
        table.residuals.push(worst);
    }
    table.orders = table.residuals.windows(2).map(|w| Some((w[0] / w[1]).log2()).filter(|o| o.is_finite())).collect();
    Ok(table)
}

/// Lemma inputs and verdict attached to the verification report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaSection {
    pub c0: f64,
    pub c1: f64,
    pub h: f64,
    pub horizon: f64,
    pub times: [f64; 3],
    pub report: LembpReportJson,
}

/// Serializable view of a lemma report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LembpReportJson {
    pub m: Ext,
    pub d: Ext,
    pub first_violations: Vec<f64>,
    pub second_violations: Vec<f64>,
    pub conclusion_margin: Ext,
    pub error_estimate: Ext,
    pub pass: bool,
}

impl From<&LembpReport> for LembpReportJson {
    fn from(r: &LembpReport) -> Self {
        LembpReportJson {
            m: r.m,
            d: r.d,
            first_violations: r.first_violations.clone(),
            second_violations: r.second_violations.clone(),
            conclusion_margin: r.conclusion_margin,
            error_estimate: r.error_estimate,
            pass: r.pass(),
        }
    }
}

/// `verification.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub format_version: u32,
    pub tool_version: String,
    pub entries: Vec<ReportEntry>,
    pub lemma: Option<LemmaSection>,
    pub convergence: ConvergenceTable,
    pub all_pass: bool,
}

fn count_entry(id: &str, reference: &str, violations: usize) -> ReportEntry {
    ReportEntry::from_margin(id, reference, Ext::from_f64(-(violations as f64)), 0.0)
}

fn failed_entry(id: &str, reference: &str, e: &Error) -> ReportEntry {
    ReportEntry {
        invariant_id: id.to_string(),
        reference: format!("{reference} ({e})"),
        pass: false,
        margin: Ext::from_f64(-1.0),
        tolerance: 0.0,
    }
}

fn frequency_columns(ft: &FrequencyTrace, input: Option<&LembpInput>) -> Vec<Column> {
    let some = |v: &[f64]| v.iter().copied().map(Some).collect::<Vec<_>>();
    let mut cols = vec![
        ("t".to_string(), some(&ft.times)),
        ("y".to_string(), some(&ft.norm2)),
        ("N".to_string(), ft.n_values.clone()),
    ];
    if let Some(i) = input {
        cols.push(("f1".into(), some(&i.f1)));
        cols.push(("f2".into(), some(&i.f2)));
    }
    cols.extend([
        ("sff".to_string(), some(&ft.sff)),
        ("sff_direct".to_string(), some(&ft.sff_direct)),
        ("aff".to_string(), some(&ft.aff)),
        ("f_norm2".to_string(), some(&ft.f_norm2)),
        ("forcing".to_string(), some(&ft.forcing)),
        ("sem_residual".to_string(), some(&ft.sem_residual)),
    ]);
    cols
}

/// Builds the verification report for a loaded run directory, writing the
/// frequency table into `dir` when it is available.
pub fn verification_report(rd: &RunDir, dir: &Path) -> Outcome<VerificationReport> {
    let RunDir { config: cfg, sim, summary, run } = rd;
    let ledger = ConstantLedger::build(sim, cfg.ledger_options()).map_err(from_core)?;
    let mut entries: Vec<ReportEntry> = audit(run, Some(&ledger)).entries;
    if let Some(f) = &summary.failure {
        entries.push(ReportEntry {
            invariant_id: "run_completed".into(),
            reference: format!("time stepping reached the final time ({f})"),
            pass: false,
            margin: Ext::from_f64(-1.0),
            tolerance: 0.0,
        });
    }
    let reproducible = verify_ledger(sim, &ledger).map_err(from_core)?;
    entries.push(ReportEntry {
        invariant_id: "ledger_reproducible".into(),
        reference: "rebuilding the ledger gives bit-identical constants".into(),
        pass: reproducible,
        margin: Ext::ZERO,
        tolerance: 0.0,
    });

    let mut lemma = None;
    let horizon = cfg.horizon();
    if sim.config.dim == 1 && run.failure.is_none() && summary.failure.is_none() {
        let (p, ft) = tilted(sim, run, cfg, &ledger)?;
        entries.push(count_entry("frequency_derivative_bound", "growth bound on the frequency function", ft.growth_violations.len()));
        entries.push(count_entry("tilted_energy_bounds", "two-sided bound on the tilted energy balance", ft.balance_violations.len()));
        entries.push(count_entry("forcing_bound", "forcing controlled by the tilted energy", ft.forcing_violations.len()));
        entries.push(count_entry("symmetric_form_sign", "symmetric form nonnegative for s <= s2", ft.sign_violations.len()));
        let [f1, f2, f3] = cfg.analysis.lemma_fractions;
        let times = (f1 * horizon, f2 * horizon, f3 * horizon);
        let a = &ledger.analysis;
        let input = lembp_input_from_trace(&ft, a.big_c0, a.big_c1, &p, times).ok();
        formats::write_table(&dir.join(FREQUENCY_FILE), &frequency_columns(&ft, input.as_ref())).or_usage()?;
        match input.as_ref().map(lembp_check) {
            Some(Ok(r)) => {
                entries.push(count_entry("lemma_hypotheses", "hypotheses of the interpolation lemma", r.hypothesis_violations()));
                entries.push(ReportEntry::from_margin(
                    "lemma_conclusion",
                    "conclusion of the interpolation lemma",
                    r.conclusion_margin,
                    r.error_estimate.to_f64(),
                ));
                lemma = Some(LemmaSection {
                    c0: a.big_c0,
                    c1: a.big_c1,
                    h: p.h,
                    horizon,
                    times: [times.0, times.1, times.2],
                    report: (&r).into(),
                });
            }
            Some(Err(e)) => entries.push(failed_entry("lemma_conclusion", "conclusion of the interpolation lemma", &e)),
            None => entries.push(count_entry(
                "lemma_hypotheses",
                "frequency function defined on the whole lemma interval",
                1,
            )),
        }

        let windows: Vec<(f64, f64)> = cfg.analysis.windows.iter().map(|w| (w[0], w[1])).collect();
        match observation_estimate_check(sim, run, &ledger, horizon, &windows) {
            Ok(r) => {
                entries.push(ReportEntry::from_margin(
                    "observation_estimate",
                    "observation estimate on (0, T)",
                    r.margin,
                    tolerances::LOG_ROUNDING,
                ));
                for w in &r.windows {
                    entries.push(ReportEntry::from_margin(
                        &format!("observation_window_{}_{}", w.t1, w.t),
                        "observation estimate on a shifted window",
                        w.margin,
                        tolerances::LOG_ROUNDING,
                    ));
                }
            }
            Err(e) => entries.push(failed_entry("observation_estimate", "observation estimate on (0, T)", &e)),
        }
        let s = cfg.analysis.s.unwrap_or(ledger.analysis.s2);
        match ledger.chain_at(horizon).and_then(|c| step5_chain_check(sim, run, &ledger, &c, s)) {
            Ok(es) => entries.extend(es),
            Err(e) => entries.push(failed_entry("step5_chain", "interpolation, ball and unweighting inequalities", &e)),
        }
    }

    let convergence = convergence_table(cfg, run.dt)?;
    let all_pass = entries.iter().all(|e| e.pass);
    Ok(VerificationReport {
        format_version: FORMAT_VERSION,
        tool_version: tool_version(),
        entries,
        lemma,
        convergence,
        all_pass,
    })
}

/// `verify`: writes `verification.json` into the run directory.
pub fn verify(dir: &Path) -> Outcome<Status> {
    let rd = load_run_dir(dir)?;
    let report = verification_report(&rd, dir)?;
    formats::write_json(&dir.join(VERIFICATION_FILE), &report).or_usage()?;
    for e in report.entries.iter().filter(|e| !e.pass) {
        log::warn!("failed: {} (margin {})", e.invariant_id, e.margin);
    }
    Ok(if report.all_pass { Status::Ok } else { Status::Invariant })
}

/// Ledger document.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LedgerDocument {
    pub format_version: u32,
    pub tool_version: String,
    pub config: RunConfig,
    pub constants: Vec<LedgerEntry>,
}

/// `constants`: ledger JSON to `out` or standard output.
pub fn constants(config: &Path, out: Option<&Path>) -> Outcome<Status> {
    let cfg = RunConfig::load(config).or_usage()?;
    let sim = Simulation::new(cfg.sim_config()).map_err(from_core)?;
    let ledger = ConstantLedger::build(&sim, cfg.ledger_options()).map_err(from_core)?;
    let doc = LedgerDocument {
        format_version: FORMAT_VERSION,
        tool_version: tool_version(),
        config: cfg,
        constants: ledger.entries(),
    };
    match out {
        Some(p) => formats::write_json(p, &doc).or_usage()?,
        None => print_json(&doc)?,
    }
    Ok(Status::Ok)
}

/// Scalars of the interpolation lemma given on the command line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaParams {
    pub c0: f64,
    pub c1: f64,
    pub h: f64,
    pub horizon: f64,
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
}

/// `lembp-check`: series table with columns `t, y, N` and optional `f1, f2`.
pub fn lembp(series: &Path, p: LemmaParams, out: Option<&Path>) -> Outcome<Status> {
    let cols = formats::read_table(series).or_usage()?;
    let need = |name: &str| -> Outcome<Vec<f64>> {
        formats::column(&cols, name)
            .ok_or_else(|| usage(anyhow!("{} has no `{name}` column", series.display())))?
            .map_err(usage)
    };
    let times = need("t")?;
    let y = need("y")?;
    let n = need("N")?;
    let zeros = vec![0.0; times.len()];
    let f1 = formats::column(&cols, "f1").transpose().map_err(usage)?.unwrap_or_else(|| zeros.clone());
    let f2 = formats::column(&cols, "f2").transpose().map_err(usage)?.unwrap_or(zeros);
    let input = LembpInput {
        times,
        y,
        n,
        f1,
        f2,
        c0: p.c0,
        c1: p.c1,
        h: p.h,
        horizon: p.horizon,
        t1: p.t1,
        t2: p.t2,
        t3: p.t3,
    };
    let report = lembp_check(&input).map_err(from_core)?;
    let json = LembpReportJson::from(&report);
    match out {
        Some(path) => formats::write_json(path, &json).or_usage()?,
        None => print_json(&json)?,
    }
    Ok(if json.pass { Status::Ok } else { Status::Invariant })
}

/// Parameter grid of a sweep: a Cartesian product of `[axes]`, or explicit
/// `[[case]]` tables, keyed by dotted config paths.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    #[serde(default)]
    pub axes: toml::Table,
    #[serde(default)]
    pub case: Vec<toml::Table>,
}

/// Flattens nested tables to dotted keys, so `catalyst.k0 = …` and
/// `[catalyst] k0 = …` are equivalent.
fn dotted(table: &toml::Table, prefix: &str, out: &mut Vec<(String, toml::Value)>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            toml::Value::Table(t) => dotted(t, &key, out),
            other => out.push((key, other.clone())),
        }
    }
}

impl SweepGrid {
    pub fn cases(&self) -> anyhow::Result<Vec<Vec<(String, toml::Value)>>> {
        let mut cases: Vec<Vec<(String, toml::Value)>> = Vec::new();
        let mut axes = Vec::new();
        dotted(&self.axes, "", &mut axes);
        if !axes.is_empty() {
            cases.push(Vec::new());
            for (key, values) in axes {
                let values = values.as_array().ok_or_else(|| anyhow!("axis {key} must be an array"))?.clone();
                anyhow::ensure!(!values.is_empty(), "axis {key} is empty");
                cases = cases
                    .into_iter()
                    .flat_map(|c| {
                        let key = &key;
                        values.iter().map(move |v| {
                            let mut c = c.clone();
                            c.push((key.clone(), v.clone()));
                            c
                        })
                    })
                    .collect();
            }
        }
        for t in &self.case {
            let mut c = Vec::new();
            dotted(t, "", &mut c);
            cases.push(c);
        }
        anyhow::ensure!(!cases.is_empty(), "the sweep grid defines no cases");
        Ok(cases)
    }
}

/// One row of the comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub case: String,
    pub config: RunConfig,
    pub beta_obs: Option<f64>,
    pub r_squared: Option<f64>,
    pub status: Status,
    pub note: String,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

/// `sweep`: one run directory per case under `out`, plus `comparison.csv`.
pub fn sweep(template: &Path, grid: &Path, out: &Path, jobs: Option<usize>) -> Outcome<(Status, Vec<SweepRow>)> {
    let text = fs::read_to_string(template).with_context(|| format!("cannot read {}", template.display())).or_usage()?;
    let grid_text = fs::read_to_string(grid).with_context(|| format!("cannot read {}", grid.display())).or_usage()?;
    let spec: SweepGrid = toml::from_str(&grid_text).map_err(|e| usage(anyhow!("invalid sweep grid {}: {e}", grid.display())))?;
    let cases = spec.cases().or_usage()?;
    // parse every case before running any
    let parsed: Vec<(String, RunConfig, String)> = cases
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let (cfg, t) = with_overrides(&text, c).with_context(|| format!("case {k}")).or_usage()?;
            Ok((format!("case_{k:03}"), cfg, t))
        })
        .collect::<Outcome<_>>()?;
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display())).or_usage()?;

    let work = || -> Vec<SweepRow> {
        parsed
            .par_iter()
            .map(|(name, cfg, t)| {
                let dir: PathBuf = out.join(name);
                match simulate_config(cfg, t, &dir) {
                    Ok(s) => SweepRow {
                        case: name.clone(),
                        config: cfg.clone(),
                        beta_obs: s.fit.as_ref().map(|f| f.rate),
                        r_squared: s.fit.as_ref().map(|f| f.r_squared),
                        status: s.status,
                        note: s.failure.or(s.fit_error).unwrap_or_default(),
                    },
                    Err(f) => SweepRow {
                        case: name.clone(),
                        config: cfg.clone(),
                        beta_obs: None,
                        r_squared: None,
                        status: f.status,
                        note: format!("{:#}", f.error),
                    },
                }
            })
            .collect()
    };
    let rows = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(usage)?.install(work),
        None => work(),
    };

    let header = ["case", "shape", "d1", "d2", "k0", "x0", "r", "beta_obs", "r_squared", "status", "note"];
    let records: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let c = &r.config;
            vec![
                r.case.clone(),
                serde_json::to_value(c.catalyst.shape).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default(),
                format!("{:e}", c.physics.d1),
                format!("{:e}", c.physics.d2),
                format!("{:e}", c.catalyst.k0),
                format!("{:e}", c.catalyst.x0),
                format!("{:e}", c.catalyst.r),
                fmt_opt(r.beta_obs),
                fmt_opt(r.r_squared),
                format!("{}", r.status.code()),
                r.note.clone(),
            ]
        })
        .collect();
    formats::write_records(&out.join(COMPARISON_FILE), &header, &records).or_usage()?;
    let status = rows.iter().map(|r| r.status).max().unwrap_or(Status::Ok);
    Ok((status, rows))
}

/// `plot-data`: long-format table `source, t, x, y, variable, value` of the
/// traces, the frequency table when present, and the snapshot fields.
pub fn plot_data(dir: &Path, out: Option<&Path>) -> Outcome<Status> {
    let mut records: Vec<Vec<String>> = Vec::new();
    let mut push_table = |source: &str, cols: &[Column]| {
        let Some(t) = cols.iter().find(|c| c.0 == "t") else { return };
        for c in cols.iter().filter(|c| c.0 != "t") {
            for (k, v) in c.1.iter().enumerate() {
                if let (Some(t), Some(v)) = (t.1[k], v) {
                    records.push(vec![source.into(), format!("{t:e}"), String::new(), String::new(), c.0.clone(), format!("{v:e}")]);
                }
            }
        }
    };
    push_table("trace", &formats::read_table(&dir.join(TRACES_FILE)).or_usage()?);
    let freq = dir.join(FREQUENCY_FILE);
    if freq.exists() {
        push_table("frequency", &formats::read_table(&freq).or_usage()?);
    }
    let snaps = dir.join(SNAPSHOTS_FILE);
    if snaps.exists() {
        let cfg = RunConfig::load(&dir.join(CONFIG_FILE)).or_usage()?;
        let sim = Simulation::new(cfg.sim_config()).map_err(from_core)?;
        let (_, states) = formats::read_snapshots(&snaps).or_usage()?;
        for s in &states {
            for (name, field) in [("a", &s.a), ("b", &s.b)] {
                for (c, v) in field.iter().enumerate() {
                    let p = sim.grid.centers[c];
                    let y = if sim.config.dim > 1 { format!("{:e}", p[1]) } else { String::new() };
                    records.push(vec!["field".into(), format!("{:e}", s.t), format!("{:e}", p[0]), y, name.into(), format!("{v:e}")]);
                }
            }
        }
    }
    let path = out.map_or_else(|| dir.join(PLOT_FILE), Path::to_path_buf);
    formats::write_records(&path, &["source", "t", "x", "y", "variable", "value"], &records).or_usage()?;
    Ok(Status::Ok)
}
