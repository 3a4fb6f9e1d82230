//! End-to-end runs of the `rdlc` binary on temporary directories.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rdlc::commands::{RunSummary, VerificationReport};
use rdlc::config::{with_overrides, RunConfig};
use rdlc::formats::{column, read_snapshots, read_table};
use rdlc_core::diagnostics::fit_decay_rate;
use rdlc_core::solver::run;
use rdlc_core::Ext;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn rdlc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rdlc")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// The reference config shortened for test runtime.
fn short_bump(dir: &Path, extra: &[(&str, toml::Value)]) -> PathBuf {
    let text = fs::read_to_string(configs().join("degenerate_bump.cfg")).unwrap();
    let mut o: Vec<(String, toml::Value)> = vec![
        ("grid.resolution".into(), toml::Value::Integer(128)),
        ("stepper.t_end".into(), toml::Value::Float(4.0)),
        ("analysis.horizon".into(), toml::Value::Float(2.0)),
    ];
    o.extend(extra.iter().map(|(k, v)| (k.to_string(), v.clone())));
    let (_, t) = with_overrides(&text, &o).unwrap();
    let path = dir.join("bump.toml");
    fs::write(&path, t).unwrap();
    path
}

#[test]
fn equilibrium_run_has_constant_traces_and_verifies() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("eq");
    let o = rdlc(&["simulate", p(&configs().join("equilibrium.cfg")), "-o", p(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let cols = read_table(&out.join("traces.csv")).unwrap();
    for name in ["mass", "l2_dist", "l3_sum", "min_ab", "dissipation_reaction"] {
        let v = column(&cols, name).unwrap().unwrap();
        assert!(v.iter().all(|x| *x == v[0]), "{name} not constant");
    }
    assert!(fs::read_to_string(out.join("traces.csv")).unwrap().starts_with("# format_version=1\n"));
    let o = rdlc(&["verify", p(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: VerificationReport = serde_json::from_str(&fs::read_to_string(out.join("verification.json")).unwrap()).unwrap();
    assert!(report.all_pass);
    assert!(report.entries.iter().all(|e| e.margin == Ext::ZERO || e.invariant_id == "theta_below_one"));
}

#[test]
fn degenerate_bump_decays_and_verifies() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = short_bump(tmp.path(), &[]);
    let out = tmp.path().join("run");
    assert_eq!(code(&rdlc(&["simulate", p(&cfg), "-o", p(&out)])), 0);
    let l2 = column(&read_table(&out.join("traces.csv")).unwrap(), "l2_dist").unwrap().unwrap();
    assert!(l2.windows(2).all(|w| w[1] < w[0]));
    assert!(l2[l2.len() - 1] < 1e-2 * l2[0]);
    let summary: RunSummary = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert!(summary.fit.unwrap().rate > 0.0);
    assert!(summary.flags.is_empty());
    let o = rdlc(&["verify", p(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("frequency.csv").exists());

    // the frequency table feeds lembp-check directly
    let report: VerificationReport = serde_json::from_str(&fs::read_to_string(out.join("verification.json")).unwrap()).unwrap();
    let l = report.lemma.unwrap();
    let args = [
        "lembp-check".to_string(),
        out.join("frequency.csv").display().to_string(),
        format!("--c0={}", l.c0),
        format!("--c1={}", l.c1),
        format!("--h={}", l.h),
        format!("--horizon={}", l.horizon),
        format!("--t1={}", l.times[0]),
        format!("--t2={}", l.times[1]),
        format!("--t3={}", l.times[2]),
    ];
    let o = rdlc(&args.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["pass"], true);
    assert_eq!(v["conclusion_margin"], serde_json::to_value(l.report.conclusion_margin).unwrap());

    // long-format plot table: every trace value and every field value
    assert_eq!(code(&rdlc(&["plot-data", p(&out)])), 0);
    let text = fs::read_to_string(out.join("plot_data.csv")).unwrap();
    let traces = text.lines().filter(|l| l.starts_with("trace,")).count();
    let fields = text.lines().filter(|l| l.starts_with("field,")).count();
    let cols = read_table(&out.join("traces.csv")).unwrap();
    let present: usize = cols.iter().filter(|c| c.0 != "t").map(|c| c.1.iter().flatten().count()).sum();
    assert_eq!(traces, present);
    let (_, states) = read_snapshots(&out.join("snapshots.bin")).unwrap();
    assert_eq!(fields, states.len() * 2 * 128);
}

#[test]
fn malformed_config_leaves_no_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.cfg");
    let out = tmp.path().join("out");
    for text in ["[grid]\nresolution = \"many\"\n", "[grid]\nresolution = 64\ncolour = 1\n", "not toml at all ["] {
        fs::write(&bad, text).unwrap();
        let o = rdlc(&["simulate", p(&bad), "-o", p(&out)]);
        assert_eq!(code(&o), 1);
        assert!(String::from_utf8_lossy(&o.stderr).contains("line"), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(!out.exists());
    }
    // schema-valid but inconsistent geometry
    let text = fs::read_to_string(configs().join("degenerate_bump.cfg")).unwrap();
    let cfg = tmp.path().join("off_centre.cfg");
    fs::write(&cfg, text.replace("x0 = 0.25", "x0 = 0.45")).unwrap();
    assert_eq!(code(&rdlc(&["simulate", p(&cfg), "-o", p(&out)])), 1);
    assert!(!out.exists());
}

#[test]
fn usage_errors() {
    assert_eq!(code(&rdlc(&[])), 1);
    assert_eq!(code(&rdlc(&["simulate"])), 1);
    assert_eq!(code(&rdlc(&["verify", "/nonexistent/run"])), 1);
    assert_eq!(code(&rdlc(&["--version"])), 0);
}

#[test]
fn verify_needs_snapshots() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = short_bump(tmp.path(), &[("output.snapshots", toml::Value::Boolean(false))]);
    let out = tmp.path().join("run");
    assert_eq!(code(&rdlc(&["simulate", p(&cfg), "-o", p(&out)])), 0);
    let o = rdlc(&["verify", p(&out)]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("snapshots"));
}

#[test]
fn unstable_step_is_reported_with_a_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = short_bump(
        tmp.path(),
        &[
            ("catalyst.shape", "constant".into()),
            ("catalyst.k0", toml::Value::Float(500.0)),
            ("initial.a.amplitude", toml::Value::Float(0.95)),
            ("initial.b.amplitude", toml::Value::Float(-0.95)),
            ("stepper.dt", toml::Value::Float(0.05)),
            ("output.frequency", toml::Value::Boolean(false)),
        ],
    );
    let out = tmp.path().join("run");
    let o = rdlc(&["simulate", p(&cfg), "-o", p(&out)]);
    let summary: RunSummary = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert!(summary.stability_violations > 0);
    assert!(code(&o) == 2 || code(&o) == 3, "exit {}", code(&o));
    assert_eq!(code(&o) == 2, summary.failure.is_some());
}

#[test]
fn constants_report_a_contraction_factor_below_one() {
    let o = rdlc(&["constants", p(&configs().join("degenerate_bump.cfg"))]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let consts = doc["constants"].as_array().unwrap();
    let get = |name: &str| consts.iter().find(|c| c["name"] == name).unwrap_or_else(|| panic!("{name}"));
    // theta sits within exp(-exp(..)) of 1, so check its logarithm
    let theta = get("theta")["value"].as_str().unwrap();
    let ln_theta: Ext = theta.strip_prefix("exp(").and_then(|s| s.strip_suffix(')')).unwrap().parse().unwrap();
    assert!(ln_theta.is_negative(), "{theta}");
    assert!(get("beta")["provenance"].as_str().unwrap().contains("theta"));
    assert_eq!(doc["format_version"], 1);
    // idempotent
    assert_eq!(o.stdout, rdlc(&["constants", p(&configs().join("degenerate_bump.cfg"))]).stdout);
}

#[test]
fn outputs_are_bitwise_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = short_bump(tmp.path(), &[]);
    let (x, y) = (tmp.path().join("x"), tmp.path().join("y"));
    for d in [&x, &y] {
        assert_eq!(code(&rdlc(&["simulate", p(&cfg), "-o", p(d)])), 0);
        assert_eq!(code(&rdlc(&["verify", p(d)])), 0);
    }
    for f in ["config.toml", "traces.csv", "snapshots.bin", "summary.json", "verification.json", "frequency.csv"] {
        assert_eq!(fs::read(x.join(f)).unwrap(), fs::read(y.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn catalyst_sweep_matches_individual_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = short_bump(tmp.path(), &[("output.frequency", toml::Value::Boolean(false))]);
    let out = tmp.path().join("sweep");
    let o = rdlc(&["sweep", p(&cfg), p(&configs().join("k0_sweep.toml")), "-o", p(&out), "-j", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("comparison.csv")).unwrap();
    let mut lines = text.lines().skip(1);
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = |n: &str| header.iter().position(|h| *h == n).unwrap();
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    let template = RunConfig::load(&cfg).unwrap();
    for (row, k0) in rows.iter().zip([0.25, 0.5, 1.0, 2.0]) {
        let beta: f64 = row[idx("beta_obs")].parse().unwrap();
        assert!(beta > 0.0);
        assert_eq!(row[idx("k0")].parse::<f64>().unwrap(), k0);
        // oracle: the same case simulated and fitted directly
        let mut sc = template.sim_config();
        sc.catalyst.k0 = k0;
        let direct = fit_decay_rate(&run(&sc).unwrap().trace, "l2_dist", None).unwrap().rate;
        assert_eq!(beta, direct);
    }
}
