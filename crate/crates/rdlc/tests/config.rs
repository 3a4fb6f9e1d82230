//! Config parsing, dotted overrides, and sweep grid expansion.

use std::path::Path;

use rdlc::commands::SweepGrid;
use rdlc::config::{set_dotted, with_overrides, RunConfig};

fn shipped(name: &str) -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)).unwrap()
}

#[test]
fn shipped_configs_parse_and_check() {
    for name in ["degenerate_bump.cfg", "equilibrium.cfg"] {
        let cfg = RunConfig::from_toml_str(&shipped(name)).unwrap();
        cfg.check().unwrap();
        // serialization is stable under a round trip
        let again = RunConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(again, cfg);
    }
}

#[test]
fn defaults_fill_omitted_sections() {
    let text = "[grid]\nresolution = 32\n\
        [catalyst]\nshape = \"constant\"\nk0 = 1.0\nx0 = 0.0\nr = 0.1\n\
        [initial.a]\ntype = \"constant\"\nvalue = 1.0\n\
        [initial.b]\ntype = \"constant\"\nvalue = 1.0\n\
        [stepper]\nt_end = 1.0\nsnapshot_interval = 0.5\n";
    let cfg = RunConfig::from_toml_str(text).unwrap();
    cfg.check().unwrap();
    assert_eq!(cfg.domain.dim, 1);
    assert_eq!((cfg.physics.d1, cfg.physics.d2), (1.0, 1.0));
    assert!(cfg.output.snapshots && !cfg.output.frequency);
    assert_eq!(cfg.horizon(), 1.0);
}

#[test]
fn unknown_keys_are_errors() {
    let err = RunConfig::from_toml_str("[grid]\nresolution = 32\nrings = 3\n").unwrap_err();
    assert!(format!("{err:#}").contains("rings"));
}

#[test]
fn dotted_overrides() {
    let mut doc = toml::Table::new();
    set_dotted(&mut doc, "catalyst.k0", toml::Value::Float(2.0)).unwrap();
    set_dotted(&mut doc, "seed", toml::Value::Integer(4)).unwrap();
    assert_eq!(doc["catalyst"]["k0"].as_float(), Some(2.0));
    assert!(set_dotted(&mut doc, "seed.inner", toml::Value::Integer(1)).is_err());

    let (cfg, text) = with_overrides(&shipped("degenerate_bump.cfg"), &[("catalyst.k0".into(), toml::Value::Float(0.5))]).unwrap();
    assert_eq!(cfg.catalyst.k0, 0.5);
    assert_eq!(RunConfig::from_toml_str(&text).unwrap(), cfg);
    assert!(with_overrides(&shipped("equilibrium.cfg"), &[("grid.colour".into(), toml::Value::Integer(1))]).is_err());
}

#[test]
fn sweep_grids_expand() {
    let grid: SweepGrid = toml::from_str(&shipped("k0_sweep.toml")).unwrap();
    let cases = grid.cases().unwrap();
    assert_eq!(cases.len(), 4);
    assert!(cases.iter().all(|c| c.len() == 1 && c[0].0 == "catalyst.k0"));

    let grid: SweepGrid = toml::from_str("[axes]\n\"physics.d1\" = [1.0, 2.0]\n[axes.catalyst]\nk0 = [1.0, 2.0, 3.0]\n[[case]]\nseed = 9\n").unwrap();
    let cases = grid.cases().unwrap();
    assert_eq!(cases.len(), 2 * 3 + 1);
    let mut keys: Vec<_> = cases[0].iter().map(|c| c.0.as_str()).collect();
    keys.sort();
    assert_eq!(keys, ["catalyst.k0", "physics.d1"]);

    let support: SweepGrid = toml::from_str(&shipped("support_sweep.toml")).unwrap();
    assert_eq!(support.cases().unwrap().len(), 4);
    assert!(toml::from_str::<SweepGrid>("").unwrap().cases().is_err());
    assert!(toml::from_str::<SweepGrid>("[axes]\nseed = []\n").unwrap().cases().is_err());
}
