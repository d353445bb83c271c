use std::path::Path;
use std::process::Command;

use mwfpi_core::propagator::Sampling;
use mwfpi_core::runner::{run, transmit_point, unlisted_files, RunManifest, Scenario, ScenarioConfig};

const FAST: &str = r#"{
  "grid": {"half_width": 300.0, "n_points": 1024},
  "solver": {"outflow_ramp": 80.0, "t_cap_s": 0.3},
  "svg": true
}"#;

fn fast(overrides: &[&str]) -> ScenarioConfig {
    let o: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    ScenarioConfig::from_json(FAST, &o).unwrap()
}

fn mwfpi(args: &[&str], dir: &Path) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_mwfpi")).args(args).current_dir(dir).env_remove("MWFPI_WORKERS").output().unwrap();
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn manifest(dir: &Path) -> RunManifest {
    serde_json::from_slice(&std::fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn cli_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("fast.json");
    std::fs::write(&cfg, FAST).unwrap();
    let cfg = cfg.to_str().unwrap();

    let (code, err) = mwfpi(&["transmit", "--config", cfg, "--out", "t", "--override", "energies=[0.9]"], tmp.path());
    assert_eq!(code, 0, "{err}");
    let m = manifest(&tmp.path().join("t"));
    assert!(m.files.contains_key("transmit.json") && m.files.contains_key("moments.csv"));
    assert!(unlisted_files(&tmp.path().join("t"), &m).unwrap().is_empty());

    // below the launch-energy floor at g < 0: the point fails, the run completes
    let (code, _) = mwfpi(
        &["sweep", "--config", cfg, "--out", "s", "--workers", "2", "--override", "energies=[0.05, 0.9]",
          "--override", "gravities_m_s2=[-1.3e-3]"],
        tmp.path(),
    );
    assert_eq!(code, 2);
    let m = manifest(&tmp.path().join("s"));
    assert_eq!(m.failures, 1);
    assert!(m.points[0].error.as_ref().unwrap().contains("launch-energy floor"));
    assert!(m.points[1].error.is_none());
    let csv = std::fs::read_to_string(tmp.path().join("s/sweep_full.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().contains("NaN") || csv.lines().nth(1).unwrap().contains("nan"));

    for bad in [
        vec!["nonsense", "--config", cfg],
        vec!["sweep", "--config", "missing.json"],
        vec!["sweep", "--config", cfg, "--override", "energies=[0.5, 0.4]"],
        vec!["sweep", "--config", cfg, "--override", "grid.bogus=1"],
        vec!["spectrum", "--config", cfg, "--override", "model.gravity_m_s2=1e-3"],
    ] {
        let (code, err) = mwfpi(&bad, tmp.path());
        assert_eq!(code, 1, "{bad:?}: {err}");
    }
}

#[test]
fn workers_do_not_change_outputs() {
    let c = fast(&["gravities_m_s2=[-1e-3, 0.0, 1e-3]", "energies=[0.8, 0.9, 1.0]"]);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let one = run(&c, Scenario::Sweep, a.path(), 1).unwrap();
    let three = run(&c, Scenario::Sweep, b.path(), 3).unwrap();
    assert_eq!(one.files, three.files);
    assert_eq!(one.failures, 0);
    assert!(one.files.contains_key("sweep_full.svg"));
    let again = tempfile::tempdir().unwrap();
    assert_eq!(run(&c, Scenario::Sweep, again.path(), 2).unwrap().files, one.files);
    for dir in [a.path(), b.path()] {
        assert!(unlisted_files(dir, &manifest(dir)).unwrap().is_empty());
    }
}

#[test]
fn single_point_sweep_matches_transmit() {
    let c = fast(&["gravities_m_s2=[-8e-4]", "energies=[0.77]"]);
    let dir = tempfile::tempdir().unwrap();
    let m = run(&c, Scenario::Sweep, dir.path(), 1).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("sweep_full.csv")).unwrap();
    let t_sweep: f64 = csv.lines().nth(1).unwrap().split(',').nth(2).unwrap().parse().unwrap();
    let mut p = c.model;
    p.gravity_m_s2 = -8e-4;
    let (_, _, out) = transmit_point(&p, 0.77, &c.grid, &c.solver, Sampling::default()).unwrap();
    assert_eq!(format!("{:.10e}", out.observables.t_r), format!("{t_sweep:.10e}"));
    assert_eq!(m.points[0].stop_reason, Some(out.stop_reason));
}

#[test]
fn empty_axis_is_a_config_error_and_overrides_apply() {
    let c = fast(&["energies=[]"]);
    let dir = tempfile::tempdir().unwrap();
    assert!(run(&c, Scenario::Sweep, dir.path(), 1).is_err());
    let c = fast(&["solver.dt_policy.safety=8", "model.barrier_height_J=1.42e-25"]);
    assert_eq!(c.solver.dt_policy.safety, 8.0);
    assert_eq!(c.model.barrier_height_j, 1.42e-25);
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let stem = path.file_stem().unwrap().to_string_lossy().into_owned();
        let name = stem.split('_').next().unwrap().replace("bragg", "bragg-table");
        let scenario: Scenario = name.parse().unwrap();
        let c = ScenarioConfig::from_json(&std::fs::read_to_string(&path).unwrap(), &[]).unwrap();
        c.validate(scenario).unwrap_or_else(|e| panic!("{stem}: {e}"));
        n += 1;
    }
    assert!(n >= 6);
}
