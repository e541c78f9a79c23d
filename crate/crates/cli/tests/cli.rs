use std::f64::consts::PI;
use std::fs;
use std::process::Command;

use bilstab_cli::run::{CSV_FILE, MANIFEST_FILE, SUMMARY_FILE};
use bilstab_cli::{run_scenario, sweep, CliError, RunManifest, ScenarioConfig};

fn config(name: &str, out: &std::path::Path) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::new(name);
    cfg.out = Some(out.to_path_buf());
    cfg
}

#[test]
fn scalar_run_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let m = run_scenario(&config("scalar_fts", dir.path())).unwrap();
    let te = m.results.settling_time.unwrap();
    assert!((te - 2.0).abs() < 0.02, "{te}");
    assert!(m.results.all_pass);

    let csv = fs::read_to_string(dir.path().join(CSV_FILE)).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,norm,control,b_form,obs_1");
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.last().unwrap()[1], 0.0);
    let first_zero = rows.iter().find(|r| r[1] == 0.0).unwrap();
    assert!((first_zero[0] - te).abs() < 1e-12);

    let text = fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap();
    let back: RunManifest = serde_json::from_str(&text).unwrap();
    assert_eq!(back.scenario, "scalar_fts");
    assert_eq!(back.params["mu"], 0.25);
}

#[test]
fn prescribed_time_records_gain() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config("r4_prts", dir.path());
    cfg.apply_override("T_target=0.5").unwrap();
    let m = run_scenario(&cfg).unwrap();
    let rho = m.derived["rho"];
    assert!((rho - PI / (4.0 * 0.5 * 0.25)).abs() < 1e-12);
    assert!(m.results.settling_time.unwrap() <= 0.5);
}

#[test]
fn unknown_scenario_lists_catalog() {
    let err = run_scenario(&ScenarioConfig::new("does_not_exist")).unwrap_err();
    assert!(matches!(err, CliError::UnknownScenario { .. }));
    assert!(err.to_string().contains("transport_fts_delayed"));
}

#[test]
fn invalid_parameter_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config("scalar_fts", dir.path());
    cfg.apply_override("mu=0.7").unwrap();
    let err = run_scenario(&cfg).unwrap_err().to_string();
    assert!(err.contains("mu"), "{err}");
}

#[test]
fn reruns_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    for sub in ["a", "b"] {
        let mut cfg = config("wave_damped_vr", &dir.path().join(sub));
        cfg.seed = 9;
        cfg.apply_override("horizon=50").unwrap();
        run_scenario(&cfg).unwrap();
    }
    let a = fs::read(dir.path().join("a").join(CSV_FILE)).unwrap();
    let b = fs::read(dir.path().join("b").join(CSV_FILE)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn different_seeds_differ() {
    let dir = tempfile::tempdir().unwrap();
    for (sub, seed) in [("a", 1), ("b", 2)] {
        let mut cfg = config("r4_fts", &dir.path().join(sub));
        cfg.seed = seed;
        run_scenario(&cfg).unwrap();
    }
    let a = fs::read(dir.path().join("a").join(CSV_FILE)).unwrap();
    let b = fs::read(dir.path().join("b").join(CSV_FILE)).unwrap();
    assert_ne!(a, b);
}

#[test]
fn sweep_rows_follow_value_order() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ScenarioConfig::new("transport_l1_exp");
    let rows = sweep(&cfg, "λ", &[0.2, 0.05, 0.1], dir.path()).unwrap();
    assert_eq!(rows.iter().map(|r| r.value).collect::<Vec<_>>(), vec![0.2, 0.05, 0.1]);
    for r in &rows {
        assert!(r.max_zeta.unwrap() < 1.0);
    }
    let summary = fs::read_to_string(dir.path().join(SUMMARY_FILE)).unwrap();
    assert_eq!(summary.lines().count(), 4);
    assert!(dir.path().join("lambda_01").join(MANIFEST_FILE).exists());
}

#[test]
fn sweep_exponents_track_r() {
    let dir = tempfile::tempdir().unwrap();
    let rows = sweep(&ScenarioConfig::new("wave_damped"), "r", &[0.0, 1.0], dir.path()).unwrap();
    assert!((rows[0].fitted_rate.unwrap() - 0.5).abs() < 0.1);
    assert!((rows[1].fitted_rate.unwrap() - 1.0).abs() < 0.1);
}

#[test]
fn sweep_rejects_empty_and_foreign_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ScenarioConfig::new("scalar_fts");
    assert!(matches!(
        sweep(&cfg, "mu", &[], dir.path()),
        Err(CliError::Validation { .. })
    ));
    assert!(sweep(&cfg, "modes", &[1.0], dir.path()).is_err());
    assert!(sweep(&cfg, "lambda", &[1.0], dir.path()).is_err());
}

#[test]
fn config_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    let out = dir.path().join("out");
    fs::write(
        &path,
        format!(
            "[scenario]\nname = \"heat_spectral_fts\"\nseed = 3\nout = \"{}\"\n\n[params]\n\"μ\" = 0.3\n\n[sim]\ndt_max = 0.002\n",
            out.display()
        ),
    )
    .unwrap();
    let cfg = ScenarioConfig::load(&path).unwrap();
    let m = run_scenario(&cfg).unwrap();
    assert_eq!(m.params["mu"], 0.3);
    assert_eq!(m.sim.dt_max, 0.002);
    assert!(out.join(CSV_FILE).exists());
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bilstab"))
}

#[test]
fn binary_lists_and_reports_errors() {
    let list = bin().arg("list").output().unwrap();
    assert!(list.status.success());
    let text = String::from_utf8(list.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| !l.starts_with(' ')).count(), 13);

    let bad = bin().args(["run", "--scenario", "nope"]).output().unwrap();
    assert!(!bad.status.success());
    assert!(String::from_utf8(bad.stderr).unwrap().contains("scalar_fts"));

    let dir = tempfile::tempdir().unwrap();
    let ok = bin()
        .args(["run", "--scenario", "scalar_fts", "--set", "x0_scale=4", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(ok.status.success());
    let line = String::from_utf8(ok.stdout).unwrap();
    assert!(line.contains("PASS") && line.contains("settling=4.0"), "{line}");
}

#[test]
fn binary_uses_output_root_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["run", "--scenario", "heat_spectral_kernel"])
        .env("BILSTAB_OUT", dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    assert!(dir.path().join("heat_spectral_kernel").join(CSV_FILE).exists());
}

#[test]
fn binary_sweep_accepts_negative_values() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "sweep",
            "--scenario",
            "wave_damped_vr",
            "--param",
            "r",
            "--values",
            "-1,0",
            "--set",
            "horizon=100",
            "--out",
        ])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(dir.path().join(SUMMARY_FILE)).unwrap();
    assert!(summary.lines().nth(1).unwrap().starts_with("-1.0"));
}

#[test]
fn manifests_without_extinction_parse_back() {
    for name in ["heat_spectral_kernel", "wave_undamped_weak"] {
        let dir = tempfile::tempdir().unwrap();
        let m = run_scenario(&config(name, dir.path())).unwrap();
        assert!(m.results.settling_time.is_none());
        let text = fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap();
        let back: RunManifest = serde_json::from_str(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(back.results.bound_checks.len(), m.results.bound_checks.len());
    }
}
