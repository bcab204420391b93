use ringsqz::config::{DriveConfig, RunConfig, ScenarioName};
use ringsqz::device::{figures_of_merit, Label};
use ringsqz::pump::Drive;
use ringsqz::simulation::Problem;
use ringsqz::Error;
use std::path::Path;
use std::process::Command;

const SMALL: &str = r#"
[device]
finesse = 50.0
ring_phantoms = 2
n_r = 4.0
n_k = 9

[drive]
kind = "gaussian"
energy_pj = 50.0
tau_ps = 40.0

[scenario]
name = "single"
"#;

fn config_err(text: &str) -> bool {
    matches!(RunConfig::from_toml(text), Err(Error::Config(_)))
}

#[test]
fn unknown_keys_are_rejected() {
    assert!(config_err("colour = 1\n"));
    assert!(config_err("[device]\nfinese = 50.0\n"));
    assert!(config_err("[drive]\nkind = \"gaussian\"\nenergy_pj = 1.0\ntau_ps = 1.0\npower_w = 1.0\n"));
    assert!(config_err("[drive]\nkind = \"square\"\n"));
    assert!(config_err("[scenario]\nname = \"everything\"\n"));
    assert!(config_err("[numerics]\nthreads = 4\n"));
}

#[test]
fn defaults_round_trip() {
    let cfg = RunConfig::from_toml("").unwrap();
    let text = cfg.to_toml();
    let again = RunConfig::from_toml(&text).unwrap();
    assert_eq!(again.to_toml(), text);
    let small = RunConfig::from_toml(SMALL).unwrap();
    assert_eq!(small.device.finesse, 50.0);
    assert_eq!(small.device.n_k, 9);
    assert!(matches!(small.drive, DriveConfig::Gaussian { lead_tau, .. } if lead_tau == 5.0));
    for f in ["quick.toml", "pulsed.toml", "cw.toml"] {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(f);
        RunConfig::load(&path).unwrap();
    }
}

#[test]
fn invalid_values_are_rejected() {
    assert!(config_err("[device]\nn_k = 40\n"));
    assert!(config_err("[device]\nescape_efficiency = 1.5\n"));
    assert!(config_err("[device]\nfinesse = -3.0\n"));
    assert!(config_err("[drive]\nkind = \"gaussian\"\nenergy_pj = -1.0\ntau_ps = 10.0\n"));
    assert!(config_err("[drive]\nkind = \"cw\"\npower_w = 0.0\n"));
    assert!(config_err("[numerics]\nrate_checkpoints = 2\n"));
    assert!(config_err("[numerics]\ncw_span = 1.5\n"));
    assert!(matches!(RunConfig::load(Path::new("/nonexistent/run.toml")), Err(Error::Io(_))));
}

#[test]
fn scenario_names_parse() {
    for n in ScenarioName::ALL {
        assert_eq!(ScenarioName::parse(n.as_str()).unwrap(), n);
    }
    assert!(ScenarioName::parse("Single").is_err());
}

#[test]
fn grid_keeps_pulse_inside_one_recurrence() {
    let mut cfg = RunConfig::from_toml(SMALL).unwrap();
    let params = cfg.device.params();
    let (n_r, n_k) = cfg.grid_for(&params).unwrap();
    assert_eq!(n_r, 4.0);
    assert!(n_k % 2 == 1 && n_k >= 9);
    let spec = params.build().unwrap();
    let gamma = Label::ALL.iter().map(|&l| figures_of_merit(&spec, l).unwrap().gamma_omega).fold(f64::INFINITY, f64::min);
    let recurrence = 2.0 * std::f64::consts::PI * (n_k - 1) as f64 / (2.0 * n_r * gamma);
    let needed = 2.0 * 5.0 * 40.0 + (1.0 / cfg.numerics.decay).ln() / (2.0 * gamma);
    assert!(recurrence >= needed, "{recurrence} {needed}");
    cfg.device.finesse = 5.0;
    assert_eq!(cfg.grid_for(&cfg.device.params()).unwrap().0, 2.0);
    cfg.device.auto_n_k = false;
    assert_eq!(cfg.grid_for(&cfg.device.params()).unwrap().1, 9);
}

#[test]
fn cw_carrier_snaps_to_a_bin() {
    let cfg = RunConfig::from_toml("[device]\nfinesse = 50.0\nring_phantoms = 2\n[drive]\nkind = \"cw\"\npower_w = 1e-3\ndetuning = 0.33\n").unwrap();
    let (n_r, n_k) = cfg.grid_for(&cfg.device.params()).unwrap();
    let pr = Problem::new(cfg.device.params().build().unwrap(), cfg.numerics(n_r, n_k)).unwrap();
    let Drive::Cw { k0_offset, .. } = RunConfig::drive_for(&cfg.drive, &pr).unwrap() else { panic!() };
    let w = pr.window(Label::P);
    assert!(w.dks.contains(&k0_offset));
    let target = 0.33 * figures_of_merit(&pr.spec, Label::P).unwrap().gamma_omega / w.v;
    assert!((k0_offset - target).abs() <= 0.5 * w.dk * (1.0 + 1e-12));
}

fn simulate(args: &[&str], threads_env: Option<&str>) -> std::process::Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_simulate"));
    cmd.args(args).env_remove("RINGSQZ_THREADS");
    if let Some(t) = threads_env {
        cmd.env("RINGSQZ_THREADS", t);
    }
    cmd.output().unwrap()
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn cli_outputs_are_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let c = cfg.to_str().unwrap();
    let out = simulate(&["--config", c, "--out", a.to_str().unwrap(), "--threads", "1"], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = simulate(&["--config", c, "--out", b.to_str().unwrap()], Some("2"));
    assert!(out.status.success());
    let (fa, fb) = (read_dir_sorted(&a), read_dir_sorted(&b));
    let names: Vec<&str> = fa.iter().map(|f| f.0.as_str()).collect();
    assert!(names.contains(&"scalars.csv") && names.contains(&"metadata.toml") && names.contains(&"oracles.csv"));
    assert_eq!(fa, fb);
    let scalars = String::from_utf8(fa.iter().find(|f| f.0 == "scalars.csv").unwrap().1.clone()).unwrap();
    let header: Vec<&str> = scalars.lines().next().unwrap().split(',').collect();
    assert_eq!(header, ringsqz::runner::SCALAR_COLUMNS);
    let row: Vec<&str> = scalars.lines().nth(1).unwrap().split(',').collect();
    let n_tot: f64 = row[header.iter().position(|h| *h == "n_tot_s").unwrap()].parse().unwrap();
    assert!(n_tot > 0.0);
}

#[test]
fn cli_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "[device]\nradius = 3.0\n").unwrap();
    let out = tmp.path().join("o");
    let o = out.to_str().unwrap();
    assert_eq!(simulate(&["--config", bad.to_str().unwrap(), "--out", o], None).status.code(), Some(2));
    assert_eq!(simulate(&["--config", "/nonexistent.toml", "--out", o], None).status.code(), Some(2));
    let good = tmp.path().join("good.toml");
    std::fs::write(&good, SMALL).unwrap();
    let g = good.to_str().unwrap();
    assert_eq!(simulate(&["--config", g, "--scenario", "bogus", "--out", o], None).status.code(), Some(2));
    assert_eq!(simulate(&["--out", o], None).status.code(), Some(2));
    let check = simulate(&["--config", g, "--check", "--out", o], None);
    assert_eq!(check.status.code(), Some(0), "{}", String::from_utf8_lossy(&check.stderr));
    assert!(out.join("oracles.csv").exists());
}
