use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::Command;

use serde_json::Value;
use vw_cli::config::{Experiment, RunConfig};
use vw_cli::output::{sha256_hex, Status};
use vw_cli::{run, sweep, CliError};

fn config(text: &str, dir: &Path) -> RunConfig {
    let mut cfg = RunConfig::parse(text).unwrap();
    cfg.set_output_dir(dir.to_path_buf());
    cfg
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn parse_err(text: &str) -> (usize, String) {
    match RunConfig::parse(text) {
        Err(CliError::ConfigParse { line, message }) => (line, message),
        other => panic!("expected a parse error for {text:?}, got {other:?}"),
    }
}

#[test]
fn config_errors_name_the_line() {
    let (line, msg) = parse_err("experiment = disk\nbogus = 1\n");
    assert_eq!(line, 2);
    assert!(msg.contains("bogus"));
    let (line, msg) = parse_err("alpha = 1\n# comment\nalpha = 2\n");
    assert_eq!(line, 3);
    assert!(msg.contains("line 1"));
    assert_eq!(parse_err("alpha = -1").0, 1);
    assert_eq!(parse_err("alpha").0, 1);
    assert_eq!(parse_err("torus_n = 2.5").0, 1);
    assert_eq!(parse_err("richardson = yes").0, 1);
    assert_eq!(parse_err("experiment = everything").0, 1);
    assert_eq!(parse_err("disk_r_list = 4,8,6").0, 1);
    assert_eq!(parse_err("sweep_key = experiment\nsweep_values = 1").0, 0);
    assert_eq!(parse_err("sweep_key = alpha").0, 0);
}

#[test]
fn config_defaults_and_overrides() {
    let cfg = RunConfig::parse("experiment = bands # trailing comment\nband_r_list = 5, 10\n").unwrap();
    assert_eq!(cfg.experiment, Experiment::Bands);
    assert_eq!(cfg.reals("band_r_list"), &[5.0, 10.0]);
    assert_eq!(cfg.real("alpha"), 1.0);
    assert_eq!(cfg.seed(), 11);
    assert_eq!(RunConfig::parse(&cfg.to_text()).unwrap(), cfg);
}

#[test]
fn identities_report_carries_exact_targets() {
    let dir = tempfile::tempdir().unwrap();
    let m = run(&config("experiment = identities", dir.path())).unwrap();
    assert!(m.passed());
    let rep = json(&dir.path().join("identities.json"));
    let ids = rep["identities"].as_array().unwrap();
    for name in ["xi0", "I_dxi", "I_phixi", "I_dxi + 4 I_phixi", "k0 pairing"] {
        let r = ids.iter().find(|r| r["name"] == name).unwrap_or_else(|| panic!("{name} missing"));
        assert!(r["rel_err"].as_f64().unwrap() <= 1e-4, "{name}");
    }
    let header = fs::read_to_string(dir.path().join("xi_profile.csv")).unwrap();
    assert!(header.starts_with("s,xi,xi_prime\n"));
}

#[test]
fn fiducial_runs_are_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ma = run(&config("experiment = fiducial", a.path())).unwrap();
    let mb = run(&config("experiment = fiducial", b.path())).unwrap();
    assert_eq!(ma.files, mb.files);
    let raw = ma.checks.iter().find(|c| c.name == "decay_exponent_raw").unwrap();
    assert_eq!(raw.status, Status::KnownFail);
    assert!(ma.passed());
}

#[test]
fn band_slopes_follow_the_two_scalings() {
    let dir = tempfile::tempdir().unwrap();
    let m = run(&config("experiment = bands\ngenus_list = 2,3", dir.path())).unwrap();
    assert!(m.passed(), "{:?}", m.checks);
    let rep = json(&dir.path().join("bands.json"));
    for g in rep["genera"].as_array().unwrap() {
        let small = g["small_slope"].as_f64().unwrap();
        let large = g["large_slope"].as_f64().unwrap();
        assert!((small + 2.0).abs() < 0.1, "{small}");
        assert!((large + 2.0 / 3.0).abs() < 0.03, "{large}");
    }
    let csv = fs::read_to_string(dir.path().join("bands.csv")).unwrap();
    assert!(csv.starts_with("g,r,index,eigenvalue\n"));
    // 4 values of r, then 6g - 6 eigenvalues each for g = 2 and 3.
    assert_eq!(csv.lines().count(), 1 + 4 * (6 + 12));
}

#[test]
fn alpha1_list_is_cycled() {
    let dir = tempfile::tempdir().unwrap();
    let m = run(&config("experiment = bands\ngenus_list = 3\nalpha1_list = 1,2", dir.path())).unwrap();
    assert!(m.passed(), "{:?}", m.checks);
}

#[test]
fn disk_sweep_is_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("experiment = disk\nsweep_key = disk_r_list\nsweep_values = 4,6,8", dir.path());
    let m = sweep(&cfg, 3).unwrap();
    let mono = m.checks.iter().find(|c| c.name == "sweep/sup_y decreasing in r").unwrap();
    assert_eq!(mono.status, Status::Pass);
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "disk_r_list,r,sup_y,newton_iterations,residual");
    let sup: Vec<f64> = lines.map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert_eq!(sup.len(), 3);
    assert!(sup.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn one_point_sweep_matches_run() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run(&config("experiment = disk\ndisk_r_list = 6", a.path())).unwrap();
    sweep(&config("experiment = disk\nsweep_key = disk_r_list\nsweep_values = 6", b.path()), 1).unwrap();
    for f in ["disk.json", "disk_r6.csv"] {
        let x = fs::read(a.path().join(f)).unwrap();
        let y = fs::read(b.path().join("disk_r_list-6").join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
}

#[test]
fn sweep_order_does_not_matter() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ma = sweep(&config("experiment = fiducial\nsweep_key = alpha\nsweep_values = 1,8", a.path()), 1).unwrap();
    let mb = sweep(&config("experiment = fiducial\nsweep_key = alpha\nsweep_values = 8,1", b.path()), 2).unwrap();
    assert_eq!(ma.files, mb.files);
    assert_eq!(ma.checks, mb.checks);
    for f in ["sweep.csv", "sweep.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
    }
}

#[test]
fn failing_points_do_not_lose_the_others() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("experiment = disk\nsweep_key = disk_r0\nsweep_values = 1,-1", dir.path());
    match sweep(&cfg, 2) {
        Err(CliError::PartialFailure { failed }) => {
            assert_eq!(failed.len(), 1);
            assert!(failed[0].starts_with("disk_r0--1"), "{failed:?}");
        }
        other => panic!("expected a partial failure, got {other:?}"),
    }
    assert!(dir.path().join("disk_r0-1/disk.json").exists());
    let m = json(&dir.path().join("manifest.json"));
    assert_eq!(m["failed_points"].as_array().unwrap().len(), 1);
    let summary = json(&dir.path().join("sweep.json"));
    let points = summary["points"].as_array().unwrap();
    assert!(points[0]["error"].is_string());
    assert!(points[1]["error"].is_null());
}

fn walk(root: &Path, dir: &Path, out: &mut BTreeSet<String>) {
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            walk(root, &p, out);
        } else {
            out.insert(p.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/"));
        }
    }
}

#[test]
fn manifest_lists_every_file() {
    let dir = tempfile::tempdir().unwrap();
    let m = run(&config("experiment = modes\nmode_ks = 0,1\nbvp_ks = 0", dir.path())).unwrap();
    let mut on_disk = BTreeSet::new();
    walk(dir.path(), dir.path(), &mut on_disk);
    assert!(on_disk.remove("manifest.json"));
    let listed: BTreeSet<String> = m.files.iter().map(|f| f.path.clone()).collect();
    assert_eq!(listed, on_disk);
    for f in &m.files {
        let bytes = fs::read(dir.path().join(&f.path)).unwrap();
        assert_eq!(sha256_hex(&bytes), f.sha256);
        assert_eq!(bytes.len(), f.bytes);
        assert!(!bytes.contains(&b'\r'), "{}", f.path);
    }
    let manifest = json(&dir.path().join("manifest.json"));
    assert_eq!(manifest["artifact"], "vwlab");
    assert_eq!(manifest["command"], "run");
    let keys: Vec<&str> = manifest["config"].as_array().unwrap().iter().map(|p| p[0].as_str().unwrap()).collect();
    assert_eq!(keys.len(), vw_cli::config::schema().len());
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_vwlab");
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");

    fs::write(&cfg, "experiment = disk\ndisk_r_list = 4,6\n").unwrap();
    let out = dir.path().join("out");
    let st = Command::new(bin).args(["run", "--config"]).arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert_eq!(st.status.code(), Some(0), "{}", String::from_utf8_lossy(&st.stderr));
    assert!(String::from_utf8_lossy(&st.stdout).contains("PASS"));
    assert!(out.join("manifest.json").exists());

    fs::write(&cfg, "colour = blue\n").unwrap();
    let st = Command::new(bin).args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(st.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&st.stderr).contains("line 1"));

    // alpha = r^2 alpha1 = 1 leaves sup_y far above the r = 10 threshold.
    fs::write(&cfg, "experiment = disk\ndisk_r_list = 10\ndisk_alpha1 = 0.01\n").unwrap();
    let st = Command::new(bin).args(["run", "--config"]).arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert_eq!(st.status.code(), Some(1), "{}", String::from_utf8_lossy(&st.stderr));

    fs::write(&cfg, "experiment = disk\nsweep_key = disk_r0\nsweep_values = 1,-1\n").unwrap();
    let st =
        Command::new(bin).args(["sweep", "--jobs", "2", "--config"]).arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert_eq!(st.status.code(), Some(3));

    let st = Command::new(bin).arg("keys").output().unwrap();
    assert_eq!(st.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&st.stdout).contains("sweep_values"));
}
