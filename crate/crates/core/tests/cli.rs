// Copyright 2026 The ptmpo Authors
// SPDX-License-Identifier: Apache-2.0

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ptmpo"));
    c.env("RUST_LOG", "warn");
    c
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    let text = format!("{body}\n[output]\ndir = \"{}\"\n", dir.join("out").display());
    std::fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str], config: &Path) -> i32 {
    let out = bin().args(args).arg("--config").arg(config).output().unwrap();
    if !out.status.success() {
        eprintln!("{}", String::from_utf8_lossy(&out.stderr));
    }
    out.status.code().unwrap()
}

fn csv_column(path: &Path, name: &str) -> Vec<f64> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let idx = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|rec| rec.unwrap()[idx].parse().unwrap()).collect()
}

const INDEPENDENT_BOSON: &str = r#"
[model]
dim = 2
drift = { x = 0.0 }
coupling = { z = 0.5 }
initial = { bloch = [-1.0, 0.0, 0.0] }
[bath]
spectral = { kind = "ohmic", alpha = 0.1 }
[method]
kind = "heom"
terms = 4
depth = 6
[grid]
dt = 0.05
steps = 60
"#;

#[test]
fn build_and_run_independent_boson() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "ib.toml", INDEPENDENT_BOSON);
    assert_eq!(run(&["build-pt"], &cfg), 0);
    let out = dir.path().join("out");
    assert!(out.join("pt.bin").exists());
    let chis = csv_column(&out.join("bond_profile.csv"), "chi");
    assert_eq!(chis.len(), 61);
    assert_eq!(run(&["dynamics"], &cfg), 0);
    let t = csv_column(&out.join("observables.csv"), "t");
    let x = csv_column(&out.join("observables.csv"), "re_x");
    let defect = csv_column(&out.join("observables.csv"), "trace_defect");
    for ((t, x), d) in t.iter().zip(&x).zip(&defect) {
        assert!((x + (1.0 + t * t).powf(-0.1)).abs() <= 2e-3, "t = {t}");
        assert!(*d <= 1e-8);
    }
}

#[test]
fn identical_config_and_seed_give_identical_files() {
    let body = r#"
seed = 11
[model]
dim = 2
drift = { x = 0.5 }
coupling = { z = 0.5 }
initial = { basis = 0 }
[bath]
spectral = { kind = "lorentzian", coupling = 0.3, center = 1.0, width = 1.0 }
[method]
kind = "stochastic"
n_traj = 50
batches = 5
[grid]
dt = 0.1
steps = 15
"#;
    let read = |dir: &Path| -> Vec<Vec<u8>> {
        let cfg = write_config(dir, "s.toml", body);
        assert_eq!(run(&["build-pt"], &cfg), 0);
        assert_eq!(run(&["dynamics"], &cfg), 0);
        ["pt.bin", "bond_profile.csv", "observables.csv"]
            .iter()
            .map(|f| std::fs::read(dir.join("out").join(f)).unwrap())
            .collect()
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert_eq!(read(a.path()), read(b.path()));

    let c = tempfile::tempdir().unwrap();
    let cfg = write_config(c.path(), "s.toml", body);
    let code = bin().args(["build-pt", "--seed", "12", "--config"]).arg(&cfg).status().unwrap().code();
    assert_eq!(code, Some(0));
    let other = std::fs::read(c.path().join("out/pt.bin")).unwrap();
    assert_ne!(other, read(a.path())[0]);
}

#[test]
fn closed_system_pi_pulse() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"
[model]
dim = 2
drift = { x = 0.0 }
coupling = { z = 0.0 }
initial = { basis = 0 }
target = { basis = 1 }
[bath]
spectral = { kind = "lorentzian", coupling = 0.5, center = 1.0, width = 1.0 }
[method]
kind = "augmented"
d = 1
[grid]
dt = 0.1
steps = 20
[optimize]
max_iters = 200
channels = [{ label = "ux", operator = { x = 0.5 }, initial = 0.5 }]
"#;
    let cfg = write_config(dir.path(), "pi.toml", body);
    assert_eq!(run(&["build-pt"], &cfg), 0);
    assert_eq!(run(&["optimize"], &cfg), 0);
    let out = dir.path().join("out");
    let cost = csv_column(&out.join("history.csv"), "cost");
    assert!(cost.iter().cloned().fold(f64::INFINITY, f64::min) < 1e-6);
    assert!(cost.len() <= 200);
    assert_eq!(csv_column(&out.join("schedule.csv"), "ux").len(), 20);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write_config(dir.path(), "bad.toml", &INDEPENDENT_BOSON.replace("depth = 6", "depth = 6\nlevels = 2"));
    assert_eq!(run(&["build-pt"], &unknown), 2);
    assert!(!dir.path().join("out").exists());
    let invalid = write_config(dir.path(), "neg.toml", &INDEPENDENT_BOSON.replace("dt = 0.05", "dt = -0.05"));
    assert_eq!(run(&["build-pt"], &invalid), 2);
    assert_eq!(bin().arg("build-pt").status().unwrap().code(), Some(2));
    assert_eq!(bin().arg("--help").status().unwrap().code(), Some(0));

    let good = write_config(dir.path(), "ib.toml", INDEPENDENT_BOSON);
    assert_eq!(run(&["dynamics"], &good), 4);

    let overflow = write_config(
        dir.path(),
        "fock.toml",
        r#"
[model]
dim = 2
drift = { x = 0.5 }
coupling = { z = 0.5 }
initial = { basis = 0 }
[bath]
spectral = { kind = "lorentzian", coupling = 2.0, center = 1.0, width = 0.5 }
[method]
kind = "augmented"
d = 2
[grid]
dt = 0.1
steps = 20
"#,
    );
    assert_eq!(run(&["build-pt"], &overflow), 3);
}

#[test]
fn compare_writes_json_report() {
    let dir = tempfile::tempdir().unwrap();
    let model = r#"
[model]
dim = 2
drift = { x = 0.5 }
coupling = { z = 0.5 }
initial = { basis = 0 }
target = { basis = 1 }
[bath]
spectral = { kind = "lorentzian", coupling = 0.5, center = 1.0, width = 1.0 }
[grid]
dt = 0.05
steps = 40
"#;
    let heom = write_config(dir.path(), "heom.toml", &format!("{model}\n[method]\nkind = \"heom\"\nterms = 2\ndepth = 10\n"));
    let aug = write_config(dir.path(), "aug.toml", &format!("{model}\n[method]\nkind = \"augmented\"\nd = 8\n"));
    let out = bin()
        .arg("compare")
        .arg("--config")
        .arg(&heom)
        .arg("--config")
        .arg(&aug)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("out/compare.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["reference"], "heom");
    assert_eq!(v["methods"][0]["final_state_deviation"], 0.0);
    let dev = v["methods"][1]["final_state_deviation"].as_f64().unwrap();
    assert!(dev <= 1e-3, "deviation {dev:.3e}");
    assert_eq!(v["methods"][1]["max_bond_built"], 64);
    assert!(v["methods"][1]["gradient_seconds"].as_f64().is_some());

    let shifted = write_config(dir.path(), "shift.toml", &format!("{}\n[method]\nkind = \"augmented\"\nd = 8\n", model.replace("steps = 40", "steps = 41")));
    let code = bin().arg("compare").arg("--config").arg(&heom).arg("--config").arg(&shifted).status().unwrap().code();
    assert_eq!(code, Some(2));
}

#[test]
fn bench_writes_timings_and_slopes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bench.toml",
        "[bench]\nchis = [4, 8, 16]\nsteps = 6\nrepeats = 1\nttm_cutoffs = [4, 8]\nttm_steps = 64\nlarge_chi = 8\n",
    );
    let out = bin().arg("bench").arg("--config").arg(&cfg).output().unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    for phase in ["forward", "backward", "gradient", "recompress", "ttm"] {
        assert!(stdout.contains(&format!("{phase}: slope")), "{stdout}");
    }
    assert_eq!(csv_column(&dir.path().join("out/bench.csv"), "median_seconds").len(), 14);
}
