use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn eidsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eidsim"))
        .args(args)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn validate_config_succeeds_on_defaults() {
    let o = eidsim(&["validate-config"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["config_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(v["systems"], serde_json::json!(["J=0", "J=1"]));
}

#[test]
fn parse_error_exits_2_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.toml",
        "[run]\nseed = 4\n\n[probe]\npower_W = \"lots\"\n",
    );
    let o = eidsim(&["validate-config", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 5"), "{}", stderr(&o));
}

#[test]
fn unknown_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", "[probe]\npower = 0.8\n");
    let o = eidsim(&["validate-config", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("power"), "{}", stderr(&o));
}

#[test]
fn cross_field_error_names_file_line_and_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.toml",
        "[run]\nseed = 1\n\n[geometry]\ndelay_sigmas = -1.0\n",
    );
    let o = eidsim(&[
        "beamline",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("bad.toml:5: [geometry] delay_sigmas"), "{e}");
    // nothing was computed
    assert!(!dir.path().join("trajectories.csv").exists());
}

#[test]
fn stirap_on_extended_model_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = eidsim(&[
        "stirap",
        "--model",
        "7",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn unresolvable_surface_grid_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    // near-resonant probe: branches come close and a 5×5 grid cannot follow them
    let cfg = write_config(
        dir.path(),
        "coarse.toml",
        "[levels]\ndelta_p_cm = 0.01\n\n[beamline]\ngrid_nx = 5\ngrid_nt = 5\n",
    );
    let o = eidsim(&[
        "eigen",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("refine"), "{}", stderr(&o));
}

#[test]
fn outputs_carry_config_hash() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("eig");
    let o = eidsim(&["eigen", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let hash = {
        let v: Value = serde_json::from_slice(&eidsim(&["validate-config"]).stdout).unwrap();
        v["config_sha256"].as_str().unwrap().to_string()
    };
    let csv = std::fs::read_to_string(out.join("surfaces.csv")).unwrap();
    assert!(csv.starts_with(&format!("# config_sha256: {hash}")));
    let json: Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("eigen_report.json")).unwrap())
            .unwrap();
    assert_eq!(json["config_sha256"], hash);
    assert_eq!(json["config"]["run"]["seed"], 1);
    let svg = std::fs::read_to_string(out.join("surfaces.svg")).unwrap();
    assert!(svg.contains(&hash) && svg.contains("<generated"));
}

#[test]
fn timestamp_toggle_only_touches_svg() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    eidsim(&["stirap", "--out", a.to_str().unwrap()]);
    eidsim(&["stirap", "--no-timestamp", "--out", b.to_str().unwrap()]);
    let read = |d: &Path, f: &str| std::fs::read_to_string(d.join(f)).unwrap();
    assert_eq!(read(&a, "stirap.csv"), read(&b, "stirap.csv"));
    assert_eq!(
        read(&a, "stirap_report.json"),
        read(&b, "stirap_report.json")
    );
    assert!(!read(&b, "stirap.svg").contains("<generated"));
    let strip = |s: String| {
        s.lines()
            .filter(|l| !l.contains("<generated"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(strip(read(&a, "stirap.svg")), strip(read(&b, "stirap.svg")));
}

#[test]
fn seed_changes_the_ensemble() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", "[beamline]\nmolecules = 300\n");
    let run = |seed: &str| {
        let out = dir.path().join(format!("s{seed}"));
        let o = eidsim(&[
            "beamline",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            seed,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        std::fs::read_to_string(out.join("trajectories.csv")).unwrap()
    };
    let (a, b, c) = (run("1"), run("2"), run("1"));
    assert_eq!(a, c);
    assert_ne!(a, b);
}

#[test]
fn sweep_rows_and_single_point_match_beamline() {
    let dir = tempfile::tempdir().unwrap();
    let grid = write_config(
        dir.path(),
        "grid.toml",
        "[beamline]\nmolecules = 400\n\n[sweep]\npower_W = [0.4, 0.8]\ntemperature_K = [2.0, 5.0, 10.0]\n",
    );
    let out = dir.path().join("grid");
    let o = eidsim(&[
        "sweep",
        "--config",
        grid.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows: Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("sweep_report.json")).unwrap())
            .unwrap();
    let rows = rows["result"].as_array().unwrap();
    assert_eq!(rows.len(), 6);
    assert_eq!(
        (
            rows[0]["power_w"].as_f64(),
            rows[0]["temperature_k"].as_f64()
        ),
        (Some(0.4), Some(2.0))
    );
    assert_eq!(
        (
            rows[5]["power_w"].as_f64(),
            rows[5]["temperature_k"].as_f64()
        ),
        (Some(0.8), Some(10.0))
    );
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 7);

    let single = write_config(dir.path(), "single.toml", "[beamline]\nmolecules = 400\n");
    let (s_out, b_out) = (dir.path().join("single"), dir.path().join("beam"));
    let s = eidsim(&[
        "sweep",
        "--config",
        single.to_str().unwrap(),
        "--out",
        s_out.to_str().unwrap(),
    ]);
    let b = eidsim(&[
        "beamline",
        "--config",
        single.to_str().unwrap(),
        "--out",
        b_out.to_str().unwrap(),
    ]);
    assert!(s.status.success() && b.status.success());
    let s: Value = serde_json::from_slice(&s.stdout).unwrap();
    let b: Value = serde_json::from_slice(&b.stdout).unwrap();
    let row = &s["summary"][0];
    let rep = &b["summary"]["report"];
    assert_eq!(row["purity"], rep["purity"]);
    assert_eq!(row["yield_fraction"], rep["yield_fraction"]);
    assert_eq!(row["transmitted_weight"], rep["transmitted_weight"]);
}

#[test]
fn shipped_configs_validate() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(&root).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "toml") {
            let o = eidsim(&["validate-config", "--config", p.to_str().unwrap()]);
            assert_eq!(o.status.code(), Some(0), "{}: {}", p.display(), stderr(&o));
            n += 1;
        }
    }
    assert!(n > 0);
}
