use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use raywave_core::{Component, FieldGrid};

const FIG3: &str = r#"[scales]
lambda = 1.0
mu = 0.1

[spatial]
b1 = 1.0
b2 = 2.0

[temporal]
kind = "polynomial"
coeffs = [0.0, 1.0]

[grid]
n = 41
half_extent = 4.0

[output]
times = [0.5, 1.5]

[numerics]
rays = 64
psi_nodes = 64
"#;

const COMPARE: &str = r#"[scales]
lambda = 10.0
mu = 0.1

[spatial]
b1 = 1.0
b2 = 2.0

[temporal]
kind = "sine"
alpha = 1.0

[output]
times = [0.5, 1.0]

[numerics]
rays = 128

[oracle]
h = 0.02
"#;

fn run(mode: &str, cfg: &str, dir: &Path) -> (Output, PathBuf) {
    let path = dir.join("run.toml");
    fs::write(&path, cfg).unwrap();
    let out = dir.join("out");
    let o = Command::new(env!("CARGO_BIN_EXE_raywave"))
        .args([mode, "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", "1"])
        .output()
        .unwrap();
    (o, out)
}

#[test]
fn missing_field_exits_2_with_line() {
    let d = tempfile::tempdir().unwrap();
    let (o, _) = run("asymptotic", &FIG3.replace("b2 = 2.0\n", ""), d.path());
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("b2") && err.contains("run.toml:"), "{err}");
}

#[test]
fn numerical_failure_is_attributed() {
    let d = tempfile::tempdir().unwrap();
    let (o, _) = run("oracle", &COMPARE.replace("h = 0.02", "h = 0.02\ndt = 0.05"), d.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("[reference_oracle]"));
}

#[test]
fn asymptotic_outputs_and_echo() {
    let d = tempfile::tempdir().unwrap();
    let (o, out) = run("asymptotic", FIG3, d.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let g = FieldGrid::load(&out.join("total_001.rwv")).unwrap();
    assert_eq!((g.spec.nx, g.t, g.component), (41, 1.5, Component::Total));
    let tr = FieldGrid::load(&out.join("transient_001.rwv")).unwrap();
    let pr = FieldGrid::load(&out.join("propagating_001.rwv")).unwrap();
    for i in 0..g.spec.len() {
        if let (Some(a), Some(b), Some(c)) = (tr.get(i), pr.get(i), g.get(i)) {
            assert_eq!(a + b, c);
        }
    }
    let echo = fs::read_to_string(out.join("resolved_config.toml")).unwrap();
    for key in ["c0 = 1.0", "nu = 1.0", "omega_max = 10.0", "band = 24.0", "focal_threshold"] {
        assert!(echo.contains(key), "{key} missing from\n{echo}");
    }
    assert!(fs::read_to_string(out.join("run.log")).unwrap().starts_with("started "));
}

#[test]
fn identical_config_gives_identical_files() {
    let cfg = FIG3.replace("[output]\n", "[output]\ntext = true\n");
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for mode in ["asymptotic", "profile", "rays"] {
        let (oa, da) = run(mode, &cfg, a.path());
        let (ob, db) = run(mode, &cfg, b.path());
        assert!(oa.status.success() && ob.status.success());
        let mut names: Vec<_> = fs::read_dir(&da).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        for n in names.iter().filter(|n| *n != "run.log") {
            assert_eq!(fs::read(da.join(n)).unwrap(), fs::read(db.join(n)).unwrap(), "{mode}: {n:?}");
        }
    }
}

#[test]
fn profile_and_rays_tables() {
    let d = tempfile::tempdir().unwrap();
    let (o, out) = run("profile", FIG3, d.path());
    assert!(o.status.success());
    let p = fs::read_to_string(out.join("profile.tsv")).unwrap();
    assert_eq!(p.lines().count(), 1 + 4 * 401);
    let lens = FIG3.replace("[grid]", "[velocity]\nkind = \"gaussian\"\nbackground = 1.0\nbumps = [{ amplitude = -0.4, center = [1.2, 0.0], width = 0.4 }]\n\n[grid]").replace("times = [0.5, 1.5]", "times = [1.0, 3.0]");
    let (o, out) = run("rays", &lens, d.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = fs::read_to_string(out.join("rays.tsv")).unwrap();
    assert_eq!(r.lines().count(), 1 + 64 * 2);
    // the axial ray through the lens has passed a caustic by t = 3
    let axial: Vec<&str> = r.lines().nth(2).unwrap().split('\t').collect();
    assert_eq!((axial[0], axial[1], axial[9]), ("0", "3", "1"));
    let c = fs::read_to_string(out.join("caustics.tsv")).unwrap();
    assert!(c.lines().nth(1).unwrap().split('\t').nth(1).unwrap().len() > 0);
}

#[test]
fn compare_report_headline() {
    let d = tempfile::tempdir().unwrap();
    let (o, out) = run("compare", COMPARE, d.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let txt = fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(txt.contains("Lambda is read as lambda") && txt.contains("headline: banded relative L2 error"));
    let kv = fs::read_to_string(out.join("report.kv")).unwrap();
    let err: f64 = kv.lines().find_map(|l| l.strip_prefix("headline.banded_rel_l2=")).unwrap().parse().unwrap();
    // O(mu) remainder: about 16% at mu = 0.1, t = 1 (5.4% at mu = 0.05, t = 2)
    assert!(err < 0.2, "banded error {err}");
    assert!(out.join("oracle_001.rwv").exists() && out.join("total_001.rwv").exists());
}
