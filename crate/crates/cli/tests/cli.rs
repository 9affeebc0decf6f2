use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(cmd: &str, out: &Path, overrides: &[&str]) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_diracloc"));
    c.arg(cmd).arg("--out").arg(out).arg("--jobs").arg("2");
    for o in overrides {
        c.arg("--override").arg(o);
    }
    c.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn verify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("verify", dir.path(), &["profile.params=[1, 0.5]"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("verify.json")).unwrap()).unwrap();
    assert_eq!(doc["report"]["regime"], "localized");
    assert_eq!(
        doc.as_object().unwrap().keys().next().unwrap(),
        "config_hash"
    );

    let o = run("verify", dir.path(), &["profile.params=[1, 2]"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stdout).contains("regime=delocalized"));
    let o = run(
        "verify",
        dir.path(),
        &["profile.params=[1, 2]", "expect_regime=delocalized"],
    );
    assert_eq!(code(&o), 0);

    let o = run("verify", dir.path(), &["profile.params=[0, 0.5]"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stdout).contains("con0=false"));
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        "spectrum",
        dir.path(),
        &["channels.j_min=5", "channels.j_max=1"],
    );
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("empty"));
    let o = run("spectrum", dir.path(), &["grid.n=\"many\""]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("grid"));
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, "{\"kappa\": }").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_diracloc"))
        .args(["verify", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));
}

#[test]
fn landau_spectrum_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        "spectrum",
        dir.path(),
        &[
            "profile={\"family\":\"constant_b\",\"params\":[1]}",
            "channels.j_min=0",
            "channels.j_max=2",
            "grid={\"r_max\":20,\"n\":1000}",
            "window=[-0.5,1.6]",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("eigenvalues.csv")).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip_while(|l| l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    // Levels 0 and √2 in each of j = 0, 1, 2.
    assert_eq!(rows.len(), 6);
    for r in &rows {
        let e = r[3];
        assert!(e.abs() < 1e-9 || (e - 2f64.sqrt()).abs() < 1e-2, "{r:?}");
    }
}

#[test]
fn outputs_are_deterministic_and_cross_referenced() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = [
        "channels.j_min=-3",
        "channels.j_max=3",
        "grid={\"r_max\":30,\"n\":1000}",
        "wavepacket.j_max=3",
        "times.t_max=20",
        "times.per_decade=16",
    ];
    for dir in [a.path(), b.path()] {
        for cmd in ["verify", "spectrum", "agmon", "localize"] {
            let o = run(cmd, dir, &args);
            assert_eq!(code(&o), 0, "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        }
    }
    for name in [
        "eigenvalues.csv",
        "bargmann.csv",
        "agmon.csv",
        "moments.csv",
        "summary.json",
    ] {
        let x = fs::read(a.path().join(name)).unwrap();
        let y = fs::read(b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name} differs between runs");
    }
    let o = run("selftest", a.path(), &args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stdout).contains("manifest"));

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["commands"].as_array().unwrap().len(), 4);

    fs::write(a.path().join("moments.csv"), "t,M\n").unwrap();
    let o = run("selftest", a.path(), &args);
    assert_eq!(code(&o), 1);
}
