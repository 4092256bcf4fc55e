use std::path::Path;
use std::process::Command;

const SCENARIO: &str = r#"
name = "cli"
seed = 5

[domain]
kind = "flat_torus"
l1 = 1.0
l2 = 1.0
resolution = 20

[target]
kind = "euclidean"
dim = 1

[map]
mode = "prescribed"
data = { kind = "affine", offset = [0.0], matrix = [[1.0, 0.0]] }

[analysis]
sigmas = [0.15, 0.2]
basepoints = { kind = "points", points = [[0.5, 0.5]] }
tolerance = 1e-6
rel_tolerance = 0.1
checks = ["order", "cauchy_schwarz"]
"#;

fn lab() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_lab"));
    c.env_remove("LAB_THREADS");
    c
}

fn write_scenario(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("scenario.toml");
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn run_writes_reports_and_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = write_scenario(tmp.path(), SCENARIO);
    let out = tmp.path().join("out");
    let status = lab().arg("run").arg(&scenario).arg("--out").arg(&out).output().unwrap();
    assert_eq!(status.status.code(), Some(0), "{}", String::from_utf8_lossy(&status.stderr));
    for f in ["margins.csv", "series.csv", "convergence.csv", "mesh.json", "map.json", "summary.json", "summary.txt"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
}

#[test]
fn invalid_scenario_exits_four_and_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = write_scenario(tmp.path(), &SCENARIO.replace("sigmas = [0.15, 0.2]", "sigmas = [0.05]"));
    let out = tmp.path().join("out");
    let o = lab().arg("run").arg(&scenario).arg("--out").arg(&out).output().unwrap();
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("analysis.sigmas"));
    assert!(!out.exists());

    let o = lab().arg("validate").arg(&scenario).output().unwrap();
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn validate_accepts_bundled_scenarios() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let o = lab().arg("validate").arg(&path).output().unwrap();
        assert_eq!(o.status.code(), Some(0), "{}: {}", path.display(), String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn checks_flag_overrides_the_scenario() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = write_scenario(tmp.path(), SCENARIO);
    let out = tmp.path().join("out");
    let o = lab()
        .args(["run", "--checks", "cauchy_schwarz"])
        .arg(&scenario)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let margins = std::fs::read_to_string(out.join("margins.csv")).unwrap();
    let rows: Vec<&str> = margins.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.contains("cauchy_schwarz")));

    let o = lab().args(["run", "--checks", "nonsense"]).arg(&scenario).output().unwrap();
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn thread_count_does_not_change_output() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = write_scenario(tmp.path(), SCENARIO);
    let (one, many) = (tmp.path().join("one"), tmp.path().join("many"));
    let a = lab().env("LAB_THREADS", "1").arg("run").arg(&scenario).arg("--out").arg(&one).output().unwrap();
    let b = lab().arg("run").arg(&scenario).args(["--threads", "4", "--out"]).arg(&many).output().unwrap();
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(b.status.code(), Some(0));
    for f in ["margins.csv", "series.csv", "summary.json"] {
        assert_eq!(std::fs::read(one.join(f)).unwrap(), std::fs::read(many.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn quadrature_selftest_writes_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lab()
        .args(["quadrature-selftest", "--cases", "5", "--out"])
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("quadrature.csv")).unwrap();
    // five forms, two dimensions, three radii, three integral kinds
    assert_eq!(csv.lines().count(), 1 + 5 * 2 * 3 * 3);
}
