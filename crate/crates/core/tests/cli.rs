use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;
use whitney::cubes::CubeRecord;
use whitney::fields::WhitneyField;

fn whitney(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_whitney"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).display().to_string()
}

struct Fixture {
    dir: TempDir,
    field: String,
    points: String,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("set.csv"), "# E\n0.1,0.2\n0.7,0.4\n0.3,0.9\n").unwrap();
    std::fs::write(
        dir.path().join("points.csv"),
        "0.25,0.75\n1.5,-0.5\n0.7,0.4\n0.45,0.3\n",
    )
    .unwrap();
    let field = path(dir.path(), "field.json");
    let out = whitney(&[
        "restrict",
        "--function",
        "gaussian",
        "--m",
        "1",
        "--set",
        &path(dir.path(), "set.csv"),
        "--out",
        &field,
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let points = path(dir.path(), "points.csv");
    Fixture { dir, field, points }
}

fn read(p: &str) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn restrict_writes_a_loadable_field() {
    let fx = fixture();
    let f = WhitneyField::load(&PathBuf::from(&fx.field)).unwrap();
    assert_eq!((f.dim(), f.order(), f.len()), (2, 1, 3));
}

#[test]
fn classical_with_one_sample_matches_degenerate_average() {
    let fx = fixture();
    let a = path(fx.dir.path(), "a.csv");
    let b = path(fx.dir.path(), "b.csv");
    let common = ["--field", &fx.field, "--points", &fx.points, "--t", "0.125"];
    let mut classical = vec!["extend", "--mode", "classical", "--samples", "1", "--origin", "0"];
    classical.extend(common);
    classical.extend(["--out", &a]);
    let mut averaged = vec!["extend", "--mode", "averaged", "--samples", "1"];
    averaged.extend(common);
    averaged.extend(["--out", &b]);
    assert!(whitney(&classical).status.success());
    assert!(whitney(&averaged).status.success());
    assert_eq!(read(&a), read(&b));
}

#[test]
fn averaged_output_has_error_columns_and_jet_rows() {
    let fx = fixture();
    let out = path(fx.dir.path(), "v.csv");
    let res = whitney(&[
        "extend", "--field", &fx.field, "--points", &fx.points, "--m", "1", "--mode", "averaged",
        "--samples", "256", "--seed", "42", "--out", &out,
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = read(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "x1,x2,alpha,value,N,seed,std_error");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    // 4 points × 3 derivatives
    assert_eq!(rows.len(), 12);
    assert!(rows.iter().all(|r| r[4] == "256" && r[5] == "42"));
    // the point of E reports its jet exactly
    let at_e: Vec<_> = rows.iter().filter(|r| r[0] == "0.7" && r[1] == "0.4").collect();
    assert_eq!(at_e.len(), 3);
    assert!(at_e.iter().all(|r| r[6] == "0"));
    assert!(rows.iter().any(|r| r[6].parse::<f64>().unwrap() > 0.0));
}

#[test]
fn worker_count_does_not_change_output() {
    let fx = fixture();
    let outs: Vec<String> = ["1", "4"]
        .iter()
        .map(|jobs| {
            let out = path(fx.dir.path(), &format!("j{jobs}.csv"));
            let res = whitney(&[
                "--jobs", jobs, "extend", "--field", &fx.field, "--points", &fx.points, "--mode",
                "averaged", "--samples", "128", "--seed", "9", "--out", &out,
            ]);
            assert!(res.status.success());
            read(&out)
        })
        .collect();
    assert_eq!(outs[0], outs[1]);
}

#[test]
fn decompose_contains_unit_cube_next_to_origin() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("e.csv"), "0,0\n").unwrap();
    let out = path(dir.path(), "cubes.json");
    let res = whitney(&[
        "decompose",
        "--set",
        &path(dir.path(), "e.csv"),
        "--box",
        "0,0,4,4",
        "--min-level",
        "-3",
        "--out",
        &out,
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let cubes: Vec<CubeRecord> = serde_json::from_str(&read(&out)).unwrap();
    let unit = cubes
        .iter()
        .find(|c| c.level == 0 && c.anchor == [1, 1])
        .expect("[1,2]^2 is a Whitney cube");
    assert!((unit.dist_to_e - 2f64.sqrt()).abs() < 1e-15);
}

#[test]
fn validation_errors_exit_one_with_prefix() {
    let fx = fixture();
    let cases: [(&[&str], &str); 4] = [
        (
            &["extend", "--field", &fx.field, "--points", &fx.points, "--t", "0.3"],
            "E:config:t:",
        ),
        (
            &["extend", "--field", &fx.field, "--points", &fx.points, "--n", "3"],
            "E:jets:dimension:",
        ),
        (&["verify", "--suite", "nope"], "E:harness:suite:"),
        (&["extend", "--field", "/nonexistent.json", "--points", &fx.points], "E:io:io:"),
    ];
    for (args, prefix) in cases {
        let out = whitney(args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.starts_with(prefix), "{args:?}: {err}");
    }
    let out = whitney(&["extend", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("E:cli:args:"));
}

#[test]
fn full_verification_passes() {
    let out = whitney(&["verify", "--suite", "all", "--n", "2", "--m", "1", "--seed", "7"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert!(text.lines().last().unwrap().ends_with("0 failed"));
}
