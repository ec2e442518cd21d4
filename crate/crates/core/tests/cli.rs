use std::path::Path;
use std::process::{Command, Output};

fn quadlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quadlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_of(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}, stderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn expect_failure(out: &Output) -> String {
    assert!(!out.status.success(), "command unexpectedly succeeded");
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn classify_presets_and_rejects_garbage() {
    let out = stdout_of(&quadlab(&["classify", "--poly", "x+yz"]));
    assert!(out.contains("class: non-degenerate"));
    assert!(out.contains("critical set: empty"));

    let out = stdout_of(&quadlab(&["classify", "--poly", "sum-of-squares"]));
    assert!(out.contains("class: degenerate"));

    let json = r#"{"a":0,"b":0,"c":-2,"d":1,"e":1,"g":1,"h":0,"i":0,"j":0}"#;
    let out = stdout_of(&quadlab(&["classify", "--poly", json]));
    assert!(out.contains("critical set: line"));

    let err = expect_failure(&quadlab(&["classify", "--poly", "not-a-poly"]));
    assert!(err.contains("error:"));
}

#[test]
fn measure_build_check_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cantor.csv");
    let out = stdout_of(&quadlab(&[
        "measure",
        "build",
        "--alpha",
        "0.5",
        "--depth",
        "4",
        "--out",
        path.to_str().unwrap(),
    ]));
    assert!(out.contains("wrote 16 atoms"));

    let out = stdout_of(&quadlab(&["measure", "check", "--file", path.to_str().unwrap()]));
    assert!(out.contains("atoms: 16"));
    assert!(out.contains("total mass: 1.0000"));
    assert!(out.contains("frostman constant at alpha 0.5"));
}

#[test]
fn scan_emits_deterministic_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let run = |csv: &Path, svg: &Path| -> String {
        stdout_of(&quadlab(&[
            "energy",
            "scan",
            "--poly",
            "x+yz",
            "--measure",
            "cantor",
            "--alpha",
            "0.5",
            "--delta-max",
            "2^-4",
            "--delta-min",
            "2^-8",
            "--csv",
            csv.to_str().unwrap(),
            "--svg",
            svg.to_str().unwrap(),
        ]))
    };
    let (csv1, svg1) = (dir.path().join("a.csv"), dir.path().join("a.svg"));
    let (csv2, svg2) = (dir.path().join("b.csv"), dir.path().join("b.svg"));
    let out = run(&csv1, &svg1);
    assert!(out.contains("slope:"));
    assert!(out.contains("verdict: pass"));
    run(&csv2, &svg2);

    let text1 = std::fs::read(&csv1).unwrap();
    assert_eq!(text1, std::fs::read(&csv2).unwrap(), "scan CSV must be byte-identical");
    assert_eq!(std::fs::read(&svg1).unwrap(), std::fs::read(&svg2).unwrap());

    let text = String::from_utf8(text1).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "delta,energy,I0,I1,I2,I3,I4,I5,I6,slice_sup,runtime_ms"
    );
    // Ladder 2^-4..2^-8 at alpha 1/2 realizes depths 2, 3, 4.
    assert_eq!(lines.count(), 3);
    let svg = std::fs::read_to_string(&svg1).unwrap();
    assert_eq!(svg.matches("<circle").count(), 3);
    assert_eq!(svg.matches("<line").count(), 1);

    let out = stdout_of(&quadlab(&["fit", "--file", csv1.to_str().unwrap()]));
    assert!(out.contains("points: 3"));
    assert!(out.contains("slope: -0."));

    let err = expect_failure(&quadlab(&[
        "fit",
        "--file",
        csv1.to_str().unwrap(),
        "--column",
        "no-such-column",
    ]));
    assert!(err.contains("no column"));
}

#[test]
fn scan_honors_config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scan.json");
    std::fs::write(
        &cfg,
        r#"{"poly":"x+yz","measure":{"kind":"cantor","alpha":0.5},"delta_max":"2^-4","delta_min":"2^-6","kappa":0.25}"#,
    )
    .unwrap();
    let out = stdout_of(&quadlab(&["energy", "scan", "--config", cfg.to_str().unwrap()]));
    assert!(out.contains("verdict:"));

    // The flag overrides the config's polynomial; a degenerate one is refused.
    let err = expect_failure(&quadlab(&[
        "energy",
        "scan",
        "--config",
        cfg.to_str().unwrap(),
        "--poly",
        "sum-of-squares",
    ]));
    assert!(err.contains("error:"));
}

#[test]
fn construct_and_verify_constructions() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mixture.csv");
    let out = quadlab(&[
        "construct",
        "--kind",
        "frostman-necessity",
        "--alpha",
        "0.25",
        "--delta",
        "2^-12",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(stdout_of(&out).contains("wrote 9 atoms"));
    assert!(String::from_utf8_lossy(&out.stderr).contains("window admissibility"));

    let checked = stdout_of(&quadlab(&[
        "measure",
        "check",
        "--file",
        path.to_str().unwrap(),
    ]));
    assert!(checked.contains("atoms: 9"));

    let err = expect_failure(&quadlab(&[
        "construct",
        "--kind",
        "unbounded-support",
        "--delta",
        "2^-7",
    ]));
    assert!(err.contains("odd exponent"));

    let out = stdout_of(&quadlab(&[
        "verify",
        "--kind",
        "divergent-energy",
        "--alpha",
        "0.25",
        "--ladder",
        "2^-8..2^-16",
    ]));
    assert!(out.contains("slope:"));
    assert!(out.contains("verdict: pass"));
}

#[test]
fn incidence_count_and_bench() {
    let dir = tempfile::tempdir().unwrap();
    let points = dir.path().join("points.csv");
    let lines = dir.path().join("lines.csv");
    // 3x3 grid and the three horizontal rows through it: 9 incidences.
    let mut point_text = String::from("x,y,multiplicity\n");
    for x in [0.0, 0.5, 1.0] {
        for y in [0.0, 0.5, 1.0] {
            point_text.push_str(&format!("{x},{y},1\n"));
        }
    }
    std::fs::write(&points, point_text).unwrap();
    std::fs::write(&lines, "theta,a,multiplicity\n0,0,1\n0,0.5,1\n0,1,1\n").unwrap();
    let out = stdout_of(&quadlab(&[
        "incidence",
        "count",
        "--points",
        points.to_str().unwrap(),
        "--lines",
        lines.to_str().unwrap(),
        "--delta",
        "2^-6",
        "--check",
    ]));
    assert!(out.contains("incidences: 9"));
    assert!(out.contains("brute agreement: ok"));

    let out = stdout_of(&quadlab(&[
        "incidence",
        "bench",
        "--seed",
        "1",
        "--points",
        "80",
        "--lines",
        "60",
        "--delta",
        "2^-6",
    ]));
    assert!(out.contains("agreement: ok"));
}
