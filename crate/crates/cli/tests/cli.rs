use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dpcert::flat::FlatDoc;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dpcert"))
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin().args(args).current_dir(dir).output().expect("spawn dpcert")
}

fn write_input(dir: &Path) -> PathBuf {
    let mut text = String::from("age,income,score\n");
    for i in 0..120u32 {
        let a = 20.0 + f64::from(i % 47);
        let b = 1000.0 + f64::from((i * 37) % 101) * 13.5;
        let c = f64::from((i * 11) % 17) / 17.0;
        text.push_str(&format!("{a},{b},{c}\n"));
    }
    let path = dir.join("in.csv");
    std::fs::write(&path, text).unwrap();
    path
}

fn sanitize(dir: &Path, tag: &str) -> Output {
    let out = format!("syn_{tag}.csv");
    let cert = format!("cert_{tag}.json");
    let weights = format!("w_{tag}.csv");
    let nu = format!("nu_{tag}.json");
    run(
        &[
            "sanitize", "in.csv", "--epsilon", "1", "--s", "2", "--k", "4", "--seed", "11", "--out", &out, "--cert",
            &cert, "--weights-out", &weights, "--nu-out", &nu,
        ],
        dir,
    )
}

#[test]
fn sanitize_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    write_input(dir.path());
    let a = sanitize(dir.path(), "a");
    let b = sanitize(dir.path(), "b");
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert!(b.status.success());
    assert_eq!(a.stdout, b.stdout);
    for (x, y) in [
        ("syn_a.csv", "syn_b.csv"),
        ("cert_a.json", "cert_b.json"),
        ("w_a.csv", "w_b.csv"),
        ("nu_a.json", "nu_b.json"),
    ] {
        let x = std::fs::read(dir.path().join(x)).unwrap();
        let y = std::fs::read(dir.path().join(y)).unwrap();
        assert_eq!(x, y);
    }
    let synth = std::fs::read_to_string(dir.path().join("syn_a.csv")).unwrap();
    assert_eq!(synth.lines().next(), Some("age,income,score"));
    assert_eq!(synth.lines().count(), 121);
}

#[test]
fn certify_reproduces_the_certificate() {
    let dir = tempfile::tempdir().unwrap();
    write_input(dir.path());
    assert!(sanitize(dir.path(), "a").status.success());
    let out = run(
        &["certify", "--weights", "w_a.csv", "--nu", "nu_a.json", "--epsilon", "1", "--seed", "11"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let fresh = FlatDoc::parse(&String::from_utf8(out.stdout).unwrap()).unwrap();
    let saved = FlatDoc::parse(&std::fs::read_to_string(dir.path().join("cert_a.json")).unwrap()).unwrap();
    for key in ["discretization_error", "privatization_quantile", "projection_error", "total"] {
        let (x, y) = (fresh.get_f64(key).unwrap(), saved.get_f64(key).unwrap());
        assert!((x - y).abs() <= 1e-9, "{key}: {x} vs {y}");
    }
}

#[test]
fn evaluate_against_itself_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    write_input(dir.path());
    let out = run(&["evaluate", "in.csv", "in.csv", "--s", "1", "--k", "8"], dir.path());
    assert!(out.status.success());
    let doc = FlatDoc::parse(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(doc.get_f64("lower").unwrap(), 0.0);
    assert_eq!(doc.get_f64("upper").unwrap(), 0.0);
    assert_eq!(doc.get_f64("exact").unwrap(), 0.0);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    write_input(dir.path());
    // usage errors
    assert_eq!(run(&["sanitize", "in.csv", "--s", "2"], dir.path()).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"], dir.path()).status.code(), Some(2));
    let bad_eps = run(&["sanitize", "in.csv", "--epsilon", "-1", "--s", "1", "--k", "4", "--seed", "1"], dir.path());
    assert_eq!(bad_eps.status.code(), Some(2));
    let bad_s = run(&["sanitize", "in.csv", "--epsilon", "1", "--s", "5", "--k", "4", "--seed", "1"], dir.path());
    assert_eq!(bad_s.status.code(), Some(2));
    std::fs::write(dir.path().join("bad.csv"), "x,y\n1,2\n3,oops\n").unwrap();
    let bad_csv = run(&["sanitize", "bad.csv", "--epsilon", "1", "--s", "1", "--k", "4", "--seed", "1"], dir.path());
    assert_eq!(bad_csv.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad_csv.stderr).contains("row 3, column 2"));
    // runtime errors
    let missing = run(&["sanitize", "nope.csv", "--epsilon", "1", "--s", "1", "--k", "4", "--seed", "1"], dir.path());
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn bounds_flag_rejects_out_of_range_rows() {
    let dir = tempfile::tempdir().unwrap();
    write_input(dir.path());
    std::fs::write(dir.path().join("b.csv"), "column,min,max\nage,0,50\nincome,0,3000\nscore,0,1\n").unwrap();
    let out = run(
        &["sanitize", "in.csv", "--bounds", "b.csv", "--epsilon", "1", "--s", "1", "--k", "4", "--seed", "1"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    std::fs::write(dir.path().join("b.csv"), "column,min,max\nage,0,100\nincome,0,3000\nscore,0,1\n").unwrap();
    let out = run(
        &["sanitize", "in.csv", "--bounds", "b.csv", "--epsilon", "1", "--s", "1", "--k", "4", "--seed", "1"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn sweep_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &["sweep", "--n", "50,100", "--d", "2", "--trials", "2", "--epsilon", "1", "--seed", "3", "--out", "s.csv"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut reader = csv::Reader::from_path(dir.path().join("s.csv")).unwrap();
    assert_eq!(
        reader.headers().unwrap().iter().collect::<Vec<_>>(),
        ["n", "k", "mean_loss", "std_loss", "trials", "seed"]
    );
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(&rows[0][0], "50");
}

#[test]
fn lowdim_reports_selection() {
    let dir = tempfile::tempdir().unwrap();
    write_input(dir.path());
    let out = run(&["lowdim", "in.csv", "--epsilon", "5", "--seed", "2", "--out", "l.csv"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = FlatDoc::parse(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert!(doc.get_u64("s_opt").unwrap() <= 3);
    assert!(doc.has("k_opt"));
    let synth = std::fs::read_to_string(dir.path().join("l.csv")).unwrap();
    assert_eq!(synth.lines().count(), 121);
}
