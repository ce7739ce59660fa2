use std::fs;
use std::path::Path;
use std::process::Command;

fn prevmap(args: &[&str]) -> i32 {
    let out = Command::new(env!("CARGO_BIN_EXE_prevmap")).args(args).output().unwrap();
    out.status.code().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL_TOY: [&str; 10] = ["--nx", "24", "--ny", "24", "--subjects", "40", "--axes", "5,3", "--center-jitter", "1"];

fn simulate(dir: &Path, seed: &str) {
    let mut args = vec!["simulate", "--output-dir", path(dir), "--seed", seed];
    args.extend(SMALL_TOY);
    assert_eq!(prevmap(&args), 0);
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(prevmap(&["--help"]), 0);
    assert_eq!(prevmap(&["simulate", "--no-such-flag"]), 1);
    assert_eq!(prevmap(&[]), 1);
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(prevmap(&["power", "--output-dir", path(dir.path()), "--alpha", "1.5"]), 1);
}

#[test]
fn missing_input_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.txt");
    assert_eq!(prevmap(&["fit", "--input", path(&missing), "--output-dir", path(dir.path())]), 2);
}

#[test]
fn malformed_input_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "not an effects table\n").unwrap();
    assert_eq!(prevmap(&["fit", "--input", path(&bad), "--output-dir", path(dir.path())]), 2);
}

#[test]
fn simulation_is_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    simulate(a.path(), "7");
    simulate(b.path(), "7");
    for name in ["effects.txt", "true_prevalence.csv"] {
        let x = fs::read(a.path().join(name)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, fs::read(b.path().join(name)).unwrap(), "{name}");
    }
    let c = tempfile::tempdir().unwrap();
    simulate(c.path(), "8");
    assert_ne!(
        fs::read(a.path().join("effects.txt")).unwrap(),
        fs::read(c.path().join("effects.txt")).unwrap()
    );
}

#[test]
fn fit_then_test_matches_the_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate(d, "3");
    let effects = d.join("effects.txt");
    let fitted = d.join("fit");
    assert_eq!(prevmap(&["fit", "--input", path(&effects), "--output-dir", path(&fitted)]), 0);
    let tested = d.join("test");
    let params = fitted.join("parameter_map.csv");
    assert_eq!(
        prevmap(&[
            "test", "--input", path(&effects), "--params", path(&params), "--output-dir", path(&tested), "--q", "0.05",
            "--render-slice", "z:0",
        ]),
        0
    );
    let map = fs::read_to_string(tested.join("tested_map.csv")).unwrap();
    assert!(map.starts_with("voxel_index,x,y,z,"));
    assert_eq!(map.lines().count(), 24 * 24 + 1);
    assert!(tested.join("signed_prevalence.pgm").exists());

    let piped = d.join("pipe");
    assert_eq!(
        prevmap(&["pipeline", "--input", path(&effects), "--output-dir", path(&piped), "--q", "0.05"]),
        0
    );
    assert_eq!(map, fs::read_to_string(piped.join("parameter_map.csv")).unwrap());
}

#[test]
fn worker_count_does_not_change_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate(d, "4");
    let effects = d.join("effects.txt");
    let outs: Vec<String> = ["1", "3"]
        .iter()
        .map(|w| {
            let out = d.join(format!("w{w}"));
            assert_eq!(prevmap(&["--workers", w, "fit", "--input", path(&effects), "--output-dir", path(&out)]), 0);
            fs::read_to_string(out.join("parameter_map.csv")).unwrap()
        })
        .collect();
    assert_eq!(outs[0], outs[1]);
}

#[test]
fn analysis_subcommands_write_their_tables() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(prevmap(&["are", "--output-dir", path(d)]), 0);
    let are = fs::read_to_string(d.join("are.csv")).unwrap();
    assert_eq!(are.lines().count(), 2);
    assert_eq!(
        prevmap(&["power", "--output-dir", path(d), "--n", "16", "--reps", "50", "--p-grid", "0,0.2"]),
        0
    );
    assert_eq!(fs::read_to_string(d.join("power.csv")).unwrap().lines().count(), 3);
}
