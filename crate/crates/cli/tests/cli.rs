//! End-to-end runs of the `advsel` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn advsel(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_advsel"))
        .args(args)
        .current_dir(dir)
        .env_remove("ADVSEL_THREADS")
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn select_quantile_from_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("pop.csv"),
        "id,value\na,3.1\nb,-1\nc,2\nd,0.5\ne,9\nf,4\ng,7\nh,1\ni,5\n",
    )
    .unwrap();
    let out = advsel(
        &["select", "--mechanism", "quantile", "--population", "pop.csv", "--k", "3", "--cutter", "I", "--out", "sample.json"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&dir.path().join("sample.json"));
    assert_eq!(v["positions"], serde_json::json!([2, 5, 8]));
    let ids: Vec<&str> = v["items"].as_array().unwrap().iter().map(|i| i["id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["d", "a", "g"]);
    assert_eq!(v["stats"]["ks"]["exact"], "1/9");
    assert_eq!(v["stats"]["l1"]["exact"], "2/27");
    assert_eq!(v["stats"]["cvm"]["exact"], "2/243");
    let m = json(&dir.path().join("sample.manifest.json"));
    assert_eq!(m["tool"], "advsel");
    assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn select_csv_and_seeded_replay() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["select", "--mechanism", "median-sample", "--n", "45", "--k", "5", "--c", "2", "--seed", "8", "--format", "csv"];
    let a = advsel(&args, dir.path());
    let b = advsel(&args, dir.path());
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.starts_with("position,id,value,level,ks,l1,cvm"));
    assert_eq!(text.lines().count(), 6);
    // The manifest goes to stderr when writing to stdout.
    let manifest: serde_json::Value = serde_json::from_slice(&a.stderr).unwrap();
    assert_eq!(manifest["seed"], 8);
}

#[test]
fn randomized_paths_need_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["select", "--mechanism", "random", "--n", "10", "--k", "3"],
        vec!["compare", "--reps", "2"],
        vec!["figures", "fig2", "--out", "f.csv"],
        vec!["verify", "theorem3"],
    ] {
        let out = advsel(&args, dir.path());
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("--seed"));
    }
}

#[test]
fn usage_and_io_errors() {
    let dir = tempfile::tempdir().unwrap();
    let bad_flag = advsel(&["select", "--bogus"], dir.path());
    assert_eq!(bad_flag.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad_flag.stderr).contains("--bogus"));
    let shape = advsel(&["verify", "theorem1", "--n", "8", "--k", "3"], dir.path());
    assert_eq!(shape.status.code(), Some(2));
    let missing = advsel(&["select", "--mechanism", "quantile", "--population", "nope.csv", "--k", "3"], dir.path());
    assert_eq!(missing.status.code(), Some(3));
}

#[test]
fn help_covers_every_flag() {
    let dir = tempfile::tempdir().unwrap();
    let top = advsel(&["--help"], dir.path());
    assert_eq!(top.status.code(), Some(0));
    let sel = String::from_utf8(advsel(&["select", "--help"], dir.path()).stdout).unwrap();
    for flag in ["--population", "--mechanism", "--k", "--m", "--c", "--cutter", "--sizes", "--seed", "--out", "--threads", "--format"] {
        assert!(sel.contains(flag), "select --help lacks {flag}");
    }
    let cmp = String::from_utf8(advsel(&["compare", "--help"], dir.path()).stdout).unwrap();
    for flag in ["--reps", "--seed", "--out", "--format", "--threads", "ADVSEL_THREADS"] {
        assert!(cmp.contains(flag), "compare --help lacks {flag}");
    }
}

#[test]
fn verify_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = advsel(&["verify", "theorem1", "--n", "15", "--k", "3"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["passed"], true);
    assert_eq!(v["reports"][0]["quantile_sample_is_unique_minimizer_up_to_equivalence"], true);

    let out = advsel(&["verify", "theorem2", "--seed", "3", "--out", "t2.json"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&dir.path().join("t2.json"))["passed"], true);

    let out = advsel(&["verify", "theorem3", "--seed", "3", "--sizes", "2,3", "--n", "6"], dir.path());
    assert_eq!(out.status.code(), Some(0));

    // The directional claim fails here but is only reported.
    let out = advsel(&["verify", "theorem4", "--values", "1,2,3,4", "--k", "2", "--m", "2"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["directional_claim_holds"], false);
    assert_eq!(v["minimize_expected_variance"]["optimum"]["exact"], "5/8");

    let out = advsel(&["verify", "theorem4", "--values", "-1.5,0.25,3,-2", "--k", "2", "--m", "2"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn figure_outputs_do_not_depend_on_thread_count() {
    let run = |threads: &str| {
        let dir = tempfile::tempdir().unwrap();
        let out = Command::new(env!("CARGO_BIN_EXE_advsel"))
            .args(["figures", "fig2", "--seed", "42", "--reps", "60", "--out", "fig2.csv"])
            .env("ADVSEL_THREADS", threads)
            .current_dir(dir.path())
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let f = |name: &str| fs::read(dir.path().join(name)).unwrap();
        let m = json(&dir.path().join("fig2.manifest.json"));
        (f("fig2.csv"), f("fig2_summary.csv"), m["config_sha256"].clone())
    };
    let a = run("1");
    let b = run("4");
    assert_eq!(a, b);
    let rows = String::from_utf8(a.0).unwrap();
    assert_eq!(rows.lines().next(), Some("mechanism,rep,ks"));
    assert_eq!(rows.lines().count(), 1 + 5 * 60);
}

#[test]
fn figure1_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let out = advsel(&["figures", "fig1", "--seed", "1", "--out", "figs/fig1.csv"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(dir.path().join("figs/fig1.csv")).unwrap();
    assert_eq!(text.lines().count(), 973);
    assert!(text.lines().last().unwrap().ends_with(",1,1"));

    let out = advsel(&["compare", "--seed", "5", "--reps", "3", "--threads", "2", "--out", "cmp.csv"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("cmp.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 5 * 3);
    assert!(text.contains("quantile,0,41 122 203"));
    assert!(text.contains("10/243"));
}
