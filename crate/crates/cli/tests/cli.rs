use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chainset_cli::bundle::ResultBundle;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn golden(name: &str) -> String {
    std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)).unwrap()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chainset")).args(args).output().unwrap()
}

fn run_ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn decompose_examples() {
    assert_eq!(
        run_ok(&["decompose", p(&data("center_stable.json"))]),
        "dim L+ = 0, dim L0 = 1, dim L\u{2212} = 1, dim C = 1, hyperbolic: no\n"
    );
    assert_eq!(
        run_ok(&["decompose", p(&data("saddle.json"))]),
        "dim L+ = 1, dim L0 = 0, dim L\u{2212} = 1, dim C = 2, hyperbolic: yes\n"
    );
}

#[test]
fn parse_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"A\": [[1.0]], \"B\": ").unwrap();
    assert_eq!(run(&["decompose", p(&bad)]).status.code(), Some(2));

    let out = run(&["decompose", p(&data("unknown_key.json"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`colour`"));

    std::fs::write(&bad, r#"{"A": [[1.0]], "B": [[1.0]], "U": {"type": "box", "lo": [0.5], "hi": [1.0]}}"#).unwrap();
    assert_eq!(run(&["chain-set", p(&bad)]).status.code(), Some(2));
}

#[test]
fn chain_set_summaries() {
    let one = run_ok(&["chain-set", p(&data("center_stable.json"))]);
    assert!(one.contains("E: hull of (0.000000, -1.000000) (0.000000, 1.000000) + span{(1.000000, 0.000000)}"), "{one}");
    let saddle = run_ok(&["chain-set", p(&data("saddle_no_input.json"))]);
    assert!(saddle.contains("E: hull of (0.000000, 0.000000)"), "{saddle}");
}

#[test]
fn golden_svgs() {
    let dir = tempfile::tempdir().unwrap();
    for (spec, gold) in [("center_stable.json", "center_stable_chain_set.svg"), ("saddle.json", "saddle_chain_set.svg")] {
        let bundle = dir.path().join("b.json");
        let svg = dir.path().join("out.svg");
        run_ok(&["chain-set", p(&data(spec)), "--out", p(&bundle)]);
        run_ok(&["plot", p(&bundle), p(&svg)]);
        assert_eq!(std::fs::read_to_string(&svg).unwrap(), golden(gold), "{spec}");
    }
}

#[test]
fn bundles_are_deterministic_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let spec = data("saddle.json");
    let args = |out: &Path| {
        vec![
            "oracle".to_string(),
            p(&spec).to_string(),
            "--epsilon".into(),
            "0.15".into(),
            "--spacing".into(),
            "0.1".into(),
            "--from".into(),
            "0,0".into(),
            "--to".into(),
            "0.5,0.5".into(),
            "--out".into(),
            p(out).to_string(),
        ]
    };
    let first = Command::new(env!("CARGO_BIN_EXE_chainset")).args(args(&a)).env("CHAINSET_THREADS", "1").output().unwrap();
    assert!(first.status.success());
    let second = Command::new(env!("CARGO_BIN_EXE_chainset")).args(args(&b)).env("CHAINSET_THREADS", "4").output().unwrap();
    assert!(second.status.success());
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());

    let bundle = ResultBundle::from_json(&text).unwrap();
    assert_eq!(bundle.to_canonical_json().unwrap(), text);
    assert_eq!(bundle.command, "oracle");
    assert_eq!(bundle.input_hash.len(), 64);
    assert_eq!(bundle.result["witness"]["valid"], true);
    assert_eq!(bundle.result["agreement"]["passes"], true);

    // keys are sorted at every level
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    fn sorted(v: &serde_json::Value) -> bool {
        match v {
            serde_json::Value::Object(m) => {
                let keys: Vec<&String> = m.keys().collect();
                keys.windows(2).all(|w| w[0] < w[1]) && m.values().all(sorted)
            }
            serde_json::Value::Array(a) => a.iter().all(sorted),
            _ => true,
        }
    }
    assert!(sorted(&value));
}

#[test]
fn oracle_exit_codes() {
    let spec = data("saddle.json");
    let unreachable = run(&["oracle", p(&spec), "--epsilon", "0.06", "--from", "0,0", "--to", "1.9,-1.9"]);
    assert_eq!(unreachable.status.code(), Some(4));
    let tiny = run(&["oracle", p(&spec), "--epsilon", "0.01"]);
    assert_eq!(tiny.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&tiny.stderr).contains("half the grid spacing"));
    let huge = run(&["oracle", p(&spec), "--spacing", "0.001"]);
    assert_eq!(huge.status.code(), Some(2));
    let outside = run(&["oracle", p(&spec), "--box", "1,2,1,2"]);
    assert_eq!(outside.status.code(), Some(2));
}

#[test]
fn oracle_scatter_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = dir.path().join("o.json");
    let summary = run_ok(&["oracle", p(&data("center_stable.json")), "--box", "-3,3,-2,2", "--out", p(&bundle)]);
    assert!(summary.contains("agreement: pass"), "{summary}");
    let svg = dir.path().join("o.svg");
    run_ok(&["plot", p(&bundle), p(&svg)]);
    let text = std::fs::read_to_string(&svg).unwrap();
    let b = ResultBundle::load(&bundle).unwrap();
    let n = b.result["component"].as_array().unwrap().len();
    assert_eq!(text.matches("<circle").count(), n);
    let csv = dir.path().join("o.csv");
    run_ok(&["plot", p(&bundle), p(&csv), "--csv"]);
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), n + 1);
}

#[test]
fn poincare_and_projection() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = dir.path().join("p.json");
    let out = run_ok(&["poincare", p(&data("three_dim.json")), "--out", p(&bundle)]);
    assert!(out.starts_with("central fiber dimension: 1"), "{out}");
    let svg = dir.path().join("p.svg");
    let flat = run(&["plot", p(&bundle), p(&svg)]);
    assert_eq!(flat.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&flat.stderr).contains("not plottable"));
    run_ok(&["plot", p(&bundle), p(&svg), "--project", "0,2"]);
    assert!(std::fs::read_to_string(&svg).unwrap().contains("<circle"));

    let two = run_ok(&["poincare", p(&data("saddle.json")), "--samples", "12"]);
    assert!(two.contains("cloud: "), "{two}");
}

#[test]
fn decompose_bundles_are_not_plottable() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = dir.path().join("d.json");
    run_ok(&["decompose", p(&data("center_stable.json")), "--out", p(&bundle)]);
    assert_eq!(run(&["plot", p(&bundle), p(&dir.path().join("d.svg"))]).status.code(), Some(2));
}
