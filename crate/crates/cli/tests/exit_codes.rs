use std::path::Path;
use std::process::{Command, Output};

fn run(out_dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_variety")).arg("--out-dir").arg(out_dir).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["no-such-command"][..],
        &["mon-scan", "--n", "many"],
        &["square-sample", "--mode", "sideways"],
        &["compensate"],
        &["synth", "--kind", "power(x)"],
    ] {
        assert_eq!(code(&run(dir.path(), args)), 2, "{args:?}");
    }
}

#[test]
fn validation_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.jsonl");
    let missing = missing.to_str().unwrap();
    for args in [
        &["mon-scan", "--n", "0"][..],
        &["k-vs-n", "--dims", "0"],
        &["square-sample", "--epsilon=-1"],
        &["square-sample", "--n", "10", "--max-attempts", "1"],
        &["learn-toy", "--seeds", "0"],
        &["compensate", "--input", missing],
        &["eval", "--input", missing],
        &["synth", "--output", "../escape.jsonl"],
    ] {
        let out = run(dir.path(), args);
        assert_eq!(code(&out), 1, "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: "), "{args:?}");
    }
}

#[test]
fn pipeline_succeeds_and_writes_manifest_first() {
    let dir = tempfile::tempdir().unwrap();
    let synth = run(dir.path(), &["synth", "--scenes", "2", "--samples", "120", "--horizon", "1"]);
    assert_eq!(code(&synth), 0, "{}", String::from_utf8_lossy(&synth.stderr));
    let input = dir.path().join("scenes.jsonl");
    let input = input.to_str().unwrap();

    let out_dir = dir.path().join("comp");
    let comp = run(&out_dir, &["compensate", "--input", input, "--n-sample", "120", "--resolution", "20"]);
    assert_eq!(code(&comp), 0, "{}", String::from_utf8_lossy(&comp.stderr));
    assert!(String::from_utf8_lossy(&comp.stdout).contains("k_best="));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["subcommand"], "compensate");
    for name in manifest["outputs"].as_array().unwrap() {
        assert!(out_dir.join(name.as_str().unwrap()).is_file(), "{name}");
    }

    // A failing run still leaves its manifest behind.
    let failed = dir.path().join("failed");
    let out = run(&failed, &["eval", "--input", input, "--n", "500"]);
    assert_eq!(code(&out), 1);
    assert!(failed.join("manifest.json").is_file());
}
