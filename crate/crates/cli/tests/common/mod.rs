use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hetlink_core::synthetic::{write_dataset, SyntheticSpec};

pub const CONFIG: &str = r#"{
  "model": {"dim": 8, "heads": 2, "layers": 1, "kernel": 3},
  "train": {"max_epochs": 6, "patience": 2, "repeats": 2, "seed": 3}
}"#;

pub fn hetlink(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hetlink"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn ok(out: &Path, args: &[&str]) -> String {
    let o = hetlink(out, args);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout).unwrap()
}

pub fn prepared() -> (tempfile::TempDir, PathBuf) {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let spec = SyntheticSpec {
        mirna: 12,
        disease: 10,
        pcg: 6,
        ..SyntheticSpec::default()
    };
    write_dataset(&data, &spec, 40, 5).unwrap();
    std::fs::write(tmp.path().join("c.json"), CONFIG).unwrap();
    let out = tmp.path().join("out");
    ok(&out, &["build-graph", "--data", data.to_str().unwrap()]);
    let mda = data.join("mda.tsv");
    ok(
        &out,
        &[
            "split",
            "--mda",
            mda.to_str().unwrap(),
            "--y1",
            "2019",
            "--y2",
            "2020",
            "--seed",
            "7",
            "--test-ratio",
            "2",
        ],
    );
    (tmp, out)
}
