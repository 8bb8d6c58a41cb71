mod common;

use common::{hetlink, ok, prepared};

#[test]
fn full_pipeline() {
    let (tmp, out) = prepared();
    let config = tmp.path().join("c.json");
    let stdout = ok(
        &out,
        &[
            "train",
            "--phase",
            "select",
            "--config",
            config.to_str().unwrap(),
            "--threads",
            "2",
        ],
    );
    assert_eq!(stdout.lines().count(), 2);
    for f in [
        "run0/checkpoint.bin",
        "run0/history.json",
        "run1/checkpoint.bin",
        "train_summary.json",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
    let c0 = out.join("run0/checkpoint.bin");
    let c1 = out.join("run1/checkpoint.bin");
    ok(
        &out,
        &[
            "evaluate",
            "--checkpoint",
            c0.to_str().unwrap(),
            c1.to_str().unwrap(),
        ],
    );
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["runs"].as_array().unwrap().len(), 2);
    let auc = report["mean"]["balanced.auc"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&auc));
    assert!(out.join("predictions_0.tsv").exists());

    let ranked = ok(
        &out,
        &[
            "predict",
            "--checkpoint",
            c0.to_str().unwrap(),
            "--disease",
            "d1",
            "--top",
            "5",
        ],
    );
    let rows: Vec<&str> = ranked.lines().collect();
    assert_eq!(rows.len(), 6);
    let scores: Vec<f64> = rows[1..]
        .iter()
        .map(|r| r.split('\t').nth(5).unwrap().parse().unwrap())
        .collect();
    assert!(scores.windows(2).all(|w| w[0] >= w[1]));

    let pair = ok(
        &out,
        &[
            "predict",
            "--checkpoint",
            c0.to_str().unwrap(),
            "--pair",
            "m2:d1",
        ],
    );
    let explained = ok(
        &out,
        &[
            "explain",
            "--checkpoint",
            c0.to_str().unwrap(),
            "--mirna",
            "m2",
            "--disease",
            "d1",
        ],
    );
    let p: f64 = pair
        .lines()
        .nth(1)
        .unwrap()
        .split('\t')
        .nth(5)
        .unwrap()
        .parse()
        .unwrap();
    let e: f64 = explained
        .trim()
        .split('\t')
        .nth(2)
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(p, e);
    for f in ["explain.json", "explain.dot", "mu_report.json"] {
        assert!(out.join(f).exists(), "{f}");
    }

    ok(&out, &["stats", "--tau", "all", "--tau", "PCG"]);
    let stats: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("stats.json")).unwrap()).unwrap();
    assert!(stats["cm"]["all"]["positives"]["counts"].is_array());
}

#[test]
fn train_is_byte_identical_across_runs() {
    let (tmp, out) = prepared();
    let config = tmp.path().join("c.json");
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for dir in [&a, &b] {
        let args = [
            "--graph",
            out.join("graph.bin").to_str().unwrap(),
            "--manifest",
            out.join("manifest.json").to_str().unwrap(),
        ]
        .map(str::to_string);
        let mut full = vec![
            "train",
            "--config",
            config.to_str().unwrap(),
            "--repeats",
            "1",
        ];
        full.extend(args.iter().map(String::as_str));
        ok(dir, &full);
    }
    for f in ["run0/checkpoint.bin", "run0/history.json"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn usage_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let o = hetlink(tmp.path(), &["train", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(2));
    let o = hetlink(tmp.path(), &["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn runtime_errors_give_one_line() {
    let tmp = tempfile::tempdir().unwrap();
    let o = hetlink(tmp.path(), &["stats"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8(o.stderr).unwrap();
    assert_eq!(err.trim().lines().count(), 1, "{err}");
    assert!(err.contains("graph.bin"));
}

#[test]
fn unknown_ids_and_bad_configs_are_reported() {
    let (tmp, out) = prepared();
    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, r#"{"model": {"dim": 8, "heads": 3}}"#).unwrap();
    let o = hetlink(&out, &["train", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));

    let ladder = tmp.path().join("ladder.json");
    std::fs::write(
        &ladder,
        r#"{"model": {"graph": {"use_intra_edges": false, "use_pcg": true}}}"#,
    )
    .unwrap();
    assert_eq!(
        hetlink(&out, &["train", "--config", ladder.to_str().unwrap()])
            .status
            .code(),
        Some(1)
    );

    let config = tmp.path().join("c.json");
    ok(
        &out,
        &[
            "train",
            "--config",
            config.to_str().unwrap(),
            "--repeats",
            "1",
            "--max-epochs",
            "3",
        ],
    );
    let c0 = out.join("run0/checkpoint.bin");
    let o = hetlink(
        &out,
        &[
            "predict",
            "--checkpoint",
            c0.to_str().unwrap(),
            "--disease",
            "d99",
        ],
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("d99"));
}
