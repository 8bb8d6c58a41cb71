"""End-to-end check of the hetlink extension on a small synthetic dataset.

Build and install the module first, e.g.

    pip install maturin
    maturin develop -m crates/python/Cargo.toml --release

then run `python python/smoke_test.py`.
"""

import json
import math
import tempfile
from pathlib import Path

import hetlink


def check_metrics():
    scores = [0.9, 0.8, 0.8, 0.3, 0.1]
    labels = [True, False, True, False, False]
    # Mid-rank AUC: positives outrank 5.5 of 6 positive/negative pairs.
    assert math.isclose(hetlink.auc(scores, labels), 5.5 / 6, abs_tol=1e-15)
    acc, prec, rec, f1 = hetlink.threshold_metrics(scores, labels)
    assert (acc, prec, rec) == (0.8, 2 / 3, 1.0)
    assert 0.0 < hetlink.aupr(scores, labels) <= 1.0
    assert hetlink.recall_at_percent(scores, labels, 20.0) == 0.5


def check_pipeline(root: Path):
    data = root / "data"
    hetlink.write_synthetic_dataset(str(data), mirna=12, disease=10, pcg=6, associations=40, seed=5)
    graph = hetlink.Graph.from_dataset(str(data), half_width=4)
    assert graph.counts() == (12, 10, 6)
    graph.save(str(root / "graph.bin"))
    assert hetlink.Graph.load(str(root / "graph.bin")).fingerprint() == graph.fingerprint()

    manifest = hetlink.SplitManifest.build(graph, str(data / "mda.tsv"), seed=7, test_ratio=2)
    train_n, val_n, test_n = manifest.sizes()
    assert train_n + val_n + test_n == 40

    model = hetlink.Model(graph, config=json.dumps({"dim": 8, "heads": 2, "layers": 1, "kernel": 3}))
    pairs, labels = manifest.partition("train")
    loss, grads = model.loss_and_gradients(graph, pairs, labels)
    assert loss > 0 and len(grads) == len(model.param_names())
    assert all(0.0 < s < 1.0 for s in model.score(graph, pairs))

    config = {
        "model": {"dim": 8, "heads": 2, "layers": 1, "kernel": 3},
        "train": {"max_epochs": 5, "patience": 2},
    }
    ckpt, history = hetlink.train(graph, manifest, json.dumps(config), seed=1)
    history = json.loads(history)
    assert history["phase"] == "select" and history["epochs"]

    report = json.loads(ckpt.evaluate(graph, manifest))
    assert 0.0 <= report["balanced"]["auc"] <= 1.0

    explanation = json.loads(ckpt.explain(graph, "m2", "d1"))
    assert explanation["score"] == ckpt.score(graph, [(2, 1)])[0]

    mu = json.loads(hetlink.mu_report([ckpt]))
    assert len(mu["layers"]) == 1

    try:
        ckpt.explain(graph, "m99", "d1")
    except hetlink.HetlinkError as e:
        assert "m99" in str(e)
    else:
        raise AssertionError("unknown id accepted")


def main():
    check_metrics()
    with tempfile.TemporaryDirectory() as tmp:
        check_pipeline(Path(tmp))
    print("smoke test passed")


if __name__ == "__main__":
    main()
