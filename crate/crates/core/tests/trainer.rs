use hetlink_core::graph_store::{GraphOptions, HeteroGraph};
use hetlink_core::model::{Model, ModelConfig};
use hetlink_core::numerics::rng::seeded;
use hetlink_core::numerics::AdamConfig;
use hetlink_core::split_bench::{DroppedRecords, MdaRecord, SplitConfig, SplitManifest};
use hetlink_core::synthetic::{random_graph, random_mda, SyntheticSpec};
use hetlink_core::trainer::{evaluate_epoch, run_repeats, train, Phase, StopReason, TrainConfig};

fn fixture() -> (HeteroGraph, SplitManifest) {
    let spec = SyntheticSpec {
        mirna: 12,
        disease: 10,
        pcg: 6,
        ..SyntheticSpec::default()
    };
    let graph = random_graph(&spec, GraphOptions::default(), 21).unwrap();
    let records: Vec<MdaRecord> = random_mda([12, 10, 6], 40, 2012..=2022, &mut seeded(8))
        .unwrap()
        .into_iter()
        .map(|r| MdaRecord {
            mirna: r.mirna,
            disease: r.disease,
            pmid: r.pmid,
            year: r.year,
        })
        .collect();
    let manifest = SplitManifest::build(
        &records,
        graph.nodes().counts(),
        graph.nodes().fingerprint(),
        DroppedRecords::default(),
        SplitConfig {
            y1: 2019,
            y2: 2020,
            seed: 3,
            negative_ratio_test: 2,
        },
    )
    .unwrap();
    (graph, manifest)
}

fn small_model() -> ModelConfig {
    ModelConfig {
        dim: 8,
        layers: 1,
        heads: 2,
        kernel: 3,
        ..ModelConfig::default()
    }
}

fn short(phase: Phase) -> TrainConfig {
    TrainConfig {
        phase,
        max_epochs: 12,
        patience: 3,
        adam: AdamConfig {
            lr: 0.01,
            ..AdamConfig::default()
        },
        seed: 4,
        repeats: 2,
        ..TrainConfig::default()
    }
}

#[test]
fn zero_learning_rate_keeps_initial_parameters() {
    let (graph, manifest) = fixture();
    let mut config = short(Phase::Select);
    config.adam.lr = 0.0;
    let out = train(&graph, &manifest, small_model(), &config, 9).unwrap();
    let init = Model::new(
        ModelConfig {
            seed: 9,
            ..small_model()
        },
        &graph,
    )
    .unwrap();
    assert_eq!(out.checkpoint.model.params(), init.params());
}

#[test]
fn select_phase_is_deterministic_and_keeps_the_best_epoch() {
    let (graph, manifest) = fixture();
    let config = short(Phase::Select);
    let a = train(&graph, &manifest, small_model(), &config, 4).unwrap();
    let b = train(&graph, &manifest, small_model(), &config, 4).unwrap();
    assert_eq!(a.history, b.history);
    assert_eq!(
        a.checkpoint.to_bytes().unwrap(),
        b.checkpoint.to_bytes().unwrap()
    );

    let h = &a.history;
    let best = h.epochs[h.best_epoch - 1].val_accuracy.unwrap();
    for e in &h.epochs[..h.best_epoch - 1] {
        assert!(e.val_accuracy.unwrap() < best);
    }
    for e in &h.epochs[h.best_epoch..] {
        assert!(e.val_accuracy.unwrap() <= best);
    }
    if h.stop_reason == StopReason::Patience {
        assert_eq!(h.epochs.len(), h.best_epoch + config.patience);
    }

    // The stored weights reproduce the best validation accuracy.
    let model = &a.checkpoint.model;
    let graph_used = a.checkpoint.graph_for(&graph).unwrap();
    let (pairs, labels) = manifest.val.labeled();
    let (_, acc) =
        evaluate_epoch(model, &model.input(&graph_used).unwrap(), &pairs, &labels).unwrap();
    assert_eq!(acc, best);
}

#[test]
fn final_phase_uses_train_and_validation() {
    let (graph, manifest) = fixture();
    let model = ModelConfig {
        graph: GraphOptions {
            include_mda: true,
            ..GraphOptions::default()
        },
        ..small_model()
    };
    let out = train(&graph, &manifest, model, &short(Phase::Final), 4).unwrap();
    let mut expected = manifest.train.positives.clone();
    expected.extend(&manifest.val.positives);
    assert_eq!(out.checkpoint.mda_edges.as_deref(), Some(&expected[..]));
    let h = &out.history;
    assert!(h.epochs.iter().all(|e| e.val_accuracy.is_none()));
    match h.stop_reason {
        StopReason::LossPlateau => {
            let n = h.epochs.len();
            assert!(n >= 3);
            let l: Vec<f64> = h.epochs.iter().map(|e| e.train_loss).collect();
            assert!(l[n - 1] >= l[n - 2] && l[n - 2] >= l[n - 3]);
        }
        StopReason::MaxEpochs => assert_eq!(h.epochs.len(), 12),
        StopReason::Patience => panic!("final phase has no validation"),
    }
}

#[test]
fn repeats_use_consecutive_seeds() {
    let (graph, manifest) = fixture();
    let (outcomes, summary) =
        run_repeats(&graph, &manifest, small_model(), &short(Phase::Select)).unwrap();
    let seeds: Vec<u64> = outcomes.iter().map(|o| o.history.seed).collect();
    assert_eq!(seeds, vec![4, 5]);
    assert_eq!(summary.runs.len(), 2);
    let mean = summary
        .runs
        .iter()
        .map(|r| r.best_val_accuracy.unwrap())
        .sum::<f64>()
        / 2.0;
    assert!((summary.mean_best_val_accuracy.unwrap() - mean).abs() < 1e-15);
}

#[test]
fn minibatches_and_fixed_negatives_train() {
    let (graph, manifest) = fixture();
    let config = TrainConfig {
        batch_size: Some(7),
        resample_negatives: false,
        ..short(Phase::Select)
    };
    let out = train(&graph, &manifest, small_model(), &config, 1).unwrap();
    assert!(out.history.epochs.iter().all(|e| e.train_loss.is_finite()));
}
