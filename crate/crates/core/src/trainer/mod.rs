//! Optimization with early stopping, the select/final protocol and
//! repeated runs.

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluator::THRESHOLD;
use crate::graph_store::HeteroGraph;
use crate::model::{Checkpoint, Model, ModelConfig, ModelInput};
use crate::numerics::rng::{derive_seed, seeded};
use crate::numerics::{bce_value, AdamConfig, AdamState};
use crate::split_bench::{sample_negatives, SplitManifest};

const NEGATIVE_SALT: u64 = 0x6e65_6761;
const BATCH_SALT: u64 = 0x6261_7463;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    /// Train on train, select the epoch with the best validation accuracy.
    Select,
    /// Train on train ∪ validation until the loss stops decreasing.
    Final,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub phase: Phase,
    pub max_epochs: usize,
    pub patience: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    pub repeats: usize,
    /// `None` trains on all supervision pairs in one step per epoch.
    pub batch_size: Option<usize>,
    /// Draw fresh training negatives every epoch instead of reusing the
    /// manifest's.
    pub resample_negatives: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            phase: Phase::Select,
            max_epochs: 50,
            patience: 5,
            adam: AdamConfig::default(),
            seed: 0,
            repeats: 5,
            batch_size: None,
            resample_negatives: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be positive".into()));
        }
        if self.phase == Phase::Select && self.patience >= self.max_epochs {
            return Err(Error::Config(format!(
                "patience {} must be below max_epochs {}",
                self.patience, self.max_epochs
            )));
        }
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        if self.batch_size == Some(0) {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        Ok(())
    }
}

/// A model and a training configuration, optionally with an ablation
/// preset applied on top of the model section. This is the schema of
/// configuration files.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub condition: Option<u8>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Applies the preset, if any, and validates both sections.
    pub fn resolved(mut self) -> Result<Self> {
        if let Some(c) = self.condition {
            self.model = self.model.condition(c)?;
        }
        self.model.validate()?;
        self.train.validate()?;
        Ok(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// Numbered from 1.
    pub epoch: usize,
    /// Summed loss over the epoch's supervision pairs before its update.
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Patience,
    MaxEpochs,
    LossPlateau,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub phase: Phase,
    pub seed: u64,
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose weights were kept.
    pub best_epoch: usize,
    pub stop_reason: StopReason,
}

impl TrainHistory {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub history: TrainHistory,
}

impl TrainOutcome {
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.checkpoint.save(&dir.join("checkpoint.bin"))?;
        let path = dir.join("history.json");
        std::fs::write(&path, self.history.to_json()?).map_err(|e| Error::io(&path, e))
    }
}

/// Loss and threshold accuracy of `pairs` under the model's parameters.
pub fn evaluate_epoch(
    model: &Model,
    input: &ModelInput<'_>,
    pairs: &[(usize, usize)],
    labels: &[f64],
) -> Result<(f64, f64)> {
    if pairs.is_empty() {
        return Err(Error::Invalid("no pairs to evaluate".into()));
    }
    let emb = model.embed(input)?;
    let scores = model.score_pairs(&emb, pairs)?;
    let correct = scores
        .iter()
        .zip(labels)
        .filter(|(&s, &l)| (s >= THRESHOLD) == (l == 1.0))
        .count();
    Ok((
        bce_value(&scores, labels),
        correct as f64 / pairs.len() as f64,
    ))
}

/// Best-epoch tracking on validation accuracy. Only a strict improvement
/// moves the best epoch, so ties keep the earliest.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<(usize, f64)>,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: None,
        }
    }

    /// Records `accuracy` for `epoch`; true when it is the new best.
    pub fn observe(&mut self, epoch: usize, accuracy: f64) -> bool {
        let improved = self.best.is_none_or(|(_, a)| accuracy > a);
        if improved {
            self.best = Some((epoch, accuracy));
        }
        improved
    }

    pub fn should_stop(&self, epoch: usize) -> bool {
        self.best
            .is_some_and(|(b, _)| epoch.saturating_sub(b) >= self.patience)
    }

    pub fn best(&self) -> Option<(usize, f64)> {
        self.best
    }
}

/// True when `current` and the last recorded loss both failed to decrease.
pub fn loss_plateaued(history: &[f64], current: f64) -> bool {
    match history {
        [.., a, b] => current >= *b && *b >= *a,
        _ => false,
    }
}

/// One pass over `pairs`: a single step, or one step per shuffled batch.
/// Returns the summed pre-update loss.
pub fn train_epoch(
    model: &mut Model,
    adam: &mut AdamState,
    input: &ModelInput<'_>,
    pairs: &[(usize, usize)],
    labels: &[f64],
    batch: Option<(usize, u64)>,
) -> Result<f64> {
    let Some((size, seed)) = batch else {
        let (loss, grads) = model.loss_and_gradients(input, pairs, labels)?;
        adam.step(model.params_mut(), &grads)?;
        return Ok(loss);
    };
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.shuffle(&mut seeded(seed));
    let mut total = 0.0;
    for chunk in order.chunks(size) {
        let p: Vec<_> = chunk.iter().map(|&i| pairs[i]).collect();
        let l: Vec<_> = chunk.iter().map(|&i| labels[i]).collect();
        let (loss, grads) = model.loss_and_gradients(input, &p, &l)?;
        adam.step(model.params_mut(), &grads)?;
        total += loss;
    }
    Ok(total)
}

fn labeled(pos: &[(usize, usize)], neg: &[(usize, usize)]) -> (Vec<(usize, usize)>, Vec<f64>) {
    let pairs = pos.iter().chain(neg).copied().collect();
    let labels = std::iter::repeat_n(1.0, pos.len())
        .chain(std::iter::repeat_n(0.0, neg.len()))
        .collect();
    (pairs, labels)
}

type Pairs = Vec<(usize, usize)>;

/// Graph used for message passing in `phase`: `base` restricted to the
/// configured options, with supervision positives as miRNA→disease edges
/// when requested.
pub fn phase_graph(
    base: &HeteroGraph,
    manifest: &SplitManifest,
    config: &ModelConfig,
    phase: Phase,
) -> Result<(HeteroGraph, Option<Pairs>)> {
    let mda = config
        .graph
        .include_mda
        .then(|| phase_positives(manifest, phase));
    Ok((base.derive(config.graph, mda.as_deref())?, mda))
}

fn phase_positives(manifest: &SplitManifest, phase: Phase) -> Vec<(usize, usize)> {
    let mut p = manifest.train.positives.clone();
    if phase == Phase::Final {
        p.extend(&manifest.val.positives);
    }
    p
}

/// One training run with `seed` for initialization and resampling.
pub fn train(
    base: &HeteroGraph,
    manifest: &SplitManifest,
    model_config: ModelConfig,
    config: &TrainConfig,
    seed: u64,
) -> Result<TrainOutcome> {
    config.validate()?;
    if manifest.node_fingerprint != base.nodes().fingerprint() {
        return Err(Error::Config(
            "manifest was built against a different node table".into(),
        ));
    }
    let phase = config.phase;
    if phase == Phase::Select && manifest.val.positives.is_empty() {
        return Err(Error::Config(
            "select phase needs validation positives".into(),
        ));
    }
    let model_config = ModelConfig {
        seed,
        ..model_config
    };
    let (graph, mda_edges) = phase_graph(base, manifest, &model_config, phase)?;
    let mut model = Model::new(model_config, &graph)?;
    let input = model.input(&graph)?;
    let mut adam = AdamState::new(config.adam, model.params());

    let positives = phase_positives(manifest, phase);
    if positives.is_empty() {
        return Err(Error::Invalid("no training positives".into()));
    }
    let fixed_negatives = match phase {
        Phase::Select => manifest.train.negatives.clone(),
        Phase::Final => {
            let mut n = manifest.train.negatives.clone();
            n.extend(&manifest.val.negatives);
            n
        }
    };
    // Resampled negatives avoid every verified pair and the negatives
    // reserved for evaluation.
    let mut exclude: BTreeSet<(usize, usize)> = manifest.verified();
    exclude.extend(&manifest.test.negatives);
    if phase == Phase::Select {
        exclude.extend(&manifest.val.negatives);
    }
    let (val_pairs, val_labels) = labeled(&manifest.val.positives, &manifest.val.negatives);
    let [n_mirna, n_disease, _] = base.nodes().counts();

    let mut epochs: Vec<EpochRecord> = Vec::new();
    let mut stopper = EarlyStopping::new(config.patience);
    let mut best_params = None;
    let mut stop_reason = StopReason::MaxEpochs;
    for epoch in 1..=config.max_epochs {
        let negatives = if config.resample_negatives {
            let mut rng = seeded(derive_seed(seed ^ NEGATIVE_SALT, epoch as u64));
            sample_negatives(&exclude, n_mirna, n_disease, positives.len(), &mut rng)?
        } else {
            fixed_negatives.clone()
        };
        let (pairs, labels) = labeled(&positives, &negatives);
        let batch = config
            .batch_size
            .map(|b| (b, derive_seed(seed ^ BATCH_SALT, epoch as u64)));

        if phase == Phase::Final {
            // Check the plateau rule on this epoch's loss before updating,
            // so the kept weights are the ones that produced it.
            let (loss, _) = evaluate_epoch(&model, &input, &pairs, &labels)?;
            let losses: Vec<f64> = epochs.iter().map(|e| e.train_loss).collect();
            if loss_plateaued(&losses, loss) {
                epochs.push(EpochRecord {
                    epoch,
                    train_loss: loss,
                    val_loss: None,
                    val_accuracy: None,
                });
                stop_reason = StopReason::LossPlateau;
                break;
            }
        }
        let train_loss = train_epoch(&mut model, &mut adam, &input, &pairs, &labels, batch)?;
        if !train_loss.is_finite() {
            return Err(Error::NonFinite(format!("training loss at epoch {epoch}")));
        }
        let mut record = EpochRecord {
            epoch,
            train_loss,
            val_loss: None,
            val_accuracy: None,
        };
        if phase == Phase::Select {
            let (vl, va) = evaluate_epoch(&model, &input, &val_pairs, &val_labels)?;
            record.val_loss = Some(vl);
            record.val_accuracy = Some(va);
            if stopper.observe(epoch, va) {
                best_params = Some(model.params().clone());
            }
            epochs.push(record);
            if stopper.should_stop(epoch) {
                stop_reason = StopReason::Patience;
                break;
            }
        } else {
            epochs.push(record);
        }
    }

    let best_epoch = match (stopper.best(), best_params) {
        (Some((epoch, _)), Some(params)) => {
            *model.params_mut() = params;
            epoch
        }
        _ => epochs.len(),
    };
    log::info!(
        "seed {seed}: {} epochs, kept epoch {best_epoch} ({stop_reason:?})",
        epochs.len()
    );
    Ok(TrainOutcome {
        checkpoint: Checkpoint {
            model,
            node_fingerprint: base.nodes().fingerprint(),
            optimizer: config.adam,
            mda_edges,
        },
        history: TrainHistory {
            phase,
            seed,
            epochs,
            best_epoch,
            stop_reason,
        },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub epochs: usize,
    pub best_epoch: usize,
    pub best_val_accuracy: Option<f64>,
    pub last_train_loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepeatSummary {
    pub runs: Vec<RunSummary>,
    pub mean_best_val_accuracy: Option<f64>,
    pub mean_last_train_loss: f64,
}

impl RepeatSummary {
    pub fn of(histories: &[&TrainHistory]) -> Self {
        let runs: Vec<RunSummary> = histories
            .iter()
            .map(|h| RunSummary {
                seed: h.seed,
                epochs: h.epochs.len(),
                best_epoch: h.best_epoch,
                best_val_accuracy: h
                    .epochs
                    .get(h.best_epoch.wrapping_sub(1))
                    .and_then(|e| e.val_accuracy),
                last_train_loss: h.epochs.last().map_or(f64::NAN, |e| e.train_loss),
            })
            .collect();
        let n = runs.len() as f64;
        let accs: Option<Vec<f64>> = runs.iter().map(|r| r.best_val_accuracy).collect();
        Self {
            mean_best_val_accuracy: accs.map(|a| a.iter().sum::<f64>() / n),
            mean_last_train_loss: runs.iter().map(|r| r.last_train_loss).sum::<f64>() / n,
            runs,
        }
    }
}

/// `config.repeats` runs with seeds `config.seed + i`.
pub fn run_repeats(
    base: &HeteroGraph,
    manifest: &SplitManifest,
    model_config: ModelConfig,
    config: &TrainConfig,
) -> Result<(Vec<TrainOutcome>, RepeatSummary)> {
    config.validate()?;
    let outcomes = (0..config.repeats as u64)
        .map(|i| {
            train(
                base,
                manifest,
                model_config,
                config,
                config.seed.wrapping_add(i),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = RepeatSummary::of(&outcomes.iter().map(|o| &o.history).collect::<Vec<_>>());
    Ok((outcomes, summary))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn patience_keeps_the_earliest_best() {
        let accs = [0.5, 0.6, 0.7, 0.7, 0.65, 0.7, 0.7, 0.7, 0.9];
        let mut s = EarlyStopping::new(5);
        let mut stopped = None;
        for (i, &a) in accs.iter().enumerate() {
            s.observe(i + 1, a);
            if s.should_stop(i + 1) {
                stopped = Some(i + 1);
                break;
            }
        }
        assert_eq!(stopped, Some(8));
        assert_eq!(s.best(), Some((3, 0.7)));
    }

    #[test]
    fn plateau_needs_two_non_decreases() {
        assert!(!loss_plateaued(&[3.0], 4.0));
        assert!(!loss_plateaued(&[3.0, 2.0], 2.5));
        assert!(loss_plateaued(&[2.0, 2.0], 2.0));
        assert!(loss_plateaued(&[1.0, 2.0, 2.5], 2.5));
        assert!(!loss_plateaued(&[1.0, 2.0, 2.5], 2.4));
    }

    #[test]
    fn config_validation() {
        TrainConfig::default().validate().unwrap();
        let bad = TrainConfig {
            patience: 50,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            repeats: 0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
