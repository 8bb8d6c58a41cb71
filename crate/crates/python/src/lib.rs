//! Python bindings. Structured reports cross the boundary as JSON strings.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use hetlink_core::evaluator::{self, NeighborType, ScoredPair, THRESHOLD};
use hetlink_core::explain;
use hetlink_core::graph_store::{self, GraphOptions, HeteroGraph, NodeType};
use hetlink_core::model::{self, ModelConfig};
use hetlink_core::numerics::Tensor;
use hetlink_core::split_bench::{self, SplitConfig};
use hetlink_core::synthetic::{self, SyntheticSpec};
use hetlink_core::trainer::{self, RunConfig};

create_exception!(hetlink, HetlinkError, PyException);

type Pairs = Vec<(usize, usize)>;
/// `(parameter name, gradient rows)` in parameter order.
type NamedGradients = Vec<(String, Vec<Vec<f64>>)>;

fn err(e: impl std::fmt::Display) -> PyErr {
    HetlinkError::new_err(e.to_string())
}

fn node_type(s: &str) -> PyResult<NodeType> {
    NodeType::parse(s).map_err(err)
}

fn rows(t: &Tensor) -> Vec<Vec<f64>> {
    (0..t.rows()).map(|r| t.row_slice(r).to_vec()).collect()
}

fn scored(scores: &[f64], labels: &[bool]) -> PyResult<Vec<ScoredPair>> {
    if scores.len() != labels.len() {
        return Err(err("scores and labels differ in length"));
    }
    Ok(scores
        .iter()
        .zip(labels)
        .enumerate()
        .map(|(i, (&score, &label))| ScoredPair {
            mirna: i,
            disease: 0,
            score,
            label,
            region: None,
        })
        .collect())
}

/// Immutable heterogeneous graph.
#[pyclass(name = "Graph", frozen)]
struct PyGraph {
    inner: HeteroGraph,
}

#[pymethods]
impl PyGraph {
    /// Loads a dataset directory with every input edge kind enabled.
    #[staticmethod]
    #[pyo3(signature = (path, half_width = graph_store::DEFAULT_TEXT_HALF_WIDTH))]
    fn from_dataset(path: PathBuf, half_width: usize) -> PyResult<Self> {
        let ds = graph_store::load_dataset(&path, half_width).map_err(err)?;
        let inner =
            graph_store::build_graph(ds.nodes, ds.features, &ds.edges, GraphOptions::default())
                .map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: HeteroGraph::load(&path).map_err(err)?,
        })
    }

    /// Seeded random graph, mainly for experiments and tests.
    #[staticmethod]
    #[pyo3(signature = (mirna = 6, disease = 5, pcg = 4, edge_prob = 0.3, seed = 0))]
    fn synthetic(
        mirna: usize,
        disease: usize,
        pcg: usize,
        edge_prob: f64,
        seed: u64,
    ) -> PyResult<Self> {
        let spec = SyntheticSpec {
            mirna,
            disease,
            pcg,
            edge_prob,
            ..SyntheticSpec::default()
        };
        Ok(Self {
            inner: synthetic::random_graph(&spec, GraphOptions::default(), seed).map_err(err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(err)
    }

    /// `(miRNA, disease, PCG)` node counts.
    fn counts(&self) -> (usize, usize, usize) {
        let [m, d, p] = self.inner.nodes().counts();
        (m, d, p)
    }

    fn edge_count(&self) -> usize {
        self.inner.edge_count()
    }

    /// Registered meta-relation keys, e.g. `miRNA:family:miRNA`.
    fn relations(&self) -> Vec<String> {
        self.inner
            .meta_relations()
            .iter()
            .map(|r| r.key())
            .collect()
    }

    /// Ordinal of an ID or alias, or `None`.
    fn resolve(&self, node_type: &str, symbol: &str) -> PyResult<Option<usize>> {
        Ok(self
            .inner
            .nodes()
            .resolve(self::node_type(node_type)?, symbol))
    }

    fn node_id(&self, node_type: &str, ordinal: usize) -> PyResult<String> {
        let t = self::node_type(node_type)?;
        if ordinal >= self.inner.count(t) {
            return Err(err(format!("{t} ordinal {ordinal} out of range")));
        }
        Ok(self.inner.nodes().id(t, ordinal).to_string())
    }

    fn fingerprint(&self) -> String {
        self.inner.nodes().fingerprint()
    }

    /// `|N_m ∩ N_d| / |N_m ∪ N_d|` per pair; NaN for an empty union.
    #[pyo3(signature = (pairs, tau = "all"))]
    fn common_neighbors(&self, pairs: Vec<(usize, usize)>, tau: &str) -> PyResult<Vec<f64>> {
        let tau: NeighborType = tau.parse().map_err(err)?;
        Ok(evaluator::common_neighbor_stat(&self.inner, &pairs, tau))
    }

    fn __repr__(&self) -> String {
        let [m, d, p] = self.inner.nodes().counts();
        format!(
            "Graph(mirna={m}, disease={d}, pcg={p}, edges={})",
            self.inner.edge_count()
        )
    }
}

/// Time-split benchmark with negatives and region tags.
#[pyclass(name = "SplitManifest", frozen)]
struct PyManifest {
    inner: split_bench::SplitManifest,
}

#[pymethods]
impl PyManifest {
    #[staticmethod]
    #[pyo3(signature = (graph, mda_path, y1 = 2019, y2 = 2020, seed = 0, test_ratio = 100))]
    fn build(
        graph: &PyGraph,
        mda_path: PathBuf,
        y1: i32,
        y2: i32,
        seed: u64,
        test_ratio: usize,
    ) -> PyResult<Self> {
        let nodes = graph.inner.nodes();
        let (records, dropped) = split_bench::load_mda(&mda_path, nodes).map_err(err)?;
        let config = SplitConfig {
            y1,
            y2,
            seed,
            negative_ratio_test: test_ratio,
        };
        let inner = split_bench::SplitManifest::build(
            &records,
            nodes.counts(),
            nodes.fingerprint(),
            dropped,
            config,
        )
        .map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: split_bench::SplitManifest::load(&path).map_err(err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(err)
    }

    /// Positive counts `(train, val, test)`.
    fn sizes(&self) -> (usize, usize, usize) {
        let m = &self.inner;
        (
            m.train.positives.len(),
            m.val.positives.len(),
            m.test.positives.len(),
        )
    }

    /// Known-degree medians `(miRNA, disease)`.
    fn medians(&self) -> (usize, usize) {
        (
            self.inner.regions.mirna_median,
            self.inner.regions.disease_median,
        )
    }

    /// `(pairs, labels)` of `train`, `val` or `test`.
    fn partition(&self, name: &str) -> PyResult<(Pairs, Vec<f64>)> {
        let p = match name {
            "train" => &self.inner.train,
            "val" => &self.inner.val,
            "test" => &self.inner.test,
            _ => return Err(err(format!("unknown partition `{name}`"))),
        };
        Ok(p.labeled())
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(err)
    }
}

/// Model with its parameters; `config` is the JSON form of the model
/// configuration, optionally reduced to an ablation `condition`.
#[pyclass(name = "Model")]
struct PyModel {
    inner: model::Model,
}

#[pymethods]
impl PyModel {
    #[new]
    #[pyo3(signature = (graph, config = None, condition = None, seed = 0))]
    fn new(
        graph: &PyGraph,
        config: Option<&str>,
        condition: Option<u8>,
        seed: u64,
    ) -> PyResult<Self> {
        let mut cfg: ModelConfig = match config {
            Some(text) => serde_json::from_str(text).map_err(err)?,
            None => ModelConfig::default(),
        };
        if let Some(c) = condition {
            cfg = cfg.condition(c).map_err(err)?;
        }
        cfg.seed = seed;
        let view = graph.inner.derive(cfg.graph, None).map_err(err)?;
        Ok(Self {
            inner: model::Model::new(cfg, &view).map_err(err)?,
        })
    }

    fn config_json(&self) -> PyResult<String> {
        serde_json::to_string(self.inner.config()).map_err(err)
    }

    fn param_names(&self) -> Vec<String> {
        self.inner
            .params()
            .iter()
            .map(|(_, n, _)| n.to_string())
            .collect()
    }

    fn param(&self, name: &str) -> PyResult<Vec<Vec<f64>>> {
        self.inner
            .params()
            .by_name(name)
            .map(rows)
            .ok_or_else(|| err(format!("no parameter `{name}`")))
    }

    fn set_param(&mut self, name: &str, value: Vec<Vec<f64>>) -> PyResult<()> {
        let id = self
            .inner
            .params()
            .id(name)
            .ok_or_else(|| err(format!("no parameter `{name}`")))?;
        let t = self.inner.params_mut().get_mut(id);
        if value.len() != t.rows() || value.iter().any(|r| r.len() != t.cols()) {
            return Err(err(format!(
                "`{name}` expects shape {}x{}",
                t.rows(),
                t.cols()
            )));
        }
        for (r, row) in value.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                t.set(r, c, v);
            }
        }
        Ok(())
    }

    /// Scores `(miRNA, disease)` ordinal pairs on the model's view of `graph`.
    fn score(&self, graph: &PyGraph, pairs: Vec<(usize, usize)>) -> PyResult<Vec<f64>> {
        let view = graph
            .inner
            .derive(self.inner.config().graph, None)
            .map_err(err)?;
        let emb = self
            .inner
            .embed(&self.inner.input(&view).map_err(err)?)
            .map_err(err)?;
        self.inner.score_pairs(&emb, &pairs).map_err(err)
    }

    /// Summed BCE loss and its gradient per parameter name.
    fn loss_and_gradients(
        &self,
        graph: &PyGraph,
        pairs: Vec<(usize, usize)>,
        labels: Vec<f64>,
    ) -> PyResult<(f64, NamedGradients)> {
        let view = graph
            .inner
            .derive(self.inner.config().graph, None)
            .map_err(err)?;
        let input = self.inner.input(&view).map_err(err)?;
        let (loss, grads) = self
            .inner
            .loss_and_gradients(&input, &pairs, &labels)
            .map_err(err)?;
        let named = self
            .inner
            .params()
            .iter()
            .map(|(id, name, _)| (name.to_string(), rows(grads.get(id))))
            .collect();
        Ok((loss, named))
    }
}

/// Trained model tied to a node table.
#[pyclass(name = "Checkpoint", frozen)]
struct PyCheckpoint {
    inner: model::Checkpoint,
}

#[pymethods]
impl PyCheckpoint {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: model::Checkpoint::load(&path).map_err(err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(err)
    }

    fn header_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.inner.header()).map_err(err)
    }

    /// Number of scalars in message-passing layers.
    fn gnn_param_count(&self) -> usize {
        self.inner.header().gnn_param_count()
    }

    fn score(&self, graph: &PyGraph, pairs: Vec<(usize, usize)>) -> PyResult<Vec<f64>> {
        evaluator::score_pairs(&self.inner, &graph.inner, &pairs).map_err(err)
    }

    /// Test-set report as JSON.
    #[pyo3(signature = (graph, manifest, recall = vec![1.0, 5.0, 10.0]))]
    fn evaluate(
        &self,
        graph: &PyGraph,
        manifest: &PyManifest,
        recall: Vec<f64>,
    ) -> PyResult<String> {
        let (report, _) =
            evaluator::evaluate_checkpoint(&self.inner, &graph.inner, &manifest.inner, &recall)
                .map_err(err)?;
        report.to_json().map_err(err)
    }

    /// Attention/residual subgraph around one pair as JSON.
    fn explain(&self, graph: &PyGraph, mirna: &str, disease: &str) -> PyResult<String> {
        let view = self.inner.graph_for(&graph.inner).map_err(err)?;
        explain::explain_pair(&self.inner.model, &view, mirna, disease)
            .and_then(|x| x.to_json())
            .map_err(err)
    }
}

/// Trains one run; `config` is the JSON form of
/// `{"model": ..., "train": ..., "condition": ...}`.
/// Returns the checkpoint and the history as JSON.
#[pyfunction]
#[pyo3(signature = (graph, manifest, config = None, seed = 0))]
fn train(
    py: Python<'_>,
    graph: &PyGraph,
    manifest: &PyManifest,
    config: Option<&str>,
    seed: u64,
) -> PyResult<(PyCheckpoint, String)> {
    let cfg = match config {
        Some(text) => RunConfig::from_json(text).map_err(err)?,
        None => RunConfig::default(),
    }
    .resolved()
    .map_err(err)?;
    let outcome = py
        .detach(|| trainer::train(&graph.inner, &manifest.inner, cfg.model, &cfg.train, seed))
        .map_err(err)?;
    let history = outcome.history.to_json().map_err(err)?;
    Ok((
        PyCheckpoint {
            inner: outcome.checkpoint,
        },
        history,
    ))
}

/// Averaged μ per layer and meta-relation as JSON.
#[pyfunction]
fn mu_report(checkpoints: Vec<PyRef<'_, PyCheckpoint>>) -> PyResult<String> {
    let models: Vec<&model::Model> = checkpoints.iter().map(|c| &c.inner.model).collect();
    explain::mu_hierarchy(&models)
        .and_then(|r| r.to_json())
        .map_err(err)
}

#[pyfunction]
fn auc(scores: Vec<f64>, labels: Vec<bool>) -> PyResult<f64> {
    evaluator::auc(&scored(&scores, &labels)?).map_err(err)
}

#[pyfunction]
fn aupr(scores: Vec<f64>, labels: Vec<bool>) -> PyResult<f64> {
    evaluator::aupr(&scored(&scores, &labels)?).map_err(err)
}

/// Recall among the top `pct` percent, ties broken by position.
#[pyfunction]
fn recall_at_percent(scores: Vec<f64>, labels: Vec<bool>, pct: f64) -> PyResult<f64> {
    evaluator::recall_at_percent(&scored(&scores, &labels)?, pct).map_err(err)
}

/// `(accuracy, precision, recall, f1)` at threshold 0.5.
#[pyfunction]
fn threshold_metrics(scores: Vec<f64>, labels: Vec<bool>) -> PyResult<(f64, f64, f64, f64)> {
    let t = evaluator::threshold_metrics(&scored(&scores, &labels)?, THRESHOLD).map_err(err)?;
    Ok((t.accuracy, t.precision, t.recall, t.f1))
}

/// Writes a seeded synthetic dataset directory, including `mda.tsv`.
#[pyfunction]
#[pyo3(signature = (path, mirna = 12, disease = 10, pcg = 6, associations = 40, seed = 0))]
fn write_synthetic_dataset(
    path: PathBuf,
    mirna: usize,
    disease: usize,
    pcg: usize,
    associations: usize,
    seed: u64,
) -> PyResult<()> {
    let spec = SyntheticSpec {
        mirna,
        disease,
        pcg,
        ..SyntheticSpec::default()
    };
    synthetic::write_dataset(&path, &spec, associations, seed).map_err(err)
}

#[pymodule]
fn hetlink(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("HetlinkError", m.py().get_type::<HetlinkError>())?;
    m.add_class::<PyGraph>()?;
    m.add_class::<PyManifest>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyCheckpoint>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(mu_report, m)?)?;
    m.add_function(wrap_pyfunction!(auc, m)?)?;
    m.add_function(wrap_pyfunction!(aupr, m)?)?;
    m.add_function(wrap_pyfunction!(recall_at_percent, m)?)?;
    m.add_function(wrap_pyfunction!(threshold_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(write_synthetic_dataset, m)?)?;
    Ok(())
}
