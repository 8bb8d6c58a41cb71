//! Loading a directory of exported entity and edge tables.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::features::{hashed_pair_embedding, MirnaSequences, NodeFeatures};
use super::graph::{resolve_edges, InputEdgeKind, InputEdges};
use super::nodes::{load_nodes, NodeTable, NodeType};
use super::tsv::{load_pairs, TsvReader};
use crate::error::{Error, Result};
use crate::numerics::Tensor;

pub const EDGE_HEADER: [&str; 2] = ["src_id", "dst_id"];

#[derive(Clone, Debug, Default, Serialize)]
pub struct LoadReport {
    pub counts: BTreeMap<String, usize>,
    /// Rows dropped per file because an identifier did not resolve.
    pub dropped: BTreeMap<String, usize>,
    /// Disease/PCG nodes whose text embedding came from the hashed fallback.
    pub hashed_features: BTreeMap<String, usize>,
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub nodes: NodeTable,
    pub features: NodeFeatures,
    pub edges: InputEdges,
    pub report: LoadReport,
}

pub fn nodes_path(dir: &Path, t: NodeType) -> PathBuf {
    dir.join(format!("nodes_{}.tsv", t.file_stem()))
}

pub fn edges_path(dir: &Path, kind: InputEdgeKind) -> PathBuf {
    dir.join(format!("edges_{}.tsv", kind.file_stem()))
}

/// Loads `nodes_<type>.tsv`, `edges_<kind>.tsv`, `mirna_seq.tsv` and the
/// optional `embeddings_<type>.tsv` / `notes_<type>.tsv` from `dir`.
///
/// Text embedding width comes from the embedding files when present;
/// otherwise `default_half_width` is used for the hashed fallback.
pub fn load_dataset(dir: &Path, default_half_width: usize) -> Result<Dataset> {
    let mut report = LoadReport::default();
    let fragment = |t| load_nodes(&nodes_path(dir, t), t);
    let nodes = NodeTable::new(
        fragment(NodeType::Mirna)?,
        fragment(NodeType::Disease)?,
        fragment(NodeType::Pcg)?,
    );
    for t in NodeType::ALL {
        report.counts.insert(t.name().to_string(), nodes.count(t));
    }

    let mut edges = InputEdges::new();
    for kind in InputEdgeKind::ALL {
        if kind == InputEdgeKind::MirnaDisease {
            continue;
        }
        let path = edges_path(dir, kind);
        if !path.exists() {
            log::warn!(
                "{} not found; no {} edges",
                path.display(),
                kind.file_stem()
            );
            continue;
        }
        let raw = load_pairs(&path, &EDGE_HEADER)?;
        let resolved = resolve_edges(&raw, kind, &nodes);
        report
            .dropped
            .insert(format!("edges_{}.tsv", kind.file_stem()), resolved.dropped);
        report
            .counts
            .insert(format!("edges_{}", kind.file_stem()), resolved.pairs.len());
        edges.set(kind, resolved.pairs);
    }

    let mirna = load_sequences(dir, &nodes, &mut report)?;

    let mut embeddings = BTreeMap::new();
    for t in [NodeType::Disease, NodeType::Pcg] {
        let path = dir.join(format!("embeddings_{}.tsv", t.file_stem()));
        if path.exists() {
            embeddings.insert(t, load_embeddings(&path, t, &nodes, &mut report)?);
        }
    }
    let mut widths = embeddings.values().filter_map(|e| e.width);
    let full_width = match widths.next() {
        Some(w) => {
            if widths.any(|o| o != w) {
                return Err(Error::Invalid(
                    "disease and PCG embedding files disagree on width".into(),
                ));
            }
            w
        }
        None => 2 * default_half_width,
    };
    if full_width % 2 != 0 {
        return Err(Error::Invalid(format!(
            "embedding width {full_width} must be even (two text halves)"
        )));
    }
    let half = full_width / 2;

    let mut text = |t: NodeType| -> Result<Tensor> {
        let notes = load_notes(dir, t, &nodes)?;
        let n = nodes.count(t);
        let provided = embeddings.remove(&t).map(|e| e.rows).unwrap_or_default();
        let mut data = Vec::with_capacity(n * full_width);
        let mut hashed = 0;
        for i in 0..n {
            match provided.get(&i) {
                Some(v) => data.extend_from_slice(v),
                None => {
                    let entry = nodes.fragment(t).entry(i).expect("ordinal in range");
                    let secondary = notes
                        .get(&i)
                        .cloned()
                        .unwrap_or_else(|| entry.aliases.join(" "));
                    data.extend(hashed_pair_embedding(&entry.name, &secondary, half));
                    hashed += 1;
                }
            }
        }
        report.hashed_features.insert(t.name().to_string(), hashed);
        Tensor::new(n, full_width, data)
    };
    let disease = text(NodeType::Disease)?;
    let pcg = text(NodeType::Pcg)?;

    let features = NodeFeatures {
        mirna,
        disease,
        pcg,
        text_half_width: half,
    };
    features.validate(nodes.counts())?;
    Ok(Dataset {
        nodes,
        features,
        edges,
        report,
    })
}

fn load_sequences(
    dir: &Path,
    nodes: &NodeTable,
    report: &mut LoadReport,
) -> Result<Vec<MirnaSequences>> {
    let mut seqs = vec![MirnaSequences::default(); nodes.count(NodeType::Mirna)];
    let path = dir.join("mirna_seq.tsv");
    if !path.exists() {
        log::warn!("{} not found; miRNA sequences are empty", path.display());
        return Ok(seqs);
    }
    let mut reader = TsvReader::open(&path, &["id", "stem_loop", "mature_1", "mature_2"])?;
    let mut dropped = 0;
    while let Some(row) = reader.next_row()? {
        let Some(ordinal) = nodes.resolve(NodeType::Mirna, row.field(0)?.trim()) else {
            dropped += 1;
            continue;
        };
        seqs[ordinal] = MirnaSequences::new(row.field(1)?, row.optional(2), row.optional(3))
            .map_err(|e| row.error(&e.to_string()))?;
    }
    report.dropped.insert("mirna_seq.tsv".into(), dropped);
    Ok(seqs)
}

struct EmbeddingFile {
    width: Option<usize>,
    rows: BTreeMap<usize, Vec<f64>>,
}

fn load_embeddings(
    path: &Path,
    t: NodeType,
    nodes: &NodeTable,
    report: &mut LoadReport,
) -> Result<EmbeddingFile> {
    let mut reader = TsvReader::open(path, &["id"])?;
    let mut out = EmbeddingFile {
        width: None,
        rows: BTreeMap::new(),
    };
    let mut dropped = 0;
    while let Some(row) = reader.next_row()? {
        let values = row
            .field(1)?
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| row.error(&format!("bad embedding value: {e}")))?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(row.error("non-finite embedding value"));
        }
        match out.width {
            None => out.width = Some(values.len()),
            Some(w) if w != values.len() => {
                return Err(row.error(&format!(
                    "embedding has {} values, earlier rows have {w}",
                    values.len()
                )))
            }
            _ => {}
        }
        match nodes.resolve(t, row.field(0)?.trim()) {
            Some(o) => {
                out.rows.insert(o, values);
            }
            None => dropped += 1,
        }
    }
    report
        .dropped
        .insert(format!("embeddings_{}.tsv", t.file_stem()), dropped);
    Ok(out)
}

fn load_notes(dir: &Path, t: NodeType, nodes: &NodeTable) -> Result<BTreeMap<usize, String>> {
    let path = dir.join(format!("notes_{}.tsv", t.file_stem()));
    let mut out = BTreeMap::new();
    if !path.exists() {
        return Ok(out);
    }
    let mut reader = TsvReader::open(&path, &["id", "text"])?;
    while let Some(row) = reader.next_row()? {
        if let Some(o) = nodes.resolve(t, row.field(0)?.trim()) {
            out.insert(o, row.optional(1).to_string());
        }
    }
    Ok(out)
}
