//! Seeded synthetic graphs and dataset directories for tests, demos and
//! the acceptance suite.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph_store::{
    build_graph, GraphOptions, HeteroGraph, InputEdgeKind, InputEdges, MirnaSequences, NodeEntry,
    NodeFeatures, NodeFragment, NodeTable, NodeType,
};
use crate::numerics::rng::{seeded, uniform, SeededRng};

const BASES: [char; 4] = ['A', 'U', 'C', 'G'];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub mirna: usize,
    pub disease: usize,
    pub pcg: usize,
    /// Probability of each possible edge of every input kind.
    pub edge_prob: f64,
    pub text_half_width: usize,
    /// Maximum stem-loop and mature lengths; actual lengths vary below them.
    pub stem_loop_len: usize,
    pub mature_len: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            mirna: 6,
            disease: 5,
            pcg: 4,
            edge_prob: 0.3,
            text_half_width: 4,
            stem_loop_len: 12,
            mature_len: 6,
        }
    }
}

/// Node table with IDs `m0.., d0.., g0..` and names `miR-0`, ...
pub fn node_table(counts: [usize; 3]) -> NodeTable {
    let fragment = |prefix: &str, name: &str, n: usize| {
        let entries = (0..n)
            .map(|i| NodeEntry {
                id: format!("{prefix}{i}"),
                name: format!("{name}-{i}"),
                aliases: vec![format!("{name}{i}")],
            })
            .collect();
        NodeFragment::from_entries(entries).expect("synthetic IDs are unique")
    };
    NodeTable::new(
        fragment("m", "miR", counts[0]),
        fragment("d", "disease", counts[1]),
        fragment("g", "gene", counts[2]),
    )
}

fn random_sequence(rng: &mut SeededRng, len: usize) -> String {
    (0..len).map(|_| BASES[rng.random_range(0..4)]).collect()
}

/// Seeded features with the shapes `spec` describes. One miRNA in three
/// lacks a second mature sequence; every fourth stem-loop is one base longer.
pub fn random_features(spec: &SyntheticSpec, rng: &mut SeededRng) -> NodeFeatures {
    let mirna = (0..spec.mirna)
        .map(|i| {
            let sl = spec.stem_loop_len - usize::from(i % 4 != 0).min(spec.stem_loop_len);
            let m1 = random_sequence(rng, spec.mature_len);
            let m2 = if i % 3 == 2 {
                String::new()
            } else {
                random_sequence(rng, spec.mature_len.saturating_sub(i % 2))
            };
            MirnaSequences::new(&random_sequence(rng, sl), &m1, &m2)
                .expect("generated bases are valid")
        })
        .collect();
    let w = 2 * spec.text_half_width;
    NodeFeatures {
        mirna,
        disease: uniform(rng, spec.disease, w, -1.0, 1.0),
        pcg: uniform(rng, spec.pcg, w, -1.0, 1.0),
        text_half_width: spec.text_half_width,
    }
}

/// Each possible pair of every input kind independently with
/// `spec.edge_prob`; intra-class pairs are unordered.
pub fn random_edges(spec: &SyntheticSpec, rng: &mut SeededRng) -> InputEdges {
    let counts = [spec.mirna, spec.disease, spec.pcg];
    let mut edges = InputEdges::new();
    for kind in InputEdgeKind::ALL {
        let (s, t) = kind.endpoints();
        let mut pairs = Vec::new();
        for a in 0..counts[s.index()] {
            for b in 0..counts[t.index()] {
                if kind.is_intra_class() && a >= b {
                    continue;
                }
                if rng.random_bool(spec.edge_prob) {
                    pairs.push((a, b));
                }
            }
        }
        edges.set(kind, pairs);
    }
    edges
}

/// Random graph under `options`; MDA edges are drawn too and used only
/// when `options.include_mda` is set.
pub fn random_graph(spec: &SyntheticSpec, options: GraphOptions, seed: u64) -> Result<HeteroGraph> {
    let mut rng = seeded(seed);
    let features = random_features(spec, &mut rng);
    let mut edges = random_edges(spec, &mut rng);
    if !options.include_mda {
        edges.set(InputEdgeKind::MirnaDisease, Vec::new());
    }
    build_graph(
        node_table([spec.mirna, spec.disease, spec.pcg]),
        features,
        &edges,
        options,
    )
}

/// Fixed 3 miRNA / 3 disease / 3 PCG graph with at least one edge in every
/// meta-relation when `options` enables it.
pub fn toy_graph(options: GraphOptions, text_half_width: usize, seed: u64) -> Result<HeteroGraph> {
    let spec = SyntheticSpec {
        mirna: 3,
        disease: 3,
        pcg: 3,
        text_half_width,
        stem_loop_len: 5,
        mature_len: 3,
        ..SyntheticSpec::default()
    };
    let mut rng = seeded(seed);
    let features = random_features(&spec, &mut rng);
    let edges = InputEdges::new()
        .with(InputEdgeKind::Family, vec![(0, 1), (1, 2)])
        .with(InputEdgeKind::FatherSon, vec![(0, 1)])
        .with(InputEdgeKind::Group, vec![(0, 2), (1, 2)])
        .with(
            InputEdgeKind::MirnaPcg,
            vec![(0, 0), (1, 1), (2, 2), (0, 2)],
        )
        .with(InputEdgeKind::PcgDisease, vec![(0, 0), (1, 2), (2, 1)])
        .with(
            InputEdgeKind::MirnaDisease,
            if options.include_mda {
                vec![(0, 0), (2, 1)]
            } else {
                Vec::new()
            },
        );
    build_graph(node_table([3, 3, 3]), features, &edges, options)
}

/// One evidence row of a synthetic `mda.tsv`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SyntheticMda {
    pub mirna: usize,
    pub disease: usize,
    pub pmid: String,
    pub year: i32,
}

/// `count` distinct miRNA–disease pairs, years drawn from `years`, about
/// one pair in four carrying a second, later piece of evidence.
pub fn random_mda(
    counts: [usize; 3],
    count: usize,
    years: std::ops::RangeInclusive<i32>,
    rng: &mut SeededRng,
) -> Result<Vec<SyntheticMda>> {
    let total = counts[0] * counts[1];
    if count > total {
        return Err(Error::Invalid(format!(
            "{count} associations requested from {total} possible pairs"
        )));
    }
    let mut all: Vec<(usize, usize)> = (0..counts[0])
        .flat_map(|m| (0..counts[1]).map(move |d| (m, d)))
        .collect();
    all.shuffle(rng);
    let mut out = Vec::new();
    for (i, &(m, d)) in all[..count].iter().enumerate() {
        let year = rng.random_range(years.clone());
        out.push(SyntheticMda {
            mirna: m,
            disease: d,
            pmid: format!("{}", 10_000_000 + 2 * i),
            year,
        });
        if rng.random_bool(0.25) {
            out.push(SyntheticMda {
                mirna: m,
                disease: d,
                pmid: format!("{}", 10_000_001 + 2 * i),
                year: year + rng.random_range(0..3),
            });
        }
    }
    Ok(out)
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes a complete dataset directory in the loader's formats, including
/// `mda.tsv` with `mda_count` associations over 2010 to 2023.
pub fn write_dataset(dir: &Path, spec: &SyntheticSpec, mda_count: usize, seed: u64) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut rng = seeded(seed);
    let counts = [spec.mirna, spec.disease, spec.pcg];
    let table = node_table(counts);
    let features = random_features(spec, &mut rng);
    let edges = random_edges(spec, &mut rng);

    for t in NodeType::ALL {
        let mut s = String::from("id\tname\taliases\n");
        for e in table.fragment(t).entries() {
            let _ = writeln!(s, "{}\t{}\t{}", e.id, e.name, e.aliases.join("|"));
        }
        write(&dir.join(format!("nodes_{}.tsv", t.file_stem())), &s)?;
    }
    for kind in InputEdgeKind::ALL {
        if kind == InputEdgeKind::MirnaDisease {
            continue;
        }
        let (a, b) = kind.endpoints();
        let mut s = String::from("src_id\tdst_id\n");
        for &(x, y) in edges.get(kind) {
            let _ = writeln!(s, "{}\t{}", table.id(a, x), table.id(b, y));
        }
        write(&dir.join(format!("edges_{}.tsv", kind.file_stem())), &s)?;
    }
    let mut s = String::from("id\tstem_loop\tmature_1\tmature_2\n");
    for (i, q) in features.mirna.iter().enumerate() {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}",
            table.id(NodeType::Mirna, i),
            q.stem_loop,
            q.mature_1,
            q.mature_2
        );
    }
    write(&dir.join("mirna_seq.tsv"), &s)?;
    for (t, m) in [
        (NodeType::Disease, &features.disease),
        (NodeType::Pcg, &features.pcg),
    ] {
        let mut s = String::from("id\tvector\n");
        for i in 0..m.rows() {
            let values: Vec<String> = m.row_slice(i).iter().map(|v| format!("{v:.17e}")).collect();
            let _ = writeln!(s, "{}\t{}", table.id(t, i), values.join(","));
        }
        write(&dir.join(format!("embeddings_{}.tsv", t.file_stem())), &s)?;
    }
    let mut s = String::from("mirna_id\tdisease_id\tpmid\tyear\n");
    for r in random_mda(counts, mda_count, 2010..=2023, &mut rng)? {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}",
            table.id(NodeType::Mirna, r.mirna),
            table.id(NodeType::Disease, r.disease),
            r.pmid,
            r.year
        );
    }
    write(&dir.join("mda.tsv"), &s)
}
