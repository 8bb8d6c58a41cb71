use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tsv::TsvReader;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeType {
    #[serde(rename = "miRNA")]
    Mirna,
    #[serde(rename = "disease")]
    Disease,
    #[serde(rename = "PCG")]
    Pcg,
}

impl NodeType {
    pub const ALL: [NodeType; 3] = [NodeType::Mirna, NodeType::Disease, NodeType::Pcg];

    pub fn index(self) -> usize {
        match self {
            NodeType::Mirna => 0,
            NodeType::Disease => 1,
            NodeType::Pcg => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            NodeType::Mirna => "miRNA",
            NodeType::Disease => "disease",
            NodeType::Pcg => "PCG",
        }
    }

    /// Lower-case stem used in file names (`nodes_mirna.tsv`).
    pub fn file_stem(self) -> &'static str {
        match self {
            NodeType::Mirna => "mirna",
            NodeType::Disease => "disease",
            NodeType::Pcg => "pcg",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mirna" => Ok(NodeType::Mirna),
            "disease" => Ok(NodeType::Disease),
            "pcg" | "gene" => Ok(NodeType::Pcg),
            _ => Err(Error::Invalid(format!("unknown node type `{s}`"))),
        }
    }
}

impl fmt::Display for NodeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeEntry {
    pub id: String,
    pub name: String,
    pub aliases: Vec<String>,
}

/// Entries of one node type with primary-ID and alias lookup.
#[derive(Clone, Debug, Default)]
pub struct NodeFragment {
    entries: Vec<NodeEntry>,
    primary: HashMap<String, usize>,
    alias: HashMap<String, usize>,
}

impl PartialEq for NodeFragment {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
    }
}

impl NodeFragment {
    pub fn from_entries(entries: Vec<NodeEntry>) -> Result<Self> {
        let mut primary = HashMap::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            if primary.insert(e.id.clone(), i).is_some() {
                return Err(Error::DuplicateId(e.id.clone()));
            }
        }
        let mut alias: HashMap<String, usize> = HashMap::new();
        for (i, e) in entries.iter().enumerate() {
            for a in &e.aliases {
                if a == &e.id {
                    continue;
                }
                if let Some(&owner) = primary.get(a) {
                    return Err(Error::AliasCollision {
                        alias: a.clone(),
                        first: entries[owner].id.clone(),
                        second: e.id.clone(),
                    });
                }
                match alias.get(a) {
                    Some(&owner) if owner != i => {
                        return Err(Error::AliasCollision {
                            alias: a.clone(),
                            first: entries[owner].id.clone(),
                            second: e.id.clone(),
                        });
                    }
                    _ => {
                        alias.insert(a.clone(), i);
                    }
                }
            }
        }
        Ok(Self {
            entries,
            primary,
            alias,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[NodeEntry] {
        &self.entries
    }

    pub fn entry(&self, ordinal: usize) -> Option<&NodeEntry> {
        self.entries.get(ordinal)
    }

    pub fn alias_count(&self) -> usize {
        self.alias.len()
    }

    /// Primary ID first, then alias → primary ID transfer.
    pub fn resolve(&self, symbol: &str) -> Option<usize> {
        self.primary
            .get(symbol)
            .or_else(|| self.alias.get(symbol))
            .copied()
    }

    /// Up to `limit` known symbols closest to `symbol` by edit distance.
    pub fn near_misses(&self, symbol: &str, limit: usize) -> Vec<String> {
        let lower = symbol.to_lowercase();
        let mut scored: Vec<(usize, &String)> = self
            .primary
            .keys()
            .chain(self.alias.keys())
            .map(|k| (strsim::levenshtein(&lower, &k.to_lowercase()), k))
            .collect();
        scored.sort();
        scored.dedup_by(|a, b| a.1 == b.1);
        let cutoff = (symbol.chars().count() / 2).max(2);
        scored
            .into_iter()
            .filter(|(d, _)| *d <= cutoff)
            .take(limit)
            .map(|(_, k)| k.clone())
            .collect()
    }

    /// Reorders entries so that new ordinal `i` holds old ordinal
    /// `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        Self::from_entries(order.iter().map(|&o| self.entries[o].clone()).collect())
    }
}

/// Reads a `id<TAB>name<TAB>aliases` node table; aliases are `|`-separated.
pub fn load_nodes(path: &Path, node_type: NodeType) -> Result<NodeFragment> {
    let mut reader = TsvReader::open(path, &["id", "name", "aliases"])?;
    let mut entries = Vec::new();
    while let Some(row) = reader.next_row()? {
        let id = row.field(0)?.trim().to_string();
        if id.is_empty() {
            return Err(row.error("empty primary id"));
        }
        let name = row.optional(1).trim().to_string();
        let aliases = row
            .optional(2)
            .split('|')
            .map(str::trim)
            .filter(|a| !a.is_empty())
            .map(str::to_string)
            .collect();
        entries.push(NodeEntry { id, name, aliases });
    }
    log::debug!("{}: {} {} nodes", path.display(), entries.len(), node_type);
    NodeFragment::from_entries(entries)
}

/// All node types together.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NodeTable {
    fragments: [NodeFragment; 3],
}

impl NodeTable {
    pub fn new(mirna: NodeFragment, disease: NodeFragment, pcg: NodeFragment) -> Self {
        Self {
            fragments: [mirna, disease, pcg],
        }
    }

    pub fn fragment(&self, t: NodeType) -> &NodeFragment {
        &self.fragments[t.index()]
    }

    pub fn count(&self, t: NodeType) -> usize {
        self.fragments[t.index()].len()
    }

    pub fn counts(&self) -> [usize; 3] {
        [
            self.fragments[0].len(),
            self.fragments[1].len(),
            self.fragments[2].len(),
        ]
    }

    pub fn resolve(&self, t: NodeType, symbol: &str) -> Option<usize> {
        self.fragment(t).resolve(symbol)
    }

    /// Like [`NodeTable::resolve`] but reports near-miss symbols on failure.
    pub fn require(&self, t: NodeType, symbol: &str) -> Result<usize> {
        self.resolve(t, symbol).ok_or_else(|| Error::UnknownNode {
            id: symbol.to_string(),
            suggestions: self.fragment(t).near_misses(symbol, 5),
        })
    }

    pub fn id(&self, t: NodeType, ordinal: usize) -> &str {
        &self.fragments[t.index()].entries[ordinal].id
    }

    pub fn display_name(&self, t: NodeType, ordinal: usize) -> &str {
        let e = &self.fragments[t.index()].entries[ordinal];
        if e.name.is_empty() {
            &e.id
        } else {
            &e.name
        }
    }

    /// Stable hash of every primary ID in ordinal order, used to tie saved
    /// artifacts to the node table they index.
    pub fn fingerprint(&self) -> String {
        let bytes = self.fragments.iter().flat_map(|f| {
            f.entries
                .iter()
                .flat_map(|e| e.id.bytes().chain(*b"\n"))
                .chain([0u8])
        });
        format!("{:016x}", super::features::fnv1a(bytes))
    }

    pub(crate) fn with_fragment(&self, t: NodeType, fragment: NodeFragment) -> Self {
        let mut out = self.clone();
        out.fragments[t.index()] = fragment;
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(id: &str, aliases: &[&str]) -> NodeEntry {
        NodeEntry {
            id: id.into(),
            name: id.to_lowercase(),
            aliases: aliases.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn alias_and_primary_lookup() {
        let f = NodeFragment::from_entries(vec![entry("MI0000077", &["miR-21", "hsa-miR-21-5p"])])
            .unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(f.alias_count(), 2);
        assert_eq!(f.resolve("MI0000077"), Some(0));
        assert_eq!(f.resolve("hsa-miR-21-5p"), Some(0));
        assert_eq!(f.resolve("nope"), None);
    }

    #[test]
    fn duplicate_primary_is_error() {
        let err = NodeFragment::from_entries(vec![entry("A", &[]), entry("A", &[])]).unwrap_err();
        assert!(matches!(err, Error::DuplicateId(id) if id == "A"));
    }

    #[test]
    fn alias_collision_names_alias() {
        let err = NodeFragment::from_entries(vec![entry("A", &["miR-X"]), entry("B", &["miR-X"])])
            .unwrap_err();
        assert!(err.to_string().contains("miR-X"));
    }

    #[test]
    fn near_misses_suggest_close_ids() {
        let f = NodeFragment::from_entries(vec![
            entry("D000071698", &["LADA"]),
            entry("D003920", &["Diabetes Mellitus"]),
        ])
        .unwrap();
        let s = f.near_misses("D00007169", 3);
        assert_eq!(s.first().map(String::as_str), Some("D000071698"));
    }
}
