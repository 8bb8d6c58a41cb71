use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph_store::tsv::TsvReader;
use crate::graph_store::{NodeTable, NodeType};

pub const MDA_HEADER: [&str; 4] = ["mirna_id", "disease_id", "pmid", "year"];

/// One literature record as read from `mda.tsv`, before ID resolution.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawMdaRecord {
    pub mirna: String,
    pub disease: String,
    pub pmid: String,
    pub year: Option<i32>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MdaRecord {
    pub mirna: usize,
    pub disease: usize,
    pub pmid: String,
    pub year: i32,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedRecords {
    pub unparseable_year: usize,
    pub unresolved_id: usize,
}

/// Reads `mda.tsv`. Years that do not parse as a positive integer are kept
/// as `None` so the caller can count them.
pub fn load_mda_raw(path: &Path) -> Result<Vec<RawMdaRecord>> {
    let mut reader = TsvReader::open(path, &MDA_HEADER)?;
    let mut out = Vec::new();
    while let Some(row) = reader.next_row()? {
        let year = row
            .optional(3)
            .trim()
            .parse::<i32>()
            .ok()
            .filter(|&y| y > 0);
        out.push(RawMdaRecord {
            mirna: row.field(0)?.trim().to_string(),
            disease: row.field(1)?.trim().to_string(),
            pmid: row.optional(2).trim().to_string(),
            year,
        });
    }
    Ok(out)
}

/// Resolves IDs (primary or alias) and drops unusable records.
pub fn resolve_records(
    raw: &[RawMdaRecord],
    table: &NodeTable,
) -> (Vec<MdaRecord>, DroppedRecords) {
    let mut dropped = DroppedRecords::default();
    let mut out = Vec::with_capacity(raw.len());
    for r in raw {
        let Some(year) = r.year else {
            dropped.unparseable_year += 1;
            continue;
        };
        match (
            table.resolve(NodeType::Mirna, &r.mirna),
            table.resolve(NodeType::Disease, &r.disease),
        ) {
            (Some(mirna), Some(disease)) => out.push(MdaRecord {
                mirna,
                disease,
                pmid: r.pmid.clone(),
                year,
            }),
            _ => dropped.unresolved_id += 1,
        }
    }
    if dropped.unparseable_year + dropped.unresolved_id > 0 {
        log::warn!(
            "dropped {} MDA records without a year and {} with unknown IDs",
            dropped.unparseable_year,
            dropped.unresolved_id
        );
    }
    (out, dropped)
}

pub fn load_mda(path: &Path, table: &NodeTable) -> Result<(Vec<MdaRecord>, DroppedRecords)> {
    Ok(resolve_records(&load_mda_raw(path)?, table))
}

/// Positive pairs per partition, each sorted ascending.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TimeSplit {
    pub train: Vec<(usize, usize)>,
    pub val: Vec<(usize, usize)>,
    pub test: Vec<(usize, usize)>,
}

impl TimeSplit {
    pub fn all(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.train
            .iter()
            .chain(&self.val)
            .chain(&self.test)
            .copied()
    }
}

/// Earliest year per unique pair decides the partition: before `y1` is
/// train, `y1..=y2` is validation, after `y2` is test.
pub fn split_by_time(records: &[MdaRecord], y1: i32, y2: i32) -> Result<TimeSplit> {
    if records.is_empty() {
        return Err(Error::Invalid("no MDA records to split".into()));
    }
    if y1 > y2 {
        return Err(Error::Config(format!("year boundaries {y1} > {y2}")));
    }
    let mut earliest: BTreeMap<(usize, usize), i32> = BTreeMap::new();
    for r in records {
        earliest
            .entry((r.mirna, r.disease))
            .and_modify(|y| *y = (*y).min(r.year))
            .or_insert(r.year);
    }
    let mut split = TimeSplit::default();
    for (pair, year) in earliest {
        let part = if year < y1 {
            &mut split.train
        } else if year <= y2 {
            &mut split.val
        } else {
            &mut split.test
        };
        part.push(pair);
    }
    Ok(split)
}
