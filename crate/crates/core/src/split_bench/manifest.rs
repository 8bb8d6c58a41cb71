use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::negatives::sample_negatives;
use super::records::{split_by_time, DroppedRecords, MdaRecord};
use super::regions::{Region, RegionMap};
use crate::error::{Error, Result};
use crate::numerics::rng::seeded;

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub y1: i32,
    pub y2: i32,
    pub seed: u64,
    /// Negatives per positive in the test partition.
    pub negative_ratio_test: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            y1: 2019,
            y2: 2020,
            seed: 0,
            negative_ratio_test: 100,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub positives: Vec<(usize, usize)>,
    pub negatives: Vec<(usize, usize)>,
}

impl Partition {
    pub fn len(&self) -> usize {
        self.positives.len() + self.negatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Positives (label 1) followed by negatives (label 0).
    pub fn labeled(&self) -> (Vec<(usize, usize)>, Vec<f64>) {
        let pairs = self
            .positives
            .iter()
            .chain(&self.negatives)
            .copied()
            .collect();
        let labels = std::iter::repeat_n(1.0, self.positives.len())
            .chain(std::iter::repeat_n(0.0, self.negatives.len()))
            .collect();
        (pairs, labels)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionSummary {
    pub mirna_median: usize,
    pub disease_median: usize,
    /// Tags of the test positives then the test negatives, in order.
    pub test_tags: Vec<Region>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub version: u32,
    pub config: SplitConfig,
    /// miRNA, disease and PCG counts of the node table used.
    pub node_counts: [usize; 3],
    pub node_fingerprint: String,
    pub dropped: DroppedRecords,
    pub train: Partition,
    pub val: Partition,
    /// Test positives with `negative_ratio_test` negatives each. The
    /// balanced test set is the positives plus the first `|positives|`
    /// negatives.
    pub test: Partition,
    pub regions: RegionSummary,
}

impl SplitManifest {
    /// Builds the benchmark. Negatives for all three partitions are drawn
    /// jointly, without replacement, from pairs with no verified evidence
    /// in any partition.
    pub fn build(
        records: &[MdaRecord],
        node_counts: [usize; 3],
        node_fingerprint: String,
        dropped: DroppedRecords,
        config: SplitConfig,
    ) -> Result<Self> {
        let split = split_by_time(records, config.y1, config.y2)?;
        let verified: BTreeSet<(usize, usize)> = split.all().collect();
        let (n_train, n_val) = (split.train.len(), split.val.len());
        let n_test = split.test.len() * config.negative_ratio_test;
        let mut rng = seeded(config.seed);
        let mut negatives = sample_negatives(
            &verified,
            node_counts[0],
            node_counts[1],
            n_train + n_val + n_test,
            &mut rng,
        )?;
        let test_neg = negatives.split_off(n_train + n_val);
        let val_neg = negatives.split_off(n_train);
        let map = RegionMap::from_positives(
            &split
                .train
                .iter()
                .chain(&split.val)
                .copied()
                .collect::<Vec<_>>(),
            node_counts[0],
            node_counts[1],
        );
        let test_tags = split
            .test
            .iter()
            .chain(&test_neg)
            .map(|&p| map.classify(p))
            .collect();
        Ok(Self {
            version: MANIFEST_VERSION,
            config,
            node_counts,
            node_fingerprint,
            dropped,
            train: Partition {
                positives: split.train,
                negatives,
            },
            val: Partition {
                positives: split.val,
                negatives: val_neg,
            },
            test: Partition {
                positives: split.test,
                negatives: test_neg,
            },
            regions: RegionSummary {
                mirna_median: map.mirna_median,
                disease_median: map.disease_median,
                test_tags,
            },
        })
    }

    /// Every verified pair, any partition.
    pub fn verified(&self) -> BTreeSet<(usize, usize)> {
        self.train
            .positives
            .iter()
            .chain(&self.val.positives)
            .chain(&self.test.positives)
            .copied()
            .collect()
    }

    /// Train and validation positives, the basis of known degrees.
    pub fn known_positives(&self) -> Vec<(usize, usize)> {
        self.train
            .positives
            .iter()
            .chain(&self.val.positives)
            .copied()
            .collect()
    }

    pub fn region_map(&self) -> RegionMap {
        RegionMap::from_positives(
            &self.known_positives(),
            self.node_counts[0],
            self.node_counts[1],
        )
    }

    /// Test positives with one negative each.
    pub fn balanced_test(&self) -> Partition {
        let k = self.test.positives.len().min(self.test.negatives.len());
        Partition {
            positives: self.test.positives.clone(),
            negatives: self.test.negatives[..k].to_vec(),
        }
    }

    /// Checks the structural invariants: disjoint positive partitions,
    /// negatives outside every verified pair, no pair with both labels.
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for p in self
            .train
            .positives
            .iter()
            .chain(&self.val.positives)
            .chain(&self.test.positives)
        {
            if !seen.insert(*p) {
                return Err(Error::Invalid(format!("positive {p:?} in two partitions")));
            }
        }
        let mut negs = BTreeSet::new();
        for p in self
            .train
            .negatives
            .iter()
            .chain(&self.val.negatives)
            .chain(&self.test.negatives)
        {
            if seen.contains(p) {
                return Err(Error::Invalid(format!("negative {p:?} is a verified pair")));
            }
            if !negs.insert(*p) {
                return Err(Error::Invalid(format!("negative {p:?} drawn twice")));
            }
        }
        if self.regions.test_tags.len() != self.test.len() {
            return Err(Error::Invalid(
                "region tags do not cover the test partition".into(),
            ));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Self = serde_json::from_str(&text)?;
        if m.version != MANIFEST_VERSION {
            return Err(Error::Format(format!(
                "unsupported manifest version {}",
                m.version
            )));
        }
        m.validate()?;
        Ok(m)
    }
}
