//! The labeled benchmark: time-based split of literature-backed
//! associations, negative sampling and the nine known-degree regions.

mod manifest;
mod negatives;
mod records;
mod regions;

pub use manifest::{Partition, RegionSummary, SplitConfig, SplitManifest, MANIFEST_VERSION};
pub use negatives::sample_negatives;
pub use records::{
    load_mda, load_mda_raw, resolve_records, split_by_time, DroppedRecords, MdaRecord,
    RawMdaRecord, TimeSplit, MDA_HEADER,
};
pub use regions::{known_degree_median, Band, Region, RegionMap};
