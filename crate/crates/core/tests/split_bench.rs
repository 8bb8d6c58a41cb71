use std::collections::BTreeSet;

use hetlink_core::split_bench::{
    load_mda, split_by_time, MdaRecord, RegionMap, SplitConfig, SplitManifest,
};
use hetlink_core::synthetic::node_table;
use proptest::prelude::*;

const MDA: &str = "mirna_id\tdisease_id\tpmid\tyear
m0\td0\t1\t2016
m0\td0\t2\t2021
m1\td2\t3\t2019
m2\td1\t4\t2020
m3\td3\t5\t2022
m1\td1\t6\tn/a
m9\td0\t7\t2015
m2\td9\t8\t2018
m3\td0\t9\t
";

#[test]
fn loads_records_and_counts_drops() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("mda.tsv");
    std::fs::write(&path, MDA).unwrap();
    let table = node_table([4, 4, 2]);
    let (records, dropped) = load_mda(&path, &table).unwrap();
    assert_eq!(records.len(), 5);
    assert_eq!(dropped.unparseable_year, 2);
    assert_eq!(dropped.unresolved_id, 2);

    let config = SplitConfig {
        negative_ratio_test: 3,
        seed: 9,
        ..SplitConfig::default()
    };
    let m =
        SplitManifest::build(&records, [4, 4, 2], table.fingerprint(), dropped, config).unwrap();
    assert_eq!(m.train.positives, vec![(0, 0)]);
    assert_eq!(m.val.positives, vec![(1, 2), (2, 1)]);
    assert_eq!(m.test.positives, vec![(3, 3)]);
    assert_eq!(m.balanced_test().negatives, m.test.negatives[..1].to_vec());

    let saved = tmp.path().join("manifest.json");
    m.save(&saved).unwrap();
    assert_eq!(SplitManifest::load(&saved).unwrap(), m);

    // A manifest whose negatives overlap the positives is rejected on load.
    let mut broken = m.clone();
    broken.train.negatives[0] = (0, 0);
    std::fs::write(&saved, broken.to_json().unwrap()).unwrap();
    assert!(SplitManifest::load(&saved).is_err());
}

fn records(raw: &[(usize, usize, i32)]) -> Vec<MdaRecord> {
    raw.iter()
        .map(|&(mirna, disease, year)| MdaRecord {
            mirna,
            disease,
            pmid: String::new(),
            year,
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn boundaries_follow_earliest_year(
        raw in prop::collection::vec((0usize..6, 0usize..6, 2015i32..2024), 1..40),
        y1 in 2016i32..2021, span in 0i32..3,
    ) {
        let y2 = y1 + span;
        let split = split_by_time(&records(&raw), y1, y2).unwrap();
        let unique: BTreeSet<_> = raw.iter().map(|&(m, d, _)| (m, d)).collect();
        prop_assert_eq!(split.all().count(), unique.len());
        for &(m, d) in &unique {
            let first = raw.iter().filter(|r| (r.0, r.1) == (m, d)).map(|r| r.2).min().unwrap();
            let part = if split.train.contains(&(m, d)) {
                first < y1
            } else if split.val.contains(&(m, d)) {
                (y1..=y2).contains(&first)
            } else {
                split.test.contains(&(m, d)) && first > y2
            };
            prop_assert!(part, "pair ({}, {}) first seen {}", m, d, first);
        }
    }

    #[test]
    fn regions_use_known_degree_medians(
        raw in prop::collection::vec((0usize..8, 0usize..8), 1..30),
    ) {
        let known: Vec<_> = raw.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
        let map = RegionMap::from_positives(&known, 8, 8);
        let degree = |f: fn(&(usize, usize)) -> usize| {
            let mut deg = vec![0usize; 8];
            for p in &known {
                deg[f(p)] += 1;
            }
            deg
        };
        let median = |deg: &[usize]| {
            let mut nz: Vec<usize> = deg.iter().copied().filter(|&x| x > 0).collect();
            nz.sort();
            let n = nz.len();
            if n % 2 == 1 { nz[n / 2] } else { (nz[n / 2 - 1] + nz[n / 2]) / 2 }
        };
        let (dm, dd) = (degree(|p| p.0), degree(|p| p.1));
        prop_assert_eq!(map.mirna_median, median(&dm));
        prop_assert_eq!(map.disease_median, median(&dd));
        let band = |deg: usize, med: usize| match deg {
            0 => "0",
            x if x <= med => "L",
            _ => "M",
        };
        for (m, &degm) in dm.iter().enumerate() {
            for (d, &degd) in dd.iter().enumerate() {
                let r = map.classify((m, d));
                prop_assert_eq!(r.mirna.as_str(), band(degm, map.mirna_median));
                prop_assert_eq!(r.disease.as_str(), band(degd, map.disease_median));
            }
        }
    }
}
