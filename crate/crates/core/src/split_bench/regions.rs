use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Known-degree band of one endpoint.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Band {
    /// No known association.
    Zero,
    /// Between 1 and the median, inclusive.
    Less,
    /// Above the median.
    More,
}

impl Band {
    pub const ALL: [Band; 3] = [Band::Zero, Band::Less, Band::More];

    pub fn as_str(self) -> &'static str {
        match self {
            Band::Zero => "0",
            Band::Less => "L",
            Band::More => "M",
        }
    }
}

/// Nine-way tag of a pair, miRNA band first (`M-0`, `L-L`, ...).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Region {
    pub mirna: Band,
    pub disease: Band,
}

impl Region {
    pub fn all() -> impl Iterator<Item = Region> {
        Band::ALL.into_iter().flat_map(|m| {
            Band::ALL.into_iter().map(move |d| Region {
                mirna: m,
                disease: d,
            })
        })
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.mirna.as_str(), self.disease.as_str())
    }
}

impl FromStr for Region {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let band = |b: &str| {
            Band::ALL
                .into_iter()
                .find(|x| x.as_str() == b)
                .ok_or_else(|| Error::Invalid(format!("bad region tag `{s}`")))
        };
        let (m, d) = s
            .split_once('-')
            .ok_or_else(|| Error::Invalid(format!("bad region tag `{s}`")))?;
        Ok(Region {
            mirna: band(m)?,
            disease: band(d)?,
        })
    }
}

impl Serialize for Region {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Region {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Median over nodes with degree ≥ 1; for an even count, the floored mean
/// of the two middle values.
pub fn known_degree_median(degrees: &[usize]) -> usize {
    let mut nz: Vec<usize> = degrees.iter().copied().filter(|&d| d > 0).collect();
    if nz.is_empty() {
        return 0;
    }
    nz.sort_unstable();
    let n = nz.len();
    if n % 2 == 1 {
        nz[n / 2]
    } else {
        (nz[n / 2 - 1] + nz[n / 2]) / 2
    }
}

/// Known degrees from supervision positives and the resulting bands.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegionMap {
    pub mirna_degree: Vec<usize>,
    pub disease_degree: Vec<usize>,
    pub mirna_median: usize,
    pub disease_median: usize,
}

impl RegionMap {
    /// `known` should be the train and validation positives.
    pub fn from_positives(known: &[(usize, usize)], n_mirna: usize, n_disease: usize) -> Self {
        let mut mirna_degree = vec![0; n_mirna];
        let mut disease_degree = vec![0; n_disease];
        for &(m, d) in known {
            mirna_degree[m] += 1;
            disease_degree[d] += 1;
        }
        Self {
            mirna_median: known_degree_median(&mirna_degree),
            disease_median: known_degree_median(&disease_degree),
            mirna_degree,
            disease_degree,
        }
    }

    fn band(degree: usize, median: usize) -> Band {
        match degree {
            0 => Band::Zero,
            d if d <= median => Band::Less,
            _ => Band::More,
        }
    }

    pub fn classify(&self, (m, d): (usize, usize)) -> Region {
        Region {
            mirna: Self::band(self.mirna_degree[m], self.mirna_median),
            disease: Self::band(self.disease_degree[d], self.disease_median),
        }
    }
}
