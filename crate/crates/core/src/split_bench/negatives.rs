use std::collections::{BTreeSet, HashSet};

use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::rng::SeededRng;

/// `count` distinct pairs drawn uniformly from the `n_mirna × n_disease`
/// grid minus `exclude`, in draw order.
///
/// Dense requests (over half the complement) enumerate the complement and
/// run a partial Fisher–Yates shuffle; sparse ones use rejection sampling.
pub fn sample_negatives(
    exclude: &BTreeSet<(usize, usize)>,
    n_mirna: usize,
    n_disease: usize,
    count: usize,
    rng: &mut SeededRng,
) -> Result<Vec<(usize, usize)>> {
    let grid = n_mirna * n_disease;
    let excluded = exclude
        .iter()
        .filter(|&&(m, d)| m < n_mirna && d < n_disease)
        .count();
    let available = grid - excluded;
    if count > available {
        return Err(Error::Invalid(format!(
            "{count} negatives requested but only {available} unverified pairs exist"
        )));
    }
    if count == 0 {
        return Ok(Vec::new());
    }
    if 2 * count > available {
        let mut pool: Vec<(usize, usize)> = (0..n_mirna)
            .flat_map(|m| (0..n_disease).map(move |d| (m, d)))
            .filter(|p| !exclude.contains(p))
            .collect();
        for i in 0..count {
            let j = rng.random_range(i..pool.len());
            pool.swap(i, j);
        }
        pool.truncate(count);
        return Ok(pool);
    }
    let mut seen = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let idx = rng.random_range(0..grid);
        let pair = (idx / n_disease, idx % n_disease);
        if !exclude.contains(&pair) && seen.insert(pair) {
            out.push(pair);
        }
    }
    Ok(out)
}
