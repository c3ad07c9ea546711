use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use crate::seed;
use crate::{Error, Result};

pub const DEFAULT_FRACTIONS: [f64; 3] = [0.70, 0.10, 0.20];

/// Index lists for the train, validation and test partitions, each ascending.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    pub fn parts(&self) -> [&[usize]; 3] {
        [&self.train, &self.val, &self.test]
    }
}

/// Splits `n` items into parts of the given fractions by largest-remainder
/// rounding; ties go to the earlier part.
pub fn largest_remainder(n: usize, fractions: &[f64]) -> Vec<usize> {
    let quotas: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Per-class stratified split. `items` pairs an id (for diagnostics) with its
/// label; shuffling within each class is seeded by `(seed, class)`.
pub fn stratified_split<K: Ord + Clone + std::fmt::Debug>(
    items: &[(&str, Option<K>)],
    fractions: [f64; 3],
    seed: u64,
) -> Result<Split> {
    if fractions.iter().any(|f| !(*f >= 0.0)) || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("split fractions {fractions:?} must be nonnegative and sum to 1")));
    }
    let mut classes: BTreeMap<K, Vec<usize>> = BTreeMap::new();
    for (i, (id, label)) in items.iter().enumerate() {
        let label = label.clone().ok_or_else(|| Error::UnlabeledItem(id.to_string()))?;
        classes.entry(label).or_default().push(i);
    }
    let mut split = Split::default();
    for (class, mut members) in classes {
        members.shuffle(&mut seed::rng(seed, &format!("split/{class:?}")));
        let counts = largest_remainder(members.len(), &fractions);
        let mut rest = &members[..];
        for (part, c) in [&mut split.train, &mut split.val, &mut split.test].into_iter().zip(counts) {
            part.extend_from_slice(&rest[..c]);
            rest = &rest[c..];
        }
    }
    split.train.sort_unstable();
    split.val.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}
