use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::answer::match_class_name;
use super::mcq::{AnswerModel, Decode, EvalConfig};
use crate::curation::McqItem;
use crate::seed;
use crate::taxonomy::IntentTaxonomy;
use crate::{Error, Result};

pub const UNPARSEABLE: &str = "Unparseable";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UqGroup {
    Congruent,
    Conflict,
}

impl fmt::Display for UqGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UqGroup::Congruent => "congruent",
            UqGroup::Conflict => "conflict",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyRecord {
    pub item_id: String,
    pub draws: Vec<String>,
    pub class_counts: BTreeMap<String, usize>,
    pub entropy_bits: f64,
    pub group: UqGroup,
}

/// How a sampled draw is mapped to a class.
#[derive(Debug, Clone, PartialEq)]
pub enum Extraction {
    Letter,
    ClassName(IntentTaxonomy),
}

#[derive(Debug, Clone, PartialEq)]
pub struct UqConfig {
    pub draws: usize,
    pub temperature: f64,
    pub extraction: Extraction,
}

impl Default for UqConfig {
    fn default() -> Self {
        UqConfig { draws: 10, temperature: 0.7, extraction: Extraction::Letter }
    }
}

/// Shannon entropy in bits of the empirical distribution given by `counts`,
/// computed as `log2 N − (1/N) Σ c log2 c`.
pub fn entropy_bits(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let nf = n as f64;
    let s: f64 = counts.iter().filter(|&&c| c > 0).map(|&c| c as f64 * (c as f64).log2()).sum();
    (nf.log2() - s / nf).max(0.0)
}

pub fn bits_to_nats(bits: f64) -> f64 {
    bits * std::f64::consts::LN_2
}

/// Tallies classes (unparseable draws as [`UNPARSEABLE`]) and returns the
/// counts with their entropy, checked against the attainable maximum.
pub fn tally(classes: &[Option<String>]) -> Result<(BTreeMap<String, usize>, f64)> {
    let mut counts = BTreeMap::new();
    for c in classes {
        *counts.entry(c.clone().unwrap_or_else(|| UNPARSEABLE.to_string())).or_insert(0) += 1;
    }
    let values: Vec<usize> = counts.values().copied().collect();
    let h = entropy_bits(&values);
    let max = (counts.len().max(1) as f64).log2();
    if h > max + 1e-9 {
        return Err(Error::EntropyOutOfBounds { entropy: h, draws: classes.len() });
    }
    Ok((counts, h.min(max)))
}

/// Draws `cfg.draws` sampled answers with per-draw derived seeds and returns
/// their predictive entropy.
pub fn predictive_entropy<M: AnswerModel + ?Sized>(
    model: &M,
    item: &McqItem,
    group: UqGroup,
    eval: &EvalConfig,
    cfg: &UqConfig,
    seed: u64,
) -> Result<EntropyRecord> {
    if cfg.draws == 0 {
        return Err(Error::InvalidParameter("at least one draw is needed".into()));
    }
    if !(cfg.temperature > 0.0) {
        return Err(Error::NonPositiveTemperature(cfg.temperature));
    }
    let prompt = eval.prompt(item);
    let mut draws = Vec::with_capacity(cfg.draws);
    let mut classes = Vec::with_capacity(cfg.draws);
    for k in 0..cfg.draws {
        let s = seed::derive_item(seed, "uq-draw", &format!("{}/{k}", item.sample.id));
        let text = model.answer(&item.sample, &prompt, Decode::Sample { temperature: cfg.temperature, seed: s })?;
        classes.push(match &cfg.extraction {
            Extraction::Letter => eval.parse(&text).map(String::from),
            Extraction::ClassName(tax) => match_class_name(&text, tax),
        });
        draws.push(text);
    }
    let (class_counts, entropy_bits) = tally(&classes)?;
    Ok(EntropyRecord { item_id: item.sample.id.clone(), draws, class_counts, entropy_bits, group })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UqSummary {
    pub congruent_mean_bits: f64,
    pub conflict_mean_bits: f64,
    pub difference_bits: f64,
    pub congruent_mean_nats: f64,
    pub conflict_mean_nats: f64,
    /// P(conflict entropy > congruent entropy) over all pairs, ties counting half.
    pub separation: f64,
    pub n_congruent: usize,
    pub n_conflict: usize,
}

pub fn uq_report(congruent: &[EntropyRecord], conflict: &[EntropyRecord]) -> Result<UqSummary> {
    if congruent.is_empty() {
        return Err(Error::EmptyGroup("congruent".into()));
    }
    if conflict.is_empty() {
        return Err(Error::EmptyGroup("conflict".into()));
    }
    let mean = |r: &[EntropyRecord]| r.iter().map(|x| x.entropy_bits).sum::<f64>() / r.len() as f64;
    let (a, b) = (mean(congruent), mean(conflict));
    let mut wins = 0.0;
    for x in conflict {
        for y in congruent {
            wins += if x.entropy_bits > y.entropy_bits {
                1.0
            } else if x.entropy_bits == y.entropy_bits {
                0.5
            } else {
                0.0
            };
        }
    }
    Ok(UqSummary {
        congruent_mean_bits: a,
        conflict_mean_bits: b,
        difference_bits: b - a,
        congruent_mean_nats: bits_to_nats(a),
        conflict_mean_nats: bits_to_nats(b),
        separation: wins / (congruent.len() * conflict.len()) as f64,
        n_congruent: congruent.len(),
        n_conflict: conflict.len(),
    })
}
