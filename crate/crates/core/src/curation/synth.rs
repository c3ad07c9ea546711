use std::collections::HashSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use super::sample::{McqItem, MultimodalSample};
use crate::seed;
use crate::taxonomy::IntentTaxonomy;
use crate::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MatchReport {
    pub merged: usize,
    /// AV samples without a same-label partner from another session.
    pub skipped: usize,
    pub skipped_ids: Vec<String>,
}

/// Pairs every AV sample with a uniformly chosen same-label TS sample from a
/// different session. Choices depend only on `(seed, av.id)`.
pub fn synthesize_matched(
    av_pool: &[MultimodalSample],
    ts_pool: &[MultimodalSample],
    seed: u64,
) -> (Vec<MultimodalSample>, MatchReport) {
    let mut out = Vec::new();
    let mut report = MatchReport::default();
    for av in av_pool {
        let eligible: Vec<&MultimodalSample> = ts_pool
            .iter()
            .filter(|t| t.ts.is_some() && t.label_name().is_some() && t.label_name() == av.label_name())
            .filter(|t| t.session_id != av.session_id)
            .collect();
        let mut rng = seed::rng_from(seed::derive_item(seed, "match", &av.id));
        match eligible.choose(&mut rng) {
            Some(ts) => {
                let mut m = av.clone();
                m.id = format!("{}+{}", av.id, ts.id);
                m.ts = ts.ts.clone();
                m.ts_label = ts.label.clone();
                out.push(m);
            }
            None => {
                report.skipped += 1;
                report.skipped_ids.push(av.id.clone());
            }
        }
    }
    report.merged = out.len();
    (out, report)
}

/// Shuffles the label and three distinct uniformly drawn distractors into four
/// options. Choices depend only on `(seed, sample.id)`.
pub fn build_mcq(sample: &MultimodalSample, taxonomy: &IntentTaxonomy, seed: u64) -> Result<McqItem> {
    if taxonomy.len() < 4 {
        return Err(Error::TaxonomyTooSmall(taxonomy.len()));
    }
    let label = sample
        .label
        .as_ref()
        .ok_or_else(|| Error::InvalidSample { id: sample.id.clone(), reason: "unlabelled".into() })?;
    let label = taxonomy.parse_label(&label.name)?.clone();
    let mut rng = seed::rng_from(seed::derive_item(seed, "mcq", &sample.id));
    let others: Vec<_> = taxonomy.labels().iter().filter(|l| l.name != label.name).collect();
    let mut options: Vec<_> = others.choose_multiple(&mut rng, 3).map(|l| (*l).clone()).collect();
    options.push(label.clone());
    options.shuffle(&mut rng);
    let answer_index = options.iter().position(|o| o.name == label.name).expect("label is an option");
    let options: [_; 4] = options.try_into().expect("four options");
    Ok(McqItem { sample: MultimodalSample { label: Some(label), ..sample.clone() }, options, answer_index })
}

/// `n` congruent items drawn from the matched pool and `n` conflict items whose
/// TS window comes from a sample with a different label.
pub fn build_conflict_sets(
    matched_pool: &[MultimodalSample],
    ts_pool: &[MultimodalSample],
    n_per_group: usize,
    seed: u64,
) -> Result<(Vec<MultimodalSample>, Vec<MultimodalSample>)> {
    if n_per_group == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    let insufficient = |group: &str, available: usize| Error::InsufficientPool {
        group: group.to_string(),
        needed: n_per_group,
        available,
    };
    let labelled: Vec<&MultimodalSample> = matched_pool.iter().filter(|m| m.label.is_some()).collect();
    if labelled.len() < n_per_group {
        return Err(insufficient("congruent", labelled.len()));
    }
    let ts_labels: HashSet<&str> = ts_pool.iter().filter(|t| t.ts.is_some()).filter_map(|t| t.label_name()).collect();
    if ts_labels.len() < 2 {
        return Err(insufficient("conflict", 0));
    }
    let mut rng = seed::rng(seed, "conflict-sets");
    let congruent: Vec<MultimodalSample> =
        labelled.choose_multiple(&mut rng, n_per_group).map(|m| (*m).clone()).collect();

    let mismatched = |av: &MultimodalSample| -> Vec<&MultimodalSample> {
        ts_pool
            .iter()
            .filter(|t| t.ts.is_some() && t.label_name().is_some() && t.label_name() != av.label_name())
            .collect()
    };
    let eligible: Vec<&MultimodalSample> = labelled.iter().copied().filter(|m| !mismatched(m).is_empty()).collect();
    if eligible.len() < n_per_group {
        return Err(insufficient("conflict", eligible.len()));
    }
    let mut conflict = Vec::with_capacity(n_per_group);
    for av in eligible.choose_multiple(&mut rng, n_per_group) {
        let partners = mismatched(av);
        let ts = partners[rng.random_range(0..partners.len())];
        let mut c = (*av).clone();
        let av_id = av.id.split('+').next().unwrap_or(&av.id);
        c.id = format!("conflict:{av_id}+{}", ts.id);
        c.ts = ts.ts.clone();
        c.ts_label = ts.label.clone();
        conflict.push(c);
    }
    Ok((congruent, conflict))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::biosignal::TsWindow;
    use crate::taxonomy::IntentLabel;
    use crate::tensor::Mat;

    fn label(tax: &IntentTaxonomy, n: &str) -> Option<IntentLabel> {
        Some(tax.parse_label(n).unwrap().clone())
    }

    fn av(tax: &IntentTaxonomy, id: &str, session: &str, l: &str) -> MultimodalSample {
        MultimodalSample { label: label(tax, l), text_query: "q".into(), ..MultimodalSample::new(id, session) }
    }

    fn ts(tax: &IntentTaxonomy, id: &str, session: &str, l: &str) -> MultimodalSample {
        MultimodalSample {
            label: label(tax, l),
            ts: Some(TsWindow::new(Mat::zeros(5, 3), "cat", session, 0.0)),
            ..MultimodalSample::new(id, session)
        }
    }

    #[test]
    fn single_partner_and_same_session_skip() {
        let tax = IntentTaxonomy::default_taxonomy();
        let (m, r) = synthesize_matched(&[av(&tax, "v1", "s1", "Walk")], &[ts(&tax, "t1", "s2", "Walk")], 0);
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].ts_label.as_ref().unwrap().name, "Walk");
        assert!(m[0].ts.is_some());
        assert_eq!(r.skipped, 0);
        let (m, r) = synthesize_matched(&[av(&tax, "v2", "s1", "Run")], &[ts(&tax, "t2", "s1", "Run")], 0);
        assert!(m.is_empty());
        assert_eq!((r.skipped, r.skipped_ids[0].as_str()), (1, "v2"));
    }

    #[test]
    fn matched_count_equals_partner_oracle() {
        let tax = IntentTaxonomy::default_taxonomy();
        let names = ["Walk", "Run", "Rest", "Feed", "Groom"];
        let mut rng = seed::rng(4, "pools");
        let avs: Vec<_> = (0..100)
            .map(|i| av(&tax, &format!("v{i}"), &format!("s{}", rng.random_range(0..6)), names[rng.random_range(0..5)]))
            .collect();
        let tss: Vec<_> = (0..100)
            .map(|i| ts(&tax, &format!("t{i}"), &format!("s{}", rng.random_range(0..6)), names[rng.random_range(0..5)]))
            .collect();
        let oracle = avs
            .iter()
            .filter(|a| tss.iter().any(|t| t.label == a.label && t.session_id != a.session_id))
            .count();
        let (m, r) = synthesize_matched(&avs, &tss, 9);
        assert_eq!(m.len(), oracle);
        assert_eq!(r.merged + r.skipped, 100);
        for x in &m {
            assert_eq!(x.ts_label, x.label);
        }
        assert_eq!(synthesize_matched(&avs, &tss, 9).0, m);
    }

    #[test]
    fn four_label_taxonomy_uses_every_label() {
        let tax = IntentTaxonomy::from_pairs(&[("L0", ""), ("L1", ""), ("L2", ""), ("L3", "")]).unwrap();
        let s = MultimodalSample { label: label(&tax, "L0"), ..MultimodalSample::new("x", "s") };
        let item = build_mcq(&s, &tax, 5).unwrap();
        let mut names: Vec<_> = item.options.iter().map(|o| o.name.clone()).collect();
        names.sort();
        assert_eq!(names, vec!["L0", "L1", "L2", "L3"]);
        assert_eq!(item.options[item.answer_index].name, "L0");
        item.validate().unwrap();
        assert_eq!(build_mcq(&s, &tax, 5).unwrap(), item);
        let small = IntentTaxonomy::from_pairs(&[("a", ""), ("b", ""), ("c", "")]).unwrap();
        let s3 = MultimodalSample { label: label(&small, "a"), ..MultimodalSample::new("x", "s") };
        assert!(matches!(build_mcq(&s3, &small, 0), Err(Error::TaxonomyTooSmall(3))));
    }

    #[test]
    fn distractor_frequencies_are_uniform() {
        let tax = IntentTaxonomy::default_taxonomy();
        let s = av(&tax, "x", "s", "Walk");
        let mut counts = std::collections::HashMap::new();
        let n = 10_000;
        for seed in 0..n {
            let item = build_mcq(&s, &tax, seed).unwrap();
            for (i, o) in item.options.iter().enumerate() {
                if i != item.answer_index {
                    *counts.entry(o.name.clone()).or_insert(0usize) += 1;
                }
            }
        }
        assert_eq!(counts.len(), 29);
        for (_, c) in counts {
            assert!((c as f64 / n as f64 - 3.0 / 29.0).abs() <= 0.01);
        }
    }

    #[test]
    fn conflict_sets() {
        let tax = IntentTaxonomy::default_taxonomy();
        let names = ["Walk", "Run", "Rest"];
        let matched: Vec<_> = (0..80).map(|i| ts(&tax, &format!("m{i}"), "s", names[i % 3])).collect();
        let pool: Vec<_> = (0..30).map(|i| ts(&tax, &format!("t{i}"), "s9", names[i % 3])).collect();
        let (c, x) = build_conflict_sets(&matched, &pool, 50, 1).unwrap();
        assert_eq!((c.len(), x.len()), (50, 50));
        for item in &x {
            assert_ne!(item.ts_label.as_ref().unwrap().name, item.label.as_ref().unwrap().name);
        }
        let ids: HashSet<_> = c.iter().map(|m| &m.id).collect();
        assert_eq!(ids.len(), 50);
        let (a, b) = build_conflict_sets(&matched, &pool, 0, 1).unwrap();
        assert!(a.is_empty() && b.is_empty());
        let single: Vec<_> = (0..10).map(|i| ts(&tax, &format!("t{i}"), "s", "Walk")).collect();
        match build_conflict_sets(&matched, &single, 5, 1) {
            Err(Error::InsufficientPool { group, .. }) => assert_eq!(group, "conflict"),
            other => panic!("{other:?}"),
        }
    }
}
