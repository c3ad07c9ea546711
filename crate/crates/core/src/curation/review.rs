use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::sample::{normalize_scores, MultimodalSample};
use crate::seed;
use crate::taxonomy::IntentTaxonomy;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReviewVerdict {
    Accept,
    Reject,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewEntry {
    pub id: String,
    pub verdict: ReviewVerdict,
    pub group: u8,
}

/// Parses a JSON Lines review file. Blank lines are skipped.
pub fn parse_review(text: &str, path: &Path) -> Result<Vec<ReviewEntry>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse { path: path.to_path_buf(), line: i + 1, msg };
        let entry: ReviewEntry = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        if !(1..=3).contains(&entry.group) {
            return Err(err(format!("review group {} not in 1..=3", entry.group)));
        }
        if !seen.insert(entry.id.clone()) {
            return Err(err(format!("duplicate review id `{}`", entry.id)));
        }
        out.push(entry);
    }
    Ok(out)
}

/// Drops rejected items. Items without a review entry are kept; entries naming
/// ids absent from `items` are an error.
pub fn apply_review(items: Vec<MultimodalSample>, review: &[ReviewEntry]) -> Result<Vec<MultimodalSample>> {
    let known: HashSet<&str> = items.iter().map(|s| s.id.as_str()).collect();
    if let Some(e) = review.iter().find(|e| !known.contains(e.id.as_str())) {
        return Err(Error::InvalidSample { id: e.id.clone(), reason: "review entry names an unknown id".into() });
    }
    let verdicts: HashMap<&str, ReviewVerdict> = review.iter().map(|e| (e.id.as_str(), e.verdict)).collect();
    Ok(items
        .into_iter()
        .filter(|s| verdicts.get(s.id.as_str()) != Some(&ReviewVerdict::Reject))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub caption: String,
    pub label: Option<String>,
    pub distribution: Option<Vec<f64>>,
}

/// Captioning/labelling backend for curation. Learned models plug in here.
pub trait Annotator {
    fn annotate(&self, sample: &MultimodalSample) -> Result<Annotation>;
}

/// Deterministic stand-in: keeps an existing label, otherwise scores every
/// taxonomy label from a hash of the sample id and normalises the scores.
pub struct RuleBasedAnnotator {
    pub taxonomy: IntentTaxonomy,
    pub seed: u64,
}

impl Annotator for RuleBasedAnnotator {
    fn annotate(&self, sample: &MultimodalSample) -> Result<Annotation> {
        let mut present = Vec::new();
        if sample.video.is_some() {
            present.push("video");
        }
        if sample.audio.is_some() {
            present.push("audio");
        }
        if sample.ts.is_some() {
            present.push("biometrics");
        }
        let caption = format!("clip {} with {}", sample.id, if present.is_empty() { "text".into() } else { present.join(", ") });
        if let Some(l) = &sample.label {
            return Ok(Annotation { caption, label: Some(l.name.clone()), distribution: None });
        }
        let scores: Vec<f64> = (0..self.taxonomy.len())
            .map(|i| 1.0 + (seed::derive_item(self.seed, &sample.id, &i.to_string()) % 10) as f64)
            .collect();
        let distribution = normalize_scores(&scores)?;
        let best = crate::tensor::argmax(&distribution);
        Ok(Annotation {
            caption,
            label: Some(self.taxonomy.labels()[best].name.clone()),
            distribution: Some(distribution),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn items(n: usize) -> Vec<MultimodalSample> {
        (0..n)
            .map(|i| MultimodalSample { text_query: "q".into(), ..MultimodalSample::new(&format!("m{i}"), "s") })
            .collect()
    }

    fn review_text(reject: usize, total: usize) -> String {
        (0..total)
            .map(|i| {
                let v = if i < reject { "reject" } else { "accept" };
                format!("{{\"id\":\"m{i}\",\"verdict\":\"{v}\",\"group\":{}}}\n", 1 + i % 3)
            })
            .collect()
    }

    #[test]
    fn rejecting_118_of_645_keeps_527() {
        let r = parse_review(&review_text(118, 645), Path::new("r.jsonl")).unwrap();
        assert_eq!(apply_review(items(645), &r).unwrap().len(), 527);
        assert_eq!(apply_review(items(645), &[]).unwrap().len(), 645);
    }

    #[test]
    fn bad_review_files() {
        let p = Path::new("r.jsonl");
        assert!(matches!(parse_review("{\"id\":\"a\",\"verdict\":\"maybe\",\"group\":1}", p), Err(Error::Parse { line: 1, .. })));
        assert!(parse_review("{\"id\":\"a\",\"verdict\":\"accept\",\"group\":4}", p).is_err());
        let r = parse_review("{\"id\":\"zz\",\"verdict\":\"reject\",\"group\":1}", p).unwrap();
        assert!(apply_review(items(3), &r).is_err());
    }

    #[test]
    fn stub_annotator_is_deterministic() {
        let a = RuleBasedAnnotator { taxonomy: IntentTaxonomy::default_taxonomy(), seed: 3 };
        let s = &items(1)[0];
        let x = a.annotate(s).unwrap();
        assert_eq!(x, a.annotate(s).unwrap());
        let d = x.distribution.unwrap();
        assert_eq!(d.len(), 30);
        assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
