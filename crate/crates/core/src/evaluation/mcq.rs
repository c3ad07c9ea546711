use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::answer::parse_answer;
use super::mask::{mask_sample, ModalityMask};
use super::prompt::{render_item, McqTemplate};
use crate::curation::{McqItem, MultimodalSample};
use crate::model::{FusionModel, ModalInputs};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Decode {
    Greedy,
    Sample { temperature: f64, seed: u64 },
}

/// Anything that answers a rendered prompt about a sample.
pub trait AnswerModel {
    fn answer(&self, sample: &MultimodalSample, prompt: &str, decode: Decode) -> Result<String>;
}

/// Generation budget used by the fusion model's [`AnswerModel`] impl.
pub const MAX_ANSWER_TOKENS: usize = 8;

impl AnswerModel for FusionModel {
    fn answer(&self, sample: &MultimodalSample, prompt: &str, decode: Decode) -> Result<String> {
        let inputs = ModalInputs {
            ts: sample.ts.as_ref().map(|w| &w.values),
            video: sample.video.as_ref(),
            audio: sample.audio.as_ref(),
        };
        let prepared = self.prepare_text(prompt, inputs)?;
        let budget = MAX_ANSWER_TOKENS.min(self.config.max_seq_len.saturating_sub(prepared.context.rows));
        match decode {
            Decode::Greedy => self.decode_greedy(&prepared, budget),
            Decode::Sample { temperature, seed } => self.sample(&prepared, temperature, seed, budget),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub template: McqTemplate,
    /// Question text; empty means each sample's own query.
    pub question: String,
    pub answer_prefix: Option<String>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { template: McqTemplate::default(), question: String::new(), answer_prefix: None }
    }
}

impl EvalConfig {
    pub fn prompt(&self, item: &McqItem) -> String {
        render_item(item, &self.template, &self.question)
    }

    pub fn parse(&self, raw: &str) -> Option<char> {
        parse_answer(raw, self.answer_prefix.as_deref())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub item_id: String,
    pub predicted_letter: Option<char>,
    pub key: char,
    pub correct: bool,
    pub raw_text: String,
}

/// Greedy MCQ evaluation under `mask`; records come back sorted by item id.
pub fn eval_mcq<M: AnswerModel + ?Sized>(
    model: &M,
    items: &[McqItem],
    mask: ModalityMask,
    cfg: &EvalConfig,
) -> Result<(f64, Vec<EvalRecord>)> {
    if items.is_empty() {
        return Err(Error::EmptyItemSet);
    }
    let mut records = Vec::with_capacity(items.len());
    for item in items {
        let masked = McqItem { sample: mask_sample(&item.sample, mask)?, ..item.clone() };
        let raw = model.answer(&masked.sample, &cfg.prompt(&masked), Decode::Greedy)?;
        let predicted = cfg.parse(&raw);
        let key = item.answer_letter();
        records.push(EvalRecord {
            item_id: item.sample.id.clone(),
            predicted_letter: predicted,
            key,
            correct: predicted == Some(key),
            raw_text: raw,
        });
    }
    records.sort_by(|a, b| a.item_id.cmp(&b.item_id));
    let correct = records.iter().filter(|r| r.correct).count();
    Ok((correct as f64 / records.len() as f64, records))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub modalities: String,
    pub video: bool,
    pub audio: bool,
    pub ts: bool,
    pub accuracy: f64,
    pub correct: usize,
    pub total: usize,
    #[serde(skip)]
    pub records: Vec<EvalRecord>,
}

impl AblationRow {
    pub fn mask(&self) -> ModalityMask {
        ModalityMask { use_video: self.video, use_audio: self.audio, use_ts: self.ts }
    }
}

/// Evaluates all seven non-empty masks on the same tri-modal items.
pub fn ablation_grid<M: AnswerModel + ?Sized>(model: &M, items: &[McqItem], cfg: &EvalConfig) -> Result<Vec<AblationRow>> {
    if let Some(i) = items.iter().find(|i| i.sample.video.is_none() || i.sample.audio.is_none() || i.sample.ts.is_none()) {
        return Err(Error::InvalidSample { id: i.sample.id.clone(), reason: "ablation needs video, audio and time-series".into() });
    }
    ModalityMask::GRID
        .iter()
        .map(|&mask| {
            let (accuracy, records) = eval_mcq(model, items, mask, cfg)?;
            Ok(AblationRow {
                modalities: mask.label(),
                video: mask.use_video,
                audio: mask.use_audio,
                ts: mask.use_ts,
                accuracy,
                correct: records.iter().filter(|r| r.correct).count(),
                total: records.len(),
                records,
            })
        })
        .collect()
}

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut s = String::from("modalities,video,audio,ts,accuracy,correct,total\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{},{},{}", r.modalities, r.video, r.audio, r.ts, r.accuracy, r.correct, r.total);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::biosignal::TsWindow;
    use crate::curation::build_mcq;
    use crate::model::FrameStack;
    use crate::taxonomy::IntentTaxonomy;
    use crate::tensor::Mat;

    struct AlwaysA;

    impl AnswerModel for AlwaysA {
        fn answer(&self, _: &MultimodalSample, _: &str, _: Decode) -> Result<String> {
            Ok("A".into())
        }
    }

    /// Reads the key leaked into the question as `key=X`.
    struct Copier;

    impl AnswerModel for Copier {
        fn answer(&self, _: &MultimodalSample, prompt: &str, _: Decode) -> Result<String> {
            let at = prompt.find("key=").unwrap();
            Ok(prompt[at + 4..at + 5].to_string())
        }
    }

    fn items(n: usize) -> Vec<McqItem> {
        let tax = IntentTaxonomy::default_taxonomy();
        (0..n)
            .map(|i| {
                let s = MultimodalSample {
                    video: Some(FrameStack::new(1, 1, 1, 1, vec![0.5]).unwrap()),
                    audio: Some(Mat::zeros(1, 2)),
                    ts: Some(TsWindow::new(Mat::zeros(5, 3), "c", "s", 0.0)),
                    label: Some(tax.labels()[i % 30].clone()),
                    ..MultimodalSample::new(&format!("i{i:04}"), "s")
                };
                build_mcq(&s, &tax, 11).unwrap()
            })
            .collect()
    }

    #[test]
    fn always_a_scores_near_chance() {
        let it = items(1000);
        let (acc, records) = eval_mcq(&AlwaysA, &it, ModalityMask::FULL, &EvalConfig::default()).unwrap();
        let keys_a = it.iter().filter(|i| i.answer_index == 0).count() as f64 / 1000.0;
        assert_eq!(acc, keys_a);
        // binomial(1000, 0.25): sd ≈ 0.0137, so ±0.03 is beyond 2 sd
        assert!((acc - 0.25).abs() <= 0.03, "{acc}");
        assert!(records.windows(2).all(|w| w[0].item_id < w[1].item_id));
    }

    #[test]
    fn leaked_key_is_copied() {
        let it: Vec<McqItem> = items(40)
            .into_iter()
            .map(|mut i| {
                i.sample.text_query = format!("key={}", i.answer_letter());
                i
            })
            .collect();
        let (acc, _) = eval_mcq(&Copier, &it, ModalityMask::FULL, &EvalConfig::default()).unwrap();
        assert_eq!(acc, 1.0);
    }

    #[test]
    fn empty_set_and_permutation_invariance() {
        assert!(matches!(eval_mcq(&AlwaysA, &[], ModalityMask::FULL, &EvalConfig::default()), Err(Error::EmptyItemSet)));
        let it = items(50);
        let mut rev = it.clone();
        rev.reverse();
        let cfg = EvalConfig::default();
        assert_eq!(eval_mcq(&AlwaysA, &it, ModalityMask::FULL, &cfg).unwrap(), eval_mcq(&AlwaysA, &rev, ModalityMask::FULL, &cfg).unwrap());
    }

    #[test]
    fn grid_has_seven_rows_over_shared_items() {
        let it = items(20);
        let rows = ablation_grid(&AlwaysA, &it, &EvalConfig::default()).unwrap();
        assert_eq!(rows.len(), 7);
        let ids = |r: &AblationRow| r.records.iter().map(|x| x.item_id.clone()).collect::<Vec<_>>();
        for r in &rows {
            assert_eq!(ids(r), ids(&rows[6]));
        }
        assert_eq!(ablation_csv(&rows).lines().count(), 8);
        let mut partial = it.clone();
        partial[3].sample.audio = None;
        assert!(ablation_grid(&AlwaysA, &partial, &EvalConfig::default()).is_err());
    }
}
