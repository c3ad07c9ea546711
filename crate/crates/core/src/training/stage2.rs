use std::path::Path;

use super::optim::{fusion_slots, Slot};
use super::stage::{fit, holdout, Stage, StageConfig, TrainReport, Trainee};
use rand::seq::IndexedRandom;
use rand::Rng;

use crate::curation::{McqItem, LETTERS};
use crate::evaluation::{mask_sample, EvalConfig, ModalityMask};
use crate::model::transformer::lm_logits;
use crate::model::{checkpoint, FrameStack, FusionModel, FusionParams, ModalInputs, ProcessorOutput, Vocab};
use crate::seed;
use crate::tensor::{argmax, log_sum_exp, Mat};
use crate::{Error, Result};

/// A prompt (with modality placeholders), its response tokens (ending in
/// end-of-text) and the modality inputs the placeholders refer to.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage2Example {
    pub id: String,
    pub prompt_ids: Vec<usize>,
    pub response_ids: Vec<usize>,
    pub ts: Option<Mat>,
    pub video: Option<FrameStack>,
    pub audio: Option<Mat>,
}

impl Stage2Example {
    pub fn inputs(&self) -> ModalInputs<'_> {
        ModalInputs { ts: self.ts.as_ref(), video: self.video.as_ref(), audio: self.audio.as_ref() }
    }
}

/// Target text for an MCQ item: the answer's label, then its letter in
/// parentheses.
pub fn mcq_response(item: &McqItem) -> String {
    format!("{} ({})", item.options[item.answer_index].name, item.answer_letter())
}

/// Base vocabulary for MCQ prompts over `labels`: each label, the question and
/// every `label (letter)` option line as a single token.
pub fn mcq_vocab<S: AsRef<str>>(labels: &[S], question: &str) -> Vocab {
    let mut words: Vec<String> = labels.iter().map(|l| l.as_ref().to_string()).collect();
    words.push(question.to_string());
    for l in labels {
        words.extend(LETTERS.map(|x| format!("{} ({x})", l.as_ref())));
    }
    Vocab::base(&words)
}

/// Teacher-forcing examples from MCQ items. With probability
/// `1 - full_fraction` an item keeps only a uniformly chosen proper non-empty
/// subset of its modalities; the choice depends only on `(seed, item id)`.
pub fn mcq_examples(
    items: &[McqItem],
    vocab: &Vocab,
    eval: &EvalConfig,
    full_fraction: f64,
    seed: u64,
) -> Result<Vec<Stage2Example>> {
    items
        .iter()
        .map(|item| {
            let s = &item.sample;
            let present =
                ModalityMask { use_video: s.video.is_some(), use_audio: s.audio.is_some(), use_ts: s.ts.is_some() };
            let subsets: Vec<ModalityMask> = ModalityMask::GRID
                .into_iter()
                .filter(|m| *m != present)
                .filter(|m| (!m.use_video || present.use_video) && (!m.use_audio || present.use_audio) && (!m.use_ts || present.use_ts))
                .collect();
            let mut rng = seed::rng_from(seed::derive_item(seed, "mask-augment", &s.id));
            let reduced = match (rng.random::<f64>() < full_fraction, subsets.choose(&mut rng)) {
                (false, Some(m)) => McqItem { sample: mask_sample(s, *m)?, ..item.clone() },
                _ => item.clone(),
            };
            let mut response_ids = vocab.encode(&mcq_response(&reduced));
            response_ids.push(vocab.eot());
            let r = &reduced.sample;
            Ok(Stage2Example {
                id: s.id.clone(),
                prompt_ids: vocab.encode(&eval.prompt(&reduced)),
                response_ids,
                ts: r.ts.as_ref().map(|w| w.values.clone()),
                video: r.video.clone(),
                audio: r.audio.clone(),
            })
        })
        .collect()
}

/// Next-token target per position: set only where the next token belongs to
/// the response; query and slot positions carry none.
pub fn response_targets(proc: &ProcessorOutput, response_len: usize) -> Vec<Option<usize>> {
    let n = proc.len();
    let first = n - response_len;
    (0..n)
        .map(|i| (i + 1 >= first && i + 1 < n && !proc.is_slot(i)).then(|| proc.token_ids[i + 1]))
        .collect()
}

/// Mean cross-entropy over positions with a target, its gradient with respect
/// to every logit row (zero rows where no target), and the argmax hit count.
pub fn masked_cross_entropy(logits: &Mat, targets: &[Option<usize>]) -> (f64, Mat, usize, usize) {
    let n = targets.iter().flatten().count();
    let mut d = Mat::zeros(logits.rows, logits.cols);
    let mut loss = 0.0;
    let mut hits = 0;
    for (i, t) in targets.iter().enumerate() {
        let Some(t) = *t else { continue };
        let row = logits.row(i);
        let lse = log_sum_exp(row);
        loss += lse - row[t];
        if argmax(row) == t {
            hits += 1;
        }
        for (dj, l) in d.row_mut(i).iter_mut().zip(row) {
            *dj = (l - lse).exp() / n as f64;
        }
        d.row_mut(i)[t] -= 1.0 / n as f64;
    }
    (loss / n.max(1) as f64, d, hits, n)
}

/// Loss (and, with `grads`, its gradient) of one example.
pub fn example_loss(
    model: &FusionModel,
    ex: &Stage2Example,
    rng: Option<&mut seed::Rng>,
    grads: Option<&mut FusionParams>,
) -> Result<(f64, usize, usize)> {
    if ex.response_ids.is_empty() {
        return Err(Error::InvalidSample { id: ex.id.clone(), reason: "empty response".into() });
    }
    let ids: Vec<usize> = ex.prompt_ids.iter().chain(&ex.response_ids).copied().collect();
    let prepared = model.prepare(&ids, ex.inputs())?;
    let targets = response_targets(&prepared.proc, ex.response_ids.len());
    let (hidden, cache) = model.forward_train(&prepared, rng)?;
    let rows: Vec<usize> = (0..targets.len()).filter(|&i| targets[i].is_some()).collect();
    let h = Mat::from_vec(rows.len(), hidden.cols, rows.iter().flat_map(|&r| hidden.row(r).to_vec()).collect());
    let logits = lm_logits(&model.params, &h);
    let compact: Vec<Option<usize>> = rows.iter().map(|&r| targets[r]).collect();
    let (loss, d, hits, n) = masked_cross_entropy(&logits, &compact);
    if let Some(g) = grads {
        model.backward_from_logits(&prepared, &cache, &hidden, &rows, &d, g);
    }
    Ok((loss, hits, n))
}

/// Teacher-forced next-token accuracy over response tokens.
pub fn token_accuracy(model: &FusionModel, data: &[Stage2Example], indices: &[usize]) -> Result<f64> {
    let (mut hits, mut total) = (0, 0);
    for &i in indices {
        let (_, h, n) = example_loss(model, &data[i], None, None)?;
        hits += h;
        total += n;
    }
    Ok(hits as f64 / total.max(1) as f64)
}

pub struct Stage2Outcome {
    pub model: FusionModel,
    pub report: TrainReport,
}

struct Specializer<'a> {
    model: FusionModel,
    data: &'a [Stage2Example],
    val: Vec<usize>,
}

impl Trainee for Specializer<'_> {
    type Grads = FusionParams;
    type Snapshot = FusionParams;

    fn zero_grads(&self) -> FusionParams {
        self.model.params.zeros_like()
    }

    fn scale_grads(g: &mut FusionParams, s: f64) {
        g.scale(s);
    }

    fn slots<'b>(&'b mut self, g: &'b FusionParams) -> Vec<Option<Slot<'b>>> {
        fusion_slots(&mut self.model.params, g)
    }

    fn accumulate(&self, index: usize, rng: Option<&mut seed::Rng>, g: &mut FusionParams) -> Result<f64> {
        example_loss(&self.model, &self.data[index], rng, Some(g)).map(|r| r.0)
    }

    fn val_metric(&self) -> Result<f64> {
        token_accuracy(&self.model, self.data, &self.val)
    }

    fn snapshot(&self) -> FusionParams {
        self.model.params.clone()
    }

    fn restore(&mut self, s: FusionParams) {
        self.model.params = s;
    }
}

/// Backbone specialization with a seeded train/validation holdout.
pub fn train_stage2(model: FusionModel, data: &[Stage2Example], cfg: &StageConfig, out: Option<&Path>) -> Result<Stage2Outcome> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (train, val) = holdout(data.len(), cfg.val_fraction, cfg.seed);
    train_stage2_split(model, data, &train, &val, cfg, out)
}

/// Backbone specialization on explicit train/validation indices into `data`.
pub fn train_stage2_split(
    model: FusionModel,
    data: &[Stage2Example],
    train: &[usize],
    val: &[usize],
    cfg: &StageConfig,
    out: Option<&Path>,
) -> Result<Stage2Outcome> {
    let mut model = model;
    model.params.set_frozen(cfg.frozen_groups.iter().copied());
    let mut t = Specializer { model, data, val: val.to_vec() };
    let mut report = fit(&mut t, train, val.len(), cfg, true)?;
    if let Some(dir) = out {
        let path = dir.join(Stage::Specialize.checkpoint_name());
        checkpoint::save(&path, &t.model, &format!("seed {} stage specialize", cfg.seed))?;
        report.checkpoints.push(path.display().to_string());
    }
    Ok(Stage2Outcome { model: t.model, report })
}
