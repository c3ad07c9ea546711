//! End-to-end run on the conjunction task: two-stage training, the seven-mask
//! ablation and congruent-versus-conflict entropy.

use std::path::Path;

use serde::Serialize;

use super::fusion::{fusion_vocab, FusionTask, COMPACT_TEMPLATE, FUSION_LABELS, FUSION_QUESTION};
use crate::curation::{build_conflict_sets, build_mcq, synthesize_matched, McqItem};
use crate::evaluation::{
    ablation_grid, predictive_entropy, uq_report, AblationRow, EntropyRecord, EvalConfig, McqTemplate, UqConfig, UqGroup,
    UqSummary,
};
use crate::model::vocab::{TS_END, TS_START, TS_UNIT};
use crate::model::{FusionConfig, FusionModel, TsEncoderConfig, VisionConfig};
use crate::seed;
use crate::training::{mcq_examples, train_stage1, train_stage2_split, Stage1Example, StageConfig, TrainReport};
use crate::Result;

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub n_train: usize,
    /// Held-out congruent tri-modal items driving stage-2 early stopping.
    pub n_val: usize,
    pub n_eval: usize,
    pub n_uq: usize,
    /// Share of stage-2 examples that keep all three modalities.
    pub full_fraction: f64,
    /// Share of training items that are disagreement episodes.
    pub disagreement: f64,
    pub model: FusionConfig,
    pub stage1: StageConfig,
    pub stage2: StageConfig,
    pub uq: UqConfig,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn new(seed: u64) -> Self {
        let task = FusionTask::default();
        let model = FusionConfig {
            d_model: 32,
            n_layers: 2,
            n_heads: 4,
            ffn_mult: 4,
            max_seq_len: 64,
            vocab_size: 0,
            ts: TsEncoderConfig { in_channels: 3, conv_channels: vec![16], kernel: 3, d_ts: 16, pool: 1 },
            vision: VisionConfig { patch: task.config.patch, channels: task.config.channels },
            audio: crate::model::AudioConfig { mel_bins: task.config.mel_bins },
            dropout: 0.0,
        };
        let stage1 = StageConfig { learning_rate: 3e-3, max_epochs: 5, patience_epochs: 2, ..StageConfig::align(seed) };
        let stage2 = StageConfig {
            learning_rate: 2e-3,
            weight_decay: 0.01,
            per_device_batch: 8,
            grad_accum_steps: 1,
            warmup_frac: 0.05,
            max_epochs: 60,
            patience_epochs: 20,
            ..StageConfig::specialize(seed)
        };
        ExperimentConfig {
            n_train: 5000,
            n_val: 400,
            n_eval: 400,
            n_uq: 50,
            full_fraction: 0.5,
            disagreement: 0.1,
            model,
            stage1,
            stage2,
            uq: UqConfig::default(),
            seed,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub stage1: TrainReport,
    pub stage2: TrainReport,
    pub ablation: Vec<AblationRow>,
    pub uq: UqSummary,
    #[serde(skip)]
    pub entropy: Vec<EntropyRecord>,
}

impl ExperimentReport {
    pub fn accuracy(&self, mask: &str) -> Option<f64> {
        self.ablation.iter().find(|r| r.modalities == mask).map(|r| r.accuracy)
    }
}

pub fn eval_config() -> EvalConfig {
    EvalConfig {
        template: McqTemplate::new(COMPACT_TEMPLATE).expect("valid template"),
        question: FUSION_QUESTION.to_string(),
        answer_prefix: None,
    }
}

/// Congruent and conflict MCQ items, `n` each, built from fresh pools.
pub fn uq_items(task: &FusionTask, n: usize, seed: u64) -> Result<(Vec<McqItem>, Vec<McqItem>)> {
    let seed = seed::derive(seed, "uq");
    let (mut av, mut ts) = task.pools(4 * n, 4 * n, seed);
    for s in av.iter_mut().chain(ts.iter_mut()) {
        s.id = format!("uq-{}", s.id);
    }
    let (matched, _) = synthesize_matched(&av, &ts, seed);
    let (congruent, conflict) = build_conflict_sets(&matched, &ts, n, seed)?;
    let mcq = |v: Vec<_>| v.iter().map(|s| build_mcq(s, &task.taxonomy, seed)).collect::<Result<Vec<_>>>();
    Ok((mcq(congruent)?, mcq(conflict)?))
}

pub fn run_experiment(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<(FusionModel, ExperimentReport)> {
    let task = FusionTask::default();
    let train = task.training_set(cfg.n_train, cfg.disagreement, "train", cfg.seed)?;
    let eval_items = task.benchmark(cfg.n_eval, "eval", cfg.seed)?;
    let model = FusionModel::init(cfg.model.clone(), fusion_vocab(), cfg.seed)?.with_ts_tokens(cfg.seed)?;

    let marker = model.vocab.encode(&format!("{TS_START}{TS_UNIT}{TS_END}"));
    let s1: Vec<Stage1Example> = train
        .iter()
        .map(|it| Stage1Example {
            id: it.sample.id.clone(),
            prompt_ids: marker.clone(),
            ts: it.sample.ts.as_ref().expect("tri-modal").values.clone(),
            target: it.sample.label.as_ref().expect("labelled").id,
        })
        .collect();
    let aligned = train_stage1(model, &s1, FUSION_LABELS.len(), &cfg.stage1, out)?;

    let eval = eval_config();
    let val_items = task.benchmark(cfg.n_val, "val", cfg.seed)?;
    let mut s2 = mcq_examples(&train, &aligned.model.vocab, &eval, cfg.full_fraction, cfg.seed)?;
    s2.extend(mcq_examples(&val_items, &aligned.model.vocab, &eval, 1.0, cfg.seed)?);
    let train_idx: Vec<usize> = (0..train.len()).collect();
    let val_idx: Vec<usize> = (train.len()..s2.len()).collect();
    let tuned = train_stage2_split(aligned.model, &s2, &train_idx, &val_idx, &cfg.stage2, out)?;
    let model = tuned.model;

    let ablation = ablation_grid(&model, &eval_items, &eval)?;
    let (congruent, conflict) = uq_items(&task, cfg.n_uq, cfg.seed)?;
    let mut entropy = Vec::new();
    for (items, group) in [(&congruent, UqGroup::Congruent), (&conflict, UqGroup::Conflict)] {
        for it in items.iter() {
            entropy.push(predictive_entropy(&model, it, group, &eval, &cfg.uq, cfg.seed)?);
        }
    }
    let (c, k): (Vec<_>, Vec<_>) = entropy.iter().cloned().partition(|r| r.group == UqGroup::Congruent);
    let uq = uq_report(&c, &k)?;
    Ok((model, ExperimentReport { stage1: aligned.report, stage2: tuned.report, ablation, uq, entropy }))
}
