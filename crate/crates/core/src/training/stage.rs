use std::collections::BTreeSet;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::early::early_stop;
use super::optim::{global_norm, AdamW, Slot};
use super::schedule::cosine_warmup_lr;
use crate::config::FlatConfig;
use crate::model::Group;
use crate::seed;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Align,
    Specialize,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Align => "align",
            Stage::Specialize => "specialize",
        }
    }

    pub fn checkpoint_name(self) -> &'static str {
        match self {
            Stage::Align => "aligned",
            Stage::Specialize => "final",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" | "align" => Ok(Stage::Align),
            "2" | "specialize" => Ok(Stage::Specialize),
            _ => Err(Error::Config(format!("unknown stage `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageConfig {
    pub stage: Stage,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub per_device_batch: usize,
    pub grad_accum_steps: usize,
    pub warmup_frac: f64,
    pub max_epochs: usize,
    pub patience_epochs: usize,
    pub frozen_groups: BTreeSet<Group>,
    /// Global gradient-norm limit; `None` disables clipping.
    pub clip_norm: Option<f64>,
    pub val_fraction: f64,
    pub seed: u64,
}

impl StageConfig {
    pub fn align(seed: u64) -> Self {
        let mut frozen: BTreeSet<Group> = Group::ALL.into_iter().collect();
        frozen.remove(&Group::TsProjector);
        StageConfig {
            stage: Stage::Align,
            learning_rate: 1e-4,
            weight_decay: 0.0,
            per_device_batch: 1,
            grad_accum_steps: 2,
            warmup_frac: 0.03,
            max_epochs: 10,
            patience_epochs: 1,
            frozen_groups: frozen,
            clip_norm: Some(1.0),
            val_fraction: 0.1,
            seed,
        }
    }

    pub fn specialize(seed: u64) -> Self {
        StageConfig {
            stage: Stage::Specialize,
            learning_rate: 2e-5,
            max_epochs: 5,
            frozen_groups: [Group::TsEncoder, Group::TsProjector, Group::VisionEncoder, Group::AudioEncoder]
                .into_iter()
                .collect(),
            ..StageConfig::align(seed)
        }
    }

    pub fn for_stage(stage: Stage, seed: u64) -> Self {
        match stage {
            Stage::Align => Self::align(seed),
            Stage::Specialize => Self::specialize(seed),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("{} stage: {m}", self.stage)));
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.warmup_frac) {
            return bad("warmup_frac must lie in [0, 1)");
        }
        if self.per_device_batch == 0 || self.grad_accum_steps == 0 {
            return bad("batch and accumulation steps must be positive");
        }
        if self.weight_decay < 0.0 || !(0.0..1.0).contains(&self.val_fraction) {
            return bad("weight_decay must be nonnegative and val_fraction in [0, 1)");
        }
        if matches!(self.clip_norm, Some(c) if !(c > 0.0)) {
            return bad("clip_norm must be positive");
        }
        Ok(())
    }

    /// Reads `<prefix>.<field>` overrides. `frozen_groups` is a comma list of
    /// group names (`backbone` expands) or `none`; `clip_norm = off` disables clipping.
    pub fn from_flat(cfg: &mut FlatConfig, prefix: &str, base: &StageConfig) -> Result<Self> {
        let k = |f: &str| format!("{prefix}.{f}");
        let mut c = base.clone();
        c.learning_rate = cfg.get_or(&k("learning_rate"), c.learning_rate)?;
        c.weight_decay = cfg.get_or(&k("weight_decay"), c.weight_decay)?;
        c.per_device_batch = cfg.get_or(&k("per_device_batch"), c.per_device_batch)?;
        c.grad_accum_steps = cfg.get_or(&k("grad_accum_steps"), c.grad_accum_steps)?;
        c.warmup_frac = cfg.get_or(&k("warmup_frac"), c.warmup_frac)?;
        c.max_epochs = cfg.get_or(&k("max_epochs"), c.max_epochs)?;
        c.patience_epochs = cfg.get_or(&k("patience_epochs"), c.patience_epochs)?;
        c.val_fraction = cfg.get_or(&k("val_fraction"), c.val_fraction)?;
        if let Some(v) = cfg.raw(&k("clip_norm")) {
            c.clip_norm = match v.as_str() {
                "off" | "none" => None,
                s => Some(s.parse().map_err(|_| Error::Config(format!("{}: bad number `{s}`", k("clip_norm"))))?),
            };
        }
        if let Some(v) = cfg.raw(&k("frozen_groups")) {
            c.frozen_groups = BTreeSet::new();
            for name in v.split(',').map(str::trim).filter(|s| !s.is_empty() && *s != "none") {
                c.frozen_groups.extend(Group::parse_set(name)?);
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn render(&self, prefix: &str) -> String {
        let mut s = String::new();
        let frozen: Vec<&str> = self.frozen_groups.iter().map(|g| g.name()).collect();
        let _ = writeln!(s, "{prefix}.learning_rate = {}", self.learning_rate);
        let _ = writeln!(s, "{prefix}.weight_decay = {}", self.weight_decay);
        let _ = writeln!(s, "{prefix}.per_device_batch = {}", self.per_device_batch);
        let _ = writeln!(s, "{prefix}.grad_accum_steps = {}", self.grad_accum_steps);
        let _ = writeln!(s, "{prefix}.warmup_frac = {}", self.warmup_frac);
        let _ = writeln!(s, "{prefix}.max_epochs = {}", self.max_epochs);
        let _ = writeln!(s, "{prefix}.patience_epochs = {}", self.patience_epochs);
        let _ = writeln!(s, "{prefix}.val_fraction = {}", self.val_fraction);
        let _ = writeln!(s, "{prefix}.clip_norm = {}", self.clip_norm.map_or("off".to_string(), |c| c.to_string()));
        let _ = writeln!(s, "{prefix}.frozen_groups = {}", if frozen.is_empty() { "none".into() } else { frozen.join(",") });
        s
    }

    pub fn steps_per_epoch(&self, n_train: usize) -> usize {
        n_train.div_ceil(self.per_device_batch * self.grad_accum_steps)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_metric: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub stage: String,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub total_steps: usize,
    pub n_train: usize,
    pub n_val: usize,
    pub checkpoints: Vec<String>,
}

impl TrainReport {
    pub fn val_history(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.val_metric).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_metric,steps\n");
        for e in &self.epochs {
            let _ = writeln!(s, "{},{},{},{}", e.epoch, e.train_loss, e.val_metric, e.steps);
        }
        s
    }
}

/// Deterministic train/validation split of `0..n`. With one item both sides
/// share it.
pub fn holdout(n: usize, val_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    use rand::seq::SliceRandom;
    if n <= 1 {
        return ((0..n).collect(), (0..n).collect());
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seed::rng(seed, "holdout"));
    let n_val = ((n as f64 * val_fraction).round() as usize).clamp(1, n - 1);
    let mut val = idx[..n_val].to_vec();
    let mut train = idx[n_val..].to_vec();
    val.sort_unstable();
    train.sort_unstable();
    (train, val)
}

/// What the shared loop needs from a stage.
pub(crate) trait Trainee {
    type Grads;
    type Snapshot;

    fn zero_grads(&self) -> Self::Grads;
    fn scale_grads(grads: &mut Self::Grads, s: f64);
    fn slots<'a>(&'a mut self, grads: &'a Self::Grads) -> Vec<Option<Slot<'a>>>;
    /// Adds the gradient of example `index`'s loss into `grads`, returning the loss.
    fn accumulate(&self, index: usize, rng: Option<&mut seed::Rng>, grads: &mut Self::Grads) -> Result<f64>;
    fn val_metric(&self) -> Result<f64>;
    fn snapshot(&self) -> Self::Snapshot;
    fn restore(&mut self, snapshot: Self::Snapshot);
}

/// Runs epochs over `train` (indices into the trainee's data) with shuffling,
/// accumulation, clipping, the warmup-cosine schedule and early stopping. The
/// best epoch's parameters are restored at the end.
pub(crate) fn fit<T: Trainee>(
    t: &mut T,
    train: &[usize],
    n_val: usize,
    cfg: &StageConfig,
    dropout: bool,
) -> Result<TrainReport> {
    use rand::seq::SliceRandom;
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let per_step = cfg.per_device_batch * cfg.grad_accum_steps;
    let steps_per_epoch = cfg.steps_per_epoch(train.len());
    let total = steps_per_epoch * cfg.max_epochs;
    let mut opt = AdamW::new(cfg.weight_decay);
    let mut step = 0usize;
    let mut epochs = Vec::new();
    let mut history = Vec::new();
    let mut best: Option<T::Snapshot> = None;
    let mut stopped_early = false;
    for epoch in 1..=cfg.max_epochs {
        let mut order = train.to_vec();
        order.shuffle(&mut seed::rng(cfg.seed, &format!("{}/order/{epoch}", cfg.stage)));
        let mut loss_sum = 0.0;
        for chunk in order.chunks(per_step) {
            let mut grads = t.zero_grads();
            for &i in chunk {
                let mut rng = dropout.then(|| seed::rng(cfg.seed, &format!("{}/dropout/{epoch}/{i}", cfg.stage)));
                let loss = t.accumulate(i, rng.as_mut(), &mut grads)?;
                if !loss.is_finite() {
                    return Err(Error::NonFiniteLoss(step));
                }
                loss_sum += loss;
            }
            T::scale_grads(&mut grads, 1.0 / chunk.len() as f64);
            let lr = cosine_warmup_lr(step + 1, total, cfg.learning_rate, cfg.warmup_frac);
            let slots = t.slots(&grads);
            let norm = global_norm(&slots);
            if !norm.is_finite() {
                return Err(Error::NonFiniteLoss(step));
            }
            drop(slots);
            if let Some(limit) = cfg.clip_norm {
                if norm > limit {
                    T::scale_grads(&mut grads, limit / norm);
                }
            }
            opt.step(t.slots(&grads), lr);
            step += 1;
        }
        let val = t.val_metric()?;
        log::info!("{} epoch {epoch}: train loss {:.4}, val {:.4}", cfg.stage, loss_sum / train.len() as f64, val);
        history.push(val);
        epochs.push(EpochRecord { epoch, train_loss: loss_sum / train.len() as f64, val_metric: val, steps: step });
        let (stop, best_epoch) = early_stop(&history, cfg.patience_epochs);
        if best_epoch == epoch {
            best = Some(t.snapshot());
        }
        if stop && epoch < cfg.max_epochs {
            stopped_early = true;
            break;
        }
    }
    let (_, best_epoch) = early_stop(&history, cfg.patience_epochs);
    if let Some(s) = best {
        t.restore(s);
    }
    Ok(TrainReport {
        stage: cfg.stage.name().to_string(),
        epochs,
        best_epoch,
        stopped_early,
        total_steps: step,
        n_train: train.len(),
        n_val,
        checkpoints: Vec::new(),
    })
}
